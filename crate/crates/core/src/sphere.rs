//! Samples of unit vectors and their pairwise inner products.

use std::io::Read;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};

const ZERO_NORM: f64 = 1e-12;
const UNIT_TOL: f64 = 1e-6;
const ORTHO_TOL: f64 = 1e-8;

/// `n` observations on the unit sphere of `R^p`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitPointSet {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl UnitPointSet {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.p)
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Builds a sample from row vectors.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], normalize: bool) -> Result<Self> {
        let p = rows.first().map_or(0, |r| r.as_ref().len());
        let mut raw = Vec::with_capacity(rows.len() * p);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != p {
                return Err(Error::BadShape(format!(
                    "row {i} has {} entries, expected {p}",
                    r.len()
                )));
            }
            raw.extend_from_slice(r);
        }
        make_unit_point_set(raw, rows.len(), p, normalize)
    }

    /// Wraps rows produced by a sampler that already guarantees unit norm.
    pub(crate) fn from_unit_rows(data: Vec<f64>, n: usize, p: usize) -> Self {
        debug_assert_eq!(data.len(), n * p);
        UnitPointSet { n, p, data }
    }
}

/// Validates (and optionally renormalizes) `n` rows of length `p`.
///
/// Rows are always rescaled to exact unit norm; with `normalize` off a row
/// may deviate from unit length by at most 1e-6 before rescaling.
pub fn make_unit_point_set(
    mut raw: Vec<f64>,
    n: usize,
    p: usize,
    normalize: bool,
) -> Result<UnitPointSet> {
    if n < 2 || p < 2 {
        return Err(Error::BadShape(format!("need n >= 2 and p >= 2, got n={n}, p={p}")));
    }
    if raw.len() != n * p {
        return Err(Error::BadShape(format!(
            "{} values cannot form a {n}x{p} sample",
            raw.len()
        )));
    }
    for (i, row) in raw.chunks_exact_mut(p).enumerate() {
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::BadShape(format!("row {i} has a non-finite entry")));
        }
        let norm = dot(row, row).sqrt();
        if norm < ZERO_NORM {
            return Err(Error::ZeroRow { row: i });
        }
        if !normalize && (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::NotUnit { row: i, norm });
        }
        for v in row.iter_mut() {
            *v = (*v / norm).clamp(-1.0, 1.0);
        }
    }
    Ok(UnitPointSet { n, p, data: raw })
}

/// Dot product with a fixed summation order (four interleaved partial sums).
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[2]) + (acc[1] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

/// Sorted pairwise inner products `X_i·X_j`, `i < j`.
#[derive(Clone, Debug, PartialEq)]
pub struct InnerProductList {
    values: Vec<f64>,
    n: usize,
}

impl InnerProductList {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Largest `s²` over all pairs.
    pub fn max_square(&self) -> f64 {
        match (self.values.first(), self.values.last()) {
            (Some(a), Some(b)) => (a * a).max(b * b),
            _ => 0.0,
        }
    }
}

/// Unsorted pairwise products in row order (`(0,1), (0,2), …, (n-2,n-1)`).
pub fn pairwise_inner_products_unsorted(s: &UnitPointSet) -> Vec<f64> {
    let n = s.n;
    let chunks: Vec<Vec<f64>> = (0..n.saturating_sub(1))
        .into_par_iter()
        .map(|i| {
            let xi = s.row(i);
            (i + 1..n)
                .map(|j| dot(xi, s.row(j)).clamp(-1.0, 1.0))
                .collect()
        })
        .collect();
    chunks.concat()
}

pub fn pairwise_inner_products(s: &UnitPointSet) -> InnerProductList {
    let mut values = pairwise_inner_products_unsorted(s);
    values.sort_unstable_by(f64::total_cmp);
    InnerProductList { values, n: s.n }
}

/// Wraps externally computed inner products (e.g. from sampled pairs); the
/// values are clamped and sorted.
pub fn inner_product_list(mut values: Vec<f64>, n: usize) -> InnerProductList {
    for v in &mut values {
        *v = v.clamp(-1.0, 1.0);
    }
    values.sort_unstable_by(f64::total_cmp);
    InnerProductList { values, n }
}

/// Maximum entry of `|QᵀQ - I|` for a row-major `p×p` matrix.
pub fn orthogonality_defect(q: &[f64], p: usize) -> f64 {
    let mut worst = 0.0f64;
    for a in 0..p {
        for b in a..p {
            let mut s = 0.0;
            for r in 0..p {
                s += q[r * p + a] * q[r * p + b];
            }
            let target = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((s - target).abs());
        }
    }
    worst
}

/// Replaces every row `x` by `Qx`, with `Q` row-major `p×p`.
pub fn apply_rotation(s: &UnitPointSet, q: &[f64]) -> Result<UnitPointSet> {
    let p = s.p;
    if q.len() != p * p {
        return Err(Error::BadShape(format!(
            "rotation has {} entries, expected {}",
            q.len(),
            p * p
        )));
    }
    let defect = orthogonality_defect(q, p);
    if !(defect <= ORTHO_TOL) {
        return Err(Error::NotOrthogonal(defect));
    }
    let mut out = Vec::with_capacity(s.data.len());
    for x in s.rows() {
        for qrow in q.chunks_exact(p) {
            out.push(dot(qrow, x).clamp(-1.0, 1.0));
        }
    }
    Ok(UnitPointSet {
        n: s.n,
        p,
        data: out,
    })
}

/// Reads a sample from CSV text: one observation per line, `p` numeric
/// fields, optional header line.
///
/// A first record containing any non-numeric field is treated as a header.
pub fn read_csv<R: Read>(reader: R, normalize: bool) -> Result<UnitPointSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut data = Vec::new();
    let mut p = 0usize;
    let mut n = 0usize;
    for (idx, rec) in rdr.records().enumerate() {
        let line = idx + 1;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            field: String::new(),
            msg: e.to_string(),
        })?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: Vec<std::result::Result<f64, _>> = rec.iter().map(str::parse::<f64>).collect();
        if idx == 0 && parsed.iter().any(|v| v.is_err()) {
            continue;
        }
        if n == 0 {
            p = rec.len();
        } else if rec.len() != p {
            return Err(Error::Parse {
                line,
                field: String::new(),
                msg: format!("expected {p} fields, found {}", rec.len()),
            });
        }
        for (col, v) in parsed.into_iter().enumerate() {
            match v {
                Ok(x) => data.push(x),
                Err(e) => {
                    return Err(Error::Parse {
                        line,
                        field: format!("column {}", col + 1),
                        msg: e.to_string(),
                    })
                }
            }
        }
        n += 1;
    }
    make_unit_point_set(data, n, p, normalize)
}

pub fn read_csv_path(path: impl AsRef<Path>, normalize: bool) -> Result<UnitPointSet> {
    read_csv(std::fs::File::open(path)?, normalize)
}

/// Writes one observation per line with full round-trip precision.
pub fn write_csv<W: std::io::Write>(s: &UnitPointSet, mut w: W) -> Result<()> {
    for row in s.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_unit_rows() {
        let s = UnitPointSet::from_rows(&[[1.0, 0.0], [0.0, 1.0]], false).unwrap();
        assert_eq!(s.n(), 2);
        assert_eq!(s.row(1), &[0.0, 1.0]);
    }

    #[test]
    fn normalizes_3_4_5() {
        let s = UnitPointSet::from_rows(&[[3.0, 4.0], [3.0, 4.0]], true).unwrap();
        assert!((s.row(0)[0] - 0.6).abs() < 1e-15);
        assert!((s.row(1)[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_rows() {
        let zero = UnitPointSet::from_rows(&[[1.0, 0.0, 0.0], [0.0, 0.0, 0.0]], true);
        assert!(matches!(zero, Err(Error::ZeroRow { row: 1 })));
        let off = UnitPointSet::from_rows(&[[1.0, 0.0], [0.0, 1.1]], false);
        assert!(matches!(off, Err(Error::NotUnit { row: 1, .. })));
        assert!(matches!(
            make_unit_point_set(vec![1.0, 0.0], 1, 2, true),
            Err(Error::BadShape(_))
        ));
    }

    #[test]
    fn small_products() {
        let same = UnitPointSet::from_rows(&[[1.0, 0.0, 0.0], [1.0, 0.0, 0.0]], false).unwrap();
        assert_eq!(pairwise_inner_products(&same).values(), &[1.0]);
        let frame = UnitPointSet::from_rows(
            &[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            false,
        )
        .unwrap();
        assert_eq!(pairwise_inner_products(&frame).values(), &[0.0, 0.0, 0.0]);
        let four = UnitPointSet::from_rows(&[[1.0, 0.0], [0.0, 1.0], [0.6, 0.8], [-1.0, 0.0]], false)
            .unwrap();
        let l = pairwise_inner_products(&four);
        assert_eq!(l.len(), 6);
        assert!(l.values().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn identity_and_permutation() {
        let s = UnitPointSet::from_rows(&[[0.6, 0.8, 0.0], [0.0, 0.6, 0.8], [1.0, 0.0, 0.0]], false)
            .unwrap();
        let id = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        assert_eq!(apply_rotation(&s, &id).unwrap(), s);
        let perm = [0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0];
        let r = apply_rotation(&s, &perm).unwrap();
        assert_eq!(pairwise_inner_products(&r), pairwise_inner_products(&s));
        let skew = [1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        assert!(matches!(apply_rotation(&s, &skew), Err(Error::NotOrthogonal(_))));
    }

    #[test]
    fn csv_with_header() {
        let text = "x,y,z\n1,0,0\n0,2,0\n\n0,0,-1\n";
        let s = read_csv(text.as_bytes(), true).unwrap();
        assert_eq!((s.n(), s.p()), (3, 3));
        assert_eq!(s.row(1), &[0.0, 1.0, 0.0]);
        let bad = read_csv("1,0\n0,zz\n".as_bytes(), true);
        match bad {
            Err(Error::Parse { line, field, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(field, "column 2");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            read_csv("1,0\n0,1,0\n".as_bytes(), true),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let s = UnitPointSet::from_rows(&[[0.6, 0.8], [-0.28, 0.96]], true).unwrap();
        let mut buf = Vec::new();
        write_csv(&s, &mut buf).unwrap();
        assert_eq!(read_csv(buf.as_slice(), false).unwrap(), s);
    }
}
