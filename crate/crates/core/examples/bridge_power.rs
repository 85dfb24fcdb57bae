//! Limiting power of the sup-distance test from the shifted Brownian bridge,
//! plus closed-form competitor powers under the low-rank model.
//!
//! cargo run --release --example bridge_power

use spherical_uniformity::asymptotics::{
    competitor_low_rank_power, fvml_kappa, fvml_llr_second_moment, low_rank_k,
    predict_asymptotic_power, Competitor, ShiftFunction,
};

fn main() -> spherical_uniformity::Result<()> {
    println!("{:>5}{:>10}{:>12}", "tau", "fvml", "quadratic");
    for tau in [0.0, 0.5, 1.0, 1.5, 2.0, 4.0, 8.0] {
        let f = predict_asymptotic_power(Some(&ShiftFunction::fvml(tau)), 0.05, 10_000, 1)?;
        let q = predict_asymptotic_power(Some(&ShiftFunction::quadratic(tau)), 0.05, 10_000, 1)?;
        println!("{tau:>5}{f:>10.4}{q:>12.4}");
    }
    let (n, p) = (80, 80);
    println!("low rank n=p=80:");
    for tau in [2.0, 4.0, 8.0] {
        let k = low_rank_k(tau, n, p);
        let row: Vec<String> = [Competitor::Bingham, Competitor::Rayleigh2Sided, Competitor::Packing]
            .iter()
            .map(|&c| format!("{c:?}={:.3}", competitor_low_rank_power(c, n, p, k, 0.05).unwrap()))
            .collect();
        println!("  tau={tau} k={k}: {}", row.join(" "));
    }
    let kappa = fvml_kappa(1.0, 500, 500);
    println!(
        "second moment of the FvML likelihood ratio, n=p=500, tau=1: {:.4} (e^0.5 = {:.4})",
        fvml_llr_second_moment(500, 500, kappa)?,
        0.5f64.exp()
    );
    Ok(())
}
