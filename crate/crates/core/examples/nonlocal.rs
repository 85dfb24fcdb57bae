//! Non-local alternatives: cap mixture around a simplex frame and
//! alpha-spherical laws.
//!
//! cargo run --release --example nonlocal

use spherical_uniformity::harness::{run_nonlocal_experiment, NonlocalKind};

fn main() -> spherical_uniformity::Result<()> {
    let runs = [
        ("cap mixture", NonlocalKind::CapMixture, 30, 4000),
        ("alpha-spherical (1)", NonlocalKind::AlphaSpherical { alpha: 1.0 }, 50, 2000),
    ];
    for (name, kind, n, p) in runs {
        let r = run_nonlocal_experiment(kind, n, p, 0.05, 100, 3)?;
        println!("{name}, n={n}, p={p}");
        for m in &r.rates {
            println!("  {:<13} {:.3} (se {:.3})", m.method.name(), m.rate, m.se);
        }
        println!(
            "  mean |R_n| {:.3} (bound {:.3}), share B_n<0 {:.2}, share P_n low {:.2}",
            r.mean_abs_r, r.r_bound, r.share_b_negative, r.share_p_low
        );
    }
    Ok(())
}
