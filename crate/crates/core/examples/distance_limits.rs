//! n·d for the three parametric families next to their limits.
//!
//! cargo run --release --example distance_limits

use spherical_uniformity::asymptotics::{distance_d, estimate_distance_d_mc, ShiftFunction};
use spherical_uniformity::harness::FamilyTemplate;
use spherical_uniformity::ModelSpec;

fn main() -> spherical_uniformity::Result<()> {
    let cases = [
        ("fvml", FamilyTemplate::Fvml { mu: None }, 1.0, 500, 500, ShiftFunction::fvml(1.0)),
        ("low_rank", FamilyTemplate::LowRank { rotate: false }, 2.0, 1000, 10_000, ShiftFunction::quadratic(2.0)),
        ("watson", FamilyTemplate::Watson { mu: None }, 1.0, 1000, 3000, ShiftFunction::quadratic(1.0)),
    ];
    for (name, family, tau, n, p, shift) in cases {
        let model = family.model(tau, n, p)?;
        let nd = n as f64 * distance_d(&model)?;
        println!("{name:<9} tau={tau} n={n:>5} p={p:>6}: n*d = {nd:.5}, limit {:.5}", shift.limit_nd());
    }
    let cap = estimate_distance_d_mc(&ModelSpec::CapMixture { p: 2000, eps: None }, 50_000, 1)?;
    println!("cap mixture p=2000: Monte Carlo d = {cap:.3}");
    Ok(())
}
