//! Monte Carlo critical values against the asymptotic ones, and a
//! Monte Carlo-calibrated test.
//!
//! cargo run --release --example calibrate

use spherical_uniformity::hypothesis::{asymptotic_critical_values, standardize};
use spherical_uniformity::{
    calibrate_critical_value_mc, run_test, sample, Calibration, Method, ModelSpec, RngSeed, Tail,
};

fn main() -> spherical_uniformity::Result<()> {
    let (n, p) = (30, 30);
    for m in [Method::SupDistance, Method::Rayleigh, Method::Bingham, Method::Packing] {
        let mc = calibrate_critical_value_mc(n, p, m, 0.05, 2000, 5)?;
        let (_, hi) = asymptotic_critical_values(m, 0.05, Tail::Upper)?;
        println!(
            "{:<13} MC critical value {:>9.5} (standardized {:>7.4}), asymptotic {:>7.4}",
            m.name(),
            mc,
            standardize(m, mc, n),
            hi
        );
    }
    let s = sample(&ModelSpec::Watson { p, kappa: 10.0, mu: None }, n, RngSeed::new(8, 0))?;
    let o = run_test(&s, Method::SupDistance, 0.05, Tail::Upper, Calibration::MonteCarlo { reps: 2000, seed: 5 })?;
    println!("Watson sample: {}", o.csv_row());
    Ok(())
}
