//! Run every test on a null sample and on a concentrated FvML sample.
//!
//! cargo run --release --example test_sample

use spherical_uniformity::{run_test, sample, Calibration, Method, ModelSpec, RngSeed, Tail};

fn main() -> spherical_uniformity::Result<()> {
    let (n, p) = (80, 80);
    let models = [
        ModelSpec::Uniform { p },
        ModelSpec::Fvml { p, kappa: 8.0, mu: None },
    ];
    for model in &models {
        let s = sample(model, n, RngSeed::new(1, 0))?;
        println!("{} sample, n={n}, p={p}", model.family());
        for method in Method::ALL {
            let o = run_test(&s, method, 0.05, Tail::Upper, Calibration::Asymptotic)?;
            println!(
                "  {:<13} stat={:>10.5} z={:>8.3} p={:.4} reject={}",
                method.name(),
                o.statistic,
                o.standardized,
                o.p_value,
                o.reject
            );
        }
    }
    Ok(())
}
