//! Draw from each model family and summarize the pairwise inner products.
//!
//! cargo run --release --example samplers

use spherical_uniformity::{pairwise_inner_products, sample, ModelSpec, RngSeed};

fn main() -> spherical_uniformity::Result<()> {
    let p = 200;
    let models = [
        ModelSpec::Uniform { p },
        ModelSpec::Fvml { p, kappa: 20.0, mu: None },
        ModelSpec::Watson { p, kappa: 80.0, mu: None },
        ModelSpec::LowRank { p, k: 20, rotate: true },
        ModelSpec::AlphaSpherical { p, alpha: 1.0 },
        ModelSpec::CapMixture { p, eps: None },
    ];
    println!("{:<16}{:>10}{:>10}{:>10}{:>10}", "family", "mean", "sd", "min", "max");
    for model in &models {
        let s = sample(model, 60, RngSeed::new(4, 0))?;
        let v = pairwise_inner_products(&s);
        let vals = v.values();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let sd = (vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / vals.len() as f64).sqrt();
        println!(
            "{:<16}{:>10.4}{:>10.4}{:>10.4}{:>10.4}",
            model.family(),
            mean,
            sd,
            vals[0],
            vals[vals.len() - 1]
        );
    }
    println!("null sd is about 1/sqrt(p) = {:.4}", 1.0 / (p as f64).sqrt());
    Ok(())
}
