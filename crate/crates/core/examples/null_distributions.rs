//! Simulated null law of the scaled sup-distance against the Kolmogorov law,
//! plus the Packing statistic against its Gumbel limit.
//!
//! cargo run --release --example null_distributions

use spherical_uniformity::harness::{run_null_distribution_check, simulate_statistics};
use spherical_uniformity::hypothesis::sup_distance_sorted;
use spherical_uniformity::specfun::{kolmogorov_cdf, kolmogorov_quantile, packing_gumbel_cdf};
use spherical_uniformity::{Method, ModelSpec};

fn main() -> spherical_uniformity::Result<()> {
    for (n, p) in [(20, 20), (80, 80), (80, 800)] {
        let chk = run_null_distribution_check(n, p, 2000, 3)?;
        println!("n={n:>3} p={p:>3}: KS to Kolmogorov {:.4}, size at 5% {:.3}", chk.ks, chk.size_05);
    }
    let z = run_null_distribution_check(80, 80, 2000, 3)?.standardized;
    println!("quantile   simulated  Kolmogorov");
    for q in [0.5, 0.9, 0.95, 0.99] {
        let sim = z[((q * z.len() as f64) as usize).min(z.len() - 1)];
        println!("{q:>8}   {sim:>9.4}  {:>10.4}", kolmogorov_quantile(1.0 - q)?);
    }
    println!("sample CDF at 1.0: {:.4} vs {:.4}", z.partition_point(|&v| v <= 1.0) as f64 / z.len() as f64, kolmogorov_cdf(1.0));

    let stats = simulate_statistics(&ModelSpec::Uniform { p: 2000 }, 100, 1000, 9, 0, 0, false)?;
    let mut packing: Vec<f64> = stats.iter().filter_map(|s| s.get(Method::Packing)).collect();
    packing.sort_unstable_by(f64::total_cmp);
    println!("packing n=100 p=2000: KS to Gumbel {:.4}", sup_distance_sorted(&packing, packing_gumbel_cdf));
    Ok(())
}
