//! Power curve from a JSON config, written as CSV and SVG.
//!
//! cargo run --release --example power_curve -- [config.json] [out.csv]

use spherical_uniformity::harness::{export_csv, load_config, power_curve_svg, run_power_curve};

fn main() -> spherical_uniformity::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/configs/fvml_fig1.json").into());
    let out = args.next().unwrap_or_else(|| "power_curve.csv".into());
    let mut cfg = load_config(&path)?;
    for w in cfg.validate()? {
        eprintln!("warning: {w}");
    }
    cfg.reps = cfg.reps.min(500);
    let curve = run_power_curve(&cfg)?;
    for m in curve.methods() {
        let rates: Vec<String> = curve.series(m).iter().map(|c| format!("{:.3}", c.rate)).collect();
        println!("{:<13} {}", m.name(), rates.join(" "));
    }
    export_csv(&curve, &out)?;
    let svg = out.replace(".csv", ".svg");
    std::fs::write(&svg, power_curve_svg(&curve, Some(cfg.alpha)))?;
    println!("wrote {out} and {svg} ({:.1} s)", curve.wall_clock_secs);
    Ok(())
}
