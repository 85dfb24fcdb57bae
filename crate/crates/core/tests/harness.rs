use spherical_uniformity::harness::{
    export_csv, load_config, read_power_csv, run_nonlocal_experiment, run_null_distribution_check,
    run_power_curve, run_size_experiment, save_config, simulate_statistics, ExperimentConfig,
    FamilyTemplate, NonlocalKind,
};
use spherical_uniformity::hypothesis::{mc_null_statistics, sup_distance_sorted};
use spherical_uniformity::specfun::kolmogorov_cdf;
use spherical_uniformity::{calibrate_critical_value_mc, Calibration, Method, ModelSpec, Tail};

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap()
}

#[test]
fn csv_is_identical_across_thread_counts() {
    let mut c = ExperimentConfig::new(25, 20, FamilyTemplate::Watson { mu: None });
    c.reps = 150;
    c.signal_grid = vec![0.0, 4.0, 16.0];
    c.methods = Method::ALL.to_vec();
    c.seed = 99;
    let one = pool(1).install(|| run_power_curve(&c).unwrap());
    let four = pool(4).install(|| run_power_curve(&c).unwrap());
    assert_eq!(one.to_csv_string(), four.to_csv_string());
    assert_eq!(one.config_hash, four.config_hash);
    let lines = one.to_csv_string().lines().count();
    assert_eq!(lines, 1 + 3 * 5);
}

#[test]
fn zero_signal_column_matches_size() {
    for family in [
        FamilyTemplate::Fvml { mu: None },
        FamilyTemplate::Watson { mu: None },
        FamilyTemplate::LowRank { rotate: true },
    ] {
        let mut c = ExperimentConfig::new(40, 40, family);
        c.reps = 1000;
        c.signal_grid = vec![0.0];
        c.seed = 5;
        let curve = run_power_curve(&c).unwrap();
        let size = run_size_experiment(&c).unwrap();
        for s in &size {
            let cell = curve.rate(0.0, s.method).unwrap();
            let se = (cell.se.powi(2) + s.se.powi(2)).sqrt().max(1.0 / c.reps as f64);
            assert!(
                (cell.rate - s.rate).abs() <= 2.0 * se,
                "{} {}: {} vs {}",
                curve.family,
                s.method,
                cell.rate,
                s.rate
            );
        }
    }
}

#[test]
fn null_size_at_two_levels() {
    let mut c = ExperimentConfig::new(80, 80, FamilyTemplate::Uniform);
    c.reps = 5000;
    c.methods = vec![Method::SupDistance];
    c.seed = 21;
    let r = run_size_experiment(&c).unwrap()[0].rate;
    assert!((0.03..=0.07).contains(&r), "{r}");
    c.alpha = 0.5;
    let r = run_size_experiment(&c).unwrap()[0].rate;
    assert!((0.46..=0.54).contains(&r), "{r}");
}

#[test]
fn null_law_improves_with_n() {
    let a = run_null_distribution_check(80, 80, 5000, 3).unwrap();
    let b = run_null_distribution_check(200, 200, 5000, 3).unwrap();
    assert!(a.ks <= 0.03, "{}", a.ks);
    assert!(b.ks <= a.ks + 0.01, "{} vs {}", b.ks, a.ks);
    let mean = a.standardized.iter().sum::<f64>() / a.standardized.len() as f64;
    assert!((mean - 0.8687).abs() <= 0.02, "{mean}");
}

#[test]
fn rayleigh_and_bingham_null_moments() {
    let stats = simulate_statistics(&ModelSpec::Uniform { p: 80 }, 80, 5000, 17, 0, 0, false).unwrap();
    let n = stats.len() as f64;
    for (m, var_tol) in [(Method::Rayleigh, 0.10), (Method::Bingham, 0.15)] {
        let v: Vec<f64> = stats.iter().map(|s| s.get(m).unwrap()).collect();
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() <= 3.0 * (var / n).sqrt(), "{m}: mean {mean}");
        assert!((var - 1.0).abs() <= var_tol, "{m}: var {var}");
    }
}

#[test]
fn projection_null_is_kolmogorov() {
    let (n, p) = (200, 50);
    let mut z: Vec<f64> = mc_null_statistics(n, p, Method::Projection, 3000, 4)
        .unwrap()
        .into_iter()
        .map(|d| (n as f64).sqrt() * d)
        .collect();
    z.sort_unstable_by(f64::total_cmp);
    let ks = sup_distance_sorted(&z, kolmogorov_cdf);
    assert!(ks <= 0.05, "{ks}");
}

#[test]
fn mc_critical_value_near_asymptotic() {
    let (n, p) = (80usize, 80);
    let c = calibrate_critical_value_mc(n, p, Method::SupDistance, 0.05, 5000, 8).unwrap();
    let asym = std::f64::consts::SQRT_2 * 1.36 / ((n * (n - 1)) as f64).sqrt();
    assert!((c / asym - 1.0).abs() <= 0.05, "{c} vs {asym}");
}

#[test]
fn alpha_spherical_is_detected() {
    let r = run_nonlocal_experiment(NonlocalKind::AlphaSpherical { alpha: 1.0 }, 50, 4000, 0.05, 200, 2).unwrap();
    let sup = r.rates.iter().find(|m| m.method == Method::SupDistance).unwrap();
    assert!(sup.rate >= 0.9, "{}", sup.rate);
}

#[test]
fn cap_mixture_needs_large_dimension() {
    assert!(run_nonlocal_experiment(NonlocalKind::CapMixture, 20, 500, 0.05, 20, 1).is_err());
    let r = run_nonlocal_experiment(NonlocalKind::CapMixture, 10, 200, 0.05, 50, 1).unwrap();
    assert_eq!(r.rates.len(), 4);
    assert!(r.share_b_negative >= 0.0 && r.share_b_negative <= 1.0);
}

#[test]
fn files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = ExperimentConfig::new(15, 12, FamilyTemplate::LowRank { rotate: true });
    c.reps = 120;
    c.signal_grid = vec![0.0, 3.0];
    c.methods = vec![Method::SupDistance, Method::Bingham, Method::Projection];
    c.tails.insert(Method::Bingham, Tail::TwoSided);
    c.calibration.insert(Method::SupDistance, Calibration::MonteCarlo { reps: 1000, seed: 4 });
    c.output_path = Some("out.csv".into());
    let cfg_path = dir.path().join("c.json");
    save_config(&c, &cfg_path).unwrap();
    let back = load_config(&cfg_path).unwrap();
    assert_eq!(back, c);

    let curve = run_power_curve(&back).unwrap();
    let csv = dir.path().join("out.csv");
    export_csv(&curve, &csv).unwrap();
    let rows = read_power_csv(&csv).unwrap();
    assert_eq!(rows.len(), 2 * 3);
    let trials: usize = rows.iter().map(|r| r.reps).sum();
    assert_eq!(trials, c.reps * c.signal_grid.len() * c.methods.len());
    for (row, cell) in rows.iter().zip(&curve.cells) {
        assert_eq!(row.family, "low_rank");
        assert_eq!(row.tau, cell.tau);
        assert_eq!(row.method, cell.method);
        assert_eq!(row.rate, cell.rate);
        assert_eq!(row.se, cell.se);
        assert_eq!(row.seed, c.seed);
    }
}
