use mcris::exp::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;

fn tiny(scenario: Scenario) -> ExperimentConfig {
    let mut c = ExperimentConfig::preset(scenario, Profile::Desk);
    c.geometry.ris = [4, 2];
    c.geometry.bs = [2, 2];
    c.trials = 3;
    c.sweep.values.truncate(2);
    c
}

#[test]
fn scenario_names_round_trip() {
    for sc in Scenario::ALL {
        assert_eq!(Scenario::parse(sc.name()).unwrap(), sc);
        assert!(!sc.description().is_empty());
        let c = ExperimentConfig::preset(sc, Profile::Desk);
        c.validate().unwrap();
        ExperimentConfig::preset(sc, Profile::Paper).validate().unwrap();
    }
    assert!(Scenario::parse("nmse").is_err());
    assert!(Profile::parse("huge").is_err());
    assert!(Format::parse("xml").is_err());
}

#[test]
fn presets_follow_the_reference_setup() {
    let c = ExperimentConfig::preset(Scenario::NmseVsPower, Profile::Paper);
    assert_eq!(c.n_i(), 128);
    assert_eq!(c.sweep.values.first(), Some(&-8.0));
    assert_eq!(c.sweep.values.last(), Some(&12.0));
    assert!((c.geometry.wavelength() - 0.00999308).abs() < 1e-7);
    assert!((c.geometry.d_iu() - 2.6).abs() < 1e-12 && (c.geometry.d_bi() - 2.2).abs() < 1e-12);
    let se = ExperimentConfig::preset(Scenario::SeVsPower, Profile::Paper);
    assert_eq!(se.sweep.values, vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0]);
    assert_eq!((se.geometry.paths_u, se.geometry.paths_b), (1, 1));
    assert!((se.powers.p_u_dbm - 6.9897).abs() < 1e-4);
    let sp = ExperimentConfig::preset(Scenario::NmseVsSpacing, Profile::Paper);
    assert!((sp.sweep.values[0] - 0.02).abs() < 1e-12);
    assert!((sp.sweep.values.last().unwrap() - 0.5).abs() < 1e-12);
    assert!(sp.sweep.values.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn sweeps_are_deterministic_and_order_free() {
    let c = tiny(Scenario::NmseVsPower);
    let a = run_sweep(&c).unwrap();
    let b = run_sweep(&c).unwrap();
    assert_eq!(to_csv_string(&a).unwrap(), to_csv_string(&b).unwrap());
    let methods = 1 + c.estimator.rho_dr.len() + 1;
    assert_eq!(a.len(), c.sweep.values.len() * methods);
    assert!(a.iter().all(|r| r.metric == "nmse_db" && r.trials == 3 && r.failures == 0));

    let mut order: Vec<usize> = (0..c.sweep.values.len() * c.trials).collect();
    order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(5));
    let p = run_sweep_ordered(&c, Some(&order)).unwrap();
    for (x, y) in a.iter().zip(&p) {
        assert_eq!((&x.method, x.sweep_value), (&y.method, y.sweep_value));
        assert!((x.mean - y.mean).abs() <= 1e-12 * x.mean.abs().max(1.0));
    }
    assert!(run_sweep_ordered(&c, Some(&[0, 0, 1, 2, 3, 4])).is_err());
    assert!(run_sweep_ordered(&c, Some(&[0, 1])).is_err());

    let mut single = c.clone();
    single.workers = 1;
    assert_eq!(to_csv_string(&run_sweep(&single).unwrap()).unwrap(), to_csv_string(&a).unwrap());

    let mut other = c.clone();
    other.seed += 1;
    assert_ne!(to_csv_string(&run_sweep(&other).unwrap()).unwrap(), to_csv_string(&a).unwrap());
}

#[test]
fn trial_seeds_are_distinct() {
    let mut seen = std::collections::HashSet::new();
    for k in 0..20 {
        for t in 0..50 {
            assert!(seen.insert(sub_seed(7, k, t)));
        }
    }
    assert_eq!(sub_seed(7, 3, 4), sub_seed(7, 3, 4));
}

#[test]
fn output_formats() {
    assert_eq!(
        to_csv_string(&[]).unwrap(),
        "sweep_variable,sweep_value,method,metric,mean,std,trials,failures\n"
    );
    let recs = run_sweep(&tiny(Scenario::NmseVsAmp)).unwrap();
    let csv = to_csv_string(&recs).unwrap();
    assert_eq!(csv.lines().count(), recs.len() + 1);
    assert!(!csv.contains('\r'));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    emit(&recs, &path, Format::Json).unwrap();
    assert_eq!(read_json(&path).unwrap(), recs);
    let cpath = dir.path().join("r.csv");
    emit(&recs, &cpath, Format::Csv).unwrap();
    assert_eq!(std::fs::read_to_string(&cpath).unwrap(), csv);
}

#[test]
fn config_parsing_and_validation() {
    let c = tiny(Scenario::SeVsAmp);
    let text = serde_json::to_string(&c).unwrap();
    assert_eq!(ExperimentConfig::from_json_str(&text).unwrap(), c);

    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["geometry"]["extra"] = serde_json::json!(1);
    assert!(ExperimentConfig::from_json_str(&v.to_string()).is_err());
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["scenario"] = serde_json::json!("se-vs-moon");
    assert!(ExperimentConfig::from_json_str(&v.to_string()).is_err());

    let broken: [fn(&mut ExperimentConfig); 8] = [
        |c| c.trials = 0,
        |c| c.sweep.values.clear(),
        |c| c.geometry.ris = [0, 4],
        |c| c.estimator.rho_dr = vec![1.5],
        |c| c.beamformer.sca.delta2 = 1.0,
        |c| c.powers.amp_bar = 0.0,
        |c| c.sweep.variable = SweepVar::Angle,
        |c| c.s_model = SModel::SyntheticDecay { peak: 0.1, decay: 0.0 },
    ];
    for f in broken {
        let mut b = c.clone();
        f(&mut b);
        assert!(b.validate().is_err(), "{b:?}");
        assert!(run_sweep(&b).is_err());
    }
    assert!(ExperimentConfig::load(std::path::Path::new("/nonexistent/cfg.json")).is_err());
}

#[test]
fn spectral_efficiency_sweep_has_every_method() {
    let mut c = tiny(Scenario::SeVsPower);
    c.trials = 2;
    let recs = run_sweep(&c).unwrap();
    let names: Vec<&str> = recs.iter().take(6).map(|r| r.method.as_str()).collect();
    assert_eq!(names, ["gmc-sca", "gmc-hat-sca", "gcv-svd", "gcv-hat-svd", "gmc-gd", "gmc-hat-gd"]);
    assert!(recs.iter().all(|r| r.mean >= 0.0 && r.failures == 0));

    c.beamformer.gd_iter = 0;
    c.beamformer.estimated = false;
    let recs = run_sweep(&c).unwrap();
    let names: Vec<&str> = recs.iter().take(2).map(|r| r.method.as_str()).collect();
    assert_eq!(names, ["gmc-sca", "gcv-svd"]);
    assert_eq!(recs.len(), 2 * c.sweep.values.len());
}

#[test]
fn noise_and_pattern_scenarios() {
    let mut c = ExperimentConfig::preset(Scenario::NoisePowerCheck, Profile::Desk);
    c.trials = 5;
    c.sweep.values = vec![2.0, 8.0];
    let recs = run_sweep(&c).unwrap();
    assert_eq!(recs.len(), 2 * (1 + c.aux.rd_multiples.len()));
    assert!(recs.iter().all(|r| r.metric == "noise_power_dbm" && r.mean.is_finite()));
    // RIS-propagated noise falls with distance
    let at2: Vec<f64> = recs.iter().filter(|r| r.sweep_value == 2.0).skip(1).map(|r| r.mean).collect();
    assert!(at2.windows(2).all(|w| w[1] < w[0]), "{at2:?}");

    let mut p = ExperimentConfig::preset(Scenario::BeamPattern, Profile::Desk);
    p.sweep.values = vec![-30.0, 0.0, 30.0];
    let recs = run_sweep(&p).unwrap();
    assert_eq!(recs.len(), 3 * 2 * p.aux.pattern_amps.len());
    let peak = recs.iter().find(|r| r.sweep_value == 30.0 && r.method == "a-2-uncoupled").unwrap();
    assert!(peak.mean.abs() < 1e-9, "{}", peak.mean);
}

#[test]
fn timing_reports_both_phases() {
    let mut c = ExperimentConfig::preset(Scenario::Timing, Profile::Desk);
    c.geometry.ris = [4, 4];
    c.trials = 1;
    let recs = time_phases(&c).unwrap();
    assert!(recs.iter().any(|r| r.metric == "wallclock_s_offline"));
    assert!(recs.iter().any(|r| r.metric == "wallclock_s_online"));
    assert!(recs.iter().all(|r| r.mean >= 0.0));
}
