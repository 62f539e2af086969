use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::trial::{self, Point, NMSE};
use super::{ExperimentConfig, ResultRecord, Scenario};
use crate::dict::{sensing, DictKind, Dictionary, RisAtoms};
use crate::error::{Error, Result};
use crate::estimate::{dictionary_reduce_kron, omp, DRSpec};
use crate::linalg::CMat;

/// 64-bit stream seed for trial `trial` of sweep point `sweep_idx`.
pub fn sub_seed(seed: u64, sweep_idx: u64, trial: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(b"mcris-trial");
    h.update(seed.to_le_bytes());
    h.update(sweep_idx.to_le_bytes());
    h.update(trial.to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

fn prepare_all(cfg: &ExperimentConfig) -> Result<Vec<Point>> {
    (0..cfg.sweep.values.len())
        .into_par_iter()
        .map(|k| trial::prepare(cfg, k, sub_seed(cfg.seed, k as u64, u64::MAX)))
        .collect()
}

fn run_trial(cfg: &ExperimentConfig, pt: &Point, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match cfg.scenario {
        Scenario::NmseVsPower | Scenario::NmseVsAmp | Scenario::NmseVsSpacing | Scenario::NmseVsErrvar => {
            trial::nmse_trial(cfg, pt, &mut rng)
        }
        Scenario::SeVsPower | Scenario::SeVsAmp | Scenario::SeVsSpacing => trial::se_trial(cfg, pt, &mut rng),
        Scenario::NoisePowerCheck => trial::noise_trial(cfg, pt, &mut rng),
        Scenario::BeamPattern => trial::pattern_trial(cfg, pt),
        Scenario::Timing => unreachable!("timing runs through time_phases"),
    }
}

/// Runs every sweep point and trial and aggregates per method.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    run_sweep_ordered(cfg, None)
}

/// As [`run_sweep`], dispatching trials in the given order of flat task
/// indices (`sweep_idx * trials + trial`). Aggregates do not depend on it.
pub fn run_sweep_ordered(cfg: &ExperimentConfig, order: Option<&[usize]>) -> Result<Vec<ResultRecord>> {
    cfg.validate()?;
    if cfg.scenario == Scenario::Timing {
        return time_phases(cfg);
    }
    let n_tasks = cfg.sweep.values.len() * cfg.trials;
    let order: Vec<usize> = match order {
        Some(o) => {
            let mut seen = vec![false; n_tasks];
            for &t in o {
                if t >= n_tasks || std::mem::replace(&mut seen[t], true) {
                    return Err(Error::Param("task order must be a permutation".into()));
                }
            }
            if o.len() != n_tasks {
                return Err(Error::Param("task order must be a permutation".into()));
            }
            o.to_vec()
        }
        None => (0..n_tasks).collect(),
    };
    let pool = pool(cfg.workers)?;
    let (points, outputs) = pool.install(|| -> Result<_> {
        let points = prepare_all(cfg)?;
        let outputs: Vec<(usize, Result<Vec<f64>>)> = order
            .par_iter()
            .map(|&task| {
                let (k, t) = (task / cfg.trials, task % cfg.trials);
                let seed = sub_seed(cfg.seed, k as u64, t as u64);
                (task, run_trial(cfg, &points[k], seed))
            })
            .collect();
        Ok((points, outputs))
    })?;
    let mut by_task: Vec<Option<Result<Vec<f64>>>> = (0..n_tasks).map(|_| None).collect();
    for (task, r) in outputs {
        by_task[task] = Some(r);
    }
    let methods = trial::methods(cfg);
    let mut records = Vec::new();
    for (k, pt) in points.iter().enumerate() {
        for (m, (name, metric)) in methods.iter().enumerate() {
            let mut vals = Vec::with_capacity(cfg.trials);
            let mut failures = 0;
            for t in 0..cfg.trials {
                match by_task[k * cfg.trials + t].as_ref().expect("every task ran") {
                    Ok(v) if v.get(m).is_some_and(|x| x.is_finite()) => vals.push(v[m]),
                    _ => failures += 1,
                }
            }
            let (mean, std) = aggregate(metric, &vals);
            records.push(ResultRecord {
                sweep_variable: cfg.sweep.variable.label().to_string(),
                sweep_value: pt.sweep_value,
                method: name.clone(),
                metric: metric.to_string(),
                mean,
                std,
                trials: cfg.trials,
                failures,
            });
        }
    }
    Ok(records)
}

/// NMSE is averaged in the linear domain and reported in dB; every other
/// metric is averaged as is. `std` is over the per-trial values.
fn aggregate(metric: &str, vals: &[f64]) -> (f64, f64) {
    if vals.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = vals.len() as f64;
    let plain = vals.iter().sum::<f64>() / n;
    let std = if vals.len() > 1 {
        (vals.iter().map(|v| (v - plain).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mean = if metric == NMSE {
        10.0 * (vals.iter().map(|v| 10f64.powf(v / 10.0)).sum::<f64>() / n).log10()
    } else {
        plain
    };
    (mean, std)
}

const OFFLINE: &str = "wallclock_s_offline";
const ONLINE: &str = "wallclock_s_online";

/// Offline (sensing operators and dictionary reduction) and online (OMP)
/// wall-clock seconds per estimator, at the first sweep value. Trials run
/// sequentially so timings are not inflated by contention.
pub fn time_phases(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    cfg.validate()?;
    // each trial fits one RIS configuration set in memory; no parallelism
    let pt = trial::prepare(cfg, 0, sub_seed(cfg.seed, 0, u64::MAX))?;
    let dicts = pt
        .dicts
        .as_ref()
        .ok_or_else(|| Error::Config("timing needs an estimation geometry".into()))?;
    let e = &cfg.estimator;
    let mut labels = vec!["mc-unaware".to_string()];
    labels.extend(e.rho_dr.iter().map(|r| format!("proposed-rho-{r}")));
    if e.exact {
        labels.push("mc-aware".to_string());
    }
    let mut off = vec![Vec::new(); labels.len()];
    let mut on = vec![Vec::new(); labels.len()];
    let mut failures = 0;
    for t in 0..cfg.trials {
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(cfg.seed, 0, t as u64));
        let res = (|| -> Result<(Vec<f64>, Vec<f64>)> {
            let pair = trial::draw_pair(cfg, &pt, &mut rng)?;
            let obs = trial::train(cfg, &pt, &pair, pt.p_u, &mut rng)?;
            let mut o = Vec::new();
            let mut n = Vec::new();

            let t0 = Instant::now();
            let prob_cv = sensing(&obs.y, &obs.meas_cv, &dicts.cv)?;
            let cv_off = t0.elapsed().as_secs_f64();
            let t0 = Instant::now();
            let coarse = omp(&prob_cv, e.l_hat)?;
            let cv_on = t0.elapsed().as_secs_f64();
            o.push(cv_off);
            n.push(cv_on);

            let RisAtoms::Dense(cv_atoms) = &dicts.cv.ris else {
                return Err(Error::Param("conventional dictionary must hold explicit RIS atoms".into()));
            };
            for &rho in &e.rho_dr {
                let dr = DRSpec::new(rho, dicts.g_ii_distinct())?;
                let t0 = Instant::now();
                let mut a_coarse = CMat::zeros(cv_atoms.nrows(), coarse.support.len());
                for (k, &j) in coarse.support.iter().enumerate() {
                    a_coarse.set_column(k, &cv_atoms.column(dicts.cv.split(j).0));
                }
                let kept = dictionary_reduce_kron(&a_coarse, &dicts.a_i, dr.sub_cols, dr.g_dr)?;
                let d_dr = Dictionary {
                    kind: DictKind::DR,
                    ris: RisAtoms::Kron {
                        a_i: dicts.a_i.clone(),
                        cols: kept.clone(),
                    },
                    ub: dicts.a_ub.clone(),
                    ris_meta: kept,
                };
                let prob = sensing(&obs.y, &obs.meas_mc, &d_dr)?;
                let dr_off = t0.elapsed().as_secs_f64();
                let t0 = Instant::now();
                omp(&prob, e.l_hat)?;
                let dr_on = t0.elapsed().as_secs_f64();
                o.push(cv_off + dr_off);
                n.push(cv_on + dr_on);
            }
            if e.exact {
                let t0 = Instant::now();
                let prob = sensing(&obs.y, &obs.meas_mc, &dicts.mc)?;
                o.push(t0.elapsed().as_secs_f64());
                let t0 = Instant::now();
                omp(&prob, e.l_hat)?;
                n.push(t0.elapsed().as_secs_f64());
            }
            Ok((o, n))
        })();
        match res {
            Ok((o, n)) => {
                for k in 0..labels.len() {
                    off[k].push(o[k]);
                    on[k].push(n[k]);
                }
            }
            Err(_) => failures += 1,
        }
    }
    let mut records = Vec::new();
    for (k, name) in labels.iter().enumerate() {
        for (metric, vals) in [(OFFLINE, &off[k]), (ONLINE, &on[k])] {
            let (mean, std) = aggregate(metric, vals);
            records.push(ResultRecord {
                sweep_variable: cfg.sweep.variable.label().to_string(),
                sweep_value: pt.sweep_value,
                method: name.clone(),
                metric: metric.to_string(),
                mean,
                std,
                trials: cfg.trials,
                failures,
            });
        }
    }
    Ok(records)
}
