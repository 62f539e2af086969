//! Per-trial pipelines. Each takes a prepared sweep point and an RNG and
//! returns one value per method, in the order of [`methods`].

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use super::{ExperimentConfig, SModel, Scenario, SweepVar};
use crate::beamform::{
    alternating_joint, conventional_joint, se, snr_exact, BfMode, JointConfig, RisSolver,
};
use crate::channel::{
    assemble_channel, ris_response_left, beam_pattern, directional_config, draw_paths, thin_wire_scattering, synthetic_scattering,
    Angle2D, ArrayGeometry, ChannelPair, Link, RISConfig, Role, ScatteringMatrix, ThinWire,
};
use crate::dict::{build_dictionaries, sensing, Dictionaries, GridSpec, Measurement};
use crate::error::Result;
use crate::estimate::{omp, reconstruction_nmse, two_stage_estimate, DRSpec, ErrorInjection};
use crate::linalg::{db, dbm_to_w, khatri_rao, kron, random_phases, vec_of, w_to_dbm, CMat};
use crate::training::{make_plan, receive_with, ris_responses, theta_cv, theta_from_responses, NoiseConfig};

pub(super) const NMSE: &str = "nmse_db";
pub(super) const SE: &str = "se_bps_hz";
pub(super) const NOISE: &str = "noise_power_dbm";
pub(super) const GAIN: &str = "gain_db";

/// Everything shared by the trials of one sweep value.
pub(super) struct Point {
    pub lambda: f64,
    pub geo_u: ArrayGeometry,
    pub geo_b: ArrayGeometry,
    pub geo_i: ArrayGeometry,
    pub s: ScatteringMatrix,
    pub dicts: Option<Dictionaries>,
    pub p_u: f64,
    pub p_b: f64,
    pub amp_bar: f64,
    pub err_rel: Option<f64>,
    pub noise: NoiseConfig,
    pub sweep_value: f64,
}

impl Point {
    pub fn a_budget(&self) -> f64 {
        self.amp_bar * self.amp_bar * self.geo_i.n() as f64
    }
}

fn needs_dicts(sc: Scenario) -> bool {
    !matches!(sc, Scenario::NoisePowerCheck | Scenario::BeamPattern)
}

pub(super) fn prepare(cfg: &ExperimentConfig, sweep_idx: usize, point_seed: u64) -> Result<Point> {
    let g = &cfg.geometry;
    let lambda = g.wavelength();
    let v = cfg.sweep.values[sweep_idx];
    let mut p_u_dbm = cfg.powers.p_u_dbm;
    let mut p_b_dbm = cfg.powers.p_b_dbm;
    let mut amp_bar = cfg.powers.amp_bar;
    let mut spacing = g.ris_spacing;
    let mut err_rel = None;
    match cfg.sweep.variable {
        SweepVar::PU => p_u_dbm = v,
        SweepVar::PB => p_b_dbm = v,
        SweepVar::AmpBar => amp_bar = v,
        SweepVar::Spacing => spacing = v,
        SweepVar::ErrVar => err_rel = Some(v),
        SweepVar::Angle | SweepVar::Amp => {}
    }
    let geo_u = ArrayGeometry::new(g.ue[0], g.ue[1], g.ue_spacing * lambda, Role::Ue)?;
    let geo_b = ArrayGeometry::new(g.bs[0], g.bs[1], g.bs_spacing * lambda, Role::Bs)?;
    let geo_i = ArrayGeometry::new(g.ris[0], g.ris[1], spacing * lambda, Role::Ris)?;
    let s = match &cfg.s_model {
        SModel::ThinWire { self_term } => {
            let mut p = ThinWire::standard(lambda);
            p.self_term = *self_term;
            thin_wire_scattering(&geo_i, &p)?
        }
        SModel::SyntheticDecay { peak, decay } => {
            let mut rng = ChaCha8Rng::seed_from_u64(point_seed);
            synthetic_scattering(geo_i.n(), *peak, *decay, &mut rng)?
        }
        SModel::Zero => ScatteringMatrix::zero(geo_i.n()),
    };
    let dicts = if needs_dicts(cfg.scenario) {
        let k = cfg.estimator.grid_factor;
        let spec = |geo: &ArrayGeometry| GridSpec::new(geo.n_h * k, geo.n_v * k, geo.clone());
        Some(build_dictionaries(&spec(&geo_u)?, &spec(&geo_b)?, &spec(&geo_i)?, lambda)?)
    } else {
        None
    };
    Ok(Point {
        lambda,
        geo_u,
        geo_b,
        geo_i,
        s,
        dicts,
        p_u: dbm_to_w(p_u_dbm),
        p_b: dbm_to_w(p_b_dbm),
        amp_bar,
        err_rel,
        noise: cfg.noise.to_watts(),
        sweep_value: v,
    })
}

fn rho_label(rho: f64) -> String {
    format!("proposed-rho-{rho}")
}

/// `(method, metric)` pairs produced by every trial of the scenario.
pub(super) fn methods(cfg: &ExperimentConfig) -> Vec<(String, &'static str)> {
    let e = &cfg.estimator;
    match cfg.scenario {
        Scenario::NmseVsPower
        | Scenario::NmseVsAmp
        | Scenario::NmseVsSpacing
        | Scenario::NmseVsErrvar
        | Scenario::Timing => {
            let mut m = vec![("mc-unaware".to_string(), NMSE)];
            for &rho in &e.rho_dr {
                if cfg.scenario == Scenario::NmseVsErrvar && cfg.sweep.variable != SweepVar::ErrVar {
                    for &ev in &e.err_var {
                        m.push((format!("{}-err-{ev}", rho_label(rho)), NMSE));
                    }
                } else {
                    m.push((rho_label(rho), NMSE));
                }
            }
            if e.exact {
                m.push(("mc-aware".to_string(), NMSE));
            }
            m
        }
        Scenario::SeVsPower | Scenario::SeVsAmp | Scenario::SeVsSpacing => {
            let est = cfg.beamformer.estimated;
            let mut m = Vec::new();
            let mut pairs = vec![("gmc-sca", "gmc-hat-sca"), ("gcv-svd", "gcv-hat-svd")];
            if cfg.beamformer.gd_iter > 0 {
                pairs.push(("gmc-gd", "gmc-hat-gd"));
            }
            for (truth, hat) in pairs {
                m.push((truth.to_string(), SE));
                if est {
                    m.push((hat.to_string(), SE));
                }
            }
            m
        }
        Scenario::NoisePowerCheck => {
            let mut m = vec![("ue-noise".to_string(), NOISE)];
            for &k in &cfg.aux.rd_multiples {
                m.push((format!("ris-noise-{k}rd"), NOISE));
            }
            m
        }
        Scenario::BeamPattern => {
            let mut m = Vec::new();
            for &a in &cfg.aux.pattern_amps {
                m.push((format!("a-{a}-coupled"), GAIN));
                m.push((format!("a-{a}-uncoupled"), GAIN));
            }
            m
        }
    }
}

pub(super) fn draw_pair<R: Rng + ?Sized>(cfg: &ExperimentConfig, pt: &Point, rng: &mut R) -> Result<ChannelPair> {
    let g = &cfg.geometry;
    let paths_u = draw_paths(Link::UeRis, g.d_iu(), g.exponent_iu, g.paths_u, pt.lambda, rng)?;
    let paths_b = draw_paths(Link::RisBs, g.d_bi(), g.exponent_bi, g.paths_b, pt.lambda, rng)?;
    Ok(ChannelPair {
        h_iu: assemble_channel(&paths_u, &pt.geo_u, &pt.geo_i, pt.lambda),
        h_bi: assemble_channel(&paths_b, &pt.geo_i, &pt.geo_b, pt.lambda),
        paths_u,
        paths_b,
    })
}

/// Training observation and both measurement operators.
pub(super) struct Observed {
    pub y: crate::linalg::CVec,
    pub y_noise_free: CMat,
    pub meas_cv: Measurement,
    pub meas_mc: Measurement,
}

pub(super) fn train<R: Rng + ?Sized>(
    cfg: &ExperimentConfig,
    pt: &Point,
    pair: &ChannelPair,
    p_u: f64,
    rng: &mut R,
) -> Result<Observed> {
    let (n_u, n_b, n_i) = (pt.geo_u.n(), pt.geo_b.n(), pt.geo_i.n());
    let m_b = ((cfg.estimator.m_b_frac * n_b as f64).round() as usize).max(1);
    let m_i = ((cfg.estimator.m_i_frac * n_i as f64).round() as usize).max(1);
    let plan = make_plan(p_u, n_u, n_b, n_i, m_b, m_i, pt.a_budget(), rng)?;
    let responses = ris_responses(&plan, &pt.s)?;
    let sig = receive_with(&plan, pair, &responses, &pt.noise, rng)?;
    Ok(Observed {
        y: vec_of(&sig.y),
        y_noise_free: sig.y_noise_free,
        meas_cv: Measurement {
            theta: theta_cv(&plan),
            p: sig.p_matrix.clone(),
        },
        meas_mc: Measurement {
            theta: theta_from_responses(&responses),
            p: sig.p_matrix,
        },
    })
}

pub(super) fn nmse_trial<R: Rng + ?Sized>(cfg: &ExperimentConfig, pt: &Point, rng: &mut R) -> Result<Vec<f64>> {
    let dicts = pt.dicts.as_ref().expect("estimation scenarios build dictionaries");
    let pair = draw_pair(cfg, pt, rng)?;
    let obs = train(cfg, pt, &pair, pt.p_u, rng)?;
    let e = &cfg.estimator;
    let mut out = Vec::new();
    let prob_cv = sensing(&obs.y, &obs.meas_cv, &dicts.cv)?;
    let conv = omp(&prob_cv, e.l_hat)?;
    let g_cv = dicts.cv.reconstruct(&conv.support, &conv.coeffs);
    out.push(reconstruction_nmse(&g_cv, &obs.meas_cv.p, &obs.meas_cv.theta, &obs.y_noise_free)?);
    let errs: Vec<f64> = match pt.err_rel {
        Some(v) => vec![v],
        None if cfg.scenario == Scenario::NmseVsErrvar => e.err_var.clone(),
        None => vec![0.0],
    };
    let g_ii = dicts.g_ii_distinct();
    for &rho in &e.rho_dr {
        for &ev in &errs {
            let dr = DRSpec::new(rho, g_ii)?;
            let err = ErrorInjection {
                sigma2_e: ev * pt.noise.sigma2_ris,
            };
            let two = two_stage_estimate(&prob_cv, &obs.meas_mc, dicts, e.l_hat, dr, err, rng)?;
            out.push(reconstruction_nmse(
                &two.refined.g_hat,
                &obs.meas_mc.p,
                &obs.meas_mc.theta,
                &obs.y_noise_free,
            )?);
        }
    }
    if e.exact {
        let prob = sensing(&obs.y, &obs.meas_mc, &dicts.mc)?;
        let r = omp(&prob, e.l_hat)?;
        let g = dicts.mc.reconstruct(&r.support, &r.coeffs);
        out.push(reconstruction_nmse(&g, &obs.meas_mc.p, &obs.meas_mc.theta, &obs.y_noise_free)?);
    }
    Ok(out)
}

pub(super) fn joint_config(cfg: &ExperimentConfig, mode: BfMode, solver: RisSolver) -> JointConfig {
    let b = &cfg.beamformer;
    JointConfig {
        mode,
        solver,
        sca: b.sca,
        max_outer: b.max_outer,
        gd_iter: b.gd_iter,
        ..JointConfig::default()
    }
}

pub(super) fn se_trial<R: Rng + ?Sized>(cfg: &ExperimentConfig, pt: &Point, rng: &mut R) -> Result<Vec<f64>> {
    let pair = draw_pair(cfg, pt, rng)?;
    let (n_u, n_b) = (pt.geo_u.n(), pt.geo_b.n());
    let h_ui = pair.h_iu.transpose();
    let h_ib = pair.h_bi.transpose();
    let a = pt.a_budget();
    let b = &cfg.beamformer;
    let sca = joint_config(cfg, b.mode, RisSolver::Sca);
    let gd = joint_config(cfg, b.mode, RisSolver::Gd);
    let conv = joint_config(cfg, b.conventional_mode, RisSolver::Sca);
    let g_mc = kron(&h_ui, &pair.h_bi);
    let g_cv = khatri_rao(&h_ui, &pair.h_bi);
    let estimates = if b.estimated {
        let dicts = pt.dicts.as_ref().expect("beamforming scenarios build dictionaries");
        let obs = train(cfg, pt, &pair, pt.p_u, rng)?;
        let prob_cv = sensing(&obs.y, &obs.meas_cv, &dicts.cv)?;
        let dr = DRSpec::new(b.rho_dr, dicts.g_ii_distinct())?;
        let two = two_stage_estimate(
            &prob_cv,
            &obs.meas_mc,
            dicts,
            cfg.estimator.l_hat,
            dr,
            ErrorInjection::default(),
            rng,
        )?;
        Some((two.refined.g_hat, two.coarse.g_hat))
    } else {
        None
    };
    let eval = |f: &crate::linalg::CVec, w: &crate::linalg::CVec, g: &RISConfig| -> Result<f64> {
        Ok(se(snr_exact(f, w, g, &pt.s, &h_ui, &h_ib, &pt.noise)?))
    };
    let mut out = Vec::new();
    let run_mc = |g: &CMat, jc: &JointConfig, rng: &mut R| -> Result<f64> {
        let sol = alternating_joint(g, &pt.s, n_u, n_b, pt.p_b, a, jc, pt.noise.sigma2_ue, rng)?;
        eval(&sol.f, &sol.w, &sol.gamma)
    };
    out.push(run_mc(&g_mc, &sca, rng)?);
    if let Some((g_hat, _)) = &estimates {
        out.push(run_mc(g_hat, &sca, rng)?);
    }
    let sol = conventional_joint(&g_cv, n_u, n_b, pt.p_b, a, &conv, pt.noise.sigma2_ue, rng)?;
    out.push(eval(&sol.f, &sol.w, &sol.gamma)?);
    if let Some((_, g_cv_hat)) = &estimates {
        let sol = conventional_joint(g_cv_hat, n_u, n_b, pt.p_b, a, &conv, pt.noise.sigma2_ue, rng)?;
        out.push(eval(&sol.f, &sol.w, &sol.gamma)?);
    }
    if b.gd_iter == 0 {
        return Ok(out);
    }
    out.push(run_mc(&g_mc, &gd, rng)?);
    if let Some((g_hat, _)) = &estimates {
        out.push(run_mc(g_hat, &gd, rng)?);
    }
    Ok(out)
}

/// Rayleigh distance `2 (D_I + D_U)² / λ` with diagonal apertures.
pub fn rayleigh_distance(ris: &ArrayGeometry, ue: &ArrayGeometry, wavelength: f64) -> f64 {
    let d = ris.aperture() + ue.aperture();
    2.0 * d * d / wavelength
}

pub(super) fn noise_trial<R: Rng + ?Sized>(cfg: &ExperimentConfig, pt: &Point, rng: &mut R) -> Result<Vec<f64>> {
    let amp = pt.sweep_value;
    let n_u = pt.geo_u.n();
    let n_i = pt.geo_i.n();
    let f = random_phases(rng, n_u, 1.0);
    let gamma = RISConfig::new(random_phases(rng, n_i, amp), amp * amp * n_i as f64)?;
    let rd = rayleigh_distance(&pt.geo_i, &pt.geo_u, pt.lambda);
    let g = &cfg.geometry;
    // one row f^H H_UI per distance, pushed through Γ̄ with one factorization
    let mut rows = CMat::zeros(cfg.aux.rd_multiples.len(), n_i);
    for (r, &k) in cfg.aux.rd_multiples.iter().enumerate() {
        let paths = draw_paths(Link::UeRis, k * rd, g.exponent_iu, g.paths_u, pt.lambda, rng)?;
        let h_iu = assemble_channel(&paths, &pt.geo_u, &pt.geo_i, pt.lambda);
        rows.set_row(r, &(f.adjoint() * h_iu.transpose()));
    }
    let through = ris_response_left(&gamma, &pt.s, &rows)?;
    let mut out = vec![w_to_dbm(f.norm_squared() * pt.noise.sigma2_ue)];
    out.extend(through.row_iter().map(|row| w_to_dbm(row.norm_squared() * pt.noise.sigma2_ris)));
    Ok(out)
}

fn azimuth(deg: f64) -> Angle2D {
    Angle2D::new(deg * PI / 180.0, PI / 2.0)
}

pub(super) fn pattern_trial(cfg: &ExperimentConfig, pt: &Point) -> Result<Vec<f64>> {
    let grid: Vec<Angle2D> = cfg.sweep.values.iter().map(|&d| azimuth(d)).collect();
    let at = cfg
        .sweep
        .values
        .iter()
        .position(|&v| v == pt.sweep_value)
        .expect("sweep value is on the grid");
    let inc = azimuth(cfg.aux.incident_deg);
    let out_dir = azimuth(cfg.aux.steer_deg);
    let zero = ScatteringMatrix::zero(pt.geo_i.n());
    let mut out = Vec::new();
    for &a in &cfg.aux.pattern_amps {
        let g = directional_config(&pt.geo_i, pt.lambda, a, out_dir, inc)?;
        for s in [&pt.s, &zero] {
            let p = beam_pattern(&g, s, &pt.geo_i, pt.lambda, inc, &grid)?;
            out.push(db(p[at].max(1e-30)));
        }
    }
    Ok(out)
}
