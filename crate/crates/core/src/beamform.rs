//! Downlink joint beamforming: reciprocity, closed-form precoder/combiner,
//! SCA over the Neumann-approximated RIS objective, a projected-gradient
//! baseline and SNR evaluation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{ris_response, RISConfig, ScatteringMatrix};
use crate::error::{Error, Result};
use crate::linalg::{c64, cis, hermitian_eig, random_phases, unvec, vec_of, C64, CMat, CVec};
use crate::training::NoiseConfig;

/// Smallest RIS coefficient magnitude kept during iterations.
pub const GAMMA_FLOOR: f64 = 1e-8;

/// `G_DL` from `G_UL = H_IU^T ⊗ H_BI`: swaps the Kronecker blocks of both
/// the row index `(u, b)` and the column index `(i1, i2)`, giving
/// `H_BI ⊗ H_IU^T`. Pure permutation; applying it again with `n_u` and
/// `n_b` exchanged is the inverse.
pub fn ul_to_dl(g_ul: &CMat, n_u: usize, n_b: usize) -> Result<CMat> {
    let n_i2 = g_ul.ncols();
    let n_i = (n_i2 as f64).sqrt().round() as usize;
    if g_ul.nrows() != n_u * n_b || n_i * n_i != n_i2 {
        return Err(Error::Dim(format!(
            "equivalent channel is {}x{}, expected {}x(N_I^2)",
            g_ul.nrows(),
            n_i2,
            n_u * n_b
        )));
    }
    let mut g_dl = CMat::zeros(n_u * n_b, n_i2);
    for i1 in 0..n_i {
        for i2 in 0..n_i {
            for u in 0..n_u {
                for b in 0..n_b {
                    g_dl[(b * n_u + u, i2 * n_i + i1)] = g_ul[(u * n_b + b, i1 * n_i + i2)];
                }
            }
        }
    }
    Ok(g_dl)
}

/// Row permutation `(u, b) → (b, u)` taking a conventional uplink channel
/// `H_IU^T ⊙ H_BI` to its downlink layout `H_BI ⊙ H_IU^T`.
pub fn ul_to_dl_cv(g_ul: &CMat, n_u: usize, n_b: usize) -> Result<CMat> {
    if g_ul.nrows() != n_u * n_b {
        return Err(Error::Dim(format!("expected {} rows, got {}", n_u * n_b, g_ul.nrows())));
    }
    let mut g_dl = CMat::zeros(g_ul.nrows(), g_ul.ncols());
    for u in 0..n_u {
        for b in 0..n_b {
            g_dl.set_row(b * n_u + u, &g_ul.row(u * n_b + b));
        }
    }
    Ok(g_dl)
}

/// Downlink channel `H_UIB` (`N_U × N_B`) with
/// `vec(H_UIB) = G_DL vec((Γ^{-1} − S)^{-1})`.
pub fn h_uib(g_dl: &CMat, cfg: &RISConfig, s: &ScatteringMatrix, n_u: usize) -> Result<CMat> {
    let r = ris_response(cfg, s)?;
    if r.len() != g_dl.ncols() {
        return Err(Error::Dim("equivalent channel and RIS size disagree".into()));
    }
    let v = g_dl * vec_of(&r);
    Ok(unvec(&v, n_u, g_dl.nrows() / n_u))
}

/// Conventional downlink channel `vec(H_UIB) = G_cv^DL γ`.
pub fn h_uib_cv(g_dl_cv: &CMat, gamma: &CVec, n_u: usize) -> CMat {
    let v = g_dl_cv * gamma;
    unvec(&v, n_u, g_dl_cv.nrows() / n_u)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BfMode {
    /// Constant-modulus `f` and `w` (phase shifters).
    Analog,
    /// Unconstrained `f`, `w` up to their total power.
    Digital,
}

fn phase_only(v: &CVec, amp: f64) -> CVec {
    v.map(|z| if z.norm() > 0.0 { cis(z.arg()) * amp } else { c64(amp, 0.0) })
}

fn bf_gain(h: &CMat, f: &CVec, w: &CVec) -> f64 {
    (f.adjoint() * h * w)[(0, 0)].norm()
}

/// Alternating phase projections for `max |f^H H w|` under per-element
/// modulus constraints. Returns the beams and the objective after each
/// half-step.
pub fn fw_analog_trace(h: &CMat, p_b: f64, max_iter: usize) -> (CVec, CVec, Vec<f64>) {
    let (n_u, n_b) = (h.nrows(), h.ncols());
    let fa = (1.0 / n_u as f64).sqrt();
    let wa = (p_b / n_b as f64).sqrt();
    let svd = h.clone().svd(false, true);
    let k = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, -1.0), |acc, (i, &s)| if s > acc.1 { (i, s) } else { acc })
        .0;
    let v0 = svd.v_t.as_ref().map(|vt| vt.row(k).adjoint()).unwrap_or_else(|| CVec::from_element(n_b, c64(1.0, 0.0)));
    let mut w = phase_only(&v0, wa);
    let mut f = phase_only(&(h * &w), fa);
    let mut trace = vec![bf_gain(h, &f, &w)];
    for _ in 0..max_iter {
        w = phase_only(&(h.adjoint() * &f), wa);
        let half = bf_gain(h, &f, &w);
        f = phase_only(&(h * &w), fa);
        let full = bf_gain(h, &f, &w);
        let prev = *trace.last().unwrap();
        trace.push(half);
        trace.push(full);
        if full - prev <= 1e-8 * prev.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    (f, w, trace)
}

pub fn fw_analog(h: &CMat, p_b: f64, max_iter: usize) -> (CVec, CVec) {
    let (f, w, _) = fw_analog_trace(h, p_b, max_iter);
    (f, w)
}

/// Dominant singular pair: `f = u_max`, `w = √P_B v_max`.
pub fn fw_digital(h: &CMat, p_b: f64) -> (CVec, CVec) {
    let svd = h.clone().svd(true, true);
    let k = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, -1.0), |acc, (i, &s)| if s > acc.1 { (i, s) } else { acc })
        .0;
    let u = svd.u.expect("svd with u").column(k).into_owned();
    let v = svd.v_t.expect("svd with v").row(k).adjoint();
    (u, v * c64(p_b.sqrt(), 0.0))
}

/// `t = G_DL^T (w ⊗ f*)`, so that `f^H H_UIB w = t^T vec(Γ̄)`.
pub fn beam_vector(g_dl: &CMat, f: &CVec, w: &CVec) -> CVec {
    let n_u = f.len();
    let wf = CVec::from_iterator(
        w.len() * n_u,
        w.iter().flat_map(|wb| f.iter().map(move |fu| wb * fu.conj())),
    );
    g_dl.transpose() * wf
}

/// `q = diag(vec⁻¹(t*))`, `B = S ⊙ vec⁻¹(t)` from the two-term Neumann
/// expansion `Γ̄ ≈ Γ + ΓSΓ`.
pub fn neumann_coefficients(t: &CVec, s: &ScatteringMatrix) -> (CVec, CMat) {
    let n = s.n();
    let tm = unvec(t, n, n);
    let q = CVec::from_iterator(n, (0..n).map(|i| tm[(i, i)].conj()));
    let b = s.s.component_mul(&tm);
    (q, b)
}

fn inner_c(gamma: &CVec, q: &CVec, b: &CMat) -> C64 {
    q.dotc(gamma) + (gamma.transpose() * b * gamma)[(0, 0)]
}

/// `f(γ) = −|q^H γ + γ^T B γ|²`.
pub fn objective_f(gamma: &CVec, q: &CVec, b: &CMat) -> f64 {
    -inner_c(gamma, q, b).norm_sqr()
}

/// Wirtinger gradient `∂f/∂γ* = −c (q + (B* + B^H) γ*)`.
pub fn grad_f(gamma: &CVec, q: &CVec, b: &CMat) -> CVec {
    let c = inner_c(gamma, q, b);
    let gc = gamma.conjugate();
    let v = q + b.conjugate() * &gc + b.adjoint() * &gc;
    v * (-c)
}

/// Convex surrogate `γ^H (K I − Q) γ − 2 Re(b^T γ)` around `γ_i`.
#[derive(Debug, Clone)]
pub struct Surrogate {
    pub q_mat: CMat,
    pub k: f64,
    pub b: CVec,
    /// `v` with `Q = v v^H`, when known; enables the closed-form solve.
    pub rank_one: Option<CVec>,
}

impl Surrogate {
    pub fn value(&self, gamma: &CVec) -> f64 {
        let m = self.m();
        (gamma.adjoint() * m * gamma)[(0, 0)].re - 2.0 * (self.b.transpose() * gamma)[(0, 0)].re
    }

    /// `∂g/∂γ* = (K I − Q) γ − b*`.
    pub fn grad(&self, gamma: &CVec) -> CVec {
        self.m() * gamma - self.b.conjugate()
    }

    pub fn m(&self) -> CMat {
        CMat::identity(self.q_mat.nrows(), self.q_mat.nrows()) * c64(self.k, 0.0) - &self.q_mat
    }
}

/// `Q_i`, `K = λ_max(Q_i)(1 + k_margin)` and `b_i`.
pub fn surrogate_params(gamma_i: &CVec, q: &CVec, b: &CMat, k_margin: f64) -> Surrogate {
    let gc = gamma_i.conjugate();
    let bh_g = b.adjoint() * &gc;
    let gtb = gamma_i.transpose() * b;
    let q_mat = q * q.adjoint() + q * &gtb + &bh_g * q.adjoint() + &bh_g * &gtb;
    let q_mat = (&q_mat + q_mat.adjoint()) * c64(0.5, 0.0);
    // Q_i = v v^H with v = q + B^H γ_i*, so λ_max = ‖v‖²
    let v = q + &bh_g;
    let lam = v.norm_squared();
    let k = (lam * (1.0 + k_margin)).max(f64::MIN_POSITIVE);
    let c = inner_c(gamma_i, q, b);
    let bvec = gc * c64(k, 0.0) + (b * gamma_i) * c.conj();
    Surrogate {
        q_mat,
        k,
        b: bvec,
        rank_one: Some(v),
    }
}

/// Eigenpairs of `v v^H`: `‖v‖²` on `v/‖v‖`, zero on an orthonormal
/// completion (Householder reflection of `e_1` onto `v/‖v‖`).
fn rank_one_eig(v: &CVec) -> (nalgebra::DVector<f64>, CMat) {
    let n = v.len();
    let nv = v.norm();
    let mut lam = nalgebra::DVector::zeros(n);
    if nv == 0.0 {
        return (lam, CMat::identity(n, n));
    }
    lam[0] = nv * nv;
    let x = v / c64(nv, 0.0);
    // H = I − 2 w w^H maps e_1 to −e^{jφ} x with φ = arg(x_0); scale the
    // first column back to x
    let ph = if x[0].norm() > 0.0 { cis(x[0].arg()) } else { c64(1.0, 0.0) };
    let mut w = x.clone() * ph.conj();
    w[0] += c64(1.0, 0.0);
    let wn = w.norm();
    let mut u = CMat::identity(n, n);
    if wn > 0.0 {
        w /= c64(wn, 0.0);
        u -= (&w * w.adjoint()) * c64(2.0, 0.0);
    }
    let first = x;
    u.set_column(0, &first);
    (lam, u)
}

/// Minimizer of the surrogate over `‖γ‖² ≤ A` and its multiplier.
#[derive(Debug, Clone)]
pub struct SurrogateSolution {
    pub gamma: CVec,
    pub nu: f64,
}

/// `γ_o = ((K + ν) I − Q)^{-1} b*` with ν found by bisection on the
/// monotone norm `‖γ(ν)‖²` when the unconstrained point is infeasible.
pub fn solve_surrogate(sur: &Surrogate, a_budget: f64, bisect_tol: f64) -> Result<SurrogateSolution> {
    let (lam, u) = match &sur.rank_one {
        Some(v) => rank_one_eig(v),
        None => hermitian_eig(&sur.q_mat),
    };
    let lam_max = lam.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if sur.k < lam_max * (1.0 - 1e-12) {
        return Err(Error::Param(format!("K = {} is below lambda_max = {lam_max}", sur.k)));
    }
    let coef = u.adjoint() * sur.b.conjugate();
    let norm2 = |nu: f64| -> f64 {
        coef.iter()
            .zip(lam.iter())
            .map(|(c, l)| c.norm_sqr() / (sur.k + nu - l).powi(2))
            .sum()
    };
    let gamma_at = |nu: f64| -> CVec {
        let scaled = CVec::from_iterator(
            coef.len(),
            coef.iter().zip(lam.iter()).map(|(c, l)| c / (sur.k + nu - l)),
        );
        &u * scaled
    };
    let at_zero = norm2(0.0);
    if at_zero.is_finite() && at_zero <= a_budget {
        return Ok(SurrogateSolution {
            gamma: gamma_at(0.0),
            nu: 0.0,
        });
    }
    // ‖γ(ν)‖ ≤ ‖b‖ / (K + ν − λ_max)
    let bn = sur.b.norm();
    let mut hi = (bn / a_budget.sqrt() - sur.k + lam_max).max(1e-12);
    let mut tries = 0;
    while norm2(hi) > a_budget {
        hi *= 2.0;
        tries += 1;
        if tries > 200 || !hi.is_finite() {
            return Err(Error::Bracket {
                at_zero,
                at_upper: norm2(hi),
                upper: hi,
                budget: a_budget,
            });
        }
    }
    let mut lo = 0.0;
    // relative width: ν scales with |q|², which can be tiny
    for _ in 0..400 {
        if hi - lo <= bisect_tol * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if norm2(mid) > a_budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(SurrogateSolution {
        gamma: gamma_at(hi),
        nu: hi,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SCAConfig {
    pub delta1: f64,
    pub delta2: f64,
    pub conv_tol: f64,
    pub max_iter: usize,
    pub bisect_tol: f64,
    pub k_margin: f64,
}

impl Default for SCAConfig {
    fn default() -> Self {
        Self {
            delta1: 0.5,
            delta2: 0.1,
            conv_tol: 1e-5,
            max_iter: 100,
            bisect_tol: 1e-10,
            k_margin: 1e-6,
        }
    }
}

impl SCAConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| x > 0.0 && x < 1.0;
        if !unit(self.delta1) || !unit(self.delta2) {
            return Err(Error::Param("line-search parameters must lie in (0, 1)".into()));
        }
        if !(self.conv_tol > 0.0 && self.bisect_tol > 0.0 && self.k_margin >= 0.0) || self.max_iter == 0 {
            return Err(Error::Param("SCA tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Result of [`sca_optimize`].
#[derive(Debug, Clone)]
pub struct ScaOutput {
    pub gamma: CVec,
    /// `f(γ_i)` for the initial point and every accepted iterate.
    pub trace: Vec<f64>,
    pub iterations: usize,
    /// Some coefficient was lifted to [`GAMMA_FLOOR`].
    pub clamped: bool,
    /// The line search found no admissible step.
    pub line_search_failed: bool,
}

/// Lifts magnitudes below the floor, keeping phase. Returns whether any
/// entry changed.
pub fn clamp_gamma(gamma: &mut CVec) -> bool {
    let mut hit = false;
    for z in gamma.iter_mut() {
        if z.norm() < GAMMA_FLOOR {
            let ph = if z.norm() > 0.0 { z.arg() } else { 0.0 };
            *z = cis(ph) * GAMMA_FLOOR;
            hit = true;
        }
    }
    hit
}

/// Successive convex approximation with Armijo-type step selection.
pub fn sca_optimize(
    q: &CVec,
    b: &CMat,
    a_budget: f64,
    cfg: &SCAConfig,
    gamma_init: &CVec,
) -> Result<ScaOutput> {
    cfg.validate()?;
    if gamma_init.norm_squared() > a_budget * (1.0 + 1e-9) {
        return Err(Error::Param("initial RIS vector violates the power budget".into()));
    }
    let mut gamma = gamma_init.clone();
    let mut clamped = clamp_gamma(&mut gamma);
    let mut fval = objective_f(&gamma, q, b);
    let mut trace = vec![fval];
    let mut line_search_failed = false;
    let mut iterations = 0;
    for _ in 0..cfg.max_iter {
        iterations += 1;
        let sur = surrogate_params(&gamma, q, b, cfg.k_margin);
        let sol = solve_surrogate(&sur, a_budget, cfg.bisect_tol)?;
        let delta = &sol.gamma - &gamma;
        let slope = grad_f(&gamma, q, b).dotc(&delta).re;
        // no descent direction left: stationary up to rounding
        if !(slope < 0.0) {
            break;
        }
        let mut accepted = None;
        let mut eta = 1.0;
        for _ in 0..=60 {
            let cand = &gamma + &delta * c64(eta, 0.0);
            let fc = objective_f(&cand, q, b);
            if fc <= fval + cfg.delta2 * eta * slope {
                accepted = Some((cand, fc));
                break;
            }
            eta *= cfg.delta1;
        }
        let Some((mut next, _)) = accepted else {
            line_search_failed = true;
            break;
        };
        clamped |= clamp_gamma(&mut next);
        let step = (&next - &gamma).norm();
        gamma = next;
        fval = objective_f(&gamma, q, b);
        trace.push(fval);
        if step < cfg.conv_tol {
            break;
        }
    }
    Ok(ScaOutput {
        gamma,
        trace,
        iterations,
        clamped,
        line_search_failed,
    })
}

fn project_ball(gamma: &mut CVec, a_budget: f64) {
    let n2 = gamma.norm_squared();
    if n2 > a_budget {
        *gamma *= c64((a_budget / n2).sqrt(), 0.0);
    }
}

/// Projected Wirtinger-gradient descent on `f` with step halving.
pub fn gd_baseline(
    q: &CVec,
    b: &CMat,
    a_budget: f64,
    step: f64,
    max_iter: usize,
    gamma_init: &CVec,
) -> CVec {
    let mut gamma = gamma_init.clone();
    project_ball(&mut gamma, a_budget);
    clamp_gamma(&mut gamma);
    let mut fval = objective_f(&gamma, q, b);
    let mut mu = step;
    for _ in 0..max_iter {
        let g = grad_f(&gamma, q, b);
        let mut moved = false;
        for _ in 0..40 {
            let mut cand = &gamma - &g * c64(mu, 0.0);
            project_ball(&mut cand, a_budget);
            clamp_gamma(&mut cand);
            let fc = objective_f(&cand, q, b);
            if fc < fval {
                gamma = cand;
                fval = fc;
                moved = true;
                break;
            }
            mu *= 0.5;
        }
        if !moved {
            break;
        }
    }
    gamma
}

/// Default GD step `1e-2 / ‖Q_0‖`.
pub fn gd_default_step(q: &CVec, b: &CMat, gamma0: &CVec) -> f64 {
    let sur = surrogate_params(gamma0, q, b, 0.0);
    1e-2 / sur.k.max(f64::MIN_POSITIVE)
}

/// RIS optimizer used inside the alternating loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RisSolver {
    Sca,
    Gd,
}

#[derive(Debug, Clone)]
pub struct BeamformingSolution {
    pub f: CVec,
    pub w: CVec,
    pub gamma: RISConfig,
    /// Model SNR `|f^H H_UIB w|² / (‖f‖² σ_U²)`.
    pub snr: f64,
    pub se: f64,
    /// `|f^H H_UIB w|²` after every outer iteration.
    pub trace: Vec<f64>,
    pub clamped: bool,
}

/// Outer-loop controls of [`alternating_joint`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointConfig {
    pub mode: BfMode,
    pub solver: RisSolver,
    pub sca: SCAConfig,
    pub max_outer: usize,
    pub rel_tol: f64,
    pub fw_iter: usize,
    pub gd_iter: usize,
}

impl Default for JointConfig {
    fn default() -> Self {
        Self {
            mode: BfMode::Digital,
            solver: RisSolver::Sca,
            sca: SCAConfig::default(),
            max_outer: 20,
            rel_tol: 1e-4,
            fw_iter: 100,
            gd_iter: 200,
        }
    }
}

fn fw(mode: BfMode, h: &CMat, p_b: f64, iters: usize) -> (CVec, CVec) {
    match mode {
        BfMode::Analog => fw_analog(h, p_b, iters),
        BfMode::Digital => fw_digital(h, p_b),
    }
}

/// Alternates `{f, w}` for fixed γ and γ for fixed `{f, w}` on the
/// coupling-aware model; keeps the best iterate.
#[allow(clippy::too_many_arguments)]
pub fn alternating_joint<R: Rng + ?Sized>(
    g_ul: &CMat,
    s: &ScatteringMatrix,
    n_u: usize,
    n_b: usize,
    p_b: f64,
    a_budget: f64,
    cfg: &JointConfig,
    sigma2_ue: f64,
    rng: &mut R,
) -> Result<BeamformingSolution> {
    let g_dl = ul_to_dl(g_ul, n_u, n_b)?;
    let n_i = s.n();
    let mut gamma = random_phases(rng, n_i, (a_budget / n_i as f64).sqrt());
    let mut trace = Vec::new();
    let mut best: Option<(f64, CVec, CVec, CVec)> = None;
    let mut clamped = false;
    let mut prev = f64::NAN;
    for _ in 0..cfg.max_outer {
        let cfg_g = RISConfig::new(gamma.clone(), a_budget)?;
        let h = h_uib(&g_dl, &cfg_g, s, n_u)?;
        let (f, w) = fw(cfg.mode, &h, p_b, cfg.fw_iter);
        let before = bf_gain(&h, &f, &w).powi(2);
        if best.as_ref().is_none_or(|b| before > b.0) {
            best = Some((before, f.clone(), w.clone(), gamma.clone()));
        }
        let t = beam_vector(&g_dl, &f, &w);
        let (q, b) = neumann_coefficients(&t, s);
        gamma = match cfg.solver {
            RisSolver::Sca => {
                let out = sca_optimize(&q, &b, a_budget, &cfg.sca, &gamma)?;
                clamped |= out.clamped;
                out.gamma
            }
            RisSolver::Gd => {
                let step = gd_default_step(&q, &b, &gamma);
                gd_baseline(&q, &b, a_budget, step, cfg.gd_iter, &gamma)
            }
        };
        let cfg_g = RISConfig::new(gamma.clone(), a_budget)?;
        let h = h_uib(&g_dl, &cfg_g, s, n_u)?;
        let obj = bf_gain(&h, &f, &w).powi(2);
        trace.push(obj);
        if best.as_ref().is_none_or(|b| obj > b.0) {
            best = Some((obj, f.clone(), w.clone(), gamma.clone()));
        }
        if prev.is_finite() && (obj - prev).abs() <= cfg.rel_tol * prev.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        prev = obj;
    }
    let (obj, f, w, gamma) = best.expect("at least one outer iteration");
    let snr = obj / (f.norm_squared() * sigma2_ue);
    Ok(BeamformingSolution {
        f,
        w,
        gamma: RISConfig::new(gamma, a_budget)?,
        snr,
        se: se(snr),
        trace,
        clamped,
    })
}

/// Coupling-unaware joint design on `G_cv`: SVD (or phase projection)
/// beams and the closed-form `γ = √A q / ‖q‖` of `max |q^H γ|`.
#[allow(clippy::too_many_arguments)]
pub fn conventional_joint<R: Rng + ?Sized>(
    g_cv_ul: &CMat,
    n_u: usize,
    n_b: usize,
    p_b: f64,
    a_budget: f64,
    cfg: &JointConfig,
    sigma2_ue: f64,
    rng: &mut R,
) -> Result<BeamformingSolution> {
    let g_dl = ul_to_dl_cv(g_cv_ul, n_u, n_b)?;
    let n_i = g_cv_ul.ncols();
    let mut gamma = random_phases(rng, n_i, (a_budget / n_i as f64).sqrt());
    let mut trace = Vec::new();
    let mut best: Option<(f64, CVec, CVec, CVec)> = None;
    let mut prev = f64::NAN;
    let mut clamped = false;
    for _ in 0..cfg.max_outer {
        let h = h_uib_cv(&g_dl, &gamma, n_u);
        let (f, w) = fw(cfg.mode, &h, p_b, cfg.fw_iter);
        let t = beam_vector_cv(&g_dl, &f, &w);
        // t^T γ = q^H γ with q = t*
        let q = t.conjugate();
        let qn = q.norm();
        if qn > 0.0 {
            gamma = q * c64(a_budget.sqrt() / qn, 0.0);
        }
        clamped |= clamp_gamma(&mut gamma);
        let h = h_uib_cv(&g_dl, &gamma, n_u);
        let obj = bf_gain(&h, &f, &w).powi(2);
        trace.push(obj);
        if best.as_ref().is_none_or(|b| obj > b.0) {
            best = Some((obj, f.clone(), w.clone(), gamma.clone()));
        }
        if prev.is_finite() && (obj - prev).abs() <= cfg.rel_tol * prev.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        prev = obj;
    }
    let (obj, f, w, gamma) = best.expect("at least one outer iteration");
    let snr = obj / (f.norm_squared() * sigma2_ue);
    Ok(BeamformingSolution {
        f,
        w,
        gamma: RISConfig::new(gamma, a_budget)?,
        snr,
        se: se(snr),
        trace,
        clamped,
    })
}

/// `G_cv^DL^T (w ⊗ f*)`.
pub fn beam_vector_cv(g_dl_cv: &CMat, f: &CVec, w: &CVec) -> CVec {
    beam_vector(g_dl_cv, f, w)
}

/// Receive SNR with the active-RIS noise term:
/// `|f^H H_UIB w|² / (‖f‖² σ_U² + ‖f^H H_UI Γ̄‖² σ_I²)`, where
/// `H_UI = H_IU^T` and `H_IB = H_BI^T`.
pub fn snr_exact(
    f: &CVec,
    w: &CVec,
    cfg: &RISConfig,
    s: &ScatteringMatrix,
    h_ui: &CMat,
    h_ib: &CMat,
    noise: &NoiseConfig,
) -> Result<f64> {
    let r = ris_response(cfg, s)?;
    let fh_ui_r = f.adjoint() * h_ui * &r;
    let sig = (&fh_ui_r * h_ib * w)[(0, 0)].norm_sqr();
    let den = f.norm_squared() * noise.sigma2_ue + fh_ui_r.norm_squared() * noise.sigma2_ris;
    if !(den > 0.0) {
        return Err(Error::Undefined("SNR denominator is zero".into()));
    }
    Ok(sig / den)
}

/// Noise powers at the UE: `(‖f‖² σ_U², ‖f^H H_UI Γ̄‖² σ_I²)`.
pub fn noise_terms(
    f: &CVec,
    cfg: &RISConfig,
    s: &ScatteringMatrix,
    h_ui: &CMat,
    noise: &NoiseConfig,
) -> Result<(f64, f64)> {
    Ok(noise_terms_with(f, &ris_response(cfg, s)?, h_ui, noise))
}

/// As [`noise_terms`], for a precomputed RIS response `Γ̄`.
pub fn noise_terms_with(f: &CVec, response: &CMat, h_ui: &CMat, noise: &NoiseConfig) -> (f64, f64) {
    let fh_ui_r = f.adjoint() * h_ui * response;
    (
        f.norm_squared() * noise.sigma2_ue,
        fh_ui_r.norm_squared() * noise.sigma2_ris,
    )
}

pub fn se(snr: f64) -> f64 {
    (1.0 + snr).log2()
}
