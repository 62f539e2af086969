//! Sparse recovery: OMP, dictionary reduction, the two-stage
//! coupling-aware estimator and reconstruction NMSE.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dict::{sensing, Dictionaries, Dictionary, DictKind, Measurement, RisAtoms, SensingProblem};
use crate::error::{Error, Result};
use crate::linalg::{cn_vec, frob2, lstsq, CMat, CVec};

/// NMSE reported for an exact reconstruction.
pub const NMSE_FLOOR_DB: f64 = -300.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstModel {
    Conventional,
    Exact,
    ExactDR,
}

/// Output of [`omp`].
#[derive(Debug, Clone)]
pub struct OmpResult {
    /// Atom indices in selection order.
    pub support: Vec<usize>,
    /// Least-squares coefficients over `support`.
    pub coeffs: CVec,
    /// Residual norm after each iteration.
    pub residual_norms: Vec<f64>,
    /// Set when a refit hit a rank-deficient submatrix.
    pub rank_deficient: bool,
}

/// Orthogonal matching pursuit with column-normalized correlation and
/// lowest-index tie breaking.
pub fn omp(prob: &SensingProblem, l_hat: usize) -> Result<OmpResult> {
    let xi = &prob.xi;
    if l_hat == 0 || l_hat > xi.ncols() || l_hat > xi.nrows() {
        return Err(Error::Param(format!(
            "sparsity {l_hat} must lie in 1..=min({}, {})",
            xi.ncols(),
            xi.nrows()
        )));
    }
    let norms = xi.column_norms();
    let mut support: Vec<usize> = Vec::with_capacity(l_hat);
    let mut sub = CMat::zeros(xi.nrows(), 0);
    let mut coeffs = CVec::zeros(0);
    let mut residual = prob.y.clone();
    let mut residual_norms = Vec::with_capacity(l_hat);
    let mut rank_deficient = false;
    for _ in 0..l_hat {
        let corr = xi.correlate(&residual);
        let mut best = usize::MAX;
        let mut best_score = -1.0;
        for (j, c) in corr.iter().enumerate() {
            if norms[j] == 0.0 || support.contains(&j) {
                continue;
            }
            let score = c.norm() / norms[j];
            if score > best_score {
                best_score = score;
                best = j;
            }
        }
        if best == usize::MAX {
            break;
        }
        support.push(best);
        let at = sub.ncols();
        sub = sub.insert_column(at, crate::linalg::c64(0.0, 0.0));
        sub.set_column(at, &xi.column(best));
        let (x, deficient) = lstsq(&sub, &prob.y);
        rank_deficient |= deficient;
        coeffs = x;
        residual = &prob.y - &sub * &coeffs;
        residual_norms.push(residual.norm());
    }
    Ok(OmpResult {
        support,
        coeffs,
        residual_norms,
        rank_deficient,
    })
}

/// Dictionary-reduction factor and the resulting atom count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DRSpec {
    pub rho_dr: f64,
    pub g_dr: usize,
    pub sub_cols: usize,
}

impl DRSpec {
    pub fn new(rho_dr: f64, sub_cols: usize) -> Result<Self> {
        if !(rho_dr > 0.0 && rho_dr <= 1.0) {
            return Err(Error::Param(format!("reduction factor {rho_dr} must lie in (0, 1]")));
        }
        if sub_cols == 0 {
            return Err(Error::Param("candidate pool is empty".into()));
        }
        let g_dr = ((rho_dr * sub_cols as f64).round() as usize).clamp(1, sub_cols);
        Ok(Self {
            rho_dr,
            g_dr,
            sub_cols,
        })
    }
}

/// Additive `CN(0, σ_E²)` perturbation of the stage-2 observation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorInjection {
    pub sigma2_e: f64,
}

/// Ranks candidates by `√diag(C C^H)` with `C = top^H a_coarse` and returns
/// the `g_dr` best indices, strongest first (ties keep the lower index).
pub fn dr_rank(top: &CMat, a_coarse: &CMat, g_dr: usize) -> Result<Vec<usize>> {
    if g_dr == 0 || g_dr > top.ncols() {
        return Err(Error::Param(format!(
            "cannot keep {g_dr} atoms from a pool of {}",
            top.ncols()
        )));
    }
    if top.nrows() != a_coarse.nrows() {
        return Err(Error::Dim("coarse atoms and pool heights differ".into()));
    }
    let c = top.adjoint() * a_coarse;
    let score: Vec<f64> = (0..c.nrows()).map(|i| c.row(i).norm()).collect();
    let mut idx: Vec<usize> = (0..score.len()).collect();
    idx.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));
    idx.truncate(g_dr);
    Ok(idx)
}

/// Dense dictionary reduction: correlates the first `N_I` rows of the first
/// `sub_cols` pool columns with `a_coarse` and returns the selected pool
/// columns at full height together with their indices.
pub fn dictionary_reduce(
    a_coarse: &CMat,
    a_pool: &CMat,
    sub_cols: usize,
    g_dr: usize,
) -> Result<(CMat, Vec<usize>)> {
    let n_i = a_coarse.nrows();
    if sub_cols > a_pool.ncols() || a_pool.nrows() < n_i {
        return Err(Error::Param(format!(
            "pool of {} columns cannot supply {sub_cols} candidates",
            a_pool.ncols()
        )));
    }
    let top = a_pool.view((0, 0), (n_i, sub_cols)).into_owned();
    let idx = dr_rank(&top, a_coarse, g_dr)?;
    let mut out = CMat::zeros(a_pool.nrows(), idx.len());
    for (k, &j) in idx.iter().enumerate() {
        out.set_column(k, &a_pool.column(j));
    }
    Ok((out, idx))
}

/// Dictionary reduction over the implicit pool `Ã_I ⊗ Ã_I`; returns the
/// `(g1, g2)` grid pairs of the selected columns.
pub fn dictionary_reduce_kron(
    a_coarse: &CMat,
    a_i: &CMat,
    sub_cols: usize,
    g_dr: usize,
) -> Result<Vec<(usize, usize)>> {
    let g = a_i.ncols();
    if sub_cols > g * g {
        return Err(Error::Param(format!("pool of {} columns cannot supply {sub_cols}", g * g)));
    }
    // first N_I rows of column (g1, g2) are a_i[0, g1] · a_i[:, g2]
    let mut top = CMat::zeros(a_i.nrows(), sub_cols);
    for k in 0..sub_cols {
        let (g1, g2) = (k / g, k % g);
        top.set_column(k, &(a_i.column(g2) * a_i[(0, g1)]));
    }
    Ok(dr_rank(&top, a_coarse, g_dr)?
        .into_iter()
        .map(|k| (k / g, k % g))
        .collect())
}

/// Sparse channel estimate with its reconstructed equivalent channel.
#[derive(Debug, Clone)]
pub struct SparseEstimate {
    pub support: Vec<usize>,
    pub coeffs: CVec,
    /// `N_U N_B × N_I` (conventional) or `N_U N_B × N_I²` (exact).
    pub g_hat: CMat,
    pub model: EstModel,
    pub rank_deficient: bool,
}

fn finish(d: &Dictionary, r: OmpResult, model: EstModel) -> SparseEstimate {
    SparseEstimate {
        g_hat: d.reconstruct(&r.support, &r.coeffs),
        support: r.support,
        coeffs: r.coeffs,
        model,
        rank_deficient: r.rank_deficient,
    }
}

/// MC-unaware estimate on `D̄_cv`.
pub fn conventional_estimate(
    y: &CVec,
    meas_cv: &Measurement,
    dicts: &Dictionaries,
    l_hat: usize,
) -> Result<SparseEstimate> {
    let prob = sensing(y, meas_cv, &dicts.cv)?;
    Ok(finish(&dicts.cv, omp(&prob, l_hat)?, EstModel::Conventional))
}

/// MC-aware estimate over the full exact dictionary (no reduction).
pub fn exact_estimate(
    y: &CVec,
    meas_mc: &Measurement,
    dicts: &Dictionaries,
    l_hat: usize,
) -> Result<SparseEstimate> {
    let prob = sensing(y, meas_mc, &dicts.mc)?;
    Ok(finish(&dicts.mc, omp(&prob, l_hat)?, EstModel::Exact))
}

/// Both stages of the two-stage estimator.
#[derive(Debug, Clone)]
pub struct TwoStage {
    pub coarse: SparseEstimate,
    pub refined: SparseEstimate,
    /// Grid pairs kept by dictionary reduction.
    pub kept: Vec<(usize, usize)>,
}

/// Coarse conventional OMP, dictionary reduction around the coarse RIS
/// atoms, then OMP on the reduced exact dictionary.
#[allow(clippy::too_many_arguments)]
pub fn two_stage_estimate<R: Rng + ?Sized>(
    prob_cv: &SensingProblem,
    meas_mc: &Measurement,
    dicts: &Dictionaries,
    l_hat: usize,
    dr: DRSpec,
    err: ErrorInjection,
    rng: &mut R,
) -> Result<TwoStage> {
    let stage1 = omp(prob_cv, l_hat)?;
    let coarse = finish(&dicts.cv, stage1, EstModel::Conventional);
    let RisAtoms::Dense(cv_atoms) = &dicts.cv.ris else {
        return Err(Error::Param("conventional dictionary must hold explicit RIS atoms".into()));
    };
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
        ris_meta: kept.clone(),
    };
    let mut y2 = prob_cv.y.clone();
    if err.sigma2_e > 0.0 {
        y2 += cn_vec(rng, y2.len(), err.sigma2_e);
    }
    let prob_dr = sensing(&y2, meas_mc, &d_dr)?;
    let refined = finish(&d_dr, omp(&prob_dr, l_hat)?, EstModel::ExactDR);
    Ok(TwoStage {
        coarse,
        refined,
        kept,
    })
}

/// `10 log10(‖P Ĝ Θ − Ȳ‖² / ‖Ȳ‖²)` with Θ matching the estimate's model.
pub fn reconstruction_nmse(g_hat: &CMat, p: &CMat, theta: &CMat, y_noise_free: &CMat) -> Result<f64> {
    if g_hat.ncols() != theta.nrows() || p.ncols() != g_hat.nrows() {
        return Err(Error::Dim(format!(
            "estimate is {}x{}, P has {} columns, Theta has {} rows",
            g_hat.nrows(),
            g_hat.ncols(),
            p.ncols(),
            theta.nrows()
        )));
    }
    let den = frob2(y_noise_free);
    if den == 0.0 {
        return Err(Error::Undefined("noise-free signal has zero energy".into()));
    }
    let num = frob2(&((p * g_hat) * theta - y_noise_free));
    Ok(nmse_db(num, den))
}

pub fn nmse_db(err_energy: f64, ref_energy: f64) -> f64 {
    let r = err_energy / ref_energy;
    if r > 0.0 {
        (10.0 * r.log10()).max(NMSE_FLOOR_DB)
    } else {
        NMSE_FLOOR_DB
    }
}
