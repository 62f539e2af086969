use super::{upa_arv, Angle2D, ArrayGeometry, ChannelPair, RISConfig, ScatteringMatrix};
use crate::error::{Error, Result};
use crate::linalg::{diag, inv_checked, lu_checked, CMat, CVec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    /// `H_BI Γ H_IU`, coupling ignored.
    Conventional,
    /// `H_BI (Γ^{-1} − S)^{-1} H_IU`.
    Exact,
}

/// RIS response `(Γ^{-1} − S)^{-1}`; exactly `diag(γ)` when S is zero.
pub fn ris_response(cfg: &RISConfig, s: &ScatteringMatrix) -> Result<CMat> {
    let n = cfg.n();
    if s.n() != n {
        return Err(Error::Dim(format!("S is {}x{}, gamma has {n} entries", s.n(), s.n())));
    }
    if s.is_zero() {
        return Ok(diag(&cfg.gamma));
    }
    let mut m = -s.s.clone();
    for i in 0..n {
        m[(i, i)] += cfg.gamma[i].inv();
    }
    inv_checked(&m)
}

/// `X·(Γ^{-1} − S)^{-1}` without forming the inverse; same singularity
/// rule as [`ris_response`], with an estimated condition number.
pub fn ris_response_left(cfg: &RISConfig, s: &ScatteringMatrix, x: &CMat) -> Result<CMat> {
    let n = cfg.n();
    if s.n() != n || x.ncols() != n {
        return Err(Error::Dim(format!("rows of length {} against a {n}-element RIS", x.ncols())));
    }
    if s.is_zero() {
        let mut out = x.clone();
        for (j, g) in cfg.gamma.iter().enumerate() {
            out.column_mut(j).iter_mut().for_each(|z| *z *= *g);
        }
        return Ok(out);
    }
    let mut m = -s.s.clone();
    for i in 0..n {
        m[(i, i)] += cfg.gamma[i].inv();
    }
    // X M^{-1} = (M^{-T} X^T)^T
    Ok(lu_checked(&m)?.solve_transposed(&x.transpose()).transpose())
}

pub fn cascaded(
    pair: &ChannelPair,
    cfg: &RISConfig,
    s: &ScatteringMatrix,
    model: Model,
) -> Result<CMat> {
    if pair.n_i() != cfg.n() || pair.h_bi.ncols() != cfg.n() {
        return Err(Error::Dim("subchannels and RIS size disagree".into()));
    }
    match model {
        Model::Conventional => {
            let mut hg = pair.h_bi.clone();
            for (j, g) in cfg.gamma.iter().enumerate() {
                hg.column_mut(j).iter_mut().for_each(|z| *z *= *g);
            }
            Ok(hg * &pair.h_iu)
        }
        Model::Exact => Ok(&pair.h_bi * ris_response(cfg, s)? * &pair.h_iu),
    }
}

/// Truncated Neumann series of the RIS response.
#[derive(Debug, Clone)]
pub struct NeumannResponse {
    pub response: CMat,
    /// Spectral radius of ΓS.
    pub radius: f64,
    /// Set when the radius is at least one and the series diverges.
    pub divergent: bool,
}

/// `Σ_{n=0}^{order} (ΓS)^n Γ`.
pub fn neumann_response(cfg: &RISConfig, s: &ScatteringMatrix, order: usize) -> Result<NeumannResponse> {
    let n = cfg.n();
    if s.n() != n {
        return Err(Error::Dim("S and gamma sizes differ".into()));
    }
    let gamma = diag(&cfg.gamma);
    let gs = &gamma * &s.s;
    let radius = s.coupling_radius(&cfg.gamma);
    let mut term = gamma.clone();
    let mut acc = gamma;
    for _ in 0..order {
        term = &gs * term;
        acc += &term;
    }
    Ok(NeumannResponse {
        response: acc,
        radius,
        divergent: !(radius < 1.0),
    })
}

/// Directional configuration `γ = a·N·a_I*(out) ⊙ a_I*(incident)` so that
/// every element has amplitude `a`.
pub fn directional_config(
    geom: &ArrayGeometry,
    wavelength: f64,
    amp: f64,
    out: Angle2D,
    incident: Angle2D,
) -> Result<RISConfig> {
    let n = geom.n() as f64;
    let ao = upa_arv(geom, out, wavelength);
    let ai = upa_arv(geom, incident, wavelength);
    let gamma = ao.zip_map(&ai, |x, y| x.conj() * y.conj() * (amp * n));
    RISConfig::new(gamma, amp * amp * n)
}

/// Normalized reflected power `|a^T(ψ) (Γ^{-1}−S)^{-1} a(ψ_inc)|²` over a grid.
pub fn beam_pattern(
    cfg: &RISConfig,
    s: &ScatteringMatrix,
    geom: &ArrayGeometry,
    wavelength: f64,
    incident: Angle2D,
    grid: &[Angle2D],
) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::Param("beam pattern grid is empty".into()));
    }
    let r = ris_response(cfg, s)?;
    let v: CVec = r * upa_arv(geom, incident, wavelength);
    let mut out: Vec<f64> = grid
        .iter()
        .map(|a| (upa_arv(geom, *a, wavelength).transpose() * &v)[(0, 0)].norm_sqr())
        .collect();
    let peak = out.iter().cloned().fold(0.0, f64::max);
    if peak > 0.0 {
        out.iter_mut().for_each(|g| *g /= peak);
    }
    Ok(out)
}
