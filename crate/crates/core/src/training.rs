//! Uplink training: random beams, RIS training configurations and the noisy
//! received-signal matrix under the active-RIS noise model.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{ris_response, ChannelPair, RISConfig, ScatteringMatrix};
use crate::error::{Error, Result};
use crate::linalg::{cn, cn_vec, dbm_to_w, random_phases, vec_of, C64, CMat, CVec};

#[derive(Debug, Clone)]
pub struct TrainingPlan {
    pub m_b: usize,
    pub m_i: usize,
    /// N_U × M_B, entries of modulus √(P_U/N_U).
    pub f_beams: CMat,
    /// N_B × M_B, entries of modulus √(1/N_B).
    pub w_beams: CMat,
    pub ris_configs: Vec<RISConfig>,
    pub pilots: CVec,
}

impl TrainingPlan {
    pub fn n_u(&self) -> usize {
        self.f_beams.nrows()
    }
    pub fn n_b(&self) -> usize {
        self.w_beams.nrows()
    }
    pub fn n_i(&self) -> usize {
        self.ris_configs[0].n()
    }
}

/// Noise variances in watts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub sigma2_ris: f64,
    pub sigma2_bs: f64,
    pub sigma2_ue: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        let w = dbm_to_w(-95.0);
        Self {
            sigma2_ris: w,
            sigma2_bs: w,
            sigma2_ue: w,
        }
    }
}

impl NoiseConfig {
    pub fn silent() -> Self {
        Self {
            sigma2_ris: 0.0,
            sigma2_bs: 0.0,
            sigma2_ue: 0.0,
        }
    }
}

/// Received training signal, `M_B × M_I`.
#[derive(Debug, Clone)]
pub struct ReceivedSignal {
    pub y: CMat,
    pub y_noise_free: CMat,
    pub p_matrix: CMat,
}

#[allow(clippy::too_many_arguments)]
pub fn make_plan<R: Rng + ?Sized>(
    p_u: f64,
    n_u: usize,
    n_b: usize,
    n_i: usize,
    m_b: usize,
    m_i: usize,
    amp_budget: f64,
    rng: &mut R,
) -> Result<TrainingPlan> {
    if m_b == 0 || m_i == 0 {
        return Err(Error::Param("training needs at least one beam pair and one RIS configuration".into()));
    }
    if n_u == 0 || n_b == 0 || n_i == 0 {
        return Err(Error::Param("array sizes must be positive".into()));
    }
    if !(p_u > 0.0) || !(amp_budget > 0.0) {
        return Err(Error::Param("training power and RIS budget must be positive".into()));
    }
    let fa = (p_u / n_u as f64).sqrt();
    let wa = (1.0 / n_b as f64).sqrt();
    let mut f_beams = CMat::zeros(n_u, m_b);
    let mut w_beams = CMat::zeros(n_b, m_b);
    for m in 0..m_b {
        f_beams.set_column(m, &random_phases(rng, n_u, fa));
        w_beams.set_column(m, &random_phases(rng, n_b, wa));
    }
    let ga = (amp_budget / n_i as f64).sqrt();
    let ris_configs = (0..m_i)
        .map(|_| RISConfig::new(random_phases(rng, n_i, ga), amp_budget))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainingPlan {
        m_b,
        m_i,
        f_beams,
        w_beams,
        ris_configs,
        pilots: CVec::from_element(m_b, C64::new(1.0, 0.0)),
    })
}

/// `P` with row `m` equal to `f_m^T ⊗ w_m^H`, so `P vec(H)` stacks `w^H H f`.
pub fn measurement_matrix(plan: &TrainingPlan) -> CMat {
    let (n_u, n_b) = (plan.n_u(), plan.n_b());
    let mut p = CMat::zeros(plan.m_b, n_u * n_b);
    for m in 0..plan.m_b {
        for u in 0..n_u {
            let fu = plan.f_beams[(u, m)];
            for b in 0..n_b {
                p[(m, u * n_b + b)] = fu * plan.w_beams[(b, m)].conj();
            }
        }
    }
    p
}

/// RIS responses `(Γ_m^{-1} − S)^{-1}` for every training configuration.
pub fn ris_responses(plan: &TrainingPlan, s: &ScatteringMatrix) -> Result<Vec<CMat>> {
    plan.ris_configs.iter().map(|c| ris_response(c, s)).collect()
}

/// Noisy training observation. Noise is drawn independently per
/// `(m_B, m_I)`: `w^H (H_BI Γ̄ ω_I + ω_B)`.
pub fn receive<R: Rng + ?Sized>(
    plan: &TrainingPlan,
    pair: &ChannelPair,
    s: &ScatteringMatrix,
    noise: &NoiseConfig,
    rng: &mut R,
) -> Result<ReceivedSignal> {
    let responses = ris_responses(plan, s)?;
    receive_with(plan, pair, &responses, noise, rng)
}

/// As [`receive`] with precomputed RIS responses.
pub fn receive_with<R: Rng + ?Sized>(
    plan: &TrainingPlan,
    pair: &ChannelPair,
    responses: &[CMat],
    noise: &NoiseConfig,
    rng: &mut R,
) -> Result<ReceivedSignal> {
    if pair.n_u() != plan.n_u() || pair.n_b() != plan.n_b() || pair.n_i() != plan.n_i() {
        return Err(Error::Dim("training plan and channel sizes disagree".into()));
    }
    let n_i = plan.n_i();
    let mut y = CMat::zeros(plan.m_b, plan.m_i);
    let mut y0 = CMat::zeros(plan.m_b, plan.m_i);
    let wh = plan.w_beams.adjoint();
    for (mi, r) in responses.iter().enumerate() {
        // rows of W^H H_BI Γ̄, one per beam pair
        let wbr = &wh * &pair.h_bi * r;
        let fx = &plan.f_beams;
        let sig = &wbr * &pair.h_iu * fx;
        for mb in 0..plan.m_b {
            let x = plan.pilots[mb];
            let clean = sig[(mb, mb)] * x;
            let omega_i = cn_vec(rng, n_i, noise.sigma2_ris);
            let ris_noise: C64 = (0..n_i).map(|k| wbr[(mb, k)] * omega_i[k]).sum();
            let bs_noise: C64 = (0..plan.n_b())
                .map(|b| plan.w_beams[(b, mb)].conj() * cn(rng, noise.sigma2_bs))
                .sum();
            y0[(mb, mi)] = clean / x;
            y[(mb, mi)] = (clean + ris_noise + bs_noise) / x;
        }
    }
    Ok(ReceivedSignal {
        y,
        y_noise_free: y0,
        p_matrix: measurement_matrix(plan),
    })
}

/// Columns `γ_m`, `N_I × M_I`.
pub fn theta_cv(plan: &TrainingPlan) -> CMat {
    let mut t = CMat::zeros(plan.n_i(), plan.m_i);
    for (m, c) in plan.ris_configs.iter().enumerate() {
        t.set_column(m, &c.gamma);
    }
    t
}

/// Columns `vec((Γ_m^{-1} − S)^{-1})`, `N_I² × M_I`.
pub fn theta_mc(plan: &TrainingPlan, s: &ScatteringMatrix) -> Result<CMat> {
    Ok(theta_from_responses(&ris_responses(plan, s)?))
}

pub fn theta_from_responses(responses: &[CMat]) -> CMat {
    let n2 = responses.first().map_or(0, |r| r.len());
    let mut t = CMat::zeros(n2, responses.len());
    for (m, r) in responses.iter().enumerate() {
        t.set_column(m, &vec_of(r));
    }
    t
}
