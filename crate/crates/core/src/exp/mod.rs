//! Seeded Monte-Carlo sweeps over the estimation and beamforming
//! pipelines, with CSV/JSON output.

mod output;
mod run;
mod trial;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::beamform::{BfMode, SCAConfig};
use crate::channel::SelfTerm;
use crate::error::{Error, Result};
use crate::linalg::dbm_to_w;
use crate::training::NoiseConfig;

pub use output::{emit, read_json, to_csv_string, Format};
pub use run::{run_sweep, run_sweep_ordered, sub_seed, time_phases};

/// Built-in scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    NmseVsPower,
    NmseVsAmp,
    NmseVsSpacing,
    NmseVsErrvar,
    SeVsPower,
    SeVsAmp,
    SeVsSpacing,
    NoisePowerCheck,
    BeamPattern,
    Timing,
}

impl Scenario {
    pub const ALL: [Scenario; 10] = [
        Scenario::NmseVsPower,
        Scenario::NmseVsAmp,
        Scenario::NmseVsSpacing,
        Scenario::NmseVsErrvar,
        Scenario::SeVsPower,
        Scenario::SeVsAmp,
        Scenario::SeVsSpacing,
        Scenario::NoisePowerCheck,
        Scenario::BeamPattern,
        Scenario::Timing,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::NmseVsPower => "nmse-vs-power",
            Scenario::NmseVsAmp => "nmse-vs-amp",
            Scenario::NmseVsSpacing => "nmse-vs-spacing",
            Scenario::NmseVsErrvar => "nmse-vs-errvar",
            Scenario::SeVsPower => "se-vs-power",
            Scenario::SeVsAmp => "se-vs-amp",
            Scenario::SeVsSpacing => "se-vs-spacing",
            Scenario::NoisePowerCheck => "noise-power-check",
            Scenario::BeamPattern => "beam-pattern",
            Scenario::Timing => "timing",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario '{s}'")))
    }

    pub fn description(self) -> &'static str {
        match self {
            Scenario::NmseVsPower => "estimation NMSE versus UE transmit power",
            Scenario::NmseVsAmp => "estimation NMSE versus average RIS amplification",
            Scenario::NmseVsSpacing => "estimation NMSE versus RIS element spacing",
            Scenario::NmseVsErrvar => "two-stage NMSE versus UE power with error injected between stages",
            Scenario::SeVsPower => "spectral efficiency versus BS transmit power",
            Scenario::SeVsAmp => "spectral efficiency versus average RIS amplification",
            Scenario::SeVsSpacing => "spectral efficiency versus RIS element spacing",
            Scenario::NoisePowerCheck => "UE and RIS-propagated noise powers versus amplification",
            Scenario::BeamPattern => "normalized RIS reflection pattern with and without coupling",
            Scenario::Timing => "offline and online estimator wall-clock time",
        }
    }

    fn is_se(self) -> bool {
        matches!(self, Scenario::SeVsPower | Scenario::SeVsAmp | Scenario::SeVsSpacing)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Desk,
    Paper,
}

impl Profile {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            _ => Err(Error::Config(format!("unknown profile '{s}'"))),
        }
    }
}

/// Swept quantity. Powers in dBm, spacing in wavelengths, error variance
/// as a multiple of the RIS noise variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVar {
    PU,
    PB,
    AmpBar,
    Spacing,
    ErrVar,
    /// Beam-pattern observation angle (degrees).
    Angle,
    /// Noise check: RIS amplification `a`.
    Amp,
}

impl SweepVar {
    pub fn label(self) -> &'static str {
        match self {
            SweepVar::PU => "p_u_dbm",
            SweepVar::PB => "p_b_dbm",
            SweepVar::AmpBar => "amp_bar",
            SweepVar::Spacing => "d_i_lambda",
            SweepVar::ErrVar => "sigma2_e_rel",
            SweepVar::Angle => "angle_deg",
            SweepVar::Amp => "amp",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub variable: SweepVar,
    pub values: Vec<f64>,
}

/// Array sizes, spacings (in wavelengths) and link geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub carrier_ghz: f64,
    pub ue: [usize; 2],
    pub bs: [usize; 2],
    pub ris: [usize; 2],
    pub ue_spacing: f64,
    pub bs_spacing: f64,
    pub ris_spacing: f64,
    /// UE position (m); the RIS sits at the origin.
    pub ue_position: [f64; 3],
    pub bs_position: [f64; 3],
    pub exponent_iu: f64,
    pub exponent_bi: f64,
    pub paths_u: usize,
    pub paths_b: usize,
}

impl GeometryConfig {
    pub fn wavelength(&self) -> f64 {
        299_792_458.0 / (self.carrier_ghz * 1e9)
    }

    pub fn d_iu(&self) -> f64 {
        norm3(self.ue_position)
    }

    pub fn d_bi(&self) -> f64 {
        norm3(self.bs_position)
    }
}

fn norm3(p: [f64; 3]) -> f64 {
    (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerConfig {
    pub p_u_dbm: f64,
    pub p_b_dbm: f64,
    /// `ā = √(A / N_I)`.
    pub amp_bar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    pub rho_dr: Vec<f64>,
    pub l_hat: usize,
    /// Grid size over array size, per array.
    pub grid_factor: usize,
    /// Training lengths as fractions of `N_B` and `N_I`.
    pub m_b_frac: f64,
    pub m_i_frac: f64,
    /// Run the full MC-aware OMP without reduction.
    pub exact: bool,
    /// Error variances, relative to `σ_I²`, for the error-injection sweep.
    #[serde(default)]
    pub err_var: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamformerConfig {
    pub mode: BfMode,
    pub conventional_mode: BfMode,
    pub sca: SCAConfig,
    pub max_outer: usize,
    /// Iteration budget of the gradient-descent baseline; 0 skips it.
    pub gd_iter: usize,
    /// Also design on channels estimated from training.
    pub estimated: bool,
    /// Dictionary reduction factor of the estimator feeding the design.
    pub rho_dr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseDbm {
    pub sigma2_ris_dbm: f64,
    pub sigma2_bs_dbm: f64,
    pub sigma2_ue_dbm: f64,
}

impl NoiseDbm {
    pub fn to_watts(&self) -> NoiseConfig {
        NoiseConfig {
            sigma2_ris: dbm_to_w(self.sigma2_ris_dbm),
            sigma2_bs: dbm_to_w(self.sigma2_bs_dbm),
            sigma2_ue: dbm_to_w(self.sigma2_ue_dbm),
        }
    }
}

/// Scattering-matrix source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SModel {
    /// Thin-wire dipoles with `h = λ/32`, `r = λ/500`.
    ThinWire {
        #[serde(default)]
        self_term: SelfTerm,
    },
    SyntheticDecay { peak: f64, decay: f64 },
    Zero,
}

/// Noise-check and beam-pattern specifics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuxConfig {
    /// RIS-UE distances as multiples of the Rayleigh distance.
    pub rd_multiples: Vec<f64>,
    /// Beam-pattern amplitudes `a`.
    pub pattern_amps: Vec<f64>,
    /// Beam-pattern incident and steered azimuths (degrees).
    pub incident_deg: f64,
    pub steer_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub geometry: GeometryConfig,
    pub powers: PowerConfig,
    pub sweep: Sweep,
    pub trials: usize,
    pub seed: u64,
    /// Worker threads; 0 uses all cores.
    #[serde(default)]
    pub workers: usize,
    pub estimator: EstimatorConfig,
    pub beamformer: BeamformerConfig,
    pub noise: NoiseDbm,
    pub s_model: SModel,
    pub aux: AuxConfig,
}

fn range(start: f64, step: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| start + step * k as f64).collect()
}

/// Log-spaced points between `lo` and `hi` inclusive.
fn logspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp())
        .collect()
}

impl ExperimentConfig {
    /// Defaults for a scenario at the given scale.
    pub fn preset(scenario: Scenario, profile: Profile) -> Self {
        let paper = profile == Profile::Paper;
        let ris = if paper { [16, 8] } else { [8, 4] };
        let mut geometry = GeometryConfig {
            carrier_ghz: 30.0,
            ue: [2, 1],
            bs: [4, 2],
            ris,
            ue_spacing: 0.5,
            bs_spacing: 0.5,
            ris_spacing: 1.0 / 20.0,
            ue_position: [2.6 * (std::f64::consts::PI / 6.0).sin(), 2.6 * (std::f64::consts::PI / 6.0).cos(), 0.0],
            bs_position: [2.2 * (std::f64::consts::PI / 3.0).sin(), 2.2 * (std::f64::consts::PI / 3.0).cos(), 0.0],
            exponent_iu: 2.1,
            exponent_bi: 2.1,
            paths_u: 2,
            paths_b: 2,
        };
        let mut powers = PowerConfig {
            p_u_dbm: 12.0,
            p_b_dbm: 10.0,
            amp_bar: 7.0,
        };
        if scenario.is_se() {
            geometry.paths_u = 1;
            geometry.paths_b = 1;
            geometry.ris_spacing = 0.1;
            powers.p_u_dbm = 10.0 * 5.0f64.log10();
        }
        let sweep = match scenario {
            Scenario::NmseVsPower | Scenario::NmseVsErrvar => Sweep {
                variable: SweepVar::PU,
                values: range(-8.0, 2.0, 11),
            },
            Scenario::NmseVsAmp | Scenario::SeVsAmp => Sweep {
                variable: SweepVar::AmpBar,
                values: range(1.0, 1.0, 10),
            },
            Scenario::NmseVsSpacing | Scenario::SeVsSpacing => Sweep {
                variable: SweepVar::Spacing,
                values: {
                    let mut v = logspace(0.02, 0.125, 11);
                    v.extend(logspace(0.125, 0.5, 4).into_iter().skip(1));
                    v
                },
            },
            Scenario::SeVsPower => Sweep {
                variable: SweepVar::PB,
                values: range(-10.0, 5.0, 7),
            },
            Scenario::NoisePowerCheck => Sweep {
                variable: SweepVar::Amp,
                values: vec![2.0, 4.0, 8.0, 16.0, 32.0, 64.0],
            },
            Scenario::BeamPattern => Sweep {
                variable: SweepVar::Angle,
                values: range(-90.0, 1.0, 181),
            },
            Scenario::Timing => Sweep {
                variable: SweepVar::PU,
                values: vec![12.0],
            },
        };
        if scenario == Scenario::NoisePowerCheck {
            geometry.ris = [10, 10];
            geometry.ue = [2, 2];
            geometry.ris_spacing = 0.5;
            geometry.paths_u = 1;
            geometry.exponent_iu = 2.0;
        }
        if scenario == Scenario::BeamPattern {
            geometry.ris = [16, 1];
            geometry.ris_spacing = 0.1;
        }
        if scenario == Scenario::Timing {
            geometry.ris = [8, 8];
        }
        let trials = match scenario {
            Scenario::BeamPattern => 1,
            Scenario::NoisePowerCheck => 100,
            _ if paper => 100,
            _ => 50,
        };
        let rho_dr = match scenario {
            Scenario::Timing => vec![0.1, 1.0],
            _ => vec![0.1, 1.0],
        };
        ExperimentConfig {
            scenario,
            geometry,
            powers,
            sweep,
            trials,
            seed: 2025,
            workers: 0,
            estimator: EstimatorConfig {
                rho_dr,
                l_hat: 5,
                grid_factor: 1,
                m_b_frac: 0.75,
                m_i_frac: 0.75,
                exact: true,
                err_var: if scenario == Scenario::NmseVsErrvar {
                    vec![0.0, 1.0, 3.0, 10.0]
                } else {
                    Vec::new()
                },
            },
            beamformer: BeamformerConfig {
                mode: BfMode::Analog,
                conventional_mode: BfMode::Digital,
                sca: SCAConfig::default(),
                max_outer: 20,
                gd_iter: 200,
                estimated: true,
                rho_dr: 1.0,
            },
            noise: NoiseDbm {
                sigma2_ris_dbm: -95.0,
                sigma2_bs_dbm: -95.0,
                sigma2_ue_dbm: -95.0,
            },
            s_model: SModel::ThinWire {
                self_term: SelfTerm::Matched,
            },
            aux: AuxConfig {
                rd_multiples: vec![1.0, 4.0, 16.0, 64.0],
                pattern_amps: vec![2.0, 5.0],
                incident_deg: -30.0,
                steer_deg: 30.0,
            },
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        let pos = |x: f64| x > 0.0 && x.is_finite();
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.sweep.values.is_empty() {
            return bad("sweep values must be nonempty");
        }
        if self.sweep.values.iter().any(|v| !v.is_finite()) {
            return bad("sweep values must be finite");
        }
        let g = &self.geometry;
        if !pos(g.carrier_ghz) || !pos(g.ue_spacing) || !pos(g.bs_spacing) || !pos(g.ris_spacing) {
            return bad("carrier and spacings must be positive");
        }
        if g.ue.contains(&0) || g.bs.contains(&0) || g.ris.contains(&0) {
            return bad("array dimensions must be positive");
        }
        if !pos(g.d_iu()) || !pos(g.d_bi()) || !pos(g.exponent_iu) || !pos(g.exponent_bi) {
            return bad("distances and path loss exponents must be positive");
        }
        if g.paths_u == 0 || g.paths_b == 0 {
            return bad("each link needs at least one path");
        }
        if !self.powers.p_u_dbm.is_finite() || !self.powers.p_b_dbm.is_finite() || !pos(self.powers.amp_bar) {
            return bad("powers must be finite and the amplification positive");
        }
        let e = &self.estimator;
        if e.l_hat == 0 || e.grid_factor == 0 {
            return bad("sparsity level and grid factor must be positive");
        }
        if e.rho_dr.iter().any(|&r| !(r > 0.0 && r <= 1.0)) || !(self.beamformer.rho_dr > 0.0 && self.beamformer.rho_dr <= 1.0) {
            return bad("reduction factors must lie in (0, 1]");
        }
        if !(e.m_b_frac > 0.0 && e.m_b_frac <= 1.0 && e.m_i_frac > 0.0 && e.m_i_frac <= 1.0) {
            return bad("training fractions must lie in (0, 1]");
        }
        if e.err_var.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
            return bad("error variances must be nonnegative");
        }
        self.beamformer.sca.validate()?;
        if self.beamformer.max_outer == 0 {
            return bad("beamformer needs at least one outer iteration");
        }
        let n = &self.noise;
        if [n.sigma2_ris_dbm, n.sigma2_bs_dbm, n.sigma2_ue_dbm].iter().any(|v| !v.is_finite()) {
            return bad("noise powers must be finite");
        }
        if let SModel::SyntheticDecay { peak, decay } = self.s_model {
            if !(peak >= 0.0 && decay > 0.0 && peak.is_finite() && decay.is_finite()) {
                return bad("synthetic coupling needs a nonnegative peak and a positive decay");
            }
        }
        if self.aux.rd_multiples.iter().any(|&m| !pos(m)) || self.aux.pattern_amps.iter().any(|&a| !pos(a)) {
            return bad("distance multiples and pattern amplitudes must be positive");
        }
        match (self.scenario, self.sweep.variable) {
            (Scenario::NoisePowerCheck, SweepVar::Amp) | (Scenario::BeamPattern, SweepVar::Angle) => {}
            (Scenario::NoisePowerCheck, _) | (Scenario::BeamPattern, _) => {
                return bad("noise check sweeps amp and beam pattern sweeps angle");
            }
            (_, SweepVar::Amp | SweepVar::Angle) => return bad("sweep variable does not apply to this scenario"),
            _ => {}
        }
        if matches!(self.sweep.variable, SweepVar::AmpBar | SweepVar::Spacing | SweepVar::Amp)
            && self.sweep.values.iter().any(|&v| !(v > 0.0))
        {
            return bad("swept amplification and spacing must be positive");
        }
        Ok(())
    }

    pub fn n_i(&self) -> usize {
        self.geometry.ris[0] * self.geometry.ris[1]
    }
}

/// One aggregated output row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultRecord {
    pub sweep_variable: String,
    pub sweep_value: f64,
    pub method: String,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub trials: usize,
    pub failures: usize,
}
