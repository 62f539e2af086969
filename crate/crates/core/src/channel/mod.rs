//! Array responses, multipath subchannels, the scattering matrix and the
//! conventional / mutual-coupling-aware cascaded channel models.

mod array;
mod paths;
mod response;
mod scattering;

pub use array::{arv_matrix, spatial_arv, upa_arv};
pub use paths::{assemble_channel, draw_paths, path_loss_los, Link};
pub use response::{
    beam_pattern, cascaded, directional_config, neumann_response, ris_response, ris_response_left, Model,
    NeumannResponse,
};
pub use scattering::{
    mutual_impedance, synthetic_scattering, thin_wire_scattering, thin_wire_z, SelfTerm,
    ThinWire,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{spectral_radius, CMat, CVec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Ue,
    Bs,
    Ris,
}

/// Uniform planar array. Element `(i_h, i_v)` sits at vector index
/// `i_h·n_v + i_v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub n_h: usize,
    pub n_v: usize,
    /// Inter-element spacing in meters.
    pub spacing: f64,
    pub role: Role,
}

impl ArrayGeometry {
    pub fn new(n_h: usize, n_v: usize, spacing: f64, role: Role) -> Result<Self> {
        if n_h == 0 || n_v == 0 {
            return Err(Error::Param(format!("array size {n_h}x{n_v} is empty")));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::Param(format!("array spacing {spacing} must be positive")));
        }
        Ok(Self {
            n_h,
            n_v,
            spacing,
            role,
        })
    }

    pub fn n(&self) -> usize {
        self.n_h * self.n_v
    }

    /// In-plane coordinates of element `idx` in meters.
    pub fn position(&self, idx: usize) -> (f64, f64) {
        let (ih, iv) = (idx / self.n_v, idx % self.n_v);
        (ih as f64 * self.spacing, iv as f64 * self.spacing)
    }

    /// Largest element-to-element distance (aperture diagonal).
    pub fn aperture(&self) -> f64 {
        let w = (self.n_h - 1) as f64 * self.spacing;
        let h = (self.n_v - 1) as f64 * self.spacing;
        w.hypot(h)
    }
}

/// Azimuth and elevation (inclination from +Z) in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Angle2D {
    pub azimuth: f64,
    pub elevation: f64,
}

impl Angle2D {
    pub fn new(azimuth: f64, elevation: f64) -> Self {
        Self { azimuth, elevation }
    }
}

/// Multipath description of one link. Index 0 is the LOS path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub departure: Vec<Angle2D>,
    pub arrival: Vec<Angle2D>,
    pub gains: Vec<crate::linalg::C64>,
}

impl PathSet {
    pub fn new(
        departure: Vec<Angle2D>,
        arrival: Vec<Angle2D>,
        gains: Vec<crate::linalg::C64>,
    ) -> Result<Self> {
        if gains.is_empty() || departure.len() != gains.len() || arrival.len() != gains.len() {
            return Err(Error::Param(format!(
                "path lists must be nonempty and equal length ({}, {}, {})",
                departure.len(),
                arrival.len(),
                gains.len()
            )));
        }
        Ok(Self {
            departure,
            arrival,
            gains,
        })
    }

    pub fn count(&self) -> usize {
        self.gains.len()
    }

    pub fn scaled(&self, c: crate::linalg::C64) -> Self {
        let mut out = self.clone();
        out.gains.iter_mut().for_each(|g| *g *= c);
        out
    }
}

/// UE→RIS and RIS→BS subchannels together with their path descriptions.
#[derive(Debug, Clone)]
pub struct ChannelPair {
    /// N_I × N_U
    pub h_iu: CMat,
    /// N_B × N_I
    pub h_bi: CMat,
    pub paths_u: PathSet,
    pub paths_b: PathSet,
}

impl ChannelPair {
    pub fn n_u(&self) -> usize {
        self.h_iu.ncols()
    }
    pub fn n_i(&self) -> usize {
        self.h_iu.nrows()
    }
    pub fn n_b(&self) -> usize {
        self.h_bi.nrows()
    }
}

/// Active RIS reflection vector and its power budget `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct RISConfig {
    pub gamma: CVec,
    pub power_budget: f64,
}

impl RISConfig {
    pub fn new(gamma: CVec, power_budget: f64) -> Result<Self> {
        if !(power_budget > 0.0) {
            return Err(Error::Param(format!("power budget {power_budget} must be positive")));
        }
        if let Some(i) = gamma.iter().position(|g| g.norm() == 0.0 || !g.is_finite()) {
            return Err(Error::Param(format!("RIS coefficient {i} is zero or not finite")));
        }
        Ok(Self {
            gamma,
            power_budget,
        })
    }

    pub fn n(&self) -> usize {
        self.gamma.len()
    }

    /// Average amplification `sqrt(A / N_I)`.
    pub fn amp_bar(&self) -> f64 {
        (self.power_budget / self.n() as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScatteringOrigin {
    ThinWire,
    SyntheticDecay,
    Zero,
    External,
}

/// Inter-element coupling matrix S.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringMatrix {
    pub s: CMat,
    pub origin: ScatteringOrigin,
}

impl ScatteringMatrix {
    pub fn zero(n: usize) -> Self {
        Self {
            s: CMat::zeros(n, n),
            origin: ScatteringOrigin::Zero,
        }
    }

    /// Wraps an externally supplied matrix; it must be square, finite and symmetric.
    pub fn external(s: CMat) -> Result<Self> {
        if !s.is_square() {
            return Err(Error::Dim(format!("S is {}x{}", s.nrows(), s.ncols())));
        }
        if s.iter().any(|z| !z.is_finite()) {
            return Err(Error::Param("S has non-finite entries".into()));
        }
        let scale = s.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
        if (&s - s.transpose()).iter().any(|z| z.norm() > 1e-9 * scale) {
            return Err(Error::Param("S must be symmetric".into()));
        }
        Ok(Self {
            s,
            origin: ScatteringOrigin::External,
        })
    }

    pub fn n(&self) -> usize {
        self.s.nrows()
    }

    pub fn is_zero(&self) -> bool {
        self.s.iter().all(|z| z.norm() == 0.0)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (&self.s - self.s.transpose()).iter().all(|z| z.norm() <= tol)
    }

    /// Spectral radius of `diag(gamma)·S`; below one the Neumann series converges.
    pub fn coupling_radius(&self, gamma: &CVec) -> f64 {
        let mut m = self.s.clone();
        for (i, g) in gamma.iter().enumerate() {
            for j in 0..m.ncols() {
                m[(i, j)] *= *g;
            }
        }
        spectral_radius(&m)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            s: &self.s * crate::linalg::c64(factor, 0.0),
            origin: if factor == 0.0 {
                ScatteringOrigin::Zero
            } else {
                self.origin
            },
        }
    }

    /// Loads a matrix from JSON `{"re": [[..]], "im": [[..]]}` (row-major).
    pub fn load_json(path: &std::path::Path) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            re: Vec<Vec<f64>>,
            im: Vec<Vec<f64>>,
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let raw: Raw = serde_json::from_str(&text)?;
        let n = raw.re.len();
        if raw.im.len() != n || raw.re.iter().chain(&raw.im).any(|r| r.len() != n) {
            return Err(Error::Dim("S file must hold two n x n arrays".into()));
        }
        let s = CMat::from_fn(n, n, |i, j| crate::linalg::c64(raw.re[i][j], raw.im[i][j]));
        Self::external(s)
    }
}
