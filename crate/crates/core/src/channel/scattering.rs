use std::collections::HashMap;
use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ArrayGeometry, Role, ScatteringMatrix, ScatteringOrigin};
use crate::error::{Error, Result};
use crate::linalg::{c64, cis, identity, inv_checked, C64, CMat};

/// How the diagonal of the impedance matrix is filled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SelfTerm {
    /// Each unit cell is matched to the reference impedance,
    /// `Z_ii = Z₀`, so S carries inter-element coupling only.
    #[default]
    Matched,
    /// Induced-EMF self-impedance of the wire (distance = wire radius).
    InducedEmf,
}

/// Parallel thin-wire dipole model of the RIS unit cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThinWire {
    pub wavelength: f64,
    /// Wire length h in meters.
    pub wire_len: f64,
    /// Wire radius r in meters.
    pub wire_radius: f64,
    /// Reference impedance Z₀ in ohms.
    pub z0: f64,
    /// Free-space intrinsic impedance η₀ in ohms.
    pub eta0: f64,
    pub self_term: SelfTerm,
}

impl ThinWire {
    /// h = λ/32, r = λ/500, Z₀ = 50 Ω, η₀ = 377 Ω.
    pub fn standard(wavelength: f64) -> Self {
        Self {
            wavelength,
            wire_len: wavelength / 32.0,
            wire_radius: wavelength / 500.0,
            z0: 50.0,
            eta0: 377.0,
            self_term: SelfTerm::Matched,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("wavelength", self.wavelength),
            ("wire length", self.wire_len),
            ("wire radius", self.wire_radius),
            ("reference impedance", self.z0),
            ("intrinsic impedance", self.eta0),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Param(format!("{name} {v} must be positive")));
            }
        }
        Ok(())
    }
}

/// Induced-EMF impedance between two side-by-side parallel dipoles of
/// length `wire_len` whose axes are `distance` apart, with sinusoidal
/// current distributions referred to the current maximum.
pub fn mutual_impedance(distance: f64, p: &ThinWire) -> C64 {
    let k = 2.0 * PI / p.wavelength;
    let half = p.wire_len / 2.0;
    let d2 = distance * distance;
    let ckh = (k * half).cos();
    let green = |r: f64| cis(-k * r) / r;
    let integrand = move |z: f64| -> C64 {
        let r0 = (d2 + z * z).sqrt();
        let r1 = (d2 + (z - half) * (z - half)).sqrt();
        let r2 = (d2 + (z + half) * (z + half)).sqrt();
        (green(r1) + green(r2) - green(r0) * (2.0 * ckh)) * (k * (half - z.abs())).sin()
    };
    // the integrand is even in z; integrate over [0, h/2] and double
    let scale = 1.0 / distance.max(1e-300);
    let tol = 1e-13 * scale * half;
    let split = (half - 4.0 * distance).max(0.0);
    let mut acc = c64(0.0, 0.0);
    let mut pieces = vec![(0.0, half)];
    if split > 0.0 {
        pieces = vec![(0.0, split), (split, half)];
    }
    for (a, b) in pieces {
        let re = quadrature::double_exponential::integrate(|z| integrand(z).re, a, b, tol);
        let im = quadrature::double_exponential::integrate(|z| integrand(z).im, a, b, tol);
        acc += c64(re.integral, im.integral);
    }
    let pref = c64(0.0, p.eta0 / (4.0 * PI * (k * half).sin().powi(2)));
    pref * acc * 2.0
}

/// Impedance matrix of the RIS wires placed at the array element positions.
pub fn thin_wire_z(geom: &ArrayGeometry, p: &ThinWire) -> Result<CMat> {
    p.validate()?;
    if geom.role != Role::Ris {
        return Err(Error::Param("thin-wire coupling applies to the RIS array".into()));
    }
    let n = geom.n();
    let self_z = match p.self_term {
        SelfTerm::Matched => c64(p.z0, 0.0),
        SelfTerm::InducedEmf => mutual_impedance(p.wire_radius, p),
    };
    // distances repeat across the grid; key by the integer element offsets
    let mut cache: HashMap<(usize, usize), C64> = HashMap::new();
    let mut z = CMat::zeros(n, n);
    for i in 0..n {
        z[(i, i)] = self_z;
        for j in (i + 1)..n {
            let key = (
                (i / geom.n_v).abs_diff(j / geom.n_v),
                (i % geom.n_v).abs_diff(j % geom.n_v),
            );
            let zij = *cache.entry(key).or_insert_with(|| {
                let d = geom.spacing * (key.0 as f64).hypot(key.1 as f64);
                mutual_impedance(d, p)
            });
            z[(i, j)] = zij;
            z[(j, i)] = zij;
        }
    }
    Ok(z)
}

/// `S = (Z + Z₀I)^{-1}(Z − Z₀I)` from the thin-wire impedance matrix.
pub fn thin_wire_scattering(geom: &ArrayGeometry, p: &ThinWire) -> Result<ScatteringMatrix> {
    let z = thin_wire_z(geom, p)?;
    let n = z.nrows();
    let z0i = identity(n) * c64(p.z0, 0.0);
    let s = inv_checked(&(&z + &z0i))? * (&z - &z0i);
    let s = (&s + s.transpose()) * c64(0.5, 0.0);
    Ok(ScatteringMatrix {
        s,
        origin: ScatteringOrigin::ThinWire,
    })
}

/// Symmetric S with `|S_ij| = peak·e^{−decay·|i−j|}` and uniform random phases.
pub fn synthetic_scattering<R: Rng + ?Sized>(
    n: usize,
    peak: f64,
    decay: f64,
    rng: &mut R,
) -> Result<ScatteringMatrix> {
    if !(peak >= 0.0 && peak.is_finite()) {
        return Err(Error::Param(format!("peak {peak} must be non-negative")));
    }
    if !(decay > 0.0 && decay.is_finite()) {
        return Err(Error::Param(format!("decay {decay} must be positive")));
    }
    if peak == 0.0 {
        return Ok(ScatteringMatrix::zero(n));
    }
    let mut s = CMat::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let mag = peak * (-decay * (j - i) as f64).exp();
            let v = cis(rng.random_range(0.0..2.0 * PI)) * mag;
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    Ok(ScatteringMatrix {
        s,
        origin: ScatteringOrigin::SyntheticDecay,
    })
}
