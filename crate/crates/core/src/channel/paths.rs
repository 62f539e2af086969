use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use rand::Rng;

use super::{arv_matrix, Angle2D, ArrayGeometry, PathSet};
use crate::error::{Error, Result};
use crate::linalg::{c64, cn, CMat};

/// Which hop a path set describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    UeRis,
    RisBs,
}

/// LOS amplitude `(λ / (4π d))^{exponent/2}`.
pub fn path_loss_los(wavelength: f64, distance: f64, exponent: f64) -> f64 {
    (wavelength / (4.0 * PI * distance)).powf(exponent / 2.0)
}

fn front_angle<R: Rng + ?Sized>(rng: &mut R) -> Angle2D {
    Angle2D::new(
        rng.random_range(-FRAC_PI_2..FRAC_PI_2),
        rng.random_range(FRAC_PI_4..3.0 * FRAC_PI_4),
    )
}

/// Draws `n_paths` off-grid paths. The LOS gain is the real path-loss
/// amplitude α₁; NLOS gains are `CN(0, α₁²)`.
pub fn draw_paths<R: Rng + ?Sized>(
    _link: Link,
    distance: f64,
    exponent: f64,
    n_paths: usize,
    wavelength: f64,
    rng: &mut R,
) -> Result<PathSet> {
    if !(distance > 0.0 && distance.is_finite()) {
        return Err(Error::Param(format!("distance {distance} must be positive")));
    }
    if !(exponent > 0.0 && exponent.is_finite()) {
        return Err(Error::Param(format!("path loss exponent {exponent} must be positive")));
    }
    if !(wavelength > 0.0) {
        return Err(Error::Param(format!("wavelength {wavelength} must be positive")));
    }
    if n_paths == 0 {
        return Err(Error::Param("at least one path is required".into()));
    }
    let alpha1 = path_loss_los(wavelength, distance, exponent);
    let mut departure = Vec::with_capacity(n_paths);
    let mut arrival = Vec::with_capacity(n_paths);
    let mut gains = Vec::with_capacity(n_paths);
    for l in 0..n_paths {
        departure.push(front_angle(rng));
        arrival.push(front_angle(rng));
        gains.push(if l == 0 {
            c64(alpha1, 0.0)
        } else {
            cn(rng, alpha1 * alpha1)
        });
    }
    PathSet::new(departure, arrival, gains)
}

/// Beamspace form `A_rx(arrival) Σ A_tx^T(departure)` with
/// `Σ = √(N_rx N_tx / L) diag(gains)`.
pub fn assemble_channel(
    paths: &PathSet,
    tx: &ArrayGeometry,
    rx: &ArrayGeometry,
    wavelength: f64,
) -> CMat {
    let a_rx = arv_matrix(rx, &paths.arrival, wavelength);
    let a_tx = arv_matrix(tx, &paths.departure, wavelength);
    let scale = ((rx.n() * tx.n()) as f64 / paths.count() as f64).sqrt();
    let sigma = CMat::from_diagonal(&crate::linalg::CVec::from_iterator(
        paths.count(),
        paths.gains.iter().map(|g| g * c64(scale, 0.0)),
    ));
    a_rx * sigma * a_tx.transpose()
}
