use std::f64::consts::PI;

use super::{Angle2D, ArrayGeometry};
use crate::linalg::{cis, CMat, CVec};

/// Unit-norm UPA response `(1/√N)(e^{−j2πφ^h n(N^h)} ⊗ e^{−j2πφ^v n(N^v)})`.
pub fn upa_arv(geom: &ArrayGeometry, angle: Angle2D, wavelength: f64) -> CVec {
    let ratio = geom.spacing / wavelength;
    let phi_h = ratio * angle.azimuth.sin() * angle.elevation.sin();
    let phi_v = ratio * angle.elevation.cos();
    spatial_arv(geom.n_h, geom.n_v, phi_h, phi_v)
}

/// Response for spatial frequencies already normalized by the wavelength.
pub fn spatial_arv(n_h: usize, n_v: usize, phi_h: f64, phi_v: f64) -> CVec {
    let scale = 1.0 / ((n_h * n_v) as f64).sqrt();
    CVec::from_iterator(
        n_h * n_v,
        (0..n_h).flat_map(move |ih| {
            (0..n_v).map(move |iv| {
                cis(-2.0 * PI * (phi_h * ih as f64 + phi_v * iv as f64)) * scale
            })
        }),
    )
}

/// Stacks responses for several angles as columns.
pub fn arv_matrix(geom: &ArrayGeometry, angles: &[Angle2D], wavelength: f64) -> CMat {
    let mut m = CMat::zeros(geom.n(), angles.len());
    for (k, a) in angles.iter().enumerate() {
        m.set_column(k, &upa_arv(geom, *a, wavelength));
    }
    m
}
