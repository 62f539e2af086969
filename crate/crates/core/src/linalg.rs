//! Dense complex linear-algebra helpers shared by every module.
//!
//! Vectorization is column-major throughout, matching nalgebra storage, so
//! `vec(A X B) = (B^T ⊗ A) vec(X)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Reciprocal condition numbers below this are treated as singular.
pub const RCOND_MIN: f64 = 1e-12;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

/// e^{j·theta}
#[inline]
pub fn cis(theta: f64) -> C64 {
    Complex::from_polar(1.0, theta)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Column-wise Khatri-Rao product: column k is `a_k ⊗ b_k`.
pub fn khatri_rao(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.ncols(), b.ncols(), "khatri_rao column counts differ");
    let (ra, rb) = (a.nrows(), b.nrows());
    let mut out = CMat::zeros(ra * rb, a.ncols());
    for k in 0..a.ncols() {
        for i in 0..ra {
            let s = a[(i, k)];
            for j in 0..rb {
                out[(i * rb + j, k)] = s * b[(j, k)];
            }
        }
    }
    out
}

/// Row-wise Khatri-Rao (face-splitting) product: column `g1·G_b + g2` is
/// the elementwise product of `a[:, g1]` and `b[:, g2]`.
pub fn face_split(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.nrows(), b.nrows(), "face_split row counts differ");
    let n = a.nrows();
    let gb = b.ncols();
    let mut out = CMat::zeros(n, a.ncols() * gb);
    for g1 in 0..a.ncols() {
        for g2 in 0..gb {
            let col = g1 * gb + g2;
            for r in 0..n {
                out[(r, col)] = a[(r, g1)] * b[(r, g2)];
            }
        }
    }
    out
}

pub fn vec_of(m: &CMat) -> CVec {
    CVec::from_column_slice(m.as_slice())
}

pub fn unvec(v: &CVec, rows: usize, cols: usize) -> CMat {
    assert_eq!(v.len(), rows * cols, "unvec length mismatch");
    CMat::from_column_slice(rows, cols, v.as_slice())
}

pub fn diag(v: &CVec) -> CMat {
    CMat::from_diagonal(v)
}

/// Maximum absolute column sum.
pub fn norm1(m: &CMat) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverse with a 1-norm reciprocal condition check.
pub fn inv_checked(m: &CMat) -> Result<CMat> {
    if !m.is_square() {
        return Err(Error::Dim(format!(
            "inverse of a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    let inv = m.clone().lu().try_inverse().ok_or(Error::Singular { rcond: 0.0 })?;
    let rc = 1.0 / (norm1(m) * norm1(&inv));
    if !rc.is_finite() || rc < RCOND_MIN {
        return Err(Error::Singular {
            rcond: if rc.is_finite() { rc } else { 0.0 },
        });
    }
    Ok(inv)
}

/// LU factors with a reciprocal condition estimate, for repeated solves
/// where the explicit inverse is not needed.
pub struct CheckedLu {
    l: CMat,
    u: CMat,
    p: nalgebra::PermutationSequence<nalgebra::Dyn>,
    /// Estimated 1-norm reciprocal condition number.
    pub rcond: f64,
}

impl CheckedLu {
    /// Solves `A X = B`.
    pub fn solve(&self, b: &CMat) -> CMat {
        let mut x = b.clone();
        self.p.permute_rows(&mut x);
        let x = self.l.solve_lower_triangular(&x).expect("unit lower factor");
        self.u.solve_upper_triangular(&x).expect("pivots checked at construction")
    }

    /// Solves `A^T X = B`.
    pub fn solve_transposed(&self, b: &CMat) -> CMat {
        let w = self.u.tr_solve_upper_triangular(b).expect("pivots checked at construction");
        let mut x = self.l.tr_solve_lower_triangular(&w).expect("unit lower factor");
        self.p.inv_permute_rows(&mut x);
        x
    }

    /// Hager's estimate of `‖A^{-1}‖₁` (Higham's complex variant).
    fn inv_norm1_estimate(&self) -> f64 {
        let n = self.l.nrows();
        let mut x = CMat::from_element(n, 1, c64(1.0 / n as f64, 0.0));
        let mut est = 0.0;
        for k in 0..5 {
            let y = self.solve(&x);
            let e: f64 = y.iter().map(|z| z.norm()).sum();
            if k > 0 && e <= est {
                break;
            }
            est = e;
            let xi = y.map(|z| if z.norm() > 0.0 { z / z.norm() } else { c64(1.0, 0.0) });
            // A^H z = ξ  ⇔  A^T conj(z) = conj(ξ)
            let z = self.solve_transposed(&xi.conjugate()).conjugate();
            let (j, zj) = z
                .iter()
                .enumerate()
                .map(|(i, v)| (i, v.norm()))
                .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
            if k > 0 && zj <= z.dotc(&x).re {
                break;
            }
            x = CMat::zeros(n, 1);
            x[(j, 0)] = c64(1.0, 0.0);
        }
        est
    }
}

/// LU factorization that fails when the estimated reciprocal condition
/// number is below [`RCOND_MIN`].
pub fn lu_checked(m: &CMat) -> Result<CheckedLu> {
    if !m.is_square() {
        return Err(Error::Dim(format!("LU of a {}x{} matrix", m.nrows(), m.ncols())));
    }
    let lu = m.clone().lu();
    let (p, l, u) = lu.unpack();
    if u.diagonal().iter().any(|d| *d == c64(0.0, 0.0)) {
        return Err(Error::Singular { rcond: 0.0 });
    }
    let mut f = CheckedLu { l, u, p, rcond: 0.0 };
    let rc = 1.0 / (norm1(m) * f.inv_norm1_estimate());
    if !rc.is_finite() || rc < RCOND_MIN {
        return Err(Error::Singular {
            rcond: if rc.is_finite() { rc } else { 0.0 },
        });
    }
    f.rcond = rc;
    Ok(f)
}

/// Largest eigenvalue magnitude of a general square matrix.
pub fn spectral_radius(m: &CMat) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.clone()
        .schur()
        .eigenvalues()
        .map(|ev| ev.iter().map(|z| z.norm()).fold(0.0, f64::max))
        .unwrap_or(f64::NAN)
}

/// Eigen-decomposition of a Hermitian matrix (eigenvalues unsorted).
pub fn hermitian_eig(m: &CMat) -> (DVector<f64>, CMat) {
    let h = (m + m.adjoint()) * c64(0.5, 0.0);
    let se = h.symmetric_eigen();
    (se.eigenvalues, se.eigenvectors)
}

pub fn lambda_max_hermitian(m: &CMat) -> f64 {
    hermitian_eig(m).0.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

pub fn lambda_min_hermitian(m: &CMat) -> f64 {
    hermitian_eig(m).0.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Least squares `argmin ‖a x − b‖` via SVD. The flag is set when `a` is
/// numerically rank deficient and the pseudo-inverse solution was used.
pub fn lstsq(a: &CMat, b: &CVec) -> (CVec, bool) {
    let n = a.ncols();
    if n == 0 {
        return (CVec::zeros(0), false);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = smax * (a.nrows().max(n) as f64) * f64::EPSILON;
    let rank = svd.rank(eps);
    let x = svd
        .solve(b, eps)
        .unwrap_or_else(|_| CVec::zeros(n));
    (x, rank < n)
}

pub fn frob2(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

pub fn norm2(v: &CVec) -> f64 {
    v.norm()
}

/// Relative Frobenius error ‖a − b‖ / ‖b‖ (absolute when b = 0).
pub fn rel_err(a: &CMat, b: &CMat) -> f64 {
    let d = frob2(&(a - b)).sqrt();
    let nb = frob2(b).sqrt();
    if nb > 0.0 {
        d / nb
    } else {
        d
    }
}

/// Circularly-symmetric complex Gaussian draw with the given variance.
pub fn cn<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c64(s * re, s * im)
}

pub fn cn_vec<R: Rng + ?Sized>(rng: &mut R, n: usize, var: f64) -> CVec {
    CVec::from_iterator(n, (0..n).map(|_| cn(rng, var)))
}

pub fn cn_mat<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, var: f64) -> CMat {
    CMat::from_iterator(rows, cols, (0..rows * cols).map(|_| cn(rng, var)))
}

/// Constant-modulus vector with uniform random phases.
pub fn random_phases<R: Rng + ?Sized>(rng: &mut R, n: usize, amp: f64) -> CVec {
    CVec::from_iterator(
        n,
        (0..n).map(|_| amp * cis(rng.random_range(0.0..std::f64::consts::TAU))),
    )
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// dBm to watts.
pub fn dbm_to_w(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Watts to dBm.
pub fn w_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

pub fn db(x: f64) -> f64 {
    10.0 * x.log10()
}
