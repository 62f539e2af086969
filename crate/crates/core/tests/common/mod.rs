#![allow(dead_code)]

use mcris::beamform::{grad_f, neumann_coefficients, objective_f, Surrogate};
use mcris::channel::ScatteringMatrix;
use mcris::dict::sensing_dense;
use mcris::estimate::omp;
use mcris::linalg::{c64, cis, lambda_max_hermitian, lstsq, CMat, CVec, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cnorm(r: &mut ChaCha8Rng) -> C64 {
    let a: f64 = StandardNormal.sample(r);
    let b: f64 = StandardNormal.sample(r);
    c64(a, b) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn cmat(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| cnorm(r))
}

pub fn cvec(r: &mut ChaCha8Rng, n: usize) -> CVec {
    CVec::from_fn(n, |_, _| cnorm(r))
}

pub fn max_abs(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn rel(a: &CMat, b: &CMat) -> f64 {
    let n = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let d = a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    if n > 0.0 {
        d / n
    } else {
        d
    }
}

pub fn vrel(a: &CVec, b: &CVec) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// Symmetric matrix with small random entries, scaled afterwards to a target
/// coupling radius with `gamma` when asked.
pub fn sym(r: &mut ChaCha8Rng, n: usize, scale: f64) -> CMat {
    let m = cmat(r, n, n) * c64(scale, 0.0);
    (&m + m.transpose()) * c64(0.5, 0.0)
}

/// `(q, B)` of the coupled objective for a random symmetric `S`.
pub fn instance(r: &mut ChaCha8Rng, n: usize, coupling: f64) -> (CVec, CMat) {
    let t = cvec(r, n * n);
    let s = ScatteringMatrix::external(sym(r, n, coupling)).unwrap();
    neumann_coefficients(&t, &s)
}

/// Random phases with `‖γ‖² = a`.
pub fn feasible_start(r: &mut ChaCha8Rng, n: usize, a: f64) -> CVec {
    CVec::from_fn(n, |_, _| cis(r.random_range(0.0..std::f64::consts::TAU)) * (a / n as f64).sqrt())
}

pub fn project(g: &mut CVec, a: f64) {
    let n2 = g.norm_squared();
    if n2 > a {
        *g *= c64((a / n2).sqrt(), 0.0);
    }
}

/// Accelerated projected gradient on `γ^H M γ − 2 Re(b^T γ)` over the ball.
pub fn pg_oracle(sur: &Surrogate, a: f64) -> CVec {
    let m = sur.m();
    let step = 1.0 / lambda_max_hermitian(&m).max(1e-300);
    let bc = sur.b.conjugate();
    let mut x = CVec::zeros(m.nrows());
    let mut y = x.clone();
    let mut t = 1.0f64;
    for _ in 0..200_000 {
        let mut nx = &y - (&m * &y - &bc) * c64(step, 0.0);
        project(&mut nx, a);
        let nt = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = &nx + (&nx - &x) * c64((t - 1.0) / nt, 0.0);
        x = nx;
        t = nt;
    }
    x
}

/// Projected gradient with backtracking on `f`, from one start.
pub fn pg_local(q: &CVec, b: &CMat, a: f64, start: &CVec) -> f64 {
    let mut g = start.clone();
    let mut fv = objective_f(&g, q, b);
    let mut mu = 1.0;
    for _ in 0..3000 {
        let d = grad_f(&g, q, b);
        let mut moved = false;
        for _ in 0..60 {
            let mut c = &g - &d * c64(mu, 0.0);
            project(&mut c, a);
            let fc = objective_f(&c, q, b);
            if fc < fv {
                let gain = fv - fc;
                g = c;
                fv = fc;
                moved = gain > 1e-15 * fv.abs();
                mu *= 2.0;
                break;
            }
            mu *= 0.5;
        }
        if !moved {
            break;
        }
    }
    fv
}

/// Best of `restarts` projected-gradient runs from random feasible starts.
pub fn multistart(r: &mut ChaCha8Rng, q: &CVec, b: &CMat, a: f64, restarts: usize) -> f64 {
    (0..restarts)
        .map(|_| pg_local(q, b, a, &feasible_start(r, q.len(), a)))
        .fold(f64::INFINITY, f64::min)
}

/// Least-squares residual of `y` on the listed columns of `a`.
pub fn ls_residual(a: &CMat, cols: &[usize], y: &CVec) -> f64 {
    let sub = a.select_columns(cols);
    let (x, _) = lstsq(&sub, y);
    (y - sub * x).norm()
}

/// How often OMP finds the exhaustive least-squares support on `trials`
/// noise-free 2-sparse problems over an 8x16 Gaussian dictionary.
pub fn omp_oracle_hits(seed: u64, trials: usize) -> usize {
    let mut r = rng(seed);
    let mut hits = 0;
    for _ in 0..trials {
        let a = cmat(&mut r, 8, 16);
        let i = r.random_range(0..16);
        let mut j = r.random_range(0..15);
        if j >= i {
            j += 1;
        }
        let y = a.column(i) * cnorm(&mut r) + a.column(j) * cnorm(&mut r);
        let prob = sensing_dense(&y, &a, &CMat::identity(16, 16)).unwrap();
        let mut got = omp(&prob, 2).unwrap().support;
        got.sort();
        let mut best = (f64::INFINITY, vec![]);
        for p in 0..16 {
            for q in (p + 1)..16 {
                let res = ls_residual(&a, &[p, q], &y);
                if res < best.0 {
                    best = (res, vec![p, q]);
                }
            }
        }
        hits += usize::from(got == best.1);
    }
    hits
}
