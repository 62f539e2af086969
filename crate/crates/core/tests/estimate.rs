mod common;

use common::{cmat, cnorm, cvec, rng};
use mcris::channel::{thin_wire_scattering, ArrayGeometry, Role, ScatteringMatrix, ThinWire};
use mcris::dict::*;
use mcris::estimate::*;
use mcris::linalg::{c64, kron, vec_of, CMat, CVec};
use mcris::training::{make_plan, measurement_matrix, theta_cv, theta_mc};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const LAMBDA: f64 = 0.01;

fn geom(n_h: usize, n_v: usize, d: f64, role: Role) -> ArrayGeometry {
    ArrayGeometry::new(n_h, n_v, d * LAMBDA, role).unwrap()
}

#[test]
fn omp_trivial_cases() {
    let mut r = rng(1);
    let a = cmat(&mut r, 12, 16);
    let y = a.column(5) * c64(3.0, 0.0);
    let prob = sensing_dense(&y, &a, &CMat::identity(16, 16)).unwrap();
    let out = omp(&prob, 1).unwrap();
    assert_eq!(out.support, vec![5]);
    assert!((out.coeffs[0] - c64(3.0, 0.0)).norm() < 1e-12);
    assert!(out.residual_norms[0] < 1e-12);

    let zero = prob.with_observation(CVec::zeros(12)).unwrap();
    let out = omp(&zero, 3).unwrap();
    assert_eq!(out.support.len(), 3);
    assert!(out.coeffs.iter().all(|c| c.norm() < 1e-14));
    assert!(out.residual_norms.iter().all(|&n| n == 0.0));

    // equal correlations resolve to the lower index
    let twin = CMat::from_columns(&[a.column(2), a.column(2), a.column(3)]);
    let p = sensing_dense(&twin.column(0).into_owned(), &twin, &CMat::identity(3, 3)).unwrap();
    assert_eq!(omp(&p, 1).unwrap().support, vec![0]);

    assert!(omp(&prob, 0).is_err());
    assert!(omp(&prob, 13).is_err());
}

#[test]
fn omp_matches_exhaustive_two_sparse_oracle() {
    let hits = common::omp_oracle_hits(2, 100);
    assert!(hits >= 90, "{hits}/100");
}

#[test]
fn omp_residuals_and_refit() {
    let mut r = rng(3);
    for _ in 0..20 {
        let a = cmat(&mut r, 10, 20);
        let y = cvec(&mut r, 10);
        let prob = sensing_dense(&y, &a, &CMat::identity(20, 20)).unwrap();
        let out = omp(&prob, 5).unwrap();
        assert_eq!(out.support.len(), 5);
        for w in out.residual_norms.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
        let sub = a.select_columns(&out.support);
        let res = &y - &sub * &out.coeffs;
        assert!((sub.adjoint() * &res).norm() < 1e-8 * y.norm());
        assert!((res.norm() - out.residual_norms[4]).abs() < 1e-12);
    }
}

#[test]
fn dr_spec_bounds() {
    let d = DRSpec::new(0.1, 465).unwrap();
    assert_eq!(d.g_dr, 47);
    assert_eq!(DRSpec::new(1.0, 465).unwrap().g_dr, 465);
    assert_eq!(DRSpec::new(1e-6, 10).unwrap().g_dr, 1);
    assert!(DRSpec::new(0.0, 10).is_err());
    assert!(DRSpec::new(1.5, 10).is_err());
    assert!(DRSpec::new(0.5, 0).is_err());
}

#[test]
fn reduction_ranking() {
    let mut r = rng(4);
    let n_i = 4;
    let pool = cmat(&mut r, n_i * n_i, 10);
    let top = pool.rows(0, n_i).into_owned();
    let coarse = top.columns(6, 1).into_owned() * c64(2.0, 0.0);
    let (_, idx) = dictionary_reduce(&coarse, &pool, 10, 3).unwrap();
    // self-correlation relative to the candidates' norms
    let normed = CMat::from_fn(n_i, 10, |i, j| top[(i, j)] / top.column(j).norm());
    let (_, idx_n) = dictionary_reduce(&normed.columns(6, 1).into_owned(), &normed, 10, 1).unwrap();
    assert_eq!(idx_n, vec![6]);
    assert_eq!(idx.len(), 3);

    let (all, idx) = dictionary_reduce(&coarse, &pool, 10, 10).unwrap();
    let mut sorted = idx.clone();
    sorted.sort();
    assert_eq!(sorted, (0..10).collect::<Vec<_>>());
    assert_eq!(all.nrows(), n_i * n_i);
    assert!(dictionary_reduce(&coarse, &pool, 10, 11).is_err());
    assert!(dictionary_reduce(&coarse, &pool, 11, 3).is_err());

    // ULA toy: scores from an explicit correlation table
    let spec = GridSpec::matched(geom(4, 1, 0.25, Role::Ris));
    let a_i = grid_arv_matrix(&spec, LAMBDA);
    let pool = kron(&a_i, &a_i);
    let coarse = a_i.select_columns(&[1, 3]);
    let sub = 9;
    let mut score: Vec<(f64, usize)> = (0..sub)
        .map(|k| {
            let mut s = 0.0;
            for l in 0..coarse.ncols() {
                let mut c = c64(0.0, 0.0);
                for i in 0..4 {
                    c += pool[(i, k)].conj() * coarse[(i, l)];
                }
                s += c.norm_sqr();
            }
            (s.sqrt(), k)
        })
        .collect();
    score.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    // compare the ranking up to ties in score
    let (_, idx) = dictionary_reduce(&coarse, &pool, sub, sub).unwrap();
    for (k, &j) in idx.iter().enumerate() {
        assert!((score[k].0 - score.iter().find(|s| s.1 == j).unwrap().0).abs() < 1e-12);
    }
    let kr = dictionary_reduce_kron(&coarse, &a_i, sub, 5).unwrap();
    let (_, dense_idx) = dictionary_reduce(&coarse, &pool, sub, 5).unwrap();
    let g = a_i.ncols();
    assert_eq!(kr, dense_idx.iter().map(|&k| (k / g, k % g)).collect::<Vec<_>>());
}

#[test]
fn omp_is_invariant_to_reduced_column_order() {
    let mut r = rng(5);
    let a = cmat(&mut r, 12, 9);
    let y = a.column(2) * c64(1.0, 1.0) + a.column(7) * c64(-2.0, 0.5);
    let perm = [8, 3, 0, 7, 5, 2, 1, 6, 4];
    let b = a.select_columns(&perm);
    let eye = CMat::identity(9, 9);
    let pa = omp(&sensing_dense(&y, &a, &eye).unwrap(), 2).unwrap();
    let pb = omp(&sensing_dense(&y, &b, &eye).unwrap(), 2).unwrap();
    let mut sa = pa.support.clone();
    let mut sb: Vec<usize> = pb.support.iter().map(|&k| perm[k]).collect();
    sa.sort();
    sb.sort();
    assert_eq!(sa, sb);
    assert!((pa.residual_norms[1] - pb.residual_norms[1]).abs() < 1e-12);
}

#[test]
fn nmse_examples() {
    let mut r = rng(6);
    let p = cmat(&mut r, 3, 4);
    let theta = cmat(&mut r, 5, 6);
    let g = cmat(&mut r, 4, 5);
    let y = &p * &g * &theta;
    assert!(reconstruction_nmse(&g, &p, &theta, &y).unwrap() <= -200.0);
    assert!(reconstruction_nmse(&CMat::zeros(4, 5), &p, &theta, &y).unwrap().abs() < 1e-12);
    let half = reconstruction_nmse(&(&g * c64(0.5, 0.0)), &p, &theta, &y).unwrap();
    assert!((half - 10.0 * 0.25f64.log10()).abs() < 1e-9);
    assert!((half + 6.0206).abs() < 1e-4);
    assert!(reconstruction_nmse(&g, &p, &theta, &CMat::zeros(3, 6)).is_err());
    assert!(reconstruction_nmse(&g, &p, &cmat(&mut r, 4, 6), &y).is_err());
}

/// Training data for an on-grid link over a 4×2 RIS.
struct OnGrid {
    dicts: Dictionaries,
    meas_cv: Measurement,
    meas_mc: Measurement,
    y: CVec,
    y0: CMat,
}

fn on_grid(r: &mut ChaCha8Rng, s: &ScatteringMatrix, spacing: f64, snr_db: Option<f64>) -> OnGrid {
    let su = GridSpec::matched(geom(2, 1, 0.5, Role::Ue));
    let sb = GridSpec::matched(geom(2, 2, 0.5, Role::Bs));
    let si = GridSpec::matched(geom(4, 2, spacing, Role::Ris));
    let dicts = build_dictionaries(&su, &sb, &si, LAMBDA).unwrap();
    let a_u = grid_arv_matrix(&su, LAMBDA);
    let a_b = grid_arv_matrix(&sb, LAMBDA);
    let a_i = &dicts.a_i;
    let mut h_iu = CMat::zeros(8, 2);
    let mut h_bi = CMat::zeros(4, 8);
    for _ in 0..2 {
        h_iu += a_i.column(r.random_range(0..8)) * a_u.column(r.random_range(0..2)).transpose() * cnorm(r);
        h_bi += a_b.column(r.random_range(0..4)) * a_i.column(r.random_range(0..8)).transpose() * cnorm(r);
    }
    let plan = make_plan(1.0, 2, 4, 8, 6, 16, 4.0 * 8.0, r).unwrap();
    let p = measurement_matrix(&plan);
    let t_cv = theta_cv(&plan);
    let t_mc = theta_mc(&plan, s).unwrap();
    let g_mc = kron(&h_iu.transpose(), &h_bi);
    let y0 = &p * g_mc * &t_mc;
    let mut y = vec_of(&y0);
    if let Some(snr) = snr_db {
        let var = y.norm_squared() / y.len() as f64 / 10f64.powf(snr / 10.0);
        y += mcris::linalg::cn_vec(r, y.len(), var);
    }
    OnGrid {
        dicts,
        meas_cv: Measurement { theta: t_cv, p: p.clone() },
        meas_mc: Measurement { theta: t_mc, p },
        y,
        y0,
    }
}

#[test]
fn coupling_free_on_grid_stage_one_is_exact() {
    let mut r = rng(7);
    for _ in 0..10 {
        let z = ScatteringMatrix::zero(8);
        let inst = on_grid(&mut r, &z, 0.5, None);
        let est = conventional_estimate(&inst.y, &inst.meas_cv, &inst.dicts, 5).unwrap();
        let nmse = reconstruction_nmse(&est.g_hat, &inst.meas_cv.p, &inst.meas_cv.theta, &inst.y0).unwrap();
        assert!(nmse < -40.0, "{nmse}");
        assert_eq!(est.model, EstModel::Conventional);
        assert_eq!(est.support.len(), 5);
    }
}

#[test]
fn two_stage_reduction_fidelity() {
    let s = thin_wire_scattering(&geom(4, 2, 0.05, Role::Ris), &ThinWire::standard(LAMBDA)).unwrap();
    let mut r = rng(8);
    let mut lin = [0.0; 2];
    let trials = 50;
    for _ in 0..trials {
        let inst = on_grid(&mut r, &s, 0.05, Some(20.0));
        let prob_cv = sensing(&inst.y, &inst.meas_cv, &inst.dicts.cv).unwrap();
        let g_ii = inst.dicts.g_ii_distinct();
        for (k, rho) in [0.1, 1.0].into_iter().enumerate() {
            let dr = DRSpec::new(rho, g_ii).unwrap();
            let mut r1 = rng(99);
            let mut r2 = rng(99);
            let two = two_stage_estimate(&prob_cv, &inst.meas_mc, &inst.dicts, 5, dr, ErrorInjection::default(), &mut r1).unwrap();
            let zero = ErrorInjection { sigma2_e: 0.0 };
            let again = two_stage_estimate(&prob_cv, &inst.meas_mc, &inst.dicts, 5, dr, zero, &mut r2).unwrap();
            assert_eq!(two.refined.support, again.refined.support);
            assert_eq!(two.refined.g_hat, again.refined.g_hat);
            assert_eq!(two.kept.len(), dr.g_dr);
            assert_eq!(two.refined.model, EstModel::ExactDR);
            assert_eq!(two.refined.g_hat.shape(), (8, 64));
            let e = reconstruction_nmse(&two.refined.g_hat, &inst.meas_mc.p, &inst.meas_mc.theta, &inst.y0).unwrap();
            lin[k] += 10f64.powf(e / 10.0);
        }
    }
    let db = lin.map(|v| 10.0 * (v / trials as f64).log10());
    assert!(db[1] <= db[0] + 1.0, "{db:?}");
}

#[test]
fn injected_error_perturbs_only_the_second_stage() {
    let s = thin_wire_scattering(&geom(4, 2, 0.05, Role::Ris), &ThinWire::standard(LAMBDA)).unwrap();
    let mut r = rng(9);
    let inst = on_grid(&mut r, &s, 0.05, None);
    let prob_cv = sensing(&inst.y, &inst.meas_cv, &inst.dicts.cv).unwrap();
    let dr = DRSpec::new(1.0, inst.dicts.g_ii_distinct()).unwrap();
    let scale = inst.y.norm_squared() / inst.y.len() as f64;
    let clean = two_stage_estimate(&prob_cv, &inst.meas_mc, &inst.dicts, 5, dr, ErrorInjection::default(), &mut r).unwrap();
    let noisy = two_stage_estimate(&prob_cv, &inst.meas_mc, &inst.dicts, 5, dr, ErrorInjection { sigma2_e: 10.0 * scale }, &mut r).unwrap();
    assert_eq!(clean.coarse.support, noisy.coarse.support);
    assert_eq!(clean.kept, noisy.kept);
    let e = |g: &CMat| reconstruction_nmse(g, &inst.meas_mc.p, &inst.meas_mc.theta, &inst.y0).unwrap();
    assert!(e(&noisy.refined.g_hat) > e(&clean.refined.g_hat));
}
