mod common;

use common::{cmat, max_abs, rng, sym, vrel};
use mcris::channel::{ris_response, Angle2D, ChannelPair, PathSet, ScatteringMatrix};
use mcris::linalg::{c64, diag, identity, kron, khatri_rao, vec_of, CMat};
use mcris::training::*;

fn pair(h_iu: CMat, h_bi: CMat) -> ChannelPair {
    let p = PathSet::new(vec![Angle2D::new(0.0, 1.0)], vec![Angle2D::new(0.0, 1.0)], vec![c64(1.0, 0.0)]).unwrap();
    ChannelPair {
        h_iu,
        h_bi,
        paths_u: p.clone(),
        paths_b: p,
    }
}

#[test]
fn plan_shapes_and_moduli() {
    let (n_u, n_b, n_i) = (2, 8, 128);
    let (m_b, m_i) = (3 * n_b / 4, 3 * n_i / 4);
    assert_eq!((m_b, m_i), (6, 96));
    let p_u = 0.0158;
    let plan = make_plan(p_u, n_u, n_b, n_i, m_b, m_i, 49.0 * 128.0, &mut rng(1)).unwrap();
    assert_eq!(plan.f_beams.shape(), (n_u, m_b));
    assert_eq!(plan.w_beams.shape(), (n_b, m_b));
    assert_eq!(plan.ris_configs.len(), m_i);
    assert!(plan.f_beams.iter().all(|z| (z.norm_sqr() - p_u / n_u as f64).abs() < 1e-15));
    assert!(plan.w_beams.iter().all(|z| (z.norm_sqr() - 1.0 / n_b as f64).abs() < 1e-15));
    assert!(plan.pilots.iter().all(|x| (x.norm() - 1.0).abs() < 1e-15));
    for c in &plan.ris_configs {
        assert!(c.gamma.iter().all(|g| (g.norm() - 7.0).abs() < 1e-12));
    }

    let again = make_plan(p_u, n_u, n_b, n_i, m_b, m_i, 49.0 * 128.0, &mut rng(1)).unwrap();
    assert_eq!(plan.f_beams, again.f_beams);
    assert_eq!(plan.w_beams, again.w_beams);
    assert_eq!(plan.ris_configs, again.ris_configs);

    let mut r = rng(2);
    assert!(make_plan(p_u, n_u, n_b, n_i, 0, 4, 1.0, &mut r).is_err());
    assert!(make_plan(p_u, n_u, n_b, n_i, 4, 0, 1.0, &mut r).is_err());
    assert!(make_plan(-1.0, n_u, n_b, n_i, 4, 4, 1.0, &mut r).is_err());
}

#[test]
fn measurement_rows() {
    let plan = make_plan(1.0, 1, 1, 2, 3, 1, 2.0, &mut rng(3)).unwrap();
    let p = measurement_matrix(&plan);
    for m in 0..3 {
        let want = plan.f_beams[(0, m)] * plan.w_beams[(0, m)].conj();
        assert!((p[(m, 0)] - want).norm() < 1e-15);
    }

    let p_u = 0.3;
    let plan = make_plan(p_u, 2, 4, 3, 5, 2, 3.0, &mut rng(4)).unwrap();
    let p = measurement_matrix(&plan);
    assert_eq!(p.shape(), (5, 8));
    let mut r = rng(5);
    let h = cmat(&mut r, 4, 2);
    let ph = &p * vec_of(&h);
    for m in 0..5 {
        assert!((p.row(m).norm_squared() - p_u).abs() < 1e-14);
        let direct = (plan.w_beams.column(m).adjoint() * &h * plan.f_beams.column(m))[(0, 0)];
        assert!((ph[m] - direct).norm() < 1e-12 * direct.norm().max(1.0));
    }
}

#[test]
fn noise_free_signal_is_the_vectorized_model() {
    let mut r = rng(6);
    let (n_u, n_b, n_i) = (2, 3, 4);
    let ch = pair(cmat(&mut r, n_i, n_u), cmat(&mut r, n_b, n_i));
    let s = ScatteringMatrix::external(sym(&mut r, n_i, 0.05)).unwrap();
    let plan = make_plan(1.0, n_u, n_b, n_i, 3, 5, 4.0, &mut r).unwrap();
    let rx = receive(&plan, &ch, &s, &NoiseConfig::silent(), &mut r).unwrap();
    assert_eq!(rx.y, rx.y_noise_free);

    // columns: P vec(H_BI Γ̄ H_IU)
    for (mi, c) in plan.ris_configs.iter().enumerate() {
        let h = &ch.h_bi * ris_response(c, &s).unwrap() * &ch.h_iu;
        let col = &rx.p_matrix * vec_of(&h);
        assert!(vrel(&rx.y_noise_free.column(mi).into_owned(), &col) < 1e-12);
    }

    // all of Y at once: vec(Y) = (Θ_mc^T ⊗ P) vec(H_IU^T ⊗ H_BI)
    let theta = theta_mc(&plan, &s).unwrap();
    let psi = kron(&theta.transpose(), &rx.p_matrix);
    let g_mc = kron(&ch.h_iu.transpose(), &ch.h_bi);
    let lhs = vec_of(&rx.y_noise_free);
    assert!(vrel(&lhs, &(psi * vec_of(&g_mc))) < 1e-10);

    // conventional stacking with S = 0
    let z = ScatteringMatrix::zero(n_i);
    let rx0 = receive(&plan, &ch, &z, &NoiseConfig::silent(), &mut r).unwrap();
    let psi_cv = kron(&theta_cv(&plan).transpose(), &rx0.p_matrix);
    let g_cv = khatri_rao(&ch.h_iu.transpose(), &ch.h_bi);
    assert!(vrel(&vec_of(&rx0.y_noise_free), &(psi_cv * vec_of(&g_cv))) < 1e-10);

    // the signal is linear in f, so doubling P_U scales it by √2
    let mut plan2 = plan.clone();
    plan2.f_beams *= c64(2f64.sqrt(), 0.0);
    let rx2 = receive(&plan2, &ch, &s, &NoiseConfig::silent(), &mut r).unwrap();
    assert!(max_abs(&rx2.y_noise_free, &(&rx.y_noise_free * c64(2f64.sqrt(), 0.0))) < 1e-12);
}

#[test]
fn noise_covariance_matches_the_active_ris_model() {
    let mut r = rng(7);
    let (n_u, n_b, n_i) = (1, 2, 4);
    let ch = pair(cmat(&mut r, n_i, n_u), cmat(&mut r, n_b, n_i));
    let plan = make_plan(1.0, n_u, n_b, n_i, 1, 1, 16.0, &mut r).unwrap();
    let s = ScatteringMatrix::zero(n_i);
    let noise = NoiseConfig {
        sigma2_ris: 0.3,
        sigma2_bs: 0.7,
        sigma2_ue: 0.0,
    };
    let responses = ris_responses(&plan, &s).unwrap();
    let w = plan.w_beams.column(0).into_owned();
    let whg = w.adjoint() * &ch.h_bi * diag(&plan.ris_configs[0].gamma);
    let want = noise.sigma2_ris * whg.norm_squared() + noise.sigma2_bs * w.norm_squared();

    let draws = 100_000;
    let mut acc = 0.0;
    let mut mean = c64(0.0, 0.0);
    for _ in 0..draws {
        let rx = receive_with(&plan, &ch, &responses, &noise, &mut r).unwrap();
        let e = rx.y[(0, 0)] - rx.y_noise_free[(0, 0)];
        acc += e.norm_sqr();
        mean += e;
    }
    let var = acc / draws as f64;
    assert!((var / want - 1.0).abs() < 0.05, "{var} vs {want}");
    assert!((mean / draws as f64).norm() < 0.05 * want.sqrt());
}

#[test]
fn theta_columns() {
    let mut r = rng(8);
    let n_i = 3;
    let plan = make_plan(1.0, 1, 1, n_i, 1, 4, 3.0, &mut r).unwrap();
    let z = ScatteringMatrix::zero(n_i);
    let t0 = theta_mc(&plan, &z).unwrap();
    assert_eq!(t0.shape(), (n_i * n_i, 4));
    for (m, c) in plan.ris_configs.iter().enumerate() {
        assert_eq!(t0.column(m).into_owned(), vec_of(&diag(&c.gamma)));
    }
    assert_eq!(theta_cv(&plan).column(2).into_owned(), plan.ris_configs[2].gamma);

    let one = make_plan(1.0, 1, 1, n_i, 1, 1, 3.0, &mut r).unwrap();
    assert_eq!(theta_cv(&one).ncols(), 1);

    let s = ScatteringMatrix::external(sym(&mut r, n_i, 0.2)).unwrap();
    let t = theta_mc(&plan, &s).unwrap();
    for (m, c) in plan.ris_configs.iter().enumerate() {
        let resp = mcris::linalg::unvec(&t.column(m).into_owned(), n_i, n_i);
        let mut a = -s.s.clone();
        for i in 0..n_i {
            a[(i, i)] += c.gamma[i].inv();
        }
        assert!(max_abs(&(resp * a), &identity(n_i)) < 1e-10);
    }
}

#[test]
fn mismatched_channel_is_rejected() {
    let mut r = rng(9);
    let plan = make_plan(1.0, 2, 2, 4, 2, 2, 4.0, &mut r).unwrap();
    let ch = pair(cmat(&mut r, 5, 2), cmat(&mut r, 2, 5));
    let s = ScatteringMatrix::zero(4);
    assert!(receive(&plan, &ch, &s, &NoiseConfig::default(), &mut r).is_err());
}
