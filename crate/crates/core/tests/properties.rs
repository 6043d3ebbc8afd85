use std::sync::Arc;

use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand_distr::{Distribution, StandardNormal};

use rlm_precond::datagen::{synth, Decay, SynthParams, Task};
use rlm_precond::rng;
use rlm_precond::solvers::{Formulation, Problem};
use rlm_precond::spectral::{covariance_spectrum, covariance_spectrum_with_factors, max_sq_norm};
use rlm_precond::{LossModel, Preconditioner};

fn gaussian(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng::stream(seed, 0);
    DMatrix::from_fn(rows, cols, |_, _| Distribution::<f64>::sample(&StandardNormal, &mut r))
}

fn max_entry_dev_from_identity(q: &DMatrix<f64>) -> f64 {
    let g = q.tr_mul(q);
    let k = g.nrows();
    (g - DMatrix::identity(k, k)).amax()
}

fn loss_strategy() -> impl Strategy<Value = (LossModel, f64)> {
    prop_oneof![
        (Just(LossModel::square()), -3.0..3.0f64),
        (Just(LossModel::logistic()), prop_oneof![Just(-1.0), Just(1.0)]),
        (Just(LossModel::poisson(2.0).unwrap()), 0.0..5.0f64),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gamma_strictly_decreasing_in_rho(
        d in 2usize..12,
        n_extra in 0usize..20,
        seed in 0u64..1000,
        log_rho in -6.0f64..2.0,
        factor in 1.01f64..100.0,
    ) {
        let x = gaussian(d, d + n_extra, seed);
        let spec = covariance_spectrum(&x).unwrap();
        let rho = 10f64.powf(log_rho);
        let lo = spec.numerical_rank(rho).unwrap();
        let hi = spec.numerical_rank(rho * factor).unwrap();
        prop_assert!(lo > hi);
        prop_assert!(lo <= spec.rank() as f64);
    }

    #[test]
    fn low_rank_gamma_below_rank(k in 1usize..5, d in 6usize..12, seed in 0u64..1000, log_rho in -8.0f64..1.0) {
        let x = gaussian(d, k, seed) * gaussian(k, 40, seed + 1);
        let spec = covariance_spectrum(&x).unwrap();
        prop_assert!(spec.numerical_rank(10f64.powf(log_rho)).unwrap() < k as f64);
    }

    #[test]
    fn spectrum_bases_orthonormal(d in 1usize..15, n in 1usize..30, seed in 0u64..1000) {
        let x = gaussian(d, n, seed);
        let spec = covariance_spectrum_with_factors(&x).unwrap();
        prop_assert!(max_entry_dev_from_identity(&spec.left_basis) <= 1e-10);
        prop_assert!(max_entry_dev_from_identity(spec.right_factors.as_ref().unwrap()) <= 1e-8);
        prop_assert!(spec.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(spec.eigenvalues.iter().all(|&s| s >= 0.0));
    }

    #[test]
    fn coherence_range_and_classical_bound(d in 2usize..8, n in 10usize..40, seed in 0u64..1000, log_rho in -4.0f64..1.0) {
        let x = gaussian(d, n, seed);
        let spec = covariance_spectrum_with_factors(&x).unwrap();
        let rho = 10f64.powf(log_rho);
        let mu = spec.coherence(rho).unwrap();
        let classical = rlm_precond::spectral::classical_incoherence(spec.right_factors.as_ref().unwrap());
        prop_assert!(mu >= 1.0 - 1e-9 && mu <= n as f64 + 1e-9);
        prop_assert!(mu <= classical * classical + 1e-9);
    }

    #[test]
    fn preconditioner_shifts_positive_and_bounded(
        d in 2usize..15,
        n in 2usize..40,
        seed in 0u64..1000,
        log_lambda in -5.0f64..0.0,
        beta in 0.05f64..1.0,
        m_frac in 0.05f64..1.0,
    ) {
        let x = gaussian(d, n, seed);
        let lambda = 10f64.powf(log_lambda);
        let m = ((n as f64 * m_frac).ceil() as usize).clamp(1, n);
        for p in [
            Preconditioner::build_full(&x, lambda, beta).unwrap(),
            Preconditioner::build_sampled(&x, lambda, beta, m, seed).unwrap(),
        ] {
            let cap = p.rho.sqrt().recip();
            for (&s, &sig) in p.shifts.iter().zip(&p.sigma_sq) {
                prop_assert!(s >= 0.0 && s < cap);
                prop_assert_eq!(s > 0.0, sig > 0.0);
            }
            prop_assert!(max_entry_dev_from_identity(&p.basis) <= 1e-10);
        }
    }

    #[test]
    fn preconditioned_norms_bounded_by_leverage(d in 2usize..10, n in 10usize..60, seed in 0u64..1000, log_rho in -4.0f64..0.0) {
        // max ‖H^{-1/2} x_i‖² = μγ
        let x = gaussian(d, n, seed);
        let rho = 10f64.powf(log_rho);
        let p = Preconditioner::build_full(&x, rho, 1.0).unwrap();
        let spec = covariance_spectrum_with_factors(&x).unwrap();
        let mu_gamma = spec.coherence(rho).unwrap() * spec.numerical_rank(rho).unwrap();
        let r2 = max_sq_norm(&p.precondition_dataset(&x).unwrap());
        assert_relative_eq!(r2, mu_gamma, max_relative = 1e-8);
    }

    #[test]
    fn psi_selects_phi_or_loss((model, y) in loss_strategy(), z in -4.0f64..4.0, beta in 0.0f64..0.2) {
        prop_assert_eq!(model.psi_value(beta, true, z, y), model.phi_value(beta, z, y));
        prop_assert_eq!(model.psi_grad(beta, true, z, y), model.phi_grad(beta, z, y));
        prop_assert_eq!(model.psi_value(beta, false, z, y), model.value(z, y));
        prop_assert_eq!(model.psi_grad(beta, false, z, y), model.grad(z, y));
        assert_relative_eq!(model.phi_value(beta, z, y) + 0.5 * beta * z * z, model.value(z, y), epsilon = 1e-12, max_relative = 1e-12);
        assert_relative_eq!(model.phi_grad(beta, z, y) + beta * z, model.grad(z, y), epsilon = 1e-12, max_relative = 1e-12);
    }

    #[test]
    fn curvature_floor_holds((model, y) in loss_strategy(), r in 0.1f64..5.0, t in -1.0f64..1.0) {
        let z = t * r;
        prop_assert!(model.curvature(z, y) >= model.beta_lower(r).unwrap() - 1e-12);
    }

    #[test]
    fn phi_chain_rule(d in 2usize..8, n in 5usize..30, seed in 0u64..1000, beta in 0.05f64..0.9) {
        // ∇_v Σφ(vᵀx̂_i) = H^{-1/2} ∇_w Σφ(wᵀx_i) at w = H^{-1/2} v.
        let x = gaussian(d, n, seed);
        let y: Vec<f64> = gaussian(1, n, seed + 7).iter().copied().collect();
        let lambda = 1e-2;
        let p = Arc::new(Preconditioner::build_full(&x, lambda, beta).unwrap());
        let loss = LossModel::square();
        let pre = Problem::from_preconditioner(&x, y.clone(), loss, &p, false).unwrap();
        let v = DVector::from_iterator(d, gaussian(d, 1, seed + 3).iter().copied());
        let w = p.map_back(&v).unwrap();
        let n_f = n as f64;
        let grad_w = (0..n).fold(DVector::zeros(d), |acc, i| {
            let xi = x.column(i);
            acc + xi * (loss.phi_grad(beta, xi.dot(&w), y[i]) / n_f)
        });
        // Regularizer gradient of the preconditioned problem is β v.
        let expected = p.apply(&grad_w).unwrap() + &v * beta;
        let got = DVector::from_vec(pre.full_gradient(v.as_slice()).unwrap());
        prop_assert!((got - &expected).amax() <= 1e-9 * expected.amax().max(1.0));
    }

    #[test]
    fn original_and_full_objectives_agree_at_mapped_points(seed in 0u64..200, beta in 0.1f64..1.0) {
        // F_precond(v) = F_original(H^{-1/2} v) for every v.
        let ds = synth(&SynthParams::new(40, 5, Decay::Poly(0.5), Task::Regression), seed).unwrap();
        let lambda = 1e-2;
        let p = Arc::new(Preconditioner::build_full(&ds.x, lambda, beta).unwrap());
        let loss = LossModel::square();
        let orig = Problem::new(ds.x.clone(), ds.y.clone(), loss, Formulation::Original { lambda }).unwrap();
        let pre = Problem::from_preconditioner(&ds.x, ds.y.clone(), loss, &p, false).unwrap();
        let v = DVector::from_iterator(5, gaussian(5, 1, seed).iter().copied());
        let w = p.map_back(&v).unwrap();
        let a = pre.objective(v.as_slice()).unwrap();
        let b = orig.objective(w.as_slice()).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-9, epsilon = 1e-9);
    }

    #[test]
    fn synth_is_seed_deterministic(n in 20usize..60, d in 1usize..10, seed in 0u64..10_000) {
        let params = SynthParams::new(n, d, Decay::Exp(0.5), Task::Regression);
        let a = synth(&params, seed).unwrap();
        let b = synth(&params, seed).unwrap();
        prop_assert_eq!(a.digest(), b.digest());
        prop_assert!(a.x == b.x && a.y == b.y);
    }

    #[test]
    fn synth_spectrum_matches_prescription(n in 30usize..80, d in 1usize..12, seed in 0u64..10_000, tau in 0.5f64..2.0) {
        let decay = Decay::Poly(tau);
        let ds = synth(&SynthParams::new(n, d, decay, Task::Regression), seed).unwrap();
        let spec = covariance_spectrum(&ds.x).unwrap();
        for (got, want) in spec.eigenvalues.iter().zip(decay.spectrum(d)) {
            assert_relative_eq!(*got, want, max_relative = 1e-10);
        }
    }
}
