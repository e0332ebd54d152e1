use proptest::prelude::*;

use fracosc::approx::{frf_approx, frf_exact, impulse_approx};
use fracosc::equiv::{omega_d_eq, zeta_eq};
use fracosc::model::{validate_params, OscillatorParams, TimeGrid};
use fracosc::response::{convolve, Excitation, Kernel};
use fracosc::specfun::{accumulate_signed, log_binomial, LogMagnitude};
use fracosc::{charroot, fdm, linspace_grid};

fn calibrated() -> impl Strategy<Value = OscillatorParams> {
    (1.0..10.0f64, 0.001..0.15f64, 0.0..=1.0f64).prop_map(|(omega_n, zeta, beta)| OscillatorParams {
        omega_n,
        zeta,
        beta,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn validation_is_idempotent(p in calibrated()) {
        let once = validate_params(p).unwrap();
        prop_assert_eq!(validate_params(once).unwrap(), once);
    }

    #[test]
    fn grid_times_are_exact_products(t0 in -5.0..5.0f64, dt in 1e-4..1.0f64, n in 2usize..5000) {
        let g = TimeGrid::new(t0, dt, n).unwrap();
        for i in [0, n / 3, n - 1] {
            prop_assert_eq!(g.time(i), t0 + i as f64 * dt);
        }
    }

    #[test]
    fn log_magnitudes_compose(a in -50.0..50.0f64, b in -50.0..50.0f64) {
        let x = LogMagnitude::from_f64(a);
        let y = LogMagnitude::from_f64(b);
        let z = x * y;
        prop_assert_eq!(z.sign(), x.sign() * y.sign());
        if !z.is_zero() {
            prop_assert!((z.log_abs() - (x.log_abs() + y.log_abs())).abs() < 1e-12);
            prop_assert!((z.value() - a * b).abs() <= 1e-12 * (a * b).abs());
        }
    }

    #[test]
    fn log_binomial_is_symmetric(n in 0u64..400, k in 0u64..400) {
        prop_assume!(k <= n);
        prop_assert_eq!(log_binomial(n, k).unwrap(), log_binomial(n, n - k).unwrap());
    }

    #[test]
    fn signed_accumulation_matches_plain_sums(v in prop::collection::vec(-1e3..1e3f64, 1..40)) {
        let s = accumulate_signed(v.iter().map(|&x| LogMagnitude::from_f64(x)));
        let plain: f64 = v.iter().sum();
        let scale: f64 = v.iter().map(|x| x.abs()).sum();
        prop_assert!((s.value - plain).abs() <= 1e-12 * scale);
    }

    #[test]
    fn closed_forms_are_exact_at_the_limits(omega_n in 0.5..20.0f64, zeta in 0.0..0.99f64) {
        let p0 = OscillatorParams { omega_n, zeta, beta: 0.0 };
        let p1 = OscillatorParams { beta: 1.0, ..p0 };
        prop_assert!((omega_d_eq(&p0).unwrap() - omega_n * (1.0 + 2.0 * zeta).sqrt()).abs() <= 1e-14 * omega_n);
        prop_assert!((omega_d_eq(&p1).unwrap() - omega_n * (1.0 - zeta * zeta).sqrt()).abs() <= 1e-14 * omega_n);
        prop_assert_eq!(zeta_eq(&p0), 0.0);
        prop_assert_eq!(zeta_eq(&p1), zeta);
    }

    #[test]
    fn root_frequency_scales_with_omega_n(p in calibrated()) {
        let base = charroot::omega_d(&p).unwrap();
        for c in [2.0, 10.0] {
            let scaled = charroot::omega_d(&p.with_omega_n(c * p.omega_n)).unwrap();
            prop_assert!((scaled - c * base).abs() <= 1e-10 * c * base);
        }
    }

    #[test]
    fn conjugate_root_is_a_root(p in calibrated()) {
        let r = charroot::solve_char_root(&p).unwrap();
        prop_assert!(r.im > 0.0);
        prop_assert!(r.residual <= 1e-10 * p.omega_n * p.omega_n);
        let conj = charroot::char_residual(&p, r.as_complex().conj()).unwrap();
        prop_assert!(conj.norm() < 1e-9 * p.omega_n * p.omega_n);
    }

    #[test]
    fn approx_impulse_stays_inside_its_envelope(p in calibrated(), t in 0.0..50.0f64) {
        let wd = omega_d_eq(&p).unwrap();
        let env = (-zeta_eq(&p) * p.omega_n * t).exp() / wd;
        prop_assert!(impulse_approx(&p, t).unwrap().abs() <= env * (1.0 + 1e-15));
    }

    #[test]
    fn frf_forms_coincide_for_viscous_damping(omega_n in 0.5..20.0f64, zeta in 0.001..0.99f64, g in 0.0..5.0f64) {
        let p = OscillatorParams { omega_n, zeta, beta: 1.0 };
        let d = frf_exact(&p, g).unwrap() - frf_approx(&p, g).unwrap();
        prop_assert!(d.norm() <= 1e-10 * frf_exact(&p, g).unwrap().norm());
    }

    #[test]
    fn gl_weights_are_nonpositive_after_the_first(beta in 0.0..=1.0f64) {
        let w = fdm::gl_weights(beta, 200).unwrap();
        prop_assert_eq!(w.as_slice()[0], 1.0);
        prop_assert!((w.as_slice()[1] + beta).abs() <= f64::EPSILON);
        prop_assert!(w.as_slice()[1..].iter().all(|&v| v <= 0.0));
    }

    #[test]
    fn convolution_is_linear(p in calibrated(), a in -5.0..5.0f64, b in -5.0..5.0f64, w in 0.1..8.0f64) {
        let g = linspace_grid(10.0, 401).unwrap();
        let k = Kernel::Approx(p);
        let x1 = convolve(&Excitation::cosine(1.0, w).unwrap(), &k, &g).unwrap();
        let x2 = convolve(&Excitation::constant(1.0).unwrap(), &k, &g).unwrap();
        let xa = convolve(&Excitation::cosine(a, w).unwrap(), &k, &g).unwrap();
        let xb = convolve(&Excitation::constant(b).unwrap(), &k, &g).unwrap();
        let scale = x1.max_abs().max(x2.max_abs()) * (a.abs() + b.abs()) + 1e-300;
        for i in 0..g.len() {
            let lhs = xa.values()[i] + xb.values()[i];
            let rhs = a * x1.values()[i] + b * x2.values()[i];
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn fdm_is_causal(p in calibrated(), cut in 100usize..400) {
        let g = TimeGrid::new(0.0, 0.01 / p.omega_n, 500).unwrap();
        let t_cut = g.time(cut);
        let a = fdm::fdm_solve(&p, |t| t.cos(), &g).unwrap();
        let b = fdm::fdm_solve(&p, |t| if t > t_cut { -3.0 } else { t.cos() }, &g).unwrap();
        prop_assert_eq!(&a.values()[..=cut + 1], &b.values()[..=cut + 1]);
    }
}
