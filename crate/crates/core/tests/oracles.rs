use std::f64::consts::PI;

use ewens_clt::equidist::{frac_parts, star_discrepancy};
use ewens_clt::lab::{exact_char_fn, moment_report, run_experiment, sample_draws, ExperimentConfig, Mode};
use ewens_clt::mahler::{covariance_parameters, m_rational, MahlerValue};
use ewens_clt::{CircleFunction, EvaluationPoint, QuadratureConfig};

#[test]
fn feller_and_surrogate_moments_agree() {
    let base = ExperimentConfig::new(CircleFunction::one_minus_z(), EvaluationPoint::golden(), 1.0, vec![10_000], 10_000, 21);
    let limit = base.limit_parameters().unwrap();
    let feller = moment_report(10_000, &sample_draws(&base, &limit, 10_000).unwrap(), limit.sigma);
    let surrogate_config = base.clone().with_mode(Mode::PoissonSurrogate);
    let surrogate = moment_report(10_000, &sample_draws(&surrogate_config, &limit, 10_000).unwrap(), limit.sigma);
    let pairs = [(0, 0, 0), (0, 1, 1), (1, 1, 2)];
    for (i, j, k) in pairs {
        let diff = (feller.cov[i][j] - surrogate.cov[i][j]).abs();
        let err = feller.cov_std_error[k].hypot(surrogate.cov_std_error[k]);
        assert!(diff <= 3.0 * err, "cov[{i}][{j}]: {} vs {} (err {err})", feller.cov[i][j], surrogate.cov[i][j]);
    }
    assert_eq!(feller.rejected + surrogate.rejected, 0);
}

#[test]
fn rational_discrepancy_closed_form() {
    // n = q: the points are {0, 1/q, ..., (q-1)/q}, so D* = 1/q
    for (p, q) in [(1i64, 7u64), (3, 10), (5, 12), (-2, 9)] {
        let t = EvaluationPoint::rational(p, q).unwrap();
        for k in 1..4 {
            let r = star_discrepancy(&frac_parts(&t, k * q as usize).unwrap()).unwrap();
            assert!((r.d_star - 1.0 / q as f64).abs() < 1e-15, "{p}/{q}: {}", r.d_star);
        }
    }
}

#[test]
fn char_fn_gap_decreases_for_two_minus_z() {
    let f = CircleFunction::from_real("2-z", &[2.0, -1.0], &[]).unwrap();
    let x = EvaluationPoint::golden();
    let grid = [[1.0, 0.0], [0.0, 1.5], [-1.0, 1.0], [2.0, 0.0]];
    let gaps: Vec<Vec<f64>> = [1000, 10_000, 100_000, 1_000_000]
        .iter()
        .map(|&n| exact_char_fn(&f, &x, 1.0, n, &grid).unwrap().gaps)
        .collect();
    for w in gaps.windows(2) {
        for (a, b) in w[0].iter().zip(&w[1]) {
            assert!(b <= a, "{gaps:?}");
        }
    }
}

#[test]
fn moments_are_nonnegative_definite() {
    let config = ExperimentConfig::new(CircleFunction::one_minus_z(), EvaluationPoint::sqrt2(), 2.0, vec![100, 1000], 500, 5)
        .with_mode(Mode::PoissonSurrogate);
    let report = run_experiment(&config).unwrap();
    for m in &report.moments {
        assert_eq!(m.cov[0][1], m.cov[1][0]);
        assert!(m.cov[0][0] >= 0.0 && m.cov[0][0] * m.cov[1][1] >= m.cov[0][1] * m.cov[0][1]);
    }
    let lp = report.limit;
    assert!(lp.v_a * lp.v_b >= lp.e_ab * lp.e_ab);
    assert!((lp.sigma[0][0] - 2.0 * PI * PI / 12.0).abs() < 1e-8);
}

#[test]
fn rational_parameters_converge_to_integrals() {
    let f = CircleFunction::from_real("2-z+0.5z^2", &[2.0, -1.0, 0.5], &[]).unwrap();
    let cfg = QuadratureConfig::default();
    let exact = covariance_parameters(&f, 1.0, &EvaluationPoint::golden(), &cfg).unwrap();
    let mut last = f64::INFINITY;
    for q in [1000u64, 10_000, 100_000] {
        let x = EvaluationPoint::rational(1, q).unwrap();
        let lp = covariance_parameters(&f, 1.0, &x, &cfg).unwrap();
        let err = (lp.v_a - exact.v_a).abs() + (lp.v_b - exact.v_b).abs() + (lp.e_ab - exact.e_ab).abs();
        assert!(err <= last + 1e-14);
        last = err;
        match m_rational(&f, 1, q).unwrap() {
            MahlerValue::Finite(m) => assert!((m - exact.m_f).norm() < 1e-6),
            MahlerValue::Infinite { .. } => panic!("zero-free"),
        }
    }
    assert!(last < 1e-8);
}
