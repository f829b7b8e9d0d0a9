use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;

use ewens_clt::circle::{char_poly_direct, cis_turns};
use ewens_clt::equidist::{abel_sum, frac_parts, koksma_check, star_discrepancy, FracSequence};
use ewens_clt::ewens::{ewens_log_pmf, sample_cycle_counts, sample_feller_bits, cycle_counts_from_bits};
use ewens_clt::lab::{exact_char_fn, wasserstein_empirical};
use ewens_clt::mahler::covariance_parameters;
use ewens_clt::{CircleFunction, CycleCounts, EvaluationPoint, EwensParams, LogTable, QuadratureConfig, RngStream};

fn partition(n: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..=n, 1..=n).prop_map(move |raw| {
        let mut rest = n;
        let mut parts = Vec::new();
        for p in raw {
            if rest == 0 {
                break;
            }
            let p = p.min(rest);
            parts.push(p);
            rest -= p;
        }
        parts.extend(std::iter::repeat_n(1, rest));
        parts
    })
}

fn real_poly() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, 2..6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn feller_prefix_sums_to_n(seed: u64, n in 1usize..400, theta in 0.05f64..5.0) {
        let params = EwensParams::new(theta).unwrap();
        let seq = sample_feller_bits(3 * n, &params, &RngStream::new(seed, 0)).unwrap();
        for k in [1, n / 2 + 1, n, 2 * n, 3 * n] {
            let c = cycle_counts_from_bits(&seq, k).unwrap();
            let total: usize = c.nonzero().map(|(m, c)| m * c as usize).sum();
            prop_assert_eq!(total, k);
        }
    }

    #[test]
    fn pmf_from_permutation_or_counts(parts in (1usize..12).prop_flat_map(partition), theta in 0.1f64..4.0) {
        let n: usize = parts.iter().sum();
        let params = EwensParams::new(theta).unwrap();
        let direct = CycleCounts::from_cycle_lengths(n, &parts).unwrap();
        let via_perm = CycleCounts::from_permutation(&direct.canonical_permutation()).unwrap();
        prop_assert_eq!(&direct, &via_perm);
        prop_assert_eq!(ewens_log_pmf(&direct, &params), ewens_log_pmf(&via_perm, &params));
    }

    #[test]
    fn log_inverts_exp(coeffs in real_poly(), s in 0.0f64..1.0) {
        let f = CircleFunction::from_real("p", &coeffs, &[]).unwrap();
        let v = f.eval_f(s);
        prop_assume!(v.norm() > 1e-6);
        let l = f.log_f(s);
        prop_assert!(!l.infinite);
        prop_assert!((l.to_complex().exp() - v).norm() <= 1e-12 * v.norm().max(1.0));
        prop_assert!(l.im.abs() <= PI);
    }

    #[test]
    fn branch_bound_with_declared_zeros(p in 0i64..7, q in 1u64..7, s in 0.0f64..1.0) {
        // (1 - z) (1 - zeta^{-1} z) with zeta = e^{2 pi i p/q}
        let zeta = cis_turns(p as f64 / q as f64);
        let coeffs = vec![Complex64::new(1.0, 0.0), -(Complex64::new(1.0, 0.0) + zeta.conj()), zeta.conj()];
        let zeros = if (p as u64) % q == 0 {
            vec![ewens_clt::circle::DeclaredZero::new(0, 1, 2).unwrap()]
        } else {
            vec![ewens_clt::circle::DeclaredZero::new(0, 1, 1).unwrap(), ewens_clt::circle::DeclaredZero::new(p, q, 1).unwrap()]
        };
        let f = CircleFunction::new("pair", coeffs, zeros).unwrap();
        prop_assert!(f.validate_zeros().valid);
        let l = f.log_f(s);
        prop_assert!(l.infinite || l.im.abs() <= PI);
    }

    #[test]
    fn char_poly_matches_determinant(parts in (1usize..=8).prop_flat_map(partition), s in 0.0f64..1.0, r in 0.2f64..1.5) {
        let n: usize = parts.iter().sum();
        let counts = CycleCounts::from_cycle_lengths(n, &parts).unwrap();
        let x = cis_turns(s) * r;
        let c = char_poly_direct(&counts, x);
        let det = c.determinant.unwrap();
        prop_assert!((c.product - det).norm() <= 1e-12 * c.product.norm().max(1.0));
    }

    #[test]
    fn wn_is_sum_of_branch_logs(coeffs in real_poly(), seed: u64, n in 1usize..60) {
        let f = CircleFunction::from_real("p", &coeffs, &[]).unwrap();
        let x = EvaluationPoint::golden();
        let counts = sample_cycle_counts(n, &EwensParams::uniform(), &RngStream::new(seed, 1)).unwrap();
        let mut by_term = Complex64::new(0.0, 0.0);
        let mut product = Complex64::new(1.0, 0.0);
        let mut log_modulus = 0.0;
        for (m, c) in counts.nonzero() {
            let l = f.log_at_point(&x, m as u64);
            prop_assume!(!l.infinite && l.re > -20.0);
            by_term += l.to_complex() * c as f64;
            let v = f.eval_f(x.frac(m as u64));
            product *= v.powi(c as i32);
            log_modulus += c as f64 * v.norm().ln();
        }
        let w = f.wn(&x, &counts).unwrap();
        prop_assert!((w - by_term).norm() <= 1e-12 * by_term.norm().max(1.0));
        prop_assert!((w.re - log_modulus).abs() <= 1e-10 * log_modulus.abs().max(1.0));
        // the arguments agree modulo 2 pi
        let turns = (w.im - product.arg()) / (2.0 * PI);
        prop_assert!((turns - turns.round()).abs() <= 1e-9);
        let table = LogTable::new(&f, &x, n);
        prop_assert!((table.wn(&counts).unwrap() - w).norm() <= 1e-12 * w.norm().max(1.0));
    }

    #[test]
    fn json_round_trip_evaluates_identically(coeffs in real_poly(), s in 0.0f64..1.0) {
        let f = CircleFunction::from_real("p", &coeffs, &[]).unwrap();
        let back: CircleFunction = serde_json::from_str(&serde_json::to_string(&f).unwrap()).unwrap();
        prop_assert!((back.eval_f(s) - f.eval_f(s)).norm() <= 1e-15 * f.eval_f(s).norm().max(1.0));
    }

    #[test]
    fn point_round_trip(cf in prop::collection::vec(1u64..50, 60..70), p in -50i64..50, q in 1u64..60) {
        let irr = EvaluationPoint::from_continued_fraction(cf).unwrap();
        let back: EvaluationPoint = irr.to_string().parse().unwrap();
        prop_assert_eq!(back.value(), irr.value());
        let rat = EvaluationPoint::rational(p, q).unwrap();
        let back: EvaluationPoint = rat.to_string().parse().unwrap();
        prop_assert_eq!(back, rat);
    }

    #[test]
    fn discrepancy_sandwich(xs in prop::collection::vec(0.0f64..1.0, 1..200)) {
        let r = star_discrepancy(&FracSequence::from_values(xs).unwrap()).unwrap();
        prop_assert!(r.d_star > 0.0 && r.d_star <= 1.0);
        prop_assert!(r.d_star <= r.d_n + 1e-15 && r.d_n <= 2.0 * r.d_star + 1e-15);
    }

    #[test]
    fn koksma_never_fails(xs in prop::collection::vec(0.0f64..1.0, 1..300), c in 0.05f64..0.95) {
        let seq = FracSequence::from_values(xs).unwrap();
        prop_assert!(koksma_check(|x| x, 1.0, &seq, 0.5).unwrap().holds);
        let step = move |x: f64| if x < c { 1.0 } else { 0.0 };
        prop_assert!(koksma_check(step, 1.0, &seq, c).unwrap().holds);
        prop_assert!(koksma_check(|x| (2.0 * PI * x).cos(), 4.0, &seq, 0.0).unwrap().holds);
    }

    #[test]
    fn rational_discrepancy_stays_away_from_zero(p in 1i64..50, q in 2u64..50, n in 1usize..300) {
        let t = EvaluationPoint::rational(p, q).unwrap();
        let order = t.order().unwrap();
        prop_assume!(order > 1);
        let r = star_discrepancy(&frac_parts(&t, n).unwrap()).unwrap();
        prop_assert!(r.d_n >= 1.0 / (2.0 * order as f64) - 1e-15);
    }

    #[test]
    fn abel_matches_direct(pairs in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 0..100)) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let direct: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        let scale: f64 = 1.0 + a.iter().zip(&b).map(|(x, y)| (x * y).abs()).sum::<f64>() * a.len() as f64;
        prop_assert!((abel_sum(&a, &b).unwrap() - direct).abs() <= 1e-13 * scale);
    }

    #[test]
    fn wasserstein_metric(
        x in prop::collection::vec(-3.0f64..3.0, 1..40),
        y in prop::collection::vec(-3.0f64..3.0, 1..40),
        z in prop::collection::vec(-3.0f64..3.0, 1..40),
    ) {
        let d = |a: &[f64], b: &[f64]| wasserstein_empirical(a, b).unwrap();
        prop_assert!(d(&x, &y) >= 0.0);
        prop_assert!((d(&x, &y) - d(&y, &x)).abs() <= 1e-9);
        prop_assert!(d(&x, &z) <= d(&x, &y) + d(&y, &z) + 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn gram_inequality_and_scalar_identity(c0 in 1.6f64..3.0, c1 in -1.0f64..1.0, c2 in -0.5f64..0.5, theta in 0.2f64..3.0) {
        // |c0| > |c1| + |c2|: zero-free on the circle
        let f = CircleFunction::from_real("p", &[c0, c1, c2], &[]).unwrap();
        let lp = covariance_parameters(&f, theta, &EvaluationPoint::golden(), &QuadratureConfig::default()).unwrap();
        prop_assert!(lp.v_a * lp.v_b >= lp.e_ab * lp.e_ab - 1e-12);
        prop_assert!((lp.covariance_scalar - theta * lp.e_ab).abs() <= 1e-9);
    }

    #[test]
    fn char_fn_is_bounded(ta in -2.0f64..2.0, tb in -2.0f64..2.0, theta in 0.2f64..3.0) {
        let f = CircleFunction::one_minus_z();
        let g = exact_char_fn(&f, &EvaluationPoint::sqrt2(), theta, 500, &[[ta, tb], [0.0, 0.0]]).unwrap();
        let v = g.values_exact[0];
        prop_assert!(v[0].hypot(v[1]) <= 1.0 + 1e-15);
        prop_assert_eq!(g.values_exact[1], [1.0, 0.0]);
    }
}
