use midpred::gain_margin::design_chain;
use midpred::mid::GainVector;
use midpred::tradeoff::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn gain(l: &[f64]) -> GainVector {
    GainVector::new(l.to_vec()).unwrap()
}

/// Gain whose `A − LC` has the given real eigenvalues.
fn gain_from_roots(roots: &[f64]) -> GainVector {
    let mut c = vec![1.0];
    for r in roots {
        let mut next = vec![0.0; c.len() + 1];
        for (i, v) in c.iter().enumerate() {
            next[i] += v;
            next[i + 1] -= r * v;
        }
        c = next;
    }
    GainVector::new(c[1..].to_vec()).unwrap()
}

fn random_gain(rng: &mut ChaCha8Rng, n: usize) -> GainVector {
    let roots: Vec<f64> = (0..n).map(|_| -rng.gen_range(0.2..4.0)).collect();
    gain_from_roots(&roots)
}

#[test]
fn lyapunov_examples() {
    let p = lyapunov_solve(&gain(&[2.0])).unwrap();
    assert!((p[(0, 0)] - 0.25).abs() < 1e-15);

    let g = gain(&[2.0, 1.0]);
    let p = lyapunov_solve(&g).unwrap();
    assert!(lyapunov_residual(&g, &p) <= 1e-12);
    assert!(p.clone().symmetric_eigenvalues().min() > 0.0);
    assert_eq!(p, p.transpose());

    assert!(lyapunov_solve(&gain(&[-1.0, 1.0])).is_err());
}

#[test]
fn lyapunov_residual_random() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..30 {
        let n = rng.gen_range(1..=5);
        let g = random_gain(&mut rng, n);
        let p = lyapunov_solve(&g).unwrap();
        assert!(lyapunov_residual(&g, &p) <= 1e-10);
        assert!(p.symmetric_eigenvalues().min() > 0.0);
    }
}

#[test]
fn norm_identities() {
    let n = matrix_norms(&gain(&[2.0, 1.0])).unwrap();
    assert!((n.l - 5f64.sqrt()).abs() < 1e-15);
    assert!((n.lc - n.l).abs() < 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let k = rng.gen_range(2..=4);
        let g = random_gain(&mut rng, k);
        let m = matrix_norms(&g).unwrap();
        assert!(m.a_lc >= m.l.max(1.0) * (1.0 - 1e-12));
        assert!((m.lc - m.l).abs() <= 1e-12 * m.l);
    }
}

#[test]
fn ahmed_worked_example() {
    let g = gain(&[2.0, 1.0]);
    assert!(!ahmed_conditions(&g, 2.0, 0.25, 1.1).unwrap().satisfied);
    // Delay-free nonlinearity, tiny delay: the rate inequality needs λ/2 > ‖A − LC‖² ≈ 5.83.
    let low = ahmed_conditions(&g, 2.5, 1e-4, 0.0).unwrap();
    assert!(!low.satisfied);
    assert!(low.residuals[0].value < 0.0 && low.residuals[1].value > 0.0);
    assert!(ahmed_conditions(&g, 15.0, 1e-4, 0.0).unwrap().satisfied);
}

#[test]
fn ahmed_screen() {
    let bound = 1.0 / (4.0 * 2f64.sqrt() * 2.0);
    assert!((bound - 0.0884).abs() < 1e-4);
    for k in 0..=50 {
        let lambda = 10f64.powf(-2.0 + 5.0 * k as f64 / 50.0);
        assert!(!ahmed_necessary(2, 0.25, lambda).unwrap());
    }
    assert!(ahmed_necessary(2, 0.05, 1.0).unwrap());
    assert!(ahmed_necessary(1, 0.05, 1.0).is_err());
}

#[test]
fn ahmed_sufficient_implies_necessary() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut satisfied = 0;
    for _ in 0..50 {
        let n = rng.gen_range(2..=3);
        let roots: Vec<f64> = (0..n).map(|_| -rng.gen_range(0.3..1.5)).collect();
        let g = gain_from_roots(&roots);
        let h = 10f64.powf(rng.gen_range(-7.0..-2.0));
        let lambda = 10f64.powf(rng.gen_range(0.5..2.5));
        let gp = if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(0.0..0.05) };
        if ahmed_conditions(&g, lambda, h, gp).unwrap().satisfied {
            satisfied += 1;
            assert!(ahmed_necessary(n, h, lambda).unwrap());
        }
    }
    assert!(satisfied >= 10, "{satisfied}");
}

#[test]
fn lei_checks() {
    let g = gain(&[2.0, 1.0]);
    let v = lei_conditions(&g, 2.0, 0.25).unwrap();
    assert!(!v.satisfied);
    let sigma = v.derived_value("sigma").unwrap();
    assert!(sigma >= 8.0);
    assert!(sigma * 0.25 * 2.0 >= 4.0);
    assert!(!lei_necessary(2, 0.25, 2.0).unwrap());

    let v = lei_conditions(&g, 1.0, 1e-3).unwrap();
    assert_eq!(v.satisfied, v.derived_value("sigma").unwrap() * 1e-3 <= 1.0);

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..20 {
        let n = rng.gen_range(2..=4);
        let g = random_gain(&mut rng, n);
        let v = lei_conditions(&g, 1.0, 1.0).unwrap();
        assert!(v.derived_value("sigma").unwrap() >= 8.0 * (1.0 - 1e-12));
    }
}

#[test]
fn contrast_over_delays() {
    let g = gain(&[2.0, 1.0]);
    for k in 0..40 {
        let h = 10f64.powf(-3.0 + 4.0 * k as f64 / 40.0);
        let d = design_chain(2, 0.0, h, 0.0673).unwrap();
        assert!(ours_conditions(0.0, h, d.lambda, d.n_sub, None).unwrap().satisfied);
        if h > 0.1768 / 2.0 {
            assert!(!ahmed_necessary(2, h, d.lambda).unwrap());
            assert!(!ahmed_necessary(2, h, 1.0).unwrap());
        }
        for lambda in [0.5 / h, 1.0 / h, 2.0 / h] {
            if lambda * h > 0.125 {
                assert!(!lei_necessary(2, h, lambda).unwrap());
                assert!(!lei_conditions(&g, lambda, h).unwrap().satisfied);
            }
        }
    }
    assert!(!ours_conditions(0.0, 0.25, 2.0, 1, None).unwrap().satisfied);
    assert!(ours_conditions(1.1, 0.25, 20.0, 5, Some(0.0673)).unwrap().satisfied);
    assert!(!ours_conditions(1.1, 0.25, 4.0, 1, Some(0.0673)).unwrap().satisfied);
    assert!(ours_conditions(1.1, 0.25, 4.0, 1, None).is_err());
}
