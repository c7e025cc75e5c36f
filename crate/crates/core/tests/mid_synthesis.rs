use midpred::mid::*;
use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_complex::Complex64;

fn fact(m: usize) -> f64 {
    (1..=m).map(|v| v as f64).product()
}

/// Dense LU solve of `M(s) c = -R(s, 1) e^s` for the ascending coefficients of `Q`.
fn matrix_oracle(n: usize, s: f64) -> Vec<f64> {
    let m = DMatrix::from_fn(n, n, |r, c| {
        let (i, j) = (r + 1, c + 1);
        if j >= i { fact(j - 1) / fact(j - i) * s.powi((j - i) as i32) } else { 0.0 }
    });
    let rhs = DVector::from_fn(n, |r, _| -rk_poly(n, r, 1.0).unwrap().eval(s) * s.exp());
    let c = m.lu().solve(&rhs).unwrap();
    (1..=n).map(|k| c[n - k]).collect()
}

#[test]
fn gain_star_matches_matrix_oracle() {
    for n in 1..=12 {
        let g = gain_star(n).unwrap();
        let oracle = matrix_oracle(n, g.sigma_star.unwrap());
        for (a, b) in g.l.iter().zip(&oracle) {
            assert!(((a - b) / b).abs() < 1e-9, "n={n}: {a} vs {b}");
        }
        let back = gain_from_derivative_conditions(n, g.sigma_star.unwrap(), 1.0).unwrap();
        for (a, b) in back.iter().zip(&oracle) {
            assert!(((a - b) / b).abs() < 1e-9, "n={n}: {a} vs {b}");
        }
    }
}

#[test]
fn gain_star_high_order_reference() {
    // Reference values from an independent 80-digit evaluation.
    let cases = [
        (3, -0.41577455678347908, 0.50454180219635282, 0.012087865728511799),
        (9, -0.15232222773180825, 0.5780662474757061, 2.8353367505529662e-9),
        (23, -0.061532037757520338, 0.60525090564322561, 3.7113974310586026e-30),
        (46, -0.031093531078462257, 0.61458275908403732, 6.1467365055766951e-72),
    ];
    for (n, sigma, l1, ln) in cases {
        let g = gain_star(n).unwrap();
        assert!((g.sigma_star.unwrap() - sigma).abs() < 1e-14 * sigma.abs(), "n={n}");
        assert!((g.l[0] / l1 - 1.0).abs() < 1e-13, "n={n}: {}", g.l[0]);
        assert!((g.l[n - 1] / ln - 1.0).abs() < 1e-13, "n={n}: {}", g.l[n - 1]);
    }
}

#[test]
fn rn_equals_q_of_delta_s_exactly() {
    for n in 1..=20 {
        let q = q_poly_exact(n).unwrap();
        let terms = rk_terms(n, n).unwrap();
        assert_eq!(terms.len(), n + 1);
        for (ps, pd, coef) in terms {
            // q(δ s) contributes C(n,j) n!/j! δ^j s^j.
            assert_eq!(ps, pd);
            assert_eq!(coef, q[ps]);
        }
        assert!(q.iter().all(|c| *c > BigInt::from(0)));
    }
}

#[test]
fn q_has_distinct_negative_roots() {
    for n in 1..=20 {
        let p = q_poly(n).unwrap();
        assert_eq!(sturm_root_certificate(&p).unwrap(), (n, true), "n={n}");
    }
}

#[test]
fn rightmost_root_of_cubic_matches_bisection() {
    let p = q_poly(3).unwrap();
    let (mut lo, mut hi) = (-1.0f64, 0.0f64);
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if p.eval(m) > 0.0 { hi = m } else { lo = m }
    }
    assert!((rightmost_root(&p).unwrap() - lo).abs() < 1e-12);
    assert_eq!(rightmost_root(&q_poly(1).unwrap()).unwrap(), -1.0);
}

fn qp(l: &[f64], delta: f64, s: Complex64) -> Complex64 {
    let n = l.len();
    let poly = l.iter().fold(Complex64::new(0.0, 0.0), |acc, c| acc * s + c);
    s.powu(n as u32) + poly * (-delta * s).exp()
}

/// Adaptive Simpson on a complex integrand.
fn simpson<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64, tol: f64) -> Complex64 {
    fn rec<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64, fa: Complex64, fm: Complex64, fb: Complex64, whole: Complex64, tol: f64, depth: u32) -> Complex64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (fa + 4.0 * flm + fm) * ((m - a) / 6.0);
        let right = (fm + 4.0 * frm + fb) * ((b - m) / 6.0);
        let delta = left + right - whole;
        if depth == 0 || delta.norm() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (fa + 4.0 * fm + fb) * ((b - a) / 6.0);
    rec(f, a, b, fa, fm, fb, whole, tol, 40)
}

#[test]
fn integral_factorization_n2() {
    use rand::{Rng, SeedableRng};
    let g = gain_star(2).unwrap();
    let sigma = g.sigma_star.unwrap();
    let q = q_poly(2).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let r = rng.gen_range(0.0..5.0);
        let th = rng.gen_range(0.0..std::f64::consts::TAU);
        let s = Complex64::from_polar(r, th);
        let z = s - sigma;
        let integral = simpson(&|t: f64| q.eval(t * sigma) * (-z * t).exp(), 0.0, 1.0, 1e-13);
        let rhs = z.powu(3) * integral / 2.0;
        let lhs = qp(&g.l, 1.0, s);
        assert!((lhs - rhs).norm() <= 1e-7 * lhs.norm().max(1e-300), "s={s}: {lhs} vs {rhs}");
    }
}

#[test]
fn scaled_gain_keeps_full_multiplicity() {
    for n in 1..=3 {
        let g = gain_star(n).unwrap();
        for delta in [0.25, 1.0, 2.0] {
            let s = scale_gain(&g, delta).unwrap();
            assert_eq!(multiplicity_at(&s, delta, g.sigma_star.unwrap() / delta), n + 1, "n={n} δ={delta}");
            assert!((s.assigned_root().unwrap() - g.sigma_star.unwrap() / delta).abs() < 1e-15);
        }
    }
}

#[test]
fn qp_vanishes_at_designed_root() {
    let g = gain_star(2).unwrap();
    assert!(qp(&g.l, 1.0, Complex64::new(g.sigma_star.unwrap(), 0.0)).norm() < 1e-10);
    let v = qp(&[(-1f64).exp()], 1.0, Complex64::new(-1.0, 0.0));
    assert!(v.norm() < 1e-15);
}
