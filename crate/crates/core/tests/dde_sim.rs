use midpred::mid::{gain_star, GainVector};
use midpred::model::{dilate, CanonicalSystem, Weights};
use midpred::qp::{rightmost_in_region, Quasipolynomial, Rect};
use midpred::sim::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn linear_config(n: usize, h: f64, lambda: f64, n_sub: usize, gain: GainVector, t_end: f64) -> SimConfig {
    SimConfig::new(CanonicalSystem::integrator_chain(n, h), gain, lambda, n_sub, t_end, vec![0.0; n])
}

#[test]
fn exact_start_keeps_errors_at_zero() {
    // x(t) = [1 + t + t²/2, 1 + t, 1] for the triple integrator.
    let plant = |t: f64| vec![1.0 + t + 0.5 * t * t, 1.0 + t, 1.0];
    let (h, n_sub) = (0.6, 3);
    let he = h / n_sub as f64;
    let mut cfg = linear_config(3, h, 2.0, n_sub, gain_star(3).unwrap(), 4.0);
    cfg.x0 = plant(0.0);
    cfg.predictor_history = HistoryPolicy::function(move |j, t| plant(t + j as f64 * he));
    let tr = integrate(&cfg).unwrap();
    assert!(!tr.diverged);
    for stage in &tr.e_chain {
        for e in stage.iter().filter(|e| e.is_finite()) {
            assert!(*e < 1e-9, "{e}");
        }
    }
    let defined = tr.e_pred.iter().filter(|e| e.is_finite()).count();
    assert!(defined > tr.times.len() / 2);
    assert!(tr.e_pred.iter().filter(|e| e.is_finite()).all(|e| *e < 1e-9));
}

#[test]
fn prediction_error_bounded_by_stage_errors() {
    let tr = run_example(Variant::OursN5, 0.25).unwrap();
    for k in 0..tr.times.len() {
        let sum: f64 = tr.e_chain.iter().map(|s| s[k]).sum();
        if sum.is_finite() {
            assert!(tr.e_pred[k] <= sum * (1.0 + 1e-9) + 1e-12);
        }
    }
    // e_pred is defined from t = h - h_e on.
    let first = tr.e_pred.iter().position(|e| e.is_finite()).unwrap();
    assert!((tr.times[first] - (0.25 - tr.h_e)).abs() < 1e-12);
}

#[test]
fn synthetic_exponential_fit() {
    let times: Vec<f64> = (0..=200).map(|k| k as f64 * 0.05).collect();
    let vals: Vec<f64> = times.iter().map(|t| (-3.0 * t).exp()).collect();
    assert!((fit_log_slope(&times, &vals, (0.0, 10.0)).unwrap() + 3.0).abs() < 1e-6);
    let mut bad = vals.clone();
    bad[10] = 0.0;
    assert!(fit_log_slope(&times, &bad, (0.0, 10.0)).is_err());
}

/// Rightmost root of the t-scale error quasipolynomial `sⁿ + Σ λ^k l_k s^{n−k} e^{−hs}`.
fn spectral_rate(gain: &GainVector, lambda: f64, h: f64) -> f64 {
    let l = gain.l.iter().enumerate().map(|(i, v)| v * lambda.powi(i as i32 + 1)).collect();
    let qp = Quasipolynomial::new(l, h).unwrap();
    let s = 1.0 / h;
    rightmost_in_region(&qp, &Rect::new(-8.0 * s, 1.0 * s, -12.0 * s, 12.0 * s).unwrap(), 32.0).unwrap().re
}

#[test]
fn decay_rate_matches_dominant_root() {
    // Multiple roots give polynomial prefactors, so the fit window sits far in the tail.
    let cases = [(2, 1.0, 0.25, 40.0), (1, 1.0, 0.5, 60.0), (2, 2.0, 0.5, 80.0)];
    for (n, delta, h, t_end) in cases {
        let g = gain_star(n).unwrap();
        let lambda = delta / h;
        let mut cfg = linear_config(n, h, lambda, 1, g.clone(), t_end);
        let mut hist = vec![0.0; n];
        hist[0] = 1.0;
        cfg.predictor_history = HistoryPolicy::Constant(hist);
        let tr = integrate(&cfg).unwrap();
        let rate = fit_decay_rate(&tr, (0.7 * t_end, t_end)).unwrap();
        let expected = spectral_rate(&g, lambda, h);
        if delta == 1.0 {
            assert!((expected - g.sigma_star.unwrap() / h).abs() < 1e-4);
        }
        assert!(((rate - expected) / expected).abs() < 0.05, "n={n} δ={delta}: {rate} vs {expected}");
    }
}

#[test]
fn error_flow_is_homogeneous() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let n = rng.gen_range(1..=3);
        let n_sub = rng.gen_range(1..=3);
        let h = rng.gen_range(0.2..1.0);
        let lambda = rng.gen_range(1.0..4.0);
        let g = gain_star(n).unwrap();
        let r = Weights::canonical(n);
        let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let slope: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (c2, s2) = (c.clone(), slope.clone());
        let hist = move |j: usize, t: f64| c2.iter().zip(&s2).map(|(a, b)| a + b * t * j as f64).collect::<Vec<f64>>();

        let mut a = linear_config(n, h, lambda, n_sub, g.clone(), 3.0 * h);
        a.x0 = x0.clone();
        a.predictor_history = HistoryPolicy::function(hist.clone());
        let ta = integrate(&a).unwrap();

        // Same flow in τ = λt with unit gain and delay λh, started from dilated data.
        let rb = r.clone();
        let mut b = linear_config(n, lambda * h, 1.0, n_sub, g, 3.0 * h * lambda);
        b.x0 = dilate(&r, 1.0 / lambda, &x0).unwrap();
        b.predictor_history =
            HistoryPolicy::function(move |j, tau| dilate(&rb, 1.0 / lambda, &hist(j, tau / lambda)).unwrap());
        let tb = integrate(&b).unwrap();

        assert_eq!(ta.times.len(), tb.times.len());
        for k in 0..ta.times.len() {
            let ea = &ta.e_pred_vectors[k];
            if !ea.iter().all(|v| v.is_finite()) {
                continue;
            }
            let mapped = dilate(&r, 1.0 / lambda, ea).unwrap();
            let eb = &tb.e_pred_vectors[k];
            for (p, q) in mapped.iter().zip(eb) {
                assert!((p - q).abs() <= 1e-6 * (1.0 + q.abs()), "{p} vs {q}");
            }
        }
    }
}

#[test]
fn step_halving_order() {
    let mut finals = Vec::new();
    for m in [10.0, 20.0, 40.0] {
        let mut cfg = example_config(Variant::OursN1, 0.25).unwrap();
        cfg.t_end = 5.0;
        cfg.dt = Some(0.25 / m);
        let tr = integrate(&cfg).unwrap();
        finals.push(tr.e_pred_vectors.last().unwrap().clone());
    }
    let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    let order = (d(&finals[0], &finals[1]) / d(&finals[1], &finals[2])).log2();
    assert!(order >= 3.5, "observed order {order}");
}

#[test]
fn worked_example_qualitative() {
    for v in Variant::ALL {
        let tr = run_example(v, 0.25).unwrap();
        assert!(!tr.diverged, "{v}");
        let t = tr.settling_time(1e-3).unwrap();
        assert!(t < 60.0, "{v}: {t}");
    }
    assert!(run_example(Variant::Ahmed, 0.5).unwrap().diverged);
    for v in [Variant::OursN1, Variant::OursN5] {
        let tr = run_example(v, 0.5).unwrap();
        assert!(!tr.diverged && tr.settling_time(1e-3).is_some(), "{v}");
    }
}

#[test]
fn more_sub_predictors_trade_peak_for_rate() {
    let n1 = run_example(Variant::OursN1, 0.25).unwrap();
    let n5 = run_example(Variant::OursN5, 0.25).unwrap();
    assert!(n5.peak_error() > n1.peak_error());
    assert!(n5.settling_time(1e-6).unwrap() < n1.settling_time(1e-6).unwrap());
}

#[test]
fn divergent_trace_has_positive_slope() {
    let tr = run_example(Variant::Ahmed, 0.5).unwrap();
    let t_last = *tr.times.last().unwrap();
    assert!(fit_decay_rate(&tr, (t_last - 10.0, t_last)).unwrap() > 0.0);
}

#[test]
fn bad_configs_are_rejected() {
    let g = gain_star(2).unwrap();
    let mut cfg = linear_config(2, 0.5, 2.0, 1, g, 0.1);
    assert!(integrate(&cfg).is_err());
    cfg.t_end = 1.0;
    cfg.x0 = vec![0.0];
    assert!(integrate(&cfg).is_err());
    cfg.x0 = vec![0.0; 2];
    cfg.n_sub = 0;
    assert!(integrate(&cfg).is_err());
    assert!("ours_N5".parse::<Variant>().is_ok());
    assert!("other".parse::<Variant>().is_err());
}
