//! Fixed-step simulation of the plant together with a chain of sub-predictors.
//!
//! Stage `j` (with `x̂⁰ = x`) evolves as
//! `x̂ʲ' = A x̂ʲ + Λ_λ L (x̂ʲ⁻¹₁(t) − x̂ʲ₁(t − h_e)) + φ(x̂ʲ, u(t − h + j h_e))`,
//! so `x̂ʲ(t)` estimates `x(t + j h_e)`. Integration is classical RK4 with
//! `h_e` an integer multiple of the step; delayed reads at half steps use
//! cubic Hermite interpolation of the stored first components.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mid::{gain_star, GainVector};
use crate::model::{dilated_error_transform, CanonicalSystem};

/// States above this norm are treated as divergence.
pub const DIVERGENCE_THRESHOLD: f64 = 1e9;

/// Default number of steps per effective delay.
pub const STEPS_PER_DELAY: usize = 50;

type HistoryFn = Arc<dyn Fn(usize, f64) -> Vec<f64> + Send + Sync>;

/// Initial data of the sub-predictors on `[-h_e, 0]`.
#[derive(Clone)]
pub enum HistoryPolicy {
    /// Same constant vector for every stage.
    Constant(Vec<f64>),
    /// One constant vector per stage.
    PerStage(Vec<Vec<f64>>),
    /// `f(j, t)` for stage `j = 1..=N` and `t ∈ [-h_e, 0]`.
    Function(HistoryFn),
}

impl HistoryPolicy {
    pub fn zero(n: usize) -> Self {
        HistoryPolicy::Constant(vec![0.0; n])
    }

    pub fn function(f: impl Fn(usize, f64) -> Vec<f64> + Send + Sync + 'static) -> Self {
        HistoryPolicy::Function(Arc::new(f))
    }

    fn eval(&self, stage: usize, t: f64) -> Vec<f64> {
        match self {
            HistoryPolicy::Constant(v) => v.clone(),
            HistoryPolicy::PerStage(v) => v[stage - 1].clone(),
            HistoryPolicy::Function(f) => f(stage, t),
        }
    }

    fn check(&self, n: usize, stages: usize) -> Result<()> {
        let bad = |len: usize| if len != n { Err(Error::DimensionMismatch { expected: n, got: len }) } else { Ok(()) };
        match self {
            HistoryPolicy::Constant(v) => bad(v.len()),
            HistoryPolicy::PerStage(v) => {
                if v.len() != stages {
                    return Err(Error::DimensionMismatch { expected: stages, got: v.len() });
                }
                v.iter().try_for_each(|s| bad(s.len()))
            }
            HistoryPolicy::Function(f) => (1..=stages).try_for_each(|j| bad(f(j, 0.0).len())),
        }
    }
}

impl fmt::Debug for HistoryPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HistoryPolicy::Constant(v) => f.debug_tuple("Constant").field(v).finish(),
            HistoryPolicy::PerStage(v) => f.debug_tuple("PerStage").field(v).finish(),
            HistoryPolicy::Function(_) => f.write_str("Function(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub system: CanonicalSystem,
    pub gain: GainVector,
    pub lambda: f64,
    pub n_sub: usize,
    pub t_end: f64,
    /// Requested step; snapped down so that `h_e / dt` is an integer.
    /// Defaults to `h_e / 50`.
    pub dt: Option<f64>,
    pub x0: Vec<f64>,
    pub predictor_history: HistoryPolicy,
}

impl SimConfig {
    /// Zero predictor histories and the default step.
    pub fn new(system: CanonicalSystem, gain: GainVector, lambda: f64, n_sub: usize, t_end: f64, x0: Vec<f64>) -> Self {
        let n = system.n;
        SimConfig { system, gain, lambda, n_sub, t_end, dt: None, x0, predictor_history: HistoryPolicy::zero(n) }
    }

    pub fn effective_delay(&self) -> f64 {
        self.system.h / self.n_sub as f64
    }

    /// Steps per effective delay and the snapped step.
    pub fn grid(&self) -> Result<(usize, f64)> {
        let he = self.effective_delay();
        let req = self.dt.unwrap_or(he / STEPS_PER_DELAY as f64);
        if !(req > 0.0) || !req.is_finite() {
            return Err(Error::InvalidArgument(format!("step must be positive, got {req}")));
        }
        let m = (he / req * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        Ok((m, he / m as f64))
    }

    fn validate(&self) -> Result<()> {
        let n = self.system.n;
        if self.gain.n() != n {
            return Err(Error::DimensionMismatch { expected: n, got: self.gain.n() });
        }
        if self.x0.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: self.x0.len() });
        }
        if self.n_sub == 0 {
            return Err(Error::InvalidArgument("at least one sub-predictor is required".into()));
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.system.h > 0.0) {
            return Err(Error::InvalidArgument("simulation needs a positive delay".into()));
        }
        if !(self.t_end >= self.system.h) || !self.t_end.is_finite() {
            return Err(Error::InvalidArgument(format!("t_end must be at least h = {}", self.system.h)));
        }
        self.predictor_history.check(n, self.n_sub)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationTrace {
    pub times: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    /// `xhat[j - 1][k]` is stage `j` at `times[k]`.
    pub xhat: Vec<Vec<Vec<f64>>>,
    /// `e_chain[j - 1][k] = ‖x̂ʲ(t − j h_e) − x̂ʲ⁻¹(t − (j − 1) h_e)‖`, NaN where undefined.
    pub e_chain: Vec<Vec<f64>>,
    /// `‖x̂ᴺ(t − h) − x(t)‖`, NaN where undefined.
    pub e_pred: Vec<f64>,
    /// `x̂ᴺ(t − h) − x(t)` component-wise, NaN where undefined.
    pub e_pred_vectors: Vec<Vec<f64>>,
    /// `‖Λ_{1/λ}(x̂ᴺ(t − h) − x(t))‖`, present when `λ ≥ 1`.
    pub epsilon: Option<Vec<f64>>,
    pub diverged: bool,
    pub dt: f64,
    pub h_e: f64,
    pub n_sub: usize,
    pub lambda: f64,
}

impl SimulationTrace {
    /// First time after which `e_pred` stays below `tol` until the end.
    pub fn settling_time(&self, tol: f64) -> Option<f64> {
        if self.diverged {
            return None;
        }
        let last_bad = self.e_pred.iter().rposition(|e| !(*e < tol));
        match last_bad {
            None => self.times.first().copied(),
            Some(i) if i + 1 < self.times.len() => Some(self.times[i + 1]),
            Some(_) => None,
        }
    }

    /// Largest defined `e_pred`.
    pub fn peak_error(&self) -> f64 {
        self.e_pred.iter().copied().filter(|e| e.is_finite()).fold(0.0, f64::max)
    }
}

struct Stepper<'a> {
    cfg: &'a SimConfig,
    n: usize,
    big_n: usize,
    m: usize,
    dt: f64,
    he: f64,
    lam_l: Vec<f64>,
    /// First components and their derivatives per stage on the grid.
    y1: Vec<Vec<f64>>,
    dy1: Vec<Vec<f64>>,
    scratch: Vec<f64>,
}

impl Stepper<'_> {
    fn history(&self, stage: usize, t: f64) -> Vec<f64> {
        self.cfg.predictor_history.eval(stage, t)
    }

    fn grid_y1(&self, stage: usize, i: isize) -> f64 {
        if i < 0 {
            self.history(stage, i as f64 * self.dt)[0]
        } else {
            self.y1[stage - 1][i as usize]
        }
    }

    /// `x̂ʲ₁(t_k + c dt − h_e)` for `c ∈ {0, 1/2, 1}`.
    fn delayed_y1(&self, stage: usize, k: usize, c: u8) -> f64 {
        let idx = k as isize - self.m as isize;
        match c {
            0 => self.grid_y1(stage, idx),
            2 => self.grid_y1(stage, idx + 1),
            _ => {
                if idx < 0 {
                    let t = (idx as f64 + 0.5) * self.dt;
                    return self.history(stage, t)[0];
                }
                let (a, b) = (idx as usize, idx as usize + 1);
                let s = &self.y1[stage - 1];
                let d = &self.dy1[stage - 1];
                0.5 * (s[a] + s[b]) + self.dt / 8.0 * (d[a] - d[b])
            }
        }
    }

    /// Right-hand side at `t = t_k + c dt / 2`.
    fn rhs(&mut self, k: usize, c: u8, z: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.n;
        let t = (k as f64 + 0.5 * c as f64) * self.dt;
        let sys = &self.cfg.system;
        let h = sys.h;
        let mut scratch = std::mem::take(&mut self.scratch);
        let res = (|| {
            for stage in 0..=self.big_n {
                let xs = &z[stage * n..(stage + 1) * n];
                let o = &mut out[stage * n..(stage + 1) * n];
                let u = sys.input(t - h + stage as f64 * self.he)?;
                sys.eval_phi(xs, u, &mut scratch)?;
                for i in 0..n {
                    o[i] = scratch[i] + if i + 1 < n { xs[i + 1] } else { 0.0 };
                }
                if stage > 0 {
                    let innov = z[(stage - 1) * n] - self.delayed_y1(stage, k, c);
                    for i in 0..n {
                        o[i] += self.lam_l[i] * innov;
                    }
                }
            }
            Ok(())
        })();
        self.scratch = scratch;
        res
    }
}

/// Integrates the plant and the sub-predictor chain.
pub fn integrate(cfg: &SimConfig) -> Result<SimulationTrace> {
    cfg.validate()?;
    let n = cfg.system.n;
    let big_n = cfg.n_sub;
    let (m, dt) = cfg.grid()?;
    let he = cfg.effective_delay();
    let steps = (cfg.t_end / dt * (1.0 - 1e-12)).ceil() as usize;
    let lam_l: Vec<f64> = cfg.gain.l.iter().enumerate().map(|(i, l)| cfg.lambda.powi(i as i32 + 1) * l).collect();

    let dim = n * (big_n + 1);
    let mut z = vec![0.0; dim];
    z[..n].copy_from_slice(&cfg.x0);
    for j in 1..=big_n {
        z[j * n..(j + 1) * n].copy_from_slice(&cfg.predictor_history.eval(j, 0.0));
    }

    let mut st = Stepper {
        cfg,
        n,
        big_n,
        m,
        dt,
        he,
        lam_l,
        y1: vec![Vec::with_capacity(steps + 1); big_n],
        dy1: vec![Vec::with_capacity(steps + 1); big_n],
        scratch: vec![0.0; n],
    };

    let mut times = Vec::with_capacity(steps + 1);
    let mut states: Vec<Vec<f64>> = Vec::with_capacity(steps + 1);
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);
    let mut tmp = vec![0.0; dim];
    let mut diverged = false;

    for k in 0..=steps {
        times.push(k as f64 * dt);
        states.push(z.clone());
        for j in 1..=big_n {
            st.y1[j - 1].push(z[j * n]);
        }
        if !z.iter().all(|v| v.is_finite()) || z.iter().map(|v| v * v).sum::<f64>().sqrt() > DIVERGENCE_THRESHOLD {
            diverged = true;
            break;
        }
        if k == steps {
            break;
        }
        st.rhs(k, 0, &z, &mut k1)?;
        for j in 1..=big_n {
            st.dy1[j - 1].push(k1[j * n]);
        }
        for i in 0..dim {
            tmp[i] = z[i] + 0.5 * dt * k1[i];
        }
        st.rhs(k, 1, &tmp, &mut k2)?;
        for i in 0..dim {
            tmp[i] = z[i] + 0.5 * dt * k2[i];
        }
        st.rhs(k, 1, &tmp, &mut k3)?;
        for i in 0..dim {
            tmp[i] = z[i] + dt * k3[i];
        }
        st.rhs(k, 2, &tmp, &mut k4)?;
        for i in 0..dim {
            z[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }

    let len = times.len();
    let stage_at = |stage: usize, i: isize| -> Option<Vec<f64>> {
        if i >= 0 {
            let i = i as usize;
            Some(states[i][stage * n..(stage + 1) * n].to_vec())
        } else if stage > 0 && i >= -(m as isize) {
            Some(cfg.predictor_history.eval(stage, i as f64 * dt))
        } else {
            None
        }
    };
    let norm_diff = |a: Option<Vec<f64>>, b: Option<Vec<f64>>| match (a, b) {
        (Some(a), Some(b)) => a.iter().zip(&b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt(),
        _ => f64::NAN,
    };

    let mut e_chain = vec![Vec::with_capacity(len); big_n];
    let mut e_pred = Vec::with_capacity(len);
    let mut e_pred_vec = Vec::with_capacity(len);
    for k in 0..len {
        let ki = k as isize;
        for j in 1..=big_n {
            let a = stage_at(j, ki - (j * m) as isize);
            let b = stage_at(j - 1, ki - ((j - 1) * m) as isize);
            e_chain[j - 1].push(norm_diff(a, b));
        }
        let v = stage_at(big_n, ki - (big_n * m) as isize)
            .map(|p| p.iter().zip(&states[k][..n]).map(|(a, b)| a - b).collect::<Vec<f64>>());
        e_pred.push(v.as_ref().map_or(f64::NAN, |v| v.iter().map(|c| c * c).sum::<f64>().sqrt()));
        e_pred_vec.push(v);
    }
    let epsilon = if cfg.lambda >= 1.0 {
        let r = cfg.system.weights();
        Some(
            e_pred_vec
                .iter()
                .map(|v| match v {
                    Some(v) => dilated_error_transform(&r, cfg.lambda, v).map(|d| d.iter().map(|c| c * c).sum::<f64>().sqrt()),
                    None => Ok(f64::NAN),
                })
                .collect::<Result<Vec<f64>>>()?,
        )
    } else {
        None
    };

    let e_pred_vectors = e_pred_vec.into_iter().map(|v| v.unwrap_or_else(|| vec![f64::NAN; n])).collect();
    let x = states.iter().map(|s| s[..n].to_vec()).collect();
    let xhat = (1..=big_n).map(|j| states.iter().map(|s| s[j * n..(j + 1) * n].to_vec()).collect()).collect();
    Ok(SimulationTrace { times, x, xhat, e_chain, e_pred, e_pred_vectors, epsilon, diverged, dt, h_e: he, n_sub: big_n, lambda: cfg.lambda })
}

/// Tunings compared on the worked example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Variant {
    /// `N = 1`, `λ = 2`, `L = [2, 1]`.
    Ahmed,
    /// `N = 1`, `λ = 1/h`, `L = L*`.
    OursN1,
    /// `N = 5`, `λ = 5/h`, `L = L*`.
    OursN5,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Ahmed, Variant::OursN1, Variant::OursN5];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Ahmed => "ahmed",
            Variant::OursN1 => "ours_N1",
            Variant::OursN5 => "ours_N5",
        }
    }

    /// `(N, λ, L)` for delay `h`.
    pub fn tuning(self, h: f64) -> Result<(usize, f64, GainVector)> {
        Ok(match self {
            Variant::Ahmed => (1, 2.0, GainVector::new(vec![2.0, 1.0])?),
            Variant::OursN1 => (1, 1.0 / h, gain_star(2)?),
            Variant::OursN5 => (5, 5.0 / h, gain_star(2)?),
        })
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ahmed" => Ok(Variant::Ahmed),
            "ours_n1" => Ok(Variant::OursN1),
            "ours_n5" => Ok(Variant::OursN5),
            _ => Err(Error::InvalidArgument(format!("unknown variant '{s}' (expected ahmed, ours_N1 or ours_N5)"))),
        }
    }
}

/// Horizon of the worked-example runs.
pub const EXAMPLE_T_END: f64 = 60.0;

/// Configuration of the worked example for a variant; `x0 = [1, 1]`, zero histories.
pub fn example_config(variant: Variant, h: f64) -> Result<SimConfig> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("delay must be positive, got {h}")));
    }
    let (n_sub, lambda, gain) = variant.tuning(h)?;
    Ok(SimConfig::new(CanonicalSystem::example(h), gain, lambda, n_sub, EXAMPLE_T_END, vec![1.0, 1.0]))
}

pub fn run_example(variant: Variant, h: f64) -> Result<SimulationTrace> {
    integrate(&example_config(variant, h)?)
}

/// Least-squares slope of `ln v` against `t` over `window`.
pub fn fit_log_slope(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<f64> {
    let (t0, t1) = window;
    if !(t1 > t0) {
        return Err(Error::InvalidArgument(format!("empty window [{t0}, {t1}]")));
    }
    let mut pts = Vec::new();
    for (t, v) in times.iter().zip(values) {
        if *t < t0 || *t > t1 {
            continue;
        }
        if !(*v > 0.0) || !v.is_finite() {
            return Err(Error::Domain(format!("non-positive or undefined error {v} at t = {t}")));
        }
        pts.push((*t, v.ln()));
    }
    if pts.len() < 2 {
        return Err(Error::InvalidArgument("fewer than two samples in window".into()));
    }
    let k = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|(t, y)| (t - tm) * (y - ym)).sum();
    let sxx: f64 = pts.iter().map(|(t, _)| (t - tm) * (t - tm)).sum();
    Ok(sxy / sxx)
}

/// Decay rate of `‖e_pred‖` per time unit over `window`.
pub fn fit_decay_rate(trace: &SimulationTrace, window: (f64, f64)) -> Result<f64> {
    fit_log_slope(&trace.times, &trace.e_pred, window)
}
