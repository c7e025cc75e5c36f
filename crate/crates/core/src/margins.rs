//! Delay-axis decomposition for `D(s) = s^n + Q(s) e^{-δ s}`.
//!
//! Imaginary-axis roots `s = jω` occur where `ω^{2n} = |Q(jω)|^2`, a polynomial
//! equation in `x = ω^2` solved by exact Sturm isolation. Each crossing
//! frequency yields the delays `δ = (Arg G(jω) + 2πi) / ω` with
//! `G(s) = -Q(s) / s^n`, and the unstable-root count changes by `±2` there.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mid::{gain_star, GainVector};
use crate::poly::RealPolynomial;
use crate::sturm::{Dyadic, IntPoly, SturmSequence};

/// Crossing points closer than this (relative) are treated as simultaneous.
pub const SIMULTANEOUS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingFrequency {
    pub omega: f64,
    /// `Arg G(jω)` in `[0, 2π)`.
    pub arg_g: f64,
    /// `+1` when roots move into the right half-plane as `δ` grows.
    pub direction: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingSet {
    /// Sorted by descending frequency.
    pub frequencies: Vec<CrossingFrequency>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingPoint {
    pub delta: f64,
    pub omega: f64,
    pub direction: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionPoint {
    pub delta: f64,
    pub omegas: Vec<f64>,
    /// Net change of the unstable-root count across this point.
    pub jump: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayInterval {
    pub lo: f64,
    pub hi: f64,
    pub unstable: usize,
}

impl DelayInterval {
    pub fn is_stable(&self) -> bool {
        self.unstable == 0
    }

    pub fn contains(&self, delta: f64) -> bool {
        delta > self.lo && delta < self.hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityPartition {
    pub gain: GainVector,
    pub delta_max: f64,
    pub crossings: CrossingSet,
    /// Crossing points in `(0, delta_max]`, merged when simultaneous.
    pub points: Vec<PartitionPoint>,
    /// Consecutive intervals covering `(0, delta_max)`.
    pub intervals: Vec<DelayInterval>,
}

impl StabilityPartition {
    pub fn stable_intervals(&self) -> impl Iterator<Item = &DelayInterval> {
        self.intervals.iter().filter(|i| i.is_stable())
    }

    pub fn interval_containing(&self, delta: f64) -> Option<&DelayInterval> {
        self.intervals.iter().find(|i| i.contains(delta))
    }

    /// First crossing point, i.e. the delay margin when the first interval is stable.
    pub fn first_point(&self) -> Option<f64> {
        self.points.first().map(|p| p.delta)
    }
}

fn dyadic_ints(values: &[f64]) -> (Vec<BigInt>, u32) {
    let ds: Vec<Dyadic> = values.iter().map(|&v| Dyadic::from_f64(v)).collect();
    let s = ds.iter().map(|d| d.shift).max().unwrap_or(0);
    (ds.iter().map(|d| &d.num << (s - d.shift) as usize).collect(), s)
}

fn int_mul(a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![BigInt::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Exact integer multiple of `x^n - |Q(j sqrt(x))|^2`.
pub fn crossing_polynomial(gain: &GainVector) -> IntPoly {
    let n = gain.n();
    let (li, s) = dyadic_ints(&gain.l);
    // Q(jω) = A(ω²) + jω B(ω²), with l_k multiplying (jω)^{n-k}.
    let mut a = vec![BigInt::zero(); n / 2 + 1];
    let mut b = vec![BigInt::zero(); n / 2 + 1];
    for (idx, lk) in li.iter().enumerate() {
        let p = n - (idx + 1);
        let m = p / 2;
        let sign = if m % 2 == 0 { 1 } else { -1 };
        if p % 2 == 0 {
            a[m] += lk * sign;
        } else {
            b[m] += lk * sign;
        }
    }
    let a2 = int_mul(&a, &a);
    let b2 = int_mul(&b, &b);
    let mut f = vec![BigInt::zero(); (n + 1).max(a2.len()).max(b2.len() + 1)];
    f[n] += BigInt::one() << (2 * s as usize);
    for (i, c) in a2.iter().enumerate() {
        f[i] -= c;
    }
    for (i, c) in b2.iter().enumerate() {
        f[i + 1] -= c;
    }
    IntPoly::new(f)
}

/// `G(jω) = -Q(jω) / (jω)^n`.
pub fn g_of(gain: &GainVector, omega: f64) -> Complex64 {
    let s = Complex64::new(0.0, omega);
    let q = gain.l.iter().fold(Complex64::new(0.0, 0.0), |acc, c| acc * s + c);
    -q / s.powu(gain.n() as u32)
}

fn arg_0_2pi(z: Complex64) -> f64 {
    let a = z.arg();
    if a < 0.0 { a + TAU } else { a }
}

pub fn crossing_frequencies(gain: &GainVector) -> Result<CrossingSet> {
    let f = crossing_polynomial(gain);
    let sturm = SturmSequence::from_int(f);
    let bound = sturm.root_bound();
    let tiny = Dyadic { num: BigInt::zero(), shift: 0 };
    let intervals = sturm.isolate(&tiny, &bound, 1e-3);
    let mut frequencies = Vec::with_capacity(intervals.len());
    for (a, b) in intervals {
        let (a, b) = sturm.refine(a, b, 120);
        let x = Dyadic::midpoint(&a, &b).to_f64();
        let omega = x.sqrt();
        let arg_g = arg_0_2pi(g_of(gain, omega));
        let delta = if arg_g > 0.0 { arg_g / omega } else { TAU / omega };
        let direction = crossing_direction(gain, omega, delta)?;
        frequencies.push(CrossingFrequency { omega, arg_g, direction });
    }
    frequencies.sort_by(|a, b| b.omega.total_cmp(&a.omega));
    Ok(CrossingSet { frequencies })
}

/// All `(δ, ω)` with `0 < δ <= delta_max`, sorted by `δ`.
pub fn crossing_points(cs: &CrossingSet, delta_max: f64) -> Vec<CrossingPoint> {
    let mut out = Vec::new();
    for f in &cs.frequencies {
        let mut i = 0u32;
        loop {
            let delta = (TAU * i as f64 + f.arg_g) / f.omega;
            if delta > delta_max {
                break;
            }
            if delta > 0.0 {
                out.push(CrossingPoint { delta, omega: f.omega, direction: f.direction });
            }
            i += 1;
        }
    }
    out.sort_by(|a, b| a.delta.total_cmp(&b.delta).then(b.omega.total_cmp(&a.omega)));
    out
}

/// Sign of `Re(ds/dδ)` at the imaginary-axis root `jω` of `D_δ`.
pub fn crossing_direction(gain: &GainVector, omega: f64, delta: f64) -> Result<i32> {
    let s = Complex64::new(0.0, omega);
    let q = gain.l.iter().fold(Complex64::new(0.0, 0.0), |acc, c| acc * s + c);
    let dq = gain.q_polynomial().derivative().eval_complex(s);
    let n = gain.n();
    let e = (-delta * s).exp();
    let d_delta = -s * q * e;
    let d_s = s.powu(n as u32 - 1) * n as f64 + (dq - q * delta) * e;
    let scale = omega.powi(n as i32 - 1) * n as f64 + (dq.norm() + q.norm() * delta);
    if d_s.norm() <= 1e-12 * scale {
        return Err(Error::DegenerateCrossing(format!("dD/ds vanishes at ω = {omega}, δ = {delta}")));
    }
    let rate = -d_delta / d_s;
    if rate.re == 0.0 || rate.re.abs() <= 1e-14 * rate.norm() {
        return Err(Error::DegenerateCrossing(format!("tangential crossing at ω = {omega}, δ = {delta}")));
    }
    Ok(if rate.re > 0.0 { 1 } else { -1 })
}

pub fn default_delta_max(cs: &CrossingSet) -> f64 {
    let w = cs.frequencies.iter().map(|f| f.omega).fold(f64::INFINITY, f64::min);
    if w.is_finite() { 3.0 * TAU / w } else { 10.0 }
}

/// Partition of `(0, delta_max)` for the MID gain of order `n`.
pub fn stability_partition(n: usize, delta_max: Option<f64>) -> Result<StabilityPartition> {
    stability_partition_for(&gain_star(n)?, delta_max)
}

pub fn stability_partition_for(gain: &GainVector, delta_max: Option<f64>) -> Result<StabilityPartition> {
    let crossings = crossing_frequencies(gain)?;
    let delta_max = delta_max.unwrap_or_else(|| default_delta_max(&crossings));
    if !(delta_max > 0.0) {
        return Err(Error::InvalidArgument("delta_max must be positive".into()));
    }
    let raw = crossing_points(&crossings, delta_max);
    let mut points: Vec<PartitionPoint> = Vec::new();
    for p in raw {
        if let Some(last) = points.last_mut() {
            if (p.delta - last.delta).abs() <= SIMULTANEOUS_TOL * p.delta.max(1.0) {
                last.omegas.push(p.omega);
                last.jump += 2 * p.direction as i64;
                continue;
            }
        }
        points.push(PartitionPoint { delta: p.delta, omegas: vec![p.omega], jump: 2 * p.direction as i64 });
    }
    let mut count = count_unstable_roots(&gain.delay_free_polynomial())? as i64;
    let mut intervals = Vec::with_capacity(points.len() + 1);
    let mut lo = 0.0;
    for p in &points {
        intervals.push(DelayInterval { lo, hi: p.delta, unstable: count as usize });
        count += p.jump;
        if count < 0 {
            return Err(Error::InconsistentPartition(format!("negative unstable count after δ = {}", p.delta)));
        }
        lo = p.delta;
    }
    if lo < delta_max {
        intervals.push(DelayInterval { lo, hi: delta_max, unstable: count as usize });
    }
    Ok(StabilityPartition { gain: gain.clone(), delta_max, crossings, points, intervals })
}

fn rational(x: f64) -> BigRational {
    Dyadic::from_f64(x).to_rational()
}

enum Routh {
    Count(usize),
    /// An all-zero row appeared: roots symmetric about the origin exist.
    ZeroRow,
}

/// Exact Routh array; a zero pivot is replaced by a tiny positive rational.
fn routh(p: &RealPolynomial, perturbed: &mut bool) -> Routh {
    let d = p.degree().unwrap_or(0);
    let desc: Vec<BigRational> = p.coeffs().iter().rev().map(|&c| rational(c)).collect();
    let width = d / 2 + 1;
    let mut r0: Vec<BigRational> = (0..width).map(|i| desc.get(2 * i).cloned().unwrap_or_else(BigRational::zero)).collect();
    let mut r1: Vec<BigRational> = (0..width).map(|i| desc.get(2 * i + 1).cloned().unwrap_or_else(BigRational::zero)).collect();
    let eps = BigRational::new(BigInt::one(), BigInt::one() << 400usize);
    let mut first = vec![r0[0].clone()];
    for _ in 0..d {
        if r1.iter().all(|c| c.is_zero()) {
            return Routh::ZeroRow;
        }
        if r1[0].is_zero() {
            r1[0] = eps.clone();
            *perturbed = true;
        }
        first.push(r1[0].clone());
        let mut next = vec![BigRational::zero(); width];
        for i in 0..width - 1 {
            next[i] = (&r1[0] * &r0[i + 1] - &r0[0] * &r1[i + 1]) / &r1[0];
        }
        r0 = std::mem::replace(&mut r1, next);
    }
    let signs: Vec<bool> = first.iter().map(|c| c.is_positive()).collect();
    Routh::Count(signs.windows(2).filter(|w| w[0] != w[1]).count())
}

fn eigen_unstable(p: &RealPolynomial) -> usize {
    let scale = p.companion_roots().iter().map(|z| z.norm()).fold(1.0, f64::max);
    p.companion_roots().iter().filter(|z| z.re > 1e-12 * scale).count()
}

/// Roots with positive real part (with multiplicity), by the Routh array.
///
/// A zero pivot is resolved by ε-perturbation and cross-checked against the
/// companion eigenvalues; an all-zero row falls back to the eigenvalues.
pub fn count_unstable_roots(p: &RealPolynomial) -> Result<usize> {
    match p.degree() {
        None => return Err(Error::InvalidArgument("zero polynomial".into())),
        Some(0) => return Ok(0),
        _ => {}
    }
    if !(p.leading() > 0.0) {
        return Err(Error::InvalidArgument("leading coefficient must be positive".into()));
    }
    let mut perturbed = false;
    match routh(p, &mut perturbed) {
        Routh::Count(c) if !perturbed => Ok(c),
        Routh::Count(c) => {
            let e = eigen_unstable(p);
            Ok(if e == c { c } else { e })
        }
        Routh::ZeroRow => Ok(eigen_unstable(p)),
    }
}

/// True iff every root has negative real part.
pub fn hurwitz_check(p: &RealPolynomial) -> Result<bool> {
    if !(p.leading() > 0.0) {
        return Err(Error::InvalidArgument("leading coefficient must be positive".into()));
    }
    if p.degree().unwrap_or(0) == 0 {
        return Ok(true);
    }
    // Zero constant term means a root at the origin.
    if p.coeffs()[0] == 0.0 {
        return Ok(false);
    }
    let mut perturbed = false;
    match routh(p, &mut perturbed) {
        Routh::ZeroRow => Ok(false),
        Routh::Count(c) if !perturbed => Ok(c == 0),
        Routh::Count(_) => {
            // A zero pivot signals roots on or across the imaginary axis; confirm numerically.
            let roots = p.companion_roots();
            let scale = roots.iter().map(|z| z.norm()).fold(1.0, f64::max);
            Ok(roots.iter().all(|z| z.re < -1e-12 * scale))
        }
    }
}

/// The observer matrix `A - L C` with `A` the shift and `C` the first-coordinate readout.
pub fn observer_matrix(gain: &GainVector) -> DMatrix<f64> {
    let n = gain.n();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        if i + 1 < n {
            m[(i, i + 1)] = 1.0;
        }
        m[(i, 0)] -= gain.l[i];
    }
    m
}
