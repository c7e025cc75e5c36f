//! The characteristic quasipolynomial `D(s) = s^n + Q(s) e^{-δ s}` and its roots
//! in bounded rectangles.
//!
//! Root counts come from the argument principle along the rectangle boundary.
//! Roots are located by recursive bisection of the rectangle using those
//! counts, then polished with multiplicity-aware Newton steps, so the reported
//! multiplicities always sum to the boundary count.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mid::GainVector;

/// Relative size of `|D|` against its term scale below which a contour sample
/// counts as hitting a root.
const ON_CONTOUR_REL: f64 = 1e-13;
/// Phase step above which a contour segment is subdivided.
const MAX_PHASE_STEP: f64 = PI / 4.0;
const MAX_SEGMENT_DEPTH: u32 = 40;
/// Smallest rectangle side the root search subdivides to.
const MIN_SIDE: f64 = 1e-5;
/// Roots closer than this are merged into one location.
pub const MERGE_RADIUS: f64 = 1e-4;
const EVAL_BUDGET: usize = 20_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quasipolynomial {
    /// `l[0]` is `l_1`.
    pub l: Vec<f64>,
    pub delta: f64,
}

impl Quasipolynomial {
    pub fn new(l: Vec<f64>, delta: f64) -> Result<Self> {
        if l.is_empty() || *l.last().unwrap() == 0.0 {
            return Err(Error::InvalidArgument("gain list must be nonempty with l_n != 0".into()));
        }
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::InvalidArgument("delta must be finite and nonnegative".into()));
        }
        Ok(Quasipolynomial { l, delta })
    }

    pub fn from_gain(gain: &GainVector, delta: f64) -> Result<Self> {
        Self::new(gain.l.clone(), delta)
    }

    pub fn n(&self) -> usize {
        self.l.len()
    }

    fn q_and_dq(&self, s: Complex64) -> (Complex64, Complex64) {
        let zero = Complex64::new(0.0, 0.0);
        let (mut q, mut dq) = (zero, zero);
        for &c in &self.l {
            dq = dq * s + q;
            q = q * s + c;
        }
        // Horner over l_1..l_n misses the leading s^n term, which is handled separately.
        (q, dq)
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        let (q, _) = self.q_and_dq(s);
        s.powu(self.n() as u32) + q * (-self.delta * s).exp()
    }

    /// `(D(s), D'(s), scale)` with `scale = |s|^n + |Q|_abs |e^{-δ s}|`.
    pub fn eval_full(&self, s: Complex64) -> (Complex64, Complex64, f64) {
        let n = self.n() as u32;
        let (q, dq) = self.q_and_dq(s);
        let e = (-self.delta * s).exp();
        let sn1 = s.powu(n - 1);
        let value = sn1 * s + q * e;
        let deriv = sn1 * n as f64 + (dq - q * self.delta) * e;
        let r = s.norm();
        let qabs = self.l.iter().fold(0.0, |acc, c| acc * r + c.abs());
        (value, deriv, r.powi(n as i32) + qabs * e.norm())
    }

    pub fn derivative(&self, s: Complex64) -> Complex64 {
        self.eval_full(s).1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Rect {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Result<Self> {
        let ok = [re_min, re_max, im_min, im_max].iter().all(|v| v.is_finite()) && re_min < re_max && im_min < im_max;
        if !ok {
            return Err(Error::InvalidArgument(format!("degenerate rectangle [{re_min},{re_max}]x[{im_min},{im_max}]")));
        }
        Ok(Rect { re_min, re_max, im_min, im_max })
    }

    pub fn width(&self) -> f64 {
        self.re_max - self.re_min
    }

    pub fn height(&self) -> f64 {
        self.im_max - self.im_min
    }

    pub fn expand(&self, eta: f64) -> Rect {
        Rect { re_min: self.re_min - eta, re_max: self.re_max + eta, im_min: self.im_min - eta, im_max: self.im_max + eta }
    }

    pub fn contains(&self, s: Complex64) -> bool {
        s.re >= self.re_min && s.re <= self.re_max && s.im >= self.im_min && s.im <= self.im_max
    }

    pub fn center(&self) -> Complex64 {
        Complex64::new(0.5 * (self.re_min + self.re_max), 0.5 * (self.im_min + self.im_max))
    }

    /// Corners in counterclockwise order.
    fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.re_min, self.im_min),
            Complex64::new(self.re_max, self.im_min),
            Complex64::new(self.re_max, self.im_max),
            Complex64::new(self.re_min, self.im_max),
        ]
    }

    /// Cuts across the longer side, or across the shorter one when `across_short`.
    fn split(&self, frac: f64, across_short: bool) -> (Rect, Rect) {
        if (self.width() >= self.height()) != across_short {
            let x = self.re_min + frac * self.width();
            (Rect { re_max: x, ..*self }, Rect { re_min: x, ..*self })
        } else {
            let y = self.im_min + frac * self.height();
            (Rect { im_max: y, ..*self }, Rect { im_min: y, ..*self })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralRoot {
    pub location: Complex64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    /// Sorted by `(Re, Im)`.
    pub roots: Vec<SpectralRoot>,
    /// Region actually searched; slightly larger than requested when a root
    /// sat on the requested boundary.
    pub region: Rect,
    pub count_by_argument_principle: usize,
    pub dominant: Option<Complex64>,
}

struct Counter<'a> {
    qp: &'a Quasipolynomial,
    step: f64,
    evals: usize,
}

impl<'a> Counter<'a> {
    fn new(qp: &'a Quasipolynomial, base_points: usize, rect: &Rect) -> Self {
        let per_edge = (base_points / 4).max(8) as f64;
        let geometric = rect.width().max(rect.height()) / per_edge;
        let oscillation = 0.4 / qp.delta.max(1e-9);
        Counter { qp, step: geometric.min(oscillation).min(0.5), evals: 0 }
    }

    /// `D(s)` and the logarithmic derivative `D'(s)/D(s)`.
    fn sample(&mut self, s: Complex64) -> Result<(Complex64, Complex64)> {
        self.evals += 1;
        if self.evals > EVAL_BUDGET {
            return Err(Error::BudgetExceeded);
        }
        let (v, d, scale) = self.qp.eval_full(s);
        if !(v.norm() > ON_CONTOUR_REL * scale) {
            return Err(Error::RootOnContour { re: s.re, im: s.im });
        }
        Ok((v, d / v))
    }

    /// Phase change of `D` from `a` to `b`. Segments are split until both the
    /// endpoint phase difference and the endpoint phase rates are small, which
    /// rules out aliasing whole turns near clustered roots.
    fn segment(&mut self, a: Complex64, fa: (Complex64, Complex64), b: Complex64, fb: (Complex64, Complex64), depth: u32) -> Result<f64> {
        let d = (fb.0 / fa.0).arg();
        let ab = b - a;
        let (ra, rb) = ((fa.1 * ab).im.abs(), (fb.1 * ab).im.abs());
        if d.abs() <= MAX_PHASE_STEP && ra <= 2.0 * MAX_PHASE_STEP && rb <= 2.0 * MAX_PHASE_STEP {
            return Ok(d);
        }
        let m = 0.5 * (a + b);
        if depth >= MAX_SEGMENT_DEPTH {
            return Err(Error::RootOnContour { re: m.re, im: m.im });
        }
        let fm = self.sample(m)?;
        Ok(self.segment(a, fa, m, fm, depth + 1)? + self.segment(m, fm, b, fb, depth + 1)?)
    }

    fn winding(&mut self, rect: &Rect) -> Result<f64> {
        let c = rect.corners();
        let mut total = 0.0;
        let f0 = self.sample(c[0])?;
        let mut fa = f0;
        for e in 0..4 {
            let (a, b) = (c[e], c[(e + 1) % 4]);
            let pieces = (((b - a).norm() / self.step).ceil() as usize).max(2);
            let mut prev = a;
            for k in 1..=pieces {
                let s = if k == pieces { b } else { a + (b - a) * (k as f64 / pieces as f64) };
                let fs = if k == pieces && e == 3 { f0 } else { self.sample(s)? };
                total += self.segment(prev, fa, s, fs, 0)?;
                prev = s;
                fa = fs;
            }
        }
        Ok(total / TAU)
    }

    fn count(&mut self, rect: &Rect) -> Result<usize> {
        let w = self.winding(rect)?;
        let r = w.round();
        if (w - r).abs() > 0.05 || r < 0.0 {
            return Err(Error::NonIntegralWinding(w));
        }
        Ok(r as usize)
    }
}

/// Number of roots (with multiplicity) inside `rect` by the argument principle.
pub fn count_roots_region(qp: &Quasipolynomial, rect: &Rect, contour_points: usize) -> Result<usize> {
    Counter::new(qp, contour_points, rect).count(rect)
}

/// Winding number of `D` around `rect` before rounding.
pub fn winding_number(qp: &Quasipolynomial, rect: &Rect, contour_points: usize) -> Result<f64> {
    Counter::new(qp, contour_points, rect).winding(rect)
}

/// Newton with multiplicity `m`: `s <- s - m D/D'`.
fn polish(qp: &Quasipolynomial, start: Complex64, m: usize, real: bool) -> Option<Complex64> {
    let mut s = start;
    for _ in 0..100 {
        let (v, d, scale) = qp.eval_full(s);
        if v.norm() <= 1e-15 * scale {
            return Some(s);
        }
        if d.norm() == 0.0 {
            return None;
        }
        let mut step = v / d * m as f64;
        if real {
            step.im = 0.0;
        }
        s -= step;
        if !(s.re.is_finite() && s.im.is_finite()) {
            return None;
        }
        if step.norm() <= 1e-15 * s.norm().max(1e-300) {
            return Some(s);
        }
    }
    let (v, _, scale) = qp.eval_full(s);
    (v.norm() <= 1e-10 * scale).then_some(s)
}

struct Search<'a> {
    counter: Counter<'a>,
    leaf: f64,
    found: Vec<SpectralRoot>,
}

/// Rectangles up to this many leaf sides are accepted as one cluster when no split works.
const CLUSTER_LEAF_FACTOR: f64 = 4.0;
/// Roots closer than this (relative to `1 + |s|`) are candidates for a verified merge.
const CLUSTER_RADIUS: f64 = 5e-2;

const SPLITS: [f64; 7] = [0.5, 0.4375, 0.5625, 0.375, 0.625, 0.3125, 0.6875];

impl Search<'_> {
    fn run(&mut self, rect: Rect, count: usize) -> Result<()> {
        if count == 0 {
            return Ok(());
        }
        let side = rect.width().max(rect.height());
        let straddles_axis = rect.im_min <= 0.0 && rect.im_max >= 0.0;
        if count == 1 || side <= self.leaf {
            if let Some(root) = self.try_leaf(&rect, count, straddles_axis, side)? {
                self.found.push(SpectralRoot { location: root, multiplicity: count });
                return Ok(());
            }
        }
        if side <= MIN_SIDE {
            self.accept_center(&rect, count, side);
            return Ok(());
        }
        let mut last_err = None;
        let mut only_contour_hits = true;
        for (frac, across_short) in SPLITS.iter().map(|f| (*f, false)).chain(SPLITS.iter().map(|f| (*f, true))) {
            let (a, b) = rect.split(frac, across_short);
            let ca = match self.counter.count(&a) {
                Ok(c) => c,
                Err(e @ (Error::RootOnContour { .. } | Error::NonIntegralWinding(_))) => {
                    only_contour_hits &= matches!(e, Error::RootOnContour { .. });
                    last_err = Some(e);
                    continue;
                }
                Err(e) => return Err(e),
            };
            let cb = match self.counter.count(&b) {
                Ok(c) => c,
                Err(e @ (Error::RootOnContour { .. } | Error::NonIntegralWinding(_))) => {
                    only_contour_hits &= matches!(e, Error::RootOnContour { .. });
                    last_err = Some(e);
                    continue;
                }
                Err(e) => return Err(e),
            };
            if ca + cb != count {
                last_err = Some(Error::NonIntegralWinding((ca + cb) as f64));
                only_contour_hits = false;
                continue;
            }
            self.run(a, ca)?;
            return self.run(b, cb);
        }
        if side <= self.leaf {
            // Contours cannot get close to a tight cluster of roots; keep the
            // leaf as one location carrying the whole count.
            self.accept_center(&rect, count, side);
            return Ok(());
        }
        // Every split line crossed the numerical neighbourhood of a cluster.
        if let Some(root) = self.cluster_leaf(&rect, count, straddles_axis, side)? {
            self.found.push(SpectralRoot { location: root, multiplicity: count });
            return Ok(());
        }
        // Splits that all touch the zero set mean the rectangle sits inside the
        // rounding neighbourhood of a cluster.
        if side <= CLUSTER_LEAF_FACTOR * self.leaf || (count > 1 && only_contour_hits) {
            self.accept_center(&rect, count, side);
            return Ok(());
        }
        Err(last_err.unwrap_or(Error::BudgetExceeded))
    }

    /// Polishes with multiplicity `count` and accepts when a square around the
    /// result, of some size up to `side`, encloses exactly `count` roots.
    fn cluster_leaf(&mut self, rect: &Rect, count: usize, straddles_axis: bool, side: f64) -> Result<Option<Complex64>> {
        let qp = self.counter.qp;
        let mut starts = vec![rect.center()];
        if straddles_axis {
            starts.insert(0, Complex64::new(rect.center().re, 0.0));
        }
        for start in starts {
            let real = start.im == 0.0;
            let s = polish(qp, start, count, real).unwrap_or(start);
            if !rect.contains(s) {
                continue;
            }
            for half in [0.25 * side, 0.5 * side, side] {
                let local = Rect { re_min: s.re - half, re_max: s.re + half, im_min: s.im - half, im_max: s.im + half };
                match self.counter.count(&local) {
                    Ok(c) if c == count => return Ok(Some(s)),
                    Ok(_) | Err(Error::RootOnContour { .. } | Error::NonIntegralWinding(_)) => {}
                    Err(e) => return Err(e),
                }
            }
        }
        Ok(None)
    }

    fn accept_center(&mut self, rect: &Rect, count: usize, side: f64) {
        let real = rect.im_min <= 0.0 && rect.im_max >= 0.0;
        let c = if real { Complex64::new(rect.center().re, 0.0) } else { rect.center() };
        let r = polish(self.counter.qp, c, count, real).filter(|s| rect.expand(side).contains(*s)).unwrap_or(c);
        self.found.push(SpectralRoot { location: r, multiplicity: count });
    }

    /// Polishes from the center; accepts when the root lies in the rectangle and,
    /// for a cluster, a small box around it holds the whole count.
    fn try_leaf(&mut self, rect: &Rect, count: usize, straddles_axis: bool, side: f64) -> Result<Option<Complex64>> {
        let qp = self.counter.qp;
        let mut starts = vec![rect.center()];
        if straddles_axis {
            starts.insert(0, Complex64::new(rect.center().re, 0.0));
        }
        for start in starts {
            let real = start.im == 0.0;
            let Some(mut s) = polish(qp, start, count, real) else { continue };
            if !real && straddles_axis && s.im.abs() < 1e-7 * (1.0 + s.norm()) {
                if let Some(r) = polish(qp, Complex64::new(s.re, 0.0), count, true) {
                    s = r;
                }
            }
            if !rect.contains(s) {
                continue;
            }
            if count == 1 {
                return Ok(Some(s));
            }
            let half = 0.25 * side;
            let local = Rect { re_min: s.re - half, re_max: s.re + half, im_min: s.im - half, im_max: s.im + half };
            match self.counter.count(&local) {
                Ok(c) if c == count => return Ok(Some(s)),
                Ok(_) | Err(Error::RootOnContour { .. } | Error::NonIntegralWinding(_)) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(None)
    }
}

fn merge_roots(mut roots: Vec<SpectralRoot>, qp: &Quasipolynomial) -> Vec<SpectralRoot> {
    roots.sort_by(|a, b| a.location.re.total_cmp(&b.location.re).then(a.location.im.total_cmp(&b.location.im)));
    let mut out: Vec<SpectralRoot> = Vec::new();
    'outer: for r in roots {
        for o in out.iter_mut() {
            if (o.location - r.location).norm() < MERGE_RADIUS {
                let keep_new = qp.eval(r.location).norm() < qp.eval(o.location).norm();
                if keep_new {
                    o.location = r.location;
                }
                o.multiplicity += r.multiplicity;
                continue 'outer;
            }
        }
        out.push(r);
    }
    out.sort_by(|a, b| a.location.re.total_cmp(&b.location.re).then(a.location.im.total_cmp(&b.location.im)));
    out
}

/// Merges nearby roots when a box around them counts exactly their combined
/// multiplicity. A high-multiplicity root splits into a ring of simple roots
/// under rounding, which the search may report as several locations.
fn merge_clusters(mut roots: Vec<SpectralRoot>, counter: &mut Counter<'_>) -> Vec<SpectralRoot> {
    'restart: loop {
        for i in 0..roots.len() {
            for j in i + 1..roots.len() {
                let (a, b) = (&roots[i], &roots[j]);
                let d = (a.location - b.location).norm();
                if d >= CLUSTER_RADIUS * (1.0 + a.location.norm()) {
                    continue;
                }
                let m = a.multiplicity + b.multiplicity;
                let mean = (a.location * a.multiplicity as f64 + b.location * b.multiplicity as f64) / m as f64;
                for half in [2.0 * d, 8.0 * d, 32.0 * d] {
                    let half = half.max(1e-6);
                    let bx = Rect { re_min: mean.re - half, re_max: mean.re + half, im_min: mean.im - half, im_max: mean.im + half };
                    match counter.count(&bx) {
                        Ok(c) if c == m => {
                            let real = a.location.im == 0.0 || b.location.im == 0.0 || (a.location.im + b.location.im).abs() < 1e-12;
                            let start = if real { Complex64::new(mean.re, 0.0) } else { mean };
                            let loc = polish(counter.qp, start, m, real).filter(|s| bx.contains(*s)).unwrap_or(start);
                            roots[i] = SpectralRoot { location: loc, multiplicity: m };
                            roots.remove(j);
                            continue 'restart;
                        }
                        Ok(c) if c > m => break,
                        _ => {}
                    }
                }
            }
        }
        return roots;
    }
}

/// Real coefficients pair complex roots with their conjugates; a near-axis
/// root without a mate is a real cluster displaced by rounding.
fn snap_unpaired(roots: &mut [SpectralRoot], qp: &Quasipolynomial) {
    for i in 0..roots.len() {
        let z = roots[i].location;
        if z.im == 0.0 || z.im.abs() >= CLUSTER_RADIUS * (1.0 + z.norm()) {
            continue;
        }
        let paired = roots.iter().enumerate().any(|(j, o)| j != i && (o.location - z.conj()).norm() <= 2.0 * z.im.abs());
        if !paired {
            let m = roots[i].multiplicity;
            let start = Complex64::new(z.re, 0.0);
            roots[i].location = polish(qp, start, m, true).filter(|s| (s - z).norm() < CLUSTER_RADIUS * (1.0 + z.norm())).unwrap_or(start);
        }
    }
}

/// All roots of `qp` in `rect` with multiplicities.
///
/// When a root lies on the requested boundary the rectangle is enlarged by a
/// small margin and the enlarged region is reported in the result.
pub fn roots_in_region(qp: &Quasipolynomial, rect: &Rect, grid_density: f64) -> Result<SpectrumResult> {
    if !(grid_density > 0.0) {
        return Err(Error::InvalidArgument("grid density must be positive".into()));
    }
    let base = 1e-3 * (1.0 / qp.delta.max(0.1)).max(1.0);
    let margins = [0.0, base, 10.0 * base, 50.0 * base];
    let mut last_err = Error::BudgetExceeded;
    for eta in margins {
        let region = if eta == 0.0 { *rect } else { rect.expand(eta) };
        let mut search = Search {
            counter: Counter::new(qp, 64, &region),
            leaf: 1.0 / grid_density,
            found: Vec::new(),
        };
        let count = match search.counter.count(&region) {
            Ok(c) => c,
            Err(e @ (Error::RootOnContour { .. } | Error::NonIntegralWinding(_))) => {
                last_err = e;
                continue;
            }
            Err(e) => return Err(e),
        };
        search.run(region, count)?;
        let roots = merge_roots(search.found, qp);
        let mut roots = merge_clusters(roots, &mut search.counter);
        snap_unpaired(&mut roots, qp);
        roots.sort_by(|a, b| a.location.re.total_cmp(&b.location.re).then(a.location.im.total_cmp(&b.location.im)));
        let dominant = roots.iter().map(|r| r.location).max_by(|a, b| a.re.total_cmp(&b.re));
        return Ok(SpectrumResult { roots, region, count_by_argument_principle: count, dominant });
    }
    Err(last_err)
}

/// Root of maximal real part in `rect`.
pub fn rightmost_in_region(qp: &Quasipolynomial, rect: &Rect, grid_density: f64) -> Result<Complex64> {
    roots_in_region(qp, rect, grid_density)?.dominant.ok_or(Error::EmptySpectrum)
}

/// Region used to certify dominance of the designed root at `sigma` (τ-scale):
/// `[σ - 8, 1] x [-Y, Y]` with `Y = max(50, 6π / max(δ, 0.1))`.
pub fn default_region(sigma: f64, delta: f64) -> Rect {
    let y = (6.0 * PI / delta.max(0.1)).max(50.0);
    Rect { re_min: sigma - 8.0, re_max: 1.0, im_min: -y, im_max: y }
}
