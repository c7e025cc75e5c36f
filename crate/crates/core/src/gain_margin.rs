//! Gain-margin bracket for the error dynamics `ε' = A ε − L C ε(t − h) + w`
//! with `|w| ≤ γ_m |ε|`.
//!
//! The upper bound is `l_n*`: the perturbation `w = −l_n ε₁ e_n` cancels the
//! constant term of the quasipolynomial, which then vanishes at `s = 0`.
//! The lower bound is the largest `γ_m` for which the descriptor-method LMI
//! `W ≺ 0`, `P, R, S ≻ 0` is feasible. Feasibility is decided by a
//! primal log-barrier method on `min t  s.t.  F(x) ⪯ t I` with
//! `F = blockdiag(W + εI, εI − P, εI − R, εI − S)`.

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mid::{gain_star, GainVector};

/// Slack matrices of the LMI. `P`, `R`, `S` are symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiVariables {
    pub p: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub p2: DMatrix<f64>,
    pub p3: DMatrix<f64>,
    pub p4: DMatrix<f64>,
}

impl LmiVariables {
    pub fn zeros(n: usize) -> Self {
        let z = DMatrix::zeros(n, n);
        LmiVariables { p: z.clone(), r: z.clone(), s: z.clone(), p2: z.clone(), p3: z.clone(), p4: z }
    }

    pub fn n(&self) -> usize {
        self.p.nrows()
    }

    /// `(name, matrix)` pairs in a fixed order.
    pub fn named(&self) -> [(&'static str, &DMatrix<f64>); 6] {
        [("P", &self.p), ("R", &self.r), ("S", &self.s), ("P2", &self.p2), ("P3", &self.p3), ("P4", &self.p4)]
    }

    fn check(&self, n: usize) -> Result<()> {
        for (_, m) in self.named() {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch { expected: n, got: m.nrows().max(m.ncols()) });
            }
        }
        Ok(())
    }
}

/// Shift matrix `A` of size `n`.
fn shift_matrix(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| if j == i + 1 { 1.0 } else { 0.0 })
}

/// `A₁ = −L C`: only the first column is nonzero.
fn a1_matrix(l: &[f64]) -> DMatrix<f64> {
    let n = l.len();
    DMatrix::from_fn(n, n, |i, j| if j == 0 { -l[i] } else { 0.0 })
}

/// The part of `W` that is linear in the variables.
fn w_linear(l: &[f64], h: f64, v: &LmiVariables) -> DMatrix<f64> {
    let n = l.len();
    let a = shift_matrix(n);
    let a1 = a1_matrix(l);
    let at = a.transpose();
    let (p, r, s) = (&v.p, &v.r, &v.s);
    let (p2t, p3t, p4t) = (v.p2.transpose(), v.p3.transpose(), v.p4.transpose());

    let w11 = &at * &v.p2 + &p2t * &a + s - r;
    let w12 = p - &p2t + &at * &v.p3;
    let w13 = &p2t * &a1 + r;
    let w14 = &p2t + &at * &v.p4;
    let w22 = -&v.p3 - &p3t + r * (h * h);
    let w23 = &p3t * &a1;
    let w24 = &p3t - &v.p4;
    let w33 = -s - r;
    let w34 = a1.transpose() * &v.p4;
    let w44 = &p4t + &v.p4;

    let mut w = DMatrix::zeros(4 * n, 4 * n);
    let upper = [
        (0, 0, &w11),
        (0, 1, &w12),
        (0, 2, &w13),
        (0, 3, &w14),
        (1, 1, &w22),
        (1, 2, &w23),
        (1, 3, &w24),
        (2, 2, &w33),
        (2, 3, &w34),
        (3, 3, &w44),
    ];
    for (bi, bj, blk) in upper {
        w.view_mut((bi * n, bj * n), (n, n)).copy_from(blk);
        if bi != bj {
            w.view_mut((bj * n, bi * n), (n, n)).copy_from(&blk.transpose());
        }
    }
    w
}

/// The symmetric `4n × 4n` descriptor-method matrix `W` with `A₁ = −L C`.
pub fn assemble_w(gain: &GainVector, h: f64, gamma_m: f64, v: &LmiVariables) -> Result<DMatrix<f64>> {
    let n = gain.n();
    v.check(n)?;
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("delay must be positive, got {h}")));
    }
    let mut w = w_linear(&gain.l, h, v);
    for i in 0..n {
        w[(i, i)] += gamma_m * gamma_m;
        w[(3 * n + i, 3 * n + i)] -= 1.0;
    }
    Ok(w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Block {
    P,
    R,
    S,
    P2,
    P3,
    P4,
}

fn layout(n: usize) -> Vec<(Block, usize, usize)> {
    let mut v = Vec::new();
    for b in [Block::P, Block::R, Block::S] {
        for i in 0..n {
            for j in i..n {
                v.push((b, i, j));
            }
        }
    }
    for b in [Block::P2, Block::P3, Block::P4] {
        for i in 0..n {
            for j in 0..n {
                v.push((b, i, j));
            }
        }
    }
    v
}

fn variables_from(n: usize, lay: &[(Block, usize, usize)], x: &[f64]) -> LmiVariables {
    let mut v = LmiVariables::zeros(n);
    for (&(b, i, j), &val) in lay.iter().zip(x) {
        let m = match b {
            Block::P => &mut v.p,
            Block::R => &mut v.r,
            Block::S => &mut v.s,
            Block::P2 => &mut v.p2,
            Block::P3 => &mut v.p3,
            Block::P4 => &mut v.p4,
        };
        m[(i, j)] += val;
        if matches!(b, Block::P | Block::R | Block::S) && i != j {
            m[(j, i)] += val;
        }
    }
    v
}

/// `F(v) = blockdiag(W + εI, εI − P, εI − R, εI − S)`.
fn full_matrix(l: &[f64], h: f64, v: &LmiVariables, constant: Option<(f64, f64)>) -> DMatrix<f64> {
    let n = l.len();
    let mut f = DMatrix::zeros(7 * n, 7 * n);
    f.view_mut((0, 0), (4 * n, 4 * n)).copy_from(&w_linear(l, h, v));
    f.view_mut((4 * n, 4 * n), (n, n)).copy_from(&(-&v.p));
    f.view_mut((5 * n, 5 * n), (n, n)).copy_from(&(-&v.r));
    f.view_mut((6 * n, 6 * n), (n, n)).copy_from(&(-&v.s));
    if let Some((gamma, eps)) = constant {
        for i in 0..7 * n {
            f[(i, i)] += eps;
        }
        for i in 0..n {
            f[(i, i)] += gamma * gamma;
            f[(3 * n + i, 3 * n + i)] -= 1.0;
        }
    }
    f
}

/// Solver limits for [`lmi_feasible`].
#[derive(Debug, Clone, Copy)]
pub struct BarrierOptions {
    /// Bound on every free variable entry.
    pub bound: f64,
    pub max_outer: usize,
    pub max_newton: usize,
    /// Newton steps per centering.
    pub max_inner: usize,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        BarrierOptions { bound: 1e6, max_outer: 60, max_newton: 6000, max_inner: 100 }
    }
}

#[derive(Debug, Clone)]
pub enum Verdict {
    Feasible(LmiVariables),
    /// The duality-gap bound shows no solution with all entries inside the box.
    BoxInfeasible,
    Unknown,
}

#[derive(Debug, Clone)]
pub struct LmiOutcome {
    pub verdict: Verdict,
    /// `λ_max(F)` at the last iterate.
    pub lambda_max: f64,
    pub newton_steps: usize,
}

impl LmiOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self.verdict, Verdict::Feasible(_))
    }

    pub fn certificate(&self) -> Option<&LmiVariables> {
        match &self.verdict {
            Verdict::Feasible(v) => Some(v),
            _ => None,
        }
    }
}

fn sparse_entries(m: &DMatrix<f64>) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if v != 0.0 {
                out.push((i, j, v));
            }
        }
    }
    out
}

fn max_eig(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigenvalues().max()
}

/// Decides feasibility of `W ⪯ −εI`, `P, R, S ⪰ εI`.
pub fn lmi_feasible(gain: &GainVector, h: f64, gamma_m: f64, eps: f64) -> Result<LmiOutcome> {
    lmi_feasible_with(gain, h, gamma_m, eps, &BarrierOptions::default())
}

pub fn lmi_feasible_with(gain: &GainVector, h: f64, gamma_m: f64, eps: f64, opts: &BarrierOptions) -> Result<LmiOutcome> {
    if !(gamma_m >= 0.0) || !gamma_m.is_finite() {
        return Err(Error::InvalidArgument(format!("gamma_m must be nonnegative, got {gamma_m}")));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("delay must be positive, got {h}")));
    }
    let n = gain.n();
    let l = &gain.l;
    let lay = layout(n);
    let m = lay.len();
    let dim = 7 * n;
    let f0 = full_matrix(l, h, &LmiVariables::zeros(n), Some((gamma_m, eps)));
    let basis: Vec<Vec<(usize, usize, f64)>> = (0..m)
        .map(|k| {
            let mut e = vec![0.0; m];
            e[k] = 1.0;
            sparse_entries(&full_matrix(l, h, &variables_from(n, &lay, &e), None))
        })
        .collect();
    let eval_f = |x: &[f64]| -> DMatrix<f64> {
        let mut f = f0.clone();
        for (k, ents) in basis.iter().enumerate() {
            if x[k] != 0.0 {
                for &(i, j, c) in ents {
                    f[(i, j)] += c * x[k];
                }
            }
        }
        f
    };
    let b2 = opts.bound * opts.bound;
    let nu = (dim + 2 * m) as f64;

    // Barrier value, or None outside the domain.
    let barrier = |x: &[f64], t: f64, mu: f64| -> Option<f64> {
        if x.iter().any(|v| v.abs() >= opts.bound) {
            return None;
        }
        let z = DMatrix::identity(dim, dim) * t - eval_f(x);
        let ch = z.cholesky()?;
        let logdet: f64 = ch.l().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
        Some(t / mu - logdet - x.iter().map(|v| (b2 - v * v).ln()).sum::<f64>())
    };

    let mut x = vec![0.0; m];
    let mut t = max_eig(&f0) + 1.0;
    let mut mu = 1.0;
    let mut steps = 0usize;
    let feasible = |x: &[f64]| LmiOutcome {
        verdict: Verdict::Feasible(variables_from(n, &lay, x)),
        lambda_max: max_eig(&eval_f(x)),
        newton_steps: 0,
    };

    for _ in 0..opts.max_outer {
        for _ in 0..opts.max_inner {
            if t < 0.0 {
                let mut out = feasible(&x);
                // t bounds λ_max only up to rounding; confirm on the assembled matrix.
                if out.lambda_max < 0.0 {
                    out.newton_steps = steps;
                    return Ok(out);
                }
            }
            if steps >= opts.max_newton {
                return Ok(LmiOutcome { verdict: Verdict::Unknown, lambda_max: max_eig(&eval_f(&x)), newton_steps: steps });
            }
            steps += 1;
            let z = DMatrix::identity(dim, dim) * t - eval_f(&x);
            let Some(ch) = z.clone().cholesky() else { break };
            let zi = ch.inverse();
            let zi2 = &zi * &zi;
            let mut g = DVector::zeros(m + 1);
            let mut hess = DMatrix::zeros(m + 1, m + 1);
            for k in 0..m {
                let mut gk = 0.0;
                let mut hk = 0.0;
                for &(i, j, c) in &basis[k] {
                    gk += c * zi[(j, i)];
                    hk -= c * zi2[(j, i)];
                }
                let d = b2 - x[k] * x[k];
                g[k] = gk + 2.0 * x[k] / d;
                hess[(k, m)] = hk;
                hess[(m, k)] = hk;
                hess[(k, k)] += 2.0 * (b2 + x[k] * x[k]) / (d * d);
            }
            g[m] = 1.0 / mu - zi.trace();
            hess[(m, m)] = zi2.trace();
            for a in 0..m {
                for b in a..m {
                    let mut s = 0.0;
                    for &(i, j, c) in &basis[a] {
                        for &(p, q, e) in &basis[b] {
                            s += c * e * zi[(j, p)] * zi[(q, i)];
                        }
                    }
                    hess[(a, b)] += s;
                    if a != b {
                        hess[(b, a)] += s;
                    }
                }
            }
            let d = match hess.clone().cholesky() {
                Some(c) => -c.solve(&g),
                None => match hess.lu().solve(&g) {
                    Some(v) => -v,
                    None => break,
                },
            };
            let dec = -g.dot(&d);
            if !(dec > 1e-10) {
                break;
            }
            let f_cur = barrier(&x, t, mu).unwrap_or(f64::INFINITY);
            let mut a = 1.0;
            let mut moved = false;
            while a > 1e-12 {
                let xn: Vec<f64> = (0..m).map(|k| x[k] + a * d[k]).collect();
                let tn = t + a * d[m];
                if let Some(fv) = barrier(&xn, tn, mu) {
                    if fv <= f_cur - 0.25 * a * dec {
                        x = xn;
                        t = tn;
                        moved = true;
                        break;
                    }
                }
                a *= 0.5;
            }
            if !moved {
                break;
            }
        }
        if t - mu * nu > 0.0 {
            return Ok(LmiOutcome { verdict: Verdict::BoxInfeasible, lambda_max: max_eig(&eval_f(&x)), newton_steps: steps });
        }
        mu *= 0.2;
    }
    Ok(LmiOutcome { verdict: Verdict::Unknown, lambda_max: max_eig(&eval_f(&x)), newton_steps: steps })
}

/// Eigenvalue check of a certificate, independent of the solver.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CertificateCheck {
    pub lambda_max_w: f64,
    pub lambda_min_p: f64,
    pub lambda_min_r: f64,
    pub lambda_min_s: f64,
    pub eps: f64,
}

impl CertificateCheck {
    /// `λ_max(W) ≤ −ε/2` and `λ_min(P), λ_min(R), λ_min(S) ≥ ε/2`.
    pub fn passes(&self) -> bool {
        let half = 0.5 * self.eps;
        self.lambda_max_w <= -half && self.lambda_min_p >= half && self.lambda_min_r >= half && self.lambda_min_s >= half
    }
}

pub fn check_certificate(gain: &GainVector, h: f64, gamma_m: f64, eps: f64, v: &LmiVariables) -> Result<CertificateCheck> {
    let w = assemble_w(gain, h, gamma_m, v)?;
    let sym = |m: &DMatrix<f64>| (m + m.transpose()) * 0.5;
    let min_eig = |m: &DMatrix<f64>| sym(m).symmetric_eigenvalues().min();
    Ok(CertificateCheck {
        lambda_max_w: max_eig(&w),
        lambda_min_p: min_eig(&v.p),
        lambda_min_r: min_eig(&v.r),
        lambda_min_s: min_eig(&v.s),
        eps,
    })
}

fn exact(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite value")
}

/// Sylvester test in exact arithmetic: every pivot of the symmetric
/// elimination is positive.
fn positive_definite_exact(m: Vec<Vec<BigRational>>) -> bool {
    let mut a = m;
    let k = a.len();
    for p in 0..k {
        let piv = a[p][p].clone();
        if !piv.is_positive() {
            return false;
        }
        for i in p + 1..k {
            if a[i][p].is_zero() {
                continue;
            }
            let f = &a[i][p] / &piv;
            for j in p + 1..k {
                let delta = &f * &a[p][j];
                a[i][j] -= delta;
            }
        }
    }
    true
}

/// Exact-rational version of [`check_certificate`]: `−W − (ε/2)I ≻ 0` and
/// `X − (ε/2)I ≻ 0` for `X ∈ {P, R, S}`, with every double treated as the
/// rational it represents.
pub fn verify_certificate_exact(gain: &GainVector, h: f64, gamma_m: f64, eps: f64, v: &LmiVariables) -> Result<bool> {
    let n = gain.n();
    v.check(n)?;
    let half = exact(eps) / BigRational::from_integer(BigInt::from(2));
    let q = |m: &DMatrix<f64>| -> Vec<Vec<BigRational>> {
        (0..n).map(|i| (0..n).map(|j| exact(m[(i, j)])).collect()).collect()
    };
    let mul = |a: &[Vec<BigRational>], b: &[Vec<BigRational>]| -> Vec<Vec<BigRational>> {
        let k = a.len();
        (0..k)
            .map(|i| (0..k).map(|j| (0..k).fold(BigRational::zero(), |s, t| s + &a[i][t] * &b[t][j])).collect())
            .collect()
    };
    let tr = |a: &[Vec<BigRational>]| -> Vec<Vec<BigRational>> {
        let k = a.len();
        (0..k).map(|i| (0..k).map(|j| a[j][i].clone()).collect()).collect()
    };
    let add = |a: &[Vec<BigRational>], b: &[Vec<BigRational>], s: i32| -> Vec<Vec<BigRational>> {
        a.iter()
            .zip(b)
            .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| if s > 0 { x + y } else { x - y }).collect())
            .collect()
    };
    let zero = vec![vec![BigRational::zero(); n]; n];
    let a = q(&shift_matrix(n));
    let a1 = q(&a1_matrix(&gain.l));
    let (p, r, s) = (q(&v.p), q(&v.r), q(&v.s));
    let (p2, p3, p4) = (q(&v.p2), q(&v.p3), q(&v.p4));
    let (at, p2t, p3t, p4t) = (tr(&a), tr(&p2), tr(&p3), tr(&p4));
    let hh = exact(h) * exact(h);
    let gg = exact(gamma_m) * exact(gamma_m);

    let mut w11 = add(&add(&mul(&at, &p2), &mul(&p2t, &a), 1), &add(&s, &r, -1), 1);
    let w12 = add(&add(&p, &p2t, -1), &mul(&at, &p3), 1);
    let w13 = add(&mul(&p2t, &a1), &r, 1);
    let w14 = add(&p2t, &mul(&at, &p4), 1);
    let mut w22 = add(&zero, &add(&p3, &p3t, 1), -1);
    for i in 0..n {
        for j in 0..n {
            w22[i][j] += &hh * &r[i][j];
        }
        w11[i][i] += &gg;
    }
    let w23 = mul(&p3t, &a1);
    let w24 = add(&p3t, &p4, -1);
    let w33 = add(&zero, &add(&s, &r, 1), -1);
    let w34 = mul(&tr(&a1), &p4);
    let mut w44 = add(&p4t, &p4, 1);
    for (i, row) in w44.iter_mut().enumerate() {
        row[i] -= BigRational::from_integer(BigInt::from(1));
    }
    let blocks = [[&w11, &w12, &w13, &w14], [&w12, &w22, &w23, &w24], [&w13, &w23, &w33, &w34], [&w14, &w24, &w34, &w44]];
    let mut neg_w = vec![vec![BigRational::zero(); 4 * n]; 4 * n];
    for bi in 0..4 {
        for bj in 0..4 {
            for i in 0..n {
                for j in 0..n {
                    // Lower blocks are transposes of the upper ones.
                    let val = if bj >= bi { blocks[bi][bj][i][j].clone() } else { blocks[bj][bi][j][i].clone() };
                    neg_w[bi * n + i][bj * n + j] = -val;
                }
            }
        }
    }
    for (i, row) in neg_w.iter_mut().enumerate() {
        row[i] -= &half;
    }
    if !positive_definite_exact(neg_w) {
        return Ok(false);
    }
    for x in [p, r, s] {
        let mut m = x;
        for (i, row) in m.iter_mut().enumerate() {
            row[i] -= &half;
        }
        // Symmetric by construction of the layout; the test uses the upper triangle.
        if !positive_definite_exact(m) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `l_n*`: the gain margin of `L*` cannot exceed its last entry.
pub fn upper_bound_gamma(n: usize) -> Result<f64> {
    Ok(*gain_star(n)?.l.last().expect("nonempty gain"))
}

/// Strictness margin used by [`max_gain_margin`]: `1e-6 (l_n*)²`.
pub fn default_eps(n: usize) -> Result<f64> {
    let u = upper_bound_gamma(n)?;
    Ok(1e-6 * u * u)
}

#[derive(Debug, Clone)]
pub struct MarginBracket {
    pub n: usize,
    /// Largest certified `γ_m`; zero when no certificate was found.
    pub lower: f64,
    pub upper: f64,
    pub certificate: Option<LmiVariables>,
    pub eps: f64,
    /// Feasibility problems solved during the bisection.
    pub solves: usize,
}

/// Desk-scale limit for the LMI bisection.
pub const MAX_LMI_ORDER: usize = 8;

/// Bisection over `γ_m ∈ [0, l_n*]` until the bracket is narrower than
/// `tol · l_n*`. Non-feasible verdicts only lower the upper end of the
/// search interval; the reported `upper` is always `l_n*`.
pub fn max_gain_margin(n: usize, tol: f64) -> Result<MarginBracket> {
    if n == 0 || n > MAX_LMI_ORDER {
        return Err(Error::InvalidArgument(format!("order must be in 1..={MAX_LMI_ORDER}, got {n}")));
    }
    if !(tol > 0.0) || tol >= 1.0 {
        return Err(Error::InvalidArgument(format!("relative tolerance must be in (0, 1), got {tol}")));
    }
    let gain = gain_star(n)?;
    let upper = *gain.l.last().unwrap();
    let eps = default_eps(n)?;
    let (mut lo, mut hi) = (0.0, upper);
    let mut cert = None;
    let mut solves = 0;
    while hi - lo > tol * upper {
        let mid = 0.5 * (lo + hi);
        let out = lmi_feasible(&gain, 1.0, mid, eps)?;
        solves += 1;
        match out.verdict {
            Verdict::Feasible(v) => {
                lo = mid;
                cert = Some(v);
            }
            _ => hi = mid,
        }
    }
    Ok(MarginBracket { n, lower: lo, upper, certificate: cert, eps, solves })
}

/// Sizing of the sub-predictor chain.
#[derive(Debug, Clone, Serialize)]
pub struct ChainDesign {
    pub n: usize,
    pub gamma_phi: f64,
    pub gamma_m: f64,
    pub h: f64,
    pub lambda_star: f64,
    pub n_sub: usize,
    pub lambda: f64,
    /// Dominant root in t-units, `σ* λ`.
    pub sigma_star_per_t: f64,
}

/// `λ* = max(γ_Φ/γ_m, 1)`, `N = max(1, ⌈λ* h⌉)`, `λ = N/h`.
pub fn design_chain(n: usize, gamma_phi: f64, h: f64, gamma_m: f64) -> Result<ChainDesign> {
    if !(gamma_m > 0.0) {
        return Err(Error::InvalidArgument(format!("gamma_m must be positive, got {gamma_m}")));
    }
    if !(gamma_phi >= 0.0) || !gamma_phi.is_finite() {
        return Err(Error::InvalidArgument(format!("gamma_phi must be nonnegative, got {gamma_phi}")));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidArgument(format!("delay must be positive, got {h}")));
    }
    let sigma = gain_star(n)?.sigma_star.expect("synthesized gain");
    let lambda_star = (gamma_phi / gamma_m).max(1.0);
    let prod = lambda_star * h;
    // Guard against a product that is an integer up to rounding.
    let n_sub = ((prod * (1.0 - 1e-12)).ceil() as usize).max(1);
    let lambda = n_sub as f64 / h;
    Ok(ChainDesign { n, gamma_phi, gamma_m, h, lambda_star, n_sub, lambda, sigma_star_per_t: sigma * lambda })
}
