//! Multiplicity-induced-dominance gain synthesis.
//!
//! For `D(s) = s^n + Q(s) e^{-δ s}` with `Q(s) = l_1 s^{n-1} + ... + l_n`,
//! the gain `L*` places a root of multiplicity `n + 1` at the rightmost root
//! `σ*` of `q(σ) = Σ C(n,j) n!/j! σ^j` (for `δ = 1`). The derivative
//! conditions `D^{(k)}(s) = 0` are equivalent to
//! `Q^{(k)}(s) = -R_k(s, δ) e^{δ s}` for `k = 0..n`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::RealPolynomial;
use crate::sturm::{Dyadic, IntPoly, SturmSequence};

pub const MAX_ORDER: usize = 60;

/// Bits of the exact bracket around `σ*` used when evaluating `L*`.
const SIGMA_BITS: u32 = 240;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainVector {
    /// `l[0]` is `l_1`.
    pub l: Vec<f64>,
    /// Assigned root in the `δ = 1` normalization, when the gain came from synthesis.
    pub sigma_star: Option<f64>,
    /// Delay for which the gain was designed (`L = Λ_{1/δ} L*`).
    pub design_delta: f64,
}

impl GainVector {
    pub fn new(l: Vec<f64>) -> Result<Self> {
        if l.is_empty() {
            return Err(Error::InvalidArgument("empty gain vector".into()));
        }
        if l.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite gain".into()));
        }
        if *l.last().unwrap() == 0.0 {
            return Err(Error::InvalidArgument("l_n must be nonzero".into()));
        }
        Ok(GainVector { l, sigma_star: None, design_delta: 1.0 })
    }

    pub fn n(&self) -> usize {
        self.l.len()
    }

    /// Location of the assigned root for this gain at its design delay.
    pub fn assigned_root(&self) -> Option<f64> {
        self.sigma_star.map(|s| s / self.design_delta)
    }

    /// `Q(s)` in ascending powers: coefficient of `s^j` is `l_{n-j}`.
    pub fn q_polynomial(&self) -> RealPolynomial {
        RealPolynomial::new(self.l.iter().rev().copied().collect())
    }

    /// Delay-free characteristic polynomial `s^n + l_1 s^{n-1} + ... + l_n`.
    pub fn delay_free_polynomial(&self) -> RealPolynomial {
        let mut c: Vec<f64> = self.l.iter().rev().copied().collect();
        c.push(1.0);
        RealPolynomial::new(c)
    }
}

fn check_order(n: usize) -> Result<()> {
    if n == 0 || n > MAX_ORDER {
        return Err(Error::InvalidArgument(format!("order n = {n} outside 1..={MAX_ORDER}")));
    }
    Ok(())
}

/// Pascal triangle rows `0..=n`.
fn binomials(n: usize) -> Vec<Vec<BigInt>> {
    let mut rows: Vec<Vec<BigInt>> = vec![vec![BigInt::one()]];
    for m in 1..=n {
        let prev = &rows[m - 1];
        let mut row = vec![BigInt::one(); m + 1];
        for j in 1..m {
            row[j] = &prev[j - 1] + &prev[j];
        }
        rows.push(row);
    }
    rows
}

fn factorials(n: usize) -> Vec<BigInt> {
    let mut f = vec![BigInt::one()];
    for m in 1..=n {
        let next = &f[m - 1] * BigInt::from(m);
        f.push(next);
    }
    f
}

fn to_real(c: &[BigInt]) -> RealPolynomial {
    RealPolynomial::new(c.iter().map(|x| x.to_f64().unwrap_or(f64::INFINITY)).collect())
}

/// Exact coefficients of `q`, ascending.
pub fn q_poly_exact(n: usize) -> Result<Vec<BigInt>> {
    check_order(n)?;
    let b = binomials(n);
    let f = factorials(n);
    Ok((0..=n).map(|j| &b[n][j] * &f[n] / &f[j]).collect())
}

pub fn q_poly(n: usize) -> Result<RealPolynomial> {
    Ok(to_real(&q_poly_exact(n)?))
}

/// Exact terms `(power of s, power of δ, coefficient)` of `R_k(s, δ)`.
pub fn rk_terms(n: usize, k: usize) -> Result<Vec<(usize, usize, BigInt)>> {
    if k > n {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds n = {n}")));
    }
    let b = binomials(n);
    let f = factorials(k);
    Ok((1..=k + 1).map(|i| (n - k + i - 1, i - 1, &b[n][k + 1 - i] * &f[k] / &f[i - 1])).collect())
}

/// `R_k(·, δ)` as a polynomial in `s`.
pub fn rk_poly(n: usize, k: usize, delta: f64) -> Result<RealPolynomial> {
    if delta < 0.0 {
        return Err(Error::InvalidArgument("delta must be nonnegative".into()));
    }
    let mut c = vec![0.0; n + 1];
    for (ps, pd, coef) in rk_terms(n, k)? {
        c[ps] += coef.to_f64().unwrap_or(f64::INFINITY) * delta.powi(pd as i32);
    }
    Ok(RealPolynomial::new(c))
}

/// Number of distinct negative real roots and whether all roots are simple.
pub fn sturm_root_certificate(p: &RealPolynomial) -> Result<(usize, bool)> {
    if p.degree().unwrap_or(0) == 0 {
        return Err(Error::InvalidArgument("constant polynomial".into()));
    }
    let s = SturmSequence::new(p);
    Ok((s.count_below_or_at(0.0) - usize::from(p.eval(0.0) == 0.0), s.is_squarefree()))
}

pub fn rightmost_root(p: &RealPolynomial) -> Result<f64> {
    p.rightmost_real_root()
}

/// Narrow exact bracket `(a, b]` around the largest root of the integer polynomial `q`.
fn sigma_star_bracket(q: &[BigInt], approx: f64) -> (Dyadic, Dyadic) {
    let sturm = SturmSequence::from_int(IntPoly::new(q.to_vec()));
    let mut w = 1e-12 * (1.0 + approx.abs());
    let mut bracket = None;
    for _ in 0..60 {
        let a = Dyadic::from_f64(approx - w);
        let b = Dyadic::from_f64(approx + w);
        if sturm.count_above_dyadic(&b) == 0 && sturm.count_in_dyadic(&a, &b) == 1 {
            bracket = Some((a, b));
            break;
        }
        w *= 4.0;
    }
    let (a, b) = bracket.unwrap_or_else(|| {
        let bound = sturm.root_bound();
        let lo = Dyadic { num: -bound.num.clone(), shift: bound.shift };
        let iv = sturm.isolate(&lo, &bound, 1.0);
        iv.last().cloned().expect("q has real roots")
    });
    sturm.refine(a, b, SIGMA_BITS)
}

/// The MID gain `L*` for `δ = 1`.
///
/// `σ*` is located in floating point, then bracketed exactly and refined to
/// a few hundred bits. The double-sum brackets of the closed form are summed
/// exactly at that rational point; only the final factor `σ^k e^σ` is applied
/// in floating point, so the alternating sums do not lose precision.
pub fn gain_star(n: usize) -> Result<GainVector> {
    let q = q_poly_exact(n)?;
    let approx = rightmost_root(&to_real(&q))?;
    let (a, b) = sigma_star_bracket(&q, approx);
    let sig = Dyadic::midpoint(&a, &b);
    let sigma = sig.to_f64();

    let bin = binomials(n);
    let fact = factorials(n);
    let unit = BigInt::one() << sig.shift as usize;
    // pw[i] = σ^{i-1}/(i-1)! times the common denominator (n-1)! 2^{shift (n-1)}.
    let mut pw = vec![BigInt::zero(); n + 1];
    let mut num_pow = BigInt::one();
    for (i, slot) in pw.iter_mut().enumerate().skip(1) {
        let den_pow = unit.pow((n - i) as u32);
        *slot = &num_pow * den_pow * &fact[n - 1] / &fact[i - 1];
        num_pow *= &sig.num;
    }
    // t[j] = Σ_{i=1}^{j} C(n, j-i) pw[i]
    let t: Vec<BigInt> = (0..=n)
        .map(|j| (1..=j).fold(BigInt::zero(), |acc, i| acc + &bin[n][j - i] * &pw[i]))
        .collect();
    let denom = &fact[n - 1] * unit.pow((n - 1) as u32);

    let mut l = Vec::with_capacity(n);
    for k in 1..=n {
        let mut s = BigInt::zero();
        for (j, tj) in t.iter().enumerate().skip(n - k + 1) {
            let term = &bin[j - 1][n - k] * tj;
            if (n + j + k) % 2 == 0 {
                s += term;
            } else {
                s -= term;
            }
        }
        let bracket = BigRational::new(s, denom.clone()).to_f64().unwrap_or(f64::NAN);
        l.push(bracket * sigma.powi(k as i32) * sigma.exp());
    }
    Ok(GainVector { l, sigma_star: Some(sigma), design_delta: 1.0 })
}

/// Gains from the derivative conditions at a real point `s` and delay `δ`,
/// by back-substitution on the upper-triangular system `M(s) J L = -R(s, δ) e^{δ s}`.
pub fn gain_from_derivative_conditions(n: usize, s: f64, delta: f64) -> Result<Vec<f64>> {
    check_order(n)?;
    let e = (delta * s).exp();
    let fact: Vec<f64> = (0..=n).scan(1.0, |acc, m| {
        if m > 0 {
            *acc *= m as f64;
        }
        Some(*acc)
    }).collect();
    // c[j] multiplies s^{j-1} in Q.
    let mut c = vec![0.0; n + 1];
    for i in (1..=n).rev() {
        let mut rhs = -rk_poly(n, i - 1, delta)?.eval(s) * e;
        for j in i + 1..=n {
            rhs -= fact[j - 1] / fact[j - i] * s.powi((j - i) as i32) * c[j];
        }
        c[i] = rhs / fact[i - 1];
    }
    Ok((1..=n).map(|k| c[n - k + 1]).collect())
}

/// `Λ_{1/δ} L`: `l_k / δ^k`.
pub fn scale_gain(gain: &GainVector, delta: f64) -> Result<GainVector> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidArgument("delta must be positive".into()));
    }
    Ok(GainVector {
        l: gain.l.iter().enumerate().map(|(i, v)| v / delta.powi(i as i32 + 1)).collect(),
        sigma_star: gain.sigma_star,
        design_delta: gain.design_delta * delta,
    })
}

/// Number of consecutive derivative conditions that hold at the real point `s0`.
///
/// Condition `k` compares `R_k(s0, δ) e^{δ s0}` against `-Q^{(k)}(s0)`, with the
/// tolerance relative to the largest individual term at `s0`.
pub fn multiplicity_at(gain: &GainVector, delta: f64, s0: f64) -> usize {
    let n = gain.n();
    let e = (delta * s0).exp();
    let mut q = gain.q_polynomial();
    for k in 0..=n {
        let Ok(terms) = rk_terms(n, k) else { return k };
        let mut r = 0.0;
        let mut scale: f64 = 0.0;
        for (ps, pd, coef) in terms {
            let v = coef.to_f64().unwrap_or(f64::INFINITY) * delta.powi(pd as i32) * s0.powi(ps as i32) * e;
            r += v;
            scale = scale.max(v.abs());
        }
        let mut qv = 0.0;
        for (j, c) in q.coeffs().iter().enumerate() {
            let v = c * s0.powi(j as i32);
            qv += v;
            scale = scale.max(v.abs());
        }
        let residual = (r + qv).abs();
        if !(residual <= 1e-8 * scale) {
            return k;
        }
        q = q.derivative();
    }
    n + 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q_small_orders() {
        assert_eq!(q_poly(1).unwrap().coeffs(), &[1.0, 1.0]);
        assert_eq!(q_poly(2).unwrap().coeffs(), &[2.0, 4.0, 1.0]);
        assert_eq!(q_poly(3).unwrap().coeffs(), &[6.0, 18.0, 9.0, 1.0]);
        assert!(q_poly(0).is_err());
        assert!(q_poly(61).is_err());
    }

    #[test]
    fn rk_examples() {
        assert_eq!(rk_poly(4, 0, 0.7).unwrap().coeffs(), &[0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(rk_poly(2, 2, 1.0).unwrap().coeffs(), &[2.0, 4.0, 1.0]);
        assert_eq!(rk_poly(2, 1, 0.0).unwrap().coeffs(), &[0.0, 2.0]);
        assert!(rk_poly(2, 3, 1.0).is_err());
    }

    #[test]
    fn certificate_examples() {
        assert_eq!(sturm_root_certificate(&q_poly(2).unwrap()).unwrap(), (2, true));
        assert_eq!(sturm_root_certificate(&RealPolynomial::new(vec![1.0, 0.0, 1.0])).unwrap(), (0, true));
        assert_eq!(sturm_root_certificate(&RealPolynomial::new(vec![1.0, 2.0, 1.0])).unwrap(), (1, false));
    }

    #[test]
    fn gain_star_n1_n2() {
        let g = gain_star(1).unwrap();
        assert!((g.l[0] - (-1f64).exp()).abs() < 1e-16);
        let g = gain_star(2).unwrap();
        assert!((g.sigma_star.unwrap() - (2f64.sqrt() - 2.0)).abs() < 1e-15);
        assert!((g.l[0] - 0.4612).abs() < 5e-5);
        assert!((g.l[1] - 0.0791).abs() < 5e-5);
    }

    #[test]
    fn scaling_examples() {
        let g = gain_star(2).unwrap();
        let s = scale_gain(&g, 0.25).unwrap();
        assert!((s.l[0] - g.l[0] * 4.0).abs() < 1e-14);
        assert!((s.l[1] - g.l[1] * 16.0).abs() < 1e-14);
        assert_eq!(scale_gain(&g, 1.0).unwrap().l, g.l);
        assert!(scale_gain(&g, 0.0).is_err());
    }

    #[test]
    fn multiplicity_examples() {
        let g = gain_star(2).unwrap();
        assert_eq!(multiplicity_at(&g, 1.0, g.sigma_star.unwrap()), 3);
        let g1 = gain_star(1).unwrap();
        assert_eq!(multiplicity_at(&g1, 1.0, -1.0), 2);
        let plain = GainVector::new(vec![1.0, 1.0]).unwrap();
        assert_eq!(multiplicity_at(&plain, 1.0, 0.0), 0);
    }
}
