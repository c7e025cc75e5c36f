//! Exact Sturm sequences over the integers, evaluated at dyadic rationals.
//!
//! Floating-point coefficients are converted exactly (every finite `f64` is a
//! dyadic rational), so root counts are certified rather than estimated.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::poly::RealPolynomial;

/// The rational number `num / 2^shift`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dyadic {
    pub num: BigInt,
    pub shift: u32,
}

impl Dyadic {
    pub fn from_f64(x: f64) -> Self {
        assert!(x.is_finite(), "dyadic conversion of non-finite value");
        if x == 0.0 {
            return Dyadic { num: BigInt::zero(), shift: 0 };
        }
        let bits = x.to_bits();
        let sign = if bits >> 63 == 0 { 1i64 } else { -1 };
        let exp_bits = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (mant, exp) = if exp_bits == 0 { (frac, -1074) } else { (frac | (1u64 << 52), exp_bits - 1075) };
        let num = BigInt::from(mant) * sign;
        if exp >= 0 {
            Dyadic { num: num << exp as usize, shift: 0 }.normalized()
        } else {
            Dyadic { num, shift: (-exp) as u32 }.normalized()
        }
    }

    fn normalized(mut self) -> Self {
        if self.num.is_zero() {
            self.shift = 0;
            return self;
        }
        let tz = self.num.trailing_zeros().unwrap_or(0).min(self.shift as u64) as u32;
        self.num >>= tz as usize;
        self.shift -= tz;
        self
    }

    fn aligned(&self, shift: u32) -> BigInt {
        &self.num << (shift - self.shift) as usize
    }

    pub fn midpoint(a: &Dyadic, b: &Dyadic) -> Dyadic {
        let s = a.shift.max(b.shift);
        Dyadic { num: a.aligned(s) + b.aligned(s), shift: s + 1 }.normalized()
    }

    pub fn sub(&self, other: &Dyadic) -> Dyadic {
        let s = self.shift.max(other.shift);
        Dyadic { num: self.aligned(s) - other.aligned(s), shift: s }.normalized()
    }

    pub fn to_rational(&self) -> BigRational {
        BigRational::new(self.num.clone(), BigInt::one() << self.shift as usize)
    }

    pub fn to_f64(&self) -> f64 {
        self.to_rational().to_f64().unwrap_or(f64::NAN)
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let s = self.shift.max(other.shift);
        self.aligned(s).cmp(&other.aligned(s))
    }
}

/// Integer polynomial, ascending coefficients, no trailing zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct IntPoly(pub Vec<BigInt>);

impl IntPoly {
    pub fn new(mut c: Vec<BigInt>) -> Self {
        while c.last().is_some_and(|x| x.is_zero()) {
            c.pop();
        }
        IntPoly(c)
    }

    /// Exact integer multiple (by a positive power of two) of `p`.
    pub fn from_real(p: &RealPolynomial) -> Self {
        let ds: Vec<Dyadic> = p.coeffs().iter().map(|&c| Dyadic::from_f64(c)).collect();
        let s = ds.iter().map(|d| d.shift).max().unwrap_or(0);
        IntPoly::new(ds.iter().map(|d| d.aligned(s)).collect())
    }

    pub fn degree(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    fn lead(&self) -> &BigInt {
        self.0.last().expect("nonzero polynomial")
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn derivative(&self) -> IntPoly {
        IntPoly::new(self.0.iter().enumerate().skip(1).map(|(j, c)| c * BigInt::from(j)).collect())
    }

    /// Divides by the positive content.
    pub fn primitive(mut self) -> Self {
        let g = self.0.iter().fold(BigInt::zero(), |g, c| g.gcd(c));
        if !g.is_zero() && !g.is_one() {
            for c in &mut self.0 {
                *c /= &g;
            }
        }
        self
    }

    /// Sign of `p(x)` for dyadic `x`.
    pub fn sign_at(&self, x: &Dyadic) -> i32 {
        let Some(d) = self.degree() else { return 0 };
        let mut h = self.0[d].clone();
        for j in (0..d).rev() {
            h = h * &x.num + (&self.0[j] << (x.shift as usize * (d - j)));
        }
        sign_of(&h)
    }

    /// `p(x)` as an exact rational.
    pub fn eval_rational(&self, x: &BigRational) -> BigRational {
        self.0
            .iter()
            .rev()
            .fold(BigRational::zero(), |acc, c| acc * x + BigRational::from_integer(c.clone()))
    }

    /// Sign of `p` as `x -> +inf` (`positive`) or `x -> -inf`.
    fn sign_at_infinity(&self, positive: bool) -> i32 {
        match self.degree() {
            None => 0,
            Some(d) => {
                let s = sign_of(self.lead());
                if positive || d % 2 == 0 { s } else { -s }
            }
        }
    }

    /// Negated pseudo-remainder with the sign of the true remainder, made primitive.
    fn neg_rem(&self, b: &IntPoly) -> IntPoly {
        let db = b.degree().expect("nonzero divisor");
        let lb = b.lead().clone();
        let mut r = self.0.clone();
        let mut steps = 0u32;
        while r.len() > db && !r.is_empty() {
            let dr = r.len() - 1;
            let lr = r[dr].clone();
            for c in r.iter_mut() {
                *c *= &lb;
            }
            for (j, bc) in b.0.iter().enumerate() {
                r[j + dr - db] -= &lr * bc;
            }
            steps += 1;
            while r.last().is_some_and(|x| x.is_zero()) {
                r.pop();
            }
        }
        let flip = lb.is_negative() && steps % 2 == 1;
        let r = IntPoly::new(r).primitive();
        if flip { r } else { IntPoly(r.0.into_iter().map(|c| -c).collect()) }
    }
}

fn sign_of(x: &BigInt) -> i32 {
    if x.is_positive() {
        1
    } else if x.is_negative() {
        -1
    } else {
        0
    }
}

fn variations(signs: impl Iterator<Item = i32>) -> usize {
    let mut last = 0;
    let mut v = 0;
    for s in signs.filter(|&s| s != 0) {
        if last != 0 && s != last {
            v += 1;
        }
        last = s;
    }
    v
}

/// Sturm sequence of a nonzero polynomial. Counts refer to distinct real roots.
#[derive(Debug, Clone)]
pub struct SturmSequence {
    seq: Vec<IntPoly>,
}

impl SturmSequence {
    pub fn new(p: &RealPolynomial) -> Self {
        Self::from_int(IntPoly::from_real(p))
    }

    pub fn from_int(p: IntPoly) -> Self {
        assert!(!p.is_zero(), "Sturm sequence of the zero polynomial");
        let p0 = p.primitive();
        let p1 = p0.derivative().primitive();
        let mut seq = vec![p0];
        if !p1.is_zero() {
            seq.push(p1);
        }
        while seq.len() >= 2 {
            let n = seq.len();
            let r = seq[n - 2].neg_rem(&seq[n - 1]);
            if r.is_zero() {
                break;
            }
            seq.push(r);
        }
        SturmSequence { seq }
    }

    pub fn poly(&self) -> &IntPoly {
        &self.seq[0]
    }

    /// True when the polynomial has no repeated roots (real or complex).
    pub fn is_squarefree(&self) -> bool {
        self.seq.last().and_then(|p| p.degree()) == Some(0)
    }

    fn v_at(&self, x: &Dyadic) -> usize {
        variations(self.seq.iter().map(|p| p.sign_at(x)))
    }

    fn v_inf(&self, positive: bool) -> usize {
        variations(self.seq.iter().map(|p| p.sign_at_infinity(positive)))
    }

    pub fn count_all_real(&self) -> usize {
        self.v_inf(false) - self.v_inf(true)
    }

    /// Distinct roots in `(x, +inf)`.
    pub fn count_above(&self, x: f64) -> usize {
        self.count_above_dyadic(&Dyadic::from_f64(x))
    }

    pub fn count_above_dyadic(&self, x: &Dyadic) -> usize {
        self.v_at(x) - self.v_inf(true)
    }

    /// Distinct roots in `(-inf, x]`.
    pub fn count_below_or_at(&self, x: f64) -> usize {
        self.v_inf(false) - self.v_at(&Dyadic::from_f64(x))
    }

    /// Distinct roots in `(a, b]`.
    pub fn count_in(&self, a: f64, b: f64) -> usize {
        self.count_in_dyadic(&Dyadic::from_f64(a), &Dyadic::from_f64(b))
    }

    pub fn count_in_dyadic(&self, a: &Dyadic, b: &Dyadic) -> usize {
        self.v_at(a).saturating_sub(self.v_at(b))
    }

    /// Power of two bounding the magnitude of every root.
    pub fn root_bound(&self) -> Dyadic {
        let p = self.poly();
        let lead = p.lead().abs();
        let max = p.0.iter().map(|c| c.abs()).max().unwrap_or_default();
        let ratio_bits = max.bits() as i64 - lead.bits() as i64 + 2;
        Dyadic { num: BigInt::one() << ratio_bits.max(1) as usize, shift: 0 }
    }

    /// Disjoint intervals `(a, b]` each holding one distinct root in `(lo, hi]`,
    /// narrowed until `b - a <= width`.
    pub fn isolate(&self, lo: &Dyadic, hi: &Dyadic, width: f64) -> Vec<(Dyadic, Dyadic)> {
        let mut out = Vec::new();
        let w = Dyadic::from_f64(width);
        self.isolate_rec(lo.clone(), hi.clone(), &w, 0, &mut out);
        out
    }

    fn isolate_rec(&self, a: Dyadic, b: Dyadic, w: &Dyadic, depth: u32, out: &mut Vec<(Dyadic, Dyadic)>) {
        let c = self.count_in_dyadic(&a, &b);
        if c == 0 {
            return;
        }
        if (c == 1 && b.sub(&a) <= *w) || depth > 400 {
            out.push((a, b));
            return;
        }
        let m = Dyadic::midpoint(&a, &b);
        self.isolate_rec(a, m.clone(), w, depth + 1, out);
        self.isolate_rec(m, b, w, depth + 1, out);
    }

    /// Halves `(a, b]`, which must contain exactly one distinct root, `iters` times.
    /// Uses the sign of the polynomial when it changes across the interval and
    /// Sturm counts otherwise.
    pub fn refine(&self, mut a: Dyadic, mut b: Dyadic, iters: u32) -> (Dyadic, Dyadic) {
        let p = self.poly();
        let (sa, sb) = (p.sign_at(&a), p.sign_at(&b));
        let by_sign = sa != 0 && sb != 0 && sa != sb;
        for _ in 0..iters {
            let m = Dyadic::midpoint(&a, &b);
            let left = if by_sign {
                let sm = p.sign_at(&m);
                sm == 0 || sm != sa
            } else {
                self.count_in_dyadic(&a, &m) >= 1
            };
            if left {
                b = m;
            } else {
                a = m;
            }
        }
        (a, b)
    }

    /// Largest real root by exact bisection, or `None` without real roots.
    pub fn largest_root_bisect(&self) -> Option<f64> {
        if self.count_all_real() == 0 {
            return None;
        }
        let bound = self.root_bound();
        let mut hi = bound.clone();
        let mut lo = Dyadic { num: -bound.num, shift: bound.shift };
        for _ in 0..2000 {
            let (lf, hf) = (lo.to_f64(), hi.to_f64());
            if hf - lf <= 2.0 * f64::EPSILON * hf.abs().max(lf.abs()).max(f64::MIN_POSITIVE) {
                break;
            }
            let m = Dyadic::midpoint(&lo, &hi);
            if self.count_above_dyadic(&m) >= 1 {
                lo = m;
            } else {
                hi = m;
            }
        }
        Some(hi.to_f64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(c: &[f64]) -> RealPolynomial {
        RealPolynomial::new(c.to_vec())
    }

    #[test]
    fn dyadic_roundtrip() {
        for x in [0.0, 1.0, -0.75, 1e-300, 3.1e200, -5e-324, 0.1] {
            assert_eq!(Dyadic::from_f64(x).to_f64(), x);
        }
        let m = Dyadic::midpoint(&Dyadic::from_f64(1.0), &Dyadic::from_f64(2.0));
        assert_eq!(m.to_f64(), 1.5);
        assert!(Dyadic::from_f64(-1.0) < Dyadic::from_f64(0.5));
    }

    #[test]
    fn counts_of_cubic() {
        // (x - 1)(x + 2)(x - 3)
        let s = SturmSequence::new(&poly(&[6.0, -5.0, -2.0, 1.0]));
        assert_eq!(s.count_all_real(), 3);
        assert_eq!(s.count_above(0.0), 2);
        assert_eq!(s.count_in(-3.0, 1.0), 2);
        assert_eq!(s.count_in(1.0, 2.9), 0);
        assert!(s.is_squarefree());
        assert_eq!(s.largest_root_bisect(), Some(3.0));
    }

    #[test]
    fn repeated_roots_counted_once() {
        // (x - 1)^2 (x^2 + 1)
        let s = SturmSequence::new(&poly(&[1.0, -2.0, 2.0, -2.0, 1.0]));
        assert!(!s.is_squarefree());
        assert_eq!(s.count_all_real(), 1);
    }

    #[test]
    fn isolate_and_refine() {
        // x^2 - 2
        let s = SturmSequence::new(&poly(&[-2.0, 0.0, 1.0]));
        let iv = s.isolate(&Dyadic::from_f64(-4.0), &Dyadic::from_f64(4.0), 0.5);
        assert_eq!(iv.len(), 2);
        let (a, b) = s.refine(iv[1].0.clone(), iv[1].1.clone(), 60);
        assert!((a.to_f64() - 2f64.sqrt()).abs() < 1e-15);
        assert!((b.to_f64() - 2f64.sqrt()).abs() < 1e-15);
    }
}
