//! Real polynomials in ascending-coefficient form.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sturm::SturmSequence;

#[derive(Debug, Clone, PartialEq)]
pub struct RealPolynomial {
    coeffs: Vec<f64>,
}

impl RealPolynomial {
    /// `coeffs[j]` multiplies `x^j`. Trailing zeros are trimmed.
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        RealPolynomial { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> f64 {
        self.coeffs.last().copied().unwrap_or(0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
    }

    pub fn derivative(&self) -> RealPolynomial {
        RealPolynomial::new(self.coeffs.iter().enumerate().skip(1).map(|(j, c)| j as f64 * c).collect())
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Roots as eigenvalues of the companion matrix.
    pub fn companion_roots(&self) -> Vec<Complex64> {
        let Some(d) = self.degree() else { return Vec::new() };
        if d == 0 {
            return Vec::new();
        }
        let lead = self.leading();
        let mut m = DMatrix::<f64>::zeros(d, d);
        for i in 1..d {
            m[(i, i - 1)] = 1.0;
        }
        for i in 0..d {
            m[(i, d - 1)] = -self.coeffs[i] / lead;
        }
        m.complex_eigenvalues().iter().map(|z| Complex64::new(z.re, z.im)).collect()
    }

    /// Largest real root.
    ///
    /// Starts Newton from the real companion eigenvalue with the largest real
    /// part and polishes until `|p| < 1e-13 ||p||`. The result is checked
    /// against an exact Sturm count; when the check fails, the root is
    /// recomputed by exact Sturm bisection.
    pub fn rightmost_real_root(&self) -> Result<f64> {
        match self.degree() {
            None | Some(0) => return Err(Error::NoRealRoots),
            _ => {}
        }
        let sturm = SturmSequence::new(self);
        if sturm.count_all_real() == 0 {
            return Err(Error::NoRealRoots);
        }
        let candidate = self
            .companion_roots()
            .into_iter()
            .filter(|z| z.im.abs() <= 1e-6 * (1.0 + z.re.abs()))
            .map(|z| z.re)
            .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.max(x))));
        if let Some(start) = candidate {
            if let Some(root) = self.newton_polish(start) {
                let tol = 1e-9 * (1.0 + root.abs());
                if sturm.count_above(root + tol) == 0 && sturm.count_in(root - tol, root + tol) >= 1 {
                    return Ok(root);
                }
            }
        }
        sturm.largest_root_bisect().ok_or(Error::NoRealRoots)
    }

    fn newton_polish(&self, mut x: f64) -> Option<f64> {
        let dp = self.derivative();
        let target = 1e-13 * self.norm();
        for _ in 0..100 {
            let v = self.eval(x);
            if v.abs() < target {
                return Some(x);
            }
            let d = dp.eval(x);
            if d == 0.0 || !d.is_finite() {
                return None;
            }
            let step = v / d;
            x -= step;
            if !x.is_finite() {
                return None;
            }
            if step.abs() <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
                return Some(x);
            }
        }
        None
    }
}
