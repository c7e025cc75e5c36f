//! Canonical observable form, weighted dilations and the Lipschitz
//! aggregation rule.
//!
//! The shift matrix `A` (single nilpotent Jordan block) and the readout
//! `C = [1 0 ... 0]` are never stored; they are implied by the dimension.

use std::path::Path;

use rand::Rng;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::expr::{parse_expression, state_input_names, Expr, StateEnv, Var};

/// Positive dilation weights `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights(Vec<f64>);

impl Weights {
    pub fn new(r: Vec<f64>) -> Result<Self> {
        if r.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument("weights must be positive and finite".into()));
        }
        Ok(Weights(r))
    }

    /// `r = [1, 2, ..., n]`.
    pub fn canonical(n: usize) -> Self {
        Weights((1..=n).map(|i| i as f64).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `x_i -> lambda^{r_i} x_i`.
pub fn dilate(r: &Weights, lambda: f64, x: &[f64]) -> Result<Vec<f64>> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("dilation parameter must be positive, got {lambda}")));
    }
    if x.len() != r.len() {
        return Err(Error::DimensionMismatch { expected: r.len(), got: x.len() });
    }
    Ok(r.0.iter().zip(x).map(|(w, xi)| lambda.powf(*w) * xi).collect())
}

/// The dilated error `Lambda_{1/lambda}(e)`; requires `lambda >= 1`.
pub fn dilated_error_transform(r: &Weights, lambda: f64, e: &[f64]) -> Result<Vec<f64>> {
    if !(lambda >= 1.0) {
        return Err(Error::InvalidArgument(format!("dilated error needs lambda >= 1, got {lambda}")));
    }
    dilate(r, 1.0 / lambda, e)
}

/// `(A x)_i = x_{i+1}`, `(A x)_n = 0`.
pub fn shift(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n).map(|i| if i + 1 < n { x[i + 1] } else { 0.0 }).collect()
}

/// Lipschitz constant of the dilated increment: `sqrt(sum gamma_i^2)`.
pub fn aggregate_lipschitz(gamma: &[f64]) -> Result<f64> {
    if let Some(g) = gamma.iter().find(|g| !(**g >= 0.0)) {
        return Err(Error::InvalidArgument(format!("Lipschitz constants must be nonnegative, got {g}")));
    }
    Ok(gamma.iter().map(|g| g * g).sum::<f64>().sqrt())
}

/// Plant `x' = A x + phi(x, u(t - h))`, `y = x_1`, with triangular `phi`.
#[derive(Debug, Clone)]
pub struct CanonicalSystem {
    pub n: usize,
    pub phi: Vec<Expr>,
    pub gamma: Vec<f64>,
    pub h: f64,
    pub u_signal: Expr,
}

impl CanonicalSystem {
    /// Checks sizes and signs. Triangularity is reported by
    /// [`CanonicalSystem::is_triangular`] and enforced by [`CanonicalSystem::validate`].
    pub fn new(phi: Vec<Expr>, gamma: Vec<f64>, h: f64, u_signal: Expr) -> Result<Self> {
        let n = phi.len();
        if n == 0 {
            return Err(Error::InvalidArgument("system dimension must be at least 1".into()));
        }
        if gamma.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: gamma.len() });
        }
        if gamma.iter().any(|g| !(*g >= 0.0)) {
            return Err(Error::InvalidArgument("gamma_i must be nonnegative".into()));
        }
        if !(h >= 0.0) || !h.is_finite() {
            return Err(Error::InvalidArgument(format!("delay must be nonnegative, got {h}")));
        }
        if let Some(v) = u_signal.free_vars().into_iter().find(|v| *v != Var::Time) {
            return Err(Error::InvalidArgument(format!("input signal may only depend on t, found {v}")));
        }
        Ok(CanonicalSystem { n, phi, gamma, h, u_signal })
    }

    /// Parses `phi` component-wise over `x1..xn, u` and `u` over `t`.
    pub fn parse(phi: &[&str], gamma: Vec<f64>, h: f64, u: &str) -> Result<Self> {
        let names = state_input_names(phi.len());
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        let phi = phi.iter().map(|s| parse_expression(s, &names)).collect::<Result<Vec<_>>>()?;
        let u_signal = parse_expression(u, &["t"])?;
        CanonicalSystem::new(phi, gamma, h, u_signal)
    }

    /// The system used throughout the worked example:
    /// `x1' = x2`, `x2' = -x1 + 0.5 tanh(x1 + x2) + x1 u(t - h)`, `u = 0.1 sin(0.1 t)`.
    pub fn example(h: f64) -> Self {
        CanonicalSystem::parse(
            &["0", "-x1 + 0.5*tanh(x1+x2) + x1*u"],
            vec![0.0, 1.21f64.sqrt()],
            h,
            "0.1*sin(0.1*t)",
        )
        .expect("example system is well formed")
    }

    /// The linear chain of integrators (`phi = 0`, `u = 0`).
    pub fn integrator_chain(n: usize, h: f64) -> Self {
        let phi = vec![Expr::Num(0.0); n];
        CanonicalSystem::new(phi, vec![0.0; n], h, Expr::Num(0.0)).expect("zero field is well formed")
    }

    pub fn weights(&self) -> Weights {
        Weights::canonical(self.n)
    }

    pub fn is_triangular(&self) -> bool {
        check_triangular(&self.phi)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.is_triangular() {
            return Err(Error::Config("phi is not triangular in x".into()));
        }
        Ok(())
    }

    pub fn gamma_phi(&self) -> f64 {
        aggregate_lipschitz(&self.gamma).expect("gamma checked at construction")
    }

    pub fn input(&self, t: f64) -> Result<f64> {
        self.u_signal.eval(&StateEnv { x: &[], u: 0.0, t })
    }

    /// `phi(x, u)` written into `out`.
    pub fn eval_phi(&self, x: &[f64], u: f64, out: &mut [f64]) -> Result<()> {
        let env = StateEnv { x, u, t: 0.0 };
        for (o, p) in out.iter_mut().zip(&self.phi) {
            *o = if p.is_zero() { 0.0 } else { p.eval(&env)? };
        }
        Ok(())
    }

    /// Crude sanity check of the user-supplied `gamma_i`: the largest
    /// central-difference gradient norm of each `phi_i` over random points of
    /// the box `lo <= x <= hi`, `u_lo <= u <= u_hi`.
    pub fn sample_lipschitz<R: Rng>(
        &self,
        lo: &[f64],
        hi: &[f64],
        u_range: (f64, f64),
        samples: usize,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        if lo.len() != self.n || hi.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: lo.len().min(hi.len()) });
        }
        let mut best = vec![0.0f64; self.n];
        let mut x = vec![0.0; self.n];
        let mut fp = vec![0.0; self.n];
        let mut fm = vec![0.0; self.n];
        for _ in 0..samples {
            for i in 0..self.n {
                x[i] = if hi[i] > lo[i] { rng.gen_range(lo[i]..=hi[i]) } else { lo[i] };
            }
            let u = if u_range.1 > u_range.0 { rng.gen_range(u_range.0..=u_range.1) } else { u_range.0 };
            let mut grad_sq = vec![0.0; self.n];
            for j in 0..self.n {
                let step = 1e-6 * (1.0 + x[j].abs());
                let keep = x[j];
                x[j] = keep + step;
                self.eval_phi(&x, u, &mut fp)?;
                x[j] = keep - step;
                self.eval_phi(&x, u, &mut fm)?;
                x[j] = keep;
                for i in 0..self.n {
                    let d = (fp[i] - fm[i]) / (2.0 * step);
                    grad_sq[i] += d * d;
                }
            }
            for i in 0..self.n {
                best[i] = best[i].max(grad_sq[i].sqrt());
            }
        }
        Ok(best)
    }
}

/// True iff component `i` of `phi` depends only on `x1..x_{i+1}` and `u`.
pub fn check_triangular(phi: &[Expr]) -> bool {
    phi.iter().enumerate().all(|(i, p)| {
        p.free_vars().into_iter().all(|v| match v {
            Var::State(j) => j <= i,
            Var::Input => true,
            Var::Time => false,
        })
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemFile {
    n: usize,
    h: f64,
    phi: Vec<String>,
    gamma: Vec<f64>,
    u: String,
    x0: Option<Vec<f64>>,
}

/// A parsed system definition file.
#[derive(Debug, Clone)]
pub struct SystemDefinition {
    pub system: CanonicalSystem,
    pub x0: Option<Vec<f64>>,
}

impl SystemDefinition {
    /// Parses the key-value system file:
    ///
    /// ```text
    /// n = 2
    /// h = 0.25
    /// phi = ["0", "-x1 + 0.5*tanh(x1+x2) + x1*u"]
    /// gamma = [0, 1.1]
    /// u = "0.1*sin(0.1*t)"
    /// x0 = [1, 1]          # optional
    /// ```
    pub fn from_str(src: &str) -> Result<Self> {
        let raw: SystemFile = toml::from_str(src).map_err(|e| Error::Config(e.to_string()))?;
        if raw.phi.len() != raw.n {
            return Err(Error::Config(format!("n = {} but phi has {} entries", raw.n, raw.phi.len())));
        }
        if let Some(x0) = &raw.x0 {
            if x0.len() != raw.n {
                return Err(Error::Config(format!("n = {} but x0 has {} entries", raw.n, x0.len())));
            }
        }
        let phi: Vec<&str> = raw.phi.iter().map(String::as_str).collect();
        let system = CanonicalSystem::parse(&phi, raw.gamma, raw.h, &raw.u)?;
        system.validate()?;
        Ok(SystemDefinition { system, x0: raw.x0 })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_str(&src)
    }
}
