//! Competing sufficient conditions for single high-gain predictors, their
//! necessary-condition screens, and the sizing rule of the sub-predictor chain.
//!
//! All matrix norms are spectral.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::margins::{hurwitz_check, observer_matrix};
use crate::mid::GainVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ahmed,
    Lei,
    Ours,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Ahmed => "ahmed",
            Method::Lei => "lei",
            Method::Ours => "ours",
        }
    }
}

/// `value` must be positive (strict) or nonnegative for the inequality to hold.
#[derive(Debug, Clone, Serialize)]
pub struct Residual {
    pub name: String,
    pub value: f64,
    pub strict: bool,
}

impl Residual {
    fn new(name: &str, value: f64, strict: bool) -> Self {
        Residual { name: name.to_string(), value, strict }
    }

    pub fn holds(&self) -> bool {
        if self.strict {
            self.value > 0.0
        } else {
            self.value >= 0.0
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TradeoffVerdict {
    pub method: Method,
    pub satisfied: bool,
    pub residuals: Vec<Residual>,
    pub derived: Vec<(String, f64)>,
}

impl TradeoffVerdict {
    fn new(method: Method, residuals: Vec<Residual>, derived: Vec<(&str, f64)>) -> Self {
        TradeoffVerdict {
            method,
            satisfied: residuals.iter().all(Residual::holds),
            residuals,
            derived: derived.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        }
    }

    pub fn derived_value(&self, key: &str) -> Option<f64> {
        self.derived.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    (m.transpose() * m).symmetric_eigenvalues().max().max(0.0).sqrt()
}

fn require_hurwitz(gain: &GainVector) -> Result<()> {
    if hurwitz_check(&gain.delay_free_polynomial())? {
        Ok(())
    } else {
        Err(Error::NotHurwitz)
    }
}

/// SPD solution of `P (A − LC) + (A − LC)ᵀ P = −I`.
pub fn lyapunov_solve(gain: &GainVector) -> Result<DMatrix<f64>> {
    require_hurwitz(gain)?;
    let n = gain.n();
    let m = observer_matrix(gain);
    let id = DMatrix::<f64>::identity(n, n);
    // Column-major vec: vec(P M) = (Mᵀ ⊗ I) vec P, vec(Mᵀ P) = (I ⊗ Mᵀ) vec P.
    let k = m.transpose().kronecker(&id) + id.kronecker(&m.transpose());
    let rhs = nalgebra::DVector::from_iterator(n * n, (-&id).iter().copied());
    let v = k.lu().solve(&rhs).ok_or(Error::NotHurwitz)?;
    let p = DMatrix::from_column_slice(n, n, v.as_slice());
    Ok((&p + p.transpose()) * 0.5)
}

/// `‖P (A − LC) + (A − LC)ᵀ P + I‖`.
pub fn lyapunov_residual(gain: &GainVector, p: &DMatrix<f64>) -> f64 {
    let m = observer_matrix(gain);
    let r = p * &m + m.transpose() * p + DMatrix::<f64>::identity(gain.n(), gain.n());
    spectral_norm(&r)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MatrixNorms {
    pub a_lc: f64,
    pub l: f64,
    pub lc: f64,
    pub plc: f64,
    pub p: f64,
    /// `λ_max(P) / λ_min(P)` for the Lyapunov solution.
    pub p_ratio: f64,
}

pub fn matrix_norms(gain: &GainVector) -> Result<MatrixNorms> {
    let p = lyapunov_solve(gain)?;
    let n = gain.n();
    let lc = DMatrix::from_fn(n, n, |i, j| if j == 0 { gain.l[i] } else { 0.0 });
    let eig = p.clone().symmetric_eigenvalues();
    Ok(MatrixNorms {
        a_lc: spectral_norm(&observer_matrix(gain)),
        l: gain.l.iter().map(|v| v * v).sum::<f64>().sqrt(),
        lc: spectral_norm(&lc),
        plc: spectral_norm(&(&p * &lc)),
        p: eig.max(),
        p_ratio: eig.max() / eig.min(),
    })
}

/// Both inequalities of the Ahmed-Ali et al. trade-off, with
/// `P = h λ² P₀` and `P₀` the Lyapunov solution.
pub fn ahmed_conditions(gain: &GainVector, lambda: f64, h: f64, gamma_phi: f64) -> Result<TradeoffVerdict> {
    let norms = matrix_norms(gain)?;
    let p = h * lambda * lambda * norms.p;
    let first = h * lambda.powi(3) / 2.0
        - (2.0 * p * gamma_phi + h * lambda * lambda * (norms.a_lc + 2.0 * p * gamma_phi).powi(2));
    let second = 1.0 - 2.0 * norms.l * norms.l * (p * p + h * h * lambda.powi(4));
    Ok(TradeoffVerdict::new(
        Method::Ahmed,
        vec![Residual::new("rate", first, true), Residual::new("coupling", second, true)],
        vec![("norm_P", p), ("norm_A_LC", norms.a_lc), ("norm_L", norms.l), ("P_ratio", norms.p_ratio)],
    ))
}

/// `h λ² < 1/(√2 n)` and `h ≤ 1/(4√2 n)`.
pub fn ahmed_necessary(n: usize, h: f64, lambda: f64) -> Result<bool> {
    if n < 2 {
        return Err(Error::InvalidArgument("the screen needs n >= 2".into()));
    }
    let nf = n as f64;
    Ok(h * lambda * lambda < 1.0 / (2f64.sqrt() * nf) && h <= 1.0 / (4.0 * 2f64.sqrt() * nf))
}

/// `σ h λ ≤ 1` with `σ = max{8‖A−LC‖² κ(P), 8‖PLC‖², 2√2 ‖LC‖}`.
pub fn lei_conditions(gain: &GainVector, lambda: f64, h: f64) -> Result<TradeoffVerdict> {
    let norms = matrix_norms(gain)?;
    let sigma = lei_sigma(&norms);
    Ok(TradeoffVerdict::new(
        Method::Lei,
        vec![Residual::new("sigma_h_lambda", 1.0 - sigma * h * lambda, false)],
        vec![
            ("sigma", sigma),
            ("norm_P", norms.p),
            ("P_ratio", norms.p_ratio),
            ("norm_A_LC", norms.a_lc),
            ("norm_L", norms.l),
            ("norm_PLC", norms.plc),
        ],
    ))
}

pub fn lei_sigma(norms: &MatrixNorms) -> f64 {
    (8.0 * norms.a_lc * norms.a_lc * norms.p_ratio)
        .max(8.0 * norms.plc * norms.plc)
        .max(2.0 * 2f64.sqrt() * norms.lc)
}

/// `h λ ≤ 1/8`.
pub fn lei_necessary(n: usize, h: f64, lambda: f64) -> Result<bool> {
    if n < 2 {
        return Err(Error::InvalidArgument("the screen needs n >= 2".into()));
    }
    Ok(h * lambda <= 0.125)
}

/// The chain conditions: `λ h / N = 1` and `λ ≥ max(γ_Φ/γ_m, 1)`.
/// `gamma_m` may be omitted when `γ_Φ = 0`.
pub fn ours_conditions(gamma_phi: f64, h: f64, lambda: f64, n_sub: usize, gamma_m: Option<f64>) -> Result<TradeoffVerdict> {
    if n_sub == 0 {
        return Err(Error::InvalidArgument("at least one sub-predictor is required".into()));
    }
    let ratio = match gamma_m {
        Some(g) if g > 0.0 => gamma_phi / g,
        _ if gamma_phi == 0.0 => 0.0,
        _ => return Err(Error::InvalidArgument("a positive gamma_m is required when gamma_phi > 0".into())),
    };
    let lambda_star = ratio.max(1.0);
    let delta = lambda * h / n_sub as f64;
    Ok(TradeoffVerdict::new(
        Method::Ours,
        vec![
            Residual::new("unit_delta", 1e-12 - (delta - 1.0).abs(), false),
            Residual::new("gain", lambda - lambda_star * (1.0 - 1e-12), false),
        ],
        vec![("lambda_star", lambda_star), ("delta_per_stage", delta)],
    ))
}
