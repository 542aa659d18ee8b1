//! Replica-symmetric potentials of the sparse spiked models.
//!
//! Wigner: `i_pot(q) = λ/4 (q - ρ)² + I(X; √(λq) X + Z)` on `q ∈ [0, ρ]`.
//!
//! Wishart (`m = αn` columns):
//! `i_pot(q_u, q_v) = λα/2 (q_u - ρ_U)(q_v - ρ_V) + I(U; √(λα q_v) U + Z) + α I(V; √(λ q_u) V + Z)`
//! on the box `[0, ρ_U] × [0, ρ_V]`.
//!
//! Arguments outside the domain are an error; nothing is clamped.

use serde::{Deserialize, Serialize};

use crate::channel::{channel_point, mutual_information};
use crate::error::{Error, Result};
use crate::prior::Prior;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Wigner,
    Wishart,
}

/// `λ` expressed through `γ = λ / λ_c(ρ)` and the sparsity exponent `β`
/// (`ρ_n = Θ(n^{-β})`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRegime {
    pub beta: f64,
    pub gamma: f64,
    pub model: Model,
}

impl ScalingRegime {
    pub fn new(model: Model, beta: f64, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::Parameter(format!(
                "gamma must be finite and > 0, got {gamma}"
            )));
        }
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::Parameter(format!(
                "beta must be finite and >= 0, got {beta}"
            )));
        }
        let regime = ScalingRegime { beta, gamma, model };
        if !regime.beta_in_theorem_range() {
            log::warn!(
                "beta = {beta} is outside the range covered by the {:?} theorem",
                model
            );
        }
        Ok(regime)
    }

    /// Upper end (exclusive) of the admissible sparsity exponent.
    pub fn beta_limit(model: Model) -> f64 {
        match model {
            Model::Wigner => 1.0 / 6.0,
            Model::Wishart => 1.0 / 3.0,
        }
    }

    pub fn beta_in_theorem_range(&self) -> bool {
        self.beta < Self::beta_limit(self.model)
    }

    /// `λ = γ λ_c(ρ)` with `λ_c = 4|ln ρ|/ρ` (Wigner) or `√(4|ln ρ|/(αρ))` (Wishart).
    pub fn lambda(&self, rho: f64, alpha: Option<f64>) -> Result<f64> {
        let log_rho = check_sparse_rho(rho)?;
        match self.model {
            Model::Wigner => Ok(4.0 * self.gamma * log_rho / rho),
            Model::Wishart => {
                let alpha =
                    check_alpha(alpha.ok_or_else(|| {
                        Error::Parameter("the Wishart scaling needs alpha".into())
                    })?)?;
                Ok((4.0 * self.gamma * log_rho / (alpha * rho)).sqrt())
            }
        }
    }
}

/// Returns `|ln ρ|` for `ρ ∈ (0, 1)`.
pub(crate) fn check_sparse_rho(rho: f64) -> Result<f64> {
    if rho > 0.0 && rho < 1.0 {
        Ok(-rho.ln())
    } else {
        Err(Error::Domain(format!(
            "rho must lie in (0, 1) for |ln rho| > 0, got {rho}"
        )))
    }
}

fn check_alpha(alpha: f64) -> Result<f64> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(alpha)
    } else {
        Err(Error::Parameter(format!(
            "alpha must be finite and > 0, got {alpha}"
        )))
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "lambda must be finite and > 0, got {lambda}"
        )))
    }
}

fn check_prior_rho(prior: &Prior, rho: f64, name: &str) -> Result<()> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::Parameter(format!(
            "{name} must lie in (0, 1], got {rho}"
        )));
    }
    if (prior.rho() - rho).abs() > 1e-12 {
        return Err(Error::Parameter(format!(
            "{name} = {rho} does not match the prior's sparsity {}",
            prior.rho()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WignerSpec {
    pub prior: Prior,
    pub lambda: f64,
    pub rho: f64,
}

impl WignerSpec {
    pub fn new(prior: Prior, lambda: f64) -> Result<Self> {
        let rho = prior.rho();
        let spec = WignerSpec { prior, lambda, rho };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_regime(prior: Prior, regime: &ScalingRegime) -> Result<Self> {
        if regime.model != Model::Wigner {
            return Err(Error::Parameter(
                "a Wigner spec needs a Wigner scaling regime".into(),
            ));
        }
        let lambda = regime.lambda(prior.rho(), None)?;
        Self::new(prior, lambda)
    }

    pub fn validate(&self) -> Result<()> {
        check_lambda(self.lambda)?;
        check_prior_rho(&self.prior, self.rho, "rho")
    }

    /// `ρ|ln ρ|`, or `None` when `ρ = 1`.
    pub fn rescaling(&self) -> Option<f64> {
        let scale = self.rho * -self.rho.ln();
        (scale > 0.0).then_some(scale)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WishartSpec {
    pub prior_u: Prior,
    pub prior_v: Prior,
    pub lambda: f64,
    pub alpha: f64,
    pub rho_u: f64,
    pub rho_v: f64,
}

impl WishartSpec {
    pub fn new(prior_u: Prior, prior_v: Prior, lambda: f64, alpha: f64) -> Result<Self> {
        let (rho_u, rho_v) = (prior_u.rho(), prior_v.rho());
        let spec = WishartSpec {
            prior_u,
            prior_v,
            lambda,
            alpha,
            rho_u,
            rho_v,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Spiked covariance model: Gaussian `U`, Bernoulli–Rademacher `V`.
    pub fn spiked_covariance(rho_v: f64, alpha: f64, gamma: f64) -> Result<Self> {
        let regime = ScalingRegime::new(Model::Wishart, 0.0, gamma)?;
        let lambda = regime.lambda(rho_v, Some(alpha))?;
        Self::new(
            Prior::standard_gaussian(),
            Prior::bernoulli_rademacher(rho_v)?,
            lambda,
            alpha,
        )
    }

    pub fn from_regime(
        prior_u: Prior,
        prior_v: Prior,
        alpha: f64,
        regime: &ScalingRegime,
    ) -> Result<Self> {
        if regime.model != Model::Wishart {
            return Err(Error::Parameter(
                "a Wishart spec needs a Wishart scaling regime".into(),
            ));
        }
        let lambda = regime.lambda(prior_v.rho(), Some(alpha))?;
        Self::new(prior_u, prior_v, lambda, alpha)
    }

    pub fn validate(&self) -> Result<()> {
        check_lambda(self.lambda)?;
        check_alpha(self.alpha)?;
        check_prior_rho(&self.prior_u, self.rho_u, "rho_u")?;
        check_prior_rho(&self.prior_v, self.rho_v, "rho_v")
    }

    /// `√(ρ_V|ln ρ_V|)`, or `None` when `ρ_V = 1`.
    pub fn rescaling(&self) -> Option<f64> {
        let scale = self.rho_v * -self.rho_v.ln();
        (scale > 0.0).then(|| scale.sqrt())
    }
}

fn check_in(x: f64, upper: f64, name: &str) -> Result<()> {
    if (0.0..=upper).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "{name} = {x} is outside [0, {upper}]"
        )))
    }
}

pub fn wigner_potential(spec: &WignerSpec, q: f64) -> Result<f64> {
    check_in(q, spec.rho, "q")?;
    let info = mutual_information(&spec.prior, spec.lambda * q)?;
    Ok(0.25 * spec.lambda * (q - spec.rho).powi(2) + info)
}

pub fn wishart_potential(spec: &WishartSpec, q_u: f64, q_v: f64) -> Result<f64> {
    check_in(q_u, spec.rho_u, "q_u")?;
    check_in(q_v, spec.rho_v, "q_v")?;
    let cross = 0.5 * spec.lambda * spec.alpha * (q_u - spec.rho_u) * (q_v - spec.rho_v);
    let info_u = mutual_information(&spec.prior_u, spec.lambda * spec.alpha * q_v)?;
    let info_v = mutual_information(&spec.prior_v, spec.lambda * q_u)?;
    Ok(cross + info_u + spec.alpha * info_v)
}

/// `∂i_pot/∂q = λ/2 (q - ρ + mmse(λq))`.
pub fn wigner_stationarity_residual(spec: &WignerSpec, q: f64) -> Result<f64> {
    if !(q > 0.0 && q <= spec.rho) {
        return Err(Error::Domain(format!(
            "q = {q} is outside (0, {}]",
            spec.rho
        )));
    }
    let c = channel_point(&spec.prior, spec.lambda * q)?;
    Ok(0.5 * spec.lambda * (q - spec.rho + c.mmse))
}

/// Stationary `q_U` for a Gaussian `U` at given `q_V`: `λα q_V / (1 + λα q_V)`.
pub fn wishart_stationary_qu(lambda: f64, alpha: f64, q_v: f64) -> f64 {
    let s = lambda * alpha * q_v;
    if s.is_infinite() {
        return 1.0;
    }
    s / (1.0 + s)
}

/// Leading-order potential values at the two candidate minima in the scaling
/// regime: `(γρ|ln ρ|, ρ|ln ρ|)` for `γ > 1/2`, `(γρ|ln ρ|, 2γρ|ln ρ|)` otherwise.
pub fn asymptotic_wigner_branch_values(gamma: f64, rho: f64) -> (f64, f64) {
    let scale = rho * rho.ln().abs();
    let low = gamma * scale;
    let high = if gamma > 0.5 {
        scale
    } else {
        2.0 * gamma * scale
    };
    (low, high)
}
