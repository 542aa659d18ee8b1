//! Run configuration: the command line parsed into plain data.
//!
//! Every record here doubles as a clap argument group and a serde type, so a
//! run can be replayed from the JSON stored in its manifest.

use std::path::PathBuf;

use clap::{Args, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSettings;
use crate::error::{Error, Result};
use crate::phase::{PriorFamily, ThresholdModel};
use crate::potential::{Model, ScalingRegime, WignerSpec, WishartSpec};
use crate::prior::Prior;
use crate::varsolve::SolverSettings;

/// Parses a real number in plain or scientific notation (`1e-12`, `2.5E3`),
/// rejecting NaN and infinities.
pub fn parse_real(s: &str) -> std::result::Result<f64, String> {
    let x: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("`{s}` is not a real number"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PriorName {
    /// Bernoulli(rho) on {0, 1}.
    Ber,
    /// Bernoulli-Rademacher: 0 w.p. 1-rho, ±1 w.p. rho/2.
    Berrad,
    /// Standard Gaussian.
    Gaussian,
    /// Explicit atoms given by --atoms.
    Atoms,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
pub struct PriorArgs {
    /// Signal prior.
    #[arg(long, value_enum, default_value = "ber")]
    pub prior: PriorName,
    /// Sparsity: mass off zero.
    #[arg(long, value_parser = parse_real)]
    pub rho: Option<f64>,
    /// Atoms as `value:weight` pairs separated by commas, e.g. `0:0.9,1:0.1`.
    #[arg(long)]
    pub atoms: Option<String>,
}

impl PriorArgs {
    pub fn build(&self) -> Result<Prior> {
        let rho = || {
            self.rho.ok_or_else(|| {
                Error::Parameter(
                    format!("--rho is required for --prior {:?}", self.prior).to_lowercase(),
                )
            })
        };
        match self.prior {
            PriorName::Ber => Prior::bernoulli(rho()?),
            PriorName::Berrad => Prior::bernoulli_rademacher(rho()?),
            PriorName::Gaussian => Ok(Prior::standard_gaussian()),
            PriorName::Atoms => {
                let text = self
                    .atoms
                    .as_deref()
                    .ok_or_else(|| Error::Parameter("--prior atoms needs --atoms".into()))?;
                Prior::from_atoms(&parse_atoms(text)?)
            }
        }
    }

    fn family(&self) -> Result<PriorFamily> {
        match self.prior {
            PriorName::Ber => Ok(PriorFamily::Ber),
            PriorName::Berrad => Ok(PriorFamily::BerRad),
            other => Err(Error::Parameter(format!(
                "this command needs --prior ber or berrad, got {other:?}"
            ))),
        }
    }

    fn rho_required(&self) -> Result<f64> {
        self.rho
            .ok_or_else(|| Error::Parameter("--rho is required".into()))
    }
}

fn parse_atoms(text: &str) -> Result<Vec<(f64, f64)>> {
    text.split(',')
        .map(|pair| {
            let (v, w) = pair
                .split_once(':')
                .ok_or_else(|| Error::Parameter(format!("atom `{pair}` is not value:weight")))?;
            let v = parse_real(v).map_err(Error::Parameter)?;
            let w = parse_real(w).map_err(Error::Parameter)?;
            Ok((v, w))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelName {
    Wigner,
    /// Spiked covariance: Gaussian U, Bernoulli-Rademacher V.
    Wishart,
}

impl From<ModelName> for Model {
    fn from(m: ModelName) -> Model {
        match m {
            ModelName::Wigner => Model::Wigner,
            ModelName::Wishart => Model::Wishart,
        }
    }
}

/// Problem parameters shared by `potential` and `solve`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
pub struct ProblemArgs {
    #[arg(long, value_enum, default_value = "wigner")]
    pub model: ModelName,
    #[command(flatten)]
    #[serde(flatten)]
    pub prior: PriorArgs,
    /// SNR as a multiple of the critical lambda (needs 0 < rho < 1).
    #[arg(long, value_parser = parse_real, conflicts_with = "lambda")]
    pub gamma: Option<f64>,
    /// Raw SNR lambda.
    #[arg(long, value_parser = parse_real)]
    pub lambda: Option<f64>,
    /// Aspect ratio m/n (Wishart only).
    #[arg(long, value_parser = parse_real)]
    pub alpha: Option<f64>,
}

pub enum Problem {
    Wigner(WignerSpec),
    Wishart(WishartSpec),
}

impl ProblemArgs {
    pub fn build(&self) -> Result<Problem> {
        match self.model {
            ModelName::Wigner => {
                if self.alpha.is_some() {
                    return Err(Error::Parameter(
                        "--alpha applies to --model wishart only".into(),
                    ));
                }
                let prior = self.prior.build()?;
                let spec = match (self.gamma, self.lambda) {
                    (Some(g), None) => {
                        WignerSpec::from_regime(prior, &ScalingRegime::new(Model::Wigner, 0.0, g)?)?
                    }
                    (None, Some(l)) => WignerSpec::new(prior, l)?,
                    _ => {
                        return Err(Error::Parameter(
                            "give exactly one of --gamma, --lambda".into(),
                        ))
                    }
                };
                Ok(Problem::Wigner(spec))
            }
            ModelName::Wishart => {
                if !matches!(self.prior.prior, PriorName::Berrad) {
                    return Err(Error::Parameter(
                        "--model wishart is the spiked covariance model; use --prior berrad".into(),
                    ));
                }
                let alpha = self
                    .alpha
                    .ok_or_else(|| Error::Parameter("--model wishart needs --alpha".into()))?;
                let rho_v = self.prior.rho_required()?;
                let spec = match (self.gamma, self.lambda) {
                    (Some(g), None) => WishartSpec::spiked_covariance(rho_v, alpha, g)?,
                    (None, Some(l)) => WishartSpec::new(
                        Prior::standard_gaussian(),
                        Prior::bernoulli_rademacher(rho_v)?,
                        l,
                        alpha,
                    )?,
                    _ => {
                        return Err(Error::Parameter(
                            "give exactly one of --gamma, --lambda".into(),
                        ))
                    }
                };
                Ok(Problem::Wishart(spec))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
pub struct ChannelArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub prior: PriorArgs,
    #[arg(long, value_parser = parse_real)]
    pub snr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
pub struct PotentialArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub problem: ProblemArgs,
    /// Overlap q (Wigner) or q_u (Wishart).
    #[arg(long, value_parser = parse_real)]
    pub q: f64,
    /// Overlap q_v (Wishart only).
    #[arg(long, value_parser = parse_real)]
    pub q_v: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub problem: ProblemArgs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
pub struct CurveArgs {
    #[arg(long, value_enum, default_value = "wigner")]
    pub model: ModelName,
    #[command(flatten)]
    #[serde(flatten)]
    pub prior: PriorArgs,
    #[arg(long, value_parser = parse_real)]
    pub alpha: Option<f64>,
    #[arg(long, value_parser = parse_real, default_value = "0")]
    pub gamma_min: f64,
    #[arg(long, value_parser = parse_real, default_value = "2")]
    pub gamma_max: f64,
    /// Uniform nodes on [gamma-min, gamma-max]; [0.9, 1.1] is always refined to step 0.005.
    #[arg(long, default_value_t = 81)]
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
pub struct ThresholdArgs {
    #[arg(long, value_enum, default_value = "wigner")]
    pub model: ModelName,
    #[command(flatten)]
    #[serde(flatten)]
    pub prior: PriorArgs,
    #[arg(long, value_parser = parse_real)]
    pub alpha: Option<f64>,
    #[arg(long, value_parser = parse_real, default_value = "0.5")]
    pub bracket_lo: f64,
    #[arg(long, value_parser = parse_real, default_value = "1.5")]
    pub bracket_hi: f64,
}

impl ThresholdArgs {
    pub fn model(&self) -> Result<ThresholdModel> {
        match self.model {
            ModelName::Wigner => {
                if self.alpha.is_some() {
                    return Err(Error::Parameter(
                        "--alpha applies to --model wishart only".into(),
                    ));
                }
                Ok(ThresholdModel::Wigner {
                    family: self.prior.family()?,
                })
            }
            ModelName::Wishart => {
                if !matches!(self.prior.prior, PriorName::Berrad) {
                    return Err(Error::Parameter(
                        "--model wishart is the spiked covariance model; use --prior berrad".into(),
                    ));
                }
                let alpha = self
                    .alpha
                    .ok_or_else(|| Error::Parameter("--model wishart needs --alpha".into()))?;
                Ok(ThresholdModel::Wishart { alpha })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OracleCheck {
    /// Mutual information per variable by exact enumeration and disorder MC.
    Mi,
    /// Nishimori identities.
    Nishimori,
    /// Boundary values of the interpolation.
    Boundary,
    /// Thermal and quenched overlap fluctuations.
    Fluctuation,
    /// Finite-n I-MMSE in lambda.
    Immse,
    /// Jacobian of the adaptive path in epsilon.
    Jacobian,
}

/// Finite-n model parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
pub struct FiniteArgs {
    #[arg(long)]
    pub n: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub prior: PriorArgs,
    #[arg(long, value_parser = parse_real)]
    pub lambda: f64,
    /// Independent disorder samples.
    #[arg(long, default_value_t = 1000)]
    pub n_disorder: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
pub struct OracleArgs {
    #[arg(long, value_enum)]
    pub check: OracleCheck,
    #[command(flatten)]
    #[serde(flatten)]
    pub finite: FiniteArgs,
    /// Interpolation scale s_n (boundary, jacobian).
    #[arg(long, value_parser = parse_real, default_value = "0.05")]
    pub s_n: f64,
    /// Constant interpolation path q (boundary).
    #[arg(long, value_parser = parse_real, default_value = "0")]
    pub q: f64,
    /// Finite-difference step in lambda (immse).
    #[arg(long, value_parser = parse_real, default_value = "0.05")]
    pub step: f64,
    /// Euler steps (jacobian).
    #[arg(long, default_value_t = 32)]
    pub n_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
pub struct SumRuleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub finite: FiniteArgs,
    /// Constant interpolation path q.
    #[arg(long, value_parser = parse_real)]
    pub q: f64,
    #[arg(long, value_parser = parse_real, default_value = "0.05")]
    pub s_n: f64,
    /// Gauss-Legendre nodes of the time integral.
    #[arg(long, default_value_t = 16)]
    pub time_nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
pub struct OdeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub finite: FiniteArgs,
    #[arg(long, value_parser = parse_real)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 32)]
    pub n_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
pub struct RateArgs {
    #[arg(long, value_enum, default_value = "wigner")]
    pub model: ModelName,
    /// Dimension (treated as a real number > 1).
    #[arg(long, value_parser = parse_real)]
    pub n: f64,
    /// Sparsity exponent: rho_n ~ n^-beta.
    #[arg(long, value_parser = parse_real, default_value = "0")]
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Subcommand)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Command {
    /// Mutual information and MMSE of the scalar Gaussian channel (JSON).
    Channel(ChannelArgs),
    /// Replica-symmetric potential at one point (JSON).
    Potential(PotentialArgs),
    /// Variational solution (JSON).
    Solve(SolveArgs),
    /// Phase curve over a gamma grid (CSV).
    Curve(CurveArgs),
    /// Threshold gamma_c by bisection on the minimiser jump (JSON).
    Threshold(ThresholdArgs),
    /// One exact small-n oracle check (CSV).
    Oracle(OracleArgs),
    /// Sum rule with its remainders along a constant path (CSV).
    Sumrule(SumRuleArgs),
    /// Adaptive interpolation path by Euler steps (CSV).
    Ode(OdeArgs),
    /// Rate of the finite-n theorems without their constant (JSON).
    Rate(RateArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Channel(_) => "channel",
            Command::Potential(_) => "potential",
            Command::Solve(_) => "solve",
            Command::Curve(_) => "curve",
            Command::Threshold(_) => "threshold",
            Command::Oracle(_) => "oracle",
            Command::Sumrule(_) => "sumrule",
            Command::Ode(_) => "ode",
            Command::Rate(_) => "rate",
        }
    }

    pub fn writes_csv(&self) -> bool {
        matches!(
            self,
            Command::Curve(_) | Command::Oracle(_) | Command::Sumrule(_) | Command::Ode(_)
        )
    }
}

/// Numerical overrides. Channel settings apply to `channel`; scan settings
/// to `solve`. Other commands use the library defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Args)]
pub struct Tolerances {
    /// Relative agreement required between successive quadrature orders.
    #[arg(long, global = true, value_parser = parse_real, default_value = "1e-10")]
    pub rel_tol: f64,
    /// Largest Gauss-Hermite order.
    #[arg(long, global = true, default_value_t = 1025)]
    pub max_order: usize,
    /// Nodes of the solver's coarse scan.
    #[arg(long, global = true, default_value_t = 512)]
    pub scan_nodes: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        let c = ChannelSettings::default();
        Tolerances {
            rel_tol: c.rel_tol,
            max_order: c.max_order,
            scan_nodes: SolverSettings::default().scan_nodes,
        }
    }
}

impl Tolerances {
    pub fn channel(&self) -> ChannelSettings {
        ChannelSettings {
            rel_tol: self.rel_tol,
            max_order: self.max_order,
            ..ChannelSettings::default()
        }
    }

    pub fn solver(&self) -> SolverSettings {
        SolverSettings {
            scan_nodes: self.scan_nodes,
            ..SolverSettings::default()
        }
    }
}

/// A complete, replayable run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub command: Command,
    pub seed: u64,
    /// `None` writes to standard output.
    pub output: Option<PathBuf>,
    /// `None` uses every available core.
    pub threads: Option<usize>,
    pub tolerances: Tolerances,
}

impl RunConfig {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run configs always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parameter(format!("run config: {e}")))
    }

    /// Checks every parameter that can be checked without computing.
    pub fn validate(&self) -> Result<()> {
        if self.threads == Some(0) {
            return Err(Error::Parameter("--threads must be positive".into()));
        }
        self.tolerances.channel().validate()?;
        self.tolerances.solver().validate()?;
        match &self.command {
            Command::Channel(a) => {
                a.prior.build()?;
                if a.snr < 0.0 {
                    return Err(Error::Parameter(format!(
                        "--snr must be >= 0, got {}",
                        a.snr
                    )));
                }
            }
            Command::Potential(a) => {
                let is_wishart = matches!(a.problem.build()?, Problem::Wishart(_));
                if is_wishart != a.q_v.is_some() {
                    return Err(Error::Parameter(
                        "--q-v is required for --model wishart and not allowed otherwise".into(),
                    ));
                }
            }
            Command::Solve(a) => {
                a.problem.build()?;
            }
            Command::Curve(a) => {
                a.prior.rho_required()?;
                ThresholdArgs {
                    model: a.model,
                    prior: a.prior.clone(),
                    alpha: a.alpha,
                    bracket_lo: 0.5,
                    bracket_hi: 1.5,
                }
                .model()?;
                if !(a.gamma_min >= 0.0 && a.gamma_max > a.gamma_min) {
                    return Err(Error::Parameter(
                        "need 0 <= --gamma-min < --gamma-max".into(),
                    ));
                }
                if a.points < 2 {
                    return Err(Error::Parameter("--points must be at least 2".into()));
                }
            }
            Command::Threshold(a) => {
                a.model()?;
                a.prior.rho_required()?;
            }
            Command::Oracle(a) => {
                a.finite.validate()?;
            }
            Command::Sumrule(a) => {
                a.finite.validate()?;
                if a.time_nodes == 0 {
                    return Err(Error::Parameter("--time-nodes must be positive".into()));
                }
            }
            Command::Ode(a) => {
                a.finite.validate()?;
                if a.n_steps == 0 {
                    return Err(Error::Parameter("--n-steps must be positive".into()));
                }
            }
            Command::Rate(_) => {}
        }
        Ok(())
    }
}

impl FiniteArgs {
    fn validate(&self) -> Result<()> {
        let prior = self.prior.build()?;
        if prior.is_gaussian() {
            return Err(Error::Unsupported(
                "exact enumeration needs a finite prior, not the Gaussian".into(),
            ));
        }
        if self.n == 0 {
            return Err(Error::Parameter("--n must be at least 1".into()));
        }
        if self.n_disorder < 2 {
            return Err(Error::Parameter("--n-disorder must be at least 2".into()));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::Parameter("--lambda must be >= 0".into()));
        }
        Ok(())
    }
}
