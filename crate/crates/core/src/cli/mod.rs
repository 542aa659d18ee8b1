//! Command-line driver.
//!
//! Data goes to `--output` (or standard output); progress and diagnostics go
//! to standard error. Every run that writes a file also writes
//! `<output>.manifest.json` with the full configuration.
//!
//! Exit codes: 0 success, 1 parameter/domain/unsupported/i-o error,
//! 2 numerical or search failure (including any failed curve row),
//! 3 resource limit.

mod config;
mod schema;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::error::ErrorKind;
use clap::Parser;
use serde::Serialize;
use serde_json::json;

use crate::channel::channel_point_with;
use crate::error::{Error, Result};
use crate::oracle::{self, OracleRow};
use crate::phase::{self, fmt_float, locate_threshold, theorem_rate_bound, ThresholdModel};
use crate::potential::{wigner_potential, wishart_potential};
use crate::varsolve::{solve_wigner_with, solve_wishart_with};

pub use config::{
    parse_real, ChannelArgs, Command, CurveArgs, FiniteArgs, ModelName, OdeArgs, OracleArgs,
    OracleCheck, PotentialArgs, PriorArgs, PriorName, ProblemArgs, RateArgs, RunConfig, SolveArgs,
    SumRuleArgs, ThresholdArgs, Tolerances,
};
pub use schema::{validate_manifest, CsvSchema, MANIFEST_SCHEMA_VERSION, ODE_HEADER};

#[derive(Debug, Parser)]
#[command(
    name = "sparse-spike",
    version,
    about = "Sparse spiked matrix estimation: potentials, phase curves and exact small-n checks"
)]
struct Cli {
    /// Seed of the disorder Monte Carlo.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when absent.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Worker threads; all available cores when absent.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Replay a run from a config or manifest JSON file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    tolerances: Tolerances,
    #[command(subcommand)]
    command: Option<Command>,
}

/// A curve row or check that failed without aborting the run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub gamma: f64,
    pub error: String,
    pub exit_code: i32,
}

/// Parses `argv` (program name first), runs it and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let config = match into_config(cli) {
        Ok(c) => c,
        Err(e) => return report(&e),
    };
    match execute(&config) {
        Ok(failures) if failures.is_empty() => 0,
        Ok(failures) => {
            for f in &failures {
                eprintln!("error: row gamma = {}: {}", f.gamma, f.error);
            }
            failures.iter().map(|f| f.exit_code).max().unwrap_or(2)
        }
        Err(e) => report(&e),
    }
}

fn report(e: &Error) -> i32 {
    eprintln!("error: {e}");
    e.exit_code()
}

fn into_config(cli: Cli) -> Result<RunConfig> {
    if let Some(path) = cli.config {
        if cli.command.is_some() {
            return Err(Error::Parameter(
                "give either --config or a subcommand, not both".into(),
            ));
        }
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| Error::Parameter(format!("{}: {e}", path.display())))?;
        let inner = match value.get("config") {
            Some(c) if value.get("schema_version").is_some() => c.clone(),
            _ => value,
        };
        return RunConfig::from_json(&inner.to_string());
    }
    let command = cli
        .command
        .ok_or_else(|| Error::Parameter("a subcommand or --config is required".into()))?;
    Ok(RunConfig {
        command,
        seed: cli.seed,
        output: cli.output,
        threads: cli.threads,
        tolerances: cli.tolerances,
    })
}

/// Validates, computes and writes one run. Rows that failed inside an
/// otherwise successful scan are returned rather than raised.
pub fn execute(config: &RunConfig) -> Result<Vec<Failure>> {
    config.validate()?;
    let start = Instant::now();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = config.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Resource(format!("thread pool: {e}")))?;
    let (bytes, failures) = pool.install(|| produce(config))?;
    match &config.output {
        Some(path) => {
            std::fs::write(path, &bytes)
                .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            let manifest = manifest(config, &failures, start.elapsed().as_secs_f64());
            let mpath = manifest_path(path);
            std::fs::write(&mpath, manifest)
                .map_err(|e| Error::Io(format!("{}: {e}", mpath.display())))?;
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(&bytes)?;
            out.flush()?;
        }
    }
    Ok(failures)
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn manifest(config: &RunConfig, failures: &[Failure], wall: f64) -> String {
    let m = json!({
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": config.command.name(),
        "format": if config.command.writes_csv() { "csv" } else { "json" },
        "config": config,
        "failures": failures,
        "wall_time_seconds": wall,
    });
    let mut s = serde_json::to_string_pretty(&m).expect("manifests always serialize");
    s.push('\n');
    s
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("results always serialize");
    s.push('\n');
    s.into_bytes()
}

fn produce(config: &RunConfig) -> Result<(Vec<u8>, Vec<Failure>)> {
    let tol = &config.tolerances;
    let mut failures = Vec::new();
    let mut buf = Vec::new();
    match &config.command {
        Command::Channel(a) => {
            let prior = a.prior.build()?;
            buf = to_json(&channel_point_with(&prior, a.snr, &tol.channel())?);
        }
        Command::Potential(a) => {
            let (lambda, value) = match a.problem.build()? {
                config::Problem::Wigner(s) => (s.lambda, wigner_potential(&s, a.q)?),
                config::Problem::Wishart(s) => (
                    s.lambda,
                    wishart_potential(&s, a.q, a.q_v.expect("validated"))?,
                ),
            };
            buf = to_json(&json!({
                "model": a.problem.model,
                "lambda": lambda,
                "q": a.q,
                "q_v": a.q_v,
                "value": value,
            }));
        }
        Command::Solve(a) => {
            let sol = match a.problem.build()? {
                config::Problem::Wigner(s) => solve_wigner_with(&s, &tol.solver())?,
                config::Problem::Wishart(s) => solve_wishart_with(&s, &tol.solver())?,
            };
            buf = to_json(&sol);
        }
        Command::Curve(a) => {
            let grid = phase::gamma_grid(a.gamma_min, a.gamma_max, a.points);
            let rho = a.prior.rho.expect("validated");
            log::info!("scanning {} gamma values", grid.len());
            let model = ThresholdArgs {
                model: a.model,
                prior: a.prior.clone(),
                alpha: a.alpha,
                bracket_lo: 0.5,
                bracket_hi: 1.5,
            }
            .model()?;
            match model {
                ThresholdModel::Wigner { family } => {
                    let rows = phase::wigner_curve(family, rho, &grid)?;
                    collect_failures(&rows, &mut failures);
                    phase::write_wigner_csv(&rows, &mut buf)?;
                }
                ThresholdModel::Wishart { alpha } => {
                    let rows = phase::wishart_curve(rho, alpha, &grid)?;
                    collect_failures(&rows, &mut failures);
                    phase::write_wishart_csv(&rows, &mut buf)?;
                }
            }
        }
        Command::Threshold(a) => {
            let rho = a.prior.rho.expect("validated");
            let t = locate_threshold(a.model()?, rho, (a.bracket_lo, a.bracket_hi))?;
            buf = to_json(&t);
        }
        Command::Oracle(a) => {
            let rows = oracle_rows(a, config.seed)?;
            oracle::write_oracle_csv(&rows, &mut buf)?;
        }
        Command::Sumrule(a) => {
            let rows = sum_rule_rows(a, config.seed)?;
            oracle::write_oracle_csv(&rows, &mut buf)?;
        }
        Command::Ode(a) => {
            let f = &a.finite;
            let prior = f.prior.build()?;
            let sol = oracle::adaptive_ode_solve(
                f.n,
                &prior,
                f.lambda,
                a.epsilon,
                a.n_steps,
                f.n_disorder,
                config.seed,
            )?;
            write_ode_csv(&sol, &mut buf)?;
        }
        Command::Rate(a) => {
            let rate = theorem_rate_bound(a.model.into(), a.n, a.beta)?;
            buf = to_json(&json!({
                "model": a.model,
                "n": a.n,
                "beta": a.beta,
                "rate": rate,
            }));
        }
    }
    Ok((buf, failures))
}

fn collect_failures<T>(rows: &[phase::CurveRow<T>], failures: &mut Vec<Failure>) {
    for row in rows {
        if let Err(f) = row {
            failures.push(Failure {
                gamma: f.gamma,
                error: f.error.to_string(),
                exit_code: f.error.exit_code(),
            });
        }
    }
}

fn finite_params(f: &FiniteArgs, seed: u64) -> String {
    let rho = f.prior.rho.map_or(String::new(), |r| format!(";rho={r}"));
    let prior = format!("{:?}", f.prior.prior).to_lowercase();
    format!(
        "n={};prior={prior}{rho};lambda={};n_disorder={};seed={seed}",
        f.n, f.lambda, f.n_disorder
    )
}

fn row(
    check: &str,
    parameters: &str,
    statistic: &str,
    value: f64,
    std_err: f64,
    pass: bool,
) -> OracleRow {
    OracleRow {
        check: check.into(),
        parameters: parameters.into(),
        statistic: statistic.into(),
        value,
        std_err,
        pass,
    }
}

fn oracle_rows(a: &OracleArgs, seed: u64) -> Result<Vec<OracleRow>> {
    let f = &a.finite;
    let prior = f.prior.build()?;
    let rho = prior.rho();
    let base = finite_params(f, seed);
    Ok(match a.check {
        OracleCheck::Mi => {
            let (mi, se) =
                oracle::mutual_information_mc(f.n, &prior, f.lambda, f.n_disorder, seed)?;
            vec![row("mi", &base, "mi_per_n", mi, se, mi >= -3.0 * se)]
        }
        OracleCheck::Nishimori => {
            let batch = oracle::sample_batch(f.n, &prior, f.lambda, seed, f.n_disorder)?;
            let (v, se) = oracle::nishimori_check(&batch)?;
            vec![row("nishimori", &base, "violation", v, se, v <= 3.0 * se)]
        }
        OracleCheck::Boundary => {
            let g = oracle::boundary_values_check(
                f.n,
                &prior,
                f.lambda,
                a.q,
                a.s_n,
                f.n_disorder,
                seed,
            )?;
            let p = format!("{base};q={};s_n={}", a.q, a.s_n);
            // both gaps are I-MMSE integrals over an SNR interval of length s_n
            let bound = rho * a.s_n / 2.0;
            vec![
                row(
                    "boundary",
                    &p,
                    "gap_t0",
                    g.gap_t0,
                    g.gap_t0_err,
                    g.gap_t0 <= bound + 3.0 * g.gap_t0_err,
                ),
                row(
                    "boundary",
                    &p,
                    "gap_t1",
                    g.gap_t1,
                    g.gap_t1_err,
                    g.gap_t1 <= bound + 3.0 * g.gap_t1_err,
                ),
                row(
                    "boundary",
                    &p,
                    "c_emp",
                    g.c_emp,
                    f64::NAN,
                    g.c_emp.is_finite(),
                ),
            ]
        }
        OracleCheck::Fluctuation => {
            let batch = oracle::sample_batch(f.n, &prior, f.lambda, seed, f.n_disorder)?;
            let (thermal, quenched) = oracle::overlap_fluctuation(&batch, None)?;
            vec![
                row(
                    "fluctuation",
                    &base,
                    "thermal_var",
                    thermal,
                    f64::NAN,
                    thermal >= 0.0,
                ),
                row(
                    "fluctuation",
                    &base,
                    "quenched_var",
                    quenched,
                    f64::NAN,
                    quenched >= 0.0,
                ),
            ]
        }
        OracleCheck::Immse => {
            let c = oracle::finite_n_immse(f.n, &prior, f.lambda, a.step, f.n_disorder, seed)?;
            let p = format!("{base};step={}", a.step);
            let diff = c.fd_slope - c.mmse_slope;
            vec![
                row(
                    "immse",
                    &p,
                    "fd_slope",
                    c.fd_slope,
                    f64::NAN,
                    c.fd_slope.is_finite(),
                ),
                row(
                    "immse",
                    &p,
                    "mmse_slope",
                    c.mmse_slope,
                    f64::NAN,
                    c.mmse_slope >= 0.0,
                ),
                row(
                    "immse",
                    &p,
                    "full_mmse_slope",
                    c.full_mmse_slope,
                    f64::NAN,
                    c.full_mmse_slope >= c.mmse_slope,
                ),
                row(
                    "immse",
                    &p,
                    "difference",
                    diff,
                    c.std_err,
                    diff.abs() <= 3.0 * c.std_err,
                ),
            ]
        }
        OracleCheck::Jacobian => {
            let (j, err) =
                oracle::ode_jacobian(f.n, &prior, f.lambda, a.s_n, a.n_steps, f.n_disorder, seed)?;
            let p = format!("{base};s_n={};n_steps={}", a.s_n, a.n_steps);
            vec![row("jacobian", &p, "dR_deps", j, err, j >= 1.0 - 3.0 * err)]
        }
    })
}

fn sum_rule_rows(a: &SumRuleArgs, seed: u64) -> Result<Vec<OracleRow>> {
    let f = &a.finite;
    let prior = f.prior.build()?;
    let s = oracle::sum_rule_check(
        f.n,
        &prior,
        f.lambda,
        a.q,
        a.s_n,
        f.n_disorder,
        a.time_nodes,
        seed,
    )?;
    let p = format!(
        "{};q={};s_n={};time_nodes={}",
        finite_params(f, seed),
        a.q,
        a.s_n,
        a.time_nodes
    );
    let bound = 10.0 * (prior.rho() * a.s_n + f.lambda / f.n as f64) + 3.0 * s.mc_err;
    Ok(vec![
        row("sumrule", &p, "lhs", s.lhs, f64::NAN, s.lhs.is_finite()),
        row("sumrule", &p, "rhs", s.rhs, f64::NAN, s.rhs.is_finite()),
        row(
            "sumrule",
            &p,
            "residual",
            s.residual,
            s.mc_err,
            s.residual.abs() <= bound,
        ),
        row(
            "sumrule",
            &p,
            "remainder_r1",
            s.remainder_r1,
            f64::NAN,
            s.remainder_r1 == 0.0,
        ),
        row(
            "sumrule",
            &p,
            "remainder_r2",
            s.remainder_r2,
            f64::NAN,
            s.remainder_r2 >= 0.0,
        ),
        row(
            "sumrule",
            &p,
            "remainder_r3",
            s.remainder_r3,
            f64::NAN,
            s.remainder_r3 >= 0.0,
        ),
        row("sumrule", &p, "c_emp", s.c_emp, f64::NAN, s.c_emp <= 10.0),
    ])
}

fn write_ode_csv<W: Write>(sol: &oracle::OdeSolution, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(ODE_HEADER).map_err(io)?;
    for (k, &(t, r)) in sol.r_path.iter().enumerate() {
        let q = sol.q_path.get(k).map_or(f64::NAN, |p| p.1);
        w.write_record([fmt_float(t), fmt_float(r), fmt_float(q)])
            .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> RunConfig {
        let cli = Cli::try_parse_from(std::iter::once("sparse-spike").chain(args.iter().copied()))
            .unwrap();
        into_config(cli).unwrap()
    }

    #[test]
    fn config_round_trips_through_json() {
        for args in [
            &["channel", "--prior", "gaussian", "--snr", "3"][..],
            &[
                "solve", "--model", "wigner", "--prior", "ber", "--rho", "1e-6", "--gamma", "0.5",
            ],
            &[
                "curve", "--prior", "berrad", "--rho", "1e-8", "--points", "21", "--seed", "4",
            ],
            &[
                "sumrule", "--n", "6", "--rho", "0.4", "--lambda", "2", "--q", "0.2",
            ],
            &[
                "oracle",
                "--check",
                "nishimori",
                "--n",
                "5",
                "--rho",
                "0.3",
                "--lambda",
                "1",
            ],
            &["rate", "--n", "1e4", "--beta", "0.1", "--rel-tol", "1e-9"],
        ] {
            let c = parse(args);
            c.validate().unwrap();
            assert_eq!(RunConfig::from_json(&c.to_json()).unwrap(), c, "{args:?}");
        }
    }

    #[test]
    fn scientific_notation_is_accepted() {
        assert_eq!(parse_real("1e-12"), Ok(1e-12));
        assert_eq!(parse_real("2.5E3"), Ok(2500.0));
        assert!(parse_real("nan").is_err());
        assert!(parse_real("1e400").is_err());
    }

    #[test]
    fn validation_precedes_computation() {
        let bad = [
            &["solve", "--prior", "ber", "--rho", "1e-6"][..],
            &["solve", "--prior", "ber", "--rho", "2", "--gamma", "1"],
            &[
                "potential",
                "--model",
                "wishart",
                "--prior",
                "berrad",
                "--rho",
                "0.1",
                "--alpha",
                "1",
                "--gamma",
                "1",
                "--q",
                "0.5",
            ],
            &[
                "oracle", "--check", "mi", "--n", "4", "--prior", "gaussian", "--lambda", "1",
            ],
            &["curve", "--prior", "gaussian"],
        ];
        for args in bad {
            assert!(parse(args).validate().is_err(), "{args:?}");
        }
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run(["sparse-spike", "channel", "--bogus"]), 1);
        assert_eq!(run(["sparse-spike", "solve", "--rho", "0.5"]), 1);
        assert_eq!(
            run([
                "sparse-spike",
                "oracle",
                "--check",
                "mi",
                "--n",
                "40",
                "--rho",
                "0.5",
                "--lambda",
                "1"
            ]),
            3
        );
    }
}
