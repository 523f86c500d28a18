//! Configuration documents, the command-line entry point and the output bundle.

pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{config_hash, echo_config, key_reference, parse_config, parse_unchecked};
pub use output::{read_series_csv, series_csv, summary_json, write_bundle, Environment, Outcome};

use crate::error::Error;
use crate::scenarios::{RunSpec, ScenarioRegistry};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "radscatter", version, about = "Backward scattering runs and audits for the wave equation")]
#[command(after_long_help = key_reference())]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (required except for validate).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output bundle directory.
    #[arg(long, global = true, env = "RADSCATTER_OUT", default_value = "radscatter-out")]
    pub out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for randomized sampling; overrides the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Print nothing on success.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Solver gate: d'Alembert oracle, round trip, energy conservation.
    Validate,
    /// Scattering from a radiation field with decay fits.
    Homogeneous,
    /// Differences of corrections as T grows.
    Tlimit,
    /// The weak-null system with backscatter.
    Weaknull,
    /// Radial classical-null model.
    Nullradial,
    /// Backscatter kernels: oracle, envelopes, residuals.
    Backscatter,
    /// Morawetz identity, bulk sign, Hardy and Sobolev batteries.
    Audit,
    /// Exact-solution residual orders.
    Convergence,
}

impl Command {
    pub fn scenario(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Homogeneous => "homogeneous",
            Command::Tlimit => "tlimit",
            Command::Weaknull => "weaknull",
            Command::Nullradial => "nullradial",
            Command::Backscatter => "backscatter",
            Command::Audit => "audit",
            Command::Convergence => "convergence",
        }
    }
}

/// Builds the run spec from the command line: the document (or defaults for
/// validate), the subcommand's scenario and the seed override.
pub fn load_spec(cli: &Cli) -> Result<RunSpec, Error> {
    let scenario = cli.command.scenario();
    let mut spec = match &cli.config {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).map_err(|e| Error::range("--config", format!("{}: {e}", p.display())))?;
            let given = parse_unchecked(&text)?;
            if text_sets_scenario(&text) && given.scenario != scenario {
                return Err(Error::range(
                    "scenario",
                    format!("configuration names `{}` but the subcommand is `{scenario}`", given.scenario),
                ));
            }
            given
        }
        None if cli.command == Command::Validate => RunSpec::default(),
        None => return Err(Error::range("--config", format!("required for `{scenario}`"))),
    };
    spec.scenario = scenario.to_string();
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    spec.validate()?;
    Ok(spec)
}

fn text_sets_scenario(text: &str) -> bool {
    let mut in_run = false;
    for line in text.lines() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.starts_with('[') {
            in_run = body == "[run]";
        } else if in_run && body.split('=').next().map(str::trim) == Some("scenario") {
            return true;
        }
    }
    false
}

fn say(quiet: bool, msg: impl AsRef<str>) {
    if !quiet {
        println!("{}", msg.as_ref());
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return EXIT_CONFIG;
        }
        // A second initialization in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let scenario = cli.command.scenario();
    let env = Environment::current(cli.seed.unwrap_or_default());
    let spec = match load_spec(&cli) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            let summary = summary_json(
                scenario,
                None,
                None,
                &Outcome::Failed { stage: "config".into(), message: e.to_string() },
                &env,
            );
            if let Err(w) = write_bundle(&cli.out, &summary, None) {
                eprintln!("error: could not write {}: {w}", cli.out.display());
            }
            return EXIT_CONFIG;
        }
    };
    let env = Environment::current(spec.seed);
    let canon = echo_config(&spec);
    let hash = config_hash(&spec);
    let result = ScenarioRegistry::standard().run(&spec).map(|mut rep| {
        rep.provenance.config_hash = hash.clone();
        rep
    });
    let (summary, report, code) = match &result {
        Ok(rep) => {
            let code = if rep.passed() { EXIT_PASS } else { EXIT_FAIL };
            (summary_json(scenario, Some(&canon), Some(&hash), &Outcome::Finished(rep), &env), Some(rep), code)
        }
        Err(e) => {
            let stage = e.stage().unwrap_or(scenario).to_string();
            let code = if e.is_config() { EXIT_CONFIG } else { EXIT_RUNTIME };
            eprintln!("error: {e}");
            (
                summary_json(
                    scenario,
                    Some(&canon),
                    Some(&hash),
                    &Outcome::Failed { stage, message: e.to_string() },
                    &env,
                ),
                None,
                code,
            )
        }
    };
    if let Err(e) = write_bundle(&cli.out, &summary, report) {
        eprintln!("error: could not write {}: {e}", cli.out.display());
        return EXIT_RUNTIME;
    }
    if let Some(rep) = report {
        for e in &rep.exponents {
            let fitted = e.fitted.map(|f| format!("{:.4}", f.exponent)).unwrap_or_else(|| "n/a".into());
            say(
                cli.quiet,
                format!("{} {:<28} fitted {fitted} target {:.4} ± {}", mark(e.pass), e.name, e.target, e.tol),
            );
        }
        for c in rep.checks.iter() {
            let m = if c.informational { "INFO" } else { mark(c.pass) };
            say(cli.quiet, format!("{m} {:<28} {:.6e} (limit {:.3e})", c.name, c.value, c.threshold));
        }
        say(cli.quiet, format!("{scenario}: {} → {}", summary["status"].as_str().unwrap_or(""), cli.out.display()));
    }
    code
}

fn mark(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

#[cfg(test)]
mod tests;
