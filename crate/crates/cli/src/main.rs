//! `greechie-mle`: validate, classify and estimate outcome probabilities on
//! Greechie diagrams from a JSON document.
//!
//! Exit codes: 0 success, 1 validation or data failure, 2 usage or parse
//! error, 3 no closed form, 4 solver did not converge, 5 self-check or
//! oracle dominance failure.

mod input;
mod report;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use greechie_mle::oracle::{brute_force_mle, sample_feasible, OracleBudget, OracleError};
use greechie_mle::{
    build_plan, estimate, log_likelihood, sample_outcomes, EstimateError, EstimateMethod,
    OperationPolicy, ProbabilityAssignment, SamplerError, SolverConfig,
};

use crate::input::{load, InputError, Loaded};
use crate::report::{result_document, result_text, tree_json, tree_text, ValidationSummary};

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_NO_CLOSED_FORM: u8 = 3;
const EXIT_NONCONVERGENCE: u8 = 4;
const EXIT_DISAGREEMENT: u8 = 5;

/// Agreement required between the closed-form and numeric routes.
const SELF_CHECK_TOLERANCE: f64 = 1e-8;
/// Slack allowed when the oracle's best point beats the estimate.
const DOMINANCE_SLACK: f64 = 1e-9;

#[derive(Parser)]
#[command(name = "greechie-mle", version, about = "Maximum likelihood estimation on Greechie diagrams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Auto,
    Closed,
    Numeric,
}

impl From<MethodArg> for EstimateMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Auto => EstimateMethod::Auto,
            MethodArg::Closed => EstimateMethod::Closed,
            MethodArg::Numeric => EstimateMethod::Numeric,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check G1, G2 (OMP and OML) and the pairwise intersection condition.
    Validate {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Print the decomposition plan and whether closed forms exist.
    Classify {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Estimate outcome probabilities from the document's counts.
    Estimate {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "auto")]
        method: MethodArg,
        /// KKT tolerance for the numeric solver.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        /// Also solve numerically and require agreement within 1e-8.
        #[arg(long)]
        self_check: bool,
    },
    /// Draw synthetic counts from `true_probs` and `policy`.
    Sample {
        file: PathBuf,
        /// Number of trials.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compare the estimate's likelihood with a brute-force search.
    OracleCheck {
        file: PathBuf,
        #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1_000, value_parser = clap::value_parser!(u64).range(1..))]
        refine_steps: u64,
        /// Replace the estimate with a deliberately worse point.
        #[arg(long, hide = true)]
        corrupt_estimate: bool,
    },
}

/// A failed command: exit code plus a message for stderr.
struct Failure(u8, String);

impl From<InputError> for Failure {
    fn from(e: InputError) -> Self {
        Failure(EXIT_USAGE, e.to_string())
    }
}

impl From<EstimateError> for Failure {
    fn from(e: EstimateError) -> Self {
        let code = if e == EstimateError::NoClosedForm {
            EXIT_NO_CLOSED_FORM
        } else if e.is_nonconvergence() {
            EXIT_NONCONVERGENCE
        } else {
            EXIT_FAILURE
        };
        Failure(code, e.to_string())
    }
}

type Outcome = Result<(String, u8), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GREECHIE_MLE_LOG", "warn")).init();
    let cli = Cli::parse();
    let outcome = run(cli.command);
    match outcome {
        Ok((stdout, code)) => {
            let mut out = std::io::stdout().lock();
            let _ = out.write_all(stdout.as_bytes());
            ExitCode::from(code)
        }
        Err(Failure(code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Validate { file, format } => validate(&load(&file)?, format),
        Command::Classify { file, format } => classify(&load(&file)?, format),
        Command::Estimate {
            file,
            method,
            tol,
            format,
            self_check,
        } => run_estimate(&load(&file)?, method.into(), tol, format, self_check),
        Command::Sample { file, n, seed } => sample(&load(&file)?, n, seed),
        Command::OracleCheck {
            file,
            samples,
            seed,
            refine_steps,
            corrupt_estimate,
        } => oracle_check(&load(&file)?, samples, seed, refine_steps, corrupt_estimate),
    }
}

fn json(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values serialize");
    s.push('\n');
    s
}

fn validate(loaded: &Loaded, format: Format) -> Outcome {
    let summary = ValidationSummary::of(&loaded.diagram);
    let code = if summary.omp() { 0 } else { EXIT_FAILURE };
    let out = match format {
        Format::Text => summary.text(),
        Format::Json => json(&serde_json::json!({
            "g1": summary.g1,
            "intersection": summary.intersection,
            "g2_omp": summary.g2_omp,
            "g2_oml": summary.g2_oml,
            "omp": summary.omp(),
            "oml": summary.oml(),
        })),
    };
    Ok((out, code))
}

fn classify(loaded: &Loaded, format: Format) -> Outcome {
    let plan = build_plan(&loaded.diagram);
    let out = match format {
        Format::Text => format!("{}verdict: {}\n", tree_text(&plan), plan.verdict()),
        Format::Json => json(&serde_json::json!({
            "decomposition": tree_json(&plan.root),
            "verdict": plan.verdict().to_string(),
        })),
    };
    Ok((out, 0))
}

fn run_estimate(loaded: &Loaded, method: EstimateMethod, tol: f64, format: Format, self_check: bool) -> Outcome {
    let freq = loaded.counts()?;
    let config = SolverConfig {
        kkt_tolerance: tol,
        ..SolverConfig::default()
    };
    config.validate().map_err(|e| Failure(EXIT_USAGE, e.to_string()))?;
    let e = estimate(&loaded.diagram, &freq, method, &config)?;

    let mut disagreement = None;
    if self_check {
        let other_method = if method == EstimateMethod::Numeric {
            EstimateMethod::Auto
        } else {
            EstimateMethod::Numeric
        };
        let other = estimate(&loaded.diagram, &freq, other_method, &config)?;
        let diff = e
            .probabilities()
            .values()
            .iter()
            .zip(other.probabilities().values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        log::info!("self-check: {method} and {other_method} differ by at most {diff:.3e}");
        disagreement = Some(diff);
    }

    let mut out = match format {
        Format::Json => {
            let mut doc = result_document(&loaded.diagram, &e, &loaded.digest);
            if let Some(diff) = disagreement {
                doc["self_check"] = serde_json::json!({
                    "max_difference": diff,
                    "passed": diff < SELF_CHECK_TOLERANCE,
                });
            }
            json(&doc)
        }
        Format::Text => result_text(&loaded.diagram, &e),
    };
    match disagreement {
        Some(diff) if diff >= SELF_CHECK_TOLERANCE => {
            if let Format::Text = format {
                out.push_str(&format!("self-check: FAIL (max difference {diff:.3e})\n"));
            }
            eprintln!("error: closed-form and numeric estimates differ by {diff:.3e}");
            Ok((out, EXIT_DISAGREEMENT))
        }
        _ => Ok((out, 0)),
    }
}

fn sample(loaded: &Loaded, n: u64, seed: u64) -> Outcome {
    let d = &loaded.diagram;
    let truth = loaded.true_probs()?;
    let policy = match &loaded.doc.policy {
        Some(w) => OperationPolicy::new(d, w.clone()).map_err(|e| Failure(EXIT_FAILURE, e.to_string()))?,
        None => OperationPolicy::uniform(d),
    };
    let freq = sample_outcomes(d, &truth, &policy, n, seed).map_err(|e| {
        let code = if e == SamplerError::NoTrials { EXIT_USAGE } else { EXIT_FAILURE };
        Failure(code, e.to_string())
    })?;
    let counts: serde_json::Map<String, serde_json::Value> = (0..d.outcome_count())
        .map(|x| (d.name(x).to_string(), freq.get(x).into()))
        .collect();
    Ok((
        json(&serde_json::json!({
            "outcomes": loaded.doc.outcomes,
            "operations": loaded.doc.operations,
            "counts": counts,
        })),
        0,
    ))
}

fn oracle_check(loaded: &Loaded, samples: u64, seed: u64, refine_steps: u64, corrupt: bool) -> Outcome {
    let d = &loaded.diagram;
    let freq = loaded.counts()?;
    let e = estimate(d, &freq, EstimateMethod::Auto, &SolverConfig::default())?;
    let budget = OracleBudget {
        sample_count: samples as usize,
        refine_steps: refine_steps as usize,
        rng_seed: seed,
    };
    let mut p = e.probabilities().clone();
    if corrupt {
        p = corrupted(d, &p, &budget);
    }
    let best = brute_force_mle(d, &freq, &budget).map_err(|err| match err {
        OracleError::NoInteriorPoint => Failure(EXIT_NONCONVERGENCE, err.to_string()),
        other => Failure(EXIT_FAILURE, other.to_string()),
    })?;
    let l_estimate = log_likelihood(&freq, &p);
    let l_oracle = log_likelihood(&freq, &best);
    let passed = l_estimate >= l_oracle - DOMINANCE_SLACK;
    let out = format!(
        "estimate log-likelihood: {l_estimate}\noracle log-likelihood: {l_oracle}\nmargin: {:.3e}\n{}\n",
        l_estimate - l_oracle,
        if passed { "PASS" } else { "FAIL" }
    );
    Ok((out, if passed { 0 } else { EXIT_DISAGREEMENT }))
}

/// Midpoint between `p` and a far-off feasible point; strictly worse than
/// `p` whenever `p` is the unique maximizer.
fn corrupted(d: &greechie_mle::GreechieDiagram, p: &ProbabilityAssignment, budget: &OracleBudget) -> ProbabilityAssignment {
    let far = sample_feasible(d, p, budget)
        .ok()
        .and_then(|walk| {
            walk.take(1_000).max_by(|a, b| distance(a, p).total_cmp(&distance(b, p)))
        })
        .unwrap_or_else(|| p.clone());
    ProbabilityAssignment::new(p.values().iter().zip(far.values()).map(|(a, b)| 0.5 * (a + b)).collect())
}

fn distance(a: &ProbabilityAssignment, b: &ProbabilityAssignment) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
