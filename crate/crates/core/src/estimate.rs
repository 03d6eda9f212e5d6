//! End-to-end estimation: reduce zero counts, plan, solve, lift back.

use std::fmt;
use std::str::FromStr;

use num_rational::BigRational;
use num_traits::Zero;
use thiserror::Error;

use crate::closed::{execute_plan, Method, MleResult, SolveError};
use crate::decompose::{build_plan, DecompositionTree};
use crate::diagram::{log_likelihood, reduce_zero_counts, DiagramError, FrequencyTable, GreechieDiagram, ProbabilityAssignment, Reduction};
use crate::numeric::{solve_numeric, NumericError, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EstimateMethod {
    /// Closed forms where the plan allows, numeric elsewhere.
    #[default]
    Auto,
    /// Closed forms only; fails if any part needs the numeric solver.
    Closed,
    /// Numeric solver on the whole reduced diagram.
    Numeric,
}

impl FromStr for EstimateMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(Self::Auto),
            "closed" => Ok(Self::Closed),
            "numeric" => Ok(Self::Numeric),
            other => Err(format!("unknown method `{other}` (expected auto, closed or numeric)")),
        }
    }
}

impl fmt::Display for EstimateMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Auto => "auto",
            Self::Closed => "closed",
            Self::Numeric => "numeric",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimateError {
    #[error(transparent)]
    Diagram(#[from] DiagramError),
    #[error("operations {0:?} have no observed outcome; their probabilities cannot sum to 1")]
    EmptyOperations(Vec<String>),
    #[error("after dropping unobserved outcomes, operation {inner} lies inside {outer}; no assignment gives every observed outcome positive probability")]
    NestedOperations { inner: String, outer: String },
    #[error("no closed form: the decomposition needs the numeric solver")]
    NoClosedForm,
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
}

impl EstimateError {
    /// True when the failure is an iterative solver running out of budget.
    pub fn is_nonconvergence(&self) -> bool {
        match self {
            EstimateError::Numeric(NumericError::NonConvergence { .. }) => true,
            EstimateError::Solve(e) => matches!(
                e.root_cause(),
                SolveError::Numeric(NumericError::NonConvergence { .. }) | SolveError::NonConvergence { .. }
            ),
            _ => false,
        }
    }
}

/// An estimate over the original diagram, plus how it was reached.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    /// Probabilities over the original outcomes; zero-count outcomes get 0.
    pub result: MleResult,
    pub reduction: Reduction,
    /// Plan over the reduced diagram; `None` for forced numeric solves.
    pub plan: Option<DecompositionTree>,
}

impl Estimate {
    pub fn probabilities(&self) -> &ProbabilityAssignment {
        &self.result.probabilities
    }
}

/// Estimates outcome probabilities from counts.
pub fn estimate(
    diagram: &GreechieDiagram,
    freq: &FrequencyTable,
    method: EstimateMethod,
    config: &SolverConfig,
) -> Result<Estimate, EstimateError> {
    let reduction = reduce_zero_counts(diagram, freq)?;
    if !reduction.emptied_edges.is_empty() {
        return Err(EstimateError::EmptyOperations(
            reduction.emptied_edges.iter().map(|&e| diagram.edge_label(e)).collect(),
        ));
    }
    if let Some((inner, outer)) = nested_operations(&reduction.diagram) {
        return Err(EstimateError::NestedOperations {
            inner: reduction.diagram.edge_label(inner),
            outer: reduction.diagram.edge_label(outer),
        });
    }
    let (reduced, plan) = match method {
        EstimateMethod::Numeric => (solve_numeric(&reduction.diagram, &reduction.freq, config)?, None),
        EstimateMethod::Auto | EstimateMethod::Closed => {
            let plan = build_plan(&reduction.diagram);
            if method == EstimateMethod::Closed && plan.has_numeric_leaf() {
                return Err(EstimateError::NoClosedForm);
            }
            let result = execute_plan(&plan, &reduction.freq, config)?;
            if method == EstimateMethod::Closed && result.diagnostics.methods.contains(&Method::Numeric) {
                return Err(EstimateError::NoClosedForm);
            }
            (result, Some(plan))
        }
    };
    let result = lift(diagram, freq, &reduction, reduced);
    Ok(Estimate { result, reduction, plan })
}

/// A pair of operations where the first is a proper subset of the second.
/// Normalizing both forces the difference to probability 0, which is
/// impossible when every remaining outcome was observed. Only diagrams that
/// violate G1 can reach this state through zero-count reduction.
fn nested_operations(diagram: &GreechieDiagram) -> Option<(usize, usize)> {
    let ops = diagram.operations();
    (0..ops.len()).find_map(|i| {
        (0..ops.len())
            .find(|&j| i != j && ops[i].len() < ops[j].len() && ops[i].members().iter().all(|&x| ops[j].contains(x)))
            .map(|j| (i, j))
    })
}

fn lift(diagram: &GreechieDiagram, freq: &FrequencyTable, reduction: &Reduction, reduced: MleResult) -> MleResult {
    if reduction.is_identity() {
        return reduced;
    }
    let n = diagram.outcome_count();
    let p = reduction.lift(reduced.probabilities.values(), 0.0, n);
    let exact = reduced.exact.map(|v| reduction.lift(&v, BigRational::zero(), n));
    let probabilities = ProbabilityAssignment::new(p);
    MleResult {
        log_likelihood: log_likelihood(freq, &probabilities),
        probabilities,
        exact,
        method: reduced.method,
        residual: reduced.residual,
        diagnostics: reduced.diagnostics,
    }
}
