//! General solver for the concave program
//!
//! ```text
//! maximize   Σ n(x) ln p(x)
//! subject to Σ_{x∈B} p(x) = 1 for every operation B,  p ≥ 0
//! ```
//!
//! by dual coordinate ascent. With one multiplier λ_B per operation,
//! stationarity gives p(x) = n(x) / Σ_{B∋x} λ_B. Each coordinate step solves
//! the scalar equation Σ_{x∈B} n(x) / (λ_B + r_x) = 1, whose left side is
//! strictly decreasing on the admissible half-line, so it always has a
//! bracketed unique root. Sweeps repeat until every edge sum is within the
//! KKT tolerance of 1.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::closed::{Diagnostics, Method, MleResult};
use crate::diagram::{FrequencyTable, GreechieDiagram, ProbabilityAssignment};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericError {
    #[error("outcome `{0}` has zero count; reduce zero counts before solving")]
    NonPositiveCount(String),
    #[error("no convergence after {sweeps} sweeps (max edge-sum gap {residual:.3e})")]
    NonConvergence { sweeps: usize, residual: f64 },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub kkt_tolerance: f64,
    pub max_sweeps: usize,
    pub inner_root_tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            kkt_tolerance: 1e-10,
            max_sweeps: 100_000,
            inner_root_tolerance: 1e-14,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), NumericError> {
        if self.kkt_tolerance.is_nan() || self.kkt_tolerance <= 0.0 {
            return Err(NumericError::InvalidConfig("kkt_tolerance must be positive"));
        }
        if self.inner_root_tolerance.is_nan() || self.inner_root_tolerance <= 0.0 {
            return Err(NumericError::InvalidConfig("inner_root_tolerance must be positive"));
        }
        if self.max_sweeps == 0 {
            return Err(NumericError::InvalidConfig("max_sweeps must be at least 1"));
        }
        Ok(())
    }
}

/// One Lagrange multiplier per operation, in operation order.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    pub multipliers: Vec<f64>,
}

/// Outcome of one scalar multiplier solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerSolve {
    pub multiplier: f64,
    /// Bracket in force before the first Newton step.
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
}

/// Solves Σ n_i / (λ + r_i) = 1 for λ > −min r_i.
///
/// `start` seeds Newton when it lies inside the bracket. Newton steps that
/// leave the current bracket are replaced by bisection.
pub fn solve_edge_multiplier(counts: &[f64], rest: &[f64], start: f64, tol: f64) -> InnerSolve {
    let f = |lambda: f64| -> (f64, f64) {
        let mut value = -1.0;
        let mut slope = 0.0;
        for (&n, &r) in counts.iter().zip(rest) {
            let d = lambda + r;
            value += n / d;
            slope -= n / (d * d);
        }
        (value, slope)
    };
    let total: f64 = counts.iter().sum();
    let min_rest = rest.iter().copied().fold(f64::INFINITY, f64::min);
    let pole = -min_rest;
    let mut lo = pole + (pole.abs() * f64::EPSILON).max(1e-300);
    let mut hi = pole + total;
    let (bracket_lo, bracket_hi) = (lo, hi);

    let mut lambda = if start > lo && start < hi { start } else { 0.5 * (lo + hi) };
    let mut iterations = 0;
    for _ in 0..200 {
        iterations += 1;
        let (value, slope) = f(lambda);
        if value == 0.0 {
            break;
        }
        if value > 0.0 {
            lo = lambda;
        } else {
            hi = lambda;
        }
        let newton = lambda - value / slope;
        let next = if newton > lo && newton < hi && newton.is_finite() {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - lambda).abs();
        lambda = next;
        if step <= tol * lambda.abs().max(1.0) || hi - lo <= tol * lambda.abs().max(1.0) {
            break;
        }
    }
    InnerSolve {
        multiplier: lambda,
        lower: bracket_lo,
        upper: bracket_hi,
        iterations,
    }
}

/// Dual coordinate ascent state over a diagram with strictly positive counts.
pub struct DualAscent<'a> {
    diagram: &'a GreechieDiagram,
    counts: Vec<f64>,
    multipliers: Vec<f64>,
    /// Σ_{B∋x} λ_B per outcome.
    denominators: Vec<f64>,
    inner_tolerance: f64,
}

impl<'a> DualAscent<'a> {
    /// Initializes λ_B = n(B).
    pub fn new(
        diagram: &'a GreechieDiagram,
        freq: &FrequencyTable,
        config: &SolverConfig,
    ) -> Result<Self, NumericError> {
        config.validate()?;
        if let Some(x) = (0..diagram.outcome_count()).find(|&x| freq.get(x) == 0) {
            return Err(NumericError::NonPositiveCount(diagram.name(x).to_string()));
        }
        let counts: Vec<f64> = freq.counts().iter().map(|&n| n as f64).collect();
        let multipliers = diagram
            .operations()
            .iter()
            .map(|op| op.members().iter().map(|&x| counts[x]).sum())
            .collect();
        let mut state = Self {
            diagram,
            counts,
            multipliers,
            denominators: Vec::new(),
            inner_tolerance: config.inner_root_tolerance,
        };
        state.refresh();
        Ok(state)
    }

    fn refresh(&mut self) {
        self.denominators = (0..self.diagram.outcome_count())
            .map(|x| {
                self.diagram
                    .operations_containing(x)
                    .iter()
                    .map(|&e| self.multipliers[e])
                    .sum()
            })
            .collect();
    }

    /// Exact coordinate minimization of the dual in λ_edge.
    pub fn update_edge(&mut self, edge: usize) -> InnerSolve {
        let members = self.diagram.operations()[edge].members();
        let old = self.multipliers[edge];
        let counts: Vec<f64> = members.iter().map(|&x| self.counts[x]).collect();
        let rest: Vec<f64> = members.iter().map(|&x| self.denominators[x] - old).collect();
        let solve = solve_edge_multiplier(&counts, &rest, old, self.inner_tolerance);
        self.multipliers[edge] = solve.multiplier;
        for (&x, &r) in members.iter().zip(&rest) {
            self.denominators[x] = r + solve.multiplier;
        }
        solve
    }

    /// One pass over all operations in declaration order; returns the max
    /// edge-sum gap afterwards.
    pub fn sweep(&mut self) -> f64 {
        for e in 0..self.diagram.operation_count() {
            self.update_edge(e);
        }
        self.refresh();
        self.edge_gap()
    }

    pub fn primal(&self) -> ProbabilityAssignment {
        ProbabilityAssignment::new(
            self.counts
                .iter()
                .zip(&self.denominators)
                .map(|(n, d)| n / d)
                .collect(),
        )
    }

    pub fn edge_gap(&self) -> f64 {
        self.primal().max_edge_gap(self.diagram)
    }

    /// Σ_B λ_B − Σ_x n(x) ln Σ_{B∋x} λ_B, the dual objective up to a
    /// constant. Coordinate steps never increase it.
    pub fn dual_objective(&self) -> f64 {
        let linear: f64 = self.multipliers.iter().sum();
        let logs: f64 = self
            .counts
            .iter()
            .zip(&self.denominators)
            .map(|(n, d)| n * d.ln())
            .sum();
        linear - logs
    }

    pub fn state(&self) -> DualState {
        DualState {
            multipliers: self.multipliers.clone(),
        }
    }
}

/// Runs dual coordinate ascent to the configured KKT tolerance.
///
/// Once the edge gap is under tolerance, sweeps continue while they still
/// make progress, down to a floor near rounding level.
pub fn solve_numeric(
    diagram: &GreechieDiagram,
    freq: &FrequencyTable,
    config: &SolverConfig,
) -> Result<MleResult, NumericError> {
    let mut ascent = DualAscent::new(diagram, freq, config)?;
    let polish_target = (config.kkt_tolerance * 1e-3).max(1e-15);
    let mut gap = ascent.edge_gap();
    let mut sweeps = 0;
    let mut best = gap;
    let mut stalled = 0;
    while gap >= polish_target && sweeps < config.max_sweeps {
        gap = ascent.sweep();
        sweeps += 1;
        if gap < config.kkt_tolerance {
            if gap < 0.5 * best {
                stalled = 0;
            } else {
                stalled += 1;
                if stalled >= 10 {
                    break;
                }
            }
        }
        best = best.min(gap);
    }
    if gap >= config.kkt_tolerance {
        return Err(NumericError::NonConvergence {
            sweeps,
            residual: gap,
        });
    }
    log::debug!("dual ascent converged in {sweeps} sweeps, edge gap {gap:.3e}");
    let p = ascent.primal();
    let residual = kkt_residual(diagram, freq, &p);
    Ok(MleResult::new(
        freq,
        p,
        None,
        Method::Numeric,
        residual,
        Diagnostics {
            methods: vec![Method::Numeric],
            sweeps,
            ..Diagnostics::default()
        },
    ))
}

/// Optimality certificate for p: the larger of the worst edge-sum gap and the
/// worst relative stationarity mismatch |1 − Σ_{B∋x} λ_B · p(x)/n(x)| after a
/// least-squares fit of the multipliers. Zero exactly at the optimum.
///
/// Outcomes with n(x) = 0 and p(x) > 0 contribute the row Σ_{B∋x} λ_B = 0.
/// Returns +∞ if a positive-count outcome has p(x) = 0.
pub fn kkt_residual(diagram: &GreechieDiagram, freq: &FrequencyTable, p: &ProbabilityAssignment) -> f64 {
    let mut rows: Vec<(usize, f64, f64)> = Vec::new();
    let mut max_ratio: f64 = 0.0;
    for x in 0..diagram.outcome_count() {
        let n = freq.get(x) as f64;
        if n > 0.0 {
            if p.get(x) <= 0.0 {
                return f64::INFINITY;
            }
            let ratio = n / p.get(x);
            max_ratio = max_ratio.max(ratio);
            rows.push((x, 1.0 / ratio, 1.0));
        }
    }
    for x in 0..diagram.outcome_count() {
        if freq.get(x) == 0 && p.get(x) > 0.0 {
            rows.push((x, 1.0 / max_ratio.max(1.0), 0.0));
        }
    }
    let edges = diagram.operation_count();
    let mut a = DMatrix::<f64>::zeros(rows.len(), edges);
    let mut b = DVector::<f64>::zeros(rows.len());
    for (r, &(x, weight, target)) in rows.iter().enumerate() {
        for &e in diagram.operations_containing(x) {
            a[(r, e)] = weight;
        }
        b[r] = target;
    }
    let stationarity = if rows.is_empty() {
        0.0
    } else {
        let svd = a.clone().svd(true, true);
        let eps = 1e-13 * svd.singular_values.max();
        match svd.solve(&b, eps) {
            Ok(lambda) => (&a * lambda - &b).amax(),
            Err(_) => f64::INFINITY,
        }
    };
    stationarity.max(p.max_edge_gap(diagram))
}
