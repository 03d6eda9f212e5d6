//! Closed-form estimators and plan execution.
//!
//! Classical operations, horizontal sums and products are solved in exact
//! rational arithmetic. Chains of operations are reduced to horizontal sums
//! by splitting each shared outcome's count between its two operations; the
//! split fractions (splitting parameters) come from a linear equation for two
//! operations, a quadratic for three, and a safeguarded Newton iteration
//! beyond that.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::decompose::{build_plan, ChainDescriptor, DecompositionTree, PlanKind, PlanNode};
use crate::diagram::{log_likelihood, FrequencyTable, GreechieDiagram, ProbabilityAssignment, SubDiagram};
use crate::numeric::{kkt_residual, solve_numeric, NumericError, SolverConfig};

/// Convergence target for iterative chain solves, in splitting-parameter units.
pub const CHAIN_RESIDUAL_TARGET: f64 = 1e-12;
const CHAIN_MAX_ITERATIONS: usize = 500;
const DOUBLE_ROOT_TOLERANCE: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("all counts are zero")]
    ZeroTotal,
    #[error("horizontal summand {0} has no observations; its distribution is unidentified")]
    ZeroComponent(usize),
    #[error("product factor {0} has no observations; its conditional distribution is unidentified")]
    ZeroFactor(usize),
    #[error("outcome `{0}` has zero count; reduce zero counts before solving")]
    ZeroCount(String),
    #[error("expected a single operation covering every outcome")]
    NotClassical,
    #[error("chain solver needs {expected} operations, got {found}")]
    ChainLength { expected: &'static str, found: usize },
    #[error("splitting-parameter quadratic has {0} roots in (0,1), expected exactly one")]
    NoRootInUnitInterval(usize),
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("at {path}: {source}")]
    AtNode {
        path: String,
        #[source]
        source: Box<SolveError>,
    },
}

impl SolveError {
    /// The innermost error, without node-path context.
    pub fn root_cause(&self) -> &SolveError {
        match self {
            SolveError::AtNode { source, .. } => source.root_cause(),
            other => other,
        }
    }

    fn at(self, path: &str) -> SolveError {
        match self {
            SolveError::AtNode { path: inner, source } => SolveError::AtNode {
                path: format!("{path}/{inner}"),
                source,
            },
            other => SolveError::AtNode {
                path: path.to_string(),
                source: Box::new(other),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Method {
    #[serde(rename = "classical")]
    Classical,
    #[serde(rename = "horizontal")]
    Horizontal,
    #[serde(rename = "product")]
    Product,
    #[serde(rename = "chain-closed")]
    ChainClosed,
    #[serde(rename = "chain-iterative")]
    ChainIterative,
    #[serde(rename = "numeric")]
    Numeric,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Classical => "classical",
            Method::Horizontal => "horizontal",
            Method::Product => "product",
            Method::ChainClosed => "chain-closed",
            Method::ChainIterative => "chain-iterative",
            Method::Numeric => "numeric",
        })
    }
}

/// Splitting parameters of one chain, keyed by shared outcome name.
///
/// For two-operation chains and chains of four or more operations, `values[i]`
/// is the share of n(y_i) attributed to operation A_{i+1}. For three-operation
/// chains both values are the shares attributed to the middle operation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplittingParameters {
    pub shared: Vec<String>,
    pub values: Vec<f64>,
}

/// Totals over one block of outcomes. At the optimum, n(x)/p(x) is the same
/// for every x of a classical summand or chain interior, equal to `ratio()`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockStats {
    pub block: Vec<usize>,
    pub n_block: u128,
    pub p_block: f64,
}

impl BlockStats {
    pub fn new(block: &[usize], freq: &FrequencyTable, p: &ProbabilityAssignment) -> Self {
        Self {
            block: block.to_vec(),
            n_block: block.iter().map(|&x| freq.get(x) as u128).sum(),
            p_block: block.iter().map(|&x| p.get(x)).sum(),
        }
    }

    pub fn ratio(&self) -> Option<f64> {
        (self.p_block > 0.0).then(|| self.n_block as f64 / self.p_block)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    /// Methods of every plan node, in pre-order; the first is the outermost.
    pub methods: Vec<Method>,
    pub splitting: Vec<SplittingParameters>,
    /// Dual coordinate ascent sweeps across all numeric solves.
    pub sweeps: usize,
    /// Newton iterations across all iterative chain solves.
    pub chain_iterations: usize,
    pub plan: Option<DecompositionTree>,
}

/// An estimate together with how it was obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct MleResult {
    pub probabilities: ProbabilityAssignment,
    /// Exact values when every step of the solve was rational.
    pub exact: Option<Vec<BigRational>>,
    pub method: Method,
    pub log_likelihood: f64,
    /// KKT residual; zero for exact results.
    pub residual: f64,
    pub diagnostics: Diagnostics,
}

impl MleResult {
    pub fn new(
        freq: &FrequencyTable,
        probabilities: ProbabilityAssignment,
        exact: Option<Vec<BigRational>>,
        method: Method,
        residual: f64,
        diagnostics: Diagnostics,
    ) -> Self {
        Self {
            log_likelihood: log_likelihood(freq, &probabilities),
            probabilities,
            exact,
            method,
            residual,
            diagnostics,
        }
    }
}

#[derive(Debug, Clone)]
enum Values {
    Exact(Vec<BigRational>),
    Float(Vec<f64>),
}

impl Values {
    fn to_f64(&self) -> Vec<f64> {
        match self {
            Values::Exact(v) => v.iter().map(rational_to_f64).collect(),
            Values::Float(v) => v.clone(),
        }
    }

    fn scaled(self, weight: &BigRational) -> Values {
        match self {
            Values::Exact(v) => Values::Exact(v.into_iter().map(|x| x * weight).collect()),
            Values::Float(v) => {
                let w = rational_to_f64(weight);
                Values::Float(v.into_iter().map(|x| x * w).collect())
            }
        }
    }
}

/// Assembles child solutions into a parent-sized vector.
fn stitch(len: usize, parts: Vec<(Values, &[usize])>) -> Values {
    if parts.iter().all(|(v, _)| matches!(v, Values::Exact(_))) {
        let mut out = vec![BigRational::zero(); len];
        for (v, map) in parts {
            if let Values::Exact(v) = v {
                for (x, &g) in v.into_iter().zip(map) {
                    out[g] = x;
                }
            }
        }
        Values::Exact(out)
    } else {
        let mut out = vec![0.0; len];
        for (v, map) in parts {
            for (x, &g) in v.to_f64().into_iter().zip(map) {
                out[g] = x;
            }
        }
        Values::Float(out)
    }
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

fn ratio(num: u128, den: u128) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

struct NodeSolution {
    values: Values,
    diagnostics: Diagnostics,
}

impl NodeSolution {
    fn leaf(values: Values, method: Method) -> Self {
        Self {
            values,
            diagnostics: Diagnostics {
                methods: vec![method],
                ..Diagnostics::default()
            },
        }
    }

    fn absorb(&mut self, child: Diagnostics) {
        self.diagnostics.methods.extend(child.methods);
        self.diagnostics.splitting.extend(child.splitting);
        self.diagnostics.sweeps += child.sweeps;
        self.diagnostics.chain_iterations += child.chain_iterations;
    }
}

fn finish(diagram: &GreechieDiagram, freq: &FrequencyTable, solution: NodeSolution) -> MleResult {
    let method = solution.diagnostics.methods[0];
    let p = ProbabilityAssignment::new(solution.values.to_f64());
    let (exact, residual) = match solution.values {
        Values::Exact(v) => (Some(v), 0.0),
        Values::Float(_) => (None, kkt_residual(diagram, freq, &p)),
    };
    MleResult::new(freq, p, exact, method, residual, solution.diagnostics)
}

fn classical_values(counts: &[u64]) -> Result<Values, SolveError> {
    let total: u128 = counts.iter().map(|&n| n as u128).sum();
    if total == 0 {
        return Err(SolveError::ZeroTotal);
    }
    Ok(Values::Exact(counts.iter().map(|&n| ratio(n as u128, total)).collect()))
}

/// Empirical distribution p(x) = n(x) / Σ n on a diagram with one operation.
pub fn solve_classical(diagram: &GreechieDiagram, freq: &FrequencyTable) -> Result<MleResult, SolveError> {
    if diagram.operation_count() != 1 || diagram.operations()[0].len() != diagram.outcome_count() {
        return Err(SolveError::NotClassical);
    }
    let values = classical_values(freq.counts())?;
    Ok(finish(diagram, freq, NodeSolution::leaf(values, Method::Classical)))
}

fn horizontal_node(
    len: usize,
    children: &[PlanNode],
    freq: &FrequencyTable,
    config: &SolverConfig,
) -> Result<NodeSolution, SolveError> {
    let mut parts = Vec::with_capacity(children.len());
    let mut diags = Vec::with_capacity(children.len());
    for (i, child) in children.iter().enumerate() {
        let sub = freq.restrict(&child.to_parent);
        if sub.total() == 0 {
            return Err(SolveError::ZeroComponent(i));
        }
        let solved = solve_node(child, &sub, config).map_err(|e| e.at(&format!("HorizontalSum[{i}]")))?;
        diags.push(solved.diagnostics);
        parts.push((solved.values, child.to_parent.as_slice()));
    }
    let mut out = NodeSolution::leaf(stitch(len, parts), Method::Horizontal);
    for d in diags {
        out.absorb(d);
    }
    Ok(out)
}

fn product_node(
    len: usize,
    children: &[PlanNode],
    freq: &FrequencyTable,
    config: &SolverConfig,
) -> Result<NodeSolution, SolveError> {
    let total = freq.total();
    if total == 0 {
        return Err(SolveError::ZeroTotal);
    }
    let mut parts = Vec::with_capacity(children.len());
    let mut diags = Vec::with_capacity(children.len());
    for (i, child) in children.iter().enumerate() {
        let sub = freq.restrict(&child.to_parent);
        let n_factor = sub.total();
        if n_factor == 0 {
            return Err(SolveError::ZeroFactor(i));
        }
        let weight = ratio(n_factor, total);
        let solved = solve_node(child, &sub, config).map_err(|e| e.at(&format!("Product[{i}]")))?;
        diags.push(solved.diagnostics);
        parts.push((solved.values.scaled(&weight), child.to_parent.as_slice()));
    }
    let mut out = NodeSolution::leaf(stitch(len, parts), Method::Product);
    for d in diags {
        out.absorb(d);
    }
    Ok(out)
}

/// Solves each horizontal summand on its own counts and returns the union.
/// For classical summands this is p(x) = n(x)/n(A_i).
pub fn solve_horizontal(
    diagram: &GreechieDiagram,
    components: &[SubDiagram],
    freq: &FrequencyTable,
    config: &SolverConfig,
) -> Result<MleResult, SolveError> {
    let children: Vec<PlanNode> = components
        .iter()
        .map(|c| PlanNode {
            to_parent: c.parent_index.clone(),
            ..build_plan(&c.diagram).root
        })
        .collect();
    let solved = horizontal_node(diagram.outcome_count(), &children, freq, config)?;
    Ok(finish(diagram, freq, solved))
}

/// Factor weights p(B_i) = n(B_i)/Σ_j n(B_j), times each factor's
/// conditional estimate.
pub fn solve_product(
    diagram: &GreechieDiagram,
    factors: &[SubDiagram],
    freq: &FrequencyTable,
    config: &SolverConfig,
) -> Result<MleResult, SolveError> {
    let children: Vec<PlanNode> = factors
        .iter()
        .map(|c| PlanNode {
            to_parent: c.parent_index.clone(),
            ..build_plan(&c.diagram).root
        })
        .collect();
    let solved = product_node(diagram.outcome_count(), &children, freq, config)?;
    Ok(finish(diagram, freq, solved))
}

/// Block totals of a chain: interior counts n(B_j) and shared counts n(y_i).
struct ChainCounts {
    interiors: Vec<u128>,
    shared: Vec<u128>,
}

fn chain_counts(
    diagram: &GreechieDiagram,
    chain: &ChainDescriptor,
    freq: &FrequencyTable,
) -> Result<ChainCounts, SolveError> {
    if let Some(x) = (0..diagram.outcome_count()).find(|&x| freq.get(x) == 0) {
        return Err(SolveError::ZeroCount(diagram.name(x).to_string()));
    }
    Ok(ChainCounts {
        interiors: chain
            .interiors
            .iter()
            .map(|b| b.iter().map(|&x| freq.get(x) as u128).sum())
            .collect(),
        shared: chain.shared.iter().map(|&y| freq.get(y) as u128).collect(),
    })
}

fn shared_names(diagram: &GreechieDiagram, chain: &ChainDescriptor) -> Vec<String> {
    chain.shared.iter().map(|&y| diagram.name(y).to_string()).collect()
}

/// Two operations sharing y: the split is c = n(B_2)/(n(B_1)+n(B_2)), exact.
fn chain_two(
    diagram: &GreechieDiagram,
    chain: &ChainDescriptor,
    freq: &FrequencyTable,
) -> Result<NodeSolution, SolveError> {
    let counts = chain_counts(diagram, chain, freq)?;
    let (n1, n2, u) = (counts.interiors[0], counts.interiors[1], counts.shared[0]);
    let split = ratio(n2, n1 + n2);
    let one = BigRational::from_integer(1.into());
    let u_r = BigRational::from_integer(u.into());
    let d1 = BigRational::from_integer(n1.into()) + (&one - &split) * &u_r;
    let d2 = BigRational::from_integer(n2.into()) + &split * &u_r;

    let mut values = vec![BigRational::zero(); diagram.outcome_count()];
    for (block, d) in chain.interiors.iter().zip([&d1, &d2]) {
        for &x in block {
            values[x] = BigRational::from_integer(freq.get(x).into()) / d;
        }
    }
    values[chain.shared[0]] = &split * &u_r / &d2;
    let mut out = NodeSolution::leaf(Values::Exact(values), Method::ChainClosed);
    out.diagnostics.splitting.push(SplittingParameters {
        shared: shared_names(diagram, chain),
        values: vec![rational_to_f64(&split)],
    });
    Ok(out)
}

/// Integer coefficients of `a c² + b c + c0 = 0` for the share c of n(y_2)
/// attributed to the middle operation of a three-operation chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainQuadratic {
    pub a: BigInt,
    pub b: BigInt,
    pub c: BigInt,
}

impl ChainQuadratic {
    /// From block totals n(B_1), n(y_1), n(B_2), n(y_2), n(B_3).
    ///
    /// Substituting c_1 = (n(B_2) + c_2 n(y_2)) / (n(B_1) + n(B_2) + c_2 n(y_2))
    /// into the consistency condition for y_2 and clearing denominators.
    pub fn new(b1: u128, y1: u128, b2: u128, y2: u128, b3: u128) -> Self {
        let [b1, y1, b2, y2, b3] = [b1, y1, b2, y2, b3].map(BigInt::from);
        let p = &b2 * (&b1 + &b2 + &y1);
        Self {
            a: &y2 * (&b3 + &b2 + &y1),
            b: &b3 * (&b1 + &b2) + &p - &y2 * (&b2 + &y1),
            c: -p,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let [a, b, c] = [&self.a, &self.b, &self.c].map(|v| v.to_f64().unwrap_or(f64::NAN));
        (a * x + b) * x + c
    }

    /// Real roots, computed without cancellation.
    pub fn roots(&self) -> Vec<f64> {
        let disc = &self.b * &self.b - BigInt::from(4) * &self.a * &self.c;
        if disc.is_negative() {
            return Vec::new();
        }
        let a = self.a.to_f64().unwrap_or(f64::NAN);
        let b = self.b.to_f64().unwrap_or(f64::NAN);
        let c = self.c.to_f64().unwrap_or(f64::NAN);
        if a == 0.0 {
            return if b == 0.0 { Vec::new() } else { vec![-c / b] };
        }
        let sqrt = disc.to_f64().unwrap_or(f64::NAN).sqrt();
        let sign = if b < 0.0 { -1.0 } else { 1.0 };
        let q = -0.5 * (b + sign * sqrt);
        let mut roots = vec![q / a];
        if q != 0.0 {
            roots.push(c / q);
        }
        if disc.is_zero() || (roots.len() == 2 && (roots[0] - roots[1]).abs() <= DOUBLE_ROOT_TOLERANCE) {
            roots.truncate(1);
        }
        roots
    }

    pub fn roots_in_unit_interval(&self) -> Vec<f64> {
        self.roots().into_iter().filter(|&r| r > 0.0 && r < 1.0).collect()
    }
}

/// Three operations A_1, A_2, A_3 with A_1 ∩ A_2 = {y_1}, A_2 ∩ A_3 = {y_2}.
///
/// Unknowns c_1, c_2 are the shares of n(y_1), n(y_2) attributed to A_2.
/// With D_1 = n(B_1) + (1−c_1)n(y_1), D_2 = n(B_2) + c_1 n(y_1) + c_2 n(y_2),
/// D_3 = n(B_3) + (1−c_2)n(y_2), the estimate is p(x) = n(x)/D_j on B_j and
/// p(y_i) = c_i n(y_i)/D_2.
fn chain_three(
    diagram: &GreechieDiagram,
    chain: &ChainDescriptor,
    freq: &FrequencyTable,
) -> Result<NodeSolution, SolveError> {
    let counts = chain_counts(diagram, chain, freq)?;
    let [b1, b2, b3] = [counts.interiors[0], counts.interiors[1], counts.interiors[2]];
    let [y1, y2] = [counts.shared[0], counts.shared[1]];
    let quadratic = ChainQuadratic::new(b1, y1, b2, y2, b3);
    let roots = quadratic.roots_in_unit_interval();
    if roots.len() != 1 {
        return Err(SolveError::NoRootInUnitInterval(roots.len()));
    }
    let c2 = roots[0];
    let [b1, b2, b3, y1, y2] = [b1, b2, b3, y1, y2].map(|v| v as f64);
    let c1 = (b2 + c2 * y2) / (b1 + b2 + c2 * y2);
    let d1 = b1 + (1.0 - c1) * y1;
    let d2 = b2 + c1 * y1 + c2 * y2;
    let d3 = b3 + (1.0 - c2) * y2;

    let mut values = vec![0.0; diagram.outcome_count()];
    for (block, d) in chain.interiors.iter().zip([d1, d2, d3]) {
        for &x in block {
            values[x] = freq.get(x) as f64 / d;
        }
    }
    values[chain.shared[0]] = c1 * y1 / d2;
    values[chain.shared[1]] = c2 * y2 / d2;
    let mut out = NodeSolution::leaf(Values::Float(values), Method::ChainClosed);
    out.diagnostics.splitting.push(SplittingParameters {
        shared: shared_names(diagram, chain),
        values: vec![c1, c2],
    });
    Ok(out)
}

/// Fixed-point mismatch g_i = R_i/(L_i+R_i) − c_i of the consistency system,
/// where c_i is the share of n(y_i) sent to A_{i+1}, L_i = n(B_i) + c_{i−1}
/// n(y_{i−1}) and R_i = n(B_{i+1}) + (1−c_{i+1}) n(y_{i+1}).
struct ChainSystem {
    interiors: Vec<f64>,
    shared: Vec<f64>,
}

impl ChainSystem {
    fn left(&self, c: &[f64], i: usize) -> f64 {
        self.interiors[i] + if i > 0 { c[i - 1] * self.shared[i - 1] } else { 0.0 }
    }

    fn right(&self, c: &[f64], i: usize) -> f64 {
        self.interiors[i + 1]
            + if i + 1 < c.len() {
                (1.0 - c[i + 1]) * self.shared[i + 1]
            } else {
                0.0
            }
    }

    fn mismatch(&self, c: &[f64]) -> Vec<f64> {
        (0..c.len())
            .map(|i| {
                let (l, r) = (self.left(c, i), self.right(c, i));
                r / (l + r) - c[i]
            })
            .collect()
    }

    fn merit(&self, c: &[f64]) -> f64 {
        self.mismatch(c).iter().fold(0.0, |m, g| m.max(g.abs()))
    }

    /// Newton direction for r_i = (1−c_i)R_i − c_i L_i via the tridiagonal
    /// Jacobian.
    fn newton_step(&self, c: &[f64]) -> Option<Vec<f64>> {
        let k = c.len();
        let mut diag = vec![0.0; k];
        let mut lower = vec![0.0; k];
        let mut upper = vec![0.0; k];
        let mut rhs = vec![0.0; k];
        for i in 0..k {
            let (l, r) = (self.left(c, i), self.right(c, i));
            rhs[i] = -((1.0 - c[i]) * r - c[i] * l);
            diag[i] = -(l + r);
            if i > 0 {
                lower[i] = -c[i] * self.shared[i - 1];
            }
            if i + 1 < k {
                upper[i] = -(1.0 - c[i]) * self.shared[i + 1];
            }
        }
        // Thomas algorithm
        for i in 1..k {
            if diag[i - 1] == 0.0 {
                return None;
            }
            let w = lower[i] / diag[i - 1];
            diag[i] -= w * upper[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        let mut step = vec![0.0; k];
        for i in (0..k).rev() {
            if diag[i] == 0.0 {
                return None;
            }
            let next = if i + 1 < k { upper[i] * step[i + 1] } else { 0.0 };
            step[i] = (rhs[i] - next) / diag[i];
        }
        step.iter().all(|s| s.is_finite()).then_some(step)
    }

    fn coordinate_sweep(&self, c: &mut [f64]) {
        for i in 0..c.len() {
            let (l, r) = (self.left(c, i), self.right(c, i));
            c[i] = r / (l + r);
        }
    }
}

/// Damped Newton on the consistency system from c = ½, falling back to an
/// exact per-coordinate sweep when no damped step reduces the mismatch.
/// Iterates stay inside (0,1).
fn solve_splitting(system: &ChainSystem) -> Result<(Vec<f64>, usize), SolveError> {
    let k = system.shared.len();
    let mut c = vec![0.5; k];
    let mut merit = system.merit(&c);
    let mut iterations = 0;
    while merit >= CHAIN_RESIDUAL_TARGET {
        if iterations == CHAIN_MAX_ITERATIONS {
            return Err(SolveError::NonConvergence {
                iterations,
                residual: merit,
            });
        }
        iterations += 1;
        let mut accepted = false;
        if let Some(step) = system.newton_step(&c) {
            let mut alpha = 1.0;
            for _ in 0..50 {
                let trial: Vec<f64> = c.iter().zip(&step).map(|(x, s)| x + alpha * s).collect();
                if trial.iter().all(|&t| t > 0.0 && t < 1.0) {
                    let m = system.merit(&trial);
                    if m < merit {
                        c = trial;
                        merit = m;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
        }
        if !accepted {
            let before = merit;
            system.coordinate_sweep(&mut c);
            merit = system.merit(&c);
            if merit >= before && merit >= CHAIN_RESIDUAL_TARGET {
                return Err(SolveError::NonConvergence {
                    iterations,
                    residual: merit,
                });
            }
        }
    }
    Ok((c, iterations))
}

/// Chain of any length m ≥ 2 solved by iteration; c_i is the share of n(y_i)
/// sent to A_{i+1}. Denominators D_j = n(B_j) + (1−c_j) n(y_j) + c_{j−1}
/// n(y_{j−1}), with terms past the chain ends dropped.
fn chain_iterative(
    diagram: &GreechieDiagram,
    chain: &ChainDescriptor,
    freq: &FrequencyTable,
) -> Result<NodeSolution, SolveError> {
    let counts = chain_counts(diagram, chain, freq)?;
    let system = ChainSystem {
        interiors: counts.interiors.iter().map(|&v| v as f64).collect(),
        shared: counts.shared.iter().map(|&v| v as f64).collect(),
    };
    let (c, iterations) = solve_splitting(&system)?;
    let m = chain.len();
    let denominators: Vec<f64> = (0..m)
        .map(|j| {
            let mut d = system.interiors[j];
            if j + 1 < m {
                d += (1.0 - c[j]) * system.shared[j];
            }
            if j > 0 {
                d += c[j - 1] * system.shared[j - 1];
            }
            d
        })
        .collect();
    let mut values = vec![0.0; diagram.outcome_count()];
    for (block, d) in chain.interiors.iter().zip(&denominators) {
        for &x in block {
            values[x] = freq.get(x) as f64 / d;
        }
    }
    for (i, &y) in chain.shared.iter().enumerate() {
        values[y] = c[i] * system.shared[i] / denominators[i + 1];
    }
    let mut out = NodeSolution::leaf(Values::Float(values), Method::ChainIterative);
    out.diagnostics.chain_iterations = iterations;
    out.diagnostics.splitting.push(SplittingParameters {
        shared: shared_names(diagram, chain),
        values: c,
    });
    Ok(out)
}

/// Closed-form solve of a three-operation chain through the splitting
/// parameter quadratic.
pub fn solve_chain2(
    diagram: &GreechieDiagram,
    chain: &ChainDescriptor,
    freq: &FrequencyTable,
) -> Result<MleResult, SolveError> {
    if chain.len() != 3 {
        return Err(SolveError::ChainLength {
            expected: "exactly 3",
            found: chain.len(),
        });
    }
    Ok(finish(diagram, freq, chain_three(diagram, chain, freq)?))
}

/// Any chain with m ≥ 2 operations: exact for m = 2, the quadratic for
/// m = 3, damped Newton for m ≥ 4.
pub fn solve_chain_k(
    diagram: &GreechieDiagram,
    chain: &ChainDescriptor,
    freq: &FrequencyTable,
) -> Result<MleResult, SolveError> {
    Ok(finish(diagram, freq, chain_node(diagram, chain, freq)?))
}

/// Iterative chain solve for any m ≥ 2, bypassing the closed forms.
pub fn solve_chain_iterative(
    diagram: &GreechieDiagram,
    chain: &ChainDescriptor,
    freq: &FrequencyTable,
) -> Result<MleResult, SolveError> {
    if chain.len() < 2 {
        return Err(SolveError::ChainLength {
            expected: "at least 2",
            found: chain.len(),
        });
    }
    Ok(finish(diagram, freq, chain_iterative(diagram, chain, freq)?))
}

fn chain_node(
    diagram: &GreechieDiagram,
    chain: &ChainDescriptor,
    freq: &FrequencyTable,
) -> Result<NodeSolution, SolveError> {
    match chain.len() {
        0 | 1 => Err(SolveError::ChainLength {
            expected: "at least 2",
            found: chain.len(),
        }),
        2 => chain_two(diagram, chain, freq),
        3 => chain_three(diagram, chain, freq),
        _ => chain_iterative(diagram, chain, freq),
    }
}

fn numeric_node(
    diagram: &GreechieDiagram,
    freq: &FrequencyTable,
    config: &SolverConfig,
) -> Result<NodeSolution, SolveError> {
    let result = solve_numeric(diagram, freq, config)?;
    let mut out = NodeSolution::leaf(
        Values::Float(result.probabilities.into_values()),
        Method::Numeric,
    );
    out.diagnostics.sweeps = result.diagnostics.sweeps;
    Ok(out)
}

fn solve_node(node: &PlanNode, freq: &FrequencyTable, config: &SolverConfig) -> Result<NodeSolution, SolveError> {
    let len = node.diagram.outcome_count();
    match &node.kind {
        PlanKind::HorizontalSum(children) => horizontal_node(len, children, freq, config),
        PlanKind::Product(children) => product_node(len, children, freq, config),
        PlanKind::ClassicalLeaf => {
            // a collapsed product of singletons still has exactly one operation
            Ok(NodeSolution::leaf(classical_values(freq.counts())?, Method::Classical))
        }
        PlanKind::Chain(chain) => match chain_node(&node.diagram, chain, freq) {
            Err(SolveError::NonConvergence { iterations, residual }) => {
                log::warn!(
                    "chain solve stalled after {iterations} iterations (residual {residual:.3e}); using the numeric solver"
                );
                numeric_node(&node.diagram, freq, config)
            }
            other => other,
        },
        PlanKind::NumericLeaf => numeric_node(&node.diagram, freq, config),
    }
}

/// Runs a plan over `freq` (aligned with the plan's root diagram), stitching
/// conditional results into one assignment. Exact results have residual 0;
/// otherwise the KKT residual is computed on the root diagram.
pub fn execute_plan(
    plan: &DecompositionTree,
    freq: &FrequencyTable,
    config: &SolverConfig,
) -> Result<MleResult, SolveError> {
    let solved = solve_node(&plan.root, freq, config).map_err(|e| e.at("root"))?;
    let mut result = finish(&plan.root.diagram, freq, solved);
    result.diagnostics.plan = Some(plan.clone());
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::detect_chain;
    use crate::fixtures;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn classical_examples() {
        let d = GreechieDiagram::build(&["a", "b", "c"], &[vec!["a", "b", "c"]]).unwrap();
        let f = FrequencyTable::new(&d, vec![2, 3, 5]).unwrap();
        let r = solve_classical(&d, &f).unwrap();
        assert_eq!(r.exact.unwrap(), vec![q(1, 5), q(3, 10), q(1, 2)]);
        assert_eq!(r.method, Method::Classical);
        assert_eq!(r.residual, 0.0);

        let f = FrequencyTable::new(&d, vec![1, 1, 1]).unwrap();
        assert_eq!(solve_classical(&d, &f).unwrap().exact.unwrap(), vec![q(1, 3); 3]);

        let one = GreechieDiagram::build(&["a"], &[vec!["a"]]).unwrap();
        let f = FrequencyTable::new(&one, vec![7]).unwrap();
        assert_eq!(solve_classical(&one, &f).unwrap().exact.unwrap(), vec![q(1, 1)]);

        let f = FrequencyTable::new(&d, vec![0, 0, 0]).unwrap();
        assert_eq!(solve_classical(&d, &f).unwrap_err(), SolveError::ZeroTotal);
        assert_eq!(
            solve_classical(&fixtures::two_edges(), &FrequencyTable::new(&fixtures::two_edges(), vec![1; 4]).unwrap())
                .unwrap_err(),
            SolveError::NotClassical
        );
    }

    #[test]
    fn horizontal_examples() {
        let d = fixtures::two_edges(); // outcomes a, b, c, d; edges {a,c}, {b,d}
        let f = FrequencyTable::new(&d, vec![1, 2, 3, 2]).unwrap();
        let comps = crate::decompose::connected_components(&d);
        let r = solve_horizontal(&d, &comps, &f, &SolverConfig::default()).unwrap();
        assert_eq!(r.exact.unwrap(), vec![q(1, 4), q(1, 2), q(3, 4), q(1, 2)]);
        assert_eq!(r.method, Method::Horizontal);

        let f = FrequencyTable::new(&d, vec![1, 0, 3, 0]).unwrap();
        let err = solve_horizontal(&d, &comps, &f, &SolverConfig::default()).unwrap_err();
        assert_eq!(err, SolveError::ZeroComponent(1));
    }

    #[test]
    fn product_reproduces_motivating_example() {
        let d = fixtures::motivating(); // a, c, e, b, d
        let f = FrequencyTable::new(&d, vec![10, 30, 40, 20, 40]).unwrap();
        let factors = crate::decompose::factor_product(&d).unwrap();
        let r = solve_product(&d, &factors, &f, &SolverConfig::default()).unwrap();
        assert_eq!(
            r.exact.unwrap(),
            vec![q(5, 28), q(15, 28), q(2, 7), q(5, 21), q(10, 21)]
        );
        assert_eq!(r.method, Method::Product);
    }

    #[test]
    fn two_chain_matches_product_exactly() {
        let d = fixtures::motivating();
        let f = FrequencyTable::new(&d, vec![10, 30, 40, 20, 40]).unwrap();
        let chain = detect_chain(&d).unwrap();
        let via_chain = solve_chain_k(&d, &chain, &f).unwrap();
        let via_plan = execute_plan(&build_plan(&d), &f, &SolverConfig::default()).unwrap();
        assert_eq!(via_chain.exact, via_plan.exact);
        assert_eq!(via_chain.method, Method::ChainClosed);
        assert_eq!(via_plan.method, Method::Product);
    }

    #[test]
    fn three_chain_unit_counts() {
        let d = fixtures::three_chain();
        let f = FrequencyTable::new(&d, vec![1; 7]).unwrap();
        let chain = detect_chain(&d).unwrap();
        let r = solve_chain2(&d, &chain, &f).unwrap();
        let s2 = 2f64.sqrt();
        let y = (3.0 - s2) / 7.0;
        let end = (4.0 + s2) / 14.0;
        let mid = (1.0 + 2.0 * s2) / 7.0;
        let want = [end, end, y, mid, y, end, end];
        for (got, want) in r.probabilities.values().iter().zip(want) {
            assert!((got - want).abs() < 1e-14);
        }
        for c in &r.diagnostics.splitting[0].values {
            assert!((c - (s2 - 1.0)).abs() < 1e-14);
        }
        assert!(r.residual < 1e-12);
    }

    #[test]
    fn quadratic_roots() {
        // c² + 2c − 1 (scaled by 4) from unit counts on the three-chain
        let quad = ChainQuadratic::new(2, 1, 1, 1, 2);
        assert_eq!(quad.a, 4.into());
        assert_eq!(quad.b, 8.into());
        assert_eq!(quad.c, (-4).into());
        let roots = quad.roots_in_unit_interval();
        assert_eq!(roots.len(), 1);
        assert!((roots[0] - (2f64.sqrt() - 1.0)).abs() < 1e-15);
        assert_eq!(quad.roots().len(), 2);
    }

    #[test]
    fn iteration_agrees_with_quadratic() {
        let d = fixtures::wide_chain();
        let f = FrequencyTable::new(&d, vec![3, 1, 4, 1, 5, 9, 2, 6, 5]).unwrap();
        let chain = detect_chain(&d).unwrap();
        let closed = solve_chain2(&d, &chain, &f).unwrap();
        let iter = solve_chain_iterative(&d, &chain, &f).unwrap();
        for (a, b) in closed.probabilities.values().iter().zip(iter.probabilities.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        // opposite orientation for the second parameter
        let (cc, ci) = (&closed.diagnostics.splitting[0].values, &iter.diagnostics.splitting[0].values);
        assert!((cc[0] - ci[0]).abs() < 1e-12);
        assert!((cc[1] - (1.0 - ci[1])).abs() < 1e-12);
    }

    #[test]
    fn longer_chains_converge() {
        for d in [fixtures::four_chain(), fixtures::five_chain()] {
            let f = FrequencyTable::new(&d, (1..=d.outcome_count() as u64).collect()).unwrap();
            let chain = detect_chain(&d).unwrap();
            let r = solve_chain_k(&d, &chain, &f).unwrap();
            assert_eq!(r.method, Method::ChainIterative);
            assert!(r.residual < 1e-10, "{}", r.residual);
        }
    }

    #[test]
    fn chain_interiors_share_a_ratio() {
        let d = fixtures::five_chain();
        let f = FrequencyTable::new(&d, vec![4, 7, 1, 9, 2, 3, 8, 5, 6, 2, 11]).unwrap();
        let chain = detect_chain(&d).unwrap();
        let r = solve_chain_k(&d, &chain, &f).unwrap();
        for block in &chain.interiors {
            let k = BlockStats::new(block, &f, &r.probabilities).ratio().unwrap();
            for &x in block {
                assert!((f.get(x) as f64 / r.probabilities.get(x) - k).abs() < 1e-9 * k);
            }
        }
    }

    #[test]
    fn chain_requires_positive_counts() {
        let d = fixtures::three_chain();
        let f = FrequencyTable::new(&d, vec![1, 1, 0, 1, 1, 1, 1]).unwrap();
        let chain = detect_chain(&d).unwrap();
        assert!(matches!(solve_chain2(&d, &chain, &f), Err(SolveError::ZeroCount(_))));
    }

    #[test]
    fn errors_carry_node_paths() {
        let d = fixtures::two_edges();
        let f = FrequencyTable::new(&d, vec![1, 0, 1, 0]).unwrap();
        let err = execute_plan(&build_plan(&d), &f, &SolverConfig::default()).unwrap_err();
        assert_eq!(err.root_cause(), &SolveError::ZeroComponent(1));
        assert!(err.to_string().starts_with("at root"));
    }

    #[test]
    fn comb_dispatches_to_numeric() {
        let d = fixtures::comb();
        let f = FrequencyTable::new(&d, vec![2; 9]).unwrap();
        let r = execute_plan(&build_plan(&d), &f, &SolverConfig::default()).unwrap();
        assert_eq!(r.method, Method::Numeric);
        assert!(r.residual < 1e-10);
    }
}
