//! Maximum likelihood estimation of outcome probabilities on Greechie
//! diagrams.
//!
//! A diagram is a hypergraph: outcomes are vertices and each operation
//! (measurement) is an edge listing the outcomes it can produce. Given counts
//! n(x), the estimator maximizes Σ n(x) ln p(x) subject to every operation's
//! probabilities summing to one.
//!
//! [`estimate`] is the usual entry point. It drops unobserved outcomes,
//! decomposes the diagram into horizontal sums, products and chains, solves
//! each part in closed form where one exists, and falls back to dual
//! coordinate ascent elsewhere.

pub mod closed;
pub mod decompose;
pub mod diagram;
pub mod estimate;
pub mod fixtures;
pub mod numeric;
pub mod oracle;
pub mod sampler;

pub use closed::{
    execute_plan, solve_chain2, solve_chain_iterative, solve_chain_k, solve_classical, solve_horizontal,
    solve_product, ChainQuadratic, Diagnostics, Method, MleResult, SolveError, SplittingParameters,
};
pub use decompose::{
    build_plan, connected_components, detect_chain, factor_product, ChainDescriptor, DecompositionTree, PlanKind,
    PlanNode, Verdict,
};
pub use diagram::{
    check_g1, check_g2, check_intersections, check_probability, log_likelihood, reduce_zero_counts, shortest_cycle,
    Cycle, DiagramError, FrequencyTable, GreechieDiagram, Operation, OutcomeId, ProbabilityAssignment, Reduction, Rule,
    SubDiagram, Target, ValidationReport, Violation,
};
pub use estimate::{estimate, EstimateError, EstimateMethod, Estimate};
pub use numeric::{kkt_residual, solve_numeric, DualState, NumericError, SolverConfig};
pub use oracle::{brute_force_mle, interior_point, sample_feasible, OracleBudget, OracleError};
pub use num_rational::BigRational;
pub use sampler::{sample_outcomes, OperationPolicy, SamplerError};
