//! Hypergraph event model: outcomes, operations, frequency tables and
//! probability assignments, plus Greechie-condition validation, zero-count
//! reduction and likelihood evaluation.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default absolute per-edge tolerance for normalization checks.
pub const DEFAULT_NORMALIZATION_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiagramError {
    #[error("a diagram needs at least one outcome")]
    NoOutcomes,
    #[error("outcome identifiers must be nonempty tokens without whitespace, got {0:?}")]
    InvalidOutcome(String),
    #[error("outcome `{0}` is declared more than once")]
    DuplicateOutcome(String),
    #[error("operation #{0} has no members")]
    EmptyEdge(usize),
    #[error("operation #{edge} lists `{member}`, which is not a declared outcome")]
    UnknownMember { edge: usize, member: String },
    #[error("operation #{edge} lists `{member}` twice")]
    DuplicateMember { edge: usize, member: String },
    #[error("operations #{first} and #{second} have identical member sets")]
    DuplicateEdge { first: usize, second: usize },
    #[error("outcome `{0}` belongs to no operation")]
    UncoveredOutcome(String),
    #[error("operations {first} and {second} share more than one outcome; the cycle criterion does not apply")]
    IntersectionTooLarge { first: String, second: String },
    #[error("every outcome has zero count; nothing to estimate")]
    EmptyAfterReduction,
    #[error("frequency table has {found} entries but the diagram has {expected} outcomes")]
    CountLength { expected: usize, found: usize },
    #[error("count given for unknown outcome `{0}`")]
    UnknownCount(String),
}

/// Symbolic outcome name, unique within its diagram.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OutcomeId(String);

impl OutcomeId {
    pub fn new(name: impl Into<String>) -> Result<Self, DiagramError> {
        let name = name.into();
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(DiagramError::InvalidOutcome(name));
        }
        Ok(Self(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for OutcomeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for OutcomeId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// One performable experiment: the set of its mutually exclusive outcomes,
/// stored as indices into the owning diagram's outcome list.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Operation {
    members: Vec<usize>,
}

impl Operation {
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, outcome: usize) -> bool {
        self.members.contains(&outcome)
    }

    fn sorted_members(&self) -> Vec<usize> {
        let mut m = self.members.clone();
        m.sort_unstable();
        m
    }
}

/// A finite hypergraph of outcomes (vertices) and operations (edges).
///
/// Outcome order is declaration order; every index-based API in this crate
/// refers to it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GreechieDiagram {
    outcomes: Vec<OutcomeId>,
    index: HashMap<String, usize>,
    operations: Vec<Operation>,
    incidence: Vec<Vec<usize>>,
}

impl GreechieDiagram {
    /// Builds a diagram from outcome names and operations given as lists of
    /// member names.
    pub fn build<S, T>(outcomes: &[S], operations: &[Vec<T>]) -> Result<Self, DiagramError>
    where
        S: AsRef<str>,
        T: AsRef<str>,
    {
        if outcomes.is_empty() {
            return Err(DiagramError::NoOutcomes);
        }
        let mut ids = Vec::with_capacity(outcomes.len());
        let mut index = HashMap::with_capacity(outcomes.len());
        for name in outcomes {
            let id = OutcomeId::new(name.as_ref())?;
            if index.insert(id.0.clone(), ids.len()).is_some() {
                return Err(DiagramError::DuplicateOutcome(id.0));
            }
            ids.push(id);
        }

        let mut ops = Vec::with_capacity(operations.len());
        let mut seen: HashMap<Vec<usize>, usize> = HashMap::new();
        for (e, names) in operations.iter().enumerate() {
            if names.is_empty() {
                return Err(DiagramError::EmptyEdge(e));
            }
            let mut members = Vec::with_capacity(names.len());
            for name in names {
                let name = name.as_ref();
                let &i = index.get(name).ok_or_else(|| DiagramError::UnknownMember {
                    edge: e,
                    member: name.to_string(),
                })?;
                if members.contains(&i) {
                    return Err(DiagramError::DuplicateMember {
                        edge: e,
                        member: name.to_string(),
                    });
                }
                members.push(i);
            }
            let op = Operation { members };
            if let Some(&first) = seen.get(&op.sorted_members()) {
                return Err(DiagramError::DuplicateEdge { first, second: e });
            }
            seen.insert(op.sorted_members(), e);
            ops.push(op);
        }

        let diagram = Self::assemble(ids, index, ops);
        if let Some(i) = diagram.incidence.iter().position(Vec::is_empty) {
            return Err(DiagramError::UncoveredOutcome(diagram.outcomes[i].0.clone()));
        }
        Ok(diagram)
    }

    fn assemble(
        outcomes: Vec<OutcomeId>,
        index: HashMap<String, usize>,
        operations: Vec<Operation>,
    ) -> Self {
        let mut incidence = vec![Vec::new(); outcomes.len()];
        for (e, op) in operations.iter().enumerate() {
            for &x in &op.members {
                incidence[x].push(e);
            }
        }
        Self {
            outcomes,
            index,
            operations,
            incidence,
        }
    }

    pub fn outcomes(&self) -> &[OutcomeId] {
        &self.outcomes
    }

    pub fn operations(&self) -> &[Operation] {
        &self.operations
    }

    pub fn outcome_count(&self) -> usize {
        self.outcomes.len()
    }

    pub fn operation_count(&self) -> usize {
        self.operations.len()
    }

    pub fn name(&self, outcome: usize) -> &str {
        self.outcomes[outcome].as_str()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// Operations containing `outcome`, in declaration order.
    pub fn operations_containing(&self, outcome: usize) -> &[usize] {
        &self.incidence[outcome]
    }

    /// Renders an operation as `{a,b,c}`.
    pub fn edge_label(&self, edge: usize) -> String {
        let names: Vec<&str> = self.operations[edge]
            .members
            .iter()
            .map(|&x| self.name(x))
            .collect();
        format!("{{{}}}", names.join(","))
    }

    /// Restricts the diagram to `subset` (indices, any order). Edges become
    /// their nonempty traces on the subset, deduplicated in first-seen order.
    /// Outcomes keep their relative declaration order.
    ///
    /// Outcomes of `subset` that end up in no edge are impossible here as long
    /// as the parent diagram is covering.
    pub fn induced(&self, subset: &[usize]) -> SubDiagram {
        let mut keep: Vec<usize> = subset.to_vec();
        keep.sort_unstable();
        keep.dedup();
        let mut local = vec![usize::MAX; self.outcome_count()];
        for (l, &g) in keep.iter().enumerate() {
            local[g] = l;
        }
        let outcomes: Vec<OutcomeId> = keep.iter().map(|&g| self.outcomes[g].clone()).collect();
        let index = outcomes
            .iter()
            .enumerate()
            .map(|(i, id)| (id.0.clone(), i))
            .collect();
        let mut seen = HashSet::new();
        let mut ops = Vec::new();
        for op in &self.operations {
            let members: Vec<usize> = op
                .members
                .iter()
                .filter(|&&g| local[g] != usize::MAX)
                .map(|&g| local[g])
                .collect();
            if members.is_empty() {
                continue;
            }
            let op = Operation { members };
            if seen.insert(op.sorted_members()) {
                ops.push(op);
            }
        }
        SubDiagram {
            diagram: Self::assemble(outcomes, index, ops),
            parent_index: keep,
        }
    }
}

/// A diagram derived from a parent, with the map from its outcome indices to
/// the parent's.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubDiagram {
    pub diagram: GreechieDiagram,
    pub parent_index: Vec<usize>,
}

/// Absolute frequencies n(x), aligned with a diagram's outcome order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyTable {
    counts: Vec<u64>,
}

impl FrequencyTable {
    pub fn new(diagram: &GreechieDiagram, counts: Vec<u64>) -> Result<Self, DiagramError> {
        if counts.len() != diagram.outcome_count() {
            return Err(DiagramError::CountLength {
                expected: diagram.outcome_count(),
                found: counts.len(),
            });
        }
        Ok(Self { counts })
    }

    /// Builds a table from named counts; outcomes absent from the map count 0.
    pub fn from_named<S: AsRef<str>>(
        diagram: &GreechieDiagram,
        named: &BTreeMap<S, u64>,
    ) -> Result<Self, DiagramError> {
        let mut counts = vec![0; diagram.outcome_count()];
        for (name, &n) in named {
            let i = diagram
                .index_of(name.as_ref())
                .ok_or_else(|| DiagramError::UnknownCount(name.as_ref().to_string()))?;
            counts[i] = n;
        }
        Ok(Self { counts })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn get(&self, outcome: usize) -> u64 {
        self.counts[outcome]
    }

    pub fn total(&self) -> u128 {
        self.counts.iter().map(|&n| n as u128).sum()
    }

    /// Counts of a subset, in the subset's order.
    pub fn restrict(&self, indices: &[usize]) -> FrequencyTable {
        FrequencyTable {
            counts: indices.iter().map(|&i| self.counts[i]).collect(),
        }
    }

    pub fn scaled(&self, factor: u64) -> FrequencyTable {
        FrequencyTable {
            counts: self.counts.iter().map(|&n| n * factor).collect(),
        }
    }
}

/// A map p(x) over a diagram's outcomes, in outcome order.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityAssignment {
    values: Vec<f64>,
}

impl ProbabilityAssignment {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, outcome: usize) -> f64 {
        self.values[outcome]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Largest |Σ_{x∈B} p(x) − 1| over the diagram's operations.
    pub fn max_edge_gap(&self, diagram: &GreechieDiagram) -> f64 {
        diagram
            .operations()
            .iter()
            .map(|op| (op.members().iter().map(|&x| self.values[x]).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rule {
    #[serde(rename = "G1")]
    G1,
    #[serde(rename = "G2-OMP")]
    G2Omp,
    #[serde(rename = "G2-OML")]
    G2Oml,
    #[serde(rename = "INTERSECTION")]
    Intersection,
    #[serde(rename = "COVERING")]
    Covering,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::G1 => "G1",
            Rule::G2Omp => "G2-OMP",
            Rule::G2Oml => "G2-OML",
            Rule::Intersection => "INTERSECTION",
            Rule::Covering => "COVERING",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: Rule,
    /// Outcome names and edge labels that exhibit the violation.
    pub witness: Vec<String>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn from_violations(violations: Vec<Violation>) -> Self {
        Self {
            passed: violations.is_empty(),
            violations,
        }
    }
}

/// Orthomodular structure a diagram is checked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    /// Orthomodular poset: every cycle has length at least 4.
    Omp,
    /// Orthomodular lattice: every cycle has length at least 5.
    Oml,
}

impl Target {
    fn min_cycle(self) -> usize {
        match self {
            Target::Omp => 4,
            Target::Oml => 5,
        }
    }

    fn rule(self) -> Rule {
        match self {
            Target::Omp => Rule::G2Omp,
            Target::Oml => Rule::G2Oml,
        }
    }
}

/// Every ordered pair of distinct operations (B1, B2) must satisfy
/// card(B1 ∖ B2) ≥ 2.
pub fn check_g1(diagram: &GreechieDiagram) -> ValidationReport {
    let ops = diagram.operations();
    let mut violations = Vec::new();
    for (i, b1) in ops.iter().enumerate() {
        for (j, b2) in ops.iter().enumerate() {
            if i == j {
                continue;
            }
            let diff = b1.members().iter().filter(|&&x| !b2.contains(x)).count();
            if diff < 2 {
                let (l1, l2) = (diagram.edge_label(i), diagram.edge_label(j));
                violations.push(Violation {
                    rule: Rule::G1,
                    message: format!("card({l1} \\ {l2}) = {diff} < 2"),
                    witness: vec![l1, l2],
                });
            }
        }
    }
    ValidationReport::from_violations(violations)
}

/// Pairs of operations sharing two or more outcomes.
pub fn check_intersections(diagram: &GreechieDiagram) -> ValidationReport {
    let ops = diagram.operations();
    let mut violations = Vec::new();
    for i in 0..ops.len() {
        for j in i + 1..ops.len() {
            let shared: Vec<String> = ops[i]
                .members()
                .iter()
                .filter(|&&x| ops[j].contains(x))
                .map(|&x| diagram.name(x).to_string())
                .collect();
            if shared.len() >= 2 {
                let (l1, l2) = (diagram.edge_label(i), diagram.edge_label(j));
                violations.push(Violation {
                    rule: Rule::Intersection,
                    message: format!("{l1} and {l2} share {} outcomes", shared.len()),
                    witness: vec![l1, l2],
                });
            }
        }
    }
    ValidationReport::from_violations(violations)
}

/// A shortest cycle: its length and the alternating sequence
/// `v0, B0, v1, B1, …` of outcome indices and operation indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cycle {
    pub length: usize,
    pub outcomes: Vec<usize>,
    pub operations: Vec<usize>,
}

/// Shortest cycle of the hypergraph, found by BFS over the bipartite
/// outcome–operation incidence graph (a hypergraph cycle of length n is a
/// bipartite cycle of length 2n). `None` when acyclic.
///
/// Only meaningful when operations pairwise share at most one outcome.
pub fn shortest_cycle(diagram: &GreechieDiagram) -> Option<Cycle> {
    let n_out = diagram.outcome_count();
    let nodes = n_out + diagram.operation_count();
    let neighbours = |v: usize| -> Vec<usize> {
        if v < n_out {
            diagram
                .operations_containing(v)
                .iter()
                .map(|&e| n_out + e)
                .collect()
        } else {
            diagram.operations()[v - n_out].members().to_vec()
        }
    };
    let adjacency: Vec<Vec<usize>> = (0..nodes).map(neighbours).collect();

    let mut best: Option<(usize, Vec<usize>)> = None;
    for root in 0..nodes {
        let mut dist = vec![usize::MAX; nodes];
        let mut parent = vec![usize::MAX; nodes];
        dist[root] = 0;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            if let Some((len, _)) = &best {
                if 2 * dist[u] >= *len {
                    break;
                }
            }
            for &w in &adjacency[u] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    parent[w] = u;
                    queue.push_back(w);
                } else if parent[u] != w {
                    let len = dist[u] + dist[w] + 1;
                    if best.as_ref().is_none_or(|(b, _)| len < *b) {
                        let mut left = path_to_root(&parent, u);
                        let right = path_to_root(&parent, w);
                        // left: u..root, right: w..root; cycle = root..u, w..(child of root)
                        left.reverse();
                        left.extend(right.into_iter().take_while(|&v| v != root));
                        best = Some((len, left));
                    }
                }
            }
        }
    }

    best.map(|(len, walk)| {
        // rotate so the sequence starts on an outcome
        let start = walk.iter().position(|&v| v < n_out).unwrap_or(0);
        let mut seq = walk[start..].to_vec();
        seq.extend_from_slice(&walk[..start]);
        let outcomes = seq.iter().copied().filter(|&v| v < n_out).collect();
        let operations = seq
            .iter()
            .copied()
            .filter(|&v| v >= n_out)
            .map(|v| v - n_out)
            .collect();
        Cycle {
            length: len / 2,
            outcomes,
            operations,
        }
    })
}

fn path_to_root(parent: &[usize], mut v: usize) -> Vec<usize> {
    let mut path = vec![v];
    while parent[v] != usize::MAX {
        v = parent[v];
        path.push(v);
    }
    path
}

/// Cycle-length condition for an orthomodular poset (length ≥ 4) or lattice
/// (length ≥ 5). Acyclic diagrams pass vacuously.
pub fn check_g2(diagram: &GreechieDiagram, target: Target) -> Result<ValidationReport, DiagramError> {
    if let Some(v) = check_intersections(diagram).violations.into_iter().next() {
        let mut w = v.witness.into_iter();
        return Err(DiagramError::IntersectionTooLarge {
            first: w.next().unwrap_or_default(),
            second: w.next().unwrap_or_default(),
        });
    }
    let mut violations = Vec::new();
    if let Some(cycle) = shortest_cycle(diagram) {
        if cycle.length < target.min_cycle() {
            let mut witness = Vec::with_capacity(2 * cycle.length);
            for (v, e) in cycle.outcomes.iter().zip(&cycle.operations) {
                witness.push(diagram.name(*v).to_string());
                witness.push(diagram.edge_label(*e));
            }
            violations.push(Violation {
                rule: target.rule(),
                message: format!(
                    "cycle of length {} (minimum allowed {})",
                    cycle.length,
                    target.min_cycle()
                ),
                witness,
            });
        }
    }
    Ok(ValidationReport::from_violations(violations))
}

/// Result of removing unobserved outcomes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reduction {
    pub diagram: GreechieDiagram,
    pub freq: FrequencyTable,
    /// Original indices of outcomes with zero count.
    pub zeroed: Vec<usize>,
    /// Original indices of operations whose every member was zeroed.
    pub emptied_edges: Vec<usize>,
    /// Reduced outcome index → original outcome index.
    pub parent_index: Vec<usize>,
}

impl Reduction {
    pub fn is_identity(&self) -> bool {
        self.zeroed.is_empty()
    }

    /// Lifts an assignment on the reduced diagram back to the original one,
    /// with p = 0 on zeroed outcomes.
    pub fn lift<T: Clone>(&self, reduced: &[T], zero: T, original_len: usize) -> Vec<T> {
        let mut out = vec![zero; original_len];
        for (l, &g) in self.parent_index.iter().enumerate() {
            out[g] = reduced[l].clone();
        }
        out
    }
}

/// Drops every zero-count outcome from the vertex set and from each edge.
/// Edges left empty are dropped and listed in `emptied_edges`; duplicate
/// traces collapse into one edge. The reduced diagram is not re-validated.
pub fn reduce_zero_counts(
    diagram: &GreechieDiagram,
    freq: &FrequencyTable,
) -> Result<Reduction, DiagramError> {
    let kept: Vec<usize> = (0..diagram.outcome_count())
        .filter(|&x| freq.get(x) > 0)
        .collect();
    if kept.is_empty() {
        return Err(DiagramError::EmptyAfterReduction);
    }
    let zeroed = (0..diagram.outcome_count())
        .filter(|&x| freq.get(x) == 0)
        .collect();
    let emptied_edges = diagram
        .operations()
        .iter()
        .enumerate()
        .filter(|(_, op)| op.members().iter().all(|&x| freq.get(x) == 0))
        .map(|(e, _)| e)
        .collect();
    let sub = diagram.induced(&kept);
    Ok(Reduction {
        freq: freq.restrict(&sub.parent_index),
        diagram: sub.diagram,
        zeroed,
        emptied_edges,
        parent_index: sub.parent_index,
    })
}

/// ℓ(p) = Σ_{x: n(x)>0} n(x) ln p(x); −∞ when a positive-count outcome has
/// p(x) = 0. Zero-count outcomes contribute nothing.
pub fn log_likelihood(freq: &FrequencyTable, p: &ProbabilityAssignment) -> f64 {
    freq.counts()
        .iter()
        .zip(p.values())
        .filter(|(&n, _)| n > 0)
        .map(|(&n, &q)| if q > 0.0 { n as f64 * q.ln() } else { f64::NEG_INFINITY })
        .sum()
}

/// True iff every p(x) lies in [0, 1] and every edge sums to 1 within `tol`.
pub fn check_probability(diagram: &GreechieDiagram, p: &ProbabilityAssignment, tol: f64) -> bool {
    p.len() == diagram.outcome_count()
        && p.values().iter().all(|&q| (0.0..=1.0).contains(&q))
        && p.max_edge_gap(diagram) <= tol
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig1() -> GreechieDiagram {
        GreechieDiagram::build(
            &["a", "c", "e", "b", "d"],
            &[vec!["a", "c", "e"], vec!["b", "d", "e"]],
        )
        .unwrap()
    }

    #[test]
    fn build_rejects_malformed_input() {
        let err = GreechieDiagram::build(&["a", "b"], &[vec!["a"]]).unwrap_err();
        assert_eq!(err, DiagramError::UncoveredOutcome("b".into()));
        let err = GreechieDiagram::build(&["a", "a"], &[vec!["a"]]).unwrap_err();
        assert_eq!(err, DiagramError::DuplicateOutcome("a".into()));
        let err = GreechieDiagram::build(&["a", "b"], &[vec!["a", "b"], vec!["b", "a"]]).unwrap_err();
        assert_eq!(err, DiagramError::DuplicateEdge { first: 0, second: 1 });
        let err = GreechieDiagram::build(&["a"], &[vec!["a"], vec![]]).unwrap_err();
        assert_eq!(err, DiagramError::EmptyEdge(1));
        let err = GreechieDiagram::build(&["a"], &[vec!["a", "z"]]).unwrap_err();
        assert!(matches!(err, DiagramError::UnknownMember { edge: 0, .. }));
        let empty: [&str; 0] = [];
        let none: [Vec<&str>; 0] = [];
        assert_eq!(GreechieDiagram::build(&empty, &none).unwrap_err(), DiagramError::NoOutcomes);
    }

    #[test]
    fn single_vertex_diagram() {
        let d = GreechieDiagram::build(&["e"], &[vec!["e"]]).unwrap();
        assert_eq!(d.outcome_count(), 1);
        assert!(check_g1(&d).passed);
        assert!(shortest_cycle(&d).is_none());
    }

    #[test]
    fn g1_examples() {
        assert!(check_g1(&fig1()).passed);
        let d = GreechieDiagram::build(&["a", "b", "c"], &[vec!["a", "b"], vec!["a", "c"]]).unwrap();
        let r = check_g1(&d);
        assert!(!r.passed);
        assert_eq!(r.violations.len(), 2);
        assert!(r.violations[0].message.contains("= 1"));
        let d = GreechieDiagram::build(
            &["a", "b", "c", "d"],
            &[vec!["a", "b", "c"], vec!["a", "b", "d"]],
        )
        .unwrap();
        assert_eq!(check_g1(&d).violations.len(), 2);
    }

    #[test]
    fn triangle_has_cycle_of_three() {
        let d = GreechieDiagram::build(
            &["a", "b", "c", "x", "y", "z"],
            &[vec!["a", "b", "x"], vec!["b", "c", "y"], vec!["c", "a", "z"]],
        )
        .unwrap();
        let cycle = shortest_cycle(&d).unwrap();
        assert_eq!(cycle.length, 3);
        assert_eq!(cycle.outcomes.len(), 3);
        let mut ops = cycle.operations.clone();
        ops.sort();
        assert_eq!(ops, vec![0, 1, 2]);
        // consecutive outcomes lie in the operation between them
        for i in 0..3 {
            let e = &d.operations()[cycle.operations[i]];
            assert!(e.contains(cycle.outcomes[i]));
            assert!(e.contains(cycle.outcomes[(i + 1) % 3]));
        }
        let r = check_g2(&d, Target::Omp).unwrap();
        assert!(!r.passed);
        assert_eq!(r.violations[0].rule, Rule::G2Omp);
    }

    #[test]
    fn g2_rejects_large_intersections() {
        let d = GreechieDiagram::build(
            &["a", "b", "c", "d"],
            &[vec!["a", "b", "c"], vec!["a", "b", "d"]],
        )
        .unwrap();
        assert!(matches!(
            check_g2(&d, Target::Omp),
            Err(DiagramError::IntersectionTooLarge { .. })
        ));
    }

    #[test]
    fn reduction_examples() {
        let d = fig1();
        let f = FrequencyTable::new(&d, vec![1, 2, 0, 3, 4]).unwrap();
        let r = reduce_zero_counts(&d, &f).unwrap();
        assert_eq!(r.zeroed, vec![2]);
        assert_eq!(r.diagram.operation_count(), 2);
        assert_eq!(r.diagram.edge_label(0), "{a,c}");
        assert_eq!(r.diagram.edge_label(1), "{b,d}");
        assert_eq!(r.freq.counts(), &[1, 2, 3, 4]);

        let f = FrequencyTable::new(&d, vec![1; 5]).unwrap();
        let r = reduce_zero_counts(&d, &f).unwrap();
        assert!(r.is_identity());
        assert_eq!(r.diagram, d);

        let f = FrequencyTable::new(&d, vec![0; 5]).unwrap();
        assert_eq!(reduce_zero_counts(&d, &f).unwrap_err(), DiagramError::EmptyAfterReduction);
    }

    #[test]
    fn reduction_flags_emptied_edges() {
        let d = GreechieDiagram::build(&["a", "b", "c", "d"], &[vec!["a", "b"], vec!["c", "d"]])
            .unwrap();
        let f = FrequencyTable::new(&d, vec![5, 5, 0, 0]).unwrap();
        let r = reduce_zero_counts(&d, &f).unwrap();
        assert_eq!(r.emptied_edges, vec![1]);
        assert_eq!(r.diagram.operation_count(), 1);
    }

    #[test]
    fn log_likelihood_examples() {
        let d = GreechieDiagram::build(&["a", "b"], &[vec!["a", "b"]]).unwrap();
        let f = FrequencyTable::new(&d, vec![2, 3]).unwrap();
        let l = log_likelihood(&f, &ProbabilityAssignment::new(vec![0.4, 0.6]));
        assert!((l - (2.0 * 0.4f64.ln() + 3.0 * 0.6f64.ln())).abs() < 1e-15);
        assert!((l + 3.365058).abs() < 1e-6);

        let f = FrequencyTable::new(&d, vec![1, 0]).unwrap();
        assert_eq!(log_likelihood(&f, &ProbabilityAssignment::new(vec![0.0, 1.0])), f64::NEG_INFINITY);
        let f = FrequencyTable::new(&d, vec![0, 5]).unwrap();
        assert_eq!(log_likelihood(&f, &ProbabilityAssignment::new(vec![0.0, 1.0])), 0.0);
    }

    #[test]
    fn check_probability_examples() {
        let d = fig1();
        let p = ProbabilityAssignment::new(vec![5.0 / 28.0, 15.0 / 28.0, 8.0 / 28.0, 5.0 / 21.0, 10.0 / 21.0]);
        assert!(check_probability(&d, &p, DEFAULT_NORMALIZATION_TOLERANCE));
        let bad = ProbabilityAssignment::new(vec![0.5, 0.5, 0.5, 0.25, 0.25]);
        assert!(!check_probability(&d, &bad, DEFAULT_NORMALIZATION_TOLERANCE));

        let single = GreechieDiagram::build(&["x", "y", "z"], &[vec!["x", "y", "z"]]).unwrap();
        let third = ProbabilityAssignment::new(vec![1.0 / 3.0; 3]);
        assert!(check_probability(&single, &third, DEFAULT_NORMALIZATION_TOLERANCE));
    }
}
