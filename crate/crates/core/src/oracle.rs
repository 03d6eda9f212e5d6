//! Brute-force reference maximizer.
//!
//! Samples the feasible polytope {p ≥ 0 : every edge sums to 1} by hit-and-run
//! and refines the best sample with compass moves inside the constraint null
//! space. The result is a feasible point, so its likelihood is a lower bound
//! on the true maximum; tests use it to check that the solvers are never
//! beaten.

use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand_distr::{Distribution, Open01, StandardNormal};
use rand_xoshiro::rand_core::SeedableRng;
use rand_xoshiro::Xoshiro256StarStar;
use thiserror::Error;

use crate::diagram::{log_likelihood, FrequencyTable, GreechieDiagram, ProbabilityAssignment};
use crate::numeric::{solve_numeric, SolverConfig};

/// Steps between re-projections of the walk onto the constraint plane.
const REPROJECT_EVERY: usize = 64;
const DIRECTION_EPSILON: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("no strictly feasible interior point was found; the diagram may admit no probability assignment")]
    NoInteriorPoint,
    #[error("the feasible set is a single point")]
    DegeneratePolytope { point: ProbabilityAssignment },
    #[error("start point has {found} coordinates, the diagram has {expected} outcomes")]
    StartLength { expected: usize, found: usize },
    #[error("sample_count and refine_steps must be positive")]
    InvalidBudget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleBudget {
    pub sample_count: usize,
    pub refine_steps: usize,
    pub rng_seed: u64,
}

impl Default for OracleBudget {
    fn default() -> Self {
        Self {
            sample_count: 100_000,
            refine_steps: 1_000,
            rng_seed: 0x5eed,
        }
    }
}

impl OracleBudget {
    pub fn with_seed(rng_seed: u64) -> Self {
        Self {
            rng_seed,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<(), OracleError> {
        if self.sample_count == 0 || self.refine_steps == 0 {
            return Err(OracleError::InvalidBudget);
        }
        Ok(())
    }
}

/// Exact null space of the edge × outcome incidence matrix, one rational
/// vector per free column of its reduced row echelon form.
pub fn constraint_null_space(diagram: &GreechieDiagram) -> Vec<Vec<BigRational>> {
    let cols = diagram.outcome_count();
    let mut rows: Vec<Vec<BigRational>> = diagram
        .operations()
        .iter()
        .map(|op| {
            (0..cols)
                .map(|x| {
                    if op.contains(x) {
                        BigRational::one()
                    } else {
                        BigRational::zero()
                    }
                })
                .collect()
        })
        .collect();

    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(r, p);
        let inv = rows[r][c].recip();
        for v in rows[r].iter_mut() {
            *v = &*v * &inv;
        }
        let pivot_row = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != r && !row[c].is_zero() {
                let factor = row[c].clone();
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= &factor * pv;
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == rows.len() {
            break;
        }
    }

    (0..cols)
        .filter(|c| !pivots.contains(c))
        .map(|free| {
            let mut v = vec![BigRational::zero(); cols];
            v[free] = BigRational::one();
            for (row, &pc) in pivots.iter().enumerate() {
                v[pc] = -rows[row][free].clone();
            }
            v
        })
        .collect()
}

/// Rank of the constraint system, i.e. outcome count minus polytope dimension.
pub fn constraint_rank(diagram: &GreechieDiagram) -> usize {
    diagram.outcome_count() - constraint_null_space(diagram).len()
}

/// Orthonormal basis of the null space (modified Gram–Schmidt, applied twice).
fn orthonormal_basis(diagram: &GreechieDiagram) -> Vec<Vec<f64>> {
    let exact = constraint_null_space(diagram);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(exact.len());
    for v in exact {
        let mut w: Vec<f64> = v.iter().map(|q| q.to_f64().unwrap_or(f64::NAN)).collect();
        for _ in 0..2 {
            for b in &basis {
                let dot = dot(&w, b);
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= dot * bi;
                }
            }
        }
        let norm = dot(&w, &w).sqrt();
        basis.push(w.into_iter().map(|x| x / norm).collect());
    }
    basis
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Strictly feasible point: the estimate for unit counts. `None` if the
/// numeric solver does not converge.
pub fn interior_point(diagram: &GreechieDiagram) -> Option<ProbabilityAssignment> {
    let ones = FrequencyTable::new(diagram, vec![1; diagram.outcome_count()]).ok()?;
    let result = solve_numeric(diagram, &ones, &SolverConfig::default()).ok()?;
    let p = result.probabilities;
    p.values().iter().all(|&x| x > 0.0).then_some(p)
}

/// Hit-and-run walk; an endless stream of feasible points.
#[derive(Debug, Clone)]
pub struct HitAndRun {
    anchor: Vec<f64>,
    current: Vec<f64>,
    basis: Vec<Vec<f64>>,
    rng: Xoshiro256StarStar,
    steps: usize,
}

impl HitAndRun {
    pub fn dimension(&self) -> usize {
        self.basis.len()
    }

    fn direction(&mut self) -> Vec<f64> {
        let mut d = vec![0.0; self.current.len()];
        for b in &self.basis {
            let g: f64 = StandardNormal.sample(&mut self.rng);
            for (di, bi) in d.iter_mut().zip(b) {
                *di += g * bi;
            }
        }
        d
    }

    /// Projects onto anchor + span(basis), then clamps rounding negatives.
    fn reproject(&mut self) {
        let offset: Vec<f64> = self.current.iter().zip(&self.anchor).map(|(x, a)| x - a).collect();
        let mut projected = self.anchor.clone();
        for b in &self.basis {
            let t = dot(&offset, b);
            for (pi, bi) in projected.iter_mut().zip(b) {
                *pi += t * bi;
            }
        }
        self.current = projected;
        clamp_nonnegative(&mut self.current);
    }
}

fn clamp_nonnegative(p: &mut [f64]) {
    for x in p.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

/// Range of t with p + t·d ≥ 0.
fn feasible_segment(p: &[f64], d: &[f64]) -> (f64, f64) {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for (&x, &dx) in p.iter().zip(d) {
        if dx > DIRECTION_EPSILON {
            lo = lo.max(-x / dx);
        } else if dx < -DIRECTION_EPSILON {
            hi = hi.min(-x / dx);
        }
    }
    (lo.min(0.0), hi.max(0.0))
}

impl Iterator for HitAndRun {
    type Item = ProbabilityAssignment;

    fn next(&mut self) -> Option<ProbabilityAssignment> {
        let d = self.direction();
        let (lo, hi) = feasible_segment(&self.current, &d);
        let u: f64 = Open01.sample(&mut self.rng);
        let t = lo + u * (hi - lo);
        for (x, dx) in self.current.iter_mut().zip(&d) {
            *x += t * dx;
        }
        self.steps += 1;
        if self.steps % REPROJECT_EVERY == 0 {
            self.reproject();
        } else {
            clamp_nonnegative(&mut self.current);
        }
        Some(ProbabilityAssignment::new(self.current.clone()))
    }
}

/// Starts a hit-and-run walk at `start`, which must be strictly feasible.
/// A zero-dimensional polytope is reported as `DegeneratePolytope` carrying
/// the unique point.
pub fn sample_feasible(
    diagram: &GreechieDiagram,
    start: &ProbabilityAssignment,
    budget: &OracleBudget,
) -> Result<HitAndRun, OracleError> {
    budget.validate()?;
    if start.len() != diagram.outcome_count() {
        return Err(OracleError::StartLength {
            expected: diagram.outcome_count(),
            found: start.len(),
        });
    }
    let basis = orthonormal_basis(diagram);
    if basis.is_empty() {
        return Err(OracleError::DegeneratePolytope { point: start.clone() });
    }
    Ok(HitAndRun {
        anchor: start.values().to_vec(),
        current: start.values().to_vec(),
        basis,
        rng: Xoshiro256StarStar::seed_from_u64(budget.rng_seed),
        steps: 0,
    })
}

/// Best of `sample_count` hit-and-run samples, then compass search along
/// ±basis directions with step halving for `refine_steps` rounds.
pub fn brute_force_mle(
    diagram: &GreechieDiagram,
    freq: &FrequencyTable,
    budget: &OracleBudget,
) -> Result<ProbabilityAssignment, OracleError> {
    budget.validate()?;
    let start = interior_point(diagram).ok_or(OracleError::NoInteriorPoint)?;
    let mut walk = match sample_feasible(diagram, &start, budget) {
        Ok(walk) => walk,
        Err(OracleError::DegeneratePolytope { point }) => return Ok(point),
        Err(e) => return Err(e),
    };

    let mut best = start.values().to_vec();
    let mut best_l = log_likelihood(freq, &start);
    for sample in walk.by_ref().take(budget.sample_count) {
        let l = log_likelihood(freq, &sample);
        if l > best_l {
            best_l = l;
            best = sample.into_values();
        }
    }

    let basis = std::mem::take(&mut walk.basis);
    let mut step = 0.1;
    let mut trial = vec![0.0; best.len()];
    for _ in 0..budget.refine_steps {
        let mut improved = false;
        for b in &basis {
            for sign in [1.0, -1.0] {
                for ((t, x), bi) in trial.iter_mut().zip(&best).zip(b) {
                    *t = x + sign * step * bi;
                }
                if trial.iter().any(|&t| t < 0.0) {
                    continue;
                }
                let l = log_likelihood(freq, &ProbabilityAssignment::new(trial.clone()));
                if l > best_l {
                    best_l = l;
                    best.copy_from_slice(&trial);
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
            if step < 1e-15 {
                break;
            }
        }
    }
    Ok(ProbabilityAssignment::new(best))
}

/// True iff every null-space vector sums to exactly zero over every edge.
pub fn null_space_is_exact(diagram: &GreechieDiagram) -> bool {
    constraint_null_space(diagram).iter().all(|v| {
        diagram.operations().iter().all(|op| {
            op.members()
                .iter()
                .fold(BigRational::zero(), |acc, &x| acc + &v[x])
                .is_zero()
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed::solve_chain_k;
    use crate::decompose::detect_chain;
    use crate::diagram::check_probability;
    use crate::fixtures;

    fn small_budget(seed: u64) -> OracleBudget {
        OracleBudget {
            sample_count: 5_000,
            refine_steps: 1_000,
            rng_seed: seed,
        }
    }

    #[test]
    fn interior_point_examples() {
        let single = GreechieDiagram::build(&["a", "b", "c"], &[vec!["a", "b", "c"]]).unwrap();
        for x in interior_point(&single).unwrap().values() {
            assert!((x - 1.0 / 3.0).abs() < 1e-12);
        }

        let p = interior_point(&fixtures::motivating()).unwrap(); // a, c, e, b, d
        let want = [0.4, 0.4, 0.2, 0.4, 0.4];
        for (got, want) in p.values().iter().zip(want) {
            assert!((got - want).abs() < 1e-10);
        }

        let sq = fixtures::square();
        let p = interior_point(&sq).unwrap();
        assert!(p.values().iter().all(|&x| x > 0.0));
        assert!(check_probability(&sq, &p, 1e-10));
    }

    #[test]
    fn polytope_dimensions() {
        assert_eq!(constraint_null_space(&fixtures::three_chain()).len(), 4);
        assert_eq!(constraint_rank(&fixtures::three_chain()), 3);
        // the square's four edge constraints are independent: 8 - 4
        assert_eq!(constraint_null_space(&fixtures::square()).len(), 4);
        for f in fixtures::figures() {
            assert!(null_space_is_exact(&f.diagram), "{}", f.name);
        }
    }

    #[test]
    fn segment_walk_covers_unit_interval() {
        let d = GreechieDiagram::build(&["a", "b"], &[vec!["a", "b"]]).unwrap();
        let start = ProbabilityAssignment::new(vec![0.5, 0.5]);
        let walk = sample_feasible(&d, &start, &small_budget(1)).unwrap();
        assert_eq!(walk.dimension(), 1);
        let (mut lo, mut hi) = (1.0f64, 0.0f64);
        for p in walk.take(2_000) {
            assert!(check_probability(&d, &p, 1e-12));
            lo = lo.min(p.get(0));
            hi = hi.max(p.get(0));
        }
        assert!(lo < 0.01 && hi > 0.99);
    }

    #[test]
    fn samples_stay_feasible() {
        for f in fixtures::figures() {
            let start = interior_point(&f.diagram).unwrap();
            let walk = sample_feasible(&f.diagram, &start, &small_budget(7)).unwrap();
            for p in walk.take(3_000) {
                assert!(check_probability(&f.diagram, &p, 1e-9), "{}", f.name);
            }
        }
    }

    #[test]
    fn same_seed_same_stream() {
        let d = fixtures::comb();
        let start = interior_point(&d).unwrap();
        let a: Vec<_> = sample_feasible(&d, &start, &small_budget(3)).unwrap().take(100).collect();
        let b: Vec<_> = sample_feasible(&d, &start, &small_budget(3)).unwrap().take(100).collect();
        let c: Vec<_> = sample_feasible(&d, &start, &small_budget(4)).unwrap().take(100).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn single_outcome_is_degenerate() {
        let d = fixtures::single();
        let start = ProbabilityAssignment::new(vec![1.0]);
        match sample_feasible(&d, &start, &small_budget(0)) {
            Err(OracleError::DegeneratePolytope { point }) => assert_eq!(point.values(), &[1.0]),
            other => panic!("unexpected {other:?}"),
        }
        let f = FrequencyTable::new(&d, vec![4]).unwrap();
        assert_eq!(brute_force_mle(&d, &f, &small_budget(0)).unwrap().values(), &[1.0]);
    }

    #[test]
    fn recovers_classical_estimate() {
        let d = GreechieDiagram::build(&["a", "b", "c"], &[vec!["a", "b", "c"]]).unwrap();
        let f = FrequencyTable::new(&d, vec![2, 3, 5]).unwrap();
        let p = brute_force_mle(&d, &f, &small_budget(11)).unwrap();
        for (got, want) in p.values().iter().zip([0.2, 0.3, 0.5]) {
            assert!((got - want).abs() < 1e-3);
        }
    }

    #[test]
    fn recovers_three_chain_estimate() {
        let d = fixtures::three_chain();
        let f = FrequencyTable::new(&d, vec![1; 7]).unwrap();
        let p = brute_force_mle(&d, &f, &small_budget(5)).unwrap();
        let closed = solve_chain_k(&d, &detect_chain(&d).unwrap(), &f).unwrap();
        for (got, want) in p.values().iter().zip(closed.probabilities.values()) {
            assert!((got - want).abs() < 1e-3);
        }
        assert!(closed.log_likelihood >= log_likelihood(&f, &p) - 1e-9);
    }
}
