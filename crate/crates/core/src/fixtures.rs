//! Small named diagrams: the standard shapes (the two-operation motivating
//! example, chains of three to five edges, the comb and the square) plus a
//! few degenerate ones used in tests and benchmarks.
//!
//! The JSON files under `fixtures/` at the repository root describe the same
//! diagrams.

use crate::diagram::GreechieDiagram;

fn build(outcomes: &[&str], operations: &[&[&str]]) -> GreechieDiagram {
    let ops: Vec<Vec<&str>> = operations.iter().map(|o| o.to_vec()).collect();
    GreechieDiagram::build(outcomes, &ops).expect("fixture diagrams are well formed")
}

/// Two players sharing the "cancelled" outcome `e`: operations {a,c,e} and {b,d,e}.
pub fn motivating() -> GreechieDiagram {
    build(&["a", "c", "e", "b", "d"], &[&["a", "c", "e"], &["b", "d", "e"]])
}

/// Two disjoint two-outcome operations {a,c} and {b,d}.
pub fn two_edges() -> GreechieDiagram {
    build(&["a", "b", "c", "d"], &[&["a", "c"], &["b", "d"]])
}

/// Three three-outcome operations in a path.
pub fn three_chain() -> GreechieDiagram {
    build(
        &["a1", "a2", "y1", "m", "y2", "b1", "b2"],
        &[&["a1", "a2", "y1"], &["y1", "m", "y2"], &["y2", "b1", "b2"]],
    )
}

/// The three-edge path with larger operations.
pub fn wide_chain() -> GreechieDiagram {
    build(
        &["a1", "a2", "a3", "y1", "m1", "m2", "y2", "b1", "b2"],
        &[
            &["a1", "a2", "a3", "y1"],
            &["y1", "m1", "m2", "y2"],
            &["y2", "b1", "b2"],
        ],
    )
}

/// Three-edge path where each interior block is a single outcome. Its end
/// operations have two outcomes, so it violates G1; it is a hypergraph on
/// which the estimator still works.
pub fn block_chain() -> GreechieDiagram {
    build(
        &["B1", "y1", "B2", "y2", "B3"],
        &[&["B1", "y1"], &["y1", "B2", "y2"], &["y2", "B3"]],
    )
}

/// Four operations in a path (three shared outcomes).
pub fn four_chain() -> GreechieDiagram {
    build(
        &["a1", "a2", "y1", "m1", "y2", "m2", "y3", "b1", "b2"],
        &[
            &["a1", "a2", "y1"],
            &["y1", "m1", "y2"],
            &["y2", "m2", "y3"],
            &["y3", "b1", "b2"],
        ],
    )
}

/// Five operations in a path (four shared outcomes).
pub fn five_chain() -> GreechieDiagram {
    build(
        &["a1", "a2", "y1", "m1", "y2", "m2", "y3", "m3", "y4", "b1", "b2"],
        &[
            &["a1", "a2", "y1"],
            &["y1", "m1", "y2"],
            &["y2", "m2", "y3"],
            &["y3", "m3", "y4"],
            &["y4", "b1", "b2"],
        ],
    )
}

/// A top operation with three teeth hanging from its outcomes.
pub fn comb() -> GreechieDiagram {
    build(
        &["t1", "t2", "t3", "l1", "l2", "m1", "m2", "r1", "r2"],
        &[
            &["t1", "t2", "t3"],
            &["t1", "l1", "l2"],
            &["t2", "m1", "m2"],
            &["t3", "r1", "r2"],
        ],
    )
}

/// Four three-outcome operations around a square; corners are shared.
pub fn square() -> GreechieDiagram {
    build(
        &["c1", "m1", "c2", "m2", "c3", "m3", "c4", "m4"],
        &[
            &["c1", "m1", "c2"],
            &["c2", "m2", "c3"],
            &["c3", "m3", "c4"],
            &["c4", "m4", "c1"],
        ],
    )
}

/// Three operations pairwise sharing one outcome: a cycle of length 3.
pub fn triangle() -> GreechieDiagram {
    build(
        &["a", "b", "c", "x", "y", "z"],
        &[&["a", "b", "x"], &["b", "c", "y"], &["c", "a", "z"]],
    )
}

/// The two-element Boolean algebra: one outcome, one operation.
pub fn single() -> GreechieDiagram {
    build(&["e"], &[&["e"]])
}

/// A named fixture together with whether a closed form is expected.
pub struct Figure {
    pub name: &'static str,
    pub diagram: GreechieDiagram,
    pub closed_form: bool,
    /// Operations pairwise differ in at least two outcomes.
    pub satisfies_g1: bool,
}

/// The nine standard shapes, in figure order.
pub fn figures() -> Vec<Figure> {
    let f = |name, diagram, closed_form, satisfies_g1| Figure {
        name,
        diagram,
        closed_form,
        satisfies_g1,
    };
    vec![
        f("motivating", motivating(), true, true),
        f("two-edges", two_edges(), true, true),
        f("three-chain", three_chain(), true, true),
        f("wide-chain", wide_chain(), true, true),
        f("block-chain", block_chain(), true, false),
        f("four-chain", four_chain(), true, true),
        f("five-chain", five_chain(), true, true),
        f("comb", comb(), false, true),
        f("square", square(), false, true),
    ]
}
