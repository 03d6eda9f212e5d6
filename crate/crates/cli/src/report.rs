//! Output documents and their text renderings.

use std::fmt::Write as _;

use greechie_mle::{
    check_g1, check_g2, check_intersections, BigRational, DecompositionTree, Estimate, GreechieDiagram, PlanKind,
    PlanNode, Target, ValidationReport,
};
use serde::Serialize;
use serde_json::{Map, Value};

/// Decimal rendering with at most 15 significant digits.
pub fn decimal(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".into() } else { v.to_string() };
    }
    let exponent = v.abs().log10().floor() as i32;
    if !(-5..15).contains(&exponent) {
        return format!("{v:.14e}");
    }
    let decimals = (14 - exponent).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn fraction(q: &BigRational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationSummary {
    pub g1: ValidationReport,
    pub intersection: ValidationReport,
    /// `None` when some pair of operations shares two or more outcomes.
    pub g2_omp: Option<ValidationReport>,
    pub g2_oml: Option<ValidationReport>,
}

impl ValidationSummary {
    pub fn of(d: &GreechieDiagram) -> Self {
        Self {
            g1: check_g1(d),
            intersection: check_intersections(d),
            g2_omp: check_g2(d, Target::Omp).ok(),
            g2_oml: check_g2(d, Target::Oml).ok(),
        }
    }

    pub fn omp(&self) -> bool {
        self.g1.passed && self.g2_omp.as_ref().is_some_and(|r| r.passed)
    }

    pub fn oml(&self) -> bool {
        self.g1.passed && self.g2_oml.as_ref().is_some_and(|r| r.passed)
    }

    pub fn brief(&self) -> Value {
        serde_json::json!({
            "g1": self.g1.passed,
            "intersection": self.intersection.passed,
            "g2_omp": self.g2_omp.as_ref().map(|r| r.passed),
            "g2_oml": self.g2_oml.as_ref().map(|r| r.passed),
        })
    }

    pub fn text(&self) -> String {
        let mut out = String::new();
        let status = |r: Option<&ValidationReport>| match r {
            Some(r) if r.passed => "pass",
            Some(_) => "fail",
            None => "not checked (operations share more than one outcome)",
        };
        for (name, report) in [
            ("G1", Some(&self.g1)),
            ("INTERSECTION", Some(&self.intersection)),
            ("G2-OMP", self.g2_omp.as_ref()),
            ("G2-OML", self.g2_oml.as_ref()),
        ] {
            let _ = writeln!(out, "{name}: {}", status(report));
            for v in report.map(|r| r.violations.as_slice()).unwrap_or_default() {
                let _ = writeln!(out, "  {} [{}]", v.message, v.witness.join(", "));
            }
        }
        let _ = writeln!(
            out,
            "OMP: {}, OML: {}",
            if self.omp() { "pass" } else { "fail" },
            if self.oml() { "pass" } else { "fail" }
        );
        out
    }
}

fn names(d: &GreechieDiagram) -> Vec<String> {
    d.outcomes().iter().map(|o| o.to_string()).collect()
}

pub fn tree_json(node: &PlanNode) -> Value {
    let d = &node.diagram;
    let mut obj = Map::new();
    let kind = match &node.kind {
        PlanKind::HorizontalSum(_) => "horizontal-sum",
        PlanKind::Product(_) => "product",
        PlanKind::Chain(_) => "chain",
        PlanKind::ClassicalLeaf => "classical",
        PlanKind::NumericLeaf => "numeric",
    };
    obj.insert("kind".into(), kind.into());
    obj.insert("outcomes".into(), names(d).into());
    match &node.kind {
        PlanKind::HorizontalSum(children) | PlanKind::Product(children) => {
            obj.insert("children".into(), children.iter().map(tree_json).collect::<Vec<_>>().into());
        }
        PlanKind::Chain(chain) => {
            let edges: Vec<String> = chain.edges.iter().map(|&e| d.edge_label(e)).collect();
            let shared: Vec<String> = chain.shared.iter().map(|&y| d.name(y).to_string()).collect();
            obj.insert("operations".into(), edges.into());
            obj.insert("shared".into(), shared.into());
        }
        PlanKind::ClassicalLeaf | PlanKind::NumericLeaf => {
            let edges: Vec<String> = (0..d.operation_count()).map(|e| d.edge_label(e)).collect();
            obj.insert("operations".into(), edges.into());
        }
    }
    Value::Object(obj)
}

pub fn tree_text(tree: &DecompositionTree) -> String {
    fn walk(node: &PlanNode, depth: usize, out: &mut String) {
        let d = &node.diagram;
        let detail = match &node.kind {
            PlanKind::Chain(chain) => {
                let edges: Vec<String> = chain.edges.iter().map(|&e| d.edge_label(e)).collect();
                format!(" {}", edges.join(" - "))
            }
            PlanKind::ClassicalLeaf | PlanKind::NumericLeaf => {
                let edges: Vec<String> = (0..d.operation_count()).map(|e| d.edge_label(e)).collect();
                format!(" {}", edges.join(" "))
            }
            _ => String::new(),
        };
        let _ = writeln!(out, "{}{}{detail}", "  ".repeat(depth), node.label());
        for child in node.children() {
            walk(child, depth + 1, out);
        }
    }
    let mut out = String::new();
    walk(&tree.root, 0, &mut out);
    out
}

/// Everything `estimate` reports.
pub fn result_document(d: &GreechieDiagram, e: &Estimate, digest: &str) -> Value {
    let r = &e.result;
    let mut probabilities = Map::new();
    for (x, &p) in r.probabilities.values().iter().enumerate() {
        let mut entry = Map::new();
        entry.insert("value".into(), decimal(p).into());
        if let Some(exact) = &r.exact {
            entry.insert("exact".into(), fraction(&exact[x]).into());
        }
        probabilities.insert(d.name(x).to_string(), Value::Object(entry));
    }
    let splitting: Vec<Value> = r
        .diagnostics
        .splitting
        .iter()
        .map(|s| serde_json::json!({ "shared": s.shared, "values": s.values }))
        .collect();
    let zeroed: Vec<&str> = e.reduction.zeroed.iter().map(|&x| d.name(x)).collect();
    serde_json::json!({
        "probabilities": probabilities,
        "method": r.method.to_string(),
        "log_likelihood": finite_or_null(r.log_likelihood),
        "kkt_residual": r.residual,
        "decomposition": e.plan.as_ref().map(|p| tree_json(&p.root)),
        "splitting_parameters": splitting,
        "zeroed": zeroed,
        "validation": ValidationSummary::of(d).brief(),
        "version": env!("CARGO_PKG_VERSION"),
        "input_digest": format!("sha256:{digest}"),
    })
}

fn finite_or_null(v: f64) -> Value {
    if v.is_finite() {
        v.into()
    } else {
        Value::Null
    }
}

pub fn result_text(d: &GreechieDiagram, e: &Estimate) -> String {
    let r = &e.result;
    let mut out = String::new();
    let width = d.outcomes().iter().map(|o| o.as_str().len()).max().unwrap_or(0);
    for (x, &p) in r.probabilities.values().iter().enumerate() {
        let exact = r.exact.as_ref().map(|v| format!("  ({})", fraction(&v[x]))).unwrap_or_default();
        let _ = writeln!(out, "{:<width$}  {}{exact}", d.name(x), decimal(p));
    }
    let _ = writeln!(out, "method: {}", r.method);
    let _ = writeln!(out, "log-likelihood: {}", r.log_likelihood);
    let _ = writeln!(out, "KKT residual: {:.3e}", r.residual);
    for s in &r.diagnostics.splitting {
        let pairs: Vec<String> = s.shared.iter().zip(&s.values).map(|(y, c)| format!("{y}={}", decimal(*c))).collect();
        let _ = writeln!(out, "splitting parameters: {}", pairs.join(", "));
    }
    if let Some(plan) = &e.plan {
        out.push_str(&tree_text(plan));
    }
    out
}
