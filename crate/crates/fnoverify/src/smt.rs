//! QF_LRA SMT-LIB2 script generation.
//!
//! A query bundles the admissible-input constraints, a functional encoding
//! of the compiled network (one fresh variable per pre-activation
//! coordinate, ReLU as an if-then-else on the sign of the pre-activation),
//! and the negation of the property under test, so SAT means "violation
//! exists" and the model is a concrete counterexample. Every constant is an
//! exact rational: weights convert from binary64 without rounding, bounds
//! come from their decimal spellings. Zero coefficients are skipped; the
//! skip threshold is exact zero, never an epsilon.
//!
//! Variable naming is stable for golden tests: inputs `in_i`,
//! pre-activations `z_<layer>_<row>`, ReLU outputs `h_<layer>_<row>`,
//! outputs `out_i`.

use crate::constraints::ConstraintSet;
use crate::error::{Error, Result};
use crate::field::Grid;
use crate::pln::{PlnNet, Provenance};
use crate::rational::{rat, rat_from_f64, rat_int, rat_to_f64, rat_to_smt, Rat};
use crate::fno::Activation;
use num_traits::Zero;

/// The two physics properties.
#[derive(Debug, Clone, PartialEq)]
pub enum PropertyKind {
    /// M(f(u)) <= M(u) + epsilon must hold; a counterexample exceeds it.
    MassNonIncrease { epsilon: Rat },
    /// min_i f(u)_i >= 0 must hold for inputs floored at `lower`.
    Positivity { lower: Rat },
}

impl PropertyKind {
    pub fn mass_default() -> Self {
        PropertyKind::MassNonIncrease { epsilon: rat(1, 20) }
    }

    pub fn positivity_default() -> Self {
        PropertyKind::Positivity { lower: rat(1, 10) }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PropertyKind::MassNonIncrease { .. } => "mass",
            PropertyKind::Positivity { .. } => "positivity",
        }
    }

    /// The admissible input set this property is checked over.
    pub fn constraint_set(&self, grid: Grid) -> ConstraintSet {
        match self {
            PropertyKind::MassNonIncrease { .. } => ConstraintSet::for_mass(grid),
            PropertyKind::Positivity { lower } => ConstraintSet::new(
                lower.clone(),
                rat_int(5),
                rat(15, grid.n() as i64),
            )
            .expect("positivity box"),
        }
    }
}

/// One verification query: a property plus an optional extra severity
/// margin demanded on top of the violation threshold (used by the
/// severity-maximization search).
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyQuery {
    pub kind: PropertyKind,
    pub severity_threshold: Option<Rat>,
}

impl PropertyQuery {
    pub fn new(kind: PropertyKind) -> Self {
        PropertyQuery { kind, severity_threshold: None }
    }

    pub fn with_threshold(kind: PropertyKind, t: Rat) -> Self {
        PropertyQuery { kind, severity_threshold: Some(t) }
    }

    pub fn threshold(&self) -> Rat {
        self.severity_threshold.clone().unwrap_or_else(Rat::zero)
    }
}

/// Term-count statistics of an emitted encoding. A monomial is a nonzero
/// linear coefficient or a nonzero constant in one defining equality.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MonomialStats {
    pub total: usize,
    pub hidden: usize,
    pub equalities: usize,
}

/// A complete SMT-LIB2 document plus the input-variable order needed to
/// decode solver models.
#[derive(Debug, Clone)]
pub struct SmtScript {
    pub text: String,
    pub var_map: Vec<String>,
    pub provenance: Provenance,
    pub stats: MonomialStats,
}

/// Emit the 4N admissible-input assertions: 2N box bounds and 2N cyclic
/// adjacent-difference bounds.
pub fn encode_constraints(c: &ConstraintSet, n: usize) -> String {
    let mut out = String::new();
    let lo = rat_to_smt(c.lower());
    let hi = rat_to_smt(c.upper());
    let s = rat_to_smt(c.slope_bound());
    let neg_s = rat_to_smt(&(-c.slope_bound().clone()));
    for i in 0..n {
        out.push_str(&format!("(assert (>= in_{i} {lo}))\n"));
        out.push_str(&format!("(assert (<= in_{i} {hi}))\n"));
    }
    for i in 0..n {
        let j = (i + 1) % n;
        out.push_str(&format!("(assert (<= (- in_{j} in_{i}) {s}))\n"));
        out.push_str(&format!("(assert (>= (- in_{j} in_{i}) {neg_s}))\n"));
    }
    out
}

/// Names of the value feeding each coordinate of the next layer.
fn layer_output_names(layer_idx: usize, rows: usize, activation: Activation, is_last: bool) -> Vec<String> {
    (0..rows)
        .map(|r| {
            if is_last {
                format!("out_{r}")
            } else if activation == Activation::Relu {
                format!("h_{layer_idx}_{r}")
            } else {
                format!("z_{layer_idx}_{r}")
            }
        })
        .collect()
}

/// Encode the network as declarations plus functional equalities.
pub fn encode_net(net: &PlnNet) -> Result<(String, MonomialStats)> {
    net.validate()?;
    let mut out = String::new();
    let mut stats = MonomialStats::default();
    let last = net.layers.len() - 1;
    let mut input_names: Vec<String> = (0..net.input_dim).map(|i| format!("in_{i}")).collect();
    for (idx, layer) in net.layers.iter().enumerate() {
        let is_last = idx == last;
        let is_hidden = idx > 0 && !is_last;
        let z_names: Vec<String> = (0..layer.rows())
            .map(|r| if is_last { format!("out_{r}") } else { format!("z_{idx}_{r}") })
            .collect();
        for r in 0..layer.rows() {
            let mut terms: Vec<String> = Vec::new();
            let mut count = 0usize;
            for c in 0..layer.cols() {
                let w = layer.weight[(r, c)];
                if w == 0.0 {
                    continue;
                }
                let coeff = rat_from_f64(w)?;
                terms.push(format!("(* {} {})", rat_to_smt(&coeff), input_names[c]));
                count += 1;
            }
            let bias = layer.bias[r];
            if bias != 0.0 {
                terms.push(rat_to_smt(&rat_from_f64(bias)?));
                count += 1;
            }
            let rhs = match terms.len() {
                0 => "0".to_string(),
                1 => terms.pop().unwrap(),
                _ => format!("(+ {})", terms.join(" ")),
            };
            out.push_str(&format!("(declare-const {} Real)\n", z_names[r]));
            out.push_str(&format!("(assert (= {} {rhs}))\n", z_names[r]));
            stats.total += count;
            stats.equalities += 1;
            if is_hidden {
                stats.hidden += count;
            }
        }
        if layer.activation == Activation::Relu {
            if is_last {
                return Err(Error::InvalidParam(
                    "output layer with ReLU is not part of this model family".into(),
                ));
            }
            for r in 0..layer.rows() {
                let h = format!("h_{idx}_{r}");
                let z = &z_names[r];
                out.push_str(&format!("(declare-const {h} Real)\n"));
                out.push_str(&format!("(assert (= {h} (ite (>= {z} 0) {z} 0)))\n"));
            }
        }
        input_names = layer_output_names(idx, layer.rows(), layer.activation, is_last);
    }
    Ok((out, stats))
}

fn sum_of(names: impl Iterator<Item = String>) -> String {
    let list: Vec<String> = names.collect();
    match list.len() {
        0 => "0".into(),
        1 => list.into_iter().next().unwrap(),
        _ => format!("(+ {})", list.join(" ")),
    }
}

/// Emit the negated property over the declared inputs and outputs.
fn encode_negated_property(q: &PropertyQuery, n: usize) -> String {
    let t = q.threshold();
    match &q.kind {
        PropertyKind::Positivity { .. } => {
            // Violation: some output below -t.
            let bound = rat_to_smt(&(-t));
            let disjuncts: Vec<String> =
                (0..n).map(|i| format!("(< out_{i} {bound})")).collect();
            format!("(assert (or {}))\n", disjuncts.join(" "))
        }
        PropertyKind::MassNonIncrease { epsilon } => {
            // Violation: M(out) - M(in) > epsilon + t. Scaled by N to avoid
            // a division: sum(out) - sum(in) > N * (epsilon + t).
            let rhs = rat_int(n as i64) * (epsilon.clone() + t);
            let sum_out = sum_of((0..n).map(|i| format!("out_{i}")));
            let sum_in = sum_of((0..n).map(|i| format!("in_{i}")));
            format!("(assert (> (- {sum_out} {sum_in}) {}))\n", rat_to_smt(&rhs))
        }
    }
}

/// Assemble a complete query script for a compiled network.
pub fn encode_query(net: &PlnNet, c: &ConstraintSet, q: &PropertyQuery) -> Result<SmtScript> {
    let n = net.input_dim;
    let mut text = String::new();
    text.push_str(&format!(
        "; {} encoding, property {}, threshold {}\n",
        net.provenance.label(),
        q.kind.name(),
        rat_to_f64(&q.threshold()),
    ));
    text.push_str("(set-option :produce-models true)\n");
    text.push_str("(set-logic QF_LRA)\n");
    let var_map: Vec<String> = (0..n).map(|i| format!("in_{i}")).collect();
    for name in &var_map {
        text.push_str(&format!("(declare-const {name} Real)\n"));
    }
    text.push_str(&encode_constraints(c, n));
    let (net_block, stats) = encode_net(net)?;
    text.push_str(&net_block);
    text.push_str(&encode_negated_property(q, n));
    text.push_str("(check-sat)\n");
    text.push_str(&format!("(get-value ({}))\n", var_map.join(" ")));
    Ok(SmtScript { text, var_map, provenance: net.provenance.clone(), stats })
}

/// Canonical artifact name for a query:
/// `{model}-{property}-{encoding}-t{threshold}.smt2`.
pub fn query_file_name(model: &str, q: &PropertyQuery, provenance: &Provenance) -> String {
    format!(
        "{model}-{}-{}-t{}.smt2",
        q.kind.name(),
        provenance.label(),
        rat_to_f64(&q.threshold()),
    )
}

/// Decide, in exact arithmetic, whether concrete input/output values
/// satisfy the *negated* property asserted by [`encode_query`]. This is the
/// single definition used both by tests and by the counterexample audit.
pub fn negated_property_holds(q: &PropertyQuery, ins: &[Rat], outs: &[Rat]) -> bool {
    let t = q.threshold();
    match &q.kind {
        PropertyKind::Positivity { .. } => outs.iter().any(|o| *o < -t.clone()),
        PropertyKind::MassNonIncrease { epsilon } => {
            let n = rat_int(ins.len() as i64);
            let sum_out: Rat = outs.iter().cloned().sum();
            let sum_in: Rat = ins.iter().cloned().sum();
            sum_out - sum_in > n * (epsilon.clone() + t)
        }
    }
}

/// Exact rational severity of a concrete evaluation: the mass gap for the
/// mass property, minus the smallest output for positivity.
pub fn rational_severity(q: &PropertyQuery, ins: &[Rat], outs: &[Rat]) -> Rat {
    match &q.kind {
        PropertyKind::Positivity { .. } => {
            let min = outs.iter().min().expect("nonempty outputs");
            -min.clone()
        }
        PropertyKind::MassNonIncrease { .. } => {
            let n = rat_int(ins.len() as i64);
            let sum_out: Rat = outs.iter().cloned().sum();
            let sum_in: Rat = ins.iter().cloned().sum();
            (sum_out - sum_in) / n
        }
    }
}
