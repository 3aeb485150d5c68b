//! Shared fixtures for the criterion benchmarks.

use sepinv::assertion::{Assertion, PredicateRegistry};
use sepinv::frontend::ast::Func;
use sepinv::frontend::parse_entailment;

/// Registry and functions of a bundled corpus file.
pub fn program(name: &str) -> (PredicateRegistry, Vec<Func>) {
    sepinv::corpus::file(name).expect("bundled file").parse().expect("bundled corpus parses")
}

pub fn function<'a>(funcs: &'a [Func], name: &str) -> &'a Func {
    funcs.iter().find(|f| f.name == name).expect("bundled function")
}

/// Entailments over the list predicates, from one-step folds to longer chains.
pub const LIST_GOALS: &[&str] = &[
    "x->tail == y |- lseg(x, y)",
    "exists a, x->tail == a * a->tail == 0 |- listrep(x)",
    "lseg(x, y) * lseg(y, 0) |- listrep(x)",
    "p->tail == 0 && lseg(w, p) * listrep(v) |- lseg(w, p) * listrep(p) * listrep(v)",
    "exists a b c, w->tail == a * a->tail == b * b->tail == c * c->tail == p * p->tail == 0 * listrep(v) |- lseg(w, p) * p->tail == 0 * listrep(v)",
];

pub fn list_goals(reg: &PredicateRegistry) -> Vec<(Assertion, Assertion)> {
    LIST_GOALS.iter().map(|g| parse_entailment(g, reg).expect("goal parses")).collect()
}
