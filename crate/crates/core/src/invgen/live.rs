//! Variable liveness over loop-free and looping statements, and projection
//! of dead variables out of assertions.

use std::collections::BTreeSet;

use crate::assertion::{simplify_heap, Assertion, Subst, SymbolicHeap, Term};
use crate::frontend::ast::{Cond, Expr, LValue, Stmt, StmtKind};

fn expr_vars(e: &Expr, out: &mut BTreeSet<String>) {
    e.collect_vars(out);
}

fn cond_vars(c: &Cond) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    c.collect_vars(&mut out);
    out
}

/// Variables live before `s` given those live after it.
pub fn live_in(s: &Stmt, live_out: &BTreeSet<String>) -> BTreeSet<String> {
    match &s.kind {
        StmtKind::Skip => live_out.clone(),
        StmtKind::Assign(lv, e) => {
            let mut l = live_out.clone();
            match lv {
                LValue::Var(x) => {
                    l.remove(x);
                }
                LValue::Field(b, _) | LValue::Deref(b) => expr_vars(b, &mut l),
            }
            expr_vars(e, &mut l);
            l
        }
        StmtKind::Seq(v) => v.iter().rev().fold(live_out.clone(), |l, x| live_in(x, &l)),
        StmtKind::If(c, a, b) => {
            let mut l = live_in(a, live_out);
            l.extend(live_in(b, live_out));
            l.extend(cond_vars(c));
            l
        }
        StmtKind::While(c, b) => loop_head_live(c, b, live_out),
        StmtKind::Call(_, args) => {
            let mut l = live_out.clone();
            args.iter().for_each(|a| expr_vars(a, &mut l));
            l
        }
    }
}

/// Least fixpoint of liveness at the head of `while (c) body`.
pub fn loop_head_live(c: &Cond, body: &Stmt, live_out: &BTreeSet<String>) -> BTreeSet<String> {
    let mut l = live_out.clone();
    l.extend(cond_vars(c));
    loop {
        let next: BTreeSet<String> = l.union(&live_in(body, &l)).cloned().collect();
        if next == l {
            return l;
        }
        l = next;
    }
}

/// Existentially quantifies every program variable outside `keep`.
pub fn project_heap(h: &SymbolicHeap, keep: &BTreeSet<String>) -> SymbolicHeap {
    let mut out = h.clone();
    for x in h.prog_vars() {
        if keep.contains(&x) {
            continue;
        }
        let b = out.fresh_name("d");
        let map = Subst::from([(Term::var(x), Term::logic(b.clone()))]);
        out = crate::assertion::subst::apply_free(&out, &map);
        out.binders.push(b);
    }
    simplify_heap(&out)
}

pub fn project(a: &Assertion, keep: &BTreeSet<String>) -> Assertion {
    Assertion::new(a.disjuncts.iter().map(|d| project_heap(d, keep)).collect())
}
