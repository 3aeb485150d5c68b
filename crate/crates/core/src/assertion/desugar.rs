//! Expansion of surface dereferences into points-to atoms.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::canon::simplify_heap;
use super::{fresh_name_avoiding, Assertion, PureAtom, SpatialAtom, SymbolicHeap, Term};
use crate::frontend::ast::{Expr, SurfaceAssertion, SurfaceAtom, SurfaceHeap};
use super::registry::PredicateRegistry;

/// How program variables are modelled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum StackModel {
    /// A program variable denotes its current value (`x` is a term).
    #[default]
    Value,
    /// Every program variable `x` is a stack cell `&x mapsto xv`.
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DesugarError {
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("predicate `{pred}` expects {expected} arguments, got {found}")]
    Arity { pred: String, expected: usize, found: usize },
    #[error("cannot take the address of `{0}`")]
    BadAddressOf(String),
}

pub fn desugar(s: &SurfaceAssertion, reg: &PredicateRegistry) -> Result<Assertion, DesugarError> {
    desugar_with(s, &|n: &str| reg.arity(n), StackModel::Value)
}

/// Desugars with an explicit arity lookup (used while a predicate is being
/// defined and is not yet registered).
pub fn desugar_with(
    s: &SurfaceAssertion,
    arity: &dyn Fn(&str) -> Option<usize>,
    mode: StackModel,
) -> Result<Assertion, DesugarError> {
    let disjuncts = s
        .disjuncts
        .iter()
        .map(|h| desugar_heap(h, arity, mode))
        .collect::<Result<_, _>>()?;
    Ok(Assertion::new(disjuncts))
}

struct Ctx<'a> {
    bound: &'a [String],
    used: BTreeSet<String>,
    mode: StackModel,
    binders: Vec<String>,
    cells: Vec<SpatialAtom>,
    reads: BTreeMap<Expr, Term>,
    stack: BTreeMap<String, Term>,
}

impl Ctx<'_> {
    fn fresh(&mut self, stem: &str) -> String {
        let n = fresh_name_avoiding(stem, &self.used);
        self.used.insert(n.clone());
        self.binders.push(n.clone());
        n
    }

    fn value(&mut self, e: &Expr) -> Result<Term, DesugarError> {
        Ok(match e {
            Expr::Var(v) if self.bound.contains(v) => Term::logic(v.clone()),
            Expr::Var(v) => match self.mode {
                StackModel::Value => Term::var(v.clone()),
                StackModel::Explicit => {
                    if let Some(t) = self.stack.get(v) {
                        return Ok(t.clone());
                    }
                    let b = Term::logic(self.fresh(&format!("{v}v")));
                    self.cells.push(SpatialAtom::points_to(Term::AddrOf(v.clone()), b.clone()));
                    self.stack.insert(v.clone(), b.clone());
                    b
                }
            },
            Expr::Num(n) => Term::Const(*n),
            Expr::Field(..) | Expr::Deref(_) => {
                if let Some(t) = self.reads.get(e) {
                    return Ok(t.clone());
                }
                let addr = self.address(e)?;
                let v = Term::logic(self.fresh("v"));
                self.cells.push(SpatialAtom::points_to(addr, v.clone()));
                self.reads.insert(e.clone(), v.clone());
                v
            }
            Expr::AddrOf(inner) => match &**inner {
                Expr::Var(v) => Term::AddrOf(v.clone()),
                Expr::Field(..) | Expr::Deref(_) => self.address(inner)?,
                other => return Err(DesugarError::BadAddressOf(other.to_string())),
            },
        })
    }

    /// Address read by a field access or dereference expression.
    fn address(&mut self, e: &Expr) -> Result<Term, DesugarError> {
        match e {
            Expr::Field(b, f) => Ok(Term::field(self.value(b)?, f.clone())),
            Expr::Deref(b) => self.value(b),
            other => Err(DesugarError::BadAddressOf(other.to_string())),
        }
    }
}

fn desugar_heap(
    h: &SurfaceHeap,
    arity: &dyn Fn(&str) -> Option<usize>,
    mode: StackModel,
) -> Result<SymbolicHeap, DesugarError> {
    let mut used: BTreeSet<String> = h.binders.iter().cloned().collect();
    for a in &h.atoms {
        match a {
            SurfaceAtom::Cmp(_, l, r) | SurfaceAtom::MapsTo(l, r) => {
                l.collect_vars(&mut used);
                r.collect_vars(&mut used);
            }
            SurfaceAtom::Pred(_, args) => args.iter().for_each(|e| e.collect_vars(&mut used)),
            SurfaceAtom::Emp | SurfaceAtom::True => {}
        }
    }
    let mut cx = Ctx {
        bound: &h.binders,
        used,
        mode,
        binders: h.binders.clone(),
        cells: vec![],
        reads: BTreeMap::new(),
        stack: BTreeMap::new(),
    };
    let mut pure = vec![];
    let mut spatial = vec![];
    for a in &h.atoms {
        match a {
            SurfaceAtom::Cmp(op, l, r) => {
                let (l, r) = (cx.value(l)?, cx.value(r)?);
                pure.push(PureAtom::new(*op, l, r));
            }
            SurfaceAtom::Emp => spatial.push(SpatialAtom::Emp),
            SurfaceAtom::True => spatial.push(SpatialAtom::True),
            SurfaceAtom::MapsTo(a, v) => {
                let a = cx.value(a)?;
                let v = cx.value(v)?;
                spatial.push(SpatialAtom::points_to(a, v));
            }
            SurfaceAtom::Pred(name, args) => {
                let expected = arity(name).ok_or_else(|| DesugarError::UnknownPredicate(name.clone()))?;
                if expected != args.len() {
                    return Err(DesugarError::Arity { pred: name.clone(), expected, found: args.len() });
                }
                let args = args.iter().map(|e| cx.value(e)).collect::<Result<_, _>>()?;
                spatial.push(SpatialAtom::pred(name.clone(), args));
            }
        }
    }
    let mut all = std::mem::take(&mut cx.cells);
    all.extend(spatial);
    let heap = SymbolicHeap::new(cx.binders, pure, all);
    Ok(simplify_heap(&heap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assertion::PureOp;

    fn one(atoms: Vec<SurfaceAtom>) -> SurfaceAssertion {
        SurfaceAssertion { disjuncts: vec![SurfaceHeap { binders: vec![], atoms }] }
    }

    fn no_preds(_: &str) -> Option<usize> {
        None
    }

    #[test]
    fn field_equality_becomes_a_cell() {
        let s = one(vec![SurfaceAtom::Cmp(
            PureOp::Eq,
            Expr::field(Expr::var("x"), "tail"),
            Expr::var("y"),
        )]);
        let a = desugar_with(&s, &no_preds, StackModel::Value).unwrap();
        assert_eq!(a.to_string(), "x->tail == y && emp");
    }

    #[test]
    fn repeated_reads_share_one_cell() {
        let read = Expr::field(Expr::var("x"), "tail");
        let s = one(vec![
            SurfaceAtom::Cmp(PureOp::Neq, read.clone(), Expr::Num(0)),
            SurfaceAtom::Cmp(PureOp::Neq, read, Expr::var("y")),
        ]);
        let a = desugar_with(&s, &no_preds, StackModel::Value).unwrap();
        let cells = a.disjuncts[0].spatial.iter().filter(|s| matches!(s, SpatialAtom::PointsTo { .. })).count();
        assert_eq!(cells, 1);
    }

    #[test]
    fn unknown_predicate_is_rejected() {
        let s = one(vec![SurfaceAtom::Pred("foo".into(), vec![Expr::var("x")])]);
        assert_eq!(
            desugar_with(&s, &no_preds, StackModel::Value),
            Err(DesugarError::UnknownPredicate("foo".into()))
        );
    }

    #[test]
    fn explicit_stack_cells() {
        // x -> tail == y -> data
        let s = one(vec![SurfaceAtom::Cmp(
            PureOp::Eq,
            Expr::field(Expr::var("x"), "tail"),
            Expr::field(Expr::var("y"), "data"),
        )]);
        let a = desugar_with(&s, &no_preds, StackModel::Explicit).unwrap();
        let h = &a.disjuncts[0];
        assert_eq!(h.binders.len(), 3);
        assert_eq!(h.spatial.len(), 4);
        assert!(h.pure.is_empty());
    }
}
