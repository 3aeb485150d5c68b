//! Symbolic-heap assertions.
//!
//! An [`Assertion`] is a disjunction of [`SymbolicHeap`]s, each of the form
//! `exists b1 .. bn, P1 && .. && Pk && Q1 * .. * Qm` where the `P`s are pure
//! comparisons and the `Q`s are spatial atoms (`emp`, points-to cells and
//! inductive predicate applications).
//!
//! Program variables denote their current value. A dereference such as
//! `x->tail` is never a term: it is desugared into a points-to atom on the
//! field address `field_addr(x, tail)`.

mod canon;
mod desugar;
mod print;
mod registry;
pub(crate) mod subst;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use canon::{canonicalize, canonicalize_heap, simplify, simplify_heap};
pub use desugar::{desugar, desugar_with, DesugarError, StackModel};
pub use registry::{PredicateDef, PredicateRegistry, RegistryError};
pub use subst::{substitute, Subst};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Term {
    /// Current value of a program variable (or predicate parameter).
    ProgVar(String),
    /// Logical variable, bound by an enclosing `exists` or free in context.
    LogicVar(String),
    /// Integer constant; `0` is null.
    Const(i64),
    /// Address of field `.1` of the object at `.0`.
    FieldAddr(Box<Term>, String),
    /// Stack address of a program variable (`&x`).
    AddrOf(String),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Self {
        Term::ProgVar(name.into())
    }

    pub fn logic(name: impl Into<String>) -> Self {
        Term::LogicVar(name.into())
    }

    pub fn null() -> Self {
        Term::Const(0)
    }

    pub fn field(base: Term, field: impl Into<String>) -> Self {
        Term::FieldAddr(Box::new(base), field.into())
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Term::Const(0))
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::ProgVar(_) | Term::LogicVar(_))
    }

    pub fn mentions_logic(&self, name: &str) -> bool {
        match self {
            Term::LogicVar(v) => v == name,
            Term::FieldAddr(b, _) => b.mentions_logic(name),
            _ => false,
        }
    }

    pub fn mentions(&self, other: &Term) -> bool {
        if self == other {
            return true;
        }
        match self {
            Term::FieldAddr(b, _) => b.mentions(other),
            _ => false,
        }
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<Term>) {
        match self {
            Term::ProgVar(_) | Term::LogicVar(_) => {
                out.insert(self.clone());
            }
            Term::FieldAddr(b, _) => b.collect_vars(out),
            Term::Const(_) | Term::AddrOf(_) => {}
        }
    }

    pub fn collect_prog_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Term::ProgVar(v) => {
                out.insert(v.clone());
            }
            Term::AddrOf(v) => {
                out.insert(v.clone());
            }
            Term::FieldAddr(b, _) => b.collect_prog_vars(out),
            _ => {}
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PureOp {
    Eq,
    Neq,
    Lt,
    Gt,
}

impl PureOp {
    pub fn symbol(self) -> &'static str {
        match self {
            PureOp::Eq => "==",
            PureOp::Neq => "!=",
            PureOp::Lt => "<",
            PureOp::Gt => ">",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PureAtom {
    pub op: PureOp,
    pub lhs: Term,
    pub rhs: Term,
}

impl PureAtom {
    pub fn new(op: PureOp, lhs: Term, rhs: Term) -> Self {
        PureAtom { op, lhs, rhs }
    }

    pub fn eq(lhs: Term, rhs: Term) -> Self {
        Self::new(PureOp::Eq, lhs, rhs)
    }

    pub fn neq(lhs: Term, rhs: Term) -> Self {
        Self::new(PureOp::Neq, lhs, rhs)
    }

    pub fn terms(&self) -> [&Term; 2] {
        [&self.lhs, &self.rhs]
    }

    /// The atom's negation as a disjunction of atoms.
    pub fn negate(&self) -> Vec<PureAtom> {
        let (l, r) = (self.lhs.clone(), self.rhs.clone());
        match self.op {
            PureOp::Eq => vec![PureAtom::neq(l, r)],
            PureOp::Neq => vec![PureAtom::eq(l, r)],
            PureOp::Lt => vec![PureAtom::new(PureOp::Gt, l.clone(), r.clone()), PureAtom::eq(l, r)],
            PureOp::Gt => vec![PureAtom::new(PureOp::Lt, l.clone(), r.clone()), PureAtom::eq(l, r)],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SpatialAtom {
    Emp,
    PointsTo { addr: Term, value: Term },
    PredApp { pred: String, args: Vec<Term> },
    /// Intuitionistic frame: any (possibly empty) residual heap.
    True,
}

impl SpatialAtom {
    pub fn points_to(addr: Term, value: Term) -> Self {
        SpatialAtom::PointsTo { addr, value }
    }

    pub fn pred(name: impl Into<String>, args: Vec<Term>) -> Self {
        SpatialAtom::PredApp { pred: name.into(), args }
    }

    pub fn terms(&self) -> Vec<&Term> {
        match self {
            SpatialAtom::PointsTo { addr, value } => vec![addr, value],
            SpatialAtom::PredApp { args, .. } => args.iter().collect(),
            SpatialAtom::Emp | SpatialAtom::True => vec![],
        }
    }

    pub fn pred_name(&self) -> Option<&str> {
        match self {
            SpatialAtom::PredApp { pred, .. } => Some(pred),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SymbolicHeap {
    pub binders: Vec<String>,
    pub pure: Vec<PureAtom>,
    pub spatial: Vec<SpatialAtom>,
}

impl SymbolicHeap {
    pub fn emp() -> Self {
        SymbolicHeap { binders: vec![], pure: vec![], spatial: vec![SpatialAtom::Emp] }
    }

    pub fn new(binders: Vec<String>, pure: Vec<PureAtom>, spatial: Vec<SpatialAtom>) -> Self {
        SymbolicHeap { binders, pure, spatial }
    }

    pub fn all_terms(&self) -> impl Iterator<Item = &Term> {
        self.pure
            .iter()
            .flat_map(|p| p.terms())
            .chain(self.spatial.iter().flat_map(|s| s.terms()))
    }

    /// Program variables mentioned anywhere in the heap.
    pub fn prog_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for t in self.all_terms() {
            t.collect_prog_vars(&mut out);
        }
        out
    }

    /// Logical variables not bound by this heap's binder list.
    pub fn free_logic_vars(&self) -> BTreeSet<String> {
        let mut vars = BTreeSet::new();
        for t in self.all_terms() {
            t.collect_vars(&mut vars);
        }
        vars.into_iter()
            .filter_map(|t| match t {
                Term::LogicVar(v) if !self.binders.contains(&v) => Some(v),
                _ => None,
            })
            .collect()
    }

    pub fn mentions_logic(&self, name: &str) -> bool {
        self.all_terms().any(|t| t.mentions_logic(name))
    }

    /// Every variable name in use, bound or free, program or logical.
    pub fn used_names(&self) -> BTreeSet<String> {
        let mut vars = BTreeSet::new();
        for t in self.all_terms() {
            t.collect_vars(&mut vars);
        }
        let mut names: BTreeSet<String> = vars
            .into_iter()
            .map(|t| match t {
                Term::ProgVar(v) | Term::LogicVar(v) => v,
                _ => unreachable!(),
            })
            .collect();
        names.extend(self.binders.iter().cloned());
        names.extend(self.prog_vars());
        names
    }

    /// A name with the given prefix that does not clash with anything in the heap.
    pub fn fresh_name(&self, prefix: &str) -> String {
        let used = self.used_names();
        fresh_name_avoiding(prefix, &used)
    }

    pub fn has_predicates(&self) -> bool {
        self.spatial.iter().any(|s| matches!(s, SpatialAtom::PredApp { .. }))
    }

    pub fn has_true(&self) -> bool {
        self.spatial.iter().any(|s| matches!(s, SpatialAtom::True))
    }

    /// Separating conjunction of two heaps; binders of `other` are renamed
    /// apart from `self`.
    pub fn star(&self, other: &SymbolicHeap) -> SymbolicHeap {
        let mut used = self.used_names();
        used.extend(other.prog_vars());
        let mut map = Subst::new();
        let mut binders = self.binders.clone();
        for b in &other.binders {
            if used.contains(b) {
                let fresh = fresh_name_avoiding(b, &used);
                used.insert(fresh.clone());
                map.insert(Term::logic(b.clone()), Term::logic(fresh.clone()));
                binders.push(fresh);
            } else {
                used.insert(b.clone());
                binders.push(b.clone());
            }
        }
        let renamed = subst::apply_free(other, &map);
        let mut pure = self.pure.clone();
        pure.extend(renamed.pure);
        let mut spatial: Vec<SpatialAtom> =
            self.spatial.iter().filter(|s| **s != SpatialAtom::Emp).cloned().collect();
        spatial.extend(renamed.spatial.into_iter().filter(|s| *s != SpatialAtom::Emp));
        if spatial.is_empty() {
            spatial.push(SpatialAtom::Emp);
        }
        SymbolicHeap { binders, pure, spatial }
    }
}

pub fn fresh_name_avoiding(prefix: &str, used: &BTreeSet<String>) -> String {
    let stem = prefix.trim_end_matches(|c: char| c.is_ascii_digit());
    let stem = if stem.is_empty() { "v" } else { stem };
    (0..)
        .map(|i| format!("{stem}{i}"))
        .find(|n| !used.contains(n))
        .expect("unbounded name supply")
}

/// A disjunction of symbolic heaps. The empty disjunction is `false`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Assertion {
    pub disjuncts: Vec<SymbolicHeap>,
}

impl Assertion {
    pub fn new(disjuncts: Vec<SymbolicHeap>) -> Self {
        Assertion { disjuncts }
    }

    pub fn single(h: SymbolicHeap) -> Self {
        Assertion { disjuncts: vec![h] }
    }

    pub fn falsum() -> Self {
        Assertion { disjuncts: vec![] }
    }

    pub fn is_false(&self) -> bool {
        self.disjuncts.is_empty()
    }

    pub fn or(mut self, other: Assertion) -> Assertion {
        self.disjuncts.extend(other.disjuncts);
        self
    }

    /// Distributes `*` over the disjunctions of both sides.
    pub fn star(&self, other: &Assertion) -> Assertion {
        let mut out = vec![];
        for a in &self.disjuncts {
            for b in &other.disjuncts {
                out.push(a.star(b));
            }
        }
        Assertion::new(out)
    }

    pub fn prog_vars(&self) -> BTreeSet<String> {
        self.disjuncts.iter().flat_map(|d| d.prog_vars()).collect()
    }

    pub fn predicates(&self) -> BTreeSet<String> {
        self.disjuncts
            .iter()
            .flat_map(|d| d.spatial.iter().filter_map(|s| s.pred_name().map(str::to_string)))
            .collect()
    }
}

impl From<SymbolicHeap> for Assertion {
    fn from(h: SymbolicHeap) -> Self {
        Assertion::single(h)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        print::fmt_term(self, f)
    }
}

impl fmt::Display for PureAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.op.symbol(), self.rhs)
    }
}

impl fmt::Display for SpatialAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        print::fmt_spatial(self, f)
    }
}

impl fmt::Display for SymbolicHeap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        print::fmt_heap(self, f)
    }
}

impl fmt::Display for Assertion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.disjuncts.is_empty() {
            return f.write_str("false");
        }
        for (i, d) in self.disjuncts.iter().enumerate() {
            if i > 0 {
                f.write_str(" || ")?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}
