//! Forward symbolic execution of loop-free statements over assertions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assertion::subst::apply_free;
use crate::assertion::{
    simplify_heap, Assertion, PredicateRegistry, PureAtom, PureOp, SpatialAtom, Subst, SymbolicHeap, Term,
};
use crate::entailment::{is_refuted, normalize, unfold_at, PureCtx};
use crate::frontend::ast::{Cond, Expr, LValue, Stmt, StmtKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExecErrorKind {
    NullDeref,
    MissingCell,
    UnfoldFailure,
    Unsupported,
    TooManyDisjuncts,
}

#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("line {line}: {kind:?} at `{term}`")]
pub struct ExecError {
    pub kind: ExecErrorKind,
    pub line: usize,
    pub term: String,
    /// The disjunct on which execution failed, when there is one.
    pub disjunct: Option<String>,
}

impl ExecError {
    fn new(kind: ExecErrorKind, line: usize, term: impl ToString) -> Self {
        ExecError { kind, line, term: term.to_string(), disjunct: None }
    }

    fn on(mut self, h: &SymbolicHeap) -> Self {
        if self.disjunct.is_none() {
            self.disjunct = Some(h.to_string());
        }
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecConfig {
    /// Predicate layers unfolded to expose one cell.
    pub unfold_depth: usize,
    pub max_disjuncts: usize,
    /// Forced unfoldings after assuming a condition.
    pub normalize_unfolds: usize,
}

impl Default for ExecConfig {
    fn default() -> Self {
        ExecConfig { unfold_depth: 2, max_disjuncts: 64, normalize_unfolds: 8 }
    }
}

type Res<T> = Result<T, ExecError>;

pub struct SymExec<'r> {
    reg: &'r PredicateRegistry,
    pub cfg: ExecConfig,
}

fn base_of(addr: &Term) -> &Term {
    match addr {
        Term::FieldAddr(b, _) => b,
        other => other,
    }
}

fn cell_index(h: &SymbolicHeap, cx: &mut PureCtx, addr: &Term) -> Option<usize> {
    h.spatial.iter().position(|s| matches!(s, SpatialAtom::PointsTo { addr: a, .. } if cx.equal(a, addr)))
}

/// Why no cell at `addr` is available in `h`.
fn missing_kind(h: &SymbolicHeap, cx: &mut PureCtx, addr: &Term) -> ExecErrorKind {
    let base = base_of(addr);
    if cx.equal(base, &Term::null()) {
        ExecErrorKind::NullDeref
    } else if h.spatial.iter().any(|s| matches!(s, SpatialAtom::PredApp { args, .. } if cx.equal(&args[0], base))) {
        ExecErrorKind::UnfoldFailure
    } else {
        ExecErrorKind::MissingCell
    }
}

/// A comparison produced by flattening a condition.
type Lit = (PureOp, Expr, Expr);

/// Disjunctive normal form with C short-circuit order: `a || b` becomes
/// `a` or `!a && b`, so reads in `b` happen only where `a` failed.
fn dnf(c: &Cond, positive: bool) -> Vec<Vec<Lit>> {
    match (c, positive) {
        (Cond::Lit(b), p) => {
            if *b == p {
                vec![vec![]]
            } else {
                vec![]
            }
        }
        (Cond::Cmp(op, l, r), true) => vec![vec![(*op, l.clone(), r.clone())]],
        (Cond::Cmp(op, l, r), false) => {
            let (l, r) = (l.clone(), r.clone());
            match op {
                PureOp::Eq => vec![vec![(PureOp::Neq, l, r)]],
                PureOp::Neq => vec![vec![(PureOp::Eq, l, r)]],
                PureOp::Lt => vec![vec![(PureOp::Gt, l.clone(), r.clone())], vec![(PureOp::Eq, l, r)]],
                PureOp::Gt => vec![vec![(PureOp::Lt, l.clone(), r.clone())], vec![(PureOp::Eq, l, r)]],
            }
        }
        (Cond::Not(c), p) => dnf(c, !p),
        (Cond::And(a, b), true) | (Cond::Or(a, b), false) => {
            let (da, db) = (dnf(a, positive), dnf(b, positive));
            let mut out = vec![];
            for x in &da {
                for y in &db {
                    out.push(x.iter().chain(y).cloned().collect());
                }
            }
            out
        }
        (Cond::Or(a, b), true) | (Cond::And(a, b), false) => {
            // true case: a, or !a && b; false case: !a, or a && !b
            let mut out = dnf(a, positive);
            for x in dnf(a, !positive) {
                for y in dnf(b, positive) {
                    out.push(x.iter().chain(&y).cloned().collect());
                }
            }
            out
        }
    }
}

impl<'r> SymExec<'r> {
    pub fn new(reg: &'r PredicateRegistry) -> Self {
        SymExec { reg, cfg: ExecConfig::default() }
    }

    pub fn with_config(reg: &'r PredicateRegistry, cfg: ExecConfig) -> Self {
        SymExec { reg, cfg }
    }

    /// Disjuncts of `h` in which a cell at `addr` is explicit, obtained by
    /// unfolding applications rooted at the address's base. Disjuncts
    /// where unfolding chose an empty branch are returned as they are.
    pub fn materialize(&self, h: &SymbolicHeap, addr: &Term) -> Res<Vec<SymbolicHeap>> {
        let mut cx = PureCtx::from_heap(h);
        if cell_index(h, &mut cx, addr).is_some() {
            return Ok(vec![h.clone()]);
        }
        let base = base_of(addr);
        if cx.equal(base, &Term::null()) {
            return Err(ExecError::new(ExecErrorKind::NullDeref, 0, addr).on(h));
        }
        match self.expose(h, addr, self.cfg.unfold_depth) {
            Some(out) => Ok(out),
            None => Err(ExecError::new(ExecErrorKind::MissingCell, 0, addr).on(h)),
        }
    }

    fn expose(&self, h: &SymbolicHeap, addr: &Term, depth: usize) -> Option<Vec<SymbolicHeap>> {
        let mut cx = PureCtx::from_heap(h);
        if cell_index(h, &mut cx, addr).is_some() {
            return Some(vec![h.clone()]);
        }
        if depth == 0 {
            return None;
        }
        let base = base_of(addr);
        let root = h.spatial.iter().position(|s| match s {
            SpatialAtom::PredApp { args, .. } => cx.equal(&args[0], base),
            _ => false,
        })?;
        let mut out = vec![];
        for u in unfold_at(self.reg, h, root) {
            match self.expose(&u, addr, depth - 1) {
                Some(v) => out.extend(v),
                None => out.push(u),
            }
        }
        Some(out)
    }

    /// Current content of the cell at `addr`, materializing if needed.
    fn read(&self, h: &SymbolicHeap, addr: &Term, line: usize) -> Res<Vec<(SymbolicHeap, Term)>> {
        let hs = self.materialize(h, addr).map_err(|e| ExecError { line, ..e })?;
        let mut out = vec![];
        for h in hs {
            let mut cx = PureCtx::from_heap(&h);
            let Some(i) = cell_index(&h, &mut cx, addr) else {
                let kind = missing_kind(&h, &mut cx, addr);
                return Err(ExecError::new(kind, line, addr).on(&h));
            };
            let SpatialAtom::PointsTo { value, .. } = &h.spatial[i] else { unreachable!() };
            let v = value.clone();
            out.push((h, v));
        }
        Ok(out)
    }

    fn eval(&self, h: &SymbolicHeap, e: &Expr, line: usize) -> Res<Vec<(SymbolicHeap, Term)>> {
        match e {
            Expr::Var(x) => Ok(vec![(h.clone(), Term::var(x.clone()))]),
            Expr::Num(n) => Ok(vec![(h.clone(), Term::Const(*n))]),
            Expr::Field(b, f) => {
                let mut out = vec![];
                for (h1, tb) in self.eval(h, b, line)? {
                    out.extend(self.read(&h1, &Term::field(tb, f.clone()), line)?);
                }
                Ok(out)
            }
            Expr::Deref(b) => {
                let mut out = vec![];
                for (h1, tb) in self.eval(h, b, line)? {
                    match tb {
                        Term::AddrOf(x) => out.push((h1, Term::var(x))),
                        other => out.extend(self.read(&h1, &other, line)?),
                    }
                }
                Ok(out)
            }
            Expr::AddrOf(inner) => match &**inner {
                Expr::Var(x) => Ok(vec![(h.clone(), Term::AddrOf(x.clone()))]),
                Expr::Field(b, f) => Ok(self
                    .eval(h, b, line)?
                    .into_iter()
                    .map(|(h1, tb)| (h1, Term::field(tb, f.clone())))
                    .collect()),
                Expr::Deref(b) => self.eval(h, b, line),
                _ => Err(ExecError::new(ExecErrorKind::Unsupported, line, e).on(h)),
            },
        }
    }

    fn assign_var(&self, h: &SymbolicHeap, x: &str, v: &Term) -> SymbolicHeap {
        let old = h.fresh_name(&format!("{x}v"));
        let map = Subst::from([(Term::var(x), Term::logic(old.clone()))]);
        let mut out = apply_free(h, &map);
        let v = crate::assertion::subst::apply_term(v, &map);
        out.binders.push(old);
        out.pure.push(PureAtom::eq(Term::var(x), v));
        simplify_heap(&out)
    }

    fn write(&self, h: &SymbolicHeap, addr: &Term, v: &Term, line: usize) -> Res<Vec<SymbolicHeap>> {
        let hs = self.materialize(h, addr).map_err(|e| ExecError { line, ..e })?;
        let mut out = vec![];
        for mut h in hs {
            let mut cx = PureCtx::from_heap(&h);
            let Some(i) = cell_index(&h, &mut cx, addr) else {
                let kind = missing_kind(&h, &mut cx, addr);
                return Err(ExecError::new(kind, line, addr).on(&h));
            };
            if let SpatialAtom::PointsTo { value, .. } = &mut h.spatial[i] {
                *value = v.clone();
            }
            out.push(simplify_heap(&h));
        }
        Ok(out)
    }

    fn check_cap(&self, n: usize, line: usize) -> Res<()> {
        if n > self.cfg.max_disjuncts {
            return Err(ExecError::new(ExecErrorKind::TooManyDisjuncts, line, n));
        }
        Ok(())
    }

    fn exec_heap(&self, h: &SymbolicHeap, s: &Stmt) -> Res<Vec<SymbolicHeap>> {
        let line = s.line;
        let out = match &s.kind {
            StmtKind::Skip => vec![h.clone()],
            StmtKind::Seq(v) => {
                let mut cur = vec![h.clone()];
                for x in v {
                    let mut next = vec![];
                    for c in &cur {
                        next.extend(self.exec_heap(c, x)?);
                    }
                    self.check_cap(next.len(), x.line)?;
                    cur = next;
                }
                cur
            }
            StmtKind::Assign(lv, e) => {
                let mut out = vec![];
                // right-hand side first
                for (h1, v) in self.eval(h, e, line)? {
                    match lv {
                        LValue::Var(x) => out.push(self.assign_var(&h1, x, &v)),
                        LValue::Field(b, f) => {
                            for (h2, tb) in self.eval(&h1, b, line)? {
                                out.extend(self.write(&h2, &Term::field(tb, f.clone()), &v, line)?);
                            }
                        }
                        LValue::Deref(b) => {
                            for (h2, tb) in self.eval(&h1, b, line)? {
                                match tb {
                                    Term::AddrOf(x) => out.push(self.assign_var(&h2, &x, &v)),
                                    other => out.extend(self.write(&h2, &other, &v, line)?),
                                }
                            }
                        }
                    }
                }
                out
            }
            StmtKind::If(c, a, b) => {
                let mut out = vec![];
                for t in self.assume_heap(h, c, true, line)? {
                    out.extend(self.exec_heap(&t, a)?);
                }
                for f in self.assume_heap(h, c, false, line)? {
                    out.extend(self.exec_heap(&f, b)?);
                }
                out
            }
            StmtKind::While(..) => {
                return Err(ExecError::new(ExecErrorKind::Unsupported, line, "loop in a loop-free fragment").on(h))
            }
            StmtKind::Call(name, _) => {
                return Err(ExecError::new(ExecErrorKind::Unsupported, line, format!("call to {name}")).on(h))
            }
        };
        self.check_cap(out.len(), line)?;
        Ok(out)
    }

    /// Strongest postcondition of `pre` under `body`.
    pub fn exec(&self, pre: &Assertion, body: &Stmt) -> Res<Assertion> {
        let parts: Vec<Res<Vec<SymbolicHeap>>> = pre.disjuncts.par_iter().map(|d| self.exec_heap(d, body)).collect();
        let mut out = vec![];
        for p in parts {
            out.extend(p?);
        }
        self.check_cap(out.len(), body.line)?;
        Ok(Assertion::new(out))
    }

    fn assume_heap(&self, h: &SymbolicHeap, c: &Cond, positive: bool, line: usize) -> Res<Vec<SymbolicHeap>> {
        let mut out = vec![];
        for clause in dnf(c, positive) {
            let mut cur = vec![h.clone()];
            for (op, l, r) in &clause {
                let mut next = vec![];
                for w in &cur {
                    for (w1, tl) in self.eval(w, l, line)? {
                        for (mut w2, tr) in self.eval(&w1, r, line)? {
                            w2.pure.push(PureAtom::new(*op, tl.clone(), tr));
                            if !is_refuted(&w2) {
                                next.push(w2);
                            }
                        }
                    }
                }
                cur = next;
            }
            for w in cur {
                if let Some(n) = normalize(self.reg, &w, self.cfg.normalize_unfolds) {
                    out.push(simplify_heap(&n));
                }
            }
        }
        self.check_cap(out.len(), line)?;
        Ok(out)
    }

    /// Each disjunct conjoined with `c`; contradictory results are dropped
    /// and predicate branches forced by `c` are unfolded.
    pub fn assume_true(&self, p: &Assertion, c: &Cond) -> Res<Assertion> {
        self.assume(p, c, true)
    }

    pub fn assume_false(&self, p: &Assertion, c: &Cond) -> Res<Assertion> {
        self.assume(p, c, false)
    }

    fn assume(&self, p: &Assertion, c: &Cond, positive: bool) -> Res<Assertion> {
        let mut out = vec![];
        for d in &p.disjuncts {
            out.extend(self.assume_heap(d, c, positive, 0)?);
        }
        self.check_cap(out.len(), 0)?;
        Ok(Assertion::new(out))
    }
}
