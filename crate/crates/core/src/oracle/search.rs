//! Backtracking search shared by model checking (consume an existing heap)
//! and model generation (allocate the heap while unfolding).

use std::collections::BTreeMap;

use super::{Loc, OracleError, Val};
use crate::assertion::{PredicateRegistry, PureAtom, PureOp, SpatialAtom, Subst, SymbolicHeap, Term};

#[derive(Clone, Copy, Debug)]
pub(crate) enum Mode {
    /// `cells` holds the unconsumed part of a fixed heap.
    Check,
    /// `cells` holds what has been allocated so far.
    Generate { max_addrs: i64, max_locs: usize },
}

#[derive(Clone, Debug)]
pub(crate) enum Goal {
    Pure(PureAtom),
    Spatial(SpatialAtom),
}

#[derive(Clone, Debug, Default)]
pub(crate) struct State {
    pub store: BTreeMap<String, Val>,
    pub env: BTreeMap<String, Val>,
    pub cells: BTreeMap<Loc, Val>,
    pub goals: Vec<Goal>,
    pub frame: bool,
}

#[derive(Clone, Debug)]
enum Var {
    Prog(String),
    Logic(String),
}

enum Action {
    Drop(usize),
    Fail,
    Bind(usize, Var, Val),
    Cell(usize),
    Unfold(usize),
    Enumerate(Var),
}

pub(crate) struct Search<'r> {
    reg: &'r PredicateRegistry,
    domain: Vec<Val>,
    mode: Mode,
    fresh: usize,
    steps: u64,
    max_steps: u64,
}

fn eval(t: &Term, st: &State) -> Option<Val> {
    match t {
        Term::ProgVar(v) => st.store.get(v).cloned(),
        Term::LogicVar(v) => st.env.get(v).cloned(),
        Term::Const(c) => Some(Val::Int(*c)),
        Term::FieldAddr(b, f) => Some(match eval(b, st)? {
            Val::Int(k) => Val::Field(k, f.clone()),
            // not an object address; never allocated, never equal to one
            _ => Val::Field(-1, f.clone()),
        }),
        Term::AddrOf(x) => Some(Val::Stack(x.clone())),
    }
}

fn unbound(t: &Term, st: &State) -> Option<Var> {
    match t {
        Term::ProgVar(v) if !st.store.contains_key(v) => Some(Var::Prog(v.clone())),
        Term::LogicVar(v) if !st.env.contains_key(v) => Some(Var::Logic(v.clone())),
        Term::FieldAddr(b, _) => unbound(b, st),
        _ => None,
    }
}

pub(crate) fn eval_op(op: PureOp, l: &Val, r: &Val) -> bool {
    match op {
        PureOp::Eq => l == r,
        PureOp::Neq => l != r,
        PureOp::Lt => matches!((l, r), (Val::Int(a), Val::Int(b)) if a < b),
        PureOp::Gt => matches!((l, r), (Val::Int(a), Val::Int(b)) if a > b),
    }
}

fn bind(st: &mut State, var: Var, v: Val) {
    match var {
        Var::Prog(x) => st.store.insert(x, v),
        Var::Logic(x) => st.env.insert(x, v),
    };
}

impl<'r> Search<'r> {
    pub(crate) fn new(reg: &'r PredicateRegistry, domain: Vec<Val>, mode: Mode, max_steps: u64) -> Self {
        Search { reg, domain, mode, fresh: 0, steps: 0, max_steps }
    }

    /// Queues the atoms of `h` with its binders renamed to fresh names.
    pub(crate) fn push_heap(&mut self, st: &mut State, h: &SymbolicHeap) {
        let mut map = Subst::new();
        for b in &h.binders {
            self.fresh += 1;
            map.insert(Term::logic(b.clone()), Term::logic(format!("#{}", self.fresh)));
        }
        let h = crate::assertion::substitute(&SymbolicHeap::new(vec![], h.pure.clone(), h.spatial.clone()), &map);
        st.goals.extend(h.pure.into_iter().map(Goal::Pure));
        st.goals.extend(h.spatial.into_iter().map(Goal::Spatial));
    }

    fn choose(&self, st: &State) -> Option<Action> {
        let pending_cells = st
            .goals
            .iter()
            .filter(|g| matches!(g, Goal::Spatial(SpatialAtom::PointsTo { addr, .. }) if !matches!(addr, Term::AddrOf(_))))
            .count();
        let too_many = match self.mode {
            Mode::Check => pending_cells > st.cells.len(),
            Mode::Generate { max_locs, .. } => pending_cells + st.cells.len() > max_locs,
        };
        if too_many {
            return Some(Action::Fail);
        }
        for (i, g) in st.goals.iter().enumerate() {
            if let Goal::Pure(p) = g {
                match (eval(&p.lhs, st), eval(&p.rhs, st)) {
                    (Some(l), Some(r)) => {
                        return Some(if eval_op(p.op, &l, &r) { Action::Drop(i) } else { Action::Fail });
                    }
                    (None, Some(r)) if p.op == PureOp::Eq && p.lhs.is_var() => {
                        return Some(Action::Bind(i, unbound(&p.lhs, st)?, r));
                    }
                    (Some(l), None) if p.op == PureOp::Eq && p.rhs.is_var() => {
                        return Some(Action::Bind(i, unbound(&p.rhs, st)?, l));
                    }
                    _ => {}
                }
            }
        }
        for (i, g) in st.goals.iter().enumerate() {
            match g {
                Goal::Spatial(SpatialAtom::PointsTo { addr, value }) => {
                    if eval(addr, st).is_some() && (matches!(self.mode, Mode::Check) || eval(value, st).is_some()) {
                        return Some(Action::Cell(i));
                    }
                }
                Goal::Spatial(SpatialAtom::Emp) | Goal::Spatial(SpatialAtom::True) => return Some(Action::Drop(i)),
                _ => {}
            }
        }
        for (i, g) in st.goals.iter().enumerate() {
            if let Goal::Spatial(SpatialAtom::PredApp { args, .. }) = g {
                if args.iter().all(|a| eval(a, st).is_some()) {
                    return Some(Action::Unfold(i));
                }
            }
        }
        // Prefer variables that unblock an allocation.
        for g in &st.goals {
            if let Goal::Spatial(SpatialAtom::PointsTo { addr, value }) = g {
                if let Some(v) = unbound(addr, st).or_else(|| unbound(value, st)) {
                    return Some(Action::Enumerate(v));
                }
            }
        }
        for g in &st.goals {
            let terms: Vec<&Term> = match g {
                Goal::Pure(p) => p.terms().to_vec(),
                Goal::Spatial(s) => s.terms(),
            };
            if let Some(v) = terms.iter().find_map(|t| unbound(t, st)) {
                return Some(Action::Enumerate(v));
            }
        }
        None
    }

    /// Explores all ways of discharging the goals; calls `k` on each
    /// success and stops as soon as `k` returns true.
    pub(crate) fn run(&mut self, mut st: State, k: &mut dyn FnMut(&State) -> bool) -> Result<bool, OracleError> {
        loop {
            self.steps += 1;
            if self.steps > self.max_steps {
                return Err(OracleError::StepCap(self.max_steps));
            }
            if st.goals.is_empty() {
                return Ok(match self.mode {
                    Mode::Check if !st.cells.is_empty() && !st.frame => false,
                    _ => k(&st),
                });
            }
            let Some(action) = self.choose(&st) else { return Ok(false) };
            match action {
                Action::Fail => return Ok(false),
                Action::Drop(i) => {
                    if let Goal::Spatial(SpatialAtom::True) = st.goals.remove(i) {
                        st.frame = true;
                    }
                }
                Action::Bind(i, var, v) => {
                    st.goals.remove(i);
                    bind(&mut st, var, v);
                }
                Action::Cell(i) => {
                    let Goal::Spatial(SpatialAtom::PointsTo { addr, value }) = st.goals.remove(i) else {
                        unreachable!()
                    };
                    if !self.cell(&mut st, &addr, &value) {
                        return Ok(false);
                    }
                }
                Action::Unfold(i) => {
                    let Goal::Spatial(SpatialAtom::PredApp { pred, args }) = st.goals.remove(i) else {
                        unreachable!()
                    };
                    let def = self.reg.get(&pred).expect("registered predicate");
                    let vals: Vec<Term> = args.iter().map(|a| eval(a, &st).unwrap().to_term()).collect();
                    let branches = def.instantiate(&vals, &Default::default());
                    for b in branches {
                        let mut next = st.clone();
                        self.push_heap(&mut next, &b);
                        if self.run(next, k)? {
                            return Ok(true);
                        }
                    }
                    return Ok(false);
                }
                Action::Enumerate(var) => {
                    for d in self.domain.clone() {
                        let mut next = st.clone();
                        bind(&mut next, var.clone(), d);
                        if self.run(next, k)? {
                            return Ok(true);
                        }
                    }
                    return Ok(false);
                }
            }
        }
    }

    fn cell(&self, st: &mut State, addr: &Term, value: &Term) -> bool {
        let a = eval(addr, st).expect("evaluable address");
        let Some(loc) = a.loc() else {
            // stack cell `&x mapsto v`
            let Val::Stack(x) = a else { unreachable!() };
            return match (st.store.get(&x).cloned(), eval(value, st)) {
                (Some(cur), Some(v)) => cur == v,
                (Some(cur), None) => match unbound(value, st) {
                    Some(var) if value.is_var() => {
                        bind(st, var, cur);
                        true
                    }
                    _ => false,
                },
                (None, Some(v)) => {
                    st.store.insert(x, v);
                    true
                }
                (None, None) => false,
            };
        };
        match self.mode {
            Mode::Check => {
                let Some(content) = st.cells.remove(&loc) else { return false };
                match eval(value, st) {
                    Some(v) => v == content,
                    None => match value {
                        Term::ProgVar(_) | Term::LogicVar(_) => {
                            bind(st, unbound(value, st).unwrap(), content);
                            true
                        }
                        Term::FieldAddr(b, f) if b.is_var() => match content {
                            Val::Field(k, g) if g == *f => {
                                bind(st, unbound(b, st).unwrap(), Val::Int(k));
                                true
                            }
                            _ => false,
                        },
                        _ => false,
                    },
                }
            }
            Mode::Generate { max_addrs, .. } => {
                if loc.0 < 1 || loc.0 > max_addrs || st.cells.contains_key(&loc) {
                    return false;
                }
                let v = eval(value, st).expect("evaluable value");
                st.cells.insert(loc, v);
                true
            }
        }
    }
}
