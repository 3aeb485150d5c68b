//! Brute-force semantics over small concrete heaps.
//!
//! Used as ground truth for the entailment prover, the symbolic executor and
//! the lemma validator. Nothing here is on the verification fast path.

mod exec;
mod search;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assertion::{Assertion, PredicateRegistry, SpatialAtom, SymbolicHeap, Term};
use search::{Mode, Search, State};

pub use exec::{concrete_exec, eval_cond, Fault, DEFAULT_ITERATION_CAP};

/// Concrete value: an integer (0 is null, positive integers are object
/// addresses or data), the address of a field, or the address of a stack
/// variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Val {
    Int(i64),
    Field(i64, String),
    Stack(String),
}

impl Val {
    /// The heap cell this value addresses. `*k` is the cell `(k, "")`.
    pub fn loc(&self) -> Option<Loc> {
        match self {
            Val::Int(k) => Some((*k, String::new())),
            Val::Field(k, f) => Some((*k, f.clone())),
            Val::Stack(_) => None,
        }
    }

    pub fn to_term(&self) -> Term {
        match self {
            Val::Int(k) => Term::Const(*k),
            Val::Field(k, f) => Term::field(Term::Const(*k), f.clone()),
            Val::Stack(x) => Term::AddrOf(x.clone()),
        }
    }
}

impl std::fmt::Display for Val {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Val::Int(k) => write!(f, "{k}"),
            Val::Field(k, fld) => write!(f, "&({k}->{fld})"),
            Val::Stack(x) => write!(f, "&{x}"),
        }
    }
}

/// Heap cell: object address and field name (`""` for a plain `*a` cell).
pub type Loc = (i64, String);

/// A store and a finite heap. Address 0 is never allocated.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ConcreteHeap {
    pub store: BTreeMap<String, Val>,
    pub cells: BTreeMap<i64, BTreeMap<String, Val>>,
}

impl ConcreteHeap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_var(mut self, x: &str, v: i64) -> Self {
        self.store.insert(x.to_string(), Val::Int(v));
        self
    }

    pub fn with_cell(mut self, addr: i64, field: &str, v: i64) -> Self {
        self.cells.entry(addr).or_default().insert(field.to_string(), Val::Int(v));
        self
    }

    pub fn get(&self, loc: &Loc) -> Option<&Val> {
        self.cells.get(&loc.0).and_then(|r| r.get(&loc.1))
    }

    pub fn set(&mut self, loc: Loc, v: Val) {
        self.cells.entry(loc.0).or_default().insert(loc.1, v);
    }

    pub fn flat_cells(&self) -> BTreeMap<Loc, Val> {
        let mut out = BTreeMap::new();
        for (a, rec) in &self.cells {
            for (f, v) in rec {
                out.insert((*a, f.clone()), v.clone());
            }
        }
        out
    }

    pub fn from_flat(store: BTreeMap<String, Val>, cells: &BTreeMap<Loc, Val>) -> Self {
        let mut h = ConcreteHeap { store, cells: BTreeMap::new() };
        for (loc, v) in cells {
            h.set(loc.clone(), v.clone());
        }
        h
    }

    pub fn num_cells(&self) -> usize {
        self.cells.values().map(BTreeMap::len).sum()
    }
}

impl std::fmt::Display for ConcreteHeap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let store: Vec<String> = self.store.iter().map(|(k, v)| format!("{k}:{v}")).collect();
        let cells: Vec<String> = self
            .cells
            .iter()
            .map(|(a, rec)| {
                let fs: Vec<String> = rec.iter().map(|(k, v)| format!("{k}:{v}")).collect();
                format!("{a}:{{{}}}", fs.join(","))
            })
            .collect();
        write!(f, "store {{{}}} heap {{{}}}", store.join(","), cells.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("model enumeration exceeded the cap of {0} models")]
    ModelCap(usize),
    #[error("search exceeded {0} steps")]
    StepCap(u64),
}

#[derive(Clone, Copy, Debug)]
pub struct OracleConfig {
    pub max_addrs: i64,
    pub max_models: usize,
    pub max_steps: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { max_addrs: 3, max_models: 2_000_000, max_steps: 50_000_000 }
    }
}

impl OracleConfig {
    pub fn with_addrs(max_addrs: i64) -> Self {
        OracleConfig { max_addrs, ..Self::default() }
    }
}

/// Field names and value kinds a family of assertions can talk about.
#[derive(Clone, Debug, Default)]
pub(crate) struct Vocab {
    pub fields: BTreeSet<String>,
    pub field_values: bool,
}

impl Vocab {
    pub(crate) fn of(reg: &PredicateRegistry, assertions: &[&Assertion]) -> Vocab {
        let mut v = Vocab::default();
        let mut preds = BTreeSet::new();
        let mut heaps: Vec<&SymbolicHeap> = vec![];
        for a in assertions {
            heaps.extend(a.disjuncts.iter());
            preds.extend(a.predicates());
        }
        let closure = reg.closure_of(&preds);
        for p in &closure {
            if let Some(d) = reg.get(p) {
                heaps.extend(d.branches.iter());
            }
        }
        for h in heaps {
            for s in &h.spatial {
                match s {
                    SpatialAtom::PointsTo { addr, value } => {
                        match addr {
                            Term::FieldAddr(_, f) => {
                                v.fields.insert(f.clone());
                            }
                            Term::AddrOf(_) => {}
                            _ => {
                                v.fields.insert(String::new());
                            }
                        }
                        v.field_values |= matches!(value, Term::FieldAddr(..));
                    }
                    SpatialAtom::PredApp { args, .. } => {
                        v.field_values |= args.iter().any(|a| matches!(a, Term::FieldAddr(..)));
                    }
                    _ => {}
                }
            }
            for p in &h.pure {
                v.field_values |= p.terms().iter().any(|t| matches!(t, Term::FieldAddr(..)));
            }
        }
        v
    }

    pub(crate) fn domain(&self, max_addrs: i64) -> Vec<Val> {
        let mut d: Vec<Val> = (0..=max_addrs.max(2)).map(Val::Int).collect();
        if self.field_values {
            for k in 1..=max_addrs {
                for f in &self.fields {
                    if !f.is_empty() {
                        d.push(Val::Field(k, f.clone()));
                    }
                }
            }
        }
        d
    }
}

/// Does `(store, heap)` satisfy `a`? Binders range over the values occurring
/// in the model plus small integers.
pub fn satisfies(reg: &PredicateRegistry, m: &ConcreteHeap, a: &Assertion) -> bool {
    let mut vocab = Vocab::of(reg, &[a]);
    let cells = m.flat_cells();
    let mut domain: BTreeSet<Val> = BTreeSet::new();
    let max = cells.keys().map(|l| l.0).chain(std::iter::once(2)).max().unwrap_or(2);
    for k in 0..=max {
        domain.insert(Val::Int(k));
    }
    domain.extend(cells.values().cloned());
    domain.extend(m.store.values().cloned());
    for (loc, _) in &cells {
        vocab.fields.insert(loc.1.clone());
        if !loc.1.is_empty() && vocab.field_values {
            domain.insert(Val::Field(loc.0, loc.1.clone()));
        }
    }
    let domain: Vec<Val> = domain.into_iter().collect();
    a.disjuncts.iter().any(|h| {
        let mut s = Search::new(reg, domain.clone(), Mode::Check, OracleConfig::default().max_steps);
        let mut st = State { store: m.store.clone(), cells: cells.clone(), ..State::default() };
        s.push_heap(&mut st, h);
        s.run(st, &mut |_| true).unwrap_or(false)
    })
}

/// Every model of `a` over addresses `1..=max_addrs` in which all program
/// variables of `vars` have a value. Deterministic order.
pub fn models(
    reg: &PredicateRegistry,
    a: &Assertion,
    vars: &BTreeSet<String>,
    cfg: OracleConfig,
) -> Result<Vec<ConcreteHeap>, OracleError> {
    models_with_vocab(reg, a, vars, &Vocab::of(reg, &[a]), cfg)
}

pub(crate) fn models_with_vocab(
    reg: &PredicateRegistry,
    a: &Assertion,
    vars: &BTreeSet<String>,
    vocab: &Vocab,
    cfg: OracleConfig,
) -> Result<Vec<ConcreteHeap>, OracleError> {
    let domain = vocab.domain(cfg.max_addrs);
    let max_locs = cfg.max_addrs as usize * vocab.fields.len().max(1);
    let mut out: BTreeSet<ConcreteHeap> = BTreeSet::new();
    let mut overflow = false;
    for h in &a.disjuncts {
        let mut s = Search::new(
            reg,
            domain.clone(),
            Mode::Generate { max_addrs: cfg.max_addrs, max_locs },
            cfg.max_steps,
        );
        let mut st = State::default();
        s.push_heap(&mut st, h);
        s.run(st, &mut |st| {
            let base = ConcreteHeap::from_flat(st.store.clone(), &st.cells);
            for m in complete_store(base, vars, &domain) {
                let extended = if st.frame { extend_cells(m, vocab, &domain, cfg.max_addrs) } else { vec![m] };
                for e in extended {
                    out.insert(e);
                    if out.len() > cfg.max_models {
                        overflow = true;
                        return true;
                    }
                }
            }
            false
        })?;
        if overflow {
            return Err(OracleError::ModelCap(cfg.max_models));
        }
    }
    Ok(out.into_iter().collect())
}

fn complete_store(m: ConcreteHeap, vars: &BTreeSet<String>, domain: &[Val]) -> Vec<ConcreteHeap> {
    let mut acc = vec![m];
    for v in vars {
        if acc[0].store.contains_key(v) {
            continue;
        }
        acc = acc
            .into_iter()
            .flat_map(|m| {
                domain.iter().map(move |d| {
                    let mut m2 = m.clone();
                    m2.store.insert(v.clone(), d.clone());
                    m2
                })
            })
            .collect();
    }
    acc
}

/// All heaps obtained by adding arbitrary cells to `m` (for `True` frames).
fn extend_cells(m: ConcreteHeap, vocab: &Vocab, domain: &[Val], max_addrs: i64) -> Vec<ConcreteHeap> {
    let mut free: Vec<Loc> = vec![];
    for k in 1..=max_addrs {
        for f in &vocab.fields {
            let loc = (k, f.clone());
            if m.get(&loc).is_none() {
                free.push(loc);
            }
        }
    }
    let mut acc = vec![m];
    for loc in free {
        let mut next = Vec::with_capacity(acc.len() * (domain.len() + 1));
        for m in acc {
            for d in domain {
                let mut m2 = m.clone();
                m2.set(loc.clone(), d.clone());
                next.push(m2);
            }
            next.push(m);
        }
        acc = next;
    }
    acc
}

/// Exhaustive bounded entailment check: every model of `a` with at most
/// `cfg.max_addrs` objects satisfies `b`.
pub fn entails_oracle(
    reg: &PredicateRegistry,
    a: &Assertion,
    b: &Assertion,
    cfg: OracleConfig,
) -> Result<bool, OracleError> {
    Ok(counter_model(reg, a, b, cfg)?.is_none())
}

/// A model of `a` that does not satisfy `b`, if one exists within the bound.
pub fn counter_model(
    reg: &PredicateRegistry,
    a: &Assertion,
    b: &Assertion,
    cfg: OracleConfig,
) -> Result<Option<ConcreteHeap>, OracleError> {
    let vocab = Vocab::of(reg, &[a, b]);
    let mut vars = a.prog_vars();
    vars.extend(b.prog_vars());
    let ms = models_with_vocab(reg, a, &vars, &vocab, cfg)?;
    Ok(ms.into_par_iter().find_first(|m| !satisfies(reg, m, b)))
}
