use std::collections::{BTreeMap, BTreeSet};

use super::{fresh_name_avoiding, PureAtom, SpatialAtom, SymbolicHeap, Term};

/// Variable-to-term substitution. Keys are `ProgVar` or `LogicVar` terms.
pub type Subst = BTreeMap<Term, Term>;

pub(crate) fn apply_term(t: &Term, map: &Subst) -> Term {
    if let Some(r) = map.get(t) {
        return r.clone();
    }
    match t {
        Term::FieldAddr(b, f) => Term::FieldAddr(Box::new(apply_term(b, map)), f.clone()),
        _ => t.clone(),
    }
}

pub(crate) fn apply_pure(p: &PureAtom, map: &Subst) -> PureAtom {
    PureAtom::new(p.op, apply_term(&p.lhs, map), apply_term(&p.rhs, map))
}

pub(crate) fn apply_spatial(s: &SpatialAtom, map: &Subst) -> SpatialAtom {
    match s {
        SpatialAtom::PointsTo { addr, value } => {
            SpatialAtom::PointsTo { addr: apply_term(addr, map), value: apply_term(value, map) }
        }
        SpatialAtom::PredApp { pred, args } => SpatialAtom::PredApp {
            pred: pred.clone(),
            args: args.iter().map(|a| apply_term(a, map)).collect(),
        },
        other => other.clone(),
    }
}

/// Applies `map` to every atom, binders included (no capture check).
pub(crate) fn apply_free(h: &SymbolicHeap, map: &Subst) -> SymbolicHeap {
    SymbolicHeap {
        binders: h.binders.clone(),
        pure: h.pure.iter().map(|p| apply_pure(p, map)).collect(),
        spatial: h.spatial.iter().map(|s| apply_spatial(s, map)).collect(),
    }
}

/// Capture-avoiding substitution. Bound variables are never replaced, and a
/// binder whose name occurs free in the substituted terms is renamed first.
pub fn substitute(h: &SymbolicHeap, map: &Subst) -> SymbolicHeap {
    if map.is_empty() {
        return h.clone();
    }
    let mut effective: Subst = map
        .iter()
        .filter(|(k, _)| !matches!(k, Term::LogicVar(v) if h.binders.contains(v)))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    let mut incoming = BTreeSet::new();
    for v in effective.values() {
        v.collect_vars(&mut incoming);
    }
    let mut used = h.used_names();
    for t in &incoming {
        if let Term::ProgVar(n) | Term::LogicVar(n) = t {
            used.insert(n.clone());
        }
    }
    let mut binders = Vec::with_capacity(h.binders.len());
    for b in &h.binders {
        if incoming.contains(&Term::logic(b.clone())) {
            let fresh = fresh_name_avoiding(b, &used);
            used.insert(fresh.clone());
            effective.insert(Term::logic(b.clone()), Term::logic(fresh.clone()));
            binders.push(fresh);
        } else {
            binders.push(b.clone());
        }
    }
    let mut out = apply_free(h, &effective);
    out.binders = binders;
    out
}
