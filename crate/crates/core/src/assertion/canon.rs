//! Normalization and alpha-canonical forms.

use std::collections::{BTreeMap, BTreeSet};

use super::subst::{apply_free, apply_pure, apply_spatial, Subst};
use super::{Assertion, PureAtom, PureOp, SpatialAtom, SymbolicHeap, Term};

/// Light-weight logical simplification: eliminates existential binders that
/// are pinned to another term by an equality, drops trivial equalities,
/// duplicate pure atoms, redundant `emp` and unused binders.
pub fn simplify_heap(h: &SymbolicHeap) -> SymbolicHeap {
    let mut h = h.clone();
    loop {
        h.pure.retain(|p| !(p.op == PureOp::Eq && p.lhs == p.rhs));
        let Some((idx, var, value)) = find_eliminable(&h) else { break };
        h.pure.remove(idx);
        let map = Subst::from([(Term::logic(var.clone()), value)]);
        h = apply_free(&h, &map);
        h.binders.retain(|b| *b != var);
    }
    dedup(&mut h.pure);
    tidy_spatial(&mut h.spatial);
    let keep: Vec<String> = h.binders.iter().filter(|b| h.mentions_logic(b)).cloned().collect();
    h.binders = keep;
    h
}

fn find_eliminable(h: &SymbolicHeap) -> Option<(usize, String, Term)> {
    let is_binder = |t: &Term| matches!(t, Term::LogicVar(v) if h.binders.contains(v));
    // Prefer pinning a binder to a non-binder term.
    for pass in 0..2 {
        for (i, p) in h.pure.iter().enumerate() {
            if p.op != PureOp::Eq {
                continue;
            }
            for (var, other) in [(&p.lhs, &p.rhs), (&p.rhs, &p.lhs)] {
                if let Term::LogicVar(v) = var {
                    if !is_binder(var) || other.mentions_logic(v) {
                        continue;
                    }
                    if pass == 0 && is_binder(other) {
                        continue;
                    }
                    return Some((i, v.clone(), other.clone()));
                }
            }
        }
    }
    None
}

fn dedup<T: Ord + Clone>(v: &mut Vec<T>) {
    let mut seen = BTreeSet::new();
    v.retain(|x| seen.insert(x.clone()));
}

fn tidy_spatial(spatial: &mut Vec<SpatialAtom>) {
    if spatial.iter().any(|s| *s != SpatialAtom::Emp) {
        spatial.retain(|s| *s != SpatialAtom::Emp);
    } else {
        spatial.clear();
        spatial.push(SpatialAtom::Emp);
    }
}

pub fn simplify(a: &Assertion) -> Assertion {
    Assertion::new(a.disjuncts.iter().map(simplify_heap).collect())
}

pub fn canonicalize(a: &Assertion) -> Assertion {
    Assertion::new(a.disjuncts.iter().map(canonicalize_heap).collect())
}

/// Canonical form of a symbolic heap. Alpha-equivalent heaps, and heaps that
/// differ only in atom order or in which member of an equality class is
/// written where, map to the same value.
pub fn canonicalize_heap(h: &SymbolicHeap) -> SymbolicHeap {
    let mut h = simplify_heap(h);
    normalize_equalities(&mut h);
    drop_implied_nonnull(&mut h);
    for p in &mut h.pure {
        orient(p);
    }
    dedup(&mut h.pure);
    tidy_spatial(&mut h.spatial);
    rename_binders(&mut h);
    h.pure.sort_by_cached_key(|p| sort_key(&p.to_string()));
    h.spatial.sort_by_cached_key(|s| (spatial_rank(s), sort_key(&s.to_string())));
    h
}

fn spatial_rank(s: &SpatialAtom) -> u8 {
    match s {
        SpatialAtom::PointsTo { .. } => 0,
        SpatialAtom::PredApp { .. } => 1,
        SpatialAtom::True => 2,
        SpatialAtom::Emp => 3,
    }
}

fn rep_rank(t: &Term, binders: &[String]) -> (u8, String) {
    match t {
        Term::Const(c) => (0, format!("{c:020}")),
        Term::ProgVar(v) => (1, v.clone()),
        Term::AddrOf(v) => (2, v.clone()),
        Term::LogicVar(v) if !binders.contains(v) => (3, v.clone()),
        other => (4, other.to_string()),
    }
}

fn is_atomic(t: &Term, binders: &[String]) -> bool {
    match t {
        Term::Const(_) | Term::ProgVar(_) | Term::AddrOf(_) => true,
        Term::LogicVar(v) => !binders.contains(v),
        Term::FieldAddr(..) => false,
    }
}

/// Rewrites each equality class of atomic terms to its representative and
/// re-emits the class as `member == rep` equalities.
fn normalize_equalities(h: &mut SymbolicHeap) {
    let mut parent: BTreeMap<Term, Term> = BTreeMap::new();
    fn find(parent: &mut BTreeMap<Term, Term>, t: &Term) -> Term {
        let p = parent.get(t).cloned().unwrap_or_else(|| t.clone());
        if p == *t {
            return p;
        }
        let r = find(parent, &p);
        parent.insert(t.clone(), r.clone());
        r
    }
    let mut members: BTreeSet<Term> = BTreeSet::new();
    for p in &h.pure {
        if p.op == PureOp::Eq && is_atomic(&p.lhs, &h.binders) && is_atomic(&p.rhs, &h.binders) {
            members.insert(p.lhs.clone());
            members.insert(p.rhs.clone());
            let (a, b) = (find(&mut parent, &p.lhs), find(&mut parent, &p.rhs));
            if a != b {
                parent.insert(a, b);
            }
        }
    }
    if members.is_empty() {
        return;
    }
    let mut classes: BTreeMap<Term, Vec<Term>> = BTreeMap::new();
    for m in &members {
        let r = find(&mut parent, m);
        classes.entry(r).or_default().push(m.clone());
    }
    let mut map = Subst::new();
    let mut eqs = vec![];
    for class in classes.values() {
        let rep = class
            .iter()
            .min_by_key(|t| rep_rank(t, &h.binders))
            .cloned()
            .expect("non-empty class");
        for m in class {
            if *m != rep {
                map.insert(m.clone(), rep.clone());
                eqs.push(PureAtom::eq(m.clone(), rep.clone()));
            }
        }
    }
    let mut pure: Vec<PureAtom> = h
        .pure
        .iter()
        .map(|p| apply_pure(p, &map))
        .filter(|p| !(p.op == PureOp::Eq && p.lhs == p.rhs))
        .collect();
    pure.extend(eqs);
    h.pure = pure;
    h.spatial = h.spatial.iter().map(|s| apply_spatial(s, &map)).collect();
}

/// Bases of allocated cells: `b` for every `b->f` cell and `a` for every `*a` cell.
pub(crate) fn allocated_bases(h: &SymbolicHeap) -> BTreeSet<Term> {
    h.spatial
        .iter()
        .filter_map(|s| match s {
            SpatialAtom::PointsTo { addr: Term::FieldAddr(b, _), .. } => Some((**b).clone()),
            SpatialAtom::PointsTo { addr: Term::AddrOf(_), .. } => None,
            SpatialAtom::PointsTo { addr, .. } => Some(addr.clone()),
            _ => None,
        })
        .collect()
}

fn drop_implied_nonnull(h: &mut SymbolicHeap) {
    let alloc = allocated_bases(h);
    h.pure.retain(|p| {
        !(p.op == PureOp::Neq
            && ((p.rhs.is_null() && alloc.contains(&p.lhs)) || (p.lhs.is_null() && alloc.contains(&p.rhs))))
    });
}

fn orient(p: &mut PureAtom) {
    match p.op {
        PureOp::Gt => {
            std::mem::swap(&mut p.lhs, &mut p.rhs);
            p.op = PureOp::Lt;
        }
        PureOp::Eq | PureOp::Neq => {
            let swap = match (&p.lhs, &p.rhs) {
                (Term::Const(_), Term::Const(_)) => p.lhs > p.rhs,
                (Term::Const(_), _) => true,
                (_, Term::Const(_)) => false,
                (l, r) => l.to_string() > r.to_string(),
            };
            if swap {
                std::mem::swap(&mut p.lhs, &mut p.rhs);
            }
        }
        PureOp::Lt => {}
    }
}

// Binders sort after every identifier, named ones by label, unnamed ones last.
const HOLE: &str = "~~";

fn sort_key(printed: &str) -> String {
    printed.replace("__", "~")
}

/// Greedy canonical labelling: repeatedly sort atoms with unnamed binders
/// masked, and name the unnamed binders of the first atom that has any.
fn rename_binders(h: &mut SymbolicHeap) {
    let mut named: Vec<String> = vec![];
    let mut map = Subst::new();
    loop {
        let unnamed: Vec<&String> = h.binders.iter().filter(|b| !named.contains(b)).collect();
        if unnamed.is_empty() {
            break;
        }
        let mut view: Subst = named
            .iter()
            .enumerate()
            .map(|(i, b)| (Term::logic(b.clone()), Term::logic(format!("~{}", i + 1))))
            .collect();
        for b in &unnamed {
            view.insert(Term::logic((*b).clone()), Term::logic(HOLE));
        }
        let mut keyed: Vec<(u8, String, Vec<String>)> = vec![];
        for p in &h.pure {
            let masked = apply_pure(p, &view).to_string();
            keyed.push((0, masked, binder_order(p.terms().into_iter(), &unnamed)));
        }
        for s in &h.spatial {
            let masked = apply_spatial(s, &view).to_string();
            keyed.push((1 + spatial_rank(s), masked, binder_order(s.terms().into_iter(), &unnamed)));
        }
        keyed.sort();
        let next = keyed.into_iter().find(|(_, _, bs)| !bs.is_empty());
        let fresh: Vec<String> = match next {
            Some((_, _, bs)) => bs,
            // binders that occur nowhere; simplify_heap normally removes them
            None => unnamed.iter().map(|b| (*b).clone()).collect(),
        };
        for b in fresh {
            named.push(b.clone());
            map.insert(Term::logic(b), Term::logic(format!("__{}", named.len())));
        }
    }
    let renamed = apply_free(h, &map);
    h.pure = renamed.pure;
    h.spatial = renamed.spatial;
    h.binders = (1..=named.len()).map(|i| format!("__{i}")).collect();
}

fn binder_order<'a>(terms: impl Iterator<Item = &'a Term>, unnamed: &[&String]) -> Vec<String> {
    let mut out = vec![];
    fn walk(t: &Term, unnamed: &[&String], out: &mut Vec<String>) {
        match t {
            Term::LogicVar(v) if unnamed.iter().any(|u| *u == v) && !out.contains(v) => out.push(v.clone()),
            Term::FieldAddr(b, _) => walk(b, unnamed, out),
            _ => {}
        }
    }
    for t in terms {
        walk(t, unnamed, &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(base: Term, f: &str, v: Term) -> SpatialAtom {
        SpatialAtom::points_to(Term::field(base, f), v)
    }

    #[test]
    fn alpha_equivalent_heaps_canonicalize_equal() {
        let mk = |z: &str| {
            SymbolicHeap::new(
                vec![z.into()],
                vec![],
                vec![
                    pt(Term::var("x"), "tail", Term::logic(z)),
                    SpatialAtom::pred("lseg", vec![Term::logic(z), Term::var("y")]),
                ],
            )
        };
        assert_eq!(canonicalize_heap(&mk("z")), canonicalize_heap(&mk("q")));
        assert_eq!(canonicalize_heap(&mk("z")).binders, vec!["__1".to_string()]);
    }

    #[test]
    fn pure_order_does_not_matter() {
        let a = SymbolicHeap::new(
            vec![],
            vec![PureAtom::eq(Term::var("v"), Term::var("t")), PureAtom::neq(Term::var("p"), Term::var("q"))],
            vec![SpatialAtom::Emp],
        );
        let mut b = a.clone();
        b.pure.reverse();
        assert_eq!(canonicalize_heap(&a), canonicalize_heap(&b));
    }

    #[test]
    fn pinned_binders_are_eliminated() {
        let h = SymbolicHeap::new(
            vec!["n".into()],
            vec![PureAtom::eq(Term::logic("n"), Term::var("y"))],
            vec![pt(Term::var("x"), "tail", Term::logic("n")), SpatialAtom::Emp],
        );
        assert_eq!(simplify_heap(&h).to_string(), "x->tail == y && emp");
    }

    #[test]
    fn nonnull_of_allocated_base_is_dropped() {
        let h = SymbolicHeap::new(
            vec![],
            vec![PureAtom::neq(Term::var("p"), Term::null())],
            vec![pt(Term::var("p"), "tail", Term::null())],
        );
        assert_eq!(canonicalize_heap(&h).to_string(), "p->tail == 0 && emp");
    }

    #[test]
    fn chain_binders_are_numbered_along_the_chain() {
        // w->tail == c && a->tail == p && c->tail == a  (out of order)
        let h = SymbolicHeap::new(
            vec!["a".into(), "c".into()],
            vec![],
            vec![
                pt(Term::var("w"), "tail", Term::logic("c")),
                pt(Term::logic("a"), "tail", Term::var("p")),
                pt(Term::logic("c"), "tail", Term::logic("a")),
            ],
        );
        let c = canonicalize_heap(&h);
        assert_eq!(c.to_string(), "exists __1 __2, w->tail == __1 && __1->tail == __2 && __2->tail == p && emp");
    }
}
