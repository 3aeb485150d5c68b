//! Pure-driven case analysis on predicate applications.

use super::pure::PureCtx;
use crate::assertion::{simplify_heap, PredicateRegistry, SpatialAtom, SymbolicHeap};

/// Is the heap contradictory on its pure and allocation facts alone?
pub fn is_refuted(h: &SymbolicHeap) -> bool {
    PureCtx::from_heap(h).is_unsat()
}

/// Replaces the atom at `idx` (a predicate application) by each branch of
/// its definition, dropping contradictory results.
pub fn unfold_at(reg: &PredicateRegistry, h: &SymbolicHeap, idx: usize) -> Vec<SymbolicHeap> {
    let SpatialAtom::PredApp { pred, args } = &h.spatial[idx] else {
        return vec![h.clone()];
    };
    let def = reg.get(pred).expect("registered predicate");
    let mut rest = h.clone();
    rest.spatial.remove(idx);
    if rest.spatial.is_empty() {
        rest.spatial.push(SpatialAtom::Emp);
    }
    def.instantiate(args, &h.used_names())
        .iter()
        .map(|b| simplify_heap(&rest.star(b)))
        .filter(|u| !is_refuted(u))
        .collect()
}

/// Unfolds predicate applications whose branch is forced by the pure facts,
/// up to `max_unfolds` times. `None` when the heap is contradictory.
pub fn normalize(reg: &PredicateRegistry, h: &SymbolicHeap, max_unfolds: usize) -> Option<SymbolicHeap> {
    if is_refuted(h) {
        return None;
    }
    let mut cur = h.clone();
    let mut budget = max_unfolds;
    'outer: loop {
        for i in 0..cur.spatial.len() {
            if !matches!(cur.spatial[i], SpatialAtom::PredApp { .. }) {
                continue;
            }
            let mut alts = unfold_at(reg, &cur, i);
            match alts.len() {
                0 => return None,
                1 if budget > 0 => {
                    budget -= 1;
                    cur = alts.pop().unwrap();
                    continue 'outer;
                }
                _ => {}
            }
        }
        return Some(cur);
    }
}
