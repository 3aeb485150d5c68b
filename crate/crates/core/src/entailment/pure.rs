//! Pure reasoning: congruence closure over terms with an injective field
//! constructor, disequalities and a strict order.

use std::collections::HashMap;

use crate::assertion::{PureAtom, PureOp, SpatialAtom, SymbolicHeap, Term};

#[derive(Clone, Debug, Default)]
pub struct PureCtx {
    terms: Vec<Term>,
    index: HashMap<Term, usize>,
    parent: Vec<usize>,
    neq: Vec<(usize, usize)>,
    lt: Vec<(usize, usize)>,
    unsat: bool,
    dirty: bool,
}

impl PureCtx {
    pub fn new() -> Self {
        Self::default()
    }

    /// Facts of `h`: its pure atoms, plus that allocated addresses are
    /// pairwise distinct and non-null.
    pub fn from_heap(h: &SymbolicHeap) -> Self {
        let mut cx = PureCtx::new();
        for p in &h.pure {
            cx.assume(p);
        }
        let addrs: Vec<&Term> = h
            .spatial
            .iter()
            .filter_map(|s| match s {
                SpatialAtom::PointsTo { addr, .. } => Some(addr),
                _ => None,
            })
            .collect();
        for (i, a) in addrs.iter().enumerate() {
            match a {
                Term::FieldAddr(b, _) => cx.add_neq(b, &Term::null()),
                Term::AddrOf(_) => {}
                other => cx.add_neq(other, &Term::null()),
            }
            for b in &addrs[..i] {
                cx.add_neq(a, b);
            }
        }
        cx
    }

    fn intern(&mut self, t: &Term) -> usize {
        if let Some(&i) = self.index.get(t) {
            return i;
        }
        if let Term::FieldAddr(b, _) = t {
            self.intern(b);
        }
        let i = self.terms.len();
        self.terms.push(t.clone());
        self.index.insert(t.clone(), i);
        self.parent.push(i);
        self.dirty = true;
        i
    }

    fn find(&self, mut i: usize) -> usize {
        while self.parent[i] != i {
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }

    pub fn assume(&mut self, p: &PureAtom) {
        match p.op {
            PureOp::Eq => self.add_eq(&p.lhs, &p.rhs),
            PureOp::Neq => self.add_neq(&p.lhs, &p.rhs),
            PureOp::Lt => self.add_lt(&p.lhs, &p.rhs),
            PureOp::Gt => self.add_lt(&p.rhs, &p.lhs),
        }
    }

    pub fn add_eq(&mut self, a: &Term, b: &Term) {
        let (i, j) = (self.intern(a), self.intern(b));
        self.union(i, j);
        self.dirty = true;
    }

    pub fn add_neq(&mut self, a: &Term, b: &Term) {
        let (i, j) = (self.intern(a), self.intern(b));
        self.neq.push((i, j));
        self.dirty = true;
    }

    pub fn add_lt(&mut self, a: &Term, b: &Term) {
        let (i, j) = (self.intern(a), self.intern(b));
        self.lt.push((i, j));
        self.dirty = true;
    }

    fn close(&mut self) {
        if !self.dirty {
            return;
        }
        self.dirty = false;
        let fields: Vec<(usize, usize, String)> = self
            .terms
            .iter()
            .enumerate()
            .filter_map(|(i, t)| match t {
                Term::FieldAddr(b, f) => Some((i, self.index[&**b], f.clone())),
                _ => None,
            })
            .collect();
        loop {
            let mut changed = false;
            for (x, (i, bi, f)) in fields.iter().enumerate() {
                for (j, bj, g) in &fields[..x] {
                    if f != g {
                        continue;
                    }
                    let same_base = self.find(*bi) == self.find(*bj);
                    let same = self.find(*i) == self.find(*j);
                    if same_base && !same {
                        changed |= self.union(*i, *j);
                    } else if same && !same_base {
                        changed |= self.union(*bi, *bj);
                    }
                }
            }
            if !changed {
                break;
            }
        }
        self.unsat = self.find_conflict();
    }

    fn class_consts(&self, r: usize) -> Vec<i64> {
        let mut out: Vec<i64> = (0..self.terms.len())
            .filter(|&i| self.find(i) == r)
            .filter_map(|i| match self.terms[i] {
                Term::Const(c) => Some(c),
                _ => None,
            })
            .collect();
        out.dedup();
        out
    }

    fn find_conflict(&self) -> bool {
        let n = self.terms.len();
        let mut kinds: HashMap<usize, (Option<i64>, Option<&str>, Option<&str>)> = HashMap::new();
        for i in 0..n {
            let r = self.find(i);
            let e = kinds.entry(r).or_default();
            match &self.terms[i] {
                Term::Const(c) => {
                    if e.0.is_some_and(|d| d != *c) {
                        return true;
                    }
                    e.0 = Some(*c);
                }
                Term::FieldAddr(_, f) => {
                    if e.1.is_some_and(|g| g != f) {
                        return true;
                    }
                    e.1 = Some(f);
                }
                Term::AddrOf(x) => {
                    if e.2.is_some_and(|y| y != x) {
                        return true;
                    }
                    e.2 = Some(x);
                }
                _ => {}
            }
        }
        for (c, f, a) in kinds.values() {
            if [c.is_some(), f.is_some(), a.is_some()].iter().filter(|b| **b).count() > 1 {
                return true;
            }
        }
        if self.neq.iter().any(|&(a, b)| self.find(a) == self.find(b)) {
            return true;
        }
        // strict order: no cycles, consistent with constants
        for &(a, _) in &self.lt {
            let ra = self.find(a);
            if self.reaches(ra, ra) {
                return true;
            }
        }
        for &(a, _) in &self.lt {
            let ra = self.find(a);
            let Some(&ca) = self.class_consts(ra).first() else { continue };
            for j in 0..n {
                let rj = self.find(j);
                if let Some(&cj) = self.class_consts(rj).first() {
                    if ca >= cj && self.reaches(ra, rj) {
                        return true;
                    }
                }
            }
        }
        false
    }

    /// Is there a non-empty `<`-path from class `from` to class `to`?
    fn reaches(&self, from: usize, to: usize) -> bool {
        let mut seen = vec![false; self.terms.len()];
        let mut stack = vec![from];
        while let Some(x) = stack.pop() {
            for &(a, b) in &self.lt {
                if self.find(a) == x {
                    let rb = self.find(b);
                    if rb == to {
                        return true;
                    }
                    if !seen[rb] {
                        seen[rb] = true;
                        stack.push(rb);
                    }
                }
            }
        }
        false
    }

    pub fn is_unsat(&mut self) -> bool {
        self.close();
        self.unsat
    }

    pub fn equal(&mut self, a: &Term, b: &Term) -> bool {
        if a == b {
            return true;
        }
        let (i, j) = (self.intern(a), self.intern(b));
        self.close();
        self.unsat || self.find(i) == self.find(j)
    }

    pub fn disequal(&mut self, a: &Term, b: &Term) -> bool {
        let (i, j) = (self.intern(a), self.intern(b));
        self.close();
        if self.unsat {
            return true;
        }
        self.classes_disequal(self.find(i), self.find(j), 4)
    }

    fn classes_disequal(&self, ra: usize, rb: usize, depth: usize) -> bool {
        if ra == rb {
            return false;
        }
        if self.neq.iter().any(|&(x, y)| {
            let (rx, ry) = (self.find(x), self.find(y));
            (rx == ra && ry == rb) || (rx == rb && ry == ra)
        }) {
            return true;
        }
        if self.reaches(ra, rb) || self.reaches(rb, ra) {
            return true;
        }
        // x.f != y.f implies x != y
        let explicit = |x: usize, y: usize| {
            self.neq.iter().any(|&(p, q)| {
                let (rp, rq) = (self.find(p), self.find(q));
                (rp == x && rq == y) || (rp == y && rq == x)
            })
        };
        for (i, t) in self.terms.iter().enumerate() {
            let Term::FieldAddr(b, f) = t else { continue };
            if self.find(self.index[&**b]) != ra {
                continue;
            }
            for (j, u) in self.terms.iter().enumerate() {
                if let Term::FieldAddr(c, g) = u {
                    if f == g && self.find(self.index[&**c]) == rb && explicit(self.find(i), self.find(j)) {
                        return true;
                    }
                }
            }
        }
        let members = |r: usize| -> Vec<&Term> {
            (0..self.terms.len()).filter(|&i| self.find(i) == r).map(|i| &self.terms[i]).collect()
        };
        let (ma, mb) = (members(ra), members(rb));
        for x in &ma {
            for y in &mb {
                match (x, y) {
                    (Term::Const(c), Term::Const(d)) if c != d => return true,
                    (Term::Const(_), Term::FieldAddr(..) | Term::AddrOf(_))
                    | (Term::FieldAddr(..) | Term::AddrOf(_), Term::Const(_))
                    | (Term::FieldAddr(..), Term::AddrOf(_))
                    | (Term::AddrOf(_), Term::FieldAddr(..)) => return true,
                    (Term::AddrOf(p), Term::AddrOf(q)) if p != q => return true,
                    (Term::FieldAddr(_, f), Term::FieldAddr(_, g)) if f != g => return true,
                    (Term::FieldAddr(b, _), Term::FieldAddr(c, _)) if depth > 0 => {
                        let (rb2, rc2) = (self.find(self.index[&**b]), self.find(self.index[&**c]));
                        if self.classes_disequal(rb2, rc2, depth - 1) {
                            return true;
                        }
                    }
                    _ => {}
                }
            }
        }
        false
    }

    pub fn less(&mut self, a: &Term, b: &Term) -> bool {
        let (i, j) = (self.intern(a), self.intern(b));
        self.close();
        if self.unsat {
            return true;
        }
        let (ri, rj) = (self.find(i), self.find(j));
        if let (Some(&x), Some(&y)) = (self.class_consts(ri).first(), self.class_consts(rj).first()) {
            if x < y {
                return true;
            }
        }
        self.reaches(ri, rj)
    }

    pub fn entails_atom(&mut self, p: &PureAtom) -> bool {
        match p.op {
            PureOp::Eq => self.equal(&p.lhs, &p.rhs),
            PureOp::Neq => self.disequal(&p.lhs, &p.rhs),
            PureOp::Lt => self.less(&p.lhs, &p.rhs),
            PureOp::Gt => self.less(&p.rhs, &p.lhs),
        }
    }

    /// Is `p` refuted by the facts?
    pub fn refutes(&mut self, p: &PureAtom) -> bool {
        let mut cx = self.clone();
        cx.assume(p);
        cx.is_unsat()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &str) -> Term {
        Term::var(x)
    }

    #[test]
    fn transitivity_and_constants() {
        let mut cx = PureCtx::new();
        cx.add_eq(&v("a"), &v("b"));
        cx.add_eq(&v("b"), &Term::null());
        assert!(cx.equal(&v("a"), &Term::null()));
        assert!(cx.disequal(&v("a"), &Term::Const(1)));
        assert!(!cx.is_unsat());
        cx.add_neq(&v("a"), &Term::null());
        assert!(cx.is_unsat());
    }

    #[test]
    fn field_addresses_are_injective() {
        let mut cx = PureCtx::new();
        cx.add_eq(&Term::field(v("x"), "tail"), &Term::field(v("y"), "tail"));
        assert!(cx.equal(&v("x"), &v("y")));
        let mut cx = PureCtx::new();
        cx.add_eq(&v("x"), &v("y"));
        assert!(cx.equal(&Term::field(v("x"), "tail"), &Term::field(v("y"), "tail")));
        assert!(cx.disequal(&Term::field(v("x"), "tail"), &Term::field(v("y"), "head")));
    }

    #[test]
    fn allocation_facts() {
        let h = SymbolicHeap::new(
            vec![],
            vec![],
            vec![
                SpatialAtom::points_to(Term::field(v("x"), "tail"), Term::null()),
                SpatialAtom::points_to(Term::field(v("y"), "tail"), Term::null()),
            ],
        );
        let mut cx = PureCtx::from_heap(&h);
        assert!(cx.disequal(&v("x"), &Term::null()));
        assert!(cx.disequal(&v("x"), &v("y")));
    }

    #[test]
    fn order_cycles_are_contradictions() {
        let mut cx = PureCtx::new();
        cx.add_lt(&v("a"), &v("b"));
        cx.add_lt(&v("b"), &v("c"));
        assert!(cx.less(&v("a"), &v("c")));
        assert!(cx.disequal(&v("a"), &v("c")));
        assert!(!cx.is_unsat());
        cx.add_lt(&v("c"), &v("a"));
        assert!(cx.is_unsat());
    }
}
