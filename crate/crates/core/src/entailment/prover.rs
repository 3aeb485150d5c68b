//! Proof search for `lhs |- rhs` on symbolic heaps. Binders of the right-hand
//! side are unification variables; left-hand atoms are consumed by matching.

use std::cell::{Cell, RefCell};
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::lemmas::{derive_all, Lemma, LemmaError, LemmaKind};
use super::normalize::{normalize, unfold_at};
use super::pure::PureCtx;
use crate::assertion::subst::{apply_free, apply_spatial};
use crate::assertion::{
    canonicalize_heap, simplify_heap, Assertion, PredicateRegistry, PureAtom, PureOp, SpatialAtom, Subst,
    SymbolicHeap, Term,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProverConfig {
    /// Right-hand unfoldings allowed beyond one per left-hand atom.
    pub unfold_depth: usize,
    /// Composition lemma applications per disjunct pair.
    pub max_lemma_uses: usize,
    /// Nested left-hand case splits.
    pub case_split_depth: usize,
    /// Search nodes per disjunct pair.
    pub fuel: u64,
    /// Forced unfoldings during normalization.
    pub normalize_unfolds: usize,
}

impl Default for ProverConfig {
    fn default() -> Self {
        ProverConfig { unfold_depth: 2, max_lemma_uses: 3, case_split_depth: 2, fuel: 200_000, normalize_unfolds: 8 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntailOutcome {
    pub proved: bool,
    /// Some search ran out of fuel; a failed proof may be a resource issue.
    pub exhausted: bool,
}

/// Result of replacing the part of `a` covered by `sep` with `sep` itself.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameResult {
    pub matched: Vec<SpatialAtom>,
    pub residue: Assertion,
    pub rewritten: Assertion,
}

pub struct Prover<'r> {
    reg: &'r PredicateRegistry,
    lemmas: Vec<Lemma>,
    pub cfg: ProverConfig,
}

#[derive(Clone, Debug)]
struct St {
    sigma: BTreeMap<String, Term>,
    consumed: Vec<bool>,
    spatial: Vec<SpatialAtom>,
    pure: Vec<PureAtom>,
    frame: bool,
    lemma_uses: usize,
    unfolds: usize,
}

fn is_uvar_name(n: &str) -> bool {
    n.starts_with('?')
}

fn has_uvar(t: &Term) -> bool {
    match t {
        Term::LogicVar(n) => is_uvar_name(n),
        Term::FieldAddr(b, _) => has_uvar(b),
        _ => false,
    }
}

fn bare_uvar(t: &Term) -> Option<&str> {
    match t {
        Term::LogicVar(n) if is_uvar_name(n) => Some(n),
        _ => None,
    }
}

fn resolve(t: &Term, sigma: &BTreeMap<String, Term>) -> Term {
    match t {
        Term::LogicVar(n) if is_uvar_name(n) => match sigma.get(n) {
            Some(v) => resolve(v, sigma),
            None => t.clone(),
        },
        Term::FieldAddr(b, f) => Term::field(resolve(b, sigma), f.clone()),
        _ => t.clone(),
    }
}

struct Search<'a, 'r> {
    prover: &'a Prover<'r>,
    lhs: &'a [SpatialAtom],
    cx: RefCell<PureCtx>,
    fuel: Cell<u64>,
    exhausted: Cell<bool>,
    max_unfolds: usize,
    next_var: Cell<usize>,
}

impl<'a, 'r> Search<'a, 'r> {
    fn tick(&self) -> bool {
        let f = self.fuel.get();
        if f == 0 {
            self.exhausted.set(true);
            return false;
        }
        self.fuel.set(f - 1);
        true
    }

    fn equal(&self, a: &Term, b: &Term) -> bool {
        self.cx.borrow_mut().equal(a, b)
    }

    fn fresh_uvar(&self) -> Term {
        let n = self.next_var.get();
        self.next_var.set(n + 1);
        Term::logic(format!("?{n}"))
    }

    /// Matches pattern `pat` against the left-hand term `t`, binding
    /// unification variables.
    fn unify(&self, pat: &Term, t: &Term, st: &mut St) -> bool {
        let p = resolve(pat, &st.sigma);
        if !has_uvar(&p) {
            return self.equal(&p, t);
        }
        match (&p, t) {
            (Term::LogicVar(u), _) => {
                st.sigma.insert(u.clone(), t.clone());
                true
            }
            (Term::FieldAddr(pb, f), Term::FieldAddr(tb, g)) if f == g => self.unify(pb, tb, st),
            _ => false,
        }
    }

    /// Discharges resolvable pure goals; `false` on a refuted one.
    fn settle_pure(&self, st: &mut St) -> bool {
        loop {
            let mut progress = false;
            let mut i = 0;
            while i < st.pure.len() {
                let p = &st.pure[i];
                let (l, r) = (resolve(&p.lhs, &st.sigma), resolve(&p.rhs, &st.sigma));
                match (has_uvar(&l), has_uvar(&r)) {
                    (false, false) => {
                        if !self.cx.borrow_mut().entails_atom(&PureAtom::new(p.op, l, r)) {
                            return false;
                        }
                        st.pure.remove(i);
                        progress = true;
                    }
                    (true, false) if p.op == PureOp::Eq && bare_uvar(&l).is_some() => {
                        st.sigma.insert(bare_uvar(&l).unwrap().to_string(), r);
                        st.pure.remove(i);
                        progress = true;
                    }
                    (false, true) if p.op == PureOp::Eq && bare_uvar(&r).is_some() => {
                        st.sigma.insert(bare_uvar(&r).unwrap().to_string(), l);
                        st.pure.remove(i);
                        progress = true;
                    }
                    _ => i += 1,
                }
            }
            if !progress {
                return true;
            }
        }
    }

    fn rank(&self, g: &SpatialAtom, st: &St) -> u8 {
        match g {
            SpatialAtom::Emp | SpatialAtom::True => 0,
            SpatialAtom::PointsTo { addr, .. } if !has_uvar(&resolve(addr, &st.sigma)) => 1,
            SpatialAtom::PredApp { args, .. } if args.iter().all(|a| !has_uvar(&resolve(a, &st.sigma))) => 2,
            SpatialAtom::PointsTo { .. } => 3,
            SpatialAtom::PredApp { args, .. } if !has_uvar(&resolve(&args[0], &st.sigma)) => 4,
            SpatialAtom::PredApp { .. } => 5,
        }
    }

    fn open_lhs(&self, st: &St) -> impl Iterator<Item = (usize, &'a SpatialAtom)> + '_ {
        let consumed = st.consumed.clone();
        self.lhs.iter().enumerate().filter(move |(j, _)| !consumed[*j])
    }

    fn solve(&self, mut st: St) -> Option<St> {
        if !self.tick() || !self.settle_pure(&mut st) {
            return None;
        }
        let Some(gi) = (0..st.spatial.len()).min_by_key(|&i| self.rank(&st.spatial[i], &st)) else {
            return self.finish(st);
        };
        let goal = st.spatial.remove(gi);
        match goal {
            SpatialAtom::Emp => self.solve(st),
            SpatialAtom::True => {
                st.frame = true;
                self.solve(st)
            }
            SpatialAtom::PointsTo { addr, value } => self.cell_goal(st, &addr, &value),
            SpatialAtom::PredApp { pred, args } => self.pred_goal(st, &pred, &args),
        }
    }

    fn finish(&self, st: St) -> Option<St> {
        for p in &st.pure {
            let (l, r) = (resolve(&p.lhs, &st.sigma), resolve(&p.rhs, &st.sigma));
            if !(p.op == PureOp::Eq && l == r) {
                return None;
            }
        }
        if !st.frame && self.open_lhs(&st).any(|(_, s)| *s != SpatialAtom::Emp) {
            return None;
        }
        Some(st)
    }

    fn cell_goal(&self, st: St, addr: &Term, value: &Term) -> Option<St> {
        let a = resolve(addr, &st.sigma);
        let cands: Vec<(usize, &Term, &Term)> = self
            .open_lhs(&st)
            .filter_map(|(j, s)| match s {
                SpatialAtom::PointsTo { addr, value } => Some((j, addr, value)),
                _ => None,
            })
            .collect();
        for (j, la, lv) in cands {
            let mut next = st.clone();
            let ok = if has_uvar(&a) {
                match (&a, la) {
                    (Term::FieldAddr(..), Term::FieldAddr(..)) => self.unify(&a, la, &mut next),
                    (Term::LogicVar(_), Term::FieldAddr(..) | Term::AddrOf(_)) => false,
                    (Term::LogicVar(_), _) => self.unify(&a, la, &mut next),
                    _ => false,
                }
            } else {
                self.equal(&a, la)
            };
            if ok && self.unify(value, lv, &mut next) {
                next.consumed[j] = true;
                if let Some(done) = self.solve(next) {
                    return Some(done);
                }
            }
        }
        None
    }

    fn pred_goal(&self, st: St, pred: &str, args: &[Term]) -> Option<St> {
        let args: Vec<Term> = args.iter().map(|a| resolve(a, &st.sigma)).collect();
        // cancellation against a left-hand application
        let cands: Vec<(usize, &Vec<Term>)> = self
            .open_lhs(&st)
            .filter_map(|(j, s)| match s {
                SpatialAtom::PredApp { pred: p, args } if p == pred => Some((j, args)),
                _ => None,
            })
            .collect();
        for (j, largs) in &cands {
            let mut next = st.clone();
            if args.iter().zip(largs.iter()).all(|(a, l)| self.unify(a, l, &mut next)) {
                next.consumed[*j] = true;
                if let Some(done) = self.solve(next) {
                    return Some(done);
                }
            }
        }
        if has_uvar(&args[0]) {
            return None;
        }
        if st.lemma_uses < self.prover.cfg.max_lemma_uses {
            if let Some(done) = self.compose(&st, pred, &args) {
                return Some(done);
            }
        }
        let def = self.prover.reg.get(pred)?;
        for b in def.instantiate(&args, &Default::default()) {
            if b.has_predicates() && st.unfolds >= self.max_unfolds {
                self.exhausted.set(true);
                continue;
            }
            let mut map = Subst::new();
            for x in &b.binders {
                map.insert(Term::logic(x.clone()), self.fresh_uvar());
            }
            let body = apply_free(&SymbolicHeap::new(vec![], b.pure.clone(), b.spatial.clone()), &map);
            let mut next = st.clone();
            // base branches cannot recurse, so they are free
            next.unfolds += usize::from(b.has_predicates());
            next.pure.extend(body.pure);
            next.spatial.extend(body.spatial);
            if let Some(done) = self.solve(next) {
                return Some(done);
            }
        }
        None
    }

    /// `P(x,m) * Q(m,..) |- Q(x,..)`: consume a left-hand segment starting at
    /// the goal's root and continue from its end.
    fn compose(&self, st: &St, pred: &str, args: &[Term]) -> Option<St> {
        for lemma in &self.prover.lemmas {
            if lemma.kind != LemmaKind::SegmentCompose || lemma.conclusion.pred_name() != Some(pred) {
                continue;
            }
            let seg = &lemma.pred;
            let segs: Vec<(usize, Term, Term)> = self
                .open_lhs(st)
                .filter_map(|(j, s)| match s {
                    SpatialAtom::PredApp { pred: p, args } if p == seg => Some((j, args[0].clone(), args[1].clone())),
                    _ => None,
                })
                .collect();
            for (j, from, to) in segs {
                if !self.equal(&from, &args[0]) || self.equal(&to, &args[0]) {
                    continue;
                }
                let mut rest = vec![to];
                rest.extend(args[1..].iter().cloned());
                let mut next = st.clone();
                next.consumed[j] = true;
                next.lemma_uses += 1;
                next.spatial.push(SpatialAtom::pred(pred, rest));
                if let Some(done) = self.solve(next) {
                    return Some(done);
                }
            }
        }
        None
    }
}

impl<'r> Prover<'r> {
    /// A prover with lemmas derived (and oracle-validated) for every
    /// registered predicate.
    pub fn new(reg: &'r PredicateRegistry) -> Result<Self, LemmaError> {
        Ok(Self::with_lemmas(reg, derive_all(reg)?, ProverConfig::default()))
    }

    pub fn with_lemmas(reg: &'r PredicateRegistry, lemmas: Vec<Lemma>, cfg: ProverConfig) -> Self {
        Prover { reg, lemmas, cfg }
    }

    pub fn registry(&self) -> &'r PredicateRegistry {
        self.reg
    }

    pub fn lemmas(&self) -> &[Lemma] {
        &self.lemmas
    }

    /// Matches `rhs` against all of `lhs` (or part of it when `rhs` has
    /// `True`). Returns which left-hand atoms were consumed.
    fn match_heap(&self, lhs: &SymbolicHeap, rhs: &SymbolicHeap, exhausted: &mut bool) -> Option<Vec<bool>> {
        let mut next_var = 0;
        let mut map = Subst::new();
        for b in &rhs.binders {
            map.insert(Term::logic(b.clone()), Term::logic(format!("?{next_var}")));
            next_var += 1;
        }
        let body = apply_free(&SymbolicHeap::new(vec![], rhs.pure.clone(), rhs.spatial.clone()), &map);
        let search = Search {
            prover: self,
            lhs: &lhs.spatial,
            cx: RefCell::new(PureCtx::from_heap(lhs)),
            fuel: Cell::new(self.cfg.fuel),
            exhausted: Cell::new(false),
            max_unfolds: 2 * lhs.spatial.len() + self.cfg.unfold_depth,
            next_var: Cell::new(next_var),
        };
        let st = St {
            sigma: BTreeMap::new(),
            consumed: vec![false; lhs.spatial.len()],
            spatial: body.spatial,
            pure: body.pure,
            frame: false,
            lemma_uses: 0,
            unfolds: 0,
        };
        let out = search.solve(st).map(|s| s.consumed);
        *exhausted |= search.exhausted.get();
        out
    }

    fn prove_disjunct(&self, d: &SymbolicHeap, b: &Assertion, depth: usize, exhausted: &mut bool) -> bool {
        let Some(n) = normalize(self.reg, d, self.cfg.normalize_unfolds) else { return true };
        if b.disjuncts.iter().any(|t| self.match_heap(&n, t, exhausted).is_some()) {
            return true;
        }
        if depth == 0 {
            return false;
        }
        (0..n.spatial.len()).filter(|&i| matches!(n.spatial[i], SpatialAtom::PredApp { .. })).any(|i| {
            unfold_at(self.reg, &n, i).iter().all(|alt| self.prove_disjunct(alt, b, depth - 1, exhausted))
        })
    }

    pub fn entails_report(&self, a: &Assertion, b: &Assertion) -> EntailOutcome {
        let mut exhausted = false;
        let proved = a.disjuncts.iter().all(|d| self.prove_disjunct(d, b, self.cfg.case_split_depth, &mut exhausted));
        EntailOutcome { proved, exhausted }
    }

    /// Sound, incomplete check of `a |- b`.
    pub fn entails(&self, a: &Assertion, b: &Assertion) -> bool {
        self.entails_report(a, b).proved
    }

    /// Proves every disjunct of `a` entails `sep * True` and rewrites it with
    /// the consumed atoms replaced by `sep`.
    pub fn frame_check(&self, a: &Assertion, sep: &SymbolicHeap) -> Option<FrameResult> {
        let trivial = sep.pure.is_empty() && sep.spatial.iter().all(|s| *s == SpatialAtom::Emp);
        let mut target = sep.clone();
        target.spatial.retain(|s| *s != SpatialAtom::Emp);
        target.spatial.push(SpatialAtom::True);
        let mut out = FrameResult { matched: vec![], residue: Assertion::falsum(), rewritten: Assertion::falsum() };
        for d in &a.disjuncts {
            if trivial {
                out.residue.disjuncts.push(d.clone());
                out.rewritten.disjuncts.push(d.clone());
                continue;
            }
            let n = normalize(self.reg, d, self.cfg.normalize_unfolds)?;
            let consumed = self.match_heap(&n, &target, &mut false)?;
            let mut residue = n.clone();
            residue.spatial.clear();
            for (s, c) in n.spatial.iter().zip(&consumed) {
                if *c {
                    out.matched.push(s.clone());
                } else if *s != SpatialAtom::Emp {
                    residue.spatial.push(s.clone());
                }
            }
            if residue.spatial.is_empty() {
                residue.spatial.push(SpatialAtom::Emp);
            }
            let absorbed = absorb_sep_equalities(&residue, sep);
            out.residue.disjuncts.push(residue);
            out.rewritten.disjuncts.push(canonicalize_heap(&simplify_heap(&absorbed.star(sep))));
        }
        Some(out)
    }
}

/// Drops equalities between two arguments of `sep`, renaming the earlier
/// argument to the later one in the residue's spatial atoms. Other pure
/// facts about either argument stay as they are.
fn absorb_sep_equalities(residue: &SymbolicHeap, sep: &SymbolicHeap) -> SymbolicHeap {
    let mut args: Vec<Term> = vec![];
    for s in &sep.spatial {
        if let SpatialAtom::PredApp { args: a, .. } = s {
            for t in a {
                if !args.contains(t) {
                    args.push(t.clone());
                }
            }
        }
    }
    let pos = |t: &Term| args.iter().position(|a| a == t);
    let mut h = residue.clone();
    while let Some(i) = h.pure.iter().position(|p| {
        p.op == PureOp::Eq && p.lhs != p.rhs && pos(&p.lhs).is_some() && pos(&p.rhs).is_some()
    }) {
        let p = h.pure.remove(i);
        let (from, to) = if pos(&p.lhs) < pos(&p.rhs) { (p.lhs, p.rhs) } else { (p.rhs, p.lhs) };
        let map: Subst = [(from, to)].into_iter().collect();
        h.spatial = h.spatial.iter().map(|s| apply_spatial(s, &map)).collect();
    }
    h
}
