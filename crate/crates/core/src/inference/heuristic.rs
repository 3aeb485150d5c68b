//! Deterministic fold mining: proposes predicate instances over the program
//! variables and ranks them by how often and how much they fold.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Backend, Candidate, InferenceError, InferenceRequest};
use crate::assertion::{canonicalize, canonicalize_heap, Assertion, PredicateRegistry, SpatialAtom, SymbolicHeap, Term};
use crate::entailment::{derive_all, Lemma, LemmaError, Prover, ProverConfig};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeuristicConfig {
    /// Fraction of assertions a literal atom must occur in.
    pub tau: f64,
    /// Predicates of higher arity are not instantiated over the grid.
    pub max_grid_arity: usize,
    pub prover: ProverConfig,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        HeuristicConfig { tau: 0.6, max_grid_arity: 3, prover: ProverConfig::default() }
    }
}

pub struct HeuristicBackend {
    reg: PredicateRegistry,
    lemmas: Vec<Lemma>,
    pub cfg: HeuristicConfig,
}

fn has_logic(h: &SymbolicHeap) -> bool {
    let mut vs = BTreeSet::new();
    for t in h.all_terms() {
        t.collect_vars(&mut vs);
    }
    vs.iter().any(|t| matches!(t, Term::LogicVar(_)))
}

fn atom_heap(s: &SpatialAtom) -> SymbolicHeap {
    SymbolicHeap::new(vec![], vec![], vec![s.clone()])
}

/// All `k`-tuples over `terms` whose first entry is a variable.
fn grid(vars: &[Term], k: usize) -> Vec<Vec<Term>> {
    let mut rest_terms = vars.to_vec();
    rest_terms.push(Term::null());
    let mut out: Vec<Vec<Term>> = vars.iter().map(|v| vec![v.clone()]).collect();
    for _ in 1..k {
        out = out
            .into_iter()
            .flat_map(|t| {
                rest_terms.iter().map(move |x| {
                    let mut n = t.clone();
                    n.push(x.clone());
                    n
                })
            })
            .collect();
    }
    out
}

/// Binder standing for the value held at an anchor field.
const ANCHOR: &str = "a";

/// `x->f` cells holding a logical value, keyed by (program var, field),
/// counted once per assertion.
fn anchors(assertions: &[Assertion]) -> BTreeMap<(String, String), usize> {
    let mut out = BTreeMap::new();
    for a in assertions {
        let mut seen = BTreeSet::new();
        for d in &a.disjuncts {
            for s in &d.spatial {
                if let SpatialAtom::PointsTo { addr: Term::FieldAddr(b, f), value: Term::LogicVar(_) } = s {
                    if let Term::ProgVar(v) = b.as_ref() {
                        if seen.insert((v.clone(), f.clone())) {
                            *out.entry((v.clone(), f.clone())).or_insert(0) += 1;
                        }
                    }
                }
            }
        }
    }
    out
}

/// `exists a, x->f == a * pred(args)` with `a` replacing the first slot of
/// each position in turn.
fn anchored(pred: &str, args: &[Term], (v, f): &(String, String)) -> Vec<SymbolicHeap> {
    (0..args.len())
        .map(|i| {
            let mut args = args.to_vec();
            args[i] = Term::logic(ANCHOR);
            SymbolicHeap::new(
                vec![ANCHOR.into()],
                vec![],
                vec![SpatialAtom::points_to(Term::field(Term::var(v.clone()), f.clone()), Term::logic(ANCHOR)), SpatialAtom::pred(pred, args)],
            )
        })
        .collect()
}

impl HeuristicBackend {
    pub fn new(reg: PredicateRegistry) -> Result<Self, LemmaError> {
        let lemmas = derive_all(&reg)?;
        Ok(Self::with_lemmas(reg, lemmas, HeuristicConfig::default()))
    }

    pub fn with_lemmas(reg: PredicateRegistry, lemmas: Vec<Lemma>, cfg: HeuristicConfig) -> Self {
        HeuristicBackend { reg, lemmas, cfg }
    }

    fn prover(&self) -> Prover<'_> {
        Prover::with_lemmas(&self.reg, self.lemmas.clone(), self.cfg.prover)
    }

    /// `frac * (1 + most atoms consumed) / (1 + most program variables
    /// lost by the rewrite)`, or `None` when the candidate never applies or
    /// holds of the empty heap.
    fn score(&self, prover: &Prover<'_>, cand: &SymbolicHeap, assertions: &[Assertion]) -> Option<f64> {
        if prover.entails(&Assertion::single(SymbolicHeap::emp()), &Assertion::single(cand.clone())) {
            return None;
        }
        let (mut succ, mut consumed, mut dropped) = (0usize, 0usize, 0usize);
        for a in assertions {
            if let Some(fr) = prover.frame_check(a, cand) {
                succ += 1;
                consumed = consumed.max(fr.matched.len());
                let before = a.prog_vars();
                let after = fr.rewritten.prog_vars();
                dropped = dropped.max(before.difference(&after).count());
            }
        }
        if succ == 0 {
            return None;
        }
        let frac = succ as f64 / assertions.len() as f64;
        Some(frac * (1 + consumed) as f64 / (1 + dropped) as f64)
    }

    pub fn candidates(&self, req: &InferenceRequest) -> Vec<Candidate> {
        let assertions: Vec<Assertion> = req.assertions.iter().map(canonicalize).collect();
        let n = assertions.len();
        if n == 0 {
            return vec![];
        }
        let need = |count: usize| count as f64 >= self.cfg.tau * n as f64 - 1e-9;
        let mut pool: BTreeMap<String, (SymbolicHeap, Option<f64>)> = BTreeMap::new();

        // literal atoms, counted once per assertion
        let mut pure_count: BTreeMap<String, (crate::assertion::PureAtom, usize)> = BTreeMap::new();
        let mut spatial_count: BTreeMap<String, (SpatialAtom, usize)> = BTreeMap::new();
        for a in &assertions {
            let mut seen_p = BTreeSet::new();
            let mut seen_s = BTreeSet::new();
            for d in &a.disjuncts {
                for p in &d.pure {
                    let h = SymbolicHeap::new(vec![], vec![p.clone()], vec![SpatialAtom::Emp]);
                    if !has_logic(&h) && seen_p.insert(p.to_string()) {
                        pure_count.entry(p.to_string()).or_insert((p.clone(), 0)).1 += 1;
                    }
                }
                for s in &d.spatial {
                    if matches!(s, SpatialAtom::Emp | SpatialAtom::True) || has_logic(&atom_heap(s)) {
                        continue;
                    }
                    if seen_s.insert(s.to_string()) {
                        spatial_count.entry(s.to_string()).or_insert((s.clone(), 0)).1 += 1;
                    }
                }
            }
        }
        for (p, c) in pure_count.values() {
            if need(*c) {
                let h = SymbolicHeap::new(vec![], vec![p.clone()], vec![SpatialAtom::Emp]);
                pool.insert(canonicalize_heap(&h).to_string(), (h, Some(*c as f64 / n as f64)));
            }
        }
        let mut common = vec![];
        for (s, c) in spatial_count.values() {
            if need(*c) {
                let h = atom_heap(s);
                pool.insert(canonicalize_heap(&h).to_string(), (h, None));
            }
            if *c == n {
                common.push(s.clone());
            }
        }
        if common.len() >= 2 {
            let h = SymbolicHeap::new(vec![], vec![], common);
            pool.insert(canonicalize_heap(&h).to_string(), (h, None));
        }

        // predicate instances over the variable grid
        let vars: Vec<Term> = assertions
            .iter()
            .flat_map(|a| a.prog_vars())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(Term::var)
            .collect();
        let anchor_keys: Vec<(String, String)> =
            anchors(&assertions).into_iter().filter(|(_, c)| need(*c)).map(|(k, _)| k).collect();
        if !vars.is_empty() {
            for def in self.reg.defs() {
                if def.arity() == 0 || def.arity() > self.cfg.max_grid_arity {
                    continue;
                }
                for args in grid(&vars, def.arity()) {
                    for anchor in &anchor_keys {
                        for h in anchored(&def.name, &args, anchor) {
                            pool.entry(canonicalize_heap(&h).to_string()).or_insert((h, None));
                        }
                    }
                    let h = atom_heap(&SpatialAtom::pred(def.name.clone(), args));
                    pool.entry(canonicalize_heap(&h).to_string()).or_insert((h, None));
                }
            }
        }

        let prover = self.prover();
        let entries: Vec<(String, SymbolicHeap, Option<f64>)> =
            pool.into_iter().filter(|(_, (h, _))| !req.is_banned(h)).map(|(k, (h, s))| (k, h, s)).collect();
        let mut scored: Vec<(String, SymbolicHeap, f64)> = entries
            .into_par_iter()
            .filter_map(|(k, h, fixed)| {
                let s = match fixed {
                    Some(s) => s,
                    None => self.score(&prover, &h, &assertions)?,
                };
                Some((k, h, s))
            })
            .collect();
        scored.sort_by(|a, b| b.2.total_cmp(&a.2).then_with(|| a.0.cmp(&b.0)));
        let mut out: Vec<Candidate> =
            scored.into_iter().map(|(_, h, score)| Candidate { conjunct: canonicalize_heap(&h), score }).collect();
        if req.max_candidates > 0 {
            out.truncate(req.max_candidates);
        }
        out
    }
}

impl Backend for HeuristicBackend {
    fn name(&self) -> String {
        "heuristic".into()
    }

    fn infer(&self, req: &InferenceRequest) -> Result<Vec<Candidate>, InferenceError> {
        Ok(self.candidates(req))
    }
}
