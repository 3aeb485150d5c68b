//! Synthetic training data: predicates are split into their unfoldings
//! (gen0), decorated with noise atoms (gen1), mixed with `*` and `||`
//! (gen2), and emitted as JSONL samples labelled with the original conjunct.

mod noise;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::collections::HashMap;
use std::io::{self, Write};
use std::sync::{Arc, Mutex};

use rand::seq::index::sample as sample_indices;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assertion::subst::apply_free;
use crate::assertion::{
    canonicalize_heap, Assertion, PredicateRegistry, PureOp, SpatialAtom, Subst, SymbolicHeap, Term,
};
use crate::entailment::is_refuted;

pub use noise::{derive_noise_taboo, taboo_instances, Atom, NoiseSpec, Slot, Template};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    /// Chance that each noise slot is filled.
    pub p_noise: f64,
    pub max_noise: usize,
    /// Inputs per sample, drawn uniformly from `k_min..=k_max`.
    pub k_min: usize,
    pub k_max: usize,
    pub p_star: f64,
    pub p_or: f64,
    pub mix_depth: usize,
    /// Unfold depth for gen0, uniform in `depth_min..=depth_max`.
    pub depth_min: usize,
    pub depth_max: usize,
    /// Hole filling: in-scope variable, else fresh variable, else null.
    pub hole_var: f64,
    pub hole_fresh: f64,
    /// Predicates to sample leaves from; empty means all.
    pub preds: Vec<String>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            p_noise: 0.5,
            max_noise: 3,
            k_min: 3,
            k_max: 6,
            p_star: 0.35,
            p_or: 0.35,
            mix_depth: 2,
            depth_min: 2,
            depth_max: 5,
            hole_var: 0.5,
            hole_fresh: 0.3,
            preds: vec![],
        }
    }
}

/// Replaces each binder pinned by an equality to a non-binder term and used
/// in exactly one other atom; remaining binders are renumbered `__1..`.
pub fn simplify_temps(h: &SymbolicHeap) -> SymbolicHeap {
    let mut h = h.clone();
    loop {
        let uses = |h: &SymbolicHeap, b: &str| {
            h.pure.iter().filter(|p| p.lhs.mentions_logic(b) || p.rhs.mentions_logic(b)).count()
                + h.spatial.iter().filter(|s| s.terms().iter().any(|t| t.mentions_logic(b))).count()
        };
        let is_binder = |t: &Term, h: &SymbolicHeap| matches!(t, Term::LogicVar(v) if h.binders.contains(v));
        let found = h.pure.iter().enumerate().find_map(|(i, p)| {
            if p.op != PureOp::Eq {
                return None;
            }
            [(&p.lhs, &p.rhs), (&p.rhs, &p.lhs)].into_iter().find_map(|(b, t)| match b {
                Term::LogicVar(v) if is_binder(b, &h) && !is_binder(t, &h) && !t.mentions_logic(v) && uses(&h, v) == 2 => {
                    Some((i, v.clone(), t.clone()))
                }
                _ => None,
            })
        });
        let Some((i, v, t)) = found else { break };
        h.pure.remove(i);
        h = apply_free(&h, &Subst::from([(Term::logic(v.clone()), t)]));
        h.binders.retain(|b| *b != v);
    }
    renumber(&h)
}

fn renumber(h: &SymbolicHeap) -> SymbolicHeap {
    let mut map = Subst::new();
    let mut binders = vec![];
    for (i, b) in h.binders.iter().enumerate() {
        let n = format!("__{}", i + 1);
        map.insert(Term::logic(b.clone()), Term::logic(n.clone()));
        binders.push(n);
    }
    let mut out = apply_free(h, &map);
    out.binders = binders;
    out
}

/// Recursion-free unfoldings of `c` using at most `depth` unfolds of
/// branches that contain predicate applications, fewest unfolds first.
pub fn gen0(reg: &PredicateRegistry, c: &SpatialAtom, depth: usize) -> Vec<SymbolicHeap> {
    let mut by_count: Vec<Vec<SymbolicHeap>> = vec![vec![]; depth + 1];
    let mut frontier = vec![(SymbolicHeap::new(vec![], vec![], vec![c.clone()]), 0usize)];
    while !frontier.is_empty() {
        let mut next = vec![];
        for (h, n) in frontier {
            let Some(i) = h.spatial.iter().position(|s| matches!(s, SpatialAtom::PredApp { .. })) else {
                by_count[n].push(h);
                continue;
            };
            let SpatialAtom::PredApp { pred, args } = &h.spatial[i] else { unreachable!() };
            let def = reg.get(pred).expect("registered predicate");
            let mut rest = h.clone();
            rest.spatial.remove(i);
            for b in def.instantiate(args, &h.used_names()) {
                let m = n + usize::from(b.has_predicates());
                if m > depth {
                    continue;
                }
                let u = rest.star(&b);
                if !is_refuted(&u) {
                    next.push((u, m));
                }
            }
        }
        frontier = next;
    }
    let mut seen = BTreeSet::new();
    by_count
        .into_iter()
        .flatten()
        .map(|h| canonicalize_heap(&simplify_temps(&h)))
        .filter(|h| seen.insert(h.clone()))
        .collect()
}

fn fill_hole(rng: &mut impl Rng, scope: &[Term], h: &mut SymbolicHeap, cfg: &SynthConfig) -> Term {
    let r: f64 = rng.gen();
    if r < cfg.hole_var && !scope.is_empty() {
        scope[rng.gen_range(0..scope.len())].clone()
    } else if r < cfg.hole_var + cfg.hole_fresh {
        let b = h.fresh_name("n");
        h.binders.push(b.clone());
        Term::logic(b)
    } else {
        Term::null()
    }
}

fn scope_of(h: &SymbolicHeap) -> Vec<Term> {
    let mut s: Vec<Term> = h.prog_vars().into_iter().map(Term::var).collect();
    s.extend(h.binders.iter().map(|b| Term::logic(b.clone())));
    s
}

/// Adds up to `max_noise` noise atoms to `h`. An atom is skipped when the
/// result is contradictory or, once canonical, shows more taboo instances
/// than the unfolding itself.
pub fn augment(h: &SymbolicHeap, spec: &NoiseSpec, cfg: &SynthConfig, rng: &mut impl Rng) -> SymbolicHeap {
    let mut cur = h.clone();
    if spec.noise_templates.is_empty() {
        return canonicalize_heap(&cur);
    }
    let owned = taboo_instances(&canonicalize_heap(h), &spec.taboo_templates).len();
    for _ in 0..cfg.max_noise {
        if !rng.gen_bool(cfg.p_noise.clamp(0.0, 1.0)) {
            continue;
        }
        let t = &spec.noise_templates[rng.gen_range(0..spec.noise_templates.len())];
        let mut cand = cur.clone();
        let scope = scope_of(&cur);
        let fill: Vec<Term> = (0..t.holes()).map(|_| fill_hole(rng, &scope, &mut cand, cfg)).collect();
        match t.instantiate(&fill) {
            Atom::Pure(p) => cand.pure.push(p),
            Atom::Spatial(s) => {
                cand.spatial.retain(|x| *x != SpatialAtom::Emp);
                cand.spatial.push(s);
            }
        }
        if is_refuted(&cand) {
            continue;
        }
        let canon = canonicalize_heap(&cand);
        if taboo_instances(&canon, &spec.taboo_templates).len() == owned {
            cur = cand;
        }
    }
    canonicalize_heap(&cur)
}

/// Noise specs for every predicate, keyed by name.
pub fn noise_specs(reg: &PredicateRegistry) -> BTreeMap<String, NoiseSpec> {
    reg.defs().map(|d| (d.name.clone(), derive_noise_taboo(reg, d))).collect()
}

fn leaf_spec(reg: &PredicateRegistry, specs: &BTreeMap<String, NoiseSpec>, c: &SpatialAtom) -> NoiseSpec {
    let SpatialAtom::PredApp { pred, args } = c else { panic!("leaf must be a predicate application") };
    specs[pred].for_args(reg.get(pred).expect("registered predicate"), args)
}

/// gen0 followed by noise augmentation of every unfolding.
pub fn gen1(
    reg: &PredicateRegistry,
    specs: &BTreeMap<String, NoiseSpec>,
    c: &SpatialAtom,
    depth: usize,
    cfg: &SynthConfig,
    rng: &mut impl Rng,
) -> Vec<SymbolicHeap> {
    let spec = leaf_spec(reg, specs, c);
    gen0(reg, c, depth).iter().map(|h| augment(h, &spec, cfg, rng)).collect()
}

/// A mix-up formula over predicate applications.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mix {
    Leaf(SpatialAtom),
    Star(Box<Mix>, Box<Mix>),
    Or(Box<Mix>, Box<Mix>),
}

impl fmt::Display for Mix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mix::Leaf(s) => write!(f, "{s}"),
            Mix::Star(a, b) => write!(f, "{a} * {b}"),
            Mix::Or(a, b) => write!(f, "{a} || {b}"),
        }
    }
}

impl Mix {
    pub fn leaves(&self) -> Vec<&SpatialAtom> {
        match self {
            Mix::Leaf(s) => vec![s],
            Mix::Star(a, b) | Mix::Or(a, b) => {
                let mut v = a.leaves();
                v.extend(b.leaves());
                v
            }
        }
    }

    /// The formula as an assertion. `||` under `*` is distributed.
    pub fn to_assertion(&self) -> Assertion {
        match self {
            Mix::Leaf(s) => Assertion::single(SymbolicHeap::new(vec![], vec![], vec![s.clone()])),
            Mix::Star(a, b) => a.to_assertion().star(&b.to_assertion()),
            Mix::Or(a, b) => a.to_assertion().or(b.to_assertion()),
        }
    }

    /// Sorted, distinct predicate names.
    pub fn preds(&self) -> Vec<String> {
        self.leaves().iter().filter_map(|s| s.pred_name().map(str::to_string)).collect::<BTreeSet<_>>().into_iter().collect()
    }
}

/// Structural recursion: leaves are gen1, `*` and `||` zip their operands
/// index-wise (to the shorter length).
pub fn gen2(
    reg: &PredicateRegistry,
    specs: &BTreeMap<String, NoiseSpec>,
    c: &Mix,
    depth: usize,
    cfg: &SynthConfig,
    rng: &mut impl Rng,
) -> Vec<Assertion> {
    match c {
        Mix::Leaf(s) => gen1(reg, specs, s, depth, cfg, rng).into_iter().map(Assertion::single).collect(),
        Mix::Star(a, b) => {
            let (xa, xb) = (gen2(reg, specs, a, depth, cfg, rng), gen2(reg, specs, b, depth, cfg, rng));
            xa.iter().zip(&xb).map(|(x, y)| canon(&x.star(y))).collect()
        }
        Mix::Or(a, b) => {
            let (xa, xb) = (gen2(reg, specs, a, depth, cfg, rng), gen2(reg, specs, b, depth, cfg, rng));
            xa.into_iter().zip(xb).map(|(x, y)| x.or(y)).collect()
        }
    }
}

fn canon(a: &Assertion) -> Assertion {
    Assertion::new(a.disjuncts.iter().map(canonicalize_heap).collect())
}

const NAMES: [&str; 16] = ["x", "y", "z", "u", "v", "w", "p", "q", "r", "s", "t", "a", "b", "c", "d", "e"];

fn var_name(i: usize) -> String {
    if i < NAMES.len() {
        NAMES[i].to_string()
    } else {
        format!("x{}", i - NAMES.len() + 1)
    }
}

/// Random mix-up shape with fresh, pairwise distinct variables. `||` only
/// appears above `*`, so every formula is a disjunction of conjunctions.
pub fn sample_mix(reg: &PredicateRegistry, cfg: &SynthConfig, rng: &mut impl Rng) -> Mix {
    let names: Vec<String> = if cfg.preds.is_empty() {
        reg.names().map(str::to_string).collect()
    } else {
        cfg.preds.clone()
    };
    assert!(!names.is_empty(), "no predicates to sample from");
    let mut next_var = 0;
    fn go(
        reg: &PredicateRegistry,
        names: &[String],
        cfg: &SynthConfig,
        rng: &mut impl Rng,
        level: usize,
        or_ok: bool,
        next_var: &mut usize,
    ) -> Mix {
        if level < cfg.mix_depth {
            let r: f64 = rng.gen();
            if or_ok && r < cfg.p_or {
                let a = go(reg, names, cfg, rng, level + 1, true, next_var);
                let b = go(reg, names, cfg, rng, level + 1, true, next_var);
                return Mix::Or(Box::new(a), Box::new(b));
            }
            if r < cfg.p_or + cfg.p_star {
                let a = go(reg, names, cfg, rng, level + 1, false, next_var);
                let b = go(reg, names, cfg, rng, level + 1, false, next_var);
                return Mix::Star(Box::new(a), Box::new(b));
            }
        }
        let name = &names[rng.gen_range(0..names.len())];
        let arity = reg.arity(name).expect("registered predicate");
        let args = (0..arity)
            .map(|_| {
                *next_var += 1;
                Term::var(var_name(*next_var - 1))
            })
            .collect();
        Mix::Leaf(SpatialAtom::pred(name.clone(), args))
    }
    go(reg, &names, cfg, rng, 0, true, &mut next_var)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSample {
    pub inputs: Vec<Assertion>,
    pub label: Mix,
    pub pred_names: Vec<String>,
    pub seed: u64,
}

/// One JSONL line.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleLine {
    pub inputs: Vec<String>,
    pub label: String,
    pub preds: Vec<String>,
    pub seed: u64,
}

impl TrainingSample {
    pub fn to_line(&self) -> SampleLine {
        SampleLine {
            inputs: self.inputs.iter().map(|a| a.to_string()).collect(),
            label: self.label.to_string(),
            preds: self.pred_names.clone(),
            seed: self.seed,
        }
    }

    /// `label * True`, the formula every input must entail.
    pub fn label_with_frame(&self) -> Assertion {
        let mut a = self.label.to_assertion();
        for d in &mut a.disjuncts {
            d.spatial.push(SpatialAtom::True);
        }
        a
    }
}

/// Seed of sample `index` in a corpus seeded with `seed`.
pub fn sample_seed(seed: u64, index: u64) -> u64 {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(index);
    r.next_u64()
}

/// Sampling state shared across samples: the noise specs and a cache of
/// unfoldings on each predicate's own parameters.
pub struct Synth<'a> {
    pub reg: &'a PredicateRegistry,
    pub specs: BTreeMap<String, NoiseSpec>,
    cache: Mutex<HashMap<(String, usize), Arc<Vec<SymbolicHeap>>>>,
}

impl<'a> Synth<'a> {
    pub fn new(reg: &'a PredicateRegistry) -> Self {
        Synth { reg, specs: noise_specs(reg), cache: Mutex::default() }
    }

    fn cached(&self, pred: &str, depth: usize) -> Arc<Vec<SymbolicHeap>> {
        let key = (pred.to_string(), depth);
        if let Some(b) = self.cache.lock().expect("cache lock").get(&key) {
            return b.clone();
        }
        let def = self.reg.get(pred).expect("registered predicate");
        let params = def.params.iter().map(|p| Term::var(p.clone())).collect();
        let b = Arc::new(gen0(self.reg, &SpatialAtom::pred(pred, params), depth));
        self.cache.lock().expect("cache lock").insert(key, b.clone());
        b
    }

    /// Elements `idx` of `gen0(c, depth)`.
    fn unfoldings_at(&self, c: &SpatialAtom, depth: usize, idx: &[usize]) -> Vec<SymbolicHeap> {
        let SpatialAtom::PredApp { pred, args } = c else { panic!("leaf must be a predicate application") };
        let def = self.reg.get(pred).expect("registered predicate");
        let base = self.cached(pred, depth);
        let map: Subst = def.params.iter().map(|p| Term::var(p.clone())).zip(args.iter().cloned()).collect();
        idx.iter().map(|&i| canonicalize_heap(&apply_free(&base[i], &map))).collect()
    }

    /// `gen0(c, depth)`, computed once per predicate and depth.
    pub fn unfoldings(&self, c: &SpatialAtom, depth: usize) -> Vec<SymbolicHeap> {
        let n = c.pred_name().map_or(0, |p| self.cached(p, depth).len());
        self.unfoldings_at(c, depth, &(0..n).collect::<Vec<_>>())
    }

    /// Number of elements gen2 produces for `c`.
    fn width(&self, c: &Mix, depth: usize) -> usize {
        c.leaves().into_iter().filter_map(|l| l.pred_name()).map(|p| self.cached(p, depth).len()).min().unwrap_or(0)
    }

    /// The elements of gen2 at positions `idx`, augmenting only those.
    fn build(&self, c: &Mix, depth: usize, idx: &[usize], cfg: &SynthConfig, rng: &mut impl Rng) -> Vec<Assertion> {
        match c {
            Mix::Leaf(s) => {
                let spec = leaf_spec(self.reg, &self.specs, s);
                let picked = self.unfoldings_at(s, depth, idx);
                picked.iter().map(|h| Assertion::single(augment(h, &spec, cfg, rng))).collect()
            }
            Mix::Star(a, b) => {
                let (xa, xb) = (self.build(a, depth, idx, cfg, rng), self.build(b, depth, idx, cfg, rng));
                xa.iter().zip(&xb).map(|(x, y)| canon(&x.star(y))).collect()
            }
            Mix::Or(a, b) => {
                let (xa, xb) = (self.build(a, depth, idx, cfg, rng), self.build(b, depth, idx, cfg, rng));
                xa.into_iter().zip(xb).map(|(x, y)| x.or(y)).collect()
            }
        }
    }

    /// One sample, determined by `seed` alone: a random label and K of its
    /// gen2 elements.
    pub fn sample(&self, cfg: &SynthConfig, seed: u64) -> TrainingSample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let label = sample_mix(self.reg, cfg, &mut rng);
        let depth = rng.gen_range(cfg.depth_min..=cfg.depth_max.max(cfg.depth_min));
        let k = rng.gen_range(cfg.k_min.max(1)..=cfg.k_max.max(cfg.k_min.max(1)));
        let n = self.width(&label, depth);
        let mut idx: Vec<usize> = if n <= k { (0..n).collect() } else { sample_indices(&mut rng, n, k).into_vec() };
        idx.sort_unstable();
        let inputs = self.build(&label, depth, &idx, cfg, &mut rng);
        TrainingSample { pred_names: label.preds(), inputs, label, seed }
    }
}

const CHUNK: usize = 4096;

/// Writes `count` samples as JSONL. Samples are generated in parallel but
/// written in index order, so the bytes depend only on the arguments.
pub fn emit_corpus(
    reg: &PredicateRegistry,
    count: usize,
    cfg: &SynthConfig,
    seed: u64,
    out: &mut impl Write,
) -> io::Result<()> {
    let synth = Synth::new(reg);
    let mut start = 0;
    while start < count {
        let end = (start + CHUNK).min(count);
        let lines: Vec<String> = (start..end)
            .into_par_iter()
            .map(|i| {
                let s = synth.sample(cfg, sample_seed(seed, i as u64));
                serde_json::to_string(&s.to_line()).expect("serializable sample")
            })
            .collect();
        for l in lines {
            out.write_all(l.as_bytes())?;
            out.write_all(b"\n")?;
        }
        start = end;
    }
    out.flush()
}

#[cfg(test)]
mod tests;
