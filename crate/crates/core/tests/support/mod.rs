//! Random generators and brute-force references shared by the soundness
//! tests and the acceptance target.

#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use sepinv::assertion::{canonicalize_heap, Assertion, PredicateRegistry, SymbolicHeap};
use sepinv::entailment::Prover;
use sepinv::frontend::ast::{Func, Stmt};
use sepinv::frontend::{inline_calls, parse_assertion, split_program, FrontendError};
use sepinv::oracle::{concrete_exec, models, satisfies, Fault, OracleConfig, DEFAULT_ITERATION_CAP};
use sepinv::symexec::SymExec;

pub fn list_registry() -> PredicateRegistry {
    sepinv::corpus::file("list").unwrap().parse().unwrap().0
}

// ---- random list assertions ----------------------------------------------

const VARS: [&str; 3] = ["x", "y", "z"];

#[derive(Clone, Debug)]
enum Atom {
    Eq(String, String),
    Neq(String, String),
    Cell(String, String),
    Seg(String, String),
    List(String),
}

impl Atom {
    fn text(&self) -> String {
        match self {
            Atom::Eq(a, b) => format!("{a} == {b}"),
            Atom::Neq(a, b) => format!("{a} != {b}"),
            Atom::Cell(a, b) => format!("{a}->tail == {b}"),
            Atom::Seg(a, b) => format!("lseg({a}, {b})"),
            Atom::List(a) => format!("listrep({a})"),
        }
    }

    fn is_pure(&self) -> bool {
        matches!(self, Atom::Eq(..) | Atom::Neq(..))
    }
}

#[derive(Clone, Debug)]
struct Shape {
    binder: bool,
    atoms: Vec<Atom>,
}

impl Shape {
    fn text(&self) -> String {
        let pure: Vec<String> = self.atoms.iter().filter(|a| a.is_pure()).map(Atom::text).collect();
        let spatial: Vec<String> = self.atoms.iter().filter(|a| !a.is_pure()).map(Atom::text).collect();
        let mut s = String::new();
        if self.binder && self.atoms.iter().any(|a| a.text().contains('a')) {
            s.push_str("exists a, ");
        }
        for p in &pure {
            s.push_str(p);
            s.push_str(" && ");
        }
        if spatial.is_empty() {
            s.push_str("emp");
        } else {
            s.push_str(&spatial.join(" * "));
        }
        s
    }
}

fn var(rng: &mut impl Rng) -> String {
    VARS.choose(rng).unwrap().to_string()
}

fn value(rng: &mut impl Rng, binder: bool) -> String {
    match rng.gen_range(0..10) {
        0..=1 => "0".into(),
        2 if binder => "a".into(),
        _ => var(rng),
    }
}

fn random_shape(rng: &mut impl Rng) -> Shape {
    let binder = rng.gen_bool(0.3);
    let mut atoms = vec![];
    for _ in 0..rng.gen_range(0..=2) {
        let (a, b) = (var(rng), value(rng, binder));
        atoms.push(if rng.gen_bool(0.5) { Atom::Eq(a, b) } else { Atom::Neq(a, b) });
    }
    for _ in 0..rng.gen_range(0..=3) {
        let root = if binder && rng.gen_bool(0.2) { "a".to_string() } else { var(rng) };
        atoms.push(match rng.gen_range(0..3) {
            0 => Atom::Cell(root, value(rng, binder)),
            1 => Atom::Seg(root, value(rng, binder)),
            _ => Atom::List(root),
        });
    }
    Shape { binder, atoms }
}

/// Mostly weakenings of `s`, some of them unsound, plus unrelated shapes.
fn mutate(rng: &mut impl Rng, s: &Shape) -> Shape {
    if rng.gen_bool(0.2) {
        return random_shape(rng);
    }
    let mut atoms = vec![];
    for a in &s.atoms {
        let a = a.clone();
        match a {
            _ if a.is_pure() => {
                if rng.gen_bool(0.5) {
                    atoms.push(a);
                }
            }
            Atom::Cell(x, y) => match rng.gen_range(0..10) {
                0..=3 => atoms.push(Atom::Seg(x, y)),
                4 => {}
                5 => atoms.push(Atom::Cell(y, x)),
                _ => atoms.push(Atom::Cell(x, y)),
            },
            Atom::Seg(x, y) if y == "0" && rng.gen_bool(0.5) => atoms.push(Atom::List(x)),
            Atom::List(x) if rng.gen_bool(0.3) => atoms.push(Atom::Seg(x, "0".into())),
            _ if rng.gen_bool(0.1) => {}
            _ => atoms.push(a),
        }
    }
    // Joining two segments end to end is unsound under aliasing.
    if rng.gen_bool(0.2) {
        let segs: Vec<(usize, String, String)> = atoms
            .iter()
            .enumerate()
            .filter_map(|(i, a)| match a {
                Atom::Seg(x, y) | Atom::Cell(x, y) => Some((i, x.clone(), y.clone())),
                _ => None,
            })
            .collect();
        if let Some((i, j, x, z)) = segs
            .iter()
            .flat_map(|(i, x, y)| segs.iter().filter(move |(j, y2, _)| j != i && y2 == y).map(move |(j, _, z)| (*i, *j, x.clone(), z.clone())))
            .next()
        {
            let (hi, lo) = (i.max(j), i.min(j));
            atoms.remove(hi);
            atoms.remove(lo);
            atoms.push(Atom::Seg(x, z));
        }
    }
    if rng.gen_bool(0.1) {
        atoms.push(Atom::Eq(var(rng), value(rng, false)));
    }
    Shape { binder: s.binder, atoms }
}

/// A source/target pair over `x, y, z`, `0` and at most one binder.
pub fn random_pair(rng: &mut impl Rng) -> (String, String) {
    let s = random_shape(rng);
    let t = mutate(rng, &s);
    (s.text(), t.text())
}

/// Every assertion the corpus names: annotations, predicate bodies, and the
/// loop-head states of each function's first loop.
pub fn corpus_assertions(steps: usize) -> Vec<(PredicateRegistry, String, Assertion)> {
    let mut out = vec![];
    for f in sepinv::corpus::FILES {
        let (reg, funcs) = f.parse().unwrap();
        for d in reg.defs() {
            out.push((reg.clone(), format!("{}::{}", f.name, d.name), Assertion::new(d.branches.clone())));
        }
        for func in &funcs {
            let tag = format!("{}::{}", f.name, func.name);
            out.push((reg.clone(), tag.clone(), func.requires.clone()));
            out.push((reg.clone(), tag.clone(), func.ensures.clone()));
            for inv in &func.invariants {
                out.push((reg.clone(), tag.clone(), inv.clone()));
            }
            if let Ok(states) = sepinv::invgen::unrolled_states(&reg, func, &funcs, steps, Default::default()) {
                out.extend(states.into_iter().map(|s| (reg.clone(), tag.clone(), s)));
            }
        }
    }
    out
}

// ---- loop-free fragments -------------------------------------------------

pub struct Fragment {
    pub func: String,
    pub pre: Assertion,
    pub body: Stmt,
}

/// Loop-free pieces of every corpus function, each paired with symbolic
/// states that reach it: the precondition, loop heads unrolled `steps`
/// times under the loop condition, and exits under its negation. Inner
/// loops are reached through the first outer iteration only.
pub fn corpus_fragments(steps: usize) -> Vec<(PredicateRegistry, Fragment)> {
    let mut out = vec![];
    for f in sepinv::corpus::FILES {
        let (reg, funcs) = f.parse().unwrap();
        for func in &funcs {
            let mut frags = vec![];
            fragments(&reg, func, &funcs, steps, &mut frags);
            out.extend(frags.into_iter().map(|fr| (reg.clone(), fr)));
        }
    }
    out
}

fn fragments(reg: &PredicateRegistry, func: &Func, funcs: &[Func], steps: usize, out: &mut Vec<Fragment>) {
    let body = inline_calls(&func.body, funcs).unwrap();
    let x = SymExec::new(reg);
    let name = format!("{}", func.name);
    walk(&x, &name, vec![func.requires.clone()], &body, steps, out);
}

fn walk(x: &SymExec, name: &str, pres: Vec<Assertion>, s: &Stmt, steps: usize, out: &mut Vec<Fragment>) {
    let sp = match split_program(s) {
        Err(FrontendError::NoLoop) => {
            out.extend(pres.into_iter().map(|pre| Fragment { func: name.into(), pre, body: s.clone() }));
            return;
        }
        Err(e) => panic!("{name}: {e}"),
        Ok(sp) => sp,
    };
    walk(x, name, pres.clone(), &sp.before, steps, out);
    let mut heads: Vec<Assertion> = pres.iter().filter_map(|p| x.exec(p, &sp.before).ok()).collect();
    if !sp.body.has_loop() {
        let mut frontier = heads.clone();
        for _ in 0..steps {
            frontier = frontier
                .iter()
                .filter_map(|h| x.assume_true(h, &sp.cond).ok())
                .filter_map(|h| x.exec(&h, &sp.body).ok())
                .collect();
            heads.extend(frontier.iter().cloned());
        }
    }
    let entered: Vec<Assertion> = heads.iter().filter_map(|h| x.assume_true(h, &sp.cond).ok()).filter(|a| !a.is_false()).collect();
    let exited: Vec<Assertion> = heads.iter().filter_map(|h| x.assume_false(h, &sp.cond).ok()).filter(|a| !a.is_false()).collect();
    walk(x, name, entered, &sp.body, steps, out);
    walk(x, name, exited, &sp.after, steps, out);
}

#[derive(Debug, Default)]
pub struct ExecCheck {
    pub models: usize,
    /// Concrete runs the interpreter could not finish (unset variable).
    pub skipped: usize,
    /// Fragments the symbolic executor refused.
    pub refused: bool,
    pub violations: Vec<String>,
}

/// Runs `frag` concretely from every model of its precondition and checks
/// the result against the symbolic post-state.
pub fn check_fragment(reg: &PredicateRegistry, frag: &Fragment, max_addrs: i64) -> ExecCheck {
    let mut out = ExecCheck::default();
    let post = match SymExec::new(reg).exec(&frag.pre, &frag.body) {
        Ok(p) => p,
        Err(_) => {
            out.refused = true;
            return out;
        }
    };
    let mut vars: BTreeSet<String> = frag.pre.prog_vars();
    vars.extend(post.prog_vars());
    let ms = models(reg, &frag.pre, &vars, OracleConfig::with_addrs(max_addrs)).expect("model enumeration within bounds");
    for m in ms {
        out.models += 1;
        match concrete_exec(&m, &frag.body, DEFAULT_ITERATION_CAP) {
            Ok(next) if satisfies(reg, &next, &post) => {}
            Ok(next) => out.violations.push(format!("{}: {:?} -> {:?} not in {post}", frag.func, m, next)),
            Err(Fault::Unsupported { .. }) => out.skipped += 1,
            Err(e) => out.violations.push(format!("{}: {:?} faults ({e}) but exec gave {post}", frag.func, m)),
        }
    }
    out
}

// ---- minimum cover -------------------------------------------------------

/// Random list heaps for cover instances.
pub fn random_heaps(rng: &mut impl Rng, reg: &PredicateRegistry, n: usize) -> Vec<SymbolicHeap> {
    let mut out = vec![];
    while out.len() < n {
        let text = random_shape(rng).text();
        let a = parse_assertion(&text, reg).unwrap();
        out.extend(a.disjuncts.into_iter().take(n - out.len()));
    }
    out
}

/// Weakened variants of `items`, the pool a cover is drawn from.
pub fn random_pool(rng: &mut impl Rng, reg: &PredicateRegistry, n: usize) -> Vec<SymbolicHeap> {
    let mut out = vec![];
    while out.len() < n {
        let s = random_shape(rng);
        let text = mutate(rng, &s).text();
        out.extend(parse_assertion(&text, reg).unwrap().disjuncts.into_iter().take(n - out.len()));
    }
    out
}

/// Size of the smallest subset of `pool ∪ items` covering every item, by
/// trying every subset, together with the deduplicated pool it used.
pub fn brute_min_cover(prover: &Prover, items: &[SymbolicHeap], pool: &[SymbolicHeap]) -> (usize, Vec<SymbolicHeap>, Vec<u32>) {
    let mut all: Vec<SymbolicHeap> = vec![];
    for h in pool.iter().chain(items) {
        let c = canonicalize_heap(h);
        if !all.contains(&c) {
            all.push(c);
        }
    }
    assert!(all.len() < 32);
    let masks: Vec<u32> = items
        .iter()
        .map(|i| {
            let ci = canonicalize_heap(i);
            let ai = Assertion::single(i.clone());
            (0..all.len())
                .filter(|&j| all[j] == ci || prover.entails(&ai, &Assertion::single(all[j].clone())))
                .fold(0u32, |m, j| m | (1 << j))
        })
        .collect();
    let best = (0u32..(1 << all.len()))
        .filter(|s| masks.iter().all(|m| m & s != 0))
        .map(|s| s.count_ones() as usize)
        .min()
        .unwrap();
    (best, all, masks)
}

/// Does `picked` cover every item under `masks` over `all`?
pub fn covers(all: &[SymbolicHeap], masks: &[u32], picked: &Assertion) -> bool {
    let mut s = 0u32;
    for h in &picked.disjuncts {
        match all.iter().position(|a| *a == canonicalize_heap(h)) {
            Some(j) => s |= 1 << j,
            None => return false,
        }
    }
    masks.iter().all(|m| m & s != 0)
}
