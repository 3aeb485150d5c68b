//! Loop invariant generation: collect post-states of the first iterations,
//! fold them into candidate disjuncts, pick a minimum cover and check it.

mod crosscheck;
mod live;
mod pick;

use std::collections::BTreeSet;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assertion::{canonicalize, canonicalize_heap, Assertion, PredicateRegistry, PureAtom, SymbolicHeap, Term};
use crate::entailment::{is_refuted, LemmaError, Prover, ProverConfig, PureCtx};
use crate::frontend::ast::{Cond, Func, Stmt};
use crate::frontend::{assigned_vars, inline_calls, split_program, FrontendError};
use crate::inference::{infer, Backend, InferenceRequest};
use crate::symexec::{ExecConfig, ExecError, SymExec};

pub use crosscheck::{oracle_check_func, oracle_check_loop, CrossCheckError, OracleCheck};
pub use live::{live_in, loop_head_live, project, project_heap};
pub use pick::{CoverInstance, EXACT_LIMIT};

/// Minimum covers tried against the checks before an attempt counts as failed.
const PICK_TRIES: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvGenConfig {
    /// Iterations unrolled to collect post-states.
    pub max_num: usize,
    pub max_attempts: usize,
    /// Recursion cap for the fold-and-partition step.
    pub depth_cap: usize,
    /// Enter a nested loop's outer iteration under the inner condition.
    pub paper_literal: bool,
    /// Candidates requested per query; 0 asks for all.
    pub max_candidates: usize,
    pub exec: ExecConfig,
    pub prover: ProverConfig,
}

impl Default for InvGenConfig {
    fn default() -> Self {
        InvGenConfig {
            max_num: 5,
            max_attempts: 8,
            depth_cap: 16,
            paper_literal: false,
            max_candidates: 0,
            exec: ExecConfig::default(),
            prover: ProverConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopTask {
    pub pre: Assertion,
    pub cond: Cond,
    pub body: Stmt,
    pub max_num: usize,
    /// Variables read after the loop exits.
    pub live_out: BTreeSet<String>,
}

impl LoopTask {
    pub fn new(pre: Assertion, cond: Cond, body: Stmt, max_num: usize) -> Self {
        LoopTask { pre, cond, body, max_num, live_out: BTreeSet::new() }
    }
}

/// State threaded through one inference run.
#[derive(Default)]
struct Search {
    /// Every rewritten assertion produced, offered to Pick alongside the result.
    explored: Vec<SymbolicHeap>,
    /// Item sets on the current recursion path, to cut rewrite cycles.
    path: Vec<BTreeSet<SymbolicHeap>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub candidate: String,
    #[serde(skip)]
    pub conjunct: SymbolicHeap,
    pub succ: usize,
    pub fail: usize,
    pub depth: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checks {
    pub pre_entails_inv: bool,
    pub inductive: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub invariant: Assertion,
    pub trace: Vec<TraceStep>,
    pub checks: Checks,
    pub attempts: usize,
    /// Invariants of loops nested in the body, derived under `invariant`.
    pub inner: Vec<InvariantReport>,
}

impl InvariantReport {
    pub fn verified(&self) -> bool {
        self.checks.pre_entails_inv && self.checks.inductive && self.inner.iter().all(|r| r.verified())
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum InvGenError {
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error("LLM inference failed after {attempts} attempt(s): {reason}")]
    InferenceFail { attempts: usize, reason: String, trace: Vec<TraceStep> },
    #[error("no invariant passed both checks after {attempts} attempt(s); last tried `{}`", .last.invariant)]
    ChecksFailed { attempts: usize, last: Box<InvariantReport> },
}

/// Seconds spent per stage.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub symbolic: f64,
    pub infer: f64,
    pub solver: f64,
}

#[derive(Clone, Copy)]
enum Stage {
    Symbolic,
    Infer,
    Solver,
}

/// Result of verifying every loop of one function.
#[derive(Clone, Debug, PartialEq)]
pub struct FuncReport {
    pub name: String,
    pub loops: Vec<InvariantReport>,
    pub error: Option<InvGenError>,
}

impl FuncReport {
    pub fn verified(&self) -> bool {
        self.error.is_none() && self.loops.iter().all(InvariantReport::verified)
    }
}

/// `S0..=Sk` for the first loop of `func`: the state at the loop head, then
/// each state pushed once more through the body. No projection is applied.
pub fn unrolled_states(
    reg: &PredicateRegistry,
    func: &Func,
    funcs: &[Func],
    steps: usize,
    cfg: ExecConfig,
) -> Result<Vec<Assertion>, InvGenError> {
    let body = inline_calls(&func.body, funcs)?;
    let sp = split_program(&body)?;
    let x = SymExec::with_config(reg, cfg);
    let mut seq = vec![canonicalize(&x.exec(&func.requires, &sp.before)?)];
    for i in 0..steps {
        let next = x.exec(&x.assume_true(&seq[i], &sp.cond)?, &sp.body)?;
        seq.push(canonicalize(&next));
    }
    Ok(seq)
}

/// `true` when all assertions share one canonical form.
pub fn similar(items: &[Assertion]) -> bool {
    let mut it = items.iter().map(canonicalize);
    match it.next() {
        None => true,
        Some(first) => it.all(|c| c == first),
    }
}

/// The common canonical form of similar assertions.
pub fn similar_extract(items: &[Assertion]) -> Assertion {
    assert!(!items.is_empty() && similar(items), "similar_extract on dissimilar input");
    canonicalize(&items[0])
}

/// Disjuncts of all assertions, canonical and without repeats, in order of
/// first occurrence.
pub fn flatten(items: &[Assertion]) -> Vec<SymbolicHeap> {
    let mut seen = BTreeSet::new();
    let mut out = vec![];
    for a in items {
        for d in &a.disjuncts {
            let c = canonicalize_heap(d);
            if seen.insert(c.clone()) {
                out.push(c);
            }
        }
    }
    out
}

/// Equalities and non-null facts over variables `body` never assigns that
/// every disjunct of `pre` implies. They hold on every iteration.
pub fn preserved_facts(pre: &Assertion, body: &Stmt) -> Vec<PureAtom> {
    let mut assigned = BTreeSet::new();
    assigned_vars(body, &mut assigned);
    let vars: Vec<Term> = pre.prog_vars().difference(&assigned).cloned().map(Term::var).collect();
    let mut ctxs: Vec<PureCtx> = pre.disjuncts.iter().map(PureCtx::from_heap).collect();
    if ctxs.is_empty() {
        return vec![];
    }
    let mut out = vec![];
    for (i, u) in vars.iter().enumerate() {
        if ctxs.iter_mut().all(|c| c.disequal(u, &Term::null())) {
            out.push(PureAtom::neq(u.clone(), Term::null()));
        }
        for v in &vars[i + 1..] {
            if ctxs.iter_mut().all(|c| c.equal(u, v)) {
                out.push(PureAtom::eq(u.clone(), v.clone()));
            }
        }
    }
    out
}

fn strengthen(inv: &Assertion, facts: &[PureAtom]) -> Assertion {
    let ds = inv
        .disjuncts
        .iter()
        .map(|d| {
            let mut d = d.clone();
            d.pure.extend(facts.iter().cloned());
            d
        })
        .filter(|d| !is_refuted(d))
        .collect::<Vec<_>>();
    Assertion::new(flatten(&[Assertion::new(ds)]))
}

pub struct Engine<'a> {
    reg: &'a PredicateRegistry,
    prover: Prover<'a>,
    exec: SymExec<'a>,
    backend: &'a dyn Backend,
    pub cfg: InvGenConfig,
    timings: Mutex<Timings>,
}

/// Failure inside the fold-and-partition recursion.
struct Fail {
    reason: String,
    /// The backend itself errored, so a plain retry may help.
    backend: bool,
}

/// Items split by one candidate.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    /// Rewritten disjuncts of the matched items.
    pub succ: Vec<SymbolicHeap>,
    pub matched: usize,
    pub fail: Vec<SymbolicHeap>,
}

fn dedup(v: Vec<SymbolicHeap>) -> Vec<SymbolicHeap> {
    let mut seen = BTreeSet::new();
    v.into_iter().map(|h| canonicalize_heap(&h)).filter(|h| seen.insert(h.clone())).collect()
}

impl<'a> Engine<'a> {
    pub fn new(reg: &'a PredicateRegistry, backend: &'a dyn Backend, cfg: InvGenConfig) -> Result<Self, LemmaError> {
        let lemmas = crate::entailment::derive_all(reg)?;
        Ok(Engine {
            reg,
            prover: Prover::with_lemmas(reg, lemmas, cfg.prover),
            exec: SymExec::with_config(reg, cfg.exec),
            backend,
            cfg,
            timings: Mutex::new(Timings::default()),
        })
    }

    pub fn registry(&self) -> &PredicateRegistry {
        self.reg
    }

    pub fn prover(&self) -> &Prover<'a> {
        &self.prover
    }

    pub fn timings(&self) -> Timings {
        *self.timings.lock().unwrap()
    }

    pub fn reset_timings(&self) {
        *self.timings.lock().unwrap() = Timings::default();
    }

    fn timed<T>(&self, stage: Stage, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        let d: Duration = start.elapsed();
        let mut t = self.timings.lock().unwrap();
        let slot = match stage {
            Stage::Symbolic => &mut t.symbolic,
            Stage::Infer => &mut t.infer,
            Stage::Solver => &mut t.solver,
        };
        *slot += d.as_secs_f64();
        out
    }

    fn entails(&self, a: &Assertion, b: &Assertion) -> bool {
        self.timed(Stage::Solver, || self.prover.entails(a, b))
    }

    pub fn partition(&self, items: &[SymbolicHeap], cand: &SymbolicHeap) -> Partition {
        let mut p = Partition { succ: vec![], matched: 0, fail: vec![] };
        for it in items {
            let fr = self.timed(Stage::Solver, || self.prover.frame_check(&Assertion::single(it.clone()), cand));
            match fr {
                Some(fr) => {
                    p.matched += 1;
                    p.succ.extend(fr.rewritten.disjuncts.iter().map(canonicalize_heap));
                }
                None => p.fail.push(it.clone()),
            }
        }
        p
    }

    /// Folds `items` into a disjunction of candidate conjuncts. Each step
    /// takes the first candidate that splits or rewrites the items.
    pub fn infer_invs(
        &self,
        items: &[Assertion],
        banned: &[SymbolicHeap],
        trace: &mut Vec<TraceStep>,
    ) -> Result<Assertion, String> {
        self.infer_rec(flatten(items), banned, trace, 0, &mut Search::default()).map(Assertion::new).map_err(|f| f.reason)
    }

    fn infer_rec(
        &self,
        items: Vec<SymbolicHeap>,
        banned: &[SymbolicHeap],
        trace: &mut Vec<TraceStep>,
        depth: usize,
        search: &mut Search,
    ) -> Result<Vec<SymbolicHeap>, Fail> {
        let items = dedup(items);
        if items.len() <= 1 {
            return Ok(items);
        }
        let key: BTreeSet<SymbolicHeap> = items.iter().cloned().collect();
        search.path.push(key);
        let r = self.infer_step(items, banned, trace, depth, search);
        search.path.pop();
        r
    }

    /// One fold-and-partition step.
    fn infer_step(
        &self,
        items: Vec<SymbolicHeap>,
        banned: &[SymbolicHeap],
        trace: &mut Vec<TraceStep>,
        depth: usize,
        search: &mut Search,
    ) -> Result<Vec<SymbolicHeap>, Fail> {
        if let Some(j) = self.pure_join(&items, &items) {
            log::debug!("depth {depth}: joined {} assertions as `{j}`", items.len());
            search.explored.push(j.clone());
            return Ok(vec![j]);
        }
        if depth >= self.cfg.depth_cap {
            return Err(Fail { reason: format!("recursion depth {depth} reached"), backend: false });
        }
        let req = InferenceRequest::new(
            items.iter().cloned().map(Assertion::single).collect(),
            banned.to_vec(),
            self.cfg.max_candidates,
        );
        let cands = self
            .timed(Stage::Infer, || infer(self.backend, &req))
            .map_err(|e| Fail { reason: e.to_string(), backend: true })?;
        let before: BTreeSet<&SymbolicHeap> = items.iter().collect();
        for c in cands {
            let p = self.partition(&items, &c.conjunct);
            let succ: BTreeSet<SymbolicHeap> = p.succ.iter().cloned().collect();
            let changed = succ.iter().collect::<BTreeSet<_>>() != before;
            if p.matched == 0 || (p.fail.is_empty() && !changed) || search.path.contains(&succ) {
                continue;
            }
            log::debug!("depth {depth}: `{}` folds {} of {}", c.conjunct, p.matched, items.len());
            trace.push(TraceStep {
                candidate: canonicalize_heap(&c.conjunct).to_string(),
                conjunct: canonicalize_heap(&c.conjunct),
                succ: p.matched,
                fail: p.fail.len(),
                depth,
            });
            search.explored.extend(p.succ.iter().cloned());
            if let Some(j) = self.pure_join(&items, &dedup(p.succ.clone())) {
                log::debug!("depth {depth}: every assertion entails `{j}`");
                search.explored.push(j.clone());
                return Ok(vec![j]);
            }
            let mut out = self.infer_rec(p.succ, banned, trace, depth + 1, search)?;
            out.extend(self.infer_rec(p.fail, banned, trace, depth + 1, search)?);
            return Ok(dedup(out));
        }
        Err(Fail { reason: format!("no candidate applies to {} distinct assertions", items.len()), backend: false })
    }

    /// Some base with only those of its pure atoms every item entails,
    /// provided every item entails the result and no program variable is
    /// lost.
    fn pure_join(&self, items: &[SymbolicHeap], bases: &[SymbolicHeap]) -> Option<SymbolicHeap> {
        let vars: BTreeSet<String> = items.iter().flat_map(|i| i.prog_vars()).collect();
        let all = |h: &SymbolicHeap| {
            let h = Assertion::single(h.clone());
            items.iter().all(|i| self.entails(&Assertion::single(i.clone()), &h))
        };
        bases.iter().find_map(|base| {
            let with = |pure: Vec<PureAtom>| {
                canonicalize_heap(&SymbolicHeap::new(base.binders.clone(), pure, base.spatial.clone()))
            };
            if base.prog_vars() != vars || !all(&with(vec![])) {
                return None;
            }
            let kept = base.pure.iter().filter(|p| all(&with(vec![(*p).clone()]))).cloned().collect();
            let j = with(kept);
            (j.prog_vars() == vars && all(&j)).then_some(j)
        })
    }

    /// Minimum set of disjuncts from `invs` and `items` covering every item.
    pub fn pick_invs(&self, items: &[Assertion], invs: &Assertion) -> Assertion {
        self.pick_from(&flatten(items), flatten(&[invs.clone()]))
    }

    /// Minimum cover of `items` drawn from `pool` and the items themselves.
    fn pick_from(&self, items: &[SymbolicHeap], pool: Vec<SymbolicHeap>) -> Assertion {
        self.picks_from(items, pool, 1).remove(0)
    }

    /// Up to `limit` minimum covers, best first.
    fn picks_from(&self, items: &[SymbolicHeap], mut pool: Vec<SymbolicHeap>, limit: usize) -> Vec<Assertion> {
        let items = items.to_vec();
        pool.extend(items.iter().cloned());
        let mut pool = dedup(pool);
        pool.sort_by_cached_key(|h| h.to_string());
        let inst = self.cover_instance(&items, &pool);
        let covers = inst.min_covers(limit);
        assert!(!covers.is_empty(), "every item covers itself");
        covers
            .into_iter()
            .map(|c| Assertion::new(c.into_iter().map(|j| pool[j].clone()).collect()))
            .collect()
    }

    pub fn cover_instance(&self, items: &[SymbolicHeap], pool: &[SymbolicHeap]) -> CoverInstance {
        let entail_sets = items
            .iter()
            .map(|a| {
                (0..pool.len())
                    .filter(|&j| {
                        a == &pool[j]
                            || self.entails(&Assertion::single(a.clone()), &Assertion::single(pool[j].clone()))
                    })
                    .collect()
            })
            .collect();
        CoverInstance { pool: pool.len(), entail_sets }
    }
}

impl<'a> Engine<'a> {
    fn exec(&self, pre: &Assertion, s: &Stmt) -> Result<Assertion, ExecError> {
        self.timed(Stage::Symbolic, || self.exec.exec(pre, s))
    }

    /// Condition assumed when entering an iteration while collecting states.
    fn entry_cond(&self, task: &LoopTask) -> Cond {
        if self.cfg.paper_literal && task.body.has_loop() {
            if let Ok(sp) = split_program(&task.body) {
                return sp.cond;
            }
        }
        task.cond.clone()
    }

    /// Post-state of `s` from `pre`, solving each top-level loop in turn.
    /// Returns one report per solved loop.
    pub fn post_through(
        &self,
        pre: &Assertion,
        s: &Stmt,
        live_out: &BTreeSet<String>,
    ) -> Result<(Assertion, Vec<InvariantReport>), InvGenError> {
        let sp = match split_program(s) {
            Ok(sp) => sp,
            Err(FrontendError::NoLoop) => return Ok((self.exec(pre, s)?, vec![])),
            Err(e) => return Err(e.into()),
        };
        let after_live = live_in(&sp.after, live_out);
        let p1 = self.exec(pre, &sp.before)?;
        let task = LoopTask { pre: p1, cond: sp.cond.clone(), body: sp.body.clone(), max_num: self.cfg.max_num, live_out: after_live };
        let rep = self.loop_inv_gen(&task)?;
        let p2 = self.timed(Stage::Symbolic, || self.exec.assume_false(&rep.invariant, &sp.cond))?;
        let (p3, mut rest) = self.post_through(&p2, &sp.after, live_out)?;
        rest.insert(0, rep);
        Ok((p3, rest))
    }

    /// States reached after `0..=max_num` iterations, each the previous one
    /// pushed once more through the body.
    pub fn collect_states(&self, task: &LoopTask) -> Result<Vec<Assertion>, InvGenError> {
        let head_live = loop_head_live(&task.cond, &task.body, &task.live_out);
        let entry = self.entry_cond(task);
        let mut seq = vec![task.pre.clone()];
        for i in 0..task.max_num {
            let entered = self.timed(Stage::Symbolic, || self.exec.assume_true(&seq[i], &entry))?;
            let (next, _) = self.post_through(&entered, &task.body, &head_live)?;
            seq.push(next);
        }
        Ok(seq)
    }

    /// Invariant for one loop, nested loops in its body included. Each
    /// failed attempt bans the first candidate it used.
    pub fn loop_inv_gen(&self, task: &LoopTask) -> Result<InvariantReport, InvGenError> {
        assert!(task.max_num >= 1, "max_num must be positive");
        let head_live = loop_head_live(&task.cond, &task.body, &task.live_out);
        let mut keep = head_live.clone();
        keep.extend(task.pre.prog_vars());
        let seq = self.collect_states(task)?;
        let items = flatten(&seq);
        let facts = preserved_facts(&task.pre, &task.body);
        let mut banned: Vec<SymbolicHeap> = vec![];
        let mut last: Option<InvariantReport> = None;
        let mut last_reason = String::new();
        let mut made = 0;
        for attempt in 1..=self.cfg.max_attempts.max(1) {
            made = attempt;
            let mut trace = vec![];
            let mut search = Search::default();
            let mut invs = match self.infer_rec(items.clone(), &banned, &mut trace, 0, &mut search) {
                Ok(v) => v,
                Err(f) => {
                    log::info!("attempt {attempt}: {}", f.reason);
                    last_reason = f.reason;
                    match trace.first() {
                        Some(t) => banned.push(t.conjunct.clone()),
                        None if f.backend => {}
                        None => return Err(InvGenError::InferenceFail { attempts: attempt, reason: last_reason, trace }),
                    }
                    continue;
                }
            };
            invs.extend(search.explored);
            let mut report = None;
            for picked in self.picks_from(&items, invs, PICK_TRIES) {
                let inv = strengthen(&project(&picked, &keep), &facts);
                let r = self.check(task, inv, &head_live, &trace, attempt);
                let done = r.verified();
                report = Some(r);
                if done {
                    break;
                }
            }
            let report = report.expect("at least one cover");
            if report.verified() {
                return Ok(report);
            }
            log::info!("attempt {attempt}: `{}` failed {:?}", report.invariant, report.checks);
            let first = report.trace.first().map(|t| t.conjunct.clone());
            last = Some(report);
            match first {
                Some(c) => banned.push(c),
                None => break,
            }
        }
        match last {
            Some(r) => Err(InvGenError::ChecksFailed { attempts: made, last: Box::new(r) }),
            None => Err(InvGenError::InferenceFail { attempts: made, reason: last_reason, trace: vec![] }),
        }
    }

    fn check(
        &self,
        task: &LoopTask,
        inv: Assertion,
        head_live: &BTreeSet<String>,
        trace: &[TraceStep],
        attempt: usize,
    ) -> InvariantReport {
        let pre_ok = self.entails(&task.pre, &inv);
        let (inductive, inner) = match self.step(task, &inv, head_live) {
            Ok((post, inner)) => (self.entails(&post, &inv), inner),
            Err(e) => {
                log::info!("attempt {attempt}: stepping `{inv}` failed: {e}");
                (false, vec![])
            }
        };
        InvariantReport {
            invariant: inv,
            trace: trace.to_vec(),
            checks: Checks { pre_entails_inv: pre_ok, inductive },
            attempts: attempt,
            inner,
        }
    }

    /// One iteration from `inv` under the loop condition.
    fn step(
        &self,
        task: &LoopTask,
        inv: &Assertion,
        head_live: &BTreeSet<String>,
    ) -> Result<(Assertion, Vec<InvariantReport>), InvGenError> {
        let entered = self.timed(Stage::Symbolic, || self.exec.assume_true(inv, &task.cond))?;
        self.post_through(&entered, &task.body, head_live)
    }

    /// Solves every loop of `func` after inlining calls from `funcs`.
    pub fn verify_function(&self, func: &Func, funcs: &[Func]) -> FuncReport {
        let mut live_out = func.ensures.prog_vars();
        live_out.extend(func.params.iter().cloned());
        let run = || -> Result<Vec<InvariantReport>, InvGenError> {
            let body = inline_calls(&func.body, funcs)?;
            Ok(self.post_through(&func.requires, &body, &live_out)?.1)
        };
        match run() {
            Ok(loops) => FuncReport { name: func.name.clone(), loops, error: None },
            Err(e) => FuncReport { name: func.name.clone(), loops: vec![], error: Some(e) },
        }
    }
}

#[cfg(test)]
mod tests;
