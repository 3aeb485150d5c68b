use super::*;
use crate::assertion::PredicateRegistry;
use crate::inference::{Candidate, HeuristicBackend, InferenceError, NullBackend};
use crate::frontend::{parse_assertion, parse_cond, parse_file, parse_stmts};

const DEFS: &str = "
predicate listrep(x) = x == 0 && emp || exists z, x->tail == z * listrep(z);
predicate lseg(x, y) = x == y && emp || exists z, x->tail == z * lseg(z, y);
";

const CHAIN: [&str; 4] = [
    "w == 0 && v == p && listrep(p)",
    "v == t && w == p && w->tail == 0 && listrep(v)",
    "v == t && w->tail == p && p->tail == 0 && listrep(v)",
    "exists __1, v == t && p->tail == 0 && w->tail == __1 && __1->tail == p && listrep(v)",
];

const FOLDED: &str = "v == t && p->tail == 0 && lseg(w, p) * listrep(v)";
const EXPECTED: &str = "p->tail == 0 && lseg(w, p) * listrep(v) || w == 0 && v == p && listrep(p)";
const BODY: &str = "t = v->tail; v->tail = w; w = v; v = t;";

fn reg() -> PredicateRegistry {
    parse_file(DEFS).unwrap().0
}

fn a(r: &PredicateRegistry, s: &str) -> Assertion {
    parse_assertion(s, r).unwrap()
}

fn chain(r: &PredicateRegistry) -> Vec<Assertion> {
    CHAIN.iter().map(|s| a(r, s)).collect()
}

fn reverse_task(r: &PredicateRegistry) -> LoopTask {
    LoopTask::new(a(r, CHAIN[0]), parse_cond("v != 0").unwrap(), parse_stmts(BODY).unwrap(), 5)
}

fn equivalent(e: &Engine, x: &Assertion, y: &Assertion) -> bool {
    e.prover().entails(x, y) && e.prover().entails(y, x)
}

#[test]
fn first_fold_partitions_the_chain() {
    let r = reg();
    let h = HeuristicBackend::new(r.clone()).unwrap();
    let e = Engine::new(&r, &h, InvGenConfig::default()).unwrap();
    let items = flatten(&chain(&r));
    let p = e.partition(&items, &a(&r, "lseg(w, p)").disjuncts[0]);
    let folded = canonicalize_heap(&a(&r, FOLDED).disjuncts[0]);
    assert_eq!(p.matched, 3);
    assert_eq!(p.succ, vec![folded.clone(), folded.clone(), folded]);
    assert_eq!(p.fail, vec![items[0].clone()]);
}

#[test]
fn chain_folds_to_segment_or_start() {
    let r = reg();
    let h = HeuristicBackend::new(r.clone()).unwrap();
    let e = Engine::new(&r, &h, InvGenConfig::default()).unwrap();
    let mut trace = vec![];
    let got = e.infer_invs(&chain(&r), &[], &mut trace).unwrap();
    assert_eq!(trace[0].candidate, "lseg(w,p)");
    assert_eq!((trace[0].succ, trace[0].fail), (3, 1));
    assert_eq!(canonicalize(&got), canonicalize(&a(&r, &format!("{FOLDED} || {}", CHAIN[0]))));
}

#[test]
fn recursion_base_cases() {
    let r = reg();
    let e = Engine::new(&r, &NullBackend, InvGenConfig::default()).unwrap();
    assert!(e.infer_invs(&[], &[], &mut vec![]).unwrap().is_false());
    let one = a(&r, CHAIN[1]);
    assert_eq!(e.infer_invs(&[one.clone()], &[], &mut vec![]).unwrap(), canonicalize(&one));
    assert!(e.infer_invs(&chain(&r), &[], &mut vec![]).is_err());
}

#[test]
fn similarity_is_canonical_equality() {
    let r = reg();
    let c = chain(&r);
    assert!(similar(&c[..1]));
    assert!(!similar(&c[..2]));
    let same = [a(&r, "lseg(w,p) * listrep(v) * p->tail == 0 && v == t"), a(&r, FOLDED)];
    assert!(similar(&same));
    assert_eq!(similar_extract(&same), canonicalize(&a(&r, FOLDED)));
}

#[test]
fn pick_prefers_the_weaker_disjunct() {
    let r = reg();
    let e = Engine::new(&r, &NullBackend, InvGenConfig::default()).unwrap();
    let items = [a(&r, "x == 0 && emp"), a(&r, "listrep(x)")];
    let pool = items[0].clone().or(items[1].clone());
    assert_eq!(e.pick_invs(&items, &pool), canonicalize(&a(&r, "listrep(x)")));
}

#[test]
fn pick_keeps_incomparable_disjuncts() {
    let r = reg();
    let e = Engine::new(&r, &NullBackend, InvGenConfig::default()).unwrap();
    let invs = a(&r, &format!("{FOLDED} || {}", CHAIN[0]));
    let got = e.pick_invs(&chain(&r), &invs);
    assert_eq!(got.disjuncts.len(), 2);
    let set = |x: &Assertion| flatten(&[x.clone()]).into_iter().collect::<BTreeSet<_>>();
    assert_eq!(set(&got), set(&invs));
}

#[test]
fn reverse_invariant_end_to_end() {
    let r = reg();
    let h = HeuristicBackend::new(r.clone()).unwrap();
    let e = Engine::new(&r, &h, InvGenConfig::default()).unwrap();
    let rep = e.loop_inv_gen(&reverse_task(&r)).unwrap();
    assert!(rep.verified(), "{rep:?}");
    assert_eq!(rep.attempts, 1);
    assert!(equivalent(&e, &rep.invariant, &a(&r, EXPECTED)), "{}", rep.invariant);
    assert_eq!(e.loop_inv_gen(&reverse_task(&r)).unwrap(), rep);
}

#[test]
fn loop_that_never_runs_keeps_the_precondition() {
    let r = reg();
    let e = Engine::new(&r, &NullBackend, InvGenConfig::default()).unwrap();
    let pre = a(&r, "listrep(x)");
    let task = LoopTask::new(pre.clone(), parse_cond("false").unwrap(), parse_stmts("").unwrap(), 5);
    let rep = e.loop_inv_gen(&task).unwrap();
    assert_eq!(rep.invariant, canonicalize(&pre));
    assert!(rep.trace.is_empty());
}

#[test]
fn silent_backend_fails_inference() {
    let r = reg();
    let e = Engine::new(&r, &NullBackend, InvGenConfig::default()).unwrap();
    let err = e.loop_inv_gen(&reverse_task(&r)).unwrap_err();
    assert!(matches!(err, InvGenError::InferenceFail { attempts: 1, .. }), "{err}");
}

/// Offers `bad` until it is banned, then `good`.
struct Scripted {
    bad: SymbolicHeap,
    good: SymbolicHeap,
}

impl Backend for Scripted {
    fn name(&self) -> String {
        "scripted".into()
    }

    fn infer(&self, req: &InferenceRequest) -> Result<Vec<Candidate>, InferenceError> {
        let c = if req.is_banned(&self.bad) { &self.good } else { &self.bad };
        Ok(vec![Candidate { conjunct: c.clone(), score: 1.0 }])
    }
}

#[test]
fn failed_attempt_bans_its_first_candidate() {
    let r = reg();
    let s = Scripted {
        bad: a(&r, "w->tail == p * p->tail == 0").disjuncts.remove(0),
        good: a(&r, "lseg(w, p)").disjuncts.remove(0),
    };
    let e = Engine::new(&r, &s, InvGenConfig::default()).unwrap();
    let rep = e.loop_inv_gen(&reverse_task(&r)).unwrap();
    assert_eq!(rep.attempts, 2);
    assert!(rep.verified());
    assert!(equivalent(&e, &rep.invariant, &a(&r, EXPECTED)));
}

#[test]
fn attempts_are_capped() {
    let r = reg();
    let bad = a(&r, "w->tail == p * p->tail == 0").disjuncts.remove(0);
    let s = Scripted { bad: bad.clone(), good: bad };
    let cfg = InvGenConfig { max_attempts: 3, ..InvGenConfig::default() };
    let e = Engine::new(&r, &s, cfg).unwrap();
    let err = e.loop_inv_gen(&reverse_task(&r)).unwrap_err();
    assert!(matches!(err, InvGenError::InferenceFail { .. }), "{err}");
}

#[test]
fn unrolled_reverse_matches_the_chain() {
    let (r, funcs) = crate::corpus::file("list").unwrap().parse().unwrap();
    let f = funcs.iter().find(|f| f.name == "reverse").unwrap();
    let states = unrolled_states(&r, f, &funcs, 5, ExecConfig::default()).unwrap();
    assert_eq!(states.len(), 6);
    assert_eq!(states[0].to_string(), canonicalize(&a(&r, "w == 0 && v == p && listrep(p)")).to_string());
    assert!(states[5].to_string().starts_with("exists __1 __2 __3, "));
}

#[test]
fn oracle_confirms_the_reverse_invariant() {
    let (r, funcs) = crate::corpus::file("list").unwrap().parse().unwrap();
    let f = funcs.iter().find(|f| f.name == "reverse").unwrap();
    let rep = InvariantReport {
        invariant: f.invariants[0].clone(),
        trace: vec![],
        checks: Checks::default(),
        attempts: 1,
        inner: vec![],
    };
    let cfg = crate::oracle::OracleConfig::with_addrs(3);
    let got = oracle_check_func(&r, f, &funcs, &[rep.clone()], ExecConfig::default(), cfg).unwrap();
    assert!(got[0].ok() && got[0].entered > 0, "{got:?}");
    // dropping the segment breaks closure
    let weak = InvariantReport { invariant: a(&r, "w == 0 && v == p && listrep(p)"), ..rep };
    let got = oracle_check_func(&r, f, &funcs, &[weak], ExecConfig::default(), cfg).unwrap();
    assert!(got[0].pre_in_inv && !got[0].step_closed, "{got:?}");
}
