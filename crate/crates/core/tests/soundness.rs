//! Prover, executor and cover selection checked against brute force.

mod support;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sepinv::entailment::Prover;
use sepinv::frontend::{parse_assertion, parse_file, parse_stmts};
use sepinv::inference::NullBackend;
use sepinv::invgen::{Engine, InvGenConfig};
use sepinv::oracle::{entails_oracle, OracleConfig};
use sepinv::symexec::{ExecErrorKind, SymExec};

use support::*;

fn oracle_agrees(prover: &Prover, seed: u64) -> Result<(), TestCaseError> {
    let reg = prover.registry();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (s, t) = random_pair(&mut rng);
    let (a, b) = (parse_assertion(&s, reg).unwrap(), parse_assertion(&t, reg).unwrap());
    if prover.entails(&a, &b) {
        let ok = entails_oracle(reg, &a, &b, OracleConfig::with_addrs(3)).unwrap();
        prop_assert!(ok, "prover claims {s} |- {t}");
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn proved_entailments_hold_in_small_models(seed in any::<u64>()) {
        let reg = list_registry();
        let prover = Prover::new(&reg).unwrap();
        oracle_agrees(&prover, seed)?;
    }

    #[test]
    fn extra_pure_facts_keep_entailments(seed in any::<u64>(), fact in 0usize..4) {
        let reg = list_registry();
        let prover = Prover::new(&reg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (s, t) = random_pair(&mut rng);
        let (a, b) = (parse_assertion(&s, &reg).unwrap(), parse_assertion(&t, &reg).unwrap());
        prop_assume!(prover.entails(&a, &b));
        let extra = ["x == y", "x != 0", "y != z", "z == 0"][fact];
        let stronger = parse_assertion(&format!("{extra} && emp"), &reg).unwrap().star(&a);
        prop_assert!(prover.entails(&stronger, &b), "{extra} && ({s}) |- {t}");
    }
}

#[test]
fn random_pairs_include_both_verdicts() {
    let reg = list_registry();
    let prover = Prover::new(&reg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let proved = (0..200)
        .filter(|_| {
            let (s, t) = random_pair(&mut rng);
            prover.entails(&parse_assertion(&s, &reg).unwrap(), &parse_assertion(&t, &reg).unwrap())
        })
        .count();
    assert!((20..180).contains(&proved), "{proved} of 200 proved");
}

#[test]
fn corpus_assertions_entail_themselves() {
    for (reg, tag, a) in corpus_assertions(3) {
        let prover = Prover::new(&reg).unwrap();
        assert!(prover.entails(&a, &a), "{tag}: {a}");
    }
}

#[test]
fn null_dereference_is_reported() {
    let (reg, _) = parse_file(sepinv::corpus::file("list").unwrap().source).unwrap();
    let pre = parse_assertion("v == p && p == 0 && emp", &reg).unwrap();
    let err = SymExec::new(&reg).exec(&pre, &parse_stmts("t = p->tail;").unwrap()).unwrap_err();
    assert_eq!(err.kind, ExecErrorKind::NullDeref);
}

#[test]
fn list_fragments_are_sound_on_two_cells() {
    let mut checked = 0;
    for (reg, frag) in corpus_fragments(2).iter().filter(|(_, f)| ["reverse", "append", "iterator"].contains(&f.func.as_str())) {
        let r = check_fragment(reg, frag, 2);
        assert!(r.violations.is_empty(), "{:#?}", r.violations);
        checked += r.models;
    }
    assert!(checked > 100, "{checked}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pick_finds_a_minimum_cover(seed in any::<u64>(), n in 1usize..=8, m in 0usize..=6) {
        let reg = list_registry();
        let backend = NullBackend;
        let engine = Engine::new(&reg, &backend, InvGenConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let items = random_heaps(&mut rng, &reg, n);
        let pool = random_pool(&mut rng, &reg, m);
        let picked = engine.pick_invs(
            &items.iter().cloned().map(sepinv::assertion::Assertion::single).collect::<Vec<_>>(),
            &sepinv::assertion::Assertion::new(pool.clone()),
        );
        let (best, all, masks) = brute_min_cover(engine.prover(), &items, &pool);
        prop_assert!(covers(&all, &masks, &picked), "{picked} does not cover");
        prop_assert_eq!(picked.disjuncts.len(), best);
    }
}
