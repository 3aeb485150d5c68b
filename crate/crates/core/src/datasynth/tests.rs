use super::*;
use crate::assertion::{canonicalize, PureAtom};
use crate::entailment::Prover;
use crate::frontend::{parse_assertion, parse_file};

const DEFS: &str = "
predicate listrep(x) = x == 0 && emp || exists z, x->tail == z * listrep(z);
predicate lseg(x, y) = x == y && emp || exists z, x->tail == z * lseg(z, y);
predicate tree_rep(x) = x == 0 && emp || exists d, x->data == d && tree_rep(x->left) * tree_rep(x->right);
predicate empty(x) = emp;
";

fn reg() -> PredicateRegistry {
    parse_file(DEFS).unwrap().0
}

fn lseg_xy() -> SpatialAtom {
    SpatialAtom::pred("lseg", vec![Term::var("x"), Term::var("y")])
}

fn canon_str(reg: &PredicateRegistry, s: &str) -> String {
    canonicalize(&parse_assertion(s, reg).unwrap()).to_string()
}

// Independent construction of the k-cell chain from x to y.
fn chain(k: usize) -> String {
    if k == 0 {
        return "x == y && emp".into();
    }
    let names: Vec<String> = std::iter::once("x".to_string())
        .chain((0..k - 1).map(|i| format!("z{i}")))
        .chain(std::iter::once("y".to_string()))
        .collect();
    let cells: Vec<String> = names.windows(2).map(|w| format!("{}->tail == {}", w[0], w[1])).collect();
    let binders = &names[1..k];
    let body = format!("{} && emp", cells.join(" && "));
    if binders.is_empty() {
        body
    } else {
        format!("exists {}, {body}", binders.join(" "))
    }
}

#[test]
fn gen0_lseg_is_the_chain_list() {
    let reg = reg();
    for d in 0..=4 {
        let got: Vec<String> = gen0(&reg, &lseg_xy(), d).iter().map(|h| h.to_string()).collect();
        let want: Vec<String> = (0..=d).map(|k| canon_str(&reg, &chain(k))).collect();
        assert_eq!(got, want, "depth {d}");
        assert_eq!(got.len(), d + 1);
    }
}

#[test]
fn gen0_depth_zero_keeps_base_branches() {
    let reg = reg();
    let got = gen0(&reg, &SpatialAtom::pred("listrep", vec![Term::var("x")]), 0);
    assert_eq!(got.iter().map(|h| h.to_string()).collect::<Vec<_>>(), vec![canon_str(&reg, "x == 0 && emp")]);
    for d in 0..4 {
        assert_eq!(gen0(&reg, &SpatialAtom::pred("listrep", vec![Term::var("x")]), d).len(), d + 1);
    }
}

#[test]
fn gen0_unfoldings_entail_their_predicate() {
    let reg = reg();
    let p = Prover::new(&reg).unwrap();
    for c in [lseg_xy(), SpatialAtom::pred("tree_rep", vec![Term::var("t")])] {
        let goal = Assertion::single(SymbolicHeap::new(vec![], vec![], vec![c.clone()]));
        for h in gen0(&reg, &c, 3) {
            assert!(!h.has_predicates());
            assert!(p.entails(&Assertion::single(h.clone()), &goal), "{h}");
        }
    }
}

#[test]
fn simplify_temps_inlines_pinned_binders() {
    let reg = reg();
    let (x, y, a, b) = (Term::var("x"), Term::var("y"), Term::logic("a"), Term::logic("b"));
    let cell = |r: &Term, v: &Term| SpatialAtom::points_to(Term::field(r.clone(), "tail"), v.clone());
    let h = SymbolicHeap::new(vec!["a".into()], vec![PureAtom::eq(a.clone(), y.clone())], vec![cell(&x, &a)]);
    assert_eq!(simplify_temps(&h).to_string(), canon_str(&reg, "x->tail == y && emp"));
    // a is used twice besides its pin, so it stays
    let h = SymbolicHeap::new(
        vec!["a".into(), "b".into()],
        vec![PureAtom::eq(a.clone(), y.clone()), PureAtom::eq(b.clone(), Term::null())],
        vec![cell(&x, &a), cell(&a, &b)],
    );
    let s = simplify_temps(&h);
    assert_eq!(s.binders, vec!["__1".to_string()]);
    assert_eq!(s.pure, vec![PureAtom::eq(Term::logic("__1"), y)]);
    assert_eq!(s.spatial[1], cell(&Term::logic("__1"), &Term::null()));
}

#[test]
fn noise_and_taboo_lists_for_lseg() {
    let reg = reg();
    let spec = derive_noise_taboo(&reg, reg.get("lseg").unwrap());
    assert_eq!(spec.noise_strings(), ["{}=={}", "{}!={}", "listrep({})", "{}->tail=={}", "listrep(y)", "y->tail=={}"]);
    assert_eq!(spec.taboo_strings(), ["x->tail=={}", "listrep(x)"]);
    let spec = derive_noise_taboo(&reg, reg.get("listrep").unwrap());
    assert_eq!(spec.taboo_strings(), ["x->tail=={}", "listrep(x)"]);
    assert!(derive_noise_taboo(&reg, reg.get("empty").unwrap()).taboo_templates.is_empty());
}

#[test]
fn zero_noise_is_gen0() {
    let reg = reg();
    let specs = noise_specs(&reg);
    let cfg = SynthConfig { p_noise: 0.0, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    assert_eq!(gen1(&reg, &specs, &lseg_xy(), 3, &cfg, &mut rng), gen0(&reg, &lseg_xy(), 3));
}

#[test]
fn augmented_lseg_samples_avoid_taboo() {
    let reg = reg();
    let specs = noise_specs(&reg);
    let cfg = SynthConfig { p_noise: 0.9, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut n = 0;
    let mut noisy = 0;
    while n < 1000 {
        for (h, base) in gen1(&reg, &specs, &lseg_xy(), 4, &cfg, &mut rng).iter().zip(gen0(&reg, &lseg_xy(), 4)) {
            n += 1;
            let extra = h.pure.len() + h.spatial.len() > base.pure.len() + base.spatial.len();
            noisy += usize::from(extra);
            let text = h.to_string();
            let x_cells = text.matches("x->tail ==").count();
            let base_cells = base.to_string().matches("x->tail ==").count();
            assert_eq!(x_cells, base_cells, "{text}");
            assert!(!text.contains("listrep(x)"), "{text}");
        }
    }
    assert!(noisy > 500, "{noisy}");
}

#[test]
fn star_zips_index_wise() {
    let reg = reg();
    let specs = noise_specs(&reg);
    let cfg = SynthConfig { p_noise: 0.0, ..Default::default() };
    let a = Mix::Leaf(lseg_xy());
    let b = Mix::Leaf(SpatialAtom::pred("listrep", vec![Term::var("y")]));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let star = gen2(&reg, &specs, &Mix::Star(Box::new(a.clone()), Box::new(b.clone())), 2, &cfg, &mut rng);
    let ga = gen0(&reg, &lseg_xy(), 2);
    let gb = gen0(&reg, &SpatialAtom::pred("listrep", vec![Term::var("y")]), 2);
    assert_eq!(star.len(), 3);
    for (i, s) in star.iter().enumerate() {
        assert_eq!(s.disjuncts.len(), 1);
        assert_eq!(s.disjuncts[0], canonicalize_heap(&ga[i].star(&gb[i])));
    }
    let or = gen2(&reg, &specs, &Mix::Or(Box::new(a), Box::new(b)), 2, &cfg, &mut rng);
    assert!(or.iter().all(|d| d.disjuncts.len() == 2));
}

#[test]
fn samples_are_deterministic_and_recoverable() {
    let reg = reg();
    let synth = Synth::new(&reg);
    let cfg = SynthConfig::default();
    let p = Prover::new(&reg).unwrap();
    for i in 0..30 {
        let s = sample_seed(7, i);
        let a = synth.sample(&cfg, s);
        assert_eq!(a, Synth::new(&reg).sample(&cfg, s));
        assert!(!a.inputs.is_empty());
        let goal = a.label_with_frame();
        for inp in &a.inputs {
            assert!(p.entails(inp, &goal), "{inp} |- {}", a.label);
        }
    }
}

#[test]
fn corpus_bytes_depend_only_on_seed() {
    let reg = reg();
    let cfg = SynthConfig::default();
    let run = |seed| {
        let mut v = vec![];
        emit_corpus(&reg, 40, &cfg, seed, &mut v).unwrap();
        v
    };
    let a = run(5);
    assert_eq!(a, run(5));
    assert_ne!(a, run(6));
    let first: SampleLine = serde_json::from_slice(a.split(|b| *b == b'\n').next().unwrap()).unwrap();
    assert_eq!(first.seed, sample_seed(5, 0));
    let text = String::from_utf8(a).unwrap();
    assert!(text.lines().next().unwrap().starts_with("{\"inputs\":["));
}


#[test]
fn cached_unfoldings_match_direct_gen0() {
    let reg = reg();
    let synth = Synth::new(&reg);
    for c in [
        SpatialAtom::pred("lseg", vec![Term::var("y"), Term::var("x")]),
        SpatialAtom::pred("lseg", vec![Term::var("u"), Term::var("v")]),
        SpatialAtom::pred("tree_rep", vec![Term::var("w")]),
    ] {
        for d in 0..4 {
            assert_eq!(synth.unfoldings(&c, d), gen0(&reg, &c, d), "{c} {d}");
        }
    }
}
