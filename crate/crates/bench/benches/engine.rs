use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use sepinv::datasynth::{sample_seed, Synth, SynthConfig};
use sepinv::entailment::Prover;
use sepinv::inference::HeuristicBackend;
use sepinv::invgen::{unrolled_states, Engine, InvGenConfig};
use sepinv_bench::{function, list_goals, program};

fn entailment(c: &mut Criterion) {
    let (reg, _) = program("list");
    let prover = Prover::new(&reg).unwrap();
    let goals = list_goals(&reg);
    c.bench_function("prover/list_goals", |b| {
        b.iter(|| goals.iter().filter(|(a, g)| prover.entails(black_box(a), g)).count())
    });
    c.bench_function("prover/lemma_derivation", |b| b.iter(|| Prover::new(black_box(&reg)).unwrap()));
}

fn symexec(c: &mut Criterion) {
    let (reg, funcs) = program("list");
    let rev = function(&funcs, "reverse");
    c.bench_function("symexec/reverse_5_steps", |b| {
        b.iter(|| unrolled_states(&reg, black_box(rev), &funcs, 5, Default::default()).unwrap())
    });
}

fn verify(c: &mut Criterion) {
    let mut g = c.benchmark_group("verify");
    g.sample_size(10);
    for (file, func) in [("list", "reverse"), ("double_iter", "double_iter_1"), ("list_of_list", "expand")] {
        let (reg, funcs) = program(file);
        let backend = HeuristicBackend::new(reg.clone()).unwrap();
        let f = function(&funcs, func);
        g.bench_function(format!("{file}::{func}"), |b| {
            b.iter(|| {
                let engine = Engine::new(&reg, &backend, InvGenConfig::default()).unwrap();
                assert!(engine.verify_function(black_box(f), &funcs).verified());
            })
        });
    }
    g.finish();
}

fn datasynth(c: &mut Criterion) {
    let reg = sepinv::corpus::registry();
    let cfg = SynthConfig::default();
    let synth = Synth::new(&reg);
    let mut i = 0;
    c.bench_function("datasynth/sample_warm_cache", |b| {
        b.iter(|| {
            i += 1;
            synth.sample(&cfg, sample_seed(1, i))
        })
    });
}

criterion_group!(benches, entailment, symexec, verify, datasynth);
criterion_main!(benches);
