use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use sepinv::assertion::{PredicateRegistry, SymbolicHeap};
use sepinv::datasynth::{emit_corpus, sample_seed, Synth, SynthConfig};
use sepinv::entailment::Prover;
use sepinv::frontend::ast::Func;
use sepinv::frontend::{parse_entailment, parse_file};
use sepinv::inference::{Backend, HeuristicBackend, HttpBackend, InferenceRequest, SubprocessBackend};
use sepinv::invgen::{oracle_check_func, unrolled_states, Engine, FuncReport, InvGenConfig};
use sepinv::oracle::{counter_model, OracleConfig};

use crate::config::Config;
use crate::report::*;
use crate::{BackendArg, Cli, Cmd};

/// `Ok(true)` exits 0, `Ok(false)` exits 1, errors exit 2.
pub fn run(cli: Cli) -> Result<bool> {
    let cfg = Config::resolve(cli.config.as_deref())?;
    match cli.cmd {
        Cmd::Verify { file, funcs, backend, max_num, max_attempts, oracle, paper_literal, json } => {
            let mut inv = inv_config(&cfg);
            inv.max_num = max_num.unwrap_or(inv.max_num);
            inv.max_attempts = max_attempts.unwrap_or(inv.max_attempts);
            inv.paper_literal |= paper_literal;
            if inv.max_num == 0 || inv.max_attempts == 0 {
                bail!("--max-num and --max-attempts must be positive");
            }
            verify(&file, &funcs, &backend, &cfg, inv, oracle.unwrap_or(cfg.oracle), json)
        }
        Cmd::Exec { file, func, steps, json } => exec(&file, func.as_deref(), steps, json),
        Cmd::Entail { file, defs, oracle, json } => entail(&file, defs.as_deref(), oracle.unwrap_or(cfg.oracle), json),
        Cmd::GenData { count, seed, out, preds, p_noise, defs } => {
            let mut synth = SynthConfig {
                p_noise: p_noise.unwrap_or(cfg.p_noise),
                max_noise: cfg.max_noise,
                p_star: cfg.p_star,
                p_or: cfg.p_or,
                preds,
                ..SynthConfig::default()
            };
            if !(0.0..=1.0).contains(&synth.p_noise) {
                bail!("--p-noise must lie in [0, 1]");
            }
            synth.preds.dedup();
            gen_data(count, seed.unwrap_or(cfg.seed), out.as_deref(), &synth, defs.as_deref())
        }
        Cmd::Bench { backend, filter, jobs, json } => bench(&backend, &cfg, filter.as_deref(), jobs, json),
        Cmd::ServeCheck { backend, requests, seed, json } => {
            serve_check(&backend, &cfg, requests, seed.unwrap_or(cfg.seed), json)
        }
    }
}

fn inv_config(cfg: &Config) -> InvGenConfig {
    let mut inv = InvGenConfig { max_num: cfg.max_num, max_attempts: cfg.max_attempts, ..InvGenConfig::default() };
    inv.prover.unfold_depth = cfg.unfold_depth;
    inv
}

fn read(path: &Path) -> Result<String> {
    if !path.exists() {
        bail!("file not found: {}", path.display());
    }
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_program(path: &Path) -> Result<(PredicateRegistry, Vec<Func>)> {
    parse_file(&read(path)?).map_err(|e| anyhow!("{}: {e}", path.display()))
}

/// The backend named by the flag, else by the config file.
fn backend_spec(arg: &BackendArg, cfg: &Config) -> Result<(String, Option<String>)> {
    let parts: Vec<String> = match &arg.backend {
        Some(v) => v.clone(),
        None => cfg.backend.splitn(2, char::is_whitespace).map(|s| s.trim().to_string()).collect(),
    };
    let kind = parts.first().cloned().unwrap_or_else(|| "heuristic".into());
    let target = parts.get(1).cloned().filter(|s| !s.is_empty());
    match (kind.as_str(), &target) {
        ("heuristic", None) => {}
        ("remote" | "subprocess", Some(_)) => {}
        ("heuristic", Some(t)) => bail!("backend `heuristic` takes no argument (got `{t}`)"),
        ("remote" | "subprocess", None) => bail!("backend `{kind}` needs a target"),
        _ => bail!("unknown backend `{kind}` (expected heuristic, remote URL or subprocess CMD)"),
    }
    Ok((kind, target))
}

fn make_backend(
    spec: &(String, Option<String>),
    reg: &PredicateRegistry,
    timeout: Duration,
) -> Result<Box<dyn Backend>> {
    Ok(match (spec.0.as_str(), spec.1.as_deref()) {
        ("remote", Some(url)) => Box::new(HttpBackend::new(url, reg.clone(), timeout)),
        ("subprocess", Some(cmd)) => Box::new(SubprocessBackend::new(cmd, reg.clone(), timeout)),
        _ => Box::new(HeuristicBackend::new(reg.clone())?),
    })
}

fn timeout(arg: &BackendArg, cfg: &Config) -> Duration {
    Duration::from_secs(arg.timeout.unwrap_or(cfg.timeout).max(1))
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

/// Verifies one function with a fresh engine so its timings are its own.
fn verify_one(
    reg: &PredicateRegistry,
    backend: &dyn Backend,
    inv: InvGenConfig,
    func: &Func,
    funcs: &[Func],
) -> Result<(FuncReport, TimingsJson)> {
    let t = Instant::now();
    let engine = Engine::new(reg, backend, inv)?;
    let rep = engine.verify_function(func, funcs);
    Ok((rep, TimingsJson::new(engine.timings(), t.elapsed().as_secs_f64())))
}

fn verify(
    file: &Path,
    only: &[String],
    barg: &BackendArg,
    cfg: &Config,
    inv: InvGenConfig,
    oracle: usize,
    json: bool,
) -> Result<bool> {
    let (reg, funcs) = load_program(file)?;
    for name in only {
        if !funcs.iter().any(|f| &f.name == name) {
            bail!("no function `{name}` in {}", file.display());
        }
    }
    let spec = backend_spec(barg, cfg)?;
    let backend = make_backend(&spec, &reg, timeout(barg, cfg))?;
    let mut out = VerifyReport {
        report_version: REPORT_VERSION,
        file: file.display().to_string(),
        backend: backend.name(),
        verified: true,
        functions: vec![],
    };
    for f in funcs.iter().filter(|f| only.is_empty() || only.contains(&f.name)) {
        let (rep, timings) = verify_one(&reg, backend.as_ref(), inv, f, &funcs)?;
        let mut fj = FuncJson::new(&rep, timings);
        if oracle > 0 && rep.error.is_none() {
            let checks = oracle_check_func(&reg, f, &funcs, &rep.loops, inv.exec, OracleConfig::with_addrs(oracle as i64))
                .with_context(|| format!("oracle cross-check of `{}`", f.name))?;
            for (l, c) in fj.loops.iter_mut().zip(checks) {
                fj.verified &= c.ok();
                l.oracle = Some(c);
            }
        }
        out.verified &= fj.verified;
        if !json {
            print_func(&fj, oracle);
        }
        out.functions.push(fj);
    }
    if json {
        print_json(&out)?;
    }
    Ok(out.verified)
}

fn print_func(f: &FuncJson, oracle: usize) {
    let status = if f.verified { "verified" } else { "FAILED" };
    println!("{}: {status} ({:.2}s)", f.name, f.timings.total);
    if let Some(e) = &f.error {
        println!("  error: {e}");
    }
    fn loops(ls: &[LoopJson], indent: usize, oracle: usize) {
        for (i, l) in ls.iter().enumerate() {
            let pad = " ".repeat(indent);
            println!("{pad}loop {}: {}", i + 1, l.invariant);
            println!(
                "{pad}  pre |- inv: {}, inductive: {}, attempts: {}",
                yes(l.checks.pre_entails_inv),
                yes(l.checks.inductive),
                l.attempts
            );
            if let Some(c) = &l.oracle {
                println!(
                    "{pad}  oracle (<= {oracle} objects): pre in inv: {}, closed under the body: {} ({} models, {} skipped)",
                    yes(c.pre_in_inv),
                    yes(c.step_closed),
                    c.entered,
                    c.skipped
                );
            }
            loops(&l.inner, indent + 4, oracle);
        }
    }
    loops(&f.loops, 2, oracle);
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn exec(file: &Path, func: Option<&str>, steps: usize, json: bool) -> Result<bool> {
    let (reg, funcs) = load_program(file)?;
    let f = match func {
        Some(n) => funcs.iter().find(|f| f.name == n).ok_or_else(|| anyhow!("no function `{n}` in {}", file.display()))?,
        None => funcs.first().ok_or_else(|| anyhow!("{} defines no function", file.display()))?,
    };
    let states = unrolled_states(&reg, f, &funcs, steps, Default::default())?;
    if json {
        print_json(&ExecReport {
            report_version: REPORT_VERSION,
            func: f.name.clone(),
            states: states.iter().map(|s| s.to_string()).collect(),
        })?;
    } else {
        for (i, s) in states.iter().enumerate() {
            println!("S{i}: {s}");
        }
    }
    Ok(true)
}

/// Splits an entailment file into definitions and `|-` lines.
fn split_entail_file(text: &str) -> (String, Vec<(usize, String)>) {
    let mut defs = String::new();
    let mut goals = vec![];
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.starts_with('#') || t.starts_with("//") {
            continue;
        }
        if t.contains("|-") {
            goals.push((i + 1, t.trim_end_matches(';').to_string()));
        } else {
            defs.push_str(line);
            defs.push('\n');
        }
    }
    (defs, goals)
}

fn entail(file: &Path, defs: Option<&Path>, oracle: usize, json: bool) -> Result<bool> {
    let text = read(file)?;
    let (local, goals) = split_entail_file(&text);
    let mut src = match defs {
        Some(p) => read(p)?,
        None => String::new(),
    };
    src.push_str(&local);
    let reg = if src.trim().is_empty() {
        sepinv::corpus::registry()
    } else {
        parse_file(&src).map_err(|e| anyhow!("predicate definitions: {e}"))?.0
    };
    let prover = Prover::new(&reg)?;
    let mut out = EntailReport { report_version: REPORT_VERSION, all_proved: true, results: vec![] };
    for (line, g) in goals {
        let (a, b) = parse_entailment(&g, &reg).map_err(|e| anyhow!("{}:{line}: {e}", file.display()))?;
        let r = prover.entails_report(&a, &b);
        let mut row = EntailJson {
            line,
            source: a.to_string(),
            target: b.to_string(),
            proved: r.proved,
            exhausted: r.exhausted,
            oracle_valid: None,
            counter_model: None,
        };
        if oracle > 0 {
            let cm = counter_model(&reg, &a, &b, OracleConfig::with_addrs(oracle as i64))
                .map_err(|e| anyhow!("{}:{line}: oracle: {e}", file.display()))?;
            row.oracle_valid = Some(cm.is_none());
            row.counter_model = cm.map(|m| m.to_string());
        }
        let unsound = row.proved && row.oracle_valid == Some(false);
        out.all_proved &= row.proved && !unsound;
        if !json {
            let verdict = match (row.proved, unsound) {
                (_, true) => "UNSOUND",
                (true, _) => "proved",
                (false, _) if row.exhausted => "unknown (search budget exhausted)",
                _ => "not proved",
            };
            println!("{line}: {verdict}: {g}");
            match (&row.oracle_valid, &row.counter_model) {
                (Some(true), _) => println!("   oracle: valid up to {oracle} objects"),
                (_, Some(m)) => println!("   oracle: counter-model {m}"),
                _ => {}
            }
        }
        out.results.push(row);
    }
    if json {
        print_json(&out)?;
    }
    Ok(out.all_proved)
}

fn gen_data(count: usize, seed: u64, out: Option<&Path>, synth: &SynthConfig, defs: Option<&Path>) -> Result<bool> {
    let reg = match defs {
        Some(p) => load_program(p)?.0,
        None => sepinv::corpus::registry(),
    };
    for p in &synth.preds {
        if reg.get(p).is_none() {
            bail!("unknown predicate `{p}`");
        }
    }
    if reg.is_empty() {
        bail!("no predicates to sample from");
    }
    match out {
        Some(path) => {
            let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
            let mut w = BufWriter::new(f);
            emit_corpus(&reg, count, synth, seed, &mut w)?;
        }
        None => {
            let mut w = BufWriter::new(io::stdout().lock());
            emit_corpus(&reg, count, synth, seed, &mut w)?;
        }
    }
    Ok(true)
}

fn bench(barg: &BackendArg, cfg: &Config, filter: Option<&str>, jobs: Option<usize>, json: bool) -> Result<bool> {
    let spec = backend_spec(barg, cfg)?;
    let inv = inv_config(cfg);
    let mut tasks = vec![];
    for file in sepinv::corpus::FILES {
        let (reg, funcs) = file.parse().map_err(|e| anyhow!("{}: {e}", file.name))?;
        for f in &funcs {
            let id = format!("{}::{}", file.name, f.name);
            if filter.is_none_or(|s| id.contains(s)) {
                tasks.push((id, reg.clone(), funcs.clone(), f.clone()));
            }
        }
    }
    // remote backends are queried one request at a time
    let jobs = if spec.0 == "heuristic" { jobs.unwrap_or(0) } else { 1 };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    let t = timeout(barg, cfg);
    let rows: Vec<Result<BenchRow>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|(id, reg, funcs, f)| {
                let backend = make_backend(&spec, reg, t)?;
                let (rep, timings) = verify_one(reg, backend.as_ref(), inv, f, funcs)?;
                Ok(BenchRow {
                    instance: id.clone(),
                    verified: rep.verified(),
                    error: rep.error.as_ref().map(|e| e.to_string()),
                    timings,
                })
            })
            .collect()
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let name = match &spec.1 {
        Some(t) => format!("{} {t}", spec.0),
        None => spec.0.clone(),
    };
    if json {
        print_json(&BenchReport { report_version: REPORT_VERSION, backend: name, rows })?;
    } else {
        print!("{}", bench_table(&rows));
        let ok = rows.iter().filter(|r| r.verified).count();
        println!("{ok}/{} verified", rows.len());
    }
    Ok(true)
}

pub fn bench_table(rows: &[BenchRow]) -> String {
    let w = rows.iter().map(|r| r.instance.chars().count()).max().unwrap_or(0).max("instance".len());
    let mut s = format!(
        "{:<w$}  {:^6}  {:>8}  {:>8}  {:>8}  {:>8}\n",
        "instance", "result", "symbolic", "infer", "solver", "total"
    );
    for r in rows {
        let t = &r.timings;
        s.push_str(&format!(
            "{:<w$}  {:^6}  {:>8.2}  {:>8.2}  {:>8.2}  {:>8.2}\n",
            r.instance,
            if r.verified { "✓" } else { "✗" },
            t.symbolic,
            t.infer,
            t.solver,
            t.total
        ));
    }
    s
}

fn serve_check(barg: &BackendArg, cfg: &Config, requests: usize, seed: u64, json: bool) -> Result<bool> {
    let spec = backend_spec(barg, cfg)?;
    if spec.0 == "heuristic" && barg.backend.is_none() && cfg.backend == "heuristic" {
        log::info!("checking the built-in backend; pass --backend remote URL or subprocess CMD for a server");
    }
    let reg = sepinv::corpus::registry();
    let backend = make_backend(&spec, &reg, timeout(barg, cfg))?;
    let synth = Synth::new(&reg);
    let scfg = SynthConfig::default();
    let mut out = ServeCheckReport {
        report_version: REPORT_VERSION,
        backend: backend.name(),
        requests,
        ok: 0,
        failures: vec![],
    };
    for i in 0..requests {
        let s = synth.sample(&scfg, sample_seed(seed, i as u64));
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
        let banned: Vec<SymbolicHeap> = s
            .label
            .leaves()
            .into_iter()
            .filter(|_| rng.gen_bool(0.3))
            .map(|l| SymbolicHeap::new(vec![], vec![], vec![l.clone()]))
            .collect();
        let req = InferenceRequest::new(s.inputs.clone(), banned, rng.gen_range(0..=5));
        match backend.infer(&req) {
            Ok(cands) => match cands.iter().find(|c| !c.score.is_finite()) {
                Some(c) => out.failures.push(format!("request {i}: non-finite score for `{}`", c.conjunct)),
                None => out.ok += 1,
            },
            Err(e) => out.failures.push(format!("request {i}: {e}")),
        }
    }
    if json {
        print_json(&out)?;
    } else {
        for f in &out.failures {
            println!("{f}");
        }
        println!("{}: {}/{} responses valid", out.backend, out.ok, out.requests);
    }
    Ok(out.failures.is_empty())
}
