//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::Rng;

use conscient_core::config::{parse_config, RunConfig};
use conscient_core::dream::{self, walk_step, DreamConfig};
use conscient_core::emotion::{apply_event, should_sleep, EmotionEvent};
use conscient_core::field::sample_field;
use conscient_core::optimizer::{default_bounds, evolve, Evaluator, Parallelism};
use conscient_core::seed;
use conscient_core::semantic::{Percept, PerceptId, PerceptKind, PerceptStore, BUILTIN_CONTENT_GRAPH, BUILTIN_STYLE_GRAPH};
use conscient_core::trace::{audit_interactions, metrics};
use conscient_core::{
    run, EmotionParams, EmotionState, FieldSampler, GridCell, KernelConfig, SemanticGraph, SimulationTrace,
    ValueField, WorldConfig,
};

const BIN: &str = env!("CARGO_BIN_EXE_conscient-sim");
const PINNED_DEFAULT_INTERACTIONS: u64 = 22;

type Verdict = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed <= limit, format!("took {elapsed:.1?}, limit {limit:?}"))
}

fn gp_covariance_law() -> Verdict {
    let start = Instant::now();
    let kernel = KernelConfig::default();
    let r = 8;
    let sampler = FieldSampler::new(kernel, r).map_err(|e| e.to_string())?;
    let mut rng = seed::rng(2024);
    let n = 2000;
    let draws: Vec<ValueField> = (0..n).map(|_| sampler.sample(&mut rng)).collect();
    let cells: Vec<GridCell> = draws[0].cells().collect();
    let moment = |a: GridCell, b: GridCell| draws.iter().map(|f| f.get(a) * f.get(b)).sum::<f64>() / n as f64;
    let var = cells.iter().map(|&c| moment(c, c)).sum::<f64>() / cells.len() as f64;
    let mut adj = Vec::new();
    for &c in &cells {
        if c.j + 1 < r {
            adj.push(moment(c, GridCell::new(c.i, c.j + 1)));
        }
        if c.i + 1 < r {
            adj.push(moment(c, GridCell::new(c.i + 1, c.j)));
        }
    }
    let cov = adj.iter().sum::<f64>() / adj.len() as f64;
    let want = (-1.0f64 / 8.0).exp();
    ensure((var - 1.0).abs() <= 0.1, format!("variance {var:.4}, want 1 +/- 0.1"))?;
    ensure((cov - want).abs() <= 0.08, format!("adjacent covariance {cov:.4}, want {want:.4} +/- 0.08"))?;
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!(
        "variance {var:.4}, adjacent covariance {cov:.4} (target {want:.4}), {:.1?}",
        start.elapsed()
    ))
}

fn bump_shape_and_inverse() -> Verdict {
    let width = 1.0 / (2.0 * 2f64.ln()).sqrt();
    let mut f = ValueField::constant(8, 0.0).map_err(|e| e.to_string())?;
    let c = GridCell::new(3, 3);
    f.local_bump(c, 1.0, width).map_err(|e| e.to_string())?;
    let at0 = f.get(c);
    let at_half = f.get(GridCell::new(3, 4));
    ensure((at0 - 1.0).abs() <= 1e-9, format!("peak {at0}"))?;
    ensure((at_half - 0.5).abs() <= 1e-9, format!("half-height {at_half}"))?;

    let mut rng = seed::rng(7);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let original = sample_field(KernelConfig::default(), 8, &mut rng).map_err(|e| e.to_string())?;
        let mut g = original.clone();
        let center = GridCell::new(rng.random_range(0..8), rng.random_range(0..8));
        let peak = rng.random_range(-3.0..3.0);
        let w = rng.random_range(0.2..4.0);
        g.local_bump(center, peak, w).map_err(|e| e.to_string())?;
        g.local_bump(center, -peak, w).map_err(|e| e.to_string())?;
        for (a, b) in g.values().iter().zip(original.values()) {
            worst = worst.max((a - b).abs());
        }
    }
    ensure(worst <= 1e-12, format!("round-trip error {worst:e}"))?;
    Ok(format!("peak {at0}, half-height {at_half}, round-trip error {worst:e}"))
}

fn percept(id: u64, graph: &SemanticGraph, features: Vec<f64>, kind: PerceptKind) -> Percept {
    Percept {
        id: PerceptId(id),
        category: graph.classify(&features).expect("dimension").to_owned(),
        features,
        origin: GridCell::new(0, 0),
        tick: 0,
        kind,
    }
}

fn walk_bound() -> Verdict {
    let dim = 8;
    let content = SemanticGraph::load(BUILTIN_CONTENT_GRAPH, 0, dim).map_err(|e| e.to_string())?;
    let style = SemanticGraph::load(BUILTIN_STYLE_GRAPH, 0, dim).map_err(|e| e.to_string())?;
    let mut rng = seed::rng(99);
    let mut violations = 0;
    let mut checked = 0;
    for _ in 0..1000 {
        for g in [&content, &style] {
            let from = &g.names()[rng.random_range(0..g.node_count())];
            let steps = rng.random_range(0..=6u32);
            let to = walk_step(g, from, steps, &mut rng).map_err(|e| e.to_string())?;
            let d = g.semantic_distance(from, to).map_err(|e| e.to_string())?;
            checked += 1;
            if d.hops().is_none_or(|h| h > steps as usize) {
                violations += 1;
            }
        }
    }

    let mut cstore = PerceptStore::new();
    let mut sstore = PerceptStore::new();
    for k in 0..40 {
        let f: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
        cstore.attach(percept(k, &content, f.clone(), PerceptKind::Observed));
        sstore.attach(percept(1000 + k, &style, f, PerceptKind::Style));
    }
    let cfg = DreamConfig {
        step_lower: 0,
        step_upper: 4,
        length: 10,
        style_weight: 0.3,
    };
    let mut frames = 0;
    for _ in 0..100 {
        let d = dream::dream(&cstore, &content, &sstore, &style, &cfg, 0, &mut rng).map_err(|e| e.to_string())?;
        for f in &d.frames {
            frames += 1;
            if f.pair_distance.hops().is_none_or(|h| h > f.content_step as usize) {
                violations += 1;
            }
        }
    }
    ensure(violations == 0, format!("{violations} violations"))?;
    Ok(format!("{checked} walks and {frames} dream frames, 0 violations"))
}

fn emotion_fuzz() -> Verdict {
    let params = EmotionParams::default();
    let mut rng = seed::rng(4);
    let mut state = EmotionState::default();
    let mut sign_breaks = 0u64;
    let steps = 1_000_000;
    for _ in 0..steps {
        let before = state;
        let x: f64 = rng.random_range(-2.0..2.0);
        let (event, dir_h, other): (EmotionEvent, f64, Option<(usize, f64)>) = match rng.random_range(0..4) {
            0 => (
                EmotionEvent::PhotoTaken { field_value: x },
                if x > params.high_value_cutoff { 1.0 } else { -1.0 },
                None,
            ),
            1 => {
                let v: i8 = rng.random_range(-1..=1);
                (EmotionEvent::DreamFrame { valence: v }, f64::from(v), Some((3, f64::from(v))))
            }
            2 => {
                let s = if x > params.high_value_cutoff { 1.0 } else { -1.0 };
                (EmotionEvent::Interaction { evaluation: x }, s, Some((2, s)))
            }
            _ => {
                let score = x / 2.0;
                (EmotionEvent::ContentStimulus { score }, score.signum() * f64::from(score != 0.0), Some((1, -1.0)))
            }
        };
        state = apply_event(state, event, &params, &mut rng);
        let (b, a) = (before.components(), state.components());
        if a.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(format!("left the unit box: {a:?}"));
        }
        let moved_right = |k: usize, dir: f64| {
            let d = a[k] - b[k];
            if dir > 0.0 {
                d >= 0.0
            } else if dir < 0.0 {
                d <= 0.0
            } else {
                d == 0.0
            }
        };
        if !moved_right(0, dir_h) || other.is_some_and(|(k, dir)| !moved_right(k, dir)) {
            sign_breaks += 1;
        }
        // keep the walk away from absorbing corners
        if rng.random::<f64>() < 0.01 {
            state = EmotionState {
                happiness: rng.random(),
                curiosity: rng.random(),
                friendship: rng.random(),
                courage: rng.random(),
                fatigue: rng.random(),
            };
        }
    }
    ensure(sign_breaks == 0, format!("{sign_breaks} sign-contract breaks"))?;
    Ok(format!("{steps} events, all components in [0, 1], 0 sign-contract breaks"))
}

fn sleep_frequency() -> Verdict {
    let params = EmotionParams::default();
    let state = EmotionState {
        fatigue: 1.0,
        ..EmotionState::default()
    };
    let mut rng = seed::rng(5);
    let n = 10_000;
    let hits = (0..n)
        .filter(|_| should_sleep(&state, 0, u64::MAX, &params, &mut rng))
        .count();
    let freq = hits as f64 / n as f64;
    let want = 1.0 - params.threshold;
    ensure((freq - want).abs() <= 0.02, format!("frequency {freq}, want {want} +/- 0.02"))?;
    Ok(format!("frequency {freq} over {n} draws (target {want:.2})"))
}

fn cli(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("spawn conscient-sim")
}

fn cli_ok(args: &[&str]) -> Result<(), String> {
    let out = cli(args);
    ensure(
        out.status.success(),
        format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)),
    )
}

fn read(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn byte_identical_traces(dir: &Path) -> Verdict {
    let (a, b) = (dir.join("run_a"), dir.join("run_b"));
    for d in [&a, &b] {
        cli_ok(&["simulate", "--seed", "0", "--out", d.to_str().unwrap()])?;
    }
    let (ta, tb) = (
        fs::read(a.join("trace.csv")).map_err(|e| e.to_string())?,
        fs::read(b.join("trace.csv")).map_err(|e| e.to_string())?,
    );
    ensure(ta == tb, "trace.csv differs between identical runs")?;
    let trace = SimulationTrace::read_from(&read(&a.join("trace.csv"))?).map_err(|e| e.to_string())?;
    let got = metrics(&trace).interactions;
    ensure(
        got == PINNED_DEFAULT_INTERACTIONS,
        format!("{got} interactions, pinned {PINNED_DEFAULT_INTERACTIONS}"),
    )?;
    Ok(format!("{} bytes identical, {got} interactions as pinned", ta.len()))
}

fn interaction_replay() -> Verdict {
    let start = Instant::now();
    let cfg = WorldConfig {
        resolution: 16,
        n_agents: 2,
        total_ticks: 10_000,
        ..WorldConfig::default()
    };
    let trace = run(&cfg).map_err(|e| e.to_string())?;
    let audit = audit_interactions(&trace);
    ensure(
        audit.is_clean(),
        format!("{} violations, first: {:?}", audit.violations.len(), audit.violations.first()),
    )?;
    ensure(audit.interactions > 0, "no interactions to replay")?;
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!(
        "{} interactions replayed: co-located, both awake, provenance intact, {:.1?}",
        audit.interactions,
        start.elapsed()
    ))
}

struct GaOutcome {
    verdict8: Verdict,
    verdict9: Verdict,
}

fn ga_elitism_and_budget() -> GaOutcome {
    let start = Instant::now();
    let base = RunConfig::default();
    let budget = base.ga.movement_budget;
    let bounds = default_bounds();
    let seen = Mutex::new((0u64, 0u64, Vec::<String>::new()));
    let hook = |_: &[f64], _: u64, trace: &SimulationTrace| {
        let m = metrics(trace);
        let mut s = seen.lock().unwrap();
        s.0 += 1;
        s.1 = s.1.max(m.max_moves());
        if m.max_moves() > budget || trace.config_value("agent.movement_budget") != Some(&budget.to_string()) {
            s.2.push(format!("moves {:?}", m.moves_per_agent));
        }
    };
    let seq = evolve(
        &base,
        &bounds,
        &Evaluator {
            parallelism: Parallelism::Sequential,
            hook: Some(&hook),
        },
    );
    let par = evolve(
        &base,
        &bounds,
        &Evaluator {
            parallelism: Parallelism::Threads(4),
            hook: None,
        },
    );
    let elapsed = start.elapsed();

    let verdict8 = (|| {
        let seq = seq.as_ref().map_err(|e| e.to_string())?;
        let par = par.as_ref().map_err(|e| e.to_string())?;
        ensure(seq.history.len() == base.ga.generations + 1, "history length")?;
        let drops = seq.history.windows(2).filter(|w| w[1].best < w[0].best).count();
        ensure(drops == 0, format!("best fitness dropped {drops} times"))?;
        ensure(seq == par, "parallel and sequential runs differ")?;
        within(elapsed, Duration::from_secs(300))?;
        Ok(format!(
            "best {} -> {} over {} generations (pop {}, {} seeds), parallel == sequential, {elapsed:.1?}",
            seq.history[0].best,
            seq.history.last().unwrap().best,
            base.ga.generations,
            base.ga.population_size,
            base.ga.eval_seeds.len()
        ))
    })();

    let (traces, max_moves, bad) = seen.into_inner().unwrap();
    let verdict9 = (|| {
        let seq = seq.as_ref().map_err(|e| e.to_string())?;
        let expected = (seq.evaluations * base.ga.eval_seeds.len()) as u64;
        ensure(traces == expected, format!("hook saw {traces} traces, expected {expected}"))?;
        ensure(bad.is_empty(), format!("{} traces over budget, first {:?}", bad.len(), bad.first()))?;
        Ok(format!("{traces} evaluated traces, max per-agent moves {max_moves} <= B = {budget}"))
    })();
    GaOutcome { verdict8, verdict9 }
}

fn cli_contract(dir: &Path) -> Verdict {
    let out = cli(&["simulate", "--no-such-flag"]);
    ensure(out.status.code() == Some(2), format!("usage error exit {:?}", out.status.code()))?;
    let out = cli(&[]);
    ensure(out.status.code() == Some(2), format!("missing subcommand exit {:?}", out.status.code()))?;

    let bad = dir.join("bad.conf");
    fs::write(&bad, "world.n_agents = 2\nagent.explore_rate = 7\n").map_err(|e| e.to_string())?;
    let out = cli(&["simulate", "--config", bad.to_str().unwrap(), "--out", dir.join("bad").to_str().unwrap()]);
    let stderr = String::from_utf8_lossy(&out.stderr);
    ensure(out.status.code() == Some(1), format!("config error exit {:?}", out.status.code()))?;
    ensure(stderr.contains("agent.explore_rate"), format!("error does not name the key: {stderr}"))?;

    let conf = dir.join("run.conf");
    fs::write(&conf, "world.n_agents = 4\nworld.resolution = 6\nworld.total_ticks = 800\n").map_err(|e| e.to_string())?;
    let first = dir.join("first");
    cli_ok(&["simulate", "--config", conf.to_str().unwrap(), "--seed", "31", "--out", first.to_str().unwrap()])?;
    let manifest = read(&first.join("manifest.conf"))?;
    let replayed_cfg = parse_config(&manifest).map_err(|e| e.to_string())?;
    let mut expected = parse_config(&read(&conf)?).map_err(|e| e.to_string())?;
    expected.world.master_seed = 31;
    ensure(replayed_cfg == expected, "manifest does not reproduce the effective config")?;
    let second = dir.join("second");
    cli_ok(&["simulate", "--config", first.join("manifest.conf").to_str().unwrap(), "--out", second.to_str().unwrap()])?;
    ensure(
        read(&first.join("trace.csv"))? == read(&second.join("trace.csv"))?,
        "rerun from manifest changed the trace",
    )?;

    let out = cli(&["metrics", "--trace", first.join("trace.csv").to_str().unwrap()]);
    ensure(out.status.success(), "metrics subcommand failed")?;
    let printed = String::from_utf8_lossy(&out.stdout).into_owned();
    ensure(printed == read(&first.join("metrics.csv"))?, "metrics output differs from metrics.csv")?;
    let trace = SimulationTrace::read_from(&read(&first.join("trace.csv"))?).map_err(|e| e.to_string())?;
    let audit = audit_interactions(&trace);
    let line = format!("interactions,{}\n", audit.interactions);
    ensure(printed.contains(&line), "metrics interaction count disagrees with the replayed trace")?;
    Ok(format!(
        "exit codes 2/1/0, manifest round-trips, metrics consistent ({} interactions)",
        audit.interactions
    ))
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let mut results: Vec<(u32, &str, Verdict)> = vec![
        (1, "GP covariance law", gp_covariance_law()),
        (2, "bump shape and inverse", bump_shape_and_inverse()),
        (3, "dream walk bound", walk_bound()),
        (4, "emotion fuzz and sign contract", emotion_fuzz()),
        (5, "sleep frequency", sleep_frequency()),
        (6, "byte-identical traces", byte_identical_traces(dir.path())),
        (7, "interaction replay", interaction_replay()),
    ];
    let ga = ga_elitism_and_budget();
    results.push((8, "GA elitism and parallel determinism", ga.verdict8));
    results.push((9, "movement budget in GA traces", ga.verdict9));
    results.push((10, "CLI contract", cli_contract(dir.path())));

    let mut failed = 0;
    for (n, name, verdict) in &results {
        match verdict {
            Ok(detail) => println!("criterion {n:>2} PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
