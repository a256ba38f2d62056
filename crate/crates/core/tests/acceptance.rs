//! Acceptance gate. Runs every criterion at its stated tolerance and time
//! budget, prints one PASS/FAIL line each, and exits nonzero on any failure.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use codevolve::config::{BackendKind, RunConfig};
use codevolve::diff::{apply_response, parse_response, render, DiffError, EditBlock, ParsedResponse};
use codevolve::engine::{read_events, Engine, Event, MigrationEvent, RunOptions};
use codevolve::llm::replay::write_transcript;
use codevolve::llm::{ChatBackend, ChatCall, ReplayBackend, TransportError};
use codevolve::operators::{draw_operator, OperatorKind};
use codevolve::population::{IslandRng, IslandState, PromptId, Solution, SolutionId, SolutionStatus};
use codevolve::problems::{
    reference_best, score_p1, score_p2, score_p3, score_p4, Circle, CirclePackingArtifact, DistanceRatio,
    PointSetArtifact, ProblemId, StepFunctionArtifact,
};
use codevolve::sandbox::CandidateLanguage;
use codevolve::scripted::{calls_needed, scripted_transcript, ScriptOptions};
use codevolve::selection::RankDistribution;

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {{
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    }};
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn c1_scorers() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let p1 = |h: Vec<f64>| score_p1(&StepFunctionArtifact { heights: h });

    let one = p1(vec![1.0]).objective.unwrap();
    ensure!((one - 2.0 / 3.0).abs() <= 1e-12, "score_p1([1]) = {one}");

    for _ in 0..1000 {
        let n = rng.random_range(1..40);
        let h: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
        if h.iter().all(|&x| x == 0.0) {
            continue;
        }
        let base = p1(h.clone()).objective.unwrap();
        let c = rng.random_range(0.01..100.0);
        let scaled = p1(h.iter().map(|x| x * c).collect()).objective.unwrap();
        ensure!(rel_close(base, scaled, 1e-12), "scaling by {c}: {base} vs {scaled}");
        let k = rng.random_range(2..5);
        let refined = p1(h.iter().flat_map(|&x| std::iter::repeat_n(x, k)).collect()).objective.unwrap();
        ensure!(rel_close(base, refined, 1e-12), "refining by {k}: {base} vs {refined}");
    }

    let corners = PointSetArtifact { points: vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]] };
    let ratio = score_p2(&corners, None, DistanceRatio::Squared).objective.unwrap();
    ensure!(ratio == 2.0, "unit-square corners gave {ratio}");

    let inscribed = CirclePackingArtifact::in_unit_square(vec![Circle { x: 0.5, y: 0.5, r: 0.5 }]);
    let r = score_p3(&inscribed, Some(1), 1e-9);
    ensure!(r.valid && r.objective == Some(0.5), "inscribed circle: {r:?}");

    let mut valid = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..12);
        let circles: Vec<Circle> = (0..n)
            .map(|_| Circle {
                x: rng.random_range(0.0..1.0),
                y: rng.random_range(0.0..1.0),
                r: rng.random_range(0.0..0.2),
            })
            .collect();
        let a = CirclePackingArtifact::in_unit_square(circles);
        let (s3, s4) = (score_p3(&a, Some(n), 1e-9), score_p4(&a, Some(n), 1e-9));
        ensure!(s3.valid == s4.valid, "validity differs on {a:?}");
        ensure!(
            s3.objective.map(f64::to_bits) == s4.objective.map(f64::to_bits),
            "objective differs: {:?} vs {:?}",
            s3.objective,
            s4.objective
        );
        valid += s3.valid as usize;
    }
    ensure!(valid > 0 && valid < 1000, "comparison never hit both outcomes ({valid} valid)");
    Ok(format!("p1([1]) = {one:.15}; 1000 scale/refine cases; P4(w=1) = P3 on 1000 ({valid} valid)"))
}

/// Two equal circles centred at (0.5 - a, 0.5 - b) and (0.5 + a, 0.5 + b).
/// Largest feasible radius for the offsets, from first principles.
fn symmetric_pair_radius(a: f64, b: f64) -> f64 {
    (0.5 - a).min(0.5 - b).min((a * a + b * b).sqrt()).max(0.0)
}

fn c2_two_circles() -> Check {
    let mut best = (0.0, 0.0, 0.0);
    let steps = 200;
    for i in 0..=steps {
        for j in 0..=steps {
            let (a, b) = (0.5 * i as f64 / steps as f64, 0.5 * j as f64 / steps as f64);
            let r = symmetric_pair_radius(a, b);
            if r > best.0 {
                best = (r, a, b);
            }
        }
    }
    // compass search from the best grid point
    let mut h = 0.5 / steps as f64;
    while h > 1e-13 {
        let mut moved = false;
        for (da, db) in [(h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h), (h, h), (-h, -h), (h, -h), (-h, h)] {
            let (a, b) = (best.1 + da, best.2 + db);
            let r = symmetric_pair_radius(a, b);
            if r > best.0 {
                best = (r, a, b);
                moved = true;
            }
        }
        if !moved {
            h /= 2.0;
        }
    }
    let found = 2.0 * best.0;
    let target = 2.0 - 2f64.sqrt();
    ensure!((found - target).abs() <= 1e-6, "search reached {found}, want {target}");

    let r = target / 2.0;
    let analytic =
        CirclePackingArtifact::in_unit_square(vec![Circle { x: r, y: r, r }, Circle { x: 1.0 - r, y: 1.0 - r, r }]);
    let report = score_p3(&analytic, Some(2), 1e-9);
    ensure!(report.valid, "analytic configuration rejected: {:?}", report.violations);
    let obj = report.objective.unwrap();
    ensure!((obj - target).abs() <= 1e-9, "analytic objective {obj}");
    Ok(format!("search sum {found:.9}, 2 - sqrt(2) = {target:.9}; analytic config valid at tol 1e-9"))
}

fn solution(island: usize, seq: u64, fitness: f64, epoch: u64) -> Solution {
    let mut s = Solution::pending(SolutionId::new(island, seq), String::new(), None, PromptId::new(island, 1), epoch);
    s.finalize(SolutionStatus::Valid, fitness);
    s
}

fn c3_sampling() -> Check {
    let pop = vec![solution(0, 1, 0.2, 0), solution(0, 2, 0.9, 0), solution(0, 3, 0.5, 0)];
    let dist = RankDistribution::new(&pop).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let draws = 100_000;
    let mut counts: HashMap<SolutionId, usize> = HashMap::new();
    for _ in 0..draws {
        *counts.entry(dist.sample(&mut rng)).or_default() += 1;
    }
    let expected = [(2, 6.0 / 11.0), (3, 3.0 / 11.0), (1, 2.0 / 11.0)];
    let mut freqs = Vec::new();
    for (seq, p) in expected {
        let f = counts.get(&SolutionId::new(0, seq)).copied().unwrap_or(0) as f64 / draws as f64;
        ensure!((f - p).abs() <= 0.01, "rank frequency for s0-{seq}: {f} vs {p}");
        freqs.push(f);
    }

    let mut streams = IslandRng::derive(42, 0);
    let steps = 10_000;
    let explore = (0..steps).filter(|_| draw_operator(0.3, &mut streams.operator) == OperatorKind::Explore).count();
    let share = explore as f64 / steps as f64;
    ensure!((share - 0.3).abs() <= 0.01, "explore share {share}");
    Ok(format!("rank freqs {:.4}/{:.4}/{:.4}; explore share {share:.4}", freqs[0], freqs[1], freqs[2]))
}

/// Reference population rule: fill to capacity, then replace the weakest
/// member (oldest, then lowest id, among equals) only on strict improvement.
fn reference_insert(
    pop: &mut Vec<(f64, u64, SolutionId)>,
    cap: usize,
    cand: (f64, u64, SolutionId),
) -> Option<Option<SolutionId>> {
    if pop.len() < cap {
        pop.push(cand);
        return Some(None);
    }
    let mut sorted = pop.clone();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let worst = sorted[0];
    if cand.0 > worst.0 {
        pop.retain(|x| x.2 != worst.2);
        pop.push(cand);
        Some(Some(worst.2))
    } else {
        None
    }
}

fn c4_population() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut checked = 0;
    for trial in 0..10 {
        let cap = rng.random_range(1..25);
        let mut island = IslandState::new(0, cap, 0);
        let mut reference = Vec::new();
        for op in 0..1000u64 {
            // coarse fitness levels so ties are common
            let fitness = rng.random_range(0..20) as f64 / 4.0;
            let id = island.next_solution_id();
            let epoch = op / 5;
            let outcome = island.try_insert(solution(0, id.seq, fitness, epoch));
            let want = reference_insert(&mut reference, cap, (fitness, epoch, id));
            ensure!(island.solutions.len() <= cap, "trial {trial} op {op}: size {} > {cap}", island.solutions.len());
            let got = match outcome {
                codevolve::population::InsertOutcome::Rejected => None,
                codevolve::population::InsertOutcome::Inserted => Some(None),
                codevolve::population::InsertOutcome::InsertedWithEviction(e) => Some(Some(e)),
            };
            ensure!(got == want, "trial {trial} op {op}: got {got:?}, reference {want:?}");
            let live: HashSet<SolutionId> = island.solutions.iter().map(|s| s.id).collect();
            let expect: HashSet<SolutionId> = reference.iter().map(|x| x.2).collect();
            ensure!(live == expect, "trial {trial} op {op}: live sets differ");
            checked += 1;
        }
    }
    Ok(format!("{checked} inserts match the reference rule, capacity never exceeded"))
}

/// Replay backend that counts the inspiration programs in every request.
struct Recording {
    inner: ReplayBackend,
    seen: Mutex<HashMap<(usize, u64), usize>>,
}

impl ChatBackend for Recording {
    fn complete(&self, call: &ChatCall<'_>) -> Result<String, TransportError> {
        let insp = call.messages.iter().map(|m| m.content.matches("\n### Inspiration ").count()).sum();
        self.seen.lock().unwrap().insert((call.island, call.index), insp);
        self.inner.complete(call)
    }
}

#[derive(Deserialize)]
struct LoggedCall {
    epoch: u64,
    island: usize,
    index: u64,
    kind: String,
}

fn schedule_config(dir: &Path) -> RunConfig {
    let mut c = RunConfig::new(ProblemId::P3A);
    c.num_islands = 5;
    c.epochs = Some(100);
    c.master_seed = 2024;
    c.sandbox.language = CandidateLanguage::Shell;
    c.llm.backend = BackendKind::Replay;
    c.llm.transcript = Some("transcript.jsonl".into());
    let calls = calls_needed(c.init_population, c.total_epochs());
    let t = scripted_transcript(c.problem, c.sandbox.language, calls, 17, &ScriptOptions::default());
    write_transcript(&dir.join("transcript.jsonl"), &t).unwrap();
    c
}

struct ScheduleRun {
    _dir: tempfile::TempDir,
    events: Vec<Event>,
    calls: Vec<LoggedCall>,
    seen: HashMap<(usize, u64), usize>,
}

fn schedule_run() -> Result<ScheduleRun, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let c = schedule_config(dir.path());
    let inner = ReplayBackend::load(&dir.path().join("transcript.jsonl")).map_err(|e| e.to_string())?;
    let backend = Arc::new(Recording { inner, seen: Mutex::new(HashMap::new()) });
    Engine::with_backend(c, dir.path(), backend.clone()).run(RunOptions::default()).map_err(|e| e.to_string())?;
    let events = read_events(dir.path()).map_err(|e| e.to_string())?;
    let calls = std::fs::read_to_string(dir.path().join("llm_calls.jsonl"))
        .map_err(|e| e.to_string())?
        .lines()
        .map(|l| serde_json::from_str(l).map_err(|e| e.to_string()))
        .collect::<Result<Vec<LoggedCall>, _>>()?;
    let seen = backend.seen.lock().unwrap().clone();
    Ok(ScheduleRun { _dir: dir, events, calls, seen })
}

fn c5_migration(run: &ScheduleRun) -> Check {
    let migrations: Vec<&MigrationEvent> = run
        .events
        .iter()
        .filter_map(|e| match e {
            Event::Migration(m) => Some(m),
            _ => None,
        })
        .collect();
    let epochs: Vec<u64> =
        migrations.iter().map(|m| m.epoch).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    ensure!(epochs == [40, 80], "migration epochs {epochs:?}");
    ensure!(migrations.len() == 10, "{} migration events, want 5 per epoch", migrations.len());
    let mut sent: HashSet<SolutionId> = HashSet::new();
    for m in &migrations {
        ensure!(m.migrated.len() == 4, "island {} sent {} at epoch {}", m.source_island, m.migrated.len(), m.epoch);
        let ring = {
            let mut d = vec![(m.source_island + 1) % 5, (m.source_island + 4) % 5];
            d.sort();
            d
        };
        ensure!(m.dest_islands == ring, "island {} sent to {:?}", m.source_island, m.dest_islands);
        ensure!(m.copies.len() == 8, "island {} made {} copies", m.source_island, m.copies.len());
        for id in &m.migrated {
            ensure!(id.island == m.source_island, "{id} migrated from island {}", m.source_island);
            ensure!(sent.insert(*id), "{id} migrated twice");
        }
    }
    Ok("migrations at epochs [40, 80]; 4 migrants x 2 ring neighbours per island; no repeats".into())
}

fn c6_crossover(run: &ScheduleRun) -> Check {
    // after initialization every island issues exactly one generation per epoch
    let mut requested: HashMap<(usize, u64), usize> = HashMap::new();
    for c in run.calls.iter().filter(|c| c.kind == "generate") {
        let n = *run
            .seen
            .get(&(c.island, c.index))
            .ok_or(format!("call ({}, {}) never reached the backend", c.island, c.index))?;
        if c.epoch <= 40 {
            ensure!(n == 0, "epoch {} island {} request carried {n} inspirations", c.epoch, c.island);
        }
        if c.epoch > 0 {
            ensure!(
                requested.insert((c.island, c.epoch), n).is_none(),
                "two generations on island {} at epoch {}",
                c.island,
                c.epoch
            );
        }
    }
    let mut exploits_after = 0;
    for e in &run.events {
        let Event::Solution(s) = e else { continue };
        if s.epoch == 0 {
            continue;
        }
        if s.epoch <= 40 {
            ensure!(s.inspirations.is_empty(), "{} at epoch {} used inspirations", s.solution, s.epoch);
        } else if s.operator == OperatorKind::Exploit {
            let want = 3.min(s.population - 1);
            ensure!(s.inspirations.len() == want, "{}: {} inspirations, want {want}", s.solution, s.inspirations.len());
            ensure!(!s.inspirations.contains(&s.parent.unwrap()), "{} uses its parent as inspiration", s.solution);
            if let Some(&n) = requested.get(&(s.island, s.epoch)) {
                ensure!(n == want, "{}: request carried {n} inspirations, want {want}", s.solution);
            }
            exploits_after += 1;
        }
    }
    ensure!(exploits_after > 0, "no exploit steps after the first migration");
    Ok(format!(
        "{} generation requests checked; {exploits_after} exploit steps after epoch 40 carry min(3, |pop|-1)",
        requested.len()
    ))
}

fn run_bytes(dir: &Path, stop_after: Option<u64>) -> Result<(Vec<u8>, Vec<u8>), String> {
    let c = schedule_config(dir);
    let engine = Engine::new(c, dir).map_err(|e| e.to_string())?;
    if let Some(k) = stop_after {
        let partial = engine.run(RunOptions { stop_after: Some(k) }).map_err(|e| e.to_string())?;
        ensure!(!partial.finished && partial.epochs_completed == k, "stopped at {}", partial.epochs_completed);
        let config = codevolve::engine::load_run_config(dir).map_err(|e| e.to_string())?;
        Engine::new(config, dir)
            .map_err(|e| e.to_string())?
            .resume(RunOptions::default())
            .map_err(|e| e.to_string())?;
    } else {
        engine.run(RunOptions::default()).map_err(|e| e.to_string())?;
    }
    let read = |name: &str| std::fs::read(dir.join(name)).map_err(|e| e.to_string());
    Ok((read("events.jsonl")?, read("llm_calls.jsonl")?))
}

fn c7_determinism() -> Check {
    let dirs: Vec<tempfile::TempDir> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    let a = run_bytes(dirs[0].path(), None)?;
    let b = run_bytes(dirs[1].path(), None)?;
    ensure!(a.0 == b.0, "event logs differ between identical runs");
    ensure!(a.1 == b.1, "call logs differ between identical runs");
    let resumed = run_bytes(dirs[2].path(), Some(50))?;
    ensure!(a.0 == resumed.0, "interrupted-and-resumed event log differs");
    ensure!(a.1 == resumed.1, "interrupted-and-resumed call log differs");
    Ok(format!("{} event bytes identical across 2 runs and a stop-at-50 resume", a.0.len()))
}

#[derive(Deserialize)]
struct DiffFixture {
    name: String,
    source: String,
    response: String,
    expected: Option<String>,
    error: Option<String>,
}

fn error_kind(e: &DiffError) -> &'static str {
    match e {
        DiffError::Malformed { .. } => "malformed",
        DiffError::NotFound { .. } => "not_found",
        DiffError::NoEdits => "no_edits",
    }
}

fn random_line<R: Rng>(rng: &mut R) -> String {
    const WORDS: [&str; 8] = ["x", "= 1", "return", "  ", "def f():", "# note", "<<<", "==="];
    (0..rng.random_range(0..4)).map(|_| WORDS[rng.random_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ")
}

fn c8_diff() -> Check {
    let corpus: Vec<DiffFixture> =
        serde_json::from_str(include_str!("fixtures/diff_corpus.json")).map_err(|e| e.to_string())?;
    ensure!(corpus.len() >= 20, "only {} fixtures", corpus.len());
    let mut kinds = BTreeMap::new();
    for f in &corpus {
        let result = parse_response(&f.response).and_then(|p| {
            *kinds
                .entry(match &p {
                    ParsedResponse::Blocks(b) if b.len() > 1 => "multi",
                    ParsedResponse::Blocks(_) => "single",
                    ParsedResponse::FullReplacement(_) => "full",
                    ParsedResponse::Empty => "empty",
                })
                .or_insert(0) += 1;
            apply_response(&f.source, &p)
        });
        match (&f.expected, &f.error, result) {
            (Some(want), None, Ok(got)) => ensure!(&got == want, "{}: got {got:?}", f.name),
            (None, Some(kind), Err(e)) => ensure!(error_kind(&e) == kind, "{}: got {e}", f.name),
            (_, _, r) => return Err(format!("{}: unexpected {r:?}", f.name)),
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..500 {
        let blocks: Vec<EditBlock> = (0..rng.random_range(1..4))
            .map(|_| {
                let lines = |rng: &mut ChaCha8Rng, min: usize| {
                    (0..rng.random_range(min..4)).map(|_| random_line(rng)).collect::<Vec<_>>()
                };
                let mut search = lines(&mut rng, 1);
                if search.iter().all(String::is_empty) {
                    search[0] = "x".into();
                }
                EditBlock { search: search.join("\n"), replace: lines(&mut rng, 0).join("\n") }
            })
            .collect();
        let parsed = parse_response(&render(&blocks)).map_err(|e| e.to_string())?;
        ensure!(parsed == ParsedResponse::Blocks(blocks.clone()), "round trip failed for {blocks:?}");
    }
    Ok(format!("{} fixtures ({kinds:?}); 500 render/parse round trips", corpus.len()))
}

fn c9_reference() -> Check {
    let table = [
        (ProblemId::P1, 0.89627, 0.93768),
        (ProblemId::P2A, 12.88926, 12.88923),
        (ProblemId::P2B, 4.16585, 4.16578),
        (ProblemId::P3A, 2.63586, 2.63596),
        (ProblemId::P3B, 2.93794, 2.93957),
        (ProblemId::P4, 2.36583, 2.36583),
    ];
    for (p, alpha, ours) in table {
        let r = reference_best(p);
        ensure!(r.alphaevolve == alpha && r.codeevolve == ours, "{p}: {r:?}");
    }
    if std::env::var("CODEVOLVE_LIVE_TEST").is_err() {
        return Ok(
            "reference constants match; live smoke skipped (set CODEVOLVE_LIVE_TEST=1 and CODEVOLVE_API_KEY)".into()
        );
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut c = RunConfig::new(ProblemId::P3A);
    c.num_islands = 2;
    c.epochs = Some(10);
    let summary =
        Engine::new(c, dir.path()).map_err(|e| e.to_string())?.run(RunOptions::default()).map_err(|e| e.to_string())?;
    ensure!(summary.finished, "live run did not finish");
    ensure!(summary.global_best.windows(2).all(|w| w[1] >= w[0]), "global best decreased");
    let obj = summary.best.as_ref().and_then(|b| b.objective).unwrap_or(0.0);
    ensure!(obj > 0.0, "no valid packing found");
    let state = codevolve::engine::RunDir::new(dir.path(), "py").load_checkpoint().map_err(|e| e.to_string())?;
    for isl in &state.islands {
        ensure!(isl.solutions.len() <= isl.capacity, "island {} over capacity", isl.id);
        isl.check_forest().map_err(|e| e.to_string())?;
    }
    Ok(format!("reference constants match; live run best objective {obj}"))
}

fn main() {
    let started = Instant::now();
    let mut failures = 0;
    let mut report = |n: u32, budget: Option<Duration>, f: &dyn Fn() -> Check| {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or(p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        let elapsed = t.elapsed();
        let outcome = match (outcome, budget) {
            (Ok(_), Some(b)) if elapsed > b => Err(format!("took {elapsed:.1?}, budget {b:?}")),
            (o, _) => o,
        };
        match outcome {
            Ok(detail) => println!("PASS criterion {n}: {detail} [{elapsed:.2?}]"),
            Err(detail) => {
                failures += 1;
                println!("FAIL criterion {n}: {detail} [{elapsed:.2?}]");
            }
        }
    };
    let secs = |s| Some(Duration::from_secs(s));

    report(1, secs(10), &c1_scorers);
    report(2, secs(60), &c2_two_circles);
    report(3, secs(10), &c3_sampling);
    report(4, secs(10), &c4_population);

    let t = Instant::now();
    let run = schedule_run();
    let run_time = t.elapsed();
    match &run {
        Ok(run) => {
            report(5, None, &|| {
                if run_time > Duration::from_secs(60) {
                    Err(format!("run took {run_time:.1?}"))
                } else {
                    c5_migration(run)
                }
            });
            report(6, None, &|| c6_crossover(run));
        }
        Err(e) => {
            report(5, None, &|| Err(format!("run failed: {e}")));
            report(6, None, &|| Err(format!("run failed: {e}")));
        }
    }

    report(7, secs(120), &c7_determinism);
    report(8, None, &c8_diff);
    report(9, None, &c9_reference);

    println!("acceptance: {} failed, total {:.2?}", failures, started.elapsed());
    if failures > 0 {
        std::process::exit(1);
    }
}
