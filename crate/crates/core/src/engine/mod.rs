//! The epoch loop: island steps, evaluation, population control, migration
//! and the run lifecycle.

pub mod evaluate;
pub mod migration;
pub mod store;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{BackendKind, ConfigError, RunConfig};
use crate::llm::{ChatBackend, Ensemble, HttpBackend, ReplayBackend};
use crate::operators::{
    evolve_step, gate_crossover, generate_root, initial_prompt_of, initialize_island, CallRecord, OperatorKind,
    OperatorOutcome, StepContext,
};
use crate::population::{InsertOutcome, IslandState, PromptId, Solution, SolutionId, SolutionStatus};
use crate::problems::{self, reference_best, ProblemId};
use crate::sandbox::Sandbox;

pub use evaluate::{evaluate_candidate, Evaluation};
pub use migration::{migrant_quota, migrate, select_migrants, MigrantCopy, MigrationEvent};
pub use store::RunDir;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
    #[error("checkpoint integrity error: {0}")]
    Integrity(String),
    #[error("island {0} has no live solutions")]
    EmptyIsland(usize),
}

/// What happened to one generated solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionEvent {
    pub epoch: u64,
    pub island: usize,
    pub operator: OperatorKind,
    pub model: Option<String>,
    pub solution: SolutionId,
    pub parent: Option<SolutionId>,
    pub prompt: PromptId,
    pub new_prompt: Option<PromptId>,
    pub inspirations: Vec<SolutionId>,
    pub ancestors: usize,
    /// Live population size of the island when the step ran.
    pub population: usize,
    pub status: SolutionStatus,
    pub fitness: f64,
    pub objective: Option<f64>,
    /// `inserted`, `rejected`, `evicted` or `skipped` (generation failures).
    pub insert: String,
    pub evicted: Option<SolutionId>,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochSummary {
    pub epoch: u64,
    pub island_best: Vec<f64>,
    pub global_best: f64,
}

/// A line of `events.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    Solution(SolutionEvent),
    Migration(MigrationEvent),
    Epoch(EpochSummary),
}

/// Everything needed to continue a run exactly where it stopped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    pub islands: Vec<IslandState>,
    /// Last completed epoch; 0 once initialization is done.
    pub epoch: u64,
    pub first_migration_epoch: Option<u64>,
    pub events_len: u64,
    pub calls_len: u64,
    pub migrations: u64,
    /// Best live fitness per island after each completed epoch, from epoch 0.
    pub history: Vec<Vec<f64>>,
    pub status_counts: BTreeMap<String, u64>,
}

impl RunState {
    pub fn best(&self) -> Option<&Solution> {
        self.islands.iter().filter_map(|i| i.best()).fold(None, |acc: Option<&Solution>, s| match acc {
            Some(a) if a.fitness >= s.fitness => Some(a),
            _ => Some(s),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestRecord {
    pub id: SolutionId,
    pub island: usize,
    pub fitness: f64,
    pub objective: Option<f64>,
    pub reference: f64,
    /// `objective - reference`; positive is better for maximization problems.
    pub delta_vs_reference: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub problem: ProblemId,
    pub epochs_completed: u64,
    pub total_epochs: u64,
    pub finished: bool,
    pub best: Option<BestRecord>,
    /// `[epoch][island]` best fitness, epoch 0 being the initial population.
    pub island_best: Vec<Vec<f64>>,
    pub global_best: Vec<f64>,
    pub migrations: u64,
    pub status_counts: BTreeMap<String, u64>,
    pub llm_calls: u64,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Stop cleanly (with a checkpoint) after this epoch completes.
    pub stop_after: Option<u64>,
}

struct StepOutput {
    events: Vec<Event>,
    calls: Vec<CallRecord>,
}

/// A configured run bound to a run directory.
pub struct Engine {
    config: RunConfig,
    dir: RunDir,
    ensemble: Ensemble,
    sandbox: Sandbox,
    brief: String,
    initial_code: String,
}

fn extension(config: &RunConfig) -> String {
    let name = config.sandbox.language.script_name();
    Path::new(name).extension().and_then(|e| e.to_str()).unwrap_or("txt").to_string()
}

/// Backend described by `config`; relative transcript paths resolve against
/// the run directory.
pub fn backend_for(config: &RunConfig, run_dir: &Path) -> Result<Arc<dyn ChatBackend>, EngineError> {
    Ok(match config.llm.backend {
        BackendKind::Http => Arc::new(HttpBackend::from_env(config.llm.http.clone())),
        BackendKind::Replay => {
            let rel = config.llm.transcript.as_ref().ok_or_else(|| {
                EngineError::Config(ConfigError::Invalid("the replay backend needs llm.transcript".into()))
            })?;
            let path = if rel.is_absolute() { rel.clone() } else { run_dir.join(rel) };
            let backend = ReplayBackend::load(&path).map_err(|source| EngineError::Io {
                context: format!("loading transcript {}", path.display()),
                source,
            })?;
            Arc::new(backend.strict(config.llm.strict))
        }
    })
}

impl Engine {
    pub fn new(config: RunConfig, run_dir: &Path) -> Result<Self, EngineError> {
        config.validate()?;
        let backend = backend_for(&config, run_dir)?;
        Ok(Self::with_backend(config, run_dir, backend))
    }

    /// Uses `backend` instead of the one named in the config.
    pub fn with_backend(config: RunConfig, run_dir: &Path, backend: Arc<dyn ChatBackend>) -> Self {
        let language = config.sandbox.language;
        let ensemble = Ensemble::new(config.llm.ensemble.clone(), language, backend);
        let sandbox = Sandbox::new(config.sandbox.sandbox_config(), config.sandbox.workers);
        Engine {
            dir: RunDir::new(run_dir, &extension(&config)),
            brief: problems::problem_brief(config.problem, language),
            initial_code: problems::trivial_program(config.problem, language),
            config,
            ensemble,
            sandbox,
        }
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn run_dir(&self) -> &RunDir {
        &self.dir
    }

    /// Starts a fresh run, discarding any previous logs in the run directory.
    pub fn run(&self, options: RunOptions) -> Result<RunSummary, EngineError> {
        let mut state = self.start()?;
        self.advance(&mut state, options)
    }

    /// Continues from the checkpoint in the run directory.
    pub fn resume(&self, options: RunOptions) -> Result<RunSummary, EngineError> {
        let mut state = self.dir.load_checkpoint()?;
        if state.islands.len() != self.config.num_islands {
            return Err(EngineError::Integrity("checkpoint island count differs from the config".into()));
        }
        self.dir.truncate(store::EVENTS_FILE, state.events_len)?;
        self.dir.truncate(store::CALLS_FILE, state.calls_len)?;
        // the epoch budget may have been changed for this resume
        self.dir.write_atomic(store::CONFIG_FILE, self.config.to_toml().as_bytes())?;
        self.advance(&mut state, options)
    }

    fn start(&self) -> Result<RunState, EngineError> {
        self.dir.create()?;
        self.dir.write_atomic(store::CONFIG_FILE, self.config.to_toml().as_bytes())?;
        self.dir.truncate(store::EVENTS_FILE, 0)?;
        self.dir.truncate(store::CALLS_FILE, 0)?;
        let _ = std::fs::remove_file(self.dir.path(store::CHECKPOINT_FILE));

        let mut islands: Vec<IslandState> = (0..self.config.num_islands)
            .map(|i| IslandState::new(i, self.config.max_population, self.config.master_seed))
            .collect();
        let params = self.config.operator_params();
        let outputs = self.per_island(&mut islands, |isl| {
            let ctx = StepContext {
                ensemble: &self.ensemble,
                params: &params,
                problem_brief: &self.brief,
                epoch: 0,
                crossover: false,
            };
            let init = initialize_island(
                isl,
                &ctx,
                &self.initial_code,
                &problems::initial_prompt(self.config.problem),
                self.config.init_population,
            );
            let trivial = OperatorOutcome {
                new_solution: init.trivial,
                new_prompt: None,
                operator: OperatorKind::Init,
                model_used: None,
                parent_id: None,
                inspirations: vec![],
                ancestors: 0,
                calls: vec![],
                failure: None,
            };
            let mut out = StepOutput { events: vec![], calls: vec![] };
            for outcome in std::iter::once(trivial).chain(init.generated) {
                let o = self.absorb(isl, outcome, 0)?;
                out.events.extend(o.events);
                out.calls.extend(o.calls);
            }
            Ok(out)
        })?;

        let mut state = RunState {
            islands,
            epoch: 0,
            first_migration_epoch: None,
            events_len: 0,
            calls_len: 0,
            migrations: 0,
            history: vec![],
            status_counts: BTreeMap::new(),
        };
        let mut events = Vec::new();
        let mut calls = Vec::new();
        for o in outputs {
            events.extend(o.events);
            calls.extend(o.calls);
        }
        self.close_epoch(&mut state, 0, events, calls)?;
        self.dir.save_checkpoint(&state)?;
        Ok(state)
    }

    /// Runs `work` on every island concurrently; results come back in island order.
    fn per_island<F>(&self, islands: &mut [IslandState], work: F) -> Result<Vec<StepOutput>, EngineError>
    where
        F: Fn(&mut IslandState) -> Result<StepOutput, EngineError> + Sync,
    {
        let work = &work;
        std::thread::scope(|s| {
            let handles: Vec<_> = islands.iter_mut().map(|isl| s.spawn(move || work(isl))).collect();
            handles.into_iter().map(|h| h.join().expect("island worker panicked")).collect()
        })
    }

    /// Evaluates an outcome and applies population control on its island.
    fn absorb(
        &self,
        island: &mut IslandState,
        outcome: OperatorOutcome,
        epoch: u64,
    ) -> Result<StepOutput, EngineError> {
        if let Some(p) = &outcome.new_prompt {
            island.add_prompt(p.clone());
        }
        let limits = self.config.resource_limits();
        let mut eval = evaluate_candidate(
            self.config.problem,
            outcome.new_solution,
            &self.sandbox,
            &limits,
            &self.config.score_options(),
        );
        let id = eval.solution.id;
        eval.solution.log_ref = Some(self.dir.log_ref(&id));
        self.dir.write_solution(&id, &eval.solution.code, &eval.log, eval.artifact.as_deref())?;
        let sol = eval.solution;
        let event = SolutionEvent {
            epoch,
            island: island.id,
            operator: outcome.operator,
            model: outcome.model_used,
            solution: id,
            parent: sol.parent_id,
            prompt: sol.parent_prompt_id,
            new_prompt: outcome.new_prompt.as_ref().map(|p| p.id),
            inspirations: outcome.inspirations,
            ancestors: outcome.ancestors,
            population: island.solutions.len(),
            status: sol.status,
            fitness: sol.fitness,
            objective: sol.objective(),
            insert: String::new(),
            evicted: None,
            failure: outcome.failure,
        };
        let (insert, evicted) = if sol.status == SolutionStatus::GenerationFailed {
            island.archive(sol);
            ("skipped".to_string(), None)
        } else {
            let r = island.try_insert(sol);
            let evicted = match r {
                InsertOutcome::InsertedWithEviction(e) => Some(e),
                _ => None,
            };
            (r.label().to_string(), evicted)
        };
        Ok(StepOutput {
            events: vec![Event::Solution(SolutionEvent { insert, evicted, ..event })],
            calls: outcome.calls,
        })
    }

    fn step_island(&self, island: &mut IslandState, epoch: u64, crossover: bool) -> Result<StepOutput, EngineError> {
        let params = self.config.operator_params();
        let ctx =
            StepContext { ensemble: &self.ensemble, params: &params, problem_brief: &self.brief, epoch, crossover };
        let outcome = if self.config.ablation.evolution {
            evolve_step(island, &ctx).map_err(|_| EngineError::EmptyIsland(island.id))?
        } else {
            let prompt = initial_prompt_of(island).cloned().ok_or(EngineError::EmptyIsland(island.id))?;
            generate_root(island, &ctx, &self.initial_code, &prompt)
        };
        self.absorb(island, outcome, epoch)
    }

    /// Appends an epoch's records and updates counters and history.
    fn close_epoch(
        &self,
        state: &mut RunState,
        epoch: u64,
        mut events: Vec<Event>,
        calls: Vec<CallRecord>,
    ) -> Result<(), EngineError> {
        for e in &events {
            if let Event::Solution(s) = e {
                *state.status_counts.entry(s.status.as_str().to_string()).or_default() += 1;
            }
        }
        let island_best: Vec<f64> = state.islands.iter().map(|i| i.best_fitness()).collect();
        let global_best = island_best.iter().copied().fold(0.0, f64::max);
        events.push(Event::Epoch(EpochSummary { epoch, island_best: island_best.clone(), global_best }));
        state.history.push(island_best);
        state.events_len += self.dir.append_jsonl(store::EVENTS_FILE, &events)?;
        state.calls_len += self.dir.append_jsonl(store::CALLS_FILE, &calls)?;
        state.epoch = epoch;
        Ok(())
    }

    fn advance(&self, state: &mut RunState, options: RunOptions) -> Result<RunSummary, EngineError> {
        let total = self.config.total_epochs();
        for epoch in state.epoch + 1..=total {
            let crossover = gate_crossover(epoch, state.first_migration_epoch, self.config.ablation.inspirations);
            let outputs = self.per_island(&mut state.islands, |isl| self.step_island(isl, epoch, crossover))?;
            let mut events = Vec::new();
            let mut calls = Vec::new();
            for o in outputs {
                events.extend(o.events);
                calls.extend(o.calls);
            }
            let migrating = self.config.ablation.evolution && epoch % self.config.migration_every == 0;
            if migrating {
                let migration = migrate(&mut state.islands, &self.config.topology, self.config.migration_rate, epoch);
                for m in &migration {
                    for c in &m.copies {
                        self.dir.copy_solution(&c.source_id, &c.id)?;
                    }
                }
                state.migrations += 1;
                state.first_migration_epoch.get_or_insert(epoch);
                log::info!(
                    "epoch {epoch}: {} islands sent migrants",
                    migration.iter().filter(|m| !m.migrated.is_empty()).count()
                );
                events.extend(migration.into_iter().map(Event::Migration));
            }
            self.close_epoch(state, epoch, events, calls)?;
            log::debug!(
                "epoch {epoch}/{total}: global best {}",
                state.history.last().map_or(0.0, |h| h.iter().copied().fold(0.0, f64::max))
            );
            let periodic = self.config.checkpoint_every.is_some_and(|k| epoch % k == 0);
            let stopping = options.stop_after == Some(epoch) && epoch < total;
            if migrating || periodic || stopping || epoch == total {
                self.dir.save_checkpoint(state)?;
            }
            if stopping {
                break;
            }
        }
        let summary = self.summarize(state);
        if summary.finished {
            self.export_best(state)?;
        }
        self.dir.write_atomic(
            store::SUMMARY_FILE,
            serde_json::to_string_pretty(&summary).expect("summary serializes").as_bytes(),
        )?;
        Ok(summary)
    }

    fn summarize(&self, state: &RunState) -> RunSummary {
        let reference = reference_best(self.config.problem).codeevolve;
        let best = state.best().map(|s| BestRecord {
            id: s.id,
            island: s.island_id,
            fitness: s.fitness,
            objective: s.objective(),
            reference,
            delta_vs_reference: s.objective().map(|o| o - reference),
        });
        RunSummary {
            problem: self.config.problem,
            epochs_completed: state.epoch,
            total_epochs: self.config.total_epochs(),
            finished: state.epoch >= self.config.total_epochs(),
            best,
            global_best: state.history.iter().map(|h| h.iter().copied().fold(0.0, f64::max)).collect(),
            island_best: state.history.clone(),
            migrations: state.migrations,
            status_counts: state.status_counts.clone(),
            llm_calls: state.islands.iter().map(|i| i.llm_calls).sum(),
        }
    }

    /// Writes the best program, its artifact and metadata under `best/`.
    fn export_best(&self, state: &RunState) -> Result<(), EngineError> {
        let Some(best) = state.best() else { return Ok(()) };
        export_solution(&self.dir, best, &self.dir.path(store::BEST_DIR))
    }
}

/// Copies `solution`'s program, artifact and a metadata file into `out`.
pub fn export_solution(dir: &RunDir, solution: &Solution, out: &Path) -> Result<(), EngineError> {
    let err = |context: String| move |source| EngineError::Io { context, source };
    std::fs::create_dir_all(out).map_err(err(format!("creating {}", out.display())))?;
    let code_name = dir
        .code_path(&solution.id)
        .extension()
        .map(|e| format!("program.{}", e.to_string_lossy()))
        .unwrap_or_else(|| "program".into());
    let write = |name: &str, bytes: &[u8]| {
        let p = out.join(name);
        std::fs::write(&p, bytes).map_err(err(format!("writing {}", p.display())))
    };
    write(&code_name, solution.code.as_bytes())?;
    if let Some(a) = dir.read_artifact(&solution.id) {
        write("artifact.json", &a)?;
    }
    write("solution.json", serde_json::to_string_pretty(solution).expect("serializes").as_bytes())
}

/// Loads the config snapshot stored in a run directory.
pub fn load_run_config(run_dir: &Path) -> Result<RunConfig, EngineError> {
    Ok(RunConfig::load(&run_dir.join(store::CONFIG_FILE))?)
}

/// Reads and parses `events.jsonl`.
pub fn read_events(run_dir: &Path) -> Result<Vec<Event>, EngineError> {
    let path: PathBuf = run_dir.join(store::EVENTS_FILE);
    let text = std::fs::read_to_string(&path)
        .map_err(|source| EngineError::Io { context: format!("reading {}", path.display()), source })?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(n, l)| {
            serde_json::from_str(l).map_err(|e| EngineError::Integrity(format!("{}:{}: {e}", path.display(), n + 1)))
        })
        .collect()
}
