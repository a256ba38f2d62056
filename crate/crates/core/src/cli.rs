//! Command-line entry points.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{AblationPreset, BackendKind, RunConfig};
use crate::engine::{self, Engine, RunOptions, RunSummary};
use crate::llm::replay::write_transcript;
use crate::population::SolutionId;
use crate::problems::{self, ProblemId, ScoreOptions};
use crate::report::ReportSeries;
use crate::sandbox::CandidateLanguage;
use crate::scripted::{scripted_transcript, ScriptOptions};

#[derive(Debug, Parser)]
#[command(name = "codevolve", version, about = "Island-model program evolution with LLM operators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Start a new run.
    Run(RunArgs),
    /// Continue a run from its checkpoint.
    Resume(ResumeArgs),
    /// Score an artifact file; exits 0 iff it is valid.
    Score(ScoreArgs),
    /// Emit per-epoch best-fitness series as CSV.
    Report(ReportArgs),
    /// Copy a solution's program and artifact out of a run.
    Export(ExportArgs),
    /// Write a synthetic replay transcript for offline runs.
    Transcript(TranscriptArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "run")]
    pub run_dir: PathBuf,
    #[arg(long)]
    pub problem: Option<ProblemId>,
    #[arg(long)]
    pub epochs: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_backend)]
    pub backend: Option<BackendKind>,
    #[arg(long, value_parser = parse_ablation)]
    pub ablation: Option<AblationPreset>,
    /// Replay transcript (implies `--backend replay` unless given).
    #[arg(long)]
    pub transcript: Option<PathBuf>,
    #[arg(long)]
    pub islands: Option<usize>,
    /// Candidate language: `python` or `shell`.
    #[arg(long, value_parser = parse_language)]
    pub language: Option<CandidateLanguage>,
    /// Stop cleanly after this epoch; continue later with `resume`.
    #[arg(long)]
    pub stop_after: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ResumeArgs {
    #[arg(long, default_value = "run")]
    pub run_dir: PathBuf,
    /// Extend or shorten the total epoch budget.
    #[arg(long)]
    pub epochs: Option<u64>,
    #[arg(long)]
    pub stop_after: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub problem: ProblemId,
    pub artifact: PathBuf,
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Score against a different circle or point count than the instance's.
    #[arg(long)]
    pub count: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long, default_value = "run")]
    pub run_dir: PathBuf,
    /// Reference maximum `M`; defaults to the run's best.
    #[arg(long)]
    pub m: Option<f64>,
    #[arg(long, default_value_t = 1e-4)]
    pub epsilon: f64,
    /// Write the table here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long, default_value = "run")]
    pub run_dir: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Solution id such as `s0-12`; defaults to the run's best.
    #[arg(long)]
    pub solution: Option<SolutionId>,
}

#[derive(Debug, Args)]
pub struct TranscriptArgs {
    #[arg(long)]
    pub problem: ProblemId,
    #[arg(long)]
    pub calls: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_parser = parse_language, default_value = "shell")]
    pub language: CandidateLanguage,
    /// Emit only well-formed, valid constructions.
    #[arg(long)]
    pub all_valid: bool,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_backend(s: &str) -> Result<BackendKind, String> {
    s.parse().map_err(|e: crate::config::ConfigError| e.to_string())
}

fn parse_ablation(s: &str) -> Result<AblationPreset, String> {
    s.parse().map_err(|e: crate::config::ConfigError| e.to_string())
}

fn parse_language(s: &str) -> Result<CandidateLanguage, String> {
    match s {
        "python" => Ok(CandidateLanguage::Python),
        "shell" | "sh" => Ok(CandidateLanguage::Shell),
        other => Err(format!("unknown language {other:?}")),
    }
}

/// Exit codes: 0 success, 1 failure (including an invalid artifact), 2 bad input.
pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

fn print_summary(out: &mut dyn Write, s: &RunSummary) -> std::io::Result<()> {
    writeln!(out, "problem: {}", s.problem)?;
    writeln!(out, "epochs: {}/{}{}", s.epochs_completed, s.total_epochs, if s.finished { "" } else { " (stopped)" })?;
    writeln!(out, "migrations: {}", s.migrations)?;
    writeln!(out, "llm calls: {}", s.llm_calls)?;
    match &s.best {
        Some(b) => {
            writeln!(out, "best solution: {} (island {})", b.id, b.island)?;
            writeln!(out, "best fitness: {}", b.fitness)?;
            match (b.objective, b.delta_vs_reference) {
                (Some(o), Some(d)) => {
                    writeln!(out, "best objective: {o}")?;
                    writeln!(out, "reference: {} (delta {d:+e})", b.reference)?;
                }
                _ => writeln!(out, "best objective: none")?,
            }
        }
        None => writeln!(out, "best solution: none")?,
    }
    Ok(())
}

fn build_run_config(args: &RunArgs) -> Result<RunConfig, String> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            let mut value: toml::Table = text.parse().map_err(|e| format!("invalid config: {e}"))?;
            if let Some(p) = args.problem {
                value.insert("problem".into(), toml::Value::String(p.as_str().into()));
            }
            let mut c: RunConfig = value.try_into().map_err(|e| format!("invalid config: {e}"))?;
            // transcripts named in a config file are relative to that file
            if let (Some(t), Some(dir)) = (&c.llm.transcript, path.parent()) {
                if t.is_relative() {
                    c.llm.transcript = Some(absolute(&dir.join(t)));
                }
            }
            c
        }
        None => RunConfig::new(args.problem.ok_or("either --config or --problem is required")?),
    };
    if let Some(e) = args.epochs {
        config.epochs = Some(e);
    }
    if let Some(s) = args.seed {
        config.master_seed = s;
    }
    if let Some(n) = args.islands {
        config.num_islands = n;
    }
    if let Some(l) = args.language {
        config.sandbox.language = l;
    }
    if let Some(a) = args.ablation {
        config.apply_preset(a);
    }
    if let Some(t) = &args.transcript {
        config.llm.transcript = Some(absolute(t));
        config.llm.backend = BackendKind::Replay;
    }
    if let Some(b) = args.backend {
        config.llm.backend = b;
    }
    config.validate().map_err(|e| e.to_string())?;
    Ok(config)
}

pub fn cmd_run(args: &RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let config = match build_run_config(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let result = Engine::new(config, &args.run_dir).and_then(|e| e.run(RunOptions { stop_after: args.stop_after }));
    finish(result, out, err)
}

fn finish(result: Result<RunSummary, engine::EngineError>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match result {
        Ok(s) => {
            let _ = print_summary(out, &s);
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                engine::EngineError::Config(_) => EXIT_USAGE,
                _ => EXIT_FAIL,
            }
        }
    }
}

pub fn cmd_resume(args: &ResumeArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = engine::load_run_config(&args.run_dir).and_then(|mut config| {
        if let Some(e) = args.epochs {
            config.epochs = Some(e);
            config.validate()?;
        }
        Engine::new(config, &args.run_dir)?.resume(RunOptions { stop_after: args.stop_after })
    });
    finish(result, out, err)
}

pub fn cmd_score(args: &ScoreArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let raw = match std::fs::read(&args.artifact) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "error: cannot read {}: {e}", args.artifact.display());
            return EXIT_USAGE;
        }
    };
    let mut options = ScoreOptions::default();
    if let Some(t) = args.tolerance {
        options.tolerance = t;
    }
    options.instance_size = args.count.or(options.instance_size);
    match problems::score_raw(args.problem, &raw, &options) {
        Ok(report) => {
            let _ = writeln!(out, "{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            if report.valid {
                EXIT_OK
            } else {
                EXIT_FAIL
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_FAIL
        }
    }
}

pub fn cmd_report(args: &ReportArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let series = match ReportSeries::from_run_dir(&args.run_dir) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_FAIL;
        }
    };
    let csv = series.to_csv(args.m.unwrap_or_else(|| series.max_global()), args.epsilon);
    match &args.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, csv) {
                let _ = writeln!(err, "error: cannot write {}: {e}", path.display());
                return EXIT_FAIL;
            }
        }
        None => {
            let _ = out.write_all(csv.as_bytes());
        }
    }
    EXIT_OK
}

pub fn cmd_export(args: &ExportArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = engine::load_run_config(&args.run_dir).and_then(|config| {
        let engine =
            Engine::with_backend(config, &args.run_dir, std::sync::Arc::new(crate::llm::ReplayBackend::default()));
        let state = engine.run_dir().load_checkpoint()?;
        let solution = match args.solution {
            Some(id) => state.islands.iter().find_map(|i| i.find(&id)).cloned(),
            None => state.best().cloned(),
        };
        let Some(solution) = solution else {
            return Ok(None);
        };
        engine::export_solution(engine.run_dir(), &solution, &args.out)?;
        Ok(Some(solution.id))
    });
    match result {
        Ok(Some(id)) => {
            let _ = writeln!(out, "exported {id} to {}", args.out.display());
            EXIT_OK
        }
        Ok(None) => {
            let _ = writeln!(err, "error: no such solution in the run");
            EXIT_FAIL
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_FAIL
        }
    }
}

pub fn cmd_transcript(args: &TranscriptArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let options = if args.all_valid { ScriptOptions::all_valid() } else { ScriptOptions::default() };
    let records = scripted_transcript(args.problem, args.language, args.calls, args.seed, &options);
    match write_transcript(&args.out, &records) {
        Ok(()) => {
            let _ = writeln!(out, "wrote {} records to {}", records.len(), args.out.display());
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_FAIL
        }
    }
}

/// Parses `args` (including the program name) and dispatches.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_USAGE;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    match &cli.command {
        Command::Run(a) => cmd_run(a, out, err),
        Command::Resume(a) => cmd_resume(a, out, err),
        Command::Score(a) => cmd_score(a, out, err),
        Command::Report(a) => cmd_report(a, out, err),
        Command::Export(a) => cmd_export(a, out, err),
        Command::Transcript(a) => cmd_transcript(a, out, err),
    }
}
