//! Runs candidate programs under wall-clock and memory limits.
//!
//! Each execution gets a fresh temporary working directory (also used as
//! `HOME` and `TMPDIR`), runs in its own process group, and is killed as a
//! group on timeout or memory breach. Memory is capped with `RLIMIT_AS` in the
//! child and, on Linux, additionally watched via the group's resident set.
//!
//! This bounds resources only. It is not a security boundary: candidates can
//! still reach the network and any path the user can write to.

use std::io::Read;
use std::os::unix::process::CommandExt;
use std::path::PathBuf;
use std::process::{Child, Command, ExitStatus, Stdio};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

/// Environment variable holding the path the candidate writes its artifact to.
pub const ARTIFACT_ENV: &str = "CODEVOLVE_ARTIFACT";
const ARTIFACT_FILE: &str = "artifact.json";
pub const DEFAULT_LOG_CAP: usize = 1 << 20;
const POLL: Duration = Duration::from_millis(2);
const RSS_POLL: Duration = Duration::from_millis(50);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResourceLimits {
    pub wall_seconds: f64,
    pub memory_bytes: u64,
}

impl ResourceLimits {
    pub fn new(wall_seconds: f64, memory_bytes: u64) -> Self {
        ResourceLimits { wall_seconds, memory_bytes }
    }

    pub fn is_valid(&self) -> bool {
        self.wall_seconds > 0.0 && self.wall_seconds.is_finite() && self.memory_bytes > 0
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateLanguage {
    #[default]
    Python,
    Shell,
}

impl CandidateLanguage {
    pub fn default_interpreter(self) -> Vec<String> {
        match self {
            CandidateLanguage::Python => vec!["python3".into()],
            CandidateLanguage::Shell => vec!["sh".into()],
        }
    }

    pub fn script_name(self) -> &'static str {
        match self {
            CandidateLanguage::Python => "candidate.py",
            CandidateLanguage::Shell => "candidate.sh",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            CandidateLanguage::Python => "Python 3",
            CandidateLanguage::Shell => "POSIX shell",
        }
    }

    pub fn fence_tag(self) -> &'static str {
        match self {
            CandidateLanguage::Python => "python",
            CandidateLanguage::Shell => "sh",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SandboxConfig {
    pub language: CandidateLanguage,
    /// Launch command; the script path is appended. Empty means the
    /// language's default interpreter.
    pub interpreter: Vec<String>,
    /// Parent for the per-run temporary directories; system temp when unset.
    pub scratch_root: Option<PathBuf>,
    pub log_cap_bytes: usize,
    /// Maximum concurrent executions; 0 means one per island.
    pub workers: usize,
}

impl Default for SandboxConfig {
    fn default() -> Self {
        SandboxConfig {
            language: CandidateLanguage::Python,
            interpreter: Vec::new(),
            scratch_root: None,
            log_cap_bytes: DEFAULT_LOG_CAP,
            workers: 0,
        }
    }
}

impl SandboxConfig {
    pub fn shell() -> Self {
        SandboxConfig { language: CandidateLanguage::Shell, ..Default::default() }
    }

    fn command(&self) -> Vec<String> {
        if self.interpreter.is_empty() {
            self.language.default_interpreter()
        } else {
            self.interpreter.clone()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecStatus {
    Ok,
    NonzeroExit,
    Timeout,
    MemoryExceeded,
    SpawnError,
}

/// How the memory ceiling was enforced for one execution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryEnforcement {
    /// `RLIMIT_AS` in the child plus a resident-set watchdog on the group.
    AddressSpaceAndRss,
    AddressSpaceOnly,
    /// The limit could not be applied; only the watchdog (if any) ran.
    BestEffort,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CapturedStream {
    pub text: String,
    pub truncated: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExecutionOutcome {
    pub status: ExecStatus,
    pub exit_code: Option<i32>,
    pub signal: Option<i32>,
    pub stdout: CapturedStream,
    pub stderr: CapturedStream,
    pub wall_time: f64,
    /// Present only when the run succeeded and left an artifact file.
    pub artifact: Option<Vec<u8>>,
    pub memory_enforcement: MemoryEnforcement,
    pub detail: Option<String>,
}

impl ExecutionOutcome {
    fn spawn_error(detail: String) -> Self {
        ExecutionOutcome {
            status: ExecStatus::SpawnError,
            exit_code: None,
            signal: None,
            stdout: CapturedStream { text: String::new(), truncated: false },
            stderr: CapturedStream { text: String::new(), truncated: false },
            wall_time: 0.0,
            artifact: None,
            memory_enforcement: MemoryEnforcement::BestEffort,
            detail: Some(detail),
        }
    }

    /// Full log text as stored next to the solution.
    pub fn log_text(&self) -> String {
        let mut s = format!(
            "status: {:?}\nexit_code: {:?}\nsignal: {:?}\nwall_time_s: {:.3}\nmemory_enforcement: {:?}\n",
            self.status, self.exit_code, self.signal, self.wall_time, self.memory_enforcement
        );
        if let Some(d) = &self.detail {
            s.push_str(&format!("detail: {d}\n"));
        }
        for (name, stream) in [("stdout", &self.stdout), ("stderr", &self.stderr)] {
            s.push_str(&format!("--- {name}{} ---\n", if stream.truncated { " (truncated)" } else { "" }));
            s.push_str(&stream.text);
            if !stream.text.ends_with('\n') {
                s.push('\n');
            }
        }
        s
    }
}

/// Counting semaphore bounding concurrent executions.
struct Permits {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Permits);

impl Permits {
    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

/// A bounded pool of candidate executions sharing one configuration.
pub struct Sandbox {
    config: SandboxConfig,
    permits: Arc<Permits>,
}

impl Sandbox {
    pub fn new(config: SandboxConfig, workers: usize) -> Self {
        let workers = workers.max(1);
        Sandbox { config, permits: Arc::new(Permits { free: Mutex::new(workers), cv: Condvar::new() }) }
    }

    pub fn config(&self) -> &SandboxConfig {
        &self.config
    }

    pub fn run(&self, code: &str, limits: &ResourceLimits) -> ExecutionOutcome {
        let _permit = self.permits.acquire();
        run_candidate(code, limits, &self.config)
    }
}

fn drain<R: Read + Send + 'static>(mut reader: R, cap: usize) -> JoinHandle<CapturedStream> {
    thread::spawn(move || {
        let mut kept = Vec::new();
        let mut truncated = false;
        let mut buf = [0u8; 8192];
        loop {
            match reader.read(&mut buf) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    let room = cap.saturating_sub(kept.len());
                    if n > room {
                        truncated = true;
                    }
                    kept.extend_from_slice(&buf[..n.min(room)]);
                }
            }
        }
        let mut text = String::from_utf8_lossy(&kept).into_owned();
        if truncated {
            text.push_str("\n[truncated]\n");
        }
        CapturedStream { text, truncated }
    })
}

fn kill_group(pgid: i32) {
    // SAFETY: killpg has no memory-safety preconditions.
    unsafe {
        libc::killpg(pgid, libc::SIGKILL);
    }
}

/// Resident set size summed over a process group, from /proc.
#[cfg(target_os = "linux")]
fn group_rss_bytes(pgid: i32) -> Option<u64> {
    // SAFETY: sysconf is always safe to call.
    let page = unsafe { libc::sysconf(libc::_SC_PAGESIZE) }.max(4096) as u64;
    let mut total = 0u64;
    for entry in std::fs::read_dir("/proc").ok()?.flatten() {
        let name = entry.file_name();
        let Some(pid) = name.to_str().and_then(|s| s.parse::<i32>().ok()) else {
            continue;
        };
        let Ok(stat) = std::fs::read_to_string(format!("/proc/{pid}/stat")) else {
            continue;
        };
        // fields after the parenthesized command name
        let Some(rest) = stat.rsplit_once(')').map(|(_, r)| r) else {
            continue;
        };
        let fields: Vec<&str> = rest.split_whitespace().collect();
        // state ppid pgrp ... rss is field 24 overall, index 21 here
        if fields.get(2).and_then(|f| f.parse::<i32>().ok()) == Some(pgid) {
            total += fields.get(21).and_then(|f| f.parse::<u64>().ok()).unwrap_or(0) * page;
        }
    }
    Some(total)
}

#[cfg(not(target_os = "linux"))]
fn group_rss_bytes(_pgid: i32) -> Option<u64> {
    None
}

/// Whether an unprivileged child can lower `RLIMIT_AS` to `bytes`.
fn address_space_limit_settable(bytes: u64) -> bool {
    let mut cur = libc::rlimit { rlim_cur: 0, rlim_max: 0 };
    // SAFETY: getrlimit only writes into the struct we pass.
    if unsafe { libc::getrlimit(libc::RLIMIT_AS, &mut cur) } != 0 {
        return false;
    }
    cur.rlim_max == libc::RLIM_INFINITY || cur.rlim_max >= bytes as libc::rlim_t
}

const MEMORY_MARKERS: [&str; 5] =
    ["MemoryError", "Cannot allocate memory", "std::bad_alloc", "memory allocation of", "out of memory"];

fn looks_like_oom(stderr: &str, status: &ExitStatus) -> bool {
    use std::os::unix::process::ExitStatusExt;
    MEMORY_MARKERS.iter().any(|m| stderr.contains(m)) || status.signal() == Some(libc::SIGSEGV) && stderr.is_empty()
}

/// Executes one candidate program in a fresh temporary directory.
pub fn run_candidate(code: &str, limits: &ResourceLimits, config: &SandboxConfig) -> ExecutionOutcome {
    use std::os::unix::process::ExitStatusExt;

    let scratch = match &config.scratch_root {
        Some(root) => tempfile::Builder::new().prefix("codevolve-").tempdir_in(root),
        None => tempfile::Builder::new().prefix("codevolve-").tempdir(),
    };
    let dir = match scratch {
        Ok(d) => d,
        Err(e) => return ExecutionOutcome::spawn_error(format!("cannot create working directory: {e}")),
    };
    let script = dir.path().join(config.language.script_name());
    if let Err(e) = std::fs::write(&script, code) {
        return ExecutionOutcome::spawn_error(format!("cannot write candidate: {e}"));
    }
    let artifact_path = dir.path().join(ARTIFACT_FILE);

    let argv = config.command();
    let Some((program, args)) = argv.split_first() else {
        return ExecutionOutcome::spawn_error("empty interpreter command".into());
    };
    let mut cmd = Command::new(program);
    cmd.args(args)
        .arg(&script)
        .current_dir(dir.path())
        .env(ARTIFACT_ENV, &artifact_path)
        .env("HOME", dir.path())
        .env("TMPDIR", dir.path())
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());

    let memory = limits.memory_bytes;
    let as_limit_ok = address_space_limit_settable(memory);
    // SAFETY: the closure only calls async-signal-safe libc functions.
    unsafe {
        cmd.pre_exec(move || {
            libc::setpgid(0, 0);
            let lim = libc::rlimit { rlim_cur: memory as libc::rlim_t, rlim_max: memory as libc::rlim_t };
            libc::setrlimit(libc::RLIMIT_AS, &lim);
            let core = libc::rlimit { rlim_cur: 0, rlim_max: 0 };
            libc::setrlimit(libc::RLIMIT_CORE, &core);
            Ok(())
        });
    }

    let start = Instant::now();
    let mut child: Child = match cmd.spawn() {
        Ok(c) => c,
        Err(e) => return ExecutionOutcome::spawn_error(format!("cannot launch {program}: {e}")),
    };
    let pgid = child.id() as i32;
    let out = drain(child.stdout.take().unwrap(), config.log_cap_bytes);
    let err = drain(child.stderr.take().unwrap(), config.log_cap_bytes);

    let wall = Duration::from_secs_f64(limits.wall_seconds);
    let mut watchdog_ok = cfg!(target_os = "linux");
    let mut last_rss = Instant::now();
    let mut breach: Option<ExecStatus> = None;
    let status = loop {
        match child.try_wait() {
            Ok(Some(s)) => break Some(s),
            Ok(None) => {}
            Err(_) => break None,
        }
        if start.elapsed() >= wall {
            breach = Some(ExecStatus::Timeout);
            kill_group(pgid);
            break child.wait().ok();
        }
        if watchdog_ok && last_rss.elapsed() >= RSS_POLL {
            last_rss = Instant::now();
            match group_rss_bytes(pgid) {
                Some(rss) if rss > memory => {
                    breach = Some(ExecStatus::MemoryExceeded);
                    kill_group(pgid);
                    break child.wait().ok();
                }
                Some(_) => {}
                None => watchdog_ok = false,
            }
        }
        thread::sleep(POLL);
    };
    // reap anything the candidate left behind so the pipes close
    kill_group(pgid);
    let wall_time = start.elapsed().as_secs_f64();
    // the scratch path differs per run; keep logs reproducible
    let scrub = |mut s: CapturedStream| {
        if let Some(p) = dir.path().to_str() {
            s.text = s.text.replace(p, ".");
        }
        s
    };
    let stdout = scrub(out.join().unwrap_or(CapturedStream { text: String::new(), truncated: false }));
    let stderr = scrub(err.join().unwrap_or(CapturedStream { text: String::new(), truncated: false }));

    let enforcement = match (as_limit_ok, watchdog_ok) {
        (true, true) => MemoryEnforcement::AddressSpaceAndRss,
        (true, false) => MemoryEnforcement::AddressSpaceOnly,
        (false, _) => MemoryEnforcement::BestEffort,
    };
    let (exit_code, signal) = status.map_or((None, None), |s| (s.code(), s.signal()));
    let status_kind = match (breach, status) {
        (Some(b), _) => b,
        (None, None) => ExecStatus::NonzeroExit,
        (None, Some(s)) if s.success() => ExecStatus::Ok,
        (None, Some(s)) if looks_like_oom(&stderr.text, &s) => ExecStatus::MemoryExceeded,
        (None, Some(_)) => ExecStatus::NonzeroExit,
    };
    let artifact = if status_kind == ExecStatus::Ok { std::fs::read(&artifact_path).ok() } else { None };
    let detail = match (status_kind, &artifact) {
        (ExecStatus::Ok, None) => Some(format!("program exited cleanly but did not write {ARTIFACT_ENV}")),
        (ExecStatus::Timeout, _) => Some(format!("killed after {:.1} s wall clock", limits.wall_seconds)),
        (ExecStatus::MemoryExceeded, _) => Some(format!("memory limit of {} bytes exceeded", memory)),
        _ => None,
    };
    ExecutionOutcome {
        status: status_kind,
        exit_code,
        signal,
        stdout,
        stderr,
        wall_time,
        artifact,
        memory_enforcement: enforcement,
        detail,
    }
}
