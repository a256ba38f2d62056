//! Solutions, prompts and the per-island population they live in.
//!
//! An island owns a bounded live population plus an append-only archive of
//! every solution that left (or never entered) the live set. Lineage queries
//! read both, so ancestor chains stay resolvable after eviction.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LookupError {
    #[error("unknown solution id {0}")]
    UnknownSolution(SolutionId),
    #[error("unknown prompt id {0}")]
    UnknownPrompt(PromptId),
    #[error("parent chain of {0} contains a cycle")]
    Cycle(SolutionId),
    #[error("malformed id {0:?}")]
    Malformed(String),
}

macro_rules! island_id_type {
    ($name:ident, $prefix:literal) => {
        #[doc = concat!("Island-scoped identifier rendered as `", $prefix, "<island>-<seq>`; ordered by (island, seq).")]
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(into = "String", try_from = "String")]
        pub struct $name {
            pub island: usize,
            pub seq: u64,
        }

        impl $name {
            pub fn new(island: usize, seq: u64) -> Self {
                Self { island, seq }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}-{}"), self.island, self.seq)
            }
        }

        impl FromStr for $name {
            type Err = LookupError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let bad = || LookupError::Malformed(s.to_string());
                let rest = s.strip_prefix($prefix).ok_or_else(bad)?;
                let (island, seq) = rest.split_once('-').ok_or_else(bad)?;
                Ok(Self { island: island.parse().map_err(|_| bad())?, seq: seq.parse().map_err(|_| bad())? })
            }
        }

        impl From<$name> for String {
            fn from(id: $name) -> String {
                id.to_string()
            }
        }

        impl TryFrom<String> for $name {
            type Error = LookupError;

            fn try_from(s: String) -> Result<Self, Self::Error> {
                s.parse()
            }
        }
    };
}

island_id_type!(SolutionId, "s");
island_id_type!(PromptId, "p");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionStatus {
    /// Generated but not yet evaluated.
    Pending,
    Valid,
    RuntimeError,
    Timeout,
    MemoryExceeded,
    InvalidArtifact,
    /// Ran and produced a well-formed artifact that violates the problem constraints.
    InvalidConstruction,
    GenerationFailed,
}

impl SolutionStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolutionStatus::Pending => "pending",
            SolutionStatus::Valid => "valid",
            SolutionStatus::RuntimeError => "runtime_error",
            SolutionStatus::Timeout => "timeout",
            SolutionStatus::MemoryExceeded => "memory_exceeded",
            SolutionStatus::InvalidArtifact => "invalid_artifact",
            SolutionStatus::InvalidConstruction => "invalid_construction",
            SolutionStatus::GenerationFailed => "generation_failed",
        }
    }
}

impl fmt::Display for SolutionStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A candidate program with its lineage and evaluation results.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub id: SolutionId,
    pub island_id: usize,
    pub code: String,
    /// Absent for initialization roots and migrant copies.
    pub parent_id: Option<SolutionId>,
    pub parent_prompt_id: PromptId,
    pub epoch_created: u64,
    pub metrics: BTreeMap<String, f64>,
    pub fitness: f64,
    pub status: SolutionStatus,
    pub log_ref: Option<String>,
    pub origin_island: usize,
    pub has_migrated: bool,
    /// For migrant copies: the solution this one was copied from.
    pub migrated_from: Option<SolutionId>,
    /// Condensed execution feedback handed to later prompts.
    pub feedback: String,
}

impl Solution {
    /// A freshly generated, not yet evaluated candidate.
    pub fn pending(
        id: SolutionId,
        code: String,
        parent_id: Option<SolutionId>,
        parent_prompt_id: PromptId,
        epoch: u64,
    ) -> Self {
        Solution {
            id,
            island_id: id.island,
            code,
            parent_id,
            parent_prompt_id,
            epoch_created: epoch,
            metrics: BTreeMap::new(),
            fitness: 0.0,
            status: SolutionStatus::Pending,
            log_ref: None,
            origin_island: id.island,
            has_migrated: false,
            migrated_from: None,
            feedback: String::new(),
        }
    }

    /// Records the evaluation verdict. Anything other than `Valid` scores zero,
    /// as do non-finite or negative fitness values.
    pub fn finalize(&mut self, status: SolutionStatus, fitness: f64) {
        self.status = status;
        self.fitness =
            if status == SolutionStatus::Valid && fitness.is_finite() && fitness > 0.0 { fitness } else { 0.0 };
    }

    pub fn is_root(&self) -> bool {
        self.parent_id.is_none()
    }

    pub fn objective(&self) -> Option<f64> {
        self.metrics.get("objective").copied()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prompt {
    pub id: PromptId,
    pub text: String,
    pub island_id: usize,
    /// Set only for prompts written by the meta-prompting operator.
    pub parent_solution_id: Option<SolutionId>,
    pub epoch_created: u64,
}

/// Independent random streams owned by one island.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IslandRng {
    pub selection: ChaCha8Rng,
    pub operator: ChaCha8Rng,
    pub llm: ChaCha8Rng,
}

impl IslandRng {
    /// Derives the island's streams from the run's master seed.
    pub fn derive(master_seed: u64, island: usize) -> Self {
        let stream = |name: &str| {
            let mut h = Sha256::new();
            h.update(master_seed.to_le_bytes());
            h.update((island as u64).to_le_bytes());
            h.update(name.as_bytes());
            ChaCha8Rng::from_seed(h.finalize().into())
        };
        IslandRng { selection: stream("selection"), operator: stream("operator"), llm: stream("llm") }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InsertOutcome {
    Inserted,
    Rejected,
    InsertedWithEviction(SolutionId),
}

impl InsertOutcome {
    pub fn accepted(&self) -> bool {
        !matches!(self, InsertOutcome::Rejected)
    }

    pub fn label(&self) -> &'static str {
        match self {
            InsertOutcome::Inserted => "inserted",
            InsertOutcome::Rejected => "rejected",
            InsertOutcome::InsertedWithEviction(_) => "evicted",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IslandState {
    pub id: usize,
    /// Live population.
    pub solutions: Vec<Solution>,
    /// Evicted, rejected and failed solutions, append-only.
    pub archive: Vec<Solution>,
    pub prompts: Vec<Prompt>,
    pub capacity: usize,
    pub rng: IslandRng,
    next_solution_seq: u64,
    next_prompt_seq: u64,
    /// Logical LLM calls issued by this island so far.
    pub llm_calls: u64,
}

impl IslandState {
    pub fn new(id: usize, capacity: usize, master_seed: u64) -> Self {
        IslandState {
            id,
            solutions: Vec::new(),
            archive: Vec::new(),
            prompts: Vec::new(),
            capacity,
            rng: IslandRng::derive(master_seed, id),
            next_solution_seq: 0,
            next_prompt_seq: 0,
            llm_calls: 0,
        }
    }

    pub fn next_solution_id(&mut self) -> SolutionId {
        self.next_solution_seq += 1;
        SolutionId::new(self.id, self.next_solution_seq)
    }

    pub fn next_prompt_id(&mut self) -> PromptId {
        self.next_prompt_seq += 1;
        PromptId::new(self.id, self.next_prompt_seq)
    }

    /// Reserves the index of the next logical LLM call.
    pub fn next_call_index(&mut self) -> u64 {
        let i = self.llm_calls;
        self.llm_calls += 1;
        i
    }

    /// Looks a solution up in the live set, then the archive.
    pub fn find(&self, id: &SolutionId) -> Option<&Solution> {
        self.solutions.iter().chain(self.archive.iter()).find(|s| &s.id == id)
    }

    pub fn find_live(&self, id: &SolutionId) -> Option<&Solution> {
        self.solutions.iter().find(|s| &s.id == id)
    }

    pub fn prompt(&self, id: &PromptId) -> Option<&Prompt> {
        self.prompts.iter().find(|p| &p.id == id)
    }

    pub fn add_prompt(&mut self, prompt: Prompt) {
        if self.prompt(&prompt.id).is_none() {
            self.prompts.push(prompt);
        }
    }

    pub fn archive(&mut self, solution: Solution) {
        self.archive.push(solution);
    }

    /// Up to `depth` ancestors of `id`, nearest first. `None` means unlimited.
    pub fn ancestors(&self, id: &SolutionId, depth: Option<usize>) -> Result<Vec<&Solution>, LookupError> {
        let start = self.find(id).ok_or(LookupError::UnknownSolution(*id))?;
        let limit = depth.unwrap_or(usize::MAX);
        let mut out = Vec::new();
        let mut seen = HashSet::from([start.id]);
        let mut cursor = start.parent_id;
        while let Some(pid) = cursor {
            if out.len() >= limit {
                break;
            }
            if !seen.insert(pid) {
                return Err(LookupError::Cycle(*id));
            }
            let parent = self.find(&pid).ok_or(LookupError::UnknownSolution(pid))?;
            out.push(parent);
            cursor = parent.parent_id;
        }
        Ok(out)
    }

    /// Best fitness among every solution generated from the prompt; zero when
    /// it has no offspring yet.
    pub fn prompt_fitness(&self, id: &PromptId) -> Result<f64, LookupError> {
        if self.prompt(id).is_none() {
            return Err(LookupError::UnknownPrompt(*id));
        }
        Ok(self
            .solutions
            .iter()
            .chain(self.archive.iter())
            .filter(|s| &s.parent_prompt_id == id)
            .map(|s| s.fitness)
            .fold(0.0, f64::max))
    }

    /// Index of the individual a full population would evict: lowest fitness,
    /// ties broken towards the oldest (epoch, then id).
    fn worst_index(&self) -> Option<usize> {
        self.solutions
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                a.fitness.total_cmp(&b.fitness).then(a.epoch_created.cmp(&b.epoch_created)).then(a.id.cmp(&b.id))
            })
            .map(|(i, _)| i)
    }

    pub fn try_insert(&mut self, candidate: Solution) -> InsertOutcome {
        if self.solutions.len() < self.capacity {
            self.solutions.push(candidate);
            return InsertOutcome::Inserted;
        }
        let Some(worst) = self.worst_index() else {
            // zero capacity
            self.archive.push(candidate);
            return InsertOutcome::Rejected;
        };
        if candidate.fitness > self.solutions[worst].fitness {
            let evicted = self.solutions.swap_remove(worst);
            let evicted_id = evicted.id;
            self.archive.push(evicted);
            self.solutions.push(candidate);
            InsertOutcome::InsertedWithEviction(evicted_id)
        } else {
            self.archive.push(candidate);
            InsertOutcome::Rejected
        }
    }

    pub fn best(&self) -> Option<&Solution> {
        self.solutions.iter().max_by(|a, b| {
            a.fitness.total_cmp(&b.fitness).then(b.epoch_created.cmp(&a.epoch_created)).then(b.id.cmp(&a.id))
        })
    }

    pub fn best_fitness(&self) -> f64 {
        self.best().map_or(0.0, |s| s.fitness)
    }

    /// Walks every parent chain with a visited set; fails on the first cycle
    /// or dangling parent pointer.
    pub fn check_forest(&self) -> Result<(), LookupError> {
        for s in self.solutions.iter().chain(self.archive.iter()) {
            self.ancestors(&s.id, None)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sol(island: &mut IslandState, parent: Option<SolutionId>, fitness: f64, epoch: u64) -> Solution {
        let id = island.next_solution_id();
        let mut s = Solution::pending(id, format!("code {id}"), parent, PromptId::new(island.id, 1), epoch);
        s.finalize(SolutionStatus::Valid, fitness);
        s
    }

    fn island_with_prompt(capacity: usize) -> IslandState {
        let mut isl = IslandState::new(0, capacity, 7);
        let pid = isl.next_prompt_id();
        isl.add_prompt(Prompt {
            id: pid,
            text: "solve it".into(),
            island_id: 0,
            parent_solution_id: None,
            epoch_created: 0,
        });
        isl
    }

    #[test]
    fn ids_round_trip_through_strings() {
        let id = SolutionId::new(3, 17);
        assert_eq!(id.to_string(), "s3-17");
        assert_eq!("s3-17".parse::<SolutionId>().unwrap(), id);
        assert!("p3-17".parse::<SolutionId>().is_err());
        assert_eq!(serde_json::to_string(&PromptId::new(1, 2)).unwrap(), "\"p1-2\"");
    }

    #[test]
    fn root_has_no_ancestors() {
        let mut isl = island_with_prompt(10);
        let r = sol(&mut isl, None, 0.1, 0);
        let rid = r.id;
        isl.try_insert(r);
        assert!(isl.ancestors(&rid, None).unwrap().is_empty());
    }

    #[test]
    fn ancestors_nearest_first_and_depth_limited() {
        let mut isl = island_with_prompt(10);
        let r = sol(&mut isl, None, 0.1, 0);
        let a = sol(&mut isl, Some(r.id), 0.2, 1);
        let b = sol(&mut isl, Some(a.id), 0.3, 2);
        let (rid, aid, bid) = (r.id, a.id, b.id);
        for s in [r, a, b] {
            isl.try_insert(s);
        }
        let ids = |v: Vec<&Solution>| v.iter().map(|s| s.id).collect::<Vec<_>>();
        assert_eq!(ids(isl.ancestors(&bid, Some(1)).unwrap()), vec![aid]);
        assert_eq!(ids(isl.ancestors(&bid, None).unwrap()), vec![aid, rid]);
        assert_eq!(
            isl.ancestors(&SolutionId::new(0, 99), None).unwrap_err(),
            LookupError::UnknownSolution(SolutionId::new(0, 99))
        );
    }

    #[test]
    fn ancestors_survive_eviction() {
        let mut isl = island_with_prompt(2);
        let r = sol(&mut isl, None, 0.1, 0);
        let a = sol(&mut isl, Some(r.id), 0.5, 1);
        let rid = r.id;
        isl.try_insert(r);
        isl.try_insert(a.clone());
        let b = sol(&mut isl, Some(a.id), 0.9, 2);
        let bid = b.id;
        assert_eq!(isl.try_insert(b), InsertOutcome::InsertedWithEviction(rid));
        let chain = isl.ancestors(&bid, None).unwrap();
        assert_eq!(chain.len(), 2);
        assert_eq!(chain[1].id, rid);
        isl.check_forest().unwrap();
    }

    #[test]
    fn cycle_is_detected() {
        let mut isl = island_with_prompt(10);
        let mut a = sol(&mut isl, None, 0.1, 0);
        let mut b = sol(&mut isl, Some(a.id), 0.1, 0);
        a.parent_id = Some(b.id);
        b.parent_id = Some(a.id);
        isl.try_insert(a);
        isl.try_insert(b);
        assert!(matches!(isl.check_forest(), Err(LookupError::Cycle(_))));
    }

    #[test]
    fn prompt_fitness_is_max_over_offspring() {
        let mut isl = island_with_prompt(10);
        let pid = PromptId::new(0, 1);
        assert_eq!(isl.prompt_fitness(&pid).unwrap(), 0.0);
        for f in [0.2, 0.7, 0.5] {
            let s = sol(&mut isl, None, f, 0);
            isl.try_insert(s);
        }
        assert_eq!(isl.prompt_fitness(&pid).unwrap(), 0.7);
        assert!(isl.prompt_fitness(&PromptId::new(0, 9)).is_err());
    }

    #[test]
    fn failed_offspring_scores_zero() {
        let mut isl = island_with_prompt(10);
        let id = isl.next_solution_id();
        let mut s = Solution::pending(id, String::new(), None, PromptId::new(0, 1), 0);
        s.finalize(SolutionStatus::Timeout, 0.8);
        assert_eq!(s.fitness, 0.0);
        isl.try_insert(s);
        assert_eq!(isl.prompt_fitness(&PromptId::new(0, 1)).unwrap(), 0.0);
    }

    #[test]
    fn insertion_below_capacity_is_unconditional() {
        let mut isl = island_with_prompt(40);
        for _ in 0..39 {
            let s = sol(&mut isl, None, 0.5, 0);
            isl.try_insert(s);
        }
        let zero = sol(&mut isl, None, 0.0, 1);
        assert_eq!(isl.try_insert(zero), InsertOutcome::Inserted);
        assert_eq!(isl.solutions.len(), 40);
    }

    #[test]
    fn full_population_requires_strict_improvement() {
        let mut isl = island_with_prompt(3);
        let mut first = None;
        for f in [0.3, 0.5, 0.9] {
            let s = sol(&mut isl, None, f, 0);
            first.get_or_insert(s.id);
            isl.try_insert(s);
        }
        let tie = sol(&mut isl, None, 0.3, 1);
        assert_eq!(isl.try_insert(tie), InsertOutcome::Rejected);
        let better = sol(&mut isl, None, 0.31, 1);
        assert_eq!(isl.try_insert(better), InsertOutcome::InsertedWithEviction(first.unwrap()));
        assert_eq!(isl.solutions.len(), 3);
        assert_eq!(isl.archive.len(), 2);
    }

    #[test]
    fn eviction_ties_remove_the_oldest() {
        let mut isl = island_with_prompt(3);
        let young = sol(&mut isl, None, 0.1, 5);
        let old = sol(&mut isl, None, 0.1, 2);
        let top = sol(&mut isl, None, 0.9, 0);
        let old_id = old.id;
        for s in [young, old, top] {
            isl.try_insert(s);
        }
        let c = sol(&mut isl, None, 0.2, 6);
        assert_eq!(isl.try_insert(c), InsertOutcome::InsertedWithEviction(old_id));
    }

    #[test]
    fn rng_streams_are_independent_and_reproducible() {
        let a = IslandRng::derive(1, 0);
        assert_eq!(a, IslandRng::derive(1, 0));
        assert_ne!(a.selection, a.operator);
        assert_ne!(a, IslandRng::derive(1, 1));
        assert_ne!(a, IslandRng::derive(2, 0));
    }
}
