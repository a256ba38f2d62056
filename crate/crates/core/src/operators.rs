//! The variation step: depth exploitation and meta-prompting exploration,
//! inspiration gating, and island initialization.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diff;
use crate::llm::{Completion, Ensemble, GenerationRequest, LlmError};
use crate::population::{IslandState, Prompt, Solution, SolutionId, SolutionStatus};
use crate::selection::{rank_sample, sample_inspirations, uniform_sample, SampleMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    Exploit,
    Explore,
    /// Independent generation from the initial pair (initialization, or every
    /// step when evolution is ablated).
    Init,
}

impl OperatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OperatorKind::Exploit => "exploit",
            OperatorKind::Explore => "explore",
            OperatorKind::Init => "init",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallKind {
    Generate,
    Meta,
}

/// One successful model call, as written to the run transcript.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub epoch: u64,
    pub island: usize,
    pub index: u64,
    pub kind: CallKind,
    pub model: String,
    pub digest: String,
    pub response: String,
}

impl CallRecord {
    fn new(epoch: u64, kind: CallKind, c: Completion) -> Self {
        CallRecord {
            epoch,
            island: c.island,
            index: c.index,
            kind,
            model: c.model,
            digest: c.digest,
            response: c.response,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorParams {
    pub p_explore: f64,
    pub num_inspirations: usize,
    /// `None` keeps the whole chain.
    pub max_ancestor_depth: Option<usize>,
    pub meta_prompting: bool,
}

impl Default for OperatorParams {
    fn default() -> Self {
        OperatorParams { p_explore: 0.3, num_inspirations: 3, max_ancestor_depth: None, meta_prompting: true }
    }
}

/// Shared, read-only inputs of a step.
pub struct StepContext<'a> {
    pub ensemble: &'a Ensemble,
    pub params: &'a OperatorParams,
    pub problem_brief: &'a str,
    pub epoch: u64,
    pub crossover: bool,
}

/// The result of one operator application, before evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorOutcome {
    /// Pending, or `generation_failed` when no program came back.
    pub new_solution: Solution,
    pub new_prompt: Option<Prompt>,
    pub operator: OperatorKind,
    pub model_used: Option<String>,
    pub parent_id: Option<SolutionId>,
    pub inspirations: Vec<SolutionId>,
    pub ancestors: usize,
    pub calls: Vec<CallRecord>,
    pub failure: Option<String>,
}

/// Inspiration-based crossover starts only after the first migration.
pub fn gate_crossover(current_epoch: u64, first_migration_epoch: Option<u64>, inspirations_enabled: bool) -> bool {
    inspirations_enabled && first_migration_epoch.is_some_and(|m| m < current_epoch)
}

/// Draws the exploit/explore coin: exploit iff `p < 1 - p_explore`.
pub fn draw_operator<R: Rng + ?Sized>(p_explore: f64, rng: &mut R) -> OperatorKind {
    let p: f64 = rng.random();
    if p < 1.0 - p_explore {
        OperatorKind::Exploit
    } else {
        OperatorKind::Explore
    }
}

fn failed(mut s: Solution, reason: &str) -> Solution {
    s.finalize(SolutionStatus::GenerationFailed, 0.0);
    s.feedback = format!("status: generation_failed\n{reason}");
    s
}

/// Turns a model response into a child program of `base`.
fn materialize(base: &str, response: &str) -> Result<String, String> {
    let parsed = diff::parse_response(response).map_err(|e| format!("unparseable response: {e}"))?;
    let code = diff::apply_response(base, &parsed).map_err(|e| format!("edit failed: {e}"))?;
    if code.trim().is_empty() {
        return Err("edit produced an empty program".into());
    }
    Ok(code)
}

fn lookup_failure(e: impl std::fmt::Display) -> String {
    format!("lineage lookup failed: {e}")
}

/// One Algorithm 1 step on `island`. Only id counters, call indices and rng
/// streams are advanced; the population itself is left untouched.
pub fn evolve_step(
    island: &mut IslandState,
    ctx: &StepContext<'_>,
) -> Result<OperatorOutcome, crate::selection::SelectionError> {
    let operator = draw_operator(ctx.params.p_explore, &mut island.rng.operator);
    let parent_id = match operator {
        OperatorKind::Exploit => rank_sample(&island.solutions, &mut island.rng.selection)?,
        _ => uniform_sample(&island.solutions, &mut island.rng.selection)?,
    };
    let parent = island.find_live(&parent_id).expect("sampled from the live set").clone();
    let inspirations = if ctx.crossover {
        let mode = if operator == OperatorKind::Exploit { SampleMode::Rank } else { SampleMode::Uniform };
        sample_inspirations(&island.solutions, &parent_id, ctx.params.num_inspirations, mode, &mut island.rng.selection)
    } else {
        Vec::new()
    };
    let inspiration_codes: Vec<String> =
        inspirations.iter().map(|id| island.find(id).expect("live id").code.clone()).collect();

    let ancestor_codes: Vec<String> = if operator == OperatorKind::Exploit {
        match island.ancestors(&parent_id, ctx.params.max_ancestor_depth) {
            Ok(a) => a.into_iter().map(|s| s.code.clone()).collect(),
            Err(e) => {
                let id = island.next_solution_id();
                let s = Solution::pending(id, String::new(), Some(parent_id), parent.parent_prompt_id, ctx.epoch);
                return Ok(OperatorOutcome {
                    new_solution: failed(s, &lookup_failure(&e)),
                    new_prompt: None,
                    operator,
                    model_used: None,
                    parent_id: Some(parent_id),
                    inspirations,
                    ancestors: 0,
                    calls: vec![],
                    failure: Some(lookup_failure(e)),
                });
            }
        }
    } else {
        Vec::new()
    };

    let ancestors = ancestor_codes.len();
    let parent_prompt = island.prompt(&parent.parent_prompt_id).cloned();
    let base_prompt_text = parent_prompt.as_ref().map(|p| p.text.clone()).unwrap_or_default();
    let mut calls = Vec::new();
    let mut new_prompt = None;
    let mut prompt_id = parent.parent_prompt_id;
    let mut prompt_text = base_prompt_text.clone();
    let mut failure: Option<String> = None;

    if operator == OperatorKind::Explore && ctx.params.meta_prompting {
        let index = island.next_call_index();
        match ctx.ensemble.meta_prompt(ctx.problem_brief, &base_prompt_text, &parent.code, island.id, index) {
            Ok(c) => {
                let id = island.next_prompt_id();
                let p = Prompt {
                    id,
                    text: c.response.clone(),
                    island_id: island.id,
                    parent_solution_id: Some(parent_id),
                    epoch_created: ctx.epoch,
                };
                prompt_id = id;
                prompt_text = p.text.clone();
                new_prompt = Some(p);
                calls.push(CallRecord::new(ctx.epoch, CallKind::Meta, c));
            }
            Err(e) => failure = Some(format!("meta-prompting failed: {e}")),
        }
    }

    let id = island.next_solution_id();
    let pending = |code: String| Solution::pending(id, code, Some(parent_id), prompt_id, ctx.epoch);
    let mut model_used = None;
    let new_solution = match failure {
        Some(ref reason) => failed(pending(String::new()), reason),
        None => {
            let request = GenerationRequest {
                prompt_text,
                parent_code: parent.code.clone(),
                ancestor_codes,
                inspiration_codes,
                execution_feedback: Some(parent.feedback.clone()).filter(|f| !f.is_empty()),
                problem_brief: ctx.problem_brief.to_string(),
            };
            let index = island.next_call_index();
            match ctx.ensemble.generate(&request, island.id, index, &mut island.rng.llm) {
                Ok(c) => {
                    model_used = Some(c.model.clone());
                    let result = materialize(&parent.code, &c.response);
                    calls.push(CallRecord::new(ctx.epoch, CallKind::Generate, c));
                    match result {
                        Ok(code) => pending(code),
                        Err(reason) => {
                            failure = Some(reason.clone());
                            failed(pending(String::new()), &reason)
                        }
                    }
                }
                Err(e) => {
                    let reason = generation_error(&e);
                    failure = Some(reason.clone());
                    failed(pending(String::new()), &reason)
                }
            }
        }
    };

    Ok(OperatorOutcome {
        ancestors,
        new_solution,
        new_prompt,
        operator,
        model_used,
        parent_id: Some(parent_id),
        inspirations,
        calls,
        failure,
    })
}

fn generation_error(e: &LlmError) -> String {
    format!("generation failed: {e}")
}

/// A root generated from the initial pair: no parent, no context.
pub fn generate_root(
    island: &mut IslandState,
    ctx: &StepContext<'_>,
    initial_code: &str,
    initial_prompt: &Prompt,
) -> OperatorOutcome {
    let request = GenerationRequest {
        prompt_text: initial_prompt.text.clone(),
        parent_code: initial_code.to_string(),
        ancestor_codes: vec![],
        inspiration_codes: vec![],
        execution_feedback: None,
        problem_brief: ctx.problem_brief.to_string(),
    };
    let index = island.next_call_index();
    let id = island.next_solution_id();
    let pending = |code: String| Solution::pending(id, code, None, initial_prompt.id, ctx.epoch);
    let (new_solution, model_used, calls, failure) =
        match ctx.ensemble.generate(&request, island.id, index, &mut island.rng.llm) {
            Ok(c) => {
                let model = c.model.clone();
                let result = materialize(initial_code, &c.response);
                let calls = vec![CallRecord::new(ctx.epoch, CallKind::Generate, c)];
                match result {
                    Ok(code) => (pending(code), Some(model), calls, None),
                    Err(reason) => (failed(pending(String::new()), &reason), Some(model), calls, Some(reason)),
                }
            }
            Err(e) => {
                let reason = generation_error(&e);
                (failed(pending(String::new()), &reason), None, vec![], Some(reason))
            }
        };
    OperatorOutcome {
        new_solution,
        new_prompt: None,
        operator: OperatorKind::Init,
        model_used,
        parent_id: None,
        inspirations: vec![],
        ancestors: 0,
        calls,
        failure,
    }
}

/// Pending work for an empty island: the trivial root plus `init_count`
/// independent generations from the initial pair.
pub struct Initialization {
    pub prompt: Prompt,
    pub trivial: Solution,
    pub generated: Vec<OperatorOutcome>,
}

pub fn initialize_island(
    island: &mut IslandState,
    ctx: &StepContext<'_>,
    initial_code: &str,
    initial_prompt: &str,
    init_count: usize,
) -> Initialization {
    assert!(island.solutions.is_empty(), "initialize_island needs an empty island");
    let prompt = Prompt {
        id: island.next_prompt_id(),
        text: initial_prompt.to_string(),
        island_id: island.id,
        parent_solution_id: None,
        epoch_created: 0,
    };
    island.add_prompt(prompt.clone());
    let trivial = Solution::pending(island.next_solution_id(), initial_code.to_string(), None, prompt.id, 0);
    let generated = (0..init_count).map(|_| generate_root(island, ctx, initial_code, &prompt)).collect();
    Initialization { prompt, trivial, generated }
}

/// The island's initial prompt (the first one it was given).
pub fn initial_prompt_of(island: &IslandState) -> Option<&Prompt> {
    island.prompts.iter().filter(|p| p.island_id == island.id).min_by_key(|p| p.id.seq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{ChatCall, EnsembleConfig, ModelParams, RetryPolicy, TransportError};
    use crate::population::PromptId;
    use crate::sandbox::CandidateLanguage;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::{Arc, Mutex};

    fn ensemble<F>(f: F) -> Ensemble
    where
        F: Fn(&ChatCall<'_>) -> Result<String, TransportError> + Send + Sync + 'static,
    {
        let mut cfg = EnsembleConfig::single(ModelParams::new("m"));
        cfg.retry = RetryPolicy::immediate(1);
        Ensemble::new(cfg, CandidateLanguage::Python, Arc::new(f))
    }

    fn seeded(capacity: usize, fitnesses: &[f64]) -> IslandState {
        let mut isl = IslandState::new(0, capacity, 7);
        let pid = isl.next_prompt_id();
        isl.add_prompt(Prompt {
            id: pid,
            text: "improve".into(),
            island_id: 0,
            parent_solution_id: None,
            epoch_created: 0,
        });
        for &f in fitnesses {
            let mut s = Solution::pending(isl.next_solution_id(), format!("v = {f}\n"), None, PromptId::new(0, 1), 0);
            s.finalize(SolutionStatus::Valid, f);
            isl.try_insert(s);
        }
        isl
    }

    fn ctx<'a>(e: &'a Ensemble, p: &'a OperatorParams, crossover: bool) -> StepContext<'a> {
        StepContext { ensemble: e, params: p, problem_brief: "brief", epoch: 1, crossover }
    }

    const EDIT: &str = "```python\nv = 42\n```\n";

    #[test]
    fn gate_examples() {
        assert!(!gate_crossover(10, None, true));
        assert!(gate_crossover(41, Some(40), true));
        assert!(!gate_crossover(40, Some(40), true));
        assert!(!gate_crossover(41, Some(40), false));
    }

    #[test]
    fn explore_fraction_matches_probability() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 10_000;
        let explore = (0..n).filter(|_| draw_operator(0.3, &mut rng) == OperatorKind::Explore).count();
        assert!((explore as f64 / n as f64 - 0.3).abs() < 0.01);
    }

    #[test]
    fn p_explore_zero_always_exploits() {
        let e = ensemble(|_| Ok(EDIT.to_string()));
        let p = OperatorParams { p_explore: 0.0, ..Default::default() };
        let mut isl = seeded(10, &[0.5, 0.2]);
        for _ in 0..50 {
            let out = evolve_step(&mut isl, &ctx(&e, &p, false)).unwrap();
            assert_eq!(out.operator, OperatorKind::Exploit);
            assert!(out.new_prompt.is_none());
        }
    }

    #[test]
    fn p_explore_one_always_explores_with_new_prompt() {
        let e = ensemble(|_| Ok(format!("Sharper prompt.\n{EDIT}")));
        let p = OperatorParams { p_explore: 1.0, ..Default::default() };
        let mut isl = seeded(10, &[0.5]);
        for _ in 0..10 {
            let out = evolve_step(&mut isl, &ctx(&e, &p, false)).unwrap();
            assert_eq!(out.operator, OperatorKind::Explore);
            let prompt = out.new_prompt.expect("explore carries a prompt");
            assert_eq!(prompt.parent_solution_id, out.parent_id);
            assert_eq!(out.new_solution.parent_prompt_id, prompt.id);
            assert_eq!(out.ancestors, 0);
        }
    }

    #[test]
    fn block_edit_becomes_child_code() {
        let e = ensemble(|_| Ok("<<<<<<< SEARCH\nv = 0.5\n=======\nv = 0.75\n>>>>>>> REPLACE\n".to_string()));
        let p = OperatorParams { p_explore: 0.0, ..Default::default() };
        let mut isl = seeded(10, &[0.5]);
        let out = evolve_step(&mut isl, &ctx(&e, &p, false)).unwrap();
        assert_eq!(out.new_solution.code, "v = 0.75\n");
        assert_eq!(out.new_solution.status, SolutionStatus::Pending);
        assert_eq!(out.new_solution.parent_id, out.parent_id);
        assert_eq!(out.calls.len(), 1);
    }

    #[test]
    fn failed_edit_is_generation_failure() {
        let e = ensemble(|_| Ok("<<<<<<< SEARCH\nnot there\n=======\nx\n>>>>>>> REPLACE\n".to_string()));
        let p = OperatorParams { p_explore: 0.0, ..Default::default() };
        let mut isl = seeded(10, &[0.5]);
        let out = evolve_step(&mut isl, &ctx(&e, &p, false)).unwrap();
        assert_eq!(out.new_solution.status, SolutionStatus::GenerationFailed);
        assert_eq!(out.new_solution.fitness, 0.0);
        assert!(out.failure.unwrap().contains("edit failed"));
    }

    #[test]
    fn inspirations_only_when_gated_on() {
        let seen = Arc::new(Mutex::new(Vec::new()));
        let s2 = seen.clone();
        let e = ensemble(move |c| {
            let user = &c.messages[1].content;
            s2.lock().unwrap().push(user.matches("### Inspiration ").count());
            Ok(EDIT.to_string())
        });
        let p = OperatorParams { p_explore: 0.0, ..Default::default() };
        let mut isl = seeded(10, &[0.9, 0.8, 0.7, 0.6, 0.5]);
        let off = evolve_step(&mut isl, &ctx(&e, &p, false)).unwrap();
        assert!(off.inspirations.is_empty());
        let on = evolve_step(&mut isl, &ctx(&e, &p, true)).unwrap();
        assert_eq!(on.inspirations.len(), 3);
        assert!(!on.inspirations.contains(&on.parent_id.unwrap()));
        assert_eq!(*seen.lock().unwrap(), vec![0, 3]);

        let mut pair = seeded(10, &[0.9, 0.8]);
        assert_eq!(evolve_step(&mut pair, &ctx(&e, &p, true)).unwrap().inspirations.len(), 1);
    }

    #[test]
    fn exploit_sends_full_ancestor_chain() {
        let e = ensemble(|_| Ok(EDIT.to_string()));
        let p = OperatorParams { p_explore: 0.0, ..Default::default() };
        let mut isl = seeded(10, &[0.1]);
        let root = isl.solutions[0].id;
        let mut child = Solution::pending(isl.next_solution_id(), "c".into(), Some(root), PromptId::new(0, 1), 1);
        child.finalize(SolutionStatus::Valid, 0.2);
        let cid = child.id;
        isl.try_insert(child);
        let mut grandchild = Solution::pending(isl.next_solution_id(), "g".into(), Some(cid), PromptId::new(0, 1), 2);
        grandchild.finalize(SolutionStatus::Valid, 5.0);
        isl.try_insert(grandchild);
        // the grandchild dominates rank selection; look for a step that picked it
        let out = (0..50)
            .map(|_| evolve_step(&mut isl, &ctx(&e, &p, false)).unwrap())
            .find(|o| o.parent_id != Some(root) && o.parent_id != Some(cid))
            .unwrap();
        assert_eq!(out.ancestors, 2);
    }

    #[test]
    fn failed_meta_prompt_aborts_step() {
        let e = ensemble(|_| Ok("   ".to_string()));
        let p = OperatorParams { p_explore: 1.0, ..Default::default() };
        let mut isl = seeded(10, &[0.5]);
        let out = evolve_step(&mut isl, &ctx(&e, &p, false)).unwrap();
        assert!(out.new_prompt.is_none());
        assert_eq!(out.new_solution.status, SolutionStatus::GenerationFailed);
        assert!(out.calls.is_empty());
    }

    #[test]
    fn explore_without_meta_prompting_reuses_parent_prompt() {
        let e = ensemble(|_| Ok(EDIT.to_string()));
        let p = OperatorParams { p_explore: 1.0, meta_prompting: false, ..Default::default() };
        let mut isl = seeded(10, &[0.5]);
        let out = evolve_step(&mut isl, &ctx(&e, &p, false)).unwrap();
        assert_eq!(out.operator, OperatorKind::Explore);
        assert!(out.new_prompt.is_none());
        assert_eq!(out.new_solution.parent_prompt_id, PromptId::new(0, 1));
    }

    #[test]
    fn empty_population_is_an_error() {
        let e = ensemble(|_| Ok(EDIT.to_string()));
        let p = OperatorParams::default();
        let mut isl = IslandState::new(0, 4, 1);
        assert!(evolve_step(&mut isl, &ctx(&e, &p, false)).is_err());
    }

    #[test]
    fn initialization_generates_roots() {
        let e = ensemble(|c| Ok(format!("```python\nv = {}\n```\n", c.index)));
        let p = OperatorParams::default();
        let mut isl = IslandState::new(0, 40, 1);
        let init = initialize_island(&mut isl, &ctx(&e, &p, false), "v = 0\n", "start", 6);
        assert_eq!(init.generated.len(), 6);
        assert!(init.generated.iter().all(|o| o.new_solution.parent_id.is_none()));
        let codes: std::collections::HashSet<_> = init.generated.iter().map(|o| o.new_solution.code.clone()).collect();
        assert_eq!(codes.len(), 6);
        assert_eq!(init.trivial.parent_prompt_id, init.prompt.id);
        assert_eq!(initial_prompt_of(&isl).unwrap().text, "start");
    }

    #[test]
    fn unparseable_initial_generations_fail() {
        let e = ensemble(|_| Ok("no code here".to_string()));
        let p = OperatorParams::default();
        let mut isl = IslandState::new(0, 40, 1);
        let init = initialize_island(&mut isl, &ctx(&e, &p, false), "v = 0\n", "start", 6);
        assert!(init.generated.iter().all(|o| o.new_solution.status == SolutionStatus::GenerationFailed));
    }
}
