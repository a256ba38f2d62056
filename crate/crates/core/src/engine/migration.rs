//! Elitist migration between islands.

use serde::{Deserialize, Serialize};

use crate::config::Topology;
use crate::population::{InsertOutcome, IslandState, Prompt, Solution, SolutionId, SolutionStatus};
use crate::selection::rank_order;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MigrantCopy {
    pub id: SolutionId,
    pub source_id: SolutionId,
    pub dest: usize,
    pub insert: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evicted: Option<SolutionId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MigrationEvent {
    pub epoch: u64,
    pub source_island: usize,
    pub dest_islands: Vec<usize>,
    pub migrated: Vec<SolutionId>,
    pub copies: Vec<MigrantCopy>,
}

/// Number of migrants an island of `population` members sends.
pub fn migrant_quota(population: usize, rate: f64) -> usize {
    // guard against 0.1 * 40 landing a hair above 4
    let raw = rate * population as f64;
    let q = (raw - 1e-9).ceil().max(0.0) as usize;
    q.min(population)
}

/// The island's top valid solutions that have not migrated yet, best first.
pub fn select_migrants(island: &IslandState, rate: f64) -> Vec<SolutionId> {
    let eligible: Vec<Solution> = island
        .solutions
        .iter()
        .filter(|s| s.status == SolutionStatus::Valid && !s.has_migrated && s.origin_island == island.id)
        .cloned()
        .collect();
    let quota = migrant_quota(island.solutions.len(), rate);
    rank_order(&eligible).into_iter().take(quota).map(|i| eligible[i].id).collect()
}

/// Source island, destinations, and the migrants with their prompts.
type Outgoing = (usize, Vec<usize>, Vec<(Solution, Option<Prompt>)>);

/// Copies every island's elite to its topology neighbours. Selection uses the
/// pre-migration populations; copies arrive as fresh roots and go through
/// the usual insertion rule.
pub fn migrate(islands: &mut [IslandState], topology: &Topology, rate: f64, epoch: u64) -> Vec<MigrationEvent> {
    let n = islands.len();
    let mut outgoing: Vec<Outgoing> = Vec::new();
    for isl in islands.iter_mut() {
        let dests = topology.neighbors(isl.id, n);
        if dests.is_empty() {
            continue;
        }
        let ids = select_migrants(isl, rate);
        let mut batch = Vec::with_capacity(ids.len());
        for id in ids {
            let s = isl.solutions.iter_mut().find(|s| s.id == id).expect("selected from live set");
            s.has_migrated = true;
            let s = s.clone();
            let prompt = isl.prompt(&s.parent_prompt_id).cloned();
            batch.push((s, prompt));
        }
        outgoing.push((isl.id, dests, batch));
    }

    let mut events = Vec::new();
    for (source, dests, batch) in outgoing {
        let mut copies = Vec::new();
        for &d in &dests {
            let dest = &mut islands[d];
            for (original, prompt) in &batch {
                if let Some(p) = prompt {
                    dest.add_prompt(p.clone());
                }
                let mut copy = original.clone();
                copy.id = dest.next_solution_id();
                copy.island_id = d;
                copy.parent_id = None;
                copy.origin_island = d;
                copy.has_migrated = false;
                copy.migrated_from = Some(original.id);
                copy.epoch_created = epoch;
                let id = copy.id;
                let outcome = dest.try_insert(copy);
                copies.push(MigrantCopy {
                    id,
                    source_id: original.id,
                    dest: d,
                    insert: outcome.label().to_string(),
                    evicted: match outcome {
                        InsertOutcome::InsertedWithEviction(e) => Some(e),
                        _ => None,
                    },
                });
            }
        }
        events.push(MigrationEvent {
            epoch,
            source_island: source,
            dest_islands: dests,
            migrated: batch.iter().map(|(s, _)| s.id).collect(),
            copies,
        });
    }
    events
}
