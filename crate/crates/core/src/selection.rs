//! Parent and inspiration sampling over a population snapshot.
//!
//! Rank-based selection gives the individual at rank `r` (1 = fittest) a
//! weight of `1/r`, normalized by the harmonic number of the population size.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::population::{Solution, SolutionId};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SelectionError {
    #[error("cannot sample from an empty population")]
    EmptyPopulation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    Rank,
    Uniform,
}

/// Population indices ordered fittest first; equal fitness puts older
/// individuals (epoch, then id) ahead.
pub fn rank_order(population: &[Solution]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..population.len()).collect();
    order.sort_by(|&a, &b| {
        let (a, b) = (&population[a], &population[b]);
        b.fitness.total_cmp(&a.fitness).then(a.epoch_created.cmp(&b.epoch_created)).then(a.id.cmp(&b.id))
    });
    order
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankDistribution {
    pub ids: Vec<SolutionId>,
    pub probabilities: Vec<f64>,
}

impl RankDistribution {
    pub fn new(population: &[Solution]) -> Result<Self, SelectionError> {
        if population.is_empty() {
            return Err(SelectionError::EmptyPopulation);
        }
        let ids: Vec<SolutionId> = rank_order(population).into_iter().map(|i| population[i].id).collect();
        let weights: Vec<f64> = (1..=ids.len()).map(|r| 1.0 / r as f64).collect();
        let total: f64 = weights.iter().sum();
        let probabilities = weights.into_iter().map(|w| w / total).collect();
        Ok(RankDistribution { ids, probabilities })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SolutionId {
        self.ids[draw_index(&self.probabilities, rng)]
    }
}

/// Inverse-CDF draw; the last index absorbs rounding at the top of the range.
fn draw_index<R: Rng + ?Sized>(probabilities: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probabilities.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probabilities.len() - 1
}

pub fn rank_sample<R: Rng + ?Sized>(population: &[Solution], rng: &mut R) -> Result<SolutionId, SelectionError> {
    Ok(RankDistribution::new(population)?.sample(rng))
}

pub fn uniform_sample<R: Rng + ?Sized>(population: &[Solution], rng: &mut R) -> Result<SolutionId, SelectionError> {
    if population.is_empty() {
        return Err(SelectionError::EmptyPopulation);
    }
    Ok(population[rng.random_range(0..population.len())].id)
}

/// Draws up to `count` distinct inspirations, never `exclude`.
///
/// Draws repeat on duplicates; after `100 * count` attempts the set is topped
/// up from the rank order so the call always terminates.
pub fn sample_inspirations<R: Rng + ?Sized>(
    population: &[Solution],
    exclude: &SolutionId,
    count: usize,
    mode: SampleMode,
    rng: &mut R,
) -> Vec<SolutionId> {
    let pool: Vec<Solution> = population.iter().filter(|s| &s.id != exclude).cloned().collect();
    let want = count.min(pool.len());
    let mut picked: Vec<SolutionId> = Vec::with_capacity(want);
    if want == 0 {
        return picked;
    }
    let dist = RankDistribution::new(&pool).expect("pool is non-empty");
    let mut attempts = 0;
    while picked.len() < want && attempts < 100 * count {
        attempts += 1;
        let id = match mode {
            SampleMode::Rank => dist.sample(rng),
            SampleMode::Uniform => pool[rng.random_range(0..pool.len())].id,
        };
        if !picked.contains(&id) {
            picked.push(id);
        }
    }
    for id in &dist.ids {
        if picked.len() >= want {
            break;
        }
        if !picked.contains(id) {
            picked.push(*id);
        }
    }
    picked
}
