//! Rank-weighted parent sampling and inspiration draws on a small population.

use std::collections::BTreeMap;

use codevolve::population::{PromptId, Solution, SolutionId, SolutionStatus};
use codevolve::selection::{sample_inspirations, uniform_sample, RankDistribution, SampleMode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn member(seq: u64, fitness: f64) -> Solution {
    let mut s = Solution::pending(SolutionId::new(0, seq), String::new(), None, PromptId::new(0, 1), 0);
    s.finalize(SolutionStatus::Valid, fitness);
    s
}

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let population = vec![member(1, 0.4), member(2, 1.3), member(3, 0.9), member(4, 0.9), member(5, 0.1)];
    let dist = RankDistribution::new(&population)?;
    for (id, p) in dist.ids.iter().zip(&dist.probabilities) {
        println!("{id}: p = {p:.4}");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut counts: BTreeMap<SolutionId, u32> = BTreeMap::new();
    for _ in 0..10_000 {
        *counts.entry(dist.sample(&mut rng)).or_default() += 1;
    }
    for (id, n) in &counts {
        println!("{id}: drawn {n} of 10000");
    }
    println!("uniform draw: {}", uniform_sample(&population, &mut rng)?);

    let parent = dist.sample(&mut rng);
    let rank = sample_inspirations(&population, &parent, 3, SampleMode::Rank, &mut rng);
    let uniform = sample_inspirations(&population, &parent, 3, SampleMode::Uniform, &mut rng);
    let show = |ids: &[SolutionId]| ids.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ");
    println!("parent {parent}; rank inspirations {}; uniform inspirations {}", show(&rank), show(&uniform));
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
