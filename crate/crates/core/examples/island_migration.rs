//! Elite migration around a ring of islands, outside the engine.

use codevolve::config::Topology;
use codevolve::engine::{migrant_quota, migrate};
use codevolve::population::{IslandState, PromptId, Solution, SolutionStatus};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let mut islands: Vec<IslandState> = (0..4).map(|i| IslandState::new(i, 12, 3)).collect();
    for isl in islands.iter_mut() {
        for k in 0..10u64 {
            let id = isl.next_solution_id();
            let mut s = Solution::pending(id, format!("# program {id}\n"), None, PromptId::new(isl.id, 1), k);
            // island i is uniformly better than island i - 1
            s.finalize(SolutionStatus::Valid, isl.id as f64 + k as f64 / 10.0);
            isl.try_insert(s);
        }
    }
    println!("quota for 10 members at rate 0.2: {}", migrant_quota(10, 0.2));

    for event in migrate(&mut islands, &Topology::Ring, 0.2, 40) {
        let accepted = event.copies.iter().filter(|c| c.insert != "rejected").count();
        let ids: Vec<String> = event.migrated.iter().map(ToString::to_string).collect();
        println!(
            "island {} -> {:?}: sent {}, {accepted}/{} copies accepted",
            event.source_island,
            event.dest_islands,
            ids.join(" "),
            event.copies.len()
        );
    }
    for isl in &islands {
        println!("island {}: {} members, best {:.1}", isl.id, isl.solutions.len(), isl.best_fitness());
    }

    // solutions that already left are never sent again; arrived copies count
    // as natives of their new island and may travel on
    let again = migrate(&mut islands, &Topology::Ring, 0.2, 80);
    for event in &again {
        let ids: Vec<String> = event.migrated.iter().map(ToString::to_string).collect();
        println!("round two, island {}: {}", event.source_island, ids.join(" "));
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
