//! Shared fixtures for the benchmarks under `benches/`.

use aquobs::dynamics::WqModel;
use aquobs::network::ReactionParams;
use aquobs::synthetic::{random_network, RandomNetworkSpec, SyntheticCase};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random looped network with `nodes` junctions over 24 steps.
pub fn case(nodes: usize, seed: u64) -> SyntheticCase {
    let spec = RandomNetworkSpec {
        nodes,
        loops: nodes / 8 + 1,
        tanks: 1,
        valves: 1,
        hydraulic_steps: 4,
        steps_per_hydraulic: 6,
        n_steps: 24,
        max_segments: 3,
        reactions: ReactionParams {
            alpha_b: 1e-4,
            alpha_r: 5e-4,
            ..Default::default()
        },
        ..Default::default()
    };
    random_network(&spec, &mut ChaCha8Rng::seed_from_u64(seed)).expect("benchmark network")
}

pub fn model(case: &SyntheticCase) -> WqModel {
    WqModel::new(&case.net, &case.hyd, &case.scenario).expect("benchmark model")
}
