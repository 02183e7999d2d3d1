use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use rayon::prelude::*;

use super::{GainState, PlacementProblem, PlacementResult, Selection};
use crate::error::Result;

/// Greedy maximization: start from the pinned set and repeatedly add the
/// candidate with the largest marginal gain, breaking ties by the lowest
/// candidate index.
///
/// Without lazy evaluation every iteration evaluates every remaining
/// candidate once, so a run performs Σ_t (|N| − |P| − t) gain evaluations.
pub fn greedy_place(problem: &PlacementProblem) -> Result<PlacementResult> {
    let start = Instant::now();
    let n = problem.n_candidates();
    let mut set: Vec<usize> = Vec::with_capacity(problem.budget());
    let mut selections = Vec::with_capacity(problem.budget());
    let mut state = GainState::new(problem, &[])?;
    for &p in problem.pinned() {
        let before = state.value();
        state.add(problem, p)?;
        set.push(p);
        selections.push(Selection {
            id: problem.label(p).to_owned(),
            index: p,
            gain: state.value() - before,
            objective_after: state.value(),
            pinned: true,
        });
    }
    let mut in_set = vec![false; n];
    set.iter().for_each(|&j| in_set[j] = true);

    let mut evaluations = 0u64;
    let mut lazy = problem.is_lazy().then(|| LazyQueue::new(n, &in_set));
    while set.len() < problem.budget() {
        let (best, gain) = match lazy.as_mut() {
            Some(q) => q.pop_best(problem, &state, set.len(), &mut evaluations)?,
            None => {
                let remaining: Vec<usize> = (0..n).filter(|&j| !in_set[j]).collect();
                let gains = remaining
                    .par_iter()
                    .map(|&j| state.gain(problem, j))
                    .collect::<Result<Vec<f64>>>()?;
                evaluations += remaining.len() as u64;
                let mut best = 0;
                for i in 1..gains.len() {
                    if gains[i] > gains[best] {
                        best = i;
                    }
                }
                (remaining[best], gains[best])
            }
        };
        state.add(problem, best)?;
        in_set[best] = true;
        set.push(best);
        selections.push(Selection {
            id: problem.label(best).to_owned(),
            index: best,
            gain,
            objective_after: state.value(),
            pinned: false,
        });
    }

    Ok(PlacementResult {
        method: if problem.is_lazy() { "lazy-greedy" } else { "greedy" }.into(),
        objective: problem.objective(),
        budget: problem.budget(),
        epsilon: problem.epsilon(),
        candidates: problem.labels().to_vec(),
        pinned: problem.pinned().iter().map(|&p| problem.label(p).to_owned()).collect(),
        ids: set.iter().map(|&j| problem.label(j).to_owned()).collect(),
        set,
        selections,
        value: state.value(),
        per_scenario: state.per_scenario().to_vec(),
        evaluations,
        wall_seconds: start.elapsed().as_secs_f64(),
        oracle: None,
    })
}

#[derive(Debug, PartialEq)]
struct Bound {
    gain: f64,
    index: usize,
    /// Set size at which `gain` was computed.
    round: usize,
}

impl Eq for Bound {}

impl Ord for Bound {
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for Bound {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Stale gains are upper bounds on current gains under submodularity, so a
/// freshly evaluated candidate that still tops the queue is the argmax.
struct LazyQueue {
    heap: BinaryHeap<Bound>,
}

impl LazyQueue {
    fn new(n: usize, in_set: &[bool]) -> Self {
        let heap = (0..n)
            .filter(|&j| !in_set[j])
            .map(|index| Bound {
                gain: f64::INFINITY,
                index,
                round: usize::MAX,
            })
            .collect();
        LazyQueue { heap }
    }

    fn pop_best(
        &mut self,
        problem: &PlacementProblem,
        state: &GainState,
        round: usize,
        evaluations: &mut u64,
    ) -> Result<(usize, f64)> {
        loop {
            let top = self.heap.pop().expect("candidates remain while under budget");
            if top.round == round {
                return Ok((top.index, top.gain));
            }
            let gain = state.gain(problem, top.index)?;
            *evaluations += 1;
            self.heap.push(Bound {
                gain,
                index: top.index,
                round,
            });
        }
    }
}
