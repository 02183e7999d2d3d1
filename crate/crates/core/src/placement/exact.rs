use std::cmp::Ordering;
use std::time::Instant;

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{greedy_place, PlacementProblem, PlacementResult, Selection};
use crate::error::{Error, Result};

/// Largest number of subsets brute force will enumerate by default.
pub const DEFAULT_ORACLE_CAP: u128 = 2_000_000;

/// 1 − 1/e, the greedy approximation factor for monotone submodular
/// objectives with O(∅) = 0.
pub const GUARANTEE_BOUND: f64 = 1.0 - 1.0 / std::f64::consts::E;

/// Numerical slack allowed on the guarantee and on diminishing returns.
const SLACK: f64 = 1e-9;

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Exact optimum by enumerating every feasible set that contains the pinned
/// sensors. Among equal objective values the lexicographically smallest set
/// wins.
pub fn brute_force_place(problem: &PlacementProblem, cap: u128) -> Result<PlacementResult> {
    let start = Instant::now();
    let n = problem.n_candidates();
    let pinned = problem.pinned();
    let free: Vec<usize> = (0..n).filter(|j| !pinned.contains(j)).collect();
    let pick = problem.budget() - pinned.len();
    let combinations = binomial(free.len(), pick);
    if combinations > cap {
        return Err(Error::CapExceeded { combinations, cap });
    }
    let best = free
        .iter()
        .copied()
        .combinations(pick)
        .par_bridge()
        .map(|combo| {
            let set: Vec<usize> = pinned.iter().copied().chain(combo.iter().copied()).collect();
            problem.evaluate(&set).map(|v| (v.objective, combo))
        })
        .try_reduce_with(|a, b| {
            Ok(match a.0.total_cmp(&b.0) {
                Ordering::Greater => a,
                Ordering::Less => b,
                Ordering::Equal => {
                    if a.1 <= b.1 {
                        a
                    } else {
                        b
                    }
                }
            })
        })
        .transpose()?
        .unwrap_or((0.0, Vec::new()));

    let set: Vec<usize> = pinned.iter().copied().chain(best.1).collect();
    let value = problem.evaluate(&set)?;
    let mut selections = Vec::with_capacity(set.len());
    let mut prefix = Vec::with_capacity(set.len());
    let mut before = 0.0;
    for &j in &set {
        prefix.push(j);
        let after = problem.evaluate(&prefix)?.objective;
        selections.push(Selection {
            id: problem.label(j).to_owned(),
            index: j,
            gain: after - before,
            objective_after: after,
            pinned: pinned.contains(&j),
        });
        before = after;
    }
    Ok(PlacementResult {
        method: "brute-force".into(),
        objective: problem.objective(),
        budget: problem.budget(),
        epsilon: problem.epsilon(),
        candidates: problem.labels().to_vec(),
        pinned: pinned.iter().map(|&p| problem.label(p).to_owned()).collect(),
        ids: set.iter().map(|&j| problem.label(j).to_owned()).collect(),
        set,
        selections,
        value: value.objective,
        per_scenario: value.per_scenario,
        evaluations: combinations as u64,
        wall_seconds: start.elapsed().as_secs_f64(),
        oracle: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuaranteeReport {
    pub ratio: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Ratio of the greedy value to the optimum, checked against 1 − 1/e.
pub fn guarantee_check(greedy: &PlacementResult, oracle: &PlacementResult) -> Result<GuaranteeReport> {
    if greedy.objective != oracle.objective
        || greedy.budget != oracle.budget
        || greedy.candidates != oracle.candidates
        || greedy.pinned != oracle.pinned
        || greedy.epsilon != oracle.epsilon
    {
        return Err(Error::validation("greedy and oracle results belong to different problems"));
    }
    if oracle.value < 0.0 || greedy.value > oracle.value * (1.0 + 1e-12) + 1e-12 {
        return Err(Error::validation(format!(
            "oracle value {} is not an optimum (greedy reached {})",
            oracle.value, greedy.value
        )));
    }
    // The same set summed in another order can land an ulp above the
    // optimum; identical sets are an exact match.
    let ratio = if oracle.value == 0.0 || greedy.sorted_set() == oracle.sorted_set() {
        1.0
    } else {
        greedy.value / oracle.value
    };
    Ok(GuaranteeReport {
        ratio,
        bound: GUARANTEE_BOUND,
        holds: ratio >= GUARANTEE_BOUND - SLACK,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub trials: usize,
    /// No chain A ⊊ B with s ∉ B exists (fewer than two candidates).
    pub vacuous: bool,
    /// Smallest gain_A − gain_B seen; `None` when vacuous.
    pub min_slack: Option<f64>,
    /// Smallest single marginal gain seen (monotonicity check).
    pub min_gain: Option<f64>,
    pub passed: bool,
}

/// Samples chains A ⊊ B ⊆ N and s ∉ B and records the diminishing-returns
/// slack O(A∪{s}) − O(A) − (O(B∪{s}) − O(B)). Pinned sensors are ignored.
pub fn submodularity_probe(problem: &PlacementProblem, trials: usize, seed: u64) -> Result<ProbeReport> {
    if trials == 0 {
        return Err(Error::validation("trials must be >= 1"));
    }
    let n = problem.n_candidates();
    if n < 2 {
        return Ok(ProbeReport {
            trials: 0,
            vacuous: true,
            min_slack: None,
            min_gain: None,
            passed: true,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chains = Vec::with_capacity(trials);
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..trials {
        order.shuffle(&mut rng);
        let s = order[0];
        let b_len = rng.random_range(1..n);
        let mut b: Vec<usize> = order[1..=b_len].to_vec();
        let a_len = rng.random_range(0..b_len);
        b.shuffle(&mut rng);
        let a: Vec<usize> = b[..a_len].to_vec();
        chains.push((a, b, s));
    }
    let results = chains
        .par_iter()
        .map(|(a, b, s)| {
            let gain_a = problem.marginal_gain(a, *s)?;
            let gain_b = problem.marginal_gain(b, *s)?;
            Ok((gain_a - gain_b, gain_a.min(gain_b)))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let min_slack = results.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let min_gain = results.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    Ok(ProbeReport {
        trials,
        vacuous: false,
        min_slack: Some(min_slack),
        min_gain: Some(min_gain),
        passed: min_slack >= -SLACK && min_gain >= -SLACK,
    })
}

/// Greedy placements solved separately on each hydraulic-step window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HydraulicStepPlan {
    pub candidates: Vec<String>,
    /// Selected ids per hydraulic step.
    pub steps: Vec<Vec<String>>,
    /// `matrix[j][h]` is 1 when candidate `j` is selected in step `h`.
    pub matrix: Vec<Vec<u8>>,
}

/// Re-solves the problem on the atoms of every hydraulic step, with the
/// same budget, pins, weights and objective. Each window gets the default
/// regularization for its own atoms.
pub fn per_hydraulic_step(problem: &PlacementProblem, dense_cap: usize) -> Result<HydraulicStepPlan> {
    let windows = problem
        .atoms()
        .iter()
        .map(|a| a.hydraulic_windows(dense_cap))
        .collect::<Result<Vec<_>>>()?;
    let n_windows = windows.iter().map(Vec::len).min().unwrap_or(0);
    let n = problem.n_candidates();
    let mut steps = Vec::with_capacity(n_windows);
    let mut matrix = vec![vec![0u8; n_windows]; n];
    for h in 0..n_windows {
        let atoms = windows.iter().map(|w| w[h].clone()).collect();
        let sub = PlacementProblem::new(atoms, problem.budget(), problem.objective())?
            .with_weights(problem.weights())?
            .with_pinned(problem.pinned())?
            .with_lazy(problem.is_lazy());
        let r = greedy_place(&sub)?;
        for &j in &r.set {
            matrix[j][h] = 1;
        }
        steps.push(r.ids);
    }
    Ok(HydraulicStepPlan {
        candidates: problem.labels().to_vec(),
        steps,
        matrix,
    })
}
