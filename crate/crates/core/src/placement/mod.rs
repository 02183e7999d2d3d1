//! Cardinality-constrained sensor placement over Gramian atoms.

mod exact;
mod greedy;

use nalgebra::{Cholesky, DMatrix, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observability::{
    check_candidates, default_epsilon, measure_logdet, normalize_weights, GramianAtoms, Measure, RobustValue,
};

pub use exact::{
    brute_force_place, guarantee_check, per_hydraulic_step, submodularity_probe, GuaranteeReport, HydraulicStepPlan,
    ProbeReport, DEFAULT_ORACLE_CAP, GUARANTEE_BOUND,
};
pub use greedy::greedy_place;

/// Maximize the robust objective over sets of `budget` candidates that
/// contain the pinned ones.
#[derive(Debug, Clone)]
pub struct PlacementProblem {
    atoms: Vec<GramianAtoms>,
    weights: Vec<f64>,
    budget: usize,
    pinned: Vec<usize>,
    objective: Measure,
    epsilon: f64,
    lazy: bool,
    /// Per-candidate robust trace weights (the modular fast path).
    trace_weights: Vec<f64>,
}

impl PlacementProblem {
    pub fn new(atoms: Vec<GramianAtoms>, budget: usize, objective: Measure) -> Result<Self> {
        check_candidates(&atoms)?;
        let n = atoms[0].n_candidates();
        if budget > n {
            return Err(Error::validation(format!("budget {budget} exceeds {n} candidates")));
        }
        let weights = normalize_weights(atoms.len(), None)?;
        let epsilon = default_epsilon(&atoms);
        let mut p = PlacementProblem {
            atoms,
            weights,
            budget,
            pinned: Vec::new(),
            objective,
            epsilon,
            lazy: false,
            trace_weights: Vec::new(),
        };
        p.refresh_trace_weights();
        Ok(p)
    }

    fn refresh_trace_weights(&mut self) {
        let n = self.n_candidates();
        self.trace_weights = (0..n)
            .map(|j| {
                self.atoms
                    .iter()
                    .zip(&self.weights)
                    .map(|(a, w)| w * a.atom_trace(j))
                    .sum()
            })
            .collect();
    }

    /// Scenario weights, normalized to sum to one.
    pub fn with_weights(mut self, weights: &[f64]) -> Result<Self> {
        self.weights = normalize_weights(self.atoms.len(), Some(weights))?;
        self.refresh_trace_weights();
        Ok(self)
    }

    pub fn with_pinned(mut self, pinned: &[usize]) -> Result<Self> {
        let n = self.n_candidates();
        let mut seen = vec![false; n];
        for &p in pinned {
            if p >= n {
                return Err(Error::validation(format!("pinned index {p} outside {n} candidates")));
            }
            if std::mem::replace(&mut seen[p], true) {
                return Err(Error::validation(format!("sensor `{}` pinned twice", self.label(p))));
            }
        }
        if pinned.len() > self.budget {
            return Err(Error::validation(format!(
                "{} pinned sensors exceed the budget {}",
                pinned.len(),
                self.budget
            )));
        }
        self.pinned = pinned.to_vec();
        Ok(self)
    }

    /// Pins candidates by label.
    pub fn with_pinned_ids(self, ids: &[&str]) -> Result<Self> {
        let idx = ids
            .iter()
            .map(|id| {
                self.index_of(id)
                    .ok_or_else(|| Error::validation(format!("pinned sensor `{id}` is not a candidate")))
            })
            .collect::<Result<Vec<_>>>()?;
        self.with_pinned(&idx)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::validation(format!("epsilon must be > 0, got {epsilon}")));
        }
        self.epsilon = epsilon;
        Ok(self)
    }

    /// Enables lazy evaluation of marginal gains (valid for submodular
    /// objectives only).
    pub fn with_lazy(mut self, lazy: bool) -> Self {
        self.lazy = lazy;
        self
    }

    pub fn with_budget(mut self, budget: usize) -> Result<Self> {
        if budget > self.n_candidates() || budget < self.pinned.len() {
            return Err(Error::validation(format!(
                "budget {budget} must lie in {}..={}",
                self.pinned.len(),
                self.n_candidates()
            )));
        }
        self.budget = budget;
        Ok(self)
    }

    pub fn atoms(&self) -> &[GramianAtoms] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn n_candidates(&self) -> usize {
        self.atoms[0].n_candidates()
    }

    pub fn labels(&self) -> &[String] {
        self.atoms[0].labels()
    }

    pub fn label(&self, j: usize) -> &str {
        &self.labels()[j]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.labels().iter().position(|l| l == id)
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn pinned(&self) -> &[usize] {
        &self.pinned
    }

    pub fn objective(&self) -> Measure {
        self.objective
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn is_lazy(&self) -> bool {
        self.lazy
    }

    fn check_set(&self, set: &[usize]) -> Result<()> {
        let n = self.n_candidates();
        let mut seen = vec![false; n];
        for &j in set {
            if j >= n {
                return Err(Error::validation(format!("sensor index {j} outside {n} candidates")));
            }
            if std::mem::replace(&mut seen[j], true) {
                return Err(Error::validation(format!("sensor `{}` appears twice", self.label(j))));
            }
        }
        Ok(())
    }

    /// O(S) with per-scenario values.
    pub fn evaluate(&self, set: &[usize]) -> Result<RobustValue> {
        self.check_set(set)?;
        let per_scenario = match self.objective {
            Measure::Trace => self
                .atoms
                .iter()
                .map(|a| set.iter().map(|&j| a.atom_trace(j)).sum())
                .collect(),
            Measure::Logdet => self
                .atoms
                .iter()
                .map(|a| measure_logdet(&a.gramian_for_set(set)?, self.epsilon))
                .collect::<Result<Vec<f64>>>()?,
        };
        let objective = self.combine(&per_scenario);
        Ok(RobustValue { objective, per_scenario })
    }

    fn combine(&self, per_scenario: &[f64]) -> f64 {
        per_scenario.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    /// O(S ∪ {a}) − O(S).
    pub fn marginal_gain(&self, set: &[usize], a: usize) -> Result<f64> {
        self.check_set(set)?;
        if a >= self.n_candidates() {
            return Err(Error::validation(format!("sensor index {a} outside candidates")));
        }
        if set.contains(&a) {
            return Err(Error::validation(format!("sensor `{}` is already selected", self.label(a))));
        }
        let state = GainState::new(self, set)?;
        state.gain(self, a)
    }
}

/// Cached W(S) per scenario for repeated gain evaluation.
///
/// Logdet gains use the determinant lemma
/// logdet(I + (W + ρᵀρ)/ε) − logdet(I + W/ε) = logdet(I + ρ (εI + W)⁻¹ ρᵀ),
/// with the Cholesky factor of I + W/ε cached. The small matrix on the
/// right is well conditioned, so gains keep full relative accuracy even
/// when I + W/ε does not.
pub(crate) struct GainState {
    grams: Vec<DMatrix<f64>>,
    factors: Vec<Option<Cholesky<f64, Dyn>>>,
    per_scenario: Vec<f64>,
    value: f64,
}

fn regularized_factor(w: &DMatrix<f64>, epsilon: f64) -> Option<Cholesky<f64, Dyn>> {
    let mut m = w / epsilon;
    for i in 0..m.nrows() {
        m[(i, i)] += 1.0;
    }
    Cholesky::new(m)
}

impl GainState {
    pub(crate) fn new(problem: &PlacementProblem, set: &[usize]) -> Result<Self> {
        let grams: Vec<DMatrix<f64>> = match problem.objective {
            Measure::Trace => Vec::new(),
            Measure::Logdet => problem
                .atoms
                .iter()
                .map(|a| a.gramian_for_set(set))
                .collect::<Result<_>>()?,
        };
        let factors = grams.iter().map(|w| regularized_factor(w, problem.epsilon)).collect();
        let RobustValue { objective, per_scenario } = problem.evaluate(set)?;
        Ok(GainState {
            grams,
            factors,
            per_scenario,
            value: objective,
        })
    }

    pub(crate) fn value(&self) -> f64 {
        self.value
    }

    pub(crate) fn per_scenario(&self) -> &[f64] {
        &self.per_scenario
    }

    /// Per-scenario gains of adding `a`.
    fn scenario_gains(&self, problem: &PlacementProblem, a: usize) -> Result<Vec<f64>> {
        problem
            .atoms
            .iter()
            .enumerate()
            .map(|(i, at)| match &self.factors[i] {
                Some(ch) => {
                    let mut y = at.factor(a).transpose() / problem.epsilon.sqrt();
                    ch.l_dirty().solve_lower_triangular_mut(&mut y);
                    let p = y.ncols();
                    let small = DMatrix::identity(p, p) + y.tr_mul(&y);
                    let small_ch = Cholesky::new(small)
                        .ok_or_else(|| Error::validation("gain matrix is not positive definite"))?;
                    let l = small_ch.l_dirty();
                    Ok(2.0 * (0..p).map(|k| l[(k, k)].ln()).sum::<f64>())
                }
                None => {
                    let mut w = self.grams[i].clone();
                    at.add_atom_to(a, &mut w);
                    Ok(measure_logdet(&w, problem.epsilon)? - self.per_scenario[i])
                }
            })
            .collect()
    }

    pub(crate) fn gain(&self, problem: &PlacementProblem, a: usize) -> Result<f64> {
        match problem.objective {
            Measure::Trace => Ok(problem.trace_weights[a]),
            Measure::Logdet => Ok(problem.combine(&self.scenario_gains(problem, a)?)),
        }
    }

    pub(crate) fn add(&mut self, problem: &PlacementProblem, a: usize) -> Result<()> {
        match problem.objective {
            Measure::Trace => {
                for (v, at) in self.per_scenario.iter_mut().zip(&problem.atoms) {
                    *v += at.atom_trace(a);
                }
            }
            Measure::Logdet => {
                for (i, at) in problem.atoms.iter().enumerate() {
                    at.add_atom_to(a, &mut self.grams[i]);
                    self.per_scenario[i] = measure_logdet(&self.grams[i], problem.epsilon)?;
                    self.factors[i] = regularized_factor(&self.grams[i], problem.epsilon);
                }
            }
        }
        self.value = problem.combine(&self.per_scenario);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub id: String,
    pub index: usize,
    pub gain: f64,
    pub objective_after: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub pinned: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub optimum: f64,
    pub optimal_set: Vec<String>,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementResult {
    pub method: String,
    pub objective: Measure,
    pub budget: usize,
    pub epsilon: f64,
    pub candidates: Vec<String>,
    pub pinned: Vec<String>,
    pub selections: Vec<Selection>,
    /// Final set S*, in selection order.
    pub set: Vec<usize>,
    pub ids: Vec<String>,
    pub value: f64,
    pub per_scenario: Vec<f64>,
    /// Marginal-gain (or, for brute force, set) evaluations performed.
    pub evaluations: u64,
    pub wall_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleComparison>,
}

impl PlacementResult {
    /// The result with its timing zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> Self {
        PlacementResult {
            wall_seconds: 0.0,
            ..self.clone()
        }
    }

    pub fn sorted_set(&self) -> Vec<usize> {
        let mut s = self.set.clone();
        s.sort_unstable();
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }
}
