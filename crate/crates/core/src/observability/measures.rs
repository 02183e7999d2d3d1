use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::atoms::GramianAtoms;
use crate::error::{Error, Result};

/// Relative asymmetry (against the largest entry) tolerated by the measures.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Default relative threshold for [`measure_rank`].
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Scalar observability measure used as a placement objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Trace,
    Logdet,
}

impl std::str::FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "trace" => Ok(Measure::Trace),
            "logdet" => Ok(Measure::Logdet),
            other => Err(Error::validation(format!("unknown objective `{other}` (trace, logdet)"))),
        }
    }
}

impl std::fmt::Display for Measure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Measure::Trace => "trace",
            Measure::Logdet => "logdet",
        })
    }
}

fn check_symmetric(w: &DMatrix<f64>) -> Result<()> {
    if !w.is_square() {
        return Err(Error::Dimension(format!("{}x{} matrix is not square", w.nrows(), w.ncols())));
    }
    let scale = w.amax().max(f64::MIN_POSITIVE);
    let mut worst: f64 = 0.0;
    for j in 0..w.ncols() {
        for i in 0..j {
            worst = worst.max((w[(i, j)] - w[(j, i)]).abs());
        }
    }
    if worst > SYMMETRY_TOLERANCE * scale {
        return Err(Error::Asymmetric { asymmetry: worst });
    }
    Ok(())
}

fn eigenvalues(w: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_symmetric(w)?;
    let mut sym = w.clone();
    sym += w.transpose();
    sym *= 0.5;
    Ok(SymmetricEigen::new(sym).eigenvalues.iter().copied().collect())
}

pub fn measure_trace(w: &DMatrix<f64>) -> f64 {
    w.trace()
}

/// Regularized log-determinant logdet(W + εI) − n·log ε, evaluated as
/// logdet(I + W/ε) so that it is exactly zero at W = 0.
pub fn measure_logdet(w: &DMatrix<f64>, epsilon: f64) -> Result<f64> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::validation(format!("epsilon must be > 0, got {epsilon}")));
    }
    check_symmetric(w)?;
    let n = w.nrows();
    let mut m = w / epsilon;
    for i in 0..n {
        m[(i, i)] += 1.0;
    }
    if let Some(ch) = Cholesky::new(m.clone()) {
        let l = ch.l_dirty();
        return Ok(2.0 * (0..n).map(|i| l[(i, i)].ln()).sum::<f64>());
    }
    // Rounding pushed a direction slightly below zero; fall back to eigenvalues.
    let vals = eigenvalues(&m)?;
    Ok(vals.iter().map(|v| v.max(f64::MIN_POSITIVE).ln()).sum())
}

/// Number of eigenvalues above `tol · λ_max`.
pub fn measure_rank(w: &DMatrix<f64>, tol: f64) -> Result<usize> {
    let vals = eigenvalues(w)?;
    let max = vals.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Ok(0);
    }
    Ok(vals.iter().filter(|&&v| v > tol * max).count())
}

pub fn measure_lambda_min(w: &DMatrix<f64>) -> Result<f64> {
    let vals = eigenvalues(w)?;
    Ok(vals.into_iter().fold(f64::INFINITY, f64::min))
}

pub fn evaluate_measure(measure: Measure, w: &DMatrix<f64>, epsilon: f64) -> Result<f64> {
    match measure {
        Measure::Trace => Ok(measure_trace(w)),
        Measure::Logdet => measure_logdet(w, epsilon),
    }
}

/// ε = 1e−8 · max(1, mean diagonal of the all-candidate Gramian), averaged
/// over scenarios so one value serves the whole problem.
pub fn default_epsilon(atoms: &[GramianAtoms]) -> f64 {
    if atoms.is_empty() {
        return 1e-8;
    }
    let mean = atoms.iter().map(GramianAtoms::mean_full_diagonal).sum::<f64>() / atoms.len() as f64;
    1e-8 * mean.max(1.0)
}

/// Normalized scenario weights: uniform when `weights` is `None`.
pub fn normalize_weights(d: usize, weights: Option<&[f64]>) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(Error::validation("at least one scenario is required"));
    }
    match weights {
        None => Ok(vec![1.0 / d as f64; d]),
        Some(w) => {
            if w.len() != d {
                return Err(Error::Dimension(format!("{} weights for {d} scenarios", w.len())));
            }
            if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::validation("scenario weights must be finite and >= 0"));
            }
            let total: f64 = w.iter().sum();
            if total <= 0.0 {
                return Err(Error::validation("scenario weights sum to zero"));
            }
            Ok(w.iter().map(|v| v / total).collect())
        }
    }
}

/// Checks that all scenarios share one candidate list.
pub fn check_candidates(atoms: &[GramianAtoms]) -> Result<()> {
    let first = atoms
        .first()
        .ok_or_else(|| Error::validation("at least one scenario is required"))?;
    for a in &atoms[1..] {
        if a.labels() != first.labels() {
            return Err(Error::validation(format!(
                "scenario `{}` has a different candidate list than `{}`",
                a.scenario(),
                first.scenario()
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustValue {
    pub objective: f64,
    pub per_scenario: Vec<f64>,
}

/// Weighted mean of the measure of W^(κ)(S) over scenarios.
///
/// Trace uses the modular fast path Σ_{j∈S} trace(A_j^(κ)).
pub fn robust_objective(
    atoms: &[GramianAtoms],
    weights: &[f64],
    set: &[usize],
    measure: Measure,
    epsilon: f64,
) -> Result<RobustValue> {
    check_candidates(atoms)?;
    if weights.len() != atoms.len() {
        return Err(Error::Dimension(format!("{} weights for {} scenarios", weights.len(), atoms.len())));
    }
    let n = atoms[0].n_candidates();
    if let Some(&bad) = set.iter().find(|&&j| j >= n) {
        return Err(Error::validation(format!("sensor index {bad} outside {n} candidates")));
    }
    let per_scenario = atoms
        .iter()
        .map(|a| match measure {
            Measure::Trace => Ok(set.iter().map(|&j| a.atom_trace(j)).sum()),
            Measure::Logdet => measure_logdet(&a.gramian_for_set(set)?, epsilon),
        })
        .collect::<Result<Vec<f64>>>()?;
    let objective = per_scenario.iter().zip(weights).map(|(v, w)| v * w).sum();
    Ok(RobustValue { objective, per_scenario })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_measures() {
        let w = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 3.0]));
        assert_eq!(measure_trace(&w), 6.0);
        assert_eq!(measure_rank(&w, RANK_TOLERANCE).unwrap(), 3);
        assert!((measure_lambda_min(&w).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn logdet_anchor_and_singular_case() {
        assert_eq!(measure_logdet(&DMatrix::zeros(4, 4), 1e-8).unwrap(), 0.0);
        let w = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 0.0]));
        let eps = 1e-8;
        let got = measure_logdet(&w, eps).unwrap();
        // Eigenvalues of W + εI are 1 + ε and ε.
        let expected = (1.0 + eps).ln() + eps.ln() - 2.0 * eps.ln();
        assert!((got - expected).abs() < 1e-7, "{got} vs {expected}");
        assert!((got - 18.420680753952364).abs() < 1e-12);
    }

    #[test]
    fn asymmetric_input_rejected() {
        let w = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(measure_logdet(&w, 1e-8), Err(Error::Asymmetric { .. })));
        assert!(matches!(measure_rank(&w, 1e-10), Err(Error::Asymmetric { .. })));
    }

    #[test]
    fn rank_of_zero_and_deficient() {
        assert_eq!(measure_rank(&DMatrix::zeros(3, 3), 1e-10).unwrap(), 0);
        let v = nalgebra::DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert_eq!(measure_rank(&(&v * v.transpose()), 1e-10).unwrap(), 1);
    }

    #[test]
    fn modular_trace_example() {
        let atom = |t: f64| DMatrix::from_element(1, 1, t.sqrt());
        let s1 = GramianAtoms::from_factors("1", vec!["a".into(), "b".into()], vec![atom(1.0), atom(2.0)], 1, 10)
            .unwrap();
        let s2 = GramianAtoms::from_factors("2", vec!["a".into(), "b".into()], vec![atom(3.0), atom(4.0)], 1, 10)
            .unwrap();
        let w = normalize_weights(2, None).unwrap();
        let v = robust_objective(&[s1, s2], &w, &[0, 1], Measure::Trace, 1e-8).unwrap();
        assert!((v.objective - 5.0).abs() < 1e-14);
    }

    #[test]
    fn mismatched_candidates_rejected() {
        let f = DMatrix::from_element(1, 1, 1.0);
        let a = GramianAtoms::from_factors("1", vec!["a".into()], vec![f.clone()], 1, 10).unwrap();
        let b = GramianAtoms::from_factors("2", vec!["b".into()], vec![f], 1, 10).unwrap();
        assert!(robust_objective(&[a, b], &[0.5, 0.5], &[0], Measure::Trace, 1e-8).is_err());
    }
}
