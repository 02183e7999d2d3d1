use std::borrow::Cow;

use nalgebra::DMatrix;

use super::jacobian::{check_trajectory, step_jacobian, TrajectoryJacobians};
use crate::dynamics::{SensorModel, Trajectory, WqModel};
use crate::error::{Error, Result};

/// Atoms are expanded to dense n_x × n_x matrices only up to this state size.
pub const DEFAULT_DENSE_CAP: usize = 2000;

/// Per-candidate Gramian contributions A_j = Σ_i Φ_iᵀ c_jᵀ c_j Φ_i of one
/// scenario.
///
/// Each atom is kept as its factor ρ_j, the stacked rows c_j Φ_i
/// (row `i·m + s` for step `i` and measured species `s`), so that
/// A_j = ρ_jᵀ ρ_j.
#[derive(Debug, Clone)]
pub struct GramianAtoms {
    scenario: String,
    labels: Vec<String>,
    n_x: usize,
    rows_per_sensor: usize,
    steps_per_hydraulic: usize,
    factors: Vec<DMatrix<f64>>,
    dense: Option<Vec<DMatrix<f64>>>,
}

impl GramianAtoms {
    /// Builds atoms from factors; all factors must share the column count
    /// and have a row count that is a multiple of `rows_per_sensor`.
    pub fn from_factors(
        scenario: impl Into<String>,
        labels: Vec<String>,
        factors: Vec<DMatrix<f64>>,
        rows_per_sensor: usize,
        dense_cap: usize,
    ) -> Result<Self> {
        if labels.len() != factors.len() {
            return Err(Error::Dimension(format!(
                "{} labels for {} factors",
                labels.len(),
                factors.len()
            )));
        }
        let n_x = factors.first().map_or(0, |f| f.ncols());
        let rows = factors.first().map_or(0, |f| f.nrows());
        if rows_per_sensor == 0 || !rows.is_multiple_of(rows_per_sensor) {
            return Err(Error::Dimension(format!(
                "factor rows {rows} not a multiple of {rows_per_sensor} rows per sensor"
            )));
        }
        if factors.iter().any(|f| f.ncols() != n_x || f.nrows() != rows) {
            return Err(Error::Dimension("factors differ in shape".into()));
        }
        let mut atoms = GramianAtoms {
            scenario: scenario.into(),
            labels,
            n_x,
            rows_per_sensor,
            steps_per_hydraulic: rows / rows_per_sensor,
            factors,
            dense: None,
        };
        atoms.materialize(dense_cap);
        Ok(atoms)
    }

    fn materialize(&mut self, dense_cap: usize) {
        self.dense = (self.n_x <= dense_cap).then(|| self.factors.iter().map(|f| f.tr_mul(f)).collect());
    }

    pub(crate) fn set_steps_per_hydraulic(&mut self, ratio: usize) {
        self.steps_per_hydraulic = ratio.max(1);
    }

    pub fn scenario(&self) -> &str {
        &self.scenario
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n_candidates(&self) -> usize {
        self.labels.len()
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    /// Trajectory samples N_s covered by the factors.
    pub fn n_steps(&self) -> usize {
        self.factors.first().map_or(0, |f| f.nrows() / self.rows_per_sensor)
    }

    pub fn rows_per_sensor(&self) -> usize {
        self.rows_per_sensor
    }

    pub fn steps_per_hydraulic(&self) -> usize {
        self.steps_per_hydraulic
    }

    pub fn factor(&self, j: usize) -> &DMatrix<f64> {
        &self.factors[j]
    }

    pub fn is_dense(&self) -> bool {
        self.dense.is_some()
    }

    pub fn atom(&self, j: usize) -> Cow<'_, DMatrix<f64>> {
        match &self.dense {
            Some(d) => Cow::Borrowed(&d[j]),
            None => Cow::Owned(self.factors[j].tr_mul(&self.factors[j])),
        }
    }

    /// trace(A_j), computed from the factor as ‖ρ_j‖²_F.
    pub fn atom_trace(&self, j: usize) -> f64 {
        self.factors[j].norm_squared()
    }

    /// Adds A_j into `w`.
    pub fn add_atom_to(&self, j: usize, w: &mut DMatrix<f64>) {
        match &self.dense {
            Some(d) => *w += &d[j],
            None => {
                let f = &self.factors[j];
                w.gemm_tr(1.0, f, f, 1.0);
            }
        }
    }

    /// W(S) = Σ_{j∈S} A_j; the zero matrix for the empty set.
    pub fn gramian_for_set(&self, set: &[usize]) -> Result<DMatrix<f64>> {
        let mut w = DMatrix::zeros(self.n_x, self.n_x);
        for &j in set {
            if j >= self.n_candidates() {
                return Err(Error::validation(format!(
                    "sensor index {j} outside {} candidates",
                    self.n_candidates()
                )));
            }
            self.add_atom_to(j, &mut w);
        }
        Ok(w)
    }

    /// Mean diagonal entry of the all-candidate Gramian.
    pub fn mean_full_diagonal(&self) -> f64 {
        if self.n_x == 0 {
            return 0.0;
        }
        (0..self.n_candidates()).map(|j| self.atom_trace(j)).sum::<f64>() / self.n_x as f64
    }

    /// Atoms restricted to trajectory samples `start..end`.
    pub fn window(&self, start: usize, end: usize, dense_cap: usize) -> Result<GramianAtoms> {
        if start >= end || end > self.n_steps() {
            return Err(Error::validation(format!(
                "window {start}..{end} outside 0..{}",
                self.n_steps()
            )));
        }
        let m = self.rows_per_sensor;
        let factors = self
            .factors
            .iter()
            .map(|f| f.rows(start * m, (end - start) * m).into_owned())
            .collect();
        let mut out = GramianAtoms::from_factors(
            format!("{}[{start}..{end}]", self.scenario),
            self.labels.clone(),
            factors,
            m,
            dense_cap,
        )?;
        out.steps_per_hydraulic = self.steps_per_hydraulic;
        Ok(out)
    }

    /// One window per hydraulic step covered by the trajectory.
    pub fn hydraulic_windows(&self, dense_cap: usize) -> Result<Vec<GramianAtoms>> {
        let ratio = self.steps_per_hydraulic;
        (0..self.n_steps())
            .step_by(ratio)
            .map(|start| self.window(start, (start + ratio).min(self.n_steps()), dense_cap))
            .collect()
    }
}

fn labels_for(model: &WqModel, sensor: &SensorModel) -> Vec<String> {
    sensor
        .candidates()
        .iter()
        .map(|&n| model.network().node(n).id.clone())
        .collect()
}

fn check_selectors(model: &WqModel, sensor: &SensorModel) -> Result<Vec<Vec<usize>>> {
    let seg = model.segmentation();
    if sensor.candidates().iter().any(|&n| n >= seg.n_nodes()) {
        return Err(Error::Dimension("sensor candidate outside the network".into()));
    }
    Ok((0..sensor.n_candidates()).map(|j| sensor.selector(j, seg)).collect())
}

/// Atoms from stored trajectory Jacobians.
pub fn gramian_atoms(
    model: &WqModel,
    jac: &TrajectoryJacobians,
    sensor: &SensorModel,
    dense_cap: usize,
) -> Result<GramianAtoms> {
    let selectors = check_selectors(model, sensor)?;
    let m = sensor.rows_per_sensor();
    let n_s = jac.phi.len();
    let n_x = model.n_x();
    let mut factors = vec![DMatrix::zeros(n_s * m, n_x); selectors.len()];
    for (i, phi) in jac.phi.iter().enumerate() {
        for (j, sel) in selectors.iter().enumerate() {
            for (s, &row) in sel.iter().enumerate() {
                factors[j].set_row(i * m + s, &phi.row(row));
            }
        }
    }
    let mut atoms = GramianAtoms::from_factors(jac.scenario.clone(), labels_for(model, sensor), factors, m, dense_cap)?;
    atoms.set_steps_per_hydraulic(model.steps_per_hydraulic());
    Ok(atoms)
}

/// Atoms built while propagating Φ_i, holding only the current Φ.
pub fn gramian_atoms_streaming(
    model: &WqModel,
    traj: &Trajectory,
    sensor: &SensorModel,
    dense_cap: usize,
) -> Result<GramianAtoms> {
    check_trajectory(model, traj)?;
    let selectors = check_selectors(model, sensor)?;
    let m = sensor.rows_per_sensor();
    let n_s = traj.len();
    let n_x = model.n_x();
    let mut factors = vec![DMatrix::zeros(n_s * m, n_x); selectors.len()];
    let mut phi = DMatrix::identity(n_x, n_x);
    for (i, state) in traj.states.iter().enumerate() {
        for (j, sel) in selectors.iter().enumerate() {
            for (s, &row) in sel.iter().enumerate() {
                factors[j].set_row(i * m + s, &phi.row(row));
            }
        }
        if i + 1 < n_s {
            phi = step_jacobian(model, state)?.mul_dense(&phi);
        }
    }
    let mut atoms = GramianAtoms::from_factors(
        model.scenario().id.clone(),
        labels_for(model, sensor),
        factors,
        m,
        dense_cap,
    )?;
    atoms.set_steps_per_hydraulic(model.steps_per_hydraulic());
    Ok(atoms)
}

/// Simulates the scenario and builds its atoms along the nominal trajectory.
pub fn scenario_atoms(model: &WqModel, sensor: &SensorModel, dense_cap: usize) -> Result<GramianAtoms> {
    let traj = model.simulate()?;
    gramian_atoms_streaming(model, &traj, sensor, dense_cap)
}
