use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::dynamics::{SegmentedState, Trajectory, WqModel};
use crate::error::{Error, Result};
use crate::network::Species;

/// Sparse step Jacobian F_k = ∂x(k+1)/∂x(k) in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct StepJacobian {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl StepJacobian {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Nonzero `(column, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).filter(|&(c, _)| c == j).map(|(_, v)| v).sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }

    /// `F · M` for a dense `M` with `dim()` rows.
    pub fn mul_dense(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(m.nrows(), self.n, "dimension mismatch in F·M");
        let n = self.n;
        let mut out = DMatrix::zeros(n, m.ncols());
        if n == 0 {
            return out;
        }
        out.as_mut_slice()
            .par_chunks_mut(n)
            .zip(m.as_slice().par_chunks(n))
            .for_each(|(dst, src)| {
                for (i, d) in dst.iter_mut().enumerate() {
                    let r = self.row_ptr[i]..self.row_ptr[i + 1];
                    *d = self.cols[r.clone()]
                        .iter()
                        .zip(&self.vals[r])
                        .map(|(&c, &v)| v * src[c])
                        .sum();
                }
            });
        out
    }
}

/// Analytic Jacobian of [`WqModel::step`] at `state`.
///
/// Rows of entries that the step clamps to zero are zero: the clamp is
/// locally constant there.
pub fn step_jacobian(model: &WqModel, state: &SegmentedState) -> Result<StepJacobian> {
    let n = model.n_x();
    if state.x.len() != n {
        return Err(Error::Dimension(format!("state has length {}, expected {n}", state.x.len())));
    }
    let rows = model.plan(state.k)?;
    let block = model.segmentation().block_len();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(3 * n);
    let mut vals = Vec::with_capacity(3 * n);
    let mut partials = Vec::new();
    row_ptr.push(0);
    for species in Species::ALL {
        for i in 0..block {
            partials.clear();
            let raw = model.eval_row(rows, species, i, &state.x, state.k, Some(&mut partials))?;
            if raw >= 0.0 {
                for &(c, v) in &partials {
                    if v != 0.0 {
                        cols.push(c);
                        vals.push(v);
                    }
                }
            }
            row_ptr.push(cols.len());
        }
    }
    Ok(StepJacobian { n, row_ptr, cols, vals })
}

/// The sensitivities Φ_i = ∂x_i/∂x_0 along one trajectory.
#[derive(Debug, Clone)]
pub struct TrajectoryJacobians {
    pub scenario: String,
    pub phi: Vec<DMatrix<f64>>,
}

pub(crate) fn check_trajectory(model: &WqModel, traj: &Trajectory) -> Result<()> {
    if traj.states.is_empty() {
        return Err(Error::Dimension("empty trajectory".into()));
    }
    for s in &traj.states {
        if s.x.len() != model.n_x() {
            return Err(Error::Dimension(format!(
                "trajectory state at step {} has length {}, model expects {}",
                s.k,
                s.x.len(),
                model.n_x()
            )));
        }
    }
    Ok(())
}

/// Chain-rule propagation Φ_0 = I, Φ_{i+1} = F_i Φ_i, keeping every Φ_i.
/// Memory grows as N_s·n_x²; [`super::gramian_atoms_streaming`] avoids that.
pub fn trajectory_jacobians(model: &WqModel, traj: &Trajectory) -> Result<TrajectoryJacobians> {
    check_trajectory(model, traj)?;
    let mut phi = Vec::with_capacity(traj.len());
    phi.push(DMatrix::identity(model.n_x(), model.n_x()));
    for state in &traj.states[..traj.len() - 1] {
        let f = step_jacobian(model, state)?;
        let next = f.mul_dense(phi.last().expect("non-empty"));
        phi.push(next);
    }
    Ok(TrajectoryJacobians {
        scenario: model.scenario().id.clone(),
        phi,
    })
}
