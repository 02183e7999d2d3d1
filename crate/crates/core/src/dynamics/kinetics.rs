//! Component update laws: reaction kinetics, junction mixing, tank CSTR
//! balance and the upwind pipe-segment update.

use crate::error::{Error, Result};

/// Junction throughflow below this (m³/s) is treated as stagnant.
pub const STAGNATION_THRESHOLD: f64 = 1e-12;

/// Effective first-order chlorine decay rate in a pipe of radius `radius`:
/// bulk decay plus wall demand limited by mass transfer.
///
/// With no wall reaction and no mass transfer the wall term vanishes and the
/// bulk rate is returned.
pub fn wall_decay_coefficient(alpha_b: f64, alpha_w: f64, alpha_f: f64, radius: f64) -> f64 {
    debug_assert!(radius > 0.0);
    let denom = alpha_w + alpha_f;
    if denom == 0.0 {
        return alpha_b;
    }
    alpha_b + 2.0 * alpha_w * alpha_f / (radius * denom)
}

/// Reaction rates `(R_c, R_c̃)` for chlorine `c` and reactant `c_r`:
/// first-order decay of chlorine plus the bilinear mutual reaction.
pub fn reaction_rates(c: f64, c_r: f64, alpha: f64, alpha_r: f64) -> (f64, f64) {
    (-(alpha + alpha_r * c_r) * c, -alpha_r * c * c_r)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mixing {
    Mixed(f64),
    /// No outflow and no demand: the junction keeps its previous value.
    Stagnant,
}

/// Flow-weighted complete mixing at a junction.
///
/// `inflows` are `(q, c)` pairs, the booster injects `q_b` at `c_b`, and the
/// water leaves through demand `q_d` and the `outflows`.
pub fn junction_mixing(inflows: &[(f64, f64)], q_b: f64, c_b: f64, q_d: f64, outflows: &[f64]) -> Mixing {
    let denom = q_d + outflows.iter().sum::<f64>();
    if denom <= STAGNATION_THRESHOLD {
        return Mixing::Stagnant;
    }
    let load: f64 = inflows.iter().map(|(q, c)| q * c).sum::<f64>() + q_b * c_b;
    Mixing::Mixed(load / denom)
}

/// Inputs of one continuously-stirred tank update.
#[derive(Debug, Clone, Copy)]
pub struct TankStep<'a> {
    pub volume: f64,
    pub concentration: f64,
    pub inflows: &'a [(f64, f64)],
    pub booster_volume: f64,
    pub booster_concentration: f64,
    pub outflow: f64,
    pub rate: f64,
    pub dt: f64,
    pub next_volume: f64,
}

impl TankStep<'_> {
    /// Unclamped next concentration.
    pub(crate) fn raw(&self) -> Result<f64> {
        if !(self.volume > 0.0 && self.next_volume > 0.0) {
            return Err(Error::validation(format!(
                "tank volume must stay positive (V = {}, V_next = {})",
                self.volume, self.next_volume
            )));
        }
        let inflow: f64 = self.inflows.iter().map(|(q, c)| q * c).sum();
        let mass = self.volume * self.concentration
            + inflow * self.dt
            + self.booster_volume * self.booster_concentration
            - self.outflow * self.concentration * self.dt
            + self.rate * self.volume * self.dt;
        Ok(mass / self.next_volume)
    }
}

/// CSTR mass balance over one water-quality step, clamped at zero.
pub fn tank_update(step: &TankStep<'_>) -> Result<f64> {
    step.raw().map(|c| c.max(0.0))
}

pub(crate) fn check_courant(lambda: f64) -> Result<()> {
    if lambda.is_finite() && (0.0..=1.0).contains(&lambda) {
        Ok(())
    } else {
        Err(Error::validation(format!(
            "Courant number {lambda} outside [0, 1]"
        )))
    }
}

/// First-order upwind advection plus explicit reaction for one segment,
/// clamped at zero. `rate` is that species' reaction rate at the segment.
///
/// A zero Courant number is accepted for stagnant pipes.
pub fn pipe_segment_update(c_s: f64, c_up: f64, lambda: f64, rate: f64, dt: f64) -> Result<f64> {
    check_courant(lambda)?;
    Ok(((1.0 - lambda) * c_s + lambda * c_up + rate * dt).max(0.0))
}
