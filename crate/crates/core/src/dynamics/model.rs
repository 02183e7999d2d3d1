use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DVector;

use super::kinetics::{
    check_courant, junction_mixing, wall_decay_coefficient, Mixing, TankStep, STAGNATION_THRESHOLD,
};
use super::scenario::{BoosterWindow, Scenario};
use crate::error::{Error, Result};
use crate::network::{
    segment_pipes, HydraulicProfile, LinkKind, NodeKind, Reactions, Segmentation, Species,
    StateEntity, WaterNetwork,
};

/// The full two-species state at one water-quality step.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedState {
    pub k: usize,
    pub x: DVector<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepDiagnostics {
    /// Entries whose update went negative and was clamped to zero.
    pub clamped: usize,
    /// Junction entries held because nothing left the junction.
    pub stagnant: usize,
}

impl std::ops::AddAssign for StepDiagnostics {
    fn add_assign(&mut self, o: Self) {
        self.clamped += o.clamped;
        self.stagnant += o.stagnant;
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<SegmentedState>,
    pub diagnostics: StepDiagnostics,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// How one entry of a species block is updated during a hydraulic step.
/// Local indices refer to positions inside a species block.
#[derive(Debug, Clone)]
pub(crate) enum Row {
    /// Reservoirs never change.
    Fixed,
    /// Stagnant junction: keeps its value.
    Hold,
    Segment {
        pipe: usize,
        up: usize,
        lambda: f64,
    },
    Junction {
        node: usize,
        inflows: Vec<(usize, f64)>,
        denom: f64,
    },
    Tank {
        node: usize,
        inflows: Vec<(usize, f64)>,
        outflow: f64,
        net_inflow: f64,
    },
}

#[derive(Debug, Clone, Copy)]
struct PipeKinetics {
    decay: f64,
    alpha_r: f64,
}

/// Two-species water-quality model for one network, hydraulic profile and
/// scenario.
#[derive(Debug, Clone)]
pub struct WqModel {
    net: Arc<WaterNetwork>,
    hyd: Arc<HydraulicProfile>,
    scenario: Scenario,
    seg: Arc<Segmentation>,
    n_steps: usize,
    ratio: usize,
    pipe_kinetics: Vec<PipeKinetics>,
    tank_alpha_b: f64,
    tank_alpha_r: f64,
    plans: Vec<Vec<Row>>,
    boosters: HashMap<(usize, Species), Vec<BoosterWindow>>,
    x0: DVector<f64>,
}

fn effective_pipe_kinetics(net: &WaterNetwork, reactions: &Reactions, l: usize) -> PipeKinetics {
    let link = net.link(l);
    let p = reactions
        .pipes
        .get(&link.id)
        .map(|o| o.apply(reactions.global))
        .unwrap_or(reactions.global);
    PipeKinetics {
        decay: wall_decay_coefficient(p.alpha_b, p.alpha_w, p.alpha_f, link.radius.expect("pipe radius")),
        alpha_r: p.alpha_r,
    }
}

impl WqModel {
    pub fn new(net: &WaterNetwork, hyd: &HydraulicProfile, scenario: &Scenario) -> Result<Self> {
        Self::with_shared(Arc::new(net.clone()), Arc::new(hyd.clone()), scenario)
    }

    pub fn with_shared(net: Arc<WaterNetwork>, hyd: Arc<HydraulicProfile>, scenario: &Scenario) -> Result<Self> {
        scenario.validate(&net)?;
        let ctx = |e: Error| e.context(format!("scenario `{}`", scenario.id));
        if let Some(dt_h) = hyd.dt_h() {
            if (dt_h - scenario.dt_h).abs() > 1e-9 * dt_h {
                return Err(ctx(Error::validation(format!(
                    "hydraulics declare dt_h = {dt_h} but the scenario uses {}",
                    scenario.dt_h
                ))));
            }
        }
        let n_steps = scenario.n_steps();
        let ratio = scenario.steps_per_hydraulic();
        let needed = if n_steps > 1 { (n_steps - 2) / ratio + 1 } else { 0 };
        if hyd.n_steps() < needed {
            return Err(ctx(Error::validation(format!(
                "horizon needs {needed} hydraulic steps, profile has {}",
                hyd.n_steps()
            ))));
        }
        let seg = Arc::new(segment_pipes(&net, &hyd, scenario.dt_wq).map_err(ctx)?);
        let reactions = scenario.reaction_overrides.apply(net.reactions());
        let pipe_kinetics = seg
            .pipes()
            .iter()
            .map(|p| effective_pipe_kinetics(&net, &reactions, p.link))
            .collect();

        let mut boosters: HashMap<(usize, Species), Vec<BoosterWindow>> = HashMap::new();
        for b in &scenario.boosters {
            let n = net.node_index(&b.node).expect("validated booster node");
            boosters
                .entry((n, b.species))
                .or_default()
                .extend(b.schedule.iter().cloned());
        }

        let mut x0 = DVector::zeros(seg.n_x());
        for iv in &scenario.initial {
            let n = net.node_index(&iv.node).expect("validated node");
            x0[seg.node_index(n, iv.species)] = iv.value;
        }

        let mut model = WqModel {
            net,
            hyd,
            scenario: scenario.clone(),
            seg,
            n_steps,
            ratio,
            pipe_kinetics,
            tank_alpha_b: reactions.global.alpha_b,
            tank_alpha_r: reactions.global.alpha_r,
            plans: Vec::new(),
            boosters,
            x0,
        };
        model.plans = (0..needed.max(1).min(model.hyd.n_steps()))
            .map(|h| model.build_plan(h))
            .collect::<Result<_>>()
            .map_err(ctx)?;
        Ok(model)
    }

    pub fn network(&self) -> &WaterNetwork {
        &self.net
    }

    pub fn hydraulics(&self) -> &HydraulicProfile {
        &self.hyd
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn segmentation(&self) -> &Segmentation {
        &self.seg
    }

    pub fn shared_segmentation(&self) -> Arc<Segmentation> {
        Arc::clone(&self.seg)
    }

    pub fn n_x(&self) -> usize {
        self.seg.n_x()
    }

    /// Number of samples N_s in a trajectory.
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn steps_per_hydraulic(&self) -> usize {
        self.ratio
    }

    pub fn dt(&self) -> f64 {
        self.seg.dt_wq()
    }

    pub fn hydraulic_step(&self, k: usize) -> usize {
        k / self.ratio
    }

    pub fn initial_state(&self) -> SegmentedState {
        SegmentedState {
            k: 0,
            x: self.x0.clone(),
        }
    }

    /// Replaces the initial state (used by perturbation studies).
    pub fn set_initial(&mut self, x0: DVector<f64>) -> Result<()> {
        if x0.len() != self.n_x() {
            return Err(Error::Dimension(format!(
                "initial state has length {}, expected {}",
                x0.len(),
                self.n_x()
            )));
        }
        self.x0 = x0;
        Ok(())
    }

    fn build_plan(&self, h: usize) -> Result<Vec<Row>> {
        let net = &*self.net;
        let hyd = &*self.hyd;
        let seg = &*self.seg;
        let n_nodes = net.node_count();
        let mut inflows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_nodes];
        let mut outflow = vec![0.0; n_nodes];
        let local_segment = |link: usize, s: usize| seg.segment_index(link, s, Species::Chlorine);

        for l in 0..net.link_count() {
            let (from, to) = net.endpoints(l);
            let q = hyd.flow(h, l);
            if q == 0.0 {
                continue;
            }
            let (up_node, down_node) = if q > 0.0 { (from, to) } else { (to, from) };
            let source = match net.link(l).kind {
                LinkKind::Pipe => {
                    let count = seg.pipe(l).expect("pipe segmented").count;
                    local_segment(l, if q > 0.0 { count - 1 } else { 0 })
                }
                LinkKind::Pump | LinkKind::Valve => up_node,
            };
            inflows[down_node].push((source, q.abs()));
            outflow[up_node] += q.abs();
        }

        let mut rows = Vec::with_capacity(seg.block_len());
        for (n, node) in net.nodes().iter().enumerate() {
            let demand = hyd.demand(h, n);
            let row = match node.kind {
                NodeKind::Reservoir => Row::Fixed,
                NodeKind::Junction => {
                    let mut ins = std::mem::take(&mut inflows[n]);
                    if demand < 0.0 {
                        // Negative demand is an external inflow; it carries the
                        // junction's own concentration.
                        ins.push((n, -demand));
                    }
                    let denom = demand.max(0.0) + outflow[n];
                    if denom <= STAGNATION_THRESHOLD {
                        Row::Hold
                    } else {
                        Row::Junction {
                            node: n,
                            inflows: ins,
                            denom,
                        }
                    }
                }
                NodeKind::Tank => {
                    let ins = std::mem::take(&mut inflows[n]);
                    let total_in: f64 = ins.iter().map(|(_, q)| q).sum();
                    let out = outflow[n] + demand.max(0.0);
                    Row::Tank {
                        node: n,
                        net_inflow: total_in + (-demand).max(0.0) + hyd.booster_flow(h, n) - out,
                        inflows: ins,
                        outflow: out,
                    }
                }
            };
            rows.push(row);
        }
        for (p, pipe) in seg.pipes().iter().enumerate() {
            let l = pipe.link;
            let (from, to) = net.endpoints(l);
            let q = hyd.flow(h, l);
            let lambda = pipe.courant[h];
            check_courant(lambda).map_err(|e| e.context(format!("pipe `{}`", net.link(l).id)))?;
            for s in 0..pipe.count {
                let up = if q >= 0.0 {
                    if s == 0 {
                        from
                    } else {
                        local_segment(l, s - 1)
                    }
                } else if s + 1 == pipe.count {
                    to
                } else {
                    local_segment(l, s + 1)
                };
                rows.push(Row::Segment { pipe: p, up, lambda });
            }
        }
        debug_assert_eq!(rows.len(), seg.block_len());
        Ok(rows)
    }

    pub(crate) fn plan(&self, k: usize) -> Result<&[Row]> {
        let h = self.hydraulic_step(k);
        self.plans.get(h).map(Vec::as_slice).ok_or_else(|| {
            Error::validation(format!(
                "no hydraulic data for water-quality step {k} (hydraulic step {h})"
            ))
        })
    }

    /// Tank volume at water-quality step `k`: the hydraulic volume at the
    /// start of the window plus the net inflow since then.
    pub fn tank_volume(&self, node: usize, k: usize) -> f64 {
        let h = self.hydraulic_step(k).min(self.plans.len() - 1);
        let tau = (k - h * self.ratio) as f64 * self.dt();
        let net_inflow = match &self.plans[h][node] {
            Row::Tank { net_inflow, .. } => *net_inflow,
            _ => 0.0,
        };
        self.hyd.volume(h, node) + net_inflow * tau
    }

    /// `(flow or volume, concentration)` injected at `node` for `species` at
    /// step `k`. Outside every schedule window the injected concentration
    /// is zero.
    fn booster(&self, node: usize, species: Species, k: usize) -> (f64, f64) {
        let h = self.hydraulic_step(k).min(self.hyd.n_steps() - 1);
        let tank = self.net.node(node).kind == NodeKind::Tank;
        let from_profile = if tank {
            self.hyd.booster_volume(h, node)
        } else {
            self.hyd.booster_flow(h, node)
        };
        let window = self
            .boosters
            .get(&(node, species))
            .and_then(|ws| ws.iter().find(|w| (w.step_range[0]..w.step_range[1]).contains(&k)));
        match window {
            Some(w) => (w.flow_or_volume.unwrap_or(from_profile), w.concentration),
            None => (from_profile, 0.0),
        }
    }

    /// Unclamped update of local entry `i` of `species`, optionally with its
    /// partial derivatives as `(state index, value)` pairs.
    pub(crate) fn eval_row(
        &self,
        rows: &[Row],
        species: Species,
        i: usize,
        x: &DVector<f64>,
        k: usize,
        mut partials: Option<&mut Vec<(usize, f64)>>,
    ) -> Result<f64> {
        let block = self.seg.block_len();
        let base = species.index() * block;
        let other = (1 - species.index()) * block;
        let dt = self.dt();
        let mut push = |j: usize, v: f64| {
            if let Some(p) = partials.as_deref_mut() {
                p.push((j, v));
            }
        };
        match &rows[i] {
            Row::Fixed | Row::Hold => {
                push(base + i, 1.0);
                Ok(x[base + i])
            }
            Row::Segment { pipe, up, lambda } => {
                let PipeKinetics { decay, alpha_r } = self.pipe_kinetics[*pipe];
                let c = x[base + i];
                let co = x[other + i];
                let (rate, d_self, d_other) = match species {
                    Species::Chlorine => (-(decay + alpha_r * co) * c, -(decay + alpha_r * co), -alpha_r * c),
                    Species::Reactant => (-alpha_r * co * c, -alpha_r * co, -alpha_r * c),
                };
                push(base + i, (1.0 - lambda) + d_self * dt);
                if *lambda != 0.0 {
                    push(base + up, *lambda);
                }
                if d_other != 0.0 {
                    push(other + i, d_other * dt);
                }
                Ok((1.0 - lambda) * c + lambda * x[base + up] + rate * dt)
            }
            Row::Junction { node, inflows, denom } => {
                let (q_b, c_b) = self.booster(*node, species, k);
                let pairs: Vec<(f64, f64)> = inflows.iter().map(|&(j, q)| (q, x[base + j])).collect();
                for &(j, q) in inflows {
                    push(base + j, q / denom);
                }
                match junction_mixing(&pairs, q_b, c_b, *denom, &[]) {
                    Mixing::Mixed(c) => Ok(c),
                    Mixing::Stagnant => unreachable!("stagnant junctions are planned as Hold"),
                }
            }
            Row::Tank {
                node,
                inflows,
                outflow,
                ..
            } => {
                let volume = self.tank_volume(*node, k);
                let next_volume = self.tank_volume(*node, k + 1);
                let (v_b, c_b) = self.booster(*node, species, k + 1);
                let c = x[base + i];
                let co = x[other + i];
                let (ab, ar) = (self.tank_alpha_b, self.tank_alpha_r);
                let (rate, d_self, d_other) = match species {
                    Species::Chlorine => (-(ab + ar * co) * c, -(ab + ar * co), -ar * c),
                    Species::Reactant => (-ar * co * c, -ar * co, -ar * c),
                };
                let pairs: Vec<(f64, f64)> = inflows.iter().map(|&(j, q)| (q, x[base + j])).collect();
                let step = TankStep {
                    volume,
                    concentration: c,
                    inflows: &pairs,
                    booster_volume: v_b,
                    booster_concentration: c_b,
                    outflow: *outflow,
                    rate,
                    dt,
                    next_volume,
                };
                let raw = step
                    .raw()
                    .map_err(|e| e.context(format!("tank `{}` at step {k}", self.net.node(*node).id)))?;
                push(base + i, (volume - outflow * dt + d_self * volume * dt) / next_volume);
                for &(j, q) in inflows {
                    push(base + j, q * dt / next_volume);
                }
                if d_other != 0.0 {
                    push(other + i, d_other * volume * dt / next_volume);
                }
                Ok(raw)
            }
        }
    }

    /// Advances the state by one water-quality step. Every entry is computed
    /// from the step-`k` values only.
    pub fn step(&self, state: &SegmentedState) -> Result<(SegmentedState, StepDiagnostics)> {
        if state.x.len() != self.n_x() {
            return Err(Error::Dimension(format!(
                "state has length {}, expected {}",
                state.x.len(),
                self.n_x()
            )));
        }
        let k = state.k;
        let rows = self.plan(k)?;
        let block = self.seg.block_len();
        let mut next = DVector::zeros(self.n_x());
        let mut diag = StepDiagnostics::default();
        for species in Species::ALL {
            let base = species.index() * block;
            for i in 0..block {
                if matches!(rows[i], Row::Hold) {
                    diag.stagnant += 1;
                }
                let v = self.eval_row(rows, species, i, &state.x, k, None)?;
                next[base + i] = if v < 0.0 {
                    diag.clamped += 1;
                    0.0
                } else {
                    v
                };
            }
        }
        Ok((SegmentedState { k: k + 1, x: next }, diag))
    }

    /// Runs the scenario from its initial state; returns N_s states.
    pub fn simulate(&self) -> Result<Trajectory> {
        self.simulate_from(self.initial_state())
    }

    pub fn simulate_from(&self, x0: SegmentedState) -> Result<Trajectory> {
        let mut states = Vec::with_capacity(self.n_steps);
        let mut diagnostics = StepDiagnostics::default();
        states.push(x0);
        while states.len() < self.n_steps {
            let (next, d) = self.step(states.last().expect("non-empty"))?;
            diagnostics += d;
            states.push(next);
        }
        if diagnostics.clamped > 0 {
            log::debug!(
                "scenario `{}`: {} negative updates clamped to zero",
                self.scenario.id,
                diagnostics.clamped
            );
        }
        Ok(Trajectory { states, diagnostics })
    }

    /// Mass of `species` held in the network at step `k` (mg per litre
    /// times m³): pipe segments, tanks, and water passing through junctions
    /// during the step. Reservoirs are excluded.
    pub fn species_mass(&self, x: &DVector<f64>, species: Species, k: usize) -> Result<f64> {
        let rows = self.plan(k)?;
        let base = species.index() * self.seg.block_len();
        let mut mass = 0.0;
        for (i, row) in rows.iter().enumerate() {
            let c = x[base + i];
            mass += match row {
                Row::Fixed | Row::Hold => 0.0,
                Row::Junction { denom, .. } => c * denom * self.dt(),
                Row::Tank { node, .. } => c * self.tank_volume(*node, k),
                Row::Segment { .. } => match self.seg.entity(base + i).0 {
                    StateEntity::Segment { link, .. } => c * self.seg.segment_volume(&self.net, link),
                    StateEntity::Node(_) => unreachable!(),
                },
            };
        }
        Ok(mass)
    }
}
