//! Hydraulic profiles: the exogenous flows, demands and tank volumes that
//! parameterize the water-quality dynamics.
//!
//! The CSV form is long-format with the header
//! `step,entity_kind,entity_id,quantity,value`. Leading `#` lines may carry
//! directives:
//!
//! ```text
//! # dt_h = 3600
//! # flow_unit = L/s        (m3/s, L/s, m3/h, GPM)
//! # volume_unit = m3       (m3, L)
//! ```

use std::collections::HashSet;
use std::fmt::Write as _;
use std::str::FromStr;

use super::{LinkKind, NodeKind, WaterNetwork};
use crate::error::{Error, Result};

/// Relative tolerance of the junction mass balance check.
pub const MASS_BALANCE_TOLERANCE: f64 = 1e-6;

const VELOCITY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quantity {
    Flow,
    Velocity,
    Demand,
    BoosterFlow,
    Volume,
    BoosterVolume,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Quantity::Flow => "flow",
            Quantity::Velocity => "velocity",
            Quantity::Demand => "demand",
            Quantity::BoosterFlow => "booster_flow",
            Quantity::Volume => "volume",
            Quantity::BoosterVolume => "booster_volume",
        }
    }

    fn on_links(self) -> bool {
        matches!(self, Quantity::Flow | Quantity::Velocity)
    }
}

impl FromStr for Quantity {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "flow" => Quantity::Flow,
            "velocity" => Quantity::Velocity,
            "demand" => Quantity::Demand,
            "booster_flow" => Quantity::BoosterFlow,
            "volume" => Quantity::Volume,
            "booster_volume" => Quantity::BoosterVolume,
            other => return Err(format!("unknown quantity `{other}`")),
        })
    }
}

/// Per-hydraulic-step link flows and velocities, junction demands and
/// booster flows, tank volumes and booster volumes, all SI.
///
/// Flows are signed with respect to the declared link orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct HydraulicProfile {
    n_steps: usize,
    dt_h: Option<f64>,
    flow: Vec<Vec<f64>>,
    velocity: Vec<Vec<f64>>,
    demand: Vec<Vec<f64>>,
    booster_flow: Vec<Vec<f64>>,
    volume: Vec<Vec<f64>>,
    booster_volume: Vec<Vec<f64>>,
}

impl HydraulicProfile {
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Hydraulic time step in seconds, when the source declared one.
    pub fn dt_h(&self) -> Option<f64> {
        self.dt_h
    }

    pub fn flow(&self, step: usize, link: usize) -> f64 {
        self.flow[step][link]
    }

    /// Pipe velocity in m/s (signed like the flow). Zero for pumps and valves.
    pub fn velocity(&self, step: usize, link: usize) -> f64 {
        self.velocity[step][link]
    }

    pub fn demand(&self, step: usize, node: usize) -> f64 {
        self.demand[step][node]
    }

    pub fn booster_flow(&self, step: usize, node: usize) -> f64 {
        self.booster_flow[step][node]
    }

    pub fn volume(&self, step: usize, node: usize) -> f64 {
        self.volume[step][node]
    }

    pub fn booster_volume(&self, step: usize, node: usize) -> f64 {
        self.booster_volume[step][node]
    }

    /// Total `(inflow, outflow)` through the links incident to `node`.
    pub fn throughflow(&self, net: &WaterNetwork, step: usize, node: usize) -> (f64, f64) {
        let mut inflow = 0.0;
        let mut outflow = 0.0;
        for l in 0..net.link_count() {
            let (from, to) = net.endpoints(l);
            let q = self.flow[step][l];
            if to == node {
                if q > 0.0 {
                    inflow += q;
                } else {
                    outflow -= q;
                }
            } else if from == node {
                if q > 0.0 {
                    outflow += q;
                } else {
                    inflow -= q;
                }
            }
        }
        (inflow, outflow)
    }

    /// Serializes to the CSV form accepted by [`load_hydraulics`] (SI units).
    pub fn to_csv(&self, net: &WaterNetwork) -> String {
        let mut out = String::new();
        if let Some(dt) = self.dt_h {
            let _ = writeln!(out, "# dt_h = {dt}");
        }
        out.push_str("step,entity_kind,entity_id,quantity,value\n");
        for step in 0..self.n_steps {
            for (l, link) in net.links().iter().enumerate() {
                let _ = writeln!(out, "{step},link,{},flow,{:?}", link.id, self.flow[step][l]);
            }
            for (i, node) in net.nodes().iter().enumerate() {
                match node.kind {
                    NodeKind::Junction => {
                        let _ = writeln!(out, "{step},node,{},demand,{:?}", node.id, self.demand[step][i]);
                        if self.booster_flow[step][i] != 0.0 {
                            let _ = writeln!(
                                out,
                                "{step},node,{},booster_flow,{:?}",
                                node.id, self.booster_flow[step][i]
                            );
                        }
                    }
                    NodeKind::Tank => {
                        let _ = writeln!(out, "{step},node,{},volume,{:?}", node.id, self.volume[step][i]);
                        if self.booster_volume[step][i] != 0.0 {
                            let _ = writeln!(
                                out,
                                "{step},node,{},booster_volume,{:?}",
                                node.id, self.booster_volume[step][i]
                            );
                        }
                    }
                    NodeKind::Reservoir => {}
                }
            }
        }
        out
    }
}

/// Incrementally assembles a [`HydraulicProfile`]; unset values are zero.
#[derive(Debug, Clone)]
pub struct ProfileBuilder {
    n_steps: usize,
    dt_h: Option<f64>,
    flow: Vec<Vec<f64>>,
    velocity: Vec<Vec<Option<f64>>>,
    node_values: [Vec<Vec<f64>>; 4],
    volume_set: Vec<Vec<bool>>,
}

impl ProfileBuilder {
    pub fn new(net: &WaterNetwork, n_steps: usize, dt_h: Option<f64>) -> Self {
        let links = net.link_count();
        let nodes = net.node_count();
        let zeros = |n| vec![vec![0.0; n]; n_steps];
        ProfileBuilder {
            n_steps,
            dt_h,
            flow: zeros(links),
            velocity: vec![vec![None; links]; n_steps],
            node_values: [zeros(nodes), zeros(nodes), zeros(nodes), zeros(nodes)],
            volume_set: vec![vec![false; nodes]; n_steps],
        }
    }

    pub fn flow(&mut self, step: usize, link: usize, q: f64) -> &mut Self {
        self.flow[step][link] = q;
        self
    }

    pub fn velocity(&mut self, step: usize, link: usize, v: f64) -> &mut Self {
        self.velocity[step][link] = Some(v);
        self
    }

    pub fn demand(&mut self, step: usize, node: usize, q: f64) -> &mut Self {
        self.node_values[0][step][node] = q;
        self
    }

    pub fn booster_flow(&mut self, step: usize, node: usize, q: f64) -> &mut Self {
        self.node_values[1][step][node] = q;
        self
    }

    pub fn volume(&mut self, step: usize, node: usize, v: f64) -> &mut Self {
        self.node_values[2][step][node] = v;
        self.volume_set[step][node] = true;
        self
    }

    pub fn booster_volume(&mut self, step: usize, node: usize, v: f64) -> &mut Self {
        self.node_values[3][step][node] = v;
        self
    }

    /// Derives missing pipe velocities and checks every profile invariant.
    pub fn build(self, net: &WaterNetwork) -> Result<HydraulicProfile> {
        if self.n_steps == 0 {
            return Err(Error::validation("hydraulic profile has no steps"));
        }
        if let Some(dt) = self.dt_h {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(Error::validation(format!("dt_h must be > 0, got {dt}")));
            }
        }
        let [demand, booster_flow, volume, booster_volume] = self.node_values;
        let mut velocity = vec![vec![0.0; net.link_count()]; self.n_steps];
        for step in 0..self.n_steps {
            for (l, slot) in velocity[step].iter_mut().enumerate() {
                let link = net.link(l);
                let q = self.flow[step][l];
                if !q.is_finite() {
                    return Err(Error::validation(format!(
                        "non-finite flow on link `{}` at step {step}",
                        link.id
                    )));
                }
                let given = self.velocity[step][l];
                if link.kind != LinkKind::Pipe {
                    if given.is_some_and(|v| v != 0.0) {
                        return Err(Error::validation(format!(
                            "velocity given for non-pipe link `{}`",
                            link.id
                        )));
                    }
                    continue;
                }
                let derived = q / net.pipe_area(l).expect("validated pipe radius");
                *slot = match given {
                    Some(v) => {
                        let scale = derived.abs().max(v.abs()).max(f64::MIN_POSITIVE);
                        if !v.is_finite() || (v - derived).abs() > VELOCITY_TOLERANCE * scale {
                            return Err(Error::validation(format!(
                                "velocity {v} on pipe `{}` at step {step} is inconsistent with \
                                 flow {q} (expected {derived})",
                                link.id
                            )));
                        }
                        v
                    }
                    None => derived,
                };
            }
            for (i, node) in net.nodes().iter().enumerate() {
                for (what, v) in [
                    ("demand", demand[step][i]),
                    ("booster_flow", booster_flow[step][i]),
                    ("volume", volume[step][i]),
                    ("booster_volume", booster_volume[step][i]),
                ] {
                    if !v.is_finite() {
                        return Err(Error::validation(format!(
                            "non-finite {what} at node `{}` step {step}",
                            node.id
                        )));
                    }
                }
                if node.kind == NodeKind::Tank
                    && (!self.volume_set[step][i] || volume[step][i] <= 0.0)
                {
                    return Err(Error::validation(format!(
                        "tank `{}` needs a strictly positive volume at step {step}",
                        node.id
                    )));
                }
                if booster_volume[step][i] < 0.0 || booster_flow[step][i] < 0.0 {
                    return Err(Error::validation(format!(
                        "negative booster flow or volume at node `{}` step {step}",
                        node.id
                    )));
                }
            }
        }

        let profile = HydraulicProfile {
            n_steps: self.n_steps,
            dt_h: self.dt_h,
            flow: self.flow,
            velocity,
            demand,
            booster_flow,
            volume,
            booster_volume,
        };
        check_mass_balance(net, &profile)?;
        Ok(profile)
    }
}

fn check_mass_balance(net: &WaterNetwork, hyd: &HydraulicProfile) -> Result<()> {
    for step in 0..hyd.n_steps {
        for (i, node) in net.nodes().iter().enumerate() {
            if node.kind != NodeKind::Junction {
                continue;
            }
            let (inflow, outflow) = hyd.throughflow(net, step, i);
            let residual = inflow + hyd.booster_flow[step][i] - outflow - hyd.demand[step][i];
            let tolerance = MASS_BALANCE_TOLERANCE * inflow.max(1.0);
            if residual.abs() > tolerance {
                return Err(Error::MassBalance {
                    junction: node.id.clone(),
                    step,
                    residual,
                    tolerance,
                });
            }
        }
    }
    Ok(())
}

impl HydraulicProfile {
    pub fn builder(net: &WaterNetwork, n_steps: usize, dt_h: Option<f64>) -> ProfileBuilder {
        ProfileBuilder::new(net, n_steps, dt_h)
    }
}

struct Directives {
    dt_h: Option<f64>,
    flow_scale: f64,
    volume_scale: f64,
}

fn parse_directives(text: &str) -> Result<Directives> {
    let mut d = Directives {
        dt_h: None,
        flow_scale: 1.0,
        volume_scale: 1.0,
    };
    for (i, line) in text.lines().enumerate() {
        let Some(body) = line.trim().strip_prefix('#') else {
            continue;
        };
        let Some((key, value)) = body.split_once('=') else {
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        let bad = |msg: String| Error::Syntax {
            line: i + 1,
            message: msg,
        };
        match key {
            "dt_h" => {
                d.dt_h = Some(
                    value
                        .parse()
                        .map_err(|_| bad(format!("cannot parse dt_h `{value}`")))?,
                )
            }
            "flow_unit" => {
                d.flow_scale = match value {
                    "m3/s" => 1.0,
                    "L/s" => 1e-3,
                    "m3/h" => 1.0 / 3600.0,
                    "GPM" => 6.309_019_640_343_866e-5,
                    other => return Err(bad(format!("unknown flow unit `{other}`"))),
                }
            }
            "volume_unit" => {
                d.volume_scale = match value {
                    "m3" => 1.0,
                    "L" => 1e-3,
                    other => return Err(bad(format!("unknown volume unit `{other}`"))),
                }
            }
            _ => {}
        }
    }
    Ok(d)
}

/// Loads a hydraulic profile CSV against `net` and validates it, including
/// the junction mass balance.
pub fn load_hydraulics(text: &str, net: &WaterNetwork) -> Result<HydraulicProfile> {
    let directives = parse_directives(text)?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let header = reader
        .headers()
        .map_err(|e| Error::Syntax {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let expected = ["step", "entity_kind", "entity_id", "quantity", "value"];
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(Error::validation(format!(
            "hydraulics header must be `{}`",
            expected.join(",")
        )));
    }

    struct Row {
        step: usize,
        entity: usize,
        quantity: Quantity,
        value: f64,
    }
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    let mut max_step = None;
    for record in reader.records() {
        let record = record.map_err(|e| Error::Syntax {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let bad = |msg: String| Error::Syntax { line, message: msg };
        if record.len() != 5 {
            return Err(bad(format!("expected 5 columns, found {}", record.len())));
        }
        let step: usize = record[0]
            .parse()
            .map_err(|_| bad(format!("cannot parse step `{}`", &record[0])))?;
        let kind = &record[1];
        let id = &record[2];
        let quantity: Quantity = record[3].parse().map_err(bad)?;
        let value: f64 = record[4]
            .parse()
            .map_err(|_| bad(format!("cannot parse value `{}`", &record[4])))?;

        let entity = if quantity.on_links() {
            let l = net
                .link_index(id)
                .ok_or_else(|| bad(format!("unknown link id `{id}`")))?;
            let actual = net.link(l).kind;
            let ok = match kind {
                "link" => true,
                "pipe" => actual == LinkKind::Pipe,
                "pump" => actual == LinkKind::Pump,
                "valve" => actual == LinkKind::Valve,
                _ => false,
            };
            if !ok {
                return Err(bad(format!("entity kind `{kind}` does not match link `{id}`")));
            }
            l
        } else {
            let n = net
                .node_index(id)
                .ok_or_else(|| bad(format!("unknown node id `{id}`")))?;
            let actual = net.node(n).kind;
            let ok = match kind {
                "node" => true,
                "junction" => actual == NodeKind::Junction,
                "tank" => actual == NodeKind::Tank,
                "reservoir" => actual == NodeKind::Reservoir,
                _ => false,
            };
            if !ok {
                return Err(bad(format!("entity kind `{kind}` does not match node `{id}`")));
            }
            let allowed = match quantity {
                Quantity::Demand | Quantity::BoosterFlow => actual == NodeKind::Junction,
                Quantity::Volume | Quantity::BoosterVolume => actual == NodeKind::Tank,
                _ => false,
            };
            if !allowed {
                return Err(bad(format!(
                    "quantity `{}` does not apply to node `{id}`",
                    quantity.name()
                )));
            }
            n
        };
        if !seen.insert((step, quantity.on_links(), entity, quantity)) {
            return Err(bad(format!(
                "duplicate row for step {step}, `{id}`, {}",
                quantity.name()
            )));
        }
        let value = match quantity {
            Quantity::Flow | Quantity::Demand | Quantity::BoosterFlow => value * directives.flow_scale,
            Quantity::Volume | Quantity::BoosterVolume => value * directives.volume_scale,
            Quantity::Velocity => value,
        };
        max_step = Some(max_step.map_or(step, |m: usize| m.max(step)));
        rows.push(Row {
            step,
            entity,
            quantity,
            value,
        });
    }

    let n_steps = max_step.map_or(0, |m| m + 1);
    let mut builder = ProfileBuilder::new(net, n_steps, directives.dt_h);
    for r in rows {
        match r.quantity {
            Quantity::Flow => builder.flow(r.step, r.entity, r.value),
            Quantity::Velocity => builder.velocity(r.step, r.entity, r.value),
            Quantity::Demand => builder.demand(r.step, r.entity, r.value),
            Quantity::BoosterFlow => builder.booster_flow(r.step, r.entity, r.value),
            Quantity::Volume => builder.volume(r.step, r.entity, r.value),
            Quantity::BoosterVolume => builder.booster_volume(r.step, r.entity, r.value),
        };
    }
    builder.build(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::parse_network;

    fn line_net() -> WaterNetwork {
        parse_network(
            r#"{"nodes": [{"id": "R1", "kind": "reservoir"}, {"id": "J1", "kind": "junction"}],
                "links": [{"id": "P1", "kind": "pipe", "from": "R1", "to": "J1",
                           "length": 100.0, "radius": 0.5}]}"#,
        )
        .unwrap()
    }

    #[test]
    fn exact_balance_is_accepted() {
        let net = line_net();
        let csv = "step,entity_kind,entity_id,quantity,value\n\
                   0,pipe,P1,flow,2.0\n\
                   0,junction,J1,demand,2.0\n";
        let hyd = load_hydraulics(csv, &net).unwrap();
        assert_eq!(hyd.n_steps(), 1);
        assert_eq!(hyd.flow(0, 0), 2.0);
        let area = std::f64::consts::PI * 0.25;
        assert!((hyd.velocity(0, 0) - 2.0 / area).abs() < 1e-15);
    }

    #[test]
    fn imbalance_names_junction_and_step() {
        let net = line_net();
        let csv = "step,entity_kind,entity_id,quantity,value\n\
                   0,pipe,P1,flow,2.0\n\
                   0,junction,J1,demand,1.0\n";
        match load_hydraulics(csv, &net).unwrap_err() {
            Error::MassBalance {
                junction,
                step,
                residual,
                ..
            } => {
                assert_eq!((junction.as_str(), step), ("J1", 0));
                assert!((residual - 1.0).abs() < 1e-15);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn flow_reversal_keeps_sign() {
        let net = parse_network(
            r#"{"nodes": [{"id": "J1", "kind": "junction"}, {"id": "J2", "kind": "junction"}],
                "links": [{"id": "P1", "kind": "pipe", "from": "J1", "to": "J2",
                           "length": 10.0, "radius": 0.1}]}"#,
        )
        .unwrap();
        let csv = "step,entity_kind,entity_id,quantity,value\n\
                   0,pipe,P1,flow,0.1\n\
                   0,junction,J1,demand,-0.1\n\
                   0,junction,J2,demand,0.1\n\
                   1,pipe,P1,flow,-0.1\n\
                   1,junction,J1,demand,0.1\n\
                   1,junction,J2,demand,-0.1\n";
        let hyd = load_hydraulics(csv, &net).unwrap();
        assert_eq!(hyd.flow(0, 0), 0.1);
        assert_eq!(hyd.flow(1, 0), -0.1);
        assert!(hyd.velocity(1, 0) < 0.0);
    }

    #[test]
    fn unknown_ids_and_bad_velocity_are_rejected() {
        let net = line_net();
        let csv = "step,entity_kind,entity_id,quantity,value\n0,pipe,P9,flow,2.0\n";
        assert!(load_hydraulics(csv, &net).unwrap_err().to_string().contains("P9"));

        let csv = "step,entity_kind,entity_id,quantity,value\n\
                   0,pipe,P1,flow,2.0\n0,pipe,P1,velocity,9.0\n0,junction,J1,demand,2.0\n";
        assert!(load_hydraulics(csv, &net)
            .unwrap_err()
            .to_string()
            .contains("inconsistent"));
    }

    #[test]
    fn unit_directives_convert_to_si() {
        let net = line_net();
        let csv = "# dt_h = 3600\n# flow_unit = L/s\n\
                   step,entity_kind,entity_id,quantity,value\n\
                   0,link,P1,flow,2000\n0,node,J1,demand,2000\n";
        let hyd = load_hydraulics(csv, &net).unwrap();
        assert_eq!(hyd.dt_h(), Some(3600.0));
        assert!((hyd.flow(0, 0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn tank_needs_volume() {
        let net = parse_network(
            r#"{"nodes": [{"id": "R1", "kind": "reservoir"}, {"id": "T1", "kind": "tank"}],
                "links": [{"id": "P1", "kind": "pipe", "from": "R1", "to": "T1",
                           "length": 100.0, "radius": 0.5}]}"#,
        )
        .unwrap();
        let csv = "step,entity_kind,entity_id,quantity,value\n0,pipe,P1,flow,1.0\n";
        assert!(load_hydraulics(csv, &net).unwrap_err().to_string().contains("T1"));
        let csv = format!("{csv}0,tank,T1,volume,50\n");
        let hyd = load_hydraulics(&csv, &net).unwrap();
        assert_eq!(hyd.volume(0, 1), 50.0);
        let again = load_hydraulics(&hyd.to_csv(&net), &net).unwrap();
        assert_eq!(hyd, again);
    }
}
