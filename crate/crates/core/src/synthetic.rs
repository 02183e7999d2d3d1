//! Small generated networks with mass-balanced hydraulics, for tests,
//! benchmarks and demonstrations.
//!
//! Random networks are a spanning tree rooted at one reservoir plus extra
//! chords. Tree flows carry the demand downstream and every chord adds a
//! circulation around its cycle, so junction balance holds exactly. Pipe
//! lengths are derived from the flows so that each pipe gets a chosen
//! number of segments and never violates the CFL bound.

use rand::Rng;

use crate::dynamics::Scenario;
use crate::error::{Error, Result};
use crate::network::{
    HydraulicProfile, Link, LinkKind, Node, NodeKind, ReactionParams, Reactions, Species, WaterNetwork,
};

#[derive(Debug, Clone)]
pub struct SyntheticCase {
    pub net: WaterNetwork,
    pub hyd: HydraulicProfile,
    pub scenario: Scenario,
}

#[derive(Debug, Clone)]
pub struct RandomNetworkSpec {
    /// Non-reservoir nodes.
    pub nodes: usize,
    /// Extra links closing loops.
    pub loops: usize,
    /// Nodes turned into tanks.
    pub tanks: usize,
    /// Tree links turned into valves or pumps.
    pub valves: usize,
    pub hydraulic_steps: usize,
    pub steps_per_hydraulic: usize,
    /// Samples N_s of the scenario horizon.
    pub n_steps: usize,
    pub max_segments: usize,
    pub dt_wq: f64,
    pub reactions: ReactionParams,
    /// Let loop circulations change sign between hydraulic steps.
    pub reversals: bool,
}

impl Default for RandomNetworkSpec {
    fn default() -> Self {
        RandomNetworkSpec {
            nodes: 6,
            loops: 1,
            tanks: 0,
            valves: 0,
            hydraulic_steps: 2,
            steps_per_hydraulic: 5,
            n_steps: 10,
            max_segments: 3,
            dt_wq: 10.0,
            reactions: ReactionParams::default(),
            reversals: false,
        }
    }
}

/// Signed flows per link and step, oriented from → to.
struct FlowField {
    flows: Vec<Vec<f64>>,
    demands: Vec<Vec<f64>>,
    /// Net inflow of each tank per step.
    fill: Vec<Vec<f64>>,
}

struct Topology {
    parent: Vec<Option<usize>>,
    /// Link index of the tree edge to the parent.
    parent_link: Vec<Option<usize>>,
    ends: Vec<(usize, usize)>,
}

impl Topology {
    fn path_to_root(&self, mut n: usize) -> Vec<usize> {
        let mut path = vec![n];
        while let Some(p) = self.parent[n] {
            path.push(p);
            n = p;
        }
        path
    }

    /// Adds `amount` of flow travelling along the tree from `a` to `b`.
    fn push_along(&self, flows: &mut [f64], a: usize, b: usize, amount: f64) {
        let pa = self.path_to_root(a);
        let pb = self.path_to_root(b);
        let lca = *pa.iter().find(|n| pb.contains(n)).expect("tree is connected");
        for &n in pa.iter().take_while(|&&n| n != lca) {
            // Upward: child n → parent.
            self.add_directed(flows, self.parent_link[n].expect("non-root"), n, amount);
        }
        for &n in pb.iter().take_while(|&&n| n != lca) {
            let p = self.parent[n].expect("non-root");
            self.add_directed(flows, self.parent_link[n].expect("non-root"), p, amount);
        }
    }

    /// Adds flow leaving `tail` along link `l`.
    fn add_directed(&self, flows: &mut [f64], l: usize, tail: usize, amount: f64) {
        if self.ends[l].0 == tail {
            flows[l] += amount;
        } else {
            flows[l] -= amount;
        }
    }
}

/// Random connected network with balanced hydraulics and a scenario with
/// random strictly positive initial node concentrations.
pub fn random_network<R: Rng + ?Sized>(spec: &RandomNetworkSpec, rng: &mut R) -> Result<SyntheticCase> {
    if spec.nodes == 0 || spec.hydraulic_steps == 0 || spec.steps_per_hydraulic == 0 || spec.max_segments == 0 {
        return Err(Error::validation("synthetic network needs nodes, steps and segments"));
    }
    if spec.n_steps == 0 || spec.n_steps > spec.hydraulic_steps * spec.steps_per_hydraulic + 1 {
        return Err(Error::validation("horizon does not fit the hydraulic steps"));
    }
    let n = spec.nodes + 1;
    let mut kinds = vec![NodeKind::Junction; n];
    kinds[0] = NodeKind::Reservoir;
    let mut order: Vec<usize> = (1..n).collect();
    shuffle(&mut order, rng);
    for &t in order.iter().take(spec.tanks.min(spec.nodes)) {
        kinds[t] = NodeKind::Tank;
    }

    let mut parent = vec![None; n];
    let mut parent_link = vec![None; n];
    let mut ends = Vec::new();
    for (i, p) in parent.iter_mut().enumerate().skip(1) {
        let q = rng.random_range(0..i);
        *p = Some(q);
        parent_link[i] = Some(ends.len());
        ends.push(if rng.random_bool(0.5) { (q, i) } else { (i, q) });
    }
    let tree_links = ends.len();
    let mut chords = 0;
    let mut attempts = 0;
    while chords < spec.loops && attempts < 100 * (spec.loops + 1) {
        attempts += 1;
        let a = rng.random_range(1..n);
        let b = rng.random_range(1..n);
        if a == b || ends.iter().any(|&(x, y)| (x, y) == (a, b) || (x, y) == (b, a)) {
            continue;
        }
        ends.push((a, b));
        chords += 1;
    }
    let topo = Topology { parent, parent_link, ends };

    let mut link_kinds = vec![LinkKind::Pipe; topo.ends.len()];
    let mut tree: Vec<usize> = (0..tree_links).collect();
    shuffle(&mut tree, rng);
    for &l in tree.iter().take(spec.valves) {
        link_kinds[l] = if rng.random_bool(0.5) { LinkKind::Valve } else { LinkKind::Pump };
    }

    let field = random_flows(spec, &topo, &kinds, rng);
    let nodes: Vec<Node> = (0..n)
        .map(|i| Node {
            id: if i == 0 { "R0".into() } else { format!("N{i}") },
            kind: kinds[i],
            elevation: None,
        })
        .collect();

    let dt_wq = spec.dt_wq;
    let mut links = Vec::with_capacity(topo.ends.len());
    for (l, &(a, b)) in topo.ends.iter().enumerate() {
        let (length, radius) = if link_kinds[l] == LinkKind::Pipe {
            let radius: f64 = rng.random_range(0.05..0.3);
            let area = std::f64::consts::PI * radius * radius;
            let v_max = field.flows.iter().map(|f| f[l].abs()).fold(0.0, f64::max) / area;
            let segments = rng.random_range(1..=spec.max_segments) as f64;
            let length = if v_max > 0.0 {
                v_max * dt_wq * (segments + rng.random_range(0.0..0.9))
            } else {
                rng.random_range(10.0..100.0)
            };
            (Some(length), Some(radius))
        } else {
            (None, None)
        };
        links.push(Link {
            id: format!("L{l}"),
            kind: link_kinds[l],
            from: nodes[a].id.clone(),
            to: nodes[b].id.clone(),
            length,
            radius,
        });
    }
    let net = WaterNetwork::new(
        nodes,
        links,
        Reactions {
            global: spec.reactions,
            pipes: Default::default(),
        },
    )?;

    let dt_h = dt_wq * spec.steps_per_hydraulic as f64;
    let mut b = HydraulicProfile::builder(&net, spec.hydraulic_steps, Some(dt_h));
    let mut volumes: Vec<f64> = (0..n).map(|_| rng.random_range(50.0..150.0)).collect();
    for h in 0..spec.hydraulic_steps {
        for (l, q) in field.flows[h].iter().enumerate() {
            b.flow(h, l, *q);
        }
        for i in 0..n {
            match kinds[i] {
                NodeKind::Junction => {
                    b.demand(h, i, field.demands[h][i]);
                }
                NodeKind::Tank => {
                    b.volume(h, i, volumes[i]);
                    volumes[i] += field.fill[h][i] * dt_h;
                }
                NodeKind::Reservoir => {}
            }
        }
    }
    let hyd = b.build(&net)?;

    let mut scenario = Scenario::new("random", spec.n_steps as f64 * dt_wq, dt_wq, dt_h);
    for node in net.nodes() {
        let (lo, hi) = if node.kind == NodeKind::Reservoir { (1.0, 3.0) } else { (0.2, 2.0) };
        scenario = scenario
            .with_initial(&node.id, Species::Chlorine, rng.random_range(lo..hi))
            .with_initial(&node.id, Species::Reactant, rng.random_range(0.1..1.0));
    }
    Ok(SyntheticCase { net, hyd, scenario })
}

fn random_flows<R: Rng + ?Sized>(spec: &RandomNetworkSpec, topo: &Topology, kinds: &[NodeKind], rng: &mut R) -> FlowField {
    let n = kinds.len();
    let base: Vec<f64> = (0..n)
        .map(|i| match kinds[i] {
            NodeKind::Reservoir => 0.0,
            _ => rng.random_range(0.002..0.01),
        })
        .collect();
    let circulation: Vec<f64> = (0..topo.ends.len()).map(|_| rng.random_range(0.001..0.006)).collect();
    let mut flows = Vec::new();
    let mut demands = Vec::new();
    let mut fill = Vec::new();
    for _ in 0..spec.hydraulic_steps {
        let mut q = vec![0.0; topo.ends.len()];
        let mut d = vec![0.0; n];
        let mut f = vec![0.0; n];
        for i in 1..n {
            let consume = base[i] * rng.random_range(0.5..1.5);
            match kinds[i] {
                NodeKind::Tank => {
                    // Tanks fill or drain slowly.
                    f[i] = consume * rng.random_range(-0.3..0.5);
                    topo.push_along(&mut q, 0, i, f[i]);
                }
                _ => {
                    d[i] = consume;
                    topo.push_along(&mut q, 0, i, consume);
                }
            }
        }
        for (l, &(a, b)) in topo.ends.iter().enumerate() {
            if topo.parent_link.contains(&Some(l)) {
                continue;
            }
            let sign = if spec.reversals && rng.random_bool(0.5) { -1.0 } else { 1.0 };
            let c = sign * circulation[l];
            // Around the cycle: chord a → b, then back along the tree b → a.
            q[l] += c;
            topo.push_along(&mut q, b, a, c);
        }
        flows.push(q);
        demands.push(d);
        fill.push(f);
    }
    FlowField { flows, demands, fill }
}

fn shuffle<T, R: Rng + ?Sized>(v: &mut [T], rng: &mut R) {
    use rand::seq::SliceRandom;
    v.shuffle(rng);
}

fn pipe(id: &str, from: &str, to: &str, length: f64, radius: f64) -> Link {
    Link {
        id: id.into(),
        kind: LinkKind::Pipe,
        from: from.into(),
        to: to.into(),
        length: Some(length),
        radius: Some(radius),
    }
}

fn node(id: &str, kind: NodeKind) -> Node {
    Node {
        id: id.into(),
        kind,
        elevation: None,
    }
}

/// Reservoir → `pipes` pipes in series → junctions, with all demand at the
/// far end. Each pipe has `segments` segments and Courant number one, so
/// the model is exact plug flow.
pub fn line_network(pipes: usize, segments: usize, n_steps: usize, reactions: ReactionParams) -> Result<SyntheticCase> {
    let radius = 0.1;
    let dt_wq = 1.0;
    let velocity = 0.5;
    let dx = velocity * dt_wq;
    let mut nodes = vec![node("R", NodeKind::Reservoir)];
    let mut links = Vec::new();
    for p in 1..=pipes {
        nodes.push(node(&format!("J{p}"), NodeKind::Junction));
        let from = if p == 1 { "R".to_string() } else { format!("J{}", p - 1) };
        links.push(pipe(&format!("P{p}"), &from, &format!("J{p}"), dx * segments as f64, radius));
    }
    let net = WaterNetwork::new(nodes, links, Reactions { global: reactions, pipes: Default::default() })?;
    let q = velocity * net.pipe_area(0).expect("pipe");
    let mut b = HydraulicProfile::builder(&net, 1, Some(n_steps as f64 * dt_wq));
    for l in 0..pipes {
        b.flow(0, l, q);
    }
    b.demand(0, pipes, q);
    let hyd = b.build(&net)?;
    let scenario = Scenario::new("line", n_steps as f64 * dt_wq, dt_wq, n_steps as f64 * dt_wq);
    Ok(SyntheticCase { net, hyd, scenario })
}

/// Closed loop of `nodes` junctions (one of them optionally a tank, one
/// link optionally a valve) carrying a constant circulation and no demand.
/// Every pipe gets a different length and radius.
pub fn ring_network(nodes: usize, with_tank: bool, with_valve: bool, n_steps: usize) -> Result<SyntheticCase> {
    if nodes < 3 {
        return Err(Error::validation("a ring needs at least three nodes"));
    }
    let dt_wq = 1.0;
    let q = 0.02;
    let ids: Vec<String> = (0..nodes).map(|i| format!("J{i}")).collect();
    let node_list = (0..nodes)
        .map(|i| node(&ids[i], if with_tank && i == nodes / 2 { NodeKind::Tank } else { NodeKind::Junction }))
        .collect();
    let mut links = Vec::new();
    for i in 0..nodes {
        let (from, to) = (&ids[i], &ids[(i + 1) % nodes]);
        if with_valve && i == 0 {
            links.push(Link {
                id: format!("V{i}"),
                kind: LinkKind::Valve,
                from: from.clone(),
                to: to.clone(),
                length: None,
                radius: None,
            });
            continue;
        }
        let radius = 0.08 + 0.01 * i as f64;
        let v = q / (std::f64::consts::PI * radius * radius);
        let segments = 2 + i % 4;
        // A fractional extra keeps the Courant number below one.
        links.push(pipe(&format!("P{i}"), from, to, v * dt_wq * (segments as f64 + 0.37), radius));
    }
    let net = WaterNetwork::new(node_list, links, Reactions::default())?;
    let mut b = HydraulicProfile::builder(&net, 1, Some(n_steps as f64 * dt_wq));
    for l in 0..nodes {
        b.flow(0, l, q);
    }
    if with_tank {
        b.volume(0, nodes / 2, 3.0);
    }
    let hyd = b.build(&net)?;
    let scenario = Scenario::new("ring", n_steps as f64 * dt_wq, dt_wq, n_steps as f64 * dt_wq);
    Ok(SyntheticCase { net, hyd, scenario })
}

/// Ten nodes: a reservoir feeding two branches of four junctions that are
/// joined at their far ends, with two hand-balanced demand patterns. In the
/// first pattern the east branch carries most of the demand; in the second
/// the west branch does and the cross link reverses.
pub fn two_pattern_network(n_steps: usize) -> Result<(WaterNetwork, [HydraulicProfile; 2], Scenario)> {
    let dt_wq = 5.0;
    let radius = 0.1;
    let area = std::f64::consts::PI * radius * radius;
    let mut nodes = vec![node("R", NodeKind::Reservoir), node("S", NodeKind::Junction)];
    for i in 1..=4 {
        nodes.push(node(&format!("E{i}"), NodeKind::Junction));
    }
    for i in 1..=4 {
        nodes.push(node(&format!("W{i}"), NodeKind::Junction));
    }
    // Demands per node (same index as `nodes`) for each pattern, m³/s.
    let patterns: [[f64; 10]; 2] = [
        [0.0, 0.001, 0.001, 0.001, 0.002, 0.012, 0.001, 0.001, 0.001, 0.001],
        [0.0, 0.001, 0.001, 0.001, 0.001, 0.001, 0.001, 0.001, 0.002, 0.012],
    ];
    // Links: R-S, S-E1..E4 chain, S-W1..W4 chain, cross E4-W4.
    let mut spec: Vec<(&str, usize, usize)> = vec![("P0", 0, 1), ("PE1", 1, 2)];
    spec.extend([("PE2", 2, 3), ("PE3", 3, 4), ("PE4", 4, 5), ("PW1", 1, 6)]);
    spec.extend([("PW2", 6, 7), ("PW3", 7, 8), ("PW4", 8, 9), ("PX", 5, 9)]);

    // Flows: the cross link carries `x`; each branch carries the demand of
    // its own nodes plus (or minus) x.
    let flows_for = |d: &[f64; 10], x: f64| -> Vec<f64> {
        let east = |from: usize| (from..=5).map(|i| d[i]).sum::<f64>();
        let west = |from: usize| (from..=9).map(|i| d[i]).sum::<f64>();
        let total: f64 = d.iter().sum();
        vec![
            total,
            east(2) + x,
            east(3) + x,
            east(4) + x,
            east(5) + x,
            west(6) - x,
            west(7) - x,
            west(8) - x,
            west(9) - x,
            x,
        ]
    };
    let flows = [flows_for(&patterns[0], -0.004), flows_for(&patterns[1], 0.004)];
    let lengths: Vec<f64> = (0..spec.len())
        .map(|l| {
            let v_max = flows.iter().map(|f| f[l].abs()).fold(0.0, f64::max) / area;
            v_max * dt_wq * (2.0 + 0.5)
        })
        .collect();
    let links = spec
        .iter()
        .zip(&lengths)
        .map(|(&(id, a, b), &len)| pipe(id, &nodes[a].id, &nodes[b].id, len, radius))
        .collect();
    let net = WaterNetwork::new(
        nodes,
        links,
        Reactions {
            global: ReactionParams {
                alpha_b: 1e-4,
                alpha_r: 5e-4,
                ..Default::default()
            },
            pipes: Default::default(),
        },
    )?;
    let dt_h = n_steps as f64 * dt_wq;
    let build = |p: usize| -> Result<HydraulicProfile> {
        let mut b = HydraulicProfile::builder(&net, 1, Some(dt_h));
        for (l, q) in flows[p].iter().enumerate() {
            b.flow(0, l, *q);
        }
        for (i, d) in patterns[p].iter().enumerate() {
            b.demand(0, i, *d);
        }
        b.build(&net)
    };
    let profiles = [build(0)?, build(1)?];
    let mut scenario = Scenario::new("pattern", dt_h, dt_wq, dt_h);
    for (i, n) in net.nodes().iter().enumerate() {
        let c = if i == 0 { 2.0 } else { 1.0 + 0.05 * i as f64 };
        scenario = scenario
            .with_initial(&n.id, Species::Chlorine, c)
            .with_initial(&n.id, Species::Reactant, 0.3);
    }
    Ok((net, profiles, scenario))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::WqModel;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_networks_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for seed in 0..20 {
            let spec = RandomNetworkSpec {
                nodes: 3 + seed % 6,
                loops: seed % 3,
                tanks: seed % 2,
                valves: seed % 2,
                reversals: seed % 2 == 0,
                ..Default::default()
            };
            let case = random_network(&spec, &mut rng).unwrap();
            let m = WqModel::new(&case.net, &case.hyd, &case.scenario).unwrap();
            let traj = m.simulate().unwrap();
            assert_eq!(traj.len(), spec.n_steps);
            for p in m.segmentation().pipes() {
                assert!(p.count <= spec.max_segments);
            }
        }
    }

    #[test]
    fn fixed_cases_build() {
        let line = line_network(2, 3, 10, ReactionParams::default()).unwrap();
        let m = WqModel::new(&line.net, &line.hyd, &line.scenario).unwrap();
        assert_eq!(m.segmentation().total_segments(), 6);
        assert!(m.segmentation().pipes().iter().all(|p| (p.courant[0] - 1.0).abs() < 1e-12));

        let ring = ring_network(5, true, true, 20).unwrap();
        let m = WqModel::new(&ring.net, &ring.hyd, &ring.scenario).unwrap();
        assert!(m.segmentation().pipes().iter().all(|p| p.courant[0] < 1.0));

        let (net, hyds, scen) = two_pattern_network(40).unwrap();
        assert_eq!(net.node_count(), 10);
        for h in &hyds {
            WqModel::new(&net, h, &scen).unwrap();
        }
    }
}
