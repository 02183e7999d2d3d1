use serde::{Deserialize, Serialize};

use super::{HydraulicProfile, LinkKind, WaterNetwork};
use crate::error::{Error, Result};

/// Upper bound on segments per pipe; beyond this the state vector is unusable.
const MAX_SEGMENTS_PER_PIPE: f64 = 1e6;

/// Courant numbers within this margin above one are rounding noise and are
/// snapped to one.
const COURANT_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Species {
    Chlorine,
    Reactant,
}

impl Species {
    pub const ALL: [Species; 2] = [Species::Chlorine, Species::Reactant];

    pub fn index(self) -> usize {
        match self {
            Species::Chlorine => 0,
            Species::Reactant => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Species::Chlorine => "chlorine",
            Species::Reactant => "reactant",
        }
    }
}

/// What a single state entry (per species) describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StateEntity {
    Node(usize),
    Segment { link: usize, segment: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipeSegments {
    pub link: usize,
    pub count: usize,
    /// Segment length Δx in metres.
    pub length: f64,
    /// Courant number per hydraulic step.
    pub courant: Vec<f64>,
    offset: usize,
}

/// Fixed spatial discretization of every pipe and the resulting state layout.
///
/// Each species occupies a contiguous block: node concentrations in network
/// order, then pipe segments in link order (segment 0 at the `from` end).
/// The chlorine block comes first.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    dt_wq: f64,
    n_nodes: usize,
    pipes: Vec<PipeSegments>,
    pipe_of_link: Vec<Option<usize>>,
    block: usize,
}

impl Segmentation {
    pub fn dt_wq(&self) -> f64 {
        self.dt_wq
    }

    /// Total state dimension (both species).
    pub fn n_x(&self) -> usize {
        2 * self.block
    }

    /// Entries per species.
    pub fn block_len(&self) -> usize {
        self.block
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn pipes(&self) -> &[PipeSegments] {
        &self.pipes
    }

    pub fn pipe(&self, link: usize) -> Option<&PipeSegments> {
        self.pipe_of_link
            .get(link)
            .copied()
            .flatten()
            .map(|p| &self.pipes[p])
    }

    pub fn total_segments(&self) -> usize {
        self.block - self.n_nodes
    }

    pub fn node_index(&self, node: usize, species: Species) -> usize {
        debug_assert!(node < self.n_nodes);
        species.index() * self.block + node
    }

    pub fn segment_index(&self, link: usize, segment: usize, species: Species) -> usize {
        let p = self.pipe(link).expect("link is not a segmented pipe");
        debug_assert!(segment < p.count);
        species.index() * self.block + self.n_nodes + p.offset + segment
    }

    pub fn index(&self, entity: StateEntity, species: Species) -> usize {
        match entity {
            StateEntity::Node(n) => self.node_index(n, species),
            StateEntity::Segment { link, segment } => self.segment_index(link, segment, species),
        }
    }

    /// Inverse of [`Segmentation::index`].
    pub fn entity(&self, index: usize) -> (StateEntity, Species) {
        assert!(index < self.n_x(), "state index {index} out of range");
        let species = if index < self.block {
            Species::Chlorine
        } else {
            Species::Reactant
        };
        let local = index % self.block;
        if local < self.n_nodes {
            return (StateEntity::Node(local), species);
        }
        let seg = local - self.n_nodes;
        let p = self
            .pipes
            .partition_point(|p| p.offset + p.count <= seg);
        let pipe = &self.pipes[p];
        (
            StateEntity::Segment {
                link: pipe.link,
                segment: seg - pipe.offset,
            },
            species,
        )
    }

    /// Human-readable entity label: node id, or `pipe#segment`.
    pub fn label(&self, net: &WaterNetwork, entity: StateEntity) -> String {
        match entity {
            StateEntity::Node(n) => net.node(n).id.clone(),
            StateEntity::Segment { link, segment } => format!("{}#{segment}", net.link(link).id),
        }
    }

    /// Volume of water represented by one segment of `link`, in m³.
    pub fn segment_volume(&self, net: &WaterNetwork, link: usize) -> f64 {
        let p = self.pipe(link).expect("link is not a segmented pipe");
        net.pipe_area(link).expect("pipe radius") * p.length
    }
}

/// Splits every pipe into `floor(L / (v_max · dt_wq))` segments (at least
/// one), with `v_max` the largest speed over all hydraulic steps, and records
/// the Courant number of each pipe in each step.
///
/// Fails if any Courant number exceeds one, which can only happen when the
/// one-segment minimum kicks in on a short, fast pipe.
pub fn segment_pipes(net: &WaterNetwork, hyd: &HydraulicProfile, dt_wq: f64) -> Result<Segmentation> {
    if !(dt_wq.is_finite() && dt_wq > 0.0) {
        return Err(Error::validation(format!("dt_wq must be > 0, got {dt_wq}")));
    }
    let mut pipes = Vec::new();
    let mut pipe_of_link = vec![None; net.link_count()];
    let mut offset = 0;
    for (l, link) in net.links().iter().enumerate() {
        if link.kind != LinkKind::Pipe {
            continue;
        }
        let length = link.length.expect("validated pipe length");
        let v_max = (0..hyd.n_steps())
            .map(|k| hyd.velocity(k, l).abs())
            .fold(0.0, f64::max);
        let count = if v_max > 0.0 {
            let raw = (length / (v_max * dt_wq)).floor();
            if raw > MAX_SEGMENTS_PER_PIPE {
                return Err(Error::validation(format!(
                    "pipe `{}` would need {raw:.0} segments; use a larger dt_wq",
                    link.id
                )));
            }
            (raw as usize).max(1)
        } else {
            1
        };
        let dx = length / count as f64;
        let mut courant = Vec::with_capacity(hyd.n_steps());
        for k in 0..hyd.n_steps() {
            let mut lambda = hyd.velocity(k, l).abs() * dt_wq / dx;
            if lambda > 1.0 {
                if lambda > 1.0 + COURANT_SLACK {
                    return Err(Error::Cfl {
                        pipe: link.id.clone(),
                        step: k,
                        courant: lambda,
                    });
                }
                lambda = 1.0;
            }
            courant.push(lambda);
        }
        pipe_of_link[l] = Some(pipes.len());
        pipes.push(PipeSegments {
            link: l,
            count,
            length: dx,
            courant,
            offset,
        });
        offset += count;
    }
    Ok(Segmentation {
        dt_wq,
        n_nodes: net.node_count(),
        pipes,
        pipe_of_link,
        block: net.node_count() + offset,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::parse_network;

    fn single_pipe(length: f64, area_velocities: &[f64]) -> (WaterNetwork, HydraulicProfile) {
        let radius = (1.0 / std::f64::consts::PI).sqrt();
        let net = parse_network(&format!(
            r#"{{"nodes": [{{"id": "R1", "kind": "reservoir"}}, {{"id": "J1", "kind": "junction"}}],
                "links": [{{"id": "P1", "kind": "pipe", "from": "R1", "to": "J1",
                           "length": {length}, "radius": {radius}}}]}}"#
        ))
        .unwrap();
        let area = net.pipe_area(0).unwrap();
        let mut b = HydraulicProfile::builder(&net, area_velocities.len(), None);
        for (k, v) in area_velocities.iter().enumerate() {
            b.flow(k, 0, v * area).velocity(k, 0, *v).demand(k, 1, v * area);
        }
        (net.clone(), b.build(&net).unwrap())
    }

    #[test]
    fn exact_division() {
        let (net, hyd) = single_pipe(100.0, &[1.0]);
        let seg = segment_pipes(&net, &hyd, 10.0).unwrap();
        let p = seg.pipe(0).unwrap();
        assert_eq!(p.count, 10);
        assert_eq!(p.length, 10.0);
        assert_eq!(p.courant, vec![1.0]);
        assert_eq!(seg.n_x(), 2 * (2 + 10));
    }

    #[test]
    fn courant_scales_with_velocity() {
        let (net, hyd) = single_pipe(100.0, &[1.0, 0.5]);
        let seg = segment_pipes(&net, &hyd, 10.0).unwrap();
        let p = seg.pipe(0).unwrap();
        assert_eq!(p.count, 10);
        assert_eq!(p.courant, vec![1.0, 0.5]);
    }

    #[test]
    fn short_pipe_violates_cfl() {
        let (net, hyd) = single_pipe(5.0, &[1.0]);
        match segment_pipes(&net, &hyd, 10.0).unwrap_err() {
            Error::Cfl { pipe, courant, .. } => {
                assert_eq!(pipe, "P1");
                assert!((courant - 2.0).abs() < 1e-12);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn stagnant_pipe_gets_one_segment() {
        let (net, hyd) = single_pipe(50.0, &[0.0]);
        let seg = segment_pipes(&net, &hyd, 10.0).unwrap();
        assert_eq!(seg.pipe(0).unwrap().count, 1);
        assert_eq!(seg.pipe(0).unwrap().courant, vec![0.0]);
    }

    #[test]
    fn index_map_is_a_bijection() {
        let (net, hyd) = single_pipe(100.0, &[0.7]);
        let seg = segment_pipes(&net, &hyd, 10.0).unwrap();
        for i in 0..seg.n_x() {
            let (e, s) = seg.entity(i);
            assert_eq!(seg.index(e, s), i);
        }
        assert_eq!(seg.label(&net, seg.entity(3).0), "P1#1");
    }
}
