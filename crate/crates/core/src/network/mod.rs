//! Network data model, input parsing and pipe segmentation.
//!
//! A [`WaterNetwork`] is an immutable, validated graph of junctions, tanks and
//! reservoirs joined by pipes, pumps and valves. Hydraulic data is never
//! computed here: flows, demands and tank volumes are read from a
//! [`HydraulicProfile`] and the state dimension is fixed by [`segment_pipes`].

mod hydraulics;
mod inp;
mod json;
mod segmentation;

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use hydraulics::{load_hydraulics, HydraulicProfile, ProfileBuilder, Quantity, MASS_BALANCE_TOLERANCE};
pub use inp::{parse_inp_topology, parse_inp_topology_with, InpUnits};
pub use json::parse_network;
pub use segmentation::{segment_pipes, PipeSegments, Segmentation, Species, StateEntity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Junction,
    Tank,
    Reservoir,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkKind {
    Pipe,
    Pump,
    Valve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
    /// Metres. Informational only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elevation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Link {
    pub id: String,
    pub kind: LinkKind,
    pub from: String,
    pub to: String,
    /// Pipe length in metres; required for pipes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    /// Pipe radius in metres; required for pipes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

/// Reaction coefficients in SI units.
///
/// `alpha_b` is the bulk decay rate (1/s), `alpha_w` the wall reaction rate
/// (m/s), `alpha_f` the bulk-to-wall mass-transfer coefficient (m/s) and
/// `alpha_r` the mutual chlorine/reactant reaction rate (L/(mg·s)).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ReactionParams {
    #[serde(default)]
    pub alpha_b: f64,
    #[serde(default)]
    pub alpha_w: f64,
    #[serde(default)]
    pub alpha_f: f64,
    #[serde(default)]
    pub alpha_r: f64,
}

impl ReactionParams {
    fn validate(&self, what: &str) -> Result<()> {
        for (name, v) in [
            ("alpha_b", self.alpha_b),
            ("alpha_w", self.alpha_w),
            ("alpha_f", self.alpha_f),
            ("alpha_r", self.alpha_r),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::validation(format!(
                    "{what}: reaction coefficient {name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Partial per-pipe override of the network-wide coefficients.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactionOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_f: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_r: Option<f64>,
}

impl ReactionOverride {
    pub fn apply(&self, base: ReactionParams) -> ReactionParams {
        ReactionParams {
            alpha_b: self.alpha_b.unwrap_or(base.alpha_b),
            alpha_w: self.alpha_w.unwrap_or(base.alpha_w),
            alpha_f: self.alpha_f.unwrap_or(base.alpha_f),
            alpha_r: self.alpha_r.unwrap_or(base.alpha_r),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Reactions {
    #[serde(flatten)]
    pub global: ReactionParams,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub pipes: BTreeMap<String, ReactionOverride>,
}

/// Serialized form of a network; also the JSON schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct NetworkDocument {
    pub nodes: Vec<Node>,
    pub links: Vec<Link>,
    #[serde(default)]
    pub reactions: Reactions,
}

#[derive(Debug, Clone)]
pub struct WaterNetwork {
    nodes: Vec<Node>,
    links: Vec<Link>,
    reactions: Reactions,
    node_lookup: HashMap<String, usize>,
    link_lookup: HashMap<String, usize>,
    endpoints: Vec<(usize, usize)>,
}

impl PartialEq for WaterNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.links == other.links && self.reactions == other.reactions
    }
}

impl WaterNetwork {
    /// Builds and validates a network.
    pub fn new(nodes: Vec<Node>, links: Vec<Link>, reactions: Reactions) -> Result<Self> {
        let mut node_lookup = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if n.id.is_empty() {
                return Err(Error::validation(format!("node #{i} has an empty id")));
            }
            if node_lookup.insert(n.id.clone(), i).is_some() {
                return Err(Error::validation(format!("duplicate node id `{}`", n.id)));
            }
        }
        if nodes.is_empty() {
            return Err(Error::validation("network has no nodes"));
        }

        let mut link_lookup = HashMap::with_capacity(links.len());
        let mut endpoints = Vec::with_capacity(links.len());
        for (i, l) in links.iter().enumerate() {
            if l.id.is_empty() {
                return Err(Error::validation(format!("link #{i} has an empty id")));
            }
            if link_lookup.insert(l.id.clone(), i).is_some() {
                return Err(Error::validation(format!("duplicate link id `{}`", l.id)));
            }
            let resolve = |end: &str| {
                node_lookup.get(end).copied().ok_or_else(|| {
                    Error::validation(format!("link `{}` references unknown node `{end}`", l.id))
                })
            };
            let from = resolve(&l.from)?;
            let to = resolve(&l.to)?;
            if from == to {
                return Err(Error::validation(format!(
                    "link `{}` connects node `{}` to itself",
                    l.id, l.from
                )));
            }
            if l.kind == LinkKind::Pipe {
                for (name, v) in [("length", l.length), ("radius", l.radius)] {
                    match v {
                        Some(v) if v.is_finite() && v > 0.0 => {}
                        Some(v) => {
                            return Err(Error::validation(format!(
                                "pipe `{}`: {name} must be > 0, got {v}",
                                l.id
                            )))
                        }
                        None => {
                            return Err(Error::validation(format!(
                                "pipe `{}` is missing {name}",
                                l.id
                            )))
                        }
                    }
                }
            }
            endpoints.push((from, to));
        }

        reactions.global.validate("network")?;
        for (pipe, ov) in &reactions.pipes {
            match link_lookup.get(pipe) {
                Some(&l) if links[l].kind == LinkKind::Pipe => {}
                _ => {
                    return Err(Error::validation(format!(
                        "reaction override references unknown pipe `{pipe}`"
                    )))
                }
            }
            ov.apply(reactions.global).validate(&format!("pipe `{pipe}`"))?;
        }

        let net = WaterNetwork {
            nodes,
            links,
            reactions,
            node_lookup,
            link_lookup,
            endpoints,
        };
        net.check_connected()?;
        Ok(net)
    }

    fn check_connected(&self) -> Result<()> {
        let n = self.nodes.len();
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in &self.endpoints {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(i) => Err(Error::validation(format!(
                "network is not connected: node `{}` is unreachable from `{}`",
                self.nodes[i].id, self.nodes[0].id
            ))),
            None => Ok(()),
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn node(&self, i: usize) -> &Node {
        &self.nodes[i]
    }

    pub fn link(&self, i: usize) -> &Link {
        &self.links[i]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.node_lookup.get(id).copied()
    }

    pub fn link_index(&self, id: &str) -> Option<usize> {
        self.link_lookup.get(id).copied()
    }

    /// `(from, to)` node indices of link `l`.
    pub fn endpoints(&self, l: usize) -> (usize, usize) {
        self.endpoints[l]
    }

    pub fn count_nodes(&self, kind: NodeKind) -> usize {
        self.nodes.iter().filter(|n| n.kind == kind).count()
    }

    pub fn count_links(&self, kind: LinkKind) -> usize {
        self.links.iter().filter(|l| l.kind == kind).count()
    }

    pub fn reactions(&self) -> &Reactions {
        &self.reactions
    }

    /// Effective coefficients for pipe `l` (global values with any override applied).
    pub fn pipe_reactions(&self, l: usize) -> ReactionParams {
        match self.reactions.pipes.get(&self.links[l].id) {
            Some(ov) => ov.apply(self.reactions.global),
            None => self.reactions.global,
        }
    }

    /// Cross-sectional area of pipe `l` in m².
    pub fn pipe_area(&self, l: usize) -> Option<f64> {
        self.links[l].radius.map(|r| std::f64::consts::PI * r * r)
    }

    /// Returns a copy with different reaction coefficients, revalidated.
    pub fn with_reactions(&self, reactions: Reactions) -> Result<Self> {
        WaterNetwork::new(self.nodes.clone(), self.links.clone(), reactions)
    }

    pub fn to_json(&self) -> String {
        let doc = NetworkDocument {
            nodes: self.nodes.clone(),
            links: self.links.clone(),
            reactions: self.reactions.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("network serialization cannot fail")
    }
}
