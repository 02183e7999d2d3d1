//! Topology import from EPANET-style INP documents.
//!
//! Only the sections that describe topology and pipe geometry are read:
//! `[JUNCTIONS]`, `[RESERVOIRS]`, `[TANKS]`, `[PIPES]`, `[PUMPS]`, `[VALVES]`,
//! plus the `Units` entry of `[OPTIONS]`. Everything else is skipped with a
//! warning. Reaction coefficients are left at zero.

use std::collections::BTreeSet;

use super::{Link, LinkKind, Node, NodeKind, Reactions, WaterNetwork};
use crate::error::{Error, Result};

const FOOT: f64 = 0.3048;
const INCH: f64 = 0.0254;

/// Conversion factors from INP columns to SI metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InpUnits {
    pub length_to_m: f64,
    pub diameter_to_m: f64,
}

impl InpUnits {
    /// US customary flow units: lengths in feet, diameters in inches.
    pub fn us() -> Self {
        InpUnits {
            length_to_m: FOOT,
            diameter_to_m: INCH,
        }
    }

    /// SI flow units: lengths in metres, diameters in millimetres.
    pub fn si() -> Self {
        InpUnits {
            length_to_m: 1.0,
            diameter_to_m: 1e-3,
        }
    }

    /// Lengths and diameters both in metres.
    pub fn meters() -> Self {
        InpUnits {
            length_to_m: 1.0,
            diameter_to_m: 1.0,
        }
    }

    fn from_flow_units(units: &str) -> Option<Self> {
        match units.to_ascii_uppercase().as_str() {
            "CFS" | "GPM" | "MGD" | "IMGD" | "AFD" => Some(Self::us()),
            "LPS" | "LPM" | "MLD" | "CMH" | "CMD" | "CMS" => Some(Self::si()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Junctions,
    Reservoirs,
    Tanks,
    Pipes,
    Pumps,
    Valves,
    Options,
    Ignored,
}

impl Section {
    fn parse(name: &str) -> Section {
        match name.to_ascii_uppercase().as_str() {
            "JUNCTIONS" => Section::Junctions,
            "RESERVOIRS" => Section::Reservoirs,
            "TANKS" => Section::Tanks,
            "PIPES" => Section::Pipes,
            "PUMPS" => Section::Pumps,
            "VALVES" => Section::Valves,
            "OPTIONS" => Section::Options,
            _ => Section::Ignored,
        }
    }
}

/// Imports topology, using the `[OPTIONS]` flow units to pick length and
/// diameter units (EPANET defaults to GPM when none are given).
pub fn parse_inp_topology(text: &str) -> Result<WaterNetwork> {
    parse_inp(text, None)
}

/// Imports topology with explicit unit conversions, ignoring `[OPTIONS]`.
pub fn parse_inp_topology_with(text: &str, units: InpUnits) -> Result<WaterNetwork> {
    parse_inp(text, Some(units))
}

struct RawLink {
    line: usize,
    id: String,
    kind: LinkKind,
    from: String,
    to: String,
    length: Option<f64>,
    diameter: Option<f64>,
}

fn parse_inp(text: &str, forced: Option<InpUnits>) -> Result<WaterNetwork> {
    let mut section = None;
    let mut seen = BTreeSet::new();
    let mut ignored = BTreeSet::new();
    let mut nodes = Vec::new();
    let mut raw_links = Vec::new();
    let mut option_units = None;

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split(';').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.split(']').next().unwrap_or("").trim();
            let s = Section::parse(name);
            if s == Section::Ignored {
                let upper = name.to_ascii_uppercase();
                if !matches!(upper.as_str(), "TITLE" | "END") && ignored.insert(upper.clone()) {
                    log::warn!("INP section [{upper}] is not supported and was skipped");
                }
            } else {
                seen.insert(name.to_ascii_uppercase());
            }
            section = Some(s);
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        let need = |n: usize| -> Result<()> {
            if cols.len() < n {
                Err(Error::Syntax {
                    line: line_no,
                    message: format!("expected at least {n} columns, found {}", cols.len()),
                })
            } else {
                Ok(())
            }
        };
        let number = |col: usize, what: &str| -> Result<f64> {
            cols[col].parse::<f64>().map_err(|_| Error::Syntax {
                line: line_no,
                message: format!("cannot parse {what} `{}` as a number", cols[col]),
            })
        };
        match section {
            None | Some(Section::Ignored) => {}
            Some(Section::Options) => {
                if cols[0].eq_ignore_ascii_case("units") && cols.len() >= 2 {
                    option_units = Some(InpUnits::from_flow_units(cols[1]).ok_or_else(|| {
                        Error::Syntax {
                            line: line_no,
                            message: format!("unknown flow units `{}`", cols[1]),
                        }
                    })?);
                }
            }
            Some(Section::Junctions) => {
                need(2)?;
                let elevation = number(1, "elevation")?;
                nodes.push(Node {
                    id: cols[0].into(),
                    kind: NodeKind::Junction,
                    elevation: Some(elevation),
                });
            }
            Some(Section::Reservoirs) => {
                need(2)?;
                number(1, "head")?;
                nodes.push(Node {
                    id: cols[0].into(),
                    kind: NodeKind::Reservoir,
                    elevation: None,
                });
            }
            Some(Section::Tanks) => {
                need(2)?;
                let elevation = number(1, "elevation")?;
                nodes.push(Node {
                    id: cols[0].into(),
                    kind: NodeKind::Tank,
                    elevation: Some(elevation),
                });
            }
            Some(Section::Pipes) => {
                need(5)?;
                raw_links.push(RawLink {
                    line: line_no,
                    id: cols[0].into(),
                    kind: LinkKind::Pipe,
                    from: cols[1].into(),
                    to: cols[2].into(),
                    length: Some(number(3, "length")?),
                    diameter: Some(number(4, "diameter")?),
                });
            }
            Some(Section::Pumps) | Some(Section::Valves) => {
                need(3)?;
                let kind = if section == Some(Section::Pumps) {
                    LinkKind::Pump
                } else {
                    LinkKind::Valve
                };
                raw_links.push(RawLink {
                    line: line_no,
                    id: cols[0].into(),
                    kind,
                    from: cols[1].into(),
                    to: cols[2].into(),
                    length: None,
                    diameter: None,
                });
            }
        }
    }

    for required in ["JUNCTIONS", "PIPES"] {
        if !seen.contains(required) {
            return Err(Error::validation(format!("[{required}] section required")));
        }
    }

    let units = forced.or(option_units).unwrap_or_else(InpUnits::us);
    let elevation_to_m = units.length_to_m;
    let nodes = nodes
        .into_iter()
        .map(|mut n: Node| {
            n.elevation = n.elevation.map(|e| e * elevation_to_m);
            n
        })
        .collect();
    let links = raw_links
        .into_iter()
        .map(|l| {
            if let Some(d) = l.diameter {
                if d <= 0.0 {
                    return Err(Error::Syntax {
                        line: l.line,
                        message: format!("pipe `{}` has non-positive diameter {d}", l.id),
                    });
                }
            }
            Ok(Link {
                id: l.id,
                kind: l.kind,
                from: l.from,
                to: l.to,
                length: l.length.map(|v| v * units.length_to_m),
                radius: l.diameter.map(|d| d * units.diameter_to_m / 2.0),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    WaterNetwork::new(nodes, links, Reactions::default())
}
