//! Readers and writers for trajectories, atom factors and summaries.
//!
//! Every writer has a matching reader so outputs can be fed back in.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{SegmentedState, Trajectory, WqModel};
use crate::error::{Error, Result};
use crate::network::{Segmentation, Species, WaterNetwork};
use crate::observability::GramianAtoms;

const TRAJECTORY_HEADER: &str = "k,entity,species,value";
const BINARY_MAGIC: &[u8; 8] = b"AQOBSTR1";

fn entity_labels(net: &WaterNetwork, seg: &Segmentation) -> Vec<String> {
    (0..seg.block_len()).map(|i| seg.label(net, seg.entity(i).0)).collect()
}

/// Long-format CSV: one row per step, state entry and species.
pub fn trajectory_to_csv(model: &WqModel, traj: &Trajectory) -> String {
    let seg = model.segmentation();
    let labels = entity_labels(model.network(), seg);
    let block = seg.block_len();
    let mut out = String::with_capacity(traj.len() * seg.n_x() * 24);
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for state in &traj.states {
        for species in Species::ALL {
            for (i, label) in labels.iter().enumerate() {
                let v = state.x[species.index() * block + i];
                out.push_str(&format!("{},{label},{},{v}\n", state.k, species.name()));
            }
        }
    }
    out
}

/// Parses [`trajectory_to_csv`] output back into states for `model`'s layout.
pub fn read_trajectory_csv(text: &str, model: &WqModel) -> Result<Vec<SegmentedState>> {
    let seg = model.segmentation();
    let labels = entity_labels(model.network(), seg);
    let lookup: HashMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = reader.headers().map_err(csv_error)?.iter().collect::<Vec<_>>().join(",");
    if header != TRAJECTORY_HEADER {
        return Err(Error::Syntax {
            line: 1,
            message: format!("expected header `{TRAJECTORY_HEADER}`, found `{header}`"),
        });
    }
    let mut states: BTreeMap<usize, (DVector<f64>, usize)> = BTreeMap::new();
    for (row, rec) in reader.records().enumerate() {
        let line = row + 2;
        let rec = rec.map_err(csv_error)?;
        let bad = |m: String| Error::Syntax { line, message: m };
        if rec.len() != 4 {
            return Err(bad(format!("expected 4 fields, found {}", rec.len())));
        }
        let k: usize = rec[0].parse().map_err(|_| bad(format!("bad step `{}`", &rec[0])))?;
        let i = *lookup
            .get(&rec[1])
            .ok_or_else(|| bad(format!("unknown entity `{}`", &rec[1])))?;
        let species = match &rec[2] {
            "chlorine" => Species::Chlorine,
            "reactant" => Species::Reactant,
            other => return Err(bad(format!("unknown species `{other}`"))),
        };
        let v: f64 = rec[3].parse().map_err(|_| bad(format!("bad value `{}`", &rec[3])))?;
        let entry = states.entry(k).or_insert_with(|| (DVector::zeros(seg.n_x()), 0));
        entry.0[species.index() * seg.block_len() + i] = v;
        entry.1 += 1;
    }
    states
        .into_iter()
        .map(|(k, (x, count))| {
            if count != seg.n_x() {
                return Err(Error::validation(format!(
                    "step {k} has {count} entries, expected {}",
                    seg.n_x()
                )));
            }
            Ok(SegmentedState { k, x })
        })
        .collect()
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Syntax {
        line,
        message: e.to_string(),
    }
}

/// Columnar little-endian dump: magic, n_x, N_s, first step index, then
/// N_s values for each state entry in turn.
pub fn write_trajectory_binary<W: Write>(traj: &Trajectory, mut w: W) -> Result<()> {
    let n_s = traj.len();
    let n_x = traj.states.first().map_or(0, |s| s.x.len());
    let k0 = traj.states.first().map_or(0, |s| s.k);
    w.write_all(BINARY_MAGIC)?;
    for v in [n_x as u64, n_s as u64, k0 as u64] {
        w.write_all(&v.to_le_bytes())?;
    }
    for i in 0..n_x {
        for s in &traj.states {
            w.write_all(&s.x[i].to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectory_binary<R: Read>(mut r: R) -> Result<Vec<SegmentedState>> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != BINARY_MAGIC {
        return Err(Error::validation("not a trajectory dump (bad magic)"));
    }
    let mut word = [0u8; 8];
    let mut next_u64 = |r: &mut R| -> Result<u64> {
        r.read_exact(&mut word)?;
        Ok(u64::from_le_bytes(word))
    };
    let n_x = next_u64(&mut r)? as usize;
    let n_s = next_u64(&mut r)? as usize;
    let k0 = next_u64(&mut r)? as usize;
    let mut states: Vec<SegmentedState> = (0..n_s)
        .map(|i| SegmentedState {
            k: k0 + i,
            x: DVector::zeros(n_x),
        })
        .collect();
    let mut buf = [0u8; 8];
    for i in 0..n_x {
        for s in states.iter_mut() {
            r.read_exact(&mut buf)?;
            s.x[i] = f64::from_le_bytes(buf);
        }
    }
    Ok(states)
}

/// Factor rows keyed by scenario, sensor and trajectory step:
/// `scenario,sensor,step,row,v0,...,v{n_x-1}`, where `row` is the measured
/// species within the sensor.
pub fn atoms_to_csv(atoms: &[GramianAtoms]) -> String {
    let n_x = atoms.iter().map(GramianAtoms::n_x).max().unwrap_or(0);
    let mut out = String::from("scenario,sensor,step,row");
    for c in 0..n_x {
        out.push_str(&format!(",v{c}"));
    }
    out.push('\n');
    for a in atoms {
        let m = a.rows_per_sensor();
        for (j, label) in a.labels().iter().enumerate() {
            let f = a.factor(j);
            for r in 0..f.nrows() {
                out.push_str(&format!("{},{label},{},{}", a.scenario(), r / m, r % m));
                for c in 0..n_x {
                    if c < f.ncols() {
                        out.push_str(&format!(",{}", f[(r, c)]));
                    } else {
                        out.push(',');
                    }
                }
                out.push('\n');
            }
        }
    }
    out
}

/// Rebuilds atoms from [`atoms_to_csv`] output, in order of first
/// appearance of each scenario.
pub fn read_atoms_csv(text: &str, dense_cap: usize) -> Result<Vec<GramianAtoms>> {
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let headers = reader.headers().map_err(csv_error)?.clone();
    if headers.len() < 4 || &headers[0] != "scenario" || &headers[1] != "sensor" {
        return Err(Error::Syntax {
            line: 1,
            message: "expected header `scenario,sensor,step,row,v0,...`".into(),
        });
    }
    type Rows = Vec<(usize, usize, Vec<f64>)>;
    let mut order: Vec<String> = Vec::new();
    let mut data: HashMap<String, (Vec<String>, HashMap<String, Rows>)> = HashMap::new();
    for (idx, rec) in reader.records().enumerate() {
        let line = idx + 2;
        let rec = rec.map_err(csv_error)?;
        let bad = |m: String| Error::Syntax { line, message: m };
        let step: usize = rec[2].parse().map_err(|_| bad(format!("bad step `{}`", &rec[2])))?;
        let row: usize = rec[3].parse().map_err(|_| bad(format!("bad row `{}`", &rec[3])))?;
        let vals = rec
            .iter()
            .skip(4)
            .filter(|v| !v.is_empty())
            .map(|v| v.parse::<f64>().map_err(|_| bad(format!("bad value `{v}`"))))
            .collect::<Result<Vec<f64>>>()?;
        let scen = rec[0].to_string();
        if !data.contains_key(&scen) {
            order.push(scen.clone());
        }
        let (labels, rows) = data.entry(scen).or_default();
        let sensor = rec[1].to_string();
        if !rows.contains_key(&sensor) {
            labels.push(sensor.clone());
        }
        rows.entry(sensor).or_default().push((step, row, vals));
    }
    order
        .into_iter()
        .map(|scen| {
            let (labels, mut rows) = data.remove(&scen).expect("collected");
            let mut m = 0;
            let mut factors = Vec::with_capacity(labels.len());
            for label in &labels {
                let mut r = rows.remove(label).expect("collected");
                r.sort_by_key(|(s, row, _)| (*s, *row));
                m = r.iter().map(|(_, row, _)| row + 1).max().unwrap_or(1);
                let n_x = r.first().map_or(0, |x| x.2.len());
                let mut f = DMatrix::zeros(r.len(), n_x);
                for (i, (_, _, vals)) in r.iter().enumerate() {
                    if vals.len() != n_x {
                        return Err(Error::Dimension(format!("ragged factor rows for sensor `{label}`")));
                    }
                    f.row_mut(i).copy_from_slice(vals);
                }
                factors.push(f);
            }
            GramianAtoms::from_factors(scen, labels, factors, m, dense_cap)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeciesSummary {
    pub min: f64,
    pub max: f64,
    #[serde(rename = "final")]
    pub last: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub scenario: String,
    pub n_x: usize,
    pub n_steps: usize,
    pub clamped: usize,
    pub stagnant: usize,
    /// Node id → species name → statistics.
    pub nodes: BTreeMap<String, BTreeMap<String, SpeciesSummary>>,
}

pub fn simulation_summary(model: &WqModel, traj: &Trajectory) -> SimulationSummary {
    let net = model.network();
    let seg = model.segmentation();
    let mut nodes = BTreeMap::new();
    for (n, node) in net.nodes().iter().enumerate() {
        let mut per = BTreeMap::new();
        for species in Species::ALL {
            let i = seg.node_index(n, species);
            let mut values = traj.states.iter().map(|s| s.x[i]);
            per.insert(
                species.name().to_owned(),
                SpeciesSummary {
                    min: values.clone().fold(f64::INFINITY, f64::min),
                    max: values.clone().fold(f64::NEG_INFINITY, f64::max),
                    last: values.next_back().unwrap_or(0.0),
                },
            );
        }
        nodes.insert(node.id.clone(), per);
    }
    SimulationSummary {
        scenario: model.scenario().id.clone(),
        n_x: seg.n_x(),
        n_steps: traj.len(),
        clamped: traj.diagnostics.clamped,
        stagnant: traj.diagnostics.stagnant,
        nodes,
    }
}
