use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context;
use aquobs::dynamics::{MeasuredSpecies, Scenario, SensorModel, WqModel};
use aquobs::error::Error;
use aquobs::network::{load_hydraulics, parse_inp_topology, parse_network, HydraulicProfile, WaterNetwork};
use aquobs::observability::{normalize_weights, scenario_atoms, GramianAtoms, DEFAULT_DENSE_CAP};
use log::info;
use rayon::prelude::*;

use crate::{InputArgs, Measured};

fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn load_network(path: &Path) -> anyhow::Result<WaterNetwork> {
    let text = read(path)?;
    let is_inp = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("inp"));
    let net = if is_inp { parse_inp_topology(&text) } else { parse_network(&text) };
    Ok(net.map_err(|e| e.context(format!("network {}", path.display())))?)
}

/// One scenario with the hydraulics it runs on.
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub hydraulics: Arc<HydraulicProfile>,
}

pub struct Inputs {
    pub net: Arc<WaterNetwork>,
    pub scenarios: Vec<LoadedScenario>,
}

impl Inputs {
    pub fn load(args: &InputArgs) -> anyhow::Result<Inputs> {
        let net = Arc::new(load_network(&args.network)?);
        let mut cache: Vec<(PathBuf, Arc<HydraulicProfile>)> = Vec::new();
        let mut hydraulics_for = |path: PathBuf| -> anyhow::Result<Arc<HydraulicProfile>> {
            if let Some((_, h)) = cache.iter().find(|(p, _)| *p == path) {
                return Ok(h.clone());
            }
            let h = load_hydraulics(&read(&path)?, &net)
                .map_err(|e| e.context(format!("hydraulics {}", path.display())))?;
            let h = Arc::new(h);
            cache.push((path, h.clone()));
            Ok(h)
        };

        let mut scenarios = Vec::new();
        let mut ids = BTreeSet::new();
        for path in &args.scenarios {
            let scenario = Scenario::from_json(&read(path)?)
                .map_err(|e| e.context(format!("scenario {}", path.display())))?;
            if !ids.insert(scenario.id.clone()) {
                return Err(Error::validation(format!("scenario id `{}` appears twice", scenario.id)).into());
            }
            let hyd_path = match (&scenario.hydraulics, &args.hydraulics) {
                (Some(own), _) => path.parent().unwrap_or(Path::new(".")).join(own),
                (None, Some(shared)) => shared.clone(),
                (None, None) => {
                    return Err(Error::validation(format!(
                        "scenario `{}` names no hydraulics and --hydraulics is missing",
                        scenario.id
                    ))
                    .into())
                }
            };
            scenarios.push(LoadedScenario {
                scenario,
                hydraulics: hydraulics_for(hyd_path)?,
            });
        }
        Ok(Inputs { net, scenarios })
    }

    pub fn model(&self, i: usize) -> anyhow::Result<WqModel> {
        let s = &self.scenarios[i];
        Ok(WqModel::with_shared(self.net.clone(), s.hydraulics.clone(), &s.scenario)?)
    }

    /// Scenario weights from the files: uniform when none is given, all or
    /// nothing otherwise.
    pub fn weights(&self) -> anyhow::Result<Vec<f64>> {
        let given: Vec<f64> = self.scenarios.iter().filter_map(|s| s.scenario.weight).collect();
        let d = self.scenarios.len();
        let weights = match given.len() {
            0 => normalize_weights(d, None)?,
            n if n == d => normalize_weights(d, Some(&given))?,
            _ => return Err(Error::validation("either every scenario or none must set a weight").into()),
        };
        Ok(weights)
    }

    pub fn sensor(&self, measured: Measured) -> SensorModel {
        let species = match measured {
            Measured::Chlorine => MeasuredSpecies::Chlorine,
            Measured::Both => MeasuredSpecies::Both,
        };
        SensorModel::all_nodes(&self.net, species)
    }

    /// Simulates every scenario and builds its atoms, scenarios in
    /// parallel. Returns the atoms and the seconds spent per scenario.
    pub fn atoms(&self, measured: Measured) -> anyhow::Result<(Vec<GramianAtoms>, Vec<f64>)> {
        let sensor = self.sensor(measured);
        let built = (0..self.scenarios.len())
            .into_par_iter()
            .map(|i| {
                let start = std::time::Instant::now();
                let model = self.model(i)?;
                let atoms = scenario_atoms(&model, &sensor, DEFAULT_DENSE_CAP)?;
                info!("scenario `{}`: n_x = {}, N_s = {}", atoms.scenario(), model.n_x(), model.n_steps());
                Ok((atoms, start.elapsed().as_secs_f64()))
            })
            .collect::<anyhow::Result<Vec<_>>>()?;
        Ok(built.into_iter().unzip())
    }
}
