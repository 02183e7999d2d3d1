use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Segmentation, Species, WaterNetwork};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasuredSpecies {
    #[default]
    Chlorine,
    Both,
}

impl MeasuredSpecies {
    pub fn species(self) -> &'static [Species] {
        match self {
            MeasuredSpecies::Chlorine => &[Species::Chlorine],
            MeasuredSpecies::Both => &Species::ALL,
        }
    }
}

/// Candidate sensor locations and which of them carry a sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorModel {
    candidates: Vec<usize>,
    measured: MeasuredSpecies,
    gamma: Vec<bool>,
}

impl SensorModel {
    /// Every node is a candidate; no sensor is active.
    pub fn all_nodes(net: &WaterNetwork, measured: MeasuredSpecies) -> Self {
        SensorModel {
            candidates: (0..net.node_count()).collect(),
            measured,
            gamma: vec![false; net.node_count()],
        }
    }

    pub fn with_candidates(net: &WaterNetwork, ids: &[&str], measured: MeasuredSpecies) -> Result<Self> {
        let mut candidates = Vec::with_capacity(ids.len());
        for id in ids {
            let n = net
                .node_index(id)
                .ok_or_else(|| Error::validation(format!("unknown candidate node `{id}`")))?;
            if candidates.contains(&n) {
                return Err(Error::validation(format!("duplicate candidate node `{id}`")));
            }
            candidates.push(n);
        }
        Ok(SensorModel {
            gamma: vec![false; candidates.len()],
            candidates,
            measured,
        })
    }

    pub fn n_candidates(&self) -> usize {
        self.candidates.len()
    }

    /// Node index of candidate `j`.
    pub fn node(&self, j: usize) -> usize {
        self.candidates[j]
    }

    pub fn candidates(&self) -> &[usize] {
        &self.candidates
    }

    pub fn measured(&self) -> MeasuredSpecies {
        self.measured
    }

    /// Rows per sensor.
    pub fn rows_per_sensor(&self) -> usize {
        self.measured.species().len()
    }

    /// State indices read by candidate `j`, one per measured species.
    pub fn selector(&self, j: usize, seg: &Segmentation) -> Vec<usize> {
        self.measured
            .species()
            .iter()
            .map(|&s| seg.node_index(self.candidates[j], s))
            .collect()
    }

    pub fn gamma(&self) -> &[bool] {
        &self.gamma
    }

    pub fn set_active(&mut self, j: usize, on: bool) {
        self.gamma[j] = on;
    }

    pub fn set_gamma_from(&mut self, selected: &[usize]) {
        self.gamma.iter_mut().for_each(|g| *g = false);
        for &j in selected {
            self.gamma[j] = true;
        }
    }

    pub fn active(&self) -> Vec<usize> {
        (0..self.gamma.len()).filter(|&j| self.gamma[j]).collect()
    }
}

/// Stacks the readings of the active sensors, in candidate order. Inactive
/// candidates contribute no rows.
pub fn build_measurement(sensor: &SensorModel, seg: &Segmentation, x: &DVector<f64>) -> DVector<f64> {
    let rows: Vec<f64> = sensor
        .active()
        .into_iter()
        .flat_map(|j| sensor.selector(j, seg))
        .map(|i| x[i])
        .collect();
    DVector::from_vec(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{parse_network, segment_pipes, HydraulicProfile};

    fn five_nodes() -> (WaterNetwork, Segmentation) {
        let net = parse_network(
            r#"{"nodes": [{"id": "A", "kind": "reservoir"}, {"id": "B", "kind": "junction"},
                          {"id": "C", "kind": "junction"}, {"id": "D", "kind": "junction"},
                          {"id": "E", "kind": "junction"}],
                "links": [{"id": "1", "kind": "valve", "from": "A", "to": "B"},
                          {"id": "2", "kind": "valve", "from": "B", "to": "C"},
                          {"id": "3", "kind": "valve", "from": "C", "to": "D"},
                          {"id": "4", "kind": "valve", "from": "D", "to": "E"}]}"#,
        )
        .unwrap();
        let hyd = HydraulicProfile::builder(&net, 1, None).build(&net).unwrap();
        let seg = segment_pipes(&net, &hyd, 1.0).unwrap();
        (net, seg)
    }

    #[test]
    fn measurement_selection() {
        let (net, seg) = five_nodes();
        let x = DVector::from_iterator(10, (1..=10).map(f64::from));
        let mut s = SensorModel::all_nodes(&net, MeasuredSpecies::Chlorine);
        assert_eq!(build_measurement(&s, &seg, &x).len(), 0);
        s.set_active(2, true);
        assert_eq!(build_measurement(&s, &seg, &x).as_slice(), &[3.0]);
        s.set_gamma_from(&[0, 1, 2, 3, 4]);
        assert_eq!(build_measurement(&s, &seg, &x).as_slice(), &[1.0, 2.0, 3.0, 4.0, 5.0]);

        let mut both = SensorModel::all_nodes(&net, MeasuredSpecies::Both);
        both.set_active(2, true);
        assert_eq!(build_measurement(&both, &seg, &x).as_slice(), &[3.0, 8.0]);
    }

    #[test]
    fn candidate_subset() {
        let (net, seg) = five_nodes();
        let s = SensorModel::with_candidates(&net, &["E", "C"], MeasuredSpecies::Chlorine).unwrap();
        assert_eq!(s.selector(0, &seg), vec![4]);
        assert!(SensorModel::with_candidates(&net, &["Z"], MeasuredSpecies::Chlorine).is_err());
    }
}
