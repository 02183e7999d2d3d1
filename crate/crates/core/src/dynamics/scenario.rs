//! Simulation scenarios: horizon, time steps, initial conditions, booster
//! schedules and reaction adjustments.

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::network::{NodeKind, ReactionOverride, Reactions, Species, WaterNetwork};

/// Relative slack when checking that time ratios are integers.
const RATIO_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialValue {
    pub node: String,
    pub species: Species,
    pub value: f64,
}

/// One constant-injection window. `step_range` is half-open, `[start, end)`
/// in water-quality steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoosterWindow {
    pub step_range: [usize; 2],
    pub concentration: f64,
    /// Booster flow (m³/s) at junctions, or injected volume per step (m³) at
    /// tanks. When absent the hydraulic profile's booster data is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow_or_volume: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Booster {
    pub node: String,
    pub species: Species,
    pub schedule: Vec<BoosterWindow>,
}

/// Network-wide reaction adjustments. Absolute values replace the global
/// coefficient and every per-pipe override of it; `alpha_r_scale` then
/// multiplies every mutual-reaction rate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactionAdjustment {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_f: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_r_scale: Option<f64>,
}

impl ReactionAdjustment {
    pub fn is_identity(&self) -> bool {
        *self == ReactionAdjustment::default()
    }

    pub fn apply(&self, base: &Reactions) -> Reactions {
        let absolute = ReactionOverride {
            alpha_b: self.alpha_b,
            alpha_w: self.alpha_w,
            alpha_f: self.alpha_f,
            alpha_r: self.alpha_r,
        };
        let scale = self.alpha_r_scale.unwrap_or(1.0);
        let mut out = base.clone();
        out.global = absolute.apply(out.global);
        out.global.alpha_r *= scale;
        for o in out.pipes.values_mut() {
            let mut next = ReactionOverride {
                alpha_b: self.alpha_b.or(o.alpha_b),
                alpha_w: self.alpha_w.or(o.alpha_w),
                alpha_f: self.alpha_f.or(o.alpha_f),
                alpha_r: self.alpha_r.or(o.alpha_r),
            };
            next.alpha_r = next.alpha_r.map(|a| a * scale);
            *o = next;
        }
        out
    }
}

fn id_from_any<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<String, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum AnyId {
        Text(String),
        Int(u64),
    }
    Ok(match AnyId::deserialize(d)? {
        AnyId::Text(s) => s,
        AnyId::Int(i) => i.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(deserialize_with = "id_from_any")]
    pub id: String,
    /// Simulation period T_s in seconds.
    #[serde(rename = "Ts")]
    pub ts: f64,
    pub dt_wq: f64,
    pub dt_h: f64,
    #[serde(default)]
    pub initial: Vec<InitialValue>,
    #[serde(default)]
    pub boosters: Vec<Booster>,
    #[serde(default, skip_serializing_if = "ReactionAdjustment::is_identity")]
    pub reaction_overrides: ReactionAdjustment,
    /// Hydraulics file for this scenario, resolved relative to the scenario
    /// file by front ends.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hydraulics: Option<String>,
    /// Weight in the robust objective; uniform when absent everywhere.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

fn integer_ratio(num: f64, den: f64) -> Option<usize> {
    let r = num / den;
    let n = r.round();
    (n >= 1.0 && (r - n).abs() <= RATIO_SLACK * n).then_some(n as usize)
}

impl Scenario {
    /// A scenario with no initial conditions or boosters.
    pub fn new(id: impl Into<String>, ts: f64, dt_wq: f64, dt_h: f64) -> Self {
        Scenario {
            id: id.into(),
            ts,
            dt_wq,
            dt_h,
            initial: Vec::new(),
            boosters: Vec::new(),
            reaction_overrides: ReactionAdjustment::default(),
            hydraulics: None,
            weight: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Number of water-quality samples N_s = T_s / Δt_WQ.
    pub fn n_steps(&self) -> usize {
        integer_ratio(self.ts, self.dt_wq).expect("validated scenario")
    }

    /// Water-quality steps per hydraulic step.
    pub fn steps_per_hydraulic(&self) -> usize {
        integer_ratio(self.dt_h, self.dt_wq).expect("validated scenario")
    }

    pub fn with_initial(mut self, node: &str, species: Species, value: f64) -> Self {
        self.initial.push(InitialValue {
            node: node.into(),
            species,
            value,
        });
        self
    }

    pub fn validate(&self, net: &WaterNetwork) -> Result<()> {
        self.validate_inner(net)
            .map_err(|e| e.context(format!("scenario `{}`", self.id)))
    }

    fn validate_inner(&self, net: &WaterNetwork) -> Result<()> {
        for (name, v) in [("Ts", self.ts), ("dt_wq", self.dt_wq), ("dt_h", self.dt_h)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(format!("{name} must be > 0, got {v}")));
            }
        }
        if integer_ratio(self.ts, self.dt_wq).is_none() {
            return Err(Error::validation(format!(
                "Ts / dt_wq = {} is not a positive integer",
                self.ts / self.dt_wq
            )));
        }
        if integer_ratio(self.dt_h, self.dt_wq).is_none() {
            return Err(Error::validation(format!(
                "dt_h = {} is not an integer multiple of dt_wq = {}",
                self.dt_h, self.dt_wq
            )));
        }
        let node = |id: &str| {
            net.node_index(id)
                .ok_or_else(|| Error::validation(format!("unknown node `{id}`")))
        };
        for iv in &self.initial {
            node(&iv.node)?;
            if !(iv.value.is_finite() && iv.value >= 0.0) {
                return Err(Error::validation(format!(
                    "initial {} at `{}` must be >= 0, got {}",
                    iv.species.name(),
                    iv.node,
                    iv.value
                )));
            }
        }
        for b in &self.boosters {
            let n = node(&b.node)?;
            if net.node(n).kind == NodeKind::Reservoir {
                return Err(Error::validation(format!(
                    "booster at reservoir `{}`; set its concentration through `initial`",
                    b.node
                )));
            }
            for w in &b.schedule {
                if w.step_range[0] >= w.step_range[1] {
                    return Err(Error::validation(format!(
                        "booster `{}`: empty step_range {:?}",
                        b.node, w.step_range
                    )));
                }
                if !(w.concentration.is_finite() && w.concentration >= 0.0) {
                    return Err(Error::validation(format!(
                        "booster `{}`: concentration must be >= 0, got {}",
                        b.node, w.concentration
                    )));
                }
                if let Some(q) = w.flow_or_volume {
                    if !(q.is_finite() && q >= 0.0) {
                        return Err(Error::validation(format!(
                            "booster `{}`: flow_or_volume must be >= 0, got {q}",
                            b.node
                        )));
                    }
                }
            }
        }
        if let Some(w) = self.weight {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::validation(format!("weight must be >= 0, got {w}")));
            }
        }
        let adj = &self.reaction_overrides;
        for v in [adj.alpha_b, adj.alpha_w, adj.alpha_f, adj.alpha_r, adj.alpha_r_scale]
            .into_iter()
            .flatten()
        {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::validation(format!(
                    "reaction override must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::parse_network;

    fn net() -> WaterNetwork {
        parse_network(
            r#"{"nodes": [{"id": "R1", "kind": "reservoir"}, {"id": "J1", "kind": "junction"}],
                "links": [{"id": "P1", "kind": "pipe", "from": "R1", "to": "J1",
                           "length": 100, "radius": 0.1}],
                "reactions": {"alpha_b": 1e-5, "alpha_r": 2e-5,
                              "pipes": {"P1": {"alpha_r": 4e-5}}}}"#,
        )
        .unwrap()
    }

    #[test]
    fn parses_full_document() {
        let s = Scenario::from_json(
            r#"{"id": 3, "Ts": 3600, "dt_wq": 10, "dt_h": 600,
                "initial": [{"node": "R1", "species": "chlorine", "value": 2.0}],
                "boosters": [{"node": "J1", "species": "reactant",
                              "schedule": [{"step_range": [0, 5], "concentration": 1.5,
                                            "flow_or_volume": 0.01}]}],
                "reaction_overrides": {"alpha_r_scale": 2.0}}"#,
        )
        .unwrap();
        s.validate(&net()).unwrap();
        assert_eq!(s.id, "3");
        assert_eq!(s.n_steps(), 360);
        assert_eq!(s.steps_per_hydraulic(), 60);
        let back = Scenario::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn schema_errors_carry_paths() {
        let err = Scenario::from_json(
            r#"{"id": "a", "Ts": 10, "dt_wq": 1, "dt_h": 1,
                "initial": [{"node": "R1", "species": "ozone", "value": 1}]}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("initial[0].species"), "{err}");
    }

    #[test]
    fn rejects_non_integer_ratios() {
        let s = Scenario::new("a", 100.0, 3.0, 9.0);
        assert!(s.validate(&net()).unwrap_err().to_string().contains("Ts / dt_wq"));
        let s = Scenario::new("a", 90.0, 3.0, 10.0);
        assert!(s.validate(&net()).unwrap_err().to_string().contains("integer multiple"));
        Scenario::new("a", 90.0, 3.0, 9.0).validate(&net()).unwrap();
    }

    #[test]
    fn rejects_bad_boosters() {
        let mut s = Scenario::new("a", 10.0, 1.0, 1.0);
        s.boosters.push(Booster {
            node: "J9".into(),
            species: Species::Chlorine,
            schedule: vec![],
        });
        assert!(s.validate(&net()).unwrap_err().to_string().contains("unknown node `J9`"));
        s.boosters[0].node = "J1".into();
        s.boosters[0].schedule.push(BoosterWindow {
            step_range: [0, 3],
            concentration: -1.0,
            flow_or_volume: None,
        });
        assert!(s.validate(&net()).is_err());
    }

    #[test]
    fn adjustments_reach_pipe_overrides() {
        let base = net().reactions().clone();
        let adj = ReactionAdjustment {
            alpha_b: Some(0.5),
            alpha_r_scale: Some(3.0),
            ..Default::default()
        };
        let out = adj.apply(&base);
        assert_eq!(out.global.alpha_b, 0.5);
        assert!((out.global.alpha_r - 6e-5).abs() < 1e-18);
        let p1 = out.pipes["P1"];
        assert_eq!(p1.alpha_b, Some(0.5));
        assert!((p1.alpha_r.unwrap() - 12e-5).abs() < 1e-18);
    }
}
