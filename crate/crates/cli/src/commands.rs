use std::time::Instant;

use aquobs::error::Error;
use aquobs::io::{atoms_to_csv, simulation_summary, trajectory_to_csv, write_trajectory_binary};
use aquobs::observability::{
    default_epsilon, measure_lambda_min, measure_logdet, measure_rank, measure_trace, GramianAtoms,
    DEFAULT_DENSE_CAP, RANK_TOLERANCE,
};
use aquobs::placement::{
    brute_force_place, greedy_place, guarantee_check, per_hydraulic_step, submodularity_probe, GuaranteeReport,
    HydraulicStepPlan, OracleComparison, PlacementProblem, PlacementResult, ProbeReport,
};
use serde::Serialize;

use crate::inputs::Inputs;
use crate::output::OutDir;
use crate::{InputArgs, Measured, PlacementArgs, TrajectoryFormat};

pub fn simulate(args: &InputArgs, format: TrajectoryFormat) -> anyhow::Result<()> {
    let inputs = Inputs::load(args)?;
    if inputs.scenarios.len() != 1 {
        return Err(Error::validation("simulate takes exactly one scenario").into());
    }
    let model = inputs.model(0)?;
    let traj = model.simulate()?;
    let out = OutDir::create(&args.out)?;
    let path = match format {
        TrajectoryFormat::Csv => out.write("trajectory.csv", &trajectory_to_csv(&model, &traj))?,
        TrajectoryFormat::Binary => out.write_with("trajectory.bin", |w| Ok(write_trajectory_binary(&traj, w)?))?,
    };
    let summary = simulation_summary(&model, &traj);
    out.write_json("summary.json", &summary)?;
    println!(
        "simulated `{}`: {} steps, n_x = {}, {} clamped entries -> {}",
        summary.scenario,
        summary.n_steps,
        summary.n_x,
        summary.clamped,
        path.display()
    );
    Ok(())
}

fn problem(inputs: &Inputs, atoms: Vec<GramianAtoms>, p: &PlacementArgs) -> anyhow::Result<PlacementProblem> {
    let pins: Vec<&str> = p.pins.iter().map(String::as_str).collect();
    let mut problem = PlacementProblem::new(atoms, p.budget, p.objective.into())?
        .with_weights(&inputs.weights()?)?
        .with_pinned_ids(&pins)?
        .with_lazy(p.lazy);
    if let Some(eps) = p.epsilon {
        problem = problem.with_epsilon(eps)?;
    }
    Ok(problem)
}

#[derive(Serialize)]
struct PlacementReport<'a> {
    #[serde(flatten)]
    result: &'a PlacementResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    per_hydraulic_step: Option<&'a HydraulicStepPlan>,
}

#[derive(Serialize)]
struct ScenarioTiming {
    id: String,
    seconds: f64,
}

#[derive(Serialize)]
struct Timing {
    scenarios: Vec<ScenarioTiming>,
    placement_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    per_step_seconds: Option<f64>,
    total_seconds: f64,
}

fn scenario_timing(atoms: &[GramianAtoms], seconds: &[f64]) -> Vec<ScenarioTiming> {
    atoms
        .iter()
        .zip(seconds)
        .map(|(a, &s)| ScenarioTiming {
            id: a.scenario().to_owned(),
            seconds: s,
        })
        .collect()
}

fn matrix_csv(plan: &HydraulicStepPlan) -> String {
    let mut out = String::from("node");
    for h in 0..plan.steps.len() {
        out.push_str(&format!(",h{h}"));
    }
    out.push('\n');
    for (id, row) in plan.candidates.iter().zip(&plan.matrix) {
        out.push_str(id);
        for v in row {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

pub fn place(args: &InputArgs, p: &PlacementArgs, per_step: bool, export_atoms: bool) -> anyhow::Result<()> {
    let start = Instant::now();
    let inputs = Inputs::load(args)?;
    let (atoms, seconds) = inputs.atoms(p.measure_species)?;
    let out = OutDir::create(&args.out)?;
    if export_atoms {
        out.write("atoms.csv", &atoms_to_csv(&atoms))?;
    }
    let timing = scenario_timing(&atoms, &seconds);
    let problem = problem(&inputs, atoms, p)?;
    let result = greedy_place(&problem)?;

    let mut per_step_seconds = None;
    let plan = if per_step {
        let t = Instant::now();
        let plan = per_hydraulic_step(&problem, DEFAULT_DENSE_CAP)?;
        per_step_seconds = Some(t.elapsed().as_secs_f64());
        out.write("per_step.csv", &matrix_csv(&plan))?;
        Some(plan)
    } else {
        None
    };
    // Wall times live in timing.json so that the report itself is
    // reproducible byte for byte.
    let stable = result.without_timing();
    out.write_json(
        "placement.json",
        &PlacementReport {
            result: &stable,
            per_hydraulic_step: plan.as_ref(),
        },
    )?;
    out.write_json(
        "timing.json",
        &Timing {
            scenarios: timing,
            placement_seconds: result.wall_seconds,
            per_step_seconds,
            total_seconds: start.elapsed().as_secs_f64(),
        },
    )?;
    println!(
        "{} sensors ({}): {} with objective {:.6}",
        result.set.len(),
        result.objective,
        result.ids.join(", "),
        result.value
    );
    Ok(())
}

#[derive(Serialize)]
struct OracleReport {
    #[serde(flatten)]
    greedy: PlacementResult,
    guarantee: GuaranteeReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    probe: Option<ProbeReport>,
}

pub fn oracle(args: &InputArgs, p: &PlacementArgs, cap: u128, probe: usize) -> anyhow::Result<()> {
    let inputs = Inputs::load(args)?;
    let (atoms, _) = inputs.atoms(p.measure_species)?;
    let problem = problem(&inputs, atoms, p)?;
    let greedy = greedy_place(&problem)?.without_timing();
    let exact = brute_force_place(&problem, cap)?;
    let guarantee = guarantee_check(&greedy, &exact)?;
    let probe = (probe > 0)
        .then(|| submodularity_probe(&problem, probe, args.seed))
        .transpose()?;
    let mut greedy = greedy;
    greedy.oracle = Some(OracleComparison {
        optimum: exact.value,
        optimal_set: exact.ids.clone(),
        ratio: guarantee.ratio,
    });
    println!(
        "greedy {} = {:.6}, optimum {} = {:.6}, ratio {:.6} (bound {:.4})",
        greedy.ids.join(","),
        greedy.value,
        exact.ids.join(","),
        exact.value,
        guarantee.ratio,
        guarantee.bound
    );
    let out = OutDir::create(&args.out)?;
    out.write_json("oracle.json", &OracleReport { greedy, guarantee, probe })?;
    Ok(())
}

#[derive(Serialize)]
struct ScenarioMeasures {
    scenario: String,
    trace: f64,
    logdet: f64,
    rank: usize,
    lambda_min: f64,
}

#[derive(Serialize)]
struct MeasureReport {
    sensors: Vec<String>,
    epsilon: f64,
    scenarios: Vec<ScenarioMeasures>,
}

pub fn measure(args: &InputArgs, sensors: &[String], epsilon: Option<f64>, measured: Measured) -> anyhow::Result<()> {
    let inputs = Inputs::load(args)?;
    let (atoms, _) = inputs.atoms(measured)?;
    let labels = atoms[0].labels();
    let set = sensors
        .iter()
        .map(|id| {
            labels
                .iter()
                .position(|l| l == id)
                .ok_or_else(|| Error::validation(format!("unknown sensor node `{id}`")))
        })
        .collect::<Result<Vec<usize>, Error>>()?;
    let epsilon = epsilon.unwrap_or_else(|| default_epsilon(&atoms));
    let scenarios = atoms
        .iter()
        .map(|a| {
            let w = a.gramian_for_set(&set)?;
            Ok(ScenarioMeasures {
                scenario: a.scenario().to_owned(),
                trace: measure_trace(&w),
                logdet: measure_logdet(&w, epsilon)?,
                rank: measure_rank(&w, RANK_TOLERANCE)?,
                lambda_min: measure_lambda_min(&w)?,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    for s in &scenarios {
        println!(
            "{}: trace {:.6e}, logdet {:.6}, rank {}, lambda_min {:.3e}",
            s.scenario, s.trace, s.logdet, s.rank, s.lambda_min
        );
    }
    let out = OutDir::create(&args.out)?;
    out.write_json(
        "measures.json",
        &MeasureReport {
            sensors: sensors.to_vec(),
            epsilon,
            scenarios,
        },
    )?;
    Ok(())
}
