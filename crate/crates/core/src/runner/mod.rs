//! Scenario execution: timeline compilation, propagation, decomposition,
//! ensembles and output files.

mod builtin;
mod output;
mod scenario;

pub use builtin::{builtin, builtin_scenarios, fig4_t_grid};
pub use output::{summary_json, write_run, write_sweep, OutputFormat};
pub use scenario::{
    with_parameter, GapSpec, NoiseSpec, PathSpec, ProtocolSpec, Scenario, StateSpec, SCHEMA_VERSION, SWEEPABLE,
};

use rayon::prelude::*;
use std::path::Path;

use crate::analysis::{decompose, DecompositionReport};
use crate::error::{Error, Result};
use crate::noise::{ideal_targets, monte_carlo, noisy_timeline, EnsembleResult, EnsembleSpec, NoiseModel};
use crate::propagate::{evolve_state, propagate, Trajectory};
use crate::qcore::{fidelity, PureState};
use crate::schedules::{back_forth, DriveTimeline};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Results for one initial state.
#[derive(Clone, Debug)]
pub struct StateRun {
    pub label: String,
    pub initial: PureState,
    /// Single realisation (seeded noise applied, if any).
    pub trajectory: Trajectory,
    /// Ideal adiabatic target at each trajectory sample time.
    pub targets: Vec<PureState>,
    /// Fidelity of the trajectory to `targets`.
    pub target_fidelity: Vec<f64>,
    pub final_fidelity: f64,
    pub final_fid_eig: f64,
    /// Target fidelity at the end of each half-path traversal.
    pub pass_end_fidelities: Vec<f64>,
    pub ensemble: Option<EnsembleResult>,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub scenario: Scenario,
    pub hash: String,
    pub timeline: DriveTimeline,
    /// Decomposition of the timeline with deterministic noise applied.
    pub report: DecompositionReport,
    pub states: Vec<StateRun>,
}

/// Looks up a builtin by name, otherwise reads a scenario file.
pub fn load_scenario(name_or_path: &str) -> Result<Scenario> {
    if let Some(s) = builtin(name_or_path) {
        return Ok(s);
    }
    let p = Path::new(name_or_path);
    if !p.exists() {
        let names: Vec<String> = builtin_scenarios().into_iter().map(|s| s.name).collect();
        return Err(Error::Scenario(format!(
            "no builtin or file named {name_or_path:?}; builtins: {}",
            names.join(", ")
        )));
    }
    Scenario::from_json(&std::fs::read_to_string(p)?)
}

fn scenario_error(e: Error) -> Error {
    if e.is_numerical() || matches!(e, Error::Scenario(_) | Error::Io(_)) {
        e
    } else {
        Error::Scenario(e.to_string())
    }
}

pub fn run(sc: &Scenario) -> Result<RunResult> {
    sc.validate()?;
    let models: Vec<NoiseModel> = sc.noise.iter().map(NoiseSpec::model).collect();
    let timeline = sc.build_timeline().map_err(scenario_error)?;
    let deterministic: Vec<NoiseModel> = models.iter().filter(|m| m.is_deterministic()).cloned().collect();
    let stochastic = models.len() > deterministic.len();
    let biased = noisy_timeline(&timeline, &deterministic, sc.seed)?;
    let report = decompose(&biased)?;
    let realisation = noisy_timeline(&timeline, &models, sc.seed)?;

    // The first k passes as their own timelines: at a pass boundary the
    // next pass's zero-time jump would otherwise already move lambda.
    let forward = sc.build_forward()?;
    let mut passes = Vec::with_capacity(sc.repeats);
    for k in 1..sc.repeats {
        passes.push(back_forth(&forward, k)?);
    }
    passes.push(timeline.clone());

    let mut states = Vec::with_capacity(sc.initial_states.len());
    for spec in &sc.initial_states {
        let psi0 = spec.state()?;
        let trajectory = evolve_state(&psi0, &realisation, sc.samples)?;
        let times: Vec<f64> = trajectory.samples.iter().map(|s| s.t).collect();
        let targets = ideal_targets(&timeline, &psi0, &times)?;
        let target_fidelity = trajectory
            .samples
            .iter()
            .zip(&targets)
            .map(|(s, t)| fidelity(t, &s.state))
            .collect::<Result<Vec<f64>>>()?;
        let pass_end_fidelities = passes
            .iter()
            .map(|part| {
                let t = part.total_time();
                let target = ideal_targets(part, &psi0, &[t])?.remove(0);
                let state = propagate(&realisation.slice(0.0, t))?.apply(&psi0)?;
                fidelity(&target, &state)
            })
            .collect::<Result<Vec<f64>>>()?;
        let ensemble = if stochastic {
            let spec = EnsembleSpec {
                timeline: timeline.clone(),
                initial: psi0.clone(),
                noise: models.clone(),
                n_samples: sc.samples,
            };
            Some(monte_carlo(&spec, sc.n_traj, sc.seed)?)
        } else {
            None
        };
        states.push(StateRun {
            label: spec.label(),
            initial: psi0,
            final_fidelity: *target_fidelity.last().expect("non-empty"),
            final_fid_eig: trajectory.last().fid_eig,
            trajectory,
            targets,
            target_fidelity,
            pass_end_fidelities,
            ensemble,
        });
    }
    Ok(RunResult { scenario: sc.clone(), hash: sc.hash()?, timeline, report, states })
}

/// Runs `base` once per value of `param`, in parallel; results keep value order.
pub fn sweep(base: &Scenario, param: &str, values: &[f64]) -> Result<Vec<(f64, RunResult)>> {
    if !SWEEPABLE.contains(&param) {
        return Err(Error::Scenario(format!("unknown sweep parameter {param}; sweepable: {}", SWEEPABLE.join(", "))));
    }
    let scenarios = values.iter().map(|&v| with_parameter(base, param, v)).collect::<Result<Vec<_>>>()?;
    scenarios.par_iter().zip(values.par_iter()).map(|(sc, &v)| Ok((v, run(sc)?))).collect()
}
