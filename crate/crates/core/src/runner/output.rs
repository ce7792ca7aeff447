use serde_json::{json, Value};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{NoiseSpec, RunResult, Scenario, VERSION};
use crate::analysis::adiabaticity_bound;
use crate::error::{Error, Result};
use crate::noise::LORENTZ_TRUNCATION;
use crate::qcore::bloch_projections;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::Scenario(format!("unknown format {s:?} (csv or json)"))),
        }
    }
}

struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<f64>>,
}

fn header_for(name: &str, hash: &str) -> String {
    format!("# scenario={name} hash={hash} version={VERSION}\n")
}

fn header(r: &RunResult) -> String {
    header_for(&r.scenario.name, &r.hash)
}

impl Table {
    fn csv(&self, head: &str) -> String {
        let mut s = String::from(head);
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for row in &self.rows {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                write!(s, "{v:.16e}").expect("write to string");
            }
            s.push('\n');
        }
        s
    }

    fn json(&self, r: &RunResult) -> Result<String> {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| Value::Object(self.columns.iter().zip(row).map(|(c, v)| (c.to_string(), json!(v))).collect()))
            .collect();
        let v = json!({ "scenario": r.scenario.name, "hash": r.hash, "version": VERSION, "rows": rows });
        Ok(serde_json::to_string_pretty(&v)? + "\n")
    }

    fn write(&self, r: &RunResult, dir: &Path, stem: &str, format: OutputFormat, out: &mut Vec<PathBuf>) -> Result<()> {
        let (path, text) = match format {
            OutputFormat::Csv => (dir.join(format!("{stem}.csv")), self.csv(&header(r))),
            OutputFormat::Json => (dir.join(format!("{stem}.json")), self.json(r)?),
        };
        fs::write(&path, text)?;
        out.push(path);
        Ok(())
    }
}

fn nan3(p: Option<(f64, f64, f64)>) -> [f64; 3] {
    p.map_or([f64::NAN; 3], |(x, y, z)| [x, y, z])
}

fn summary(r: &RunResult) -> Value {
    let b = adiabaticity_bound(&r.report);
    let states: Vec<Value> = r
        .states
        .iter()
        .map(|s| {
            json!({
                "label": s.label,
                "final_fidelity": s.final_fidelity,
                "final_fid_eig": s.final_fid_eig,
                "pass_end_fidelities": s.pass_end_fidelities,
                "ensemble_final_mean": s.ensemble.as_ref().map(|e| e.final_mean()),
                "ensemble_final_stderr": s.ensemble.as_ref().map(|e| e.final_stderr()),
                "n_traj": s.ensemble.as_ref().map(|e| e.n_traj),
            })
        })
        .collect();
    json!({
        "scenario": r.scenario.name,
        "description": r.scenario.description,
        "hash": r.hash,
        "version": VERSION,
        "seed": r.scenario.seed,
        "total_time_s": r.timeline.total_time(),
        "epsilon_max": r.report.epsilon_max,
        "epsilon_final": r.report.epsilon_final,
        "deviation_norm": b.lhs,
        "bound_rhs": b.rhs,
        "bound_holds": b.holds,
        "ode_extract_distance": r.report.ode_extract_distance,
        "lorentz_truncation": r
            .scenario
            .noise
            .iter()
            .any(|n| matches!(n, NoiseSpec::StaticLorentzAmplitude { .. }))
            .then_some(LORENTZ_TRUNCATION),
        "states": states,
        "scenario_spec": r.scenario,
    })
}

/// The scalar summary written as `{name}_summary.json`.
pub fn summary_json(r: &RunResult) -> Result<String> {
    Ok(serde_json::to_string_pretty(&summary(r))?)
}

/// Writes all files of one run into `dir`; returns the paths written.
pub fn write_run(r: &RunResult, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let name = &r.scenario.name;
    let mut out = Vec::new();
    for s in &r.states {
        let traj = Table {
            columns: vec!["t_s", "lambda", "px", "py", "pz", "fid_eig"],
            rows: s
                .trajectory
                .samples
                .iter()
                .map(|x| {
                    let [px, py, pz] = nan3(x.projections);
                    vec![x.t, x.lambda, px, py, pz, x.fid_eig]
                })
                .collect(),
        };
        traj.write(r, dir, &format!("{name}_{}_trajectory", s.label), format, &mut out)?;

        let mut rows = Vec::with_capacity(s.targets.len());
        for ((x, t), f) in s.trajectory.samples.iter().zip(&s.targets).zip(&s.target_fidelity) {
            let p = if t.dim() == 2 { Some(bloch_projections(t)?) } else { None };
            let [tx, ty, tz] = nan3(p);
            rows.push(vec![x.t, *f, tx, ty, tz]);
        }
        let target = Table { columns: vec!["t_s", "fid_target", "target_px", "target_py", "target_pz"], rows };
        target.write(r, dir, &format!("{name}_{}_target", s.label), format, &mut out)?;

        if let Some(e) = &s.ensemble {
            let ens = Table {
                columns: vec!["t_s", "mean_fid", "stderr", "n_traj"],
                rows: (0..e.times.len()).map(|k| vec![e.times[k], e.mean[k], e.stderr[k], e.n_traj as f64]).collect(),
            };
            ens.write(r, dir, &format!("{name}_{}_ensemble", s.label), format, &mut out)?;
        }
    }

    let ph = &r.report.phases;
    let phases = Table {
        columns: vec!["s", "lambda", "phi_1", "phi_2", "gamma_1", "gamma_2", "epsilon_12"],
        rows: (0..ph.s.len())
            .map(|k| vec![ph.s[k], ph.lambda[k], ph.phi_1[k], ph.phi_2[k], ph.gamma_1[k], ph.gamma_2[k], ph.epsilon_12[k]])
            .collect(),
    };
    phases.write(r, dir, &format!("{name}_phases"), format, &mut out)?;

    let wrap = |key: &str, text: String| -> Result<String> {
        let inner: Value = serde_json::from_str(&text)?;
        let v = json!({ "scenario": name, "hash": r.hash, "version": VERSION, key: inner });
        Ok(serde_json::to_string_pretty(&v)?)
    };
    for (suffix, text) in [
        ("timeline", wrap("segments", r.timeline.to_json()?)?),
        ("report", wrap("report", r.report.to_json()?)?),
        ("summary", summary_json(r)?),
    ] {
        let p = dir.join(format!("{name}_{suffix}.json"));
        fs::write(&p, text + "\n")?;
        out.push(p);
    }
    Ok(out)
}

/// One summary row per (value, initial state).
pub fn write_sweep(base: &Scenario, results: &[(f64, RunResult)], param: &str, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let mut s = header_for(&base.name, &base.hash()?);
    s.push_str("value,state,final_fidelity,final_fid_eig,ensemble_mean,ensemble_stderr,epsilon_max,deviation_norm,bound_rhs\n");
    for (v, r) in results {
        for st in &r.states {
            let (m, e) = st.ensemble.as_ref().map_or((f64::NAN, f64::NAN), |e| (e.final_mean(), e.final_stderr()));
            writeln!(
                s,
                "{v:.16e},{},{:.16e},{:.16e},{m:.16e},{e:.16e},{:.16e},{:.16e},{:.16e}",
                st.label, st.final_fidelity, st.final_fid_eig, r.report.epsilon_max, r.report.deviation_norm, r.report.bound_rhs
            )
            .expect("write to string");
        }
    }
    let p = dir.join(format!("{}_sweep_{param}.csv", base.name));
    fs::write(&p, s)?;
    Ok(p)
}
