//! Classical noise on the detuning and the drive amplitude, and seeded
//! Monte-Carlo ensembles.
//!
//! Randomness comes from ChaCha8 keyed by the trajectory seed, with one
//! stream per noise model. Trajectory `i` of an ensemble uses seed
//! `base_seed ^ i`, so results do not depend on thread count or order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy, Distribution, Normal};
use rayon::prelude::*;

use crate::analysis::{dynamic_phases, u_adia};
use crate::error::{Error, Result};
use crate::propagate::{evolve_state, propagate};
use crate::qcore::{fidelity, PureState};
use crate::schedules::{DriveTimeline, Segment};

/// Truncation of Lorentzian amplitude samples.
pub const LORENTZ_TRUNCATION: f64 = 0.5;
/// Stand-in Ornstein-Uhlenbeck parameters.
pub const OU_DEFAULT_REL_STD: f64 = 0.5;
pub const OU_DEFAULT_TAU_C: f64 = 100e-9;
pub const DEFAULT_DWELL: f64 = 10e-9;

#[derive(Clone, Debug, PartialEq)]
pub enum NoiseModel {
    /// Quasi-static detuning `delta_0 ~ N(0, sigma)`, rad/s.
    StaticGaussianDetuning { sigma: f64 },
    /// Quasi-static relative amplitude error with Lorentzian density of
    /// half width `gamma`, truncated at `|delta_1| <= LORENTZ_TRUNCATION`.
    StaticLorentzAmplitude { gamma: f64 },
    /// Independent `N(0, rel_std)` amplitude errors on each dwell slice.
    WhiteGaussianAmplitude { rel_std: f64, dwell: f64 },
    /// Stationary Ornstein-Uhlenbeck amplitude errors sampled per dwell slice.
    OuAmplitude { rel_std: f64, tau_c: f64, dwell: f64 },
    /// Deterministic `Omega -> factor * Omega`.
    BiasAmplitude { factor: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseKind {
    /// Additive, rad/s.
    Detuning,
    /// Relative, multiplies the drive by `1 + value`.
    Amplitude,
}

fn check(ok: bool, msg: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(msg))
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseModel::StaticGaussianDetuning { sigma } => check(sigma >= 0.0 && sigma.is_finite(), "sigma must be >= 0"),
            NoiseModel::StaticLorentzAmplitude { gamma } => check(gamma >= 0.0 && gamma.is_finite(), "gamma must be >= 0"),
            NoiseModel::WhiteGaussianAmplitude { rel_std, dwell } => {
                check(rel_std >= 0.0 && rel_std.is_finite(), "rel_std must be >= 0")?;
                check(dwell > 0.0 && dwell.is_finite(), "dwell must be > 0")
            }
            NoiseModel::OuAmplitude { rel_std, tau_c, dwell } => {
                check(rel_std >= 0.0 && rel_std.is_finite(), "rel_std must be >= 0")?;
                check(tau_c > 0.0 && tau_c.is_finite(), "tau_c must be > 0")?;
                check(dwell > 0.0 && dwell.is_finite(), "dwell must be > 0")
            }
            NoiseModel::BiasAmplitude { factor } => check(factor.is_finite(), "bias factor must be finite"),
        }
    }

    pub fn kind(&self) -> NoiseKind {
        match self {
            NoiseModel::StaticGaussianDetuning { .. } => NoiseKind::Detuning,
            _ => NoiseKind::Amplitude,
        }
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self, NoiseModel::BiasAmplitude { .. })
    }
}

/// Piecewise-constant noise values on `[0, duration]`.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseTrace {
    pub kind: NoiseKind,
    /// Slice length, `None` for a single static value.
    pub dwell: Option<f64>,
    pub values: Vec<f64>,
    pub duration: f64,
    pub seed: u64,
}

impl NoiseTrace {
    pub fn value_at(&self, t: f64) -> f64 {
        match self.dwell {
            None => self.values[0],
            Some(dw) => {
                let k = ((t / dw).floor().max(0.0) as usize).min(self.values.len() - 1);
                self.values[k]
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

fn normal(std: f64) -> Result<Normal<f64>> {
    Normal::new(0.0, std).map_err(|e| Error::invalid(format!("normal distribution: {e}")))
}

/// Samples a trace for `model` over `[0, duration]` from stream `stream` of `seed`.
pub fn sample_trace_stream(model: &NoiseModel, duration: f64, seed: u64, stream: u64) -> Result<NoiseTrace> {
    model.validate()?;
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::invalid(format!("trace duration must be positive, got {duration}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let slices = |dwell: f64| ((duration / dwell) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let (dwell, values) = match *model {
        NoiseModel::StaticGaussianDetuning { sigma } => (None, vec![normal(sigma)?.sample(&mut rng)]),
        NoiseModel::StaticLorentzAmplitude { gamma } => {
            let v = if gamma == 0.0 {
                0.0
            } else {
                let c = Cauchy::new(0.0, gamma).map_err(|e| Error::invalid(format!("cauchy: {e}")))?;
                loop {
                    let x: f64 = c.sample(&mut rng);
                    if x.abs() <= LORENTZ_TRUNCATION {
                        break x;
                    }
                }
            };
            (None, vec![v])
        }
        NoiseModel::WhiteGaussianAmplitude { rel_std, dwell } => {
            let d = normal(rel_std)?;
            (Some(dwell), (0..slices(dwell)).map(|_| d.sample(&mut rng)).collect())
        }
        NoiseModel::OuAmplitude { rel_std, tau_c, dwell } => {
            let unit = normal(1.0)?;
            let a = (-dwell / tau_c).exp();
            let b = (1.0 - a * a).sqrt() * rel_std;
            let n = slices(dwell);
            let mut x = rel_std * unit.sample(&mut rng);
            let mut v = Vec::with_capacity(n);
            for _ in 0..n {
                v.push(x);
                x = x * a + b * unit.sample(&mut rng);
            }
            (Some(dwell), v)
        }
        NoiseModel::BiasAmplitude { factor } => (None, vec![factor - 1.0]),
    };
    Ok(NoiseTrace { kind: model.kind(), dwell, values, duration, seed })
}

pub fn sample_trace(model: &NoiseModel, duration: f64, seed: u64) -> Result<NoiseTrace> {
    sample_trace_stream(model, duration, seed, 0)
}

fn apply_one(timeline: &DriveTimeline, trace: &NoiseTrace) -> Result<DriveTimeline> {
    let total = timeline.total_time();
    if trace.duration < total * (1.0 - 1e-12) {
        return Err(Error::invalid(format!(
            "noise trace covers {} s but the timeline lasts {} s",
            trace.duration, total
        )));
    }
    let mut out = Vec::with_capacity(timeline.segments().len());
    let mut t0 = 0.0;
    for seg in timeline.segments() {
        let t1 = t0 + seg.duration;
        if seg.is_marker() {
            out.push(seg.clone());
            continue;
        }
        let mut cuts = vec![t0];
        if let Some(dw) = trace.dwell {
            let mut k = (t0 / dw).floor() as usize + 1;
            while (k as f64) * dw < t1 {
                let c = k as f64 * dw;
                if c > t0 {
                    cuts.push(c);
                }
                k += 1;
            }
        }
        cuts.push(t1);
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let mut piece: Segment = seg.clone();
            piece.duration = b - a;
            piece.lambda_start = seg.lambda_at_fraction((a - t0) / seg.duration);
            piece.lambda_end = seg.lambda_at_fraction((b - t0) / seg.duration);
            let v = trace.value_at(0.5 * (a + b));
            match trace.kind {
                NoiseKind::Detuning => piece.detuning += v,
                NoiseKind::Amplitude => piece.amplitude_scale *= 1.0 + v,
            }
            out.push(piece);
        }
        t0 = t1;
    }
    DriveTimeline::new(timeline.path().clone(), out)
}

/// Adds `delta_0 sigma_z / 2` and scales the drive by `1 + delta_1`,
/// splitting segments at dwell boundaries.
pub fn apply_noise(
    timeline: &DriveTimeline,
    detuning: Option<&NoiseTrace>,
    amplitude: Option<&NoiseTrace>,
) -> Result<DriveTimeline> {
    let mut tl = timeline.clone();
    if let Some(d) = detuning {
        if d.kind != NoiseKind::Detuning {
            return Err(Error::invalid("detuning slot needs a detuning trace"));
        }
        tl = apply_one(&tl, d)?;
    }
    if let Some(a) = amplitude {
        if a.kind != NoiseKind::Amplitude {
            return Err(Error::invalid("amplitude slot needs an amplitude trace"));
        }
        tl = apply_one(&tl, a)?;
    }
    Ok(tl)
}

/// Applies every model in `models` with trajectory seed `seed`.
pub fn noisy_timeline(timeline: &DriveTimeline, models: &[NoiseModel], seed: u64) -> Result<DriveTimeline> {
    let total = timeline.total_time();
    let mut tl = timeline.clone();
    if total == 0.0 {
        return Ok(tl);
    }
    for (j, m) in models.iter().enumerate() {
        let trace = sample_trace_stream(m, total, seed, j as u64)?;
        // keeps the noise-free limit bit-identical to the nominal run
        if !trace.is_zero() {
            tl = apply_one(&tl, &trace)?;
        }
    }
    Ok(tl)
}

/// An ensemble: nominal timeline, initial state, noise and sampling.
#[derive(Clone, Debug)]
pub struct EnsembleSpec {
    pub timeline: DriveTimeline,
    pub initial: PureState,
    pub noise: Vec<NoiseModel>,
    /// Equally spaced sample times including both ends.
    pub n_samples: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_traj: usize,
}

impl EnsembleResult {
    pub fn final_mean(&self) -> f64 {
        *self.mean.last().expect("non-empty")
    }

    pub fn final_stderr(&self) -> f64 {
        *self.stderr.last().expect("non-empty")
    }
}

/// Ideal targets `U_adia(t) psi_0` of the noise-free timeline at `times`.
pub fn ideal_targets(timeline: &DriveTimeline, psi0: &PureState, times: &[f64]) -> Result<Vec<PureState>> {
    times
        .iter()
        .map(|&t| {
            let part = timeline.slice(0.0, t);
            let rec = dynamic_phases(&part)?;
            u_adia(&rec, rec.total_arc())?.apply(psi0)
        })
        .collect()
}

/// Mean and standard error of the fidelity to the ideal adiabatic target.
pub fn monte_carlo(spec: &EnsembleSpec, n_traj: usize, base_seed: u64) -> Result<EnsembleResult> {
    if n_traj < 2 {
        return Err(Error::invalid("n_traj must be >= 2"));
    }
    for m in &spec.noise {
        m.validate()?;
    }
    let total = spec.timeline.total_time();
    let n = if total == 0.0 { 1 } else { spec.n_samples };
    if n < 1 || (total > 0.0 && n < 2) {
        return Err(Error::invalid("n_samples must be >= 2"));
    }
    let times: Vec<f64> = (0..n)
        .map(|k| if k + 1 == n { total } else { total * k as f64 / (n - 1).max(1) as f64 })
        .collect();
    let targets = ideal_targets(&spec.timeline, &spec.initial, &times)?;

    let run = |i: usize| -> Result<Vec<f64>> {
        let seed = base_seed ^ i as u64;
        let wrap = |e: Error| Error::Trajectory { seed, source: Box::new(e) };
        let tl = noisy_timeline(&spec.timeline, &spec.noise, seed).map_err(wrap)?;
        let states: Vec<PureState> = if total == 0.0 {
            vec![propagate(&tl).and_then(|u| u.apply(&spec.initial)).map_err(wrap)?]
        } else {
            evolve_state(&spec.initial, &tl, n).map_err(wrap)?.samples.into_iter().map(|s| s.state).collect()
        };
        states.iter().zip(&targets).map(|(s, t)| fidelity(t, s)).collect()
    };
    let per_traj: Vec<Result<Vec<f64>>> = (0..n_traj).into_par_iter().map(run).collect();

    // Welford, in trajectory order
    let mut mean = vec![0.0; n];
    let mut m2 = vec![0.0; n];
    for (i, r) in per_traj.into_iter().enumerate() {
        let f = r?;
        let k = (i + 1) as f64;
        for j in 0..n {
            let delta = f[j] - mean[j];
            mean[j] += delta / k;
            m2[j] += delta * (f[j] - mean[j]);
        }
    }
    let nt = n_traj as f64;
    let stderr = m2.iter().map(|v| (v / (nt - 1.0)).sqrt() / nt.sqrt()).collect();
    Ok(EnsembleResult { times, mean, stderr, n_traj })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::AdiabaticPath;
    use crate::qcore::two_pi_mhz;
    use crate::schedules::{back_forth, compile_jumping};
    use std::f64::consts::PI;

    fn stats(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, var.sqrt())
    }

    #[test]
    fn static_gaussian_statistics() {
        let sigma = two_pi_mhz(0.13);
        let model = NoiseModel::StaticGaussianDetuning { sigma };
        let v: Vec<f64> = (0..10_000u64).map(|i| sample_trace(&model, 1e-6, 7 ^ i).unwrap().values[0]).collect();
        let (m, s) = stats(&v);
        assert!(m.abs() < 3.0 * sigma / 100.0);
        assert!((s / sigma - 1.0).abs() < 0.03);
    }

    #[test]
    fn white_noise_is_uncorrelated() {
        let model = NoiseModel::WhiteGaussianAmplitude { rel_std: 0.5, dwell: 10e-9 };
        let tr = sample_trace(&model, 10_000.0 * 10e-9, 3).unwrap();
        assert_eq!(tr.values.len(), 10_000);
        let (m, s) = stats(&tr.values);
        let c: f64 = tr.values.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum::<f64>()
            / ((tr.values.len() - 1) as f64 * s * s);
        assert!(c.abs() < 0.05, "{c}");
    }

    #[test]
    fn zero_strength_gives_zero_trace() {
        for model in [
            NoiseModel::StaticGaussianDetuning { sigma: 0.0 },
            NoiseModel::StaticLorentzAmplitude { gamma: 0.0 },
            NoiseModel::WhiteGaussianAmplitude { rel_std: 0.0, dwell: 1e-8 },
            NoiseModel::OuAmplitude { rel_std: 0.0, tau_c: 1e-7, dwell: 1e-8 },
        ] {
            assert!(sample_trace(&model, 1e-6, 1).unwrap().is_zero());
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(sample_trace(&NoiseModel::StaticGaussianDetuning { sigma: -1.0 }, 1e-6, 0).is_err());
        assert!(sample_trace(&NoiseModel::WhiteGaussianAmplitude { rel_std: 0.1, dwell: 0.0 }, 1e-6, 0).is_err());
        assert!(sample_trace(&NoiseModel::OuAmplitude { rel_std: 0.1, tau_c: 0.0, dwell: 1e-8 }, 1e-6, 0).is_err());
        assert!(sample_trace(&NoiseModel::BiasAmplitude { factor: 1.1 }, 0.0, 0).is_err());
    }

    #[test]
    fn traces_are_deterministic() {
        let model = NoiseModel::OuAmplitude { rel_std: 0.5, tau_c: 1e-7, dwell: 1e-8 };
        assert_eq!(sample_trace(&model, 3e-6, 11).unwrap(), sample_trace(&model, 3e-6, 11).unwrap());
        assert_ne!(sample_trace(&model, 3e-6, 11).unwrap(), sample_trace(&model, 3e-6, 12).unwrap());
    }

    #[test]
    fn ou_is_stationary() {
        for tau in [0.1e-6, 1e-6, 10e-6] {
            let model = NoiseModel::OuAmplitude { rel_std: 0.5, tau_c: tau, dwell: 10e-9 };
            // last slice of many independent traces; the start is stationary
            let all: Vec<f64> = (0..20_000u64)
                .map(|seed| *sample_trace(&model, 0.5e-6, seed).unwrap().values.last().unwrap())
                .collect();
            let (_, s) = stats(&all);
            assert!((s * s / 0.25 - 1.0).abs() < 0.05, "tau {tau}: var {}", s * s);
        }
    }

    #[test]
    fn lorentz_is_truncated() {
        let model = NoiseModel::StaticLorentzAmplitude { gamma: 0.2 };
        for seed in 0..2000 {
            assert!(sample_trace(&model, 1e-6, seed).unwrap().values[0].abs() <= LORENTZ_TRUNCATION);
        }
    }

    #[test]
    fn zero_traces_leave_operators_unchanged() {
        let path = AdiabaticPath::xy_geodesic(PI).unwrap();
        let tl = compile_jumping(&path, two_pi_mhz(5.0), 5).unwrap();
        let tr = sample_trace(&NoiseModel::WhiteGaussianAmplitude { rel_std: 0.0, dwell: 10e-9 }, 0.5e-6, 0).unwrap();
        let noisy = apply_noise(&tl, None, Some(&tr)).unwrap();
        assert!(noisy.segments().len() > tl.segments().len());
        assert!(propagate(&noisy).unwrap().distance(&propagate(&tl).unwrap()) < 1e-12);
        let short = sample_trace(&NoiseModel::BiasAmplitude { factor: 1.0 }, 0.1e-6, 0).unwrap();
        assert!(apply_noise(&tl, None, Some(&short)).is_err());
    }

    #[test]
    fn noise_free_ensemble_is_exact() {
        let path = AdiabaticPath::xy_geodesic(PI).unwrap();
        let tl = back_forth(&compile_jumping(&path, two_pi_mhz(5.0), 5).unwrap(), 2).unwrap();
        let spec = EnsembleSpec {
            timeline: tl.clone(),
            initial: PureState::x(),
            noise: vec![NoiseModel::WhiteGaussianAmplitude { rel_std: 0.0, dwell: 10e-9 }],
            n_samples: 5,
        };
        let r = monte_carlo(&spec, 50, 9).unwrap();
        assert!(r.stderr.iter().all(|&e| e == 0.0));
        let det = evolve_state(&PureState::x(), &tl, 5).unwrap();
        let targets = ideal_targets(&tl, &PureState::x(), &r.times).unwrap();
        for ((m, s), t) in r.mean.iter().zip(&det.samples).zip(&targets) {
            assert_eq!(*m, fidelity(t, &s.state).unwrap());
        }
        assert!((r.final_mean() - 1.0).abs() < 1e-9);
        assert!(monte_carlo(&spec, 1, 0).is_err());
    }

    #[test]
    fn ensemble_is_reproducible() {
        let path = AdiabaticPath::xy_geodesic(PI).unwrap();
        let tl = compile_jumping(&path, two_pi_mhz(5.0), 5).unwrap();
        let spec = EnsembleSpec {
            timeline: tl,
            initial: PureState::y(),
            noise: vec![NoiseModel::WhiteGaussianAmplitude { rel_std: 0.5, dwell: 10e-9 }],
            n_samples: 3,
        };
        assert_eq!(monte_carlo(&spec, 40, 5).unwrap(), monte_carlo(&spec, 40, 5).unwrap());
    }
}
