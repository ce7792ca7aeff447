//! Scenario files: versioned JSON with unknown fields rejected.
//!
//! Angular frequencies are given in MHz and multiplied by 2 pi
//! (`omega0_mhz: 6` means `Omega0 = 2 pi x 6 MHz`); `f_rot_mhz` is the plain
//! sweep rate `d lambda/dt`. Times are in microseconds, angles in units of pi.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;

use crate::analysis::perfect_transfer_phase;
use crate::error::{Error, Result};
use crate::noise::{NoiseModel, DEFAULT_DWELL, OU_DEFAULT_REL_STD, OU_DEFAULT_TAU_C};
use crate::paths::AdiabaticPath;
use crate::qcore::{two_pi_mhz, PureState, C64};
use crate::schedules::{
    back_forth, compensate, compile_continuous, compile_hybrid, compile_idle, compile_jumping, DriveTimeline,
    GapSchedule, DEFAULT_LZ_CLIP,
};

pub const SCHEMA_VERSION: u32 = 1;

fn one() -> usize {
    1
}
fn default_samples() -> usize {
    201
}
fn default_n_traj() -> usize {
    200
}
fn default_dwell_ns() -> f64 {
    DEFAULT_DWELL * 1e9
}
fn default_ou_rel_std() -> f64 {
    OU_DEFAULT_REL_STD
}
fn default_tau_c_ns() -> f64 {
    OU_DEFAULT_TAU_C * 1e9
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub path: PathSpec,
    pub gap: GapSpec,
    pub protocol: ProtocolSpec,
    /// Half-path traversals, alternating direction.
    #[serde(default = "one")]
    pub repeats: usize,
    /// Append a phase-flipped hold cancelling the relative dynamic phase.
    #[serde(default)]
    pub compensate: bool,
    pub initial_states: Vec<StateSpec>,
    #[serde(default)]
    pub noise: Vec<NoiseSpec>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_n_traj")]
    pub n_traj: usize,
    /// Lambda clip for continuous Landau-Zener sweeps (default 0.02).
    #[serde(default)]
    pub lambda_clip: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PathSpec {
    XyGeodesic { theta_g_pi: f64 },
    Latitude { theta_pi: f64, theta_g_pi: f64 },
    LandauZener { delta_mhz: f64, theta_g_pi: f64 },
    Geodesic { initial: StateSpec, target: StateSpec },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GapSpec {
    Constant { omega0_mhz: f64 },
    Modulated { omega0_mhz: f64 },
    Crossing { omega0_mhz: f64, a: f64 },
    Biased { base: Box<GapSpec>, factor: f64 },
    /// The path's own spectrum (Landau-Zener).
    Intrinsic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProtocolSpec {
    /// One of the four fields fixes the pass time.
    Continuous {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pass_time_us: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        f_rot_mhz: Option<f64>,
        /// Pass time giving the k-th perfect-transfer phase (constant gap).
        #[serde(default, skip_serializing_if = "Option::is_none")]
        transfer_k: Option<u32>,
        /// Pass time giving relative phase `Omega0 T` (constant gap).
        #[serde(default, skip_serializing_if = "Option::is_none")]
        phase_rad: Option<f64>,
    },
    Jumping { n: usize },
    Hybrid { n: usize, r_jump: f64 },
    Idle { duration_us: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    X,
    MinusX,
    Y,
    MinusY,
    Z,
    MinusZ,
    Custom { re: Vec<f64>, im: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    StaticGaussianDetuning {
        sigma_mhz: f64,
    },
    StaticLorentzAmplitude {
        gamma: f64,
    },
    WhiteGaussianAmplitude {
        rel_std: f64,
        #[serde(default = "default_dwell_ns")]
        dwell_ns: f64,
    },
    OuAmplitude {
        #[serde(default = "default_ou_rel_std")]
        rel_std: f64,
        #[serde(default = "default_tau_c_ns")]
        tau_c_ns: f64,
        #[serde(default = "default_dwell_ns")]
        dwell_ns: f64,
    },
    BiasAmplitude {
        factor: f64,
    },
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Scenario(msg.into())
}

impl StateSpec {
    pub fn label(&self) -> String {
        match self {
            StateSpec::X => "x".into(),
            StateSpec::MinusX => "minus_x".into(),
            StateSpec::Y => "y".into(),
            StateSpec::MinusY => "minus_y".into(),
            StateSpec::Z => "z".into(),
            StateSpec::MinusZ => "minus_z".into(),
            StateSpec::Custom { .. } => "custom".into(),
        }
    }

    pub fn state(&self) -> Result<PureState> {
        Ok(match self {
            StateSpec::X => PureState::x(),
            StateSpec::MinusX => PureState::minus_x(),
            StateSpec::Y => PureState::y(),
            StateSpec::MinusY => PureState::minus_y(),
            StateSpec::Z => PureState::z(),
            StateSpec::MinusZ => PureState::minus_z(),
            StateSpec::Custom { re, im } => {
                if re.len() != im.len() {
                    return Err(bad("custom state needs re and im of equal length"));
                }
                PureState::new(re.iter().zip(im).map(|(&a, &b)| C64::new(a, b)).collect())?
            }
        })
    }
}

impl GapSpec {
    fn omega0(&self) -> Option<f64> {
        match self {
            GapSpec::Constant { omega0_mhz } | GapSpec::Modulated { omega0_mhz } | GapSpec::Crossing { omega0_mhz, .. } => {
                Some(two_pi_mhz(*omega0_mhz))
            }
            GapSpec::Biased { base, factor } => base.omega0().map(|w| w * factor),
            GapSpec::Intrinsic => None,
        }
    }

    fn schedule(&self, pass_time: f64) -> Result<GapSchedule> {
        match self {
            GapSpec::Constant { omega0_mhz } => GapSchedule::constant(two_pi_mhz(*omega0_mhz)),
            GapSpec::Modulated { omega0_mhz } => GapSchedule::modulated(two_pi_mhz(*omega0_mhz), pass_time),
            GapSpec::Crossing { omega0_mhz, a } => GapSchedule::crossing(two_pi_mhz(*omega0_mhz), *a, pass_time),
            GapSpec::Biased { base, factor } => GapSchedule::biased(base.schedule(pass_time)?, *factor),
            GapSpec::Intrinsic => Ok(GapSchedule::Zero),
        }
    }
}

impl NoiseSpec {
    pub fn model(&self) -> NoiseModel {
        match *self {
            NoiseSpec::StaticGaussianDetuning { sigma_mhz } => {
                NoiseModel::StaticGaussianDetuning { sigma: two_pi_mhz(sigma_mhz) }
            }
            NoiseSpec::StaticLorentzAmplitude { gamma } => NoiseModel::StaticLorentzAmplitude { gamma },
            NoiseSpec::WhiteGaussianAmplitude { rel_std, dwell_ns } => {
                NoiseModel::WhiteGaussianAmplitude { rel_std, dwell: dwell_ns * 1e-9 }
            }
            NoiseSpec::OuAmplitude { rel_std, tau_c_ns, dwell_ns } => NoiseModel::OuAmplitude {
                rel_std,
                tau_c: tau_c_ns * 1e-9,
                dwell: dwell_ns * 1e-9,
            },
            NoiseSpec::BiasAmplitude { factor } => NoiseModel::BiasAmplitude { factor },
        }
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario> {
        let sc: Scenario = serde_json::from_str(text).map_err(|e| bad(format!("cannot parse scenario: {e}")))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Hex SHA-256 of the compact JSON form.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(serde_json::to_string(self)?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(bad(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(bad("name must be non-empty and use [A-Za-z0-9_-]"));
        }
        if self.initial_states.is_empty() {
            return Err(bad("at least one initial state is required"));
        }
        if self.samples < 2 {
            return Err(bad("samples must be >= 2"));
        }
        if self.repeats == 0 {
            return Err(bad("repeats must be >= 1"));
        }
        if self.noise.iter().any(|n| !n.model().is_deterministic()) && self.n_traj < 2 {
            return Err(bad("n_traj must be >= 2 for stochastic noise"));
        }
        for n in &self.noise {
            n.model().validate().map_err(|e| bad(e.to_string()))?;
        }
        Ok(())
    }

    pub fn build_path(&self) -> Result<AdiabaticPath> {
        match &self.path {
            PathSpec::XyGeodesic { theta_g_pi } => AdiabaticPath::xy_geodesic(theta_g_pi * PI),
            PathSpec::Latitude { theta_pi, theta_g_pi } => AdiabaticPath::latitude(theta_pi * PI, theta_g_pi * PI),
            PathSpec::LandauZener { delta_mhz, theta_g_pi } => {
                AdiabaticPath::lz_path(two_pi_mhz(*delta_mhz), theta_g_pi * PI)
            }
            PathSpec::Geodesic { initial, target } => AdiabaticPath::general_geodesic(&initial.state()?, &target.state()?),
        }
    }

    fn omega0(&self) -> Result<f64> {
        self.gap.omega0().ok_or_else(|| bad("protocol needs a gap with omega0_mhz"))
    }

    fn pass_time(&self, path: &AdiabaticPath) -> Result<f64> {
        match &self.protocol {
            ProtocolSpec::Continuous { pass_time_us, f_rot_mhz, transfer_k, phase_rad } => {
                let set = [pass_time_us.is_some(), f_rot_mhz.is_some(), transfer_k.is_some(), phase_rad.is_some()];
                if set.iter().filter(|&&b| b).count() != 1 {
                    return Err(bad(
                        "continuous protocol needs exactly one of pass_time_us, f_rot_mhz, transfer_k, phase_rad",
                    ));
                }
                if let Some(t) = pass_time_us {
                    return Ok(t * 1e-6);
                }
                if let Some(f) = f_rot_mhz {
                    return Ok(1.0 / (f * 1e6));
                }
                let w = match self.gap {
                    GapSpec::Constant { .. } => self.omega0()?,
                    _ => return Err(bad("transfer_k and phase_rad need a constant gap")),
                };
                if let Some(k) = transfer_k {
                    return Ok(perfect_transfer_phase(path.theta_g(), *k)? / w);
                }
                Ok(phase_rad.expect("checked above") / w)
            }
            ProtocolSpec::Jumping { .. } | ProtocolSpec::Hybrid { .. } | ProtocolSpec::Idle { .. } => Ok(0.0),
        }
    }

    /// One forward traversal under the protocol.
    pub fn build_forward(&self) -> Result<DriveTimeline> {
        let path = self.build_path()?;
        let intrinsic = matches!(self.gap, GapSpec::Intrinsic);
        if intrinsic != matches!(self.path, PathSpec::LandauZener { .. }) {
            return Err(bad("the intrinsic gap goes with the landau_zener path and only with it"));
        }
        let forward = match &self.protocol {
            ProtocolSpec::Continuous { .. } => {
                let t = self.pass_time(&path)?;
                let clip = match (intrinsic, self.lambda_clip) {
                    (_, Some(c)) => Some(c),
                    (true, None) => Some(DEFAULT_LZ_CLIP),
                    (false, None) => None,
                };
                compile_continuous(&path, &self.gap.schedule(t)?, t, clip)?
            }
            ProtocolSpec::Jumping { n } => {
                let w = if intrinsic { 0.0 } else { self.omega0()? };
                compile_jumping(&path, w, *n)?
            }
            ProtocolSpec::Hybrid { n, r_jump } => compile_hybrid(&path, self.omega0()?, *n, *r_jump)?,
            ProtocolSpec::Idle { duration_us } => compile_idle(&path, duration_us * 1e-6)?,
        };
        Ok(forward)
    }

    /// Noise-free timeline: protocol, back-and-forth repetition, compensation.
    pub fn build_timeline(&self) -> Result<DriveTimeline> {
        let tl = back_forth(&self.build_forward()?, self.repeats)?;
        if self.compensate {
            compensate(&tl)
        } else {
            Ok(tl)
        }
    }

    /// Duration of one half-path traversal.
    pub fn pass_duration(&self) -> Result<f64> {
        Ok(self.build_forward()?.total_time())
    }
}

/// Parameters accepted by `sweep`.
pub const SWEEPABLE: [&str; 7] = ["T", "N", "r_jump", "rel_std", "a", "theta_g", "k"];

fn as_count(param: &str, v: f64) -> Result<u64> {
    if v >= 0.0 && v.fract() == 0.0 && v < 1e9 {
        Ok(v as u64)
    } else {
        Err(bad(format!("{param} must be a non-negative integer, got {v}")))
    }
}

fn set_theta_g(gap_path: &mut PathSpec, v: f64) -> Result<()> {
    match gap_path {
        PathSpec::XyGeodesic { theta_g_pi }
        | PathSpec::Latitude { theta_g_pi, .. }
        | PathSpec::LandauZener { theta_g_pi, .. } => {
            *theta_g_pi = v;
            Ok(())
        }
        PathSpec::Geodesic { .. } => Err(bad("theta_g of a geodesic is fixed by its endpoints")),
    }
}

/// Copy of `base` with `param` set to `value`. `T` is the pass time in
/// microseconds, `theta_g` is in units of pi.
pub fn with_parameter(base: &Scenario, param: &str, value: f64) -> Result<Scenario> {
    let mut sc = base.clone();
    let mismatch = || bad(format!("parameter {param} does not apply to scenario {}", base.name));
    match param {
        "T" => match &mut sc.protocol {
            ProtocolSpec::Continuous { pass_time_us, f_rot_mhz, transfer_k, phase_rad } => {
                *pass_time_us = Some(value);
                *f_rot_mhz = None;
                *transfer_k = None;
                *phase_rad = None;
            }
            ProtocolSpec::Idle { duration_us } => *duration_us = value,
            _ => return Err(mismatch()),
        },
        "N" => match &mut sc.protocol {
            ProtocolSpec::Jumping { n } | ProtocolSpec::Hybrid { n, .. } => *n = as_count(param, value)? as usize,
            _ => return Err(mismatch()),
        },
        "r_jump" => match &mut sc.protocol {
            ProtocolSpec::Hybrid { r_jump, .. } => *r_jump = value,
            _ => return Err(mismatch()),
        },
        "rel_std" => {
            let mut hit = false;
            for n in &mut sc.noise {
                if let NoiseSpec::WhiteGaussianAmplitude { rel_std, .. } | NoiseSpec::OuAmplitude { rel_std, .. } = n {
                    *rel_std = value;
                    hit = true;
                }
            }
            if !hit {
                return Err(mismatch());
            }
        }
        "a" => {
            fn set_a(g: &mut GapSpec, v: f64) -> bool {
                match g {
                    GapSpec::Crossing { a, .. } => {
                        *a = v;
                        true
                    }
                    GapSpec::Biased { base, .. } => set_a(base, v),
                    _ => false,
                }
            }
            if !set_a(&mut sc.gap, value) {
                return Err(mismatch());
            }
        }
        "theta_g" => set_theta_g(&mut sc.path, value)?,
        "k" => match &mut sc.protocol {
            ProtocolSpec::Continuous { pass_time_us, f_rot_mhz, transfer_k, phase_rad } => {
                *transfer_k = Some(as_count(param, value)? as u32);
                *pass_time_us = None;
                *f_rot_mhz = None;
                *phase_rad = None;
            }
            _ => return Err(mismatch()),
        },
        _ => {
            return Err(bad(format!("unknown sweep parameter {param}; sweepable: {}", SWEEPABLE.join(", "))));
        }
    }
    sc.validate()?;
    Ok(sc)
}
