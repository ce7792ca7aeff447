//! Named scenarios reproducing the figures and supplementary checks.

use super::scenario::{GapSpec, NoiseSpec, PathSpec, ProtocolSpec, Scenario, StateSpec, SCHEMA_VERSION};

/// Pass times (us) used by the `T` sweeps of `fig4a`/`fig4c`: 60 points on [0.1, 6].
pub fn fig4_t_grid() -> Vec<f64> {
    (0..60).map(|k| 0.1 + 0.1 * k as f64).collect()
}

fn base(name: &str, description: &str, path: PathSpec, gap: GapSpec, protocol: ProtocolSpec) -> Scenario {
    Scenario {
        schema_version: SCHEMA_VERSION,
        name: name.into(),
        description: description.into(),
        path,
        gap,
        protocol,
        repeats: 1,
        compensate: false,
        initial_states: vec![StateSpec::X],
        noise: vec![],
        samples: 201,
        seed: 0,
        n_traj: 200,
        lambda_clip: None,
    }
}

fn xy(theta_g_pi: f64) -> PathSpec {
    PathSpec::XyGeodesic { theta_g_pi }
}

fn f_rot(mhz: f64) -> ProtocolSpec {
    ProtocolSpec::Continuous { pass_time_us: None, f_rot_mhz: Some(mhz), transfer_k: None, phase_rad: None }
}

fn transfer(k: u32) -> ProtocolSpec {
    ProtocolSpec::Continuous { pass_time_us: None, f_rot_mhz: None, transfer_k: Some(k), phase_rad: None }
}

fn pass_time(us: f64) -> ProtocolSpec {
    ProtocolSpec::Continuous { pass_time_us: Some(us), f_rot_mhz: None, transfer_k: None, phase_rad: None }
}

const FIG1_OMEGA0: f64 = 6.0;
const FIG1_F_ROT: f64 = 0.12;
const CROSSING_A: f64 = 2.34;
const OMEGA0: f64 = 5.0;

fn constant5() -> GapSpec {
    GapSpec::Constant { omega0_mhz: OMEGA0 }
}

fn modulated6() -> GapSpec {
    GapSpec::Modulated { omega0_mhz: FIG1_OMEGA0 }
}

fn white(rel_std: f64) -> NoiseSpec {
    NoiseSpec::WhiteGaussianAmplitude { rel_std, dwell_ns: 10.0 }
}

pub fn builtin_scenarios() -> Vec<Scenario> {
    let mut v = Vec::new();

    let constant = base(
        "fig1c",
        "constant gap 2pi x 6 MHz on the xy great circle, f_rot = 0.12 MHz: phases and epsilon",
        xy(2.0),
        GapSpec::Constant { omega0_mhz: FIG1_OMEGA0 },
        f_rot(FIG1_F_ROT),
    );
    v.push(constant.clone());
    v.push(Scenario {
        name: "fig1d".into(),
        description: "constant gap: adiabatic fidelity over time".into(),
        ..constant
    });

    let modulated =
        base("fig1e", "modulated gap Omega0 (2 + cos(Omega0 lambda T)): epsilon locks to lambda", xy(2.0), modulated6(), f_rot(FIG1_F_ROT));
    v.push(modulated.clone());
    v.push(Scenario { name: "fig1f".into(), description: "modulated gap: fidelity drops despite a large gap".into(), ..modulated.clone() });

    let crossing = base(
        "fig1g",
        "level-crossing gap Omega0' (1 + a cos(2 Omega0' T lambda)), a = 2.34",
        xy(2.0),
        GapSpec::Crossing { omega0_mhz: FIG1_OMEGA0, a: CROSSING_A },
        f_rot(FIG1_F_ROT),
    );
    v.push(crossing.clone());
    v.push(Scenario { name: "fig1h".into(), description: "level-crossing gap: high fidelity".into(), ..crossing });

    v.push(Scenario { name: "fig2a".into(), description: "nominal modulated gap".into(), ..modulated.clone() });
    for (name, factor) in [("fig2b", 1.1), ("fig2c", 0.8)] {
        v.push(Scenario {
            name: name.into(),
            description: format!("modulated gap scaled by {factor}"),
            gap: GapSpec::Biased { base: Box::new(modulated6()), factor },
            ..modulated.clone()
        });
    }

    v.push(Scenario {
        repeats: 6,
        initial_states: vec![StateSpec::X, StateSpec::Y],
        ..base(
            "fig3",
            "hybrid driving between continuous (r_jump = 0) and jumping (r_jump = 1), N = 5, 6 half circles",
            xy(1.0),
            constant5(),
            ProtocolSpec::Hybrid { n: 5, r_jump: 0.5 },
        )
    });

    let both = vec![StateSpec::X, StateSpec::Y];
    v.push(Scenario {
        initial_states: both.clone(),
        ..base("fig4a", "continuous half circle at the first perfect-transfer time", xy(1.0), constant5(), transfer(1))
    });
    v.push(Scenario {
        initial_states: both.clone(),
        compensate: true,
        ..base("fig4b", "jumping N = 5 on a half circle with phase compensation", xy(1.0), constant5(), ProtocolSpec::Jumping { n: 5 })
    });
    let cont3 = Scenario {
        initial_states: both.clone(),
        repeats: 6,
        ..base("fig4c", "continuous back-and-forth, 6 half circles, 3 us total", xy(1.0), constant5(), pass_time(0.5))
    };
    v.push(cont3.clone());
    let jump3 = Scenario {
        initial_states: both.clone(),
        repeats: 6,
        ..base("fig4d", "jumping N = 5 back-and-forth, 6 half circles, 3 us total", xy(1.0), constant5(), ProtocolSpec::Jumping { n: 5 })
    };
    v.push(jump3.clone());
    v.push(Scenario { name: "fig4e".into(), description: "time trace of continuous driving over 3 us".into(), samples: 601, ..cont3 });
    v.push(Scenario { name: "fig4f".into(), description: "time trace of jumping over 3 us".into(), samples: 601, ..jump3.clone() });

    v.push(Scenario {
        name: "fig5".into(),
        description: "jumping N = 5 over 3 us under white amplitude noise, 50% std, 10 ns dwell".into(),
        initial_states: vec![StateSpec::X],
        noise: vec![white(0.5)],
        seed: 5,
        ..jump3.clone()
    });

    v.push(Scenario {
        repeats: 2,
        initial_states: vec![StateSpec::MinusZ],
        ..base(
            "fig6",
            "Landau-Zener path, jumping N = 5 there and back: |-z> to |z> to |-z>",
            PathSpec::LandauZener { delta_mhz: OMEGA0, theta_g_pi: 1.0 },
            GapSpec::Intrinsic,
            ProtocolSpec::Jumping { n: 5 },
        )
    });

    v.push(Scenario {
        name: "s2".into(),
        description: "jumping N = 5 over 3 us under Ornstein-Uhlenbeck amplitude noise".into(),
        initial_states: vec![StateSpec::X],
        noise: vec![NoiseSpec::OuAmplitude { rel_std: 0.5, tau_c_ns: 100.0, dwell_ns: 10.0 }],
        seed: 7,
        ..jump3.clone()
    });
    v.push(Scenario {
        name: "s3".into(),
        description: "jumping on a half circle under white amplitude noise; sweep N".into(),
        repeats: 1,
        initial_states: vec![StateSpec::X],
        noise: vec![white(0.5)],
        seed: 11,
        ..jump3
    });

    v.push(Scenario {
        samples: 41,
        noise: vec![NoiseSpec::StaticGaussianDetuning { sigma_mhz: 0.13 }],
        n_traj: 10_000,
        seed: 1,
        ..base(
            "fid",
            "free induction decay of |x> under static Gaussian detuning",
            xy(1.0),
            constant5(),
            ProtocolSpec::Idle { duration_us: 2.0 },
        )
    });
    v
}

pub fn builtin(name: &str) -> Option<Scenario> {
    builtin_scenarios().into_iter().find(|s| s.name == name)
}
