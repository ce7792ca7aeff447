//! Time-ordered integration of a [`DriveTimeline`].
//!
//! Held segments are a single exact exponential. Sweeps use exponential
//! midpoint substeps; the substep count is doubled until two successive
//! Richardson-extrapolated iterates agree to `tol` in norm.

use nalgebra::{DMatrix, Matrix2};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::paths::AdiabaticPath;
use crate::qcore::{
    bloch_projections, expm_eigen, fidelity, nearest_unitary, nearest_unitary2, PureState, Unitary, C64,
};
use crate::schedules::{DriveTimeline, Segment};

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_HALVINGS: usize = 20;
const SUBSTEPS_PER_CYCLE: f64 = 64.0;
const MAX_LAMBDA_PER_STEP: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropagateOptions {
    /// Upper bound on the initial substep length.
    pub dt_max: Option<f64>,
    pub tol: f64,
    pub max_halvings: usize,
}

impl Default for PropagateOptions {
    fn default() -> Self {
        PropagateOptions { dt_max: None, tol: DEFAULT_TOL, max_halvings: DEFAULT_MAX_HALVINGS }
    }
}

pub(crate) trait Op: Clone {
    fn eye(d: usize) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    /// `(4 fine - coarse) / 3`
    fn richardson(fine: &Self, coarse: &Self) -> Self;
    fn dist(&self, other: &Self) -> f64;
    fn polar(&self) -> Self;
}

impl Op for Matrix2<C64> {
    fn eye(_: usize) -> Self {
        Matrix2::identity()
    }
    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn richardson(fine: &Self, coarse: &Self) -> Self {
        (fine * C64::from(4.0) - coarse) / C64::from(3.0)
    }
    fn dist(&self, other: &Self) -> f64 {
        (self - other).norm()
    }
    fn polar(&self) -> Self {
        nearest_unitary2(self)
    }
}

impl Op for DMatrix<C64> {
    fn eye(d: usize) -> Self {
        DMatrix::identity(d, d)
    }
    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn richardson(fine: &Self, coarse: &Self) -> Self {
        (fine * C64::from(4.0) - coarse) / C64::from(3.0)
    }
    fn dist(&self, other: &Self) -> f64 {
        (self - other).norm()
    }
    fn polar(&self) -> Self {
        nearest_unitary(self)
    }
}

fn midpoint<M: Op>(
    d: usize,
    seg: &Segment,
    n: usize,
    step: &impl Fn(f64, f64) -> Result<M>,
) -> Result<M> {
    let dt = seg.duration / n as f64;
    let mut u = M::eye(d);
    for k in 0..n {
        let lambda = seg.lambda_at_fraction((k as f64 + 0.5) / n as f64);
        u = step(lambda, dt)?.mul(&u);
    }
    Ok(u)
}

fn initial_substeps(path: &AdiabaticPath, seg: &Segment, opts: &PropagateOptions) -> Result<usize> {
    let rate = seg.max_rate(path)?;
    let mut n = (SUBSTEPS_PER_CYCLE * rate * seg.duration / (2.0 * PI)).ceil();
    n = n.max(((seg.lambda_end - seg.lambda_start).abs() / MAX_LAMBDA_PER_STEP).ceil());
    if let Some(dt) = opts.dt_max {
        n = n.max((seg.duration / dt).ceil());
    }
    Ok(n.max(1.0) as usize)
}

fn segment_op<M: Op>(
    path: &AdiabaticPath,
    seg: &Segment,
    opts: &PropagateOptions,
    step: impl Fn(f64, f64) -> Result<M>,
) -> Result<M> {
    let d = path.dim();
    if seg.duration == 0.0 {
        return Ok(M::eye(d));
    }
    if seg.is_hold() {
        return step(seg.lambda_start, seg.duration);
    }
    let n = initial_substeps(path, seg, opts)?;
    let context = format!("sweep lambda {} -> {}", seg.lambda_start, seg.lambda_end);
    adaptive(n, opts, &context, |k| midpoint(d, seg, k, &step))
}

/// Doubles the substep count from `n` until successive Richardson
/// extrapolants of `product(n)` agree to `opts.tol`.
pub(crate) fn adaptive<M: Op>(
    mut n: usize,
    opts: &PropagateOptions,
    context: &str,
    product: impl Fn(usize) -> Result<M>,
) -> Result<M> {
    let mut coarse = product(n)?;
    n *= 2;
    let mut fine = product(n)?;
    let mut prev = M::richardson(&fine, &coarse);
    let mut change = f64::INFINITY;
    for _ in 0..opts.max_halvings {
        n *= 2;
        coarse = fine;
        fine = product(n)?;
        let cur = M::richardson(&fine, &coarse);
        change = cur.dist(&prev);
        if change < opts.tol {
            return Ok(cur.polar());
        }
        prev = cur;
    }
    Err(Error::NonConvergence { context: context.to_string(), last_change: change, substeps: n })
}

fn fixed_op<M: Op>(d: usize, seg: &Segment, dt: f64, step: impl Fn(f64, f64) -> Result<M>) -> Result<M> {
    if seg.duration == 0.0 {
        return Ok(M::eye(d));
    }
    if seg.is_hold() {
        return step(seg.lambda_start, seg.duration);
    }
    let n = (seg.duration / dt).ceil().max(1.0) as usize;
    midpoint(d, seg, n, &step)
}

fn step2<'a>(path: &'a AdiabaticPath, seg: &'a Segment) -> impl Fn(f64, f64) -> Result<Matrix2<C64>> + 'a {
    move |lambda, dt| Ok(seg.herm2(path, lambda)?.expm(dt))
}

fn stepd<'a>(path: &'a AdiabaticPath, seg: &'a Segment) -> impl Fn(f64, f64) -> Result<DMatrix<C64>> + 'a {
    move |lambda, dt| Ok(expm_eigen(seg.hamiltonian(path, lambda)?.matrix(), dt))
}

/// Propagator of the whole timeline with default options.
pub fn propagate(timeline: &DriveTimeline) -> Result<Unitary> {
    propagate_with(timeline, &PropagateOptions::default())
}

pub fn propagate_with(timeline: &DriveTimeline, opts: &PropagateOptions) -> Result<Unitary> {
    if let Some(dt) = opts.dt_max {
        if !(dt > 0.0) {
            return Err(Error::invalid(format!("dt_max must be positive, got {dt}")));
        }
    }
    let path = timeline.path();
    if path.dim() == 2 {
        let mut u = Matrix2::<C64>::identity();
        for seg in timeline.segments() {
            u = segment_op(path, seg, opts, step2(path, seg))? * u;
        }
        Ok(Unitary::from_matrix2(&u))
    } else {
        let mut u = DMatrix::<C64>::identity(path.dim(), path.dim());
        for seg in timeline.segments() {
            u = segment_op(path, seg, opts, stepd(path, seg))? * u;
        }
        Ok(Unitary::from_matrix_unchecked(u))
    }
}

/// Plain fixed-step exponential midpoint rule, no extrapolation or halving.
pub fn propagate_fixed(timeline: &DriveTimeline, dt: f64) -> Result<Unitary> {
    if !(dt > 0.0) {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    let path = timeline.path();
    let d = path.dim();
    if d == 2 {
        let mut u = Matrix2::<C64>::identity();
        for seg in timeline.segments() {
            u = fixed_op(d, seg, dt, step2(path, seg))? * u;
        }
        Ok(Unitary::from_matrix2(&u))
    } else {
        let mut u = DMatrix::<C64>::identity(d, d);
        for seg in timeline.segments() {
            u = fixed_op(d, seg, dt, stepd(path, seg))? * u;
        }
        Ok(Unitary::from_matrix_unchecked(u))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub lambda: f64,
    pub state: PureState,
    /// `(p_x, p_y, p_z)`, two-level systems only.
    pub projections: Option<(f64, f64, f64)>,
    /// Fidelity to `psi_1(lambda(t))`.
    pub fid_eig: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn last(&self) -> &TrajectorySample {
        self.samples.last().expect("trajectory is never empty")
    }
}

fn sample(path: &AdiabaticPath, t: f64, lambda: f64, state: PureState) -> Result<TrajectorySample> {
    let projections = if state.dim() == 2 { Some(bloch_projections(&state)?) } else { None };
    let fid_eig = fidelity(&state, &path.eigenstate(0, lambda)?)?;
    Ok(TrajectorySample { t, lambda, state, projections, fid_eig })
}

/// Evolves `psi0` and records `n_samples` equally spaced samples including
/// both endpoints. A zero-duration timeline gives a single sample.
pub fn evolve_state(psi0: &PureState, timeline: &DriveTimeline, n_samples: usize) -> Result<Trajectory> {
    evolve_state_with(psi0, timeline, n_samples, &PropagateOptions::default())
}

pub fn evolve_state_with(
    psi0: &PureState,
    timeline: &DriveTimeline,
    n_samples: usize,
    opts: &PropagateOptions,
) -> Result<Trajectory> {
    let path = timeline.path();
    if psi0.dim() != path.dim() {
        return Err(Error::DimensionMismatch { expected: path.dim(), got: psi0.dim() });
    }
    let total = timeline.total_time();
    if total == 0.0 {
        let state = propagate_with(timeline, opts)?.apply(psi0)?;
        return Ok(Trajectory { samples: vec![sample(path, 0.0, timeline.lambda_at(0.0), state)?] });
    }
    if n_samples < 2 {
        return Err(Error::invalid("n_samples must be >= 2"));
    }
    let mut samples = Vec::with_capacity(n_samples);
    let mut state = propagate_with(&timeline.slice(0.0, 0.0), opts)?.apply(psi0)?;
    samples.push(sample(path, 0.0, timeline.lambda_at(0.0), state.clone())?);
    let mut t_prev = 0.0;
    for k in 1..n_samples {
        let t = if k == n_samples - 1 { total } else { total * k as f64 / (n_samples - 1) as f64 };
        state = propagate_with(&timeline.slice(t_prev, t), opts)?.apply(&state)?;
        samples.push(sample(path, t, timeline.lambda_at(t), state.clone())?);
        t_prev = t;
    }
    Ok(Trajectory { samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{two_pi_mhz, HermitianOp};
    use crate::schedules::{compile_continuous, compile_jumping, GapSchedule};

    #[test]
    fn zero_hamiltonian_is_identity() {
        let path = AdiabaticPath::xy_geodesic(PI).unwrap();
        let tl = compile_continuous(&path, &GapSchedule::Zero, 1e-6, None).unwrap();
        let u = propagate(&tl).unwrap();
        assert!(u.deviation_from_identity() < 1e-12);
    }

    #[test]
    fn single_jump_is_pi_rotation() {
        let path = AdiabaticPath::xy_geodesic(PI).unwrap();
        let w = two_pi_mhz(5.0);
        let u = propagate(&compile_jumping(&path, w, 1).unwrap()).unwrap();
        // eigenaxis at lambda = 0.5 is +y, so the pulse is exp(-i pi sigma_y / 2) = -i sigma_y
        let expected = HermitianOp::sigma_y().matrix() * C64::new(0.0, -1.0);
        assert!((u.matrix() - expected).norm() < 1e-12);
        assert!(u.unitarity_deviation() < 1e-12);
        let out = u.apply(&PureState::x()).unwrap();
        assert!(fidelity(&out, &PureState::minus_x()).unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn zero_duration_single_sample() {
        let path = AdiabaticPath::xy_geodesic(PI).unwrap();
        let tl = DriveTimeline::new(path.clone(), vec![Segment::marker(0.0, 0.0)]).unwrap();
        let psi = path.eigenstate(0, 0.0).unwrap();
        let tr = evolve_state(&psi, &tl, 10).unwrap();
        assert_eq!(tr.samples.len(), 1);
        assert_eq!(tr.samples[0].state, psi);
    }

    #[test]
    fn fixed_step_converges_to_adaptive() {
        let path = AdiabaticPath::latitude(1.0, PI).unwrap();
        let tl = compile_continuous(&path, &GapSchedule::constant(two_pi_mhz(2.0)).unwrap(), 1e-6, None).unwrap();
        let exact = propagate(&tl).unwrap();
        let e1 = propagate_fixed(&tl, 1e-8).unwrap().distance(&exact);
        let e2 = propagate_fixed(&tl, 0.5e-8).unwrap().distance(&exact);
        assert!(e1 / e2 > 3.0, "{e1} {e2}");
    }

    #[test]
    fn non_convergence_is_reported() {
        let path = AdiabaticPath::xy_geodesic(PI).unwrap();
        let tl = compile_continuous(&path, &GapSchedule::constant(two_pi_mhz(6.0)).unwrap(), 1e-6, None).unwrap();
        let opts = PropagateOptions { tol: 1e-30, max_halvings: 2, ..Default::default() };
        let err = propagate_with(&tl, &opts).unwrap_err();
        assert!(err.is_numerical());
    }
}
