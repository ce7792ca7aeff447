//! Gap schedules and the protocol compiler turning (path, gap, protocol) into
//! an executable [`DriveTimeline`].
//!
//! Every segment either holds lambda fixed (a pulse), sweeps lambda linearly
//! in time, or is a zero-duration marker recording an instantaneous lambda
//! jump across a zero-gap interval.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::paths::{AdiabaticPath, EnergyMode};
use crate::qcore::{Herm2, HermitianOp};

/// Default lambda clip for continuous Landau-Zener sweeps.
pub const DEFAULT_LZ_CLIP: f64 = 0.02;

/// Energy gap `Omega(lambda)` in rad/s.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GapSchedule {
    Zero,
    Constant { omega0: f64 },
    /// `Omega0 (2 + cos(Omega0 lambda T))`.
    Modulated { omega0: f64, total_time: f64 },
    /// `Omega0' (1 + a cos(2 Omega0' T lambda))`, `Omega0' = sqrt(2/(2+a^2)) Omega0`.
    Crossing { omega0: f64, a: f64, total_time: f64 },
    Biased { base: Box<GapSchedule>, factor: f64 },
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

impl GapSchedule {
    pub fn constant(omega0: f64) -> Result<Self> {
        Ok(GapSchedule::Constant { omega0: positive("Omega0", omega0)? })
    }

    pub fn modulated(omega0: f64, total_time: f64) -> Result<Self> {
        Ok(GapSchedule::Modulated {
            omega0: positive("Omega0", omega0)?,
            total_time: positive("T", total_time)?,
        })
    }

    pub fn crossing(omega0: f64, a: f64, total_time: f64) -> Result<Self> {
        if !a.is_finite() {
            return Err(Error::invalid("crossing amplitude a must be finite"));
        }
        Ok(GapSchedule::Crossing {
            omega0: positive("Omega0", omega0)?,
            a,
            total_time: positive("T", total_time)?,
        })
    }

    pub fn biased(base: GapSchedule, factor: f64) -> Result<Self> {
        if !factor.is_finite() {
            return Err(Error::invalid("bias factor must be finite"));
        }
        Ok(GapSchedule::Biased { base: Box::new(base), factor })
    }

    /// Scaled `Omega0'` of the crossing family.
    pub fn crossing_omega_prime(omega0: f64, a: f64) -> f64 {
        (2.0 / (2.0 + a * a)).sqrt() * omega0
    }

    pub fn at(&self, lambda: f64) -> f64 {
        match self {
            GapSchedule::Zero => 0.0,
            GapSchedule::Constant { omega0 } => *omega0,
            GapSchedule::Modulated { omega0, total_time } => {
                omega0 * (2.0 + (omega0 * lambda * total_time).cos())
            }
            GapSchedule::Crossing { omega0, a, total_time } => {
                let w = Self::crossing_omega_prime(*omega0, *a);
                w * (1.0 + a * (2.0 * w * total_time * lambda).cos())
            }
            GapSchedule::Biased { base, factor } => factor * base.at(lambda),
        }
    }

    fn antiderivative(&self, lambda: f64) -> f64 {
        match self {
            GapSchedule::Zero => 0.0,
            GapSchedule::Constant { omega0 } => omega0 * lambda,
            GapSchedule::Modulated { omega0, total_time } => {
                let k = omega0 * total_time;
                omega0 * (2.0 * lambda + (k * lambda).sin() / k)
            }
            GapSchedule::Crossing { omega0, a, total_time } => {
                let w = Self::crossing_omega_prime(*omega0, *a);
                let k = 2.0 * w * total_time;
                w * (lambda + a * (k * lambda).sin() / k)
            }
            GapSchedule::Biased { base, factor } => factor * base.antiderivative(lambda),
        }
    }

    /// `int_a^b Omega(lambda) dlambda`, closed form.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.antiderivative(b) - self.antiderivative(a)
    }

    /// Upper bound on `|Omega|`.
    pub fn max_abs(&self) -> f64 {
        match self {
            GapSchedule::Zero => 0.0,
            GapSchedule::Constant { omega0 } => omega0.abs(),
            GapSchedule::Modulated { omega0, .. } => 3.0 * omega0.abs(),
            GapSchedule::Crossing { omega0, a, .. } => {
                Self::crossing_omega_prime(*omega0, *a) * (1.0 + a.abs())
            }
            GapSchedule::Biased { base, factor } => factor.abs() * base.max_abs(),
        }
    }

    /// Crossing gaps change sign iff `|a| > 1`.
    pub fn has_zero_crossings(&self) -> bool {
        match self {
            GapSchedule::Crossing { a, .. } => a.abs() > 1.0,
            GapSchedule::Biased { base, factor } => *factor != 0.0 && base.has_zero_crossings(),
            _ => false,
        }
    }
}

/// Where a segment's gap comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum Drive {
    Gap(GapSchedule),
    /// The path's own spectrum (Landau-Zener).
    Intrinsic,
}

/// One piece of a compiled drive.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub duration: f64,
    pub lambda_start: f64,
    pub lambda_end: f64,
    pub drive: Drive,
    /// Microwave pi phase shift, `H -> -H`.
    pub phase_flip: bool,
    /// Relative amplitude factor `1 + delta_1`.
    pub amplitude_scale: f64,
    /// Additive detuning `delta_0` in rad/s, entering as `delta_0 sigma_z / 2`.
    pub detuning: f64,
}

impl Segment {
    pub fn new(duration: f64, lambda_start: f64, lambda_end: f64, drive: Drive) -> Self {
        Segment {
            duration,
            lambda_start,
            lambda_end,
            drive,
            phase_flip: false,
            amplitude_scale: 1.0,
            detuning: 0.0,
        }
    }

    /// Zero-duration record of a lambda jump across a zero-gap interval.
    pub fn marker(lambda_start: f64, lambda_end: f64) -> Self {
        Self::new(0.0, lambda_start, lambda_end, Drive::Gap(GapSchedule::Zero))
    }

    pub fn is_marker(&self) -> bool {
        self.duration == 0.0
    }

    pub fn is_hold(&self) -> bool {
        self.lambda_start == self.lambda_end
    }

    pub fn lambda_at_fraction(&self, f: f64) -> f64 {
        self.lambda_start + (self.lambda_end - self.lambda_start) * f
    }

    fn sign(&self) -> f64 {
        if self.phase_flip {
            -1.0
        } else {
            1.0
        }
    }

    /// Nominal gap at `lambda` (no amplitude scale, no flip).
    pub fn nominal_gap(&self, path: &AdiabaticPath, lambda: f64) -> Result<f64> {
        match &self.drive {
            Drive::Gap(g) => Ok(g.at(lambda)),
            Drive::Intrinsic => path.intrinsic_gap(lambda),
        }
    }

    /// Signed, scaled gap `E_1 - E_2` used for dynamic phases.
    pub fn effective_gap(&self, path: &AdiabaticPath, lambda: f64) -> Result<f64> {
        Ok(self.sign() * self.amplitude_scale * self.nominal_gap(path, lambda)?)
    }

    fn nominal_integral(&self, path: &AdiabaticPath, a: f64, b: f64) -> Result<f64> {
        match &self.drive {
            Drive::Gap(g) => Ok(g.integral(a, b)),
            Drive::Intrinsic => path.intrinsic_gap_integral(a, b),
        }
    }

    /// `int (E_1 - E_2) dt` over the first fraction `f` of the segment.
    pub fn phase_difference_until(&self, path: &AdiabaticPath, f: f64) -> Result<f64> {
        if self.duration == 0.0 || f == 0.0 {
            return Ok(0.0);
        }
        let scale = self.sign() * self.amplitude_scale;
        if self.is_hold() {
            return Ok(scale * self.nominal_gap(path, self.lambda_start)? * self.duration * f);
        }
        let dl = self.lambda_end - self.lambda_start;
        let integral = self.nominal_integral(path, self.lambda_start, self.lambda_at_fraction(f))?;
        Ok(scale * self.duration / dl * integral)
    }

    /// Accumulated `phi_1 - phi_2` over the whole segment.
    pub fn phase_difference(&self, path: &AdiabaticPath) -> Result<f64> {
        self.phase_difference_until(path, 1.0)
    }

    /// Upper bound on the spectral radius of the segment Hamiltonian.
    pub fn max_rate(&self, path: &AdiabaticPath) -> Result<f64> {
        let base = match &self.drive {
            Drive::Gap(g) => g.max_abs(),
            Drive::Intrinsic => {
                let lo = self.lambda_start.min(self.lambda_end);
                let hi = self.lambda_start.max(self.lambda_end);
                let mut m: f64 = 0.0;
                for k in 0..=64 {
                    m = m.max(path.intrinsic_gap(lo + (hi - lo) * k as f64 / 64.0)?.abs());
                }
                m
            }
        };
        Ok(base * self.amplitude_scale.abs().max(1.0) + self.detuning.abs())
    }

    pub(crate) fn herm2(&self, path: &AdiabaticPath, lambda: f64) -> Result<Herm2> {
        let gap = match &self.drive {
            Drive::Gap(g) => g.at(lambda),
            Drive::Intrinsic => 0.0,
        };
        let t = path.two_level_terms(lambda, gap)?;
        let a = self.amplitude_scale;
        // an external gap scales the whole Hamiltonian; the LZ bias is the detuning law
        let bias = match self.drive {
            Drive::Gap(_) => a * t.bias,
            Drive::Intrinsic => t.bias,
        };
        let h = Herm2 {
            a0: 0.0,
            v: [
                a * t.drive[0] / 2.0,
                a * t.drive[1] / 2.0,
                (a * t.drive[2] + bias + self.detuning) / 2.0,
            ],
        };
        Ok(h.scale(self.sign()))
    }

    /// Segment Hamiltonian at `lambda`.
    pub fn hamiltonian(&self, path: &AdiabaticPath, lambda: f64) -> Result<HermitianOp> {
        if path.dim() == 2 {
            return Ok(HermitianOp::from_matrix_unchecked(self.herm2(path, lambda)?.to_matrix()));
        }
        if self.detuning != 0.0 {
            return Err(Error::invalid("detuning noise is defined for two-level paths only"));
        }
        let gap = self.nominal_gap(path, lambda)?;
        Ok(path.hamiltonian(lambda, gap)?.scale(self.sign() * self.amplitude_scale))
    }
}

/// JSON record of one segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub duration_s: f64,
    pub lambda_start: f64,
    pub lambda_end: f64,
    pub gap_rad_s: f64,
    pub phase_flip: bool,
}

/// Compiled sequence of drive segments along one path.
#[derive(Clone, Debug, PartialEq)]
pub struct DriveTimeline {
    path: AdiabaticPath,
    segments: Vec<Segment>,
    lambda_clip: Option<f64>,
}

impl DriveTimeline {
    pub fn new(path: AdiabaticPath, segments: Vec<Segment>) -> Result<Self> {
        for s in &segments {
            if !(s.duration >= 0.0 && s.duration.is_finite()) {
                return Err(Error::invalid(format!("segment duration must be >= 0, got {}", s.duration)));
            }
            if !(s.lambda_start.is_finite() && s.lambda_end.is_finite()) {
                return Err(Error::invalid("segment lambda must be finite"));
            }
        }
        Ok(DriveTimeline { path, segments, lambda_clip: None })
    }

    pub fn path(&self) -> &AdiabaticPath {
        &self.path
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn lambda_clip(&self) -> Option<f64> {
        self.lambda_clip
    }

    pub fn total_time(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn lambda_start(&self) -> f64 {
        self.segments.first().map_or(0.0, |s| s.lambda_start)
    }

    pub fn lambda_end(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.lambda_end)
    }

    pub(crate) fn with_segments(&self, segments: Vec<Segment>) -> DriveTimeline {
        DriveTimeline { path: self.path.clone(), segments, lambda_clip: self.lambda_clip }
    }

    /// Right-continuous `lambda(t)`: at a jump instant the value after the jump.
    pub fn lambda_at(&self, t: f64) -> f64 {
        let mut t0 = 0.0;
        for s in &self.segments {
            if s.duration > 0.0 && t >= t0 && t < t0 + s.duration {
                return s.lambda_at_fraction((t - t0) / s.duration);
            }
            t0 += s.duration;
        }
        self.lambda_end()
    }

    /// Part of the timeline inside `[t0, t1]`. Markers at `t0` are kept only
    /// when `t0 == 0`.
    pub fn slice(&self, t0: f64, t1: f64) -> DriveTimeline {
        let mut out = Vec::new();
        let mut start = 0.0;
        for s in &self.segments {
            let end = start + s.duration;
            if s.duration == 0.0 {
                if (start > t0 || (t0 == 0.0 && start == 0.0)) && start <= t1 {
                    out.push(s.clone());
                }
            } else if end > t0 && start < t1 {
                let a = t0.max(start);
                let b = t1.min(end);
                if b > a {
                    let mut piece = s.clone();
                    piece.duration = b - a;
                    piece.lambda_start = s.lambda_at_fraction((a - start) / s.duration);
                    piece.lambda_end = s.lambda_at_fraction((b - start) / s.duration);
                    out.push(piece);
                }
            }
            start = end;
        }
        self.with_segments(out)
    }

    /// Same segments traversed backwards (order and lambda direction reversed).
    pub fn reversed(&self) -> DriveTimeline {
        let segs = self
            .segments
            .iter()
            .rev()
            .map(|s| {
                let mut r = s.clone();
                std::mem::swap(&mut r.lambda_start, &mut r.lambda_end);
                r
            })
            .collect();
        self.with_segments(segs)
    }

    pub fn concat(&self, other: &DriveTimeline) -> Result<DriveTimeline> {
        if self.path != other.path {
            return Err(Error::invalid("cannot concatenate timelines on different paths"));
        }
        let mut segs = self.segments.clone();
        segs.extend(other.segments.iter().cloned());
        Ok(self.with_segments(segs))
    }

    /// Total `phi_1 - phi_2` accumulated by the timeline.
    pub fn total_phase_difference(&self) -> Result<f64> {
        self.segments.iter().map(|s| s.phase_difference(&self.path)).sum()
    }

    pub fn records(&self) -> Result<Vec<SegmentRecord>> {
        self.segments
            .iter()
            .map(|s| {
                let mid = s.lambda_at_fraction(0.5);
                let gap = if s.is_marker() { 0.0 } else { s.amplitude_scale * s.nominal_gap(&self.path, mid)? };
                Ok(SegmentRecord {
                    duration_s: s.duration,
                    lambda_start: s.lambda_start,
                    lambda_end: s.lambda_end,
                    gap_rad_s: gap,
                    phase_flip: s.phase_flip,
                })
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.records()?)?)
    }
}

/// Equally spaced jumping points `lambda_j = (2j - 1) / (2N)`.
pub fn jumping_points(n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("number of jumping points must be >= 1"));
    }
    Ok((1..=n).map(|j| (2 * j - 1) as f64 / (2 * n) as f64).collect())
}

fn drive_for(path: &AdiabaticPath, gap: GapSchedule) -> Drive {
    match path.energy_mode() {
        EnergyMode::ExternalGap => Drive::Gap(gap),
        EnergyMode::Intrinsic => Drive::Intrinsic,
    }
}

/// Rectangular pi pulses at the jumping points with no delay between them.
/// External-gap paths use `tau = pi / Omega0`; intrinsic paths
/// `tau_j = pi / gap(lambda_j)` and ignore `omega0`.
pub fn compile_jumping(path: &AdiabaticPath, omega0: f64, n: usize) -> Result<DriveTimeline> {
    let points = jumping_points(n)?;
    let external = path.energy_mode() == EnergyMode::ExternalGap;
    if external {
        positive("Omega0", omega0)?;
    }
    let mut segs = Vec::with_capacity(2 * n + 1);
    let mut prev = 0.0;
    for &l in &points {
        path.check_regular(l)?;
        segs.push(Segment::marker(prev, l));
        let (tau, drive) = if external {
            (PI / omega0, Drive::Gap(GapSchedule::Constant { omega0 }))
        } else {
            (PI / path.intrinsic_gap(l)?, Drive::Intrinsic)
        };
        segs.push(Segment::new(tau, l, l, drive));
        prev = l;
    }
    segs.push(Segment::marker(prev, 1.0));
    DriveTimeline::new(path.clone(), segs)
}

/// One continuous sweep `lambda(t) = t/T` (over the clipped range if `clip` is set).
pub fn compile_continuous(
    path: &AdiabaticPath,
    gap: &GapSchedule,
    total_time: f64,
    clip: Option<f64>,
) -> Result<DriveTimeline> {
    positive("T", total_time)?;
    let c = clip.unwrap_or(0.0);
    if !(0.0..0.5).contains(&c) {
        return Err(Error::invalid(format!("lambda clip must be in [0, 0.5), got {c}")));
    }
    let (a, b) = (c, 1.0 - c);
    path.check_regular(a)?;
    path.check_regular(b)?;
    let mut segs = Vec::new();
    if c > 0.0 {
        segs.push(Segment::marker(0.0, a));
    }
    segs.push(Segment::new(total_time, a, b, drive_for(path, gap.clone())));
    if c > 0.0 {
        segs.push(Segment::marker(b, 1.0));
    }
    let mut tl = DriveTimeline::new(path.clone(), segs)?;
    tl.lambda_clip = clip;
    Ok(tl)
}

/// Interpolation between continuous driving (`r_jump = 0`) and jumping
/// (`r_jump = 1`) at fixed time `N pi / Omega0` per half path: each cell
/// around `lambda_j` has a driven window of width `(1 - r_jump)/N` swept in
/// `pi / Omega0`, the rest of the cell has zero gap and is crossed instantly.
pub fn compile_hybrid(path: &AdiabaticPath, omega0: f64, n: usize, r_jump: f64) -> Result<DriveTimeline> {
    if !(0.0..=1.0).contains(&r_jump) {
        return Err(Error::invalid(format!("r_jump must be in [0, 1], got {r_jump}")));
    }
    if path.energy_mode() != EnergyMode::ExternalGap {
        return Err(Error::invalid("hybrid protocol needs an external-gap path"));
    }
    let points = jumping_points(n)?;
    positive("Omega0", omega0)?;
    if r_jump == 0.0 {
        return compile_continuous(path, &GapSchedule::Constant { omega0 }, n as f64 * PI / omega0, None);
    }
    if r_jump == 1.0 {
        return compile_jumping(path, omega0, n);
    }
    let half = (1.0 - r_jump) / n as f64 / 2.0;
    let mut segs = Vec::with_capacity(2 * n + 1);
    let mut prev = 0.0;
    for &l in &points {
        segs.push(Segment::marker(prev, l - half));
        segs.push(Segment::new(
            PI / omega0,
            l - half,
            l + half,
            Drive::Gap(GapSchedule::Constant { omega0 }),
        ));
        prev = l + half;
    }
    segs.push(Segment::marker(prev, 1.0));
    DriveTimeline::new(path.clone(), segs)
}

/// Free evolution: zero drive held at `lambda = 0` for `duration`.
pub fn compile_idle(path: &AdiabaticPath, duration: f64) -> Result<DriveTimeline> {
    positive("idle duration", duration)?;
    if path.energy_mode() != EnergyMode::ExternalGap {
        return Err(Error::invalid("idle protocol needs an external-gap path"));
    }
    DriveTimeline::new(path.clone(), vec![Segment::new(duration, 0.0, 0.0, Drive::Gap(GapSchedule::Zero))])
}

/// Forward/backward repetition: `repeats` half-path traversals alternating
/// direction, starting with `forward`.
pub fn back_forth(forward: &DriveTimeline, repeats: usize) -> Result<DriveTimeline> {
    if repeats == 0 {
        return Err(Error::invalid("repeats must be >= 1"));
    }
    let backward = forward.reversed();
    let mut segs = Vec::with_capacity(forward.segments.len() * repeats);
    for k in 0..repeats {
        let pass = if k % 2 == 0 { forward } else { &backward };
        segs.extend(pass.segments.iter().cloned());
    }
    Ok(forward.with_segments(segs))
}

/// `(duration, -H(lambda))` at a fixed path point.
pub fn compensation_segment(path: &AdiabaticPath, lambda: f64, duration: f64, omega0: f64) -> Result<Segment> {
    if !(duration >= 0.0) {
        return Err(Error::invalid("compensation duration must be >= 0"));
    }
    path.check_regular(lambda)?;
    let mut s = Segment::new(duration, lambda, lambda, drive_for(path, GapSchedule::Constant { omega0 }));
    s.phase_flip = true;
    Ok(s)
}

/// Appends a phase-flipped hold at the final path point lasting as long as
/// the evolution, with the gap chosen so the relative dynamic phase cancels.
pub fn compensate(timeline: &DriveTimeline) -> Result<DriveTimeline> {
    let duration = timeline.total_time();
    if duration == 0.0 {
        return Ok(timeline.clone());
    }
    if timeline.path.energy_mode() != EnergyMode::ExternalGap {
        return Err(Error::invalid("phase compensation needs an external-gap path"));
    }
    let phase = timeline.total_phase_difference()?;
    let seg = compensation_segment(&timeline.path, timeline.lambda_end(), duration, phase / duration)?;
    let mut segs = timeline.segments.clone();
    segs.push(seg);
    Ok(timeline.with_segments(segs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::two_pi_mhz;

    fn omega5() -> f64 {
        two_pi_mhz(5.0)
    }

    #[test]
    fn jumping_point_examples() {
        assert_eq!(jumping_points(1).unwrap(), vec![0.5]);
        assert_eq!(jumping_points(2).unwrap(), vec![0.25, 0.75]);
        let p5 = jumping_points(5).unwrap();
        for (a, b) in p5.iter().zip([0.1, 0.3, 0.5, 0.7, 0.9]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(jumping_points(0).is_err());
    }

    #[test]
    fn jumping_point_spacing() {
        for n in [1usize, 2, 3, 7, 10, 64, 1000] {
            let p = jumping_points(n).unwrap();
            for w in p.windows(2) {
                assert!((w[1] - w[0] - 1.0 / n as f64).abs() <= 1e-15);
            }
            assert!(p.iter().all(|&l| l > 0.0 && l < 1.0));
        }
    }

    #[test]
    fn compile_jumping_xy() {
        let path = AdiabaticPath::xy_geodesic(PI).unwrap();
        let tl = compile_jumping(&path, omega5(), 5).unwrap();
        assert!((tl.total_time() - 0.5e-6).abs() < 1e-18);
        let pulses: Vec<_> = tl.segments().iter().filter(|s| !s.is_marker()).collect();
        assert_eq!(pulses.len(), 5);
        assert!((tl.total_phase_difference().unwrap() - 5.0 * PI).abs() < 1e-9);
        assert_eq!(tl.lambda_start(), 0.0);
        assert_eq!(tl.lambda_end(), 1.0);
        let one = compile_jumping(&path, omega5(), 1).unwrap();
        let p: Vec<_> = one.segments().iter().filter(|s| !s.is_marker()).collect();
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].lambda_start, 0.5);
    }

    #[test]
    fn compile_jumping_lz_uses_intrinsic_gap() {
        let delta = omega5();
        let path = AdiabaticPath::lz_path(delta, PI).unwrap();
        let tl = compile_jumping(&path, 0.0, 5).unwrap();
        let pulses: Vec<_> = tl.segments().iter().filter(|s| !s.is_marker()).collect();
        assert!((pulses[2].duration - PI / delta).abs() < 1e-20);
        assert!((pulses[0].duration - PI * (0.1 * PI).sin() / delta).abs() < 1e-20);
        assert!((tl.total_phase_difference().unwrap() - 5.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn continuous_examples() {
        let path = AdiabaticPath::xy_geodesic(PI).unwrap();
        let omega = two_pi_mhz(6.0);
        let t = 1.0 / 0.12e6;
        let tl = compile_continuous(&path, &GapSchedule::constant(omega).unwrap(), t, None).unwrap();
        assert_eq!(tl.segments().len(), 1);
        assert!((tl.total_phase_difference().unwrap() - omega * t).abs() < 1e-9);
        assert!(compile_continuous(&path, &GapSchedule::Zero, 0.0, None).is_err());
        assert!(compile_continuous(&path, &GapSchedule::Zero, -1.0, None).is_err());
    }

    #[test]
    fn continuous_lz_requires_clip() {
        let path = AdiabaticPath::lz_path(omega5(), PI).unwrap();
        assert!(matches!(
            compile_continuous(&path, &GapSchedule::Zero, 1e-6, None),
            Err(Error::SingularPoint { .. })
        ));
        let tl = compile_continuous(&path, &GapSchedule::Zero, 1e-6, Some(DEFAULT_LZ_CLIP)).unwrap();
        assert_eq!(tl.lambda_clip(), Some(DEFAULT_LZ_CLIP));
        assert_eq!(tl.segments().len(), 3);
        assert!((tl.segments()[1].lambda_start - 0.02).abs() < 1e-15);
    }

    #[test]
    fn hybrid_endpoints_are_segment_identical() {
        let path = AdiabaticPath::xy_geodesic(PI).unwrap();
        let w = omega5();
        let h0 = compile_hybrid(&path, w, 5, 0.0).unwrap();
        let c = compile_continuous(&path, &GapSchedule::constant(w).unwrap(), 5.0 * PI / w, None).unwrap();
        assert_eq!(h0, c);
        let h1 = compile_hybrid(&path, w, 5, 1.0).unwrap();
        assert_eq!(h1, compile_jumping(&path, w, 5).unwrap());
    }

    #[test]
    fn hybrid_windows() {
        let path = AdiabaticPath::xy_geodesic(PI).unwrap();
        let w = omega5();
        let tl = compile_hybrid(&path, w, 5, 0.5).unwrap();
        let windows: Vec<_> = tl.segments().iter().filter(|s| !s.is_marker()).collect();
        assert_eq!(windows.len(), 5);
        for (win, l) in windows.iter().zip(jumping_points(5).unwrap()) {
            assert!((win.lambda_end - win.lambda_start - 0.1).abs() < 1e-12);
            assert!((0.5 * (win.lambda_start + win.lambda_end) - l).abs() < 1e-12);
            assert!((win.duration - 0.1e-6).abs() < 1e-18);
        }
        assert!((tl.total_time() - 0.5e-6).abs() < 1e-18);
        assert!(compile_hybrid(&path, w, 5, 1.5).is_err());
        assert!(compile_hybrid(&path, w, 0, 0.5).is_err());
    }

    #[test]
    fn back_forth_examples() {
        let path = AdiabaticPath::xy_geodesic(PI).unwrap();
        let w = omega5();
        let tl = compile_jumping(&path, w, 2).unwrap();
        assert_eq!(back_forth(&tl, 1).unwrap(), tl);
        let bf = back_forth(&tl, 2).unwrap();
        let order: Vec<f64> = bf.segments().iter().filter(|s| !s.is_marker()).map(|s| s.lambda_start).collect();
        assert_eq!(order, vec![0.25, 0.75, 0.75, 0.25]);
        let six = back_forth(&compile_jumping(&path, w, 5).unwrap(), 6).unwrap();
        assert!((six.total_time() - 3e-6).abs() < 1e-18);
        assert_eq!(six.lambda_end(), 0.0);

        let c = compile_continuous(&path, &GapSchedule::constant(w).unwrap(), 1e-6, None).unwrap();
        let cb = back_forth(&c, 3).unwrap();
        let dirs: Vec<f64> = cb.segments().iter().map(|s| s.lambda_end - s.lambda_start).collect();
        assert_eq!(dirs, vec![1.0, -1.0, 1.0]);
    }

    #[test]
    fn compensation_cancels_phase() {
        let path = AdiabaticPath::xy_geodesic(PI).unwrap();
        let w = omega5();
        let tl = compile_jumping(&path, w, 5).unwrap();
        let seg = compensation_segment(&path, 1.0, tl.total_time(), w).unwrap();
        assert!((seg.duration - 0.5e-6).abs() < 1e-18);
        assert!(seg.phase_flip);
        let comp = compensate(&tl).unwrap();
        assert!(comp.total_phase_difference().unwrap().abs() < 1e-9);
        assert!((comp.total_time() - 1e-6).abs() < 1e-18);
    }

    #[test]
    fn gap_integrals_match_quadrature() {
        let t = 1.0 / 0.12e6;
        let w = two_pi_mhz(6.0);
        let gaps = vec![
            GapSchedule::constant(w).unwrap(),
            GapSchedule::modulated(w, t).unwrap(),
            GapSchedule::crossing(w, 2.34, t).unwrap(),
            GapSchedule::biased(GapSchedule::modulated(w, t).unwrap(), 1.1).unwrap(),
        ];
        for g in &gaps {
            let (a, b) = (0.13, 0.71);
            // composite Simpson with step halving
            let simpson = |n: usize| {
                let h = (b - a) / n as f64;
                let mut s = g.at(a) + g.at(b);
                for k in 1..n {
                    s += if k % 2 == 1 { 4.0 } else { 2.0 } * g.at(a + k as f64 * h);
                }
                s * h / 3.0
            };
            let prev = simpson(1 << 16);
            // compare the phase accumulated over T, in radians
            assert!(((g.integral(a, b) - prev) * t).abs() < 1e-8, "{g:?}");
        }
    }

    #[test]
    fn gap_family_invariants() {
        let w = 2.0;
        let t = 10.0;
        assert!(!GapSchedule::crossing(w, 0.9, t).unwrap().has_zero_crossings());
        assert!(GapSchedule::crossing(w, 2.34, t).unwrap().has_zero_crossings());
        let m = GapSchedule::modulated(w, t).unwrap();
        let b = GapSchedule::biased(m.clone(), 0.8).unwrap();
        for k in 0..100 {
            let l = k as f64 / 99.0;
            assert!(m.at(l) >= w - 1e-12);
            assert_eq!(b.at(l), 0.8 * m.at(l));
        }
        assert!(GapSchedule::constant(0.0).is_err());
        assert!(GapSchedule::modulated(-1.0, 1.0).is_err());
    }

    #[test]
    fn slice_and_lambda_at() {
        let path = AdiabaticPath::xy_geodesic(PI).unwrap();
        let w = omega5();
        let tl = compile_jumping(&path, w, 5).unwrap();
        assert_eq!(tl.lambda_at(0.0), 0.1);
        assert_eq!(tl.lambda_at(0.15e-6), 0.3);
        assert_eq!(tl.lambda_at(tl.total_time()), 1.0);
        let s = tl.slice(0.05e-6, 0.25e-6);
        assert!((s.total_time() - 0.2e-6).abs() < 1e-18);
        let c = compile_continuous(&path, &GapSchedule::constant(w).unwrap(), 1e-6, None).unwrap();
        let part = c.slice(0.25e-6, 0.5e-6);
        assert!((part.segments()[0].lambda_start - 0.25).abs() < 1e-12);
        assert!((part.segments()[0].lambda_end - 0.5).abs() < 1e-12);
    }

    #[test]
    fn timeline_json_records() {
        let path = AdiabaticPath::xy_geodesic(PI).unwrap();
        let tl = compensate(&compile_jumping(&path, omega5(), 1).unwrap()).unwrap();
        let recs = tl.records().unwrap();
        assert_eq!(recs.len(), 4);
        assert!(recs[3].phase_flip);
        let json = tl.to_json().unwrap();
        let back: Vec<SegmentRecord> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, recs);
        assert!(json.contains("duration_s") && json.contains("gap_rad_s"));
    }
}
