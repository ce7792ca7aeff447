//! Dynamic and geometric phase bookkeeping, the `epsilon` diabaticity
//! measure and the decomposition `U = U_adia U_dia`.
//!
//! All quantities are functions of the arc parameter `s`, the accumulated
//! `|d lambda|` along the timeline. For a single forward pass `s = lambda`;
//! back-and-forth runs keep increasing `s` while `lambda` turns around.
//! Held segments (pulses) have zero arc length and show up as jumps of the
//! dynamic phase at a single `s`; all `s`-functions are right-continuous.

use nalgebra::{DMatrix, Matrix2};
use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::paths::AdiabaticPath;
use crate::propagate::{adaptive, propagate, PropagateOptions};
use crate::qcore::{spectral_norm, Herm2, HermitianOp, Unitary, C64, ZERO};
use crate::schedules::{DriveTimeline, Segment};

const POINTS_PER_CYCLE: f64 = 32.0;
const QUAD_TOL: f64 = 1e-11;
const MAX_QUAD_HALVINGS: usize = 20;
const REPORT_GRID: usize = 201;
const EPS_MAX_GRID: usize = 2048;
const G_GRID: usize = 257;
const G_FD_STEP: f64 = 1e-5;

/// Stretch of the timeline with nonzero arc length.
#[derive(Clone, Debug, PartialEq)]
pub struct ArcPiece {
    pub s_start: f64,
    pub s_end: f64,
    pub lambda_start: f64,
    pub lambda_end: f64,
    /// `phi_1 - phi_2` at `s_start`.
    pub phase_start: f64,
    /// Driving segment, `None` for zero-duration markers.
    sweep: Option<Segment>,
}

impl ArcPiece {
    fn len(&self) -> f64 {
        self.s_end - self.s_start
    }

    fn direction(&self) -> f64 {
        (self.lambda_end - self.lambda_start).signum()
    }

    fn lambda_at(&self, s: f64) -> f64 {
        self.lambda_start + (self.lambda_end - self.lambda_start) * (s - self.s_start) / self.len()
    }

    fn phase_at(&self, path: &AdiabaticPath, s: f64) -> Result<f64> {
        match &self.sweep {
            None => Ok(self.phase_start),
            Some(seg) => Ok(self.phase_start + seg.phase_difference_until(path, (s - self.s_start) / self.len())?),
        }
    }

    /// Bound on `|d(phi_1 - phi_2)/ds|`.
    fn phase_rate(&self, path: &AdiabaticPath) -> Result<f64> {
        match &self.sweep {
            None => Ok(0.0),
            Some(seg) => Ok(seg.max_rate(path)? * seg.duration / self.len()),
        }
    }

    /// Initial grid size resolving both the phase oscillation and lambda.
    fn grid_size(&self, path: &AdiabaticPath, k: f64, a: f64, b: f64, min: usize) -> Result<usize> {
        let cycles = k.abs() * self.phase_rate(path)? * (b - a) / (2.0 * PI);
        Ok(((POINTS_PER_CYCLE * cycles).ceil() as usize).max(((b - a) / 0.01).ceil() as usize).max(min))
    }
}

/// Accumulated dynamic phases and geometric phases along a run.
#[derive(Clone, Debug)]
pub struct PhaseRecord {
    path: AdiabaticPath,
    weights: Vec<f64>,
    pieces: Vec<ArcPiece>,
    lambda_origin: f64,
    lambda_final: f64,
    total_phase: f64,
    total_arc: f64,
}

/// Builds the phase record of a timeline; `phi_n = int E_n dt` in closed form.
pub fn dynamic_phases(timeline: &DriveTimeline) -> Result<PhaseRecord> {
    let path = timeline.path();
    let mut pieces = Vec::new();
    let mut s = 0.0;
    let mut phase = 0.0;
    for seg in timeline.segments() {
        let dphi = seg.phase_difference(path)?;
        if !seg.is_hold() {
            let len = (seg.lambda_end - seg.lambda_start).abs();
            pieces.push(ArcPiece {
                s_start: s,
                s_end: s + len,
                lambda_start: seg.lambda_start,
                lambda_end: seg.lambda_end,
                phase_start: phase,
                sweep: if seg.duration > 0.0 { Some(seg.clone()) } else { None },
            });
            s += len;
        }
        phase += dphi;
    }
    Ok(PhaseRecord {
        path: path.clone(),
        weights: path.energy_weights(),
        pieces,
        lambda_origin: timeline.lambda_start(),
        lambda_final: timeline.lambda_end(),
        total_phase: phase,
        total_arc: s,
    })
}

impl PhaseRecord {
    pub fn path(&self) -> &AdiabaticPath {
        &self.path
    }

    pub fn pieces(&self) -> &[ArcPiece] {
        &self.pieces
    }

    pub fn total_arc(&self) -> f64 {
        self.total_arc
    }

    fn piece_at(&self, s: f64) -> Option<&ArcPiece> {
        self.pieces.iter().find(|p| s >= p.s_start && s < p.s_end)
    }

    fn check_s(&self, s: f64) -> Result<()> {
        if s >= 0.0 && s <= self.total_arc * (1.0 + 1e-12) {
            Ok(())
        } else {
            Err(Error::invalid(format!("arc parameter {s} outside [0, {}]", self.total_arc)))
        }
    }

    pub fn lambda_at(&self, s: f64) -> f64 {
        match self.piece_at(s) {
            Some(p) => p.lambda_at(s),
            None if s <= 0.0 => self.lambda_origin,
            None => self.lambda_final,
        }
    }

    /// `phi_1(s) - phi_2(s)`.
    pub fn phase_difference(&self, s: f64) -> Result<f64> {
        match self.piece_at(s) {
            Some(p) => p.phase_at(&self.path, s),
            None if s < self.total_arc => Ok(0.0),
            None => Ok(self.total_phase),
        }
    }

    /// `phi_n(s)`.
    pub fn phi(&self, n: usize, s: f64) -> Result<f64> {
        let w = self.weights.get(n).ok_or_else(|| Error::invalid(format!("level {n} out of range")))?;
        Ok(w * self.phase_difference(s)?)
    }

    /// `gamma_n` at `lambda`, relative to the run's starting point.
    fn gamma_at_lambda(&self, n: usize, lambda: f64) -> Result<f64> {
        Ok(self.path.geometric_phase(n, lambda)? - self.path.geometric_phase(n, self.lambda_origin)?)
    }

    /// `gamma_n(s)`.
    pub fn gamma(&self, n: usize, s: f64) -> Result<f64> {
        self.gamma_at_lambda(n, self.lambda_at(s))
    }

    fn k(&self, n: usize, m: usize) -> Result<f64> {
        let d = self.path.dim();
        if n >= d || m >= d {
            return Err(Error::invalid(format!("levels ({n}, {m}) out of range for d = {d}")));
        }
        if n == m {
            return Err(Error::invalid("epsilon needs n != m"));
        }
        Ok(self.weights[n] - self.weights[m])
    }

    /// `int_a^b exp(i k (phi_1 - phi_2)) ds` within one piece.
    fn piece_integral(&self, p: &ArcPiece, k: f64, a: f64, b: f64) -> Result<C64> {
        if b <= a {
            return Ok(ZERO);
        }
        if p.sweep.is_none() || k == 0.0 {
            return Ok(C64::from_polar(b - a, k * p.phase_start));
        }
        let f = |s: f64| -> Result<C64> { Ok(C64::from_polar(1.0, k * p.phase_at(&self.path, s)?)) };
        let mut n = p.grid_size(&self.path, k, a, b, 16)?;
        let mut h = (b - a) / n as f64;
        let mut sum = (f(a)? + f(b)?) * 0.5;
        for j in 1..n {
            sum += f(a + j as f64 * h)?;
        }
        let mut trap = sum * h;
        let mut prev: Option<C64> = None;
        let mut change = f64::INFINITY;
        for _ in 0..MAX_QUAD_HALVINGS {
            for j in 0..n {
                sum += f(a + (j as f64 + 0.5) * h)?;
            }
            n *= 2;
            h /= 2.0;
            let fine = sum * h;
            let rich = (fine * 4.0 - trap) / 3.0;
            if let Some(pr) = prev {
                change = (rich - pr).norm();
                if change < QUAD_TOL {
                    return Ok(rich);
                }
            }
            prev = Some(rich);
            trap = fine;
        }
        Err(Error::NonConvergence { context: "epsilon quadrature".into(), last_change: change, substeps: n })
    }

    fn integral(&self, k: f64, a: f64, b: f64) -> Result<C64> {
        let mut acc = ZERO;
        for p in &self.pieces {
            let lo = a.max(p.s_start);
            let hi = b.min(p.s_end);
            if hi > lo {
                acc += self.piece_integral(p, k, lo, hi)?;
            }
        }
        Ok(acc)
    }
}

/// `epsilon_{n,m}(s) = |int_0^s exp(i phi_{n,m}) ds'|`.
pub fn epsilon(rec: &PhaseRecord, n: usize, m: usize, s: f64) -> Result<f64> {
    let k = rec.k(n, m)?;
    rec.check_s(s)?;
    Ok(rec.integral(k, 0.0, s)?.norm())
}

/// `epsilon_{n,m}` at each of the ascending arc values `s`.
pub fn epsilon_curve(rec: &PhaseRecord, n: usize, m: usize, s: &[f64]) -> Result<Vec<f64>> {
    let k = rec.k(n, m)?;
    let mut acc = ZERO;
    let mut last = 0.0;
    let mut out = Vec::with_capacity(s.len());
    for &x in s {
        rec.check_s(x)?;
        if x < last {
            return Err(Error::invalid("epsilon_curve needs ascending arc values"));
        }
        acc += rec.integral(k, last, x)?;
        last = x;
        out.push(acc.norm());
    }
    Ok(out)
}

fn uniform(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n < 2 || b <= a {
        return vec![b];
    }
    (0..n).map(|j| if j == n - 1 { b } else { a + (b - a) * j as f64 / (n - 1) as f64 }).collect()
}

/// Ideal adiabatic propagator `sum_n e^{i(gamma_n - phi_n)} |psi_n(lambda)><psi_n(0)|`.
pub fn u_adia(rec: &PhaseRecord, s: f64) -> Result<Unitary> {
    rec.check_s(s)?;
    let path = &rec.path;
    let d = path.dim();
    let lambda = rec.lambda_at(s);
    let phase = rec.phase_difference(s)?;
    let mut m = DMatrix::<C64>::zeros(d, d);
    for n in 0..d {
        let arg = rec.gamma_at_lambda(n, lambda)? - rec.weights[n] * phase;
        let ket = path.eigvec(n, lambda)?;
        let bra = path.eigvec(n, rec.lambda_origin)?;
        m += ket * bra.adjoint() * C64::from_polar(1.0, arg);
    }
    Ok(Unitary::from_matrix_unchecked(m))
}

/// `U_dia = U_adia^dagger U`.
pub fn u_dia_extract(u: &Unitary, u_adia: &Unitary) -> Result<Unitary> {
    u_adia.adjoint().compose(u)
}

fn w01(rec: &PhaseRecord, p: &ArcPiece, s: f64) -> Result<C64> {
    let lambda = p.lambda_at(s);
    let phase = p.phase_at(&rec.path, s)?;
    let k = rec.weights[0] - rec.weights[1];
    let dgamma = rec.gamma_at_lambda(1, lambda)? - rec.gamma_at_lambda(0, lambda)?;
    Ok(C64::from_polar(p.direction(), k * phase + dgamma) * rec.path.g_value(0, 1, lambda)?)
}

/// Generator `W(s)` in the `{psi_n(0)}` basis: zero diagonal and
/// `W_{n,m} = e^{i phi_{n,m}} e^{i(gamma_m - gamma_n)} g_{n,m} dlambda/ds`.
/// Only the driven pair `(1, 2)` couples.
pub fn w_generator(rec: &PhaseRecord, s: f64) -> Result<HermitianOp> {
    rec.check_s(s)?;
    let d = rec.path.dim();
    let p = rec
        .piece_at(s)
        .or_else(|| rec.pieces.iter().rev().find(|p| p.s_end <= s))
        .ok_or_else(|| Error::invalid("W is undefined on a run without path motion"))?;
    let s_eval = s.min(p.s_end);
    rec.path.check_regular(p.lambda_at(s_eval))?;
    let w = w01(rec, p, s_eval)?;
    let mut m = DMatrix::<C64>::zeros(d, d);
    m[(0, 1)] = w;
    m[(1, 0)] = w.conj();
    Ok(HermitianOp::from_matrix_unchecked(m))
}

/// Integrates `dU_dia/ds = i W(s) U_dia` with `U_dia(0) = I`.
pub fn u_dia_ode(rec: &PhaseRecord, s_end: f64) -> Result<Unitary> {
    u_dia_ode_with(rec, s_end, &PropagateOptions::default())
}

pub fn u_dia_ode_with(rec: &PhaseRecord, s_end: f64, opts: &PropagateOptions) -> Result<Unitary> {
    rec.check_s(s_end)?;
    let mut u = Matrix2::<C64>::identity();
    for p in &rec.pieces {
        let a = p.s_start;
        let b = s_end.min(p.s_end);
        if b <= a {
            continue;
        }
        let n0 = p.grid_size(&rec.path, 1.0, a, b, 4)?;
        let product = |n: usize| -> Result<Matrix2<C64>> {
            let h = (b - a) / n as f64;
            let mut v = Matrix2::<C64>::identity();
            for j in 0..n {
                let w = w01(rec, p, a + (j as f64 + 0.5) * h)?;
                // exp(i W h) with W = Re(w) sigma_x - Im(w) sigma_y
                v = Herm2 { a0: 0.0, v: [w.re, -w.im, 0.0] }.expm(-h) * v;
            }
            Ok(v)
        };
        let context = format!("U_dia ODE on s in [{a}, {b}]");
        u = adaptive(n0, opts, &context, product)? * u;
    }
    // back from the {psi_n(0)} basis
    let d = rec.path.dim();
    let mut m = DMatrix::<C64>::identity(d, d);
    m.view_mut((0, 0), (2, 2)).copy_from(&u);
    let mut v = DMatrix::<C64>::zeros(d, d);
    for n in 0..d {
        v.set_column(n, &rec.path.eigvec(n, rec.lambda_origin)?);
    }
    Ok(Unitary::from_matrix_unchecked(&v * m * v.adjoint()))
}

/// `G_tot = sum_{n != m} max |G_{n,m}|` and `G_tot'` (same with `dG/dlambda`)
/// over the lambda range the run covers.
pub fn g_totals(rec: &PhaseRecord) -> Result<(f64, f64)> {
    let moving: Vec<&ArcPiece> = rec.pieces.iter().filter(|p| p.len() > 0.0).collect();
    if moving.is_empty() {
        return Ok((0.0, 0.0));
    }
    let lo = moving.iter().map(|p| p.lambda_start.min(p.lambda_end)).fold(f64::INFINITY, f64::min);
    let hi = moving.iter().map(|p| p.lambda_start.max(p.lambda_end)).fold(f64::NEG_INFINITY, f64::max);
    let big_g = |l: f64| -> Result<C64> {
        let dg = rec.gamma_at_lambda(1, l)? - rec.gamma_at_lambda(0, l)?;
        Ok(C64::from_polar(1.0, dg) * rec.path.g_value(0, 1, l)?)
    };
    let (mut gmax, mut dmax) = (0.0f64, 0.0f64);
    for l in uniform(lo, hi, G_GRID) {
        gmax = gmax.max(big_g(l)?.norm());
        let a = (l - G_FD_STEP).max(lo);
        let b = (l + G_FD_STEP).min(hi);
        if b > a {
            dmax = dmax.max(((big_g(b)? - big_g(a)?) / (b - a)).norm());
        }
    }
    // |G_{1,2}| = |G_{2,1}|
    Ok((2.0 * gmax, 2.0 * dmax))
}

/// `sqrt(eps) (G_tot^2 + G_tot') s^2 + (sqrt(eps) + eps) G_tot`.
pub fn bound_rhs(eps: f64, g_tot: f64, g_tot_prime: f64, s: f64) -> f64 {
    let r = eps.sqrt();
    r * (g_tot * g_tot + g_tot_prime) * s * s + (r + eps) * g_tot
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct PhaseGrid {
    pub s: Vec<f64>,
    pub lambda: Vec<f64>,
    pub phi_1: Vec<f64>,
    pub phi_2: Vec<f64>,
    pub gamma_1: Vec<f64>,
    pub gamma_2: Vec<f64>,
    pub epsilon_12: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct DecompositionReport {
    pub u: Unitary,
    pub u_adia: Unitary,
    pub u_dia: Unitary,
    pub u_dia_ode: Unitary,
    pub arc_length: f64,
    pub epsilon_max: f64,
    pub epsilon_final: f64,
    pub g_tot: f64,
    pub g_tot_prime: f64,
    pub bound_rhs: f64,
    /// `||U_dia - I||`
    pub deviation_norm: f64,
    /// `||U_dia^ODE - U_adia^dagger U||`
    pub ode_extract_distance: f64,
    /// `||U - U_adia U_dia||`
    pub reconstruction_error: f64,
    pub phases: PhaseGrid,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    epsilon_max: f64,
    epsilon_final: f64,
    #[serde(rename = "G_tot")]
    g_tot: f64,
    #[serde(rename = "G_tot_prime")]
    g_tot_prime: f64,
    bound_rhs: f64,
    deviation_norm: f64,
    bound_holds: bool,
    ode_extract_distance: f64,
    reconstruction_error: f64,
    arc_length: f64,
    phases: &'a PhaseGrid,
}

impl DecompositionReport {
    pub fn to_json(&self) -> Result<String> {
        let b = adiabaticity_bound(self);
        Ok(serde_json::to_string_pretty(&ReportJson {
            epsilon_max: self.epsilon_max,
            epsilon_final: self.epsilon_final,
            g_tot: self.g_tot,
            g_tot_prime: self.g_tot_prime,
            bound_rhs: self.bound_rhs,
            deviation_norm: self.deviation_norm,
            bound_holds: b.holds,
            ode_extract_distance: self.ode_extract_distance,
            reconstruction_error: self.reconstruction_error,
            arc_length: self.arc_length,
            phases: &self.phases,
        })?)
    }
}

/// Both sides of the operator-norm adiabaticity bound at the end of the run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn adiabaticity_bound(report: &DecompositionReport) -> BoundCheck {
    let lhs = report.deviation_norm;
    let rhs = report.bound_rhs;
    BoundCheck { lhs, rhs, holds: lhs < rhs || lhs == 0.0 && rhs == 0.0 }
}

/// Full decomposition of a (noise-free) timeline at its end.
pub fn decompose(timeline: &DriveTimeline) -> Result<DecompositionReport> {
    let u = propagate(timeline)?;
    decompose_with(timeline, u)
}

/// As [`decompose`] with the full propagator supplied by the caller.
pub fn decompose_with(timeline: &DriveTimeline, u: Unitary) -> Result<DecompositionReport> {
    let rec = dynamic_phases(timeline)?;
    let s_end = rec.total_arc();
    let ua = u_adia(&rec, s_end)?;
    let ud = u_dia_extract(&u, &ua)?;
    let ud_ode = u_dia_ode(&rec, s_end)?;
    let id = Unitary::identity(u.dim());
    let deviation_norm = spectral_norm(&(ud.matrix() - id.matrix()));
    let ode_extract_distance = ud_ode.distance(&ud);
    let reconstruction_error = ua.compose(&ud)?.distance(&u);

    let mut eps_grid = uniform(0.0, s_end, EPS_MAX_GRID);
    eps_grid.extend(rec.pieces.iter().map(|p| p.s_end));
    eps_grid.sort_by(f64::total_cmp);
    let epsilon_max = epsilon_curve(&rec, 0, 1, &eps_grid)?.into_iter().fold(0.0, f64::max);
    let (g_tot, g_tot_prime) = g_totals(&rec)?;

    let s = uniform(0.0, s_end, REPORT_GRID);
    let epsilon_12 = epsilon_curve(&rec, 0, 1, &s)?;
    let mut phases = PhaseGrid {
        s: s.clone(),
        lambda: Vec::new(),
        phi_1: Vec::new(),
        phi_2: Vec::new(),
        gamma_1: Vec::new(),
        gamma_2: Vec::new(),
        epsilon_12,
    };
    for &x in &s {
        phases.lambda.push(rec.lambda_at(x));
        phases.phi_1.push(rec.phi(0, x)?);
        phases.phi_2.push(rec.phi(1, x)?);
        phases.gamma_1.push(rec.gamma(0, x)?);
        phases.gamma_2.push(rec.gamma(1, x)?);
    }
    let epsilon_final = *phases.epsilon_12.last().unwrap_or(&0.0);

    Ok(DecompositionReport {
        u,
        u_adia: ua,
        u_dia: ud,
        u_dia_ode: ud_ode,
        arc_length: s_end,
        epsilon_max,
        epsilon_final,
        g_tot,
        g_tot_prime,
        bound_rhs: bound_rhs(epsilon_max, g_tot, g_tot_prime, s_end),
        deviation_norm,
        ode_extract_distance,
        reconstruction_error,
        phases,
    })
}

fn sigma_theta(theta: f64) -> Herm2 {
    Herm2 { a0: 0.0, v: [theta.sin(), 0.0, theta.cos()] }
}

fn rz(theta_g: f64) -> Matrix2<C64> {
    // exp(-i theta_g sigma_z / 2)
    Herm2 { a0: 0.0, v: [0.0, 0.0, 1.0] }.expm(theta_g / 2.0)
}

fn eq9(theta: f64, theta_g: f64, phi: f64) -> (Matrix2<C64>, Matrix2<C64>, Matrix2<C64>) {
    let st = sigma_theta(theta);
    let u_prime = Herm2 {
        a0: 0.0,
        v: [phi * theta.sin() / 2.0, 0.0, (phi * theta.cos() - theta_g) / 2.0],
    }
    .expm(1.0);
    let u = rz(theta_g) * u_prime;
    let adia_arg = (phi - theta_g * theta.cos()) / 2.0;
    let ua = rz(theta_g) * st.expm(adia_arg);
    let ud = st.expm(-adia_arg) * u_prime;
    (u, ua, ud)
}

/// Closed-form `(U, U_adia, U_dia)` for one constant-gap pass along the
/// circle of latitude at polar angle `theta`, azimuth swept by `theta_g`,
/// with relative dynamic phase `phi = Omega T`.
pub fn analytic_constant_gap(theta: f64, theta_g: f64, phi: f64) -> (Unitary, Unitary, Unitary) {
    let (u, ua, ud) = eq9(theta, theta_g, phi);
    (Unitary::from_matrix2(&u), Unitary::from_matrix2(&ua), Unitary::from_matrix2(&ud))
}

/// Closed-form `(U, U_adia)` for `repeats` alternating constant-gap passes,
/// starting forward.
pub fn analytic_back_forth(theta: f64, theta_g: f64, phi: f64, repeats: usize) -> (Unitary, Unitary) {
    let (uf, uaf, _) = eq9(theta, theta_g, phi);
    let (ub0, uab0, _) = eq9(theta, -theta_g, phi);
    let r = rz(theta_g);
    let ri = r.adjoint();
    let ub = r * ub0 * ri;
    let uab = r * uab0 * ri;
    let mut u = Matrix2::<C64>::identity();
    let mut ua = Matrix2::<C64>::identity();
    for k in 0..repeats {
        if k % 2 == 0 {
            u = uf * u;
            ua = uaf * ua;
        } else {
            u = ub * u;
            ua = uab * ua;
        }
    }
    (Unitary::from_matrix2(&u), Unitary::from_matrix2(&ua))
}

/// Relative dynamic phase `sqrt((2 k pi)^2 - theta_g^2)` giving perfect transfer.
pub fn perfect_transfer_phase(theta_g: f64, k: u32) -> Result<f64> {
    let two_k_pi = 2.0 * PI * k as f64;
    if k == 0 || two_k_pi <= theta_g.abs() {
        return Err(Error::invalid(format!("need 2 k pi > theta_g, got k = {k}, theta_g = {theta_g}")));
    }
    Ok((two_k_pi * two_k_pi - theta_g * theta_g).sqrt())
}
