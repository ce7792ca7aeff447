//! Lambda-parameterized adiabatic paths (instantaneous eigenframes) and their
//! geometric data.
//!
//! Eigenstates are labeled by continuity along the path, never by energy
//! order: `eigenstate(0, lambda)` is the state that carries energy
//! `+gap/2` for every lambda, including through level crossings where the gap
//! changes sign. Indices are zero-based.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::qcore::{HermitianOp, PureState, C64, I, ONE, ZERO};

/// Default finite-difference step for geometric functions.
pub const DEFAULT_FD_STEP: f64 = 1e-6;
/// Default grid for the Berry-phase quadrature.
pub const DEFAULT_BERRY_GRID: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyMode {
    /// Energies `+-Omega(lambda)/2` supplied by a gap schedule.
    ExternalGap,
    /// The path carries its own spectrum (Landau-Zener).
    Intrinsic,
}

/// Smooth gauge `alpha(lambda) = offset + slope*lambda + amplitude*sin(frequency*lambda)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GaugeFn {
    pub offset: f64,
    pub slope: f64,
    pub amplitude: f64,
    pub frequency: f64,
}

impl GaugeFn {
    pub fn value(&self, lambda: f64) -> f64 {
        self.offset + self.slope * lambda + self.amplitude * (self.frequency * lambda).sin()
    }

    pub fn derivative(&self, lambda: f64) -> f64 {
        self.slope + self.amplitude * self.frequency * (self.frequency * lambda).cos()
    }
}

#[derive(Clone, Debug, PartialEq)]
enum PathKind {
    /// Circle of latitude at polar angle `theta`, swept by azimuth
    /// `theta_g * lambda`. `theta = pi/2` is the equatorial xy geodesic.
    Latitude { theta: f64, theta_g: f64 },
    /// Real rotation in the plane spanned by `frame0[0]`, `frame0[1]`; the
    /// remaining columns are a fixed completion.
    Geodesic { frame0: Vec<DVector<C64>>, theta_g: f64 },
    /// `H = B_z sigma_z/2 + Delta sigma_x/2` with `B_z = -Delta cot(theta_g lambda)`.
    LandauZener { delta: f64, theta_g: f64 },
    Regauged { inner: Box<AdiabaticPath>, gauges: Vec<GaugeFn> },
}

/// An instantaneous eigenframe `{|psi_n(lambda)>}` for `lambda in [0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AdiabaticPath {
    kind: PathKind,
}

/// Two-level Hamiltonian split as `H = (bias sigma_z + drive . sigma) / 2`.
/// Amplitude noise scales `drive` only; detuning noise adds to `bias`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoLevelTerms {
    pub bias: f64,
    pub drive: [f64; 3],
}

impl AdiabaticPath {
    /// Equatorial geodesic `|+-_lambda> = (|z> +- e^{i theta_g lambda}|-z>)/sqrt 2`.
    pub fn xy_geodesic(theta_g: f64) -> Result<Self> {
        Self::latitude(PI / 2.0, theta_g)
    }

    /// Eigenframe of `(Omega/2) R(lambda) sigma_theta R(lambda)^dagger`,
    /// `R = exp(-i sigma_z theta_g lambda / 2)`, in the single-valued gauge
    /// `psi_1 = (cos(theta/2), e^{i theta_g lambda} sin(theta/2))`.
    pub fn latitude(theta: f64, theta_g: f64) -> Result<Self> {
        if !(theta_g > 0.0 && theta_g.is_finite()) {
            return Err(Error::invalid(format!("theta_g must be positive, got {theta_g}")));
        }
        if !(0.0..=PI).contains(&theta) {
            return Err(Error::invalid(format!("theta must be in [0, pi], got {theta}")));
        }
        Ok(AdiabaticPath { kind: PathKind::Latitude { theta, theta_g } })
    }

    /// Geodesic from `initial` to `target` in any dimension.
    pub fn general_geodesic(initial: &PureState, target: &PureState) -> Result<Self> {
        let d = initial.dim();
        if target.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: target.dim() });
        }
        let psi_i = initial.as_vector().clone();
        let overlap = psi_i.dotc(target.as_vector());
        let cos_half = overlap.norm().min(1.0);
        let theta_g = 2.0 * cos_half.acos();
        // gauge so that <Psi_i|Psi_t> = cos(theta_g/2) >= 0
        let gauge = if overlap.norm() > 0.0 { overlap.conj() / overlap.norm() } else { ONE };
        let psi_t = target.as_vector() * gauge;

        let mut frame0 = vec![psi_i.clone()];
        let perp = &psi_t - &psi_i * C64::from(cos_half);
        if (theta_g / 2.0).sin() > 1e-12 && perp.norm() > 1e-12 {
            frame0.push(perp.normalize());
        }
        // Gram-Schmidt over canonical basis vectors in order
        for k in 0..d {
            if frame0.len() == d {
                break;
            }
            let mut v = DVector::from_element(d, ZERO);
            v[k] = ONE;
            for b in &frame0 {
                let c = b.dotc(&v);
                v -= b * c;
            }
            if v.norm() > 1e-8 {
                frame0.push(v.normalize());
            }
        }
        if frame0.len() != d {
            return Err(Error::invalid("failed to complete orthonormal frame"));
        }
        Ok(AdiabaticPath { kind: PathKind::Geodesic { frame0, theta_g } })
    }

    /// Landau-Zener path, `theta_g in (0, pi]`.
    pub fn lz_path(delta: f64, theta_g: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::invalid(format!("Delta must be positive, got {delta}")));
        }
        if !(theta_g > 0.0 && theta_g <= PI) {
            return Err(Error::invalid(format!("LZ theta_g must be in (0, pi], got {theta_g}")));
        }
        Ok(AdiabaticPath { kind: PathKind::LandauZener { delta, theta_g } })
    }

    /// Same physical path with eigenstate `n` multiplied by `e^{i alpha_n(lambda)}`.
    pub fn regauged(&self, gauges: Vec<GaugeFn>) -> Result<Self> {
        if gauges.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: gauges.len() });
        }
        Ok(AdiabaticPath {
            kind: PathKind::Regauged { inner: Box::new(self.clone()), gauges },
        })
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            PathKind::Latitude { .. } | PathKind::LandauZener { .. } => 2,
            PathKind::Geodesic { frame0, .. } => frame0.len(),
            PathKind::Regauged { inner, .. } => inner.dim(),
        }
    }

    /// Path length in radians.
    pub fn theta_g(&self) -> f64 {
        match &self.kind {
            PathKind::Latitude { theta_g, .. }
            | PathKind::Geodesic { theta_g, .. }
            | PathKind::LandauZener { theta_g, .. } => *theta_g,
            PathKind::Regauged { inner, .. } => inner.theta_g(),
        }
    }

    pub fn energy_mode(&self) -> EnergyMode {
        match &self.kind {
            PathKind::LandauZener { .. } => EnergyMode::Intrinsic,
            PathKind::Regauged { inner, .. } => inner.energy_mode(),
            _ => EnergyMode::ExternalGap,
        }
    }

    /// Short human-readable description used in reports.
    pub fn describe(&self) -> String {
        match &self.kind {
            PathKind::Latitude { theta, theta_g } => {
                format!("latitude(theta={theta}, theta_g={theta_g})")
            }
            PathKind::Geodesic { theta_g, frame0 } => {
                format!("geodesic(d={}, theta_g={theta_g})", frame0.len())
            }
            PathKind::LandauZener { delta, theta_g } => {
                format!("landau_zener(delta={delta}, theta_g={theta_g})")
            }
            PathKind::Regauged { inner, .. } => format!("regauged({})", inner.describe()),
        }
    }

    /// Error if the path Hamiltonian is singular at `lambda`.
    pub fn check_regular(&self, lambda: f64) -> Result<()> {
        match &self.kind {
            PathKind::LandauZener { theta_g, .. } => {
                let arg = theta_g * lambda;
                if arg <= 0.0 || arg >= PI || (arg.sin()) < 1e-300 {
                    return Err(Error::SingularPoint { lambda });
                }
                Ok(())
            }
            PathKind::Regauged { inner, .. } => inner.check_regular(lambda),
            _ => Ok(()),
        }
    }

    /// Eigenstate `n` (zero-based) at `lambda`.
    pub fn eigenstate(&self, n: usize, lambda: f64) -> Result<PureState> {
        Ok(PureState::from_normalized(self.eigvec(n, lambda)?))
    }

    pub(crate) fn eigvec(&self, n: usize, lambda: f64) -> Result<DVector<C64>> {
        let d = self.dim();
        if n >= d {
            return Err(Error::invalid(format!("eigenstate index {n} out of range for d = {d}")));
        }
        Ok(match &self.kind {
            PathKind::Latitude { theta, theta_g } => {
                let (s, c) = (theta / 2.0).sin_cos();
                let e = C64::from_polar(1.0, theta_g * lambda);
                if n == 0 {
                    DVector::from_vec(vec![C64::from(c), e * s])
                } else {
                    DVector::from_vec(vec![C64::from(s), -e * c])
                }
            }
            PathKind::Geodesic { frame0, theta_g } => {
                let (s, c) = (theta_g * lambda / 2.0).sin_cos();
                match n {
                    0 => &frame0[0] * C64::from(c) + &frame0[1] * C64::from(s),
                    1 => &frame0[1] * C64::from(c) - &frame0[0] * C64::from(s),
                    _ => frame0[n].clone(),
                }
            }
            PathKind::LandauZener { theta_g, .. } => {
                let (s, c) = (theta_g * lambda / 2.0).sin_cos();
                if n == 0 {
                    DVector::from_vec(vec![C64::from(s), C64::from(c)])
                } else {
                    DVector::from_vec(vec![C64::from(c), C64::from(-s)])
                }
            }
            PathKind::Regauged { inner, gauges } => {
                inner.eigvec(n, lambda)? * C64::from_polar(1.0, gauges[n].value(lambda))
            }
        })
    }

    /// `E_n = weight_n * gap`: `+1/2`, `-1/2`, then zeros for spectator levels.
    pub fn energy_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.dim()];
        w[0] = 0.5;
        w[1] = -0.5;
        w
    }

    /// Landau-Zener detuning `B_z(lambda) = -Delta cot(theta_g lambda)`.
    pub fn b_z(&self, lambda: f64) -> Result<f64> {
        match &self.kind {
            PathKind::LandauZener { delta, theta_g } => {
                self.check_regular(lambda)?;
                Ok(-delta / (theta_g * lambda).tan())
            }
            PathKind::Regauged { inner, .. } => inner.b_z(lambda),
            _ => Err(Error::invalid("B_z is defined only for the Landau-Zener path")),
        }
    }

    /// Intrinsic gap `E_1 - E_2 = Delta / sin(theta_g lambda)` of the LZ path.
    pub fn intrinsic_gap(&self, lambda: f64) -> Result<f64> {
        match &self.kind {
            PathKind::LandauZener { delta, theta_g } => {
                self.check_regular(lambda)?;
                Ok(delta / (theta_g * lambda).sin())
            }
            PathKind::Regauged { inner, .. } => inner.intrinsic_gap(lambda),
            _ => Err(Error::invalid("path has no intrinsic gap")),
        }
    }

    /// `int_{a}^{b} E_1 - E_2 dlambda` for the intrinsic spectrum.
    pub(crate) fn intrinsic_gap_integral(&self, a: f64, b: f64) -> Result<f64> {
        match &self.kind {
            PathKind::LandauZener { delta, theta_g } => {
                self.check_regular(a)?;
                self.check_regular(b)?;
                let f = |l: f64| (theta_g * l / 2.0).tan().ln() * delta / theta_g;
                Ok(f(b) - f(a))
            }
            PathKind::Regauged { inner, .. } => inner.intrinsic_gap_integral(a, b),
            _ => Err(Error::invalid("path has no intrinsic gap")),
        }
    }

    /// Effective gap at `lambda`: the external value, or the intrinsic gap.
    pub fn gap(&self, lambda: f64, external: f64) -> Result<f64> {
        match self.energy_mode() {
            EnergyMode::ExternalGap => Ok(external),
            EnergyMode::Intrinsic => self.intrinsic_gap(lambda),
        }
    }

    /// Two-level split of `H(lambda)`; `gap` is ignored for intrinsic paths.
    pub fn two_level_terms(&self, lambda: f64, gap: f64) -> Result<TwoLevelTerms> {
        match &self.kind {
            PathKind::Latitude { theta, theta_g } => {
                let (sa, ca) = (theta_g * lambda).sin_cos();
                let tr = gap * theta.sin();
                Ok(TwoLevelTerms { bias: gap * theta.cos(), drive: [tr * ca, tr * sa, 0.0] })
            }
            PathKind::LandauZener { delta, .. } => {
                Ok(TwoLevelTerms { bias: self.b_z(lambda)?, drive: [*delta, 0.0, 0.0] })
            }
            PathKind::Geodesic { frame0, .. } if frame0.len() == 2 => {
                let v = self.eigvec(0, lambda)?;
                let ab = v[0].conj() * v[1];
                let nz = v[0].norm_sqr() - v[1].norm_sqr();
                Ok(TwoLevelTerms {
                    bias: 0.0,
                    drive: [gap * 2.0 * ab.re, gap * 2.0 * ab.im, gap * nz],
                })
            }
            PathKind::Regauged { inner, .. } => inner.two_level_terms(lambda, gap),
            _ => Err(Error::DimensionMismatch { expected: 2, got: self.dim() }),
        }
    }

    /// `H(lambda) = (gap/2)(|psi_1><psi_1| - |psi_2><psi_2|)` (or the LZ form).
    pub fn hamiltonian(&self, lambda: f64, gap: f64) -> Result<HermitianOp> {
        if self.dim() == 2 {
            let t = self.two_level_terms(lambda, gap)?;
            let h = crate::qcore::Herm2 {
                a0: 0.0,
                v: [t.drive[0] / 2.0, t.drive[1] / 2.0, (t.drive[2] + t.bias) / 2.0],
            };
            return Ok(HermitianOp::from_matrix_unchecked(h.to_matrix()));
        }
        let p1 = self.eigvec(0, lambda)?;
        let p2 = self.eigvec(1, lambda)?;
        let m = (&p1 * p1.adjoint() - &p2 * p2.adjoint()) * C64::from(gap / 2.0);
        Ok(HermitianOp::from_matrix_unchecked(m))
    }

    /// Closed-form `g_{n,m}(lambda) = i <psi_n| d/dlambda |psi_m>` when known.
    pub fn analytic_geometric(&self, n: usize, m: usize, lambda: f64) -> Option<C64> {
        match &self.kind {
            PathKind::Latitude { theta, theta_g } => {
                let (s, c) = (theta / 2.0).sin_cos();
                Some(C64::from(match (n, m) {
                    (0, 0) => -theta_g * s * s,
                    (1, 1) => -theta_g * c * c,
                    _ => theta_g * s * c,
                }))
            }
            PathKind::Geodesic { theta_g, .. } | PathKind::LandauZener { theta_g, .. } => {
                Some(match (n, m) {
                    (0, 1) => -I * (theta_g / 2.0),
                    (1, 0) => I * (theta_g / 2.0),
                    _ => ZERO,
                })
            }
            PathKind::Regauged { inner, gauges } => {
                let g = inner.analytic_geometric(n, m, lambda)?;
                let shift = if n == m { gauges[m].derivative(lambda) } else { 0.0 };
                let phase = gauges[m].value(lambda) - gauges[n].value(lambda);
                Some((g - shift) * C64::from_polar(1.0, phase))
            }
        }
    }

    /// Closed-form Berry phase `gamma_n(lambda)` when known.
    pub fn analytic_berry_phase(&self, n: usize, lambda: f64) -> Option<f64> {
        match &self.kind {
            PathKind::Latitude { theta, theta_g } => {
                let (s, c) = (theta / 2.0).sin_cos();
                let w = if n == 0 { s * s } else { c * c };
                Some(-theta_g * w * lambda)
            }
            PathKind::Geodesic { .. } | PathKind::LandauZener { .. } => Some(0.0),
            PathKind::Regauged { inner, gauges } => {
                let g = inner.analytic_berry_phase(n, lambda)?;
                Some(g - (gauges[n].value(lambda) - gauges[n].value(0.0)))
            }
        }
    }

    /// Central finite difference of `g_{n,m}` using this path's own gauge.
    /// With `align`, sampled neighbours of `psi_m` are first rotated to a
    /// real-positive overlap with `psi_m(lambda)`; that removes the diagonal
    /// connection, so it is only meaningful for off-diagonal elements of
    /// frames with arbitrary numerical phases.
    pub fn geometric_fd(&self, n: usize, m: usize, lambda: f64, step: f64, align: bool) -> Result<C64> {
        if !(step > 0.0) {
            return Err(Error::invalid("finite-difference step must be positive"));
        }
        let bra = self.eigvec(n, lambda)?;
        let center = self.eigvec(m, lambda)?;
        let sample = |l: f64| -> Result<DVector<C64>> {
            let v = self.eigvec(m, l)?;
            if align {
                let ov = center.dotc(&v);
                if ov.norm() > 0.0 {
                    return Ok(v * (ov.conj() / ov.norm()));
                }
            }
            Ok(v)
        };
        let deriv = (sample(lambda + step)? - sample(lambda - step)?) / C64::from(2.0 * step);
        Ok(I * bra.dotc(&deriv))
    }

    /// Geometric function: analytic override when available, else finite differences.
    pub(crate) fn g_value(&self, n: usize, m: usize, lambda: f64) -> Result<C64> {
        if n >= self.dim() || m >= self.dim() {
            return Err(Error::invalid("geometric function index out of range"));
        }
        match self.analytic_geometric(n, m, lambda) {
            Some(g) => Ok(g),
            None => self.geometric_fd(n, m, lambda, DEFAULT_FD_STEP, false),
        }
    }

    /// `gamma_n(lambda)`, closed form when available, else quadrature.
    pub fn geometric_phase(&self, n: usize, lambda: f64) -> Result<f64> {
        match self.analytic_berry_phase(n, lambda) {
            Some(g) => Ok(g),
            None => berry_phase_with_grid(self, n, lambda, DEFAULT_BERRY_GRID),
        }
    }
}

/// `g_{n,m}(lambda) = i <psi_n(lambda)| d/dlambda |psi_m(lambda)>`.
pub fn geometric_function(path: &AdiabaticPath, n: usize, m: usize, lambda: f64) -> Result<C64> {
    path.check_regular(lambda)?;
    path.g_value(n, m, lambda)
}

/// `gamma_n(lambda) = int_0^lambda g_{n,n}` by trapezoidal quadrature on the
/// default grid, Richardson-checked against the half grid.
pub fn berry_phase(path: &AdiabaticPath, n: usize, lambda: f64) -> Result<f64> {
    berry_phase_with_grid(path, n, lambda, DEFAULT_BERRY_GRID)
}

pub fn berry_phase_with_grid(path: &AdiabaticPath, n: usize, lambda: f64, grid: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::invalid(format!("lambda must be in [0, 1], got {lambda}")));
    }
    if grid < 4 {
        return Err(Error::invalid("Berry-phase grid needs at least 4 points"));
    }
    if lambda == 0.0 {
        return Ok(0.0);
    }
    // interior singular points are not integrable
    for k in 1..grid {
        let l = lambda * k as f64 / grid as f64;
        path.check_regular(l)?;
    }
    let trap = |cells: usize| -> Result<f64> {
        let h = lambda / cells as f64;
        let mut sum = 0.0;
        for k in 0..=cells {
            let w = if k == 0 || k == cells { 0.5 } else { 1.0 };
            sum += w * path.g_value(n, n, k as f64 * h)?.re;
        }
        Ok(sum * h)
    };
    let fine = trap(grid)?;
    let coarse = trap(grid / 2)?;
    let extrapolated = (4.0 * fine - coarse) / 3.0;
    if (extrapolated - fine).abs() > 1e-6 * (1.0 + fine.abs()) {
        return Err(Error::NonConvergence {
            context: "berry phase quadrature".into(),
            last_change: (extrapolated - fine).abs(),
            substeps: grid,
        });
    }
    Ok(extrapolated)
}
