//! Small dense complex linear algebra: pure states, Hermitian operators,
//! unitaries, exact exponentials and Bloch projections.
//!
//! Conventions: hbar = 1, energies in rad/s, basis order `(|z>, |-z>)` for
//! two-level systems so that `sigma_z |z> = |z>`.

use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

const HERMITIAN_TOL: f64 = 1e-12;
const UNITARY_TOL: f64 = 1e-10;

/// Angular frequency from a value in MHz, i.e. `2 pi x mhz x 1e6` rad/s.
pub fn two_pi_mhz(mhz: f64) -> f64 {
    2.0 * std::f64::consts::PI * mhz * 1e6
}

/// Normalized state vector of dimension `d >= 2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<C64>", into = "Vec<C64>")]
pub struct PureState(DVector<C64>);

impl TryFrom<Vec<C64>> for PureState {
    type Error = Error;
    fn try_from(v: Vec<C64>) -> Result<Self> {
        PureState::new(v)
    }
}

impl From<PureState> for Vec<C64> {
    fn from(s: PureState) -> Self {
        s.0.iter().copied().collect()
    }
}

impl PureState {
    /// Build a state from raw amplitudes; the vector is normalized.
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        Self::from_vector(DVector::from_vec(amplitudes))
    }

    pub fn from_vector(v: DVector<C64>) -> Result<Self> {
        if v.len() < 2 {
            return Err(Error::invalid(format!(
                "state dimension must be >= 2, got {}",
                v.len()
            )));
        }
        let norm = v.norm();
        if !norm.is_finite() || norm < 1e-300 {
            return Err(Error::ZeroNorm);
        }
        Ok(PureState(v / C64::from(norm)))
    }

    /// Wrap a vector already known to be normalized.
    pub(crate) fn from_normalized(v: DVector<C64>) -> Self {
        debug_assert!((v.norm() - 1.0).abs() < 1e-9);
        PureState(v)
    }

    pub fn basis(d: usize, k: usize) -> Result<Self> {
        if k >= d {
            return Err(Error::invalid(format!("basis index {k} out of range for d = {d}")));
        }
        let mut v = DVector::from_element(d, ZERO);
        v[k] = ONE;
        Self::from_vector(v)
    }

    fn qubit(a: C64, b: C64) -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        PureState(DVector::from_vec(vec![a * s, b * s]))
    }

    pub fn z() -> Self {
        PureState(DVector::from_vec(vec![ONE, ZERO]))
    }

    pub fn minus_z() -> Self {
        PureState(DVector::from_vec(vec![ZERO, ONE]))
    }

    pub fn x() -> Self {
        Self::qubit(ONE, ONE)
    }

    pub fn minus_x() -> Self {
        Self::qubit(ONE, -ONE)
    }

    pub fn y() -> Self {
        Self::qubit(ONE, I)
    }

    pub fn minus_y() -> Self {
        Self::qubit(ONE, -I)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_vector(&self) -> &DVector<C64> {
        &self.0
    }

    pub fn amplitudes(&self) -> Vec<C64> {
        self.0.iter().copied().collect()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &PureState) -> Result<C64> {
        check_dim(self.dim(), other.dim())?;
        Ok(self.0.dotc(&other.0))
    }

    pub fn norm_deviation(&self) -> f64 {
        (self.0.norm() - 1.0).abs()
    }

    /// Multiply by a global phase `e^{i alpha}`.
    pub fn with_phase(&self, alpha: f64) -> PureState {
        PureState(&self.0 * C64::from_polar(1.0, alpha))
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Hermitian operator in rad/s.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOp(DMatrix<C64>);

impl HermitianOp {
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if !m.is_square() || m.nrows() < 2 {
            return Err(Error::invalid("Hermitian operator must be square with d >= 2"));
        }
        let deviation = spectral_norm(&(&m - m.adjoint()));
        if deviation > HERMITIAN_TOL * (1.0 + spectral_norm(&m)) {
            return Err(Error::NotHermitian { deviation });
        }
        // symmetrize away rounding noise
        let h = (&m + m.adjoint()) * C64::from(0.5);
        Ok(HermitianOp(h))
    }

    pub(crate) fn from_matrix_unchecked(m: DMatrix<C64>) -> Self {
        HermitianOp(m)
    }

    pub fn zero(d: usize) -> Self {
        HermitianOp(DMatrix::from_element(d, d, ZERO))
    }

    pub fn sigma_x() -> Self {
        HermitianOp(DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]))
    }

    pub fn sigma_y() -> Self {
        HermitianOp(DMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]))
    }

    pub fn sigma_z() -> Self {
        HermitianOp(DMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn scale(&self, s: f64) -> HermitianOp {
        HermitianOp(&self.0 * C64::from(s))
    }

    pub fn add(&self, other: &HermitianOp) -> Result<HermitianOp> {
        check_dim(self.dim(), other.dim())?;
        Ok(HermitianOp(&self.0 + &other.0))
    }

    /// Projector `|psi><psi|`.
    pub fn projector(psi: &PureState) -> HermitianOp {
        HermitianOp(psi.as_vector() * psi.as_vector().adjoint())
    }
}

/// Unitary matrix, `U^dagger U = I` within 1e-10 in spectral norm.
#[derive(Clone, Debug, PartialEq)]
pub struct Unitary(DMatrix<C64>);

impl Unitary {
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if !m.is_square() || m.nrows() < 2 {
            return Err(Error::invalid("unitary must be square with d >= 2"));
        }
        let u = Unitary(m);
        let dev = u.unitarity_deviation();
        if dev > UNITARY_TOL {
            return Err(Error::invalid(format!("matrix is not unitary (deviation {dev:.3e})")));
        }
        Ok(u)
    }

    pub(crate) fn from_matrix_unchecked(m: DMatrix<C64>) -> Self {
        Unitary(m)
    }

    pub(crate) fn from_matrix2(m: &Matrix2<C64>) -> Self {
        Unitary(DMatrix::from_iterator(2, 2, m.iter().copied()))
    }

    pub fn identity(d: usize) -> Self {
        Unitary(DMatrix::identity(d, d))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn adjoint(&self) -> Unitary {
        Unitary(self.0.adjoint())
    }

    /// `self * rhs` (rhs acts first).
    pub fn compose(&self, rhs: &Unitary) -> Result<Unitary> {
        check_dim(self.dim(), rhs.dim())?;
        Ok(Unitary(&self.0 * &rhs.0))
    }

    pub fn apply(&self, psi: &PureState) -> Result<PureState> {
        check_dim(self.dim(), psi.dim())?;
        Ok(PureState(&self.0 * psi.as_vector()))
    }

    /// `||U^dagger U - I||`.
    pub fn unitarity_deviation(&self) -> f64 {
        let d = self.dim();
        spectral_norm(&(self.0.adjoint() * &self.0 - DMatrix::<C64>::identity(d, d)))
    }

    /// Spectral-norm distance `||self - other||`.
    pub fn distance(&self, other: &Unitary) -> f64 {
        spectral_norm(&(&self.0 - &other.0))
    }

    /// `||U - I||`.
    pub fn deviation_from_identity(&self) -> f64 {
        let d = self.dim();
        spectral_norm(&(&self.0 - DMatrix::<C64>::identity(d, d)))
    }

    /// Distance modulo a global phase: `min_alpha ||self - e^{i alpha} other||`,
    /// evaluated at the phase of `Tr(other^dagger self)`.
    pub fn distance_up_to_phase(&self, other: &Unitary) -> f64 {
        let tr = (other.0.adjoint() * &self.0).trace();
        let phase = if tr.norm() > 0.0 { tr / tr.norm() } else { ONE };
        spectral_norm(&(&self.0 - &other.0 * phase))
    }

    pub fn rows(&self) -> Vec<Vec<C64>> {
        (0..self.dim())
            .map(|r| self.0.row(r).iter().copied().collect())
            .collect()
    }
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<C64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.singular_values().max()
}

/// Closest unitary in the polar sense, `W V^dagger` from `M = W S V^dagger`.
pub(crate) fn nearest_unitary(m: &DMatrix<C64>) -> DMatrix<C64> {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("svd u requested");
    let v_t = svd.v_t.expect("svd v_t requested");
    u * v_t
}

/// `|<a|b>|^2`.
pub fn fidelity(a: &PureState, b: &PureState) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr().min(1.0))
}

/// `exp(-i H t)`. Two-level operators use the closed Pauli form, larger ones
/// an eigendecomposition.
pub fn expm_herm(h: &HermitianOp, t: f64) -> Result<Unitary> {
    if !t.is_finite() {
        return Err(Error::invalid("evolution time must be finite"));
    }
    let m = h.matrix();
    let deviation = spectral_norm(&(m - m.adjoint()));
    if deviation > HERMITIAN_TOL * (1.0 + spectral_norm(m)) {
        return Err(Error::NotHermitian { deviation });
    }
    if h.dim() == 2 {
        let u = Herm2::from_matrix(m).expm(t);
        return Ok(Unitary::from_matrix2(&u));
    }
    Ok(Unitary(expm_eigen(m, t)))
}

pub(crate) fn expm_eigen(m: &DMatrix<C64>, t: f64) -> DMatrix<C64> {
    let eig = m.clone().symmetric_eigen();
    let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|e| C64::from_polar(1.0, -e * t)));
    &eig.eigenvectors * phases * eig.eigenvectors.adjoint()
}

/// `(p_x, p_y, p_z)` with `p_a = |<a|psi>|^2`.
pub fn bloch_projections(psi: &PureState) -> Result<(f64, f64, f64)> {
    if psi.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: psi.dim() });
    }
    Ok((
        fidelity(&PureState::x(), psi)?,
        fidelity(&PureState::y(), psi)?,
        fidelity(&PureState::z(), psi)?,
    ))
}

/// Two-level Hermitian operator `a0 I + v . sigma`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub(crate) struct Herm2 {
    pub a0: f64,
    pub v: [f64; 3],
}

impl Herm2 {
    pub fn from_matrix(m: &DMatrix<C64>) -> Self {
        let a0 = 0.5 * (m[(0, 0)].re + m[(1, 1)].re);
        let az = 0.5 * (m[(0, 0)].re - m[(1, 1)].re);
        let off = 0.5 * (m[(0, 1)] + m[(1, 0)].conj());
        Herm2 { a0, v: [off.re, -off.im, az] }
    }

    pub fn scale(self, s: f64) -> Self {
        Herm2 { a0: self.a0 * s, v: [self.v[0] * s, self.v[1] * s, self.v[2] * s] }
    }

    pub fn to_matrix(self) -> DMatrix<C64> {
        let [x, y, z] = self.v;
        DMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(self.a0 + z, 0.0),
                C64::new(x, -y),
                C64::new(x, y),
                C64::new(self.a0 - z, 0.0),
            ],
        )
    }

    /// `exp(-i t (a0 + v . sigma))`.
    pub fn expm(self, t: f64) -> Matrix2<C64> {
        let [x, y, z] = self.v;
        let r = (x * x + y * y + z * z).sqrt();
        let (s, c) = (r * t).sin_cos();
        // sin(r t) / r, finite at r = 0
        let k = if r * t.abs() > 1e-300 { s / r } else { t };
        let g = C64::from_polar(1.0, -self.a0 * t);
        Matrix2::new(
            g * C64::new(c, -k * z),
            g * C64::new(-k * y, -k * x),
            g * C64::new(k * y, -k * x),
            g * C64::new(c, k * z),
        )
    }
}

/// Projects an almost-unitary 2x2 matrix back onto U(2).
pub(crate) fn nearest_unitary2(m: &Matrix2<C64>) -> Matrix2<C64> {
    let svd = m.svd(true, true);
    svd.u.expect("u") * svd.v_t.expect("v_t")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn random_herm2(seed: u64) -> HermitianOp {
        // small deterministic LCG; no need for a full RNG here
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let (a, b, re, im) = (next(), next(), next(), next());
        HermitianOp::new(DMatrix::from_row_slice(
            2,
            2,
            &[C64::from(a), C64::new(re, im), C64::new(re, -im), C64::from(b)],
        ))
        .unwrap()
    }

    #[test]
    fn fidelity_examples() {
        let x = PureState::x();
        assert!((fidelity(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        assert!(fidelity(&PureState::z(), &PureState::minus_z()).unwrap().abs() < 1e-15);
        assert!((fidelity(&PureState::x(), &PureState::y()).unwrap() - 0.5).abs() < 1e-15);
        let a = PureState::basis(3, 0).unwrap();
        assert!(matches!(
            fidelity(&a, &x),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn fidelity_is_gauge_invariant() {
        let a = PureState::new(vec![C64::new(0.3, 0.1), C64::new(-0.2, 0.7)]).unwrap();
        let b = PureState::y();
        let f = fidelity(&a, &b).unwrap();
        assert!((fidelity(&a.with_phase(1.3), &b.with_phase(-0.4)).unwrap() - f).abs() < 1e-15);
        assert!((fidelity(&b, &a).unwrap() - f).abs() < 1e-15);
    }

    #[test]
    fn zero_norm_rejected() {
        assert!(matches!(PureState::new(vec![ZERO, ZERO]), Err(Error::ZeroNorm)));
        assert!(PureState::new(vec![ONE]).is_err());
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let u = expm_herm(&HermitianOp::zero(2), 3.7).unwrap();
        assert!(u.deviation_from_identity() < 1e-15);
        let u3 = expm_herm(&HermitianOp::zero(3), 3.7).unwrap();
        assert!(u3.deviation_from_identity() < 1e-14);
    }

    #[test]
    fn expm_pi_pulse_is_minus_i_sigma_x() {
        // H = Omega sigma_x / 2 with Omega t = pi
        let omega = two_pi_mhz(5.0);
        let u = expm_herm(&HermitianOp::sigma_x().scale(omega / 2.0), PI / omega).unwrap();
        let expected = HermitianOp::sigma_x().matrix() * C64::new(0.0, -1.0);
        assert!(spectral_norm(&(u.matrix() - expected)) < 1e-12);
    }

    #[test]
    fn expm_matches_eigendecomposition() {
        for seed in 0..20 {
            let h = random_herm2(seed);
            let t = 0.37 + seed as f64 * 0.9;
            let closed = expm_herm(&h, t).unwrap();
            let oracle = expm_eigen(h.matrix(), t);
            assert!(spectral_norm(&(closed.matrix() - oracle)) < 1e-12, "seed {seed}");
            assert!(closed.unitarity_deviation() < 1e-12);
        }
    }

    #[test]
    fn expm_rejects_non_hermitian() {
        let m = DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO]);
        let h = HermitianOp::from_matrix_unchecked(m);
        assert!(matches!(expm_herm(&h, 1.0), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn expm_group_property() {
        let h = random_herm2(7);
        let (t1, t2) = (0.8, 2.3);
        let a = expm_herm(&h, t1).unwrap();
        let b = expm_herm(&h, t2).unwrap();
        let ab = expm_herm(&h, t1 + t2).unwrap();
        assert!(a.compose(&b).unwrap().distance(&ab) < 1e-11);
    }

    #[test]
    fn bloch_projection_examples() {
        let close = |a: (f64, f64, f64), b: (f64, f64, f64)| {
            (a.0 - b.0).abs() < 1e-15 && (a.1 - b.1).abs() < 1e-15 && (a.2 - b.2).abs() < 1e-15
        };
        assert!(close(bloch_projections(&PureState::x()).unwrap(), (1.0, 0.5, 0.5)));
        assert!(close(bloch_projections(&PureState::z()).unwrap(), (0.5, 0.5, 1.0)));
        assert!(close(bloch_projections(&PureState::y()).unwrap(), (0.5, 1.0, 0.5)));
        assert!(bloch_projections(&PureState::basis(3, 1).unwrap()).is_err());
    }

    #[test]
    fn herm2_roundtrip() {
        let h = random_herm2(3);
        let back = Herm2::from_matrix(h.matrix()).to_matrix();
        assert!(spectral_norm(&(back - h.matrix())) < 1e-15);
    }

    #[test]
    fn nearest_unitary_fixes_small_drift() {
        let u = expm_herm(&random_herm2(11), 1.1).unwrap();
        let drifted = u.matrix() * C64::from(1.0 + 1e-7);
        let fixed = Unitary::from_matrix_unchecked(nearest_unitary(&drifted));
        assert!(fixed.unitarity_deviation() < 1e-14);
        assert!(fixed.distance(&u) < 1e-12);
    }
}
