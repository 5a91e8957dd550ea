//! 2×2 unimodular matrices, the projective line, and the closed-form singular
//! decomposition `A = R_u · diag(‖A‖, ‖A‖⁻¹) · R_{π/2 − s}`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

/// Determinant slack accepted by [`Mat2::new`].
pub const CONSTRUCT_DET_TOL: f64 = 1e-9;
/// Determinant slack accepted after a product in [`Mat2::mul`].
pub const DRIFT_DET_TOL: f64 = 1e-6;
/// Threshold on `‖A‖ − 1` below which singular directions are not reported.
pub const NEAR_ROTATION_TOL: f64 = 1e-10;
/// Angles this close to π are wrapped to 0.
pub const PI_WRAP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Sl2Error {
    #[error("matrix is not in SL(2,R): det = {det}")]
    NotUnimodular { det: f64 },
    #[error("determinant drifted to {det} after multiplication; use scaled cocycle products")]
    DeterminantDrift { det: f64 },
    #[error("matrix is within {excess:e} of a rotation; singular directions are undefined")]
    NearRotation { excess: f64 },
}

/// A real 2×2 matrix with unit determinant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Mat2<T: Real> {
    a11: T,
    a12: T,
    a21: T,
    a22: T,
}

impl<T: Real> Mat2<T> {
    pub fn new(a11: T, a12: T, a21: T, a22: T) -> Result<Self, Sl2Error> {
        let m = Self { a11, a12, a21, a22 };
        let det = m.det();
        if (det - T::one()).abs() > T::tol(CONSTRUCT_DET_TOL) || !det.is_finite() {
            return Err(Sl2Error::NotUnimodular { det: det.to_f64_lossy() });
        }
        Ok(m)
    }

    /// Builds a matrix whose unit determinant holds by construction.
    pub(crate) fn from_entries_unchecked(a11: T, a12: T, a21: T, a22: T) -> Self {
        Self { a11, a12, a21, a22 }
    }

    pub fn identity() -> Self {
        Self::from_entries_unchecked(T::one(), T::zero(), T::zero(), T::one())
    }

    /// `R_θ`, counter-clockwise rotation by `theta`.
    pub fn rotation(theta: T) -> Self {
        let (s, c) = theta.sin_cos();
        Self::from_entries_unchecked(c, -s, s, c)
    }

    /// `diag(t, 1/t)`; `t` must be nonzero.
    pub fn diag(t: T) -> Self {
        Self::from_entries_unchecked(t, T::zero(), T::zero(), t.recip())
    }

    pub fn entries(&self) -> [T; 4] {
        [self.a11, self.a12, self.a21, self.a22]
    }

    pub fn a11(&self) -> T {
        self.a11
    }
    pub fn a12(&self) -> T {
        self.a12
    }
    pub fn a21(&self) -> T {
        self.a21
    }
    pub fn a22(&self) -> T {
        self.a22
    }

    pub fn det(&self) -> T {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn trace(&self) -> T {
        self.a11 + self.a22
    }

    /// `self · rhs`.
    pub fn mul(&self, rhs: &Self) -> Result<Self, Sl2Error> {
        let [a, b, c, d] = mul_raw(self.entries(), rhs.entries());
        let m = Self::from_entries_unchecked(a, b, c, d);
        let det = m.det();
        if (det - T::one()).abs() > T::tol(DRIFT_DET_TOL) || !det.is_finite() {
            return Err(Sl2Error::DeterminantDrift { det: det.to_f64_lossy() });
        }
        Ok(m)
    }

    /// Adjugate, which is the inverse for unit determinant.
    pub fn inverse(&self) -> Self {
        Self::from_entries_unchecked(self.a22, -self.a12, -self.a21, self.a11)
    }

    pub fn apply(&self, v: [T; 2]) -> [T; 2] {
        apply_raw(self.entries(), v)
    }

    /// Largest singular value.
    pub fn norm(&self) -> T {
        singular_values_raw(self.entries()).0
    }

    pub fn svd2(&self) -> Result<Svd2<T>, Sl2Error> {
        let analysis = analyze_raw(self.entries());
        let excess = analysis.sigma_max - T::one();
        if excess < T::lit(NEAR_ROTATION_TOL) {
            return Err(Sl2Error::NearRotation { excess: excess.to_f64_lossy() });
        }
        Ok(Svd2 {
            norm: analysis.sigma_max,
            contract_dir: analysis.contract_dir,
            expand_dir: ProjPoint::new(analysis.expand_angle),
            expand_angle: analysis.expand_angle,
        })
    }

    /// Projective action on `RP¹`.
    pub fn proj_act(&self, p: ProjPoint<T>) -> ProjPoint<T> {
        let [x, y] = self.apply(p.unit());
        ProjPoint::from_vector(x, y)
    }

    pub fn approx_eq(&self, other: &Self, tol: T) -> bool {
        self.entries()
            .iter()
            .zip(other.entries().iter())
            .all(|(a, b)| (*a - *b).abs() <= tol)
    }
}

/// A direction in `RP¹ = R/(πZ)`, stored as an angle in `[0, π)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ProjPoint<T: Real> {
    angle: T,
}

impl<T: Real> ProjPoint<T> {
    pub fn new(angle: T) -> Self {
        let pi = T::PI();
        let mut a = angle % pi;
        if a < T::zero() {
            a = a + pi;
        }
        if pi - a < T::lit(PI_WRAP_TOL) || a >= pi {
            a = T::zero();
        }
        Self { angle: a }
    }

    /// Direction spanned by `(x, y)`; the zero vector maps to angle 0.
    pub fn from_vector(x: T, y: T) -> Self {
        Self::new(y.atan2(x))
    }

    pub fn angle(&self) -> T {
        self.angle
    }

    /// Unit representative `(cos θ, sin θ)`.
    pub fn unit(&self) -> [T; 2] {
        let (s, c) = self.angle.sin_cos();
        [c, s]
    }

    /// Projective distance `min(|p − q|, π − |p − q|)`, at most π/2.
    pub fn distance(&self, other: &Self) -> T {
        let d = (self.angle - other.angle).abs();
        d.min(T::PI() - d)
    }

    /// The orthogonal direction.
    pub fn perp(&self) -> Self {
        Self::new(self.angle + T::FRAC_PI_2())
    }
}

/// Singular decomposition of a unimodular 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Svd2<T: Real> {
    /// Largest singular value `‖A‖ ≥ 1`.
    pub norm: T,
    /// Most-contracted direction `s(A)`.
    pub contract_dir: ProjPoint<T>,
    /// Image of the most-expanded direction.
    pub expand_dir: ProjPoint<T>,
    /// Representative of `expand_dir` in `(-π, π]` that makes [`Svd2::reconstruct`] exact.
    expand_angle: T,
}

impl<T: Real> Svd2<T> {
    /// `R_{expand} · diag(norm, 1/norm) · R_{π/2 − contract}`.
    pub fn reconstruct(&self) -> Mat2<T> {
        let left = Mat2::rotation(self.expand_angle);
        let right = Mat2::rotation(T::FRAC_PI_2() - self.contract_dir.angle());
        let d = Mat2::diag(self.norm);
        Mat2::from_entries_unchecked_mul(&left, &Mat2::from_entries_unchecked_mul(&d, &right))
    }
}

impl<T: Real> Mat2<T> {
    fn from_entries_unchecked_mul(a: &Self, b: &Self) -> Self {
        let [p, q, r, s] = mul_raw(a.entries(), b.entries());
        Self::from_entries_unchecked(p, q, r, s)
    }
}

#[inline]
pub(crate) fn mul_raw<T: Real>(a: [T; 4], b: [T; 4]) -> [T; 4] {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
    ]
}

#[inline]
pub(crate) fn apply_raw<T: Real>(m: [T; 4], v: [T; 2]) -> [T; 2] {
    [m[0] * v[0] + m[1] * v[1], m[2] * v[0] + m[3] * v[1]]
}

/// Entries of `MᵀM` as `(p, q, r)` for `[[p, q], [q, r]]`.
#[inline]
pub(crate) fn gram_raw<T: Real>(m: [T; 4]) -> (T, T, T) {
    (
        m[0] * m[0] + m[2] * m[2],
        m[0] * m[1] + m[2] * m[3],
        m[1] * m[1] + m[3] * m[3],
    )
}

/// `(σ_max, σ_min)` of an arbitrary real 2×2 matrix.
pub(crate) fn singular_values_raw<T: Real>(m: [T; 4]) -> (T, T) {
    let (p, q, r) = gram_raw(m);
    let half = T::lit(0.5);
    let mean = (p + r) * half;
    let rad = ((p - r) * half).hypot(q);
    let big = (mean + rad).sqrt();
    let det = (m[0] * m[3] - m[1] * m[2]).abs();
    let small = if big > T::zero() { det / big } else { T::zero() };
    (big, small)
}

pub(crate) struct RawAnalysis<T: Real> {
    pub sigma_max: T,
    pub contract_dir: ProjPoint<T>,
    /// Angle of `M · w` where `w` is the unit vector at `contract − π/2`.
    pub expand_angle: T,
}

/// Singular directions of an arbitrary real 2×2 matrix with `det > 0`.
pub(crate) fn analyze_raw<T: Real>(m: [T; 4]) -> RawAnalysis<T> {
    let (p, q, r) = gram_raw(m);
    let (sigma_max, _) = singular_values_raw(m);
    let major = T::lit(0.5) * (q + q).atan2(p - r);
    let contract_dir = ProjPoint::new(major + T::FRAC_PI_2());
    let w = contract_dir.angle() - T::FRAC_PI_2();
    let (ws, wc) = w.sin_cos();
    let [x, y] = apply_raw(m, [wc, ws]);
    RawAnalysis {
        sigma_max,
        contract_dir,
        expand_angle: y.atan2(x),
    }
}
