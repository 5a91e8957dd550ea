//! Potentials, Schrödinger transfer matrices and overflow-safe cocycle products.
//!
//! For a potential `v` and energy `E` the transfer matrix at site `n` is
//! `A(n) = [[E − v(n), −1], [1, 0]]`, and
//!
//! ```text
//! A_n(k) = A(k+n−1) ⋯ A(k)            n ≥ 1
//!        = I                          n = 0
//!        = A(k+n)⁻¹ ⋯ A(k−1)⁻¹        n ≤ −1
//! ```
//!
//! Long products are carried as `e^{log_scale} · M` with the entries of `M`
//! renormalized whenever they exceed [`RENORM_THRESHOLD`].

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{Interval, Sequence};
use crate::scalar::Real;
use crate::sl2::{analyze_raw, apply_raw, mul_raw, singular_values_raw, Mat2, ProjPoint, Sl2Error};

pub const RENORM_THRESHOLD: f64 = 1e8;
pub const SOLUTION_OVERFLOW: f64 = 1e300;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CocycleError {
    #[error("potential value {value} at site {n} exceeds declared bound {bound}")]
    PotentialBoundViolation { n: i64, value: f64, bound: f64 },
    #[error("site {n} is outside the stored range [{first}, {last}]")]
    OutOfRange { n: i64, first: i64, last: i64 },
    #[error("solution magnitude exceeded 1e300 at site {n}; use log-scaled products")]
    Overflow { n: i64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Sl2(#[from] Sl2Error),
}

/// Structured metadata describing where a potential came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptor {
    pub family: String,
    #[serde(default)]
    pub params: serde_json::Value,
    /// Cumulative integer shift applied on top of the base sequence.
    #[serde(default)]
    pub shift: i64,
    /// Marks the designated dense-orbit point of a hull sample.
    #[serde(default)]
    pub dense_orbit_point: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

impl Descriptor {
    pub fn new(family: impl Into<String>, params: serde_json::Value) -> Self {
        Self {
            family: family.into(),
            params,
            shift: 0,
            dense_orbit_point: false,
            flags: Vec::new(),
        }
    }
}

/// A bounded real sequence `v: Z → [−M, M]`, sampled on demand.
///
/// Implementations must be pure functions of `n` so that sources can be
/// shared across threads.
pub trait PotentialSource<T: Real>: Send + Sync {
    /// Unchecked value `v(n)`.
    fn value(&self, n: i64) -> Result<T, CocycleError>;

    /// Declared bound `M` with `|v(n)| ≤ M`.
    fn bound(&self) -> T;

    fn descriptor(&self) -> Descriptor;

    /// `v(n)` with the bound enforced.
    fn sample(&self, n: i64) -> Result<T, CocycleError> {
        let v = self.value(n)?;
        let bound = self.bound();
        if !(v.abs() <= bound) {
            return Err(CocycleError::PotentialBoundViolation {
                n,
                value: v.to_f64_lossy(),
                bound: bound.to_f64_lossy(),
            });
        }
        Ok(v)
    }
}

pub type SharedSource<T> = Arc<dyn PotentialSource<T>>;

impl<T: Real, S: PotentialSource<T> + ?Sized> PotentialSource<T> for Arc<S> {
    fn value(&self, n: i64) -> Result<T, CocycleError> {
        (**self).value(n)
    }
    fn bound(&self) -> T {
        (**self).bound()
    }
    fn descriptor(&self) -> Descriptor {
        (**self).descriptor()
    }
    fn sample(&self, n: i64) -> Result<T, CocycleError> {
        (**self).sample(n)
    }
}

/// Potential given by a closure.
pub struct FnPotential<T, F> {
    f: F,
    bound: T,
    descriptor: Descriptor,
}

impl<T: Real, F: Fn(i64) -> T + Send + Sync> FnPotential<T, F> {
    pub fn new(f: F, bound: T, descriptor: Descriptor) -> Self {
        Self { f, bound, descriptor }
    }
}

impl<T: Real, F: Fn(i64) -> T + Send + Sync> PotentialSource<T> for FnPotential<T, F> {
    fn value(&self, n: i64) -> Result<T, CocycleError> {
        Ok((self.f)(n))
    }
    fn bound(&self) -> T {
        self.bound
    }
    fn descriptor(&self) -> Descriptor {
        self.descriptor.clone()
    }
}

/// Finite stored sequence; queries outside the stored range are errors.
#[derive(Debug, Clone)]
pub struct SequencePotential<T: Real> {
    values: Sequence<T>,
    bound: T,
    descriptor: Descriptor,
}

impl<T: Real> SequencePotential<T> {
    pub fn new(values: Sequence<T>, bound: T, descriptor: Descriptor) -> Self {
        Self { values, bound, descriptor }
    }

    pub fn range(&self) -> Interval {
        self.values.support()
    }
}

impl<T: Real> PotentialSource<T> for SequencePotential<T> {
    fn value(&self, n: i64) -> Result<T, CocycleError> {
        let range = self.values.support();
        if !range.contains(n) {
            return Err(CocycleError::OutOfRange { n, first: range.lo, last: range.hi });
        }
        Ok(self.values.get(n))
    }
    fn bound(&self) -> T {
        self.bound
    }
    fn descriptor(&self) -> Descriptor {
        self.descriptor.clone()
    }
}

/// `[[E − v_n, −1], [1, 0]]`.
pub fn transfer<T: Real>(energy: T, v_n: T) -> Mat2<T> {
    Mat2::from_entries_unchecked(energy - v_n, -T::one(), T::one(), T::zero())
}

/// The cocycle product `A_n(k)`, represented as `e^{log_scale} · matrix`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CocycleProduct<T: Real> {
    /// Entries `[m11, m12, m21, m22]`; unimodular only when `log_scale == 0`.
    pub matrix: [T; 4],
    pub log_scale: T,
    pub n: i64,
    pub k: i64,
}

impl<T: Real> CocycleProduct<T> {
    pub fn identity(k: i64) -> Self {
        Self {
            matrix: [T::one(), T::zero(), T::zero(), T::one()],
            log_scale: T::zero(),
            n: 0,
            k,
        }
    }

    /// `log ‖A_n(k)‖`.
    pub fn log_norm(&self) -> T {
        self.log_scale + singular_values_raw(self.matrix).0.ln()
    }

    /// `log ‖A_n(k) w‖` for a unit vector `w`.
    pub fn log_norm_of(&self, w: [T; 2]) -> T {
        let [x, y] = apply_raw(self.matrix, w);
        self.log_scale + x.hypot(y).ln()
    }

    /// Image direction `A_n(k) · p`.
    pub fn proj_act(&self, p: ProjPoint<T>) -> ProjPoint<T> {
        let [x, y] = apply_raw(self.matrix, p.unit());
        ProjPoint::from_vector(x, y)
    }

    /// `A_n(k)⁻¹ = A_{−n}(k+n)` via the adjugate (unit determinant holds by construction).
    pub fn inverse(&self) -> Self {
        let [a, b, c, d] = self.matrix;
        Self {
            matrix: [d, -b, -c, a],
            log_scale: self.log_scale,
            n: -self.n,
            k: self.k + self.n,
        }
    }

    /// Matrix entries scaled so the largest has modulus 1, and the matching log scale.
    pub fn normalized(&self) -> ([T; 4], T) {
        let big = self.matrix.iter().fold(T::zero(), |acc, x| acc.max(x.abs()));
        let mut m = self.matrix;
        for x in m.iter_mut() {
            *x = *x / big;
        }
        (m, self.log_scale + big.ln())
    }

    /// Singular data of the represented product.
    pub fn singular(&self) -> Result<ProductSvd<T>, CocycleError> {
        let log_norm = self.log_norm();
        let tol = T::lit(crate::sl2::NEAR_ROTATION_TOL);
        if log_norm < tol {
            return Err(Sl2Error::NearRotation { excess: log_norm.exp_m1().to_f64_lossy() }.into());
        }
        let a = analyze_raw(self.matrix);
        Ok(ProductSvd {
            log_norm,
            contract_dir: a.contract_dir,
            expand_dir: ProjPoint::new(a.expand_angle),
        })
    }

    /// The product as a plain matrix, when its entries are representable.
    pub fn to_mat2(&self) -> Option<Mat2<T>> {
        let s = self.log_scale.exp();
        if !s.is_finite() {
            return None;
        }
        let m = self.matrix;
        Some(Mat2::from_entries_unchecked(m[0] * s, m[1] * s, m[2] * s, m[3] * s))
    }

    /// `later ∘ self`, i.e. `A_m(k+n) · A_n(k) = A_{n+m}(k)`.
    pub fn then(&self, later: &Self) -> Self {
        let mut out = Self {
            matrix: mul_raw(later.matrix, self.matrix),
            log_scale: self.log_scale + later.log_scale,
            n: self.n + later.n,
            k: self.k,
        };
        out.renormalize();
        out
    }

    fn renormalize(&mut self) {
        let big = self.matrix.iter().fold(T::zero(), |acc, x| acc.max(x.abs()));
        if big > T::lit(RENORM_THRESHOLD) {
            for x in self.matrix.iter_mut() {
                *x = *x / big;
            }
            self.log_scale = self.log_scale + big.ln();
        }
    }

    fn step_forward(&mut self, x: T) {
        // [[x, −1], [1, 0]] · M
        let [a, b, c, d] = self.matrix;
        self.matrix = [x * a - c, x * b - d, a, b];
        self.n += 1;
        self.renormalize();
    }

    fn step_backward(&mut self, x: T) {
        // [[0, 1], [−1, x]] · M
        let [a, b, c, d] = self.matrix;
        self.matrix = [c, d, x * c - a, x * d - b];
        self.n -= 1;
        self.renormalize();
    }
}

/// Singular data of a (possibly huge) cocycle product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ProductSvd<T: Real> {
    pub log_norm: T,
    pub contract_dir: ProjPoint<T>,
    pub expand_dir: ProjPoint<T>,
}

/// `A_n(k)` for the Schrödinger cocycle of `src` at energy `energy`.
pub fn product<T: Real, S: PotentialSource<T> + ?Sized>(
    src: &S,
    energy: T,
    k: i64,
    n: i64,
) -> Result<CocycleProduct<T>, CocycleError> {
    let mut p = CocycleProduct::identity(k);
    if n > 0 {
        for j in k..k + n {
            p.step_forward(energy - src.sample(j)?);
        }
    } else {
        for j in (k + n..k).rev() {
            p.step_backward(energy - src.sample(j)?);
        }
    }
    Ok(p)
}

/// All products `A_{s}(k), A_{2s}(k), …, A_{n}(k)` with `s = sign(n)`.
pub fn product_sequence<T: Real, S: PotentialSource<T> + ?Sized>(
    src: &S,
    energy: T,
    k: i64,
    n: i64,
) -> Result<Vec<CocycleProduct<T>>, CocycleError> {
    let mut out = Vec::with_capacity(n.unsigned_abs() as usize);
    let mut p = CocycleProduct::identity(k);
    if n > 0 {
        for j in k..k + n {
            p.step_forward(energy - src.sample(j)?);
            out.push(p);
        }
    } else {
        for j in (k + n..k).rev() {
            p.step_backward(energy - src.sample(j)?);
            out.push(p);
        }
    }
    Ok(out)
}

/// Solution of `u_{n+1} + u_{n−1} + v(n) u_n = E u_n` on `range` with
/// `(u_0, u_{−1}) = v0`, by forward and backward three-term recurrence.
pub fn solution_from_vector<T: Real, S: PotentialSource<T> + ?Sized>(
    src: &S,
    energy: T,
    v0: [T; 2],
    range: Interval,
) -> Result<Sequence<T>, CocycleError> {
    if !(range.contains(-1) && range.contains(0)) {
        return Err(CocycleError::InvalidArgument(format!(
            "range [{}, {}] must contain -1 and 0",
            range.lo, range.hi
        )));
    }
    let norm = v0[0].hypot(v0[1]);
    if (norm - T::one()).abs() > T::tol(1e-9) {
        return Err(CocycleError::InvalidArgument(format!(
            "initial vector must be a unit vector, got norm {norm}"
        )));
    }
    let limit = {
        let l = T::lit(SOLUTION_OVERFLOW);
        if l.is_finite() {
            l
        } else {
            T::max_value() / T::lit(RENORM_THRESHOLD)
        }
    };
    let mut values = vec![T::zero(); range.len()];
    let idx = |n: i64| (n - range.lo) as usize;
    values[idx(0)] = v0[0];
    values[idx(-1)] = v0[1];
    for n in 0..range.hi {
        let next = (energy - src.sample(n)?) * values[idx(n)] - values[idx(n - 1)];
        if !(next.abs() <= limit) {
            return Err(CocycleError::Overflow { n: n + 1 });
        }
        values[idx(n + 1)] = next;
    }
    for n in (range.lo + 1..=-1).rev() {
        let prev = (energy - src.sample(n)?) * values[idx(n)] - values[idx(n + 1)];
        if !(prev.abs() <= limit) {
            return Err(CocycleError::Overflow { n: n - 1 });
        }
        values[idx(n - 1)] = prev;
    }
    Ok(Sequence::new(range.lo, values))
}
