//! Finite sections of `H_v`, Sturm bisection, Weyl defects and support-length search.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cocycle::{CocycleError, PotentialSource};
use crate::lattice::{Interval, Sequence};
use crate::scalar::Real;

/// Norm below which a truncated solution cannot be normalized.
pub const DEGENERATE_NORM: f64 = 1e-12;
/// Tolerance for "unit norm" preconditions.
pub const UNIT_TOL: f64 = 1e-9;
/// Relative tolerance for the eigenfunction-recurrence precondition.
pub const RECURRENCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OperatorError {
    #[error("no unit vector with defect < {eps} supported on an interval of length ≤ {l_max}")]
    NotFound { eps: f64, l_max: usize },
    #[error("truncated solution has norm {norm:e} < 1e-12")]
    DegenerateNorm { norm: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Cocycle(#[from] CocycleError),
}

/// `H_v` restricted to `[first_index, first_index + size − 1]` with Dirichlet ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FiniteSection<T: Real> {
    pub first_index: i64,
    /// `v(n)` on the section; the energy shift is applied at query time.
    pub diagonal: Vec<T>,
}

impl<T: Real> FiniteSection<T> {
    pub fn new(first_index: i64, diagonal: Vec<T>) -> Result<Self, OperatorError> {
        if diagonal.is_empty() {
            return Err(OperatorError::InvalidArgument("section size must be ≥ 1".into()));
        }
        Ok(Self { first_index, diagonal })
    }

    pub fn from_source<S: PotentialSource<T> + ?Sized>(src: &S, support: Interval) -> Result<Self, OperatorError> {
        let diagonal = support.iter().map(|n| src.sample(n)).collect::<Result<Vec<_>, _>>()?;
        Self::new(support.lo, diagonal)
    }

    /// Section of length `size` centered at `center` (left-biased for even sizes).
    pub fn centered<S: PotentialSource<T> + ?Sized>(src: &S, center: i64, size: usize) -> Result<Self, OperatorError> {
        let lo = center - (size as i64 - 1) / 2;
        Self::from_source(src, Interval::new(lo, lo + size as i64 - 1))
    }

    pub fn size(&self) -> usize {
        self.diagonal.len()
    }

    pub fn support(&self) -> Interval {
        Interval::new(self.first_index, self.first_index + self.size() as i64 - 1)
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn count_below(&self, x: T) -> usize {
        sturm_count(&self.diagonal, x)
    }

    /// Gershgorin enclosure of the (unshifted) spectrum.
    pub fn gershgorin(&self) -> (T, T) {
        let two = T::lit(2.0);
        self.diagonal.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &d| {
            (lo.min(d - two), hi.max(d + two))
        })
    }

    /// `(H − E)u` for `u` given on any interval; the result lives on `support(u) ± 1`
    /// intersected with the section.
    pub fn apply_shifted(&self, energy: T, u: &Sequence<T>) -> Sequence<T> {
        let range = self.support();
        let out = Interval::new(range.lo.max(u.first - 1), range.hi.min(u.support().hi + 1));
        let values = out
            .iter()
            .map(|n| {
                let d = self.diagonal[(n - range.lo) as usize];
                let left = if n > range.lo { u.get(n - 1) } else { T::zero() };
                let right = if n < range.hi { u.get(n + 1) } else { T::zero() };
                left + right + (d - energy) * u.get(n)
            })
            .collect();
        Sequence::new(out.lo, values)
    }
}

/// Negative-pivot count of `T − x` for the unit-off-diagonal tridiagonal `T` with diagonal `d`.
fn sturm_count<T: Real>(d: &[T], x: T) -> usize {
    let tiny = T::min_positive_value().sqrt();
    let mut count = 0;
    let mut q = T::one();
    for (i, &di) in d.iter().enumerate() {
        q = if i == 0 { di - x } else { di - x - q.recip() };
        if q == T::zero() {
            q = -tiny;
        }
        if q < T::zero() {
            count += 1;
        }
    }
    count
}

/// All eigenvalues of the section shifted by `e_shift` (i.e. of `H_I − e_shift`), ascending,
/// by Sturm-count bisection.
pub fn eigenvalues<T: Real>(sec: &FiniteSection<T>, e_shift: T) -> Vec<T> {
    let (lo, hi) = sec.gershgorin();
    let (lo, hi) = (lo - e_shift, hi - e_shift);
    let scale = lo.abs().max(hi.abs()).max(T::one());
    let tol = T::tol(1e-13) * scale;
    let n = sec.size();
    let shifted: Vec<T> = sec.diagonal.iter().map(|&d| d - e_shift).collect();
    let mut out = Vec::with_capacity(n);
    let mut floor = lo;
    for j in 0..n {
        // Smallest x with count_below(x) ≥ j + 1; the j-th eigenvalue lies just below.
        let (mut a, mut b) = (floor, hi + tol);
        while b - a > tol {
            let mid = (a + b) / T::lit(2.0);
            if mid <= a || mid >= b {
                break;
            }
            if sturm_count(&shifted, mid) > j {
                b = mid;
            } else {
                a = mid;
            }
        }
        let value = (a + b) / T::lit(2.0);
        out.push(value);
        floor = a;
    }
    out
}

/// `‖(H_v − E)u‖` over `support(u) ± 1`.
pub fn weyl_defect<T: Real, S: PotentialSource<T> + ?Sized>(
    src: &S,
    energy: T,
    vector: &Sequence<T>,
) -> Result<T, OperatorError> {
    let norm = vector.norm();
    if (norm - T::one()).abs() > T::tol(UNIT_TOL) {
        return Err(OperatorError::InvalidArgument(format!("vector must have unit norm, got {norm}")));
    }
    Ok(residual_image(src, energy, vector)?.norm())
}

/// `(H_v − E)u` on `support(u) ± 1`.
pub fn residual_image<T: Real, S: PotentialSource<T> + ?Sized>(
    src: &S,
    energy: T,
    u: &Sequence<T>,
) -> Result<Sequence<T>, OperatorError> {
    let out = u.support().expand(1);
    let values = out
        .iter()
        .map(|n| {
            let x = u.get(n);
            let diag = if x == T::zero() { T::zero() } else { (src.sample(n)? - energy) * x };
            Ok(u.get(n - 1) + u.get(n + 1) + diag)
        })
        .collect::<Result<Vec<_>, CocycleError>>()?;
    Ok(Sequence::new(out.lo, values))
}

/// A finitely supported unit vector with small `‖(H_v − E)u‖`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct WeylWitness<T: Real> {
    pub energy: T,
    pub support_first: i64,
    pub vector: Vec<T>,
    pub defect: T,
}

impl<T: Real> WeylWitness<T> {
    pub fn support(&self) -> Interval {
        Interval::new(self.support_first, self.support_first + self.vector.len() as i64 - 1)
    }

    pub fn as_sequence(&self) -> Sequence<T> {
        Sequence::new(self.support_first, self.vector.clone())
    }
}

/// Symmetric pentadiagonal matrix stored by diagonals.
struct Penta<T> {
    d0: Vec<T>,
    d1: Vec<T>,
    d2: Vec<T>,
}

impl<T: Real> Penta<T> {
    /// `MᵀM` for `M: u ↦ (H_v − E)u` from `ℓ²(I)` to `ℓ²(I ± 1)`, where `g = v − E` on `I`.
    ///
    /// `MᵀM = (H_I − E)² + e_a e_aᵀ + e_b e_bᵀ` — the two extra terms are the rows at `a−1`, `b+1`.
    fn normal_matrix(g: &[T]) -> Self {
        let n = g.len();
        // Every column of M is (…, 1, g_i, 1, …), so the diagonal is g² + 2 throughout.
        let d0 = g.iter().map(|&x| x * x + T::lit(2.0)).collect();
        let d1 = (0..n.saturating_sub(1)).map(|i| g[i] + g[i + 1]).collect();
        let d2 = vec![T::one(); n.saturating_sub(2)];
        Self { d0, d1, d2 }
    }

    /// Banded `LDLᵀ` of `self − mu·I`; returns (pivots, L sub-diagonals).
    fn ldl(&self, mu: T) -> (Vec<T>, Vec<T>, Vec<T>) {
        let n = self.d0.len();
        let tiny = T::min_positive_value().sqrt();
        let mut d = vec![T::zero(); n];
        let mut l1 = vec![T::zero(); n];
        let mut l2 = vec![T::zero(); n];
        for i in 0..n {
            // L[i][i−2], L[i][i−1]
            if i >= 2 {
                l2[i] = self.d2[i - 2] / d[i - 2];
            }
            if i >= 1 {
                let mut a = self.d1[i - 1];
                if i >= 2 {
                    a = a - l2[i] * d[i - 2] * l1[i - 1];
                }
                l1[i] = a / d[i - 1];
            }
            let mut p = self.d0[i] - mu;
            if i >= 1 {
                p = p - l1[i] * l1[i] * d[i - 1];
            }
            if i >= 2 {
                p = p - l2[i] * l2[i] * d[i - 2];
            }
            d[i] = if p == T::zero() { -tiny } else { p };
        }
        (d, l1, l2)
    }

    fn count_below(&self, mu: T) -> usize {
        self.ldl(mu).0.iter().filter(|&&p| p < T::zero()).count()
    }

    fn solve(&self, mu: T, rhs: &[T]) -> Vec<T> {
        let (d, l1, l2) = self.ldl(mu);
        let n = rhs.len();
        let mut y = rhs.to_vec();
        for i in 0..n {
            if i >= 1 {
                y[i] = y[i] - l1[i] * y[i - 1];
            }
            if i >= 2 {
                y[i] = y[i] - l2[i] * y[i - 2];
            }
        }
        for i in 0..n {
            y[i] = y[i] / d[i];
        }
        for i in (0..n).rev() {
            if i + 1 < n {
                y[i] = y[i] - l1[i + 1] * y[i + 1];
            }
            if i + 2 < n {
                y[i] = y[i] - l2[i + 2] * y[i + 2];
            }
        }
        y
    }

    fn max_entry(&self) -> T {
        let m = |v: &[T]| v.iter().fold(T::zero(), |a, &x| a.max(x.abs()));
        m(&self.d0) + T::lit(2.0) * (m(&self.d1) + m(&self.d2))
    }
}

/// Minimizer of the defect over unit vectors supported on `support`, if it beats `eps`.
fn best_on_interval<T: Real, S: PotentialSource<T> + ?Sized>(
    src: &S,
    energy: T,
    eps: T,
    support: Interval,
) -> Result<Option<WeylWitness<T>>, OperatorError> {
    let g = support.iter().map(|n| Ok(src.sample(n)? - energy)).collect::<Result<Vec<T>, CocycleError>>()?;
    let mtm = Penta::normal_matrix(&g);
    let eps2 = eps * eps;
    if mtm.count_below(eps2) == 0 {
        return Ok(None);
    }
    // Smallest eigenvalue of MᵀM by bisection on the inertia count.
    let (mut a, mut b) = (T::zero(), eps2);
    let tol = T::tol(1e-14) * mtm.max_entry().max(T::one());
    while b - a > tol {
        let mid = (a + b) / T::lit(2.0);
        if mid <= a || mid >= b {
            break;
        }
        if mtm.count_below(mid) > 0 {
            b = mid;
        } else {
            a = mid;
        }
    }
    // Inverse iteration just below the bracket.
    let shift = a - tol;
    let n = g.len();
    let mut x: Vec<T> = (0..n).map(|i| T::one() + T::lit(0.01) * T::int((i % 7) as i64)).collect();
    for _ in 0..4 {
        let y = mtm.solve(shift, &x);
        let norm = y.iter().fold(T::zero(), |acc, &v| acc.hypot(v));
        if !(norm > T::zero()) || !norm.is_finite() {
            break;
        }
        x = y.into_iter().map(|v| v / norm).collect();
    }
    let vector = Sequence::new(support.lo, x);
    let norm = vector.norm();
    let vector = vector.scaled(norm.recip());
    let defect = residual_image(src, energy, &vector)?.norm();
    if defect < eps {
        Ok(Some(WeylWitness { energy, support_first: support.lo, vector: vector.values, defect }))
    } else {
        Ok(None)
    }
}

/// Centers of `range` ordered from its middle outward, at the given stride.
fn centers_from_middle(range: Interval, stride: i64) -> Vec<i64> {
    let mid = range.lo + (range.hi - range.lo) / 2;
    let mut out = vec![mid];
    let mut off = stride;
    loop {
        let mut any = false;
        for c in [mid - off, mid + off] {
            if range.contains(c) {
                out.push(c);
                any = true;
            }
        }
        if !any {
            break;
        }
        off += stride;
    }
    out
}

/// Smallest `L ≤ l_max` for which some length-`L` interval centered in `center_range`
/// carries a unit vector with defect `< eps`, together with that vector.
///
/// Centers are visited from the middle of `center_range` outward at stride `max(1, L/4)`.
pub fn min_support_length<T: Real, S: PotentialSource<T> + ?Sized>(
    src: &S,
    energy: T,
    eps: T,
    l_max: usize,
    center_range: Interval,
) -> Result<(usize, WeylWitness<T>), OperatorError> {
    if !(eps > T::zero()) || l_max < 1 || center_range.is_empty() {
        return Err(OperatorError::InvalidArgument("need eps > 0, L_max ≥ 1 and a nonempty center range".into()));
    }
    for l in 1..=l_max {
        let stride = (l as i64 / 4).max(1);
        for c in centers_from_middle(center_range, stride) {
            let lo = c - (l as i64 - 1) / 2;
            let support = Interval::new(lo, lo + l as i64 - 1);
            if let Some(w) = best_on_interval(src, energy, eps, support)? {
                return Ok((l, w));
            }
        }
    }
    Err(OperatorError::NotFound { eps: eps.to_f64_lossy(), l_max })
}

/// Truncates a bounded generalized eigenfunction on `[−L−1, L+1]` to `[−L, L]` and normalizes.
pub fn approx_eigenvector_from_bounded_solution<T: Real, S: PotentialSource<T> + ?Sized>(
    u_inf: &Sequence<T>,
    src: &S,
    energy: T,
) -> Result<WeylWitness<T>, OperatorError> {
    let sup = u_inf.support();
    if sup.lo != -sup.hi || sup.hi < 1 {
        return Err(OperatorError::InvalidArgument(format!(
            "solution must be given on [−L−1, L+1], got [{}, {}]",
            sup.lo, sup.hi
        )));
    }
    let scale = u_inf.sup_norm().max(T::one());
    for n in sup.lo + 1..sup.hi {
        let r = u_inf.get(n + 1) + u_inf.get(n - 1) + (src.sample(n)? - energy) * u_inf.get(n);
        if r.abs() > T::tol(RECURRENCE_TOL) * scale {
            return Err(OperatorError::InvalidArgument(format!(
                "eigenfunction recurrence violated at site {n} (residual {r})"
            )));
        }
    }
    let l = sup.hi - 1;
    let truncated = u_inf.restrict(Interval::symmetric(l));
    let norm = truncated.norm();
    if !(norm >= T::lit(DEGENERATE_NORM)) {
        return Err(OperatorError::DegenerateNorm { norm: norm.to_f64_lossy() });
    }
    let vector = truncated.scaled(norm.recip());
    let defect = residual_image(src, energy, &vector)?.norm();
    Ok(WeylWitness { energy, support_first: -l, vector: vector.values, defect })
}
