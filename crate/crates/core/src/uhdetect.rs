//! Windowed uniform-hyperbolicity certificates and bounded-orbit witnesses.

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::cocycle::{product_sequence, transfer, CocycleError, CocycleProduct, PotentialSource};
use crate::lattice::Interval;
use crate::scalar::Real;
use crate::sl2::{apply_raw, ProjPoint, Sl2Error};

pub const DEFAULT_TOL_GROWTH: f64 = 1e-3;
pub const DEFAULT_INV_TOL: f64 = 1e-6;
/// Largest accepted contraction constant `C` before the growth check is declared failed.
pub const DEFAULT_CONTRACTION_MAX: f64 = 1e8;
/// Sections closer than this are treated as coincident.
pub const MIN_GAP: f64 = 1e-8;
/// Angular width at which golden-section refinement stops.
pub const REFINE_WIDTH: f64 = 1e-10;
/// Maximum number of sites sampled by the witness search.
pub const WITNESS_MAX_SITES: usize = 256;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UhError {
    #[error("stable/unstable directions undefined at site {site} (product is a near rotation)")]
    DirectionsUndefined { site: i64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Cocycle(#[from] CocycleError),
}

/// Section estimates at one site.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Sections<T: Real> {
    pub u: ProjPoint<T>,
    pub s: ProjPoint<T>,
    pub cauchy_residual: T,
}

/// Result of the exponential-growth fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GrowthFit<T: Real> {
    pub lambda: T,
    pub c_const: T,
    pub pass: bool,
    /// `W(n) = min_k log‖A_n(k)‖` for `n = 1..=depth`.
    pub worst_profile: Vec<T>,
    /// Site attaining `min_k log‖A_depth(k)‖`.
    pub weakest_site: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SitePair<T: Real> {
    pub site: i64,
    pub u: ProjPoint<T>,
    pub s: ProjPoint<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct UHCertificate<T: Real> {
    pub energy: T,
    pub window: Interval,
    pub depth: i64,
    pub lambda: T,
    pub c_const: T,
    pub gap_gamma: T,
    pub beta: T,
    pub cone_ok: bool,
    pub sections: Vec<SitePair<T>>,
    /// Measured `C` with `‖A_n s(k)‖, ‖A_{−n} u(k)‖ ≤ C λ^{−n}` on the sampled range.
    pub contraction_const: T,
    pub max_cauchy_residual: T,
    pub max_invariance_error: T,
}

impl<T: Real> UHCertificate<T> {
    /// Sections at `site`, if it lies in the window.
    pub fn sections_at(&self, site: i64) -> Option<&SitePair<T>> {
        if !self.window.contains(site) {
            return None;
        }
        self.sections.get((site - self.window.lo) as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    Growth,
    DirectionsUndefined,
    Gap,
    Invariance,
    Cone,
}

impl FailureReason {
    pub fn name(&self) -> &'static str {
        match self {
            FailureReason::Growth => "growth",
            FailureReason::DirectionsUndefined => "directions_undefined",
            FailureReason::Gap => "gap",
            FailureReason::Invariance => "invariance",
            FailureReason::Cone => "cone",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureReport {
    pub reason: FailureReason,
    pub first_violation_site: i64,
    pub details: serde_json::Value,
}

impl std::fmt::Display for FailureReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "FAILED: {} at site {}", self.reason.name(), self.first_violation_site)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions {
    pub tol_growth: f64,
    pub inv_tol: f64,
    pub contraction_max: f64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            tol_growth: DEFAULT_TOL_GROWTH,
            inv_tol: DEFAULT_INV_TOL,
            contraction_max: DEFAULT_CONTRACTION_MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BoundedWitness<T: Real> {
    pub site: i64,
    pub direction: ProjPoint<T>,
    pub max_log_norm: T,
    pub depth: i64,
    /// `log‖A_n(site)·unit(direction)‖` for `n = −depth..=depth`.
    pub orbit_log_norms: Vec<T>,
}

fn directions_undefined(site: i64) -> impl Fn(CocycleError) -> UhError {
    move |e| match e {
        CocycleError::Sl2(Sl2Error::NearRotation { .. }) => UhError::DirectionsUndefined { site },
        other => UhError::Cocycle(other),
    }
}

/// `s = s(A_depth(k))`, `u = s(A_{−depth}(k))` and the depth-to-depth Cauchy residual.
pub fn estimate_sections<T: Real, S: PotentialSource<T> + ?Sized>(
    src: &S,
    energy: T,
    k: i64,
    depth: i64,
) -> Result<Sections<T>, UhError> {
    if depth < 2 {
        return Err(UhError::InvalidArgument(format!("depth must be ≥ 2, got {depth}")));
    }
    let fwd = product_sequence(src, energy, k, depth)?;
    let bwd = product_sequence(src, energy, k, -depth)?;
    let d = depth as usize;
    let undefined = directions_undefined(k);
    let s = fwd[d - 1].singular().map_err(&undefined)?.contract_dir;
    let s_prev = fwd[d - 2].singular().map_err(&undefined)?.contract_dir;
    let u = bwd[d - 1].singular().map_err(&undefined)?.contract_dir;
    let u_prev = bwd[d - 2].singular().map_err(&undefined)?.contract_dir;
    Ok(Sections { u, s, cauchy_residual: s.distance(&s_prev).max(u.distance(&u_prev)) })
}

/// Per-site forward log-norm profiles `log‖A_n(k)‖`, `n = 1..=depth`.
fn log_norm_profiles<T: Real, S: PotentialSource<T> + ?Sized>(
    src: &S,
    energy: T,
    window: Interval,
    depth: i64,
) -> Result<Vec<Vec<T>>, CocycleError> {
    window
        .iter()
        .map(|k| Ok(product_sequence(src, energy, k, depth)?.iter().map(|p| p.log_norm()).collect()))
        .collect()
}

/// Exponential growth rate from a worst-case profile `W(n)`, `n = 1..=len`.
///
/// Uses the scale-doubling second difference `(W(2m) − 2W(m) + W(m/2)) / (m/2)`,
/// which equals `log λ` for `W(n) = a + n log λ` and vanishes for `W(n) = a + p log n`,
/// so polynomial (parabolic) growth is not mistaken for a small exponential rate.
fn fit_log_lambda<T: Real>(worst: &[T]) -> T {
    let d = worst.len();
    let w = |n: usize| if n == 0 { T::zero() } else { worst[n - 1] };
    let lo = ((d / 4) + 1) & !1;
    let mut best: Option<T> = None;
    let mut m = lo.max(2);
    while 2 * m <= d {
        let l = (w(2 * m) - T::lit(2.0) * w(m) + w(m / 2)) / T::int((m / 2) as i64);
        best = Some(best.map_or(l, |b: T| b.min(l)));
        m += 2;
    }
    best.unwrap_or_else(T::zero).max(T::zero())
}

fn growth_from_profiles<T: Real>(profiles: &[Vec<T>], window: Interval, tol_growth: f64) -> GrowthFit<T> {
    let depth = profiles[0].len();
    let mut worst = vec![T::infinity(); depth];
    let mut weakest = (T::infinity(), window.lo);
    for (i, prof) in profiles.iter().enumerate() {
        for (w, &l) in worst.iter_mut().zip(prof) {
            *w = w.min(l);
        }
        if prof[depth - 1] < weakest.0 {
            weakest = (prof[depth - 1], window.lo + i as i64);
        }
    }
    let log_lambda = fit_log_lambda(&worst);
    // n = 0 contributes log‖I‖ = 0, so c ≤ 1.
    let log_c = worst
        .iter()
        .enumerate()
        .fold(T::zero(), |acc, (i, &w)| acc.min(w - T::int(i as i64 + 1) * log_lambda));
    let lambda = log_lambda.exp();
    GrowthFit {
        lambda,
        c_const: log_c.exp(),
        pass: lambda > T::one() + T::lit(tol_growth),
        worst_profile: worst,
        weakest_site: weakest.1,
    }
}

/// Fits the largest `λ` (then the largest `c`) with `log‖A_n(k)‖ ≥ log c + n log λ`
/// for every `k` in `window` and `1 ≤ n ≤ depth`.
pub fn growth_test<T: Real, S: PotentialSource<T> + ?Sized>(
    src: &S,
    energy: T,
    window: Interval,
    depth: i64,
) -> Result<GrowthFit<T>, UhError> {
    growth_test_with(src, energy, window, depth, DEFAULT_TOL_GROWTH)
}

pub fn growth_test_with<T: Real, S: PotentialSource<T> + ?Sized>(
    src: &S,
    energy: T,
    window: Interval,
    depth: i64,
    tol_growth: f64,
) -> Result<GrowthFit<T>, UhError> {
    check_window(window, depth)?;
    let profiles = log_norm_profiles(src, energy, window, depth)?;
    Ok(growth_from_profiles(&profiles, window, tol_growth))
}

fn check_window(window: Interval, depth: i64) -> Result<(), UhError> {
    if depth < 8 {
        return Err(UhError::InvalidArgument(format!("depth must be ≥ 8, got {depth}")));
    }
    if window.is_empty() {
        return Err(UhError::InvalidArgument("window is empty".into()));
    }
    Ok(())
}

/// `tan(γ/2) > 2/(β − 1/β)`.
pub fn cone_inequality<T: Real>(gamma: T, beta: T) -> bool {
    beta > T::one() && (gamma / T::lit(2.0)).tan() > T::lit(2.0) / (beta - beta.recip())
}

/// Certificate with default tolerances.
pub fn certify<T: Real, S: PotentialSource<T> + ?Sized>(
    src: &S,
    energy: T,
    window: Interval,
    depth: i64,
) -> Result<Result<UHCertificate<T>, FailureReport>, UhError> {
    certify_with(src, energy, window, depth, &CertifyOptions::default())
}

/// Runs growth, section, gap, invariance, contraction and cone checks in that order.
///
/// The outer `Err` is reserved for argument and potential errors; a failed check is
/// an `Ok(Err(report))`.
pub fn certify_with<T: Real, S: PotentialSource<T> + ?Sized>(
    src: &S,
    energy: T,
    window: Interval,
    depth: i64,
    opts: &CertifyOptions,
) -> Result<Result<UHCertificate<T>, FailureReport>, UhError> {
    check_window(window, depth)?;
    let fail = |reason, site, details| Ok(Err(FailureReport { reason, first_violation_site: site, details }));

    let profiles = log_norm_profiles(src, energy, window, depth)?;
    let growth = growth_from_profiles(&profiles, window, opts.tol_growth);
    if !growth.pass {
        return fail(
            FailureReason::Growth,
            growth.weakest_site,
            json!({
                "check": "growth",
                "lambda": growth.lambda.to_f64_lossy(),
                "c_const": growth.c_const.to_f64_lossy(),
                "tol_growth": opts.tol_growth,
            }),
        );
    }
    let log_lambda = growth.lambda.ln();

    let mut sections = Vec::with_capacity(window.len());
    let mut max_residual = T::zero();
    for k in window.iter() {
        match estimate_sections(src, energy, k, depth) {
            Ok(sec) => {
                max_residual = max_residual.max(sec.cauchy_residual);
                sections.push(SitePair { site: k, u: sec.u, s: sec.s });
            }
            Err(UhError::DirectionsUndefined { site }) => {
                return fail(FailureReason::DirectionsUndefined, site, json!({ "depth": depth }))
            }
            Err(e) => return Err(e),
        }
    }

    let (gap, gap_site) = sections
        .iter()
        .map(|p| (p.u.distance(&p.s), p.site))
        .fold((T::infinity(), window.lo), |a, b| if b.0 < a.0 { b } else { a });
    if !(gap > T::lit(MIN_GAP)) {
        return fail(FailureReason::Gap, gap_site, json!({ "gap_gamma": gap.to_f64_lossy(), "min_gap": MIN_GAP }));
    }

    let inv_tol = T::lit(opts.inv_tol);
    let mut max_inv = T::zero();
    for pair in sections.windows(2) {
        let a = transfer(energy, src.sample(pair[0].site)?);
        let du = a.proj_act(pair[0].u).distance(&pair[1].u);
        let ds = a.proj_act(pair[0].s).distance(&pair[1].s);
        let err = du.max(ds);
        if !(err <= inv_tol) {
            return fail(
                FailureReason::Invariance,
                pair[0].site,
                json!({ "unstable_error": du.to_f64_lossy(), "stable_error": ds.to_f64_lossy(), "inv_tol": opts.inv_tol }),
            );
        }
        max_inv = max_inv.max(err);
    }

    let (log_cc, cc_site) = contraction_constant(src, energy, &sections, depth, log_lambda)?;
    if !(log_cc <= T::lit(opts.contraction_max.ln())) {
        return fail(
            FailureReason::Growth,
            cc_site,
            json!({
                "check": "contraction",
                "contraction_const": log_cc.exp().to_f64_lossy(),
                "contraction_max": opts.contraction_max,
                "lambda": growth.lambda.to_f64_lossy(),
            }),
        );
    }

    let beta = growth.worst_profile[depth as usize - 1].exp();
    if !cone_inequality(gap, beta) {
        return fail(
            FailureReason::Cone,
            gap_site,
            json!({ "gap_gamma": gap.to_f64_lossy(), "beta": beta.to_f64_lossy() }),
        );
    }

    Ok(Ok(UHCertificate {
        energy,
        window,
        depth,
        lambda: growth.lambda,
        c_const: growth.c_const,
        gap_gamma: gap,
        beta,
        cone_ok: true,
        sections,
        contraction_const: log_cc.exp(),
        max_cauchy_residual: max_residual,
        max_invariance_error: max_inv,
    }))
}

/// `log C` for `‖A_n(k) s(k)‖ ≤ C λ^{−n}` and `‖A_{−n}(k) u(k)‖ ≤ C λ^{−n}`,
/// over sites `k, k±n` inside the section window and `0 ≤ n ≤ depth`.
///
/// Norms are telescoped along the (verified invariant) section field, one step at a
/// time, which avoids the cancellation of applying a long product to its contracting
/// direction.
fn contraction_constant<T: Real, S: PotentialSource<T> + ?Sized>(
    src: &S,
    energy: T,
    sections: &[SitePair<T>],
    depth: i64,
    log_lambda: T,
) -> Result<(T, i64), CocycleError> {
    let len = sections.len();
    // step_s[i] = log‖A(k_i) s(k_i)‖, step_u[i] = log‖A(k_i)⁻¹ u(k_{i+1})‖ (i < len−1).
    let mut step_s = Vec::with_capacity(len);
    let mut step_u = Vec::with_capacity(len);
    for i in 0..len.saturating_sub(1) {
        let a = transfer(energy, src.sample(sections[i].site)?);
        let [x, y] = a.apply(sections[i].s.unit());
        step_s.push(x.hypot(y).ln());
        let [x, y] = a.inverse().apply(sections[i + 1].u.unit());
        step_u.push(x.hypot(y).ln());
    }
    let mut best = (T::zero(), sections[0].site);
    for i in 0..len {
        let mut acc = T::zero();
        for n in 1..=depth as usize {
            if i + n >= len {
                break;
            }
            acc = acc + step_s[i + n - 1];
            let v = acc + T::int(n as i64) * log_lambda;
            if v > best.0 {
                best = (v, sections[i].site);
            }
        }
        let mut acc = T::zero();
        for n in 1..=depth as usize {
            if n > i {
                break;
            }
            acc = acc + step_u[i - n];
            let v = acc + T::int(n as i64) * log_lambda;
            if v > best.0 {
                best = (v, sections[i].site);
            }
        }
    }
    Ok(best)
}

/// Products `A_n(k)` for `n = −depth..=depth`, as (normalized entries, log scale).
struct Orbit<T: Real> {
    /// Ordered so that the longest products come first (they prune best).
    mats: Vec<([T; 4], T)>,
    /// Index of each entry of `mats` in the `−depth..=depth` layout.
    slots: Vec<usize>,
}

impl<T: Real> Orbit<T> {
    fn new<S: PotentialSource<T> + ?Sized>(src: &S, energy: T, k: i64, depth: i64) -> Result<Self, CocycleError> {
        let fwd = product_sequence(src, energy, k, depth)?;
        let bwd = product_sequence(src, energy, k, -depth)?;
        let d = depth as usize;
        let mut mats = Vec::with_capacity(2 * d + 1);
        let mut slots = Vec::with_capacity(2 * d + 1);
        for j in (0..d).rev() {
            mats.push(split(&fwd[j]));
            slots.push(d + j + 1);
            mats.push(split(&bwd[j]));
            slots.push(d - j - 1);
        }
        mats.push(split(&CocycleProduct::identity(k)));
        slots.push(d);
        Ok(Self { mats, slots })
    }

    /// `max_n log‖A_n w‖`, abandoned early once it reaches `cutoff`.
    fn max_log_norm(&self, w: [T; 2], cutoff: T) -> T {
        let mut best = T::neg_infinity();
        // Within one log scale the comparison is done on squared norms.
        let mut best_sq_unscaled = T::zero();
        for (m, scale) in &self.mats {
            let [x, y] = apply_raw(*m, w);
            let sq = x * x + y * y;
            if *scale == T::zero() {
                if sq > best_sq_unscaled {
                    best_sq_unscaled = sq;
                    best = best.max(sq.ln() / T::lit(2.0));
                }
            } else {
                best = best.max(*scale + sq.ln() / T::lit(2.0));
            }
            if best >= cutoff {
                return best;
            }
        }
        best
    }

    fn orbit(&self, w: [T; 2]) -> Vec<T> {
        let mut out = vec![T::zero(); self.mats.len()];
        for ((m, scale), &slot) in self.mats.iter().zip(&self.slots) {
            let [x, y] = apply_raw(*m, w);
            out[slot] = *scale + x.hypot(y).ln();
        }
        out
    }
}

fn split<T: Real>(p: &CocycleProduct<T>) -> ([T; 4], T) {
    (p.matrix, p.log_scale)
}

/// Min over sampled sites and directions of `max_{|n| ≤ depth} log‖A_n(k)·unit(θ)‖`.
///
/// Sites are taken at stride `max(1, |range|/256)`; directions on a uniform grid of
/// `angle_grid` points in `[0, π)`, then the best grid cell is refined by golden-section
/// search down to an angular width of 1e−10.
pub fn bounded_witness_search<T: Real, S: PotentialSource<T> + ?Sized>(
    src: &S,
    energy: T,
    site_range: Interval,
    depth: i64,
    angle_grid: usize,
) -> Result<BoundedWitness<T>, UhError> {
    if angle_grid < 64 {
        return Err(UhError::InvalidArgument(format!("angle_grid must be ≥ 64, got {angle_grid}")));
    }
    if depth < 1 || site_range.is_empty() {
        return Err(UhError::InvalidArgument("depth must be ≥ 1 and site_range nonempty".into()));
    }
    let stride = (site_range.len() / WITNESS_MAX_SITES).max(1);
    let step = T::PI() / T::int(angle_grid as i64);
    let mut best: Option<(T, i64, usize)> = None;
    let mut best_orbit: Option<Orbit<T>> = None;
    for k in site_range.iter().step_by(stride) {
        let orbit = Orbit::new(src, energy, k, depth)?;
        let mut improved = false;
        for i in 0..angle_grid {
            let cutoff = best.map_or(T::infinity(), |b| b.0);
            let w = ProjPoint::new(step * T::int(i as i64)).unit();
            let v = orbit.max_log_norm(w, cutoff);
            if v < cutoff {
                best = Some((v, k, i));
                improved = true;
            }
        }
        if improved {
            best_orbit = Some(orbit);
        }
    }
    let (_, site, i) = best.expect("at least one site and direction");
    let orbit = best_orbit.expect("orbit of the best site");

    let f = |theta: T| orbit.max_log_norm(ProjPoint::new(theta).unit(), T::infinity());
    let center = step * T::int(i as i64);
    let (mut a, mut b) = (center - step, center + step);
    let ratio = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > T::tol(REFINE_WIDTH) {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    let mut theta = if fc <= fd { c } else { d };
    if f(center) < f(theta) {
        theta = center;
    }
    let direction = ProjPoint::new(theta);
    let orbit_log_norms = orbit.orbit(direction.unit());
    let max_log_norm = orbit_log_norms.iter().fold(T::neg_infinity(), |m, &x| m.max(x));
    Ok(BoundedWitness { site, direction, max_log_norm, depth, orbit_log_norms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cocycle::{product, Descriptor, FnPotential};

    fn constant(a: f64) -> FnPotential<f64, impl Fn(i64) -> f64 + Send + Sync> {
        FnPotential::new(move |_| a, a.abs(), Descriptor::new("constant", json!({ "a": a })))
    }

    fn amo(theta: f64) -> FnPotential<f64, impl Fn(i64) -> f64 + Send + Sync> {
        let alpha = crate::models::GOLDEN_MEAN;
        FnPotential::new(
            move |n| 2.0 * (std::f64::consts::TAU * (n as f64 * alpha + theta)).cos(),
            2.0,
            Descriptor::new("almost_mathieu", json!({ "theta": theta })),
        )
    }

    // Eigen-directions of [[3,−1],[1,0]]: (μ, 1) for μ = (3 ± √5)/2.
    const U_ANGLE: f64 = 0.364_863_828_113_483_18;
    const S_ANGLE: f64 = 1.205_932_498_681_413_4;

    #[test]
    fn sections_of_free_hyperbolic() {
        let sec = estimate_sections(&constant(0.0), 3.0, 0, 30).unwrap();
        assert!((sec.u.angle() - U_ANGLE).abs() < 1e-12, "{:?}", sec);
        assert!((sec.s.angle() - S_ANGLE).abs() < 1e-12);
        assert!(sec.cauchy_residual < 1e-12);
        let mu = (3.0 + 5f64.sqrt()) / 2.0;
        assert!((U_ANGLE - (1.0 / mu).atan()).abs() < 1e-15);
        assert!((S_ANGLE - mu.atan()).abs() < 1e-15);
    }

    #[test]
    fn sections_undefined_for_rotation() {
        for depth in [2, 7, 30] {
            let r = estimate_sections(&constant(0.0), 0.0, 0, depth);
            assert!(matches!(r, Err(UhError::DirectionsUndefined { site: 0 })));
        }
    }

    #[test]
    fn residual_contracts_like_lambda_squared() {
        // Constant cocycles: the depth-2 → depth-3 step already contracts by ≈ λ².
        for energy in [3.0, 2.5, -4.0] {
            let fit = growth_test(&constant(0.0), energy, Interval::symmetric(4), 32).unwrap();
            let r2 = estimate_sections(&constant(0.0), energy, 0, 2).unwrap().cauchy_residual;
            let r3 = estimate_sections(&constant(0.0), energy, 0, 3).unwrap().cauchy_residual;
            let l2 = fit.lambda * fit.lambda;
            assert!(r2 / r3 >= 0.95 * l2, "E={energy} ratio {} vs {l2}", r2 / r3);
        }
        // Non-constant cocycles contract at rate λ² only on average over depths.
        let src = amo(0.2);
        for energy in [3.9, 3.0] {
            let fit = growth_test(&src, energy, Interval::symmetric(20), 32).unwrap();
            assert!(fit.pass);
            for k in [-3, 0, 5] {
                let r2 = estimate_sections(&src, energy, k, 2).unwrap().cauchy_residual;
                let r12 = estimate_sections(&src, energy, k, 12).unwrap().cauchy_residual;
                let rate = (r2 / r12).powf(0.1);
                assert!(rate >= 0.9 * fit.lambda * fit.lambda, "E={energy} k={k} rate {rate}");
            }
        }
    }

    #[test]
    fn growth_examples() {
        let w = Interval::symmetric(50);
        let fit = growth_test(&constant(0.0), 3.0, w, 30).unwrap();
        let mu = (3.0 + 5f64.sqrt()) / 2.0;
        assert!(fit.pass && ((fit.lambda - mu) / mu).abs() < 0.01, "{}", fit.lambda);
        assert!(fit.c_const > 0.0 && fit.c_const <= 1.0);
        let elliptic = growth_test(&constant(0.0), 1.0, w, 30).unwrap();
        assert!(!elliptic.pass && elliptic.lambda <= 1.0 + DEFAULT_TOL_GROWTH);
        for depth in [30, 64, 200] {
            let parabolic = growth_test(&constant(0.0), 2.0, w, depth).unwrap();
            assert!(!parabolic.pass, "depth {depth}: λ = {}", parabolic.lambda);
        }
    }

    #[test]
    fn growth_lines_hold_on_every_sample() {
        let src = amo(0.4);
        let w = Interval::new(-10, 10);
        let fit = growth_test(&src, -3.1, w, 24).unwrap();
        for k in w.iter() {
            for n in 1..=24 {
                let l = product(&src, -3.1, k, n).unwrap().log_norm();
                assert!(l >= fit.c_const.ln() + n as f64 * fit.lambda.ln() - 1e-12);
            }
        }
    }

    #[test]
    fn certify_free_examples() {
        let w = Interval::symmetric(50);
        let cert = certify(&constant(0.0), 3.0, w, 30).unwrap().unwrap();
        assert!(cert.cone_ok);
        assert!((cert.gap_gamma - (S_ANGLE - U_ANGLE)).abs() < 1e-10);
        assert!((cert.gap_gamma - 0.841_068_670_567_930_3).abs() < 1e-10);
        assert_eq!(cert.sections.len(), 101);
        assert!(cert.max_invariance_error < 1e-12);
        let fail = certify(&constant(0.0), 1.0, w, 30).unwrap().unwrap_err();
        assert_eq!(fail.reason, FailureReason::Growth);
        let text = serde_json::to_value(&fail).unwrap();
        assert_eq!(text["reason"], "growth");
        assert!(text["first_violation_site"].is_i64());
        assert!(text["details"].is_object());
    }

    #[test]
    fn cone_inequality_arithmetic() {
        assert!(cone_inequality(std::f64::consts::FRAC_PI_2, 3.0));
        assert!(!cone_inequality(0.1, 3.0));
        assert!(!cone_inequality(1.0, 1.0));
    }

    #[test]
    fn certificate_json_round_trip() {
        let cert = certify(&amo(0.1), 3.5, Interval::new(-5, 5), 16).unwrap().unwrap();
        let text = serde_json::to_string(&cert).unwrap();
        let back: UHCertificate<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cert);
        assert_eq!(back.sections_at(-5).unwrap().site, -5);
        assert!(back.sections_at(6).is_none());
    }

    #[test]
    fn witness_examples() {
        let zero = constant(0.0);
        let site = Interval::new(0, 0);
        let elliptic = bounded_witness_search(&zero, 1.0, site, 100, 1024).unwrap();
        assert!(elliptic.max_log_norm <= 2f64.ln(), "{}", elliptic.max_log_norm);
        let hyper = bounded_witness_search(&zero, 3.0, site, 100, 1024).unwrap();
        assert!(hyper.max_log_norm >= 40.0);
        let parabolic = bounded_witness_search(&zero, 2.0, site, 100, 1024).unwrap();
        assert!(parabolic.max_log_norm <= (201f64).ln());
        for w in [&elliptic, &hyper, &parabolic] {
            assert_eq!(w.orbit_log_norms.len(), 201);
            assert_eq!(w.max_log_norm, w.orbit_log_norms.iter().cloned().fold(f64::MIN, f64::max));
        }
    }

    #[test]
    fn witness_is_minimal_over_grid() {
        let src = amo(0.3);
        let w = bounded_witness_search(&src, 0.4, Interval::new(-4, 4), 40, 256).unwrap();
        for k in -4..=4 {
            let fwd = product_sequence(&src, 0.4, k, 40).unwrap();
            let bwd = product_sequence(&src, 0.4, k, -40).unwrap();
            for i in 0..256 {
                let v = ProjPoint::new(std::f64::consts::PI * i as f64 / 256.0).unit();
                let m = fwd.iter().chain(&bwd).map(|p| p.log_norm_of(v)).fold(0.0, f64::max);
                assert!(w.max_log_norm <= m + 1e-12);
            }
        }
    }

    #[test]
    fn witness_argument_errors() {
        let r = bounded_witness_search(&constant(0.0), 1.0, Interval::new(0, 0), 10, 10);
        assert!(matches!(r, Err(UhError::InvalidArgument(_))));
    }
}
