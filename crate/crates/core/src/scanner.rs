//! Energy-grid classification into spectrum / resolvent, band assembly and
//! cross-phase inclusion checks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cocycle::{CocycleError, PotentialSource};
use crate::green::build_kernel;
use crate::lattice::Interval;
use crate::operator::{eigenvalues, FiniteSection, OperatorError};
use crate::scalar::Real;
use crate::uhdetect::{bounded_witness_search, certify_with, CertifyOptions, UhError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScanError {
    #[error("energy {energy}: certificate and bounded witness (max log-norm {witness_log_norm}) both passed")]
    ConsistencyViolation { energy: f64, lambda: f64, witness_log_norm: f64 },
    #[error("reports were computed on different grids or settings")]
    GridMismatch,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Uh(#[from] UhError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

impl From<CocycleError> for ScanError {
    fn from(e: CocycleError) -> Self {
        ScanError::Uh(UhError::Cocycle(e))
    }
}

/// Classifier settings; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// Product length `N`.
    pub depth: i64,
    /// Certificates cover base sites `[−window, window]`.
    pub window: i64,
    pub tol_growth: f64,
    pub inv_tol: f64,
    pub contraction_max: f64,
    /// Spectrum branch accepts `max_log_norm ≤ log(witness_poly_bound · depth)`.
    pub witness_poly_bound: f64,
    pub angle_grid: usize,
    /// Witness search runs over sites `[−witness_half_width, witness_half_width]`.
    pub witness_half_width: i64,
    /// Label changes are bisected down to `grid_step / refine_factor`.
    pub refine_factor: u32,
    /// Half-width of the kernel used to measure the decay rate at resolvent energies
    /// (0 disables; skipped when the certificate window is too small).
    pub green_half_width: i64,
    pub parallelism: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            depth: 64,
            window: 256,
            tol_growth: 1e-3,
            inv_tol: 1e-6,
            contraction_max: 1e8,
            witness_poly_bound: 4.0,
            angle_grid: 1024,
            witness_half_width: 8,
            refine_factor: 64,
            green_half_width: 32,
            parallelism: 1,
        }
    }
}

impl Settings {
    pub fn validate(&self) -> Result<(), ScanError> {
        let bad = |field: &str, why: &str| Err(ScanError::InvalidArgument(format!("{field} {why}")));
        if self.depth < 8 {
            return bad("depth", "must be ≥ 8");
        }
        if self.window < 0 {
            return bad("window", "must be ≥ 0");
        }
        if !(self.tol_growth > 0.0) {
            return bad("tol_growth", "must be > 0");
        }
        if !(self.inv_tol > 0.0) {
            return bad("inv_tol", "must be > 0");
        }
        if !(self.contraction_max > 1.0) {
            return bad("contraction_max", "must be > 1");
        }
        if !(self.witness_poly_bound > 0.0) {
            return bad("witness_poly_bound", "must be > 0");
        }
        if self.angle_grid < 64 {
            return bad("angle_grid", "must be ≥ 64");
        }
        if self.witness_half_width < 0 || self.green_half_width < 0 {
            return bad("witness_half_width/green_half_width", "must be ≥ 0");
        }
        if self.window < self.witness_half_width + self.depth {
            return bad("window", "must be ≥ witness_half_width + depth");
        }
        if self.refine_factor < 1 {
            return bad("refine_factor", "must be ≥ 1");
        }
        if self.parallelism < 1 {
            return bad("parallelism", "must be ≥ 1");
        }
        Ok(())
    }

    fn certify_options(&self) -> CertifyOptions {
        CertifyOptions { tol_growth: self.tol_growth, inv_tol: self.inv_tol, contraction_max: self.contraction_max }
    }

    /// Settings that change labels (everything except parallelism).
    fn same_classifier(&self, other: &Self) -> bool {
        Self { parallelism: 1, ..self.clone() } == Self { parallelism: 1, ..other.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Resolvent,
    Spectrum,
    Inconclusive,
}

impl Label {
    pub fn name(&self) -> &'static str {
        match self {
            Label::Resolvent => "resolvent",
            Label::Spectrum => "spectrum",
            Label::Inconclusive => "inconclusive",
        }
    }
}

/// One classified energy with its diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EnergyPoint<T: Real> {
    pub energy: T,
    pub label: Label,
    pub lambda: Option<T>,
    pub gap: Option<T>,
    pub witness_log_norm: Option<T>,
    pub decay_rate: Option<T>,
    /// Failed certificate check or error text, when not resolvent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    /// Added by band-edge refinement rather than lying on the coarse grid.
    #[serde(default)]
    pub refined: bool,
    /// Depth the label was decided at (above `settings.depth` after escalation).
    #[serde(default)]
    pub depth: i64,
}

/// Largest multiple of `settings.depth` tried when a certificate fails for a reason
/// that more depth can cure.
pub const MAX_DEPTH_ESCALATION: i64 = 4;

/// Runs both branches at one energy.
///
/// Resolvent needs a certificate whose implied witness floor ([`cert_floor`]) exceeds
/// the spectrum threshold `log(witness_poly_bound · depth)`; spectrum needs a failed
/// certificate and a witness bounded at both `depth` and `2·depth`. A sufficiently strong certificate together with
/// a bounded witness is a [`ScanError::ConsistencyViolation`].
///
/// When growth passes but a later check fails (sections converge like `λ^{−2·depth}`,
/// so weak hyperbolicity near band edges needs more depth), both branches are rerun at
/// doubled depth, up to `MAX_DEPTH_ESCALATION · depth` and `window − witness_half_width`.
pub fn classify_energy<T: Real, S: PotentialSource<T> + ?Sized>(
    src: &S,
    energy: T,
    settings: &Settings,
) -> Result<EnergyPoint<T>, ScanError> {
    settings.validate()?;
    let cap = (settings.depth * MAX_DEPTH_ESCALATION).min(settings.window - settings.witness_half_width);
    let mut depth = settings.depth;
    loop {
        let point = classify_at_depth(src, energy, settings, depth)?;
        let curable = matches!(point.reason.as_deref(), Some("invariance" | "directions_undefined" | "gap" | "cone"));
        if !curable || 2 * depth > cap {
            return Ok(point);
        }
        depth *= 2;
    }
}

fn classify_at_depth<T: Real, S: PotentialSource<T> + ?Sized>(
    src: &S,
    energy: T,
    settings: &Settings,
    depth: i64,
) -> Result<EnergyPoint<T>, ScanError> {
    let window = Interval::symmetric(settings.window);
    let cert = certify_with(src, energy, window, depth, &settings.certify_options())?;
    let witness = bounded_witness_search(
        src,
        energy,
        Interval::symmetric(settings.witness_half_width),
        depth,
        settings.angle_grid,
    )?;
    let threshold = T::lit((settings.witness_poly_bound * depth as f64).ln());
    let bounded = witness.max_log_norm <= threshold;
    let mut point = EnergyPoint {
        energy,
        label: Label::Inconclusive,
        lambda: None,
        gap: None,
        witness_log_norm: Some(witness.max_log_norm),
        decay_rate: None,
        reason: None,
        refined: false,
        depth,
    };
    match cert {
        Ok(cert) if cert_floor(&cert) <= threshold => {
            // Certified, but too weakly to exclude a bounded witness at this depth.
            point.label = Label::Inconclusive;
            point.lambda = Some(cert.lambda);
            point.gap = Some(cert.gap_gamma);
            point.reason = Some("certificate_margin".into());
        }
        Ok(cert) => {
            if bounded {
                return Err(ScanError::ConsistencyViolation {
                    energy: energy.to_f64_lossy(),
                    lambda: cert.lambda.to_f64_lossy(),
                    witness_log_norm: witness.max_log_norm.to_f64_lossy(),
                });
            }
            point.label = Label::Resolvent;
            point.lambda = Some(cert.lambda);
            point.gap = Some(cert.gap_gamma);
            let gw = Interval::symmetric(settings.green_half_width);
            if settings.green_half_width > 0 && window.expand(-depth).contains_interval(&gw) {
                if let Ok(kernel) = build_kernel(src, energy, &cert, gw) {
                    point.decay_rate = Some(kernel.decay_rate);
                }
            }
        }
        Err(report) => {
            point.lambda = report.details.get("lambda").and_then(|v| v.as_f64()).map(T::lit);
            point.gap = report.details.get("gap_gamma").and_then(|v| v.as_f64()).map(T::lit);
            point.reason = Some(report.reason.name().to_string());
            if bounded {
                // Weak hyperbolicity can hide below the threshold at one depth; the
                // witness must also stay polynomially bounded at twice the depth.
                let deeper = bounded_witness_search(
                    src,
                    energy,
                    Interval::symmetric(settings.witness_half_width),
                    2 * depth,
                    settings.angle_grid,
                )?;
                if deeper.max_log_norm <= T::lit((settings.witness_poly_bound * (2 * depth) as f64).ln()) {
                    point.label = Label::Spectrum;
                } else {
                    point.reason = Some("witness_growth".into());
                }
            }
        }
    }
    Ok(point)
}

/// Lower bound on every witness value at sites `k` with `k ± depth` inside the
/// certificate window: `log β + log sin(γ/2)`.
///
/// `‖A_{±N}(k) v‖ ≥ β·|sin∠(v, s_N)|` resp. `|sin∠(v, u_N)|`, and every `v` is at
/// least `γ/2` away from one of the two sections.
pub fn cert_floor<T: Real>(cert: &crate::uhdetect::UHCertificate<T>) -> T {
    cert.beta.ln() + (cert.gap_gamma / T::lit(2.0)).sin().ln()
}

/// Classification that records non-fatal errors as inconclusive points.
fn classify_or_record<T: Real, S: PotentialSource<T> + ?Sized>(
    src: &S,
    energy: T,
    settings: &Settings,
) -> Result<EnergyPoint<T>, ScanError> {
    match classify_energy(src, energy, settings) {
        Ok(p) => Ok(p),
        Err(e @ ScanError::ConsistencyViolation { .. }) => Err(e),
        Err(e) => Ok(EnergyPoint {
            energy,
            label: Label::Inconclusive,
            lambda: None,
            gap: None,
            witness_log_norm: None,
            decay_rate: None,
            reason: Some(e.to_string()),
            refined: false,
            depth: settings.depth,
        }),
    }
}

/// `[−M−2, M+2]`, which contains the spectrum of every potential bounded by `M`.
pub fn default_energy_range<T: Real, S: PotentialSource<T> + ?Sized>(src: &S) -> (T, T) {
    let m = src.bound() + T::lit(2.0);
    (-m, m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SpectrumReport<T: Real> {
    /// Descriptor of the scanned potential (or the hull spec it came from).
    pub model: serde_json::Value,
    pub settings: Settings,
    pub e_range: (T, T),
    pub grid_step: T,
    /// Coarse grid points and refinement points, sorted by energy.
    pub points: Vec<EnergyPoint<T>>,
    /// Maximal runs of spectrum-labeled points, as closed intervals.
    pub bands: Vec<(T, T)>,
    /// `grid_step / refine_factor`: band edges are only resolved to this width.
    pub edge_resolution: T,
}

impl<T: Real> SpectrumReport<T> {
    /// The coarse grid energies.
    pub fn energies(&self) -> Vec<T> {
        self.points.iter().filter(|p| !p.refined).map(|p| p.energy).collect()
    }

    pub fn label_at(&self, energy: T) -> Option<Label> {
        self.points.iter().find(|p| p.energy == energy).map(|p| p.label)
    }

    /// Distance from `energy` to the nearest band (infinite when there are none).
    pub fn distance_to_bands(&self, energy: T) -> T {
        self.bands.iter().fold(T::infinity(), |m, &(a, b)| {
            let d = if energy < a {
                a - energy
            } else if energy > b {
                energy - b
            } else {
                T::zero()
            };
            m.min(d)
        })
    }

    /// `E,label,lambda,gap,witness_log_norm,decay_rate,depth,reason` rows after a
    /// `# {model, settings}` line.
    pub fn to_csv(&self) -> String {
        let header = serde_json::json!({ "model": self.model, "settings": self.settings });
        let mut out = format!("# {header}\nE,label,lambda,gap,witness_log_norm,decay_rate,depth,reason\n");
        let opt = |x: Option<T>| x.map(|v| v.to_string()).unwrap_or_default();
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                p.energy,
                p.label.name(),
                opt(p.lambda),
                opt(p.gap),
                opt(p.witness_log_norm),
                opt(p.decay_rate),
                p.depth,
                p.reason.as_deref().unwrap_or("").replace(',', ";")
            ));
        }
        out
    }
}

fn coarse_grid<T: Real>(e_range: (T, T), step: T) -> Vec<T> {
    let (lo, hi) = e_range;
    let count = ((hi - lo) / step + T::tol(1e-9)).floor().to_i64().unwrap_or(0);
    (0..=count).map(|i| lo + step * T::int(i)).collect()
}

fn in_pool<R: Send>(parallelism: usize, f: impl FnOnce() -> R + Send) -> R {
    if parallelism <= 1 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(parallelism).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// Classifies a uniform grid, refines every label change by bisection and assembles bands.
///
/// Results do not depend on `settings.parallelism`: work items are independent and
/// collected in grid order.
pub fn scan<T: Real, S: PotentialSource<T> + ?Sized>(
    src: &S,
    e_range: (T, T),
    grid_step: T,
    settings: &Settings,
) -> Result<SpectrumReport<T>, ScanError> {
    settings.validate()?;
    if !(grid_step > T::zero()) {
        return Err(ScanError::InvalidArgument(format!("grid_step must be > 0, got {grid_step}")));
    }
    if !(e_range.0 <= e_range.1) {
        return Err(ScanError::InvalidArgument("energy range must satisfy lo ≤ hi".into()));
    }
    let grid = coarse_grid(e_range, grid_step);
    let resolution = grid_step / T::int(settings.refine_factor as i64);

    let (coarse, refined) = in_pool(settings.parallelism, || -> Result<_, ScanError> {
        let coarse: Vec<EnergyPoint<T>> = grid
            .par_iter()
            .map(|&e| classify_or_record(src, e, settings))
            .collect::<Result<_, _>>()?;
        let changes: Vec<usize> = (1..coarse.len()).filter(|&i| coarse[i - 1].label != coarse[i].label).collect();
        let refined: Vec<Vec<EnergyPoint<T>>> = changes
            .par_iter()
            .map(|&i| refine_edge(src, &coarse[i - 1], &coarse[i], resolution, settings))
            .collect::<Result<_, _>>()?;
        Ok((coarse, refined))
    })?;

    let mut points = coarse;
    points.extend(refined.into_iter().flatten());
    points.sort_by(|a, b| a.energy.partial_cmp(&b.energy).expect("finite energies"));
    let bands = assemble_bands(&points);
    Ok(SpectrumReport {
        model: serde_json::to_value(src.descriptor()).unwrap_or(serde_json::Value::Null),
        settings: settings.clone(),
        e_range,
        grid_step,
        points,
        bands,
        edge_resolution: resolution,
    })
}

fn refine_edge<T: Real, S: PotentialSource<T> + ?Sized>(
    src: &S,
    left: &EnergyPoint<T>,
    right: &EnergyPoint<T>,
    resolution: T,
    settings: &Settings,
) -> Result<Vec<EnergyPoint<T>>, ScanError> {
    let (mut a, mut b) = (left.energy, right.energy);
    let la = left.label;
    let mut out = Vec::new();
    while b - a > resolution {
        let mid = (a + b) / T::lit(2.0);
        if mid <= a || mid >= b {
            break;
        }
        let mut p = classify_or_record(src, mid, settings)?;
        p.refined = true;
        if p.label == la {
            a = mid;
        } else {
            b = mid;
        }
        out.push(p);
    }
    Ok(out)
}

fn assemble_bands<T: Real>(points: &[EnergyPoint<T>]) -> Vec<(T, T)> {
    let mut bands = Vec::new();
    let mut run: Option<(T, T)> = None;
    for p in points {
        if p.label == Label::Spectrum {
            run = Some(match run {
                Some((a, _)) => (a, p.energy),
                None => (p.energy, p.energy),
            });
        } else if let Some(r) = run.take() {
            bands.push(r);
        }
    }
    bands.extend(run);
    bands
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct InclusionResult<T: Real> {
    pub included: bool,
    /// Spectrum-labeled energies of the second report farther than `eps` from every band of the first.
    pub violations: Vec<T>,
}

/// Whether every spectrum-labeled energy of `omega` lies within `eps` of a band of `x`.
pub fn inclusion_check<T: Real>(
    x: &SpectrumReport<T>,
    omega: &SpectrumReport<T>,
    eps: T,
) -> Result<InclusionResult<T>, ScanError> {
    if x.e_range != omega.e_range
        || x.grid_step != omega.grid_step
        || !x.settings.same_classifier(&omega.settings)
        || x.energies() != omega.energies()
    {
        return Err(ScanError::GridMismatch);
    }
    let violations: Vec<T> = omega
        .points
        .iter()
        .filter(|p| p.label == Label::Spectrum && x.distance_to_bands(p.energy) > eps)
        .map(|p| p.energy)
        .collect();
    Ok(InclusionResult { included: violations.is_empty(), violations })
}

/// Distances from each eigenvalue of the centered size-`section_size` section to the
/// nearest band, in descending order.
pub fn section_distances<T: Real, S: PotentialSource<T> + ?Sized>(
    src: &S,
    report: &SpectrumReport<T>,
    section_size: usize,
) -> Result<Vec<T>, ScanError> {
    if section_size < 16 {
        return Err(ScanError::InvalidArgument(format!("section_size must be ≥ 16, got {section_size}")));
    }
    let sec = FiniteSection::centered(src, 0, section_size)?;
    let mut d: Vec<T> = eigenvalues(&sec, T::zero()).into_iter().map(|e| report.distance_to_bands(e)).collect();
    d.sort_by(|a, b| b.partial_cmp(a).expect("finite distances"));
    Ok(d)
}

/// Max distance from a finite-section eigenvalue to the nearest report band.
pub fn section_consistency<T: Real, S: PotentialSource<T> + ?Sized>(
    src: &S,
    report: &SpectrumReport<T>,
    section_size: usize,
) -> Result<T, ScanError> {
    Ok(section_distances(src, report, section_size)?.first().copied().unwrap_or_else(T::zero))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cocycle::{Descriptor, FnPotential};
    use serde_json::json;

    fn constant(a: f64) -> FnPotential<f64, impl Fn(i64) -> f64 + Send + Sync> {
        FnPotential::new(move |_| a, a.abs(), Descriptor::new("constant", json!({ "a": a })))
    }

    fn fast() -> Settings {
        Settings { depth: 48, window: 64, angle_grid: 256, ..Settings::default() }
    }

    #[test]
    fn classify_examples() {
        let zero = constant(0.0);
        let s = Settings::default();
        let p = classify_energy(&zero, 3.0, &s).unwrap();
        assert_eq!(p.label, Label::Resolvent);
        let z = (3.0 - 5f64.sqrt()) / 2.0;
        assert!((p.decay_rate.unwrap() - z).abs() < 1e-6);
        assert_eq!(classify_energy(&zero, 1.0, &s).unwrap().label, Label::Spectrum);
        assert_ne!(classify_energy(&zero, 2.0, &s).unwrap().label, Label::Resolvent);
        assert_ne!(classify_energy(&zero, -2.0, &s).unwrap().label, Label::Resolvent);
    }

    #[test]
    fn grid_and_bands() {
        assert_eq!(coarse_grid((-1.0, 1.0), 0.5), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(coarse_grid((-3.0, 3.0), 0.01).len(), 601);
        let mk = |e: f64, label| EnergyPoint {
            energy: e,
            label,
            lambda: None,
            gap: None,
            witness_log_norm: None,
            decay_rate: None,
            reason: None,
            refined: false,
            depth: 64,
        };
        use Label::*;
        let pts = vec![
            mk(0.0, Resolvent),
            mk(1.0, Spectrum),
            mk(2.0, Spectrum),
            mk(3.0, Inconclusive),
            mk(4.0, Spectrum),
            mk(5.0, Resolvent),
            mk(6.0, Spectrum),
        ];
        assert_eq!(assemble_bands(&pts), vec![(1.0, 2.0), (4.0, 4.0), (6.0, 6.0)]);
    }

    #[test]
    fn small_free_scan() {
        let zero = constant(0.0);
        let r = scan(&zero, (-3.0, 3.0), 0.1, &fast()).unwrap();
        assert_eq!(r.bands.len(), 1);
        let (a, b) = r.bands[0];
        assert!((a + 2.0).abs() < 0.05 && (b - 2.0).abs() < 0.05, "{:?}", r.bands);
        assert!(r.points.iter().any(|p| p.refined));
        assert_eq!(r.energies().len(), 61);
        let csv = r.to_csv();
        assert!(csv.lines().nth(1) == Some("E,label,lambda,gap,witness_log_norm,decay_rate,depth,reason"));
        assert_eq!(csv.lines().count(), r.points.len() + 2);
    }

    #[test]
    fn parallel_scan_is_identical() {
        let zero = constant(0.0);
        let one = scan(&zero, (-2.6, 2.6), 0.2, &fast()).unwrap();
        let many = scan(&zero, (-2.6, 2.6), 0.2, &Settings { parallelism: 4, ..fast() }).unwrap();
        assert_eq!(one.points, many.points);
        assert_eq!(one.bands, many.bands);
    }

    #[test]
    fn inclusion_basics() {
        let zero = constant(0.0);
        let r = scan(&zero, (-3.0, 3.0), 0.25, &fast()).unwrap();
        assert!(inclusion_check(&r, &r, 0.0).unwrap().included);
        let other = scan(&zero, (-3.0, 3.0), 0.5, &fast()).unwrap();
        assert_eq!(inclusion_check(&r, &other, 0.1), Err(ScanError::GridMismatch));
        let shifted = scan(&constant(1.0), (-3.0, 3.0), 0.25, &fast()).unwrap();
        let res = inclusion_check(&r, &shifted, 0.05).unwrap();
        assert!(!res.included && res.violations.iter().all(|&e| e > 2.0));
    }

    #[test]
    fn section_consistency_free() {
        let zero = constant(0.0);
        let r = scan(&zero, (-3.0, 3.0), 0.1, &fast()).unwrap();
        assert!(section_consistency(&zero, &r, 128).unwrap() <= 0.05);
        assert!(section_consistency(&zero, &r, 8).is_err());
    }

    #[test]
    fn settings_validation_and_json() {
        assert!(Settings::default().validate().is_ok());
        assert!(Settings { depth: 4, ..Settings::default() }.validate().is_err());
        let s: Settings = serde_json::from_str(r#"{"depth": 32}"#).unwrap();
        assert_eq!(s, Settings { depth: 32, ..Settings::default() });
        assert!(serde_json::from_str::<Settings>(r#"{"dept": 32}"#).is_err());
        let zero = constant(0.0);
        assert!(matches!(scan(&zero, (0.0, 1.0), 0.0, &fast()), Err(ScanError::InvalidArgument(_))));
    }
}
