//! Concrete potential families and hull (phase) sampling.

use std::marker::PhantomData;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::cocycle::{CocycleError, Descriptor, PotentialSource, SequencePotential, SharedSource};
use crate::lattice::Sequence;
use crate::scalar::Real;

/// `(√5 − 1)/2`, the default irrational frequency.
pub const GOLDEN_MEAN: f64 = 0.618_033_988_749_894_8;

/// Name of the deterministic generator behind `random_iid`, recorded in descriptors.
pub const RANDOM_GENERATOR: &str = "chacha8-stream-per-site";

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("bad phase {phase} for family {family}: {reason}")]
    BadPhase { family: Family, phase: f64, reason: String },
    #[error("missing parameter `{0}`")]
    MissingParam(&'static str),
    #[error("bad parameter `{name}`: {reason}")]
    BadParam { name: &'static str, reason: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {reason}")]
    Parse { path: PathBuf, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Constant,
    Periodic,
    AlmostMathieu,
    Sturmian,
    RandomIid,
    File,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Constant => "constant",
            Family::Periodic => "periodic",
            Family::AlmostMathieu => "almost_mathieu",
            Family::Sturmian => "sturmian",
            Family::RandomIid => "random_iid",
            Family::File => "file",
        }
    }

    /// Whether phases are real offsets (`θ`) rather than integer shifts.
    pub fn has_continuous_phase(&self) -> bool {
        matches!(self, Family::AlmostMathieu | Family::Sturmian)
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Family {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(json!(s)).map_err(|_| ModelError::BadParam {
            name: "family",
            reason: format!("unknown family `{s}`"),
        })
    }
}

/// A model family, its parameters, and the sampled hull points.
///
/// Parsed from `{"family": "...", "params": {...}, "phases": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HullSpec {
    pub family: Family,
    #[serde(default = "empty_object")]
    pub params: serde_json::Value,
    #[serde(default)]
    pub phases: Vec<f64>,
}

fn empty_object() -> serde_json::Value {
    json!({})
}

/// A point of the hull: a phase offset `θ` or an integer shift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Theta(f64),
    Shift(i64),
}

impl HullSpec {
    pub fn new(family: Family, params: serde_json::Value) -> Self {
        Self { family, params, phases: Vec::new() }
    }

    pub fn constant(a: f64) -> Self {
        Self::new(Family::Constant, json!({ "a": a }))
    }

    pub fn periodic(pattern: &[f64]) -> Self {
        Self::new(Family::Periodic, json!({ "pattern": pattern }))
    }

    pub fn almost_mathieu(coupling: f64, alpha: f64, theta: f64) -> Self {
        Self::new(
            Family::AlmostMathieu,
            json!({ "coupling": coupling, "alpha": alpha, "theta": theta }),
        )
    }

    pub fn sturmian(coupling: f64, alpha: f64, theta: f64) -> Self {
        Self::new(
            Family::Sturmian,
            json!({ "coupling": coupling, "alpha": alpha, "theta": theta }),
        )
    }

    pub fn random_iid(bound: f64, seed: u64) -> Self {
        Self::new(Family::RandomIid, json!({ "bound": bound, "seed": seed }))
    }

    pub fn file(path: impl AsRef<Path>) -> Self {
        Self::new(Family::File, json!({ "path": path.as_ref() }))
    }

    fn num(&self, name: &'static str, default: Option<f64>) -> Result<f64, ModelError> {
        match self.params.get(name) {
            None | Some(serde_json::Value::Null) => default.ok_or(ModelError::MissingParam(name)),
            Some(v) => v
                .as_f64()
                .filter(|x| x.is_finite())
                .ok_or_else(|| ModelError::BadParam { name, reason: format!("expected a finite number, got {v}") }),
        }
    }

    fn text(&self, name: &'static str) -> Result<Option<String>, ModelError> {
        match self.params.get(name) {
            None | Some(serde_json::Value::Null) => Ok(None),
            Some(serde_json::Value::String(s)) => Ok(Some(s.clone())),
            Some(v) => Err(ModelError::BadParam { name, reason: format!("expected a string, got {v}") }),
        }
    }

    /// Declared bound `M` of every source generated from this spec.
    pub fn bound(&self) -> Result<f64, ModelError> {
        Ok(match self.family {
            Family::Constant => self.num("a", Some(0.0))?.abs(),
            Family::Periodic => self.pattern()?.iter().fold(0.0f64, |m, x| m.max(x.abs())),
            Family::AlmostMathieu => 2.0 * self.num("coupling", Some(1.0))?.abs(),
            Family::Sturmian => self.num("coupling", Some(1.0))?.abs(),
            Family::RandomIid => self.num("bound", Some(1.0))?.abs(),
            Family::File => load_file_sequence(&self.file_path()?, self.sidecar_path()?.as_deref())?.1,
        })
    }

    fn pattern(&self) -> Result<Vec<f64>, ModelError> {
        let raw = self.params.get("pattern").ok_or(ModelError::MissingParam("pattern"))?;
        let values: Vec<f64> = serde_json::from_value(raw.clone()).map_err(|e| ModelError::BadParam {
            name: "pattern",
            reason: e.to_string(),
        })?;
        if values.is_empty() || values.iter().any(|x| !x.is_finite()) {
            return Err(ModelError::BadParam {
                name: "pattern",
                reason: "must be a nonempty list of finite numbers".into(),
            });
        }
        Ok(values)
    }

    fn file_path(&self) -> Result<PathBuf, ModelError> {
        self.text("path")?.map(PathBuf::from).ok_or(ModelError::MissingParam("path"))
    }

    fn sidecar_path(&self) -> Result<Option<PathBuf>, ModelError> {
        Ok(self.text("sidecar")?.map(PathBuf::from))
    }

    fn seed(&self) -> Result<u64, ModelError> {
        match self.params.get("seed") {
            None | Some(serde_json::Value::Null) => Ok(0),
            Some(v) => v.as_u64().ok_or_else(|| ModelError::BadParam {
                name: "seed",
                reason: format!("expected a non-negative integer, got {v}"),
            }),
        }
    }

    /// Interprets a raw phase number for this family.
    pub fn phase(&self, raw: f64) -> Result<Phase, ModelError> {
        if !raw.is_finite() {
            return Err(ModelError::BadPhase { family: self.family, phase: raw, reason: "not finite".into() });
        }
        if self.family.has_continuous_phase() {
            Ok(Phase::Theta(raw))
        } else if raw.fract() == 0.0 && raw.abs() < 9.0e15 {
            Ok(Phase::Shift(raw as i64))
        } else {
            Err(ModelError::BadPhase {
                family: self.family,
                phase: raw,
                reason: "this family is sampled by integer shifts only".into(),
            })
        }
    }
}

/// Builds the potential of `spec` at hull point `phase`.
///
/// For `almost_mathieu` and `sturmian`, `Theta(t)` replaces the base phase by `t`
/// and `Shift(m)` shifts the base sequence; all other families accept shifts only.
pub fn make_source<T: Real>(spec: &HullSpec, phase: Phase) -> Result<SharedSource<T>, ModelError> {
    let base: SharedSource<T> = match spec.family {
        Family::Constant => {
            let a = spec.num("a", Some(0.0))?;
            Arc::new(ModelPotential::<T>::new(
                Model::Constant { a },
                a.abs(),
                Descriptor::new("constant", json!({ "a": a })),
            ))
        }
        Family::Periodic => {
            let pattern = spec.pattern()?;
            let bound = spec.bound()?;
            let desc = Descriptor::new("periodic", json!({ "pattern": pattern }));
            Arc::new(ModelPotential::<T>::new(Model::Periodic { pattern }, bound, desc))
        }
        Family::AlmostMathieu | Family::Sturmian => {
            let coupling = spec.num("coupling", Some(1.0))?;
            let alpha = spec.num("alpha", Some(GOLDEN_MEAN))?;
            let theta = match phase {
                Phase::Theta(t) => t,
                Phase::Shift(_) => spec.num("theta", Some(0.0))?,
            };
            let mut desc = Descriptor::new(
                spec.family.name(),
                json!({ "coupling": coupling, "alpha": alpha, "theta": theta }),
            );
            if looks_rational(alpha) {
                desc.flags.push("rational_frequency".into());
            }
            let model = if spec.family == Family::AlmostMathieu {
                Model::AlmostMathieu { coupling, alpha, theta }
            } else {
                Model::Sturmian { coupling, alpha, theta }
            };
            Arc::new(ModelPotential::<T>::new(model, spec.bound()?, desc))
        }
        Family::RandomIid => {
            let bound = spec.num("bound", Some(1.0))?.abs();
            let seed = spec.seed()?;
            let desc = Descriptor::new(
                "random_iid",
                json!({ "bound": bound, "seed": seed, "generator": RANDOM_GENERATOR }),
            );
            Arc::new(ModelPotential::<T>::new(Model::RandomIid { bound, seed }, bound, desc))
        }
        Family::File => {
            let path = spec.file_path()?;
            let sidecar = spec.sidecar_path()?;
            let (seq, bound) = load_file_sequence(&path, sidecar.as_deref())?;
            let desc = Descriptor::new(
                "file",
                json!({ "path": path, "first_index": seq.first, "len": seq.values.len() }),
            );
            let values = Sequence::new(seq.first, seq.values.iter().map(|&x| T::lit(x)).collect());
            Arc::new(SequencePotential::new(values, T::lit(bound), desc))
        }
    };
    match phase {
        Phase::Shift(m) if m != 0 => Ok(shift(base, m)),
        Phase::Theta(_) if !spec.family.has_continuous_phase() => Err(ModelError::BadPhase {
            family: spec.family,
            phase: f64::NAN,
            reason: "this family is sampled by integer shifts only".into(),
        }),
        _ => Ok(base),
    }
}

/// Sources for the phases listed in `spec.phases` (or the base point when empty).
pub fn phase_sources<T: Real>(spec: &HullSpec) -> Result<Vec<SharedSource<T>>, ModelError> {
    if spec.phases.is_empty() {
        return Ok(vec![make_source(spec, Phase::Shift(0))?]);
    }
    spec.phases.iter().map(|&p| make_source(spec, spec.phase(p)?)).collect()
}

/// `count` sampled hull points; the first one is the designated dense-orbit point.
///
/// Quasi-periodic families use phases `θ_0 + j/(2·count)` (inside half a period so
/// that `v(0)` values are distinct for `almost_mathieu`, and `θ_0 + j/count` for
/// `sturmian`); the remaining families use integer shifts `j · shift_stride`.
pub fn hull_samples<T: Real>(spec: &HullSpec, count: usize) -> Result<Vec<SharedSource<T>>, ModelError> {
    if count == 0 {
        return Err(ModelError::BadParam { name: "count", reason: "must be at least 1".into() });
    }
    let stride = spec.num("shift_stride", Some(1.0))?;
    if stride.fract() != 0.0 {
        return Err(ModelError::BadParam { name: "shift_stride", reason: "must be an integer".into() });
    }
    let mut out = Vec::with_capacity(count);
    for j in 0..count {
        let phase = match spec.family {
            Family::AlmostMathieu => {
                Phase::Theta(spec.num("theta", Some(0.0))? + j as f64 / (2.0 * count as f64))
            }
            Family::Sturmian => Phase::Theta((spec.num("theta", Some(0.0))? + j as f64 / count as f64).fract()),
            Family::Constant => Phase::Shift(0),
            _ => Phase::Shift(j as i64 * stride as i64),
        };
        let src = make_source::<T>(spec, phase)?;
        out.push(if j == 0 { mark_dense(src) } else { src });
    }
    Ok(out)
}

/// Shifted source: `sample(n) = src.sample(n + m)`.
pub fn shift<T: Real>(src: SharedSource<T>, m: i64) -> SharedSource<T> {
    Arc::new(Shifted { inner: src, by: m })
}

fn mark_dense<T: Real>(src: SharedSource<T>) -> SharedSource<T> {
    Arc::new(DenseMarked { inner: src })
}

/// Loads a one-value-per-line file and its JSON sidecar `{"first_index", "bound"}`.
///
/// The sidecar defaults to `<path>.json`. Blank lines and `#` comments are skipped.
pub fn load_file_sequence(path: &Path, sidecar: Option<&Path>) -> Result<(Sequence<f64>, f64), ModelError> {
    #[derive(Deserialize)]
    struct Sidecar {
        first_index: i64,
        bound: f64,
    }
    let sidecar_path = sidecar.map(Path::to_path_buf).unwrap_or_else(|| {
        let mut s = path.as_os_str().to_owned();
        s.push(".json");
        PathBuf::from(s)
    });
    let read = |p: &Path| {
        std::fs::read_to_string(p).map_err(|source| ModelError::Io { path: p.to_path_buf(), source })
    };
    let meta: Sidecar = serde_json::from_str(&read(&sidecar_path)?)
        .map_err(|e| ModelError::Parse { path: sidecar_path.clone(), reason: e.to_string() })?;
    let mut values = Vec::new();
    for (lineno, line) in read(path)?.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let x: f64 = line.parse().map_err(|e| ModelError::Parse {
            path: path.to_path_buf(),
            reason: format!("line {}: {e}", lineno + 1),
        })?;
        if !(x.abs() <= meta.bound) {
            return Err(ModelError::Parse {
                path: path.to_path_buf(),
                reason: format!("line {}: value {x} exceeds declared bound {}", lineno + 1, meta.bound),
            });
        }
        values.push(x);
    }
    if values.is_empty() {
        return Err(ModelError::Parse { path: path.to_path_buf(), reason: "no values".into() });
    }
    Ok((Sequence::new(meta.first_index, values), meta.bound))
}

fn looks_rational(alpha: f64) -> bool {
    (1..=1000).any(|q| {
        let x = alpha * q as f64;
        (x - x.round()).abs() < 1e-12 * q as f64
    })
}

#[derive(Debug, Clone)]
enum Model {
    Constant { a: f64 },
    Periodic { pattern: Vec<f64> },
    AlmostMathieu { coupling: f64, alpha: f64, theta: f64 },
    Sturmian { coupling: f64, alpha: f64, theta: f64 },
    RandomIid { bound: f64, seed: u64 },
}

impl Model {
    fn eval(&self, n: i64) -> f64 {
        match self {
            Model::Constant { a } => *a,
            Model::Periodic { pattern } => pattern[n.rem_euclid(pattern.len() as i64) as usize],
            Model::AlmostMathieu { coupling, alpha, theta } => {
                let x = (n as f64 * alpha + theta).rem_euclid(1.0);
                2.0 * coupling * (std::f64::consts::TAU * x).cos()
            }
            Model::Sturmian { coupling, alpha, theta } => {
                let x = (n as f64 * alpha + theta).rem_euclid(1.0);
                if x >= 1.0 - alpha {
                    *coupling
                } else {
                    0.0
                }
            }
            Model::RandomIid { bound, seed } => {
                if *bound == 0.0 {
                    return 0.0;
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_stream(n as u64);
                rng.gen_range(-*bound..=*bound)
            }
        }
    }
}

struct ModelPotential<T> {
    model: Model,
    bound: f64,
    descriptor: Descriptor,
    _scalar: PhantomData<fn() -> T>,
}

impl<T: Real> ModelPotential<T> {
    fn new(model: Model, bound: f64, descriptor: Descriptor) -> Self {
        Self { model, bound, descriptor, _scalar: PhantomData }
    }
}

impl<T: Real> PotentialSource<T> for ModelPotential<T> {
    fn value(&self, n: i64) -> Result<T, CocycleError> {
        Ok(T::lit(self.model.eval(n)))
    }
    fn bound(&self) -> T {
        T::lit(self.bound)
    }
    fn descriptor(&self) -> Descriptor {
        self.descriptor.clone()
    }
}

struct Shifted<T: Real> {
    inner: SharedSource<T>,
    by: i64,
}

impl<T: Real> PotentialSource<T> for Shifted<T> {
    fn value(&self, n: i64) -> Result<T, CocycleError> {
        self.inner.value(n + self.by)
    }
    fn bound(&self) -> T {
        self.inner.bound()
    }
    fn descriptor(&self) -> Descriptor {
        let mut d = self.inner.descriptor();
        d.shift += self.by;
        d
    }
}

struct DenseMarked<T: Real> {
    inner: SharedSource<T>,
}

impl<T: Real> PotentialSource<T> for DenseMarked<T> {
    fn value(&self, n: i64) -> Result<T, CocycleError> {
        self.inner.value(n)
    }
    fn bound(&self) -> T {
        self.inner.bound()
    }
    fn descriptor(&self) -> Descriptor {
        let mut d = self.inner.descriptor();
        d.dense_orbit_point = true;
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cocycle::product;
    use std::collections::BTreeSet;

    fn src(spec: &HullSpec) -> SharedSource<f64> {
        make_source(spec, Phase::Shift(0)).unwrap()
    }

    fn samples(s: &SharedSource<f64>, range: std::ops::Range<i64>) -> Vec<f64> {
        range.map(|n| s.sample(n).unwrap()).collect()
    }

    #[test]
    fn constant_and_periodic() {
        let zero = src(&HullSpec::constant(0.0));
        assert_eq!(zero.bound(), 0.0);
        assert!(samples(&zero, -5..5).iter().all(|&x| x == 0.0));
        let p = src(&HullSpec::periodic(&[1.0, 0.0]));
        assert_eq!(p.bound(), 1.0);
        assert_eq!(samples(&p, -2..3), vec![1.0, 0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn almost_mathieu_value() {
        let s = src(&HullSpec::almost_mathieu(1.0, GOLDEN_MEAN, 0.0));
        // 2cos(2π·0.6180339887…) from a 40-digit evaluation.
        assert!((s.sample(1).unwrap() - (-1.474_737_756_156_639_8)).abs() < 1e-12);
        assert_eq!(s.bound(), 2.0);
    }

    #[test]
    fn sturmian_is_fibonacci_coding() {
        let s = src(&HullSpec::sturmian(1.0, GOLDEN_MEAN, 0.0));
        let word: Vec<f64> = samples(&s, 1..9);
        // χ_[1−α,1)(nα mod 1) for n = 1..8
        let expect: Vec<f64> = (1..9)
            .map(|n| if (n as f64 * GOLDEN_MEAN).fract() >= 1.0 - GOLDEN_MEAN { 1.0 } else { 0.0 })
            .collect();
        assert_eq!(word, expect);
        assert!(word.iter().all(|&x| x == 0.0 || x == 1.0));
    }

    #[test]
    fn random_is_reproducible() {
        let spec = HullSpec::random_iid(2.0, 7);
        let a = samples(&src(&spec), -50..50);
        let b = samples(&src(&spec), -50..50);
        assert_eq!(a, b);
        let c = samples(&src(&HullSpec::random_iid(2.0, 8)), -50..50);
        assert_ne!(a, c);
        assert_eq!(src(&spec).descriptor().params["generator"], RANDOM_GENERATOR);
    }

    #[test]
    fn bounds_hold_for_every_family() {
        let specs = [
            HullSpec::constant(-1.5),
            HullSpec::periodic(&[1.0, -3.0, 0.5]),
            HullSpec::almost_mathieu(1.3, GOLDEN_MEAN, 0.2),
            HullSpec::sturmian(2.5, GOLDEN_MEAN, 0.1),
            HullSpec::random_iid(0.7, 3),
        ];
        for spec in &specs {
            let s = src(spec);
            for n in -5000..5000 {
                assert!(s.sample(n).is_ok(), "{:?} at {n}", spec.family);
            }
        }
    }

    #[test]
    fn shift_laws() {
        let amo = HullSpec::almost_mathieu(1.0, GOLDEN_MEAN, 0.1);
        let s = src(&amo);
        assert_eq!(samples(&shift(s.clone(), 0), -20..20), samples(&s, -20..20));
        assert_eq!(
            samples(&shift(shift(s.clone(), 3), -7), -20..20),
            samples(&shift(s.clone(), -4), -20..20)
        );
        assert_eq!(shift(shift(s.clone(), 3), -7).descriptor().shift, -4);
        let moved = make_source::<f64>(&amo, Phase::Theta(0.1 + GOLDEN_MEAN)).unwrap();
        for (a, b) in samples(&shift(s, 1), -100..100).iter().zip(samples(&moved, -100..100)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn shift_equivariance_of_products() {
        let s = src(&HullSpec::almost_mathieu(1.0, GOLDEN_MEAN, 0.3));
        let moved = shift(s.clone(), 1);
        for (k, n) in [(0, 10), (-5, -12), (7, 33)] {
            let a = product(&moved, 0.7, k, n).unwrap();
            let b = product(&s, 0.7, k + 1, n).unwrap();
            assert_eq!(a.matrix, b.matrix);
            assert_eq!(a.log_scale, b.log_scale);
        }
    }

    #[test]
    fn periodic_trace_is_site_independent() {
        let s = src(&HullSpec::periodic(&[1.0, -0.5, 0.25]));
        let traces: Vec<f64> = (-6..6)
            .map(|k| {
                let m = product(&s, 0.8, k, 3).unwrap().to_mat2().unwrap();
                m.trace()
            })
            .collect();
        for t in &traces {
            assert!((t - traces[0]).abs() < 1e-10);
        }
    }

    #[test]
    fn hull_sample_counts() {
        let c = hull_samples::<f64>(&HullSpec::constant(0.5), 5).unwrap();
        assert_eq!(c.len(), 5);
        assert!(c[0].descriptor().dense_orbit_point && !c[1].descriptor().dense_orbit_point);
        let p = hull_samples::<f64>(&HullSpec::periodic(&[1.0, 0.0]), 4).unwrap();
        let distinct: BTreeSet<Vec<u64>> = p
            .iter()
            .map(|s| samples(s, 0..6).iter().map(|x| x.to_bits()).collect())
            .collect();
        assert_eq!(distinct.len(), 2);
        let a = hull_samples::<f64>(&HullSpec::almost_mathieu(1.0, GOLDEN_MEAN, 0.0), 8).unwrap();
        let v0: BTreeSet<u64> = a.iter().map(|s| s.sample(0).unwrap().to_bits()).collect();
        assert_eq!(v0.len(), 8);
    }

    #[test]
    fn phases_and_errors() {
        let p = HullSpec::periodic(&[1.0, 0.0]);
        assert!(matches!(p.phase(0.5), Err(ModelError::BadPhase { .. })));
        assert_eq!(p.phase(3.0).unwrap(), Phase::Shift(3));
        assert!(matches!(make_source::<f64>(&p, Phase::Theta(0.2)), Err(ModelError::BadPhase { .. })));
        let rational = make_source::<f64>(&HullSpec::almost_mathieu(1.0, 0.5, 0.0), Phase::Shift(0)).unwrap();
        assert!(rational.descriptor().flags.contains(&"rational_frequency".to_string()));
        let missing = HullSpec::new(Family::Periodic, json!({}));
        assert!(matches!(make_source::<f64>(&missing, Phase::Shift(0)), Err(ModelError::MissingParam("pattern"))));
    }

    #[test]
    fn file_family_round_trip() {
        let dir = std::env::temp_dir().join(format!("uhspec-models-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("pot.txt");
        std::fs::write(&path, "0.5\n# comment\n-0.25\n1.0\n").unwrap();
        std::fs::write(dir.join("pot.txt.json"), r#"{"first_index": -1, "bound": 1.0}"#).unwrap();
        let s = src(&HullSpec::file(&path));
        assert_eq!(samples(&s, -1..2), vec![0.5, -0.25, 1.0]);
        assert!(matches!(s.sample(2), Err(CocycleError::OutOfRange { .. })));
        let shifted = make_source::<f64>(&HullSpec::file(&path), Phase::Shift(1)).unwrap();
        assert_eq!(shifted.sample(-2).unwrap(), 0.5);
        std::fs::write(&path, "3.0\n").unwrap();
        assert!(make_source::<f64>(&HullSpec::file(&path), Phase::Shift(0)).is_err());
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn hull_spec_json_shape() {
        let spec: HullSpec =
            serde_json::from_str(r#"{"family": "almost_mathieu", "params": {"coupling": 1.0}, "phases": [0.0, 0.3]}"#)
                .unwrap();
        assert_eq!(spec.family, Family::AlmostMathieu);
        let srcs = phase_sources::<f64>(&spec).unwrap();
        assert_eq!(srcs.len(), 2);
        assert_eq!(srcs[1].descriptor().params["theta"], 0.3);
        assert_eq!("random_iid".parse::<Family>().unwrap(), Family::RandomIid);
    }
}
