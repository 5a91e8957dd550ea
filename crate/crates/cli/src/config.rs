//! Run configuration: a JSON file plus command-line overrides (flags win).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;
use uhspec::models::GOLDEN_MEAN;
use uhspec::{Family, HullSpec, Settings};

use crate::CliError;

/// Everything a run needs. Every field has a default, so `{"model": {...}}` alone is
/// runnable; `e_range` defaults to `[−M−2, M+2]` for the model's bound `M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<HullSpec>,
    /// Energy for `certify`, `green` and `witness`.
    pub energy: f64,
    pub e_range: Option<(f64, f64)>,
    pub grid_step: f64,
    pub settings: Settings,
    /// Size of the centered finite section for `eig`.
    pub section_size: usize,
    /// Inclusion tolerance for `compare`.
    pub eps: f64,
    /// Number of hull samples for `compare` when the model lists no phases.
    pub phase_count: usize,
    /// Half-width of the kernel window for `green`.
    pub green_half_width: i64,
    /// `|p − q|` cut-off of the kernel CSV.
    pub green_radius: i64,
    /// Random test vectors for the kernel's inverse check.
    pub trials: usize,
    /// Seeds the random family and the inverse check.
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: None,
            energy: 0.0,
            e_range: None,
            grid_step: 0.01,
            settings: Settings::default(),
            section_size: 256,
            eps: 0.05,
            phase_count: 8,
            green_half_width: 100,
            green_radius: 16,
            trials: 20,
            seed: None,
            out: None,
        }
    }
}

/// Flag values; `None` leaves the config untouched.
#[derive(Debug, Default)]
pub struct Overrides {
    pub model: Option<Family>,
    pub energy: Option<f64>,
    pub e_range: Option<(f64, f64)>,
    pub step: Option<f64>,
    pub depth: Option<i64>,
    pub window: Option<i64>,
    pub out: Option<PathBuf>,
    pub parallelism: Option<usize>,
    pub seed: Option<u64>,
}

/// Parameters used when a family is picked by name only.
pub fn default_model(family: Family) -> Result<HullSpec, CliError> {
    Ok(match family {
        Family::Constant => HullSpec::constant(0.0),
        Family::Periodic => HullSpec::periodic(&[1.0, 0.0]),
        Family::AlmostMathieu => HullSpec::almost_mathieu(1.0, GOLDEN_MEAN, 0.0),
        Family::Sturmian => HullSpec::sturmian(1.0, GOLDEN_MEAN, 0.0),
        Family::RandomIid => HullSpec::random_iid(1.0, 0),
        Family::File => {
            return Err(CliError::Usage("model: the file family needs a config with params.path".into()))
        }
    })
}

pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
}

impl RunConfig {
    pub fn apply(&mut self, o: Overrides) -> Result<(), CliError> {
        if let Some(family) = o.model {
            // Keep configured parameters when the flag names the same family.
            if self.model.as_ref().map(|m| m.family) != Some(family) {
                self.model = Some(default_model(family)?);
            }
        }
        if let Some(e) = o.energy {
            self.energy = e;
        }
        if o.e_range.is_some() {
            self.e_range = o.e_range;
        }
        if let Some(s) = o.step {
            self.grid_step = s;
        }
        if let Some(d) = o.depth {
            self.settings.depth = d;
        }
        if let Some(w) = o.window {
            self.settings.window = w;
        }
        if o.out.is_some() {
            self.out = o.out;
        }
        if let Some(p) = o.parallelism {
            self.settings.parallelism = p;
        }
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        if let (Some(seed), Some(model)) = (self.seed, self.model.as_mut()) {
            if model.family == Family::RandomIid {
                model.params["seed"] = json!(seed);
            }
        }
        Ok(())
    }

    /// Checks every field and resolves `e_range`; errors name the offending field.
    pub fn resolve(&mut self) -> Result<&HullSpec, CliError> {
        let usage = |m: String| Err(CliError::Usage(m));
        let Some(model) = self.model.as_ref() else {
            return usage("model: required (use --model <family> or a config file)".into());
        };
        let bound = model.bound().map_err(|e| CliError::Usage(format!("model: {e}")))?;
        if !(self.grid_step > 0.0 && self.grid_step.is_finite()) {
            return usage(format!("grid_step must be > 0, got {}", self.grid_step));
        }
        if !self.energy.is_finite() {
            return usage("energy must be finite".into());
        }
        let range = self.e_range.unwrap_or((-bound - 2.0, bound + 2.0));
        if !(range.0.is_finite() && range.1.is_finite() && range.0 <= range.1) {
            return usage(format!("e_range must be finite with a ≤ b, got [{}, {}]", range.0, range.1));
        }
        self.e_range = Some(range);
        if !(self.eps > 0.0) {
            return usage(format!("eps must be > 0, got {}", self.eps));
        }
        if self.section_size < 16 {
            return usage(format!("section_size must be ≥ 16, got {}", self.section_size));
        }
        if self.phase_count < 1 {
            return usage("phase_count must be ≥ 1".into());
        }
        if self.green_half_width < 1 || self.green_radius < 0 {
            return usage("green_half_width must be ≥ 1 and green_radius ≥ 0".into());
        }
        self.settings.validate().map_err(|e| CliError::Usage(format!("settings.{}", strip_prefix(&e.to_string()))))?;
        Ok(self.model.as_ref().expect("checked above"))
    }
}

fn strip_prefix(msg: &str) -> &str {
    msg.strip_prefix("invalid argument: ").unwrap_or(msg)
}

/// Parses `a,b`.
pub fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected a,b, got {s:?}"))?;
    let a: f64 = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
    Ok((a, b))
}

pub fn parse_family(s: &str) -> Result<Family, String> {
    s.parse::<Family>().map_err(|e| e.to_string())
}
