//! Scenario files: one JSON document fully determines a run. Strict
//! parsing (unknown fields rejected, schema versioned) so a typo fails
//! loudly with a line and column instead of silently changing the run.

use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

use crate::approx::ErgodicPresentation;
use crate::entropy::MeasureCandidate;
use crate::measure::{DiscreteMeasure, ObservableFamily};
use crate::systems::{MapSystem, SymbolicSystem, SystemError};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{0}")]
    Config(String),
    #[error("resource limit: {0}")]
    Resource(String),
}

/// Hard ceilings that keep a scenario desk-scale; beyond them the run is
/// refused up front rather than thrashing.
const MAX_BOXES: usize = 1 << 24;
const MAX_SAMPLE_WORK: u128 = 1 << 33;
const MAX_SAMPLES_PER_BOX: usize = 4096;
const MAX_SPAN_WORK: u128 = 1 << 33;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Must be 1.
    pub schema: u32,
    pub system: SystemSpec,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub sampling: Option<SamplingSpec>,
    #[serde(default)]
    pub family: Option<FamilySpec>,
    #[serde(default)]
    pub glue: Option<GlueSpec>,
    #[serde(default)]
    pub approx: Option<ApproxSpec>,
    #[serde(default)]
    pub entropy: Option<EntropySpec>,
    #[serde(default)]
    pub verify: Option<VerifySpec>,
    /// Task order for the `all` subcommand; defaults to every task whose
    /// configuration is present.
    #[serde(default)]
    pub tasks: Option<Vec<TaskName>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskName {
    Classes,
    Glue,
    Approx,
    Basins,
    Entropy,
    Verify,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    /// doubling | north_south | tent | identity | torus_cat | sft |
    /// full_shift | golden_mean
    pub name: String,
    /// sft only: 0/1 adjacency matrix.
    #[serde(default)]
    pub adjacency: Option<Vec<Vec<u8>>>,
    /// sft only: word window length (defaults to the library's).
    #[serde(default)]
    pub window: Option<usize>,
    /// identity: dimension (default 1). north_south: the sine amplitude.
    #[serde(default)]
    pub param: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub depth: u32,
    /// Chain tolerance in box-diameter units.
    pub delta_boxes: f64,
    #[serde(default = "default_samples_per_box")]
    pub samples_per_box: usize,
}

fn default_samples_per_box() -> usize {
    32
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSpec {
    pub n_samples: usize,
    pub orbit_length: usize,
    /// Defaults to the geometric ladder ceil(n / 2^c), c = 4..0.
    #[serde(default)]
    pub checkpoints: Option<Vec<usize>>,
    #[serde(default = "default_cluster_radius")]
    pub cluster_radius: f64,
    pub seed: u64,
}

fn default_cluster_radius() -> f64 {
    crate::physical::DEFAULT_CLUSTER_RADIUS
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    #[serde(default = "default_truncation")]
    pub truncation_level: usize,
    /// Optional cap on the total frequency of the trig family; the
    /// truncation level is lowered until the cap holds.
    #[serde(default)]
    pub frequency_cutoff: Option<usize>,
}

fn default_truncation() -> usize {
    20
}

impl Default for FamilySpec {
    fn default() -> Self {
        FamilySpec {
            truncation_level: default_truncation(),
            frequency_cutoff: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlueSpec {
    /// Map systems: orbit segments given by start point and length.
    #[serde(default)]
    pub map_segments: Vec<MapSegmentSpec>,
    /// Subshifts: word segments with explicit symbols.
    #[serde(default)]
    pub word_segments: Vec<WordSegmentSpec>,
    /// Subshifts: symbolic tracking depth m (delta = 2^-m).
    #[serde(default)]
    pub tracking_depth: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSegmentSpec {
    pub start: Vec<f64>,
    pub length: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WordSegmentSpec {
    pub symbols: Vec<u8>,
    #[serde(default)]
    pub periodic: bool,
    pub length: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApproxSpec {
    pub epsilon: f64,
    pub presentation: ErgodicPresentation,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropySpec {
    /// Candidate measures for the gap report (subshifts).
    #[serde(default)]
    pub candidates: Vec<MeasureCandidate>,
    /// Spanning estimate parameters (map systems).
    #[serde(default)]
    pub spanning: Option<SpanningSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpanningSpec {
    pub n: usize,
    pub epsilon: f64,
    pub seed_count: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    #[serde(default = "default_mass_threshold")]
    pub mass_threshold: f64,
    /// Extra cluster representatives injected before the inclusion check;
    /// the negative-control hook.
    #[serde(default)]
    pub extra_representatives: Vec<DiscreteMeasure>,
}

fn default_mass_threshold() -> f64 {
    0.01
}

impl Default for VerifySpec {
    fn default() -> Self {
        VerifySpec {
            mass_threshold: default_mass_threshold(),
            extra_representatives: Vec::new(),
        }
    }
}

/// The two system kinds a scenario can name.
pub enum RunSystem {
    Map(MapSystem),
    Shift(SymbolicSystem),
}

impl RunSystem {
    pub fn dim(&self) -> usize {
        match self {
            RunSystem::Map(f) => f.dimension(),
            RunSystem::Shift(_) => 1,
        }
    }
}

impl Scenario {
    pub fn from_path(path: &Path) -> Result<Scenario, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            ScenarioError::Config(format!("cannot read {}: {e}", path.display()))
        })?;
        let scenario: Scenario = serde_json::from_str(&text).map_err(|e| {
            ScenarioError::Config(format!(
                "{} line {} column {}: {e}",
                path.display(),
                e.line(),
                e.column()
            ))
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.schema != 1 {
            return Err(ScenarioError::Config(format!(
                "unsupported schema version {}, expected 1",
                self.schema
            )));
        }
        self.build_system()?;
        if let Some(g) = &self.grid {
            if g.depth == 0 || g.delta_boxes <= 0.0 {
                return Err(ScenarioError::Config(
                    "grid depth must be >= 1 and delta_boxes positive".into(),
                ));
            }
            if g.samples_per_box == 0 {
                return Err(ScenarioError::Config("samples_per_box must be >= 1".into()));
            }
            if g.samples_per_box > MAX_SAMPLES_PER_BOX {
                return Err(ScenarioError::Resource(format!(
                    "samples_per_box {} exceeds the cap {MAX_SAMPLES_PER_BOX}",
                    g.samples_per_box
                )));
            }
            let boxes = (1u128 << g.depth).pow(self.dim_hint() as u32);
            if boxes > MAX_BOXES as u128 {
                return Err(ScenarioError::Resource(format!(
                    "grid would have {boxes} boxes, cap is {MAX_BOXES}"
                )));
            }
        }
        if let Some(s) = &self.sampling {
            if s.n_samples == 0 || s.orbit_length == 0 {
                return Err(ScenarioError::Config(
                    "n_samples and orbit_length must be >= 1".into(),
                ));
            }
            if !(s.cluster_radius > 0.0) {
                return Err(ScenarioError::Config("cluster_radius must be positive".into()));
            }
            let work = s.n_samples as u128 * s.orbit_length as u128;
            if work > MAX_SAMPLE_WORK {
                return Err(ScenarioError::Resource(format!(
                    "n_samples * orbit_length = {work} exceeds the cap {MAX_SAMPLE_WORK}"
                )));
            }
            if let Some(cps) = &s.checkpoints {
                if cps.is_empty()
                    || cps[0] == 0
                    || !cps.windows(2).all(|w| w[0] < w[1])
                    || *cps.last().unwrap() > s.orbit_length
                {
                    return Err(ScenarioError::Config(
                        "checkpoints must be strictly increasing within [1, orbit_length]".into(),
                    ));
                }
            }
        }
        if let Some(f) = &self.family {
            if f.truncation_level == 0 || f.truncation_level > 60 {
                return Err(ScenarioError::Config(
                    "truncation_level must lie in [1, 60]".into(),
                ));
            }
        }
        if let Some(a) = &self.approx {
            if !(a.epsilon > 0.0) {
                return Err(ScenarioError::Config("approx epsilon must be positive".into()));
            }
            if a.presentation.components.is_empty() {
                return Err(ScenarioError::Config(
                    "approx presentation needs at least one component".into(),
                ));
            }
        }
        if let Some(e) = &self.entropy {
            if let Some(sp) = &e.spanning {
                if sp.n == 0 || !(sp.epsilon > 0.0) || sp.seed_count == 0 {
                    return Err(ScenarioError::Config(
                        "spanning needs n >= 1, epsilon > 0, seed_count >= 1".into(),
                    ));
                }
                let work = sp.seed_count as u128 * sp.seed_count as u128;
                if work > MAX_SPAN_WORK {
                    return Err(ScenarioError::Resource(format!(
                        "seed_count^2 = {work} exceeds the cap {MAX_SPAN_WORK}"
                    )));
                }
            }
        }
        if let Some(v) = &self.verify {
            if !(0.0..1.0).contains(&v.mass_threshold) {
                return Err(ScenarioError::Config(
                    "verify mass_threshold must lie in [0, 1)".into(),
                ));
            }
        }
        Ok(())
    }

    /// Dimension of the named system without fully constructing it.
    fn dim_hint(&self) -> usize {
        match self.system.name.as_str() {
            "torus_cat" | "cat" => 2,
            "identity" => self.system.param.map_or(1, |p| p as usize),
            _ => 1,
        }
    }

    pub fn build_system(&self) -> Result<RunSystem, ScenarioError> {
        let spec = &self.system;
        let reject_sft_fields = || -> Result<(), ScenarioError> {
            if spec.adjacency.is_some() || spec.window.is_some() {
                return Err(ScenarioError::Config(format!(
                    "system '{}' takes no adjacency or window",
                    spec.name
                )));
            }
            Ok(())
        };
        let reject_param = || -> Result<(), ScenarioError> {
            if spec.param.is_some() {
                return Err(ScenarioError::Config(format!(
                    "system '{}' takes no param",
                    spec.name
                )));
            }
            Ok(())
        };
        let sys_err = |e: SystemError| ScenarioError::Config(e.to_string());
        match spec.name.as_str() {
            "doubling" => {
                reject_sft_fields()?;
                reject_param()?;
                Ok(RunSystem::Map(MapSystem::doubling()))
            }
            "north_south" => {
                reject_sft_fields()?;
                match spec.param {
                    None => Ok(RunSystem::Map(MapSystem::north_south())),
                    Some(p) if p > 0.0 && p <= 0.15 => {
                        Ok(RunSystem::Map(MapSystem::north_south_with(p)))
                    }
                    Some(p) => Err(ScenarioError::Config(format!(
                        "north_south param must lie in (0, 0.15], got {p}"
                    ))),
                }
            }
            "tent" => {
                reject_sft_fields()?;
                reject_param()?;
                Ok(RunSystem::Map(MapSystem::tent()))
            }
            "identity" => {
                reject_sft_fields()?;
                let dim = match spec.param {
                    None => 1,
                    Some(p) if p == p.trunc() && (1.0..=3.0).contains(&p) => p as usize,
                    Some(p) => {
                        return Err(ScenarioError::Config(format!(
                            "identity param must be a dimension in 1..=3, got {p}"
                        )))
                    }
                };
                Ok(RunSystem::Map(MapSystem::identity(dim)))
            }
            "torus_cat" | "cat" => {
                reject_sft_fields()?;
                reject_param()?;
                Ok(RunSystem::Map(MapSystem::torus_cat()))
            }
            "full_shift" => {
                reject_param()?;
                if spec.adjacency.is_some() {
                    return Err(ScenarioError::Config(
                        "full_shift takes no adjacency; use name \"sft\"".into(),
                    ));
                }
                Ok(RunSystem::Shift(SymbolicSystem::full_shift(2)))
            }
            "golden_mean" => {
                reject_sft_fields()?;
                reject_param()?;
                Ok(RunSystem::Shift(SymbolicSystem::golden_mean()))
            }
            "sft" => {
                reject_param()?;
                let adjacency = spec.adjacency.clone().ok_or_else(|| {
                    ScenarioError::Config("system \"sft\" requires an adjacency matrix".into())
                })?;
                let window = spec.window.unwrap_or(32);
                Ok(RunSystem::Shift(
                    SymbolicSystem::new("sft", adjacency, window).map_err(sys_err)?,
                ))
            }
            other => Err(ScenarioError::Config(format!(
                "unknown system '{other}'; expected doubling, north_south, tent, identity, \
                 torus_cat, full_shift, golden_mean, or sft"
            ))),
        }
    }

    /// The observable family the scenario asks for, on `dim` coordinates.
    /// A frequency cutoff lowers the truncation level until it holds.
    pub fn build_family(&self, dim: usize) -> ObservableFamily {
        let spec = self.family.clone().unwrap_or_default();
        let mut level = spec.truncation_level;
        if let Some(cutoff) = spec.frequency_cutoff {
            while level > 1 {
                if ObservableFamily::trig(dim, level).max_total_frequency() as usize <= cutoff {
                    break;
                }
                level -= 1;
            }
        }
        ObservableFamily::trig(dim, level)
    }

    pub fn effective_seed(&self, override_seed: Option<u64>) -> u64 {
        override_seed
            .or_else(|| self.sampling.as_ref().map(|s| s.seed))
            .unwrap_or(0)
    }
}
