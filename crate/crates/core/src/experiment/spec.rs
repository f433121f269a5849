//! Experiment specification and scenario scaling.

use std::path::PathBuf;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::bo::BoConfig;
use crate::env::{ActionMode, EpisodeConfig};
use crate::error::{config_err, Result};
use crate::ppo::{CapsMode, TrainConfig};
use crate::sim::config::{config_hash, Scale};
use crate::sim::ScenarioConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub enum ExperimentKind {
    #[serde(rename = "nt")]
    Nt,
    #[serde(rename = "random")]
    Random,
    #[serde(rename = "bo")]
    Bo,
    #[serde(rename = "train-1d")]
    Train1d,
    #[serde(rename = "train-3d")]
    Train3d,
    #[serde(rename = "transfer")]
    Transfer,
    #[serde(rename = "sweep")]
    Sweep,
}

impl ExperimentKind {
    /// Stem used for output file names.
    pub fn file_stem(&self) -> &'static str {
        match self {
            Self::Nt => "nt",
            Self::Random => "random",
            Self::Bo => "bo",
            Self::Train1d | Self::Train3d => "train",
            Self::Transfer => "transfer",
            Self::Sweep => "sweep",
        }
    }
}

/// Hyperparameter grid; cells are the Cartesian product of the three lists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    pub batch_sizes: Vec<usize>,
    pub epochs: Vec<usize>,
    pub caps_modes: Vec<CapsMode>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self { batch_sizes: vec![960], epochs: vec![16], caps_modes: vec![CapsMode::None] }
    }
}

/// One sweep cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SweepCell {
    pub batch_size: usize,
    pub epochs: usize,
    pub caps_mode: CapsMode,
}

impl SweepCell {
    pub fn label(&self) -> String {
        format!("batch{}_epochs{}_{}", self.batch_size, self.epochs, self.caps_mode.as_str())
    }
}

impl SweepGrid {
    pub fn cells(&self) -> Vec<SweepCell> {
        let mut out = Vec::new();
        for &batch_size in &self.batch_sizes {
            for &epochs in &self.epochs {
                for &caps_mode in &self.caps_modes {
                    out.push(SweepCell { batch_size, epochs, caps_mode });
                }
            }
        }
        out
    }
}

/// Everything needed to reproduce one experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub scale: Scale,
    /// Full scenario; overrides `scale` when present.
    pub scenario: Option<ScenarioConfig>,
    /// Multiplier on the jam accumulation.
    pub capacity_mult: f64,
    /// Multiplier on the population.
    pub demand_mult: f64,
    pub seeds: Vec<u64>,
    pub episode: EpisodeConfig,
    /// PPO settings; defaults depend on the action dimension.
    pub train: Option<TrainConfig>,
    /// Overrides the smoothness penalty of `train`.
    pub caps_mode: Option<CapsMode>,
    /// Training iterations per run.
    pub iterations: usize,
    pub bo: BoConfig,
    /// Searched toll parameters for the optimizer: 1 (amplitude) or 3.
    pub bo_dims: usize,
    pub sweep: SweepGrid,
    /// Policy evaluated by `transfer`.
    pub checkpoint: Option<PathBuf>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::Nt,
            scale: Scale::Desk,
            scenario: None,
            capacity_mult: 1.0,
            demand_mult: 1.0,
            seeds: vec![1, 2, 3],
            episode: EpisodeConfig::default(),
            train: None,
            caps_mode: None,
            iterations: 40,
            bo: BoConfig::default(),
            bo_dims: 1,
            sweep: SweepGrid::default(),
            checkpoint: None,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(config_err("seeds must not be empty"));
        }
        if !(self.capacity_mult > 0.0 && self.capacity_mult.is_finite()) || !(self.demand_mult > 0.0 && self.demand_mult.is_finite()) {
            return Err(config_err("capacity and demand multipliers must be positive"));
        }
        if self.bo_dims != 1 && self.bo_dims != 3 {
            return Err(config_err("bo_dims must be 1 or 3"));
        }
        if self.kind == ExperimentKind::Sweep && self.sweep.cells().is_empty() {
            return Err(config_err("sweep grid is empty"));
        }
        if self.kind == ExperimentKind::Transfer && self.checkpoint.is_none() {
            return Err(config_err("transfer needs a checkpoint"));
        }
        self.episode().validate()?;
        self.train_config().validate()?;
        self.scenario()?.validate()
    }

    pub fn base_scenario(&self) -> ScenarioConfig {
        self.scenario.clone().unwrap_or_else(|| ScenarioConfig::for_scale(self.scale))
    }

    /// Scenario after capacity and demand scaling.
    pub fn scenario(&self) -> Result<ScenarioConfig> {
        build_scenario(&self.base_scenario(), self.capacity_mult, self.demand_mult)
    }

    /// Episode settings with the action dimension implied by the kind.
    pub fn episode(&self) -> EpisodeConfig {
        let mut ep = self.episode.clone();
        match self.kind {
            ExperimentKind::Train1d => ep.action_mode = ActionMode::OneD,
            ExperimentKind::Train3d => ep.action_mode = ActionMode::ThreeD,
            _ => {}
        }
        ep
    }

    pub fn train_config(&self) -> TrainConfig {
        let mut cfg = self.train.clone().unwrap_or_else(|| match self.episode().action_mode {
            ActionMode::OneD => TrainConfig::one_d(),
            ActionMode::ThreeD => TrainConfig::three_d(),
        });
        if let Some(caps) = self.caps_mode {
            cfg.caps_mode = caps;
        }
        cfg
    }

    pub fn hash(&self) -> String {
        config_hash(self)
    }

    pub fn json_schema() -> serde_json::Value {
        serde_json::to_value(schemars::schema_for!(ExperimentSpec)).expect("schema serializes")
    }
}

/// Scales the jam accumulation by `capacity_mult` and the population by `demand_mult`.
pub fn build_scenario(base: &ScenarioConfig, capacity_mult: f64, demand_mult: f64) -> Result<ScenarioConfig> {
    if !(capacity_mult > 0.0 && capacity_mult.is_finite() && demand_mult > 0.0 && demand_mult.is_finite()) {
        return Err(config_err("capacity and demand multipliers must be positive"));
    }
    let mut out = base.clone();
    out.jam_accumulation = base.jam_accumulation * capacity_mult;
    out.population = (base.population as f64 * demand_mult).round() as usize;
    out.validate()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaling_examples() {
        let base = ScenarioConfig::paper();
        assert_eq!(build_scenario(&base, 1.0, 1.0).unwrap(), base);
        assert!((build_scenario(&base, 0.9, 1.0).unwrap().jam_accumulation - 6300.0).abs() < 1e-9);
        assert_eq!(build_scenario(&base, 1.0, 1.1).unwrap().population, 8250);
        assert!(build_scenario(&base, 0.0, 1.0).is_err());
        assert!(build_scenario(&base, 1.0, -1.0).is_err());
    }

    #[test]
    fn scaling_touches_only_capacity_and_population() {
        let base = ScenarioConfig::desk();
        let mut scaled = build_scenario(&base, 1.1, 0.9).unwrap();
        assert_eq!(scaled.population, 675);
        scaled.population = base.population;
        scaled.jam_accumulation = base.jam_accumulation;
        assert_eq!(scaled, base);
    }

    #[test]
    fn kind_spellings() {
        let k: ExperimentKind = serde_json::from_str("\"train-3d\"").unwrap();
        assert_eq!(k, ExperimentKind::Train3d);
        assert_eq!(serde_json::to_string(&ExperimentKind::Nt).unwrap(), "\"nt\"");
    }

    #[test]
    fn defaults_validate_and_spec_roundtrips() {
        let spec = ExperimentSpec::default();
        spec.validate().unwrap();
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<ExperimentSpec>(&text).unwrap(), spec);
        let partial: ExperimentSpec = serde_json::from_str(r#"{"kind": "bo", "seeds": [7]}"#).unwrap();
        assert_eq!(partial.seeds, vec![7]);
        assert!(serde_json::from_str::<ExperimentSpec>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(ExperimentSpec { seeds: vec![], ..Default::default() }.validate().is_err());
        assert!(ExperimentSpec { kind: ExperimentKind::Transfer, ..Default::default() }.validate().is_err());
        let empty = SweepGrid { batch_sizes: vec![], ..Default::default() };
        assert!(ExperimentSpec { kind: ExperimentKind::Sweep, sweep: empty, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn train_kind_sets_action_mode_and_caps_override() {
        let spec = ExperimentSpec { kind: ExperimentKind::Train3d, caps_mode: Some(CapsMode::TL1), ..Default::default() };
        assert_eq!(spec.episode().action_mode, ActionMode::ThreeD);
        let cfg = spec.train_config();
        assert_eq!(cfg.batch_size, 960);
        assert_eq!(cfg.caps_mode, CapsMode::TL1);
    }

    #[test]
    fn grid_cells_are_product() {
        let g = SweepGrid { batch_sizes: vec![480, 960, 1920], epochs: vec![16], caps_modes: vec![CapsMode::None] };
        assert_eq!(g.cells().len(), 3);
        let g = SweepGrid { batch_sizes: vec![480], epochs: vec![16], caps_modes: CapsMode::ALL.to_vec() };
        assert_eq!(g.cells().len(), 5);
        assert_eq!(g.cells()[1].label(), "batch480_epochs16_t_l1");
    }
}
