//! Experiment configuration: one TOML file with the sections `arena`,
//! `materials`, `ppo`, `nonstationarity` and `run`.
//!
//! Every field has a default, so an empty file is the default experiment.
//! Module materials name entries of `materials`; the names `tpu` and
//! `silicone` resolve to the built-in profiles unless the catalog redefines
//! them.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use softbar_core::arena::{
    ArenaConfig, KnobSpec, ModuleMount, DEFAULT_FIRST_AZIMUTH, DEFAULT_HOME_TIP, DEFAULT_MOUNT_RADIUS,
};
use softbar_core::compliance::MaterialProfile;
use softbar_core::geometry::FiveBarGeometry;
use softbar_core::ledger::SECONDS_PER_PRIMITIVE;
use softbar_core::nonstationarity::Schedule;
use softbar_rl::PpoConfig;

use crate::error::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub arena: ArenaSection,
    pub materials: BTreeMap<String, MaterialSection>,
    pub ppo: PpoConfig,
    pub nonstationarity: Vec<Schedule>,
    pub run: RunSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let materials = ["tpu", "silicone"]
            .into_iter()
            .map(|n| {
                let m = MaterialProfile::builtin(n).expect("built-in");
                (n.to_string(), MaterialSection::from(&m))
            })
            .collect();
        Self {
            arena: ArenaSection::default(),
            materials,
            ppo: PpoConfig::default(),
            nonstationarity: Vec::new(),
            run: RunSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArenaSection {
    pub modules: Vec<ModuleSection>,
    pub knob: KnobSpec,
    pub max_episode_steps: u32,
    pub success_threshold: f64,
    pub coarse_threshold: f64,
    pub contact_penalty_stiffness: f64,
    pub tip_step_size: f64,
    pub substeps: usize,
    pub angular_resolution: f64,
}

impl Default for ArenaSection {
    fn default() -> Self {
        let a = ArenaConfig::default();
        Self {
            modules: vec![ModuleSection::default(); a.n_modules()],
            knob: a.knob,
            max_episode_steps: a.max_episode_steps,
            success_threshold: a.success_threshold,
            coarse_threshold: a.coarse_threshold,
            contact_penalty_stiffness: a.contact_penalty_stiffness,
            tip_step_size: a.tip_step_size,
            substeps: a.substeps,
            angular_resolution: a.angular_resolution,
        }
    }
}

/// One module. Omitted placement puts module `i` of `n` on the default
/// circle at equal spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModuleSection {
    pub material: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mount_position: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mount_orientation: Option<f64>,
    pub geometry: FiveBarGeometry,
    pub home_tip: [f64; 2],
}

impl Default for ModuleSection {
    fn default() -> Self {
        Self {
            material: "tpu".into(),
            mount_position: None,
            mount_orientation: None,
            geometry: FiveBarGeometry::default(),
            home_tip: DEFAULT_HOME_TIP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSection {
    pub hinge_stiffness: [f64; 3],
    pub link_axial_stiffness: f64,
    pub creep_rate: f64,
    pub transition_noise: f64,
}

impl From<&MaterialProfile> for MaterialSection {
    fn from(m: &MaterialProfile) -> Self {
        Self {
            hinge_stiffness: m.hinge_stiffness,
            link_axial_stiffness: m.link_axial_stiffness,
            creep_rate: m.creep_rate,
            transition_noise: m.transition_noise,
        }
    }
}

impl MaterialSection {
    pub fn profile(&self, name: &str) -> MaterialProfile {
        MaterialProfile {
            name: name.to_string(),
            hinge_stiffness: self.hinge_stiffness,
            link_axial_stiffness: self.link_axial_stiffness,
            creep_rate: self.creep_rate,
            transition_noise: self.transition_noise,
        }
    }
}

/// A scripted breakdown during `longrun`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedFailure {
    pub step: u64,
    pub description: String,
    #[serde(default)]
    pub downtime_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub total_steps: u64,
    /// Overrides `ppo.seed`.
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Total cooldown of the segment protocol in primitive-equivalents
    /// (5 s each), split equally over the segment boundaries.
    pub cooldown_steps: u64,
    /// Step counts of the long-run protocol segments.
    pub segments: Vec<u64>,
    /// Evaluation episodes per transfer cell.
    pub trials: usize,
    /// Episodes written by `rollout`.
    pub episodes: usize,
    pub failures: Vec<ScriptedFailure>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            total_steps: 65_536,
            seed: 0,
            output_dir: PathBuf::from("runs"),
            cooldown_steps: 1_440,
            segments: vec![16_384, 32_768, 65_536, 10_714],
            trials: 10,
            episodes: 1,
            failures: Vec::new(),
        }
    }
}

impl RunSection {
    pub fn cooldown_seconds(&self) -> f64 {
        self.cooldown_steps as f64 * SECONDS_PER_PRIMITIVE
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let config: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String, HarnessError> {
        toml::to_string(self).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Catalog entry or built-in profile called `name`.
    pub fn material(&self, name: &str) -> Result<MaterialProfile, HarnessError> {
        self.materials
            .get(name)
            .map(|m| m.profile(name))
            .or_else(|| MaterialProfile::builtin(name))
            .ok_or_else(|| HarnessError::Config(format!("unknown material `{name}`")))
    }

    /// Arena with every module made of its configured material.
    pub fn arena(&self) -> Result<ArenaConfig, HarnessError> {
        let a = &self.arena;
        let n = a.modules.len();
        let modules = a
            .modules
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let azimuth = DEFAULT_FIRST_AZIMUTH + 2.0 * PI * i as f64 / n as f64;
                let mut mount = ModuleMount::facing_center(azimuth, DEFAULT_MOUNT_RADIUS, self.material(&m.material)?);
                if let Some(p) = m.mount_position {
                    mount.mount_position = p;
                }
                if let Some(o) = m.mount_orientation {
                    mount.mount_orientation = o;
                }
                mount.geometry = m.geometry.clone();
                mount.home_tip = m.home_tip;
                Ok(mount)
            })
            .collect::<Result<Vec<_>, HarnessError>>()?;
        Ok(ArenaConfig {
            modules,
            knob: a.knob.clone(),
            max_episode_steps: a.max_episode_steps,
            success_threshold: a.success_threshold,
            coarse_threshold: a.coarse_threshold,
            contact_penalty_stiffness: a.contact_penalty_stiffness,
            tip_step_size: a.tip_step_size,
            substeps: a.substeps,
            angular_resolution: a.angular_resolution,
        })
    }

    /// Arena with every module made of `material`.
    pub fn arena_with_material(&self, material: &str) -> Result<ArenaConfig, HarnessError> {
        let mut arena = self.arena()?;
        arena.set_material(&self.material(material)?);
        Ok(arena)
    }

    /// PPO settings with the run seed applied.
    pub fn ppo(&self) -> PpoConfig {
        PpoConfig {
            seed: self.run.seed,
            ..self.ppo.clone()
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        for (name, m) in &self.materials {
            m.profile(name)
                .validate()
                .map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        let arena = self.arena()?;
        arena.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.ppo.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        for s in &self.nonstationarity {
            s.validate(&arena).map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        let r = &self.run;
        if r.total_steps < self.ppo.rollout_horizon as u64 {
            return Err(HarnessError::Config(format!(
                "run.total_steps {} is below ppo.rollout_horizon {}",
                r.total_steps, self.ppo.rollout_horizon
            )));
        }
        if r.segments.is_empty() || r.segments.contains(&0) {
            return Err(HarnessError::Config(
                "run.segments must be non-empty and positive".into(),
            ));
        }
        if r.trials == 0 || r.episodes == 0 {
            return Err(HarnessError::Config(
                "run.trials and run.episodes must be positive".into(),
            ));
        }
        if r.failures.iter().any(|f| !(f.downtime_seconds >= 0.0)) {
            return Err(HarnessError::Config("failure downtime must be non-negative".into()));
        }
        Ok(())
    }
}
