//! JSON run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::integrator::IntegratorOptions;
use crate::model::RodParams;
use crate::poincare::{LevelSetTargets, OrbitSystem, SectionSpec};
use crate::reduction::{CanonicalState, CasimirTriple};
use crate::state::{FieldState, HierarchyLevel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    Reduce,
    Poincare,
    LaxCheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Reduce => "reduce",
            Command::Poincare => "poincare",
            Command::LaxCheck => "lax-check",
        }
    }
}

/// Exactly one of the two representations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialState {
    /// Packed body components `(m, n, B, D)` truncated at the level.
    Body(Vec<f64>),
    Canonical {
        state: CanonicalState,
        casimirs: CasimirTriple,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub max_step: Option<f64>,
    #[serde(default)]
    pub max_steps: Option<usize>,
    /// Casimir projection after each step; off by default.
    #[serde(default)]
    pub project: bool,
}

fn default_tol() -> f64 {
    1e-11
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            tol: default_tol(),
            max_step: None,
            max_steps: None,
            project: false,
        }
    }
}

impl IntegratorConfig {
    pub fn options(&self) -> IntegratorOptions {
        let mut opts = IntegratorOptions::with_tol(self.tol);
        if let Some(h) = self.max_step {
            opts.max_step = h;
        }
        if let Some(n) = self.max_steps {
            opts.max_steps = n;
        }
        opts.project = self.project;
        opts
    }
}

/// Targets and seeding of a Poincaré scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelSetConfig {
    pub hamiltonian: f64,
    pub integral: f64,
    pub casimirs: CasimirTriple,
    pub p_phi: f64,
    pub n_seeds: usize,
    #[serde(default = "default_system")]
    pub system: OrbitSystem,
    /// Figure-caption parameter with no role in the equations; accepted and ignored.
    #[serde(default)]
    pub lambda: Option<f64>,
}

fn default_system() -> OrbitSystem {
    OrbitSystem::Body
}

impl LevelSetConfig {
    pub fn targets(&self, params: RodParams) -> LevelSetTargets {
        LevelSetTargets {
            hamiltonian: self.hamiltonian,
            integral: self.integral,
            casimirs: self.casimirs,
            p_phi: self.p_phi,
            params,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    #[serde(default = "default_prefix")]
    pub prefix: String,
}

fn default_prefix() -> String {
    "run".to_string()
}

impl OutputConfig {
    pub fn path(&self, suffix: &str) -> PathBuf {
        self.dir.join(format!("{}_{}", self.prefix, suffix))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub command: Option<Command>,
    #[serde(default)]
    pub level: Option<HierarchyLevel>,
    pub params: RodParams,
    #[serde(default)]
    pub initial: Option<InitialState>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub span: Option<[f64; 2]>,
    #[serde(default)]
    pub section: Option<SectionSpec>,
    #[serde(default)]
    pub level_set: Option<LevelSetConfig>,
    pub output: OutputConfig,
    #[serde(default)]
    pub rng_seed: u64,
}

/// A rejected configuration, located by its JSON field path.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("config error at `{path}`: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::new(if path.is_empty() { ".".to_string() } else { path }, e.into_inner().to_string())
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::new(".", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Checks the fields `command` needs.
    pub fn validate_for(&self, command: Command) -> Result<(), ConfigError> {
        if let Some(c) = self.command {
            if c != command {
                return Err(ConfigError::new(
                    "command",
                    format!("config is for `{}` but `{}` was run", c.name(), command.name()),
                ));
            }
        }
        self.integrator
            .options()
            .validate()
            .map_err(|e| ConfigError::new("integrator.tol", e.to_string()))?;
        if let Some(h) = self.integrator.max_step {
            if !(h > 0.0) {
                return Err(ConfigError::new("integrator.max_step", "must be positive"));
            }
        }
        match command {
            Command::Simulate => {
                self.span()?;
                self.body_state()?;
            }
            Command::Reduce => {
                self.span()?;
                self.require_isotropic()?;
                match self.initial {
                    Some(InitialState::Canonical { .. }) => {}
                    _ => {
                        if self.body_state()?.level() != HierarchyLevel::Magnetic {
                            return Err(ConfigError::new("initial.body", "reduction needs a level-2 state (9 components)"));
                        }
                    }
                }
            }
            Command::Poincare => {
                self.require_isotropic()?;
                let section = self.section.ok_or_else(|| ConfigError::new("section", "missing field"))?;
                section
                    .validate()
                    .map_err(|e| ConfigError::new("section", e.to_string()))?;
                let ls = self.level_set.ok_or_else(|| ConfigError::new("level_set", "missing field"))?;
                if ls.n_seeds == 0 {
                    return Err(ConfigError::new("level_set.n_seeds", "must be at least 1"));
                }
                if !(ls.casimirs.c3 > 0.0) {
                    return Err(ConfigError::new("level_set.casimirs.c3", "must be positive"));
                }
            }
            Command::LaxCheck => {
                self.span()?;
                self.require_isotropic()?;
                self.body_state()?;
            }
        }
        self.check_output_dir()
    }

    fn require_isotropic(&self) -> Result<(), ConfigError> {
        if self.params.is_isotropic() {
            Ok(())
        } else {
            Err(ConfigError::new("params", "this command needs k1 = k2"))
        }
    }

    pub fn span(&self) -> Result<(f64, f64), ConfigError> {
        let [a, b] = self.span.ok_or_else(|| ConfigError::new("span", "missing field"))?;
        if !(a.is_finite() && b.is_finite()) || a == b {
            return Err(ConfigError::new("span", "needs two distinct finite numbers"));
        }
        Ok((a, b))
    }

    /// The initial state in body components, converting a canonical one.
    pub fn body_state(&self) -> Result<FieldState, ConfigError> {
        match &self.initial {
            None => Err(ConfigError::new("initial", "missing field")),
            Some(InitialState::Body(data)) => {
                let level = match self.level {
                    Some(level) => level,
                    None => HierarchyLevel::ALL
                        .into_iter()
                        .find(|l| l.dim() == data.len())
                        .ok_or_else(|| ConfigError::new("initial.body", format!("{} components match no level", data.len())))?,
                };
                let state = FieldState::from_slice(level, data).map_err(|e| ConfigError::new("initial.body", e.to_string()))?;
                if !state.is_finite() {
                    return Err(ConfigError::new("initial.body", "non-finite component"));
                }
                Ok(state)
            }
            Some(InitialState::Canonical { state, casimirs }) => {
                if let Some(level) = self.level {
                    if level != HierarchyLevel::Magnetic {
                        return Err(ConfigError::new("level", "canonical initial states are level 2"));
                    }
                }
                crate::reduction::from_canonical(state, casimirs).map_err(|e| ConfigError::new("initial.canonical", e.to_string()))
            }
        }
    }

    fn check_output_dir(&self) -> Result<(), ConfigError> {
        let dir = &self.output.dir;
        std::fs::create_dir_all(dir).map_err(|e| ConfigError::new("output.dir", format!("{}: {e}", dir.display())))?;
        let probe = dir.join(format!(".{}_probe", self.output.prefix));
        std::fs::write(&probe, b"").map_err(|e| ConfigError::new("output.dir", format!("{} not writable: {e}", dir.display())))?;
        let _ = std::fs::remove_file(probe);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "params": {"k1": 1.0, "k2": 1.0, "k3": 0.75},
        "initial": {"body": [0.1, 0.2, 0.3]},
        "span": [0.0, 1.0],
        "output": {"dir": "/tmp"}
    }"#;

    #[test]
    fn parses_minimal_config() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.integrator.tol, 1e-11);
        assert_eq!(c.output.prefix, "run");
        assert_eq!(c.body_state().unwrap().level(), HierarchyLevel::ForceFree);
    }

    #[test]
    fn bad_field_reports_path() {
        let text = MINIMAL.replace(r#""k2": 1.0"#, r#""k2": -1.0"#);
        let e = RunConfig::from_json(&text).unwrap_err();
        assert_eq!(e.path, "params");
        let text = MINIMAL.replace(r#""span": [0.0, 1.0]"#, r#""span": [0.0, "x"]"#);
        assert_eq!(RunConfig::from_json(&text).unwrap_err().path, "span[1]");
        let text = MINIMAL.replace(r#""output": {"dir": "/tmp"}"#, r#""output": {"dir": "/tmp", "colour": 1}"#);
        assert_eq!(RunConfig::from_json(&text).unwrap_err().path, "output.colour");
    }

    #[test]
    fn both_initial_representations_rejected() {
        let text = MINIMAL.replace(
            r#""initial": {"body": [0.1, 0.2, 0.3]}"#,
            r#""initial": {"body": [0.1, 0.2, 0.3], "canonical": {}}"#,
        );
        assert!(RunConfig::from_json(&text).is_err());
    }

    #[test]
    fn command_mismatch_is_a_config_error() {
        let text = MINIMAL.replace(r#""span""#, r#""command": "poincare", "span""#);
        let c = RunConfig::from_json(&text).unwrap();
        assert_eq!(c.validate_for(Command::Simulate).unwrap_err().path, "command");
    }

    #[test]
    fn wrong_component_count() {
        let text = MINIMAL.replace("[0.1, 0.2, 0.3]", "[0.1, 0.2]");
        let c = RunConfig::from_json(&text).unwrap();
        assert_eq!(c.body_state().unwrap_err().path, "initial.body");
    }
}
