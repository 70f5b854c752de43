use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CampaignError;
use crate::eval::Similarity;
use crate::online::WoganConfig;
use crate::suts::{InputLayout, Objective, SutConfig};

/// Environment variable that replaces the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "WOGAN_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    #[default]
    Wogan,
    /// Uniform sampling of the input box, no training.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSettings {
    #[serde(default = "default_q_l")]
    pub q_l: f64,
    /// Defaults to path similarity for road systems, maxnorm otherwise.
    pub similarity: Option<Similarity>,
    /// Defaults to 0.95 for signal inputs, 0.9 otherwise.
    pub bound: Option<f64>,
}

impl Default for MetricSettings {
    fn default() -> Self {
        MetricSettings {
            q_l: default_q_l(),
            similarity: None,
            bound: None,
        }
    }
}

fn default_q_l() -> f64 {
    0.25
}

fn default_replicas() -> usize {
    1
}

fn default_sample_size() -> usize {
    300
}

/// One replicated experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    /// Size `M` of each final evaluation sample.
    #[serde(default = "default_sample_size")]
    pub sample_size: usize,
    pub output_dir: Option<PathBuf>,
    pub sut: SutConfig,
    /// Defaults to the system's own requirement.
    pub requirement: Option<String>,
    #[serde(default)]
    pub generator: GeneratorKind,
    #[serde(default)]
    pub wogan: WoganConfig,
    #[serde(default)]
    pub metrics: MetricSettings,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CampaignError> {
        toml::from_str(text).map_err(|e| CampaignError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CampaignError> {
        let text = std::fs::read_to_string(path).map_err(|e| CampaignError::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Fills every defaulted field and checks that all names resolve.
    /// `env_output` takes precedence over the configured directory.
    pub fn resolve(mut self, env_output: Option<PathBuf>) -> Result<Self, CampaignError> {
        let bad = |m: String| Err(CampaignError::Config(m));
        if self.replicas == 0 {
            return bad("replicas must be at least 1".into());
        }
        if self.sample_size == 0 {
            return bad("sample_size must be at least 1".into());
        }
        if !(self.metrics.q_l > 0.0 && self.metrics.q_l <= 0.5) {
            return bad(format!("metrics.q_l {} outside (0, 0.5]", self.metrics.q_l));
        }
        if self.generator == GeneratorKind::Wogan {
            self.wogan.validate()?;
        }
        let sut = self.sut.build()?;
        let requirement = self.requirement.take().unwrap_or_else(|| sut.default_requirement());
        let signal_inputs = matches!(sut.inputs(), InputLayout::Signals(_));
        let dim = sut.dim();
        Objective::new(sut, &requirement)?;
        self.requirement = Some(requirement);
        let similarity = *self.metrics.similarity.get_or_insert(match self.sut {
            SutConfig::Pathfollow { segments } => Similarity::Path { segments },
            _ => Similarity::Maxnorm,
        });
        similarity
            .eval(&vec![0.0; dim], &vec![0.0; dim])
            .map_err(|e| CampaignError::Config(format!("similarity does not fit the system: {e}")))?;
        self.metrics.bound.get_or_insert(if signal_inputs { 0.95 } else { 0.9 });
        if let Some(dir) = env_output {
            self.output_dir = Some(dir);
        }
        if self.output_dir.is_none() {
            self.output_dir = Some(PathBuf::from("runs").join(&self.name));
        }
        Ok(self)
    }

    pub fn objective(&self) -> Result<Objective, CampaignError> {
        let requirement = self
            .requirement
            .as_deref()
            .ok_or_else(|| CampaignError::Config("configuration not resolved".into()))?;
        Ok(Objective::new(self.sut.build()?, requirement)?)
    }

    pub fn similarity(&self) -> Similarity {
        self.metrics.similarity.unwrap_or(Similarity::Maxnorm)
    }

    pub fn bound(&self) -> f64 {
        self.metrics.bound.unwrap_or(0.9)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("runs").join(&self.name))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_resolves_defaults() {
        let c = ExperimentConfig::from_toml("name = \"osc\"\n[sut]\nname = \"oscillator\"\n")
            .unwrap()
            .resolve(None)
            .unwrap();
        assert_eq!((c.replicas, c.sample_size, c.seed), (1, 300, 0));
        assert_eq!(c.requirement.as_deref(), Some("always[0,30] (abs(x) < 2.8)"));
        assert_eq!((c.similarity(), c.bound()), (Similarity::Maxnorm, 0.95));
        assert_eq!(c.output_dir(), PathBuf::from("runs/osc"));
        assert_eq!(c.wogan, WoganConfig::default());
    }

    #[test]
    fn road_defaults_and_env_override() {
        let text = "name = \"road\"\noutput_dir = \"x\"\n[sut]\nname = \"pathfollow\"\nsegments = 7\n";
        let c = ExperimentConfig::from_toml(text).unwrap().resolve(Some("y".into())).unwrap();
        assert_eq!((c.similarity(), c.bound()), (Similarity::Path { segments: 7 }, 0.9));
        assert_eq!(c.output_dir(), PathBuf::from("y"));
    }

    #[test]
    fn nested_tables_parse() {
        let text = r#"
name = "abl"
replicas = 4
generator = "wogan"
[sut]
name = "multimodal"
[wogan]
budget = 120
[wogan.ablation]
random_analyzer = true
[wogan.train]
batch = 16
[metrics]
q_l = 0.1
similarity = { kind = "maxnorm" }
bound = 0.8
"#;
        let c = ExperimentConfig::from_toml(text).unwrap().resolve(None).unwrap();
        assert!(c.wogan.ablation.random_analyzer && !c.wogan.ablation.random_sampler);
        assert_eq!((c.wogan.budget, c.wogan.train.batch, c.replicas), (120, 16, 4));
        assert_eq!((c.metrics.q_l, c.bound()), (0.1, 0.8));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let base = "name = \"n\"\n";
        for tail in [
            "replicas = 0\n[sut]\nname = \"oscillator\"\n",
            "sample_size = 0\n[sut]\nname = \"oscillator\"\n",
            "[sut]\nname = \"submarine\"\n",
            "[sut]\nname = \"pathfollow\"\nsegments = 6\n",
            "requirement = \"always[0,1] (nope > 0)\"\n[sut]\nname = \"oscillator\"\n",
            "[sut]\nname = \"oscillator\"\n[wogan]\nrandom_budget = 0\n",
            "[sut]\nname = \"oscillator\"\n[metrics]\nsimilarity = { kind = \"path\", segments = 5 }\n",
            "colour = 1\n[sut]\nname = \"oscillator\"\n",
            "[sut]\nname = \"oscillator\"\ngenerator = \"random\"\n",
        ] {
            let r = ExperimentConfig::from_toml(&format!("{base}{tail}")).and_then(|c| c.resolve(None));
            assert!(r.is_err(), "{tail}");
        }
    }
}
