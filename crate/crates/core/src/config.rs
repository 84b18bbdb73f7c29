//! The TOML run configuration shared by every pipeline stage.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::community::RefinementConfig;
use crate::credibility::CredibilityConfig;
use crate::error::{Error, Result};
use crate::measures::Measure;
use crate::seed;

/// Input files. Relative paths are taken relative to the config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    pub followers: Option<PathBuf>,
    pub tweets: Option<PathBuf>,
    pub pages: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub resolver: Option<PathBuf>,
    /// Domain pattern file; the built-in patterns apply when absent.
    pub domains: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VizConfig {
    /// Measures to render when none are given on the command line.
    pub measures: Vec<String>,
    /// Inter-community edges must weigh strictly more than this.
    pub edge_floor: f64,
}

impl Default for VizConfig {
    fn default() -> Self {
        VizConfig {
            measures: vec![
                Measure::LowCredPct.name().to_string(),
                Measure::HighCredPct.name().to_string(),
            ],
            edge_floor: 0.0,
        }
    }
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub inputs: Inputs,
    #[serde(default)]
    pub refinement: RefinementConfig,
    #[serde(default)]
    pub credibility: CredibilityConfig,
    #[serde(default)]
    pub viz: VizConfig,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::input(format!("invalid config: {e}")))?;
        cfg.base_dir = base_dir.into();
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, base).map_err(|e| Error::input(format!("{}: {e}", path.display())))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.out_dir)
    }

    pub fn stage_dir(&self, stage: &str) -> PathBuf {
        self.out_dir().join(stage)
    }

    /// Check parameters and that every configured input exists.
    pub fn validate(&self) -> Result<()> {
        self.refinement.validate()?;
        if self.credibility.folds < 2 {
            return Err(Error::input("credibility.folds must be at least 2"));
        }
        if self.credibility.forest.n_trees == 0 {
            return Err(Error::input("credibility.forest.n_trees must be positive"));
        }
        if !self.viz.edge_floor.is_finite() {
            return Err(Error::input("viz.edge_floor must be finite"));
        }
        for m in &self.viz.measures {
            m.parse::<Measure>()?;
        }
        for (name, path) in self.input_list() {
            if let Some(p) = path {
                let full = self.resolve(p);
                if !full.is_file() {
                    return Err(Error::input(format!(
                        "input {name}: {} does not exist",
                        full.display()
                    )));
                }
            }
        }
        Ok(())
    }

    fn input_list(&self) -> [(&'static str, Option<&PathBuf>); 6] {
        let i = &self.inputs;
        [
            ("followers", i.followers.as_ref()),
            ("tweets", i.tweets.as_ref()),
            ("pages", i.pages.as_ref()),
            ("labels", i.labels.as_ref()),
            ("resolver", i.resolver.as_ref()),
            ("domains", i.domains.as_ref()),
        ]
    }

    /// The resolved path of a required input.
    pub fn require(&self, name: &str) -> Result<PathBuf> {
        self.input_list()
            .into_iter()
            .find(|(n, _)| *n == name)
            .and_then(|(_, p)| p)
            .map(|p| self.resolve(p))
            .ok_or_else(|| Error::input(format!("config has no inputs.{name}")))
    }

    pub fn optional(&self, name: &str) -> Option<PathBuf> {
        self.require(name).ok()
    }

    /// Refinement settings with the seed derived from the run seed.
    pub fn refinement(&self) -> RefinementConfig {
        RefinementConfig {
            seed: seed::derive(self.seed, "refinement"),
            ..self.refinement.clone()
        }
    }

    /// Classifier settings with the seed derived from the run seed.
    pub fn credibility(&self) -> CredibilityConfig {
        CredibilityConfig {
            seed: seed::derive(self.seed, "credibility"),
            ..self.credibility.clone()
        }
    }

    /// SHA-256 of the effective configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(&(self, self.refinement(), self.credibility()))
            .expect("config serialises");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::invariant(format!("config serialisation: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
seed = 5
out_dir = "results"

[inputs]
followers = "followers.csv"

[refinement]
max_size = 50
min_size = 5

[credibility]
folds = 5

[credibility.forest]
n_trees = 20

[viz]
measures = ["no_urls_pct"]
edge_floor = 0.5
"#;

    #[test]
    fn parses_and_resolves_relative_paths() {
        let cfg = RunConfig::from_toml(SAMPLE, "/data/run").unwrap();
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.out_dir(), PathBuf::from("/data/run/results"));
        assert_eq!(
            cfg.stage_dir("detect"),
            PathBuf::from("/data/run/results/detect")
        );
        assert_eq!(
            cfg.require("followers").unwrap(),
            PathBuf::from("/data/run/followers.csv")
        );
        assert!(cfg.require("labels").is_err());
        assert_eq!(cfg.refinement.max_size, 50);
        assert_eq!(cfg.refinement.max_rounds, 20);
        assert_eq!(cfg.credibility.forest.n_trees, 20);
        assert_eq!(cfg.credibility.svm.epochs, 300);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("sed = 1\n", ".").is_err());
        assert!(RunConfig::from_toml("[refinement]\nmaxsize = 3\n", ".").is_err());
    }

    #[test]
    fn missing_input_fails_validation() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::from_toml("[inputs]\nfollowers = \"nope.csv\"\n", dir.path()).unwrap();
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("nope.csv"));
    }

    #[test]
    fn unknown_viz_measure_fails_validation() {
        let cfg = RunConfig::from_toml("[viz]\nmeasures = [\"bogus\"]\n", ".").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn hash_tracks_the_seed() {
        let a = RunConfig::from_toml(SAMPLE, ".").unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 6;
        assert_ne!(a.hash(), b.hash());
        assert_ne!(a.refinement().seed, b.refinement().seed);
    }

    #[test]
    fn toml_round_trip() {
        let a = RunConfig::from_toml(SAMPLE, ".").unwrap();
        let b = RunConfig::from_toml(&a.to_toml().unwrap(), ".").unwrap();
        assert_eq!(a, b);
    }
}
