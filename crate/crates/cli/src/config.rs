use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ggsp_core::explorer::{Algorithm, KeyMode, StrategyKind};
use ggsp_core::graph_model::ScaleMode;
use ggsp_core::oracle::{GuidingSpec, OracleKey};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub graph: GraphSection,
    pub expander: ExpanderSection,
    pub oracle: OracleSection,
    pub guiding: GuidingSpec,
    pub explore: ExploreSection,
    pub ggsp: GgspSection,
    pub output: OutputSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "default".into(),
            seed: 0,
            graph: GraphSection::default(),
            expander: ExpanderSection::default(),
            oracle: OracleSection::default(),
            guiding: GuidingSpec::ExactGroundState,
            explore: ExploreSection::default(),
            ggsp: GgspSection::default(),
            output: OutputSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphSection {
    pub mode: ScaleMode,
    /// Paper mode only.
    pub n: Option<u64>,
    pub degrees: Vec<u64>,
    pub depths: Vec<u64>,
    /// Tree type explored by `explore-tree`; defaults to the top type.
    pub level: Option<usize>,
    pub girth_floor: u64,
}

impl Default for GraphSection {
    fn default() -> Self {
        Self {
            mode: ScaleMode::Scaled,
            n: None,
            degrees: vec![4, 3],
            depths: vec![1, 2],
            level: None,
            girth_floor: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpanderSource {
    Generate,
    Load,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpanderSection {
    pub source: ExpanderSource,
    pub size: u64,
    pub path: Option<PathBuf>,
    pub gap_min: f64,
    pub girth_min: u32,
    pub max_attempts: u64,
}

impl Default for ExpanderSection {
    fn default() -> Self {
        Self {
            source: ExpanderSource::Generate,
            size: 100,
            path: None,
            gap_min: 0.1,
            girth_min: 3,
            max_attempts: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    pub padding_ratio: f64,
    pub label_bits: Option<u32>,
    pub key: Option<OracleKey>,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            padding_ratio: 0.5,
            label_bits: None,
            key: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExploreSection {
    /// Strategy names, or `["all"]` for every built-in one.
    pub strategies: Vec<String>,
    pub budgets: Vec<u64>,
    pub trials: u64,
}

impl Default for ExploreSection {
    fn default() -> Self {
        Self {
            strategies: vec!["all".into()],
            budgets: vec![8],
            trials: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GgspSection {
    /// `echo`, `cheat` or `explore`.
    pub algorithm: String,
    pub strategy: String,
    /// Queries an `explore` run makes before answering.
    pub walk: u64,
    /// Number of guiding inputs (`t`).
    pub inputs: usize,
    pub threshold: u64,
    pub budget: u64,
    pub trials: u64,
    pub key_mode: KeyMode,
}

impl Default for GgspSection {
    fn default() -> Self {
        Self {
            algorithm: "echo".into(),
            strategy: "greedy_unvisited".into(),
            walk: 16,
            inputs: 1,
            threshold: 3,
            budget: 64,
            trials: 1000,
            key_mode: KeyMode::PerTrial,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("results"),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub budget: Option<u64>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => Self::default(),
        };
        if let Some(seed) = overrides.seed {
            config.seed = seed;
        }
        if let Some(trials) = overrides.trials {
            config.explore.trials = trials;
            config.ggsp.trials = trials;
        }
        if let Some(budget) = overrides.budget {
            config.explore.budgets = vec![budget];
            config.ggsp.budget = budget;
        }
        if let Some(out) = &overrides.out {
            config.output.dir = out.clone();
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.graph.mode == ScaleMode::Paper && self.graph.n.is_none() {
            bail!("graph.mode = \"paper\" needs graph.n");
        }
        if self.expander.source == ExpanderSource::Load && self.expander.path.is_none() {
            bail!("expander.source = \"load\" needs expander.path");
        }
        if self.explore.budgets.is_empty() {
            bail!("explore.budgets is empty");
        }
        self.strategies()?;
        self.algorithm()?;
        self.guiding.validate()?;
        Ok(())
    }

    pub fn strategies(&self) -> Result<Vec<StrategyKind>> {
        if self.explore.strategies.iter().any(|s| s == "all") {
            return Ok(StrategyKind::builtin());
        }
        Ok(self
            .explore
            .strategies
            .iter()
            .map(|s| StrategyKind::parse(s))
            .collect::<ggsp_core::Result<_>>()?)
    }

    pub fn algorithm(&self) -> Result<Algorithm> {
        Ok(match self.ggsp.algorithm.as_str() {
            "echo" => Algorithm::EchoFirstInput,
            "cheat" => Algorithm::ExactSamplerCheat,
            "explore" => Algorithm::Explore {
                strategy: StrategyKind::parse(&self.ggsp.strategy)?,
                walk: self.ggsp.walk,
            },
            other => bail!("unknown ggsp.algorithm {other:?} (expected echo, cheat or explore)"),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the resolved TOML, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolved_config_round_trips() {
        let c = ExperimentConfig::default();
        let back: ExperimentConfig = toml::from_str(&c.to_toml()).unwrap();
        assert_eq!(c, back);
        assert_eq!(c.hash(), back.hash());
    }

    #[test]
    fn overrides_win() {
        let o = Overrides {
            seed: Some(9),
            trials: Some(5),
            budget: Some(12),
            out: Some("x".into()),
        };
        let c = ExperimentConfig::load(None, &o).unwrap();
        assert_eq!((c.seed, c.explore.trials, c.ggsp.budget), (9, 5, 12));
        assert_eq!(c.explore.budgets, vec![12]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<ExperimentConfig>("sead = 3").is_err());
    }

    #[test]
    fn guiding_table_parses() {
        let c: ExperimentConfig = toml::from_str("[guiding]\nkind = \"mixture\"\nground_weight = 0.25\n").unwrap();
        assert_eq!(c.guiding, GuidingSpec::Mixture { ground_weight: 0.25 });
    }
}
