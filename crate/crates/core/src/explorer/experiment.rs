use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{component_audit, run_exploration, EventStats, RunOptions, StrategyKind};
use crate::error::{Error, Result};
use crate::graph_model::{MainGraph, StandaloneTree};
use crate::oracle::{InputSampler, LabeledOracle, OracleKey};

/// Version tag written into every JSONL record.
pub const SCHEMA_VERSION: u32 = 1;

/// Per-trial stream: trial `i` under master `seed` always sees the same key and randomness.
fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExitTrial {
    pub schema: u32,
    pub trial: u64,
    pub seed: u64,
    pub strategy: String,
    pub budget: u64,
    pub queries: u64,
    pub exited: bool,
    /// Distinct level-1 decorations with a queried leaf.
    pub level1_leaves: usize,
    pub fresh_probes: u64,
    pub audit_passed: bool,
}

/// One exploration of a freshly keyed oracle over `tree`, stopping at the first exit.
pub fn exit_trial(
    tree: &Arc<StandaloneTree>,
    strategy: &StrategyKind,
    budget: u64,
    padding_ratio: f64,
    seed: u64,
    trial: u64,
) -> Result<ExitTrial> {
    let mut rng = trial_rng(seed, trial);
    let oracle = LabeledOracle::new(tree.clone(), OracleKey(rng.gen()), padding_ratio, None)?;
    let root = oracle.label_of(&tree.root())?;
    let options = RunOptions {
        budget,
        stop_on_exit: true,
    };
    let transcript = run_exploration(&oracle, &[root], strategy.build().as_mut(), options, &mut rng)?;
    let audit = component_audit(&transcript);
    Ok(ExitTrial {
        schema: SCHEMA_VERSION,
        trial,
        seed,
        strategy: strategy.name().to_string(),
        budget,
        queries: transcript.query_count(),
        exited: transcript.exited(),
        level1_leaves: transcript.distinct_leaves(1),
        fresh_probes: audit.fresh_probes,
        audit_passed: audit.passed(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitEstimate {
    pub strategy: String,
    pub budget: u64,
    /// Reached a leaf at the bottom of the tree's core.
    pub exit: EventStats,
    /// Exited while touching leaves of fewer than one level-1 decoration.
    pub exit_below_one: EventStats,
    /// Exited while touching leaves of fewer than two level-1 decorations.
    pub exit_below_two: EventStats,
    pub mean_queries: f64,
    pub audit_failures: u64,
}

impl ExitEstimate {
    pub fn summarize(strategy: &StrategyKind, budget: u64, trials: &[ExitTrial]) -> Self {
        let n = trials.len() as u64;
        let count = |f: &dyn Fn(&ExitTrial) -> bool| trials.iter().filter(|t| f(t)).count() as u64;
        Self {
            strategy: strategy.name().to_string(),
            budget,
            exit: EventStats::from_counts(count(&|t| t.exited), n),
            exit_below_one: EventStats::from_counts(count(&|t| t.exited && t.level1_leaves < 1), n),
            exit_below_two: EventStats::from_counts(count(&|t| t.exited && t.level1_leaves < 2), n),
            mean_queries: trials.iter().map(|t| t.queries as f64).sum::<f64>() / n.max(1) as f64,
            audit_failures: count(&|t| !t.audit_passed),
        }
    }
}

/// Monte Carlo estimate of the exit probability, trials spread over the rayon pool.
pub fn estimate_exit_probability(
    tree: &Arc<StandaloneTree>,
    strategy: &StrategyKind,
    budget: u64,
    trials: u64,
    padding_ratio: f64,
    seed: u64,
) -> Result<ExitEstimate> {
    let results = (0..trials)
        .into_par_iter()
        .map(|i| exit_trial(tree, strategy, budget, padding_ratio, seed, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExitEstimate::summarize(strategy, budget, &results))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalizationScore {
    /// `None` when the output or every input is isolated.
    pub distance: Option<u64>,
    /// `distance >= threshold`: the output landed away from every input.
    pub far: bool,
}

/// Trusted check of how far `output` lies from the inputs in `dist_E`.
/// An isolated output is never far.
pub fn score_localization(
    oracle: &LabeledOracle<MainGraph>,
    inputs: &[u64],
    output: u64,
    threshold: u64,
) -> Result<LocalizationScore> {
    let graph = oracle.topology();
    let out = oracle.reveal(output)?;
    if out.is_isolated() {
        return Ok(LocalizationScore {
            distance: None,
            far: false,
        });
    }
    let roots = inputs.iter().map(|&l| oracle.reveal(l)).collect::<Result<Vec<_>>>()?;
    let distance = graph.dist_e_to_set(&roots, &out)?;
    Ok(LocalizationScore {
        distance,
        far: distance.is_some_and(|d| d >= threshold),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Algorithm {
    EchoFirstInput,
    /// Samples the exact ground state directly; a trusted reference.
    ExactSamplerCheat,
    /// Explores from the first input for `walk` queries, outputs the last
    /// connected vertex queried.
    Explore { strategy: StrategyKind, walk: u64 },
}

impl Algorithm {
    pub fn name(&self) -> String {
        match self {
            Algorithm::EchoFirstInput => "echo_first_input".into(),
            Algorithm::ExactSamplerCheat => "exact_sampler_cheat".into(),
            Algorithm::Explore { strategy, walk } => format!("explore_{}_{walk}", strategy.name()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyMode {
    Fixed,
    PerTrial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GgspConfig {
    pub trials: u64,
    /// Number of guiding inputs per trial.
    pub inputs: usize,
    pub threshold: u64,
    /// Query limit per trial.
    pub budget: u64,
    pub seed: u64,
    pub key_mode: KeyMode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GgspRecord {
    pub schema: u32,
    pub trial: u64,
    pub seed: u64,
    pub algorithm: String,
    pub key: OracleKey,
    pub inputs: Vec<u64>,
    pub output: Option<u64>,
    pub queries: u64,
    pub distance: Option<u64>,
    pub far: bool,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GgspReport {
    pub algorithm: String,
    /// Fraction of trials whose output was far from its inputs.
    pub far: EventStats,
    pub records: Vec<GgspRecord>,
}

/// One trial of the guided localization game.
pub fn ggsp_trial(
    base: &LabeledOracle<MainGraph>,
    sampler: &InputSampler,
    algorithm: &Algorithm,
    config: &GgspConfig,
    trial: u64,
) -> Result<GgspRecord> {
    let mut rng = trial_rng(config.seed, trial);
    let drawn = OracleKey(rng.gen());
    let oracle = match config.key_mode {
        KeyMode::Fixed => base.rekeyed(base.key()),
        KeyMode::PerTrial => base.rekeyed(drawn),
    };
    let inputs = sampler.sample_labels(&oracle, &mut rng, config.inputs)?;
    let first = *inputs
        .first()
        .ok_or_else(|| Error::InvalidParams("at least one input is required".into()))?;
    let mut failure = None;
    let (output, queries) = match algorithm {
        Algorithm::EchoFirstInput => (Some(first), 0),
        Algorithm::ExactSamplerCheat => {
            let v = sampler.ground().sample_vertex(&mut rng)?;
            (Some(oracle.label_of(&v)?), 0)
        }
        Algorithm::Explore { strategy, walk } => {
            let options = RunOptions {
                budget: (*walk).min(config.budget),
                stop_on_exit: false,
            };
            let t = run_exploration(&oracle, &[first], strategy.build().as_mut(), options, &mut rng)?;
            if *walk > config.budget && t.query_count() == config.budget {
                failure = Some(format!("query budget {} exhausted", config.budget));
                (None, t.query_count())
            } else {
                (Some(t.last_connected().unwrap_or(first)), t.query_count())
            }
        }
    };
    let score = match output {
        Some(out) => score_localization(&oracle, &inputs, out, config.threshold)?,
        None => LocalizationScore {
            distance: None,
            far: false,
        },
    };
    Ok(GgspRecord {
        schema: SCHEMA_VERSION,
        trial,
        seed: config.seed,
        algorithm: algorithm.name(),
        key: oracle.key(),
        inputs,
        output,
        queries,
        distance: score.distance,
        far: score.far,
        failure,
    })
}

/// Runs `config.trials` trials in parallel; records come back in trial order.
pub fn ggsp_experiment(
    base: &LabeledOracle<MainGraph>,
    sampler: &InputSampler,
    algorithm: &Algorithm,
    config: &GgspConfig,
) -> Result<GgspReport> {
    let records = (0..config.trials)
        .into_par_iter()
        .map(|i| ggsp_trial(base, sampler, algorithm, config, i))
        .collect::<Result<Vec<_>>>()?;
    let far = records.iter().filter(|r| r.far).count() as u64;
    Ok(GgspReport {
        algorithm: algorithm.name(),
        far: EventStats::from_counts(far, config.trials),
        records,
    })
}
