//! Query-only exploration of labeled oracles, plus trusted scoring of what the
//! explorer reached.

mod experiment;
mod stats;
mod strategy;

use std::collections::HashSet;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph_model::{MainGraph, NodeKind, StandaloneTree, Topology, TreeVertex, Vertex};
use crate::oracle::{in_exploration, LabeledOracle, QueryAccess};

pub use experiment::{
    estimate_exit_probability, exit_trial, ggsp_experiment, ggsp_trial, score_localization,
    Algorithm, ExitEstimate, ExitTrial, GgspConfig, GgspRecord, GgspReport, KeyMode,
    LocalizationScore, SCHEMA_VERSION,
};
pub use stats::EventStats;
pub use strategy::{Probe, Strategy, StrategyKind};

/// What the trusted scorer sees at a queried vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    Plain,
    Isolated,
    /// Leaf at the bottom of the explored tree's own core.
    ExitLeaf,
    /// Leaf of a level-`level` decoration, identified by the decoration root.
    DecorationLeaf { level: usize, decoration: u64 },
}

/// Topologies whose vertices can be scored after the fact.
pub trait Scored: Topology {
    fn node_class(&self, node: &Self::Node) -> Result<NodeClass>;
}

impl Scored for StandaloneTree {
    fn node_class(&self, node: &TreeVertex) -> Result<NodeClass> {
        let TreeVertex::Node(addr) = node else {
            return Ok(NodeClass::Isolated);
        };
        Ok(match self.classify(addr)? {
            (NodeKind::Leaf { level: 0 }, _) => NodeClass::ExitLeaf,
            (NodeKind::Leaf { level }, Some(decoration)) => NodeClass::DecorationLeaf {
                level: level as usize,
                decoration,
            },
            _ => NodeClass::Plain,
        })
    }
}

impl Scored for MainGraph {
    fn node_class(&self, node: &Vertex) -> Result<NodeClass> {
        Ok(if node.is_isolated() {
            NodeClass::Isolated
        } else {
            NodeClass::Plain
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub label: u64,
    pub answer_len: usize,
    pub answer: Vec<u64>,
    pub fresh: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    ExitLeaf { step: usize },
    LeafSeen { decoration: u64, level: usize, step: usize },
    IsolatedHit { step: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub roots: Vec<u64>,
    pub steps: Vec<Step>,
    pub events: Vec<Event>,
    pub budget: u64,
}

impl Transcript {
    pub fn query_count(&self) -> u64 {
        self.steps.len() as u64
    }

    pub fn exited(&self) -> bool {
        self.events.iter().any(|e| matches!(e, Event::ExitLeaf { .. }))
    }

    /// Distinct decorations of the given level with at least one queried leaf.
    pub fn distinct_leaves(&self, level: usize) -> usize {
        self.events
            .iter()
            .filter_map(|e| match *e {
                Event::LeafSeen { decoration, level: l, .. } if l == level => Some(decoration),
                _ => None,
            })
            .collect::<HashSet<_>>()
            .len()
    }

    /// Last queried label with a non-empty answer.
    pub fn last_connected(&self) -> Option<u64> {
        self.steps.iter().rev().find(|s| s.answer_len > 0).map(|s| s.label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub budget: u64,
    pub stop_on_exit: bool,
}

/// Runs `strategy` from `roots` for at most `budget` queries.
///
/// The strategy is driven inside [`in_exploration`], so it cannot reveal labels.
/// Each queried label is then revealed outside the guard and scored.
pub fn run_exploration<T: Scored>(
    oracle: &LabeledOracle<T>,
    roots: &[u64],
    strategy: &mut dyn Strategy,
    options: RunOptions,
    rng: &mut dyn RngCore,
) -> Result<Transcript> {
    let bits = oracle.label_bits();
    in_exploration(|| strategy.start(roots, bits));
    let mut seen: HashSet<u64> = roots.iter().copied().collect();
    let mut transcript = Transcript {
        roots: roots.to_vec(),
        steps: Vec::new(),
        events: Vec::new(),
        budget: options.budget,
    };
    while transcript.query_count() < options.budget {
        let Some(probe) = in_exploration(|| strategy.next(rng)) else {
            break;
        };
        if !probe.fresh && !seen.contains(&probe.label) {
            return Err(Error::InvalidStrategy(format!(
                "label {} was never seen and the probe is not marked fresh",
                probe.label
            )));
        }
        let answer = in_exploration(|| oracle.query(probe.label))?;
        let step = transcript.steps.len();
        let exit = score(oracle, probe.label, step, &mut transcript.events)?;
        seen.extend(answer.iter().copied());
        seen.insert(probe.label);
        in_exploration(|| strategy.observe(probe.label, &answer));
        transcript.steps.push(Step {
            label: probe.label,
            answer_len: answer.len(),
            answer,
            fresh: probe.fresh,
        });
        if exit && options.stop_on_exit {
            break;
        }
    }
    Ok(transcript)
}

fn score<T: Scored>(oracle: &LabeledOracle<T>, label: u64, step: usize, events: &mut Vec<Event>) -> Result<bool> {
    let node = oracle.reveal(label)?;
    Ok(match oracle.topology().node_class(&node)? {
        NodeClass::Plain => false,
        NodeClass::Isolated => {
            events.push(Event::IsolatedHit { step });
            false
        }
        NodeClass::ExitLeaf => {
            events.push(Event::ExitLeaf { step });
            true
        }
        NodeClass::DecorationLeaf { level, decoration } => {
            events.push(Event::LeafSeen { decoration, level, step });
            false
        }
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    /// Steps that queried an unseen label without declaring a fresh probe.
    pub violations: Vec<usize>,
    pub fresh_probes: u64,
    /// Fresh probes that landed on a vertex with neighbors.
    pub fresh_connected_hits: u64,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks, from the transcript alone, that every non-root query with a non-empty
/// answer was adjacent to something already seen, unless declared fresh.
pub fn component_audit(transcript: &Transcript) -> AuditReport {
    let mut seen: HashSet<u64> = transcript.roots.iter().copied().collect();
    let mut report = AuditReport::default();
    for (i, step) in transcript.steps.iter().enumerate() {
        if step.fresh {
            report.fresh_probes += 1;
        }
        if !seen.contains(&step.label) && step.answer_len > 0 {
            if step.fresh {
                report.fresh_connected_hits += 1;
            } else {
                report.violations.push(i);
            }
        }
        seen.insert(step.label);
        seen.extend(step.answer.iter().copied());
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_model::TreeSchedule;
    use crate::oracle::OracleKey;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn tree_oracle(degrees: Vec<u64>, depths: Vec<u64>, key: u128) -> LabeledOracle<StandaloneTree> {
        let schedule = TreeSchedule::new(degrees, depths).unwrap();
        let k = schedule.levels();
        let tree = StandaloneTree::new(schedule, k).unwrap();
        LabeledOracle::new(Arc::new(tree), OracleKey(key), 0.5, None).unwrap()
    }

    fn run(oracle: &LabeledOracle<StandaloneTree>, kind: &StrategyKind, budget: u64, seed: u64) -> Transcript {
        let root = oracle.label_of(&oracle.topology().root()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let opts = RunOptions { budget, stop_on_exit: false };
        run_exploration(oracle, &[root], kind.build().as_mut(), opts, &mut rng).unwrap()
    }

    #[test]
    fn greedy_walks_a_bare_path_to_the_end() {
        // d=(2), l=(7): a path of 8 vertices hanging from the root
        let oracle = tree_oracle(vec![2], vec![7], 3);
        let t = run(&oracle, &StrategyKind::GreedyUnvisited, 100, 1);
        assert_eq!(t.query_count(), 8);
        assert!(t.exited());
        assert!(matches!(t.events.last(), Some(Event::ExitLeaf { step: 7 })));
    }

    #[test]
    fn walks_use_the_whole_budget() {
        let oracle = tree_oracle(vec![3, 2], vec![2, 4], 9);
        for kind in [StrategyKind::RandomWalk, StrategyKind::NonBacktracking] {
            let t = run(&oracle, &kind, 25, 4);
            assert_eq!(t.query_count(), 25);
            assert!(component_audit(&t).passed());
        }
    }

    #[test]
    fn every_builtin_passes_the_audit() {
        let oracle = tree_oracle(vec![4, 3, 2], vec![1, 2, 3], 11);
        for kind in StrategyKind::builtin() {
            for seed in 0..5 {
                let t = run(&oracle, &kind, 40, seed);
                let audit = component_audit(&t);
                assert!(audit.passed(), "{kind:?}");
                if !kind.uses_fresh_probes() {
                    assert_eq!(audit.fresh_probes, 0);
                }
            }
        }
    }

    #[test]
    fn planted_jump_is_flagged() {
        let oracle = tree_oracle(vec![3, 2], vec![2, 4], 5);
        let mut t = run(&oracle, &StrategyKind::GreedyUnvisited, 6, 2);
        let far = oracle
            .label_of(&oracle.topology().node_at(oracle.real_count() - 1).unwrap())
            .unwrap();
        let answer = oracle.query(far).unwrap();
        assert!(!t.steps.iter().any(|s| s.label == far || s.answer.contains(&far)));
        t.steps.push(Step { label: far, answer_len: answer.len(), answer, fresh: false });
        assert_eq!(component_audit(&t).violations, vec![6]);
    }

    #[test]
    fn undeclared_jump_is_refused_by_the_runner() {
        struct Cheater;
        impl Strategy for Cheater {
            fn start(&mut self, _: &[u64], _: u32) {}
            fn next(&mut self, _: &mut dyn RngCore) -> Option<Probe> {
                Some(Probe { label: 1, fresh: false })
            }
            fn observe(&mut self, _: u64, _: &[u64]) {}
        }
        let oracle = tree_oracle(vec![2], vec![3], 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let opts = RunOptions { budget: 3, stop_on_exit: false };
        let err = run_exploration(&oracle, &[0], &mut Cheater, opts, &mut rng);
        assert!(matches!(err, Err(Error::InvalidStrategy(_))));
    }

    #[test]
    fn strategies_cannot_reveal() {
        let oracle = Arc::new(tree_oracle(vec![2], vec![3], 1));
        struct Peeker(Arc<LabeledOracle<StandaloneTree>>, bool);
        impl Strategy for Peeker {
            fn start(&mut self, _: &[u64], _: u32) {}
            fn next(&mut self, _: &mut dyn RngCore) -> Option<Probe> {
                self.1 = matches!(self.0.reveal(0), Err(Error::RevealInExploration));
                None
            }
            fn observe(&mut self, _: u64, _: &[u64]) {}
        }
        let mut p = Peeker(oracle.clone(), false);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let opts = RunOptions { budget: 3, stop_on_exit: false };
        run_exploration(oracle.as_ref(), &[0], &mut p, opts, &mut rng).unwrap();
        assert!(p.1);
    }

    #[test]
    fn scripted_follows_answer_indices() {
        let oracle = tree_oracle(vec![2], vec![3], 8);
        // from the root the only neighbor is index 0; afterwards index 1 moves away
        // from the parent since labels are sorted, so check the walk by revealing
        let t = run(&oracle, &StrategyKind::Scripted { choices: vec![0, 0, 0] }, 10, 0);
        assert_eq!(t.query_count(), 4);
        assert_eq!(t.steps[1].label, t.steps[0].answer[0]);
    }
}
