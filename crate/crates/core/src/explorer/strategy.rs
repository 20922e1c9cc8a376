use std::collections::{HashMap, HashSet};

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::oracle::random_label;

/// Next label a strategy wants to query. `fresh` marks a probe not taken from any answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Probe {
    pub label: u64,
    pub fresh: bool,
}

/// An exploration policy. It sees labels and answers only.
pub trait Strategy: Send {
    fn start(&mut self, roots: &[u64], label_bits: u32);

    /// `None` ends the run.
    fn next(&mut self, rng: &mut dyn RngCore) -> Option<Probe>;

    fn observe(&mut self, label: u64, answer: &[u64]);
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrategyKind {
    /// Uniform random walk; every step re-queries.
    RandomWalk,
    NonBacktracking,
    /// Randomized depth-first search; backtracking reuses cached answers.
    GreedyUnvisited,
    /// Queries a uniform element of the discovered-but-unqueried frontier.
    FrontierBfs,
    /// Uniform fresh labels, ignoring adjacency.
    RandomProbe,
    /// From the root, step to `answer[c % len]` for each listed choice `c`.
    Scripted { choices: Vec<usize> },
}

impl StrategyKind {
    pub fn builtin() -> Vec<StrategyKind> {
        vec![
            StrategyKind::RandomWalk,
            StrategyKind::NonBacktracking,
            StrategyKind::GreedyUnvisited,
            StrategyKind::FrontierBfs,
            StrategyKind::RandomProbe,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            StrategyKind::RandomWalk => "random_walk",
            StrategyKind::NonBacktracking => "non_backtracking",
            StrategyKind::GreedyUnvisited => "greedy_unvisited",
            StrategyKind::FrontierBfs => "frontier_bfs",
            StrategyKind::RandomProbe => "random_probe",
            StrategyKind::Scripted { .. } => "scripted",
        }
    }

    pub fn parse(name: &str) -> crate::Result<Self> {
        Self::builtin()
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| crate::Error::InvalidStrategy(format!("unknown strategy {name:?}")))
    }

    pub fn uses_fresh_probes(&self) -> bool {
        matches!(self, StrategyKind::RandomProbe)
    }

    pub fn build(&self) -> Box<dyn Strategy> {
        match self {
            StrategyKind::RandomWalk => Box::new(Walk::new(false)),
            StrategyKind::NonBacktracking => Box::new(Walk::new(true)),
            StrategyKind::GreedyUnvisited => Box::<Greedy>::default(),
            StrategyKind::FrontierBfs => Box::<Frontier>::default(),
            StrategyKind::RandomProbe => Box::<RandomProbe>::default(),
            StrategyKind::Scripted { choices } => Box::new(Scripted::new(choices.clone())),
        }
    }
}

fn pick<T: Copy>(rng: &mut dyn RngCore, items: &[T]) -> Option<T> {
    if items.is_empty() {
        None
    } else {
        Some(items[rng.gen_range(0..items.len())])
    }
}

struct Walk {
    no_backtrack: bool,
    root: Option<u64>,
    current: Option<(u64, Vec<u64>)>,
    previous: Option<u64>,
}

impl Walk {
    fn new(no_backtrack: bool) -> Self {
        Self {
            no_backtrack,
            root: None,
            current: None,
            previous: None,
        }
    }
}

impl Strategy for Walk {
    fn start(&mut self, roots: &[u64], _label_bits: u32) {
        self.root = roots.first().copied();
        self.current = None;
        self.previous = None;
    }

    fn next(&mut self, rng: &mut dyn RngCore) -> Option<Probe> {
        let Some((_, answer)) = &self.current else {
            return self.root.take().map(|label| Probe { label, fresh: false });
        };
        let label = if self.no_backtrack && answer.len() > 1 {
            let forward: Vec<u64> = answer
                .iter()
                .copied()
                .filter(|&x| Some(x) != self.previous)
                .collect();
            pick(rng, &forward)?
        } else {
            pick(rng, answer)?
        };
        Some(Probe { label, fresh: false })
    }

    fn observe(&mut self, label: u64, answer: &[u64]) {
        self.previous = self.current.take().map(|(l, _)| l);
        self.current = Some((label, answer.to_vec()));
    }
}

#[derive(Default)]
struct Greedy {
    root: Option<u64>,
    stack: Vec<u64>,
    answers: HashMap<u64, Vec<u64>>,
}

impl Strategy for Greedy {
    fn start(&mut self, roots: &[u64], _label_bits: u32) {
        self.root = roots.first().copied();
        self.stack.clear();
        self.answers.clear();
    }

    fn next(&mut self, rng: &mut dyn RngCore) -> Option<Probe> {
        if let Some(label) = self.root.take() {
            return Some(Probe { label, fresh: false });
        }
        while let Some(&top) = self.stack.last() {
            let open: Vec<u64> = self.answers[&top]
                .iter()
                .copied()
                .filter(|x| !self.answers.contains_key(x))
                .collect();
            if let Some(label) = pick(rng, &open) {
                return Some(Probe { label, fresh: false });
            }
            self.stack.pop();
        }
        None
    }

    fn observe(&mut self, label: u64, answer: &[u64]) {
        self.answers.insert(label, answer.to_vec());
        self.stack.push(label);
    }
}

#[derive(Default)]
struct Frontier {
    root: Option<u64>,
    frontier: Vec<u64>,
    known: HashSet<u64>,
}

impl Strategy for Frontier {
    fn start(&mut self, roots: &[u64], _label_bits: u32) {
        self.root = roots.first().copied();
        self.frontier.clear();
        self.known = roots.iter().copied().collect();
    }

    fn next(&mut self, rng: &mut dyn RngCore) -> Option<Probe> {
        if let Some(label) = self.root.take() {
            return Some(Probe { label, fresh: false });
        }
        if self.frontier.is_empty() {
            return None;
        }
        let i = rng.gen_range(0..self.frontier.len());
        Some(Probe {
            label: self.frontier.swap_remove(i),
            fresh: false,
        })
    }

    fn observe(&mut self, _label: u64, answer: &[u64]) {
        for &x in answer {
            if self.known.insert(x) {
                self.frontier.push(x);
            }
        }
    }
}

#[derive(Default)]
struct RandomProbe {
    bits: u32,
}

impl Strategy for RandomProbe {
    fn start(&mut self, _roots: &[u64], label_bits: u32) {
        self.bits = label_bits;
    }

    fn next(&mut self, rng: &mut dyn RngCore) -> Option<Probe> {
        Some(Probe {
            label: random_label(self.bits, rng),
            fresh: true,
        })
    }

    fn observe(&mut self, _label: u64, _answer: &[u64]) {}
}

struct Scripted {
    choices: Vec<usize>,
    position: usize,
    root: Option<u64>,
    last: Option<Vec<u64>>,
}

impl Scripted {
    fn new(choices: Vec<usize>) -> Self {
        Self {
            choices,
            position: 0,
            root: None,
            last: None,
        }
    }
}

impl Strategy for Scripted {
    fn start(&mut self, roots: &[u64], _label_bits: u32) {
        self.root = roots.first().copied();
        self.position = 0;
        self.last = None;
    }

    fn next(&mut self, _rng: &mut dyn RngCore) -> Option<Probe> {
        let Some(answer) = &self.last else {
            return self.root.take().map(|label| Probe { label, fresh: false });
        };
        let &choice = self.choices.get(self.position)?;
        if answer.is_empty() {
            return None;
        }
        self.position += 1;
        Some(Probe {
            label: answer[choice % answer.len()],
            fresh: false,
        })
    }

    fn observe(&mut self, _label: u64, answer: &[u64]) {
        self.last = Some(answer.to_vec());
    }
}
