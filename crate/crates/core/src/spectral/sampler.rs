use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SpectralSolution;
use crate::error::{Error, Result};
use crate::graph_model::{DecorationSlot, Hop, Magnitude, TreeAddress, Vertex};

/// A ground-state draw relative to its anchor: `slot == None` means the anchor itself.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroundSample {
    pub slot: Option<DecorationSlot>,
    pub address: TreeAddress,
}

/// Exact sampler for `p(v) = psi(v)^2 / ||psi||^2` that walks down from a uniform anchor.
///
/// At a node with subtree mass `S` the walk stops with probability `1/S` and
/// otherwise enters child `c` with probability `m_c^2 S_c / S`.
#[derive(Debug, Clone)]
pub struct GroundStateSampler {
    solution: Arc<SpectralSolution>,
    expander_size: Magnitude,
    /// `ln(beta_k m_k^2 S_k)` per attached type, aligned with `solution.decorations`.
    anchor_weights: Vec<f64>,
}

impl GroundStateSampler {
    pub fn new(solution: Arc<SpectralSolution>, expander_size: Magnitude) -> Self {
        let anchor_weights = solution
            .decorations
            .iter()
            .map(|&(k, b)| {
                (b as f64).ln() + 2.0 * solution.resolvents.root(k).ln() + solution.log_mass_full(k)
            })
            .collect();
        Self {
            solution,
            expander_size,
            anchor_weights,
        }
    }

    pub fn solution(&self) -> &SpectralSolution {
        &self.solution
    }

    /// Outgoing probabilities at the anchor: stop, then one entry per attached type.
    pub fn anchor_probabilities(&self) -> Vec<f64> {
        let total = self.solution.log_mass_anchor();
        std::iter::once(-total)
            .chain(self.anchor_weights.iter().copied().map(|w| w - total))
            .map(f64::exp)
            .collect()
    }

    /// Outgoing probabilities at a node of segment `j` with `r >= 1` levels remaining:
    /// stop, all core children together, then each decoration type `j-1, ..., 1` together.
    pub fn node_probabilities(&self, j: usize, r: u64) -> Vec<f64> {
        let sol = &self.solution;
        let schedule = &sol.schedule;
        let total = sol.log_mass(j, r);
        let mut out = vec![(-total).exp()];
        let core = schedule.core_children(j);
        out.push(if core == 0 {
            0.0
        } else {
            ((core as f64).ln() + 2.0 * sol.resolvents.get(j, r - 1).ln() + sol.log_mass(j, r - 1)
                - total)
                .exp()
        });
        for i in (1..j).rev() {
            let c = schedule.decoration_count(i);
            out.push(if c == 0 {
                0.0
            } else {
                ((c as f64).ln() + 2.0 * sol.resolvents.root(i).ln() + sol.log_mass_full(i) - total)
                    .exp()
            });
        }
        out
    }

    /// One draw, anchor left implicit.
    pub fn sample_relative<R: Rng + ?Sized>(&self, rng: &mut R) -> GroundSample {
        let probs = self.anchor_probabilities();
        let pick = choose(rng, &probs);
        if pick == 0 {
            return GroundSample {
                slot: None,
                address: TreeAddress::root(),
            };
        }
        let (k, beta) = self.solution.decorations[pick - 1];
        let slot = DecorationSlot {
            level: k as u32,
            copy: rng.gen_range(0..beta) as u32,
        };
        let schedule = &self.solution.schedule;
        let mut hops = Vec::new();
        let mut segment = k;
        let mut remaining = schedule.depth(k);
        while remaining > 0 {
            let probs = self.node_probabilities(segment, remaining);
            match choose(rng, &probs) {
                0 => break,
                1 => {
                    hops.push(Hop::Core(rng.gen_range(0..schedule.core_children(segment)) as u32));
                    remaining -= 1;
                }
                idx => {
                    let level = segment - (idx - 1);
                    hops.push(Hop::Decoration {
                        level: level as u32,
                        slot: rng.gen_range(0..schedule.decoration_count(level)) as u32,
                    });
                    segment = level;
                    remaining = schedule.depth(level);
                }
            }
        }
        GroundSample {
            slot: Some(slot),
            address: TreeAddress::from_hops(hops),
        }
    }

    /// One draw as a main-graph vertex; needs an exactly known expander size.
    pub fn sample_vertex<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vertex> {
        let size = self.expander_size.exact().ok_or_else(|| {
            Error::TooLarge("expander size is only known in log form".into())
        })?;
        let anchor = rng.gen_range(0..size);
        let s = self.sample_relative(rng);
        Ok(match s.slot {
            None => Vertex::Expander(anchor),
            Some(slot) => Vertex::Tree {
                anchor,
                slot,
                address: s.address,
            },
        })
    }

    pub fn sample_ground_state<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Result<Vec<Vertex>> {
        (0..count).map(|_| self.sample_vertex(rng)).collect()
    }
}

fn choose<R: Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> usize {
    let total: f64 = probs.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, &p) in probs.iter().enumerate() {
        if u < p {
            return i;
        }
        u -= p;
    }
    // rounding slack lands on the last non-zero entry
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_model::{GraphParams, TreeSchedule};
    use crate::spectral::{solve_lambda_g, DecoratedSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p4_sampler() -> GroundStateSampler {
        let spec = DecoratedSpec {
            lambda_e: 1.0,
            schedule: TreeSchedule::new(vec![2, 1], vec![0, 1]).unwrap(),
            decorations: vec![(1, 1)],
        };
        GroundStateSampler::new(Arc::new(solve_lambda_g(&spec).unwrap()), Magnitude::Exact(2))
    }

    #[test]
    fn outgoing_probabilities_sum_to_one() {
        let params = GraphParams::scaled(vec![5, 4, 3], vec![1, 2, 3], 10, 3, 1.0).unwrap();
        let sol = solve_lambda_g(&DecoratedSpec::from_params(&params)).unwrap();
        let s = GroundStateSampler::new(Arc::new(sol), params.expander_size);
        assert!((s.anchor_probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for j in 1..=2 {
            for r in 1..=params.depth_schedule[j - 1] {
                let sum: f64 = s.node_probabilities(j, r).iter().sum();
                assert!((sum - 1.0).abs() < 1e-12, "j={j} r={r}");
            }
        }
    }

    #[test]
    fn p4_inner_vertex_frequency() {
        let s = p4_sampler();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 1_000_000;
        let inner = (0..n)
            .filter(|_| s.sample_vertex(&mut rng).unwrap() == Vertex::Expander(0))
            .count() as f64;
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let p = phi * phi / (2.0 + 2.0 * phi * phi);
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((inner / n as f64 - p).abs() < 3.0 * sigma);
    }

    #[test]
    fn no_decorations_means_uniform_anchor() {
        let spec = DecoratedSpec {
            lambda_e: 3.0,
            schedule: TreeSchedule::new(vec![3], vec![1]).unwrap(),
            decorations: vec![],
        };
        let s = GroundStateSampler::new(Arc::new(solve_lambda_g(&spec).unwrap()), Magnitude::Exact(10));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert!(matches!(s.sample_vertex(&mut rng).unwrap(), Vertex::Expander(_)));
        }
    }
}
