use rand::Rng;
use serde::{Deserialize, Serialize};

use super::LabeledOracle;
use crate::error::{Error, Result};
use crate::graph_model::{MainGraph, Vertex};
use crate::spectral::GroundStateSampler;

/// Distribution the guiding inputs are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GuidingSpec {
    ExactGroundState,
    ExpanderUniform,
    FixedRoot { expander: u64 },
    /// Ground state with probability `ground_weight`, expander-uniform otherwise.
    Mixture { ground_weight: f64 },
}

impl GuidingSpec {
    pub fn validate(&self) -> Result<()> {
        if let GuidingSpec::Mixture { ground_weight } = *self {
            if !(0.0..=1.0).contains(&ground_weight) {
                return Err(Error::InvalidGuidingSpec(format!(
                    "mixture weight {ground_weight} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }

    /// Classical fidelity `(sum_v sqrt(p_in(v) p(v)))^2` against the ground-state distribution.
    ///
    /// `log_mass_anchor` is `ln S_E` and `expander_size` is `N_E`.
    pub fn fidelity(&self, log_mass_anchor: f64, expander_size: f64) -> f64 {
        let s = log_mass_anchor.exp();
        match *self {
            GuidingSpec::ExactGroundState => 1.0,
            GuidingSpec::ExpanderUniform => 1.0 / s,
            GuidingSpec::FixedRoot { .. } => 1.0 / (expander_size * s),
            GuidingSpec::Mixture { ground_weight: w } => {
                let on_expander = (w + (1.0 - w) * s).sqrt() / s;
                let on_trees = w.sqrt() * (1.0 - 1.0 / s);
                (on_expander + on_trees).powi(2)
            }
        }
    }
}

/// Draws i.i.d. guiding inputs and hands them out as labels.
#[derive(Debug, Clone)]
pub struct InputSampler {
    spec: GuidingSpec,
    ground: GroundStateSampler,
}

impl InputSampler {
    pub fn new(spec: GuidingSpec, ground: GroundStateSampler) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec, ground })
    }

    pub fn spec(&self) -> GuidingSpec {
        self.spec
    }

    pub fn ground(&self) -> &GroundStateSampler {
        &self.ground
    }

    pub fn sample_vertex<R: Rng + ?Sized>(&self, graph: &MainGraph, rng: &mut R) -> Result<Vertex> {
        let size = graph.expander_size();
        match self.spec {
            GuidingSpec::ExactGroundState => self.ground.sample_vertex(rng),
            GuidingSpec::ExpanderUniform => Ok(Vertex::Expander(rng.gen_range(0..size))),
            GuidingSpec::FixedRoot { expander } => {
                if expander >= size {
                    return Err(Error::InvalidGuidingSpec(format!(
                        "fixed root {expander} outside the expander"
                    )));
                }
                Ok(Vertex::Expander(expander))
            }
            GuidingSpec::Mixture { ground_weight } => {
                if rng.gen::<f64>() < ground_weight {
                    self.ground.sample_vertex(rng)
                } else {
                    Ok(Vertex::Expander(rng.gen_range(0..size)))
                }
            }
        }
    }

    /// `t` input labels under `oracle`'s labeling.
    pub fn sample_labels<R: Rng + ?Sized>(
        &self,
        oracle: &LabeledOracle<MainGraph>,
        rng: &mut R,
        t: usize,
    ) -> Result<Vec<u64>> {
        (0..t)
            .map(|_| {
                let v = self.sample_vertex(oracle.topology(), rng)?;
                oracle.label_of(&v)
            })
            .collect()
    }
}
