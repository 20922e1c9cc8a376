//! Parameter schedules, vertex addressing and label-free neighbor logic for the
//! decorated-expander family.

mod main_graph;
mod materialize;
mod standalone;
mod tree;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::ceil_tolerant;

pub use main_graph::{DecorationSlot, MainGraph, Vertex};
pub use materialize::{materialize, Materialized};
pub use standalone::{StandaloneTree, TreeVertex};
pub use tree::{Hop, NodeKind, NodePosition, TreeAddress, TreeSchedule};
pub(crate) use tree::SizeTable;

/// Implicit graph with a canonical enumeration of its non-isolated vertices.
///
/// Indices `0..node_count()` cover the non-isolated vertices; anything above is padding.
pub trait Topology: Send + Sync {
    type Node: Clone + Eq + std::hash::Hash + std::fmt::Debug + Send + Sync;

    fn node_count(&self) -> u64;

    fn node_at(&self, index: u64) -> Result<Self::Node>;

    /// Canonical index, or `None` for padding vertices.
    fn index_of(&self, node: &Self::Node) -> Result<Option<u64>>;

    fn neighbors(&self, node: &Self::Node) -> Result<Vec<Self::Node>>;

    /// Node standing for the padding vertex `offset` places past the last real one.
    fn padding_node(&self, offset: u64) -> Self::Node;

    /// Inverse of [`Topology::padding_node`].
    fn padding_offset(&self, node: &Self::Node) -> Option<u64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleMode {
    Paper,
    Scaled,
}

/// A count that is either machine-representable or only known through its base-2 log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Magnitude {
    Exact(u64),
    Log2(f64),
}

impl Magnitude {
    pub fn log2(&self) -> f64 {
        match *self {
            Magnitude::Exact(v) => (v as f64).log2(),
            Magnitude::Log2(l) => l,
        }
    }

    pub fn exact(&self) -> Option<u64> {
        match *self {
            Magnitude::Exact(v) => Some(v),
            Magnitude::Log2(_) => None,
        }
    }
}

/// `d_{n,k} = 2n - k*sqrt(n)`.
pub fn degree_schedule(n: u64, k: u64) -> Result<u64> {
    let root = exact_sqrt(n)?;
    if k == 0 || k > root {
        return Err(Error::InvalidParams(format!("k = {k} outside 1..={root}")));
    }
    Ok(2 * n - k * root)
}

/// `l_{n,k} = k * 10 * n^{3/2} * log2(n)`, rounded up to an integer depth.
pub fn depth_schedule(n: u64, k: u64) -> Result<u64> {
    let root = exact_sqrt(n)?;
    if k == 0 || k > root {
        return Err(Error::InvalidParams(format!("k = {k} outside 1..={root}")));
    }
    let nf = n as f64;
    Ok(ceil_tolerant(k as f64 * 10.0 * nf.powf(1.5) * nf.log2()))
}

/// `g_n = 40 n^2 log2(n) + 8`, rounded up.
pub fn paper_girth(n: u64) -> u64 {
    let nf = n as f64;
    ceil_tolerant(40.0 * nf * nf * nf.log2() + 8.0)
}

/// `log2 N_E = 21 n^2 log2(n)^2`.
pub fn paper_expander_size_log2(n: u64) -> f64 {
    let nf = n as f64;
    21.0 * nf * nf * nf.log2().powi(2)
}

fn exact_sqrt(n: u64) -> Result<u64> {
    let r = (n as f64).sqrt().round() as u64;
    if n == 0 || r * r != n {
        return Err(Error::InvalidParams(format!("n = {n} is not a positive perfect square")));
    }
    Ok(r)
}

/// Default fraction of the label space occupied by non-isolated vertices.
pub const DEFAULT_PADDING_RATIO: f64 = 1.0 / (1u64 << 20) as f64;

/// Full parameter schedule for one member of the family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphParams {
    pub n: u64,
    /// `K`: number of tree types; types `1..K` decorate the expander.
    pub levels: usize,
    pub degree_schedule: Vec<u64>,
    pub depth_schedule: Vec<u64>,
    pub expander_degree: u64,
    pub expander_size: Magnitude,
    pub girth_floor: u64,
    pub padding_ratio: f64,
    pub scale_mode: ScaleMode,
}

impl GraphParams {
    /// Paper-scale schedule for a perfect square `n >= 4`.
    pub fn paper(n: u64) -> Result<Self> {
        let root = exact_sqrt(n)?;
        if n < 4 {
            return Err(Error::InvalidParams("paper mode needs n >= 4".into()));
        }
        let degree_schedule = (1..=root)
            .map(|k| degree_schedule(n, k))
            .collect::<Result<Vec<_>>>()?;
        let depth_schedule = (1..=root)
            .map(|k| depth_schedule(n, k))
            .collect::<Result<Vec<_>>>()?;
        let params = Self {
            n,
            levels: root as usize,
            degree_schedule,
            depth_schedule,
            expander_degree: n,
            expander_size: Magnitude::Log2(paper_expander_size_log2(n)),
            girth_floor: paper_girth(n),
            padding_ratio: DEFAULT_PADDING_RATIO,
            scale_mode: ScaleMode::Paper,
        };
        params.validate()?;
        Ok(params)
    }

    /// Desk-scale schedule; the expander degree is forced to `d_K` by the degree identity.
    pub fn scaled(
        degrees: Vec<u64>,
        depths: Vec<u64>,
        expander_size: u64,
        girth_floor: u64,
        padding_ratio: f64,
    ) -> Result<Self> {
        let d_last = *degrees
            .last()
            .ok_or_else(|| Error::InvalidParams("empty degree schedule".into()))?;
        let params = Self {
            n: d_last,
            levels: degrees.len(),
            degree_schedule: degrees,
            depth_schedule: depths,
            expander_degree: d_last,
            expander_size: Magnitude::Exact(expander_size),
            girth_floor,
            padding_ratio,
            scale_mode: ScaleMode::Scaled,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        let d = &self.degree_schedule;
        let l = &self.depth_schedule;
        if self.levels == 0 || d.len() != self.levels || l.len() != self.levels {
            return bad(format!(
                "K = {} does not match schedule lengths {} / {}",
                self.levels,
                d.len(),
                l.len()
            ));
        }
        if d.windows(2).any(|w| w[0] <= w[1]) {
            return bad(format!("degree schedule must be strictly decreasing: {d:?}"));
        }
        if l.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("depth schedule must be strictly increasing: {l:?}"));
        }
        let min_last = match self.scale_mode {
            ScaleMode::Paper => 2,
            ScaleMode::Scaled => 1,
        };
        if d[self.levels - 1] < min_last {
            return bad(format!("d_K = {} below {min_last}", d[self.levels - 1]));
        }
        // d_E + sum_{k<K} (d_k - d_{k+1}) = d_1
        if self.expander_degree + (d[0] - d[self.levels - 1]) != d[0] {
            return bad(format!(
                "degree identity violated: d_E = {} but d_K = {}",
                self.expander_degree,
                d[self.levels - 1]
            ));
        }
        if !(self.padding_ratio > 0.0 && self.padding_ratio <= 1.0) {
            return bad(format!("padding ratio {} outside (0, 1]", self.padding_ratio));
        }
        if let Magnitude::Exact(size) = self.expander_size {
            if self.expander_degree >= size {
                return bad(format!("expander degree {} >= size {size}", self.expander_degree));
            }
            if !(size * self.expander_degree).is_multiple_of(2) {
                return bad("N_E * d_E must be even".into());
            }
        }
        if self.scale_mode == ScaleMode::Paper {
            let fresh = Self::paper_unchecked(self.n)?;
            if fresh.degree_schedule != *d
                || fresh.depth_schedule != *l
                || fresh.girth_floor != self.girth_floor
                || self.expander_degree != self.n
            {
                return bad("paper-mode parameters do not match the schedule formulas".into());
            }
        }
        Ok(())
    }

    fn paper_unchecked(n: u64) -> Result<Self> {
        let root = exact_sqrt(n)?;
        Ok(Self {
            n,
            levels: root as usize,
            degree_schedule: (1..=root).map(|k| degree_schedule(n, k)).collect::<Result<_>>()?,
            depth_schedule: (1..=root).map(|k| depth_schedule(n, k)).collect::<Result<_>>()?,
            expander_degree: n,
            expander_size: Magnitude::Log2(paper_expander_size_log2(n)),
            girth_floor: paper_girth(n),
            padding_ratio: DEFAULT_PADDING_RATIO,
            scale_mode: ScaleMode::Paper,
        })
    }

    pub fn tree_schedule(&self) -> TreeSchedule {
        TreeSchedule::new(self.degree_schedule.clone(), self.depth_schedule.clone())
            .expect("validated params yield a valid tree schedule")
    }

    /// `(k, d_k - d_{k+1})` for the tree types hung on each expander vertex.
    pub fn decorations(&self) -> Vec<(usize, u64)> {
        (1..self.levels)
            .map(|k| (k, self.degree_schedule[k - 1] - self.degree_schedule[k]))
            .collect()
    }

    /// Exact size of the type-`k` tree.
    pub fn count_tree_vertices(&self, k: usize) -> Result<BigUint> {
        self.tree_schedule().count_vertices(k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degree_schedule_values() {
        assert_eq!(degree_schedule(16, 2).unwrap(), 24);
        assert_eq!(degree_schedule(16, 4).unwrap(), 16);
        assert_eq!(degree_schedule(4, 1).unwrap(), 6);
        assert!(degree_schedule(16, 5).is_err());
        assert!(degree_schedule(15, 1).is_err());
        assert!(degree_schedule(16, 0).is_err());
    }

    #[test]
    fn depth_schedule_values() {
        assert_eq!(depth_schedule(16, 1).unwrap(), 2560);
        assert_eq!(depth_schedule(16, 2).unwrap(), 5120);
        assert_eq!(depth_schedule(4, 1).unwrap(), 160);
        assert!(depth_schedule(8, 1).is_err());
    }

    #[test]
    fn paper_params_satisfy_identities() {
        let p = GraphParams::paper(16).unwrap();
        assert_eq!(p.degree_schedule, vec![28, 24, 20, 16]);
        assert_eq!(p.expander_degree, 16);
        // ell_K = g/4 - 2
        assert_eq!(p.depth_schedule[3], p.girth_floor / 4 - 2);
        assert_eq!(p.decorations(), vec![(1, 4), (2, 4), (3, 4)]);
        assert!((p.expander_size.log2() - 21.0 * 256.0 * 16.0).abs() < 1e-9);
    }

    #[test]
    fn scaled_params_reject_bad_schedules() {
        assert!(GraphParams::scaled(vec![4, 3], vec![2, 3], 10, 4, 0.5).is_ok());
        assert!(GraphParams::scaled(vec![3, 4], vec![2, 3], 10, 4, 0.5).is_err());
        assert!(GraphParams::scaled(vec![4, 3], vec![3, 3], 10, 4, 0.5).is_err());
        assert!(GraphParams::scaled(vec![4, 3], vec![2, 3], 10, 4, 0.0).is_err());
        // 3-regular on 9 vertices is impossible
        assert!(GraphParams::scaled(vec![4, 3], vec![2, 3], 9, 4, 0.5).is_err());
        let mut p = GraphParams::scaled(vec![4, 3], vec![2, 3], 10, 4, 0.5).unwrap();
        p.expander_degree = 2;
        assert!(p.validate().is_err());
    }

    #[test]
    fn paper_count_stays_below_bound() {
        let p = GraphParams::paper(16).unwrap();
        let count = p.count_tree_vertices(4).unwrap();
        // |T_{16,4}| <= 2^{12 n^3 log^2 n}
        assert!(count.bits() <= 12 * 4096 * 16);
    }
}
