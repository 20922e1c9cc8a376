//! Labeled adjacency-list oracle: a keyed permutation hides vertex identities,
//! padding labels answer with empty lists, and every query is counted.

mod descriptor;
mod feistel;
mod guiding;

use std::cell::{Cell, RefCell};
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph_model::Topology;

pub use descriptor::{OracleDescriptor, TopologyDescriptor};
pub use feistel::FeistelPermutation;
pub use guiding::{GuidingSpec, InputSampler};

/// 128-bit secret keying the label permutation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct OracleKey(pub u128);

impl OracleKey {
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self(rng.gen())
    }

    pub(crate) fn halves(self) -> (u64, u64) {
        ((self.0 >> 64) as u64, self.0 as u64)
    }
}

impl fmt::Display for OracleKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:032x}", self.0)
    }
}

impl FromStr for OracleKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim_start_matches("0x");
        u128::from_str_radix(s, 16)
            .map(Self)
            .map_err(|e| Error::Parse(format!("oracle key {s:?}: {e}")))
    }
}

impl From<OracleKey> for String {
    fn from(k: OracleKey) -> Self {
        k.to_string()
    }
}

impl TryFrom<String> for OracleKey {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// The only view of an oracle handed to exploration code.
pub trait QueryAccess {
    fn label_bits(&self) -> u32;

    /// Sorted neighbor labels of `label`; empty for padding.
    fn query(&self, label: u64) -> Result<Vec<u64>>;
}

/// Smallest `m <= 64` with `2^m >= count / padding_ratio`.
pub fn label_bits_for(count: u64, padding_ratio: f64) -> Result<u32> {
    if !(padding_ratio > 0.0 && padding_ratio <= 1.0) {
        return Err(Error::InvalidParams(format!("padding ratio {padding_ratio} outside (0, 1]")));
    }
    let need = (count.max(1) as f64 / padding_ratio).log2();
    let mut m = need.ceil().max(0.0) as u32;
    // guard against log2 rounding on exact powers of two
    if m > 0 && (count.max(1) as f64) <= padding_ratio * 2f64.powi(m as i32 - 1) {
        m -= 1;
    }
    if m > 64 {
        return Err(Error::LabelSpaceTooSmall {
            label_bits: 64,
            required: (count as f64 / padding_ratio) as u128,
        });
    }
    Ok(m)
}

thread_local! {
    static EXPLORING: Cell<bool> = const { Cell::new(false) };
}

/// Runs `f` with `reveal` disabled on this thread.
pub fn in_exploration<R>(f: impl FnOnce() -> R) -> R {
    struct Reset(bool);
    impl Drop for Reset {
        fn drop(&mut self) {
            EXPLORING.with(|e| e.set(self.0));
        }
    }
    let _reset = Reset(EXPLORING.with(|e| e.replace(true)));
    f()
}

pub fn exploring() -> bool {
    EXPLORING.with(Cell::get)
}

/// Oracle over any [`Topology`], with labels in `[0, 2^label_bits)`.
#[derive(Debug)]
pub struct LabeledOracle<T: Topology> {
    topology: Arc<T>,
    permutation: FeistelPermutation,
    key: OracleKey,
    padding_ratio: f64,
    real_count: u64,
    queries: AtomicU64,
}

impl<T: Topology> LabeledOracle<T> {
    /// Picks the label width from `padding_ratio` unless `label_bits` is given.
    pub fn new(
        topology: Arc<T>,
        key: OracleKey,
        padding_ratio: f64,
        label_bits: Option<u32>,
    ) -> Result<Self> {
        let real_count = topology.node_count();
        let minimal = label_bits_for(real_count, padding_ratio)?;
        let bits = label_bits.unwrap_or(minimal);
        if bits < minimal {
            return Err(Error::LabelSpaceTooSmall {
                label_bits: bits,
                required: (real_count as f64 / padding_ratio).ceil() as u128,
            });
        }
        Ok(Self {
            topology,
            permutation: FeistelPermutation::new(bits, key)?,
            key,
            padding_ratio,
            real_count,
            queries: AtomicU64::new(0),
        })
    }

    /// Same topology and width under a different key, with a fresh counter.
    pub fn rekeyed(&self, key: OracleKey) -> Self {
        Self {
            topology: Arc::clone(&self.topology),
            permutation: FeistelPermutation::new(self.label_bits(), key)
                .expect("width already validated"),
            key,
            padding_ratio: self.padding_ratio,
            real_count: self.real_count,
            queries: AtomicU64::new(0),
        }
    }

    pub fn topology(&self) -> &T {
        &self.topology
    }

    pub fn key(&self) -> OracleKey {
        self.key
    }

    pub fn padding_ratio(&self) -> f64 {
        self.padding_ratio
    }

    pub fn real_count(&self) -> u64 {
        self.real_count
    }

    /// Number of padding (isolated) labels, `2^m - real_count`.
    pub fn padding_count(&self) -> u128 {
        (1u128 << self.label_bits()) - u128::from(self.real_count)
    }

    /// Exact fraction of labels that are not isolated.
    pub fn occupied_fraction(&self) -> f64 {
        self.real_count as f64 / 2f64.powi(self.label_bits() as i32)
    }

    pub fn query_count(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    fn node_of(&self, label: u64) -> Result<T::Node> {
        let index = self.permutation.invert(label)?;
        if index < self.real_count {
            self.topology.node_at(index)
        } else {
            Ok(self.topology.padding_node(index - self.real_count))
        }
    }

    /// Label of `node`. Padding nodes map through their offset past the real vertices.
    pub fn label_of(&self, node: &T::Node) -> Result<u64> {
        let index = match self.topology.index_of(node)? {
            Some(i) => i,
            None => self.padding_index(node)?,
        };
        self.permutation.permute(index)
    }

    fn padding_index(&self, node: &T::Node) -> Result<u64> {
        let offset = self
            .topology
            .padding_offset(node)
            .ok_or_else(|| Error::InvalidVertex(format!("{node:?} has no label")))?;
        self.real_count
            .checked_add(offset)
            .filter(|&i| u128::from(i) < 1u128 << self.label_bits())
            .ok_or_else(|| Error::InvalidVertex(format!("padding offset {offset} out of range")))
    }

    /// Label of the padding vertex `offset` places past the real ones.
    pub fn label_of_padding(&self, offset: u64) -> Result<u64> {
        self.label_of(&self.topology.padding_node(offset))
    }

    /// Hidden identity of a label. Refuses to run inside [`in_exploration`].
    pub fn reveal(&self, label: u64) -> Result<T::Node> {
        if exploring() {
            return Err(Error::RevealInExploration);
        }
        self.node_of(label)
    }

    /// Uniform label, for fresh probes.
    pub fn random_label<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        random_label(self.label_bits(), rng)
    }
}

pub(crate) fn random_label<R: Rng + ?Sized>(bits: u32, rng: &mut R) -> u64 {
    if bits == 64 {
        rng.gen()
    } else {
        rng.gen_range(0..1u64 << bits)
    }
}

impl<T: Topology> QueryAccess for LabeledOracle<T> {
    fn label_bits(&self) -> u32 {
        self.permutation.bits()
    }

    fn query(&self, label: u64) -> Result<Vec<u64>> {
        let node = self.node_of(label)?;
        self.queries.fetch_add(1, Ordering::Relaxed);
        let mut out = self
            .topology
            .neighbors(&node)?
            .iter()
            .map(|w| self.label_of(w))
            .collect::<Result<Vec<_>>>()?;
        out.sort_unstable();
        Ok(out)
    }
}

/// Per-transcript query allowance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryBudget {
    pub limit: u64,
    pub consumed: u64,
}

impl QueryBudget {
    pub fn new(limit: u64) -> Self {
        Self { limit, consumed: 0 }
    }

    pub fn remaining(&self) -> u64 {
        self.limit - self.consumed
    }

    pub fn charge(&mut self) -> Result<()> {
        if self.consumed >= self.limit {
            return Err(Error::BudgetExhausted { limit: self.limit });
        }
        self.consumed += 1;
        Ok(())
    }
}

/// Wraps any oracle so that queries beyond the budget fail.
pub struct Budgeted<'a, Q: QueryAccess + ?Sized> {
    inner: &'a Q,
    budget: RefCell<QueryBudget>,
}

impl<'a, Q: QueryAccess + ?Sized> Budgeted<'a, Q> {
    pub fn new(inner: &'a Q, limit: u64) -> Self {
        Self {
            inner,
            budget: RefCell::new(QueryBudget::new(limit)),
        }
    }

    pub fn budget(&self) -> QueryBudget {
        *self.budget.borrow()
    }
}

impl<Q: QueryAccess + ?Sized> QueryAccess for Budgeted<'_, Q> {
    fn label_bits(&self) -> u32 {
        self.inner.label_bits()
    }

    fn query(&self, label: u64) -> Result<Vec<u64>> {
        self.budget.borrow_mut().charge()?;
        self.inner.query(label)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expander::RegularGraph;
    use crate::graph_model::{GraphParams, MainGraph, StandaloneTree, TreeSchedule, TreeVertex, Vertex};

    fn small_main(padding: f64) -> LabeledOracle<MainGraph> {
        let params = GraphParams::scaled(vec![4, 3], vec![1, 2], 10, 5, padding).unwrap();
        let g = MainGraph::new(params, Arc::new(RegularGraph::petersen())).unwrap();
        LabeledOracle::new(Arc::new(g), OracleKey(99), padding, None).unwrap()
    }

    #[test]
    fn label_bits_selection() {
        assert_eq!(label_bits_for(1, 1.0).unwrap(), 0);
        assert_eq!(label_bits_for(64, 1.0).unwrap(), 6);
        assert_eq!(label_bits_for(65, 1.0).unwrap(), 7);
        assert_eq!(label_bits_for(64, 1.0 / 1024.0).unwrap(), 16);
        assert!(label_bits_for(u64::MAX, 0.5).is_err());
    }

    #[test]
    fn single_vertex_full_ratio() {
        let tree = StandaloneTree::new(TreeSchedule::new(vec![1], vec![0]).unwrap(), 1).unwrap();
        let o = LabeledOracle::new(Arc::new(tree), OracleKey(5), 1.0, None).unwrap();
        assert_eq!(o.label_bits(), 0);
        assert_eq!(o.reveal(0).unwrap(), TreeVertex::Node(crate::graph_model::TreeAddress::root()));
        assert!(o.query(0).unwrap().is_empty());
    }

    #[test]
    fn answers_are_symmetric_and_deterministic() {
        let o = small_main(0.25);
        let again = small_main(0.25);
        let n = o.real_count();
        let mut internal = 0;
        for i in 0..n {
            let v = o.topology().node_at(i).unwrap();
            let x = o.label_of(&v).unwrap();
            assert_eq!(o.reveal(x).unwrap(), v);
            let ans = o.query(x).unwrap();
            assert_eq!(ans, again.query(x).unwrap());
            assert!(ans.windows(2).all(|w| w[0] < w[1]));
            for &y in &ans {
                assert!(o.query(y).unwrap().contains(&x));
            }
            if ans.len() > 1 {
                assert_eq!(ans.len(), 4);
                internal += 1;
            }
        }
        assert!(internal > 0);
        assert!(o.query_count() > n);
    }

    #[test]
    fn padding_labels_are_isolated() {
        let o = small_main(0.25);
        let x = o.label_of_padding(3).unwrap();
        assert!(matches!(o.reveal(x).unwrap(), Vertex::Isolated(3)));
        assert!(o.query(x).unwrap().is_empty());
        let total = 1u64 << o.label_bits();
        let isolated = (0..total)
            .filter(|&x| o.reveal(x).unwrap().is_isolated())
            .count() as u128;
        assert_eq!(isolated, o.padding_count());
        assert!(o.occupied_fraction() <= 0.25);
    }

    #[test]
    fn reveal_is_refused_inside_exploration() {
        let o = small_main(0.5);
        assert!(matches!(in_exploration(|| o.reveal(0)), Err(Error::RevealInExploration)));
        assert!(o.reveal(0).is_ok());
    }

    #[test]
    fn budget_is_enforced() {
        let o = small_main(0.5);
        let b = Budgeted::new(&o, 2);
        assert!(b.query(0).is_ok());
        assert!(b.query(1).is_ok());
        assert!(matches!(b.query(2), Err(Error::BudgetExhausted { limit: 2 })));
        assert_eq!(b.budget().consumed, 2);
    }

    #[test]
    fn key_hex_round_trip() {
        let k = OracleKey(0x0123_4567_89ab_cdef_0011_2233_4455_6677);
        assert_eq!(k.to_string().parse::<OracleKey>().unwrap(), k);
        assert!("zz".parse::<OracleKey>().is_err());
    }
}
