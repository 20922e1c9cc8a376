use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{GraphParams, Magnitude, SizeTable, Topology, TreeAddress, TreeSchedule};
use crate::error::{Error, Result};
use crate::expander::RegularGraph;

/// Which decoration of an expander vertex a tree occupies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DecorationSlot {
    pub level: u32,
    pub copy: u32,
}

/// Hidden, unlabeled identity of a vertex of the main graph.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Vertex {
    Expander(u64),
    Tree {
        anchor: u64,
        slot: DecorationSlot,
        address: TreeAddress,
    },
    Isolated(u64),
}

impl Vertex {
    pub fn is_isolated(&self) -> bool {
        matches!(self, Vertex::Isolated(_))
    }
}

/// The expander decorated with self-similar trees, backed by a concrete expander sample.
#[derive(Debug, Clone)]
pub struct MainGraph {
    params: GraphParams,
    schedule: TreeSchedule,
    expander: Arc<RegularGraph>,
    sizes: SizeTable,
    /// Start of each (level, copy) tree inside an anchor's block, level-major.
    slot_offsets: Vec<Vec<u64>>,
    block: u64,
    count: u64,
}

impl MainGraph {
    pub fn new(params: GraphParams, expander: Arc<RegularGraph>) -> Result<Self> {
        params.validate()?;
        let Magnitude::Exact(size) = params.expander_size else {
            return Err(Error::TooLarge("paper-scale expander cannot be materialized".into()));
        };
        if expander.vertex_count() as u64 != size || expander.degree() as u64 != params.expander_degree {
            return Err(Error::InvalidParams(format!(
                "expander is {}-regular on {} vertices, params expect {}-regular on {size}",
                expander.degree(),
                expander.vertex_count(),
                params.expander_degree
            )));
        }
        let schedule = params.tree_schedule();
        let sizes = SizeTable::new(&schedule)?;
        let too_large = || Error::TooLarge("main graph has more than 2^64 vertices".into());
        let mut slot_offsets = Vec::with_capacity(params.levels.saturating_sub(1));
        let mut block: u64 = 0;
        for (k, beta) in params.decorations() {
            let tree = u64::try_from(sizes.full(k)).map_err(|_| too_large())?;
            let mut offsets = Vec::with_capacity(beta as usize);
            for _ in 0..beta {
                offsets.push(block);
                block = block.checked_add(tree).ok_or_else(too_large)?;
            }
            slot_offsets.push(offsets);
        }
        let count = block
            .checked_add(1)
            .and_then(|b| b.checked_mul(size))
            .ok_or_else(too_large)?;
        Ok(Self {
            params,
            schedule,
            expander,
            sizes,
            slot_offsets,
            block,
            count,
        })
    }

    pub fn params(&self) -> &GraphParams {
        &self.params
    }

    pub fn schedule(&self) -> &TreeSchedule {
        &self.schedule
    }

    pub fn expander(&self) -> &RegularGraph {
        &self.expander
    }

    pub fn expander_size(&self) -> u64 {
        self.expander.vertex_count() as u64
    }

    /// Vertices in the trees hung on a single expander vertex.
    pub fn trees_per_anchor(&self) -> u64 {
        self.block
    }

    pub fn validate_vertex(&self, v: &Vertex) -> Result<()> {
        match v {
            Vertex::Expander(u) => {
                if *u >= self.expander_size() {
                    return Err(Error::InvalidVertex(format!("expander index {u} out of range")));
                }
            }
            Vertex::Tree { anchor, slot, address } => {
                if *anchor >= self.expander_size() {
                    return Err(Error::InvalidVertex(format!("anchor {anchor} out of range")));
                }
                let level = slot.level as usize;
                if level == 0 || level >= self.params.levels {
                    return Err(Error::InvalidVertex(format!(
                        "decoration level {level} outside 1..{}",
                        self.params.levels
                    )));
                }
                if u64::from(slot.copy) >= self.schedule.decoration_count(level) {
                    return Err(Error::InvalidVertex(format!(
                        "copy {} out of range at level {level}",
                        slot.copy
                    )));
                }
                self.schedule.locate(level, address)?;
            }
            Vertex::Isolated(_) => {}
        }
        Ok(())
    }

    /// Closest expander vertex: the vertex itself, or the anchor of its tree.
    pub fn e_projection(&self, v: &Vertex) -> Result<u64> {
        match v {
            Vertex::Expander(u) => Ok(*u),
            Vertex::Tree { anchor, .. } => Ok(*anchor),
            Vertex::Isolated(_) => Err(Error::IsolatedVertex),
        }
    }

    /// Number of expander vertices on a shortest `u`-`v` path, endpoints included;
    /// zero when both lie in the same attached tree.
    pub fn dist_e(&self, u: &Vertex, v: &Vertex) -> Result<u64> {
        self.validate_vertex(u)?;
        self.validate_vertex(v)?;
        if let (
            Vertex::Tree { anchor: a1, slot: s1, .. },
            Vertex::Tree { anchor: a2, slot: s2, .. },
        ) = (u, v)
        {
            if a1 == a2 && s1 == s2 {
                return Ok(0);
            }
        }
        let a = self.e_projection(u)?;
        let b = self.e_projection(v)?;
        let hops = self
            .expander
            .distance(a as usize, b as usize)
            .ok_or_else(|| Error::InvalidParams("expander is disconnected".into()))?;
        Ok(hops as u64 + 1)
    }

    /// `min_{u in set} dist_E(u, v)`; isolated members of the set are skipped.
    pub fn dist_e_to_set(&self, set: &[Vertex], v: &Vertex) -> Result<Option<u64>> {
        let mut best: Option<u64> = None;
        for u in set.iter().filter(|u| !u.is_isolated()) {
            let d = self.dist_e(u, v)?;
            best = Some(best.map_or(d, |b| b.min(d)));
        }
        Ok(best)
    }
}

impl Topology for MainGraph {
    type Node = Vertex;

    fn node_count(&self) -> u64 {
        self.count
    }

    fn node_at(&self, index: u64) -> Result<Vertex> {
        let n_e = self.expander_size();
        if index < n_e {
            return Ok(Vertex::Expander(index));
        }
        if index >= self.count {
            return Ok(Vertex::Isolated(index - self.count));
        }
        let rest = index - n_e;
        let anchor = rest / self.block;
        let within = rest % self.block;
        for (li, offsets) in self.slot_offsets.iter().enumerate() {
            let level = li + 1;
            let tree = self.sizes.full(level) as u64;
            for (copy, &start) in offsets.iter().enumerate() {
                if within >= start && within < start + tree {
                    let address = self
                        .sizes
                        .unrank(&self.schedule, level, u128::from(within - start))?;
                    return Ok(Vertex::Tree {
                        anchor,
                        slot: DecorationSlot {
                            level: level as u32,
                            copy: copy as u32,
                        },
                        address,
                    });
                }
            }
        }
        unreachable!("index {index} not covered by the anchor block")
    }

    fn index_of(&self, node: &Vertex) -> Result<Option<u64>> {
        self.validate_vertex(node)?;
        Ok(match node {
            Vertex::Expander(u) => Some(*u),
            Vertex::Tree { anchor, slot, address } => {
                let level = slot.level as usize;
                let start = self.slot_offsets[level - 1][slot.copy as usize];
                let rank = self.sizes.rank(&self.schedule, level, address) as u64;
                Some(self.expander_size() + anchor * self.block + start + rank)
            }
            Vertex::Isolated(_) => None,
        })
    }

    fn neighbors(&self, node: &Vertex) -> Result<Vec<Vertex>> {
        self.validate_vertex(node)?;
        match node {
            Vertex::Expander(u) => {
                let mut out: Vec<Vertex> = self
                    .expander
                    .neighbors(*u as usize)
                    .iter()
                    .map(|&w| Vertex::Expander(u64::from(w)))
                    .collect();
                for (k, beta) in self.params.decorations() {
                    for copy in 0..beta {
                        out.push(Vertex::Tree {
                            anchor: *u,
                            slot: DecorationSlot {
                                level: k as u32,
                                copy: copy as u32,
                            },
                            address: TreeAddress::root(),
                        });
                    }
                }
                Ok(out)
            }
            Vertex::Tree { anchor, slot, address } => {
                let (children, _) = self.schedule.tree_children(slot.level as usize, address)?;
                let mut out = Vec::with_capacity(children.len() + 1);
                out.push(match address.parent() {
                    Some(parent) => Vertex::Tree {
                        anchor: *anchor,
                        slot: *slot,
                        address: parent,
                    },
                    None => Vertex::Expander(*anchor),
                });
                out.extend(children.into_iter().map(|address| Vertex::Tree {
                    anchor: *anchor,
                    slot: *slot,
                    address,
                }));
                Ok(out)
            }
            Vertex::Isolated(_) => Ok(Vec::new()),
        }
    }

    fn padding_node(&self, offset: u64) -> Vertex {
        Vertex::Isolated(offset)
    }

    fn padding_offset(&self, node: &Vertex) -> Option<u64> {
        match node {
            Vertex::Isolated(i) => Some(*i),
            _ => None,
        }
    }
}
