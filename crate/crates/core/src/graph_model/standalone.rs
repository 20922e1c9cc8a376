use serde::{Deserialize, Serialize};

use super::{NodeKind, SizeTable, Topology, TreeAddress, TreeSchedule};
use crate::error::{Error, Result};

/// Vertex of a standalone tree oracle.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TreeVertex {
    Node(TreeAddress),
    Isolated(u64),
}

/// A single type-`k` self-similar tree, explored from its root.
#[derive(Debug, Clone)]
pub struct StandaloneTree {
    schedule: TreeSchedule,
    level: usize,
    sizes: SizeTable,
    count: u64,
}

impl StandaloneTree {
    pub fn new(schedule: TreeSchedule, level: usize) -> Result<Self> {
        schedule.check_level(level)?;
        let sizes = SizeTable::new(&schedule)?;
        let count = u64::try_from(sizes.full(level))
            .map_err(|_| Error::TooLarge("tree has more than 2^64 vertices".into()))?;
        Ok(Self {
            schedule,
            level,
            sizes,
            count,
        })
    }

    pub fn schedule(&self) -> &TreeSchedule {
        &self.schedule
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn root(&self) -> TreeVertex {
        TreeVertex::Node(TreeAddress::root())
    }

    /// Leaf/internal classification plus, for decoration leaves, the preorder
    /// index of the decoration root the leaf belongs to.
    pub fn classify(&self, address: &TreeAddress) -> Result<(NodeKind, Option<u64>)> {
        let pos = self.schedule.locate(self.level, address)?;
        let kind = pos.kind(&self.schedule);
        let decoration = match (kind, pos.segment_entry) {
            (NodeKind::Leaf { level }, Some(entry)) if level > 0 => {
                let root = address.prefix(entry + 1);
                Some(self.sizes.rank(&self.schedule, self.level, &root) as u64)
            }
            _ => None,
        };
        Ok((kind, decoration))
    }
}

impl Topology for StandaloneTree {
    type Node = TreeVertex;

    fn node_count(&self) -> u64 {
        self.count
    }

    fn node_at(&self, index: u64) -> Result<TreeVertex> {
        if index >= self.count {
            return Ok(TreeVertex::Isolated(index - self.count));
        }
        Ok(TreeVertex::Node(self.sizes.unrank(
            &self.schedule,
            self.level,
            u128::from(index),
        )?))
    }

    fn index_of(&self, node: &TreeVertex) -> Result<Option<u64>> {
        match node {
            TreeVertex::Node(a) => {
                self.schedule.locate(self.level, a)?;
                Ok(Some(self.sizes.rank(&self.schedule, self.level, a) as u64))
            }
            TreeVertex::Isolated(_) => Ok(None),
        }
    }

    fn neighbors(&self, node: &TreeVertex) -> Result<Vec<TreeVertex>> {
        match node {
            TreeVertex::Node(a) => {
                let (children, _) = self.schedule.tree_children(self.level, a)?;
                let mut out = Vec::with_capacity(children.len() + 1);
                if let Some(p) = a.parent() {
                    out.push(TreeVertex::Node(p));
                }
                out.extend(children.into_iter().map(TreeVertex::Node));
                Ok(out)
            }
            TreeVertex::Isolated(_) => Ok(Vec::new()),
        }
    }

    fn padding_node(&self, offset: u64) -> TreeVertex {
        TreeVertex::Isolated(offset)
    }

    fn padding_offset(&self, node: &TreeVertex) -> Option<u64> {
        match node {
            TreeVertex::Isolated(i) => Some(*i),
            _ => None,
        }
    }
}
