//! Self-similar decorated trees, addressed without materialization.
//!
//! A tree of type `k` is a perfect core of branching `d_k - 1` and depth `l_k`
//! in which every internal core node additionally carries `d_i - d_{i+1}`
//! decorations of type `i` for every `i < k`. A vertex is identified by the
//! sequence of hops taken from the root; children are listed core-first, then
//! decorations by descending level, which also fixes the preorder used for
//! vertex enumeration.

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Degree and depth schedules `(d_1..d_K)`, `(l_1..l_K)` shared by all tree types.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeSchedule {
    degrees: Vec<u64>,
    depths: Vec<u64>,
}

impl TreeSchedule {
    pub fn new(degrees: Vec<u64>, depths: Vec<u64>) -> Result<Self> {
        if degrees.is_empty() || degrees.len() != depths.len() {
            return Err(Error::InvalidParams(format!(
                "schedules must be non-empty and of equal length (got {} degrees, {} depths)",
                degrees.len(),
                depths.len()
            )));
        }
        if degrees.contains(&0) {
            return Err(Error::InvalidParams("degrees must be positive".into()));
        }
        if degrees.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidParams(format!(
                "degree schedule must be non-increasing: {degrees:?}"
            )));
        }
        if degrees.len() > u32::MAX as usize {
            return Err(Error::InvalidParams("too many levels".into()));
        }
        Ok(Self { degrees, depths })
    }

    /// Number of tree types described by the schedule.
    pub fn levels(&self) -> usize {
        self.degrees.len()
    }

    pub fn degrees(&self) -> &[u64] {
        &self.degrees
    }

    pub fn depths(&self) -> &[u64] {
        &self.depths
    }

    /// `d_level`, 1-based.
    pub fn degree(&self, level: usize) -> u64 {
        self.degrees[level - 1]
    }

    /// `l_level`, 1-based.
    pub fn depth(&self, level: usize) -> u64 {
        self.depths[level - 1]
    }

    /// Core children of an internal node in a segment of type `level`.
    pub fn core_children(&self, level: usize) -> u64 {
        self.degree(level) - 1
    }

    /// Number of type-`level` decorations hung on each internal node of a higher segment.
    pub fn decoration_count(&self, level: usize) -> u64 {
        if level >= self.levels() {
            0
        } else {
            self.degree(level) - self.degree(level + 1)
        }
    }

    /// Degree bound for every tree type: internal non-root vertices have degree `d_1`.
    pub fn max_degree(&self) -> u64 {
        self.degrees[0]
    }

    pub(crate) fn check_level(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.levels() {
            return Err(Error::InvalidParams(format!(
                "tree type {k} outside 1..={}",
                self.levels()
            )));
        }
        Ok(())
    }

    /// Hops from an internal node of a type-`segment` core, in canonical order.
    pub fn child_hops(&self, segment: usize) -> impl Iterator<Item = Hop> + '_ {
        let core = (0..self.core_children(segment)).map(|c| Hop::Core(c as u32));
        let decorations = (1..segment).rev().flat_map(move |level| {
            (0..self.decoration_count(level)).map(move |slot| Hop::Decoration {
                level: level as u32,
                slot: slot as u32,
            })
        });
        core.chain(decorations)
    }

    /// Resolves an address inside a tree of type `k`.
    pub fn locate(&self, k: usize, address: &TreeAddress) -> Result<NodePosition> {
        self.check_level(k)?;
        let mut segment = k;
        let mut core_depth = 0u64;
        let mut segment_entry = None;
        for (idx, hop) in address.hops().iter().enumerate() {
            if core_depth >= self.depth(segment) {
                return Err(Error::InvalidAddress(format!(
                    "hop {idx} descends below a leaf"
                )));
            }
            match *hop {
                Hop::Core(c) => {
                    if u64::from(c) >= self.core_children(segment) {
                        return Err(Error::InvalidAddress(format!(
                            "core child {c} out of range in segment {segment}"
                        )));
                    }
                    core_depth += 1;
                }
                Hop::Decoration { level, slot } => {
                    let level = level as usize;
                    if level == 0 || level >= segment {
                        return Err(Error::InvalidAddress(format!(
                            "decoration level {level} not below segment {segment}"
                        )));
                    }
                    if u64::from(slot) >= self.decoration_count(level) {
                        return Err(Error::InvalidAddress(format!(
                            "decoration slot {slot} out of range at level {level}"
                        )));
                    }
                    segment = level;
                    core_depth = 0;
                    segment_entry = Some(idx);
                }
            }
        }
        Ok(NodePosition {
            tree_type: k,
            segment,
            core_depth,
            segment_entry,
        })
    }

    pub fn classify(&self, k: usize, address: &TreeAddress) -> Result<NodeKind> {
        Ok(self.locate(k, address)?.kind(self))
    }

    /// Children of `address` in a tree of type `k`, plus the node's classification.
    pub fn tree_children(
        &self,
        k: usize,
        address: &TreeAddress,
    ) -> Result<(Vec<TreeAddress>, NodeKind)> {
        let pos = self.locate(k, address)?;
        let kind = pos.kind(self);
        if matches!(kind, NodeKind::Leaf { .. }) {
            return Ok((Vec::new(), kind));
        }
        let children = self
            .child_hops(pos.segment)
            .map(|hop| address.child(hop))
            .collect();
        Ok((children, kind))
    }

    /// Exact vertex count of the type-`k` tree.
    pub fn count_vertices(&self, k: usize) -> Result<BigUint> {
        self.check_level(k)?;
        let mut full: Vec<BigUint> = Vec::with_capacity(k);
        for j in 1..=k {
            let mut b = BigUint::from(1u32);
            for (i, size) in full.iter().enumerate() {
                b += size * self.decoration_count(i + 1);
            }
            full.push(segment_size_closed_form(
                self.core_children(j),
                self.depth(j),
                &b,
            ));
        }
        Ok(full.pop().expect("k >= 1"))
    }
}

/// Closed form of `s(r) = a*s(r-1) + b`, `s(0) = 1`.
fn segment_size_closed_form(a: u64, r: u64, b: &BigUint) -> BigUint {
    if r == 0 {
        return BigUint::from(1u32);
    }
    match a {
        0 => b.clone(),
        1 => BigUint::from(1u32) + b * r,
        _ => {
            let exp = u32::try_from(r).expect("depth fits in u32");
            let ar = BigUint::from(a).pow(exp);
            let geometric = (&ar - 1u32) / (a - 1);
            ar + b * geometric
        }
    }
}

/// One step away from the root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hop {
    Core(u32),
    Decoration { level: u32, slot: u32 },
}

/// Root-relative path identifying a tree vertex.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TreeAddress(Vec<Hop>);

impl TreeAddress {
    pub fn root() -> Self {
        Self(Vec::new())
    }

    pub fn from_hops(hops: Vec<Hop>) -> Self {
        Self(hops)
    }

    pub fn hops(&self) -> &[Hop] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn child(&self, hop: Hop) -> Self {
        let mut hops = Vec::with_capacity(self.0.len() + 1);
        hops.extend_from_slice(&self.0);
        hops.push(hop);
        Self(hops)
    }

    pub fn parent(&self) -> Option<Self> {
        if self.0.is_empty() {
            None
        } else {
            Some(Self(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    /// Prefix made of the first `len` hops.
    pub fn prefix(&self, len: usize) -> Self {
        Self(self.0[..len].to_vec())
    }
}

/// Where an address lands: which core segment, and how deep inside it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodePosition {
    pub tree_type: usize,
    pub segment: usize,
    pub core_depth: u64,
    /// Index of the decoration hop that entered the current segment, if any.
    pub segment_entry: Option<usize>,
}

impl NodePosition {
    pub fn kind(&self, schedule: &TreeSchedule) -> NodeKind {
        if self.core_depth >= schedule.depth(self.segment) {
            NodeKind::Leaf {
                level: (self.tree_type - self.segment) as u32,
            }
        } else {
            NodeKind::Internal
        }
    }

    pub fn remaining_depth(&self, schedule: &TreeSchedule) -> u64 {
        schedule.depth(self.segment) - self.core_depth
    }
}

/// Internal node, or a leaf tagged with its decoration level (0 for the outer core).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Internal,
    Leaf { level: u32 },
}

/// Subtree sizes `s_j(r)` for machine-sized instances; used for preorder ranking.
#[derive(Debug, Clone)]
pub(crate) struct SizeTable {
    sizes: Vec<Vec<u128>>,
}

impl SizeTable {
    pub(crate) fn new(schedule: &TreeSchedule) -> Result<Self> {
        let too_large = || Error::TooLarge("tree vertex count exceeds 128 bits".into());
        let mut sizes: Vec<Vec<u128>> = Vec::with_capacity(schedule.levels());
        for j in 1..=schedule.levels() {
            let mut extra: u128 = 1;
            for i in 1..j {
                let full = *sizes[i - 1].last().expect("non-empty");
                let add = full
                    .checked_mul(u128::from(schedule.decoration_count(i)))
                    .ok_or_else(too_large)?;
                extra = extra.checked_add(add).ok_or_else(too_large)?;
            }
            let depth = schedule.depth(j);
            if depth > 1 << 24 {
                return Err(Error::TooLarge(format!("depth {depth} too large to tabulate")));
            }
            let a = u128::from(schedule.core_children(j));
            let mut col = Vec::with_capacity(depth as usize + 1);
            col.push(1u128);
            for r in 1..=depth as usize {
                let v = a
                    .checked_mul(col[r - 1])
                    .and_then(|v| v.checked_add(extra))
                    .ok_or_else(too_large)?;
                col.push(v);
            }
            sizes.push(col);
        }
        Ok(Self { sizes })
    }

    pub(crate) fn segment(&self, level: usize, remaining: u64) -> u128 {
        self.sizes[level - 1][remaining as usize]
    }

    pub(crate) fn full(&self, level: usize) -> u128 {
        *self.sizes[level - 1].last().expect("non-empty")
    }

    /// Preorder index of a (validated) address inside a tree of type `k`.
    pub(crate) fn rank(&self, schedule: &TreeSchedule, k: usize, address: &TreeAddress) -> u128 {
        let mut segment = k;
        let mut depth = 0u64;
        let mut idx: u128 = 0;
        for hop in address.hops() {
            let below = self.segment(segment, schedule.depth(segment) - depth - 1);
            idx += 1;
            match *hop {
                Hop::Core(c) => {
                    idx += u128::from(c) * below;
                    depth += 1;
                }
                Hop::Decoration { level, slot } => {
                    let level = level as usize;
                    idx += u128::from(schedule.core_children(segment)) * below;
                    for skipped in (level + 1..segment).rev() {
                        idx += u128::from(schedule.decoration_count(skipped)) * self.full(skipped);
                    }
                    idx += u128::from(slot) * self.full(level);
                    segment = level;
                    depth = 0;
                }
            }
        }
        idx
    }

    /// Inverse of [`SizeTable::rank`].
    pub(crate) fn unrank(&self, schedule: &TreeSchedule, k: usize, index: u128) -> Result<TreeAddress> {
        if index >= self.full(k) {
            return Err(Error::InvalidAddress(format!("preorder index {index} out of range")));
        }
        let mut segment = k;
        let mut depth = 0u64;
        let mut rem = index;
        let mut hops = Vec::new();
        'descend: while rem > 0 {
            rem -= 1;
            let below = self.segment(segment, schedule.depth(segment) - depth - 1);
            let core_block = u128::from(schedule.core_children(segment)) * below;
            if rem < core_block {
                hops.push(Hop::Core((rem / below) as u32));
                rem %= below;
                depth += 1;
                continue;
            }
            rem -= core_block;
            for level in (1..segment).rev() {
                let full = self.full(level);
                let block = u128::from(schedule.decoration_count(level)) * full;
                if rem < block {
                    hops.push(Hop::Decoration {
                        level: level as u32,
                        slot: (rem / full) as u32,
                    });
                    rem %= full;
                    segment = level;
                    depth = 0;
                    continue 'descend;
                }
                rem -= block;
            }
            unreachable!("preorder index exceeded subtree size");
        }
        Ok(TreeAddress(hops))
    }
}
