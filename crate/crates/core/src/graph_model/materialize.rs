use std::collections::VecDeque;

use super::Topology;
use crate::error::{Error, Result};

/// Explicit adjacency lists for a small instance, in canonical vertex order.
#[derive(Debug, Clone)]
pub struct Materialized<N> {
    pub nodes: Vec<N>,
    pub adjacency: Vec<Vec<usize>>,
}

/// Builds every non-isolated vertex and its neighbor list; refuses instances above `limit`.
pub fn materialize<T: Topology>(topology: &T, limit: u64) -> Result<Materialized<T::Node>> {
    let count = topology.node_count();
    if count > limit {
        return Err(Error::TooLarge(format!("{count} vertices exceeds limit {limit}")));
    }
    let mut nodes = Vec::with_capacity(count as usize);
    let mut adjacency = Vec::with_capacity(count as usize);
    for i in 0..count {
        let node = topology.node_at(i)?;
        let mut row = Vec::new();
        for w in topology.neighbors(&node)? {
            let j = topology
                .index_of(&w)?
                .ok_or_else(|| Error::InvalidVertex(format!("neighbor {w:?} is padding")))?;
            row.push(j as usize);
        }
        adjacency.push(row);
        nodes.push(node);
    }
    Ok(Materialized { nodes, adjacency })
}

impl<N> Materialized<N> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Hop distances from `src` (`None` when unreachable).
    pub fn bfs(&self, src: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.len()];
        dist[src] = Some(0);
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].expect("queued vertices are reached");
            for &w in &self.adjacency[u] {
                if dist[w].is_none() {
                    dist[w] = Some(du + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// BFS that also records one predecessor per vertex, for path reconstruction.
    pub fn bfs_parents(&self, src: usize) -> Vec<Option<usize>> {
        let mut parent = vec![None; self.len()];
        let mut seen = vec![false; self.len()];
        seen[src] = true;
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            for &w in &self.adjacency[u] {
                if !seen[w] {
                    seen[w] = true;
                    parent[w] = Some(u);
                    queue.push_back(w);
                }
            }
        }
        parent
    }
}
