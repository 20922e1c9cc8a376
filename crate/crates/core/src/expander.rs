//! Random regular graphs standing in for the expander family: configuration-model
//! sampling, girth, top-two adjacency eigenvalues, and certification.

use std::collections::{HashSet, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dense_top, lanczos_top, SparseSymmetric};

/// Largest graph whose gap is computed densely; larger ones go through Lanczos.
pub const GAP_DENSE_LIMIT: usize = 256;

/// Simple `d`-regular graph with sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegularGraph {
    degree: usize,
    adjacency: Vec<Vec<u32>>,
    seed: u64,
}

impl RegularGraph {
    /// Builds from an edge list, checking simplicity and regularity.
    pub fn from_edges(n: usize, degree: usize, edges: &[(u32, u32)], seed: u64) -> Result<Self> {
        if n > u32::MAX as usize {
            return Err(Error::TooLarge(format!("{n} vertices")));
        }
        let mut adjacency = vec![Vec::with_capacity(degree); n];
        let mut seen = HashSet::with_capacity(edges.len());
        for &(u, v) in edges {
            if u as usize >= n || v as usize >= n {
                return Err(Error::InvalidParams(format!("edge ({u}, {v}) out of range")));
            }
            if u == v {
                return Err(Error::InvalidParams(format!("self-loop at {u}")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::InvalidParams(format!("repeated edge ({u}, {v})")));
            }
            adjacency[u as usize].push(v);
            adjacency[v as usize].push(u);
        }
        if let Some((i, row)) = adjacency.iter().enumerate().find(|(_, r)| r.len() != degree) {
            return Err(Error::InvalidParams(format!(
                "vertex {i} has degree {}, expected {degree}",
                row.len()
            )));
        }
        for row in &mut adjacency {
            row.sort_unstable();
        }
        Ok(Self {
            degree,
            adjacency,
            seed,
        })
    }

    pub fn petersen() -> Self {
        let mut edges = Vec::new();
        for i in 0..5u32 {
            edges.push((i, (i + 1) % 5));
            edges.push((i, i + 5));
            edges.push((5 + i, 5 + (i + 2) % 5));
        }
        Self::from_edges(10, 3, &edges, 0).expect("Petersen graph is cubic")
    }

    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidParams("a cycle needs at least 3 vertices".into()));
        }
        let edges: Vec<(u32, u32)> = (0..n as u32).map(|i| (i, (i + 1) % n as u32)).collect();
        Self::from_edges(n, 2, &edges, 0)
    }

    pub fn complete(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParams("K_n needs n >= 2".into()));
        }
        let edges: Vec<(u32, u32)> = (0..n as u32)
            .flat_map(|u| (u + 1..n as u32).map(move |v| (u, v)))
            .collect();
        Self::from_edges(n, n - 1, &edges, 0)
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn neighbors(&self, u: usize) -> &[u32] {
        &self.adjacency[u]
    }

    pub fn adjacency_lists(&self) -> Vec<Vec<usize>> {
        self.adjacency
            .iter()
            .map(|row| row.iter().map(|&v| v as usize).collect())
            .collect()
    }

    /// Edges `(u, v)` with `u < v`, lexicographically sorted.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, row)| {
                let u = u as u32;
                row.iter().filter(move |&&v| v > u).map(move |&v| (u, v))
            })
            .collect()
    }

    /// BFS hop distances from `src`.
    pub fn bfs(&self, src: usize) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.vertex_count()];
        dist[src] = Some(0);
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].expect("queued");
            for &w in &self.adjacency[u] {
                if dist[w as usize].is_none() {
                    dist[w as usize] = Some(du + 1);
                    queue.push_back(w as usize);
                }
            }
        }
        dist
    }

    pub fn distance(&self, a: usize, b: usize) -> Option<u32> {
        if a == b {
            return Some(0);
        }
        self.bfs(a)[b]
    }

    pub fn is_connected(&self) -> bool {
        self.vertex_count() == 0 || self.bfs(0).iter().all(Option::is_some)
    }

    /// Shortest cycle length, `None` for forests.
    pub fn girth(&self) -> Option<u32> {
        let n = self.vertex_count();
        let mut best: Option<u32> = None;
        let mut dist = vec![u32::MAX; n];
        let mut parent = vec![u32::MAX; n];
        let mut touched = Vec::new();
        for root in 0..n {
            for &t in &touched {
                dist[t] = u32::MAX;
                parent[t] = u32::MAX;
            }
            touched.clear();
            dist[root] = 0;
            touched.push(root);
            let mut queue = VecDeque::from([root]);
            'bfs: while let Some(u) = queue.pop_front() {
                let du = dist[u];
                // no cycle through root found later can beat the current best
                if let Some(b) = best {
                    if 2 * du + 1 >= b {
                        break;
                    }
                }
                for &w in &self.adjacency[u] {
                    let w = w as usize;
                    if dist[w] == u32::MAX {
                        dist[w] = du + 1;
                        parent[w] = u as u32;
                        touched.push(w);
                        queue.push_back(w);
                    } else if parent[u] != w as u32 {
                        let len = du + dist[w] + 1;
                        if best.is_none_or(|b| len < b) {
                            best = Some(len);
                        }
                        if len == 3 {
                            break 'bfs;
                        }
                    }
                }
            }
        }
        best
    }

    /// Two largest adjacency eigenvalues with eigenvector residuals.
    pub fn spectral_gap(&self) -> Result<SpectralPair> {
        let n = self.vertex_count();
        if n < 2 {
            return Err(Error::InvalidParams("need at least two vertices".into()));
        }
        if !self.is_connected() {
            return Err(Error::InvalidParams("graph is disconnected".into()));
        }
        let op = SparseSymmetric::from_adjacency(&self.adjacency_lists());
        let pairs = if n <= GAP_DENSE_LIMIT {
            dense_top(&op.to_dense(), 2)
        } else {
            lanczos_top(&op, 2, 1e-10, 2000, self.seed)?
        };
        let residual = pairs.iter().map(|p| p.residual).fold(0.0, f64::max);
        if residual > 1e-6 {
            return Err(Error::NonConvergence { residual });
        }
        Ok(SpectralPair {
            lambda1: pairs[0].value,
            lambda2: pairs[1].value,
            residual,
        })
    }

    /// Same graph with vertex `i` renamed to `perm[i]`.
    pub fn permuted(&self, perm: &[u32]) -> Result<Self> {
        let edges: Vec<(u32, u32)> = self
            .edges()
            .into_iter()
            .map(|(u, v)| (perm[u as usize], perm[v as usize]))
            .collect();
        Self::from_edges(self.vertex_count(), self.degree, &edges, self.seed)
    }

    /// Plain-text edge list: header `N d seed`, then sorted `u v` lines with `u < v`.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("{} {} {}\n", self.vertex_count(), self.degree, self.seed);
        for (u, v) in self.edges() {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }

    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty edge list".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let [n, d, seed] = fields[..] else {
            return Err(Error::Parse(format!("bad header {header:?}")));
        };
        let parse = |s: &str| s.parse::<u64>().map_err(|e| Error::Parse(format!("{s:?}: {e}")));
        let (n, d, seed) = (parse(n)? as usize, parse(d)? as usize, parse(seed)?);
        let mut edges = Vec::with_capacity(n * d / 2);
        for line in lines {
            let mut it = line.split_whitespace();
            let (Some(u), Some(v), None) = (it.next(), it.next(), it.next()) else {
                return Err(Error::Parse(format!("bad edge line {line:?}")));
            };
            edges.push((parse(u)? as u32, parse(v)? as u32));
        }
        Self::from_edges(n, d, &edges, seed)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_edge_list())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_edge_list(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralPair {
    pub lambda1: f64,
    pub lambda2: f64,
    pub residual: f64,
}

impl SpectralPair {
    pub fn gap(&self) -> f64 {
        self.lambda1 - self.lambda2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerOptions {
    /// Whole-graph rejections before giving up (or switching, if enabled).
    pub max_rejections: u64,
    /// Repair a rejected pairing with edge switches instead of failing; the result is not uniform.
    pub switching_fallback: bool,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        Self {
            max_rejections: 100_000,
            switching_fallback: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SampledGraph {
    pub graph: RegularGraph,
    pub attempts: u64,
    pub uniform: bool,
}

/// Uniform simple `d`-regular graph by the pairing model with whole-graph rejection.
pub fn sample_regular_graph(n: usize, d: usize, seed: u64) -> Result<RegularGraph> {
    Ok(sample_regular_graph_with(n, d, seed, SamplerOptions::default())?.graph)
}

pub fn sample_regular_graph_with(
    n: usize,
    d: usize,
    seed: u64,
    options: SamplerOptions,
) -> Result<SampledGraph> {
    if d == 0 || d >= n || !(n * d).is_multiple_of(2) {
        return Err(Error::InvalidParams(format!(
            "no simple {d}-regular graph on {n} vertices"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stubs: Vec<u32> = (0..n as u32)
        .flat_map(|v| std::iter::repeat_n(v, d))
        .collect();
    for attempt in 1..=options.max_rejections {
        stubs.shuffle(&mut rng);
        let pairs: Vec<(u32, u32)> = stubs.chunks_exact(2).map(|c| (c[0], c[1])).collect();
        if is_simple(&pairs) {
            return Ok(SampledGraph {
                graph: RegularGraph::from_edges(n, d, &pairs, seed)?,
                attempts: attempt,
                uniform: true,
            });
        }
        if attempt == options.max_rejections && options.switching_fallback {
            let repaired = repair_by_switching(pairs, &mut rng)?;
            return Ok(SampledGraph {
                graph: RegularGraph::from_edges(n, d, &repaired, seed)?,
                attempts: attempt,
                uniform: false,
            });
        }
    }
    Err(Error::SamplingBudgetExhausted {
        attempts: options.max_rejections,
    })
}

fn is_simple(pairs: &[(u32, u32)]) -> bool {
    let mut seen = HashSet::with_capacity(pairs.len());
    pairs
        .iter()
        .all(|&(u, v)| u != v && seen.insert((u.min(v), u.max(v))))
}

fn repair_by_switching(mut pairs: Vec<(u32, u32)>, rng: &mut ChaCha8Rng) -> Result<Vec<(u32, u32)>> {
    let key = |(u, v): (u32, u32)| (u.min(v), u.max(v));
    let limit = 1000 * pairs.len() as u64 + 10_000;
    for _ in 0..limit {
        let mut counts = std::collections::HashMap::with_capacity(pairs.len());
        for &p in &pairs {
            *counts.entry(key(p)).or_insert(0u32) += 1;
        }
        let bad = pairs
            .iter()
            .position(|&(u, v)| u == v || counts[&key((u, v))] > 1);
        let Some(i) = bad else {
            return Ok(pairs);
        };
        let j = rng.gen_range(0..pairs.len());
        if i == j {
            continue;
        }
        let (a, b) = pairs[i];
        let (c, e) = pairs[j];
        let (x, y) = if rng.gen() { ((a, c), (b, e)) } else { ((a, e), (b, c)) };
        if x.0 == x.1 || y.0 == y.1 || counts.contains_key(&key(x)) || counts.contains_key(&key(y)) {
            continue;
        }
        pairs[i] = x;
        pairs[j] = y;
    }
    Err(Error::SamplingBudgetExhausted { attempts: limit })
}

/// Acceptance thresholds for a sampled expander.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub gap_min: f64,
    pub girth_min: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpanderCertificate {
    /// `None` encodes infinite girth.
    pub girth: Option<u32>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub gap: f64,
    pub residual: f64,
    pub attempts: u64,
    pub uniform: bool,
    pub accepted: bool,
    pub rejection: Option<String>,
}

/// Measures girth and gap and checks them against `thresholds`.
pub fn certify_expander(graph: &RegularGraph, thresholds: Thresholds) -> Result<ExpanderCertificate> {
    let girth = graph.girth();
    let pair = graph.spectral_gap()?;
    let gap = pair.gap();
    let mut reasons = Vec::new();
    if gap < thresholds.gap_min {
        reasons.push(format!("gap {gap:.6} < {}", thresholds.gap_min));
    }
    if girth.is_some_and(|g| g < thresholds.girth_min) {
        reasons.push(format!("girth {} < {}", girth.unwrap_or(0), thresholds.girth_min));
    }
    Ok(ExpanderCertificate {
        girth,
        lambda1: pair.lambda1,
        lambda2: pair.lambda2,
        gap,
        residual: pair.residual,
        attempts: 1,
        uniform: true,
        accepted: reasons.is_empty(),
        rejection: (!reasons.is_empty()).then(|| reasons.join("; ")),
    })
}

fn girth_rejection(girth: u32, thresholds: Thresholds) -> ExpanderCertificate {
    ExpanderCertificate {
        girth: Some(girth),
        lambda1: f64::NAN,
        lambda2: f64::NAN,
        gap: f64::NAN,
        residual: f64::NAN,
        attempts: 1,
        uniform: true,
        accepted: false,
        rejection: Some(format!("girth {girth} < {}", thresholds.girth_min)),
    }
}

/// Per-attempt seed derived from a master seed.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.next_u64()
}

/// Samples with seeds `derive_seed(seed, i)` until one passes certification.
///
/// Attempts run in parallel batches; the lowest accepted index wins, so the result
/// does not depend on the thread count.
pub fn generate_certified(
    n: usize,
    d: usize,
    seed: u64,
    thresholds: Thresholds,
    max_attempts: u64,
    options: SamplerOptions,
) -> Result<(RegularGraph, ExpanderCertificate)> {
    let batch = rayon::current_num_threads().max(1) as u64;
    let mut last_reason = String::from("no attempts made");
    let mut start = 0;
    while start < max_attempts {
        let end = (start + batch).min(max_attempts);
        let results: Vec<Result<(RegularGraph, ExpanderCertificate)>> = (start..end)
            .into_par_iter()
            .map(|i| {
                let sampled = sample_regular_graph_with(n, d, derive_seed(seed, i), options)?;
                if let Some(g) = sampled.graph.girth().filter(|&g| g < thresholds.girth_min) {
                    // cheap rejection before the eigensolve
                    return Ok((sampled.graph, girth_rejection(g, thresholds)));
                }
                let mut cert = certify_expander(&sampled.graph, thresholds)?;
                cert.uniform = sampled.uniform;
                Ok((sampled.graph, cert))
            })
            .collect();
        for (offset, result) in results.into_iter().enumerate() {
            match result {
                Ok((graph, mut cert)) if cert.accepted => {
                    cert.attempts = start + offset as u64 + 1;
                    return Ok((graph, cert));
                }
                Ok((_, cert)) => last_reason = cert.rejection.unwrap_or_default(),
                Err(Error::InvalidParams(m)) => return Err(Error::InvalidParams(m)),
                Err(e) => last_reason = e.to_string(),
            }
        }
        start = end;
    }
    Err(Error::CertificationFailed {
        attempts: max_attempts,
        reason: last_reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Shortest cycle by exhaustive simple-cycle search from every start vertex.
    fn brute_girth(g: &RegularGraph) -> Option<u32> {
        fn dfs(g: &RegularGraph, start: usize, u: usize, len: u32, on: &mut Vec<bool>, best: &mut Option<u32>) {
            if best.is_some_and(|b| len >= b) {
                return;
            }
            for &w in g.neighbors(u) {
                let w = w as usize;
                if w == start && len >= 3 {
                    *best = Some(best.map_or(len, |b| b.min(len)));
                } else if w > start && !on[w] {
                    on[w] = true;
                    dfs(g, start, w, len + 1, on, best);
                    on[w] = false;
                }
            }
        }
        let mut best = None;
        for s in 0..g.vertex_count() {
            let mut on = vec![false; g.vertex_count()];
            on[s] = true;
            dfs(g, s, s, 1, &mut on, &mut best);
        }
        best
    }

    #[test]
    fn four_vertex_cubic_graph_is_k4() {
        for seed in 0..5 {
            let g = sample_regular_graph(4, 3, seed).unwrap();
            assert_eq!(g.edges(), RegularGraph::complete(4).unwrap().edges());
        }
    }

    #[test]
    fn sampling_is_deterministic_and_regular() {
        let a = sample_regular_graph(10, 3, 42).unwrap();
        let b = sample_regular_graph(10, 3, 42).unwrap();
        assert_eq!(a.to_edge_list(), b.to_edge_list());
        assert!((0..10).all(|v| a.neighbors(v).len() == 3));
        assert!(sample_regular_graph(9, 3, 0).is_err());
        assert!(sample_regular_graph(4, 4, 0).is_err());
    }

    #[test]
    fn girth_examples() {
        assert_eq!(RegularGraph::cycle(8).unwrap().girth(), Some(8));
        assert_eq!(RegularGraph::complete(4).unwrap().girth(), Some(3));
        assert_eq!(RegularGraph::petersen().girth(), Some(5));
        assert_eq!(brute_girth(&RegularGraph::petersen()), Some(5));
    }

    #[test]
    fn girth_matches_exhaustive_search_on_random_graphs() {
        for seed in 0..20 {
            let g = sample_regular_graph(16, 3, seed).unwrap();
            assert_eq!(g.girth(), brute_girth(&g), "seed {seed}");
        }
    }

    #[test]
    fn spectral_gap_examples() {
        let c8 = RegularGraph::cycle(8).unwrap().spectral_gap().unwrap();
        assert!((c8.lambda1 - 2.0).abs() < 1e-10);
        assert!((c8.lambda2 - 2f64.sqrt()).abs() < 1e-10);
        let p = RegularGraph::petersen().spectral_gap().unwrap();
        assert!((p.lambda1 - 3.0).abs() < 1e-10);
        assert!((p.lambda2 - 1.0).abs() < 1e-10);
        assert!(p.residual < 1e-6);
    }

    #[test]
    fn certification_examples() {
        let p = RegularGraph::petersen();
        let th = |gap_min, girth_min| Thresholds { gap_min, girth_min };
        assert!(certify_expander(&p, th(1.5, 5)).unwrap().accepted);
        assert!(!certify_expander(&p, th(1.5, 6)).unwrap().accepted);
        let c8 = RegularGraph::cycle(8).unwrap();
        let cert = certify_expander(&c8, th(1.0, 3)).unwrap();
        assert!(!cert.accepted);
        assert!((cert.gap - (2.0 - 2f64.sqrt())).abs() < 1e-10);
    }

    #[test]
    fn edge_list_round_trips() {
        let g = sample_regular_graph(20, 3, 9).unwrap();
        let text = g.to_edge_list();
        assert!(text.starts_with("20 3 9\n"));
        assert_eq!(RegularGraph::from_edge_list(&text).unwrap(), g);
        assert!(RegularGraph::from_edge_list("3 2\n0 1\n").is_err());
    }

    #[test]
    fn switching_fallback_yields_simple_graph() {
        let opts = SamplerOptions {
            max_rejections: 1,
            switching_fallback: true,
        };
        for seed in 0..10 {
            let s = sample_regular_graph_with(30, 6, seed, opts).unwrap();
            assert_eq!(s.graph.vertex_count(), 30);
            if s.attempts == 1 && !s.uniform {
                assert!(is_simple(&s.graph.edges()));
            }
        }
    }

    #[test]
    fn certificates_are_invariant_under_relabeling() {
        let th = Thresholds {
            gap_min: 0.0,
            girth_min: 0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for seed in 0..100 {
            let g = sample_regular_graph(12, 3, seed).unwrap();
            let mut perm: Vec<u32> = (0..12).collect();
            perm.shuffle(&mut rng);
            let h = g.permuted(&perm).unwrap();
            if !g.is_connected() {
                assert!(!h.is_connected());
                continue;
            }
            let a = certify_expander(&g, th).unwrap();
            let b = certify_expander(&h, th).unwrap();
            assert_eq!(a.girth, b.girth);
            assert!((a.lambda2 - b.lambda2).abs() < 1e-9);
        }
    }
}
