//! Perron-Frobenius data of the decorated graph from tree resolvent recursions.
//!
//! With the eigenvector normalized to 1 on the expander, every tree root carries
//! amplitude `m_k(lambda)`, the root entry of `(lambda - A_T)^{-1}`, and each step
//! down a tree multiplies by the child's own root resolvent. The eigenvalue solves
//! `lambda = lambda_E + sum_k beta_k m_k(lambda)`.

mod reference;
mod sampler;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph_model::{GraphParams, Hop, Magnitude, TreeAddress, TreeSchedule, Vertex};

pub use reference::{exact_reference, ExactReference};
pub use sampler::{GroundSample, GroundStateSampler};

const BISECTION_RTOL: f64 = 1e-12;
const BISECTION_MAX_ITER: u32 = 200;

/// Root resolvents `m_j(r)` of every subtree class at a fixed `lambda`.
///
/// `values[j-1][r]` is for a segment of type `j` with `r` core levels remaining.
#[derive(Debug, Clone)]
pub struct ResolventTable {
    lambda: f64,
    values: Vec<Vec<f64>>,
}

impl ResolventTable {
    /// Evaluates the recursion; fails if `lambda` is not above the spectrum of
    /// every tree type (some pivot of `lambda - A_T` is non-positive).
    pub fn new(schedule: &TreeSchedule, lambda: f64) -> Result<Self> {
        Self::up_to(schedule, schedule.levels(), lambda)
    }

    /// Same, restricted to tree types `1..=levels`.
    pub fn up_to(schedule: &TreeSchedule, levels: usize, lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(Error::InsideSpectrum { lambda });
        }
        let mut values: Vec<Vec<f64>> = Vec::with_capacity(levels);
        for j in 1..=levels.min(schedule.levels()) {
            let deco: f64 = (1..j)
                .map(|i| schedule.decoration_count(i) as f64 * full_root(&values, i))
                .sum();
            let core = schedule.core_children(j) as f64;
            let depth = schedule.depth(j) as usize;
            let mut col = Vec::with_capacity(depth + 1);
            col.push(1.0 / lambda);
            for r in 1..=depth {
                let pivot = lambda - core * col[r - 1] - deco;
                if pivot.is_nan() || pivot <= 0.0 {
                    return Err(Error::InsideSpectrum { lambda });
                }
                col.push(1.0 / pivot);
            }
            values.push(col);
        }
        Ok(Self { lambda, values })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Number of tree types tabulated.
    pub fn levels(&self) -> usize {
        self.values.len()
    }

    /// `m_j(r)`.
    pub fn get(&self, level: usize, remaining: u64) -> f64 {
        self.values[level - 1][remaining as usize]
    }

    /// Root resolvent of the full type-`k` tree.
    pub fn root(&self, k: usize) -> f64 {
        full_root(&self.values, k)
    }
}

fn full_root(values: &[Vec<f64>], k: usize) -> f64 {
    *values[k - 1].last().expect("non-empty column")
}

/// `[(lambda - A_T)^{-1}]_{root,root}` for the type-`k` tree of `schedule`.
pub fn root_resolvent(schedule: &TreeSchedule, k: usize, lambda: f64) -> Result<f64> {
    schedule.check_level(k)?;
    Ok(ResolventTable::up_to(schedule, k, lambda)?.root(k))
}

/// Input to the eigenvalue solve: the expander's top eigenvalue and the trees hung on each vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoratedSpec {
    pub lambda_e: f64,
    pub schedule: TreeSchedule,
    /// `(k, beta_k)`: `beta_k` copies of the type-`k` tree per expander vertex.
    pub decorations: Vec<(usize, u64)>,
}

impl DecoratedSpec {
    /// Uses `lambda_E = d_E`, exact for a connected regular expander.
    pub fn from_params(params: &GraphParams) -> Self {
        Self {
            lambda_e: params.expander_degree as f64,
            schedule: params.tree_schedule(),
            decorations: params.decorations(),
        }
    }

    /// Highest tree type actually attached; only these constrain `lambda`.
    pub fn max_level(&self) -> usize {
        self.decorations.iter().filter(|&&(_, b)| b > 0).map(|&(k, _)| k).max().unwrap_or(0)
    }

    pub fn total_beta(&self) -> u64 {
        self.decorations.iter().map(|&(_, b)| b).sum()
    }

    /// `lambda - lambda_E - sum beta_k m_k(lambda)`, or `None` inside the spectrum.
    fn defect(&self, lambda: f64) -> Option<f64> {
        let table = ResolventTable::up_to(&self.schedule, self.max_level(), lambda).ok()?;
        let pull: f64 = self
            .decorations
            .iter()
            .map(|&(k, beta)| beta as f64 * table.root(k))
            .sum();
        Some(lambda - self.lambda_e - pull)
    }
}

#[derive(Debug, Clone)]
pub struct SpectralSolution {
    pub lambda_g: f64,
    pub lambda_e: f64,
    /// `alpha_k = 1 / m_k(lambda_G)` for each decorating type, in the order of `decorations`.
    pub alpha: Vec<f64>,
    pub decorations: Vec<(usize, u64)>,
    pub schedule: TreeSchedule,
    pub resolvents: ResolventTable,
    /// `ln S_j(r)`: squared-amplitude mass of a subtree relative to its root.
    log_mass: Vec<Vec<f64>>,
    /// `ln S_E`: mass hanging on one expander vertex, itself included.
    log_mass_anchor: f64,
    pub residual: f64,
    pub iterations: u32,
}

/// Solves `lambda = lambda_E + sum_k beta_k m_k(lambda)` by bisection.
///
/// The defect is increasing in `lambda`, negative at `lambda_E` (or undefined
/// there, which counts as negative), and positive at
/// `max(lambda_E, 2 sqrt(Delta)) + sum beta + 1`.
pub fn solve_lambda_g(spec: &DecoratedSpec) -> Result<SpectralSolution> {
    if spec.lambda_e.is_nan() || spec.lambda_e <= 0.0 {
        return Err(Error::InvalidParams(format!("lambda_E = {} must be positive", spec.lambda_e)));
    }
    for &(k, _) in &spec.decorations {
        spec.schedule.check_level(k)?;
    }
    let decorations: Vec<(usize, u64)> =
        spec.decorations.iter().copied().filter(|&(_, b)| b > 0).collect();
    let beta = spec.total_beta();
    let (lambda, iterations) = if beta == 0 {
        (spec.lambda_e, 0)
    } else {
        let delta = spec.schedule.max_degree() as f64;
        let mut lo = spec.lambda_e;
        let mut hi = spec.lambda_e.max(2.0 * delta.sqrt()) + beta as f64 + 1.0;
        match spec.defect(hi) {
            Some(f) if f > 0.0 => {}
            other => {
                return Err(Error::InvalidBracket(format!(
                    "defect at upper end {hi} is {other:?}, expected positive"
                )))
            }
        }
        let mut iterations = 0;
        while iterations < BISECTION_MAX_ITER && hi - lo > BISECTION_RTOL * hi {
            let mid = 0.5 * (lo + hi);
            match spec.defect(mid) {
                Some(f) if f > 0.0 => hi = mid,
                _ => lo = mid,
            }
            iterations += 1;
        }
        (hi, iterations)
    };
    let resolvents = ResolventTable::up_to(&spec.schedule, spec.max_level(), lambda)?;
    let residual = spec.defect(lambda).map_or(f64::INFINITY, f64::abs);
    if beta > 0 && residual > 1e-10 * lambda {
        return Err(Error::NonConvergence { residual });
    }
    let alpha = decorations
        .iter()
        .map(|&(k, _)| 1.0 / resolvents.root(k))
        .collect();
    let log_mass = mass_table(&spec.schedule, &resolvents);
    let anchor_terms: Vec<f64> = std::iter::once(0.0)
        .chain(decorations.iter().map(|&(k, b)| {
            (b as f64).ln() + 2.0 * resolvents.root(k).ln() + *log_mass[k - 1].last().unwrap()
        }))
        .collect();
    Ok(SpectralSolution {
        lambda_g: lambda,
        lambda_e: spec.lambda_e,
        alpha,
        decorations,
        schedule: spec.schedule.clone(),
        resolvents,
        log_mass,
        log_mass_anchor: crate::numeric::log_sum_exp(&anchor_terms),
        residual,
        iterations,
    })
}

/// `S_j(0) = 1`, `S_j(r) = 1 + (d_j - 1) m_j(r-1)^2 S_j(r-1) + sum_{i<j} c_i m_i^2 S_i`, in logs.
fn mass_table(schedule: &TreeSchedule, m: &ResolventTable) -> Vec<Vec<f64>> {
    let levels = m.levels();
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(levels);
    for j in 1..=levels {
        let mut deco_terms = Vec::new();
        for i in 1..j {
            let c = schedule.decoration_count(i);
            if c > 0 {
                deco_terms.push(
                    (c as f64).ln() + 2.0 * m.root(i).ln() + *out[i - 1].last().unwrap(),
                );
            }
        }
        let core = schedule.core_children(j);
        let depth = schedule.depth(j) as usize;
        let mut col = Vec::with_capacity(depth + 1);
        col.push(0.0);
        for r in 1..=depth {
            let mut terms = vec![0.0];
            if core > 0 {
                terms.push((core as f64).ln() + 2.0 * m.get(j, (r - 1) as u64).ln() + col[r - 1]);
            }
            terms.extend_from_slice(&deco_terms);
            col.push(crate::numeric::log_sum_exp(&terms));
        }
        out.push(col);
    }
    out
}

/// Squared norms of the expander restriction and of the whole eigenvector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormDecomposition {
    /// `ln ||psi_E||^2` (equals `ln N_E` under the unit expander normalization).
    pub log_norm_e_sq: f64,
    pub log_norm_total_sq: f64,
    /// `||psi_E||^2 / ||psi_n||^2`.
    pub ratio: f64,
}

impl SpectralSolution {
    /// `ln S_j(r)`.
    pub fn log_mass(&self, level: usize, remaining: u64) -> f64 {
        self.log_mass[level - 1][remaining as usize]
    }

    pub fn log_mass_full(&self, level: usize) -> f64 {
        *self.log_mass[level - 1].last().expect("non-empty")
    }

    /// `ln S_E`: mass of one expander vertex together with its trees.
    pub fn log_mass_anchor(&self) -> f64 {
        self.log_mass_anchor
    }

    pub fn norm_decomposition(&self, expander_size: Magnitude) -> NormDecomposition {
        let log_norm_e_sq = expander_size.log2() * std::f64::consts::LN_2;
        NormDecomposition {
            log_norm_e_sq,
            log_norm_total_sq: log_norm_e_sq + self.log_mass_anchor,
            ratio: (-self.log_mass_anchor).exp(),
        }
    }

    /// `ln psi(address)` inside a type-`k` tree, relative to the tree's attachment point.
    pub fn log_tree_amplitude(&self, k: usize, address: &TreeAddress) -> Result<f64> {
        if k == 0 || k > self.resolvents.levels() {
            return Err(Error::InvalidParams(format!("tree type {k} is not attached")));
        }
        self.schedule.locate(k, address)?;
        let mut segment = k;
        let mut remaining = self.schedule.depth(k);
        let mut log_psi = self.resolvents.get(k, remaining).ln();
        for hop in address.hops() {
            match *hop {
                Hop::Core(_) => remaining -= 1,
                Hop::Decoration { level, .. } => {
                    segment = level as usize;
                    remaining = self.schedule.depth(segment);
                }
            }
            log_psi += self.resolvents.get(segment, remaining).ln();
        }
        Ok(log_psi)
    }

    /// `ln psi_n(v)` with `psi_n = 1` on the expander; `None` for isolated vertices.
    pub fn log_amplitude(&self, v: &Vertex) -> Result<Option<f64>> {
        match v {
            Vertex::Expander(_) => Ok(Some(0.0)),
            Vertex::Tree { slot, address, .. } => {
                let k = slot.level as usize;
                if !self.decorations.iter().any(|&(j, b)| j == k && u64::from(slot.copy) < b) {
                    return Err(Error::InvalidVertex(format!("no decoration slot {slot:?}")));
                }
                Ok(Some(self.log_tree_amplitude(k, address)?))
            }
            Vertex::Isolated(_) => Ok(None),
        }
    }

    pub fn report(&self, expander_size: Magnitude) -> SpectrumReport {
        let norms = self.norm_decomposition(expander_size);
        SpectrumReport {
            lambda_g: self.lambda_g,
            lambda_e: self.lambda_e,
            alpha: self
                .decorations
                .iter()
                .zip(&self.alpha)
                .map(|(&(k, _), &a)| AlphaEntry { k, alpha: a })
                .collect(),
            norm_ratio: norms.ratio,
            log_norm_e_sq: norms.log_norm_e_sq,
            log_norm_total_sq: norms.log_norm_total_sq,
            residual: self.residual,
            iterations: self.iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaEntry {
    pub k: usize,
    pub alpha: f64,
}

/// Serializable summary of a solve; field order is fixed by declaration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub lambda_g: f64,
    pub lambda_e: f64,
    pub alpha: Vec<AlphaEntry>,
    pub norm_ratio: f64,
    pub log_norm_e_sq: f64,
    pub log_norm_total_sq: f64,
    pub residual: f64,
    pub iterations: u32,
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, SymmetricEigen};

    const PHI: f64 = 1.618_033_988_749_895;

    fn sched(d: &[u64], l: &[u64]) -> TreeSchedule {
        TreeSchedule::new(d.to_vec(), l.to_vec()).unwrap()
    }

    fn dense_resolvent_root(adj: &[(usize, usize)], n: usize, lambda: f64) -> f64 {
        let mut m = DMatrix::<f64>::identity(n, n) * lambda;
        for &(a, b) in adj {
            m[(a, b)] -= 1.0;
            m[(b, a)] -= 1.0;
        }
        m.try_inverse().unwrap()[(0, 0)]
    }

    #[test]
    fn root_resolvent_small_trees() {
        assert_eq!(root_resolvent(&sched(&[1], &[0]), 1, 2.0).unwrap(), 0.5);
        let path = root_resolvent(&sched(&[2], &[1]), 1, 2.0).unwrap();
        assert!((path - dense_resolvent_root(&[(0, 1)], 2, 2.0)).abs() < 1e-14);
        assert!((path - 2.0 / 3.0).abs() < 1e-14);
        let star = root_resolvent(&sched(&[3], &[1]), 1, 2.0).unwrap();
        assert!((star - dense_resolvent_root(&[(0, 1), (0, 2)], 3, 2.0)).abs() < 1e-14);
        assert!((star - 1.0).abs() < 1e-14);
    }

    #[test]
    fn root_resolvent_rejects_lambda_inside_spectrum() {
        // star with two leaves has top eigenvalue sqrt(2)
        assert!(matches!(
            root_resolvent(&sched(&[3], &[1]), 1, 1.4),
            Err(Error::InsideSpectrum { .. })
        ));
    }

    fn p4_spec() -> DecoratedSpec {
        DecoratedSpec {
            lambda_e: 1.0,
            schedule: sched(&[2, 1], &[0, 1]),
            decorations: vec![(1, 1)],
        }
    }

    #[test]
    fn golden_ratio_on_p4() {
        let sol = solve_lambda_g(&p4_spec()).unwrap();
        assert!((sol.lambda_g - PHI).abs() < 1e-10);
        assert!((sol.alpha[0] - PHI).abs() < 1e-10);
        let pendant = sol
            .log_tree_amplitude(1, &TreeAddress::root())
            .unwrap()
            .exp();
        assert!((pendant - 1.0 / PHI).abs() < 1e-10);
        let ratio = sol.norm_decomposition(Magnitude::Exact(2)).ratio;
        assert!((ratio - 2.0 / (2.0 + 2.0 / (PHI * PHI))).abs() < 1e-10);
        assert!((ratio - 0.7236).abs() < 1e-4);
    }

    #[test]
    fn no_decorations_leaves_lambda_e() {
        let spec = DecoratedSpec {
            lambda_e: 3.0,
            schedule: sched(&[3], &[2]),
            decorations: vec![],
        };
        let sol = solve_lambda_g(&spec).unwrap();
        assert_eq!(sol.lambda_g, 3.0);
        assert_eq!(sol.norm_decomposition(Magnitude::Exact(10)).ratio, 1.0);
    }

    #[test]
    fn defect_is_increasing_over_the_bracket() {
        let params = GraphParams::scaled(vec![5, 4, 3], vec![1, 2, 3], 10, 3, 1.0).unwrap();
        let spec = DecoratedSpec::from_params(&params);
        let sol = solve_lambda_g(&spec).unwrap();
        let hi = spec.lambda_e.max(2.0 * 5f64.sqrt()) + spec.total_beta() as f64 + 1.0;
        let pts: Vec<f64> = (0..100)
            .map(|i| sol.lambda_g * 0.9 + (hi - sol.lambda_g * 0.9) * i as f64 / 99.0)
            .filter_map(|x| spec.defect(x))
            .collect();
        assert!(pts.len() > 50);
        assert!(pts.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn mass_recursion_matches_direct_sum() {
        // single tree type d=(3), l=(2): 1 + 2 m1^2 (1 + 2 m0^2)
        let s = sched(&[3], &[2]);
        let lambda = 3.0;
        let m = ResolventTable::new(&s, lambda).unwrap();
        let table = mass_table(&s, &m);
        let m0 = m.get(1, 0);
        let m1 = m.get(1, 1);
        let expect = 1.0 + 2.0 * m1 * m1 * (1.0 + 2.0 * m0 * m0);
        assert!((table[0][2].exp() - expect).abs() < 1e-14);
    }

    #[test]
    fn self_loop_tree_has_lambda_g_on_top() {
        let params = GraphParams::scaled(vec![4, 3], vec![2, 3], 10, 3, 1.0).unwrap();
        let sol = solve_lambda_g(&DecoratedSpec::from_params(&params)).unwrap();
        let tree = crate::graph_model::StandaloneTree::new(params.tree_schedule(), 1).unwrap();
        let mat = crate::graph_model::materialize(&tree, 1000).unwrap();
        let n = mat.len();
        let mut a = DMatrix::<f64>::zeros(n, n);
        for (i, row) in mat.adjacency.iter().enumerate() {
            for &j in row {
                a[(i, j)] = 1.0;
            }
        }
        a[(0, 0)] = sol.alpha[0];
        let top = SymmetricEigen::new(a).eigenvalues.max();
        assert!((top - sol.lambda_g).abs() < 1e-8);
    }
}
