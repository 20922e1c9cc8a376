//! Analytic bound calculators over arbitrary schedules. Minuscule probabilities
//! are carried as base-2 logarithms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph_model::{Magnitude, TreeSchedule};
use crate::numeric::log2_add_exp2;

/// A computed bound with its echoed inputs and validity flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub inputs: serde_json::Value,
    /// Linear value, clamped to `[0, 1]` for probabilities.
    pub value: f64,
    /// Unclamped `log2` of the bound where meaningful.
    pub log2_value: Option<f64>,
    /// True when the raw bound carries no information (probability >= 1, or a non-positive gap).
    pub vacuous: bool,
}

fn check_w(w: u32) -> Result<()> {
    match w {
        1 | 2 => Ok(()),
        _ => Err(Error::InvalidParams(format!(
            "w = {w}: only w in {{1, 2}} is covered by the avoidance lemma"
        ))),
    }
}

/// `log2 (d_k / d_{k-1})^{(l_k - l_{k-1}) / w}`.
pub fn avoidance_bound_log2(d_k: u64, d_km1: u64, l_k: u64, l_km1: u64, w: u32) -> Result<f64> {
    check_w(w)?;
    if d_k == 0 || d_k >= d_km1 {
        return Err(Error::InvalidParams(format!("need 0 < d_k < d_(k-1), got {d_k}, {d_km1}")));
    }
    if l_k < l_km1 {
        return Err(Error::InvalidParams(format!("need l_k >= l_(k-1), got {l_k}, {l_km1}")));
    }
    let gap = (l_k - l_km1) as f64;
    if gap == 0.0 {
        return Ok(0.0);
    }
    Ok(gap / f64::from(w) * (d_k as f64 / d_km1 as f64).log2())
}

pub fn avoidance_bound(d_k: u64, d_km1: u64, l_k: u64, l_km1: u64, w: u32) -> Result<f64> {
    Ok(avoidance_bound_log2(d_k, d_km1, l_k, l_km1, w)?.exp2())
}

/// One level of the inductive recursion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecursionLevel {
    pub k: usize,
    /// Query allowance: the level-`k` statement covers algorithms making fewer than `q` queries.
    pub q: f64,
    pub log2_avoidance: f64,
    pub log2_bound: f64,
    pub vacuous: bool,
    /// Set when `q_{k-1} < q_k / w`, so the recursion step does not apply as written.
    pub inconsistent: bool,
}

impl RecursionLevel {
    pub fn probability(&self) -> f64 {
        self.log2_bound.exp2().min(1.0)
    }
}

/// `bound_k = avoid_k + q_k * bound_{k-1}` for `k = 1..=K`.
///
/// Base case: a 0-level leaf of the type-1 tree lies `l_1` hops below the root,
/// so fewer than `q_1 <= l_1 + 1` queries cannot reach it (bound 0); otherwise 1.
pub fn recursion_bound(schedule: &TreeSchedule, q: &[f64], w: u32) -> Result<Vec<RecursionLevel>> {
    check_w(w)?;
    if q.len() != schedule.levels() {
        return Err(Error::InvalidParams(format!(
            "{} query allowances for {} levels",
            q.len(),
            schedule.levels()
        )));
    }
    let mut out: Vec<RecursionLevel> = Vec::with_capacity(q.len());
    for k in 1..=schedule.levels() {
        let qk = q[k - 1];
        let level = if k == 1 {
            let reachable = qk > (schedule.depth(1) + 1) as f64;
            let log2_bound = if reachable { 0.0 } else { f64::NEG_INFINITY };
            RecursionLevel {
                k,
                q: qk,
                log2_avoidance: f64::NAN,
                log2_bound,
                vacuous: reachable,
                inconsistent: false,
            }
        } else {
            let prev = &out[k - 2];
            let avoid = avoidance_bound_log2(
                schedule.degree(k),
                schedule.degree(k - 1),
                schedule.depth(k),
                schedule.depth(k - 1),
                w,
            )?;
            let carried = qk.log2() + prev.log2_bound;
            let log2_bound = log2_add_exp2(avoid, carried);
            RecursionLevel {
                k,
                q: qk,
                log2_avoidance: avoid,
                log2_bound,
                vacuous: log2_bound >= 0.0,
                inconsistent: prev.q < qk / f64::from(w),
            }
        };
        out.push(level);
    }
    Ok(out)
}

/// Recursion bound for a type-`k` tree explored with at most `budget` queries,
/// halving (for `w = 2`) the allowance at each level down.
pub fn exit_bound_at_budget(schedule: &TreeSchedule, k: usize, budget: u64, w: u32) -> Result<f64> {
    schedule.check_level(k)?;
    check_w(w)?;
    let q = (budget + 1) as f64;
    let sub = TreeSchedule::new(schedule.degrees()[..k].to_vec(), schedule.depths()[..k].to_vec())?;
    let qs: Vec<f64> = (1..=k)
        .map(|j| q / f64::from(w).powi((k - j) as i32))
        .collect();
    let levels = recursion_bound(&sub, &qs, w)?;
    Ok(levels[k - 1].log2_bound)
}

/// Best available ceiling on the exit probability of an adjacency-disciplined
/// explorer with `budget` queries on the type-`k` tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitCeiling {
    pub value: f64,
    pub log2_value: f64,
    pub source: String,
}

pub fn exit_probability_ceiling(schedule: &TreeSchedule, k: usize, budget: u64) -> Result<ExitCeiling> {
    schedule.check_level(k)?;
    let mut best = ExitCeiling {
        value: 1.0,
        log2_value: 0.0,
        source: "trivial".into(),
    };
    let mut consider = |log2: f64, source: String| {
        if log2 < best.log2_value {
            best = ExitCeiling {
                value: log2.exp2(),
                log2_value: log2,
                source,
            };
        }
    };
    let path = schedule.depth(k) + 1;
    if budget < path {
        consider(f64::NEG_INFINITY, "unreachable".into());
        return Ok(best);
    }
    for w in [1, 2] {
        consider(exit_bound_at_budget(schedule, k, budget, w)?, format!("recursion w={w}"));
    }
    if k >= 2 {
        // every decoration leaf off the exit path costs l_{k-1} + 1 extra queries
        let off_path = budget - path;
        let per_leaf = schedule.depth(k - 1) + 1;
        for w in [1u32, 2] {
            if off_path < u64::from(w) * per_leaf {
                let avoid = avoidance_bound_log2(
                    schedule.degree(k),
                    schedule.degree(k - 1),
                    schedule.depth(k),
                    schedule.depth(k - 1),
                    w,
                )?;
                consider(avoid, format!("avoidance w={w}"));
            }
        }
    }
    Ok(best)
}

/// `log2` of `2^{-2n log n + (sqrt n + 1)(k - sqrt n)}`.
pub fn closed_form_exit_bound(n: u64, k: u64) -> Result<f64> {
    let root = (n as f64).sqrt().round() as u64;
    if n < 4 || root * root != n {
        return Err(Error::InvalidParams(format!("n = {n} is not a perfect square >= 4")));
    }
    if k == 0 || k > root {
        return Err(Error::InvalidParams(format!("k = {k} outside 1..={root}")));
    }
    let nf = n as f64;
    let r = root as f64;
    Ok(-2.0 * nf * nf.log2() + (r + 1.0) * (k as f64 - r))
}

/// Recursion with the standard choice `q_k = 2^k`, `w = 2`.
pub fn paper_recursion(n: u64) -> Result<Vec<RecursionLevel>> {
    let params = crate::graph_model::GraphParams::paper(n)?;
    let schedule = params.tree_schedule();
    let q: Vec<f64> = (1..=schedule.levels()).map(|k| 2f64.powi(k as i32)).collect();
    recursion_bound(&schedule, &q, 2)
}

/// `max(0, 1 - |U| * degree^g / N_E)`.
pub fn localization_bound(u_size: u64, degree: u64, g: u64, n_e: Magnitude) -> BoundReport {
    let log2_loss = (u_size as f64).log2() + g as f64 * (degree as f64).log2() - n_e.log2();
    let loss = log2_loss.exp2();
    BoundReport {
        name: "localization".into(),
        inputs: serde_json::json!({
            "u_size": u_size, "degree": degree, "g": g, "log2_n_e": n_e.log2()
        }),
        value: (1.0 - loss).max(0.0),
        log2_value: (loss < 1.0).then(|| (-loss).ln_1p() / std::f64::consts::LN_2),
        vacuous: loss >= 1.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TvBudget {
    /// `sqrt(1 - F) + tv`.
    pub total: f64,
    /// `1 - loss - total`: what is left of the localization probability.
    pub residual: f64,
}

pub fn tv_budget(fidelity: f64, tv: f64, loss: f64) -> Result<TvBudget> {
    for (name, v) in [("fidelity", fidelity), ("tv", tv), ("loss", loss)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidParams(format!("{name} = {v} outside [0, 1]")));
        }
    }
    let total = (1.0 - fidelity).sqrt() + tv;
    Ok(TvBudget {
        total,
        residual: 1.0 - loss - total,
    })
}

/// `delta - 2 gamma`; negative values are vacuous.
pub fn gap_sum_bound(delta: f64, gamma: f64) -> BoundReport {
    let value = delta - 2.0 * gamma;
    BoundReport {
        name: "gap_sum".into(),
        inputs: serde_json::json!({ "delta": delta, "gamma": gamma }),
        value,
        log2_value: None,
        vacuous: value <= 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaInterval {
    pub lo: f64,
    pub hi: f64,
    pub vacuous: bool,
}

impl AlphaInterval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// `[lambda_E - 2 sqrt(Delta), lambda_E + beta * types / (lambda_E - 2 sqrt(Delta))]`.
pub fn alpha_bounds(lambda_e: f64, delta: f64, beta: f64, types: usize) -> AlphaInterval {
    let margin = lambda_e - 2.0 * delta.sqrt();
    if margin <= 0.0 {
        return AlphaInterval {
            lo: margin,
            hi: f64::INFINITY,
            vacuous: true,
        };
    }
    AlphaInterval {
        lo: margin,
        hi: lambda_e + beta * types as f64 / margin,
        vacuous: false,
    }
}
