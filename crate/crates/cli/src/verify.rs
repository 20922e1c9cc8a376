use std::sync::Arc;

use anyhow::Result;
use ggsp_core::bounds::closed_form_exit_bound;
use ggsp_core::expander::{certify_expander, RegularGraph, Thresholds};
use ggsp_core::explorer::{exit_trial, StrategyKind};
use ggsp_core::graph_model::{materialize, GraphParams, MainGraph, StandaloneTree, TreeSchedule, Vertex};
use ggsp_core::linalg::SparseSymmetric;
use ggsp_core::oracle::{FeistelPermutation, OracleKey};
use ggsp_core::spectral::{exact_reference, solve_lambda_g, DecoratedSpec};
use nalgebra::DVector;
use serde::Serialize;

use crate::commands::Status;
use crate::config::ExperimentConfig;
use crate::output::RunDir;

#[derive(Debug, Serialize)]
struct Check {
    invariant: String,
    measured: f64,
    threshold: f64,
    passed: bool,
}

fn at_most(invariant: &str, measured: f64, threshold: f64) -> Check {
    Check {
        invariant: invariant.into(),
        measured,
        threshold,
        passed: measured <= threshold,
    }
}

fn golden_ratio() -> Result<Check> {
    let params = GraphParams::scaled(vec![2, 1], vec![0, 1], 2, 1, 1.0)?;
    let sol = solve_lambda_g(&DecoratedSpec::from_params(&params))?;
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    Ok(at_most("P4 |lambda_G - phi|", (sol.lambda_g - phi).abs(), 1e-9))
}

/// Recursion amplitudes against the dense eigenvector on a Petersen-core instance.
/// `perturb` scales one tree amplitude by 1.01 as a negative control.
fn petersen_instance(perturb: bool) -> Result<Vec<Check>> {
    let params = GraphParams::scaled(vec![4, 3], vec![2, 3], 10, 3, 1.0)?;
    let graph = MainGraph::new(params.clone(), Arc::new(RegularGraph::petersen()))?;
    let m = materialize(&graph, 20_000)?;
    let sol = solve_lambda_g(&DecoratedSpec::from_params(&params))?;
    let dense = exact_reference(&m.adjacency)?;
    let mut psi = DVector::from_iterator(
        m.len(),
        m.nodes
            .iter()
            .map(|v| sol.log_amplitude(v).map(|a| a.map_or(0.0, f64::exp)))
            .collect::<ggsp_core::Result<Vec<_>>>()?,
    );
    if perturb {
        let i = m.nodes.iter().position(|v| matches!(v, Vertex::Tree { .. })).unwrap_or(0);
        psi[i] *= 1.01;
    }
    let residual = SparseSymmetric::from_adjacency(&m.adjacency).residual(sol.lambda_g, &psi);
    let anchor = dense.vector[0];
    let mut amp = ((sol.lambda_g - dense.lambda) / dense.lambda).abs();
    let mut marginal = 0f64;
    for (i, v) in m.nodes.iter().enumerate() {
        let measured = dense.vector[i] / anchor;
        amp = amp.max(((measured - psi[i]) / psi[i]).abs());
        if matches!(v, Vertex::Expander(_)) {
            marginal = marginal.max((measured - 1.0).abs());
        }
    }
    Ok(vec![
        at_most("Petersen d=(4,3) l=(2,3) eigen-residual of recursion vector", residual, 1e-8),
        at_most("Petersen d=(4,3) l=(2,3) max relative amplitude error", amp, 1e-8),
        at_most("Petersen d=(4,3) l=(2,3) expander marginal deviation", marginal, 1e-8),
    ])
}

fn petersen_certificate() -> Result<Check> {
    let c = certify_expander(&RegularGraph::petersen(), Thresholds { gap_min: 1.0, girth_min: 5 })?;
    let off = (c.gap - 2.0).abs() + f64::from(c.girth.map_or(1, |g| g.abs_diff(5)));
    Ok(at_most("Petersen certificate distance from (girth 5, gap 2)", off, 1e-9))
}

fn audit() -> Result<Check> {
    let tree = Arc::new(StandaloneTree::new(TreeSchedule::new(vec![4, 3, 2], vec![1, 2, 3])?, 3)?);
    let mut violations = 0;
    for strategy in StrategyKind::builtin() {
        for seed in 0..20 {
            violations += u32::from(!exit_trial(&tree, &strategy, 40, 0.5, seed, 0)?.audit_passed);
        }
    }
    Ok(at_most("component audit violations (5 strategies x 20 seeds)", f64::from(violations), 0.0))
}

fn feistel() -> Result<Check> {
    let p = FeistelPermutation::new(17, OracleKey(0xfeed))?;
    let mut seen = vec![false; 1 << 17];
    let mut collisions = 0u32;
    for x in 0..1u64 << 17 {
        let y = p.permute(x)? as usize;
        collisions += u32::from(std::mem::replace(&mut seen[y], true) || p.invert(y as u64)? != x);
    }
    Ok(at_most("Feistel collisions on 2^17 labels", f64::from(collisions), 0.0))
}

fn closed_form() -> Result<Check> {
    let v = closed_form_exit_bound(16, 4)?;
    Ok(at_most("|log2 closed-form bound(16, 4) + 128|", (v + 128.0).abs(), 0.0))
}

pub fn verify_small(config: &ExperimentConfig, perturb: bool) -> Result<Status> {
    let run = RunDir::open(config, if perturb { "verify-small-perturbed" } else { "verify-small" })?;
    let mut checks = vec![golden_ratio()?];
    checks.extend(petersen_instance(perturb)?);
    checks.extend([petersen_certificate()?, audit()?, feistel()?, closed_form()?]);
    let mut records = Vec::new();
    for c in &checks {
        println!(
            "{} {:<62} measured {:.3e}  threshold {:.1e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.invariant,
            c.measured,
            c.threshold
        );
        records.push(run.record(c.invariant.clone(), c.measured, None, Some(c.threshold), vec![]));
    }
    run.write_csv("verify.csv", &checks)?;
    run.write_records(&records)?;
    Ok(if checks.iter().all(|c| c.passed) {
        Status::Ok
    } else {
        Status::Rejected
    })
}
