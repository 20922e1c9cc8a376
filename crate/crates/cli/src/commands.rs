use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use ggsp_core::bounds::{
    alpha_bounds, closed_form_exit_bound, exit_bound_at_budget, exit_probability_ceiling, localization_bound,
    paper_recursion, tv_budget,
};
use ggsp_core::expander::{
    certify_expander, derive_seed, generate_certified, RegularGraph, SamplerOptions, Thresholds,
};
use ggsp_core::explorer::{
    exit_trial, ggsp_trial, Algorithm, EventStats, ExitEstimate, ExitTrial, GgspConfig, GgspRecord,
};
use ggsp_core::graph_model::{GraphParams, Magnitude, MainGraph, ScaleMode, StandaloneTree, TreeSchedule};
use ggsp_core::oracle::{InputSampler, LabeledOracle, OracleDescriptor, OracleKey};
use ggsp_core::spectral::{solve_lambda_g, DecoratedSpec, GroundStateSampler, SpectralSolution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, ExpanderSource};
use crate::output::{read_jsonl, ResultRecord, RunDir, RESULTS};

/// Outcome of a subcommand that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// Certification or verification rejected the input.
    Rejected,
    /// Some trials ran out of queries.
    BudgetExhausted,
}

const CHUNK: usize = 1000;
const EXPANDER_FILE: &str = "expander.txt";

fn params(config: &ExperimentConfig) -> Result<GraphParams> {
    let g = &config.graph;
    Ok(match g.mode {
        ScaleMode::Paper => GraphParams::paper(g.n.expect("validated"))?,
        ScaleMode::Scaled => GraphParams::scaled(
            g.degrees.clone(),
            g.depths.clone(),
            config.expander.size,
            g.girth_floor,
            config.oracle.padding_ratio,
        )?,
    })
}

fn thresholds(config: &ExperimentConfig) -> Thresholds {
    Thresholds {
        gap_min: config.expander.gap_min,
        girth_min: config.expander.girth_min,
    }
}

fn oracle_key(config: &ExperimentConfig) -> OracleKey {
    config.oracle.key.unwrap_or_else(|| {
        let hi = u128::from(derive_seed(config.seed, u64::MAX));
        let lo = u128::from(derive_seed(config.seed, u64::MAX - 1));
        OracleKey(hi << 64 | lo)
    })
}

/// Generates or loads the expander and stores a copy in the run directory.
fn expander(config: &ExperimentConfig, params: &GraphParams, run: &RunDir) -> Result<RegularGraph> {
    let graph = match config.expander.source {
        ExpanderSource::Load => {
            let path = config.expander.path.as_ref().expect("validated");
            RegularGraph::load(path).with_context(|| format!("loading {}", path.display()))?
        }
        ExpanderSource::Generate => {
            let size = params
                .expander_size
                .exact()
                .context("paper-scale expanders cannot be built; use graph.mode = \"scaled\"")?;
            let (graph, _) = generate_certified(
                size as usize,
                params.expander_degree as usize,
                config.seed,
                thresholds(config),
                config.expander.max_attempts,
                SamplerOptions::default(),
            )?;
            graph
        }
    };
    graph.save(&run.path(EXPANDER_FILE))?;
    Ok(graph)
}

struct MainSetup {
    params: GraphParams,
    oracle: LabeledOracle<MainGraph>,
    sampler: InputSampler,
    solution: Arc<SpectralSolution>,
}

fn main_setup(config: &ExperimentConfig, run: &RunDir) -> Result<MainSetup> {
    let params = params(config)?;
    let graph = expander(config, &params, run)?;
    let main = MainGraph::new(params.clone(), Arc::new(graph))?;
    let solution = Arc::new(solve_lambda_g(&DecoratedSpec::from_params(&params))?);
    let ground = GroundStateSampler::new(solution.clone(), params.expander_size);
    let sampler = InputSampler::new(config.guiding, ground)?;
    let oracle = LabeledOracle::new(
        Arc::new(main),
        oracle_key(config),
        config.oracle.padding_ratio,
        config.oracle.label_bits,
    )?;
    run.write_json("oracle.json", &OracleDescriptor::for_main(&oracle, PathBuf::from(EXPANDER_FILE)))?;
    Ok(MainSetup {
        params,
        oracle,
        sampler,
        solution,
    })
}

pub fn gen_expander(config: &ExperimentConfig) -> Result<Status> {
    let run = RunDir::open(config, "gen-expander")?;
    let params = params(config)?;
    let size = params.expander_size.exact().context("paper-scale expanders cannot be built")?;
    match generate_certified(
        size as usize,
        params.expander_degree as usize,
        config.seed,
        thresholds(config),
        config.expander.max_attempts,
        SamplerOptions::default(),
    ) {
        Ok((graph, cert)) => {
            graph.save(&run.path(EXPANDER_FILE))?;
            run.write_json("certificate.json", &cert)?;
            run.write_records(&[
                run.record("spectral_gap", cert.gap, None, Some(config.expander.gap_min), vec!["lower_bound".into()]),
                run.record(
                    "girth",
                    cert.girth.map_or(f64::INFINITY, f64::from),
                    None,
                    Some(f64::from(config.expander.girth_min)),
                    vec!["lower_bound".into()],
                ),
                run.record("attempts", cert.attempts as f64, None, None, vec![]),
            ])?;
            println!(
                "accepted after {} attempts: N = {size}, d = {}, gap = {:.6}, girth = {:?}",
                cert.attempts, params.expander_degree, cert.gap, cert.girth
            );
            println!("wrote {}", run.path(EXPANDER_FILE).display());
            Ok(Status::Ok)
        }
        Err(ggsp_core::Error::CertificationFailed { attempts, reason }) => {
            run.write_json(
                "certificate.json",
                &serde_json::json!({ "accepted": false, "attempts": attempts, "rejection": reason }),
            )?;
            eprintln!("no graph passed certification in {attempts} attempts; last rejection: {reason}");
            Ok(Status::Rejected)
        }
        Err(e) => Err(e.into()),
    }
}

pub fn certify(config: &ExperimentConfig, graph: Option<&Path>, petersen: bool) -> Result<Status> {
    let g = if petersen {
        RegularGraph::petersen()
    } else {
        let path = graph
            .or(config.expander.path.as_deref())
            .context("pass --graph PATH, --petersen, or set expander.path")?;
        RegularGraph::load(path).with_context(|| format!("loading {}", path.display()))?
    };
    let cert = certify_expander(&g, thresholds(config))?;
    println!("{}", serde_json::to_string_pretty(&cert)?);
    Ok(if cert.accepted { Status::Ok } else { Status::Rejected })
}

pub fn spectrum(config: &ExperimentConfig) -> Result<Status> {
    let run = RunDir::open(config, "spectrum")?;
    let params = params(config)?;
    let spec = DecoratedSpec::from_params(&params);
    let sol = solve_lambda_g(&spec)?;
    let report = sol.report(params.expander_size);
    let beta = spec.decorations.iter().map(|&(_, b)| b).max().unwrap_or(0);
    let interval = alpha_bounds(
        spec.lambda_e,
        params.degree_schedule[0] as f64,
        beta as f64,
        spec.decorations.len(),
    );
    run.write_json("spectrum.json", &serde_json::json!({ "report": report, "alpha_interval": interval }))?;
    let mut records = vec![
        run.record("lambda_g", report.lambda_g, None, Some(spec.lambda_e + spec.total_beta() as f64), vec![]),
        run.record("norm_ratio", report.norm_ratio, None, None, vec![]),
    ];
    for entry in &report.alpha {
        let mut flags = vec![format!("interval_lo={}", interval.lo)];
        if interval.vacuous {
            flags.push("vacuous".into());
        }
        records.push(run.record(format!("alpha_{}", entry.k), entry.alpha, None, Some(interval.hi), flags));
    }
    run.write_records(&records)?;
    println!("lambda_G = {:.12}  (lambda_E = {})", report.lambda_g, report.lambda_e);
    for entry in &report.alpha {
        println!("alpha_{} = {:.9}", entry.k, entry.alpha);
    }
    println!("||psi_E||^2 / ||psi||^2 = {:.9}", report.norm_ratio);
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct GroundRow {
    index: usize,
    label: u64,
    vertex: ggsp_core::graph_model::Vertex,
    log_amplitude: Option<f64>,
}

pub fn sample_ground(config: &ExperimentConfig, count: usize) -> Result<Status> {
    let run = RunDir::open(config, "sample-ground")?;
    let setup = main_setup(config, &run)?;
    let mut rng = sample_rng(config.seed);
    let rows = (0..count)
        .map(|index| {
            let vertex = setup.sampler.sample_vertex(setup.oracle.topology(), &mut rng)?;
            Ok(GroundRow {
                index,
                label: setup.oracle.label_of(&vertex)?,
                log_amplitude: setup.solution.log_amplitude(&vertex)?,
                vertex,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    run.write_json("samples.json", &rows)?;
    let n_e = setup.params.expander_size.exact().unwrap_or(u64::MAX) as f64;
    let fidelity = config.guiding.fidelity(setup.solution.log_mass_anchor(), n_e);
    run.write_records(&[run.record("fidelity", fidelity, None, Some(1.0), vec![])])?;
    for r in &rows {
        println!("{:>6}  {:#018x}  {:?}", r.index, r.label, r.vertex);
    }
    Ok(Status::Ok)
}

fn sample_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, u64::MAX - 2))
}

#[derive(Serialize)]
struct ExitSummary {
    strategy: String,
    budget: u64,
    trials: u64,
    p_hat: f64,
    stderr: f64,
    wilson_lo: f64,
    wilson_hi: f64,
    bound: f64,
    bound_source: String,
    p_exit_below_two_leaves: f64,
    mean_queries: f64,
    audit_failures: u64,
}

pub fn explore_tree(config: &ExperimentConfig) -> Result<Status> {
    const TRIALS: &str = "trials.jsonl";
    let run = RunDir::open(config, "explore-tree")?;
    let schedule = TreeSchedule::new(config.graph.degrees.clone(), config.graph.depths.clone())?;
    let level = config.graph.level.unwrap_or(schedule.levels());
    let tree = Arc::new(StandaloneTree::new(schedule.clone(), level)?);
    let occupied = LabeledOracle::new(tree.clone(), OracleKey(0), config.oracle.padding_ratio, config.oracle.label_bits)?
        .occupied_fraction();
    let mut done: Vec<ExitTrial> = run.read_jsonl(TRIALS)?;
    let mut summaries = Vec::new();
    let mut records = Vec::new();
    for strategy in config.strategies()? {
        for &budget in &config.explore.budgets {
            let have: HashSet<u64> = done
                .iter()
                .filter(|t| t.strategy == strategy.name() && t.budget == budget)
                .map(|t| t.trial)
                .collect();
            let missing: Vec<u64> = (0..config.explore.trials).filter(|i| !have.contains(i)).collect();
            for chunk in missing.chunks(CHUNK) {
                let rows = chunk
                    .par_iter()
                    .map(|&i| exit_trial(&tree, &strategy, budget, config.oracle.padding_ratio, config.seed, i))
                    .collect::<ggsp_core::Result<Vec<_>>>()?;
                run.append_jsonl(TRIALS, &rows)?;
                done.extend(rows);
            }
            let group: Vec<ExitTrial> = done
                .iter()
                .filter(|t| t.strategy == strategy.name() && t.budget == budget && t.trial < config.explore.trials)
                .cloned()
                .collect();
            let est = ExitEstimate::summarize(&strategy, budget, &group);
            let ceiling = exit_probability_ceiling(&schedule, level, budget)?;
            let slack = if strategy.uses_fresh_probes() {
                budget as f64 * occupied
            } else {
                0.0
            };
            let bound = (ceiling.value + slack).min(1.0);
            let mut flags = vec![format!("strategy={}", strategy.name()), format!("budget={budget}")];
            if bound >= 1.0 {
                flags.push("vacuous".into());
            }
            records.push(run.record("exit_probability", est.exit.p_hat, Some(est.exit.stderr), Some(bound), flags.clone()));
            records.push(run.record(
                "exit_below_two_leaves",
                est.exit_below_two.p_hat,
                Some(est.exit_below_two.stderr),
                Some(bound),
                flags,
            ));
            println!(
                "{:<18} budget {:>4}: p_hat {:.4} +- {:.4}  bound {:.4} ({})",
                strategy.name(),
                budget,
                est.exit.p_hat,
                est.exit.stderr,
                bound,
                ceiling.source
            );
            summaries.push(ExitSummary {
                strategy: strategy.name().into(),
                budget,
                trials: est.exit.trials,
                p_hat: est.exit.p_hat,
                stderr: est.exit.stderr,
                wilson_lo: est.exit.wilson_lo,
                wilson_hi: est.exit.wilson_hi,
                bound,
                bound_source: ceiling.source,
                p_exit_below_two_leaves: est.exit_below_two.p_hat,
                mean_queries: est.mean_queries,
                audit_failures: est.audit_failures,
            });
        }
    }
    run.write_csv("summary.csv", &summaries)?;
    run.write_records(&records)?;
    Ok(Status::Ok)
}

/// Runs missing trials of one algorithm, appending them to `file`.
fn ggsp_trials(
    run: &RunDir,
    file: &str,
    setup: &MainSetup,
    algorithm: &Algorithm,
    game: &GgspConfig,
) -> Result<Vec<GgspRecord>> {
    let name = algorithm.name();
    let mut rows: Vec<GgspRecord> = run
        .read_jsonl::<GgspRecord>(file)?
        .into_iter()
        .filter(|r| r.algorithm == name && r.trial < game.trials)
        .collect();
    let have: HashSet<u64> = rows.iter().map(|r| r.trial).collect();
    let missing: Vec<u64> = (0..game.trials).filter(|i| !have.contains(i)).collect();
    for chunk in missing.chunks(CHUNK) {
        let fresh = chunk
            .par_iter()
            .map(|&i| ggsp_trial(&setup.oracle, &setup.sampler, algorithm, game, i))
            .collect::<ggsp_core::Result<Vec<_>>>()?;
        run.append_jsonl(file, &fresh)?;
        rows.extend(fresh);
    }
    rows.sort_by_key(|r| r.trial);
    Ok(rows)
}

#[derive(Serialize)]
struct GgspSummary {
    algorithm: String,
    trials: u64,
    far_rate: f64,
    stderr: f64,
    wilson_lo: f64,
    wilson_hi: f64,
    mean_distance: f64,
    mean_queries: f64,
    budget_failures: usize,
    bound: Option<f64>,
}

fn summarize_ggsp(algorithm: &Algorithm, rows: &[GgspRecord], bound: Option<f64>) -> GgspSummary {
    let n = rows.len() as u64;
    let far = EventStats::from_counts(rows.iter().filter(|r| r.far).count() as u64, n);
    let dists: Vec<f64> = rows.iter().filter_map(|r| r.distance).map(|d| d as f64).collect();
    GgspSummary {
        algorithm: algorithm.name(),
        trials: n,
        far_rate: far.p_hat,
        stderr: far.stderr,
        wilson_lo: far.wilson_lo,
        wilson_hi: far.wilson_hi,
        mean_distance: dists.iter().sum::<f64>() / dists.len().max(1) as f64,
        mean_queries: rows.iter().map(|r| r.queries as f64).sum::<f64>() / n.max(1) as f64,
        budget_failures: rows.iter().filter(|r| r.failure.is_some()).count(),
        bound,
    }
}

fn game(config: &ExperimentConfig, budget: u64) -> GgspConfig {
    GgspConfig {
        trials: config.ggsp.trials,
        inputs: config.ggsp.inputs,
        threshold: config.ggsp.threshold,
        budget,
        seed: config.seed,
        key_mode: config.ggsp.key_mode,
    }
}

fn localization_for(config: &ExperimentConfig, params: &GraphParams) -> f64 {
    localization_bound(
        config.ggsp.inputs as u64,
        params.expander_degree,
        config.ggsp.threshold,
        params.expander_size,
    )
    .value
}

fn ggsp_records(run: &RunDir, s: &GgspSummary, lower_bound: bool) -> ResultRecord {
    let flags = vec![
        format!("algorithm={}", s.algorithm),
        if lower_bound { "lower_bound".into() } else { "upper_bound".into() },
    ];
    run.record("far_rate", s.far_rate, Some(s.stderr), s.bound, flags)
}

pub fn explore_graph(config: &ExperimentConfig) -> Result<Status> {
    let run = RunDir::open(config, "explore-graph")?;
    let setup = main_setup(config, &run)?;
    let mut summaries = Vec::new();
    let mut records = Vec::new();
    for strategy in config.strategies()? {
        for &walk in &config.explore.budgets {
            let algorithm = Algorithm::Explore { strategy: strategy.clone(), walk };
            let rows = ggsp_trials(&run, "trials.jsonl", &setup, &algorithm, &game(config, walk))?;
            let s = summarize_ggsp(&algorithm, &rows, None);
            println!(
                "{:<32} far {:.4} +- {:.4}  mean dist_E {:.3}",
                s.algorithm, s.far_rate, s.stderr, s.mean_distance
            );
            records.push(ggsp_records(&run, &s, false));
            summaries.push(s);
        }
    }
    run.write_csv("summary.csv", &summaries)?;
    run.write_records(&records)?;
    Ok(Status::Ok)
}

pub fn ggsp(config: &ExperimentConfig) -> Result<Status> {
    let run = RunDir::open(config, "ggsp")?;
    let setup = main_setup(config, &run)?;
    let algorithm = config.algorithm()?;
    let rows = ggsp_trials(&run, "trials.jsonl", &setup, &algorithm, &game(config, config.ggsp.budget))?;
    let exact_inputs = matches!(algorithm, Algorithm::ExactSamplerCheat);
    let bound = exact_inputs.then(|| localization_for(config, &setup.params));
    let s = summarize_ggsp(&algorithm, &rows, bound);
    println!(
        "{}: far {:.4} +- {:.4} over {} trials{}",
        s.algorithm,
        s.far_rate,
        s.stderr,
        s.trials,
        bound.map_or(String::new(), |b| format!(" (localization bound {b:.4})"))
    );
    run.write_records(&[ggsp_records(&run, &s, true)])?;
    let failures = s.budget_failures;
    run.write_csv("summary.csv", &[s])?;
    if failures > 0 {
        eprintln!("{failures} trials exhausted the query budget");
        return Ok(Status::BudgetExhausted);
    }
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct BoundRow {
    name: String,
    k: Option<usize>,
    budget: Option<u64>,
    value: f64,
    log2_value: f64,
    vacuous: bool,
    note: String,
}

pub fn bounds(config: &ExperimentConfig) -> Result<Status> {
    let run = RunDir::open(config, "bounds")?;
    let params = params(config)?;
    let schedule = params.tree_schedule();
    let k = config.graph.level.unwrap_or(schedule.levels());
    let mut rows = Vec::new();
    for &budget in &config.explore.budgets {
        let c = exit_probability_ceiling(&schedule, k, budget)?;
        rows.push(BoundRow {
            name: "exit_ceiling".into(),
            k: Some(k),
            budget: Some(budget),
            value: c.value,
            log2_value: c.log2_value,
            vacuous: c.value >= 1.0,
            note: c.source,
        });
        for w in [1, 2] {
            let log2 = exit_bound_at_budget(&schedule, k, budget, w)?;
            rows.push(BoundRow {
                name: format!("recursion_w{w}"),
                k: Some(k),
                budget: Some(budget),
                value: log2.exp2().min(1.0),
                log2_value: log2,
                vacuous: log2 >= 0.0,
                note: String::new(),
            });
        }
    }
    if params.scale_mode == ScaleMode::Paper {
        for level in paper_recursion(params.n)? {
            let closed = closed_form_exit_bound(params.n, level.k as u64)?;
            rows.push(BoundRow {
                name: "paper_recursion".into(),
                k: Some(level.k),
                budget: None,
                value: level.log2_bound.exp2(),
                log2_value: level.log2_bound,
                vacuous: level.vacuous,
                note: format!("closed form log2 = {closed}"),
            });
        }
    }
    let loc = localization_bound(
        config.ggsp.inputs as u64,
        params.expander_degree,
        config.ggsp.threshold,
        params.expander_size,
    );
    rows.push(BoundRow {
        name: "localization".into(),
        k: None,
        budget: None,
        value: loc.value,
        log2_value: loc.log2_value.unwrap_or(f64::NEG_INFINITY),
        vacuous: loc.vacuous,
        note: format!("|U| = {}, threshold = {}", config.ggsp.inputs, config.ggsp.threshold),
    });
    let sol = solve_lambda_g(&DecoratedSpec::from_params(&params))?;
    let n_e = match params.expander_size {
        Magnitude::Exact(v) => v as f64,
        Magnitude::Log2(l) => l.exp2(),
    };
    let fidelity = config.guiding.fidelity(sol.log_mass_anchor(), n_e);
    let tv = tv_budget(fidelity.clamp(0.0, 1.0), 0.0, 1.0 - loc.value)?;
    rows.push(BoundRow {
        name: "tv_budget".into(),
        k: None,
        budget: None,
        value: tv.residual,
        log2_value: tv.residual.log2(),
        vacuous: tv.residual <= 0.0,
        note: format!("fidelity {fidelity:.6}, total {:.6}", tv.total),
    });
    for r in &rows {
        println!(
            "{:<16} k={:<3} budget={:<6} value={:.6e} log2={:.4}{}",
            r.name,
            r.k.map_or("-".into(), |k| k.to_string()),
            r.budget.map_or("-".into(), |b| b.to_string()),
            r.value,
            r.log2_value,
            if r.vacuous { "  (vacuous)" } else { "" }
        );
    }
    run.append_jsonl("bounds.jsonl", &rows)?;
    run.write_csv("bounds.csv", &rows)?;
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct ReportRow {
    experiment: String,
    metric: String,
    value: f64,
    stderr: Option<f64>,
    bound: Option<f64>,
    flags: String,
}

pub fn report(config: &ExperimentConfig) -> Result<Status> {
    let dir = &config.output.dir;
    if !dir.is_dir() {
        bail!("{} does not exist; run an experiment first", dir.display());
    }
    let mut latest: BTreeMap<(String, String, String), ResultRecord> = BTreeMap::new();
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(RESULTS).exists())
        .collect();
    entries.sort();
    for sub in entries {
        for r in read_jsonl::<ResultRecord>(&sub.join(RESULTS))? {
            latest.insert((r.experiment.clone(), r.metric.clone(), r.flags.join(";")), r);
        }
    }
    let rows: Vec<ReportRow> = latest
        .into_values()
        .map(|r| ReportRow {
            experiment: r.experiment,
            metric: r.metric,
            value: r.value,
            stderr: r.stderr,
            bound: r.bound,
            flags: r.flags.join(";"),
        })
        .collect();
    let mut w = csv::Writer::from_path(dir.join("report.csv"))?;
    for row in &rows {
        println!(
            "{:<28} {:<24} {:>12.6} {:>10} {:>10}  {}",
            row.experiment,
            row.metric,
            row.value,
            row.stderr.map_or("-".into(), |s| format!("{s:.4}")),
            row.bound.map_or("-".into(), |b| format!("{b:.4}")),
            row.flags
        );
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(Status::Ok)
}
