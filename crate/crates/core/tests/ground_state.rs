use std::collections::HashMap;
use std::sync::Arc;

use ggsp_core::expander::RegularGraph;
use ggsp_core::graph_model::{materialize, GraphParams, Magnitude, MainGraph, Topology};
use ggsp_core::spectral::{exact_reference, solve_lambda_g, DecoratedSpec, GroundStateSampler};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn sampler_frequencies_follow_the_dense_eigenvector() {
    let params = GraphParams::scaled(vec![4, 3], vec![1, 2], 10, 3, 1.0).unwrap();
    let graph = MainGraph::new(params.clone(), Arc::new(RegularGraph::petersen())).unwrap();
    let m = materialize(&graph, 10_000).unwrap();
    let dense = exact_reference(&m.adjacency).unwrap();
    let sol = Arc::new(solve_lambda_g(&DecoratedSpec::from_params(&params)).unwrap());
    let sampler = GroundStateSampler::new(sol, Magnitude::Exact(10));
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let draws = 200_000;
    let mut counts: HashMap<u64, u64> = HashMap::new();
    for _ in 0..draws {
        let v = sampler.sample_vertex(&mut rng).unwrap();
        *counts.entry(graph.index_of(&v).unwrap().unwrap()).or_default() += 1;
    }
    for (i, x) in dense.vector.iter().enumerate() {
        let p = x * x;
        let seen = counts.get(&(i as u64)).copied().unwrap_or(0) as f64 / draws as f64;
        let sigma = (p * (1.0 - p) / draws as f64).sqrt();
        assert!((seen - p).abs() <= 5.0 * sigma + 1e-9, "vertex {i}: {seen} vs {p}");
    }
}

#[test]
fn norm_ratio_matches_dense_mass_on_the_expander() {
    let params = GraphParams::scaled(vec![5, 4, 3], vec![1, 2, 3], 10, 3, 1.0).unwrap();
    let graph = MainGraph::new(params.clone(), Arc::new(RegularGraph::petersen())).unwrap();
    let m = materialize(&graph, 10_000).unwrap();
    let dense = exact_reference(&m.adjacency).unwrap();
    let on_expander: f64 = (0..10).map(|i| dense.vector[i] * dense.vector[i]).sum();
    let sol = solve_lambda_g(&DecoratedSpec::from_params(&params)).unwrap();
    let ratio = sol.norm_decomposition(Magnitude::Exact(10)).ratio;
    assert!((ratio - on_expander).abs() < 1e-10);
}
