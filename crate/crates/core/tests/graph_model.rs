use std::collections::VecDeque;
use std::sync::Arc;

use ggsp_core::expander::RegularGraph;
use ggsp_core::graph_model::{materialize, GraphParams, MainGraph, Materialized, Topology, Vertex};

fn petersen_graph(d: &[u64], l: &[u64]) -> MainGraph {
    let params = GraphParams::scaled(d.to_vec(), l.to_vec(), 10, 3, 1.0).unwrap();
    MainGraph::new(params, Arc::new(RegularGraph::petersen())).unwrap()
}

/// Minimum number of expander vertices on any path, by 0-1 BFS over the explicit graph.
fn expander_vertex_count(m: &Materialized<Vertex>, src: usize) -> Vec<u64> {
    let cost = |i: usize| u64::from(matches!(m.nodes[i], Vertex::Expander(_)));
    let mut dist = vec![u64::MAX; m.len()];
    dist[src] = cost(src);
    let mut dq = VecDeque::from([src]);
    while let Some(u) = dq.pop_front() {
        for &w in &m.adjacency[u] {
            let nd = dist[u] + cost(w);
            if nd < dist[w] {
                dist[w] = nd;
                if cost(w) == 0 {
                    dq.push_front(w);
                } else {
                    dq.push_back(w);
                }
            }
        }
    }
    dist
}

#[test]
fn index_and_vertex_are_dual() {
    let g = petersen_graph(&[5, 4, 3], &[1, 2, 3]);
    for i in 0..g.node_count() {
        let v = g.node_at(i).unwrap();
        assert_eq!(g.index_of(&v).unwrap(), Some(i));
    }
    let pad = g.padding_node(7);
    assert!(pad.is_isolated());
    assert_eq!(g.index_of(&pad).unwrap(), None);
    assert!(g.neighbors(&pad).unwrap().is_empty());
}

#[test]
fn adjacency_is_symmetric_with_expected_degrees() {
    let g = petersen_graph(&[5, 4, 3], &[1, 2, 3]);
    let m = materialize(&g, 10_000).unwrap();
    for (u, row) in m.adjacency.iter().enumerate() {
        for &w in row {
            assert!(m.adjacency[w].contains(&u));
        }
        if let Vertex::Expander(_) = m.nodes[u] {
            // 3 expander edges plus (5-4) type-1 and (4-3) type-2 tree roots
            assert_eq!(row.len(), 5);
        }
    }
    let trees = g.params().count_tree_vertices(1).unwrap() + g.params().count_tree_vertices(2).unwrap();
    assert_eq!((u64::try_from(trees).unwrap() + 1) * 10, g.node_count());
}

#[test]
fn dist_e_matches_explicit_search() {
    let g = petersen_graph(&[4, 3], &[1, 2]);
    let m = materialize(&g, 10_000).unwrap();
    for src in (0..m.len()).step_by(7) {
        let reference = expander_vertex_count(&m, src);
        for (dst, &expected) in m.nodes.iter().zip(&reference) {
            assert_eq!(g.dist_e(&m.nodes[src], dst).unwrap(), expected, "{:?} -> {dst:?}", m.nodes[src]);
        }
    }
}

#[test]
fn dist_e_triangle_inequality() {
    let g = petersen_graph(&[4, 3], &[1, 2]);
    let m = materialize(&g, 10_000).unwrap();
    let picks: Vec<&Vertex> = m.nodes.iter().step_by(5).collect();
    for u in &picks {
        for v in &picks {
            let uv = g.dist_e(u, v).unwrap();
            assert_eq!(uv, g.dist_e(v, u).unwrap());
            for w in picks.iter().step_by(3) {
                assert!(g.dist_e(u, w).unwrap() <= uv + g.dist_e(v, w).unwrap());
            }
        }
    }
}

#[test]
fn petersen_localization_counts() {
    // from one anchor, dist_E >= 2 holds for 9 of 10 anchors and >= 3 for the 6 at hop distance 2
    let g = petersen_graph(&[4, 3], &[1, 2]);
    let root = Vertex::Expander(0);
    let far = |t: u64| (0..10).filter(|&a| g.dist_e(&root, &Vertex::Expander(a)).unwrap() >= t).count();
    assert_eq!(far(2), 9);
    assert_eq!(far(3), 6);
}
