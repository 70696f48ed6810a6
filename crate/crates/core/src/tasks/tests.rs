use super::*;
use crate::graph::families::{path, star};

/// Floyd–Warshall distances, independent of the BFS code.
fn floyd(g: &Graph) -> Vec<Vec<f64>> {
    let n = g.n();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for i in 0..n {
        d[i][i] = 0.0;
    }
    for &(i, j) in g.edges() {
        d[i][j] = 1.0;
        d[j][i] = 1.0;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

#[test]
fn smallest_barbell() {
    let inst = gen_barbell(2, 1, 0).unwrap();
    let g = &inst.graph;
    assert_eq!(g.n(), 5);
    assert_eq!(g.edges(), &[(0, 1), (1, 2), (2, 3), (3, 4)]);
    assert_eq!(inst.mask, vec![true, true, false, true, true]);
    assert_eq!(inst.nodes_with_role("bridge"), vec![2]);
}

#[test]
fn barbell_structure_at_desk_size() {
    let n_clique = barbell_split(50, 4).unwrap();
    assert_eq!(n_clique, 23);
    let g = barbell_graph(n_clique, 4).unwrap();
    assert_eq!(g.n(), 50);
    assert_eq!(g.m(), 2 * 23 * 22 / 2 + 5);
    assert_eq!(g.degree(0), 22);
    assert_eq!(g.degree(22), 23);
    assert_eq!(g.degree(24), 2);
    assert!(g.is_connected());
    assert!(barbell_split(51, 4).is_err());
    assert!(barbell_graph(1, 3).is_err());
    assert!(barbell_graph(3, 0).is_err());
}

#[test]
fn barbell_constant_features_and_swap_symmetry() {
    let inst = barbell_with_features(4, 3, vec![2.5; 11]).unwrap();
    for i in 0..11 {
        if inst.mask[i] {
            assert_eq!(inst.y[(i, 0)], 2.5);
        }
    }
    let x: Vec<f64> = (0..11).map(|i| i as f64 * 0.7 - 2.0).collect();
    let mut swapped = x.clone();
    for i in 0..4 {
        swapped.swap(i, 7 + i);
    }
    let a = barbell_targets(4, 3, &x).unwrap();
    let b = barbell_targets(4, 3, &swapped).unwrap();
    for i in 0..4 {
        assert!((a[i] - b[7 + i]).abs() < 1e-15);
        assert!((a[7 + i] - b[i]).abs() < 1e-15);
    }
}

#[test]
fn barbell_targets_have_unit_variance() {
    let mut vals = Vec::new();
    for seed in 0..400 {
        let inst = gen_barbell(23, 4, seed).unwrap();
        vals.push(inst.y[(0, 0)]);
    }
    let var = vals.iter().map(|v| v * v).sum::<f64>() / vals.len() as f64;
    assert!((var - 1.0).abs() < 0.2, "{var}");
}

#[test]
fn hand_countable_labels() {
    let (_, y) = graph_property_labels(&path(5), Property::Diameter, 0).unwrap();
    assert_eq!(y[(0, 0)], 4.0);
    let (_, y) = graph_property_labels(&star(6), Property::Eccentricity, 0).unwrap();
    assert_eq!(y.as_slice(), &[1.0, 2.0, 2.0, 2.0, 2.0, 2.0]);
    let (x, y) = graph_property_labels(&path(4), Property::Sssp, 1).unwrap();
    assert_eq!(y.as_slice(), &[1.0, 0.0, 1.0, 2.0]);
    assert_eq!(x.col(2), vec![0.0, 1.0, 0.0, 0.0]);
    assert_eq!(x.col(1), vec![1.0, 2.0, 2.0, 1.0]);
}

#[test]
fn bfs_matches_floyd_on_random_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..20 {
        let g = erdos_renyi(20, 0.3, &mut rng).unwrap();
        let fw = floyd(&g);
        for (s, row) in all_pairs_bfs(&g).iter().enumerate() {
            for (t, d) in row.iter().enumerate() {
                match d {
                    Some(d) => assert_eq!(*d as f64, fw[s][t]),
                    None => assert!(fw[s][t].is_infinite()),
                }
            }
        }
    }
}

#[test]
fn generated_property_labels_are_exact_integers() {
    for (i, property) in [Property::Diameter, Property::Sssp, Property::Eccentricity].into_iter().enumerate() {
        for generator in [RandomGraph::ErdosRenyi { p: 0.2 }, RandomGraph::BarabasiAlbert { m: 2 }] {
            let inst = gen_graph_property(property, 15, 25, generator, 100 + i as u64).unwrap();
            assert!(inst.graph.is_connected());
            assert!((15..=25).contains(&inst.n()));
            assert!(inst.y.as_slice().iter().all(|v| v.fract() == 0.0 && *v >= 0.0));
            let fw = floyd(&inst.graph);
            let ecc: Vec<f64> = fw.iter().map(|r| r.iter().copied().fold(0.0, f64::max)).collect();
            match property {
                Property::Diameter => assert_eq!(inst.y[(0, 0)], ecc.iter().copied().fold(0.0, f64::max)),
                Property::Eccentricity => assert_eq!(inst.y.as_slice(), ecc.as_slice()),
                Property::Sssp => {
                    let s = inst.nodes_with_role("source")[0];
                    assert_eq!(inst.y.as_slice(), fw[s].as_slice());
                }
            }
        }
    }
}

#[test]
fn disconnected_generator_gives_up() {
    let err = gen_graph_property(Property::Diameter, 20, 20, RandomGraph::ErdosRenyi { p: 0.0 }, 1).unwrap_err();
    assert!(matches!(err, Error::DisconnectedAfterRetries(DEFAULT_RETRY_CAP)));
}

#[test]
fn barabasi_albert_degrees() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = barabasi_albert(30, 2, &mut rng).unwrap();
    assert_eq!(g.m(), 3 + 2 * 27);
    assert!(g.is_connected());
    assert!(barabasi_albert(2, 2, &mut rng).is_err());
}

#[test]
fn ring_routing_construction() {
    let inst = gen_ring_routing(8, 5).unwrap();
    let class = inst.meta.params["class"].as_u64().unwrap() as usize;
    let mut onehot = vec![0.0; 10];
    onehot[class] = 1.0;
    assert_eq!(inst.x.row(4), onehot.as_slice());
    assert_eq!(inst.y.row(0), onehot.as_slice());
    assert_eq!(inst.nodes_with_role("clean").len(), 3);
    assert_eq!(inst.nodes_with_role("noisy").len(), 3);
    assert_eq!(inst.mask.iter().filter(|&&m| m).count(), 1);
    for v in inst.nodes_with_role("clean") {
        assert!(inst.x.row(v).iter().all(|&z| z == 0.0));
    }
    assert!(inst.nodes_with_role("noisy").iter().any(|&v| inst.x.row(v).iter().any(|&z| z != 0.0)));
    assert!(gen_ring_routing(9, 0).is_err());
    assert!(gen_ring_routing(6, 0).is_err());
}

#[test]
fn noiseless_ring_is_mirror_symmetric() {
    let n = 12;
    let inst = gen_ring_routing_with(n, 10, 0.0, 9).unwrap();
    for v in 1..n {
        assert_eq!(inst.x.row(v), inst.x.row(n - v));
    }
}

#[test]
fn both_noisy_sides_occur() {
    let sides: std::collections::BTreeSet<Vec<usize>> =
        (0..20).map(|s| gen_ring_routing(16, s).unwrap().nodes_with_role("noisy")).collect();
    assert_eq!(sides.len(), 2);
}

#[test]
fn generators_are_pure() {
    let specs = [
        TaskSpec::Barbell { n: 20, k_path: 4, feature_std: None },
        TaskSpec::GraphProperty { property: Property::Sssp, n_min: 15, n_max: 25, generator: RandomGraph::default() },
        TaskSpec::RingRouting { n: 16, classes: 10, noise: 1.0 },
    ];
    for spec in &specs {
        assert_eq!(spec.generate(42).unwrap(), spec.generate(42).unwrap());
        assert_ne!(spec.generate(42).unwrap().x, spec.generate(43).unwrap().x);
        let inst = spec.generate(1).unwrap();
        assert_eq!(inst.x.cols(), spec.dims().0);
        assert_eq!(inst.y.cols(), spec.dims().1);
    }
}

#[test]
fn task_spec_json() {
    let spec: TaskSpec = serde_json::from_str(r#"{"task": "graph-property", "property": "sssp", "generator": {"model": "barabasi-albert", "m": 2}}"#).unwrap();
    assert_eq!(spec.name(), "sssp");
    let spec: TaskSpec = serde_json::from_str(r#"{"task": "barbell", "n": 50}"#).unwrap();
    assert_eq!(spec, TaskSpec::Barbell { n: 50, k_path: 4, feature_std: None });
}

#[test]
fn mse_bands() {
    assert_eq!(oracle_mse_interpretation(0.03), Diagnosis::Ok);
    assert_eq!(oracle_mse_interpretation(1.08), Diagnosis::Oversquashing);
    assert_eq!(oracle_mse_interpretation(30.0), Diagnosis::Oversmoothing);
}

#[test]
fn ring_showcase_values() {
    let r = four_ring_showcase().unwrap();
    assert!(r.max_error < 1e-9);
    assert!(r.min_gap_mu > 0.5);
}
