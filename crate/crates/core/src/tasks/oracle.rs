use std::collections::VecDeque;

use crate::graph::Graph;

/// Hop distances from `source`; `None` for unreachable nodes.
pub fn bfs_distances(g: &Graph, source: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; g.n()];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].expect("queued nodes are reached");
        for &v in g.neighbors(u) {
            if dist[v].is_none() {
                dist[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

pub fn all_pairs_bfs(g: &Graph) -> Vec<Vec<Option<usize>>> {
    (0..g.n()).map(|s| bfs_distances(g, s)).collect()
}

/// Largest distance from each node. Panics on a disconnected graph.
pub fn eccentricities(g: &Graph) -> Vec<usize> {
    all_pairs_bfs(g)
        .into_iter()
        .map(|row| row.into_iter().map(|d| d.expect("connected graph")).max().unwrap_or(0))
        .collect()
}

pub fn diameter(g: &Graph) -> usize {
    eccentricities(g).into_iter().max().unwrap_or(0)
}
