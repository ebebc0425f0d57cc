//! The epsilon-neighbourhood graph of a chunk.

use crate::dataset::PointSet;
use crate::error::{Error, Result};
use crate::partition::Chunk;

/// Weighted undirected graph joining chunk points closer than epsilon.
///
/// Vertices are numbered `0..n` in chunk order; `vertex_ids` maps them back
/// to positions in the source point set. There are no self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodGraph {
    adjacency: Vec<Vec<u32>>,
    weights: Vec<f64>,
    epsilon: Option<f64>,
    vertex_ids: Vec<usize>,
}

impl NeighborhoodGraph {
    /// Graph from an explicit edge list; vertex ids are `0..weights.len()`.
    pub fn from_edges(weights: Vec<f64>, edges: &[(usize, usize)]) -> Result<Self> {
        let n = weights.len();
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::Validation(format!(
                "vertex weight {w} is not positive"
            )));
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidParameter(format!(
                    "edge ({a}, {b}) out of range"
                )));
            }
            if a == b {
                continue;
            }
            adjacency[a].push(b as u32);
            adjacency[b].push(a as u32);
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self {
            adjacency,
            weights,
            epsilon: None,
            vertex_ids: (0..n).collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, v: usize) -> f64 {
        self.weights[v]
    }

    pub fn epsilon(&self) -> Option<f64> {
        self.epsilon
    }

    pub fn vertex_ids(&self) -> &[usize] {
        &self.vertex_ids
    }

    /// Sorted neighbour list of `v`.
    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn is_adjacent(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].binary_search(&(b as u32)).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Edges `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(i, list)| {
            list.iter()
                .map(|&j| j as usize)
                .filter(move |&j| j > i)
                .map(move |j| (i, j))
        })
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Neighbourhood weight over own weight; zero for isolated vertices.
    pub fn weighted_degree(&self, v: usize) -> f64 {
        let nbr: f64 = self.adjacency[v]
            .iter()
            .map(|&u| self.weights[u as usize])
            .sum();
        nbr / self.weights[v]
    }

    /// Weight-averaged weighted degree of the whole graph.
    pub fn average_weighted_degree(&self) -> f64 {
        let num: f64 = (0..self.n())
            .map(|v| self.weights[v] * self.weighted_degree(v))
            .sum();
        num / self.total_weight()
    }

    /// True iff no two vertices of `set` are adjacent.
    pub fn is_independent(&self, set: &[usize]) -> bool {
        let mut member = vec![false; self.n()];
        for &v in set {
            member[v] = true;
        }
        set.iter()
            .all(|&v| self.adjacency[v].iter().all(|&u| !member[u as usize]))
    }

    /// True iff `set` is independent and no further vertex can be added.
    pub fn is_maximal_independent(&self, set: &[usize]) -> bool {
        if !self.is_independent(set) {
            return false;
        }
        let mut covered = vec![false; self.n()];
        for &v in set {
            covered[v] = true;
            for &u in &self.adjacency[v] {
                covered[u as usize] = true;
            }
        }
        covered.into_iter().all(|c| c)
    }

    /// Connected components, each sorted, ordered by smallest vertex.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.n()];
        let mut out = Vec::new();
        for start in 0..self.n() {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut comp = vec![start];
            let mut head = 0;
            while head < comp.len() {
                let v = comp[head];
                head += 1;
                for &u in &self.adjacency[v] {
                    if !seen[u as usize] {
                        seen[u as usize] = true;
                        comp.push(u as usize);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Subgraph induced by `vertices` (renumbered in the given order).
    pub fn induced(&self, vertices: &[usize]) -> Self {
        let mut local = vec![u32::MAX; self.n()];
        for (k, &v) in vertices.iter().enumerate() {
            local[v] = k as u32;
        }
        let adjacency = vertices
            .iter()
            .map(|&v| {
                let mut list: Vec<u32> = self.adjacency[v]
                    .iter()
                    .map(|&u| local[u as usize])
                    .filter(|&u| u != u32::MAX)
                    .collect();
                list.sort_unstable();
                list
            })
            .collect();
        Self {
            adjacency,
            weights: vertices.iter().map(|&v| self.weights[v]).collect(),
            epsilon: self.epsilon,
            vertex_ids: vertices.iter().map(|&v| self.vertex_ids[v]).collect(),
        }
    }
}

/// Builds the graph on `chunk` in which two points are adjacent iff their
/// distance is strictly below `epsilon`. All-pairs scan, O(d k^2).
pub fn build_graph<P: PointSet + ?Sized>(
    ps: &P,
    chunk: &Chunk,
    epsilon: f64,
) -> Result<NeighborhoodGraph> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let ids = &chunk.member_ids;
    let n = ids.len();
    let metric = ps.metric();
    let mut adjacency: Vec<Vec<u32>> = vec![Vec::new(); n];
    for i in 0..n {
        let xi = ps.coords(ids[i]);
        for j in (i + 1)..n {
            let d = metric.eval(xi, ps.coords(ids[j]));
            if d == 0.0 {
                return Err(Error::DuplicatePoints {
                    first: ids[i],
                    second: ids[j],
                });
            }
            if d < epsilon {
                adjacency[i].push(j as u32);
                adjacency[j].push(i as u32);
            }
        }
    }
    Ok(NeighborhoodGraph {
        adjacency,
        weights: ids.iter().map(|&i| ps.weight(i)).collect(),
        epsilon: Some(epsilon),
        vertex_ids: ids.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Metric, WeightedDataset};
    use proptest::prelude::*;

    fn line(xs: &[f64]) -> WeightedDataset {
        WeightedDataset::from_coords(xs.iter().map(|&x| vec![x]).collect(), Metric::Euclidean)
            .unwrap()
    }

    fn all(n: usize) -> Chunk {
        Chunk::new((0..n).collect())
    }

    #[test]
    fn path_from_points_on_a_line() {
        let ds = line(&[1.0, 2.0, 3.0, 4.0]);
        let g = build_graph(&ds, &all(4), 1.5).unwrap();
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 2), (2, 3)]);
    }

    #[test]
    fn small_epsilon_gives_no_edges() {
        let ds = line(&[0.0, 0.7, 2.0, 5.0]);
        let g = build_graph(&ds, &all(4), 0.5).unwrap();
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn distance_equal_to_epsilon_is_not_an_edge() {
        let ds =
            WeightedDataset::from_coords(vec![vec![0.0, 0.0], vec![3.0, 4.0]], Metric::Euclidean)
                .unwrap();
        let g = build_graph(&ds, &all(2), 5.0).unwrap();
        assert!(!g.is_adjacent(0, 1));
    }

    #[test]
    fn duplicate_points_are_rejected() {
        let ds = line(&[1.0, 2.0, 1.0]);
        assert!(matches!(
            build_graph(&ds, &all(3), 1.0),
            Err(Error::DuplicatePoints {
                first: 0,
                second: 2
            })
        ));
    }

    #[test]
    fn weighted_degree_examples() {
        let path = NeighborhoodGraph::from_edges(vec![1.0; 3], &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(path.weighted_degree(1), 2.0);
        assert_eq!(path.weighted_degree(0), 1.0);
        assert_eq!(path.average_weighted_degree(), 4.0 / 3.0);

        let lonely = NeighborhoodGraph::from_edges(vec![3.0], &[]).unwrap();
        assert_eq!(lonely.weighted_degree(0), 0.0);
        assert_eq!(lonely.average_weighted_degree(), 0.0);

        let star =
            NeighborhoodGraph::from_edges(vec![2.0, 1.0, 1.0, 1.0], &[(0, 1), (0, 2), (0, 3)])
                .unwrap();
        assert_eq!(star.weighted_degree(0), 1.5);

        let pair = NeighborhoodGraph::from_edges(vec![1.0, 1.0], &[(0, 1)]).unwrap();
        assert_eq!(pair.average_weighted_degree(), 1.0);
    }

    #[test]
    fn components_and_induced_subgraph() {
        let g = NeighborhoodGraph::from_edges(vec![1.0, 2.0, 3.0, 4.0, 5.0], &[(0, 3), (1, 2)])
            .unwrap();
        assert_eq!(g.components(), vec![vec![0, 3], vec![1, 2], vec![4]]);
        let sub = g.induced(&[1, 2]);
        assert_eq!(sub.weights(), &[2.0, 3.0]);
        assert!(sub.is_adjacent(0, 1));
        assert_eq!(sub.vertex_ids(), &[1, 2]);
    }

    fn random_points(seed: u64, n: usize, d: usize) -> WeightedDataset {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        WeightedDataset::from_weighted(
            (0..n)
                .map(|_| {
                    (
                        (0..d).map(|_| rng.random_range(0.0..10.0)).collect(),
                        rng.random_range(0.5..3.0),
                    )
                })
                .collect(),
            Metric::Euclidean,
        )
        .unwrap()
    }

    proptest! {
        #[test]
        fn adjacency_matches_relation_and_is_monotone(
            seed in 0u64..10_000, n in 1usize..40, d in 1usize..4,
            eps in 0.1f64..6.0, grow in 0.0f64..3.0,
        ) {
            let ds = random_points(seed, n, d);
            let g = build_graph(&ds, &all(n), eps).unwrap();
            let g2 = build_graph(&ds, &all(n), eps + grow).unwrap();
            for i in 0..n {
                prop_assert!(!g.is_adjacent(i, i));
                for j in 0..n {
                    prop_assert_eq!(g.is_adjacent(i, j), g.is_adjacent(j, i));
                    if i != j {
                        prop_assert_eq!(g.is_adjacent(i, j), ds.dist(i, j) < eps);
                    }
                    if g.is_adjacent(i, j) {
                        prop_assert!(g2.is_adjacent(i, j));
                    }
                }
            }
        }

        #[test]
        fn weighted_degree_matches_brute_force(seed in 0u64..10_000, n in 1usize..30, eps in 0.5f64..5.0) {
            let ds = random_points(seed, n, 2);
            let g = build_graph(&ds, &all(n), eps).unwrap();
            for v in 0..n {
                let brute: f64 = (0..n)
                    .filter(|&u| u != v && ds.dist(u, v) < eps)
                    .map(|u| ds.weight(u))
                    .sum();
                prop_assert!((g.weighted_degree(v) - brute / ds.weight(v)).abs() <= 1e-12 * (1.0 + brute));
            }
        }
    }
}
