//! Chunk collapsing, per-level coarsening and the full hierarchy loop.
//!
//! Each level splits the current nodes into chunks and keeps an
//! epsilon-separated set of representatives per chunk. Every other chunk
//! point collapses into its nearest representative. The radius grows by a
//! constant factor between levels until a single node remains.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{dedupe_with_map, PointSet, WeightedDataset};
use crate::error::{Error, Result};
use crate::graph::{build_graph, NeighborhoodGraph};
use crate::mwis::{exact_mwis_by_components, greedy_mwis, repair_to_maximal, IndependentSet};
use crate::partition::{partition, Chunk, PartitionConfig};
use crate::qubo::{build_mwis_qubo, reduce_qubo, solve_qubo_anneal, AnnealSchedule};
use crate::rng;
use crate::tree::{ClusterNode, ClusterTree, NodeSet, TreeMetadata, TreeParams, TreeStatus};

const SOLVER_STREAM: u64 = 0;
const COLLAPSE_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    #[default]
    Greedy,
    Exact,
    Anneal,
}

impl std::str::FromStr for Solver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(Solver::Greedy),
            "exact" => Ok(Solver::Exact),
            "anneal" => Ok(Solver::Anneal),
            other => Err(Error::InvalidParameter(format!(
                "unknown solver '{other}' (expected greedy, exact or anneal)"
            ))),
        }
    }
}

impl std::fmt::Display for Solver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Solver::Greedy => "greedy",
            Solver::Exact => "exact",
            Solver::Anneal => "anneal",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub solver: Solver,
    pub gamma: f64,
    pub sweeps: usize,
    pub restarts: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            solver: Solver::Greedy,
            gamma: crate::qubo::DEFAULT_GAMMA,
            sweeps: AnnealSchedule::DEFAULT_SWEEPS,
            restarts: AnnealSchedule::DEFAULT_RESTARTS,
        }
    }
}

impl SolverConfig {
    pub fn new(solver: Solver) -> Self {
        Self {
            solver,
            ..Self::default()
        }
    }
}

/// Maximal epsilon-separated representatives of a chunk graph.
///
/// The annealing route solves the reduced MWIS QUBO and then repairs the
/// best sample into a maximal independent set, so every route returns one.
pub fn solve_chunk(g: &NeighborhoodGraph, cfg: &SolverConfig, seed: u64) -> Result<IndependentSet> {
    match cfg.solver {
        Solver::Greedy => Ok(greedy_mwis(g, seed)),
        Solver::Exact => exact_mwis_by_components(g),
        Solver::Anneal => {
            let qubo = reduce_qubo(&build_mwis_qubo(g, cfg.gamma)?);
            let sched = AnnealSchedule::for_problem(&qubo, cfg.sweeps, cfg.restarts, seed);
            let sample = solve_qubo_anneal(&qubo, &sched)?;
            let full = qubo.expand(&sample.bits);
            let mut selected = vec![false; g.n()];
            for v in qubo.selected_vertices(&full) {
                selected[v] = true;
            }
            Ok(repair_to_maximal(g, &selected))
        }
    }
}

/// A Voronoi cell of a chunk around one representative.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    /// Position of the representative in the source point set.
    pub representative: usize,
    /// Positions of all points assigned to the cell, ascending.
    pub members: Vec<usize>,
    pub weight: f64,
    pub coords: Vec<f64>,
}

/// Assigns every chunk point to its nearest representative and accumulates
/// weights. `reps` holds local indices into `chunk.member_ids`. Points at
/// equal distance from several representatives are given to one of them by
/// a uniform draw, taken in ascending point order from a stream seeded by
/// `seed`. Cell coordinates are the representative's, or the weighted cell
/// centroid when `use_centroids` is set.
pub fn collapse_chunk<P: PointSet + ?Sized>(
    ps: &P,
    chunk: &Chunk,
    reps: &IndependentSet,
    use_centroids: bool,
    seed: u64,
) -> Result<Vec<Cell>> {
    if reps.is_empty() {
        return Err(Error::InvalidParameter(
            "cannot collapse onto an empty representative set".into(),
        ));
    }
    let rep_pos: Vec<usize> = reps
        .vertex_ids
        .iter()
        .map(|&v| chunk.member_ids[v])
        .collect();
    let mut cells: Vec<Cell> = rep_pos
        .iter()
        .map(|&r| Cell {
            representative: r,
            members: Vec::new(),
            weight: 0.0,
            coords: vec![0.0; ps.dim()],
        })
        .collect();

    let mut order = chunk.member_ids.clone();
    order.sort_unstable();
    let mut rng = rng::stream(seed, &[]);
    let mut nearest = Vec::new();
    for &p in &order {
        let mut best = f64::INFINITY;
        nearest.clear();
        for (k, &r) in rep_pos.iter().enumerate() {
            let d = ps.dist(p, r);
            if d < best {
                best = d;
                nearest.clear();
                nearest.push(k);
            } else if d == best {
                nearest.push(k);
            }
        }
        let k = if nearest.len() == 1 {
            nearest[0]
        } else {
            nearest[rng.random_range(0..nearest.len())]
        };
        let cell = &mut cells[k];
        let w = ps.weight(p);
        cell.members.push(p);
        cell.weight += w;
        if use_centroids {
            for (acc, x) in cell.coords.iter_mut().zip(ps.coords(p)) {
                *acc += w * x;
            }
        }
    }
    for cell in &mut cells {
        if use_centroids {
            let total = cell.weight;
            for c in &mut cell.coords {
                *c /= total;
            }
        } else {
            cell.coords = ps.coords(cell.representative).to_vec();
        }
    }
    Ok(cells)
}

/// Knobs of a single coarsening level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelConfig {
    pub epsilon: f64,
    pub kappa: usize,
    pub solver: SolverConfig,
    pub use_centroids: bool,
    pub seed: u64,
    /// Index of the level being built; keys the random streams.
    pub level: usize,
}

/// Cells of one coarsening pass over all points of `ps`, in chunk order.
/// Chunks are processed in parallel; every chunk draws from its own stream
/// keyed by (seed, level, chunk index).
pub fn coarsen_points<P: PointSet + ?Sized>(ps: &P, cfg: &LevelConfig) -> Result<Vec<Cell>> {
    if ps.is_empty() {
        return Err(Error::EmptyInput);
    }
    let ids: Vec<usize> = (0..ps.len()).collect();
    let chunks = partition(ps, &ids, PartitionConfig::new(cfg.kappa)?);
    let per_chunk: Vec<Vec<Cell>> = chunks
        .par_iter()
        .enumerate()
        .map(|(k, chunk)| {
            let g = build_graph(ps, chunk, cfg.epsilon)?;
            let path = [cfg.level as u64, k as u64];
            let solver_seed = rng::derive_seed(cfg.seed, &[path[0], path[1], SOLVER_STREAM]);
            let reps = solve_chunk(&g, &cfg.solver, solver_seed)?;
            let collapse_seed = rng::derive_seed(cfg.seed, &[path[0], path[1], COLLAPSE_STREAM]);
            collapse_chunk(ps, chunk, &reps, cfg.use_centroids, collapse_seed)
        })
        .collect::<Result<_>>()?;
    Ok(per_chunk.into_iter().flatten().collect())
}

/// One coarsening pass over a node list. New nodes get consecutive ids
/// starting at `next_id`. Cells that land on identical coordinates are merged
/// so the next level again consists of pairwise distinct points.
pub fn coarsen_level(
    nodes: &[ClusterNode],
    metric: crate::dataset::Metric,
    cfg: &LevelConfig,
    next_id: usize,
) -> Result<Vec<ClusterNode>> {
    let view = NodeSet::new(nodes, metric);
    let cells = coarsen_points(&view, cfg)?;

    let mut out: Vec<ClusterNode> = Vec::with_capacity(cells.len());
    let mut slot: HashMap<Vec<u64>, usize> = HashMap::with_capacity(cells.len());
    for cell in cells {
        let key: Vec<u64> = cell.coords.iter().map(|c| (c + 0.0).to_bits()).collect();
        let members = cell.members.iter().map(|&p| nodes[p].id);
        match slot.get(&key) {
            Some(&k) => {
                out[k].weight += cell.weight;
                out[k].member_ids.extend(members);
            }
            None => {
                slot.insert(key, out.len());
                out.push(ClusterNode {
                    id: next_id + out.len(),
                    level: cfg.level,
                    coords: cell.coords,
                    weight: cell.weight,
                    member_ids: members.collect(),
                });
            }
        }
    }
    Ok(out)
}

/// Progress record emitted after each level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelReport {
    pub level: usize,
    pub epsilon: f64,
    pub n_nodes: usize,
    pub elapsed: Duration,
}

/// Builds the full hierarchy. See [`build_cluster_tree_with`].
pub fn build_cluster_tree(ds: &WeightedDataset, params: &TreeParams) -> Result<ClusterTree> {
    build_cluster_tree_with(ds, params, |_| {})
}

/// Deduplicates `ds`, then coarsens level after level with radius
/// `eps0 * alpha^(level - 1)` until one node remains or `max_levels`
/// coarsening passes have run (reported as [`TreeStatus::Truncated`]).
pub fn build_cluster_tree_with(
    ds: &WeightedDataset,
    params: &TreeParams,
    mut on_level: impl FnMut(&LevelReport),
) -> Result<ClusterTree> {
    params.validate()?;
    let (unique, point_leaf) = dedupe_with_map(ds);
    let mut nodes: Vec<ClusterNode> = unique
        .points()
        .iter()
        .enumerate()
        .map(|(id, p)| ClusterNode {
            id,
            level: 0,
            coords: p.coords.clone(),
            weight: p.weight,
            member_ids: Vec::new(),
        })
        .collect();
    let mut current: Vec<usize> = (0..nodes.len()).collect();
    let mut epsilons = Vec::new();
    let solver = SolverConfig {
        solver: params.solver,
        gamma: params.gamma,
        sweeps: params.sweeps,
        restarts: params.restarts,
    };

    let mut level = 0;
    while current.len() > 1 && level < params.max_levels {
        level += 1;
        let started = Instant::now();
        let epsilon = params.epsilon_at(level);
        let cfg = LevelConfig {
            epsilon,
            kappa: params.kappa,
            solver,
            use_centroids: params.use_centroids,
            seed: params.seed,
            level,
        };
        let layer: Vec<ClusterNode> = current.iter().map(|&id| nodes[id].clone()).collect();
        let next = coarsen_level(&layer, ds.metric(), &cfg, nodes.len())?;
        current = next.iter().map(|n| n.id).collect();
        nodes.extend(next);
        epsilons.push(epsilon);
        on_level(&LevelReport {
            level,
            epsilon,
            n_nodes: current.len(),
            elapsed: started.elapsed(),
        });
    }

    let complete = current.len() == 1;
    let metadata = TreeMetadata {
        params: *params,
        metric: ds.metric(),
        dataset_hash: ds.content_hash(),
        n_points: ds.len(),
        n_levels: level + 1,
        status: if complete {
            TreeStatus::Complete
        } else {
            TreeStatus::Truncated
        },
        root_id: complete.then(|| current[0]),
        epsilons,
    };
    ClusterTree::from_parts(metadata, point_leaf, nodes)
}

/// Picks a starting radius at which roughly `target_fraction` of the points
/// would collapse in the first level.
///
/// Up to eight first-level chunks are sampled; candidate radii are the
/// nearest-neighbour distances inside those chunks, and a bisection over them
/// finds the smallest radius whose greedy coarsening removes at least the
/// target fraction of the sampled points.
pub fn estimate_eps0(
    ds: &WeightedDataset,
    kappa: usize,
    target_fraction: f64,
    seed: u64,
) -> Result<f64> {
    if !(target_fraction > 0.0 && target_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "collapse fraction must lie in (0, 1), got {target_fraction}"
        )));
    }
    let unique = crate::dataset::dedupe(ds);
    let ids: Vec<usize> = (0..unique.len()).collect();
    let chunks = partition(&unique, &ids, PartitionConfig::new(kappa.max(2))?);
    let step = chunks.len().div_ceil(8).max(1);
    let sample: Vec<&Chunk> = chunks
        .iter()
        .step_by(step)
        .filter(|c| c.len() > 1)
        .collect();

    let mut candidates: Vec<f64> = sample
        .iter()
        .flat_map(|c| {
            c.member_ids.iter().map(|&a| {
                c.member_ids
                    .iter()
                    .filter(|&&b| b != a)
                    .map(|&b| unique.dist(a, b))
                    .fold(f64::INFINITY, f64::min)
            })
        })
        .collect();
    if candidates.is_empty() {
        return Ok(1.0);
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let total: usize = sample.iter().map(|c| c.len()).sum();

    let collapsed_fraction = |eps: f64| -> Result<f64> {
        let mut kept = 0;
        for (k, c) in sample.iter().enumerate() {
            let g = build_graph(&unique, c, eps)?;
            kept += greedy_mwis(&g, rng::derive_seed(seed, &[k as u64])).len();
        }
        Ok(1.0 - kept as f64 / total as f64)
    };

    let (mut lo, mut hi) = (0, candidates.len() - 1);
    if collapsed_fraction(candidates[hi].next_up())? < target_fraction {
        return Ok(candidates[hi].next_up());
    }
    while lo < hi {
        let mid = (lo + hi) / 2;
        if collapsed_fraction(candidates[mid].next_up())? >= target_fraction {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(candidates[lo].next_up())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Metric, WeightedDataset};
    use crate::mwis::{is_eps_dense, is_eps_separated};

    fn line(xs: &[f64]) -> WeightedDataset {
        WeightedDataset::from_coords(xs.iter().map(|&x| vec![x]).collect(), Metric::Euclidean)
            .unwrap()
    }

    #[test]
    fn collapse_assigns_to_nearest_representative() {
        let ds = line(&[0.0, 1.0, 3.0]);
        let chunk = Chunk::new(vec![0, 1, 2]);
        let g = build_graph(&ds, &chunk, 2.0).unwrap();
        let reps = IndependentSet::from_vertices(&g, vec![0, 2]);
        let cells = collapse_chunk(&ds, &chunk, &reps, false, 0).unwrap();
        assert_eq!(cells[0].members, vec![0, 1]);
        assert_eq!(cells[1].members, vec![2]);
        assert_eq!((cells[0].weight, cells[1].weight), (2.0, 1.0));
        assert_eq!(cells[0].coords, vec![0.0]);

        let cells = collapse_chunk(&ds, &chunk, &reps, true, 0).unwrap();
        assert_eq!(cells[0].coords, vec![0.5]);
        assert_eq!(cells[1].coords, vec![3.0]);
    }

    #[test]
    fn collapse_onto_every_point_is_identity() {
        let ds = WeightedDataset::from_weighted(
            vec![(vec![0.0], 2.0), (vec![5.0], 3.0), (vec![9.0], 0.5)],
            Metric::Euclidean,
        )
        .unwrap();
        let chunk = Chunk::new(vec![0, 1, 2]);
        let g = build_graph(&ds, &chunk, 1.0).unwrap();
        let reps = IndependentSet::from_vertices(&g, vec![0, 1, 2]);
        let cells = collapse_chunk(&ds, &chunk, &reps, true, 0).unwrap();
        let weights: Vec<f64> = cells.iter().map(|c| c.weight).collect();
        assert_eq!(weights, vec![2.0, 3.0, 0.5]);
        assert!(cells.iter().all(|c| c.members == vec![c.representative]));
    }

    #[test]
    fn equidistant_point_goes_to_one_random_representative() {
        let ds = line(&[0.0, 1.0, 2.0]);
        let chunk = Chunk::new(vec![0, 1, 2]);
        let g = build_graph(&ds, &chunk, 1.5).unwrap();
        let reps = IndependentSet::from_vertices(&g, vec![0, 2]);
        let mut seen = [false, false];
        for seed in 0..64 {
            let cells = collapse_chunk(&ds, &chunk, &reps, false, seed).unwrap();
            assert_eq!(cells[0].weight + cells[1].weight, 3.0);
            let winner = usize::from(cells[1].members.contains(&1));
            assert!(cells[winner].members.contains(&1));
            seen[winner] = true;
        }
        assert_eq!(seen, [true, true]);
    }

    #[test]
    fn empty_representatives_rejected() {
        let ds = line(&[0.0]);
        let chunk = Chunk::new(vec![0]);
        let reps = IndependentSet {
            vertex_ids: vec![],
            total_weight: 0.0,
        };
        assert!(collapse_chunk(&ds, &chunk, &reps, true, 0).is_err());
    }

    fn level_cfg(epsilon: f64, kappa: usize, solver: Solver) -> LevelConfig {
        LevelConfig {
            epsilon,
            kappa,
            solver: SolverConfig::new(solver),
            use_centroids: true,
            seed: 3,
            level: 1,
        }
    }

    #[test]
    fn far_points_do_not_merge() {
        let ds = line(&[0.0, 10.0]);
        let cells = coarsen_points(&ds, &level_cfg(1.0, 10, Solver::Greedy)).unwrap();
        assert_eq!(cells.len(), 2);
    }

    #[test]
    fn two_pairs_collapse_into_two_nodes() {
        let ds = line(&[0.0, 0.5, 10.0, 10.5]);
        for solver in [Solver::Greedy, Solver::Exact, Solver::Anneal] {
            let cells = coarsen_points(&ds, &level_cfg(1.0, 10, solver)).unwrap();
            assert_eq!(cells.len(), 2, "{solver}");
            assert_eq!(cells[0].weight, 2.0);
            assert_eq!(cells[1].weight, 2.0);
            assert_eq!(cells[0].coords, vec![0.25]);
            assert_eq!(cells[1].coords, vec![10.25]);
        }
    }

    #[test]
    fn clique_collapses_to_one_node() {
        let ds = line(&[0.0, 0.1, 0.2, 0.3, 0.4]);
        let cells = coarsen_points(&ds, &level_cfg(1.0, 10, Solver::Exact)).unwrap();
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0].weight, 5.0);
    }

    #[test]
    fn representatives_are_separated_and_dense_per_chunk() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let rows: Vec<Vec<f64>> = (0..400)
            .map(|_| vec![rng.random_range(0.0..20.0), rng.random_range(0.0..20.0)])
            .collect();
        let ds = WeightedDataset::from_coords(rows, Metric::Euclidean).unwrap();
        let eps = 1.7;
        let ids: Vec<usize> = (0..ds.len()).collect();
        for chunk in partition(&ds, &ids, PartitionConfig::new(50).unwrap()) {
            let g = build_graph(&ds, &chunk, eps).unwrap();
            let reps = solve_chunk(&g, &SolverConfig::new(Solver::Greedy), 1).unwrap();
            let rep_pos: Vec<usize> = reps
                .vertex_ids
                .iter()
                .map(|&v| chunk.member_ids[v])
                .collect();
            assert!(is_eps_separated(&ds, &rep_pos, eps));
            assert!(is_eps_dense(&ds, &rep_pos, &chunk.member_ids, eps));
            for cell in collapse_chunk(&ds, &chunk, &reps, false, 0).unwrap() {
                for &m in &cell.members {
                    assert!(ds.dist(m, cell.representative) < eps);
                    for &o in &cell.members {
                        assert!(ds.dist(m, o) <= 2.0 * eps);
                    }
                }
            }
        }
    }

    #[test]
    fn separable_instance_recovers_clusters() {
        let ds = line(&[0.0, 1.0, 10.0, 11.0]);
        let mut params = TreeParams::new(5.0, 1.3, 10);
        for solver in [Solver::Greedy, Solver::Exact, Solver::Anneal] {
            params.solver = solver;
            let tree = build_cluster_tree(&ds, &params).unwrap();
            let l = tree.labels_at_level(1).unwrap().labels;
            assert_eq!(l[0], l[1]);
            assert_eq!(l[2], l[3]);
            assert_ne!(l[0], l[2]);
            assert_eq!(tree.status(), TreeStatus::Complete);
        }
    }

    #[test]
    fn singleton_dataset_is_just_a_root() {
        let ds = line(&[4.0]);
        let tree = build_cluster_tree(&ds, &TreeParams::new(1.0, 1.5, 4)).unwrap();
        assert_eq!(tree.n_levels(), 1);
        assert_eq!(tree.root_id(), Some(0));
        assert!(tree.metadata().epsilons.is_empty());
    }

    #[test]
    fn level_limit_truncates() {
        let ds = line(&[0.0, 100.0, 200.0]);
        let mut params = TreeParams::new(0.1, 1.1, 4);
        params.max_levels = 3;
        let tree = build_cluster_tree(&ds, &params).unwrap();
        assert_eq!(tree.status(), TreeStatus::Truncated);
        assert_eq!(tree.n_levels(), 4);
        assert_eq!(tree.root_id(), None);
    }

    #[test]
    fn invalid_parameters_rejected() {
        let ds = line(&[0.0, 1.0]);
        assert!(build_cluster_tree(&ds, &TreeParams::new(0.0, 1.3, 4)).is_err());
        assert!(build_cluster_tree(&ds, &TreeParams::new(1.0, 1.0, 4)).is_err());
        assert!(build_cluster_tree(&ds, &TreeParams::new(1.0, 1.3, 1)).is_err());
    }

    #[test]
    fn duplicates_are_merged_before_coarsening() {
        let ds = line(&[0.0, 0.0, 0.0, 5.0]);
        let tree = build_cluster_tree(&ds, &TreeParams::new(1.0, 2.0, 4)).unwrap();
        assert_eq!(tree.level(0).len(), 2);
        assert_eq!(tree.node(0).weight, 3.0);
        let leaves = tree.labels_at_level(0).unwrap();
        assert_eq!(leaves.labels, vec![0, 0, 0, 1]);
        for l in 0..tree.n_levels() {
            assert_eq!(tree.level_weight(l), 4.0);
        }
    }

    #[test]
    fn eps0_estimate_hits_target_fraction() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(10);
        let rows: Vec<Vec<f64>> = (0..2000)
            .map(|_| vec![rng.random_range(0.0..50.0), rng.random_range(0.0..50.0)])
            .collect();
        let ds = WeightedDataset::from_coords(rows, Metric::Euclidean).unwrap();
        let eps = estimate_eps0(&ds, 250, 0.1, 0).unwrap();
        assert!(eps > 0.0);
        let cells = coarsen_points(&ds, &level_cfg(eps, 250, Solver::Greedy)).unwrap();
        let collapsed = 1.0 - cells.len() as f64 / ds.len() as f64;
        assert!((0.05..0.2).contains(&collapsed), "collapsed {collapsed}");
        assert!(estimate_eps0(&ds, 250, 1.5, 0).is_err());
    }
}
