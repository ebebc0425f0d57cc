//! Maximum-weight independent sets on chunk graphs, plus the epsilon
//! separation and density predicates they are checked against.
//!
//! On an epsilon-neighbourhood graph an independent set is exactly an
//! epsilon-separated subset, and every maximal one is epsilon-dense in the
//! chunk.

use rand::Rng;

use crate::dataset::PointSet;
use crate::error::{Error, Result};
use crate::graph::NeighborhoodGraph;
use crate::rng;

/// Largest graph accepted by [`exact_mwis`].
pub const EXACT_MWIS_LIMIT: usize = 26;

/// Relative slack used when comparing floating-point degrees and weights.
const REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct IndependentSet {
    /// Sorted local vertex indices.
    pub vertex_ids: Vec<usize>,
    pub total_weight: f64,
}

impl IndependentSet {
    pub fn from_vertices(g: &NeighborhoodGraph, mut vertices: Vec<usize>) -> Self {
        vertices.sort_unstable();
        vertices.dedup();
        let total_weight = vertices.iter().map(|&v| g.weight(v)).sum();
        Self {
            vertex_ids: vertices,
            total_weight,
        }
    }

    pub fn len(&self) -> usize {
        self.vertex_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertex_ids.is_empty()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.vertex_ids.binary_search(&v).is_ok()
    }
}

/// Greedy heuristic: repeatedly take a vertex of minimum weighted degree
/// (ties drawn uniformly from a stream seeded by `seed`), then discard it and
/// its neighbours. Degrees are taken over the vertices still in play.
///
/// The result is always a maximal independent set. Runs in O(n^2 + m).
pub fn greedy_mwis(g: &NeighborhoodGraph, seed: u64) -> IndependentSet {
    let n = g.n();
    let mut rng = rng::stream(seed, &[]);
    let mut alive = vec![true; n];
    let mut remaining = n;
    let mut nbr_weight: Vec<f64> = (0..n)
        .map(|v| g.neighbors(v).iter().map(|&u| g.weight(u as usize)).sum())
        .collect();
    let mut chosen = Vec::new();
    let mut ties = Vec::new();

    while remaining > 0 {
        let mut best = f64::INFINITY;
        ties.clear();
        for v in (0..n).filter(|&v| alive[v]) {
            let deg = nbr_weight[v].max(0.0) / g.weight(v);
            let slack = REL_TOL * best.max(1.0);
            if ties.is_empty() || deg < best - slack {
                best = deg;
                ties.clear();
                ties.push(v);
            } else if deg <= best + slack {
                ties.push(v);
            }
        }
        let x = if ties.len() == 1 {
            ties[0]
        } else {
            ties[rng.random_range(0..ties.len())]
        };
        chosen.push(x);

        let removed: Vec<usize> = std::iter::once(x)
            .chain(g.neighbors(x).iter().map(|&u| u as usize))
            .filter(|&u| alive[u])
            .collect();
        for &u in &removed {
            alive[u] = false;
        }
        remaining -= removed.len();
        for &u in &removed {
            let w = g.weight(u);
            for &t in g.neighbors(u) {
                if alive[t as usize] {
                    nbr_weight[t as usize] -= w;
                }
            }
        }
    }
    IndependentSet::from_vertices(g, chosen)
}

struct BranchAndBound<'a> {
    weights: &'a [f64],
    nbr_mask: Vec<u32>,
    tol: f64,
    best_weight: f64,
    best_set: u32,
}

impl BranchAndBound<'_> {
    fn mask_weight(&self, mut mask: u32) -> f64 {
        let mut total = 0.0;
        while mask != 0 {
            total += self.weights[mask.trailing_zeros() as usize];
            mask &= mask - 1;
        }
        total
    }

    // Include-first branching over ascending vertices visits maximal sets in
    // lexicographic order, so keeping only strict improvements yields the
    // lexicographically smallest optimum.
    fn search(&mut self, cand: u32, set: u32, weight: f64) {
        if cand == 0 {
            if weight > self.best_weight + self.tol {
                self.best_weight = weight;
                self.best_set = set;
            }
            return;
        }
        if weight + self.mask_weight(cand) <= self.best_weight + self.tol {
            return;
        }
        let v = cand.trailing_zeros() as usize;
        let bit = 1u32 << v;
        self.search(
            cand & !bit & !self.nbr_mask[v],
            set | bit,
            weight + self.weights[v],
        );
        // Dropping a vertex with no live neighbours can never pay off.
        if cand & self.nbr_mask[v] != 0 {
            self.search(cand & !bit, set, weight);
        }
    }
}

/// Exact maximum-weight independent set by branch and bound; ties resolve
/// to the lexicographically smallest sorted vertex list.
pub fn exact_mwis(g: &NeighborhoodGraph) -> Result<IndependentSet> {
    let n = g.n();
    if n > EXACT_MWIS_LIMIT {
        return Err(Error::TooLarge {
            size: n,
            limit: EXACT_MWIS_LIMIT,
            alternative: "the greedy or anneal solver",
        });
    }
    let nbr_mask = (0..n)
        .map(|v| g.neighbors(v).iter().fold(0u32, |m, &u| m | (1 << u)))
        .collect();
    let mut bb = BranchAndBound {
        weights: g.weights(),
        nbr_mask,
        tol: REL_TOL * g.total_weight(),
        best_weight: f64::NEG_INFINITY,
        best_set: 0,
    };
    let all = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    bb.search(all, 0, 0.0);
    let vertices = (0..n).filter(|&v| bb.best_set & (1 << v) != 0).collect();
    Ok(IndependentSet::from_vertices(g, vertices))
}

/// Exact solve applied per connected component; the size limit of
/// [`exact_mwis`] applies to each component rather than the whole graph.
pub fn exact_mwis_by_components(g: &NeighborhoodGraph) -> Result<IndependentSet> {
    let mut chosen = Vec::new();
    for comp in g.components() {
        if comp.len() == 1 {
            chosen.push(comp[0]);
            continue;
        }
        let sub = g.induced(&comp);
        let local = exact_mwis(&sub)?;
        chosen.extend(local.vertex_ids.iter().map(|&k| comp[k]));
    }
    Ok(IndependentSet::from_vertices(g, chosen))
}

/// Turns an arbitrary vertex selection into a maximal independent set:
/// selected vertices are admitted heaviest first when they do not conflict,
/// then the remaining vertices fill any gaps in the same order.
pub fn repair_to_maximal(g: &NeighborhoodGraph, selected: &[bool]) -> IndependentSet {
    let n = g.n();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        selected[b]
            .cmp(&selected[a])
            .then(g.weight(b).total_cmp(&g.weight(a)))
            .then(a.cmp(&b))
    });
    let mut blocked = vec![false; n];
    let mut chosen = Vec::new();
    for v in order {
        if blocked[v] {
            continue;
        }
        chosen.push(v);
        blocked[v] = true;
        for &u in g.neighbors(v) {
            blocked[u as usize] = true;
        }
    }
    IndependentSet::from_vertices(g, chosen)
}

/// True iff every distinct pair in `ids` is at distance at least `epsilon`.
pub fn is_eps_separated<P: PointSet + ?Sized>(ps: &P, ids: &[usize], epsilon: f64) -> bool {
    ids.iter().enumerate().all(|(k, &a)| {
        ids[k + 1..]
            .iter()
            .all(|&b| a == b || ps.dist(a, b) >= epsilon)
    })
}

/// True iff every point of `universe` lies strictly within `epsilon` of some
/// member of `ids`.
pub fn is_eps_dense<P: PointSet + ?Sized>(
    ps: &P,
    ids: &[usize],
    universe: &[usize],
    epsilon: f64,
) -> bool {
    universe
        .iter()
        .all(|&u| ids.iter().any(|&s| ps.dist(u, s) < epsilon))
}
