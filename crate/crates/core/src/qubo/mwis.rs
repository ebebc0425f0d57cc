use crate::error::{Error, Result};
use crate::graph::NeighborhoodGraph;

use super::QuboProblem;

/// Default relative margin of the pairwise penalty over the larger weight.
pub const DEFAULT_GAMMA: f64 = 0.1;

/// MWIS QUBO with penalty `(1 + gamma) * max(w_i, w_j)` on every edge and
/// `-w_i` on the diagonal. Any penalty strictly above the larger endpoint
/// weight makes every minimiser an independent set of maximum weight.
pub fn build_mwis_qubo(g: &NeighborhoodGraph, gamma: f64) -> Result<QuboProblem> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "penalty margin gamma must be positive, got {gamma}"
        )));
    }
    Ok(build_mwis_qubo_with(g, |wi, wj| (1.0 + gamma) * wi.max(wj)))
}

/// MWIS QUBO with an arbitrary edge penalty `penalty(w_i, w_j)`.
pub fn build_mwis_qubo_with(
    g: &NeighborhoodGraph,
    penalty: impl Fn(f64, f64) -> f64,
) -> QuboProblem {
    let mut p = QuboProblem::with_vertices(g.n());
    for v in 0..g.n() {
        p.add(v, v, -g.weight(v));
    }
    for (i, j) in g.edges() {
        p.add(i, j, penalty(g.weight(i), g.weight(j)));
    }
    p
}
