//! Minimum-cost epsilon-dense subsets as a QUBO.
//!
//! Point `i` is covered when some selected point lies in its closed
//! neighbourhood (itself included). The covering inequality
//! `sum_j N_ij s_j >= 1` becomes the equality `sum_j N_ij s_j - 1 - xi_i = 0`
//! with an integer slack `0 <= xi_i <= |N_i| - 1` written in binary, and the
//! squared residual is added to the cost with multiplier `lambda`.

use crate::error::{Error, Result};
use crate::graph::NeighborhoodGraph;

use super::{QuboProblem, VarOrigin};

/// Coefficients of the binary slack encoding for a variable taking values
/// `0..n_states`.
///
/// With `m = floor(log2(n_states))` the coefficients are `1, 2, ..., 2^(m-1)`
/// followed by `n_states - 2^m`, so every value in range is representable and
/// no bit pattern exceeds `n_states - 1`. A trailing zero coefficient (power
/// of two `n_states`) is dropped unless it is the only one.
pub fn slack_coeffs(n_states: u64) -> Result<Vec<u64>> {
    if n_states == 0 {
        return Err(Error::InvalidParameter(
            "slack variable needs at least one state".into(),
        ));
    }
    let m = n_states.ilog2();
    let mut coeffs: Vec<u64> = (0..m).map(|k| 1u64 << k).collect();
    let last = n_states - (1u64 << m);
    if last > 0 || coeffs.is_empty() {
        coeffs.push(last);
    }
    Ok(coeffs)
}

/// Smallest integer-safe multiplier above the correctness bound `n * max(c)`.
pub fn default_msc_lambda(costs: &[f64]) -> f64 {
    costs.len() as f64 * costs.iter().copied().fold(0.0, f64::max) + 1.0
}

/// Builds the covering QUBO over selection variables `0..n` followed by the
/// slack bits of each constraint in order. Zero-valued slack coefficients
/// contribute nothing and get no variable.
pub fn build_msc_qubo(g: &NeighborhoodGraph, costs: &[f64], lambda: f64) -> Result<QuboProblem> {
    let n = g.n();
    if costs.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: costs.len(),
        });
    }
    if let Some(c) = costs.iter().find(|c| !(**c > 0.0 && c.is_finite())) {
        return Err(Error::InvalidParameter(format!("cost {c} is not positive")));
    }
    let bound = n as f64 * costs.iter().copied().fold(0.0, f64::max);
    if !lambda.is_finite() || lambda <= bound {
        return Err(Error::InvalidParameter(format!(
            "penalty {lambda} must exceed n * max(cost) = {bound}"
        )));
    }

    let mut origin: Vec<VarOrigin> = (0..n).map(VarOrigin::Vertex).collect();
    // per constraint: (variable, coefficient) terms of the residual
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut terms: Vec<(usize, f64)> = std::iter::once(i)
            .chain(g.neighbors(i).iter().map(|&j| j as usize))
            .map(|j| (j, 1.0))
            .collect();
        let n_states = (g.degree(i) + 1) as u64;
        for (bit, gamma) in slack_coeffs(n_states)?.into_iter().enumerate() {
            if gamma == 0 {
                continue;
            }
            terms.push((origin.len(), -(gamma as f64)));
            origin.push(VarOrigin::Slack { constraint: i, bit });
        }
        rows.push(terms);
    }

    let mut p = QuboProblem::new(origin);
    for (v, &c) in costs.iter().enumerate() {
        p.add(v, v, c);
    }
    // lambda * (sum_z a_z z - 1)^2 with z binary
    for terms in &rows {
        for (k, &(z, a)) in terms.iter().enumerate() {
            p.add(z, z, lambda * (a * a - 2.0 * a));
            for &(y, b) in &terms[k + 1..] {
                p.add(z, y, 2.0 * lambda * a * b);
            }
        }
        p.add_offset(lambda);
    }
    Ok(p)
}

/// Selected points of a full assignment of an MSC problem.
pub fn decode_selection(p: &QuboProblem, full: &[bool]) -> Vec<usize> {
    p.selected_vertices(full)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Metric, WeightedDataset};
    use crate::graph::build_graph;
    use crate::mwis::is_eps_dense;
    use crate::partition::Chunk;
    use crate::qubo::{solve_qubo_exact, solve_qubo_exact_conditioned};

    #[test]
    fn slack_examples() {
        assert_eq!(slack_coeffs(5).unwrap(), vec![1, 2, 1]);
        assert_eq!(slack_coeffs(1).unwrap(), vec![0]);
        assert_eq!(slack_coeffs(8).unwrap(), vec![1, 2, 4]);
        assert_eq!(slack_coeffs(2).unwrap(), vec![1]);
        assert_eq!(slack_coeffs(3).unwrap(), vec![1, 1]);
        assert!(slack_coeffs(0).is_err());
    }

    #[test]
    fn slack_encoding_covers_exact_range() {
        for n_states in 1..=64u64 {
            let g = slack_coeffs(n_states).unwrap();
            let mut seen = vec![false; n_states as usize];
            for mask in 0u64..(1 << g.len()) {
                let v: u64 = (0..g.len())
                    .filter(|&k| mask >> k & 1 == 1)
                    .map(|k| g[k])
                    .sum();
                assert!(v < n_states, "n_states {n_states}: value {v}");
                seen[v as usize] = true;
            }
            assert!(
                seen.into_iter().all(|s| s),
                "n_states {n_states} misses a value"
            );
        }
    }

    #[test]
    fn two_close_points_pick_cheaper() {
        let g = NeighborhoodGraph::from_edges(vec![1.0, 1.0], &[(0, 1)]).unwrap();
        let p = build_msc_qubo(&g, &[1.0, 2.0], 5.0).unwrap();
        let sol = solve_qubo_exact(&p).unwrap();
        let full = p.expand(&sol.bits);
        assert_eq!(decode_selection(&p, &full), vec![0]);
        assert_eq!(sol.energy, 1.0);
    }

    #[test]
    fn single_point_covers_itself() {
        let g = NeighborhoodGraph::from_edges(vec![1.0], &[]).unwrap();
        let p = build_msc_qubo(&g, &[2.5], default_msc_lambda(&[2.5])).unwrap();
        assert_eq!(p.n_vars(), 1);
        let sol = solve_qubo_exact(&p).unwrap();
        assert_eq!(sol.bits, vec![true]);
        assert_eq!(sol.energy, 2.5);
    }

    #[test]
    fn four_points_on_a_line() {
        let ds = WeightedDataset::from_coords(
            vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]],
            Metric::Euclidean,
        )
        .unwrap();
        let all = [0, 1, 2, 3];
        let g = build_graph(&ds, &Chunk::new(all.to_vec()), 1.5).unwrap();
        let costs = [1.0; 4];
        let p = build_msc_qubo(&g, &costs, default_msc_lambda(&costs)).unwrap();
        let sol = solve_qubo_exact_conditioned(&p, &[0, 1, 2, 3]).unwrap();
        let full = p.expand(&sol.bits);
        let chosen = decode_selection(&p, &full);
        assert_eq!(chosen.len(), 2);
        assert_eq!(sol.energy, 2.0);
        assert!(is_eps_dense(&ds, &chosen, &all, 1.5));
        assert_eq!(solve_qubo_exact(&p).unwrap().energy, 2.0);
    }

    #[test]
    fn penalty_at_bound_is_rejected() {
        let g = NeighborhoodGraph::from_edges(vec![1.0, 1.0], &[(0, 1)]).unwrap();
        assert!(build_msc_qubo(&g, &[1.0, 2.0], 4.0).is_err());
        assert!(build_msc_qubo(&g, &[1.0, 2.0], 4.0001).is_ok());
        assert!(build_msc_qubo(&g, &[1.0], 5.0).is_err());
    }
}
