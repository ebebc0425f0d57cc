use crate::error::{Error, Result};

use super::{Compiled, QuboProblem, QuboSample};

/// Largest residual problem accepted by [`solve_qubo_exact`].
pub const EXACT_QUBO_LIMIT: usize = 25;

fn too_large(size: usize) -> Error {
    Error::TooLarge {
        size,
        limit: EXACT_QUBO_LIMIT,
        alternative: "the annealer",
    }
}

/// `a` precedes `b` when read as bitstrings `s_0 s_1 ...`.
fn lex_less(a: u64, b: u64) -> bool {
    let diff = a ^ b;
    diff != 0 && b & (diff & diff.wrapping_neg()) != 0
}

fn mask_bits(mask: u64, n: usize) -> Vec<bool> {
    (0..n).map(|k| mask >> k & 1 == 1).collect()
}

fn mask_energy(c: &Compiled, mask: u64) -> f64 {
    let mut e = 0.0;
    for (k, nbrs) in c.nbrs.iter().enumerate() {
        if mask >> k & 1 == 0 {
            continue;
        }
        e += c.linear[k];
        e += nbrs
            .iter()
            .filter(|&&(j, _)| j > k && mask >> j & 1 == 1)
            .map(|&(_, v)| v)
            .sum::<f64>();
    }
    e
}

/// Global minimiser by Gray-code enumeration of all residual bitstrings.
/// Ties go to the lexicographically smallest bitstring.
pub fn solve_qubo_exact(p: &QuboProblem) -> Result<QuboSample> {
    let n = p.n_vars();
    if n > EXACT_QUBO_LIMIT {
        return Err(too_large(n));
    }
    let c = p.compile();
    let scale: f64 = 1.0 + p.coeffs().values().map(|v| v.abs()).sum::<f64>();
    let tol = 1e-9 * scale;

    let mut field = c.linear.clone();
    let mut mask = 0u64;
    let mut running = 0.0;
    let mut best_mask = 0u64;
    let mut best_running = 0.0;
    let mut best_exact = 0.0;

    for step in 1u64..(1u64 << n) {
        let k = step.trailing_zeros() as usize;
        let on = mask >> k & 1 == 1;
        running += Compiled::flip_delta(field[k], on);
        mask ^= 1 << k;
        let sign = if on { -1.0 } else { 1.0 };
        for &(j, v) in &c.nbrs[k] {
            field[j] += sign * v;
        }
        if running < best_running - tol {
            best_mask = mask;
            best_running = running;
            best_exact = mask_energy(&c, mask);
        } else if running <= best_running + tol {
            let exact = mask_energy(&c, mask);
            if exact < best_exact || (exact == best_exact && lex_less(mask, best_mask)) {
                best_mask = mask;
                best_running = running;
                best_exact = exact;
            }
        }
    }
    let bits = mask_bits(best_mask, n);
    let energy = p.energy(&bits);
    Ok(QuboSample { bits, energy })
}

/// Exact minimiser for problems whose variables split into a small
/// enumerated set plus blocks that only interact through it.
///
/// Every assignment of `enumerated` is tried; for each, the remaining
/// variables fall into connected components (of the coupling graph with the
/// enumerated variables removed) that are minimised independently. Both the
/// enumerated set and every component must respect [`EXACT_QUBO_LIMIT`].
pub fn solve_qubo_exact_conditioned(p: &QuboProblem, enumerated: &[usize]) -> Result<QuboSample> {
    let n = p.n_vars();
    if enumerated.len() > EXACT_QUBO_LIMIT {
        return Err(too_large(enumerated.len()));
    }
    let c = p.compile();
    let mut is_enum = vec![false; n];
    for &v in enumerated {
        if v >= n {
            return Err(Error::InvalidParameter(format!(
                "variable {v} out of range"
            )));
        }
        is_enum[v] = true;
    }

    // components of the residual coupling graph
    let mut comp_of = vec![usize::MAX; n];
    let mut comps: Vec<Vec<usize>> = Vec::new();
    for start in 0..n {
        if is_enum[start] || comp_of[start] != usize::MAX {
            continue;
        }
        let id = comps.len();
        comp_of[start] = id;
        let mut members = vec![start];
        let mut head = 0;
        while head < members.len() {
            let v = members[head];
            head += 1;
            for &(u, _) in &c.nbrs[v] {
                if !is_enum[u] && comp_of[u] == usize::MAX {
                    comp_of[u] = id;
                    members.push(u);
                }
            }
        }
        if members.len() > EXACT_QUBO_LIMIT {
            return Err(too_large(members.len()));
        }
        members.sort_unstable();
        comps.push(members);
    }

    let mut best: Option<(f64, Vec<bool>)> = None;
    let mut bits = vec![false; n];
    for emask in 0u64..(1u64 << enumerated.len()) {
        for (k, &v) in enumerated.iter().enumerate() {
            bits[v] = emask >> k & 1 == 1;
        }
        let mut total = p.offset();
        for (k, &v) in enumerated.iter().enumerate() {
            if !bits[v] {
                continue;
            }
            total += c.linear[v];
            total += c.nbrs[v]
                .iter()
                .filter(|&&(u, _)| is_enum[u] && bits[u] && enumerated[..k].contains(&u))
                .map(|&(_, q)| q)
                .sum::<f64>();
        }
        for comp in &comps {
            // linear terms conditioned on the enumerated assignment
            let lin: Vec<f64> = comp
                .iter()
                .map(|&v| {
                    c.linear[v]
                        + c.nbrs[v]
                            .iter()
                            .filter(|&&(u, _)| is_enum[u] && bits[u])
                            .map(|&(_, q)| q)
                            .sum::<f64>()
                })
                .collect();
            let mut local_best = (0.0, 0u64);
            for cmask in 1u64..(1u64 << comp.len()) {
                let mut e = 0.0;
                for (a, &v) in comp.iter().enumerate() {
                    if cmask >> a & 1 == 0 {
                        continue;
                    }
                    e += lin[a];
                    for (b, &u) in comp.iter().enumerate().skip(a + 1) {
                        if cmask >> b & 1 == 1 {
                            e += p.coeff(v, u);
                        }
                    }
                }
                if e < local_best.0 {
                    local_best = (e, cmask);
                }
            }
            total += local_best.0;
            for (a, &v) in comp.iter().enumerate() {
                bits[v] = local_best.1 >> a & 1 == 1;
            }
        }
        if best.as_ref().is_none_or(|(e, _)| total < *e) {
            best = Some((total, bits.clone()));
        }
    }
    let (_, bits) = best.expect("at least one assignment is enumerated");
    let energy = p.energy(&bits);
    Ok(QuboSample { bits, energy })
}
