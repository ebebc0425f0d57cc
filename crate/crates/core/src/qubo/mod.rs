//! Quadratic unconstrained binary optimisation.
//!
//! A [`QuboProblem`] minimises `offset + sum_{i<=j} Q_ij s_i s_j` over
//! bitstrings `s`. Diagonal entries are the linear terms. Variables fixed by
//! preprocessing are remembered together with the mapping from the residual
//! variables back to the original ones, so solutions of a reduced problem can
//! be expanded to full assignments.

mod anneal;
mod cover;
mod exact;
mod ising;
mod mwis;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use anneal::{solve_qubo_anneal, AnnealSchedule};
pub use cover::{build_msc_qubo, decode_selection, default_msc_lambda, slack_coeffs};
pub use exact::{solve_qubo_exact, solve_qubo_exact_conditioned, EXACT_QUBO_LIMIT};
pub use ising::{spins_from_bits, to_ising, IsingModel};
pub use mwis::{build_mwis_qubo, build_mwis_qubo_with, DEFAULT_GAMMA};

/// What an original QUBO variable stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarOrigin {
    Vertex(usize),
    Slack { constraint: usize, bit: usize },
}

/// A bitstring over the residual variables together with its energy.
#[derive(Debug, Clone, PartialEq)]
pub struct QuboSample {
    pub bits: Vec<bool>,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuboProblem {
    coeffs: BTreeMap<(usize, usize), f64>,
    offset: f64,
    /// Residual variable -> original variable.
    free_vars: Vec<usize>,
    /// Original variable -> fixed value.
    fixed: BTreeMap<usize, bool>,
    /// Indexed by original variable.
    var_origin: Vec<VarOrigin>,
}

impl QuboProblem {
    pub fn new(var_origin: Vec<VarOrigin>) -> Self {
        Self {
            coeffs: BTreeMap::new(),
            offset: 0.0,
            free_vars: (0..var_origin.len()).collect(),
            fixed: BTreeMap::new(),
            var_origin,
        }
    }

    /// Problem over `n` variables that all stand for vertices.
    pub fn with_vertices(n: usize) -> Self {
        Self::new((0..n).map(VarOrigin::Vertex).collect())
    }

    /// Accumulates `value` into `Q_ij` (order of `i`, `j` is irrelevant).
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        assert!(
            i < self.n_vars() && j < self.n_vars(),
            "variable out of range"
        );
        let key = (i.min(j), i.max(j));
        let entry = self.coeffs.entry(key).or_insert(0.0);
        *entry += value;
        if *entry == 0.0 {
            self.coeffs.remove(&key);
        }
    }

    pub fn add_offset(&mut self, value: f64) {
        self.offset += value;
    }

    pub fn n_vars(&self) -> usize {
        self.free_vars.len()
    }

    pub fn n_original_vars(&self) -> usize {
        self.var_origin.len()
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        self.coeffs
            .get(&(i.min(j), i.max(j)))
            .copied()
            .unwrap_or(0.0)
    }

    /// Nonzero coefficients keyed by `(i, j)` with `i <= j`.
    pub fn coeffs(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.coeffs
    }

    pub fn fixed(&self) -> &BTreeMap<usize, bool> {
        &self.fixed
    }

    /// Original index of each residual variable.
    pub fn free_vars(&self) -> &[usize] {
        &self.free_vars
    }

    pub fn var_origin(&self) -> &[VarOrigin] {
        &self.var_origin
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn energy(&self, bits: &[bool]) -> f64 {
        assert_eq!(bits.len(), self.n_vars(), "bitstring length mismatch");
        self.offset
            + self
                .coeffs
                .iter()
                .filter(|(&(i, j), _)| bits[i] && bits[j])
                .map(|(_, v)| v)
                .sum::<f64>()
    }

    /// Full assignment over the original variables.
    pub fn expand(&self, bits: &[bool]) -> Vec<bool> {
        assert_eq!(bits.len(), self.n_vars(), "bitstring length mismatch");
        let mut full = vec![false; self.n_original_vars()];
        for (&var, &value) in &self.fixed {
            full[var] = value;
        }
        for (k, &var) in self.free_vars.iter().enumerate() {
            full[var] = bits[k];
        }
        full
    }

    /// Vertices set to one in a full assignment.
    pub fn selected_vertices(&self, full: &[bool]) -> Vec<usize> {
        self.var_origin
            .iter()
            .zip(full)
            .filter_map(|(origin, &on)| match origin {
                VarOrigin::Vertex(v) if on => Some(*v),
                _ => None,
            })
            .collect()
    }

    pub(crate) fn compile(&self) -> Compiled {
        let n = self.n_vars();
        let mut linear = vec![0.0; n];
        let mut nbrs: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (&(i, j), &v) in &self.coeffs {
            if i == j {
                linear[i] += v;
            } else {
                nbrs[i].push((j, v));
                nbrs[j].push((i, v));
            }
        }
        Compiled { linear, nbrs }
    }

    /// Plain-text form: a header line `n offset`, then one `i j value` line
    /// per nonzero coefficient with `i <= j`.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.n_vars(), self.offset);
        for (&(i, j), v) in &self.coeffs {
            let _ = writeln!(out, "{i} {j} {v}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::Parse {
            row: line + 1,
            message: msg.to_owned(),
        };
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (hl, header) = lines.next().ok_or(Error::EmptyInput)?;
        let mut parts = header.split_whitespace();
        let n: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(hl, "expected variable count"))?;
        let offset: f64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(hl, "expected offset"))?;
        let mut p = Self::with_vertices(n);
        p.offset = offset;
        for (ln, line) in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            let (i, j, v) = match f.as_slice() {
                [i, j, v] => (
                    i.parse::<usize>().map_err(|_| bad(ln, "bad index"))?,
                    j.parse::<usize>().map_err(|_| bad(ln, "bad index"))?,
                    v.parse::<f64>().map_err(|_| bad(ln, "bad value"))?,
                ),
                _ => return Err(bad(ln, "expected 'i j value'")),
            };
            if i >= n || j >= n {
                return Err(bad(ln, "index out of range"));
            }
            p.add(i, j, v);
        }
        Ok(p)
    }
}

/// Adjacency form used by the solvers.
pub(crate) struct Compiled {
    pub linear: Vec<f64>,
    pub nbrs: Vec<Vec<(usize, f64)>>,
}

impl Compiled {
    /// Energy change from flipping bit `k` given its current local field
    /// `linear[k] + sum_j Q_kj s_j`.
    #[inline]
    pub fn flip_delta(field: f64, on: bool) -> f64 {
        if on {
            -field
        } else {
            field
        }
    }
}

/// Fixes every variable without quadratic couplings whose linear term is
/// negative to one, folding it into the offset. For problems built from a
/// neighbourhood graph these are exactly the isolated vertices, which belong
/// to every maximal independent set.
pub fn reduce_qubo(p: &QuboProblem) -> QuboProblem {
    let n = p.n_vars();
    let mut coupled = vec![false; n];
    for &(i, j) in p.coeffs.keys() {
        if i != j {
            coupled[i] = true;
            coupled[j] = true;
        }
    }
    let fix: Vec<bool> = (0..n).map(|i| !coupled[i] && p.coeff(i, i) < 0.0).collect();

    let mut new_index = vec![usize::MAX; n];
    let mut free_vars = Vec::new();
    let mut fixed = p.fixed.clone();
    let mut offset = p.offset;
    for i in 0..n {
        if fix[i] {
            fixed.insert(p.free_vars[i], true);
            offset += p.coeff(i, i);
        } else {
            new_index[i] = free_vars.len();
            free_vars.push(p.free_vars[i]);
        }
    }
    let coeffs = p
        .coeffs
        .iter()
        .filter(|(&(i, _), _)| !fix[i])
        .map(|(&(i, j), &v)| ((new_index[i], new_index[j]), v))
        .collect();
    QuboProblem {
        coeffs,
        offset,
        free_vars,
        fixed,
        var_origin: p.var_origin.clone(),
    }
}
