use std::collections::BTreeMap;

use super::QuboProblem;

/// `E(x) = offset + sum_i h_i x_i + sum_{i<j} J_ij x_i x_j` over spins `x_i = +-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingModel {
    pub h: Vec<f64>,
    pub j: BTreeMap<(usize, usize), f64>,
    pub offset: f64,
}

impl IsingModel {
    pub fn energy(&self, spins: &[i8]) -> f64 {
        assert_eq!(spins.len(), self.h.len(), "spin vector length mismatch");
        let field: f64 = self
            .h
            .iter()
            .zip(spins)
            .map(|(h, &x)| h * f64::from(x))
            .sum();
        let coupling: f64 = self
            .j
            .iter()
            .map(|(&(a, b), v)| v * f64::from(spins[a] * spins[b]))
            .sum();
        self.offset + field + coupling
    }
}

/// Substitutes `s = (x + 1) / 2` so that the Ising energy of `x = 2s - 1`
/// equals the QUBO energy of `s`.
pub fn to_ising(p: &QuboProblem) -> IsingModel {
    let mut h = vec![0.0; p.n_vars()];
    let mut j = BTreeMap::new();
    let mut offset = p.offset();
    for (&(a, b), &q) in p.coeffs() {
        if a == b {
            h[a] += q / 2.0;
            offset += q / 2.0;
        } else {
            let quarter = q / 4.0;
            *j.entry((a, b)).or_insert(0.0) += quarter;
            h[a] += quarter;
            h[b] += quarter;
            offset += quarter;
        }
    }
    IsingModel { h, j, offset }
}

pub fn spins_from_bits(bits: &[bool]) -> Vec<i8> {
    bits.iter().map(|&b| if b { 1 } else { -1 }).collect()
}
