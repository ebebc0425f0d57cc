use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

use super::{Compiled, QuboProblem, QuboSample};

/// Single-bit-flip Metropolis schedule with a geometric temperature ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub sweeps: usize,
    pub restarts: usize,
    pub t_initial: f64,
    pub t_final: f64,
    pub seed: u64,
}

impl AnnealSchedule {
    pub const DEFAULT_SWEEPS: usize = 2000;
    pub const DEFAULT_RESTARTS: usize = 10;
    pub const DEFAULT_T_FINAL: f64 = 0.01;

    /// Ladder from `10 * max|Q|` down to `0.01`.
    pub fn for_problem(p: &QuboProblem, sweeps: usize, restarts: usize, seed: u64) -> Self {
        let t_initial = (10.0 * p.max_abs_coeff()).max(2.0 * Self::DEFAULT_T_FINAL);
        Self {
            sweeps,
            restarts,
            t_initial,
            t_final: Self::DEFAULT_T_FINAL,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweeps == 0 || self.restarts == 0 {
            return Err(Error::InvalidParameter(
                "sweeps and restarts must be positive".into(),
            ));
        }
        if !(self.t_final > 0.0 && self.t_final < self.t_initial && self.t_initial.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "temperatures must satisfy 0 < t_final < t_initial, got {} and {}",
                self.t_final, self.t_initial
            )));
        }
        Ok(())
    }

    /// Temperature used during sweep `k` (0-based).
    pub fn temperature(&self, k: usize) -> f64 {
        if self.sweeps == 1 {
            return self.t_final;
        }
        let frac = k as f64 / (self.sweeps - 1) as f64;
        self.t_initial * (self.t_final / self.t_initial).powf(frac)
    }
}

fn run_once(p: &QuboProblem, c: &Compiled, sched: &AnnealSchedule, restart: usize) -> QuboSample {
    let n = p.n_vars();
    let mut rng = rng::stream(sched.seed, &[restart as u64]);
    let mut state: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
    let mut field: Vec<f64> = c.linear.clone();
    for (nbrs, _) in c.nbrs.iter().zip(&state).filter(|(_, on)| **on) {
        for &(j, v) in nbrs {
            field[j] += v;
        }
    }
    let mut energy = p.energy(&state);
    let mut best = state.clone();
    let mut best_energy = energy;

    for sweep in 0..sched.sweeps {
        let beta = 1.0 / sched.temperature(sweep);
        for k in 0..n {
            let delta = Compiled::flip_delta(field[k], state[k]);
            if delta > 0.0 && rng.random::<f64>() >= (-beta * delta).exp() {
                continue;
            }
            let sign = if state[k] { -1.0 } else { 1.0 };
            state[k] = !state[k];
            energy += delta;
            for &(j, v) in &c.nbrs[k] {
                field[j] += sign * v;
            }
            if energy < best_energy - 1e-12 * (1.0 + best_energy.abs()) {
                best_energy = energy;
                best.copy_from_slice(&state);
            }
        }
    }
    let energy = p.energy(&best);
    QuboSample { bits: best, energy }
}

/// Simulated annealing over the residual variables; the best sample across
/// all restarts is returned. Restarts run in parallel on independent streams
/// derived from the schedule seed, so the result does not depend on the
/// thread count.
pub fn solve_qubo_anneal(p: &QuboProblem, sched: &AnnealSchedule) -> Result<QuboSample> {
    sched.validate()?;
    let n = p.n_vars();
    if p.coeffs().is_empty() || n == 0 {
        return Ok(QuboSample {
            bits: vec![false; n],
            energy: p.offset(),
        });
    }
    let c = p.compile();
    let samples: Vec<QuboSample> = (0..sched.restarts)
        .into_par_iter()
        .map(|r| run_once(p, &c, sched, r))
        .collect();
    Ok(samples
        .into_iter()
        .reduce(|best, s| {
            if s.energy < best.energy || (s.energy == best.energy && s.bits < best.bits) {
                s
            } else {
                best
            }
        })
        .expect("at least one restart"))
}
