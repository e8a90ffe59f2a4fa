//! Brute-force ground truth and small statevector physics.
//!
//! Assignment `x` is the integer whose bit `k - 1` is variable `k`. The clause
//! Hamiltonian is diagonal in this basis with energy `E(x)` = number of
//! violated clauses, so imaginary-time evolution multiplies each amplitude by
//! `exp(-dt E(x))` per step and the solution state is flat on `E(x) = 0`.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use thiserror::Error;

use crate::cnf::{Assignment, Instance};

/// Largest instance the census enumerates.
pub const COUNT_BOUND: usize = 24;
/// Largest instance whose solutions are materialized.
pub const SOLUTION_BOUND: usize = 16;
/// Largest instance held as a statevector.
pub const STATEVECTOR_BOUND: usize = 24;

/// Eigenvalues at or below this are treated as zero.
const EIGEN_CLIP: f64 = 1e-12;
const CHUNK: usize = 1 << 12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("instance has {n} variables, bound is {bound}")]
    InstanceTooLarge { n: usize, bound: usize },
    #[error("instance has no solutions; the solution state has zero norm")]
    ZeroNorm,
    #[error("invalid bipartition: {0}")]
    InvalidBipartition(String),
    #[error("invalid evolution parameters: {0}")]
    InvalidParameters(String),
}

/// Clause as (mask, pattern): violated iff `x & mask == pattern`.
fn clause_masks(instance: &Instance) -> Vec<(u64, u64)> {
    instance
        .clauses()
        .iter()
        .map(|c| {
            let mut mask = 0u64;
            let mut pattern = 0u64;
            for (v, f) in c.vars().into_iter().zip(c.forbidden()) {
                mask |= 1 << (v - 1);
                if f {
                    pattern |= 1 << (v - 1);
                }
            }
            (mask, pattern)
        })
        .collect()
}

fn energy(masks: &[(u64, u64)], x: u64) -> usize {
    masks.iter().filter(|&&(m, p)| x & m == p).count()
}

/// `E(x)` for every assignment, in index order.
pub fn energies(instance: &Instance) -> Result<Vec<u32>, OracleError> {
    let n = instance.num_vars();
    if n > STATEVECTOR_BOUND {
        return Err(OracleError::InstanceTooLarge {
            n,
            bound: STATEVECTOR_BOUND,
        });
    }
    let masks = clause_masks(instance);
    let mut out = vec![0u32; 1 << n];
    out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
        let base = (c * CHUNK) as u64;
        for (i, e) in chunk.iter_mut().enumerate() {
            *e = energy(&masks, base + i as u64) as u32;
        }
    });
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Census {
    pub n: usize,
    pub p: u128,
    /// Number of assignments at each energy.
    pub histogram: BTreeMap<usize, u128>,
    /// Satisfying assignments in index order, when `n` is small enough.
    pub solutions: Option<Vec<Assignment>>,
}

impl Census {
    pub fn solution_indices(&self) -> Option<Vec<u64>> {
        self.solutions.as_ref().map(|s| {
            s.iter()
                .map(|a| {
                    a.fixed()
                        .filter(|&(_, v)| v)
                        .fold(0u64, |acc, (k, _)| acc | 1 << (k - 1))
                })
                .collect()
        })
    }
}

/// Exhaustive evaluation of `E(x)` over all `2^n` assignments.
pub fn brute_census(instance: &Instance) -> Result<Census, OracleError> {
    let n = instance.num_vars();
    if n > COUNT_BOUND {
        return Err(OracleError::InstanceTooLarge {
            n,
            bound: COUNT_BOUND,
        });
    }
    let masks = clause_masks(instance);
    let total = 1u64 << n;
    let chunks = total.div_ceil(CHUNK as u64);
    let partial: Vec<(BTreeMap<usize, u128>, Vec<u64>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut hist = BTreeMap::new();
            let mut sols = Vec::new();
            let lo = c * CHUNK as u64;
            let hi = (lo + CHUNK as u64).min(total);
            for x in lo..hi {
                let e = energy(&masks, x);
                *hist.entry(e).or_insert(0u128) += 1;
                if e == 0 && n <= SOLUTION_BOUND {
                    sols.push(x);
                }
            }
            (hist, sols)
        })
        .collect();

    let mut histogram = BTreeMap::new();
    let mut solutions = Vec::new();
    for (hist, sols) in partial {
        for (e, c) in hist {
            *histogram.entry(e).or_insert(0) += c;
        }
        solutions.extend(sols);
    }
    let p = histogram.get(&0).copied().unwrap_or(0);
    let solutions = (n <= SOLUTION_BOUND).then(|| {
        solutions
            .into_iter()
            .map(|x| Assignment::from_index(n, x))
            .collect()
    });
    Ok(Census {
        n,
        p,
        histogram,
        solutions,
    })
}

/// Deterministic sum: fixed chunks, combined left to right.
fn chunked_sum(values: &[f64], f: impl Fn(usize, f64) -> f64 + Sync) -> f64 {
    values
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(c, chunk)| {
            chunk
                .iter()
                .enumerate()
                .map(|(i, &v)| f(c * CHUNK + i, v))
                .sum::<f64>()
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .sum()
}

/// Unnormalized statevector under `exp(-tH)`, starting from the flat state.
#[derive(Debug, Clone)]
pub struct ImaginaryTimeEvolution {
    energies: Vec<u32>,
    amplitudes: Vec<f64>,
    factors: Vec<f64>,
    dt: f64,
    steps_taken: usize,
    p: u128,
}

impl ImaginaryTimeEvolution {
    pub fn new(instance: &Instance, dt: f64) -> Result<Self, OracleError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(OracleError::InvalidParameters(format!("dt must be positive, got {dt}")));
        }
        let energies = energies(instance)?;
        let p = energies.iter().filter(|&&e| e == 0).count() as u128;
        if p == 0 {
            return Err(OracleError::ZeroNorm);
        }
        let max_e = energies.iter().copied().max().unwrap_or(0) as usize;
        let factors = (0..=max_e).map(|e| (-dt * e as f64).exp()).collect();
        let amplitudes = vec![1.0; energies.len()];
        Ok(Self {
            energies,
            amplitudes,
            factors,
            dt,
            steps_taken: 0,
            p,
        })
    }

    pub fn step(&mut self) {
        let factors = &self.factors;
        self.amplitudes
            .par_chunks_mut(CHUNK)
            .zip(self.energies.par_chunks(CHUNK))
            .for_each(|(amps, es)| {
                for (a, &e) in amps.iter_mut().zip(es) {
                    *a *= factors[e as usize];
                }
            });
        self.steps_taken += 1;
    }

    pub fn time(&self) -> f64 {
        self.steps_taken as f64 * self.dt
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn energies(&self) -> &[u32] {
        &self.energies
    }

    /// ⟨ψ_F|ψ_t⟩ with both states normalized; ψ_F is flat on the solutions.
    pub fn overlap(&self) -> f64 {
        let energies = &self.energies;
        let on_solutions = chunked_sum(&self.amplitudes, |i, a| if energies[i] == 0 { a } else { 0.0 });
        let norm_sq = chunked_sum(&self.amplitudes, |_, a| a * a);
        on_solutions / ((self.p as f64).sqrt() * norm_sq.sqrt())
    }
}

/// Overlap at time `t` from the energy histogram alone:
/// `F(t) = sqrt(p / Σ_E h_E exp(-2tE))`, accumulated in log space.
pub fn closed_form_overlap(histogram: &BTreeMap<usize, u128>, t: f64) -> Option<f64> {
    let p = *histogram.get(&0)?;
    if p == 0 {
        return None;
    }
    let logs: Vec<f64> = histogram
        .iter()
        .filter(|(_, &c)| c > 0)
        .map(|(&e, &c)| (c as f64).ln() - 2.0 * t * e as f64)
        .collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = top + logs.iter().map(|l| (l - top).exp()).sum::<f64>().ln();
    Some((0.5 * ((p as f64).ln() - log_sum)).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlapCurve {
    pub dt: f64,
    pub steps: usize,
    /// `(t, F(t))` for `t = 0, dt, .., steps * dt`.
    pub points: Vec<(f64, f64)>,
}

impl OverlapCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,overlap\n");
        for &(t, f) in &self.points {
            out.push_str(&format!("{t:.9},{f:.15}\n"));
        }
        out
    }
}

/// Evolves the flat state step by step and records the overlap with the
/// normalized solution state after every step.
pub fn evolve_overlap(instance: &Instance, dt: f64, steps: usize) -> Result<OverlapCurve, OracleError> {
    if steps == 0 {
        return Err(OracleError::InvalidParameters("steps must be at least 1".into()));
    }
    let mut evo = ImaginaryTimeEvolution::new(instance, dt)?;
    let mut points = Vec::with_capacity(steps + 1);
    points.push((0.0, evo.overlap()));
    for _ in 0..steps {
        evo.step();
        points.push((evo.time(), evo.overlap()));
    }
    Ok(OverlapCurve { dt, steps, points })
}

/// Split of the variables into `A` and its complement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bipartition {
    n: usize,
    a: BTreeSet<usize>,
}

impl Bipartition {
    pub fn new(n: usize, a: impl IntoIterator<Item = usize>) -> Result<Self, OracleError> {
        let a: BTreeSet<usize> = a.into_iter().collect();
        if let Some(&bad) = a.iter().find(|&&k| k == 0 || k > n) {
            return Err(OracleError::InvalidBipartition(format!(
                "variable {bad} outside 1..={n}"
            )));
        }
        if a.is_empty() || a.len() == n {
            return Err(OracleError::InvalidBipartition(
                "A must be a nonempty proper subset".into(),
            ));
        }
        Ok(Self { n, a })
    }

    pub fn side_a(&self) -> &BTreeSet<usize> {
        &self.a
    }

    pub fn side_b(&self) -> BTreeSet<usize> {
        (1..=self.n).filter(|k| !self.a.contains(k)).collect()
    }

    pub fn contains(&self, k: usize) -> bool {
        self.a.contains(&k)
    }

    /// Bonds cut when each clause tensor sits on the side holding more of
    /// its variables: `Σ_a min(|a ∩ A|, |a ∩ B|)`.
    pub fn crossing_bonds(&self, instance: &Instance) -> usize {
        instance
            .clauses()
            .iter()
            .map(|c| {
                let in_a = c.vars().iter().filter(|&&v| self.contains(v)).count();
                in_a.min(3 - in_a)
            })
            .sum()
    }
}

/// Von Neumann entropy (bits) of the reduced state on `A` of the normalized
/// uniform superposition of solutions.
pub fn reduced_entropy(instance: &Instance, cut: &Bipartition) -> Result<f64, OracleError> {
    let n = instance.num_vars();
    if n > STATEVECTOR_BOUND {
        return Err(OracleError::InstanceTooLarge {
            n,
            bound: STATEVECTOR_BOUND,
        });
    }
    if cut.n != n {
        return Err(OracleError::InvalidBipartition(format!(
            "cut is over {} variables, instance has {n}",
            cut.n
        )));
    }
    let energies = energies(instance)?;
    let solutions: Vec<u64> = (0..energies.len() as u64)
        .filter(|&x| energies[x as usize] == 0)
        .collect();
    if solutions.is_empty() {
        return Err(OracleError::ZeroNorm);
    }

    // reduce on the smaller side; the spectrum is the same
    let a_side: Vec<usize> = cut.a.iter().copied().collect();
    let b_side: Vec<usize> = cut.side_b().into_iter().collect();
    let (keep, trace_out) = if a_side.len() <= b_side.len() {
        (a_side, b_side)
    } else {
        (b_side, a_side)
    };
    let project = |x: u64, vars: &[usize]| -> usize {
        vars.iter()
            .enumerate()
            .fold(0usize, |acc, (i, &v)| acc | ((((x >> (v - 1)) & 1) as usize) << i))
    };

    // rows of the coefficient matrix grouped by the traced-out configuration
    let mut by_env: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &x in &solutions {
        by_env
            .entry(project(x, &trace_out))
            .or_default()
            .push(project(x, &keep));
    }
    let dim = 1usize << keep.len();
    let weight = 1.0 / solutions.len() as f64;
    let mut rho = DMatrix::<f64>::zeros(dim, dim);
    for kept in by_env.values() {
        for &i in kept {
            for &j in kept {
                rho[(i, j)] += weight;
            }
        }
    }
    let eigen = SymmetricEigen::new(rho);
    let entropy = eigen
        .eigenvalues
        .iter()
        .filter(|&&l| l > EIGEN_CLIP)
        .map(|&l| -l * l.log2())
        .sum::<f64>();
    Ok(entropy.max(0.0))
}
