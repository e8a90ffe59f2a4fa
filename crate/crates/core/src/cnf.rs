//! 3SAT instances in "one forbidden local assignment per clause" form.
//!
//! A DIMACS clause `(l1 ∨ l2 ∨ l3)` is falsified by exactly one assignment of
//! its three variables: every positive literal set to 0 and every negative
//! literal set to 1. [`Clause`] stores the variables together with that
//! forbidden triple, which is what the tensor construction consumes.

use std::fmt::Write as _;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CnfError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("clause {clause} has {width} literals, expected 3")]
    ClauseWidthNot3 { clause: usize, width: usize },
    #[error("clause mentions variable {var} more than once")]
    DuplicateVariableInClause { var: usize },
    #[error("variable {var} out of range 1..={n}")]
    VariableOutOfRange { var: usize, n: usize },
    #[error("header announces {expected} clauses, found {found}")]
    ClauseCountMismatch { expected: usize, found: usize },
    #[error("zero literal inside a clause")]
    ZeroLiteral,
    #[error("invalid literal token {0:?}")]
    InvalidLiteral(String),
    #[error("clause is not terminated by 0")]
    UnterminatedClause,
    #[error("need at least 3 variables, got {0}")]
    TooFewVariables(usize),
}

/// Three distinct variables and the single local assignment they may not take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Clause {
    vars: [usize; 3],
    forbidden: [bool; 3],
}

impl Clause {
    pub fn new(vars: [usize; 3], forbidden: [bool; 3]) -> Result<Self, CnfError> {
        for i in 0..3 {
            if vars[i] == 0 {
                return Err(CnfError::ZeroLiteral);
            }
            for j in 0..i {
                if vars[i] == vars[j] {
                    return Err(CnfError::DuplicateVariableInClause { var: vars[i] });
                }
            }
        }
        Ok(Self { vars, forbidden })
    }

    /// Builds a clause from signed DIMACS literals.
    pub fn from_literals(lits: [i64; 3]) -> Result<Self, CnfError> {
        if lits.contains(&0) {
            return Err(CnfError::ZeroLiteral);
        }
        let vars = lits.map(|l| l.unsigned_abs() as usize);
        let forbidden = lits.map(|l| l < 0);
        Self::new(vars, forbidden)
    }

    pub fn vars(&self) -> [usize; 3] {
        self.vars
    }

    pub fn forbidden(&self) -> [bool; 3] {
        self.forbidden
    }

    pub fn literals(&self) -> [i64; 3] {
        let mut out = [0i64; 3];
        for (slot, lit) in out.iter_mut().enumerate() {
            let v = self.vars[slot] as i64;
            *lit = if self.forbidden[slot] { -v } else { v };
        }
        out
    }

    /// True when the local assignment `(a, b, c)` is the rejected one.
    pub fn rejects(&self, local: [bool; 3]) -> bool {
        local == self.forbidden
    }
}

/// Shorthand for [`Clause::from_literals`].
pub fn clause_from_literals(lits: [i64; 3]) -> Result<Clause, CnfError> {
    Clause::from_literals(lits)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Instance {
    n: usize,
    clauses: Vec<Clause>,
}

impl Instance {
    pub fn new(n: usize, clauses: Vec<Clause>) -> Result<Self, CnfError> {
        for c in &clauses {
            for var in c.vars {
                if var > n {
                    return Err(CnfError::VariableOutOfRange { var, n });
                }
            }
        }
        Ok(Self { n, clauses })
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    /// Clause density m/n, `None` for an instance without variables.
    pub fn ratio(&self) -> Option<Ratio<usize>> {
        (self.n > 0).then(|| Ratio::new(self.clauses.len(), self.n))
    }

    /// Number of clause slots that mention each variable, indexed `0..n`.
    pub fn occurrences(&self) -> Vec<usize> {
        let mut occ = vec![0; self.n];
        for c in &self.clauses {
            for var in c.vars {
                occ[var - 1] += 1;
            }
        }
        occ
    }

    /// Number of clauses violated by a full assignment packed as bits
    /// (variable `k` is bit `k - 1`).
    pub fn energy_of_index(&self, x: u64) -> usize {
        self.clauses
            .iter()
            .filter(|c| {
                let local = c.vars.map(|v| (x >> (v - 1)) & 1 == 1);
                c.rejects(local)
            })
            .count()
    }

    pub fn to_dimacs(&self) -> String {
        let mut out = format!("p cnf {} {}\n", self.n, self.clauses.len());
        for c in &self.clauses {
            let [a, b, d] = c.literals();
            let _ = writeln!(out, "{a} {b} {d} 0");
        }
        out
    }
}

/// Full or partial assignment of `n` variables; `None` marks an unset bit.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    bits: Vec<Option<bool>>,
}

impl Assignment {
    pub fn unset(n: usize) -> Self {
        Self { bits: vec![None; n] }
    }

    pub fn full(bits: Vec<bool>) -> Self {
        Self {
            bits: bits.into_iter().map(Some).collect(),
        }
    }

    /// Variable `k` takes bit `k - 1` of `x`.
    pub fn from_index(n: usize, x: u64) -> Self {
        Self::full((0..n).map(|i| (x >> i) & 1 == 1).collect())
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Value of variable `k` (1-based).
    pub fn get(&self, k: usize) -> Option<bool> {
        self.bits.get(k.wrapping_sub(1)).copied().flatten()
    }

    pub fn set(&mut self, k: usize, value: bool) {
        self.bits[k - 1] = Some(value);
    }

    pub fn with(mut self, k: usize, value: bool) -> Self {
        self.set(k, value);
        self
    }

    pub fn is_full(&self) -> bool {
        self.bits.iter().all(Option::is_some)
    }

    pub fn bits(&self) -> &[Option<bool>] {
        &self.bits
    }

    /// The full bit vector, `None` if any variable is unset.
    pub fn to_bits(&self) -> Option<Vec<bool>> {
        self.bits.iter().copied().collect()
    }

    /// Iterates the `(k, value)` pairs that are set.
    pub fn fixed(&self) -> impl Iterator<Item = (usize, bool)> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.map(|v| (i + 1, v)))
    }
}

/// Parses DIMACS CNF restricted to clauses of three distinct variables.
pub fn parse_dimacs(text: &[u8]) -> Result<Instance, CnfError> {
    let text = String::from_utf8_lossy(text);
    let mut header: Option<(usize, usize)> = None;
    let mut clauses = Vec::new();
    let mut pending: Vec<i64> = Vec::new();

    for line in text.lines() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('c') {
            continue;
        }
        if trimmed.starts_with('p') {
            if header.is_some() {
                return Err(CnfError::MalformedHeader("second header line".into()));
            }
            header = Some(parse_header(trimmed)?);
            continue;
        }
        let Some((n, _)) = header else {
            return Err(CnfError::MalformedHeader(
                "clause data before 'p cnf' header".into(),
            ));
        };
        for tok in trimmed.split_whitespace() {
            let lit: i64 = tok
                .parse()
                .map_err(|_| CnfError::InvalidLiteral(tok.to_string()))?;
            if lit != 0 {
                let var = lit.unsigned_abs() as usize;
                if var > n {
                    return Err(CnfError::VariableOutOfRange { var, n });
                }
                pending.push(lit);
                continue;
            }
            if pending.len() != 3 {
                return Err(CnfError::ClauseWidthNot3 {
                    clause: clauses.len() + 1,
                    width: pending.len(),
                });
            }
            clauses.push(Clause::from_literals([pending[0], pending[1], pending[2]])?);
            pending.clear();
        }
    }

    let Some((n, m)) = header else {
        return Err(CnfError::MalformedHeader("missing 'p cnf' header".into()));
    };
    if !pending.is_empty() {
        return Err(CnfError::UnterminatedClause);
    }
    if clauses.len() != m {
        return Err(CnfError::ClauseCountMismatch {
            expected: m,
            found: clauses.len(),
        });
    }
    Instance::new(n, clauses)
}

fn parse_header(line: &str) -> Result<(usize, usize), CnfError> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    match parts.as_slice() {
        ["p", "cnf", n, m] => {
            let n = n
                .parse()
                .map_err(|_| CnfError::MalformedHeader(line.to_string()))?;
            let m = m
                .parse()
                .map_err(|_| CnfError::MalformedHeader(line.to_string()))?;
            Ok((n, m))
        }
        _ => Err(CnfError::MalformedHeader(line.to_string())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceKind {
    /// Three distinct variables drawn uniformly per clause.
    Random,
    /// Clause `a` sits on variables `(a, a+1, a+2)`, wrapping once the chain
    /// runs out of room.
    Chain,
}

/// Deterministic instance generator; each clause gets a uniform forbidden triple.
pub fn generate_instance(
    kind: InstanceKind,
    n: usize,
    m: usize,
    seed: u64,
) -> Result<Instance, CnfError> {
    if n < 3 {
        return Err(CnfError::TooFewVariables(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut clauses = Vec::with_capacity(m);
    for a in 0..m {
        let vars = match kind {
            InstanceKind::Chain => {
                let start = a % (n - 2) + 1;
                [start, start + 1, start + 2]
            }
            InstanceKind::Random => loop {
                let v: [usize; 3] = std::array::from_fn(|_| rng.gen_range(1..=n));
                if v[0] != v[1] && v[0] != v[2] && v[1] != v[2] {
                    break v;
                }
            },
        };
        let forbidden: [bool; 3] = std::array::from_fn(|_| rng.gen());
        clauses.push(Clause::new(vars, forbidden)?);
    }
    Instance::new(n, clauses)
}
