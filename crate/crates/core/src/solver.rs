//! Counting, marginals and solution extraction on top of the network.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use num_rational::Ratio;
use thiserror::Error;

use crate::cnf::{Assignment, Instance};
use crate::engine::{execute_plan, plan_contraction, EngineError, DEFAULT_CAP};
use crate::network::{build_network, NetworkError, TensorNetwork};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolveError {
    #[error("instance has no satisfying assignment")]
    Unsatisfiable,
    #[error("state has zero norm: no assignment is consistent with the fixed bits")]
    ZeroNorm,
    #[error("assignment leaves some variables unset")]
    PartialAssignment,
    #[error("assignment has {found} bits, instance has {expected} variables")]
    LengthMismatch { expected: usize, found: usize },
    #[error("variable {0} is already fixed")]
    AlreadyFixed(usize),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Number of satisfying assignments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Count(pub u128);

impl Count {
    pub fn value(self) -> u128 {
        self.0
    }
}

/// Fraction of the remaining solutions with `x_k = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Marginal {
    pub numerator: u128,
    pub denominator: u128,
}

impl Marginal {
    pub fn value(&self) -> Ratio<u128> {
        Ratio::new(self.numerator, self.denominator)
    }

    /// Every remaining solution has `x_k = 1`.
    pub fn forces_one(&self) -> bool {
        self.numerator == 0
    }

    /// Every remaining solution has `x_k = 0`.
    pub fn forces_zero(&self) -> bool {
        self.numerator == self.denominator
    }
}

/// Which value to try first when both keep the instance satisfiable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    #[default]
    PreferZero,
    PreferOne,
    Random(u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverConfig {
    pub cap: usize,
    pub tie_break: TieBreak,
    /// Variable order for extraction; ascending when `None`.
    pub order: Option<Vec<usize>>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            cap: DEFAULT_CAP,
            tie_break: TieBreak::default(),
            order: None,
        }
    }
}

impl SolverConfig {
    pub fn with_cap(cap: usize) -> Self {
        Self {
            cap,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extraction {
    pub assignment: Assignment,
    /// Full network contractions performed, including the initial count.
    pub contractions: usize,
}

/// ⟨x|ψ⟩ together with the norm p; the normalized overlap is `indicator / √p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProductOverlap {
    pub indicator: u128,
    pub count: u128,
}

impl ProductOverlap {
    pub fn value(&self) -> f64 {
        self.indicator as f64 / (self.count as f64).sqrt()
    }
}

fn check_len(instance: &Instance, x: &Assignment) -> Result<(), SolveError> {
    if x.len() != instance.num_vars() {
        return Err(SolveError::LengthMismatch {
            expected: instance.num_vars(),
            found: x.len(),
        });
    }
    Ok(())
}

fn contract_closed(network: &TensorNetwork, cap: usize) -> Result<u128, SolveError> {
    let plan = plan_contraction(network, cap)?;
    Ok(execute_plan(network, &plan)?)
}

fn conditioned_network(instance: &Instance, fixed: &Assignment) -> Result<TensorNetwork, SolveError> {
    check_len(instance, fixed)?;
    let mut net = build_network(instance);
    for (k, v) in fixed.fixed() {
        net = net.condition(k, v)?;
    }
    Ok(net)
}

/// Solutions that agree with every bit set in `fixed`.
pub fn conditioned_count(
    instance: &Instance,
    fixed: &Assignment,
    cap: usize,
) -> Result<Count, SolveError> {
    let net = conditioned_network(instance, fixed)?.absorb_test_state()?;
    Ok(Count(contract_closed(&net, cap)?))
}

/// Number of satisfying assignments, as the overlap with the flat product state.
pub fn count(instance: &Instance, cap: usize) -> Result<Count, SolveError> {
    conditioned_count(instance, &Assignment::unset(instance.num_vars()), cap)
}

/// ⟨ψ|ψ⟩ contracted on the doubled network; equals [`count`] because the
/// coefficients are 0 or 1.
pub fn norm_squared(instance: &Instance, cap: usize) -> Result<Count, SolveError> {
    let net = build_network(instance).doubled();
    Ok(Count(contract_closed(&net, cap)?))
}

pub fn marginal(
    instance: &Instance,
    fixed: &Assignment,
    k: usize,
    cap: usize,
) -> Result<Marginal, SolveError> {
    check_len(instance, fixed)?;
    if k == 0 || k > instance.num_vars() {
        return Err(NetworkError::UnknownVariable(k).into());
    }
    if fixed.get(k).is_some() {
        return Err(SolveError::AlreadyFixed(k));
    }
    let with_zero = fixed.clone().with(k, false);
    let (den, num) = rayon::join(
        || conditioned_count(instance, fixed, cap),
        || conditioned_count(instance, &with_zero, cap),
    );
    let (den, num) = (den?.0, num?.0);
    if den == 0 {
        return Err(SolveError::ZeroNorm);
    }
    Ok(Marginal {
        numerator: num,
        denominator: den,
    })
}

/// Fixes one variable at a time, keeping the instance satisfiable; one
/// counting contraction per variable plus the initial satisfiability check.
pub fn extract_solution(instance: &Instance, config: &SolverConfig) -> Result<Extraction, SolveError> {
    let n = instance.num_vars();
    let order: Vec<usize> = match &config.order {
        Some(order) => order.clone(),
        None => (1..=n).collect(),
    };
    let mut seen = vec![false; n];
    for &k in &order {
        if k == 0 || k > n {
            return Err(NetworkError::UnknownVariable(k).into());
        }
        if std::mem::replace(&mut seen[k - 1], true) {
            return Err(SolveError::AlreadyFixed(k));
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(NetworkError::UnknownVariable(missing + 1).into());
    }

    let mut rng = match config.tie_break {
        TieBreak::Random(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        _ => None,
    };
    let mut fixed = Assignment::unset(n);
    let mut contractions = 1;
    if count(instance, config.cap)?.0 == 0 {
        return Err(SolveError::Unsatisfiable);
    }
    for k in order {
        let first = match (config.tie_break, rng.as_mut()) {
            (TieBreak::PreferOne, _) => true,
            (TieBreak::Random(_), Some(rng)) => rng.gen(),
            _ => false,
        };
        let trial = fixed.clone().with(k, first);
        let kept = conditioned_count(instance, &trial, config.cap)?;
        contractions += 1;
        fixed = if kept.0 > 0 { trial } else { fixed.with(k, !first) };
    }
    Ok(Extraction {
        assignment: fixed,
        contractions,
    })
}

/// Direct clause evaluation: true iff no clause sees its forbidden triple.
pub fn verify_assignment(instance: &Instance, x: &Assignment) -> Result<bool, SolveError> {
    check_len(instance, x)?;
    let bits = x.to_bits().ok_or(SolveError::PartialAssignment)?;
    Ok(instance
        .clauses()
        .iter()
        .all(|c| !c.rejects(c.vars().map(|v| bits[v - 1]))))
}

/// Coefficient ⟨x|ψ⟩ read off the network by conditioning every variable.
pub fn amplitude(instance: &Instance, x: &Assignment, cap: usize) -> Result<u128, SolveError> {
    if !x.is_full() {
        return Err(SolveError::PartialAssignment);
    }
    let net = conditioned_network(instance, x)?;
    contract_closed(&net, cap)
}

/// Overlap of the normalized state with the product state `|x⟩`.
pub fn product_overlap(
    instance: &Instance,
    x: &Assignment,
    cap: usize,
) -> Result<ProductOverlap, SolveError> {
    let p = count(instance, cap)?.0;
    if p == 0 {
        return Err(SolveError::ZeroNorm);
    }
    let indicator = amplitude(instance, x, cap)?;
    Ok(ProductOverlap {
        indicator,
        count: p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::parse_dimacs;

    fn inst(text: &str) -> Instance {
        parse_dimacs(text.as_bytes()).unwrap()
    }

    fn unsat3() -> Instance {
        let mut text = String::from("p cnf 3 8\n");
        for bits in 0..8 {
            let l = |v: i64| if (bits >> (v - 1)) & 1 == 1 { -v } else { v };
            text.push_str(&format!("{} {} {} 0\n", l(1), l(2), l(3)));
        }
        inst(&text)
    }

    #[test]
    fn counts() {
        assert_eq!(count(&inst("p cnf 1 0\n"), DEFAULT_CAP), Ok(Count(2)));
        assert_eq!(count(&inst("p cnf 3 1\n1 2 3 0\n"), DEFAULT_CAP), Ok(Count(7)));
        assert_eq!(count(&unsat3(), DEFAULT_CAP), Ok(Count(0)));
    }

    #[test]
    fn norm_matches_count() {
        let i = inst("p cnf 5 3\n1 2 3 0\n-2 4 5 0\n1 -3 -5 0\n");
        assert_eq!(norm_squared(&i, DEFAULT_CAP), count(&i, DEFAULT_CAP));
    }

    #[test]
    fn marginals() {
        let free = inst("p cnf 4 1\n1 2 3 0\n");
        let m = marginal(&free, &Assignment::unset(4), 4, DEFAULT_CAP).unwrap();
        assert_eq!(m.value(), Ratio::new(1, 2));

        let single = inst("p cnf 3 1\n1 2 3 0\n");
        let m = marginal(&single, &Assignment::unset(3), 1, DEFAULT_CAP).unwrap();
        assert_eq!((m.numerator, m.denominator), (3, 7));

        // x1 = 0 and x2 = 0 leave only x3 = 1
        let fixed = Assignment::unset(3).with(1, false).with(2, false);
        let m = marginal(&single, &fixed, 3, DEFAULT_CAP).unwrap();
        assert_eq!((m.numerator, m.denominator), (0, 1));
        assert!(m.forces_one());
    }

    #[test]
    fn marginal_errors() {
        assert_eq!(
            marginal(&unsat3(), &Assignment::unset(3), 1, DEFAULT_CAP),
            Err(SolveError::ZeroNorm)
        );
        let i = inst("p cnf 3 1\n1 2 3 0\n");
        let fixed = Assignment::unset(3).with(1, true);
        assert_eq!(
            marginal(&i, &fixed, 1, DEFAULT_CAP),
            Err(SolveError::AlreadyFixed(1))
        );
        assert!(matches!(
            marginal(&i, &Assignment::unset(3), 4, DEFAULT_CAP),
            Err(SolveError::Network(NetworkError::UnknownVariable(4)))
        ));
        assert!(matches!(
            marginal(&i, &Assignment::unset(2), 1, DEFAULT_CAP),
            Err(SolveError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn extraction_single_clause() {
        let i = inst("p cnf 3 1\n1 2 3 0\n");
        let e = extract_solution(&i, &SolverConfig::default()).unwrap();
        assert_eq!(e.assignment.to_bits(), Some(vec![false, false, true]));
        assert_eq!(e.contractions, 4);

        let cfg = SolverConfig {
            tie_break: TieBreak::PreferOne,
            ..SolverConfig::default()
        };
        let e = extract_solution(&i, &cfg).unwrap();
        assert_eq!(e.assignment.to_bits(), Some(vec![true, true, true]));

        let cfg = SolverConfig {
            order: Some(vec![3, 2, 1]),
            ..SolverConfig::default()
        };
        let e = extract_solution(&i, &cfg).unwrap();
        assert_eq!(e.assignment.to_bits(), Some(vec![true, false, false]));

        let cfg = SolverConfig {
            tie_break: TieBreak::Random(9),
            ..SolverConfig::default()
        };
        let a = extract_solution(&i, &cfg).unwrap();
        assert_eq!(a, extract_solution(&i, &cfg).unwrap());
        assert!(verify_assignment(&i, &a.assignment).unwrap());
    }

    #[test]
    fn extraction_rejects_bad_orders() {
        let i = inst("p cnf 3 1\n1 2 3 0\n");
        for order in [vec![1, 2], vec![1, 1, 2], vec![0, 1, 2], vec![1, 2, 4]] {
            let cfg = SolverConfig {
                order: Some(order),
                ..SolverConfig::default()
            };
            assert!(extract_solution(&i, &cfg).is_err());
        }
    }

    #[test]
    fn extraction_unsat() {
        assert_eq!(
            extract_solution(&unsat3(), &SolverConfig::default()),
            Err(SolveError::Unsatisfiable)
        );
    }

    #[test]
    fn verify() {
        let i = inst("p cnf 3 1\n1 2 3 0\n");
        let v = |bits: Vec<bool>| verify_assignment(&i, &Assignment::full(bits));
        assert_eq!(v(vec![false, false, false]), Ok(false));
        assert_eq!(v(vec![true, false, false]), Ok(true));
        let empty = inst("p cnf 2 0\n");
        assert_eq!(
            verify_assignment(&empty, &Assignment::full(vec![true, false])),
            Ok(true)
        );
        assert_eq!(
            verify_assignment(&i, &Assignment::unset(3).with(1, true)),
            Err(SolveError::PartialAssignment)
        );
    }

    #[test]
    fn product_overlap_cases() {
        // forbid everything except 101: 7 clauses
        let mut text = String::from("p cnf 3 7\n");
        for bits in 0..8u32 {
            if bits == 0b101 {
                continue;
            }
            let l = |v: i64| if (bits >> (v - 1)) & 1 == 1 { -v } else { v };
            text.push_str(&format!("{} {} {} 0\n", l(1), l(2), l(3)));
        }
        let unique = inst(&text);
        let sol = Assignment::from_index(3, 0b101);
        let po = product_overlap(&unique, &sol, DEFAULT_CAP).unwrap();
        assert_eq!((po.indicator, po.count), (1, 1));
        assert_eq!(po.value(), 1.0);
        let other = Assignment::from_index(3, 0b100);
        assert_eq!(
            product_overlap(&unique, &other, DEFAULT_CAP).unwrap().indicator,
            0
        );
        assert_eq!(
            product_overlap(&unsat3(), &sol, DEFAULT_CAP),
            Err(SolveError::ZeroNorm)
        );
    }

    #[test]
    fn product_overlap_four_solutions() {
        // x1 = x2 = 1 forced by four clauses on (1,2,3); x3, x4 free -> p = 4
        let i = inst("p cnf 4 4\n1 2 3 0\n1 2 -3 0\n-1 2 3 0\n-1 2 -3 0\n");
        let i2 = inst("p cnf 4 6\n1 2 3 0\n1 2 -3 0\n-1 2 3 0\n-1 2 -3 0\n1 -2 3 0\n1 -2 -3 0\n");
        assert_eq!(count(&i, DEFAULT_CAP).unwrap().0, 8);
        assert_eq!(count(&i2, DEFAULT_CAP).unwrap().0, 4);
        let x = Assignment::full(vec![true, true, false, true]);
        let po = product_overlap(&i2, &x, DEFAULT_CAP).unwrap();
        assert_eq!((po.indicator, po.count), (1, 4));
        assert_eq!(po.value(), 0.5);
    }
}
