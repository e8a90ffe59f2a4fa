//! Pairwise contraction planning and exact execution.
//!
//! Tensors are referred to by SSA-style identifiers: leaves are `0..N` in
//! network order and step `s` produces identifier `N + s`. Width is counted
//! in independent index groups (see [`crate::tensor`]), so `2^width` is the
//! number of stored entries of an intermediate.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::hash::{Hash, Hasher};

use thiserror::Error;

use crate::network::TensorNetwork;
use crate::tensor::{Index, Shape, Tensor, TensorError};

/// Default cap on plan width: at most 2^26 stored entries per intermediate.
pub const DEFAULT_CAP: usize = 26;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("plan width {width} exceeds cap {cap}")]
    PlanTooWide { cap: usize, width: usize },
    #[error("index {0} has a single endpoint; the network is not closed")]
    OpenIndex(Index),
    #[error("index {0} is shared by more than two tensors")]
    HyperIndex(Index),
    #[error("integer overflow during contraction")]
    IntegerOverflow,
    #[error("plan does not match network: {0}")]
    PlanNetworkMismatch(String),
    #[error("invalid plan step: {0}")]
    InvalidStep(String),
}

impl From<TensorError> for EngineError {
    fn from(e: TensorError) -> Self {
        match e {
            TensorError::Overflow => EngineError::IntegerOverflow,
            other => EngineError::InvalidStep(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanStep {
    pub left: usize,
    pub right: usize,
    pub result: usize,
    /// Indices left open on the result.
    pub indices: Vec<Index>,
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractionPlan {
    leaves: usize,
    fingerprint: u64,
    steps: Vec<PlanStep>,
    width: usize,
}

impl ContractionPlan {
    pub fn steps(&self) -> &[PlanStep] {
        &self.steps
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn leaves(&self) -> usize {
        self.leaves
    }

    /// Builds a plan from an explicit merge order, checking each step.
    pub fn from_pairs(
        network: &TensorNetwork,
        pairs: &[(usize, usize)],
    ) -> Result<Self, EngineError> {
        check_closed(network)?;
        let mut live: BTreeMap<usize, Shape> = network
            .tensors()
            .enumerate()
            .map(|(i, t)| (i, t.shape().clone()))
            .collect();
        let mut steps = Vec::with_capacity(pairs.len());
        for (next, &(left, right)) in (network.len()..).zip(pairs) {
            if left == right {
                return Err(EngineError::InvalidStep(format!("{left} merged with itself")));
            }
            let (Some(a), Some(b)) = (live.remove(&left), live.remove(&right)) else {
                return Err(EngineError::InvalidStep(format!(
                    "{left} or {right} is not a live tensor"
                )));
            };
            let merged = a.merge(&b).shape;
            steps.push(PlanStep {
                left,
                right,
                result: next,
                indices: merged.indices().to_vec(),
                width: merged.width(),
            });
            live.insert(next, merged);
        }
        if live.len() > 1 {
            return Err(EngineError::InvalidStep(format!(
                "{} tensors left after the last step",
                live.len()
            )));
        }
        Ok(Self::assemble(network, steps))
    }

    fn assemble(network: &TensorNetwork, steps: Vec<PlanStep>) -> Self {
        let width = steps.iter().map(|s| s.width).max().unwrap_or(0);
        Self {
            leaves: network.len(),
            fingerprint: fingerprint(network),
            steps,
            width,
        }
    }

    /// One header line, then one line per step.
    pub fn dump(&self) -> String {
        let mut out = format!(
            "tensors {} steps {} width {}\n",
            self.leaves,
            self.steps.len(),
            self.width
        );
        for s in &self.steps {
            let _ = writeln!(
                out,
                "{} {} -> {} width {}",
                s.left, s.right, s.result, s.width
            );
        }
        out
    }
}

fn fingerprint(network: &TensorNetwork) -> u64 {
    let mut h = DefaultHasher::new();
    for t in network.tensors() {
        t.shape().hash(&mut h);
    }
    h.finish()
}

fn check_closed(network: &TensorNetwork) -> Result<(), EngineError> {
    for (ix, legs) in network.incidence() {
        match legs.len() {
            2 => {}
            1 => return Err(EngineError::OpenIndex(ix)),
            _ => return Err(EngineError::HyperIndex(ix)),
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Score {
    growth: isize,
    width: usize,
    entries: usize,
    left: usize,
    right: usize,
}

/// Plans a closed network, keeping every intermediate within `cap`.
///
/// Two candidate orders are built and the narrower one is kept (the pairwise
/// one on ties):
///
/// * a pairwise greedy over bond-sharing pairs: among steps whose result fits
///   under `cap`, the one that grows the larger input the least, then the
///   smallest result, then the smallest combined input, then the lowest
///   identifier pair. Pulling a copy tensor into an intermediate never
///   increases its width, so bits are absorbed as soon as their clauses are;
/// * a linear sweep that grows a single intermediate, each time absorbing the
///   tensor that leaves it narrowest. On the counting network this keeps the
///   width at the number of "frontier" variables, never above `n`, which the
///   pairwise rule does not guarantee on dense instances.
///
/// Fails with [`EngineError::PlanTooWide`] only if neither candidate fits.
pub fn plan_contraction(network: &TensorNetwork, cap: usize) -> Result<ContractionPlan, EngineError> {
    check_closed(network)?;
    let pairwise = pairwise_greedy(network, cap);
    let sweep = linear_sweep(network);
    let sweep_width = sweep.iter().map(|s| s.width).max().unwrap_or(0);
    match pairwise {
        Ok(steps) => {
            let width = steps.iter().map(|s| s.width).max().unwrap_or(0);
            let steps = if sweep_width < width { sweep } else { steps };
            Ok(ContractionPlan::assemble(network, steps))
        }
        Err(_) if sweep_width <= cap => Ok(ContractionPlan::assemble(network, sweep)),
        Err(rejected) => Err(EngineError::PlanTooWide {
            cap,
            width: rejected.min(sweep_width),
        }),
    }
}

fn initial_shapes(network: &TensorNetwork) -> BTreeMap<usize, Shape> {
    network
        .tensors()
        .enumerate()
        .map(|(i, t)| (i, t.shape().clone()))
        .collect()
}

/// Pairwise greedy; on failure returns the narrowest rejected width.
fn pairwise_greedy(network: &TensorNetwork, cap: usize) -> Result<Vec<PlanStep>, usize> {
    let mut live = initial_shapes(network);
    let mut owners: HashMap<Index, Vec<usize>> = HashMap::new();
    for (&id, shape) in &live {
        for &ix in shape.indices() {
            owners.entry(ix).or_default().push(id);
        }
    }
    let mut cache: HashMap<(usize, usize), Shape> = HashMap::new();
    let mut next = network.len();
    let mut steps = Vec::new();

    loop {
        let mut best: Option<Score> = None;
        let mut narrowest_rejected: Option<usize> = None;
        for ids in owners.values() {
            let (left, right) = (ids[0].min(ids[1]), ids[0].max(ids[1]));
            let (a, b) = (&live[&left], &live[&right]);
            let merged = cache
                .entry((left, right))
                .or_insert_with(|| a.merge(b).shape);
            let width = merged.width();
            if width > cap {
                narrowest_rejected = Some(narrowest_rejected.map_or(width, |w| w.min(width)));
                continue;
            }
            let score = Score {
                growth: width as isize - a.width().max(b.width()) as isize,
                width,
                entries: a.stored_len() + b.stored_len(),
                left,
                right,
            };
            if best.is_none_or(|b| score < b) {
                best = Some(score);
            }
        }
        let Some(best) = best else {
            if let Some(width) = narrowest_rejected {
                return Err(width);
            }
            break;
        };

        let merged = cache.remove(&(best.left, best.right)).expect("scored pair is cached");
        let a = live.remove(&best.left).expect("live");
        let b = live.remove(&best.right).expect("live");
        for ix in a.indices().iter().chain(b.indices()) {
            if merged.indices().contains(ix) {
                let ids = owners.get_mut(ix).expect("open index has owners");
                for id in ids.iter_mut() {
                    if *id == best.left || *id == best.right {
                        *id = next;
                    }
                }
            } else {
                owners.remove(ix);
            }
        }
        cache.retain(|&(l, r), _| {
            l != best.left && l != best.right && r != best.left && r != best.right
        });
        steps.push(PlanStep {
            left: best.left,
            right: best.right,
            result: next,
            indices: merged.indices().to_vec(),
            width: merged.width(),
        });
        live.insert(next, merged);
        next += 1;
    }

    // whatever remains is a set of scalars from disconnected components
    let rest: Vec<usize> = live.keys().copied().collect();
    if let Some((&first, others)) = rest.split_first() {
        let mut acc = first;
        for &id in others {
            steps.push(PlanStep {
                left: acc,
                right: id,
                result: next,
                indices: Vec::new(),
                width: 0,
            });
            acc = next;
            next += 1;
        }
    }
    Ok(steps)
}

/// Grows one intermediate from the narrowest leaf. Each step absorbs the
/// tensor giving the narrowest result, preferring neighbours (most shared
/// indices, then lowest id); unrelated tensors are only taken once the
/// intermediate has no neighbour left.
fn linear_sweep(network: &TensorNetwork) -> Vec<PlanStep> {
    let mut rest = initial_shapes(network);
    let Some(start) = rest
        .iter()
        .min_by_key(|(&id, s)| (s.width(), s.rank(), id))
        .map(|(&id, _)| id)
    else {
        return Vec::new();
    };
    let mut acc_id = start;
    let mut acc = rest.remove(&start).expect("start is live");
    let mut next = network.len();
    let mut steps = Vec::with_capacity(rest.len());
    while !rest.is_empty() {
        let neighbours: Vec<usize> = rest
            .iter()
            .filter(|(_, s)| s.indices().iter().any(|ix| acc.position(*ix).is_some()))
            .map(|(&id, _)| id)
            .collect();
        let pool: Vec<usize> = if neighbours.is_empty() {
            rest.keys().copied().collect()
        } else {
            neighbours
        };
        let (pick, merged) = pool
            .into_iter()
            .map(|id| {
                let shape = &rest[&id];
                let shared = shape
                    .indices()
                    .iter()
                    .filter(|ix| acc.position(**ix).is_some())
                    .count();
                let merged = acc.merge(shape).shape;
                ((merged.width(), std::cmp::Reverse(shared), id), merged)
            })
            .min_by(|a, b| a.0.cmp(&b.0))
            .map(|((_, _, id), merged)| (id, merged))
            .expect("pool is non-empty");
        rest.remove(&pick);
        steps.push(PlanStep {
            left: acc_id.min(pick),
            right: acc_id.max(pick),
            result: next,
            indices: merged.indices().to_vec(),
            width: merged.width(),
        });
        acc = merged;
        acc_id = next;
        next += 1;
    }
    steps
}

/// Contracts two tensors over their shared indices with checked arithmetic.
pub fn contract_pair(a: &Tensor, b: &Tensor) -> Result<Tensor, EngineError> {
    Ok(a.contract(b)?)
}

/// Result of executing a plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Execution {
    pub value: u128,
    /// Largest width actually seen on an intermediate.
    pub max_width: usize,
}

pub fn execute_plan(network: &TensorNetwork, plan: &ContractionPlan) -> Result<u128, EngineError> {
    execute_plan_traced(network, plan).map(|e| e.value)
}

/// Executes a plan; independent subtrees run on the current rayon pool.
pub fn execute_plan_traced(
    network: &TensorNetwork,
    plan: &ContractionPlan,
) -> Result<Execution, EngineError> {
    if plan.leaves != network.len() || plan.fingerprint != fingerprint(network) {
        return Err(EngineError::PlanNetworkMismatch(
            "plan was built for a different network".into(),
        ));
    }
    let Some(last) = plan.steps.last() else {
        return match network.len() {
            0 => Ok(Execution {
                value: 1,
                max_width: 0,
            }),
            1 => {
                let t = &network.nodes()[0].tensor;
                let value = t.scalar_value().ok_or_else(|| {
                    EngineError::PlanNetworkMismatch("single tensor is not a scalar".into())
                })?;
                Ok(Execution {
                    value,
                    max_width: 0,
                })
            }
            _ => Err(EngineError::PlanNetworkMismatch("empty plan".into())),
        };
    };
    let leaves = network.len();
    let exec = Executor {
        network,
        steps: &plan.steps,
        leaves,
    };
    let (tensor, max_width) = exec.eval(last.result)?;
    let value = tensor.scalar_value().ok_or_else(|| {
        EngineError::PlanNetworkMismatch("plan does not end in a scalar".into())
    })?;
    Ok(Execution { value, max_width })
}

struct Executor<'a> {
    network: &'a TensorNetwork,
    steps: &'a [PlanStep],
    leaves: usize,
}

impl Executor<'_> {
    fn eval(&self, id: usize) -> Result<(Tensor, usize), EngineError> {
        if id < self.leaves {
            return Ok((self.network.nodes()[id].tensor.clone(), 0));
        }
        let step = &self.steps[id - self.leaves];
        let (left, right) = rayon::join(|| self.eval(step.left), || self.eval(step.right));
        let ((a, wa), (b, wb)) = (left?, right?);
        let out = contract_pair(&a, &b)?;
        if out.width() != step.width {
            return Err(EngineError::PlanNetworkMismatch(format!(
                "step {} produced width {}, plan says {}",
                step.result,
                out.width(),
                step.width
            )));
        }
        let w = out.width().max(wa).max(wb);
        Ok((out, w))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::{generate_instance, parse_dimacs, InstanceKind};
    use crate::network::build_network;
    use crate::tensor::BondId;

    fn closed(text: &str) -> TensorNetwork {
        build_network(&parse_dimacs(text.as_bytes()).unwrap())
            .absorb_test_state()
            .unwrap()
    }

    fn b(i: usize) -> Index {
        Index::Bond(BondId(i))
    }

    #[test]
    fn single_clause_plan_and_count() {
        let net = closed("p cnf 3 1\n1 2 3 0\n");
        let plan = plan_contraction(&net, DEFAULT_CAP).unwrap();
        assert_eq!(plan.steps().len(), 3);
        assert!(plan.width() <= 3);
        assert_eq!(execute_plan(&net, &plan).unwrap(), 7);
    }

    #[test]
    fn all_eight_clauses_unsat() {
        let mut text = String::from("p cnf 3 8\n");
        for bits in 0..8 {
            let lit = |v: i64| if (bits >> (v - 1)) & 1 == 1 { -v } else { v };
            let _ = writeln!(text, "{} {} {} 0", lit(1), lit(2), lit(3));
        }
        let net = closed(&text);
        let plan = plan_contraction(&net, DEFAULT_CAP).unwrap();
        assert_eq!(execute_plan(&net, &plan).unwrap(), 0);
    }

    #[test]
    fn matrix_and_dot_products() {
        let id1 = Tensor::dense(vec![b(0), b(1)], vec![1, 0, 0, 1]).unwrap();
        let id2 = Tensor::dense(vec![b(1), b(2)], vec![1, 0, 0, 1]).unwrap();
        let r = contract_pair(&id1, &id2).unwrap();
        assert_eq!(r.indices(), &[b(0), b(2)]);
        assert_eq!(r.to_dense(), vec![1, 0, 0, 1]);

        let u = Tensor::dense(vec![b(5)], vec![1, 1]).unwrap();
        let v = Tensor::dense(vec![b(5)], vec![1, 0]).unwrap();
        assert_eq!(contract_pair(&u, &v).unwrap().scalar_value(), Some(1));
    }

    #[test]
    fn outer_product_supported() {
        let u = Tensor::dense(vec![b(1)], vec![1, 2]).unwrap();
        let v = Tensor::dense(vec![b(0)], vec![3, 5]).unwrap();
        let r = contract_pair(&u, &v).unwrap();
        assert_eq!(r.indices(), &[b(0), b(1)]);
        assert_eq!(r.to_dense(), vec![3, 6, 5, 10]);
    }

    #[test]
    fn planner_rejects_open_networks() {
        let net = build_network(&parse_dimacs(b"p cnf 3 1\n1 2 3 0\n").unwrap());
        assert_eq!(
            plan_contraction(&net, DEFAULT_CAP),
            Err(EngineError::OpenIndex(Index::Physical(1)))
        );
    }

    #[test]
    fn cap_is_enforced() {
        let inst = generate_instance(InstanceKind::Random, 14, 60, 1).unwrap();
        let net = build_network(&inst).absorb_test_state().unwrap();
        let plan = plan_contraction(&net, DEFAULT_CAP).unwrap();
        assert!(plan.width() >= 3);
        assert_eq!(
            plan_contraction(&net, 2),
            Err(EngineError::PlanTooWide { cap: 2, width: 3 })
        );
    }

    #[test]
    fn free_variables_multiply_scalars() {
        let net = closed("p cnf 5 1\n1 2 3 0\n");
        let plan = plan_contraction(&net, DEFAULT_CAP).unwrap();
        assert_eq!(execute_plan(&net, &plan).unwrap(), 28);
        let tail = &plan.steps()[plan.steps().len() - 2..];
        assert!(tail.iter().all(|s| s.width == 0));
    }

    #[test]
    fn empty_and_single_tensor_networks() {
        let empty = closed("p cnf 0 0\n");
        let plan = plan_contraction(&empty, DEFAULT_CAP).unwrap();
        assert_eq!(execute_plan(&empty, &plan).unwrap(), 1);
        let one = closed("p cnf 1 0\n");
        let plan = plan_contraction(&one, DEFAULT_CAP).unwrap();
        assert_eq!(execute_plan(&one, &plan).unwrap(), 2);
    }

    #[test]
    fn overflow_surfaces() {
        let net = closed("p cnf 130 0\n");
        let plan = plan_contraction(&net, DEFAULT_CAP).unwrap();
        assert_eq!(execute_plan(&net, &plan), Err(EngineError::IntegerOverflow));
        let net = closed("p cnf 127 0\n");
        let plan = plan_contraction(&net, DEFAULT_CAP).unwrap();
        assert_eq!(execute_plan(&net, &plan), Ok(1u128 << 127));
    }

    #[test]
    fn mismatched_plan_rejected() {
        let a = closed("p cnf 3 1\n1 2 3 0\n");
        let b = closed("p cnf 4 1\n1 2 4 0\n");
        let plan = plan_contraction(&a, DEFAULT_CAP).unwrap();
        assert!(matches!(
            execute_plan(&b, &plan),
            Err(EngineError::PlanNetworkMismatch(_))
        ));
    }

    #[test]
    fn explicit_orders_validate() {
        let net = closed("p cnf 3 1\n1 2 3 0\n");
        let plan = ContractionPlan::from_pairs(&net, &[(0, 1), (2, 3), (4, 5)]).unwrap();
        assert_eq!(execute_plan(&net, &plan).unwrap(), 7);
        assert!(ContractionPlan::from_pairs(&net, &[(0, 0)]).is_err());
        assert!(ContractionPlan::from_pairs(&net, &[(0, 1), (0, 2)]).is_err());
        assert!(ContractionPlan::from_pairs(&net, &[(0, 1)]).is_err());
    }

    #[test]
    fn dump_format() {
        let net = closed("p cnf 3 1\n1 2 3 0\n");
        let plan = plan_contraction(&net, DEFAULT_CAP).unwrap();
        let dump = plan.dump();
        let mut lines = dump.lines();
        assert_eq!(
            lines.next(),
            Some(format!("tensors 4 steps 3 width {}", plan.width()).as_str())
        );
        assert_eq!(lines.count(), 3);
    }
}
