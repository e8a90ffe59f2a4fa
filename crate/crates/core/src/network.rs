//! The χ=2 network whose contraction gives the solution indicator of an instance.
//!
//! Bit tensor `Q[k]` is a copy tensor over the physical index of variable `k`
//! and one bond per clause slot mentioning `k`. Clause tensor `C[a]` is 1 on
//! all eight local assignments except the forbidden one, where it is 0.
//!
//! Clause slot `s` of clause `a` (both 0-based) is bond `3a + s`, so a bit
//! tensor lists its bonds in clause order and a clause tensor in literal order.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::cnf::Instance;
use crate::tensor::{BondId, Index, Tensor, TensorError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetworkError {
    #[error("variable {0} does not exist")]
    UnknownVariable(usize),
    #[error("variable {0} is already conditioned")]
    AlreadyConditioned(usize),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Where a tensor came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tag {
    Bit(usize),
    Clause(usize),
    /// Conjugate copies used by the ⟨ψ|ψ⟩ network.
    BraBit(usize),
    BraClause(usize),
    Intermediate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub tag: Tag,
    pub tensor: Tensor,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorNetwork {
    num_vars: usize,
    num_clauses: usize,
    nodes: Vec<Node>,
}

/// Position of one leg: (node, axis).
pub type Leg = (usize, usize);

fn bond(clause: usize, slot: usize) -> Index {
    Index::Bond(BondId(3 * clause + slot))
}

/// Builds the canonical network: `n` bit tensors followed by `m` clause tensors.
pub fn build_network(instance: &Instance) -> TensorNetwork {
    let n = instance.num_vars();
    let mut legs: Vec<Vec<Index>> = (1..=n).map(|k| vec![Index::Physical(k)]).collect();
    for (a, clause) in instance.clauses().iter().enumerate() {
        for (slot, var) in clause.vars().into_iter().enumerate() {
            legs[var - 1].push(bond(a, slot));
        }
    }

    let mut nodes = Vec::with_capacity(n + instance.num_clauses());
    for (k, indices) in legs.into_iter().enumerate() {
        let tensor = Tensor::locked(indices, [1, 1]).expect("bit legs are distinct");
        nodes.push(Node {
            tag: Tag::Bit(k + 1),
            tensor,
        });
    }
    for (a, clause) in instance.clauses().iter().enumerate() {
        let f = clause.forbidden();
        let rejected = (usize::from(f[0]) << 2) | (usize::from(f[1]) << 1) | usize::from(f[2]);
        let mut entries = vec![1u128; 8];
        entries[rejected] = 0;
        let tensor = Tensor::dense(vec![bond(a, 0), bond(a, 1), bond(a, 2)], entries)
            .expect("clause shape is fixed");
        nodes.push(Node {
            tag: Tag::Clause(a + 1),
            tensor,
        });
    }
    TensorNetwork {
        num_vars: n,
        num_clauses: instance.num_clauses(),
        nodes,
    }
}

impl TensorNetwork {
    pub fn from_nodes(num_vars: usize, num_clauses: usize, nodes: Vec<Node>) -> Self {
        Self {
            num_vars,
            num_clauses,
            nodes,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_clauses(&self) -> usize {
        self.num_clauses
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn tensors(&self) -> impl Iterator<Item = &Tensor> {
        self.nodes.iter().map(|n| &n.tensor)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Every index with the legs that carry it.
    pub fn incidence(&self) -> BTreeMap<Index, Vec<Leg>> {
        let mut table: BTreeMap<Index, Vec<Leg>> = BTreeMap::new();
        for (i, node) in self.nodes.iter().enumerate() {
            for (axis, &ix) in node.tensor.indices().iter().enumerate() {
                table.entry(ix).or_default().push((i, axis));
            }
        }
        table
    }

    pub fn bond_count(&self) -> usize {
        self.incidence()
            .keys()
            .filter(|ix| matches!(ix, Index::Bond(_)))
            .count()
    }

    /// Variables whose physical index is still open (appears exactly once).
    pub fn open_physical(&self) -> Vec<usize> {
        self.incidence()
            .into_iter()
            .filter_map(|(ix, legs)| match ix {
                Index::Physical(k) if legs.len() == 1 => Some(k),
                _ => None,
            })
            .collect()
    }

    /// True when every index is shared by exactly two tensors.
    pub fn is_closed(&self) -> bool {
        self.incidence().values().all(|legs| legs.len() == 2)
    }

    fn bit_node(&self, k: usize) -> Result<usize, NetworkError> {
        if k == 0 || k > self.num_vars {
            return Err(NetworkError::UnknownVariable(k));
        }
        self.nodes
            .iter()
            .position(|n| n.tag == Tag::Bit(k))
            .ok_or(NetworkError::UnknownVariable(k))
    }

    /// Fixes the physical index of variable `k` to `value`.
    pub fn condition(&self, k: usize, value: bool) -> Result<TensorNetwork, NetworkError> {
        let node = self.bit_node(k)?;
        let phys = Index::Physical(k);
        if self.nodes[node].tensor.shape().position(phys).is_none() {
            return Err(NetworkError::AlreadyConditioned(k));
        }
        let basis = if value { vec![0, 1] } else { vec![1, 0] };
        let vector = Tensor::dense(vec![phys], basis)?;
        let mut out = self.clone();
        out.nodes[node].tensor = out.nodes[node].tensor.contract(&vector)?;
        Ok(out)
    }

    /// Contracts every open physical index with `|0⟩ + |1⟩`, so each bit
    /// tensor becomes `Q⁰ + Q¹`.
    pub fn absorb_test_state(&self) -> Result<TensorNetwork, NetworkError> {
        let mut out = self.clone();
        for k in self.open_physical() {
            let node = out
                .nodes
                .iter()
                .position(|n| n.tensor.shape().position(Index::Physical(k)).is_some())
                .expect("open physical index has a carrier");
            let flat = Tensor::dense(vec![Index::Physical(k)], vec![1, 1])?;
            out.nodes[node].tensor = out.nodes[node].tensor.contract(&flat)?;
        }
        Ok(out)
    }

    /// The ⟨ψ|ψ⟩ network: this network next to a conjugate copy with fresh
    /// bonds, joined at the physical indices. Entries are real, so the copy
    /// reuses the same values.
    pub fn doubled(&self) -> TensorNetwork {
        let offset = self
            .incidence()
            .keys()
            .filter_map(|ix| match ix {
                Index::Bond(BondId(b)) => Some(b + 1),
                Index::Physical(_) => None,
            })
            .max()
            .unwrap_or(0);
        let mut nodes = self.nodes.clone();
        for node in &self.nodes {
            let tag = match node.tag {
                Tag::Bit(k) => Tag::BraBit(k),
                Tag::Clause(a) => Tag::BraClause(a),
                other => other,
            };
            let tensor = node.tensor.relabel(|ix| match ix {
                Index::Bond(BondId(b)) => Index::Bond(BondId(b + offset)),
                phys => phys,
            });
            nodes.push(Node { tag, tensor });
        }
        TensorNetwork {
            num_vars: self.num_vars,
            num_clauses: self.num_clauses,
            nodes,
        }
    }

    /// Line-oriented dump for golden tests. Not a stable format.
    pub fn debug_text(&self) -> String {
        let mut out = format!(
            "network vars={} clauses={} tensors={} bonds={}\n",
            self.num_vars,
            self.num_clauses,
            self.nodes.len(),
            self.bond_count()
        );
        for node in &self.nodes {
            let tag = match node.tag {
                Tag::Bit(k) => format!("bit {k}"),
                Tag::Clause(a) => format!("clause {a}"),
                Tag::BraBit(k) => format!("bra-bit {k}"),
                Tag::BraClause(a) => format!("bra-clause {a}"),
                Tag::Intermediate => "intermediate".to_string(),
            };
            let axes: Vec<String> = node.tensor.indices().iter().map(|i| i.to_string()).collect();
            let _ = write!(out, "{tag} [{}]", axes.join(" "));
            for (values, entry) in node.tensor.nonzeros() {
                let bits: String = values.iter().map(|&v| if v { '1' } else { '0' }).collect();
                let _ = write!(out, " {bits}={entry}");
            }
            out.push('\n');
        }
        out
    }
}
