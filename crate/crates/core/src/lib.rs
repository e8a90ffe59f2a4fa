//! Exact χ=2 tensor network encoding of 3SAT.
//!
//! An instance with `n` variables and `m` clauses becomes a network of `n`
//! copy tensors and `m` clause tensors joined by `3m` bonds. Its contraction
//! with open physical indices is the 0/1 solution indicator, its contraction
//! against the flat product state is the number of solutions, and fixing
//! variables one at a time while the count stays positive yields an explicit
//! solution.
//!
//! ```
//! use satnet::{cnf::parse_dimacs, solver};
//!
//! let instance = parse_dimacs(b"p cnf 3 1\n1 2 3 0\n").unwrap();
//! assert_eq!(solver::count(&instance, 26).unwrap().value(), 7);
//! ```

pub mod cli;
pub mod cnf;
pub mod engine;
pub mod network;
pub mod oracle;
pub mod solver;
pub mod tensor;

pub use cnf::{Assignment, Clause, Instance};
pub use engine::{ContractionPlan, PlanStep};
pub use network::TensorNetwork;
pub use tensor::{BondId, Index, Tensor};
