//! Exact integer tensors over χ=2 indices.
//!
//! Every index has dimension 2. Indices that are forced to carry the same
//! value (the legs of a copy tensor, or legs that became locked through a
//! contraction) share a *group*, and only one stored coordinate per group is
//! kept. The dense tensor is recovered as
//!
//! ```text
//! T[v_1 .. v_r] = stored[g_1 .. g_w]   if every index in group j has value g_j
//!               = 0                    otherwise
//! ```
//!
//! so a copy tensor of any degree costs two stored entries, and the storage
//! of an intermediate is `2^width` with `width` the number of groups.

use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

/// One ancillary link between a bit tensor and a clause slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BondId(pub usize);

/// A tensor leg: either an ancillary bond or the physical index of variable `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Index {
    Physical(usize),
    Bond(BondId),
}

impl fmt::Display for Index {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Index::Physical(k) => write!(f, "p{k}"),
            Index::Bond(BondId(b)) => write!(f, "b{b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TensorError {
    #[error("expected {expected} entries, found {found}")]
    EntryCount { expected: usize, found: usize },
    #[error("index {0} appears twice on one tensor")]
    DuplicateIndex(Index),
    #[error("integer overflow during contraction")]
    Overflow,
}

/// Index layout of a tensor without its entries.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Shape {
    indices: Vec<Index>,
    groups: Vec<usize>,
    width: usize,
}

impl Shape {
    fn new(indices: Vec<Index>, groups: Vec<usize>) -> Result<Self, TensorError> {
        let mut seen = HashMap::with_capacity(indices.len());
        for &ix in &indices {
            if seen.insert(ix, ()).is_some() {
                return Err(TensorError::DuplicateIndex(ix));
            }
        }
        let width = groups.iter().map(|g| g + 1).max().unwrap_or(0);
        Ok(Self {
            indices,
            groups,
            width,
        })
    }

    pub fn indices(&self) -> &[Index] {
        &self.indices
    }

    /// Group of each index, numbered in order of first appearance.
    pub fn groups(&self) -> &[usize] {
        &self.groups
    }

    /// Number of independent index groups; storage is `2^width`.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn rank(&self) -> usize {
        self.indices.len()
    }

    pub fn stored_len(&self) -> usize {
        1usize << self.width
    }

    pub fn position(&self, ix: Index) -> Option<usize> {
        self.indices.iter().position(|&i| i == ix)
    }

    pub fn physical_vars(&self) -> Vec<usize> {
        self.indices
            .iter()
            .filter_map(|ix| match ix {
                Index::Physical(k) => Some(*k),
                Index::Bond(_) => None,
            })
            .collect()
    }

    /// Shape of the pairwise contraction together with the offset tables
    /// needed to fill it in.
    pub(crate) fn merge(&self, other: &Shape) -> Merge {
        let wa = self.width;
        let wb = other.width;
        let mut uf = UnionFind::new(wa + wb);

        let b_pos: HashMap<Index, usize> = other
            .indices
            .iter()
            .enumerate()
            .map(|(i, &ix)| (ix, i))
            .collect();
        let mut shared_in_a = vec![false; self.indices.len()];
        let mut shared_in_b = vec![false; other.indices.len()];
        for (i, ix) in self.indices.iter().enumerate() {
            if let Some(&j) = b_pos.get(ix) {
                shared_in_a[i] = true;
                shared_in_b[j] = true;
                uf.union(self.groups[i], wa + other.groups[j]);
            }
        }

        // open indices with the union-find node that owns them
        let mut open: Vec<(Index, usize)> = Vec::new();
        for (i, &ix) in self.indices.iter().enumerate() {
            if !shared_in_a[i] {
                open.push((ix, self.groups[i]));
            }
        }
        for (j, &ix) in other.indices.iter().enumerate() {
            if !shared_in_b[j] {
                open.push((ix, wa + other.groups[j]));
            }
        }
        open.sort_by_key(|&(ix, _)| ix);

        let mut class_of_root: HashMap<usize, usize> = HashMap::new();
        let mut indices = Vec::with_capacity(open.len());
        let mut groups = Vec::with_capacity(open.len());
        for &(ix, node) in &open {
            let root = uf.find(node);
            let next = class_of_root.len();
            let class = *class_of_root.entry(root).or_insert(next);
            indices.push(ix);
            groups.push(class);
        }
        let kept = class_of_root.len();
        let mut summed_roots = Vec::new();
        for node in 0..wa + wb {
            let root = uf.find(node);
            if let std::collections::hash_map::Entry::Vacant(slot) = class_of_root.entry(root) {
                slot.insert(kept + summed_roots.len());
                summed_roots.push(root);
            }
        }
        let summed = summed_roots.len();
        let classes = kept + summed;

        let mut a_mask = vec![0usize; classes];
        let mut b_mask = vec![0usize; classes];
        for g in 0..wa {
            a_mask[class_of_root[&uf.find(g)]] |= 1 << (wa - 1 - g);
        }
        for g in 0..wb {
            b_mask[class_of_root[&uf.find(wa + g)]] |= 1 << (wb - 1 - g);
        }

        let shape = Shape {
            indices,
            groups,
            width: kept,
        };
        // result group j is stored at bit (kept - 1 - j)
        let kept_a: Vec<usize> = (0..kept).rev().map(|c| a_mask[c]).collect();
        let kept_b: Vec<usize> = (0..kept).rev().map(|c| b_mask[c]).collect();
        let sum_a: Vec<usize> = (kept..classes).map(|c| a_mask[c]).collect();
        let sum_b: Vec<usize> = (kept..classes).map(|c| b_mask[c]).collect();
        Merge {
            shape,
            kept_a,
            kept_b,
            sum_a,
            sum_b,
        }
    }
}

pub(crate) struct Merge {
    pub(crate) shape: Shape,
    kept_a: Vec<usize>,
    kept_b: Vec<usize>,
    sum_a: Vec<usize>,
    sum_b: Vec<usize>,
}

/// Offsets for every subset of classes, indexed by the bit pattern.
fn offset_table(masks: &[usize]) -> Vec<usize> {
    let mut table = vec![0usize; 1 << masks.len()];
    for s in 1..table.len() {
        let low = s.trailing_zeros() as usize;
        table[s] = table[s & (s - 1)] | masks[low];
    }
    table
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller root wins so numbering stays deterministic
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Tensor with exact nonnegative integer entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tensor {
    shape: Shape,
    entries: Vec<u128>,
}

/// Above this many multiply-adds a contraction is split across threads.
const PARALLEL_THRESHOLD: usize = 1 << 14;

impl Tensor {
    pub fn scalar(value: u128) -> Self {
        Self {
            shape: Shape {
                indices: Vec::new(),
                groups: Vec::new(),
                width: 0,
            },
            entries: vec![value],
        }
    }

    /// Dense tensor: every index is independent, entries row-major with the
    /// first index most significant.
    pub fn dense(indices: Vec<Index>, entries: Vec<u128>) -> Result<Self, TensorError> {
        let groups = (0..indices.len()).collect();
        let shape = Shape::new(indices, groups)?;
        Self::with_shape(shape, entries)
    }

    /// Copy-style tensor: all indices locked to one value `v`, entry `values[v]`.
    pub fn locked(indices: Vec<Index>, values: [u128; 2]) -> Result<Self, TensorError> {
        if indices.is_empty() {
            return Ok(Self::scalar(values[0] + values[1]));
        }
        let groups = vec![0; indices.len()];
        let shape = Shape::new(indices, groups)?;
        Self::with_shape(shape, values.to_vec())
    }

    fn with_shape(shape: Shape, entries: Vec<u128>) -> Result<Self, TensorError> {
        if entries.len() != shape.stored_len() {
            return Err(TensorError::EntryCount {
                expected: shape.stored_len(),
                found: entries.len(),
            });
        }
        Ok(Self { shape, entries })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn indices(&self) -> &[Index] {
        &self.shape.indices
    }

    pub fn width(&self) -> usize {
        self.shape.width
    }

    pub fn rank(&self) -> usize {
        self.shape.rank()
    }

    /// Stored entries, one per assignment of the index groups.
    pub fn stored(&self) -> &[u128] {
        &self.entries
    }

    pub fn scalar_value(&self) -> Option<u128> {
        self.shape.indices.is_empty().then(|| self.entries[0])
    }

    /// Entry at a full assignment of the indices (in index order).
    pub fn get(&self, values: &[bool]) -> u128 {
        assert_eq!(values.len(), self.rank(), "wrong number of index values");
        let mut group_val: Vec<Option<bool>> = vec![None; self.shape.width];
        for (i, &v) in values.iter().enumerate() {
            let g = self.shape.groups[i];
            match group_val[g] {
                Some(prev) if prev != v => return 0,
                _ => group_val[g] = Some(v),
            }
        }
        let pos = group_val
            .iter()
            .fold(0usize, |acc, v| (acc << 1) | usize::from(v.unwrap_or(false)));
        self.entries[pos]
    }

    /// Fully expanded entries, row-major with the first index most significant.
    pub fn to_dense(&self) -> Vec<u128> {
        let r = self.rank();
        (0..1usize << r)
            .map(|pos| {
                let values: Vec<bool> = (0..r).map(|i| (pos >> (r - 1 - i)) & 1 == 1).collect();
                self.get(&values)
            })
            .collect()
    }

    /// Nonzero dense entries as (index values, entry), in stored order.
    pub fn nonzeros(&self) -> Vec<(Vec<bool>, u128)> {
        let w = self.shape.width;
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, &e)| e != 0)
            .map(|(pos, &e)| {
                let values = self
                    .shape
                    .groups
                    .iter()
                    .map(|&g| (pos >> (w - 1 - g)) & 1 == 1)
                    .collect();
                (values, e)
            })
            .collect()
    }

    /// Renames indices; the caller keeps them distinct.
    pub fn relabel(&self, f: impl Fn(Index) -> Index) -> Self {
        let mut t = self.clone();
        for ix in &mut t.shape.indices {
            *ix = f(*ix);
        }
        t
    }

    /// Sums over shared indices; the result carries the remaining indices in
    /// sorted order.
    pub fn contract(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        let merge = self.shape.merge(&other.shape);
        self.contract_with(other, &merge)
    }

    pub(crate) fn contract_with(&self, other: &Tensor, merge: &Merge) -> Result<Tensor, TensorError> {
        let ra = offset_table(&merge.kept_a);
        let rb = offset_table(&merge.kept_b);
        let sa = offset_table(&merge.sum_a);
        let sb = offset_table(&merge.sum_b);
        let a = &self.entries;
        let b = &other.entries;

        let cell = |r: usize| -> Option<u128> {
            let (oa, ob) = (ra[r], rb[r]);
            let mut acc: u128 = 0;
            for (&x, &y) in sa.iter().zip(&sb) {
                let av = a[oa | x];
                if av == 0 {
                    continue;
                }
                let bv = b[ob | y];
                if bv == 0 {
                    continue;
                }
                acc = acc.checked_add(av.checked_mul(bv)?)?;
            }
            Some(acc)
        };

        let work = ra.len() * sa.len();
        let entries: Option<Vec<u128>> = if work >= PARALLEL_THRESHOLD {
            (0..ra.len()).into_par_iter().map(cell).collect()
        } else {
            (0..ra.len()).map(cell).collect()
        };
        let entries = entries.ok_or(TensorError::Overflow)?;
        Ok(Tensor {
            shape: merge.shape.clone(),
            entries,
        })
    }
}
