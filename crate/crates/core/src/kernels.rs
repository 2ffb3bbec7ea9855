//! Block kernels on `Z^d` and their algebra.
//!
//! A kernel is constant on each product of cells `B_{i_1} x ... x B_{i_d}`.
//! Two representations are kept apart:
//!
//! * [`KernelTable`] indexes values by *ordered* tuples of cell ids. Tensor
//!   products and contractions produce tables, which need not be symmetric.
//! * [`SymmetricKernel`] indexes values by *multisets* of cell ids, so symmetry
//!   holds by construction. This is the input type of every multiple
//!   integral.
//!
//! A repeated id inside a multiset stands for the off-diagonal part of the
//! corresponding block, e.g. `{i, i}` is the function `1` on
//! `{(x, y) in B_i x B_i : x != y}`. The control measure is non-atomic, so
//! that set has mass `mu_i^2` and all `L^2` bookkeeping treats it as the
//! full square. For the same reason contractions integrate over whole cells.
//!
//! Storage is sparse for every order: refined block kernels carry tens of
//! thousands of cells but only a handful of nonzero entries per row.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::CellPartition;
use crate::rmeasure::same_partition;

pub const MAX_ORDER: usize = 4;

/// A tuple of at most [`MAX_ORDER`] cell ids.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Tuple {
    len: u8,
    ids: [u32; MAX_ORDER],
}

impl Tuple {
    pub const EMPTY: Tuple = Tuple { len: 0, ids: [0; MAX_ORDER] };

    pub fn new(ids: &[usize]) -> Result<Self> {
        if ids.len() > MAX_ORDER {
            return Err(Error::OrderTooLarge(ids.len()));
        }
        let mut t = Self::EMPTY;
        for &id in ids {
            t.push(id as u32);
        }
        Ok(t)
    }

    fn from_u32(ids: &[u32]) -> Self {
        let mut t = Self::EMPTY;
        for &id in ids {
            t.push(id);
        }
        t
    }

    fn push(&mut self, id: u32) {
        self.ids[self.len as usize] = id;
        self.len += 1;
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids[..self.len as usize]
    }

    pub fn get(&self, i: usize) -> usize {
        self.ids[i] as usize
    }

    pub fn sorted(&self) -> Self {
        let mut t = *self;
        t.ids[..t.len as usize].sort_unstable();
        t
    }

    /// True when some id occurs twice. Expects a sorted tuple.
    pub fn has_repeats(&self) -> bool {
        self.ids().windows(2).any(|w| w[0] == w[1])
    }

    /// Multiplicities of the distinct ids of a sorted tuple, in id order.
    pub fn runs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let ids = self.ids();
        let mut i = 0;
        std::iter::from_fn(move || {
            if i >= ids.len() {
                return None;
            }
            let id = ids[i];
            let start = i;
            while i < ids.len() && ids[i] == id {
                i += 1;
            }
            Some((id as usize, i - start))
        })
    }

    /// Number of distinct orderings of a sorted tuple: `d! / prod k_i!`.
    pub fn arrangement_count(&self) -> usize {
        let mut count = factorial(self.len());
        for (_, k) in self.runs() {
            count /= factorial(k);
        }
        count
    }

    /// All distinct orderings of a sorted tuple, lexicographically.
    pub fn arrangements(&self) -> Vec<Tuple> {
        let mut out = vec![*self];
        let mut cur = *self;
        // next_permutation over a sorted start enumerates each distinct
        // ordering exactly once
        while next_permutation(&mut cur.ids[..cur.len as usize]) {
            out.push(cur);
        }
        out
    }

    fn concat(parts: &[&[u32]]) -> Self {
        let mut t = Self::EMPTY;
        for p in parts {
            for &id in *p {
                t.push(id);
            }
        }
        t
    }
}

fn next_permutation(xs: &mut [u32]) -> bool {
    if xs.len() < 2 {
        return false;
    }
    let mut i = xs.len() - 1;
    while i > 0 && xs[i - 1] >= xs[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = xs.len() - 1;
    while xs[j] <= xs[i - 1] {
        j -= 1;
    }
    xs.swap(i - 1, j);
    xs[i..].reverse();
    true
}

pub fn factorial(n: usize) -> usize {
    (1..=n).product()
}

fn mass_product(partition: &CellPartition, ids: &[u32]) -> f64 {
    ids.iter().map(|&c| partition.mass(c as usize)).product()
}

fn check_ids(partition: &CellPartition, ids: &[usize]) -> Result<()> {
    ids.iter().try_for_each(|&id| partition.check_id(id))
}

/// Kernel indexed by ordered tuples of cell ids.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    order: usize,
    partition: Arc<CellPartition>,
    entries: BTreeMap<Tuple, f64>,
}

impl KernelTable {
    pub fn from_entries<I, T>(partition: Arc<CellPartition>, order: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (T, f64)>,
        T: AsRef<[usize]>,
    {
        if order > MAX_ORDER {
            return Err(Error::OrderTooLarge(order));
        }
        let mut map = BTreeMap::new();
        for (ids, v) in entries {
            let ids = ids.as_ref();
            if ids.len() != order {
                return Err(Error::OrderMismatch { expected: order, found: ids.len() });
            }
            check_ids(&partition, ids)?;
            *map.entry(Tuple::new(ids)?).or_insert(0.0) += v;
        }
        Ok(Self { order, partition, entries: map })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn partition(&self) -> &Arc<CellPartition> {
        &self.partition
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Tuple, f64)> {
        self.entries.iter().map(|(t, &v)| (t, v))
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn value(&self, ids: &[usize]) -> f64 {
        Tuple::new(ids).ok().and_then(|t| self.entries.get(&t).copied()).unwrap_or(0.0)
    }

    /// Value of an order-0 table.
    pub fn scalar(&self) -> Option<f64> {
        (self.order == 0).then(|| self.entries.get(&Tuple::EMPTY).copied().unwrap_or(0.0))
    }

    pub fn norm_sq(&self) -> f64 {
        self.entries.iter().map(|(t, &v)| v * v * mass_product(&self.partition, t.ids())).sum()
    }
}

/// Kernel indexed by multisets of cell ids; see the module docs for the
/// meaning of repeated ids.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricKernel {
    order: usize,
    partition: Arc<CellPartition>,
    // sorted by multiset key, zero values dropped
    entries: Vec<(Tuple, f64)>,
    offdiag_only: bool,
}

impl SymmetricKernel {
    pub fn zero(partition: Arc<CellPartition>, order: usize) -> Result<Self> {
        if order > MAX_ORDER {
            return Err(Error::OrderTooLarge(order));
        }
        Ok(Self { order, partition, entries: Vec::new(), offdiag_only: false })
    }

    /// Builds a kernel from multiset entries (id order within an entry is
    /// irrelevant). Repeating a multiset is an error.
    pub fn from_entries<I, T>(partition: Arc<CellPartition>, order: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (T, f64)>,
        T: AsRef<[usize]>,
    {
        if order > MAX_ORDER {
            return Err(Error::OrderTooLarge(order));
        }
        let mut map = BTreeMap::new();
        for (ids, v) in entries {
            let ids = ids.as_ref();
            if ids.len() != order {
                return Err(Error::OrderMismatch { expected: order, found: ids.len() });
            }
            check_ids(&partition, ids)?;
            let key = Tuple::new(ids)?.sorted();
            if map.insert(key, v).is_some() {
                return Err(Error::InvalidParameter(format!("duplicate kernel entry {ids:?}")));
            }
        }
        Ok(Self::from_map(partition, order, map, false))
    }

    /// Like [`from_entries`](Self::from_entries) but rejects repeated ids.
    pub fn from_offdiag_entries<I, T>(partition: Arc<CellPartition>, order: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (T, f64)>,
        T: AsRef<[usize]>,
    {
        let k = Self::from_entries(partition, order, entries)?;
        if let Some((t, _)) = k.entries.iter().find(|(t, _)| t.has_repeats()) {
            return Err(Error::InvalidParameter(format!("entry {:?} repeats a cell id", t.ids())));
        }
        Ok(Self { offdiag_only: true, ..k })
    }

    fn from_map(partition: Arc<CellPartition>, order: usize, map: BTreeMap<Tuple, f64>, offdiag_only: bool) -> Self {
        let entries = map.into_iter().filter(|&(_, v)| v != 0.0).collect();
        Self { order, partition, entries, offdiag_only }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn partition(&self) -> &Arc<CellPartition> {
        &self.partition
    }

    pub fn offdiag_only(&self) -> bool {
        self.offdiag_only
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries keyed by sorted multiset.
    pub fn entries(&self) -> impl Iterator<Item = (&Tuple, f64)> {
        self.entries.iter().map(|(t, v)| (t, *v))
    }

    pub fn value(&self, ids: &[usize]) -> f64 {
        let Ok(key) = Tuple::new(ids) else { return 0.0 };
        let key = key.sorted();
        self.entries
            .binary_search_by(|(t, _)| t.cmp(&key))
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    pub fn scale(&self, c: f64) -> Self {
        let entries = self.entries.iter().map(|&(t, v)| (t, c * v)).filter(|&(_, v)| v != 0.0).collect();
        Self { entries, ..self.clone() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if !same_partition(&self.partition, &other.partition) {
            return Err(Error::PartitionMismatch);
        }
        if self.order != other.order {
            return Err(Error::OrderMismatch { expected: self.order, found: other.order });
        }
        let mut map: BTreeMap<Tuple, f64> = self.entries.iter().copied().collect();
        for &(t, v) in &other.entries {
            *map.entry(t).or_insert(0.0) += v;
        }
        Ok(Self::from_map(self.partition.clone(), self.order, map, self.offdiag_only && other.offdiag_only))
    }

    /// Applies `op` to every stored value (zeros stay zero, so `op(0)` must be 0).
    pub fn map_values(&self, op: impl Fn(f64) -> f64) -> Self {
        let entries = self.entries.iter().map(|&(t, v)| (t, op(v))).filter(|&(_, v)| v != 0.0).collect();
        Self { entries, ..self.clone() }
    }

    /// Keeps only the entries accepted by `keep`.
    pub fn filter(&self, keep: impl Fn(&Tuple) -> bool) -> Self {
        let entries = self.entries.iter().copied().filter(|(t, _)| keep(t)).collect();
        Self { entries, ..self.clone() }
    }

    /// Expands to the equivalent ordered-tuple table.
    pub fn to_table(&self) -> KernelTable {
        let mut entries = BTreeMap::new();
        for &(t, v) in &self.entries {
            for a in t.arrangements() {
                entries.insert(a, v);
            }
        }
        KernelTable { order: self.order, partition: self.partition.clone(), entries }
    }
}

/// `(1/d!) sum_sigma f(sigma . t)` for every tuple `t`.
pub fn symmetrize(table: &KernelTable) -> SymmetricKernel {
    let mut sums: BTreeMap<Tuple, f64> = BTreeMap::new();
    for (t, &v) in &table.entries {
        *sums.entry(t.sorted()).or_insert(0.0) += v;
    }
    for (t, v) in sums.iter_mut() {
        *v /= t.arrangement_count() as f64;
    }
    SymmetricKernel::from_map(table.partition.clone(), table.order, sums, false)
}

/// Drops every entry with a repeated id.
pub fn zero_diagonal(f: &SymmetricKernel) -> SymmetricKernel {
    let entries = f.entries.iter().copied().filter(|(t, _)| !t.has_repeats()).collect();
    SymmetricKernel { entries, offdiag_only: true, ..f.clone() }
}

/// `f ⊗ g` on concatenated arguments, not symmetrized.
pub fn tensor(f: &SymmetricKernel, g: &SymmetricKernel) -> Result<KernelTable> {
    contract(f, g, 0, 0)
}

/// Contraction `f ★_r^l g`: the first `r` arguments of `f` and `g` are
/// identified and the first `l` of those integrated against the control
/// measure. Output arguments are `(gamma_1..gamma_{r-l}, t_1..t_{p-r},
/// s_1..s_{q-r})`.
pub fn contract(f: &SymmetricKernel, g: &SymmetricKernel, r: usize, l: usize) -> Result<KernelTable> {
    let (p, q) = (f.order, g.order);
    if r > p.min(q) || l > r {
        return Err(Error::ContractionRange { p, q, r, l });
    }
    if !same_partition(&f.partition, &g.partition) {
        return Err(Error::PartitionMismatch);
    }
    let out_order = p + q - r - l;
    if out_order > MAX_ORDER {
        return Err(Error::OrderTooLarge(out_order));
    }

    // g's orderings grouped by their first r ids
    let mut g_by_head: BTreeMap<Tuple, Vec<(Tuple, f64)>> = BTreeMap::new();
    for &(t, v) in &g.entries {
        for a in t.arrangements() {
            let ids = a.ids();
            g_by_head.entry(Tuple::from_u32(&ids[..r])).or_default().push((Tuple::from_u32(&ids[r..]), v));
        }
    }

    let partition = &f.partition;
    let mut out: BTreeMap<Tuple, f64> = BTreeMap::new();
    for &(t, fv) in &f.entries {
        for a in t.arrangements() {
            let ids = a.ids();
            let Some(matches) = g_by_head.get(&Tuple::from_u32(&ids[..r])) else { continue };
            let weight = fv * mass_product(partition, &ids[..l]);
            for (rest, gv) in matches {
                let key = Tuple::concat(&[&ids[l..r], &ids[r..], rest.ids()]);
                *out.entry(key).or_insert(0.0) += weight * gv;
            }
        }
    }
    Ok(KernelTable { order: out_order, partition: partition.clone(), entries: out })
}

/// `||f||^2` in `L^2(mu^d)`, summed over ordered tuples.
pub fn kernel_norm_sq(f: &SymmetricKernel) -> f64 {
    f.entries
        .iter()
        .map(|(t, v)| v * v * t.arrangement_count() as f64 * mass_product(&f.partition, t.ids()))
        .sum()
}

pub fn inner_product(f: &SymmetricKernel, g: &SymmetricKernel) -> Result<f64> {
    if !same_partition(&f.partition, &g.partition) {
        return Err(Error::PartitionMismatch);
    }
    if f.order != g.order {
        return Err(Error::OrderMismatch { expected: f.order, found: g.order });
    }
    Ok(f.entries
        .iter()
        .map(|(t, v)| v * g.value_by_key(t) * t.arrangement_count() as f64 * mass_product(&f.partition, t.ids()))
        .sum())
}

impl SymmetricKernel {
    fn value_by_key(&self, key: &Tuple) -> f64 {
        self.entries.binary_search_by(|(t, _)| t.cmp(key)).map(|i| self.entries[i].1).unwrap_or(0.0)
    }
}

/// `{"order":2,"entries":[[i,j,value],...]}`; `offdiag_only` is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub order: usize,
    pub entries: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub offdiag_only: bool,
}

impl KernelSpec {
    pub fn from_kernel(f: &SymmetricKernel) -> Self {
        let entries = f
            .entries()
            .map(|(t, v)| t.ids().iter().map(|&c| c as f64).chain(std::iter::once(v)).collect())
            .collect();
        Self { order: f.order, entries, offdiag_only: f.offdiag_only }
    }

    pub fn build(&self, partition: Arc<CellPartition>) -> Result<SymmetricKernel> {
        let mut parsed = Vec::with_capacity(self.entries.len());
        for row in &self.entries {
            if row.len() != self.order + 1 {
                return Err(Error::OrderMismatch { expected: self.order, found: row.len().saturating_sub(1) });
            }
            let mut ids = Vec::with_capacity(self.order);
            for &x in &row[..self.order] {
                if x < 0.0 || x.fract() != 0.0 {
                    return Err(Error::InvalidParameter(format!("cell id {x} is not a nonnegative integer")));
                }
                ids.push(x as usize);
            }
            parsed.push((ids, row[self.order]));
        }
        if self.offdiag_only {
            SymmetricKernel::from_offdiag_entries(partition, self.order, parsed)
        } else {
            SymmetricKernel::from_entries(partition, self.order, parsed)
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        serde_json::from_str(&text).map_err(|source| Error::Json { path: path.display().to_string(), source })
    }
}
