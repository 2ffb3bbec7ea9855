#![allow(dead_code)]

use std::sync::Arc;

use chaoslab::kernels::SymmetricKernel;
use chaoslab::partition::{build_partition, CellPartition};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Partition with the given masses and taus ranked by `keys`.
pub fn ranked_partition(masses: &[f64], keys: &[f64]) -> Arc<CellPartition> {
    let n = masses.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]).then(a.cmp(&b)));
    let mut tau = vec![0.0; n];
    for (rank, &i) in order.iter().enumerate() {
        tau[i] = (rank + 1) as f64 / n as f64;
    }
    let spec: Vec<(f64, f64)> = masses.iter().copied().zip(tau).collect();
    Arc::new(build_partition(&spec).unwrap())
}

pub fn arb_partition(max_cells: usize) -> impl Strategy<Value = Arc<CellPartition>> {
    (1..=max_cells)
        .prop_flat_map(|n| (prop::collection::vec(0.1f64..3.0, n), prop::collection::vec(0.0f64..1.0, n)))
        .prop_map(|(m, k)| ranked_partition(&m, &k))
}

/// Random kernel of order `d` with up to `max_entries` stored multisets.
pub fn arb_kernel(
    max_cells: usize,
    d: usize,
    max_entries: usize,
    offdiag: bool,
) -> impl Strategy<Value = SymmetricKernel> {
    let min_cells = if offdiag { d.max(1) } else { 1 };
    (min_cells..=max_cells)
        .prop_flat_map(move |n| {
            (
                prop::collection::vec(0.2f64..2.0, n),
                prop::collection::vec(0.0f64..1.0, n),
                prop::collection::vec((prop::collection::vec(0..n, d), -2.0f64..2.0), 0..=max_entries),
            )
        })
        .prop_map(move |(m, k, entries)| build_kernel(ranked_partition(&m, &k), d, entries, offdiag))
}

pub fn build_kernel(p: Arc<CellPartition>, d: usize, entries: Vec<(Vec<usize>, f64)>, offdiag: bool) -> SymmetricKernel {
    let mut seen = std::collections::BTreeSet::new();
    let kept: Vec<(Vec<usize>, f64)> = entries
        .into_iter()
        .filter_map(|(mut ids, v)| {
            ids.sort_unstable();
            let repeats = ids.windows(2).any(|w| w[0] == w[1]);
            (!(offdiag && repeats) && seen.insert(ids.clone())).then_some((ids, v))
        })
        .collect();
    if offdiag {
        SymmetricKernel::from_offdiag_entries(p, d, kept).unwrap()
    } else {
        SymmetricKernel::from_entries(p, d, kept).unwrap()
    }
}

/// Seeded random block kernel on `n` cells of random mass.
pub fn random_kernel(seed: u64, n: usize, d: usize, entries: usize, offdiag: bool) -> SymmetricKernel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let masses: Vec<f64> = (0..n).map(|_| rng.gen_range(0.3..1.5)).collect();
    let keys: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
    let p = ranked_partition(&masses, &keys);
    let raw = (0..entries).map(|_| ((0..d).map(|_| rng.gen_range(0..n)).collect(), rng.gen_range(-1.0..1.0))).collect();
    build_kernel(p, d, raw, offdiag)
}

pub fn random_values(seed: u64, n: usize, scale: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}
