//! Per-trial product formula I_p(f) I_q(g) = sum_r sum_l ... on Poisson samples.

use std::sync::Arc;

use chaoslab::chaos::product_formula_check;
use chaoslab::kernels::SymmetricKernel;
use chaoslab::partition::uniform_partition;
use chaoslab::rmeasure::{sample_measure, MeasureLaw};

fn main() -> chaoslab::error::Result<()> {
    let p = Arc::new(uniform_partition(4, 0.5)?);
    let f = SymmetricKernel::from_offdiag_entries(p.clone(), 2, [(vec![0, 1], 1.0), (vec![1, 2], -0.5), (vec![2, 3], 2.0)])?;
    let g = SymmetricKernel::from_offdiag_entries(p.clone(), 2, [(vec![0, 2], 0.7), (vec![1, 3], 1.5)])?;
    for t in 0..5 {
        let s = sample_measure(&p, MeasureLaw::CompensatedPoisson, 3, t);
        let (lhs, rhs) = product_formula_check(&s, &f, &g)?;
        println!("trial {t}: M = {:?}, product {lhs:.6}, expansion {rhs:.6}", s.increments());
    }
    Ok(())
}
