//! Fourth-moment diagnostics of double Poisson integrals in the block family.

use chaoslab::clt::{clt_pipeline, findev_identity, CltConfig};
use chaoslab::scenarios::block_example_kernel;

fn main() -> chaoslab::error::Result<()> {
    let cfg = CltConfig { n_values: vec![4, 16, 64, 256], trials: 50_000, seed: 0, poc_family: None, poc_trials: 0, poc_lambda: Vec::new() };
    for r in clt_pipeline(&block_example_kernel, &cfg)?.records {
        println!("n {:>4}: E F^4 = {:.3} +- {:.3}, KS = {:.4}", r.n, r.fourth_moment.mean, r.fourth_moment.std_err, r.ks);
    }
    let f = block_example_kernel(16)?;
    let r = findev_identity(&f, 1, 200_000)?;
    println!("expansion at n = 16: MC {:.3} +- {:.3}, closed form {:.4}", r.lhs.mean, r.lhs.std_err, r.rhs);
    Ok(())
}
