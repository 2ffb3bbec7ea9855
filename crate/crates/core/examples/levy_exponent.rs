//! Empirical characteristic function of X(h) against exp(psi_h(lambda)).

use std::sync::Arc;

use chaoslab::partition::uniform_partition;
use chaoslab::poc::estimate_stable_cf;
use chaoslab::rmeasure::{integrate_first_order, levy_exponent, sample_measure, FirstOrderKernel, MeasureLaw};
use chaoslab::stats::mc_collect;

fn main() -> chaoslab::error::Result<()> {
    let p = Arc::new(uniform_partition(8, 0.125)?);
    let h = FirstOrderKernel::new(p.clone(), (0..8).map(|i| 0.5 + 0.25 * i as f64).collect())?;
    let lambda = [0.5, 1.0, 2.0, 3.0];
    for law in [MeasureLaw::Gaussian, MeasureLaw::CompensatedPoisson] {
        let xs = mc_collect(100_000, |t| integrate_first_order(&sample_measure(&p, law, 1, t), &h))?;
        let est = estimate_stable_cf(&xs, None, &lambda)?;
        println!("{}", law.name());
        for (i, &l) in lambda.iter().enumerate() {
            let exact = levy_exponent(law, &h, l).exp();
            println!("  lambda {l}: empirical {:.4}, exact {:.4}", est.values[i], exact);
        }
    }
    Ok(())
}
