//! Tangent decoupling of an adapted array and the conditioning verdict.

use std::sync::Arc;

use chaoslab::partition::{uniform_partition, Resolution};
use chaoslab::poc::{build_tangent_pair, conditional_cf_decoupled, poc_verdict, IntegrandSpec, PocConfig};
use chaoslab::rmeasure::MeasureLaw;

fn main() -> chaoslab::error::Result<()> {
    let p = Arc::new(uniform_partition(20, 0.05)?);
    let res = Resolution::forward(p.clone());
    // Phi_j = M_{j-1}
    let spec = IntegrandSpec::Linear((1..20).map(|j| (j, j - 1, 1.0)).collect());
    let pair = build_tangent_pair(&spec, &res, MeasureLaw::CompensatedPoisson, 0, 0, 0.5)?;
    println!("original total {:.4}, decoupled total {:.4}", pair.original.total(), pair.decoupled.total());
    for l in [0.5, 1.0, 2.0] {
        println!("  lambda {l}: conditional CF of the decoupled sum {:.4}", conditional_cf_decoupled(&pair, l));
    }

    let cfg = PocConfig { n_values: vec![20], trials: 20_000, lambda: vec![0.5, 1.0, 2.0] };
    let report = poc_verdict(
        &cfg,
        |_, t| build_tangent_pair(&spec, &res, MeasureLaw::CompensatedPoisson, 1, t, 0.5),
        |_, pair, l| conditional_cf_decoupled(pair, l),
    )?;
    for (n, lambda, metric, value, se) in report.records() {
        println!("n {n} lambda {lambda:?} {metric}: {value:.4} +- {se:.4}");
    }
    Ok(())
}
