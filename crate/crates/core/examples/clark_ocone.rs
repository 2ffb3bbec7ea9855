//! Representing I_2(f) as the adapted integral of h_pi(f), and the
//! isometry E I_2(f)^2 = 2 ||f||^2.

use chaoslab::chaos::{adapted_integral, adapted_integrand, eval_multiple_integral};
use chaoslab::kernels::kernel_norm_sq;
use chaoslab::partition::Resolution;
use chaoslab::rmeasure::{sample_measure, MeasureLaw};
use chaoslab::scenarios::refined_block_kernel;
use chaoslab::stats::mc_moments;

fn main() -> chaoslab::error::Result<()> {
    let f = refined_block_kernel(8, 4)?;
    let res = Resolution::forward(f.partition().clone());
    for law in [MeasureLaw::Gaussian, MeasureLaw::CompensatedPoisson] {
        let mut worst = 0.0f64;
        for t in 0..1000 {
            let s = sample_measure(f.partition(), law, 0, t);
            let u = adapted_integrand(&f, &res, &s)?;
            worst = worst.max((adapted_integral(&u, &s)? - eval_multiple_integral(&s, &f)?).abs());
        }
        let m = mc_moments(100_000, 1, |t, row| {
            row[0] = eval_multiple_integral(&sample_measure(f.partition(), law, 1, t), &f)?.powi(2);
            Ok(())
        })?;
        let e = m[0].estimate();
        println!(
            "{}: max |J(h_pi f) - I_2(f)| = {worst:.1e}; E I_2^2 = {:.4} +- {:.4} vs 2|f|^2 = {:.4}",
            law.name(),
            e.mean,
            e.std_err,
            2.0 * kernel_norm_sq(&f)
        );
    }
    Ok(())
}
