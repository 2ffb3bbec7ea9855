//! Calibration run for the distributional thresholds in `clt::calibration`.
//!
//! Runs the block family at n = 256 and the negative control at ten times
//! the acceptance budget and prints the resulting thresholds.
//!
//!     cargo run --release --example calibrate > calibration/calibration.log

use chaoslab::clt::{clt_pipeline, negative_control_kernel, CltConfig};
use chaoslab::scenarios::block_example_kernel;

const SUITE_TRIALS: u64 = 100_000;
const CALIBRATION_TRIALS: u64 = 1_000_000;
const ALPHA: f64 = 1e-3;
const SEED: u64 = 20_000_256;

fn dkw(n: u64) -> f64 {
    ((2.0 / ALPHA).ln() / (2.0 * n as f64)).sqrt()
}

fn main() -> chaoslab::error::Result<()> {
    let cfg = |seed| CltConfig {
        n_values: vec![256],
        trials: CALIBRATION_TRIALS,
        seed,
        poc_family: None,
        poc_trials: 0,
        poc_lambda: Vec::new(),
    };
    let block = clt_pipeline(&block_example_kernel, &cfg(SEED))?.records.remove(0);
    let control_kernel = negative_control_kernel();
    let control = clt_pipeline(&|_| Ok(control_kernel.clone()), &cfg(SEED + 1))?.records.remove(0);

    let slack = dkw(SUITE_TRIALS) + dkw(CALIBRATION_TRIALS);
    let m4 = block.fourth_moment;
    let suite_se = m4.std_err * ((CALIBRATION_TRIALS / SUITE_TRIALS) as f64).sqrt();
    println!("trials {CALIBRATION_TRIALS}, seed {SEED}, alpha {ALPHA}");
    println!("block n=256: E F^4 = {:.5} +- {:.5}, KS = {:.5}", m4.mean, m4.std_err, block.ks);
    println!("control:     KS = {:.5}", control.ks);
    println!("DKW slack at alpha: suite {:.5}, calibration {:.5}", dkw(SUITE_TRIALS), dkw(CALIBRATION_TRIALS));
    println!("FOURTH_MOMENT_256 = {:.3}", (m4.mean - 3.0).abs() + 4.0 * suite_se);
    println!("KS_256 = {:.4}", block.ks + slack);
    println!("NEGATIVE_CONTROL_KS_FLOOR = {:.4}", control.ks - slack);
    Ok(())
}
