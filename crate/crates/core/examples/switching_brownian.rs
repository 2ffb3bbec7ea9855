//! Stable limit of the switching functional of Brownian motion.

use chaoslab::scenarios::{switching_study, switching_target_cf, SWITCHING_GAMMAS};

fn main() -> chaoslab::error::Result<()> {
    let lambda = [0.5, 1.0, 2.0];
    for n in [25, 100] {
        let stage = switching_study(n, 2000, 0, 20_000, &SWITCHING_GAMMAS, &lambda)?;
        println!("n {n}: E|‖u‖² - W1²| = {:.4}, CF distance {:.4}", stage.norm_gap.mean, stage.cf_distance());
        for (g, est) in &stage.cf {
            for (i, &l) in est.lambda.iter().enumerate() {
                println!("  gamma {g} lambda {l}: {:.4} vs {:.4}", est.values[i], switching_target_cf(*g, l));
            }
        }
    }
    Ok(())
}
