//! Ordering cells of a partition with forward and reversed resolutions.

use std::sync::Arc;

use chaoslab::partition::{build_partition, Resolution};

fn main() -> chaoslab::error::Result<()> {
    let p = Arc::new(build_partition(&[(0.25, 0.9), (0.5, 0.1), (0.25, 0.4)])?);
    for res in [Resolution::forward(p.clone()), Resolution::reversed(p.clone())] {
        println!("{:?}: order {:?}", res.direction(), res.ordered_cells());
        for t in [0.0, 0.3, 0.5, 1.0] {
            println!("  slice at t = {t}: {:?}", res.time_slice(t)?);
        }
        println!("  cell 1 precedes cell 0: {}", res.precedes(1, 0));
    }
    Ok(())
}
