//! Contraction norms of the block family.

use chaoslab::clt::{check_assumption_n, check_gstar};
use chaoslab::kernels::{contract, kernel_norm_sq, symmetrize};
use chaoslab::scenarios::block_example_kernel;

fn main() -> chaoslab::error::Result<()> {
    println!("{:>5} {:>10} {:>12} {:>12} {:>12} {:>12}", "n", "2|f|^2", "int f^4", "|f*11f|^2", "|f*21f|^2", "|f*10f|^2");
    for n in [1, 4, 16, 64, 256] {
        let f = block_example_kernel(n)?;
        let a = check_assumption_n(&f)?;
        let (c11, c21) = check_gstar(&f)?;
        let c10 = kernel_norm_sq(&symmetrize(&contract(&f, &f, 1, 0)?));
        println!("{n:>5} {:>10.6} {:>12.3e} {:>12.3e} {:>12.3e} {:>12.3e}", a.norm_half, a.fourth_power, c11, c21, c10);
    }
    Ok(())
}
