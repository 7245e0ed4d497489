//! Rate constants for a few angular kernels.
//!
//! ```text
//! cargo run --example kernel_rates
//! ```

use ness_lab::kernel::{make_kernel, KernelKind};
use ness_lab::runner::TheoryConstants;

fn main() -> ness_lab::Result<()> {
    let kinds = [
        KernelKind::Isotropic,
        KernelKind::Linear { a: 0.5 },
        KernelKind::Linear { a: -0.5 },
    ];
    println!("{:<22} {:>5} {:>8} {:>8} {:>10} {:>10}", "kernel", "gamma", "lambda", "lambda1", "moment", "no-gamma");
    for kind in kinds {
        let k = make_kernel(kind, 64)?;
        for gamma in [0.25, 0.5, 0.75] {
            let c = TheoryConstants::new(&k, gamma)?;
            println!(
                "{:<22} {:>5.2} {:>8.4} {:>8.4} {:>10.4} {:>10.4}",
                format!("{kind:?}"),
                gamma,
                c.lambda,
                c.lambda1,
                c.moment_decay_rate,
                c.lambda0_without_gamma
            );
        }
    }
    Ok(())
}
