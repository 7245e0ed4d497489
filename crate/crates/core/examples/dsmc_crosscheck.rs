//! Particle simulation of the reservoir-driven gas compared with the
//! spectral steady state.
//!
//! ```text
//! cargo run --release --example dsmc_crosscheck
//! ```

use ness_lab::dsmc::{run_dsmc, DsmcConfig};
use ness_lab::kernel::{make_kernel, KernelKind};
use ness_lab::metrics::moments;
use ness_lab::spectral::{charfn_mixture, RadialGrid};
use ness_lab::steady::solve_ness;

fn main() -> ness_lab::Result<()> {
    let k = make_kernel(KernelKind::Isotropic, 64)?;
    let r = charfn_mixture(RadialGrid::default(), &[0.5, 0.5], &[0.2, 7.0 / 15.0])?;
    let spectral = moments(&solve_ness(&r, &k, 0.5, 1e-10, 500)?.phi_inf)?;

    let cfg = DsmcConfig {
        n_particles: 20_000,
        replicas: 8,
        t_end: 40.0,
        seed: 11,
        ..DsmcConfig::default()
    };
    let run = run_dsmc(&cfg)?;
    let s = &run.summary;
    println!("m2: spectral {:.5}  particles {:.5} ± {:.5}", spectral.m2, s.terminal_m2.mean, s.terminal_m2.se);
    println!("m4: spectral {:.5}  particles {:.5} ± {:.5}", spectral.m4, s.terminal_m4.mean, s.terminal_m4.se);
    Ok(())
}
