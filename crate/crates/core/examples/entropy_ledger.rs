//! Entropy balance of a gas between a cold and a hot reservoir: at the
//! steady state, then along a run from a hot start.

use ness_lab::entropy::{bgk_ness, ledger, ledger_series, thermal_trajectory, DensityGrid, JumpReservoir};
use ness_lab::kernel::{make_kernel, KernelKind};
use ness_lab::spectral::{charfn_maxwellian, RadialGrid};

fn main() -> ness_lab::Result<()> {
    let k = make_kernel(KernelKind::Isotropic, 64)?;
    let res = [JumpReservoir::new(1.0, 0.2)?, JumpReservoir::new(1.0, 0.6)?];
    let ness = bgk_ness(&k, &res, RadialGrid::default(), 1e-12, 200)?;
    let grid = DensityGrid::for_run(&res, 3.0, 2049);
    let f = grid.density(&ness.phi)?;
    let l = ledger(&f, &f, 0.05, &res)?;
    println!("steady state: J = {:?}", l.j_alpha);
    println!("  sigma_alpha = {:?}, sigma_total = {:.6}", l.sigma_alpha, l.sigma_total);
    println!("  (beta1 - beta2) J1 = {:.6}", (res[0].beta() - res[1].beta()) * l.j_alpha[0]);

    let phi0 = charfn_maxwellian(RadialGrid::default(), 1.0)?;
    let traj = thermal_trajectory(&phi0, &k, &res, 0.02, 1.0, 0.1)?;
    for row in ledger_series(&traj, &res, grid)? {
        println!(
            "t = {:.2}  m2 = {:.4}  S = {:.5}  dS/dt = {:+.5}  sigma_total = {:.5}",
            row.t, row.m2, row.ledger.s, row.ledger.s_dot, row.ledger.sigma_total
        );
    }
    Ok(())
}
