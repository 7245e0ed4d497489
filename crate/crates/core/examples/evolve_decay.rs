//! Time evolution from a hot Maxwellian: the energy relaxes at the
//! moment rate. Then from the reservoir itself, tracking the GTW
//! distance to the steady state.

use ness_lab::evolve::{self, RunOptions};
use ness_lab::kernel::{make_kernel, KernelKind};
use ness_lab::spectral::{charfn_maxwellian, charfn_mixture, RadialGrid};
use ness_lab::steady::solve_ness;

fn main() -> ness_lab::Result<()> {
    let gamma = 0.5;
    let k = make_kernel(KernelKind::Isotropic, 64)?;
    let r = charfn_mixture(RadialGrid::default(), &[0.5, 0.5], &[0.2, 7.0 / 15.0])?;
    let ness = solve_ness(&r, &k, gamma, 1e-12, 1000)?;

    let hot = charfn_maxwellian(RadialGrid::default(), 0.5)?;
    let opts = RunOptions {
        t_end: 10.0,
        record_every: 1.0,
        ..RunOptions::default()
    };
    // dt = 0.02 carries a first-order bias of about 1% here.
    let traj = evolve::run(&hot, &r, &k, gamma, &opts, &ness.phi_inf)?;
    let rate = k.moment_decay_rate(gamma)?;
    for (t, dev) in traj.m2_series() {
        println!("t = {t:>4.1}  m2 - 1 = {dev:.6}  0.5 exp(-{rate} t) = {:.6}", 0.5 * (-rate * t).exp());
    }

    let traj = evolve::run(&r, &r, &k, gamma, &RunOptions::default(), &ness.phi_inf)?;
    let s = traj.summary(&k, gamma)?;
    println!("GTW rate fitted {:?}, guaranteed {}", s.fitted_rate_gtw, s.theory_lambda1);
    Ok(())
}
