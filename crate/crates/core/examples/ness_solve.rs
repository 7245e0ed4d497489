//! Solve for the steady state under a two-temperature reservoir and
//! print the iteration history next to its a-priori bound.

use ness_lab::kernel::{make_kernel, KernelKind};
use ness_lab::spectral::{charfn_mixture, RadialGrid};
use ness_lab::steady::{a_priori_bound, NessSolver};

fn main() -> ness_lab::Result<()> {
    let k = make_kernel(KernelKind::Isotropic, 64)?;
    let r = charfn_mixture(RadialGrid::default(), &[0.5, 0.5], &[0.2, 7.0 / 15.0])?;
    let rep = NessSolver::new(&r, &k, 0.5).tol(1e-10).solve()?;

    println!("converged after {} iterations", rep.iterations);
    println!("certified error {:.3e}", rep.certified_error);
    println!("m2 = {:.10}  m4 = {:.10}", rep.moments.m2, rep.moments.m4);
    let d1 = rep.history[0];
    for (n, d) in rep.history.iter().enumerate().step_by(5) {
        println!("n = {:>3}  d_n = {:.3e}  bound = {:.3e}", n + 1, d, a_priori_bound(rep.lambda_used, d1, n + 1)?);
    }
    Ok(())
}
