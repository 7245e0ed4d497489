//! The fixed-point map brings two unit-energy laws closer in the GTW
//! distance, by at least the factor lambda.

use ness_lab::kernel::{make_kernel, KernelKind};
use ness_lab::metrics::gtw_distance;
use ness_lab::spectral::{charfn_maxwellian, charfn_mixture, phi_map, RadialGrid};

fn main() -> ness_lab::Result<()> {
    let grid = RadialGrid::default();
    let gamma = 0.5;
    let k = make_kernel(KernelKind::Linear { a: 0.3 }, 64)?;
    let r = charfn_mixture(grid, &[0.5, 0.5], &[0.2, 7.0 / 15.0])?;
    let mut f = charfn_maxwellian(grid, 1.0 / 3.0)?;
    // 3 (0.25 * 0.8 + 0.75 * 8/45) = 1
    let mut g = charfn_mixture(grid, &[0.25, 0.75], &[0.8, 8.0 / 45.0])?;
    println!("lambda = {}", k.contraction_factor(gamma)?);
    let mut d = gtw_distance(&f, &g)?;
    for n in 1..=8 {
        f = phi_map(&f, &r, &k, gamma)?;
        g = phi_map(&g, &r, &k, gamma)?;
        let next = gtw_distance(&f, &g)?;
        println!("n = {n}  d = {next:.4e}  ratio = {:.4}", next / d);
        d = next;
    }
    Ok(())
}
