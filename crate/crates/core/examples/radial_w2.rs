//! Wasserstein-2 distance between isotropic laws, from samples and from
//! densities, against the closed form for two Maxwellians.

use ness_lab::dsmc::{replica_rng, Mixture, ParticleEnsemble};
use ness_lab::metrics::{radial_w2, SpeedLaw};
use ness_lab::spectral::RadialDensity;

fn main() -> ness_lab::Result<()> {
    for (ta, tb) in [(0.2, 0.6), (0.1, 1.0), (1.0 / 3.0, 0.34)] {
        let exact = 3f64.sqrt() * (f64::sqrt(ta) - f64::sqrt(tb)).abs();
        let a = ParticleEnsemble::sample(200_000, &Mixture::maxwellian(ta), replica_rng(1, 0))?.speeds();
        let b = ParticleEnsemble::sample(200_000, &Mixture::maxwellian(tb), replica_rng(1, 1))?.speeds();
        let v_max = 8.0 * f64::max(ta, tb).sqrt();
        let da = RadialDensity::maxwellian(ta, v_max, 4097)?;
        let db = RadialDensity::maxwellian(tb, v_max, 4097)?;
        println!(
            "T = {ta:.3}, {tb:.3}: exact {exact:.5}  samples {:.5}  densities {:.5}",
            radial_w2(SpeedLaw::Samples(&a), SpeedLaw::Samples(&b))?,
            radial_w2(SpeedLaw::Density(&da), SpeedLaw::Density(&db))?
        );
    }
    Ok(())
}
