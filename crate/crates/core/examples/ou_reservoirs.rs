//! Two Ornstein-Uhlenbeck reservoirs act as one. The energy gap closes
//! at rate 2 eta.

use ness_lab::dsmc::{reduce_ou_reservoirs, run_dsmc, DsmcConfig, Estimate, InitialLaw, OuReservoir, ReservoirSpec};

fn main() -> ness_lab::Result<()> {
    let reservoirs = vec![
        OuReservoir { eta: 1.0, temperature: 0.2 },
        OuReservoir { eta: 0.5, temperature: 0.8 },
    ];
    let (eta, t) = reduce_ou_reservoirs(&reservoirs)?;
    println!("effective eta = {eta}, temperature = {t}");

    let cfg = DsmcConfig {
        n_particles: 20_000,
        replicas: 4,
        t_end: 2.0,
        record_every: 0.2,
        reservoir: ReservoirSpec::Ou { reservoirs, collisions: false },
        initial: InitialLaw::maxwellian(1.0),
        ..DsmcConfig::default()
    };
    let run = run_dsmc(&cfg)?;
    for (i, time) in run.replicas[0].times.iter().enumerate() {
        let m2: Vec<f64> = run.replicas.iter().map(|r| r.m2[i]).collect();
        let e = Estimate::of(&m2);
        let exact = 3.0 * t + (3.0 - 3.0 * t) * (-2.0 * eta * time).exp();
        println!("t = {time:.1}  m2 = {:.4} ± {:.4}  exact {exact:.4}", e.mean, e.se);
    }
    Ok(())
}
