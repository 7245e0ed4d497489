//! Direct simulation Monte Carlo for the reservoir-coupled equation and for
//! Ornstein–Uhlenbeck thermostats, with full 3-D velocities.
//!
//! Collisions are scheduled per particle (Nanbu style). Every draw from the
//! random stream is independent of the particle state, so two ensembles
//! started from different velocities with the same seed see the same noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{AngularKernel, KernelKind};
use crate::stats::{log_slope_in_window, mean_se};

pub type Vec3 = [f64; 3];

/// Largest step accepted by [`collide_step`].
pub const MAX_COLLISION_DT: f64 = 0.05;

#[inline]
fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
fn norm_sq(a: Vec3) -> f64 {
    dot(a, a)
}

/// `v' = (v + v_* + |v - v_*| σ)/2`, `v_*' = (v + v_* - |v - v_*| σ)/2`.
pub fn post_collision(v: Vec3, v_star: Vec3, sigma: Vec3) -> Result<(Vec3, Vec3)> {
    let len = norm_sq(sigma).sqrt();
    if !((len - 1.0).abs() <= 1e-12) {
        return Err(Error::domain(format!("|sigma| = {len} is not 1")));
    }
    Ok(scatter(v, v_star, sigma))
}

#[inline]
fn scatter(v: Vec3, w: Vec3, sigma: Vec3) -> (Vec3, Vec3) {
    let g = norm_sq([v[0] - w[0], v[1] - w[1], v[2] - w[2]]).sqrt();
    let mut a = [0.0; 3];
    let mut b = [0.0; 3];
    for c in 0..3 {
        let centre = 0.5 * (v[c] + w[c]);
        let half = 0.5 * g * sigma[c];
        a[c] = centre + half;
        b[c] = centre - half;
    }
    (a, b)
}

/// Unit vector with cosine `s` to the axis `v - w` and azimuth `phi`.
/// Falls back to the z axis when `v = w`, where the outcome does not depend
/// on `σ`.
fn scattering_direction(v: Vec3, w: Vec3, s: f64, phi: f64) -> Vec3 {
    let d = [v[0] - w[0], v[1] - w[1], v[2] - w[2]];
    let g = norm_sq(d).sqrt();
    let n = if g > 0.0 {
        [d[0] / g, d[1] / g, d[2] / g]
    } else {
        [0.0, 0.0, 1.0]
    };
    // Any vector not parallel to n seeds the orthonormal frame.
    let seed = if n[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    let p = dot(seed, n);
    let mut e1 = [seed[0] - p * n[0], seed[1] - p * n[1], seed[2] - p * n[2]];
    let l1 = norm_sq(e1).sqrt();
    e1 = [e1[0] / l1, e1[1] / l1, e1[2] / l1];
    let e2 = [
        n[1] * e1[2] - n[2] * e1[1],
        n[2] * e1[0] - n[0] * e1[2],
        n[0] * e1[1] - n[1] * e1[0],
    ];
    let st = (1.0 - s * s).max(0.0).sqrt();
    let (sp, cp) = phi.sin_cos();
    let mut sigma = [0.0; 3];
    for c in 0..3 {
        sigma[c] = s * n[c] + st * (cp * e1[c] + sp * e2[c]);
    }
    let l = norm_sq(sigma).sqrt();
    [sigma[0] / l, sigma[1] / l, sigma[2] / l]
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R, temperature: f64) -> Vec3 {
    let sd = temperature.sqrt();
    [
        sd * rng.sample::<f64, _>(StandardNormal),
        sd * rng.sample::<f64, _>(StandardNormal),
        sd * rng.sample::<f64, _>(StandardNormal),
    ]
}

/// Finite mixture of centred Maxwellians `Σ w_i M_{T_i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mixture {
    pub weights: Vec<f64>,
    pub temps: Vec<f64>,
}

impl Mixture {
    pub fn maxwellian(temperature: f64) -> Self {
        Self {
            weights: vec![1.0],
            temps: vec![temperature],
        }
    }

    pub fn validate(&self) -> Result<()> {
        crate::spectral::validate_mixture(&self.weights, &self.temps)
    }

    /// `⟨|v|²⟩ = 3 Σ w_i T_i`.
    pub fn energy(&self) -> f64 {
        3.0 * self.weights.iter().zip(&self.temps).map(|(w, t)| w * t).sum::<f64>()
    }

    /// Always consumes one uniform and three normals.
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec3 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = self.temps.len() - 1;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                pick = i;
                break;
            }
        }
        gaussian(rng, self.temps[pick])
    }
}

/// Collision part of the model: a fraction `1 - γ` of collisions is with
/// other particles, a fraction `γ` with a partner drawn from the reservoir.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureCollision {
    pub weights: Vec<f64>,
    pub temps: Vec<f64>,
    pub gamma: f64,
}

impl MixtureCollision {
    /// Pair collisions only (`γ = 0`).
    pub fn pairs_only() -> Self {
        Self {
            weights: vec![1.0],
            temps: vec![1.0 / 3.0],
            gamma: 0.0,
        }
    }

    pub fn reservoir(&self) -> Mixture {
        Mixture {
            weights: self.weights.clone(),
            temps: self.temps.clone(),
        }
    }

    /// Accepts the closed interval `γ ∈ [0, 1]`; the end points are the
    /// pure pair and pure reservoir limits.
    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config("reservoir.gamma", format!("{} outside [0, 1]", self.gamma)));
        }
        self.reservoir().validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OuReservoir {
    pub eta: f64,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReservoirSpec {
    MixtureCollision {
        weights: Vec<f64>,
        temps: Vec<f64>,
        gamma: f64,
    },
    Ou {
        reservoirs: Vec<OuReservoir>,
        /// Alternate pair collisions with the thermostat.
        #[serde(default = "default_true")]
        collisions: bool,
    },
}

fn default_true() -> bool {
    true
}

impl Default for ReservoirSpec {
    fn default() -> Self {
        ReservoirSpec::MixtureCollision {
            weights: vec![0.5, 0.5],
            temps: vec![0.2, 7.0 / 15.0],
            gamma: 0.5,
        }
    }
}

impl ReservoirSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ReservoirSpec::MixtureCollision {
                weights,
                temps,
                gamma,
            } => {
                if !(*gamma > 0.0 && *gamma < 1.0) {
                    return Err(Error::config("reservoir.gamma", format!("{gamma} outside (0, 1)")));
                }
                crate::spectral::validate_mixture(weights, temps)
            }
            ReservoirSpec::Ou { reservoirs, .. } => reduce_ou_reservoirs(reservoirs).map(|_| ()),
        }
    }

    /// Energy `⟨|v|²⟩` the reservoir drives the system to.
    pub fn target_energy(&self) -> Result<f64> {
        match self {
            ReservoirSpec::MixtureCollision { weights, temps, .. } => Ok(Mixture {
                weights: weights.clone(),
                temps: temps.clone(),
            }
            .energy()),
            ReservoirSpec::Ou { reservoirs, .. } => Ok(3.0 * reduce_ou_reservoirs(reservoirs)?.1),
        }
    }
}

/// Single-reservoir equivalent `η = Σ η_α`, `T = Σ η_α T_α / η`.
pub fn reduce_ou_reservoirs(reservoirs: &[OuReservoir]) -> Result<(f64, f64)> {
    if reservoirs.is_empty() {
        return Err(Error::config("reservoir.reservoirs", "at least one reservoir is required"));
    }
    let mut eta = 0.0;
    let mut weighted = 0.0;
    for (i, r) in reservoirs.iter().enumerate() {
        if !(r.eta > 0.0 && r.eta.is_finite()) {
            return Err(Error::config(format!("reservoir.reservoirs[{i}].eta"), "must be positive"));
        }
        if !(r.temperature > 0.0 && r.temperature.is_finite()) {
            return Err(Error::config(
                format!("reservoir.reservoirs[{i}].temperature"),
                "must be positive",
            ));
        }
        eta += r.eta;
        weighted += r.eta * r.temperature;
    }
    Ok((eta, weighted / eta))
}

#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    velocities: Vec<Vec3>,
    rng: ChaCha8Rng,
    time: f64,
}

impl ParticleEnsemble {
    pub fn new(velocities: Vec<Vec3>, rng: ChaCha8Rng) -> Result<Self> {
        if velocities.len() < 2 {
            return Err(Error::config("n_particles", "at least two particles are required"));
        }
        if velocities.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::domain("non-finite velocity component"));
        }
        Ok(Self {
            velocities,
            rng,
            time: 0.0,
        })
    }

    /// `n` velocities drawn from `law` with the generator's own stream.
    pub fn sample(n: usize, law: &Mixture, mut rng: ChaCha8Rng) -> Result<Self> {
        law.validate()?;
        let velocities = (0..n).map(|_| law.sample(&mut rng)).collect();
        Self::new(velocities, rng)
    }

    pub fn len(&self) -> usize {
        self.velocities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.velocities.is_empty()
    }

    pub fn velocities(&self) -> &[Vec3] {
        &self.velocities
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn shift(&mut self, u: Vec3) {
        for v in &mut self.velocities {
            for c in 0..3 {
                v[c] += u[c];
            }
        }
    }

    pub fn mean_velocity(&self) -> Vec3 {
        let mut m = [0.0; 3];
        for v in &self.velocities {
            for c in 0..3 {
                m[c] += v[c];
            }
        }
        let n = self.len() as f64;
        [m[0] / n, m[1] / n, m[2] / n]
    }

    /// `⟨|v|²⟩` and `⟨|v|⁴⟩`.
    pub fn energy_moments(&self) -> (f64, f64) {
        let n = self.len() as f64;
        let (mut m2, mut m4) = (0.0, 0.0);
        for v in &self.velocities {
            let e = norm_sq(*v);
            m2 += e;
            m4 += e * e;
        }
        (m2 / n, m4 / n)
    }

    pub fn speeds(&self) -> Vec<f64> {
        self.velocities.iter().map(|v| norm_sq(*v).sqrt()).collect()
    }
}

/// Advance the collision dynamics by `dt`.
///
/// Each particle starts a collision with probability `1 - e^{-ρ dt}`,
/// `ρ = (1-γ)/2 + γ`. A started collision is internal with probability
/// `(1-γ)/(2ρ)`: a uniformly chosen other particle is the partner and both
/// are updated. Since a particle takes part in internal collisions both as
/// initiator and as partner, its internal rate is `1 - γ`, its reservoir
/// rate `γ`, and its total rate 1. Otherwise the partner is drawn from the
/// reservoir and discarded after the collision.
pub fn collide_step(
    ens: &mut ParticleEnsemble,
    k: &AngularKernel,
    res: &MixtureCollision,
    dt: f64,
) -> Result<()> {
    if !(dt > 0.0 && dt <= MAX_COLLISION_DT) {
        return Err(Error::config("dt", format!("{dt} must lie in (0, {MAX_COLLISION_DT}]")));
    }
    res.validate()?;
    let reservoir = res.reservoir();
    let gamma = res.gamma;
    let rate = 0.5 * (1.0 - gamma) + gamma;
    let p = -(-rate * dt).exp_m1();
    let p_internal = 0.5 * (1.0 - gamma) / rate;
    let geo = Geometric::new(p).map_err(|e| Error::domain(format!("collision probability {p}: {e}")))?;
    let n = ens.velocities.len();
    let rng = &mut ens.rng;
    let vel = &mut ens.velocities;

    let mut i = geo.sample(rng) as usize;
    while i < n {
        let branch: f64 = rng.random();
        if branch < p_internal {
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            let s = k.sample_cosine(rng);
            let phi = std::f64::consts::TAU * rng.random::<f64>();
            let (v, w) = (vel[i], vel[j]);
            let sigma = scattering_direction(v, w, s, phi);
            let (a, b) = scatter(v, w, sigma);
            vel[i] = a;
            vel[j] = b;
        } else {
            let w = reservoir.sample(rng);
            let s = k.sample_cosine(rng);
            let phi = std::f64::consts::TAU * rng.random::<f64>();
            let v = vel[i];
            let sigma = scattering_direction(v, w, s, phi);
            vel[i] = scatter(v, w, sigma).0;
        }
        i = i.saturating_add(1).saturating_add(geo.sample(rng) as usize);
    }
    ens.time += dt;
    Ok(())
}

/// Exact Ornstein–Uhlenbeck transition over `dt` for every component.
pub fn ou_step(ens: &mut ParticleEnsemble, eta: f64, temperature: f64, dt: f64) -> Result<()> {
    for (name, x) in [("eta", eta), ("temperature", temperature), ("dt", dt)] {
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::domain(format!("{name} = {x} must be positive")));
        }
    }
    let a = (-eta * dt).exp();
    let sd = (temperature * -(-2.0 * eta * dt).exp_m1()).sqrt();
    for v in &mut ens.velocities {
        for c in v.iter_mut() {
            let z: f64 = ens.rng.sample(StandardNormal);
            *c = a * *c + sd * z;
        }
    }
    ens.time += dt;
    Ok(())
}

/// Initial velocity law: a Maxwellian mixture translated by `shift`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialLaw {
    pub weights: Vec<f64>,
    pub temps: Vec<f64>,
    #[serde(default)]
    pub shift: Vec3,
}

impl InitialLaw {
    pub fn maxwellian(temperature: f64) -> Self {
        Self {
            weights: vec![1.0],
            temps: vec![temperature],
            shift: [0.0; 3],
        }
    }

    fn mixture(&self) -> Mixture {
        Mixture {
            weights: self.weights.clone(),
            temps: self.temps.clone(),
        }
    }
}

impl Default for InitialLaw {
    fn default() -> Self {
        Self::maxwellian(1.0 / 3.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DsmcConfig {
    pub n_particles: usize,
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    pub replicas: usize,
    pub reservoir: ReservoirSpec,
    pub kernel: KernelKind,
    pub initial: InitialLaw,
    pub record_every: f64,
    /// Times at which all particle speeds are stored.
    pub snapshot_times: Vec<f64>,
}

impl Default for DsmcConfig {
    fn default() -> Self {
        Self {
            n_particles: 100_000,
            dt: 0.02,
            t_end: 60.0,
            seed: 0,
            replicas: 16,
            reservoir: ReservoirSpec::default(),
            kernel: KernelKind::Isotropic,
            initial: InitialLaw::default(),
            record_every: 0.5,
            snapshot_times: Vec::new(),
        }
    }
}

impl DsmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 2 {
            return Err(Error::config("n_particles", "at least two particles are required"));
        }
        if !(self.dt > 0.0 && self.dt <= MAX_COLLISION_DT) {
            return Err(Error::config("dt", format!("{} must lie in (0, {MAX_COLLISION_DT}]", self.dt)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::config("t_end", "must be positive"));
        }
        if self.replicas == 0 {
            return Err(Error::config("replicas", "must be at least 1"));
        }
        let ratio = self.record_every / self.dt;
        if !(ratio >= 1.0 - 1e-9 && (ratio - ratio.round()).abs() < 1e-6) {
            return Err(Error::config("record_every", "must be a positive multiple of dt"));
        }
        for (i, &t) in self.snapshot_times.iter().enumerate() {
            if !(0.0..=self.t_end).contains(&t) {
                return Err(Error::config(format!("snapshot_times[{i}]"), "outside [0, t_end]"));
            }
        }
        self.reservoir.validate()?;
        self.initial.mixture().validate()?;
        AngularKernel::new(self.kernel, crate::kernel::DEFAULT_NODES)?;
        Ok(())
    }

    fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedSnapshot {
    pub t: f64,
    pub speeds: Vec<f64>,
}

/// Observables of one replica.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DsmcSeries {
    pub replica: usize,
    pub times: Vec<f64>,
    pub mean_velocity: Vec<Vec3>,
    pub m2: Vec<f64>,
    pub m4: Vec<f64>,
    #[serde(skip)]
    pub snapshots: Vec<SpeedSnapshot>,
}

/// Replica mean and standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    pub fn of(samples: &[f64]) -> Self {
        let (mean, se) = mean_se(samples);
        Self { mean, se }
    }

    /// `|mean - x| ≤ z · se`.
    pub fn agrees_with(&self, x: f64, z: f64) -> bool {
        (self.mean - x).abs() <= z * self.se
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DsmcSummary {
    pub terminal_m2: Estimate,
    pub terminal_m4: Estimate,
    pub target_energy: f64,
    /// Decay rate of the first mean-velocity component, fitted per replica.
    pub fitted_rate_v1: Option<Estimate>,
    /// Decay rate of `|⟨|v|²⟩ - target_energy|`, fitted per replica.
    pub fitted_rate_energy: Option<Estimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DsmcRun {
    pub replicas: Vec<DsmcSeries>,
    pub summary: DsmcSummary,
}

/// Relative fit window: samples below this fraction of the initial
/// magnitude are dominated by sampling noise.
const RELATIVE_FIT_FLOOR: f64 = 0.02;

fn fitted_rate(times: &[f64], y: &[f64]) -> Option<f64> {
    let y0 = y.first()?.abs();
    if y0 == 0.0 {
        return None;
    }
    log_slope_in_window(times, y, RELATIVE_FIT_FLOOR * y0, f64::INFINITY).map(|f| -f.slope)
}

fn rate_estimate(rates: Vec<Option<f64>>) -> Option<Estimate> {
    let rates: Option<Vec<f64>> = rates.into_iter().collect();
    rates.filter(|r| !r.is_empty()).map(|r| Estimate::of(&r))
}

/// Random stream of replica `replica`: the seed selects the key, the
/// replica index the stream.
pub fn replica_rng(seed: u64, replica: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica as u64);
    rng
}

/// Run one replica.
pub fn run_replica(cfg: &DsmcConfig, replica: usize) -> Result<DsmcSeries> {
    let kernel = AngularKernel::new(cfg.kernel, crate::kernel::DEFAULT_NODES)?;
    let mut ens = ParticleEnsemble::sample(cfg.n_particles, &cfg.initial.mixture(), replica_rng(cfg.seed, replica))?;
    ens.shift(cfg.initial.shift);

    let (collision, ou) = match &cfg.reservoir {
        ReservoirSpec::MixtureCollision {
            weights,
            temps,
            gamma,
        } => (
            Some(MixtureCollision {
                weights: weights.clone(),
                temps: temps.clone(),
                gamma: *gamma,
            }),
            None,
        ),
        ReservoirSpec::Ou {
            reservoirs,
            collisions,
        } => (
            collisions.then(MixtureCollision::pairs_only),
            Some(reduce_ou_reservoirs(reservoirs)?),
        ),
    };

    let steps = cfg.steps();
    let record = ((cfg.record_every / cfg.dt).round() as usize).max(1);
    let snap_steps: Vec<usize> = cfg
        .snapshot_times
        .iter()
        .map(|t| (t / cfg.dt).round() as usize)
        .collect();
    let mut series = DsmcSeries {
        replica,
        times: Vec::new(),
        mean_velocity: Vec::new(),
        m2: Vec::new(),
        m4: Vec::new(),
        snapshots: Vec::new(),
    };
    for n in 0..=steps {
        if n % record == 0 || n == steps {
            let (m2, m4) = ens.energy_moments();
            series.times.push(n as f64 * cfg.dt);
            series.mean_velocity.push(ens.mean_velocity());
            series.m2.push(m2);
            series.m4.push(m4);
        }
        for (&s, &t) in snap_steps.iter().zip(&cfg.snapshot_times) {
            if s == n {
                series.snapshots.push(SpeedSnapshot { t, speeds: ens.speeds() });
            }
        }
        if n == steps {
            break;
        }
        if let Some(c) = &collision {
            collide_step(&mut ens, &kernel, c, cfg.dt)?;
        }
        if let Some((eta, t)) = ou {
            ou_step(&mut ens, eta, t, cfg.dt)?;
        }
    }
    Ok(series)
}

/// Run all replicas and aggregate. Replicas are spread over the available
/// threads; results do not depend on the thread count.
pub fn run_dsmc(cfg: &DsmcConfig) -> Result<DsmcRun> {
    cfg.validate()?;
    let threads = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(cfg.replicas);
    let mut slots: Vec<Option<Result<DsmcSeries>>> = (0..cfg.replicas).map(|_| None).collect();
    if threads <= 1 {
        for (r, slot) in slots.iter_mut().enumerate() {
            *slot = Some(run_replica(cfg, r));
        }
    } else {
        std::thread::scope(|scope| {
            let chunk = cfg.replicas.div_ceil(threads);
            for (c, part) in slots.chunks_mut(chunk).enumerate() {
                scope.spawn(move || {
                    for (i, slot) in part.iter_mut().enumerate() {
                        *slot = Some(run_replica(cfg, c * chunk + i));
                    }
                });
            }
        });
    }
    let replicas = slots
        .into_iter()
        .map(|s| s.expect("every replica slot is filled"))
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(&replicas, cfg.reservoir.target_energy()?);
    Ok(DsmcRun { replicas, summary })
}

pub fn summarize(replicas: &[DsmcSeries], target_energy: f64) -> DsmcSummary {
    let last = |f: fn(&DsmcSeries) -> &[f64]| -> Vec<f64> {
        replicas.iter().filter_map(|s| f(s).last().copied()).collect()
    };
    let v1_rates = replicas
        .iter()
        .map(|s| {
            let v1: Vec<f64> = s.mean_velocity.iter().map(|v| v[0]).collect();
            fitted_rate(&s.times, &v1)
        })
        .collect();
    let energy_rates = replicas
        .iter()
        .map(|s| {
            let gap: Vec<f64> = s.m2.iter().map(|m| m - target_energy).collect();
            fitted_rate(&s.times, &gap)
        })
        .collect();
    DsmcSummary {
        terminal_m2: Estimate::of(&last(|s| &s.m2)),
        terminal_m4: Estimate::of(&last(|s| &s.m4)),
        target_energy,
        fitted_rate_v1: rate_estimate(v1_rates),
        fitted_rate_energy: rate_estimate(energy_rates),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::make_kernel;
    use crate::metrics::{radial_w2, SpeedLaw};

    fn iso() -> AngularKernel {
        make_kernel(KernelKind::Isotropic, 64).unwrap()
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn head_on_collision() {
        let (a, b) = post_collision([1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0]).unwrap();
        assert_eq!(a, [0.0, 1.0, 0.0]);
        assert_eq!(b, [0.0, -1.0, 0.0]);
    }

    #[test]
    fn grazing_collision_is_identity() {
        let v = [0.3, -1.2, 2.0];
        let w = [1.0, 0.5, -0.4];
        let d = [v[0] - w[0], v[1] - w[1], v[2] - w[2]];
        let g = norm_sq(d).sqrt();
        let (a, b) = post_collision(v, w, [d[0] / g, d[1] / g, d[2] / g]).unwrap();
        for c in 0..3 {
            assert!((a[c] - v[c]).abs() < 1e-14);
            assert!((b[c] - w[c]).abs() < 1e-14);
        }
    }

    #[test]
    fn non_unit_sigma_is_rejected() {
        assert!(matches!(
            post_collision([0.0; 3], [1.0, 0.0, 0.0], [0.0, 0.0, 1.1]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn conservation_for_random_collisions() {
        let mut r = rng(7);
        let k = iso();
        for _ in 0..10_000 {
            let v = gaussian(&mut r, 2.0);
            let w = gaussian(&mut r, 0.5);
            let sigma = scattering_direction(v, w, k.sample_cosine(&mut r), r.random::<f64>() * 6.28);
            let (a, b) = post_collision(v, w, sigma).unwrap();
            for c in 0..3 {
                assert!((a[c] + b[c] - v[c] - w[c]).abs() < 1e-13);
            }
            assert!((norm_sq(a) + norm_sq(b) - norm_sq(v) - norm_sq(w)).abs() < 1e-12);
        }
    }

    #[test]
    fn scattering_direction_has_requested_cosine() {
        let mut r = rng(3);
        for _ in 0..1000 {
            let v = gaussian(&mut r, 1.0);
            let w = gaussian(&mut r, 1.0);
            let s: f64 = 2.0 * r.random::<f64>() - 1.0;
            let sigma = scattering_direction(v, w, s, r.random::<f64>() * 6.28);
            let d = [v[0] - w[0], v[1] - w[1], v[2] - w[2]];
            assert!((norm_sq(sigma) - 1.0).abs() < 1e-14);
            assert!((dot(sigma, d) / norm_sq(d).sqrt() - s).abs() < 1e-12);
        }
    }

    #[test]
    fn reduce_examples() {
        let one = |eta, temperature| OuReservoir { eta, temperature };
        assert_eq!(reduce_ou_reservoirs(&[one(1.0, 0.5)]).unwrap(), (1.0, 0.5));
        let (eta, t) = reduce_ou_reservoirs(&[one(1.0, 0.2), one(1.0, 0.6)]).unwrap();
        assert_eq!(eta, 2.0);
        assert!((t - 0.4).abs() < 1e-15);
        assert_eq!(reduce_ou_reservoirs(&[one(2.0, 0.7), one(3.0, 0.7)]).unwrap(), (5.0, 0.7));
        assert!(matches!(reduce_ou_reservoirs(&[]), Err(Error::Config { .. })));
        assert!(reduce_ou_reservoirs(&[one(-1.0, 0.5)]).is_err());
    }

    #[test]
    fn pair_collisions_conserve_momentum_and_energy() {
        let mut ens = ParticleEnsemble::sample(2000, &Mixture::maxwellian(0.7), rng(1)).unwrap();
        ens.shift([0.5, 0.0, -0.2]);
        let p0 = ens.mean_velocity();
        let e0 = ens.energy_moments().0;
        let k = make_kernel(KernelKind::Linear { a: 0.5 }, 64).unwrap();
        for _ in 0..200 {
            collide_step(&mut ens, &k, &MixtureCollision::pairs_only(), 0.05).unwrap();
        }
        let p1 = ens.mean_velocity();
        for c in 0..3 {
            assert!((p1[c] - p0[c]).abs() < 1e-12);
        }
        assert!((ens.energy_moments().0 - e0).abs() < 1e-12 * e0);
        assert!((ens.time() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn collide_step_rejects_large_dt() {
        let mut ens = ParticleEnsemble::sample(10, &Mixture::maxwellian(1.0), rng(1)).unwrap();
        assert!(matches!(
            collide_step(&mut ens, &iso(), &MixtureCollision::pairs_only(), 0.1),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let cfg = DsmcConfig {
            n_particles: 500,
            t_end: 2.0,
            replicas: 2,
            seed: 42,
            ..DsmcConfig::default()
        };
        let a = run_dsmc(&cfg).unwrap();
        let b = run_dsmc(&cfg).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.replicas[0].m2, a.replicas[1].m2);
    }

    #[test]
    fn pure_reservoir_limit_keeps_equilibrium() {
        let res = MixtureCollision {
            weights: vec![1.0],
            temps: vec![1.0 / 3.0],
            gamma: 1.0,
        };
        let k = iso();
        let mut m2 = Vec::new();
        let mut m4 = Vec::new();
        for r in 0..16 {
            let mut ens = ParticleEnsemble::sample(5000, &Mixture::maxwellian(1.0 / 3.0), replica_rng(9, r)).unwrap();
            for _ in 0..500 {
                collide_step(&mut ens, &k, &res, 0.02).unwrap();
            }
            let (a, b) = ens.energy_moments();
            m2.push(a);
            m4.push(b);
        }
        // Gaussian moments: ⟨|v|²⟩ = 3T, ⟨|v|⁴⟩ = 15T².
        assert!(Estimate::of(&m2).agrees_with(1.0, 3.0));
        assert!(Estimate::of(&m4).agrees_with(15.0 / 9.0, 3.0));
    }

    #[test]
    fn ou_mean_contracts_exactly() {
        let mut samples = Vec::new();
        for r in 0..16 {
            let mut ens = ParticleEnsemble::sample(4000, &Mixture::maxwellian(0.5), replica_rng(5, r)).unwrap();
            ens.shift([1.0, 0.0, 0.0]);
            let before = ens.mean_velocity()[0];
            ou_step(&mut ens, 1.5, 0.4, 0.3).unwrap();
            samples.push(ens.mean_velocity()[0] - before * (-1.5f64 * 0.3).exp());
        }
        assert!(Estimate::of(&samples).agrees_with(0.0, 3.0));
    }

    #[test]
    fn ou_energy_gap_decays_at_twice_eta() {
        let (eta, t) = (1.0, 0.5);
        let mut gaps = Vec::new();
        for r in 0..16 {
            let mut ens = ParticleEnsemble::sample(4000, &Mixture::maxwellian(0.1), replica_rng(6, r)).unwrap();
            let g0 = 3.0 * t - ens.energy_moments().0;
            for _ in 0..10 {
                ou_step(&mut ens, eta, t, 0.05).unwrap();
            }
            let g1 = 3.0 * t - ens.energy_moments().0;
            gaps.push(g1 - (-2.0 * eta * 0.5f64).exp() * g0);
        }
        assert!(Estimate::of(&gaps).agrees_with(0.0, 3.0));
    }

    #[test]
    fn ou_half_steps_match_a_full_step() {
        let run = |halves: bool, r: usize| {
            let mut ens = ParticleEnsemble::sample(4000, &Mixture::maxwellian(0.1), replica_rng(8, r)).unwrap();
            ens.shift([0.5, 0.0, 0.0]);
            if halves {
                ou_step(&mut ens, 2.0, 0.3, 0.1).unwrap();
                ou_step(&mut ens, 2.0, 0.3, 0.1).unwrap();
            } else {
                ou_step(&mut ens, 2.0, 0.3, 0.2).unwrap();
            }
            let (m2, _) = ens.energy_moments();
            (ens.mean_velocity()[0], m2)
        };
        let (mut d1, mut d2) = (Vec::new(), Vec::new());
        for r in 0..16 {
            let (a1, a2) = run(true, r);
            let (b1, b2) = run(false, r + 100);
            d1.push(a1 - b1);
            d2.push(a2 - b2);
        }
        assert!(Estimate::of(&d1).agrees_with(0.0, 3.0));
        assert!(Estimate::of(&d2).agrees_with(0.0, 3.0));
    }

    /// Standard normal CDF via the Abramowitz–Stegun 7.1.26 erfc fit
    /// (absolute error below 1e-7).
    fn normal_cdf(x: f64) -> f64 {
        let z = x.abs() / std::f64::consts::SQRT_2;
        let t = 1.0 / (1.0 + 0.3275911 * z);
        let poly = t * (0.254829592 + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
        let erfc = poly * (-z * z).exp();
        if x >= 0.0 {
            1.0 - 0.5 * erfc
        } else {
            0.5 * erfc
        }
    }

    #[test]
    fn ou_keeps_its_maxwellian() {
        let t = 0.6;
        let n = 20_000;
        let mut ens = ParticleEnsemble::sample(n, &Mixture::maxwellian(t), rng(11)).unwrap();
        for _ in 0..20 {
            ou_step(&mut ens, 1.0, t, 0.1).unwrap();
        }
        let critical = 1.628 / (n as f64).sqrt();
        for c in 0..3 {
            let mut x: Vec<f64> = ens.velocities().iter().map(|v| v[c]).collect();
            x.sort_by(f64::total_cmp);
            let d = x
                .iter()
                .enumerate()
                .map(|(i, &xi)| {
                    let f = normal_cdf(xi / t.sqrt());
                    (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
                })
                .fold(0.0, f64::max);
            assert!(d < critical, "component {c}: D = {d}");
        }
    }

    #[test]
    fn shifted_start_mean_velocity_decays_at_the_moment_rate() {
        let cfg = DsmcConfig {
            n_particles: 20_000,
            t_end: 10.0,
            replicas: 4,
            seed: 3,
            initial: InitialLaw {
                shift: [1.0, 0.0, 0.0],
                ..InitialLaw::default()
            },
            ..DsmcConfig::default()
        };
        let run = run_dsmc(&cfg).unwrap();
        let rate = run.summary.fitted_rate_v1.unwrap();
        assert!((rate.mean - 0.25).abs() < 0.05 * 0.25, "{rate:?}");
        let energy = run.summary.fitted_rate_energy.unwrap();
        assert!((energy.mean - 0.25).abs() < 0.05 * 0.25, "{energy:?}");
    }

    #[test]
    fn pair_collisions_do_not_expand_w2() {
        // Two ensembles driven by the same random stream.
        let k = iso();
        let mut a = ParticleEnsemble::sample(20_000, &Mixture::maxwellian(0.2), rng(4)).unwrap();
        let mut b = a.clone();
        for v in &mut b.velocities {
            for c in v.iter_mut() {
                *c *= 2.0;
            }
        }
        let w0 = radial_w2(SpeedLaw::Samples(&a.speeds()), SpeedLaw::Samples(&b.speeds())).unwrap();
        for _ in 0..100 {
            collide_step(&mut a, &k, &MixtureCollision::pairs_only(), 0.05).unwrap();
            collide_step(&mut b, &k, &MixtureCollision::pairs_only(), 0.05).unwrap();
        }
        let w1 = radial_w2(SpeedLaw::Samples(&a.speeds()), SpeedLaw::Samples(&b.speeds())).unwrap();
        assert!(w1 <= w0 * 1.02, "{w0} -> {w1}");
    }

    #[test]
    fn config_validation_names_the_key() {
        let bad = DsmcConfig {
            dt: 0.1,
            ..DsmcConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Config { key, .. }) if key == "dt"));
        let bad = DsmcConfig {
            reservoir: ReservoirSpec::MixtureCollision {
                weights: vec![1.0],
                temps: vec![1.0 / 3.0],
                gamma: 1.5,
            },
            ..DsmcConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Config { key, .. }) if key == "reservoir.gamma"));
        let json = r#"{"kind":"ou","reservoirs":[{"eta":1,"temperature":0.2}]}"#;
        let spec: ReservoirSpec = serde_json::from_str(json).unwrap();
        assert!((spec.target_energy().unwrap() - 0.6).abs() < 1e-15);
    }
}
