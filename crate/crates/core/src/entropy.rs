//! Entropy production for a gas coupled to thermalizing reservoirs.
//!
//! Reservoir `α` replaces a particle's velocity by a draw from `M_{T_α}` at
//! rate `η_α`, i.e. `K_α(v, v') = η_α M_α(v)`, which satisfies detailed
//! balance with respect to `M_α`. The evolution is
//! `∂f/∂t = Q(f, f) + Σ_α η_α (M_α - f)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::AngularKernel;
use crate::metrics::{gtw_on_grid, moments};
use crate::quadrature::GaussLegendre;
use crate::spectral::{
    charfn_maxwellian, gain, inverse_transform, maxwellian_density, RadialCharFn, RadialDensity,
    RadialGrid,
};
use crate::steady::{a_priori_bound, DISTANCE_NOISE_FLOOR};

/// Densities below this are replaced by it inside logarithms.
pub const DENSITY_FLOOR: f64 = 1e-300;
/// Gauss–Legendre nodes per axis for the speed–speed integrals.
pub const SPEED_NODES: usize = 256;
/// Speed cut-off in units of `√T_max`.
pub const SPEED_CUTOFF: f64 = 8.0;
pub const MASS_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpReservoir {
    pub eta: f64,
    pub temperature: f64,
}

impl JumpReservoir {
    pub fn new(eta: f64, temperature: f64) -> Result<Self> {
        let r = Self { eta, temperature };
        validate_reservoirs(std::slice::from_ref(&r))?;
        Ok(r)
    }

    pub fn beta(&self) -> f64 {
        1.0 / self.temperature
    }
}

pub fn validate_reservoirs(reservoirs: &[JumpReservoir]) -> Result<()> {
    if reservoirs.is_empty() {
        return Err(Error::config("reservoirs", "at least one reservoir is required"));
    }
    for (i, r) in reservoirs.iter().enumerate() {
        if !(r.eta > 0.0 && r.eta.is_finite()) {
            return Err(Error::config(format!("reservoirs[{i}].eta"), "must be positive"));
        }
        if !(r.temperature > 0.0 && r.temperature.is_finite()) {
            return Err(Error::config(format!("reservoirs[{i}].temperature"), "must be positive"));
        }
    }
    Ok(())
}

/// `η = Σ η_α` and `T̄ = Σ η_α T_α / η`.
pub fn total_coupling(reservoirs: &[JumpReservoir]) -> (f64, f64) {
    let eta: f64 = reservoirs.iter().map(|r| r.eta).sum();
    let t = reservoirs.iter().map(|r| r.eta * r.temperature).sum::<f64>() / eta;
    (eta, t)
}

fn reservoir_source(grid: RadialGrid, reservoirs: &[JumpReservoir]) -> Result<RadialCharFn> {
    let (eta, _) = total_coupling(reservoirs);
    let parts: Vec<RadialCharFn> = reservoirs
        .iter()
        .map(|r| charfn_maxwellian(grid, r.temperature))
        .collect::<Result<_>>()?;
    let weighted: Vec<(f64, &RadialCharFn)> = reservoirs
        .iter()
        .zip(&parts)
        .map(|(r, p)| (r.eta / eta, p))
        .collect();
    RadialCharFn::convex_combination(&weighted)
}

/// Steady-state map `φ ↦ (Q̂⁺(φ, φ) + Σ η_α M̂_α) / (1 + η)`.
pub fn bgk_map(phi: &RadialCharFn, k: &AngularKernel, reservoirs: &[JumpReservoir]) -> Result<RadialCharFn> {
    validate_reservoirs(reservoirs)?;
    let source = reservoir_source(phi.grid(), reservoirs)?;
    bgk_map_with(phi, k, &source, total_coupling(reservoirs).0)
}

fn bgk_map_with(phi: &RadialCharFn, k: &AngularKernel, source: &RadialCharFn, eta: f64) -> Result<RadialCharFn> {
    let g = gain(phi, phi, k)?;
    let w = 1.0 / (1.0 + eta);
    RadialCharFn::convex_combination(&[(w, &g), (1.0 - w, source)])
}

#[derive(Debug, Clone, Serialize)]
pub struct BgkNess {
    #[serde(skip)]
    pub phi: RadialCharFn,
    pub iterations: usize,
    pub history: Vec<f64>,
    pub contraction: f64,
    pub certified_error: f64,
    /// Largest `|⟨|v|²⟩ - 3T̄|` over the iterates.
    pub max_energy_drift: f64,
}

/// Iterate [`bgk_map`] from `M̂_{T̄}` until the a-priori bound with factor
/// `1/(1+η)` is below `tol`.
pub fn bgk_ness(
    k: &AngularKernel,
    reservoirs: &[JumpReservoir],
    grid: RadialGrid,
    tol: f64,
    max_iter: usize,
) -> Result<BgkNess> {
    validate_reservoirs(reservoirs)?;
    if !(tol > 0.0) {
        return Err(Error::domain(format!("tol = {tol} must be positive")));
    }
    let (eta, t_bar) = total_coupling(reservoirs);
    let lambda = 1.0 / (1.0 + eta);
    let source = reservoir_source(grid, reservoirs)?;
    let mut phi = charfn_maxwellian(grid, t_bar)?;
    let mut history: Vec<f64> = Vec::new();
    let mut drift = 0.0f64;
    for n in 1..=max_iter {
        let next = bgk_map_with(&phi, k, &source, eta)?;
        let d = gtw_on_grid(&next, &phi);
        if let Some(&prev) = history.last() {
            if prev > DISTANCE_NOISE_FLOOR && d > DISTANCE_NOISE_FLOOR && d / prev > lambda + 1e-6 {
                return Err(Error::ContractionViolation {
                    iteration: n,
                    ratio: d / prev,
                    lambda,
                });
            }
        }
        history.push(d);
        phi = next;
        drift = drift.max((moments(&phi)?.m2 - 3.0 * t_bar).abs());
        let certified = a_priori_bound(lambda, history[0], n)?;
        if certified <= tol {
            return Ok(BgkNess {
                phi,
                iterations: n,
                history,
                contraction: lambda,
                certified_error: certified,
                max_energy_drift: drift,
            });
        }
    }
    Err(Error::domain(format!(
        "thermalizing steady state not reached in {max_iter} iterations; the map is a contraction, so this is a bug"
    )))
}

/// Exponential-Euler step of `∂φ/∂t = Q̂⁺(φ,φ) + Σ η_α M̂_α - (1+η) φ`.
pub fn thermal_step(
    phi: &RadialCharFn,
    k: &AngularKernel,
    reservoirs: &[JumpReservoir],
    dt: f64,
) -> Result<RadialCharFn> {
    if !(dt > 0.0 && dt <= 0.25) {
        return Err(Error::config("dt", format!("{dt} must lie in (0, 0.25]")));
    }
    let (eta, _) = total_coupling(reservoirs);
    let target = bgk_map(phi, k, reservoirs)?;
    let keep = (-(1.0 + eta) * dt).exp();
    RadialCharFn::convex_combination(&[(keep, phi), (1.0 - keep, &target)])
}

/// `(t, φ(t))` every `record_every` up to `t_end`.
pub fn thermal_trajectory(
    phi0: &RadialCharFn,
    k: &AngularKernel,
    reservoirs: &[JumpReservoir],
    dt: f64,
    t_end: f64,
    record_every: f64,
) -> Result<Vec<(f64, RadialCharFn)>> {
    validate_reservoirs(reservoirs)?;
    let stride = (record_every / dt).round();
    if !(stride >= 1.0 && (stride * dt - record_every).abs() < 1e-9) {
        return Err(Error::config("record_every", "must be a positive multiple of dt"));
    }
    let steps = (t_end / dt).round() as usize;
    let stride = stride as usize;
    let mut out = vec![(0.0, phi0.clone())];
    let mut phi = phi0.clone();
    for n in 1..=steps {
        phi = thermal_step(&phi, k, reservoirs, dt)?;
        if n % stride == 0 {
            out.push((n as f64 * dt, phi.clone()));
        }
    }
    Ok(out)
}

/// Speed grid wide enough for `reservoirs` and for a law of energy `m2`:
/// `v_max = 8 √T_max`.
pub fn speed_cutoff(reservoirs: &[JumpReservoir], m2: f64) -> f64 {
    let t_max = reservoirs
        .iter()
        .map(|r| r.temperature)
        .fold(m2 / 3.0, f64::max);
    SPEED_CUTOFF * t_max.sqrt()
}

fn check_mass(f: &RadialDensity) -> Result<()> {
    let mass = f.mass();
    if (mass - 1.0).abs() > MASS_TOL {
        return Err(Error::domain(format!("density has mass {mass}, expected 1")));
    }
    Ok(())
}

/// `S = -4π ∫ f log f v² dv`.
pub fn boltzmann_entropy(f: &RadialDensity) -> Result<f64> {
    check_mass(f)?;
    Ok(-f.integrate_density(|fv| if fv < DENSITY_FLOOR { 0.0 } else { fv * fv.ln() }))
}

/// Relative entropy `∫ f log(f / M_T)`.
pub fn relative_entropy(f: &RadialDensity, temperature: f64) -> Result<f64> {
    check_mass(f)?;
    let log_norm = -1.5 * (2.0 * std::f64::consts::PI * temperature).ln();
    let cross = log_norm - 0.5 * f.second_moment() / temperature;
    Ok(-boltzmann_entropy(f)? - cross)
}

struct SpeedQuadrature {
    speeds: Vec<f64>,
    /// `4π v² w`.
    weights: Vec<f64>,
}

impl SpeedQuadrature {
    fn new(v_max: f64) -> Self {
        let (speeds, w) = GaussLegendre::new(SPEED_NODES).mapped(0.0, v_max);
        let weights = speeds
            .iter()
            .zip(&w)
            .map(|(v, w)| 4.0 * std::f64::consts::PI * v * v * w)
            .collect();
        Self { speeds, weights }
    }
}

fn sigma_with_order(f: &RadialDensity, res: &JumpReservoir, swapped: bool) -> f64 {
    let q = SpeedQuadrature::new(speed_cutoff(std::slice::from_ref(res), f.second_moment()));
    let fv = f.values_at(&q.speeds);
    let m: Vec<f64> = q.speeds.iter().map(|&v| maxwellian_density(res.temperature, v)).collect();
    let log_nu: Vec<f64> = fv
        .iter()
        .zip(&m)
        .map(|(&a, &b)| a.max(DENSITY_FLOOR).ln() - b.ln())
        .collect();
    let n = q.speeds.len();
    let mut total = 0.0;
    for a in 0..n {
        let mut row = 0.0;
        for b in 0..n {
            let (i, j) = if swapped { (b, a) } else { (a, b) };
            // M_i M_j (ν_i - ν_j) = f_i M_j - M_i f_j
            row += q.weights[i] * q.weights[j] * (fv[i] * m[j] - m[i] * fv[j]) * (log_nu[i] - log_nu[j]);
        }
        total += row;
    }
    0.5 * res.eta * total
}

/// `σ_α = ½ η_α ∫∫ M_α(v) M_α(v') [ν(v) - ν(v')] log(ν(v)/ν(v')) dv dv'`
/// with `ν = f / M_α`, by tensor Gauss–Legendre quadrature.
pub fn sigma_alpha(f: &RadialDensity, res: &JumpReservoir) -> f64 {
    sigma_with_order(f, res, false)
}

/// `J_α = ½ η_α (⟨|v|²⟩ - 3 T_α)`, energy flux into reservoir `α`.
pub fn flux_alpha(m2: f64, res: &JumpReservoir) -> f64 {
    0.5 * res.eta * (m2 - 3.0 * res.temperature)
}

/// `J_α = ½ ∫∫ K_α(v, v') f(v') (|v'|² - |v|²) dv dv'` by quadrature.
pub fn flux_alpha_quadrature(f: &RadialDensity, res: &JumpReservoir) -> f64 {
    let q = SpeedQuadrature::new(speed_cutoff(std::slice::from_ref(res), f.second_moment()));
    let fv = f.values_at(&q.speeds);
    let mut total = 0.0;
    for (i, &v) in q.speeds.iter().enumerate() {
        let kv = res.eta * maxwellian_density(res.temperature, v);
        let mut row = 0.0;
        for (j, &w) in q.speeds.iter().enumerate() {
            row += q.weights[j] * fv[j] * (w * w - v * v);
        }
        total += q.weights[i] * kv * row;
    }
    0.5 * total
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyLedger {
    /// `S` of the current snapshot.
    pub s: f64,
    pub s_dot: f64,
    pub sigma_alpha: Vec<f64>,
    pub j_alpha: Vec<f64>,
    /// `σ_R = Σ β_α J_α`.
    pub sigma_r: f64,
    /// `Ṡ + σ_R`.
    pub sigma_total: f64,
    /// `σ_total - Σ σ_α`, the collision contribution.
    pub sigma_b_residual: f64,
}

/// Entropy balance between two snapshots `dt` apart. `Ṡ` is the difference
/// quotient, which is centred at the midpoint; the other rates are averaged
/// over the two snapshots to sit at the same time.
pub fn ledger(
    f_now: &RadialDensity,
    f_prev: &RadialDensity,
    dt: f64,
    reservoirs: &[JumpReservoir],
) -> Result<EntropyLedger> {
    if !(dt > 0.0) {
        return Err(Error::domain(format!("dt = {dt} must be positive")));
    }
    validate_reservoirs(reservoirs)?;
    let s = boltzmann_entropy(f_now)?;
    let s_dot = (s - boltzmann_entropy(f_prev)?) / dt;
    let (m_now, m_prev) = (f_now.second_moment(), f_prev.second_moment());
    let sigma_alpha: Vec<f64> = reservoirs
        .iter()
        .map(|r| 0.5 * (sigma_alpha(f_now, r) + sigma_alpha(f_prev, r)))
        .collect();
    let j_alpha: Vec<f64> = reservoirs
        .iter()
        .map(|r| 0.5 * (flux_alpha(m_now, r) + flux_alpha(m_prev, r)))
        .collect();
    let sigma_r: f64 = reservoirs.iter().zip(&j_alpha).map(|(r, j)| r.beta() * j).sum();
    let sigma_total = s_dot + sigma_r;
    let sigma_b_residual = sigma_total - sigma_alpha.iter().sum::<f64>();
    Ok(EntropyLedger {
        s,
        s_dot,
        sigma_alpha,
        j_alpha,
        sigma_r,
        sigma_total,
        sigma_b_residual,
    })
}

/// Density grid used by the ledger: `points` speeds up to
/// [`speed_cutoff`] for the largest energy met along the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub v_max: f64,
    pub points: usize,
}

impl DensityGrid {
    pub fn for_run(reservoirs: &[JumpReservoir], max_energy: f64, points: usize) -> Self {
        Self {
            v_max: speed_cutoff(reservoirs, max_energy),
            points,
        }
    }

    pub fn density(&self, phi: &RadialCharFn) -> Result<RadialDensity> {
        inverse_transform(phi, self.v_max, self.points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LedgerRow {
    /// Midpoint of the two snapshots.
    pub t: f64,
    pub m2: f64,
    #[serde(flatten)]
    pub ledger: EntropyLedger,
}

/// Ledger between consecutive recorded snapshots.
pub fn ledger_series(
    snapshots: &[(f64, RadialCharFn)],
    reservoirs: &[JumpReservoir],
    grid: DensityGrid,
) -> Result<Vec<LedgerRow>> {
    let densities: Vec<(f64, RadialDensity)> = snapshots
        .iter()
        .map(|(t, phi)| Ok((*t, grid.density(phi)?)))
        .collect::<Result<_>>()?;
    densities
        .windows(2)
        .map(|w| {
            let (t0, f0) = &w[0];
            let (t1, f1) = &w[1];
            Ok(LedgerRow {
                t: 0.5 * (t0 + t1),
                m2: f1.second_moment(),
                ledger: ledger(f1, f0, t1 - t0, reservoirs)?,
            })
        })
        .collect()
}
