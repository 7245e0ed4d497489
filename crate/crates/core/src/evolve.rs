//! Time integration of the reservoir-coupled equation in Fourier variables.
//!
//! The loss term is exactly `-φ`, so the exponential-Euler update
//! `φ ← e^{-dt} φ + (1 - e^{-dt}) Φ(φ)` stays a convex combination of
//! characteristic functions for every step size.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{check_gamma, AngularKernel};
use crate::metrics::{gtw_distance, moments, MOMENT_MATCH_TOL};
use crate::spectral::{phi_map, RadialCharFn};
use crate::stats::{log_slope_in_window, LineFit};

pub const MAX_DT: f64 = 0.25;
pub const DEFAULT_DT: f64 = 0.02;
pub const DEFAULT_T_END: f64 = 40.0;
/// Observables outside `[lo, hi]` are left out of the log-slope fit.
pub const FIT_WINDOW: (f64, f64) = (1e-8, 1e-1);

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt <= MAX_DT {
        Ok(())
    } else {
        Err(Error::config("dt", format!("{dt} must lie in (0, {MAX_DT}]")))
    }
}

/// One exponential-Euler step of length `dt`.
pub fn step(
    phi: &RadialCharFn,
    phi_r: &RadialCharFn,
    k: &AngularKernel,
    gamma: f64,
    dt: f64,
) -> Result<RadialCharFn> {
    check_dt(dt)?;
    let next = phi_map(phi, phi_r, k, gamma)?;
    let keep = (-dt).exp();
    RadialCharFn::convex_combination(&[(keep, phi), (1.0 - keep, &next)])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOptions {
    pub dt: f64,
    pub t_end: f64,
    /// Observables are recorded every `record_every` model time units.
    pub record_every: f64,
    /// Keep a copy of `φ` at this spacing, if set.
    pub snapshot_every: Option<f64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            t_end: DEFAULT_T_END,
            record_every: 0.1,
            snapshot_every: None,
        }
    }
}

impl RunOptions {
    fn stride(&self, every: f64, key: &str) -> Result<usize> {
        let n = (every / self.dt).round();
        if !(n >= 1.0 && ((n * self.dt) - every).abs() <= 1e-9 * every.max(1.0)) {
            return Err(Error::config(
                key,
                format!("{every} is not a positive multiple of dt = {}", self.dt),
            ));
        }
        Ok(n as usize)
    }

    fn steps(&self) -> Result<usize> {
        check_dt(self.dt)?;
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::config("t_end", "must be positive"));
        }
        self.stride(self.t_end, "t_end")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `d_GTW(φ(t), φ∞)`. Empty when the initial energy differs from 1 and
    /// the distance is undefined.
    pub gtw_to_ness: Vec<f64>,
    /// `⟨|v|²⟩(t) - 1`.
    pub m2_deviation: Vec<f64>,
    #[serde(skip)]
    pub snapshots: Vec<(f64, RadialCharFn)>,
}

impl Trajectory {
    pub fn tracks_gtw(&self) -> bool {
        !self.gtw_to_ness.is_empty()
    }

    /// Log-slope fit of `gtw_to_ness` over [`FIT_WINDOW`].
    pub fn gtw_fit(&self) -> Option<LineFit> {
        log_slope_in_window(&self.times, &self.gtw_to_ness, FIT_WINDOW.0, FIT_WINDOW.1)
    }

    /// Log-slope fit of `|m2_deviation|` above the lower edge of
    /// [`FIT_WINDOW`]. The energy mode is exactly linear, so there is no
    /// transient to cut.
    pub fn m2_fit(&self) -> Option<LineFit> {
        log_slope_in_window(&self.times, &self.m2_deviation, FIT_WINDOW.0, f64::INFINITY)
    }

    /// `(t, m2_deviation)` pairs, for [`richardson`].
    pub fn m2_series(&self) -> Vec<(f64, f64)> {
        self.times.iter().copied().zip(self.m2_deviation.iter().copied()).collect()
    }

    pub fn gtw_series(&self) -> Vec<(f64, f64)> {
        self.times.iter().copied().zip(self.gtw_to_ness.iter().copied()).collect()
    }

    pub fn summary(&self, k: &AngularKernel, gamma: f64) -> Result<EvolveSummary> {
        Ok(EvolveSummary {
            fitted_rate_gtw: self.gtw_fit().map(|f| -f.slope),
            fitted_rate_m2: self.m2_fit().map(|f| -f.slope),
            theory_lambda1: k.gtw_decay_rate(gamma)?,
            theory_moment_rate: k.moment_decay_rate(gamma)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvolveSummary {
    pub fitted_rate_gtw: Option<f64>,
    pub fitted_rate_m2: Option<f64>,
    pub theory_lambda1: f64,
    pub theory_moment_rate: f64,
}

/// Integrate from `phi0` to `opts.t_end`, recording the energy deviation
/// and, when `phi0` has unit energy, the GTW distance to `phi_inf`.
pub fn run(
    phi0: &RadialCharFn,
    phi_r: &RadialCharFn,
    k: &AngularKernel,
    gamma: f64,
    opts: &RunOptions,
    phi_inf: &RadialCharFn,
) -> Result<Trajectory> {
    check_gamma(gamma)?;
    let steps = opts.steps()?;
    let record = opts.stride(opts.record_every, "record_every")?;
    let snap = opts
        .snapshot_every
        .map(|s| opts.stride(s, "snapshot_every"))
        .transpose()?;
    let track_gtw = (moments(phi0)?.m2 - 1.0).abs() <= MOMENT_MATCH_TOL;

    let mut traj = Trajectory {
        times: Vec::new(),
        gtw_to_ness: Vec::new(),
        m2_deviation: Vec::new(),
        snapshots: Vec::new(),
    };
    let mut phi = phi0.clone();
    for n in 0..=steps {
        let t = n as f64 * opts.dt;
        if n % record == 0 || n == steps {
            traj.times.push(t);
            traj.m2_deviation.push(moments(&phi)?.m2 - 1.0);
            if track_gtw {
                traj.gtw_to_ness.push(gtw_distance(&phi, phi_inf)?);
            }
        }
        if snap.is_some_and(|s| n % s == 0) {
            traj.snapshots.push((t, phi.clone()));
        }
        if n < steps {
            phi = step(&phi, phi_r, k, gamma, opts.dt)?;
        }
    }
    Ok(traj)
}

/// First-order Richardson extrapolation `2 y_fine - y_coarse` on the times
/// the two trajectories share.
pub fn richardson(coarse: &[(f64, f64)], fine: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut j = 0;
    for &(t, yc) in coarse {
        while j < fine.len() && fine[j].0 < t - 1e-9 {
            j += 1;
        }
        if j < fine.len() && (fine[j].0 - t).abs() <= 1e-9 {
            out.push((t, 2.0 * fine[j].1 - yc));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{make_kernel, KernelKind};
    use crate::spectral::{charfn_maxwellian, charfn_mixture, RadialGrid};
    use crate::steady::solve_ness;

    const T1: f64 = 0.2;
    const T2: f64 = 7.0 / 15.0;

    fn iso() -> AngularKernel {
        make_kernel(KernelKind::Isotropic, 64).unwrap()
    }

    fn mixture() -> RadialCharFn {
        charfn_mixture(RadialGrid::default(), &[0.5, 0.5], &[T1, T2]).unwrap()
    }

    #[test]
    fn rejects_bad_dt() {
        let m = charfn_maxwellian(RadialGrid::default(), 1.0 / 3.0).unwrap();
        for dt in [0.0, -0.1, 0.3, f64::NAN] {
            match step(&m, &m, &iso(), 0.5, dt) {
                Err(Error::Config { key, .. }) => assert_eq!(key, "dt"),
                other => panic!("dt = {dt}: {other:?}"),
            }
        }
        assert!(step(&m, &m, &iso(), 0.5, MAX_DT).is_ok());
    }

    #[test]
    fn maxwellian_reservoir_is_stationary() {
        let m = charfn_maxwellian(RadialGrid::default(), 1.0 / 3.0).unwrap();
        let next = step(&m, &m, &iso(), 0.5, 0.02).unwrap();
        assert!(next.sup_distance(&m).unwrap() < 1e-8);
    }

    #[test]
    fn ness_is_stationary_up_to_truncation() {
        let r = mixture();
        let k = iso();
        let ness = solve_ness(&r, &k, 0.5, 1e-12, 500).unwrap().phi_inf;
        let next = step(&ness, &r, &k, 0.5, 0.02).unwrap();
        assert!(next.sup_distance(&ness).unwrap() < 1e-6);
    }

    #[test]
    fn small_step_difference_quotient_tends_to_the_vector_field() {
        let r = mixture();
        let k = iso();
        let m = charfn_maxwellian(RadialGrid::default(), 1.0 / 3.0).unwrap();
        let field: Vec<f64> = phi_map(&m, &r, &k, 0.5)
            .unwrap()
            .values()
            .iter()
            .zip(m.values())
            .map(|(a, b)| a - b)
            .collect();
        let quotient = |dt: f64| -> Vec<f64> {
            let s = step(&m, &r, &k, 0.5, dt).unwrap();
            s.values().iter().zip(m.values()).map(|(a, b)| (a - b) / dt).collect()
        };
        let err = |q: &[f64]| q.iter().zip(&field).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let (q1, q2) = (quotient(0.02), quotient(0.01));
        let extrapolated: Vec<f64> = q1.iter().zip(&q2).map(|(a, b)| 2.0 * b - a).collect();
        let scale = field.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(err(&q2) < err(&q1));
        assert!(err(&q1) < 0.011 * scale);
        assert!(err(&extrapolated) < 1e-4 * scale);
    }

    #[test]
    fn energy_relaxes_exponentially_at_the_moment_rate() {
        let r = mixture();
        let k = iso();
        let hot = charfn_maxwellian(RadialGrid::default(), 0.5).unwrap();
        let rate = k.moment_decay_rate(0.5).unwrap();
        let traj = |dt: f64| {
            let opts = RunOptions {
                dt,
                t_end: 6.0,
                record_every: 0.5,
                snapshot_every: Some(3.0),
            };
            run(&hot, &r, &k, 0.5, &opts, &r).unwrap()
        };
        let coarse = traj(0.02);
        assert!(!coarse.tracks_gtw());
        assert_eq!(coarse.snapshots.len(), 3);
        for (_, s) in &coarse.snapshots {
            assert_eq!(s.values()[0], 1.0);
            assert!(s.values().iter().all(|v| v.abs() <= 1.0 + 1e-12));
        }
        for w in coarse.m2_deviation.windows(2) {
            assert!(w[1].abs() < w[0].abs());
        }
        let fit = coarse.m2_fit().unwrap();
        assert!((-fit.slope - rate).abs() < 0.01 * rate);

        let fine = traj(0.01);
        for (t, y) in richardson(&coarse.m2_series(), &fine.m2_series()) {
            let exact = 0.5 * (-rate * t).exp();
            assert!((y - exact).abs() <= 1e-4 * exact, "t = {t}: {y} vs {exact}");
        }
    }

    #[test]
    fn gtw_decay_beats_the_guaranteed_rate() {
        let r = mixture();
        let k = iso();
        let ness = solve_ness(&r, &k, 0.5, 1e-13, 500).unwrap().phi_inf;
        let opts = RunOptions::default();
        let traj = run(&r, &r, &k, 0.5, &opts, &ness).unwrap();
        let summary = traj.summary(&k, 0.5).unwrap();
        let fit = traj.gtw_fit().unwrap();
        assert!(fit.points > 50);
        assert!(summary.fitted_rate_gtw.unwrap() >= 0.98 * summary.theory_lambda1);
        assert_eq!(summary.theory_lambda1, 0.25);
        for w in traj.gtw_to_ness.windows(2) {
            assert!(w[1] <= w[0] + 10.0 * opts.dt * opts.dt * opts.record_every);
        }
    }

    #[test]
    fn started_at_the_ness_stays_there() {
        let r = mixture();
        let k = iso();
        let ness = solve_ness(&r, &k, 0.5, 1e-12, 500).unwrap().phi_inf;
        let opts = RunOptions {
            t_end: 5.0,
            ..RunOptions::default()
        };
        let traj = run(&ness, &r, &k, 0.5, &opts, &ness).unwrap();
        assert!(traj.gtw_to_ness.iter().all(|&d| d < 10.0 * opts.dt * opts.dt));
    }

    #[test]
    fn terminal_distance_converges_at_first_order() {
        let r = mixture();
        let k = iso();
        let ness = solve_ness(&r, &k, 0.5, 1e-13, 500).unwrap().phi_inf;
        let terminal = |dt: f64| {
            let opts = RunOptions {
                dt,
                t_end: 2.0,
                record_every: 2.0,
                snapshot_every: None,
            };
            let traj = run(&r, &r, &k, 0.5, &opts, &ness).unwrap();
            *traj.gtw_to_ness.last().unwrap()
        };
        let (a, b, c) = (terminal(0.04), terminal(0.02), terminal(0.01));
        let limit = 2.0 * c - b;
        let ratio = (a - limit) / (b - limit);
        assert!((ratio - 2.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn rejects_misaligned_recording() {
        let m = charfn_maxwellian(RadialGrid::default(), 1.0 / 3.0).unwrap();
        let opts = RunOptions {
            dt: 0.02,
            t_end: 1.0,
            record_every: 0.03,
            snapshot_every: None,
        };
        assert!(matches!(
            run(&m, &m, &iso(), 0.5, &opts, &m),
            Err(Error::Config { ref key, .. }) if key == "record_every"
        ));
    }
}
