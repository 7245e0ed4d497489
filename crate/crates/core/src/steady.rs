//! Steady state of the reservoir-coupled equation by contractive
//! fixed-point iteration `f_n = Φ(f_{n-1})`, stopped by the a-priori bound
//! `d(f_n, f∞) ≤ λⁿ/(1-λ) · d(Φ(f₀), f₀)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{check_gamma, AngularKernel};
use crate::metrics::{gtw_distance, gtw_on_grid, moments, MomentSummary};
use crate::spectral::{ensure_same_grid, phi_map, RadialCharFn};

/// The reservoir must carry unit energy to this accuracy.
pub const RESERVOIR_ENERGY_TOL: f64 = 1e-6;
/// Observed successive-distance ratios may exceed λ by this much before
/// the run is declared broken.
pub const RATIO_VIOLATION_TOL: f64 = 1e-4;

/// Successive-distance ratios are only checked above this level, where
/// rounding no longer dominates.
pub const DISTANCE_NOISE_FLOOR: f64 = 100.0 * f64::EPSILON;

#[derive(Debug, Clone, Serialize)]
pub struct FixedPointReport {
    #[serde(skip)]
    pub phi_inf: RadialCharFn,
    pub iterations: usize,
    /// `d_n = d_GTW(f_n, f_{n-1})` for `n = 1, 2, …`.
    pub history: Vec<f64>,
    pub lambda_used: f64,
    pub certified_error: f64,
    pub converged: bool,
    /// `d_GTW(Φ(f∞), f∞)` for the returned iterate.
    pub residual: f64,
    pub moments: MomentSummary,
    /// Largest `|⟨|v|²⟩ - 1|` over all iterates.
    pub max_energy_drift: f64,
    #[serde(skip)]
    pub iterates: Vec<RadialCharFn>,
}

/// `λⁿ d₁ / (1 - λ)`.
pub fn a_priori_bound(lambda: f64, d1: f64, n: usize) -> Result<f64> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::domain(format!("lambda = {lambda} must lie in (0, 1)")));
    }
    if !(d1 >= 0.0) {
        return Err(Error::domain(format!("d1 = {d1} must be nonnegative")));
    }
    Ok(lambda.powi(n as i32) * d1 / (1.0 - lambda))
}

/// Fixed-point solver with an optional alternative start and iterate
/// retention.
#[derive(Debug, Clone)]
pub struct NessSolver<'a> {
    phi_r: &'a RadialCharFn,
    kernel: &'a AngularKernel,
    gamma: f64,
    tol: f64,
    max_iter: usize,
    start: Option<RadialCharFn>,
    keep_iterates: bool,
}

impl<'a> NessSolver<'a> {
    pub fn new(phi_r: &'a RadialCharFn, kernel: &'a AngularKernel, gamma: f64) -> Self {
        Self {
            phi_r,
            kernel,
            gamma,
            tol: 1e-8,
            max_iter: 1000,
            start: None,
            keep_iterates: false,
        }
    }

    pub fn tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    /// Start from `phi0` instead of `R`. It must carry the same energy.
    pub fn start(mut self, phi0: RadialCharFn) -> Self {
        self.start = Some(phi0);
        self
    }

    pub fn keep_iterates(mut self, keep: bool) -> Self {
        self.keep_iterates = keep;
        self
    }

    pub fn solve(self) -> Result<FixedPointReport> {
        check_gamma(self.gamma)?;
        if !(self.tol > 0.0) {
            return Err(Error::domain(format!("tol = {} must be positive", self.tol)));
        }
        let energy_r = moments(self.phi_r)?.m2;
        if (energy_r - 1.0).abs() > RESERVOIR_ENERGY_TOL {
            return Err(Error::domain(format!(
                "reservoir energy {energy_r} must be 1 (within {RESERVOIR_ENERGY_TOL:e})"
            )));
        }
        let lambda = self.kernel.contraction_factor(self.gamma)?;
        let mut f = match self.start {
            Some(phi0) => {
                ensure_same_grid(&phi0.grid(), &self.phi_r.grid())?;
                // Rejects a start whose energy differs from the reservoir's.
                gtw_distance(&phi0, self.phi_r)?;
                phi0
            }
            None => self.phi_r.clone(),
        };
        let floor = DISTANCE_NOISE_FLOOR;
        let mut history = Vec::new();
        let mut iterates = Vec::new();
        if self.keep_iterates {
            iterates.push(f.clone());
        }
        let mut certified = f64::INFINITY;
        let mut converged = false;
        let mut max_drift = (moments(&f)?.m2 - 1.0).abs();
        let mut next = phi_map(&f, self.phi_r, self.kernel, self.gamma)?;
        for n in 1..=self.max_iter {
            let d = gtw_on_grid(&next, &f);
            if let Some(&prev) = history.last() {
                if prev > floor && d > floor {
                    let ratio = d / prev;
                    if ratio > lambda + RATIO_VIOLATION_TOL {
                        return Err(Error::ContractionViolation {
                            iteration: n,
                            ratio,
                            lambda,
                        });
                    }
                }
            }
            history.push(d);
            f = next;
            max_drift = max_drift.max((moments(&f)?.m2 - 1.0).abs());
            if self.keep_iterates {
                iterates.push(f.clone());
            }
            certified = a_priori_bound(lambda, history[0], n)?;
            next = phi_map(&f, self.phi_r, self.kernel, self.gamma)?;
            if certified <= self.tol {
                converged = true;
                break;
            }
        }
        let residual = gtw_on_grid(&next, &f);
        let report = FixedPointReport {
            moments: moments(&f)?,
            phi_inf: f,
            iterations: history.len(),
            history,
            lambda_used: lambda,
            certified_error: certified,
            converged,
            residual,
            max_energy_drift: max_drift,
            iterates,
        };
        if converged {
            Ok(report)
        } else {
            Err(Error::NotConverged(Box::new(report)))
        }
    }
}

/// Iterate `Φ` from `R` until the a-priori bound falls below `tol`.
pub fn solve_ness(
    phi_r: &RadialCharFn,
    k: &AngularKernel,
    gamma: f64,
    tol: f64,
    max_iter: usize,
) -> Result<FixedPointReport> {
    NessSolver::new(phi_r, k, gamma)
        .tol(tol)
        .max_iter(max_iter)
        .solve()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{make_kernel, KernelKind};
    use crate::spectral::{charfn_maxwellian, charfn_mixture, RadialGrid};

    const T1: f64 = 0.2;
    const T2: f64 = 7.0 / 15.0;

    fn iso() -> AngularKernel {
        make_kernel(KernelKind::Isotropic, 64).unwrap()
    }

    #[test]
    fn bound_arithmetic() {
        assert!((a_priori_bound(0.75, 0.1, 0).unwrap() - 0.4).abs() < 1e-15);
        let b = a_priori_bound(0.75, 0.1, 8).unwrap();
        assert!((b - 0.4 * 0.75f64.powi(8)).abs() < 1e-15);
        assert!((b - 0.04005).abs() < 1e-5);
        assert!(a_priori_bound(1.0, 0.1, 3).is_err());
        assert!(a_priori_bound(0.5, -0.1, 3).is_err());
    }

    #[test]
    fn maxwellian_reservoir_converges_immediately() {
        let m = charfn_maxwellian(RadialGrid::default(), 1.0 / 3.0).unwrap();
        for gamma in [0.1, 0.5, 0.9] {
            let rep = solve_ness(&m, &iso(), gamma, 1e-8, 50).unwrap();
            assert_eq!(rep.iterations, 1);
            assert!(rep.phi_inf.sup_distance(&m).unwrap() < 1e-8);
            assert!(rep.residual <= 1e-8);
        }
    }

    #[test]
    fn mixture_iteration_count_follows_geometric_prediction() {
        let r = charfn_mixture(RadialGrid::default(), &[0.5, 0.5], &[T1, T2]).unwrap();
        let tol = 1e-10;
        let rep = solve_ness(&r, &iso(), 0.5, tol, 500).unwrap();
        let d1 = rep.history[0];
        let predicted = ((tol * 0.25 / d1).ln() / 0.75f64.ln()).ceil() as usize;
        assert_eq!(rep.iterations, predicted);
        assert!(rep.converged);
        assert!(rep.certified_error <= tol);
        assert!(rep.residual <= tol * (1.0 + rep.lambda_used));
        assert!((rep.moments.m2 - 1.0).abs() < 1e-5);
        assert!(rep.max_energy_drift < 1e-5);
    }

    #[test]
    fn start_independence() {
        let grid = RadialGrid::default();
        let r = charfn_mixture(grid, &[0.5, 0.5], &[T1, T2]).unwrap();
        let k = iso();
        let a = solve_ness(&r, &k, 0.5, 1e-10, 500).unwrap();
        let b = NessSolver::new(&r, &k, 0.5)
            .tol(1e-10)
            .max_iter(500)
            .start(charfn_maxwellian(grid, 1.0 / 3.0).unwrap())
            .solve()
            .unwrap();
        let d = gtw_distance(&a.phi_inf, &b.phi_inf).unwrap();
        assert!(d <= 1e-8, "d = {d}");
    }

    #[test]
    fn rejects_unnormalized_reservoir() {
        let r = charfn_maxwellian(RadialGrid::default(), 0.5).unwrap();
        assert!(matches!(solve_ness(&r, &iso(), 0.5, 1e-8, 10), Err(Error::Domain(_))));
    }

    #[test]
    fn reports_non_convergence_with_best_iterate() {
        let r = charfn_mixture(RadialGrid::default(), &[0.5, 0.5], &[T1, T2]).unwrap();
        match solve_ness(&r, &iso(), 0.5, 1e-12, 3) {
            Err(Error::NotConverged(rep)) => {
                assert_eq!(rep.iterations, 3);
                assert!(!rep.converged);
                assert!(rep.certified_error > 1e-12);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
