//! Radial characteristic functions and the Fourier-space gain operator.
//!
//! For isotropic laws the Bobylev representation of `Q⁺(f, g)` collapses
//! to a one-dimensional integral over the scattering cosine:
//!
//! ```text
//! Q̂⁺(f, g)(r) = ½ ∫₋₁¹ φ_f(r √((1+s)/2)) φ_g(r √((1-s)/2)) b(s) ds
//! ```
//!
//! Both arguments are at most `r`, so evaluating the gain on a grid only
//! ever interpolates inside `[0, r]`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{check_gamma, AngularKernel};
use crate::quadrature::trapezoid;

pub const DEFAULT_GRID_N: usize = 2048;
pub const DEFAULT_R_MAX: f64 = 16.0;
const DECAY_LIMIT: f64 = 1e-10;
const SUP_SLACK: f64 = 1e-9;

/// Uniform Fourier-radius grid `r_i = i r_max / (n - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    n: usize,
    r_max: f64,
}

impl Default for RadialGrid {
    fn default() -> Self {
        Self {
            n: DEFAULT_GRID_N,
            r_max: DEFAULT_R_MAX,
        }
    }
}

impl RadialGrid {
    pub fn new(n: usize, r_max: f64) -> Result<Self> {
        if n < 8 {
            return Err(Error::config("grid.n", format!("{n} nodes is too few (minimum 8)")));
        }
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(Error::config("grid.r_max", format!("{r_max} must be positive")));
        }
        Ok(Self { n, r_max })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn spacing(&self) -> f64 {
        self.r_max / (self.n - 1) as f64
    }

    #[inline]
    pub fn r(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|i| self.r(i))
    }

    /// Same radius, `factor` times as many intervals.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            n: (self.n - 1) * factor + 1,
            r_max: self.r_max,
        }
    }
}

/// Characteristic function `φ(r) = f̂(|ξ|)` of an isotropic, centered law,
/// sampled on a [`RadialGrid`]. Real-valued and even in `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialCharFn {
    grid: RadialGrid,
    values: Vec<f64>,
}

impl RadialCharFn {
    /// Wrap grid values, enforcing `φ(0) = 1`, `|φ| ≤ 1` and finiteness.
    pub fn from_values(grid: RadialGrid, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite characteristic function at node {i}")));
        }
        if (values[0] - 1.0).abs() > SUP_SLACK {
            return Err(Error::domain(format!("phi(0) = {} is not 1", values[0])));
        }
        if let Some(i) = values.iter().position(|v| v.abs() > 1.0 + SUP_SLACK) {
            return Err(Error::domain(format!(
                "|phi| = {} exceeds 1 at node {i}",
                values[i].abs()
            )));
        }
        values[0] = 1.0;
        Ok(Self { grid, values })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(grid: RadialGrid, f: F) -> Result<Self> {
        let values = grid.nodes().map(f).collect();
        Self::from_values(grid, values)
    }

    /// Point mass at the origin, `φ ≡ 1`.
    pub fn delta(grid: RadialGrid) -> Self {
        Self {
            grid,
            values: vec![1.0; grid.len()],
        }
    }

    /// Uniform law on the sphere of radius `radius`: `sin(a r)/(a r)`.
    pub fn shell(grid: RadialGrid, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::domain(format!("shell radius {radius} must be positive")));
        }
        Self::from_fn(grid, |r| sinc(radius * r))
    }

    pub fn grid(&self) -> RadialGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn r_max(&self) -> f64 {
        self.grid.r_max
    }

    /// Pointwise convex combination `Σ c_k φ_k` (coefficients nonnegative,
    /// summing to one).
    pub fn convex_combination(parts: &[(f64, &RadialCharFn)]) -> Result<Self> {
        let grid = parts
            .first()
            .ok_or_else(|| Error::domain("empty combination"))?
            .1
            .grid;
        for (_, p) in parts {
            ensure_same_grid(&grid, &p.grid)?;
        }
        let values = (0..grid.len())
            .map(|i| parts.iter().map(|(c, p)| c * p.values[i]).sum())
            .collect();
        Self::from_values(grid, values)
    }

    /// Largest pointwise difference.
    pub fn sup_distance(&self, other: &Self) -> Result<f64> {
        ensure_same_grid(&self.grid, &other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub(crate) fn hermite(&self) -> Hermite<'_> {
        Hermite::new(&self.values, self.grid.spacing())
    }
}

#[inline]
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

pub(crate) fn ensure_same_grid(a: &RadialGrid, b: &RadialGrid) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::Shape(format!(
            "grid (n={}, r_max={}) vs (n={}, r_max={})",
            a.n, a.r_max, b.n, b.r_max
        )))
    }
}

/// `φ(r) = exp(-T r²/2)`, the transform of `M_T`.
pub fn charfn_maxwellian(grid: RadialGrid, temperature: f64) -> Result<RadialCharFn> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::domain(format!("temperature {temperature} must be positive")));
    }
    RadialCharFn::from_fn(grid, |r| (-0.5 * temperature * r * r).exp())
}

/// `φ_R(r) = Σ w_i exp(-T_i r²/2)`.
pub fn charfn_mixture(grid: RadialGrid, weights: &[f64], temps: &[f64]) -> Result<RadialCharFn> {
    validate_mixture(weights, temps)?;
    RadialCharFn::from_fn(grid, |r| {
        weights
            .iter()
            .zip(temps)
            .map(|(w, t)| w * (-0.5 * t * r * r).exp())
            .sum()
    })
}

pub(crate) fn validate_mixture(weights: &[f64], temps: &[f64]) -> Result<()> {
    if weights.is_empty() || weights.len() != temps.len() {
        return Err(Error::config(
            "reservoir.weights",
            format!("{} weights for {} temperatures", weights.len(), temps.len()),
        ));
    }
    if weights.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::config("reservoir.weights", "weights must be positive"));
    }
    if temps.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(Error::config("reservoir.temps", "temperatures must be positive"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::config(
            "reservoir.weights",
            format!("weights sum to {total}, not 1"),
        ));
    }
    Ok(())
}

/// Piecewise cubic Hermite interpolant of an even function, taken in the
/// variable `u = r²` so that smooth isotropic profiles are smooth in the
/// interpolation variable and the first cell is only `h²` wide. Slopes come
/// from fourth-order finite differences in `r`, reflected through `r = 0`.
pub(crate) struct Hermite<'a> {
    values: &'a [f64],
    // dφ/du at the nodes
    slopes: Vec<f64>,
    h: f64,
    inv_h: f64,
}

impl<'a> Hermite<'a> {
    fn new(values: &'a [f64], h: f64) -> Self {
        let n = values.len();
        let f = |i: isize| -> f64 { values[i.unsigned_abs()] };
        let mut slopes = vec![0.0; n];
        let c = 1.0 / (12.0 * h);
        // φ''(0)/2 = dφ/du at the origin.
        slopes[0] = 0.5 * (-2.0 * f(2) + 32.0 * f(1) - 30.0 * f(0)) / (12.0 * h * h);
        let dr = |i: usize| -> f64 {
            let v = values;
            if i + 2 < n {
                let i = i as isize;
                c * (f(i - 2) - 8.0 * f(i - 1) + 8.0 * f(i + 1) - f(i + 2))
            } else if i + 2 == n {
                c * (3.0 * v[i + 1] + 10.0 * v[i] - 18.0 * v[i - 1] + 6.0 * v[i - 2] - v[i - 3])
            } else {
                c * (25.0 * v[i] - 48.0 * v[i - 1] + 36.0 * v[i - 2] - 16.0 * v[i - 3]
                    + 3.0 * v[i - 4])
            }
        };
        for (i, slope) in slopes.iter_mut().enumerate().skip(1) {
            *slope = dr(i) / (2.0 * i as f64 * h);
        }
        Self {
            values,
            slopes,
            h,
            inv_h: 1.0 / h,
        }
    }

    /// Caller guarantees `0 ≤ r ≤ r_max` up to rounding.
    #[inline]
    pub(crate) fn eval(&self, r: f64) -> f64 {
        let last = self.values.len() - 1;
        let mut j = (r * self.inv_h) as usize;
        if j >= last {
            j = last - 1;
        }
        let jf = j as f64;
        let h2 = self.h * self.h;
        let du = h2 * (2.0 * jf + 1.0);
        let t = ((r * r - jf * jf * h2) / du).clamp(0.0, 1.0);
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.values[j]
            + h10 * du * self.slopes[j]
            + h01 * self.values[j + 1]
            + h11 * du * self.slopes[j + 1]
    }
}

/// Interpolated value `φ(r)` for `0 ≤ r ≤ r_max`; exact at grid nodes.
pub fn interpolate(phi: &RadialCharFn, r: f64) -> Result<f64> {
    let r_max = phi.r_max();
    if !(0.0..=r_max).contains(&r) {
        return Err(Error::Range { r, r_max });
    }
    if r == 0.0 {
        return Ok(1.0);
    }
    Ok(phi.hermite().eval(r))
}

/// Angular data reused across grid nodes: `(½ w_q b(s_q), √((1+s_q)/2), √((1-s_q)/2))`.
fn angular_table(k: &AngularKernel) -> Vec<(f64, f64, f64)> {
    k.nodes()
        .iter()
        .zip(k.weights())
        .zip(k.b_at_nodes())
        .map(|((&s, &w), &b)| (0.5 * w * b, (0.5 * (1.0 + s)).sqrt(), (0.5 * (1.0 - s)).sqrt()))
        .collect()
}

/// Evaluates `½∫ φ_f(r a(s)) Σ_k c_k φ_k(r c(s)) b(s) ds` at every node.
/// Quadrature order is fixed per node.
fn gain_combination(
    f: &RadialCharFn,
    partners: &[(f64, &RadialCharFn)],
    k: &AngularKernel,
) -> Result<RadialCharFn> {
    for (_, g) in partners {
        ensure_same_grid(&f.grid, &g.grid)?;
    }
    let grid = f.grid;
    let table = angular_table(k);
    let hf = f.hermite();
    let hg: Vec<(f64, Hermite<'_>)> = partners.iter().map(|(c, g)| (*c, g.hermite())).collect();
    let mut values = Vec::with_capacity(grid.len());
    values.push(1.0);
    for i in 1..grid.len() {
        let r = grid.r(i);
        let mut acc = 0.0;
        for &(wb, plus, minus) in &table {
            let rp = r * plus;
            let rm = r * minus;
            let partner: f64 = hg.iter().map(|(c, h)| c * h.eval(rm)).sum();
            acc += wb * hf.eval(rp) * partner;
        }
        values.push(acc);
    }
    RadialCharFn::from_values(grid, values)
}

/// Fourier transform of the gain term `Q⁺(f, g)`.
pub fn gain(phi_f: &RadialCharFn, phi_g: &RadialCharFn, k: &AngularKernel) -> Result<RadialCharFn> {
    gain_combination(phi_f, &[(1.0, phi_g)], k)
}

/// `Φ(f) = (1-γ) Q⁺(f, f) + γ Q⁺(f, R)` in Fourier variables.
///
/// Both gain terms share the `φ_f(r √((1+s)/2))` factor, so they are
/// evaluated in a single pass.
pub fn phi_map(
    phi_f: &RadialCharFn,
    phi_r: &RadialCharFn,
    k: &AngularKernel,
    gamma: f64,
) -> Result<RadialCharFn> {
    check_gamma(gamma)?;
    gain_combination(phi_f, &[(1.0 - gamma, phi_f), (gamma, phi_r)], k)
}

/// Isotropic velocity density `f(|v|)` on the uniform speed grid
/// `v_j = j v_max / (M - 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialDensity {
    v_max: f64,
    values: Vec<f64>,
}

impl RadialDensity {
    pub fn new(v_max: f64, values: Vec<f64>) -> Result<Self> {
        if !(v_max > 0.0) || values.len() < 8 {
            return Err(Error::domain("speed grid needs v_max > 0 and at least 8 points"));
        }
        if values.iter().any(|v| !v.is_finite() || *v < -1e-10) {
            return Err(Error::domain("density values must be finite and nonnegative"));
        }
        Ok(Self { v_max, values })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(v_max: f64, points: usize, f: F) -> Result<Self> {
        let h = v_max / (points.max(2) - 1) as f64;
        Self::new(v_max, (0..points).map(|j| f(j as f64 * h)).collect())
    }

    /// Closed-form `M_T(v) = (2πT)^{-3/2} exp(-v²/2T)`.
    pub fn maxwellian(temperature: f64, v_max: f64, points: usize) -> Result<Self> {
        if !(temperature > 0.0) {
            return Err(Error::domain(format!("temperature {temperature} must be positive")));
        }
        Self::from_fn(v_max, points, |v| maxwellian_density(temperature, v))
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.v_max / (self.values.len() - 1) as f64
    }

    pub fn speed(&self, j: usize) -> f64 {
        j as f64 * self.spacing()
    }

    pub fn speeds(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(|j| self.speed(j))
    }

    /// `4π ∫ g(v) f(v) v² dv` by the trapezoid rule.
    pub fn integrate<G: Fn(f64) -> f64>(&self, g: G) -> f64 {
        let integrand: Vec<f64> = self
            .speeds()
            .zip(&self.values)
            .map(|(v, f)| g(v) * f * v * v)
            .collect();
        4.0 * PI * trapezoid(&integrand, self.spacing())
    }

    /// `4π ∫ g(f(v)) v² dv`, for integrands that depend on the density
    /// value rather than on the speed.
    pub fn integrate_density<G: Fn(f64) -> f64>(&self, g: G) -> f64 {
        let integrand: Vec<f64> = self
            .speeds()
            .zip(&self.values)
            .map(|(v, &f)| g(f) * v * v)
            .collect();
        4.0 * PI * trapezoid(&integrand, self.spacing())
    }

    pub fn mass(&self) -> f64 {
        self.integrate(|_| 1.0)
    }

    /// `⟨|v|²⟩`.
    pub fn second_moment(&self) -> f64 {
        self.integrate(|v| v * v)
    }

    /// Interpolated density at speed `v`; zero beyond `v_max`.
    pub fn value_at(&self, v: f64) -> f64 {
        if v > self.v_max {
            return 0.0;
        }
        Hermite::new(&self.values, self.spacing()).eval(v.abs())
    }

    /// Interpolated densities at many speeds, sharing one slope table.
    pub fn values_at(&self, speeds: &[f64]) -> Vec<f64> {
        let h = Hermite::new(&self.values, self.spacing());
        speeds
            .iter()
            .map(|&v| if v > self.v_max { 0.0 } else { h.eval(v.abs()).max(0.0) })
            .collect()
    }
}

pub fn maxwellian_density(temperature: f64, v: f64) -> f64 {
    (2.0 * PI * temperature).powf(-1.5) * (-0.5 * v * v / temperature).exp()
}

/// Radial Fourier inversion `f(v) = (2π² v)⁻¹ ∫₀^∞ r φ(r) sin(r v) dr`
/// onto `points` speeds in `[0, v_max]`.
///
/// The integrand is even in `r`, so the trapezoid rule over the full grid
/// is spectrally accurate once `φ` has decayed at `r_max`. Negative ripple
/// is clipped and the result renormalized to unit mass.
pub fn inverse_transform(phi: &RadialCharFn, v_max: f64, points: usize) -> Result<RadialDensity> {
    if !(v_max > 0.0) || points < 8 {
        return Err(Error::domain("speed grid needs v_max > 0 and at least 8 points"));
    }
    let n = phi.grid.len();
    let tail_start = n - (n / 20).max(1);
    let tail = phi.values[tail_start..]
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    if tail > DECAY_LIMIT {
        return Err(Error::Truncation {
            tail,
            limit: DECAY_LIMIT,
        });
    }
    let h = phi.grid.spacing();
    let dv = v_max / (points - 1) as f64;
    let rs: Vec<f64> = phi.grid.nodes().collect();
    let mut scratch = vec![0.0; n];
    let mut values = Vec::with_capacity(points);
    for j in 0..points {
        let v = j as f64 * dv;
        let f = if j == 0 {
            for ((s, r), p) in scratch.iter_mut().zip(&rs).zip(&phi.values) {
                *s = r * r * p;
            }
            trapezoid(&scratch, h) / (2.0 * PI * PI)
        } else {
            for ((s, r), p) in scratch.iter_mut().zip(&rs).zip(&phi.values) {
                *s = r * p * (r * v).sin();
            }
            trapezoid(&scratch, h) / (2.0 * PI * PI * v)
        };
        values.push(f.max(0.0));
    }
    let density = RadialDensity { v_max, values };
    let mass = density.mass();
    if (mass - 1.0).abs() > 1e-4 {
        return Err(Error::domain(format!(
            "speed grid up to {v_max} captures mass {mass}; extend v_max"
        )));
    }
    let values = density.values.iter().map(|f| f / mass).collect();
    Ok(RadialDensity { v_max, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{make_kernel, KernelKind};

    const T1: f64 = 0.2;
    const T2: f64 = 7.0 / 15.0;

    fn grid() -> RadialGrid {
        RadialGrid::default()
    }

    fn iso() -> AngularKernel {
        make_kernel(KernelKind::Isotropic, 64).unwrap()
    }

    fn max_err<F: Fn(f64) -> f64>(phi: &RadialCharFn, f: F) -> f64 {
        phi.grid()
            .nodes()
            .zip(phi.values())
            .map(|(r, v)| (v - f(r)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn maxwellian_values() {
        let phi = charfn_maxwellian(grid(), 1.0 / 3.0).unwrap();
        assert_eq!(phi.values()[0], 1.0);
        let g = RadialGrid::new(3, 2.0 * 2f64.sqrt()).unwrap_err();
        assert!(matches!(g, Error::Config { .. }));
        let g = RadialGrid::new(9, 8.0 * 2f64.sqrt()).unwrap();
        let phi = charfn_maxwellian(g, 1.0).unwrap();
        assert!((phi.values()[1] - (-1.0f64).exp()).abs() < 1e-15);
        assert!(charfn_maxwellian(grid(), 0.0).is_err());
    }

    #[test]
    fn mixture_examples() {
        let m = charfn_maxwellian(grid(), 0.3).unwrap();
        let x = charfn_mixture(grid(), &[1.0], &[0.3]).unwrap();
        assert_eq!(m, x);
        let d = charfn_mixture(grid(), &[0.5, 0.5], &[0.2, 0.2]).unwrap();
        let m = charfn_maxwellian(grid(), 0.2).unwrap();
        assert!(d.sup_distance(&m).unwrap() < 1e-15);
        assert!(charfn_mixture(grid(), &[0.5, 0.6], &[0.2, 0.2]).is_err());
        assert!(charfn_mixture(grid(), &[0.5], &[0.2, 0.2]).is_err());
        assert!(charfn_mixture(grid(), &[0.5, 0.5], &[0.2, -0.2]).is_err());
    }

    #[test]
    fn interpolation_is_exact_at_nodes() {
        let phi = charfn_mixture(grid(), &[0.5, 0.5], &[T1, T2]).unwrap();
        for i in [0, 1, 5, 100, 2047] {
            let r = phi.grid().r(i);
            assert!((interpolate(&phi, r).unwrap() - phi.values()[i]).abs() < 1e-15);
        }
        assert_eq!(interpolate(&phi, 0.0).unwrap(), 1.0);
        assert!(matches!(interpolate(&phi, 16.5), Err(Error::Range { .. })));
        assert!(interpolate(&phi, -0.1).is_err());
    }

    #[test]
    fn interpolation_matches_gaussian_off_grid() {
        let t = 1.0 / 3.0;
        let phi = charfn_maxwellian(grid(), t).unwrap();
        let mut worst: f64 = 0.0;
        for k in 0..5000 {
            let r = 15.99 * (k as f64 + 0.37) / 5000.0;
            let e = (interpolate(&phi, r).unwrap() - (-0.5 * t * r * r).exp()).abs();
            worst = worst.max(e);
        }
        assert!(worst < 1e-8, "worst {worst}");
    }

    #[test]
    fn gain_keeps_maxwellian() {
        for kind in [KernelKind::Isotropic, KernelKind::Linear { a: 0.5 }] {
            let k = make_kernel(kind, 64).unwrap();
            let m = charfn_maxwellian(grid(), 1.0 / 3.0).unwrap();
            let q = gain(&m, &m, &k).unwrap();
            assert!(q.sup_distance(&m).unwrap() < 1e-8);
        }
    }

    #[test]
    fn gain_of_two_maxwellians_closed_form() {
        let (ta, tb) = (0.2, 0.6);
        let a = charfn_maxwellian(grid(), ta).unwrap();
        let b = charfn_maxwellian(grid(), tb).unwrap();
        let q = gain(&a, &b, &iso()).unwrap();
        let err = max_err(&q, |r| {
            let z = r * r * (ta - tb) / 4.0;
            let shz = if z.abs() < 1e-8 { 1.0 } else { z.sinh() / z };
            (-r * r * (ta + tb) / 4.0).exp() * shz
        });
        assert!(err < 1e-8, "err {err}");
    }

    #[test]
    fn gain_of_delta_is_delta() {
        let d = RadialCharFn::delta(grid());
        let q = gain(&d, &d, &iso()).unwrap();
        assert!(q.values().iter().all(|v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn gain_rejects_grid_mismatch() {
        let a = charfn_maxwellian(grid(), 0.3).unwrap();
        let b = charfn_maxwellian(RadialGrid::new(1024, 16.0).unwrap(), 0.3).unwrap();
        assert!(matches!(gain(&a, &b, &iso()), Err(Error::Shape(_))));
    }

    #[test]
    fn phi_map_fixes_reservoir_maxwellian() {
        let k = make_kernel(KernelKind::Linear { a: -0.4 }, 64).unwrap();
        let m = charfn_maxwellian(grid(), 1.0 / 3.0).unwrap();
        let p = phi_map(&m, &m, &k, 0.37).unwrap();
        assert!(p.sup_distance(&m).unwrap() < 1e-8);
    }

    #[test]
    fn phi_map_small_gamma_is_gain() {
        let k = iso();
        let r = charfn_mixture(grid(), &[0.5, 0.5], &[T1, T2]).unwrap();
        let f = charfn_maxwellian(grid(), 0.25).unwrap();
        let p = phi_map(&f, &r, &k, 1e-12).unwrap();
        let q = gain(&f, &f, &k).unwrap();
        assert!(p.sup_distance(&q).unwrap() < 1e-11);
    }

    #[test]
    fn inverse_transform_of_maxwellian() {
        let t = 1.0 / 3.0;
        let phi = charfn_maxwellian(grid(), t).unwrap();
        let f = inverse_transform(&phi, 6.0, 601).unwrap();
        let err = f
            .speeds()
            .zip(f.values())
            .map(|(v, x)| (x - maxwellian_density(t, v)).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "err {err}");
        assert!((f.mass() - 1.0).abs() < 1e-6);
        assert!((f.second_moment() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn inverse_transform_of_mixture() {
        let phi = charfn_mixture(grid(), &[0.5, 0.5], &[T1, T2]).unwrap();
        let f = inverse_transform(&phi, 7.0, 701).unwrap();
        let err = f
            .speeds()
            .zip(f.values())
            .map(|(v, x)| (x - 0.5 * maxwellian_density(T1, v) - 0.5 * maxwellian_density(T2, v)).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "err {err}");
    }

    #[test]
    fn inverse_transform_flags_slow_decay() {
        let phi = charfn_maxwellian(grid(), 0.01).unwrap();
        assert!(matches!(
            inverse_transform(&phi, 2.0, 100),
            Err(Error::Truncation { .. })
        ));
    }
}
