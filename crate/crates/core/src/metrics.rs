//! Distances between isotropic laws and moment extraction from
//! characteristic functions.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{ensure_same_grid, RadialCharFn, RadialDensity};

/// Second moments may differ by at most this much before the GTW distance
/// is refused.
pub const MOMENT_MATCH_TOL: f64 = 1e-4;
const FIT_RADIUS: f64 = 0.5;
const FIT_MIN_NODES: usize = 12;
// Powers r², r⁴, …, r^(2·FIT_TERMS). Only the first two are reported; the
// rest absorb the series tail.
const FIT_TERMS: usize = 5;
const FIT_RESIDUAL_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    /// `⟨|v|²⟩`
    pub m2: f64,
    /// `⟨|v|⁴⟩`
    pub m4: f64,
}

/// Second and fourth moments from the small-`r` expansion
/// `φ(r) = 1 - m2 r²/6 + m4 r⁴/120 - …`, fitted by least squares on the
/// nodes with `r < 0.5`.
pub fn moments(phi: &RadialCharFn) -> Result<MomentSummary> {
    let grid = phi.grid();
    let mut count = grid.nodes().skip(1).take_while(|&r| r < FIT_RADIUS).count();
    count = count.max(FIT_MIN_NODES).min(grid.len() - 1);
    let scale = grid.r(count).max(FIT_RADIUS);
    let s2 = scale * scale;

    let design = DMatrix::from_fn(count, FIT_TERMS, |row, col| {
        let x = grid.r(row + 1).powi(2) / s2;
        x.powi(col as i32 + 1)
    });
    let rhs = DVector::from_iterator(count, phi.values()[1..=count].iter().map(|v| v - 1.0));
    let svd = design.clone().svd(true, true);
    let coef = svd
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::domain(format!("moment fit failed: {e}")))?;
    let resid = &design * &coef - &rhs;
    let residual = (resid.norm_squared() / count as f64).sqrt();
    if !(residual <= FIT_RESIDUAL_LIMIT) {
        return Err(Error::IllConditioned { residual });
    }
    let c2 = coef[0] / s2;
    let c4 = coef[1] / (s2 * s2);
    Ok(MomentSummary {
        m2: -6.0 * c2,
        m4: 120.0 * c4,
    })
}

/// Gabetta–Toscani–Wennberg distance `sup_{r>0} |φ_f(r) - φ_g(r)| / r²`,
/// taken over the grid nodes. This is a lower bound of the continuous
/// supremum.
///
/// Fails with [`Error::MetricDomain`] if the second moments differ by more
/// than [`MOMENT_MATCH_TOL`]: the quotient would blow up as `r → 0`.
pub fn gtw_distance(phi_f: &RadialCharFn, phi_g: &RadialCharFn) -> Result<f64> {
    ensure_same_grid(&phi_f.grid(), &phi_g.grid())?;
    let gap = (moments(phi_f)?.m2 - moments(phi_g)?.m2).abs();
    if gap > MOMENT_MATCH_TOL {
        return Err(Error::MetricDomain {
            gap,
            limit: MOMENT_MATCH_TOL,
        });
    }
    Ok(gtw_on_grid(phi_f, phi_g))
}

pub(crate) fn gtw_on_grid(phi_f: &RadialCharFn, phi_g: &RadialCharFn) -> f64 {
    let grid = phi_f.grid();
    phi_f
        .values()
        .iter()
        .zip(phi_g.values())
        .enumerate()
        .skip(1)
        .map(|(i, (a, b))| {
            let r = grid.r(i);
            (a - b).abs() / (r * r)
        })
        .fold(0.0, f64::max)
}

/// An isotropic law on ℝ³ seen through its speed distribution.
#[derive(Debug, Clone, Copy)]
pub enum SpeedLaw<'a> {
    /// Empirical speeds `|v_i|`, in any order.
    Samples(&'a [f64]),
    Density(&'a RadialDensity),
}

const QUANTILE_POINTS: usize = 1 << 16;

/// Wasserstein-2 distance between two isotropic laws.
///
/// Optimal transport between isotropic laws is radial and monotone in the
/// speed, so `W₂² = ∫₀¹ (F⁻¹(u) - G⁻¹(u))² du` with `F, G` the speed CDFs.
/// Two empirical inputs are handled exactly; any density input uses a
/// midpoint rule on `2¹⁶` quantile levels.
pub fn radial_w2(a: SpeedLaw<'_>, b: SpeedLaw<'_>) -> Result<f64> {
    match (a, b) {
        (SpeedLaw::Samples(x), SpeedLaw::Samples(y)) => empirical_w2(x, y),
        _ => {
            let qa = Quantiles::new(a)?;
            let qb = Quantiles::new(b)?;
            let k = QUANTILE_POINTS;
            let sum: f64 = (0..k)
                .map(|i| {
                    let u = (i as f64 + 0.5) / k as f64;
                    (qa.at(u) - qb.at(u)).powi(2)
                })
                .sum();
            Ok((sum / k as f64).sqrt())
        }
    }
}

fn sorted(x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::domain("empty speed sample"));
    }
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

fn empirical_w2(x: &[f64], y: &[f64]) -> Result<f64> {
    let xs = sorted(x)?;
    let ys = sorted(y)?;
    if xs.len() == ys.len() {
        let s: f64 = xs.iter().zip(&ys).map(|(a, b)| (a - b).powi(2)).sum();
        return Ok((s / xs.len() as f64).sqrt());
    }
    // Merge the quantile breakpoints i/n and j/m.
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut u = 0.0;
    let mut acc = 0.0;
    while i < xs.len() && j < ys.len() {
        let next_x = (i + 1) as f64 / n;
        let next_y = (j + 1) as f64 / m;
        let next = next_x.min(next_y);
        acc += (next - u) * (xs[i] - ys[j]).powi(2);
        u = next;
        if next_x <= next {
            i += 1;
        }
        if next_y <= next {
            j += 1;
        }
    }
    Ok(acc.sqrt())
}

enum Quantiles {
    Sorted(Vec<f64>),
    Table { cdf: Vec<f64>, speeds: Vec<f64> },
}

impl Quantiles {
    fn new(law: SpeedLaw<'_>) -> Result<Self> {
        match law {
            SpeedLaw::Samples(x) => Ok(Quantiles::Sorted(sorted(x)?)),
            SpeedLaw::Density(d) => {
                let speeds: Vec<f64> = d.speeds().collect();
                let h = d.spacing();
                let dens: Vec<f64> = speeds
                    .iter()
                    .zip(d.values())
                    .map(|(v, f)| 4.0 * std::f64::consts::PI * f * v * v)
                    .collect();
                let mut cdf = Vec::with_capacity(dens.len());
                cdf.push(0.0);
                for w in dens.windows(2) {
                    let last = *cdf.last().unwrap();
                    cdf.push(last + 0.5 * h * (w[0] + w[1]));
                }
                let total = *cdf.last().unwrap();
                if !(total > 0.0) {
                    return Err(Error::domain("density has zero mass"));
                }
                cdf.iter_mut().for_each(|c| *c /= total);
                Ok(Quantiles::Table { cdf, speeds })
            }
        }
    }

    fn at(&self, u: f64) -> f64 {
        match self {
            Quantiles::Sorted(s) => s[((u * s.len() as f64) as usize).min(s.len() - 1)],
            Quantiles::Table { cdf, speeds } => {
                let n = cdf.len();
                let j = cdf.partition_point(|&c| c < u).clamp(1, n - 1);
                let (c0, c1) = (cdf[j - 1], cdf[j]);
                let t = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.0 };
                speeds[j - 1] + t * (speeds[j] - speeds[j - 1])
            }
        }
    }
}
