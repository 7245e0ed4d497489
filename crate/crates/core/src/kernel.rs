//! Angular collision kernel `b(s)` under Grad's cutoff, `½∫b(s)ds = 1`,
//! together with every rate constant derived from it.
//!
//! `s` is the cosine between the pre-collision relative velocity and the
//! scattering direction σ. All rates are evaluated with the same cached
//! Gauss–Legendre rule, so identities such as
//! `contraction_factor + gtw_decay_rate = 1` hold to the last bit.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

pub const DEFAULT_NODES: usize = 64;
const MIN_NODES: usize = 16;
const CDF_TABLE_POINTS: usize = 4096;
const NORMALIZATION_TOL: f64 = 1e-10;

/// Concrete kernel families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelKind {
    /// `b ≡ 1`.
    Isotropic,
    /// `b(s) = 1 + a s`, nonnegative for `|a| ≤ 1`.
    Linear { a: f64 },
}

impl Default for KernelKind {
    fn default() -> Self {
        KernelKind::Isotropic
    }
}

impl KernelKind {
    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            KernelKind::Isotropic => 1.0,
            KernelKind::Linear { a } => 1.0 + a * s,
        }
    }

    fn is_even(&self) -> bool {
        match *self {
            KernelKind::Isotropic => true,
            KernelKind::Linear { a } => a == 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AngularKernel {
    kind: KernelKind,
    rule: GaussLegendre,
    b_nodes: Vec<f64>,
    is_even: bool,
    // Cumulative of b(s)/2 on a uniform s-grid, for inverse-CDF sampling.
    cdf: Vec<f64>,
}

/// Build a kernel of the given family with an `node_count`-point rule.
pub fn make_kernel(kind: KernelKind, node_count: usize) -> Result<AngularKernel> {
    AngularKernel::new(kind, node_count)
}

impl AngularKernel {
    pub fn new(kind: KernelKind, node_count: usize) -> Result<Self> {
        if node_count < MIN_NODES {
            return Err(Error::InvalidKernel(format!(
                "node_count {node_count} below minimum {MIN_NODES}"
            )));
        }
        if let KernelKind::Linear { a } = kind {
            if !a.is_finite() || a.abs() > 1.0 {
                return Err(Error::InvalidKernel(format!(
                    "linear kernel 1 + a s is negative on [-1, 1] for a = {a}"
                )));
            }
        }
        let rule = GaussLegendre::new(node_count);
        let b_nodes: Vec<f64> = rule.nodes.iter().map(|&s| kind.eval(s)).collect();
        if b_nodes.iter().any(|&b| b < 0.0) {
            return Err(Error::InvalidKernel("b < 0 at a quadrature node".into()));
        }

        let h = 2.0 / (CDF_TABLE_POINTS - 1) as f64;
        let mut cdf = Vec::with_capacity(CDF_TABLE_POINTS);
        cdf.push(0.0);
        for j in 1..CDF_TABLE_POINTS {
            let s0 = -1.0 + (j - 1) as f64 * h;
            let s1 = -1.0 + j as f64 * h;
            let area = 0.25 * h * (kind.eval(s0) + kind.eval(s1));
            cdf.push(cdf[j - 1] + area);
        }
        let total = *cdf.last().unwrap();
        cdf.iter_mut().for_each(|c| *c /= total);

        let kernel = Self {
            kind,
            is_even: kind.is_even(),
            rule,
            b_nodes,
            cdf,
        };
        let norm = kernel.half_moment(|_| 1.0);
        if (norm - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidKernel(format!(
                "normalization ½∫b = {norm} differs from 1"
            )));
        }
        if kernel.is_even && kernel.mean_cosine().abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidKernel(
                "kernel flagged even but ½∫s b ≠ 0".into(),
            ));
        }
        Ok(kernel)
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn is_even(&self) -> bool {
        self.is_even
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.kind.eval(s)
    }

    /// Quadrature nodes `s_i`.
    pub fn nodes(&self) -> &[f64] {
        &self.rule.nodes
    }

    /// Quadrature weights `w_i` on `[-1, 1]`.
    pub fn weights(&self) -> &[f64] {
        &self.rule.weights
    }

    /// `b(s_i)` at the quadrature nodes.
    pub fn b_at_nodes(&self) -> &[f64] {
        &self.b_nodes
    }

    /// `½ Σ w_i g(s_i) b(s_i)`.
    pub fn half_moment<F: Fn(f64) -> f64>(&self, g: F) -> f64 {
        0.5 * self
            .rule
            .nodes
            .iter()
            .zip(&self.rule.weights)
            .zip(&self.b_nodes)
            .map(|((&s, &w), &b)| w * g(s) * b)
            .sum::<f64>()
    }

    /// `½∫ s b(s) ds`, the mean scattering cosine.
    pub fn mean_cosine(&self) -> f64 {
        self.half_moment(|s| s)
    }

    /// Lipschitz constant λ of the fixed-point map in the GTW metric,
    /// `(1-γ) + γ ¼∫(1+s) b(s) ds`; exactly `1 - γ/2` for even kernels.
    pub fn contraction_factor(&self, gamma: f64) -> Result<f64> {
        check_gamma(gamma)?;
        if self.is_even {
            return Ok(1.0 - 0.5 * gamma);
        }
        let quarter = 0.5 * self.half_moment(|s| 1.0 + s);
        Ok((1.0 - gamma) + gamma * quarter)
    }

    /// Relaxation rate of the mean velocity and of the energy deviation,
    /// `(γ/2)(1 - ½∫ s b ds)`.
    pub fn moment_decay_rate(&self, gamma: f64) -> Result<f64> {
        check_gamma(gamma)?;
        Ok(0.5 * gamma * (1.0 - self.mean_cosine()))
    }

    /// `λ₁ = 1 - λ`, the guaranteed exponential decay rate of the GTW
    /// distance between two solutions of the evolution equation.
    pub fn gtw_decay_rate(&self, gamma: f64) -> Result<f64> {
        Ok(1.0 - self.contraction_factor(gamma)?)
    }

    /// `½(1 - ½∫ s b ds)`: the moment rate in the form written without the
    /// factor γ. Reported next to [`Self::moment_decay_rate`] so the two
    /// conventions stay visible; nothing in the solver uses it.
    pub fn lambda0_without_gamma(&self) -> f64 {
        0.5 * (1.0 - self.mean_cosine())
    }

    /// Draw a scattering cosine with density `b(s)/2` on `[-1, 1]`.
    pub fn sample_cosine<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.inverse_cdf(u)
    }

    fn inverse_cdf(&self, u: f64) -> f64 {
        if self.kind == KernelKind::Isotropic {
            return 2.0 * u - 1.0;
        }
        let n = self.cdf.len();
        let j = self.cdf.partition_point(|&c| c <= u).clamp(1, n - 1);
        let (c0, c1) = (self.cdf[j - 1], self.cdf[j]);
        let h = 2.0 / (n - 1) as f64;
        let t = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.0 };
        (-1.0 + (j - 1) as f64 * h + t * h).clamp(-1.0, 1.0)
    }
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("gamma = {gamma} must lie in (0, 1)")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn iso() -> AngularKernel {
        make_kernel(KernelKind::Isotropic, 64).unwrap()
    }

    fn lin(a: f64) -> AngularKernel {
        make_kernel(KernelKind::Linear { a }, 64).unwrap()
    }

    #[test]
    fn isotropic_normalization() {
        let k = iso();
        assert!((k.half_moment(|_| 1.0) - 1.0).abs() < 1e-12);
        assert!(k.mean_cosine().abs() < 1e-14);
        assert!(k.is_even());
    }

    #[test]
    fn linear_mean_cosine() {
        // ½∫ s(1 + a s) ds = a/3
        let k = lin(0.5);
        assert!((k.mean_cosine() - 1.0 / 6.0).abs() < 1e-13);
        assert!(!k.is_even());
    }

    #[test]
    fn linear_out_of_range_is_rejected() {
        assert!(matches!(
            make_kernel(KernelKind::Linear { a: 1.5 }, 64),
            Err(Error::InvalidKernel(_))
        ));
        assert!(make_kernel(KernelKind::Isotropic, 8).is_err());
    }

    #[test]
    fn contraction_factor_examples() {
        assert_eq!(iso().contraction_factor(0.5).unwrap(), 0.75);
        // ¼∫(1+s)(1+as)ds = ½ + a/6 → λ = 1 - γ(½ - a/6)
        let l = lin(0.5).contraction_factor(0.6).unwrap();
        assert!((l - 0.75).abs() < 1e-13);
        assert!((iso().contraction_factor(1e-12).unwrap() - 1.0).abs() < 1e-11);
        assert!(iso().contraction_factor(1.0).is_err());
        assert!(iso().contraction_factor(0.0).is_err());
    }

    #[test]
    fn moment_rates() {
        assert!((iso().moment_decay_rate(0.5).unwrap() - 0.25).abs() < 1e-14);
        assert!((lin(0.5).moment_decay_rate(0.6).unwrap() - 0.25).abs() < 1e-13);
        assert!(iso().moment_decay_rate(1e-12).unwrap() < 1e-11);
        assert!((iso().gtw_decay_rate(0.5).unwrap() - 0.25).abs() < 1e-15);
        assert!((lin(0.5).gtw_decay_rate(0.6).unwrap() - 0.25).abs() < 1e-13);
        assert!((iso().gtw_decay_rate(0.3).unwrap() - 0.15).abs() < 1e-15);
        assert!((iso().lambda0_without_gamma() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn factor_plus_rate_is_one() {
        for k in [iso(), lin(0.5), lin(-0.9)] {
            for g in [0.1, 0.5, 0.9] {
                let s = k.contraction_factor(g).unwrap() + k.gtw_decay_rate(g).unwrap();
                assert_eq!(s, 1.0);
            }
        }
    }

    #[test]
    fn factor_monotone_in_gamma() {
        let k = lin(-0.7);
        let mut prev = f64::INFINITY;
        for i in 1..100 {
            let l = k.contraction_factor(i as f64 / 100.0).unwrap();
            assert!(l < prev);
            prev = l;
        }
    }

    #[test]
    fn isotropic_samples_are_uniform() {
        let k = iso();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let mut xs: Vec<f64> = (0..n).map(|_| k.sample_cosine(&mut rng)).collect();
        xs.sort_by(f64::total_cmp);
        let mut ks: f64 = 0.0;
        for (i, &x) in xs.iter().enumerate() {
            let f = 0.5 * (x + 1.0);
            ks = ks
                .max((f - i as f64 / n as f64).abs())
                .max(((i + 1) as f64 / n as f64 - f).abs());
        }
        assert!(ks < 0.002, "KS = {ks}");
    }

    #[test]
    fn linear_sample_mean() {
        let k = lin(0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 400_000;
        let xs: Vec<f64> = (0..n).map(|_| k.sample_cosine(&mut rng)).collect();
        assert!(xs.iter().all(|x| (-1.0..=1.0).contains(x)));
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - 1.0 / 6.0).abs() < 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn kernel_config_shape() {
        let k: KernelKind = serde_json::from_str(r#"{"kind":"linear","a":0.25}"#).unwrap();
        assert_eq!(k, KernelKind::Linear { a: 0.25 });
        let k: KernelKind = serde_json::from_str(r#"{"kind":"isotropic"}"#).unwrap();
        assert_eq!(k, KernelKind::Isotropic);
    }
}
