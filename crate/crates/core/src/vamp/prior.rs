use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorKind {
    Gaussian,
    BernoulliGaussian,
}

/// Separable prior on each entry of `x`.
///
/// For `BernoulliGaussian` the entry is zero with probability `1 − rho` and otherwise drawn
/// from `N(mean, variance)`; `rho = 1` is the plain Gaussian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSpec {
    pub kind: PriorKind,
    #[serde(default)]
    pub mean: f64,
    pub variance: f64,
    #[serde(default = "one")]
    pub rho: f64,
}

fn one() -> f64 {
    1.0
}

impl PriorSpec {
    pub fn gaussian(mean: f64, variance: f64) -> Self {
        Self {
            kind: PriorKind::Gaussian,
            mean,
            variance,
            rho: 1.0,
        }
    }

    /// Zero-mean Bernoulli-Gaussian with active variance `1/rho` (unit signal power).
    pub fn bernoulli_gaussian(rho: f64) -> Self {
        Self {
            kind: PriorKind::BernoulliGaussian,
            mean: 0.0,
            variance: 1.0 / rho,
            rho,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.variance > 0.0 && self.variance.is_finite()) {
            return Err(Error::InvalidArgument(format!("prior variance must be positive, got {}", self.variance)));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::InvalidArgument(format!("sparsity rate must lie in (0, 1], got {}", self.rho)));
        }
        if !self.mean.is_finite() {
            return Err(Error::InvalidArgument("prior mean must be finite".into()));
        }
        Ok(())
    }

    fn active_rate(&self) -> f64 {
        match self.kind {
            PriorKind::Gaussian => 1.0,
            PriorKind::BernoulliGaussian => self.rho,
        }
    }

    pub fn marginal_mean(&self) -> f64 {
        self.active_rate() * self.mean
    }

    pub fn marginal_variance(&self) -> f64 {
        let r = self.active_rate();
        r * (self.variance + self.mean * self.mean) - (r * self.mean).powi(2)
    }
}

/// Output of the componentwise MMSE denoiser.
#[derive(Debug, Clone)]
pub struct Denoised {
    pub mean: Vec<f64>,
    /// Per-component posterior variances.
    pub variance: Vec<f64>,
    /// Average of the denoiser's Jacobian diagonal, `⟨∂x̂/∂r⟩`.
    pub alpha: f64,
    /// Scalar posterior precision `γ/α`.
    pub gamma_post: f64,
}

fn log_normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + (x - mean).powi(2) / var)
}

/// Posterior mean and variance of one entry given `r = x + N(0, 1/gamma)`.
fn posterior_moments(prior: &PriorSpec, r: f64, gamma: f64) -> (f64, f64) {
    let prec = gamma + 1.0 / prior.variance;
    let mu_a = (gamma * r + prior.mean / prior.variance) / prec;
    let var_a = 1.0 / prec;
    let rate = prior.active_rate();
    if rate >= 1.0 {
        return (mu_a, var_a);
    }
    let log_on = rate.ln() + log_normal_pdf(r, prior.mean, prior.variance + 1.0 / gamma);
    let log_off = (1.0 - rate).ln() + log_normal_pdf(r, 0.0, 1.0 / gamma);
    let z = log_on - log_off;
    let pi = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    let mean = pi * mu_a;
    let var = pi * var_a + pi * (1.0 - pi) * mu_a * mu_a;
    (mean, var)
}

/// Componentwise MMSE estimate of `x` under `prior` from `r = x + N(0, 1/gamma·I)`.
///
/// The Jacobian diagonal is `γ·Var[x_i | r_i]` for additive Gaussian noise, so `α` is the
/// mean posterior variance scaled by `γ` and the returned precision is `γ/α`.
pub fn denoise_mmse(prior: &PriorSpec, r: &[f64], gamma: f64) -> Result<Denoised> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("denoiser precision must be positive, got {gamma}")));
    }
    prior.validate()?;
    let (mean, variance): (Vec<f64>, Vec<f64>) = r.iter().map(|&ri| posterior_moments(prior, ri, gamma)).unzip();
    let n = r.len().max(1) as f64;
    let alpha = (gamma * variance.iter().sum::<f64>() / n).max(1e-300);
    Ok(Denoised {
        mean,
        variance,
        alpha,
        gamma_post: gamma / alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_precision_gaussian_shrinks_halfway() {
        let d = denoise_mmse(&PriorSpec::gaussian(0.0, 1.0), &[2.0, -4.0], 1.0).unwrap();
        assert_eq!(d.mean, vec![1.0, -2.0]);
        assert_eq!(d.alpha, 0.5);
        assert_eq!(d.gamma_post, 2.0);
    }

    #[test]
    fn noiseless_observation_passes_through() {
        let d = denoise_mmse(&PriorSpec::gaussian(0.0, 1.0), &[0.3, -1.7], 1e12).unwrap();
        assert!((d.mean[0] - 0.3).abs() < 1e-9 && (d.mean[1] + 1.7).abs() < 1e-9);
    }

    #[test]
    fn unit_rho_matches_gaussian() {
        let bg = PriorSpec {
            kind: PriorKind::BernoulliGaussian,
            mean: 0.5,
            variance: 2.0,
            rho: 1.0,
        };
        let g = PriorSpec::gaussian(0.5, 2.0);
        let a = denoise_mmse(&bg, &[0.1, 3.0], 1.5).unwrap();
        let b = denoise_mmse(&g, &[0.1, 3.0], 1.5).unwrap();
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.alpha, b.alpha);
    }

    #[test]
    fn non_positive_precision_is_rejected() {
        assert!(denoise_mmse(&PriorSpec::gaussian(0.0, 1.0), &[1.0], 0.0).is_err());
        assert!(denoise_mmse(&PriorSpec::gaussian(0.0, 1.0), &[1.0], -2.0).is_err());
    }

    #[test]
    fn marginal_moments_of_unit_power_bernoulli_gaussian() {
        let p = PriorSpec::bernoulli_gaussian(0.05);
        assert!((p.marginal_variance() - 1.0).abs() < 1e-15);
        assert_eq!(p.marginal_mean(), 0.0);
    }

    #[test]
    fn bernoulli_gaussian_jacobian_matches_finite_difference() {
        let p = PriorSpec::bernoulli_gaussian(0.05);
        let gamma = 4.0;
        for r in [-3.0, -0.4, 0.0, 0.9, 1.6, 2.5] {
            let h = 1e-6;
            let up = denoise_mmse(&p, &[r + h], gamma).unwrap().mean[0];
            let dn = denoise_mmse(&p, &[r - h], gamma).unwrap().mean[0];
            let fd = (up - dn) / (2.0 * h);
            let d = denoise_mmse(&p, &[r], gamma).unwrap();
            assert!((fd - d.alpha).abs() < 1e-6, "r={r}: fd {fd} vs {}", d.alpha);
        }
    }
}
