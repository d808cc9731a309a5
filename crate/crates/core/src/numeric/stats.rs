use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population standard deviation.
pub fn std_dev(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogNormal {
    pub mu: f64,
    pub sigma: f64,
}

/// Maximum-likelihood log-normal fit.
pub fn lognormal_fit(samples: &[f64]) -> Result<LogNormal> {
    if samples.len() < 2 {
        return Err(Error::Domain(format!(
            "log-normal fit needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    if let Some(bad) = samples.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
        return Err(Error::Domain(format!("log-normal sample must be positive, got {bad}")));
    }
    let logs: Vec<f64> = samples.iter().map(|s| s.ln()).collect();
    Ok(LogNormal {
        mu: mean(&logs),
        sigma: std_dev(&logs),
    })
}

impl LogNormal {
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let z = x.ln() - self.mu;
        if self.sigma == 0.0 {
            return if z >= 0.0 { 1.0 } else { 0.0 };
        }
        0.5 * erfc(-z / (self.sigma * std::f64::consts::SQRT_2))
    }

    pub fn median(&self) -> f64 {
        self.mu.exp()
    }
}

/// Empirical minus fitted CDF at each sorted sample (ECDF taken as i/n after
/// the i-th sample). Returned alongside the sorted samples.
pub fn cdf_residuals(samples: &[f64], fit: &LogNormal) -> Vec<(f64, f64)> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| (x, (i + 1) as f64 / n - fit.cdf(x)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand_distr::{Distribution, LogNormal as LnDist};

    #[test]
    fn degenerate_e() {
        let fit = lognormal_fit(&[std::f64::consts::E; 4]).unwrap();
        assert!((fit.mu - 1.0).abs() < 1e-12);
        assert_eq!(fit.sigma, 0.0);
    }

    #[test]
    fn recovers_parameters() {
        let mut rng = seeded(11);
        let d = LnDist::new(1.5, 0.4).unwrap();
        let xs: Vec<f64> = (0..100_000).map(|_| d.sample(&mut rng)).collect();
        let fit = lognormal_fit(&xs).unwrap();
        assert!((fit.mu - 1.5).abs() < 0.01 && (fit.sigma - 0.4).abs() < 0.01);
        let worst = cdf_residuals(&xs, &fit)
            .iter()
            .map(|(_, r)| r.abs())
            .fold(0.0, f64::max);
        assert!(worst < 0.02, "{worst}");
    }

    #[test]
    fn rejects_non_positive() {
        assert!(matches!(lognormal_fit(&[1.0, 0.0]), Err(Error::Domain(_))));
        assert!(matches!(lognormal_fit(&[1.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn cdf_at_median_is_half() {
        let f = LogNormal { mu: 0.7, sigma: 0.3 };
        assert!((f.cdf(f.median()) - 0.5).abs() < 1e-12);
    }
}
