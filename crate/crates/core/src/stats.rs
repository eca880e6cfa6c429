//! Estimators and tests used by the statistical experiments.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Hill tail-index estimate above the `(k+1)`-th largest observation.
/// Observations tied with that threshold are left out, so integer data
/// with many ties is not biased towards light tails; `k` in the result is
/// the number of strict exceedances. A sample with no exceedances has no
/// tail and is reported with `alpha = ∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hill {
    pub alpha: f64,
    pub k: usize,
    pub n: usize,
}

impl Hill {
    pub fn is_degenerate(&self) -> bool {
        self.alpha.is_infinite()
    }
}

pub fn hill(samples: &[f64], k: usize) -> Result<Hill> {
    let n = samples.len();
    if k < 1 || n <= k {
        return Err(Error::Statistics {
            what: "Hill estimator order statistics".into(),
            needed: k + 1,
            got: n,
        });
    }
    let mut x = samples.to_vec();
    x.select_nth_unstable_by(k, |a, b| b.total_cmp(a));
    let threshold = x[k];
    if !(threshold > 0.0) {
        return Err(Error::Parameter(format!(
            "Hill estimator needs positive order statistics, threshold is {threshold}"
        )));
    }
    let lt = threshold.ln();
    let (m, sum) = x[..k]
        .iter()
        .filter(|v| **v > threshold)
        .fold((0usize, 0.0), |(m, s), v| (m + 1, s + v.ln() - lt));
    Ok(Hill {
        alpha: if sum > 0.0 { m as f64 / sum } else { f64::INFINITY },
        k: m,
        n,
    })
}

/// Sample quantile with linear interpolation between order statistics.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

pub fn quantile(v: &[f64], q: f64) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::Statistics {
            what: "quantile".into(),
            needed: 1,
            got: 0,
        });
    }
    Ok(quantile_sorted(&sorted(v), q))
}

/// The nine deciles 0.1, …, 0.9.
pub fn deciles(v: &[f64]) -> Result<[f64; 9]> {
    if v.is_empty() {
        return Err(Error::Statistics {
            what: "deciles".into(),
            needed: 1,
            got: 0,
        });
    }
    let s = sorted(v);
    Ok(std::array::from_fn(|i| quantile_sorted(&s, (i + 1) as f64 / 10.0)))
}

/// Two-sample Kolmogorov–Smirnov statistic `sup |F_a − F_b|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Empirical characteristic function `E e^{i s·X}` with standard errors of
/// the real and imaginary parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ecf {
    pub re: f64,
    pub im: f64,
    pub se_re: f64,
    pub se_im: f64,
}

pub fn ecf(samples: &[Vec<f64>], s: &[f64]) -> Ecf {
    let n = samples.len() as f64;
    let (mut c, mut c2, mut si, mut s2) = (0.0, 0.0, 0.0, 0.0);
    for x in samples {
        let arg: f64 = x.iter().zip(s).map(|(a, b)| a * b).sum();
        let (sn, cs) = arg.sin_cos();
        c += cs;
        c2 += cs * cs;
        si += sn;
        s2 += sn * sn;
    }
    let (mc, ms) = (c / n, si / n);
    Ecf {
        re: mc,
        im: ms,
        se_re: ((c2 / n - mc * mc).max(0.0) / n).sqrt(),
        se_im: ((s2 / n - ms * ms).max(0.0) / n).sqrt(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson goodness of fit; `expected` holds cell probabilities.
pub fn chi_square(observed: &[u64], expected: &[f64]) -> Result<ChiSquare> {
    if observed.len() != expected.len() || observed.len() < 2 {
        return Err(Error::Shape("χ² needs matching cell arrays of length ≥ 2".into()));
    }
    let n: u64 = observed.iter().sum();
    let total: f64 = expected.iter().sum();
    let mut stat = 0.0;
    for (&o, &p) in observed.iter().zip(expected) {
        let e = n as f64 * p / total;
        if e <= 0.0 {
            return Err(Error::Parameter("χ² cell with zero expected count".into()));
        }
        stat += (o as f64 - e).powi(2) / e;
    }
    let dof = observed.len() - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::Parameter(e.to_string()))?;
    Ok(ChiSquare {
        statistic: stat,
        dof,
        p_value: 1.0 - dist.cdf(stat),
    })
}

/// Standardised deviation of a binomial count from its mean.
pub fn binomial_z(count: u64, trials: u64, p: f64) -> f64 {
    let n = trials as f64;
    (count as f64 - n * p) / (n * p * (1.0 - p)).sqrt()
}

/// Least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::Rng;

    #[test]
    fn hill_on_pareto() {
        let mut r = stream(11, 0);
        let x: Vec<f64> = (0..200_000).map(|_| r.random::<f64>().powf(-1.0 / 1.5)).collect();
        let h = hill(&x, 20_000).unwrap();
        assert!((h.alpha - 1.5).abs() < 0.05, "{h:?}");
        let flat = vec![5.0; 100];
        assert!(hill(&flat, 10).unwrap().is_degenerate());
        assert!(matches!(hill(&flat[..5], 10), Err(Error::Statistics { .. })));
    }

    #[test]
    fn quantiles_and_ks() {
        let v: Vec<f64> = (0..=10).map(f64::from).collect();
        assert_eq!(deciles(&v).unwrap()[4], 5.0);
        assert_eq!(quantile(&v, 0.25).unwrap(), 2.5);
        assert_eq!(ks_statistic(&v, &v), 0.0);
        let w: Vec<f64> = v.iter().map(|x| x + 100.0).collect();
        assert_eq!(ks_statistic(&v, &w), 1.0);
    }

    #[test]
    fn chi_square_examples() {
        let c = chi_square(&[50, 50], &[0.5, 0.5]).unwrap();
        assert_eq!(c.statistic, 0.0);
        assert!((c.p_value - 1.0).abs() < 1e-12);
        let c = chi_square(&[90, 10], &[0.5, 0.5]).unwrap();
        assert!(c.p_value < 1e-10);
        assert!((binomial_z(60, 100, 0.5) - 2.0).abs() < 1e-12);
    }
}
