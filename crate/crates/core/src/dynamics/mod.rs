//! Fast chaotic drivers, Birkhoff-sum processes and return-time
//! diagnostics.

pub mod billiard;
pub mod pm;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::{format_sig, CadlagPath, Mode};
use crate::stats::{self, Hill};

pub use billiard::{BilliardTable, Collision, PhasePoint, Piece};
pub use pm::{induced_constants, PmInduced, PmMap, PmObservable};

/// Observable values along an orbit, one row of length `dim` per state.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    dim: usize,
    data: Vec<f64>,
}

impl Series {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::Shape(format!("{} values do not split into rows of {dim}", data.len())));
        }
        Ok(Self { dim, data })
    }

    /// Evaluates `v` on every state.
    pub fn observe<S>(states: &[S], dim: usize, v: impl Fn(&S, &mut [f64])) -> Self {
        let mut data = vec![0.0; states.len() * dim];
        for (s, row) in states.iter().zip(data.chunks_exact_mut(dim)) {
            v(s, row);
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// `W_n(t) = n^{−1/α} Σ_{j < ⌊nt⌋} v(y_j)` as a step path on the grid
/// `k/n`, accumulated term by term.
pub fn birkhoff_wn(series: &Series, n: usize, alpha: f64) -> Result<CadlagPath> {
    if n == 0 || series.len() < n {
        return Err(Error::Shape(format!("need {n} observations, have {}", series.len())));
    }
    let d = series.dim;
    let scale = (n as f64).powf(-1.0 / alpha);
    let mut values = vec![0.0; (n + 1) * d];
    for k in 0..n {
        let (done, next) = values.split_at_mut((k + 1) * d);
        let prev = &done[k * d..];
        for ((w, p), v) in next[..d].iter_mut().zip(prev).zip(series.row(k)) {
            *w = p + scale * v;
        }
    }
    let times = (0..=n).map(|k| k as f64 / n as f64).collect();
    CadlagPath::from_flat(d, times, values, vec![Mode::Step; n], None)
}

/// `t,x,y` columns (`t,x1,…` beyond two coordinates) with `digits`
/// significant digits, one row per grid time.
pub fn wn_csv(path: &CadlagPath, digits: usize) -> String {
    let d = path.dim();
    let names: Vec<String> = match d {
        1 => vec!["x".into()],
        2 => vec!["x".into(), "y".into()],
        _ => (1..=d).map(|i| format!("x{i}")).collect(),
    };
    let mut s = format!("t,{}\n", names.join(","));
    for (k, t) in path.times().iter().enumerate() {
        s.push_str(&format_sig(*t, digits));
        for v in path.value(k) {
            s.push(',');
            s.push_str(&format_sig(*v, digits));
        }
        s.push('\n');
    }
    s
}

/// One return: the orbit index where it starts, its length and section
/// label (`0` is `Σ_0`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Return {
    pub start: usize,
    pub time: u64,
    pub label: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReturnStructure {
    returns: Vec<Return>,
}

impl ReturnStructure {
    pub fn new(returns: Vec<Return>) -> Result<Self> {
        if returns.iter().any(|r| r.time == 0) {
            return Err(Error::Contract("return times must be at least 1".into()));
        }
        Ok(Self { returns })
    }

    /// Records a return from every visit to `Σ` to the next one. `label`
    /// gives the section of a state, `None` outside `Σ`.
    pub fn from_labels(len: usize, label: impl Fn(usize) -> Option<usize>) -> Self {
        let mut returns = Vec::new();
        let mut open: Option<(usize, usize)> = None;
        for k in 0..len {
            if let Some(l) = label(k) {
                if let Some((s, sl)) = open {
                    returns.push(Return {
                        start: s,
                        time: (k - s) as u64,
                        label: sl,
                    });
                }
                open = Some((k, l));
            }
        }
        Self { returns }
    }

    pub fn returns(&self) -> &[Return] {
        &self.returns
    }

    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        let mut l: Vec<usize> = self.returns.iter().map(|r| r.label).collect();
        l.sort_unstable();
        l.dedup();
        l
    }

    pub fn times_with_label(&self, label: usize) -> Vec<f64> {
        self.returns.iter().filter(|r| r.label == label).map(|r| r.time as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TailOptions {
    /// Fraction of each section's returns used as Hill order statistics.
    pub hill_fraction: f64,
    /// Threshold multiplier `s` in the clustering diagnostic.
    pub s: f64,
    /// Block lengths `n` for the clustering diagnostic.
    pub blocks: [usize; 3],
}

impl Default for TailOptions {
    fn default() -> Self {
        Self {
            hill_fraction: 0.01,
            s: 1.0,
            blocks: [100, 1000, 10000],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionTail {
    pub label: usize,
    pub count: usize,
    pub hill: Hill,
}

/// Frequency of returns exceeding `s n^{1/α}` that are followed by
/// another exceedance within `n` returns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub n: usize,
    pub threshold: f64,
    pub joint: f64,
    pub reference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub returns: usize,
    pub sections: Vec<SectionTail>,
    pub clustering: Vec<Clustering>,
}

impl TailReport {
    pub fn section(&self, label: usize) -> Option<&SectionTail> {
        self.sections.iter().find(|s| s.label == label)
    }
}

pub const MIN_RETURNS: usize = 10_000;

pub fn return_stats(rs: &ReturnStructure, opts: &TailOptions) -> Result<TailReport> {
    if rs.len() < MIN_RETURNS {
        return Err(Error::Statistics {
            what: "return statistics".into(),
            needed: MIN_RETURNS,
            got: rs.len(),
        });
    }
    if !(opts.hill_fraction > 0.0 && opts.hill_fraction < 1.0) {
        return Err(Error::Parameter("hill_fraction must lie in (0, 1)".into()));
    }
    let mut sections = Vec::new();
    for label in rs.labels() {
        let t = rs.times_with_label(label);
        let k = ((opts.hill_fraction * t.len() as f64).ceil() as usize).max(1);
        if t.len() <= k {
            continue;
        }
        sections.push(SectionTail {
            label,
            count: t.len(),
            hill: stats::hill(&t, k)?,
        });
    }
    let heavy: Vec<f64> = sections
        .iter()
        .filter(|s| s.label != 0 && !s.hill.is_degenerate())
        .map(|s| s.hill.alpha)
        .collect();
    let alpha = if heavy.is_empty() {
        2.0
    } else {
        heavy.iter().sum::<f64>() / heavy.len() as f64
    };
    let times: Vec<u64> = rs.returns.iter().map(|r| r.time).collect();
    let clustering = opts
        .blocks
        .iter()
        .map(|&n| {
            let u = opts.s * (n as f64).powf(1.0 / alpha);
            let hits: Vec<usize> =
                times.iter().enumerate().filter(|(_, &t)| t as f64 > u).map(|(i, _)| i).collect();
            let joint = hits.windows(2).filter(|w| w[1] - w[0] <= n).count();
            Clustering {
                n,
                threshold: u,
                joint: joint as f64 / times.len() as f64,
                reference: 1.0 / n as f64,
            }
        })
        .collect();
    Ok(TailReport {
        returns: rs.len(),
        sections,
        clustering,
    })
}

/// Normalised partial sums `s ↦ S_{⌊sR⌋}/R` of one excursion, sampled on
/// `points` uniform nodes of `[0, 1]`. `S_0 = 0` and `S_R` sums all `R`
/// terms.
pub fn excursion_curve(series: &Series, start: usize, len: usize, points: usize) -> Vec<Vec<f64>> {
    let d = series.dim;
    let r = len as f64;
    let mut cum = vec![0.0; (len + 1) * d];
    for k in 0..len {
        for i in 0..d {
            cum[(k + 1) * d + i] = cum[k * d + i] + series.row(start + k)[i] / r;
        }
    }
    (0..points)
        .map(|g| {
            let pos = g as f64 / (points - 1) as f64 * r;
            let j = (pos.floor() as usize).min(len - 1);
            let f = pos - j as f64;
            (0..d).map(|i| cum[j * d + i] + f * (cum[(j + 1) * d + i] - cum[j * d + i])).collect()
        })
        .collect()
}

pub fn curve_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| crate::path::dist(x, y)).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileEstimate {
    pub label: usize,
    pub threshold: u64,
    pub count: usize,
    pub grid: Vec<f64>,
    /// Pointwise median curve `P̂`.
    pub median: Vec<Vec<f64>>,
    /// Largest sup distance of an excursion curve from `P̂`.
    pub residual: f64,
    /// Mean of `V/R` over the deep excursions.
    pub mean_endpoint: Vec<f64>,
}

pub const MIN_DEEP: usize = 20;

/// Median normalised excursion curve over returns with `R > threshold`,
/// per section label other than `0`.
pub fn extract_profiles(
    series: &Series,
    rs: &ReturnStructure,
    threshold: u64,
    points: usize,
) -> Result<Vec<ProfileEstimate>> {
    if points < 2 {
        return Err(Error::Parameter("need at least 2 profile points".into()));
    }
    let d = series.dim;
    let mut out = Vec::new();
    for label in rs.labels().into_iter().filter(|&l| l != 0) {
        let deep: Vec<&Return> = rs
            .returns
            .iter()
            .filter(|r| r.label == label && r.time > threshold && r.start + r.time as usize <= series.len())
            .collect();
        if deep.len() < MIN_DEEP {
            return Err(Error::Statistics {
                what: format!("deep excursions in section {label}"),
                needed: MIN_DEEP,
                got: deep.len(),
            });
        }
        let curves: Vec<Vec<Vec<f64>>> = deep
            .iter()
            .map(|r| excursion_curve(series, r.start, r.time as usize, points))
            .collect();
        let median: Vec<Vec<f64>> = (0..points)
            .map(|g| {
                (0..d)
                    .map(|i| {
                        let col: Vec<f64> = curves.iter().map(|c| c[g][i]).collect();
                        stats::quantile(&col, 0.5).unwrap_or(0.0)
                    })
                    .collect()
            })
            .collect();
        let residual = curves.iter().map(|c| curve_distance(c, &median)).fold(0.0, f64::max);
        let mut mean_endpoint = vec![0.0; d];
        for c in &curves {
            for (m, v) in mean_endpoint.iter_mut().zip(&c[points - 1]) {
                *m += v / curves.len() as f64;
            }
        }
        out.push(ProfileEstimate {
            label,
            threshold,
            count: curves.len(),
            grid: (0..points).map(|g| g as f64 / (points - 1) as f64).collect(),
            median,
            residual,
            mean_endpoint,
        });
    }
    Ok(out)
}

/// The `count` longest excursions of section `label` as `(R, curve)`,
/// deepest first.
pub fn deepest_curves(
    series: &Series,
    rs: &ReturnStructure,
    label: usize,
    count: usize,
    points: usize,
) -> Result<Vec<(u64, Vec<Vec<f64>>)>> {
    let mut deep: Vec<&Return> = rs
        .returns
        .iter()
        .filter(|r| r.label == label && r.start + r.time as usize <= series.len())
        .collect();
    if deep.len() < count {
        return Err(Error::Statistics {
            what: format!("excursions in section {label}"),
            needed: count,
            got: deep.len(),
        });
    }
    deep.sort_by(|a, b| b.time.cmp(&a.time));
    Ok(deep[..count]
        .iter()
        .map(|r| (r.time, excursion_curve(series, r.start, r.time as usize, points)))
        .collect())
}
