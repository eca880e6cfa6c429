//! Fast-slow recursion `x_{k+1} = x_k + n⁻¹A(x_k) + n^{−1/α}B(x_k)v(y_k)`
//! driven by a chaotic orbit, and distributional comparison of its
//! endpoint with the solution of the decorated limit equation.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dynamics::billiard::{butterfly_observable, TableConfig};
use crate::dynamics::{
    extract_profiles, induced_constants, BilliardTable, PmInduced, PmMap, PmObservable, ReturnStructure, Series,
};
use crate::error::{Error, Result};
use crate::levy::{decorate_levy, sample_stable_skeleton, ProfileSet, StableSpec};
use crate::par::{try_map_indexed, Exec};
use crate::path::{CadlagPath, Mode};
use crate::rng::{stream, Rng};
use crate::stats;
use crate::young::{solve_decorated_ode, solve_marcus, Jump, SolveConfig, VectorField};

pub const DEFAULT_BURN_IN: usize = 10_000;
pub const MIN_ENSEMBLE: usize = 500;

/// Orbit source and observable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DriverSpec {
    /// Intermittent map with the centred observable `v₀(1 − E_Y R·1_Y)`.
    Pm { gamma: f64, v0: Vec<f64> },
    /// Cusp billiard with `v = (cos 3θ, cos 5θ)`.
    Billiard {
        #[serde(default = "default_beta")]
        beta: f64,
        #[serde(default = "default_s_cut")]
        s_cut: f64,
    },
}

fn default_beta() -> f64 {
    3.0
}

fn default_s_cut() -> f64 {
    0.2
}

#[derive(Debug, Clone)]
pub enum Driver {
    Pm {
        map: PmMap,
        induced: PmInduced,
        observable: PmObservable,
    },
    Billiard(BilliardTable),
}

impl Driver {
    pub fn new(spec: &DriverSpec) -> Result<Self> {
        match spec {
            DriverSpec::Pm { gamma, v0 } => {
                if v0.is_empty() {
                    return Err(Error::Parameter("v0 must have at least one coordinate".into()));
                }
                let map = PmMap::new(*gamma)?;
                let induced = induced_constants(&map, 32, 20_000)?;
                Ok(Driver::Pm {
                    map,
                    induced,
                    observable: PmObservable::new(v0.clone(), &induced),
                })
            }
            DriverSpec::Billiard { beta, s_cut } => Ok(Driver::Billiard(BilliardTable::new(TableConfig {
                beta: *beta,
                s_cut: *s_cut,
            })?)),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Driver::Pm { observable, .. } => observable.dim(),
            Driver::Billiard(_) => 2,
        }
    }

    pub fn alpha(&self) -> f64 {
        match self {
            Driver::Pm { map, .. } => map.alpha(),
            Driver::Billiard(t) => t.alpha(),
        }
    }

    /// `v(y_k)` for `k < n` after `burn_in` steps from a random start
    /// (uniform for the map, the invariant law for the billiard).
    pub fn observe(&self, n: usize, burn_in: usize, rng: &mut Rng) -> Result<Series> {
        Ok(self.observe_with_returns(n, burn_in, rng)?.0)
    }

    /// Observations together with the returns to `Σ`: `Y = [½, 1]` for the
    /// map; for the billiard the collisions outside the cusp, labelled `1`
    /// when the next collision enters it.
    pub fn observe_with_returns(
        &self,
        n: usize,
        burn_in: usize,
        rng: &mut Rng,
    ) -> Result<(Series, ReturnStructure)> {
        match self {
            Driver::Pm { map, observable, .. } => {
                let y = map.advance(rng.random(), burn_in);
                let orbit = map.orbit(y, n);
                let series = Series::observe(&orbit, observable.dim(), |y, out| observable.eval_into(*y, out));
                let rs = ReturnStructure::from_labels(n, |k| (orbit[k] >= 0.5).then_some(1));
                Ok((series, rs))
            }
            Driver::Billiard(table) => {
                let mut c = table.sample_invariant(rng)?;
                for _ in 0..burn_in {
                    c = table.step(&c)?;
                }
                let orbit = table.orbit(c, n)?;
                let series = Series::observe(&orbit, 2, butterfly_observable);
                let cusp: Vec<bool> = orbit.iter().map(|c| table.in_cusp(c)).collect();
                let rs = ReturnStructure::from_labels(n, |k| {
                    (!cusp[k]).then(|| usize::from(k + 1 < n && cusp[k + 1]))
                });
                Ok((series, rs))
            }
        }
    }

    /// The limit law of `W_n`, known in closed form for the map.
    pub fn limit(&self, k: usize) -> Result<LimitLaw> {
        match self {
            Driver::Pm {
                map,
                induced,
                observable,
            } => {
                let mut spec = StableSpec::new(map.alpha(), vec![1.0], k)?;
                spec.scale = induced.stable_scale();
                Ok(LimitLaw {
                    spec,
                    profiles: ProfileSet::linear(&observable.v0, observable.dim())?,
                })
            }
            Driver::Billiard(_) => Err(Error::Parameter(
                "the billiard limit law has no closed form; use LimitLaw::estimate".into(),
            )),
        }
    }
}

/// Euler recursion on the grid `k/n`; the result is a step path with
/// `n + 1` points.
pub fn fastslow_run(vf: &VectorField, xi: &[f64], series: &Series, n: usize, alpha: f64) -> Result<CadlagPath> {
    let (m, d) = (vf.state_dim(), vf.noise_dim());
    if xi.len() != m || series.dim() != d {
        return Err(Error::Shape(format!(
            "field ℝ^{m} × ℝ^{d}, initial state ℝ^{}, observable ℝ^{}",
            xi.len(),
            series.dim()
        )));
    }
    if n == 0 || series.len() < n {
        return Err(Error::Shape(format!("need {n} observations, have {}", series.len())));
    }
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(Error::Parameter(format!("α must lie in (1, 2), got {alpha}")));
    }
    let h = 1.0 / n as f64;
    let scale = (n as f64).powf(-1.0 / alpha);
    let mut values = Vec::with_capacity((n + 1) * m);
    values.extend_from_slice(xi);
    let mut x = xi.to_vec();
    let (mut a, mut b) = (vec![0.0; m], vec![0.0; m * d]);
    for k in 0..n {
        vf.drift(&x, &mut a);
        vf.noise(&x, &mut b);
        let v = series.row(k);
        for i in 0..m {
            let bv: f64 = b[i * d..(i + 1) * d].iter().zip(v).map(|(p, q)| p * q).sum();
            x[i] = x[i] + h * a[i] + scale * bv;
        }
        if x.iter().any(|v| !v.is_finite() || v.abs() > 1e12) {
            return Err(Error::Divergence(format!("slow state left the bounded region at step {k}")));
        }
        values.extend_from_slice(&x);
    }
    let times = (0..=n).map(|k| k as f64 / n as f64).collect();
    CadlagPath::from_flat(m, times, values, vec![Mode::Step; n], None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LimitKind {
    Decorated,
    Marcus,
}

/// `L^P_α`: a stable skeleton with axis jumps decorated by the profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitLaw {
    pub spec: StableSpec,
    pub profiles: ProfileSet,
}

impl LimitLaw {
    /// Estimates `P̂` and the Lévy scale from one long orbit: the median
    /// excursion curve of returns deeper than `threshold`, and the rate of
    /// such returns per step times `threshold^α`.
    pub fn estimate(
        series: &Series,
        rs: &ReturnStructure,
        threshold: u64,
        alpha: f64,
        k: usize,
    ) -> Result<Self> {
        let est = extract_profiles(series, rs, threshold, 101)?;
        if est.len() != 1 {
            return Err(Error::Parameter(format!("expected one cusp section, found {}", est.len())));
        }
        let p = &est[0];
        let mut values = p.median.clone();
        values[0].iter_mut().for_each(|v| *v = 0.0);
        let profile = CadlagPath::linear(p.grid.clone(), values)?;
        let rate = p.count as f64 / series.len() as f64 * (threshold as f64).powf(alpha);
        let mut spec = StableSpec::new(alpha, vec![1.0], k)?;
        spec.scale = 1.0 / rate;
        Ok(Self {
            spec,
            profiles: ProfileSet::new(vec![profile])?,
        })
    }

    pub fn out_dim(&self) -> usize {
        self.profiles.out_dim()
    }

    /// `X(1)` for `dX = A dt + B ⋄ dL^P`.
    pub fn sample_endpoint(
        &self,
        vf: &VectorField,
        xi: &[f64],
        kind: LimitKind,
        cfg: &SolveConfig,
        rng: &mut Rng,
    ) -> Result<Vec<f64>> {
        let (skeleton, _) = sample_stable_skeleton(&self.spec, rng)?;
        match kind {
            LimitKind::Decorated => {
                let phi = decorate_levy(&skeleton, &self.profiles)?;
                let sol = solve_decorated_ode(vf, xi, &phi, 1.0, cfg)?;
                Ok(sol.path.skeleton().last().to_vec())
            }
            LimitKind::Marcus => {
                let z = skeleton.matrix_apply(self.profiles.gamma(), self.out_dim())?;
                let (jumps, continuous) = split_jumps(&z)?;
                Ok(solve_marcus(vf, xi, &jumps, &continuous, cfg)?.path.last().to_vec())
            }
        }
    }
}

/// Jumps of `z` and its continuous part.
pub fn split_jumps(z: &CadlagPath) -> Result<(Vec<Jump>, CadlagPath)> {
    let d = z.dim();
    let mut offset = vec![0.0; d];
    let mut jumps = Vec::new();
    let mut values = Vec::with_capacity(z.len() * d);
    let mut modes = Vec::with_capacity(z.segments());
    values.extend_from_slice(z.first());
    for k in 1..z.len() {
        if z.has_jump(k) {
            let delta = z.jump_at(k);
            offset.iter_mut().zip(&delta).for_each(|(o, j)| *o += j);
            jumps.push(Jump {
                time: z.times()[k],
                delta,
            });
        }
        values.extend(z.value(k).iter().zip(&offset).map(|(v, o)| v - o));
        modes.push(if z.mode(k - 1) == Mode::Step { Mode::Step } else { Mode::Linear });
    }
    let continuous = CadlagPath::from_flat(d, z.times().to_vec(), values, modes, None)?;
    Ok((jumps, continuous))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub n: usize,
    pub m: usize,
    /// Replaced by the experiment seed when run from a config.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    pub xi: Vec<f64>,
    /// Truncation count of the limit sampler.
    #[serde(default = "default_k")]
    pub k: usize,
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

fn default_k() -> usize {
    200
}

/// `X_n(1)` for `m` independent starts; run `i` uses stream `i` of `seed`.
pub fn dynamics_endpoints(
    driver: &Driver,
    vf: &VectorField,
    cfg: &EnsembleConfig,
    exec: Exec,
) -> Result<Vec<Vec<f64>>> {
    let alpha = driver.alpha();
    try_map_indexed(cfg.m, exec, |i| {
        let mut rng = stream(cfg.seed, i as u64);
        let series = driver.observe(cfg.n, cfg.burn_in, &mut rng)?;
        Ok(fastslow_run(vf, &cfg.xi, &series, cfg.n, alpha)?.last().to_vec())
    })
}

/// Limit endpoints; streams are offset from the dynamics ones.
pub fn limit_endpoints(
    law: &LimitLaw,
    vf: &VectorField,
    cfg: &EnsembleConfig,
    kind: LimitKind,
    solve: &SolveConfig,
    exec: Exec,
) -> Result<Vec<Vec<f64>>> {
    try_map_indexed(cfg.m, exec, |i| {
        let mut rng = stream(cfg.seed ^ 0x9e37_79b9_7f4a_7c15, i as u64);
        law.sample_endpoint(vf, &cfg.xi, kind, solve, &mut rng)
    })
}

/// Bounded functional applied to endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Functional {
    #[default]
    Arctan,
}

impl Functional {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Functional::Arctan => x.iter().map(|v| v.atan()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateReport {
    pub dynamics: [f64; 9],
    pub limit: [f64; 9],
    pub gap: f64,
    pub ks: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileReport {
    pub samples: (usize, usize),
    pub coordinates: Vec<CoordinateReport>,
    pub max_gap: f64,
    pub ks: f64,
}

impl QuantileReport {
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        for (c, r) in self.coordinates.iter().enumerate() {
            s.push_str(&format!("coordinate {}\n{:>8} {:>12} {:>12} {:>10}\n", c + 1, "decile", "dynamics", "limit", "gap"));
            for q in 0..9 {
                s.push_str(&format!(
                    "{:>8} {:>12.6} {:>12.6} {:>10.6}\n",
                    format!("{}0%", q + 1),
                    r.dynamics[q],
                    r.limit[q],
                    (r.dynamics[q] - r.limit[q]).abs()
                ));
            }
            s.push_str(&format!("max gap {:.6}  KS {:.6}\n", r.gap, r.ks));
        }
        s
    }
}

/// Deciles of `functional(X)` on both samples, per coordinate.
pub fn ensemble_compare(
    dynamics: &[Vec<f64>],
    limit: &[Vec<f64>],
    functional: Functional,
) -> Result<QuantileReport> {
    for (what, s) in [("dynamics ensemble", dynamics), ("limit ensemble", limit)] {
        if s.len() < MIN_ENSEMBLE {
            return Err(Error::Statistics {
                what: what.into(),
                needed: MIN_ENSEMBLE,
                got: s.len(),
            });
        }
    }
    let d = dynamics[0].len();
    if dynamics.iter().chain(limit).any(|x| x.len() != d) {
        return Err(Error::Shape("endpoints of different dimensions".into()));
    }
    let fd: Vec<Vec<f64>> = dynamics.iter().map(|x| functional.apply(x)).collect();
    let fl: Vec<Vec<f64>> = limit.iter().map(|x| functional.apply(x)).collect();
    let mut coordinates = Vec::with_capacity(d);
    for c in 0..d {
        let a: Vec<f64> = fd.iter().map(|x| x[c]).collect();
        let b: Vec<f64> = fl.iter().map(|x| x[c]).collect();
        let (da, db) = (stats::deciles(&a)?, stats::deciles(&b)?);
        coordinates.push(CoordinateReport {
            dynamics: da,
            limit: db,
            gap: da.iter().zip(&db).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max),
            ks: stats::ks_statistic(&a, &b),
        });
    }
    Ok(QuantileReport {
        samples: (dynamics.len(), limit.len()),
        max_gap: coordinates.iter().map(|c| c.gap).fold(0.0, f64::max),
        ks: coordinates.iter().map(|c| c.ks).fold(0.0, f64::max),
        coordinates,
    })
}

/// A sample quantile with a distribution-free standard error read off the
/// order statistics `mq ± √(mq(1 − q))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileEstimate {
    pub n: usize,
    pub value: f64,
    pub se: f64,
}

pub fn quantile_with_se(samples: &[f64], q: f64) -> Result<QuantileEstimate> {
    let m = samples.len();
    if m < 2 {
        return Err(Error::Statistics {
            what: "quantile standard error".into(),
            needed: 2,
            got: m,
        });
    }
    let s = stats::sorted(samples);
    let half = (m as f64 * q * (1.0 - q)).sqrt() / (m - 1) as f64;
    let lo = stats::quantile_sorted(&s, q - half);
    let hi = stats::quantile_sorted(&s, q + half);
    Ok(QuantileEstimate {
        n: 0,
        value: stats::quantile_sorted(&s, q),
        se: 0.5 * (hi - lo),
    })
}

/// `q`-quantile of `|W_n|_{p-var}` over `m` runs for each `n`.
pub fn pvar_quantiles(
    driver: &Driver,
    ns: &[usize],
    p: f64,
    q: f64,
    m: usize,
    seed: u64,
    exec: Exec,
) -> Result<Vec<QuantileEstimate>> {
    let alpha = driver.alpha();
    ns.iter()
        .enumerate()
        .map(|(j, &n)| {
            let v = try_map_indexed(m, exec, |i| {
                let mut rng = stream(seed.wrapping_add(j as u64), i as u64);
                let series = driver.observe(n, DEFAULT_BURN_IN, &mut rng)?;
                crate::pvar::p_variation(&crate::dynamics::birkhoff_wn(&series, n, alpha)?, p)
            })?;
            Ok(QuantileEstimate {
                n,
                ..quantile_with_se(&v, q)?
            })
        })
        .collect()
}

/// Successive estimates never rise by more than `z` combined standard
/// errors.
pub fn non_increasing(points: &[QuantileEstimate], z: f64) -> bool {
    points
        .windows(2)
        .all(|w| w[1].value <= w[0].value + z * (w[0].se.powi(2) + w[1].se.powi(2)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::birkhoff_wn;

    fn pm() -> Driver {
        Driver::new(&DriverSpec::Pm {
            gamma: 2.0 / 3.0,
            v0: vec![1.0],
        })
        .unwrap()
    }

    #[test]
    fn recursion_examples() {
        let d = pm();
        let s = d.observe(1000, 100, &mut stream(1, 0)).unwrap();
        let zero = VectorField::driftless(1, 1, |_, o| o[0] = 0.0);
        let x = fastslow_run(&zero, &[0.3], &s, 1000, 1.5).unwrap();
        assert!(x.flat_values().iter().all(|v| *v == 0.3));
        let clock = VectorField::new(1, 1, |_, o| o[0] = 1.0, |_, o| o[0] = 0.0);
        let x = fastslow_run(&clock, &[0.0], &s, 1000, 1.5).unwrap();
        assert!((x.last()[0] - 1.0).abs() < 1e-12);
        assert_eq!(x.len(), 1001);
        assert!(fastslow_run(&clock, &[0.0, 1.0], &s, 10, 1.5).is_err());
        let blow = VectorField::driftless(1, 1, |x, o| o[0] = 1e3 * x[0] * x[0]);
        assert!(matches!(fastslow_run(&blow, &[1.0], &s, 1000, 1.5), Err(Error::Divergence(_))));
    }

    #[test]
    fn identity_field_reproduces_birkhoff_sums() {
        for spec in [
            DriverSpec::Pm {
                gamma: 0.7,
                v0: vec![1.0, -0.5],
            },
            DriverSpec::Billiard {
                beta: 3.0,
                s_cut: 0.2,
            },
        ] {
            let d = Driver::new(&spec).unwrap();
            let s = d.observe(5000, 100, &mut stream(2, 0)).unwrap();
            let id = VectorField::driftless(2, 2, |_, o| o.copy_from_slice(&[1.0, 0.0, 0.0, 1.0]));
            let x = fastslow_run(&id, &[0.0, 0.0], &s, 5000, d.alpha()).unwrap();
            let w = birkhoff_wn(&s, 5000, d.alpha()).unwrap();
            assert_eq!(x, w);
        }
    }

    #[test]
    fn compare_needs_enough_samples_and_degenerate_gap_is_zero() {
        let a = vec![vec![0.2]; 600];
        let r = ensemble_compare(&a, &a, Functional::Arctan).unwrap();
        assert_eq!(r.max_gap, 0.0);
        assert_eq!(r.ks, 0.0);
        assert!(matches!(
            ensemble_compare(&a[..100], &a, Functional::Arctan),
            Err(Error::Statistics { got: 100, .. })
        ));
    }

    #[test]
    fn limit_samplers() {
        let d = Driver::new(&DriverSpec::Pm {
            gamma: 2.0 / 3.0,
            v0: vec![1.0, 1.0],
        })
        .unwrap();
        let law = d.limit(50).unwrap();
        let vf = VectorField::nonmarcus_example();
        let cfg = SolveConfig::default();
        let mut r1 = stream(5, 0);
        let mut r2 = stream(5, 0);
        for _ in 0..5 {
            let a = law.sample_endpoint(&vf, &[0.0, 0.0], LimitKind::Decorated, &cfg, &mut r1).unwrap();
            let b = law.sample_endpoint(&vf, &[0.0, 0.0], LimitKind::Marcus, &cfg, &mut r2).unwrap();
            assert!((a[0] - b[0]).abs() < 1e-8 && (a[1] - b[1]).abs() < 1e-6, "{a:?} {b:?}");
        }
    }

    #[test]
    fn split_jumps_restores_path() {
        let z = CadlagPath::from_flat(
            1,
            vec![0.0, 0.5, 1.0],
            vec![0.0, 2.0, 2.5],
            vec![Mode::Linear, Mode::Linear],
            Some(vec![0.5, 2.5]),
        )
        .unwrap();
        let (j, c) = split_jumps(&z).unwrap();
        assert_eq!(j.len(), 1);
        assert_eq!(j[0].delta, vec![1.5]);
        assert_eq!(c.value(2), &[1.0]);
        assert!(c.is_continuous());
    }

    #[test]
    fn quantile_se_and_monotonicity() {
        let v: Vec<f64> = (0..1000).map(f64::from).collect();
        let q = quantile_with_se(&v, 0.95).unwrap();
        assert!((q.value - 949.05).abs() < 1e-9);
        assert!(q.se > 5.0 && q.se < 9.0);
        let pts = [
            QuantileEstimate { n: 1, value: 2.0, se: 0.1 },
            QuantileEstimate { n: 2, value: 2.1, se: 0.1 },
        ];
        assert!(non_increasing(&pts, 2.0));
        assert!(!non_increasing(&pts, 0.5));
    }
}
