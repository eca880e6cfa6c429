//! Experiment runners shared by the command line tool and the acceptance
//! suite. Each runner takes its parameter block and a seed and returns a
//! JSON summary, a text report and named artifacts.

use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::decorated::{alpha_inf, linear_lift, trivial_lift, Decoration, DecoratedPath};
use crate::dynamics::{
    birkhoff_wn, curve_distance, deepest_curves, extract_profiles, return_stats, wn_csv, TailOptions,
};
use crate::error::{Error, Result};
use crate::fastslow::{
    dynamics_endpoints, ensemble_compare, limit_endpoints, non_increasing, pvar_quantiles, Driver, DriverSpec,
    EnsembleConfig, Functional, LimitKind, LimitLaw, QuantileEstimate, QuantileReport,
};
use crate::frechet::j1_dist;
use crate::par::{try_map_indexed, Exec};
use crate::path::{format_sig, sup_dist, CadlagPath, Mode};
use crate::pvar::{p_variation, pvar_points};
use crate::rng::{stream, Rng};
use crate::warp::sigma_pvar;
use crate::young::{jump_driver, solve_decorated_ode, solve_marcus, solve_young_ode, Jump, SolveConfig, VectorField};

/// Significant digits of every CSV artifact.
pub const CSV_DIGITS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ExampleNonmarcus,
    Butterfly,
    MarcusCheck,
    MetricsSuite,
    Tails,
    FastslowCompare,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::ExampleNonmarcus => "example-nonmarcus",
            Self::Butterfly => "butterfly",
            Self::MarcusCheck => "marcus-check",
            Self::MetricsSuite => "metrics-suite",
            Self::Tails => "tails",
            Self::FastslowCompare => "fastslow-compare",
        }
    }
}

/// Top level of a config file; `params` is checked against the parameter
/// block of `experiment`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<String>,
    #[serde(default = "empty_table")]
    pub params: Value,
}

fn empty_table() -> Value {
    Value::Object(Default::default())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Params {
    ExampleNonmarcus(NonMarcusConfig),
    Butterfly(ButterflyConfig),
    MarcusCheck(MarcusCheckConfig),
    MetricsSuite(MetricsConfig),
    Tails(TailsConfig),
    FastslowCompare(FastslowConfig),
}

/// A config value rejected at `path` (dotted keys, `[i]` for indices).
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

fn at_path<T: serde::de::DeserializeOwned>(prefix: &str, v: Value) -> std::result::Result<T, ConfigError> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let inner = e.path().to_string();
        let path = match (prefix.is_empty(), inner == ".") {
            (true, _) => inner,
            (false, true) => prefix.to_string(),
            (false, false) => format!("{prefix}.{inner}"),
        };
        ConfigError {
            path,
            message: e.into_inner().to_string(),
        }
    })
}

impl ExperimentConfig {
    pub fn from_value(v: Value) -> std::result::Result<Self, ConfigError> {
        at_path("", v)
    }
}

impl Params {
    /// Parameter block of the given experiment; errors name the offending
    /// key below `params`.
    pub fn parse(kind: ExperimentKind, v: Value) -> std::result::Result<Self, ConfigError> {
        let p = "params";
        Ok(match kind {
            ExperimentKind::ExampleNonmarcus => Self::ExampleNonmarcus(at_path(p, v)?),
            ExperimentKind::Butterfly => Self::Butterfly(at_path(p, v)?),
            ExperimentKind::MarcusCheck => Self::MarcusCheck(at_path(p, v)?),
            ExperimentKind::MetricsSuite => Self::MetricsSuite(at_path(p, v)?),
            ExperimentKind::Tails => Self::Tails(at_path(p, v)?),
            ExperimentKind::FastslowCompare => Self::FastslowCompare(at_path(p, v)?),
        })
    }

    /// Normalised parameters with every default filled in.
    pub fn to_value(&self) -> Value {
        let v = match self {
            Self::ExampleNonmarcus(c) => serde_json::to_value(c),
            Self::Butterfly(c) => serde_json::to_value(c),
            Self::MarcusCheck(c) => serde_json::to_value(c),
            Self::MetricsSuite(c) => serde_json::to_value(c),
            Self::Tails(c) => serde_json::to_value(c),
            Self::FastslowCompare(c) => serde_json::to_value(c),
        };
        v.unwrap_or(Value::Null)
    }

    pub fn run(&self, seed: u64, exec: Exec) -> Result<Output> {
        match self {
            Self::ExampleNonmarcus(c) => example_nonmarcus(c),
            Self::Butterfly(c) => butterfly(c, seed),
            Self::MarcusCheck(c) => marcus_check(c, seed, exec),
            Self::MetricsSuite(c) => metrics_suite(c, seed, exec),
            Self::Tails(c) => tails(c, seed),
            Self::FastslowCompare(c) => fastslow_compare(c, seed, exec),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub summary: Value,
    pub report: String,
    pub artifacts: Vec<Artifact>,
}

impl Output {
    pub fn artifact(&self, name: &str) -> Option<&str> {
        self.artifacts.iter().find(|a| a.name == name).map(|a| a.contents.as_str())
    }
}

fn artifact(name: &str, contents: String) -> Artifact {
    Artifact {
        name: name.into(),
        contents,
    }
}

fn sig(x: f64) -> String {
    format_sig(x, CSV_DIGITS)
}

/// Noise coefficients for the fast-slow and Marcus experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum FieldSpec {
    /// `A ≡ 0`, `B = I_d`: the solution is the driver itself.
    Identity { dim: usize },
    /// `dX = X dW`.
    Linear,
    /// `B(x) = diag(1, x₁)`.
    Nonmarcus,
    /// `A ≡ a`, `B ≡ b` (row-major).
    Constant { a: Vec<f64>, b: Vec<f64> },
    /// `dX = A dt + ε sin(x) dW` in one dimension.
    Sine { a: f64, eps: f64 },
}

impl FieldSpec {
    pub fn build(&self) -> Result<VectorField> {
        match self {
            Self::Identity { dim } => {
                let d = *dim;
                if d == 0 {
                    return Err(Error::Parameter("identity field needs dim ≥ 1".into()));
                }
                Ok(VectorField::driftless(d, d, move |_, out| {
                    out.fill(0.0);
                    (0..d).for_each(|i| out[i * d + i] = 1.0);
                })
                .with_lipschitz(0.0))
            }
            Self::Linear => Ok(VectorField::linear_scalar()),
            Self::Nonmarcus => Ok(VectorField::nonmarcus_example()),
            Self::Constant { a, b } => VectorField::constant(a.clone(), b.clone()),
            Self::Sine { a, eps } => {
                let (a, eps) = (*a, *eps);
                Ok(
                    VectorField::new(1, 1, move |_, out| out[0] = a, move |x, out| out[0] = eps * x[0].sin())
                        .with_lipschitz(eps.abs()),
                )
            }
        }
    }
}

// ---------------------------------------------------------------- non-Marcus

/// Excursion shapes `h: [0, 1] → ℝ²` with `h(0) = 0`, `h(1) = (1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    /// `(s, s²)`
    Quadratic,
    /// `(s, s)`
    Diagonal,
    /// `(s, s³)`
    Cubic,
    /// `(sin 2πs + s, ½ sin 4πs + s)`
    Butterfly,
}

impl Shape {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Quadratic => "quadratic",
            Self::Diagonal => "diagonal",
            Self::Cubic => "cubic",
            Self::Butterfly => "butterfly",
        }
    }

    pub fn eval(&self, s: f64) -> [f64; 2] {
        match self {
            Self::Quadratic => [s, s * s],
            Self::Diagonal => [s, s],
            Self::Cubic => [s, s * s * s],
            Self::Butterfly => [(2.0 * PI * s).sin() + s, 0.5 * (4.0 * PI * s).sin() + s],
        }
    }

    fn derivative(&self, s: f64) -> [f64; 2] {
        match self {
            Self::Quadratic => [1.0, 2.0 * s],
            Self::Diagonal => [1.0, 1.0],
            Self::Cubic => [1.0, 3.0 * s * s],
            Self::Butterfly => [2.0 * PI * (2.0 * PI * s).cos() + 1.0, 2.0 * PI * (4.0 * PI * s).cos() + 1.0],
        }
    }

    /// `h` sampled at `samples` equispaced points and joined linearly.
    pub fn path(&self, samples: usize) -> Result<CadlagPath> {
        CadlagPath::sample_linear(0.0, 1.0, samples, |s| self.eval(s).to_vec())
    }

    /// `∫₀¹ h¹ dh²` by composite Simpson with 2000 intervals.
    pub fn area(&self) -> f64 {
        let n = 2000;
        let f = |s: f64| self.eval(s)[0] * self.derivative(s)[1];
        let h = 1.0 / n as f64;
        let inner: f64 = (1..n).map(|k| if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h)).sum();
        (f(0.0) + f(1.0) + inner) * h / 3.0
    }
}

/// `∫ h¹ dh²` for a piecewise linear `h`, exact on each segment.
pub fn polygon_area(h: &CadlagPath) -> f64 {
    (1..h.len())
        .map(|k| 0.5 * (h.value(k - 1)[0] + h.value(k)[0]) * (h.value(k)[1] - h.value(k - 1)[1]))
        .sum()
}

/// Pre-limit driver: zero until `½ − 1/n`, then `h` traversed on
/// `[½ − 1/n, ½]`, then held at `h(1)`.
pub fn example_prelimit(h: &CadlagPath, n: usize) -> Result<CadlagPath> {
    if n < 3 {
        return Err(Error::Parameter(format!("window count n must be at least 3, got {n}")));
    }
    let (t0, t1) = (0.5 - 1.0 / n as f64, 0.5);
    let fast = h.rescale_time(t0, t1)?;
    let d = h.dim();
    let mut times = vec![0.0];
    let mut values = vec![0.0; d];
    let mut modes = vec![Mode::Step];
    times.extend_from_slice(fast.times());
    for k in 0..fast.len() {
        values.extend_from_slice(fast.value(k));
    }
    modes.extend(fast.modes());
    times.push(1.0);
    values.extend_from_slice(fast.last());
    modes.push(Mode::Step);
    CadlagPath::from_flat(d, times, values, modes, None)
}

/// The limit of [`example_prelimit`]: a unit jump at `½` decorated by `h`.
pub fn example_limit(h: &CadlagPath) -> Result<DecoratedPath> {
    let d = h.dim();
    let mut values = vec![0.0; d];
    values.extend_from_slice(h.last());
    values.extend_from_slice(h.last());
    let skeleton = CadlagPath::from_flat(d, vec![0.0, 0.5, 1.0], values, vec![Mode::Step; 2], None)?;
    DecoratedPath::new(
        skeleton,
        vec![Decoration {
            time: 0.5,
            excursion: h.clone(),
        }],
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NonMarcusConfig {
    pub ns: Vec<usize>,
    pub shapes: Vec<Shape>,
    pub samples: usize,
    pub solve: SolveConfig,
}

impl Default for NonMarcusConfig {
    fn default() -> Self {
        Self {
            ns: vec![100, 1000, 10_000],
            shapes: vec![Shape::Quadratic, Shape::Diagonal, Shape::Cubic, Shape::Butterfly],
            samples: 257,
            solve: SolveConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonMarcusRow {
    pub shape: Shape,
    /// `None` for the decorated limit.
    pub n: Option<usize>,
    pub endpoint: [f64; 2],
    /// `∫ h¹ dh²` of the sampled excursion.
    pub polygon: f64,
    /// `∫ h¹ dh²` of the exact shape.
    pub area: f64,
    /// Second coordinate of the Marcus solution for the jump `h(1)`.
    pub marcus: f64,
}

pub fn nonmarcus_rows(cfg: &NonMarcusConfig) -> Result<Vec<NonMarcusRow>> {
    let vf = VectorField::nonmarcus_example();
    let xi = [0.0, 0.0];
    let mut rows = Vec::new();
    for &shape in &cfg.shapes {
        let h = shape.path(cfg.samples)?;
        let still = CadlagPath::constant(0.0, 1.0, &[0.0, 0.0])?;
        let jump = Jump {
            time: 0.5,
            delta: h.last().to_vec(),
        };
        let marcus = solve_marcus(&vf, &xi, &[jump], &still, &cfg.solve)?.path.last()[1];
        let (polygon, area) = (polygon_area(&h), shape.area());
        let row = |n, x: &[f64]| NonMarcusRow {
            shape,
            n,
            endpoint: [x[0], x[1]],
            polygon,
            area,
            marcus,
        };
        for &n in &cfg.ns {
            let sol = solve_young_ode(&vf, &xi, &example_prelimit(&h, n)?, &cfg.solve)?;
            rows.push(row(Some(n), sol.path.last()));
        }
        let lim = solve_decorated_ode(&vf, &xi, &example_limit(&h)?, 1.0, &cfg.solve)?;
        rows.push(row(None, lim.path.skeleton().last()));
    }
    Ok(rows)
}

pub fn example_nonmarcus(cfg: &NonMarcusConfig) -> Result<Output> {
    let rows = nonmarcus_rows(cfg)?;
    let mut csv = String::from("shape,n,x1,x2,polygon,area,marcus\n");
    let mut report = format!(
        "{:<10} {:>7} {:>13} {:>13} {:>13} {:>13}\n",
        "shape", "n", "X²(1)", "∫h¹dh²", "|gap|", "Marcus"
    );
    for r in &rows {
        let n = r.n.map_or("limit".to_string(), |n| n.to_string());
        csv += &format!(
            "{},{n},{},{},{},{},{}\n",
            r.shape.name(),
            sig(r.endpoint[0]),
            sig(r.endpoint[1]),
            sig(r.polygon),
            sig(r.area),
            sig(r.marcus)
        );
        report += &format!(
            "{:<10} {n:>7} {:>13.9} {:>13.9} {:>13.3e} {:>13.9}\n",
            r.shape.name(),
            r.endpoint[1],
            r.area,
            (r.endpoint[1] - r.polygon).abs(),
            r.marcus
        );
    }
    Ok(Output {
        summary: json!({ "rows": rows }),
        report,
        artifacts: vec![artifact("endpoints.csv", csv)],
    })
}

// ---------------------------------------------------------------- butterfly

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ButterflyConfig {
    pub beta: f64,
    pub s_cut: f64,
    pub n: usize,
    pub burn_in: usize,
    /// Points on each rescaled excursion curve.
    pub points: usize,
    /// Depth thresholds for the profile estimates.
    pub thresholds: Vec<u64>,
}

impl Default for ButterflyConfig {
    fn default() -> Self {
        Self {
            beta: 3.0,
            s_cut: 0.2,
            n: 100_000,
            burn_in: crate::fastslow::DEFAULT_BURN_IN,
            points: 2001,
            thresholds: vec![10, 20, 50],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ButterflySummary {
    pub n: usize,
    pub alpha: f64,
    pub deepest: [u64; 2],
    pub distance: f64,
    pub profiles: Vec<ProfileSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSummary {
    pub threshold: u64,
    pub count: usize,
    pub residual: f64,
    pub mean_endpoint: Vec<f64>,
}

pub fn butterfly(cfg: &ButterflyConfig, seed: u64) -> Result<Output> {
    let driver = Driver::new(&DriverSpec::Billiard {
        beta: cfg.beta,
        s_cut: cfg.s_cut,
    })?;
    let mut rng = stream(seed, 0);
    let (series, rs) = driver.observe_with_returns(cfg.n, cfg.burn_in, &mut rng)?;
    let wn = birkhoff_wn(&series, cfg.n, driver.alpha())?;
    let deep = deepest_curves(&series, &rs, 1, 2, cfg.points)?;
    let distance = curve_distance(&deep[0].1, &deep[1].1);
    let mut curves = String::from("s,x1,y1,x2,y2\n");
    for j in 0..cfg.points {
        let s = j as f64 / (cfg.points - 1) as f64;
        let (a, b) = (&deep[0].1[j], &deep[1].1[j]);
        curves += &format!("{},{},{},{},{}\n", sig(s), sig(a[0]), sig(a[1]), sig(b[0]), sig(b[1]));
    }
    let mut profiles = Vec::new();
    let mut artifacts = vec![artifact("wn.csv", wn_csv(&wn, CSV_DIGITS)), artifact("deepest.csv", curves)];
    for &t in &cfg.thresholds {
        // Thresholds with too few excursions are skipped.
        let Ok(est) = extract_profiles(&series, &rs, t, 101) else {
            continue;
        };
        for p in est.into_iter().filter(|p| p.label == 1) {
            let mut csv = String::from("s,x,y\n");
            for (s, v) in p.grid.iter().zip(&p.median) {
                csv += &format!("{},{},{}\n", sig(*s), sig(v[0]), sig(v[1]));
            }
            artifacts.push(artifact(&format!("profile_{t}.csv"), csv));
            profiles.push(ProfileSummary {
                threshold: t,
                count: p.count,
                residual: p.residual,
                mean_endpoint: p.mean_endpoint,
            });
        }
    }
    let summary = ButterflySummary {
        n: cfg.n,
        alpha: driver.alpha(),
        deepest: [deep[0].0, deep[1].0],
        distance,
        profiles,
    };
    let mut report = format!(
        "n = {}, α = {}\ndeepest excursions R = {}, {}; curve distance {:.3e}\n",
        summary.n, summary.alpha, summary.deepest[0], summary.deepest[1], distance
    );
    for p in &summary.profiles {
        report += &format!(
            "threshold {:>4}: {:>6} excursions, residual {:.4}, mean endpoint ({:.4}, {:.4})\n",
            p.threshold, p.count, p.residual, p.mean_endpoint[0], p.mean_endpoint[1]
        );
    }
    Ok(Output {
        summary: serde_json::to_value(&summary).map_err(|e| Error::Parse(e.to_string()))?,
        report,
        artifacts,
    })
}

// ---------------------------------------------------------------- Marcus

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MarcusCheckConfig {
    pub cases: usize,
    pub max_jumps: usize,
    pub dim: usize,
    pub solve: SolveConfig,
    /// Excursion samples for the non-Marcus cases.
    pub samples: usize,
}

impl Default for MarcusCheckConfig {
    fn default() -> Self {
        Self {
            cases: 100,
            max_jumps: 4,
            dim: 2,
            solve: SolveConfig::default(),
            samples: 257,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarcusCase {
    pub case: usize,
    pub jumps: usize,
    /// Sup distance between the decorated and Marcus solutions.
    pub sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonMarcusCase {
    pub shape: Shape,
    /// Endpoint second coordinates.
    pub decorated: f64,
    pub marcus: f64,
    /// `α∞` between the decorated solution and the one driven by the
    /// linear profile, which carries the Marcus flow at the jump.
    pub excursion_gap: f64,
}

/// The unit jump of the non-Marcus example decorated by `shape`, against
/// the same jump with a linear profile.
pub fn nonmarcus_case(shape: Shape, samples: usize, solve: &SolveConfig) -> Result<NonMarcusCase> {
    let vf = VectorField::nonmarcus_example();
    let xi = [0.0, 0.0];
    let phi = example_limit(&shape.path(samples)?)?;
    let dec = solve_decorated_ode(&vf, &xi, &phi, 1.0, solve)?;
    let lin = solve_decorated_ode(&vf, &xi, &linear_lift(phi.skeleton()), 1.0, solve)?;
    Ok(NonMarcusCase {
        shape,
        decorated: dec.path.skeleton().last()[1],
        marcus: lin.path.skeleton().last()[1],
        excursion_gap: alpha_inf(&dec.path, &lin.path, 1e-6, 1 << 16)?.value,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarcusSummary {
    pub cases: Vec<MarcusCase>,
    pub max_sup: f64,
    pub nonmarcus: Vec<NonMarcusCase>,
}

/// Smooth field `B_ij(x) = c_ij + a_ij sin(w_ij·x + φ_ij)`, small drift.
pub fn random_field(rng: &mut Rng, m: usize, d: usize) -> VectorField {
    let mut coef = |len: usize, scale: f64| -> Vec<f64> { (0..len).map(|_| rng.random_range(-scale..scale)).collect() };
    let (c, a, phase) = (coef(m * d, 1.0), coef(m * d, 0.5), coef(m * d, PI));
    let w = coef(m * d * m, 1.0);
    let drift = coef(m, 0.3);
    let lip: f64 = (0..m * d)
        .map(|k| a[k].abs() * w[k * m..(k + 1) * m].iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let noise = move |x: &[f64], out: &mut [f64]| {
        for (k, o) in out.iter_mut().enumerate() {
            let arg: f64 = w[k * m..(k + 1) * m].iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>() + phase[k];
            *o = c[k] + a[k] * arg.sin();
        }
    };
    let drift_fn = move |x: &[f64], out: &mut [f64]| {
        for (i, o) in out.iter_mut().enumerate() {
            *o = drift[i] * x[i].cos();
        }
    };
    VectorField::new(m, d, drift_fn, noise).with_lipschitz(lip.max(0.3))
}

/// Continuous piecewise linear driver plus `jumps` jumps at random times.
pub fn random_jump_driver(rng: &mut Rng, d: usize, jumps: usize) -> Result<(Vec<Jump>, CadlagPath)> {
    let segments = 4;
    let mut values = vec![0.0; d];
    for k in 1..=segments {
        for i in 0..d {
            let z: f64 = StandardNormal.sample(rng);
            values.push(values[(k - 1) * d + i] + 0.5 * z);
        }
    }
    let times = (0..=segments).map(|k| k as f64 / segments as f64).collect();
    let continuous = CadlagPath::from_flat(d, times, values, vec![Mode::Linear; segments], None)?;
    let mut js: Vec<Jump> = (0..jumps)
        .map(|_| Jump {
            time: rng.random_range(0.02..1.0),
            delta: (0..d).map(|_| StandardNormal.sample(rng)).collect(),
        })
        .collect();
    js.sort_by(|a, b| a.time.total_cmp(&b.time));
    js.dedup_by(|a, b| a.time == b.time);
    Ok((js, continuous))
}

pub fn marcus_cases(cfg: &MarcusCheckConfig, seed: u64, exec: Exec) -> Result<Vec<MarcusCase>> {
    try_map_indexed(cfg.cases, exec, |i| {
        let mut rng = stream(seed, i as u64);
        let vf = random_field(&mut rng, cfg.dim, cfg.dim);
        let count = if i == 0 { 0 } else { rng.random_range(1..=cfg.max_jumps.max(1)) };
        let (jumps, continuous) = random_jump_driver(&mut rng, cfg.dim, count)?;
        let xi: Vec<f64> = (0..cfg.dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let z = jump_driver(&jumps, &continuous)?;
        let dec = solve_decorated_ode(&vf, &xi, &linear_lift(&z), 1.0, &cfg.solve)?;
        let mar = solve_marcus(&vf, &xi, &jumps, &continuous, &cfg.solve)?;
        Ok(MarcusCase {
            case: i,
            jumps: jumps.len(),
            sup: sup_dist(dec.path.skeleton(), &mar.path)?,
        })
    })
}

pub fn marcus_check(cfg: &MarcusCheckConfig, seed: u64, exec: Exec) -> Result<Output> {
    let cases = marcus_cases(cfg, seed, exec)?;
    let max_sup = cases.iter().map(|c| c.sup).fold(0.0, f64::max);
    let nonmarcus = [Shape::Quadratic, Shape::Butterfly]
        .iter()
        .map(|&shape| nonmarcus_case(shape, cfg.samples, &cfg.solve))
        .collect::<Result<Vec<_>>>()?;
    let mut csv = String::from("case,jumps,sup\n");
    for c in &cases {
        csv += &format!("{},{},{}\n", c.case, c.jumps, sig(c.sup));
    }
    let mut report = format!("{} random cases, max sup distance {:.3e}\n", cases.len(), max_sup);
    for c in &nonmarcus {
        report += &format!(
            "{:<10} decorated X²(1) = {:.9}, Marcus {:.9}, endpoint gap {:.4}, excursion gap {:.4}\n",
            c.shape.name(),
            c.decorated,
            c.marcus,
            (c.decorated - c.marcus).abs(),
            c.excursion_gap
        );
    }
    let summary = MarcusSummary {
        cases,
        max_sup,
        nonmarcus,
    };
    Ok(Output {
        summary: serde_json::to_value(&summary).map_err(|e| Error::Parse(e.to_string()))?,
        report,
        artifacts: vec![artifact("cases.csv", csv)],
    })
}

// ---------------------------------------------------------------- metrics

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    /// Random pairs for the decorated-metric checks.
    pub pairs: usize,
    /// Random instances for the p-variation checks.
    pub instances: usize,
    pub max_points: usize,
    pub delta: f64,
    pub resolution: usize,
    /// Lattice size of the split check, which evaluates three distances.
    pub split_resolution: usize,
    /// Lattice size of the σ_{p-var} interpolation check.
    pub sigma_resolution: usize,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            pairs: 500,
            instances: 200,
            max_points: 6,
            delta: 1e-6,
            resolution: 1 << 20,
            split_resolution: 1 << 18,
            sigma_resolution: 32,
        }
    }
}

/// Number of instances checked, failures, and the largest ratio of the
/// observed violation to the allowed tolerance (≤ 1 means pass).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub checked: usize,
    pub failed: usize,
    pub worst: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.failed == 0 && self.checked > 0
    }

    /// Folds per-instance slacks `lhs − rhs` (pass when ≤ 0).
    fn collect(name: &str, slacks: &[f64]) -> Self {
        Self {
            name: name.into(),
            checked: slacks.len(),
            failed: slacks.iter().filter(|s| !(**s <= 0.0)).count(),
            worst: slacks.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Random path on `[0, 1]` with `2..=max_points` points, coordinates in
/// `[−3, 3]` and random segment modes.
pub fn random_path(rng: &mut Rng, max_points: usize, dim: usize) -> Result<CadlagPath> {
    let n = rng.random_range(2..=max_points.max(2));
    let gaps: Vec<f64> = (0..n - 1).map(|_| rng.random_range(0.01..1.0)).collect();
    let total: f64 = gaps.iter().sum();
    let mut times = vec![0.0];
    let mut acc = 0.0;
    for g in &gaps[..n - 2] {
        acc += g / total;
        times.push(acc);
    }
    times.push(1.0);
    let values = (0..n * dim).map(|_| rng.random_range(-3.0..3.0)).collect();
    let modes = (0..n - 1)
        .map(|_| if rng.random_bool(0.5) { Mode::Linear } else { Mode::Step })
        .collect();
    CadlagPath::from_flat(dim, times, values, modes, None)
}

fn scalar_excursion(rng: &mut Rng) -> Result<CadlagPath> {
    let n = rng.random_range(1..6);
    let mut v = vec![rng.random_range(-2.0..2.0)];
    for _ in 0..n {
        v.push(v.last().unwrap() + rng.random_range(-1.0..1.0));
    }
    CadlagPath::scalar_linear((0..=n).map(|k| k as f64 / n as f64).collect(), v)
}

/// Checks on the decorated metric `α∞`: agreement with J1 on trivial
/// lifts, the split bound, the concentrated-excursion bound and
/// δ-stability.
pub fn alpha_checks(cfg: &MetricsConfig, seed: u64, exec: Exec) -> Result<Vec<CheckResult>> {
    let (delta, m) = (cfg.delta, cfg.resolution);
    let slacks: Vec<[f64; 4]> = try_map_indexed(cfg.pairs, exec, |i| -> Result<[f64; 4]> {
        let mut rng = stream(seed, i as u64);
        let h1 = random_path(&mut rng, cfg.max_points, 1)?;
        let h2 = random_path(&mut rng, cfg.max_points, 1)?;

        let a = alpha_inf(&trivial_lift(&h1), &trivial_lift(&h2), delta, m)?;
        let j = j1_dist(&h1, &h2, m)?.value;
        let lift = (a.value - j).abs() - (a.bias + 1e-9);

        let ms = cfg.split_resolution;
        let (p1, p2) = (linear_lift(&h1), linear_lift(&h2));
        let c = rng.random_range(0.05..0.95);
        let whole = alpha_inf(&p1, &p2, delta, ms)?;
        let (l1, r1) = p1.split_at(c)?;
        let (l2, r2) = p2.split_at(c)?;
        let left = alpha_inf(&l1, &l2, delta, ms)?;
        let right = alpha_inf(&r1, &r2, delta, ms)?;
        let tol = 2.0 * (whole.bias + left.bias) + 4.0 / ms as f64;
        let split = whole.value - left.value.max(right.value) - tol;

        let ex = scalar_excursion(&mut rng)?;
        let s0 = rng.random_range(-1.0..0.5);
        let len = rng.random_range(0.01..1.0);
        let sk = CadlagPath::scalar_step(vec![s0, s0 + len], vec![ex.first()[0], ex.last()[0]])?;
        let phi = DecoratedPath::new(
            sk,
            vec![Decoration {
                time: s0 + len,
                excursion: ex.clone(),
            }],
        )?;
        let stretched = ex.rescale_time(s0, s0 + len)?;
        let r = alpha_inf(&phi, &trivial_lift(&stretched), delta, m)?;
        let concentrated = r.value - (len + r.bias + 1e-9);

        let (d1, d2) = (rng.random_range(0.01..1.0), rng.random_range(0.01..1.0));
        let s1 = alpha_inf(&p1, &p2, d1, ms)?.value;
        let s2 = alpha_inf(&p1, &p2, d2, ms)?.value;
        let stability = (s2 - s1).abs() - (2.0 * (d2 - d1).abs() + 4.0 / ms as f64 + 1e-9);
        Ok([lift, split, concentrated, stability])
    })?;
    let col = |k: usize| slacks.iter().map(|s| s[k]).collect::<Vec<_>>();
    Ok(vec![
        CheckResult::collect("trivial lift matches J1", &col(0)),
        CheckResult::collect("split bound", &col(1)),
        CheckResult::collect("concentrated excursion bound", &col(2)),
        CheckResult::collect("delta stability", &col(3)),
    ])
}

/// `|·|_{p-var}` by enumerating every subsequence of the vertices that keeps
/// both ends.
pub fn pvar_exhaustive(points: &[Vec<f64>], p: f64) -> f64 {
    let n = points.len();
    if n < 2 {
        return 0.0;
    }
    let inner = n - 2;
    let mut best: f64 = 0.0;
    for mask in 0u64..(1 << inner) {
        let mut prev = 0;
        let mut sum: f64 = 0.0;
        for j in 1..n {
            if j == n - 1 || mask >> (j - 1) & 1 == 1 {
                let d = crate::path::dist(&points[j], &points[prev]);
                sum = if p.is_infinite() { sum.max(d) } else { sum + d.powf(p) };
                prev = j;
            }
        }
        best = best.max(sum);
    }
    if p.is_infinite() {
        best
    } else {
        best.powf(1.0 / p)
    }
}

/// Checks on p-variation: the dynamic programme against enumeration, the
/// interpolation inequality, and the interpolation bound for `σ_{p-var}`.
pub fn pvar_checks(cfg: &MetricsConfig, seed: u64, exec: Exec) -> Result<Vec<CheckResult>> {
    let rows: Vec<[f64; 4]> = try_map_indexed(cfg.instances, exec, |i| -> Result<[f64; 4]> {
        let mut rng = stream(seed ^ 0x5bd1_e995, i as u64);
        let dim = rng.random_range(1..=2);
        let h = loop {
            let h = random_path(&mut rng, 12, dim)?;
            if h.vertices().len() <= 12 {
                break h;
            }
        };
        let p = rng.random_range(1.0..3.0);
        let q = p + rng.random_range(0.0..3.0);
        let v = h.vertices();
        let exact = |r: f64| -> Result<f64> {
            let dp = pvar_points(&v, r)?;
            Ok(if dp == pvar_exhaustive(&v, r) { 0.0 } else { 1.0 })
        };
        let enumeration = exact(p)?.max(exact(f64::INFINITY)?);

        let lhs = p_variation(&h, q)?;
        let rhs = p_variation(&h, f64::INFINITY)?.powf(1.0 - p / q) * p_variation(&h, p)?.powf(p / q);
        let interp = lhs - rhs * (1.0 + 1e-12);

        let h1 = random_path(&mut rng, cfg.max_points, 1)?;
        let h2 = random_path(&mut rng, cfg.max_points, 1)?;
        let p = rng.random_range(1.0..2.0);
        let q = p + rng.random_range(0.0..2.0);
        let sq = sigma_pvar(&h1, &h2, q, cfg.sigma_resolution)?.value;
        let sinf = sigma_pvar(&h1, &h2, f64::INFINITY, cfg.sigma_resolution)?;
        let k = (p_variation(&h1, p)? + p_variation(&h2, p)?).powf(p / q);
        let rhs = (1.0 + k) * (sinf.value.powf(1.0 - p / q) + sinf.value);
        let sigma = (sq - (rhs * (1.0 + 1e-9) + 1e-12)).max(sinf.value - 3.0 * sinf.j1_cost * (1.0 + 1e-12));
        Ok([enumeration, interp, sigma, 0.0])
    })?;
    let col = |k: usize| rows.iter().map(|s| s[k]).collect::<Vec<_>>();
    Ok(vec![
        CheckResult::collect("dynamic programme equals enumeration", &col(0)),
        CheckResult::collect("interpolation inequality", &col(1)),
        CheckResult::collect("sigma interpolation bound", &col(2)),
    ])
}

pub fn metrics_suite(cfg: &MetricsConfig, seed: u64, exec: Exec) -> Result<Output> {
    let mut checks = alpha_checks(cfg, seed, exec)?;
    checks.extend(pvar_checks(cfg, seed, exec)?);
    let mut report = String::new();
    for c in &checks {
        report += &format!(
            "{:<40} {:>5} checked {:>3} failed  worst slack {:+.3e}  {}\n",
            c.name,
            c.checked,
            c.failed,
            c.worst,
            if c.passed() { "ok" } else { "FAIL" }
        );
    }
    Ok(Output {
        summary: json!({ "checks": checks }),
        report,
        artifacts: vec![],
    })
}

// ---------------------------------------------------------------- tails

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailsConfig {
    pub driver: DriverSpec,
    #[serde(default = "default_tail_n")]
    pub n: usize,
    #[serde(default = "default_burn")]
    pub burn_in: usize,
    #[serde(default)]
    pub options: TailOptions,
    /// Depth thresholds for profile estimates.
    #[serde(default)]
    pub thresholds: Vec<u64>,
}

fn default_tail_n() -> usize {
    1_000_000
}

fn default_burn() -> usize {
    crate::fastslow::DEFAULT_BURN_IN
}

pub fn tails(cfg: &TailsConfig, seed: u64) -> Result<Output> {
    let driver = Driver::new(&cfg.driver)?;
    let mut rng = stream(seed, 0);
    let (series, rs) = driver.observe_with_returns(cfg.n, cfg.burn_in, &mut rng)?;
    let tail = return_stats(&rs, &cfg.options)?;
    let mut report = format!("{} returns over {} steps, α = {}\n", tail.returns, cfg.n, driver.alpha());
    for s in &tail.sections {
        report += &format!(
            "section {}: {} returns, Hill α̂ = {:.4} from k = {}\n",
            s.label, s.count, s.hill.alpha, s.hill.k
        );
    }
    for c in &tail.clustering {
        report += &format!(
            "block {:>6}: P(two maxima > u) = {:.3e}, independent {:.3e}\n",
            c.n, c.joint, c.reference
        );
    }
    let mut profiles = Vec::new();
    let mut artifacts = Vec::new();
    for &t in &cfg.thresholds {
        match extract_profiles(&series, &rs, t, 101) {
            Ok(est) => {
                for p in est {
                    let mut csv = String::from("s");
                    (1..=series.dim()).for_each(|i| csv += &format!(",v{i}"));
                    csv.push('\n');
                    for (s, v) in p.grid.iter().zip(&p.median) {
                        csv += &sig(*s);
                        v.iter().for_each(|x| csv += &format!(",{}", sig(*x)));
                        csv.push('\n');
                    }
                    report += &format!(
                        "profile section {} threshold {}: {} excursions, residual {:.4}\n",
                        p.label, t, p.count, p.residual
                    );
                    artifacts.push(artifact(&format!("profile_{}_{t}.csv", p.label), csv));
                    profiles.push(json!({
                        "label": p.label, "threshold": t, "count": p.count,
                        "residual": p.residual, "mean_endpoint": p.mean_endpoint,
                    }));
                }
            }
            Err(e) => report += &format!("threshold {t}: {e}\n"),
        }
    }
    Ok(Output {
        summary: json!({ "alpha": driver.alpha(), "tails": tail, "profiles": profiles }),
        report,
        artifacts,
    })
}

// ---------------------------------------------------------------- fast-slow

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TightnessConfig {
    pub ns: Vec<usize>,
    /// `p = α + p_offset`.
    #[serde(default = "default_p_offset")]
    pub p_offset: f64,
    #[serde(default = "default_q")]
    pub q: f64,
    pub m: usize,
    #[serde(default = "default_z")]
    pub z: f64,
}

fn default_p_offset() -> f64 {
    0.3
}

fn default_q() -> f64 {
    0.95
}

fn default_z() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FastslowConfig {
    pub driver: DriverSpec,
    pub field: FieldSpec,
    pub ensemble: EnsembleConfig,
    #[serde(default = "default_limits")]
    pub limits: Vec<LimitKind>,
    #[serde(default)]
    pub functional: Functional,
    #[serde(default)]
    pub solve: SolveConfig,
    /// Depth threshold for estimating the billiard limit law.
    #[serde(default = "default_estimate_threshold")]
    pub estimate_threshold: u64,
    /// Orbit length for that estimate.
    #[serde(default = "default_estimate_n")]
    pub estimate_n: usize,
    #[serde(default)]
    pub tightness: Option<TightnessConfig>,
}

fn default_limits() -> Vec<LimitKind> {
    vec![LimitKind::Decorated]
}

fn default_estimate_threshold() -> u64 {
    20
}

fn default_estimate_n() -> usize {
    1_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tightness {
    pub p: f64,
    pub points: Vec<QuantileEstimate>,
    pub non_increasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FastslowSummary {
    pub alpha: f64,
    pub law: LimitLaw,
    pub comparisons: Vec<(LimitKind, QuantileReport)>,
    pub tightness: Option<Tightness>,
}

fn endpoints_csv(x: &[Vec<f64>]) -> String {
    let d = x.first().map_or(0, Vec::len);
    let mut s = (1..=d).map(|i| format!("x{i}")).collect::<Vec<_>>().join(",");
    s.push('\n');
    for row in x {
        s += &row.iter().map(|v| sig(*v)).collect::<Vec<_>>().join(",");
        s.push('\n');
    }
    s
}

pub fn limit_law(driver: &Driver, cfg: &FastslowConfig, seed: u64) -> Result<LimitLaw> {
    match driver.limit(cfg.ensemble.k) {
        Ok(law) => Ok(law),
        Err(_) => {
            let mut rng = stream(seed ^ 0xa076_1d64_78bd_642f, 0);
            let (series, rs) = driver.observe_with_returns(cfg.estimate_n, cfg.ensemble.burn_in, &mut rng)?;
            LimitLaw::estimate(&series, &rs, cfg.estimate_threshold, driver.alpha(), cfg.ensemble.k)
        }
    }
}

pub fn tightness(driver: &Driver, t: &TightnessConfig, seed: u64, exec: Exec) -> Result<Tightness> {
    let p = driver.alpha() + t.p_offset;
    let points = pvar_quantiles(driver, &t.ns, p, t.q, t.m, seed, exec)?;
    let ok = non_increasing(&points, t.z);
    Ok(Tightness {
        p,
        points,
        non_increasing: ok,
    })
}

pub fn fastslow_compare(cfg: &FastslowConfig, seed: u64, exec: Exec) -> Result<Output> {
    let driver = Driver::new(&cfg.driver)?;
    let vf = cfg.field.build()?;
    let ens = EnsembleConfig {
        seed,
        ..cfg.ensemble.clone()
    };
    let law = limit_law(&driver, cfg, seed)?;
    let dynamics = dynamics_endpoints(&driver, &vf, &ens, exec)?;
    let mut artifacts = vec![artifact("dynamics_endpoints.csv", endpoints_csv(&dynamics))];
    let mut report = format!("α = {}, n = {}, M = {}\n", driver.alpha(), ens.n, ens.m);
    let mut comparisons = Vec::new();
    for &kind in &cfg.limits {
        let limit = limit_endpoints(&law, &vf, &ens, kind, &cfg.solve, exec)?;
        let r = ensemble_compare(&dynamics, &limit, cfg.functional)?;
        let name = match kind {
            LimitKind::Decorated => "decorated",
            LimitKind::Marcus => "marcus",
        };
        report += &format!("{name} limit: max decile gap {:.4}, KS {:.4}\n{}", r.max_gap, r.ks, r.to_table());
        artifacts.push(artifact(&format!("limit_{name}_endpoints.csv"), endpoints_csv(&limit)));
        comparisons.push((kind, r));
    }
    let tight = cfg
        .tightness
        .as_ref()
        .map(|t| tightness(&driver, t, seed.wrapping_add(1 << 32), exec))
        .transpose()?;
    if let Some(t) = &tight {
        let mut csv = String::from("n,quantile,se\n");
        report += &format!("p = {:.3}:", t.p);
        for q in &t.points {
            csv += &format!("{},{},{}\n", q.n, sig(q.value), sig(q.se));
            report += &format!("  n = {} → {:.4} ± {:.4}", q.n, q.value, q.se);
        }
        report += &format!("\nnon-increasing: {}\n", t.non_increasing);
        artifacts.push(artifact("tightness.csv", csv));
    }
    let summary = FastslowSummary {
        alpha: driver.alpha(),
        law,
        comparisons,
        tightness: tight,
    };
    Ok(Output {
        summary: serde_json::to_value(&summary).map_err(|e| Error::Parse(e.to_string()))?,
        report,
        artifacts,
    })
}
