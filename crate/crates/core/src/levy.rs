//! α-stable Lévy skeletons with spectral measure on the coordinate axes and
//! their decoration by profiles.
//!
//! The Lévy measure is `α r^{−1−α} dr ν(dω)` with `ν = Σ c_i δ_{ω_i}`,
//! which gives the characteristic exponent of [`stable_char_fn`] for the
//! centred process. The `K` largest jumps on `[0, T]` are the LePage points
//! `(Γ_k/T)^{−1/α}`; given `Γ_K` the remaining jumps form a Poisson process
//! below `r_K`, whose compensated sum is replaced by a Brownian motion of
//! matching covariance. The kept jumps are compensated at level `r_K`.

use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::decorated::{Decoration, DecoratedPath};
use crate::error::{Error, Result};
use crate::path::{CadlagPath, Mode};

fn default_horizon() -> f64 {
    1.0
}

fn default_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StableSpec {
    pub alpha: f64,
    pub weights: Vec<f64>,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(rename = "K")]
    pub k: usize,
    /// `R̄`: the marginal at time 1 is `R̄^{−1/α} G_α`.
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default)]
    pub seed: u64,
}

impl StableSpec {
    pub fn new(alpha: f64, weights: Vec<f64>, k: usize) -> Result<Self> {
        let s = Self {
            alpha,
            weights,
            horizon: 1.0,
            k,
            scale: 1.0,
            seed: 0,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 1.0 && self.alpha < 2.0) {
            return Err(Error::Parameter(format!("α must lie in (1, 2), got {}", self.alpha)));
        }
        if self.weights.is_empty() || self.weights.iter().any(|&c| !(c > 0.0)) {
            return Err(Error::Parameter("axis weights must be positive".into()));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Parameter(format!("axis weights sum to {total}, expected 1")));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Parameter("horizon must be positive".into()));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::Parameter("scale must be positive".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    fn factor(&self) -> f64 {
        self.scale.powf(-1.0 / self.alpha)
    }
}

/// `E exp(i s·G)` for the law at time 1.
pub fn stable_char_fn(spec: &StableSpec, s: &[f64]) -> Result<Complex64> {
    spec.validate()?;
    if s.len() != spec.dim() {
        return Err(Error::Shape(format!("argument of dimension {}, spec has {}", s.len(), spec.dim())));
    }
    let a = spec.alpha;
    let k = (std::f64::consts::FRAC_PI_2 * a).cos() * gamma(1.0 - a);
    let t = (std::f64::consts::FRAC_PI_2 * a).tan();
    let f = spec.factor();
    let mut expo = Complex64::new(0.0, 0.0);
    for (c, si) in spec.weights.iter().zip(s) {
        let u = si * f;
        if u == 0.0 {
            continue;
        }
        expo -= c * u.abs().powf(a) * k * Complex64::new(1.0, -u.signum() * t);
    }
    Ok(expo.exp())
}

/// Kept jumps of one draw, ordered by decreasing magnitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevyJump {
    pub time: f64,
    pub axis: usize,
    pub size: f64,
}

#[derive(Debug, Clone)]
pub struct LevyDraw {
    pub jumps: Vec<LevyJump>,
    /// Drift per unit time compensating the kept jumps.
    pub drift: Vec<f64>,
    /// Variance per unit time of the Brownian stand-in for small jumps.
    pub variance: Vec<f64>,
}

fn draw<R: Rng + ?Sized>(spec: &StableSpec, rng: &mut R) -> Result<LevyDraw> {
    spec.validate()?;
    let (a, tt, f) = (spec.alpha, spec.horizon, spec.factor());
    let axes = WeightedIndex::new(&spec.weights).map_err(|e| Error::Parameter(e.to_string()))?;
    let mut g = 0.0;
    let mut jumps = Vec::with_capacity(spec.k);
    for _ in 0..spec.k {
        g += rng.sample::<f64, _>(Exp1);
        jumps.push(LevyJump {
            time: 0.0,
            axis: axes.sample(rng),
            size: f * (g / tt).powf(-1.0 / a),
        });
    }
    for j in jumps.iter_mut() {
        j.time = loop {
            let t = tt * rng.random::<f64>();
            if t > 0.0 {
                break t;
            }
        };
    }
    let e = spec.dim();
    let (drift, variance) = if spec.k == 0 {
        (vec![0.0; e], vec![0.0; e])
    } else {
        let r = (g / tt).powf(-1.0 / a);
        let m = a / (a - 1.0) * r.powf(1.0 - a) * f;
        let v = a / (2.0 - a) * r.powf(2.0 - a) * f * f;
        (
            spec.weights.iter().map(|c| -c * m).collect(),
            spec.weights.iter().map(|c| c * v).collect(),
        )
    };
    Ok(LevyDraw {
        jumps,
        drift,
        variance,
    })
}

/// The value at the horizon without building the path.
pub fn sample_marginal<R: Rng + ?Sized>(spec: &StableSpec, rng: &mut R) -> Result<Vec<f64>> {
    let d = draw(spec, rng)?;
    let tt = spec.horizon;
    let mut x: Vec<f64> = d
        .drift
        .iter()
        .zip(&d.variance)
        .map(|(m, v)| m * tt + (v * tt).sqrt() * rng.sample::<f64, _>(StandardNormal))
        .collect();
    for j in &d.jumps {
        x[j.axis] += j.size;
    }
    Ok(x)
}

/// Skeleton on `[0, T]` in `ℝ^e`: axis jumps at uniform times plus linear
/// drift and Gaussian increments between jump times.
pub fn sample_stable_skeleton<R: Rng + ?Sized>(spec: &StableSpec, rng: &mut R) -> Result<(CadlagPath, LevyDraw)> {
    let d = draw(spec, rng)?;
    let e = spec.dim();
    let tt = spec.horizon;
    let mut order: Vec<usize> = (0..d.jumps.len()).collect();
    order.sort_by(|&i, &j| d.jumps[i].time.total_cmp(&d.jumps[j].time));
    if order.windows(2).any(|w| d.jumps[w[0]].time == d.jumps[w[1]].time) || d.jumps.iter().any(|j| j.time >= tt) {
        return Err(Error::Contract("coincident jump times".into()));
    }
    let mut times = vec![0.0];
    times.extend(order.iter().map(|&i| d.jumps[i].time));
    times.push(tt);
    let n = times.len();
    let mut values = Vec::with_capacity(n * e);
    let mut ends = Vec::with_capacity((n - 1) * e);
    let mut x = vec![0.0; e];
    values.extend_from_slice(&x);
    for s in 0..n - 1 {
        let dt = times[s + 1] - times[s];
        for i in 0..e {
            x[i] += d.drift[i] * dt + (d.variance[i] * dt).sqrt() * rng.sample::<f64, _>(StandardNormal);
        }
        ends.extend_from_slice(&x);
        if s + 2 < n {
            let j = &d.jumps[order[s]];
            x[j.axis] += j.size;
        }
        values.extend_from_slice(&x);
    }
    let path = CadlagPath::from_flat(e, times, values, vec![Mode::Linear; n - 1], Some(ends))?;
    Ok((path, d))
}

/// Profiles `P_1..P_e` on `[0, 1]` with `P_i(0) = 0` and the matrix `Γ`
/// of their endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<CadlagPath>", into = "Vec<CadlagPath>")]
pub struct ProfileSet {
    profiles: Vec<CadlagPath>,
    gamma: Vec<f64>,
}

impl TryFrom<Vec<CadlagPath>> for ProfileSet {
    type Error = Error;

    fn try_from(p: Vec<CadlagPath>) -> Result<Self> {
        ProfileSet::new(p)
    }
}

impl From<ProfileSet> for Vec<CadlagPath> {
    fn from(p: ProfileSet) -> Self {
        p.profiles
    }
}

impl ProfileSet {
    pub fn new(profiles: Vec<CadlagPath>) -> Result<Self> {
        let Some(first) = profiles.first() else {
            return Err(Error::Shape("empty profile set".into()));
        };
        let d = first.dim();
        for (i, p) in profiles.iter().enumerate() {
            if p.dim() != d || p.domain() != (0.0, 1.0) {
                return Err(Error::Shape(format!("profile {i} must be an ℝ^{d} path on [0, 1]")));
            }
            if p.first().iter().any(|&v| v != 0.0) {
                return Err(Error::Contract(format!("profile {i} does not start at 0")));
            }
            if !p.is_continuous() || p.modes().iter().any(|&m| m != Mode::Linear) {
                return Err(Error::Contract(format!("profile {i} must be continuous and piecewise linear")));
            }
        }
        let e = profiles.len();
        let mut gamma = vec![0.0; d * e];
        for (i, p) in profiles.iter().enumerate() {
            for r in 0..d {
                gamma[r * e + i] = p.last()[r];
            }
        }
        Ok(Self { profiles, gamma })
    }

    /// Straight profiles `P_i(s) = s γ_i` for the columns of `Γ`.
    pub fn linear(gamma: &[f64], d: usize) -> Result<Self> {
        if d == 0 || gamma.len() % d != 0 {
            return Err(Error::Shape("Γ must have d rows".into()));
        }
        let e = gamma.len() / d;
        let profiles = (0..e)
            .map(|i| {
                let col: Vec<f64> = (0..d).map(|r| gamma[r * e + i]).collect();
                CadlagPath::linear(vec![0.0, 1.0], vec![vec![0.0; d], col])
            })
            .collect::<Result<_>>()?;
        Self::new(profiles)
    }

    pub fn profiles(&self) -> &[CadlagPath] {
        &self.profiles
    }

    /// `Γ`, row-major `d × e`.
    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn out_dim(&self) -> usize {
        self.profiles[0].dim()
    }
}

/// `L^P(t)(s) = ΓL(t⁻) + |ΔL| P_i(s)` at each jump along `ω_i`.
pub fn decorate_levy(skeleton: &CadlagPath, ps: &ProfileSet) -> Result<DecoratedPath> {
    let e = ps.profiles.len();
    if skeleton.dim() != e {
        return Err(Error::Shape(format!(
            "skeleton in ℝ^{} for {e} profiles",
            skeleton.dim()
        )));
    }
    let d = ps.out_dim();
    let out = skeleton.matrix_apply(&ps.gamma, d)?;
    let mut decorations = Vec::new();
    for k in skeleton.jump_indices() {
        let jump = skeleton.jump_at(k);
        let nz: Vec<usize> = (0..e).filter(|&i| jump[i] != 0.0).collect();
        if nz.len() != 1 || jump[nz[0]] < 0.0 {
            return Err(Error::Contract(format!(
                "jump {jump:?} at {} is not along a coordinate axis",
                skeleton.times()[k]
            )));
        }
        let (i, lam) = (nz[0], jump[nz[0]]);
        let base = out.end(k - 1).to_vec();
        let excursion = ps.profiles[i].map_points(d, |p| base.iter().zip(p).map(|(b, q)| b + lam * q).collect())?;
        decorations.push(Decoration {
            time: skeleton.times()[k],
            excursion,
        });
    }
    DecoratedPath::new(out, decorations)
}
