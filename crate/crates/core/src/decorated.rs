//! Decorated càdlàg paths and their δ-extensions.
//!
//! A [`DecoratedPath`] is a skeleton `t ↦ φ(t)(1)` together with finitely
//! many decorations: at time `t_j` the excursion `φ(t_j) ∈ D[0,1]` records how
//! the path travels from the left limit to the new value. The δ-extension
//! inserts a fictitious interval of length `ℓ_j` after each decoration time
//! and plays the excursion there, producing an ordinary càdlàg path on
//! `[a, b + δ]` on which the Skorokhod metrics are evaluated.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frechet::j1_dist;
use crate::path::{dist, norm, CadlagPath, Mode, TimeChange};
use crate::pvar::p_variation;
use crate::warp::sigma_pvar;

/// Largest decoration count that still uses dyadic interval weights.
pub const DYADIC_LIMIT: usize = 24;

/// Number of uniform points added by [`canonical_excursion`].
pub const CANONICAL_POINTS: usize = 257;

const ENDPOINT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Decoration {
    #[serde(rename = "t")]
    pub time: f64,
    pub excursion: CadlagPath,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DecoratedRepr", into = "DecoratedRepr")]
pub struct DecoratedPath {
    skeleton: CadlagPath,
    decorations: Vec<Decoration>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DecoratedRepr {
    skeleton: CadlagPath,
    decorations: Vec<Decoration>,
}

impl From<DecoratedPath> for DecoratedRepr {
    fn from(d: DecoratedPath) -> Self {
        DecoratedRepr {
            skeleton: d.skeleton,
            decorations: d.decorations,
        }
    }
}

impl TryFrom<DecoratedRepr> for DecoratedPath {
    type Error = Error;

    fn try_from(r: DecoratedRepr) -> Result<Self> {
        DecoratedPath::new(r.skeleton, r.decorations)
    }
}

impl DecoratedPath {
    /// Checks ordering, domains and the endpoint identity
    /// `excursion(1) = skeleton(t_j)`.
    pub fn new(skeleton: CadlagPath, decorations: Vec<Decoration>) -> Result<Self> {
        let (a, b) = skeleton.domain();
        let scale = 1.0 + skeleton.flat_values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (k, d) in decorations.iter().enumerate() {
            if !(a..=b).contains(&d.time) {
                return Err(Error::Domain { t: d.time, a, b });
            }
            if k > 0 && d.time <= decorations[k - 1].time {
                return Err(Error::Contract("decoration times must be strictly increasing".into()));
            }
            if d.excursion.domain() != (0.0, 1.0) {
                return Err(Error::Shape(format!(
                    "excursion at {} lives on {:?}, expected [0, 1]",
                    d.time,
                    d.excursion.domain()
                )));
            }
            if d.excursion.dim() != skeleton.dim() {
                return Err(Error::Shape(format!(
                    "excursion at {} has dimension {}, skeleton has {}",
                    d.time,
                    d.excursion.dim(),
                    skeleton.dim()
                )));
            }
            let gap = dist(d.excursion.last(), &skeleton.eval(d.time)?);
            if gap > ENDPOINT_TOL * scale {
                return Err(Error::Contract(format!(
                    "excursion at {} ends {gap} away from the skeleton value",
                    d.time
                )));
            }
        }
        Ok(Self {
            skeleton,
            decorations,
        })
    }

    pub fn skeleton(&self) -> &CadlagPath {
        &self.skeleton
    }

    pub fn decorations(&self) -> &[Decoration] {
        &self.decorations
    }

    pub fn dim(&self) -> usize {
        self.skeleton.dim()
    }

    pub fn domain(&self) -> (f64, f64) {
        self.skeleton.domain()
    }

    /// Decorations whose excursion does not start at the skeleton's left
    /// limit.
    pub fn endpoint_discontinuous(&self) -> Vec<usize> {
        let a = self.domain().0;
        self.decorations
            .iter()
            .enumerate()
            .filter(|(_, d)| {
                d.time > a
                    && self
                        .skeleton
                        .left_limit(d.time)
                        .map(|l| dist(&l, d.excursion.first()) > ENDPOINT_TOL * (1.0 + norm(&l)))
                        .unwrap_or(true)
            })
            .map(|(k, _)| k)
            .collect()
    }

    /// Replaces every excursion by its arc-length canonical form.
    pub fn canonical(&self) -> Result<Self> {
        let decorations = self
            .decorations
            .iter()
            .map(|d| {
                Ok(Decoration {
                    time: d.time,
                    excursion: canonical_excursion(&d.excursion)?,
                })
            })
            .collect::<Result<_>>()?;
        Self::new(self.skeleton.clone(), decorations)
    }

    /// Pieces on `[a, c]` (decorations at times `≤ c`) and on `[c, b]`
    /// (decorations at times `> c`).
    pub fn split_at(&self, c: f64) -> Result<(Self, Self)> {
        let (a, b) = self.domain();
        if !(c > a && c < b) {
            return Err(Error::Parameter(format!("split point {c} not inside ({a}, {b})")));
        }
        let left = self.skeleton.restrict(a, c)?;
        let right = self.skeleton.restrict(c, b)?;
        let (dl, dr): (Vec<_>, Vec<_>) = self.decorations.iter().cloned().partition(|d| d.time <= c);
        Ok((Self::new(left, dl)?, Self::new(right, dr)?))
    }
}

/// One step excursion per jump, `s ↦ h(t⁻)` for `s < 1` and `h(t)` at 1.
pub fn trivial_lift(h: &CadlagPath) -> DecoratedPath {
    lift(h, Mode::Step)
}

/// One linear excursion per jump from `h(t⁻)` to `h(t)`.
pub fn linear_lift(h: &CadlagPath) -> DecoratedPath {
    lift(h, Mode::Linear)
}

fn lift(h: &CadlagPath, mode: Mode) -> DecoratedPath {
    let decorations = h
        .jump_indices()
        .into_iter()
        .map(|k| Decoration {
            time: h.times()[k],
            excursion: CadlagPath::new(
                vec![0.0, 1.0],
                vec![h.end(k - 1).to_vec(), h.value(k).to_vec()],
                vec![mode],
            )
            .expect("two-point excursion is valid"),
        })
        .collect();
    DecoratedPath {
        skeleton: h.clone(),
        decorations,
    }
}

/// Reparametrises an excursion proportionally to arc length and refines it
/// with a uniform grid. Step pieces, which have no length, get a small
/// share of parameter time so the map stays strictly increasing.
pub fn canonical_excursion(ex: &CadlagPath) -> Result<CadlagPath> {
    let n = ex.len();
    let mut cum = vec![0.0; n];
    for k in 0..ex.segments() {
        cum[k + 1] = cum[k] + dist(ex.value(k), ex.end(k));
    }
    let total = cum[n - 1];
    let eta = if total > 0.0 { 1e-3 * total } else { 1.0 };
    let (a, b) = ex.domain();
    let u: Vec<f64> = (0..n)
        .map(|k| {
            if k == 0 {
                0.0
            } else if k + 1 == n {
                1.0
            } else {
                (cum[k] + eta * (ex.times()[k] - a) / (b - a)) / (total + eta)
            }
        })
        .collect();
    let rho = TimeChange::new(u, ex.times().to_vec())?;
    let out = ex.compose(&rho)?;
    let grid: Vec<f64> = (1..CANONICAL_POINTS - 1)
        .map(|k| k as f64 / (CANONICAL_POINTS - 1) as f64)
        .collect();
    out.insert_times(&grid)
}

/// Fictitious interval `[u0, u1]` carrying decoration `index`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FictitiousInterval {
    pub index: usize,
    pub t: f64,
    pub u0: f64,
    pub u1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extension {
    extended: CadlagPath,
    delta: f64,
    base: (f64, f64),
    tau_inv: Vec<f64>,
    ledger: Vec<FictitiousInterval>,
}

/// Lengths of the fictitious intervals, summing to `δ`.
pub fn interval_lengths(kappa: usize, delta: f64) -> Vec<f64> {
    if kappa == 0 {
        return Vec::new();
    }
    if kappa <= DYADIC_LIMIT {
        let r: f64 = (1..=kappa).map(|j| 0.5f64.powi(j as i32)).sum();
        (1..=kappa).map(|j| delta * 0.5f64.powi(j as i32) / r).collect()
    } else {
        vec![delta / kappa as f64; kappa]
    }
}

pub fn delta_extension(phi: &DecoratedPath, delta: f64) -> Result<Extension> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Parameter(format!("δ must be positive, got {delta}")));
    }
    let (a, b) = phi.domain();
    let dtimes: Vec<f64> = phi.decorations.iter().map(|d| d.time).collect();
    let sk = phi.skeleton.insert_times(&dtimes)?;
    let lens = interval_lengths(dtimes.len(), delta);
    let dim = sk.dim();

    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut modes = Vec::new();
    let mut ends = Vec::new();
    let mut tau_inv = Vec::new();
    let mut ledger = Vec::new();
    let mut shift = 0.0;
    let mut next = 0usize;

    let mut push_excursion = |j: usize,
                              shift: &mut f64,
                              times: &mut Vec<f64>,
                              values: &mut Vec<f64>,
                              modes: &mut Vec<Mode>,
                              ends: &mut Vec<f64>,
                              tau_inv: &mut Vec<f64>| {
        let d = &phi.decorations[j];
        let u0 = d.time + *shift;
        let len = lens[j];
        let ex = &d.excursion;
        for k in 0..ex.segments() {
            let s = ex.times()[k];
            times.push(if k == 0 { u0 } else { u0 + len * s });
            values.extend_from_slice(ex.value(k));
            modes.push(ex.mode(k));
            ends.extend_from_slice(ex.end(k));
            tau_inv.push(d.time);
        }
        *shift += len;
        ledger.push(FictitiousInterval {
            index: j + 1,
            t: d.time,
            u0,
            u1: d.time + *shift,
        });
    };

    for k in 0..sk.len() {
        let t = sk.times()[k];
        if next < dtimes.len() && dtimes[next] == t {
            push_excursion(
                next,
                &mut shift,
                &mut times,
                &mut values,
                &mut modes,
                &mut ends,
                &mut tau_inv,
            );
            next += 1;
        }
        times.push(t + shift);
        values.extend_from_slice(sk.value(k));
        tau_inv.push(t);
        if k + 1 < sk.len() {
            modes.push(sk.mode(k));
            ends.extend_from_slice(sk.end(k));
        }
    }
    if dtimes.is_empty() {
        times.push(b + delta);
        values.extend_from_slice(sk.last());
        modes.push(Mode::Step);
        ends.extend_from_slice(sk.last());
        tau_inv.push(b);
    } else {
        // the shifted end must land exactly on b + δ
        let n = times.len();
        times[n - 1] = b + delta;
        for iv in ledger.iter_mut() {
            if iv.u1 > b + delta || (iv.t == b) {
                iv.u1 = b + delta;
            }
        }
    }
    let extended = CadlagPath::from_flat(dim, times, values, modes, Some(ends))?;
    Ok(Extension {
        extended,
        delta,
        base: (a, b),
        tau_inv,
        ledger,
    })
}

impl Extension {
    pub fn extended(&self) -> &CadlagPath {
        &self.extended
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn base(&self) -> (f64, f64) {
        self.base
    }

    pub fn ledger(&self) -> &[FictitiousInterval] {
        &self.ledger
    }

    /// `τ_δ^{-1}` at every grid point of the extended path.
    pub fn tau_inv_grid(&self) -> &[f64] {
        &self.tau_inv
    }

    /// `τ_δ(t) = t + Σ_{t_j ≤ t} ℓ_j`.
    pub fn tau(&self, t: f64) -> f64 {
        t + self
            .ledger
            .iter()
            .filter(|iv| iv.t <= t)
            .map(|iv| iv.u1 - iv.u0)
            .sum::<f64>()
    }

    /// Continuous left inverse of `τ_δ`, constant on fictitious intervals.
    pub fn tau_inv(&self, u: f64) -> f64 {
        let (a, b) = self.base;
        let mut t = u;
        for iv in &self.ledger {
            if u >= iv.u1 {
                t -= iv.u1 - iv.u0;
            } else if u > iv.u0 {
                return iv.t;
            }
        }
        t.clamp(a, b)
    }

    /// Same grid, ledger and time maps with another path on the extended
    /// grid, such as an ODE solution driven by the extension.
    pub fn with_path(&self, path: CadlagPath) -> Result<Self> {
        if path.times() != self.extended.times() {
            return Err(Error::Contract("path grid differs from the extension grid".into()));
        }
        Ok(Self {
            extended: path,
            delta: self.delta,
            base: self.base,
            tau_inv: self.tau_inv.clone(),
            ledger: self.ledger.clone(),
        })
    }

    /// Rebuilds an extension from its parts.
    pub fn from_parts(
        extended: CadlagPath,
        delta: f64,
        base: (f64, f64),
        tau_inv: Vec<f64>,
        ledger: Vec<FictitiousInterval>,
    ) -> Result<Self> {
        if tau_inv.len() != extended.len() {
            return Err(Error::Contract("tau_inv must have one entry per grid point".into()));
        }
        if extended.domain() != (base.0, base.1 + delta) {
            return Err(Error::Contract("extended domain must be [a, b + δ]".into()));
        }
        let excess = ledger.iter().map(|iv| iv.u1 - iv.u0).sum::<f64>();
        if !ledger.is_empty() && (excess - delta).abs() > 1e-9 * (1.0 + delta) {
            return Err(Error::Contract("fictitious intervals do not add up to δ".into()));
        }
        if ledger.is_empty() && tau_inv.windows(2).filter(|w| w[0] == w[1]).count() > 1 {
            return Err(Error::Contract("extension has no interval ledger".into()));
        }
        Ok(Self {
            extended,
            delta,
            base,
            tau_inv,
            ledger,
        })
    }

    /// CSV with columns `u,x1..xd,tau_inv`.
    pub fn to_csv(&self) -> String {
        let d = self.extended.dim();
        let mut s = String::from("u");
        for i in 1..=d {
            s.push_str(&format!(",x{i}"));
        }
        s.push_str(",tau_inv\n");
        for k in 0..self.extended.len() {
            s.push_str(&format!("{:?}", self.extended.times()[k]));
            for v in self.extended.value(k) {
                s.push_str(&format!(",{v:?}"));
            }
            s.push_str(&format!(",{:?}\n", self.tau_inv[k]));
        }
        s
    }
}

/// Inverse of [`delta_extension`] up to equivalence.
pub fn collapse(ext: &Extension) -> Result<DecoratedPath> {
    let p = &ext.extended;
    let n = p.len();
    let dim = p.dim();
    let u = p.times();
    let inside = |x: f64| ext.ledger.iter().any(|iv| x >= iv.u0 && x < iv.u1);
    let mut times: Vec<f64> = Vec::new();
    let mut values = Vec::new();
    let mut modes = Vec::new();
    let mut ends = Vec::new();
    for k in 0..n {
        if inside(u[k]) {
            continue;
        }
        let t = ext.tau_inv[k];
        if times.last().is_some_and(|&last| t <= last) {
            continue;
        }
        times.push(t);
        values.extend_from_slice(p.value(k));
        if k + 1 < n {
            modes.push(p.mode(k));
            ends.extend_from_slice(p.end(k));
        }
    }
    // the κ = 0 tail leaves one surplus segment
    modes.truncate(times.len() - 1);
    ends.truncate((times.len() - 1) * dim);
    if times.len() < 2 {
        return Err(Error::Contract("collapsed skeleton has fewer than two points".into()));
    }
    let skeleton = CadlagPath::from_flat(dim, times, values, modes, Some(ends))?;
    let mut decorations = Vec::with_capacity(ext.ledger.len());
    for iv in &ext.ledger {
        let excursion = p.restrict(iv.u0, iv.u1)?.rescale_time(0.0, 1.0)?;
        decorations.push(Decoration {
            time: iv.t,
            excursion,
        });
    }
    DecoratedPath::new(skeleton, decorations)
}

/// A metric value with the certified δ-bias bound and the unwarped ceiling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaBound {
    pub value: f64,
    pub bias: f64,
    pub ceiling: f64,
}

fn check_pair(phi1: &DecoratedPath, phi2: &DecoratedPath) -> Result<()> {
    if phi1.domain() != phi2.domain() || phi1.dim() != phi2.dim() {
        return Err(Error::Shape("decorated paths differ in domain or dimension".into()));
    }
    Ok(())
}

/// `α∞` evaluated as the J1 distance of the δ-extensions.
pub fn alpha_inf(
    phi1: &DecoratedPath,
    phi2: &DecoratedPath,
    delta: f64,
    resolution: usize,
) -> Result<AlphaBound> {
    check_pair(phi1, phi2)?;
    let e1 = delta_extension(phi1, delta)?;
    let e2 = delta_extension(phi2, delta)?;
    let r = j1_dist(&e1.extended, &e2.extended, resolution)?;
    Ok(AlphaBound {
        value: r.value,
        bias: 2.0 * delta,
        ceiling: r.sup_dist,
    })
}

/// `α_{p-var}` evaluated as `σ_{p-var}` of the δ-extensions.
pub fn alpha_pvar(
    phi1: &DecoratedPath,
    phi2: &DecoratedPath,
    p: f64,
    delta: f64,
    resolution: usize,
) -> Result<AlphaBound> {
    check_pair(phi1, phi2)?;
    let e1 = delta_extension(phi1, delta)?;
    let e2 = delta_extension(phi2, delta)?;
    let r = sigma_pvar(&e1.extended, &e2.extended, p, resolution)?;
    Ok(AlphaBound {
        value: r.value,
        bias: 2.0 * delta,
        ceiling: r.j1_cost,
    })
}

/// `|φ|_{p-var}` as the p-variation of any δ-extension.
pub fn pvar_decorated(phi: &DecoratedPath, p: f64) -> Result<f64> {
    let (a, b) = phi.domain();
    p_variation(&delta_extension(phi, b - a)?.extended, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frechet::frechet_dist;
    use crate::path::tests::arb_path;
    use crate::path::sup_dist;
    use proptest::prelude::*;

    fn step_at(s: f64, h: f64) -> CadlagPath {
        CadlagPath::scalar_step(vec![0.0, s, 1.0], vec![0.0, h, h]).unwrap()
    }

    pub(crate) fn butterfly_loop() -> CadlagPath {
        CadlagPath::sample_linear(0.0, 1.0, 64, |s| {
            let a = 2.0 * std::f64::consts::PI * s;
            vec![a.sin() + s, (2.0 * a).sin() / 2.0 + s]
        })
        .unwrap()
    }

    #[test]
    fn lifts() {
        let c = CadlagPath::constant(0.0, 1.0, &[2.0]).unwrap();
        assert!(trivial_lift(&c).decorations().is_empty());
        let lin = CadlagPath::scalar_linear(vec![0.0, 1.0], vec![0.0, 3.0]).unwrap();
        assert_eq!(trivial_lift(&lin), linear_lift(&lin));
        let j = linear_lift(&step_at(0.5, 1.0));
        assert_eq!(j.decorations().len(), 1);
        let ex = &j.decorations()[0].excursion;
        assert_eq!(ex.eval(0.3).unwrap(), vec![0.3]);
        assert!(j.endpoint_discontinuous().is_empty());
        let i = trivial_lift(&step_at(0.5, 1.0));
        assert_eq!(i.decorations()[0].excursion.eval(0.99).unwrap(), vec![0.0]);
        assert_eq!(i.decorations()[0].excursion.eval(1.0).unwrap(), vec![1.0]);
    }

    #[test]
    fn endpoint_identity_enforced() {
        let sk = step_at(0.5, 1.0);
        let bad = CadlagPath::scalar_linear(vec![0.0, 1.0], vec![0.0, 2.0]).unwrap();
        let r = DecoratedPath::new(sk, vec![Decoration { time: 0.5, excursion: bad }]);
        assert!(matches!(r, Err(Error::Contract(_))));
    }

    #[test]
    fn extension_lengths_and_tail() {
        let phi = linear_lift(&step_at(0.5, 1.0));
        let e = delta_extension(&phi, 0.25).unwrap();
        assert_eq!(e.extended().domain(), (0.0, 1.25));
        let iv = e.ledger()[0];
        assert!((iv.u1 - iv.u0 - 0.25).abs() < 1e-15);
        assert_eq!(iv.u0, 0.5);
        assert!((e.extended().eval(0.625).unwrap()[0] - 0.5).abs() < 1e-15);
        assert_eq!(e.tau_inv(0.6), 0.5);
        assert!((e.tau_inv(1.0) - 0.75).abs() < 1e-15);
        assert!((e.tau_inv(e.tau(0.3)) - 0.3).abs() < 1e-15);
        assert!((e.tau_inv(e.tau(0.8)) - 0.8).abs() < 1e-15);
        assert!(delta_extension(&phi, 0.0).is_err());

        let c = trivial_lift(&CadlagPath::scalar_linear(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap());
        let e = delta_extension(&c, 0.1).unwrap();
        assert_eq!(e.extended().eval(1.05).unwrap(), vec![1.0]);
        assert_eq!(frechet_dist(e.extended(), c.skeleton()).unwrap(), 0.0);
    }

    #[test]
    fn many_decorations_use_uniform_lengths() {
        let l = interval_lengths(100, 0.5);
        assert!(l.iter().all(|&x| x == 0.005));
        let l = interval_lengths(3, 0.7);
        assert!((l.iter().sum::<f64>() - 0.7).abs() < 1e-15);
        assert!((l[0] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn collapse_round_trip() {
        let h = CadlagPath::scalar_step(vec![0.0, 0.2, 0.5, 0.9, 1.0], vec![0.0, 1.0, -1.0, 2.0, 2.0]).unwrap();
        for phi in [trivial_lift(&h), linear_lift(&h)] {
            let e = delta_extension(&phi, 0.1).unwrap();
            let back = collapse(&e).unwrap();
            assert!(sup_dist(back.skeleton(), phi.skeleton()).unwrap() < 1e-14);
            assert_eq!(back.decorations().len(), phi.decorations().len());
            for (x, y) in back.decorations().iter().zip(phi.decorations()) {
                assert_eq!(x.time, y.time);
                assert!(frechet_dist(&x.excursion, &y.excursion).unwrap() < 1e-12);
            }
            let a = alpha_inf(&back, &phi, 0.1, 1 << 16).unwrap();
            assert!(a.value < 1e-9, "{a:?}");
        }
        let c = trivial_lift(&CadlagPath::scalar_linear(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap());
        let back = collapse(&delta_extension(&c, 0.3).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn alpha_examples() {
        let (x, y) = (step_at(0.5, 1.0), step_at(0.6, 1.0));
        let a = alpha_inf(&linear_lift(&x), &linear_lift(&y), 1e-4, 1 << 20).unwrap();
        assert!((a.value - 0.1).abs() <= a.bias + 1e-9, "{a:?}");
        let i = alpha_inf(&trivial_lift(&x), &trivial_lift(&y), 1e-4, 1 << 20).unwrap();
        assert!((i.value - 0.1).abs() <= i.bias + 1e-9);
        let phi = linear_lift(&x);
        assert_eq!(alpha_inf(&phi, &phi, 0.01, 64).unwrap().value, 0.0);
        assert_eq!(alpha_pvar(&phi, &phi, 1.5, 0.01, 16).unwrap().value, 0.0);
    }

    #[test]
    fn pvar_decorated_examples() {
        let h = CadlagPath::scalar_step(vec![0.0, 0.3, 0.6, 1.0], vec![0.0, 1.0, -0.5, -0.5]).unwrap();
        for p in [1.0, 1.5, 2.0] {
            let want = p_variation(&h, p).unwrap();
            assert!((pvar_decorated(&trivial_lift(&h), p).unwrap() - want).abs() < 1e-12);
        }
        let j = linear_lift(&step_at(0.5, 1.0));
        for p in [1.0, 2.5] {
            assert!((pvar_decorated(&j, p).unwrap() - 1.0).abs() < 1e-15);
        }
        // a loop excursion travels further than the jump it decorates
        let bf = butterfly_loop();
        let sk = CadlagPath::step(vec![0.0, 0.5, 1.0], vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let phi = DecoratedPath::new(sk.clone(), vec![Decoration { time: 0.5, excursion: bf }]).unwrap();
        assert!(pvar_decorated(&phi, 1.0).unwrap() > p_variation(&sk, 1.0).unwrap() + 1.0);
    }

    #[test]
    fn json_round_trip() {
        let phi = linear_lift(&step_at(0.4, 2.0));
        let s = serde_json::to_string(&phi).unwrap();
        assert!(s.contains("\"decorations\":[{\"t\":0.4"));
        let back: DecoratedPath = serde_json::from_str(&s).unwrap();
        assert_eq!(back, phi);
    }

    #[test]
    fn canonical_is_reparametrisation() {
        let bf = butterfly_loop();
        let c = canonical_excursion(&bf).unwrap();
        assert!(c.len() >= CANONICAL_POINTS);
        assert!(frechet_dist(&c, &bf).unwrap() < 1e-12);
        let rho = TimeChange::new(vec![0.0, 0.3, 1.0], vec![0.0, 0.6, 1.0]).unwrap();
        let c2 = canonical_excursion(&bf.compose(&rho).unwrap()).unwrap();
        assert!(sup_dist(&c, &c2).unwrap() < 1e-2);
    }

    fn excursion_from(x0: f64, inc: &[f64]) -> CadlagPath {
        let n = inc.len();
        let times: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
        let mut v = vec![x0];
        for d in inc {
            v.push(v.last().unwrap() + d);
        }
        CadlagPath::scalar_linear(times, v).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn pvar_independent_of_delta(h in arb_path(6, 2), p in 1.0f64..3.0, d1 in 0.01f64..1.0, d2 in 0.01f64..1.0) {
            let phi = linear_lift(&h);
            let a = p_variation(delta_extension(&phi, d1).unwrap().extended(), p).unwrap();
            let b = p_variation(delta_extension(&phi, d2).unwrap().extended(), p).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a));
        }

        #[test]
        fn remark_lift_matches_j1(h1 in arb_path(6, 1), h2 in arb_path(6, 1)) {
            let delta = 1e-6;
            let a = alpha_inf(&trivial_lift(&h1), &trivial_lift(&h2), delta, 1 << 20).unwrap();
            let s = j1_dist(&h1, &h2, 1 << 20).unwrap().value;
            prop_assert!((a.value - s).abs() <= a.bias + 1e-9, "{} vs {}", a.value, s);
        }

        #[test]
        fn tau_inverse_identity(h in arb_path(6, 1), t in 0.0f64..1.0) {
            let e = delta_extension(&linear_lift(&h), 0.2).unwrap();
            prop_assert!((e.tau_inv(e.tau(t)) - t).abs() < 1e-12);
        }

        #[test]
        fn collapse_inverts_extension(h in arb_path(6, 2), delta in 0.01f64..1.0) {
            for phi in [trivial_lift(&h), linear_lift(&h)] {
                let back = collapse(&delta_extension(&phi, delta).unwrap()).unwrap();
                prop_assert!(sup_dist(back.skeleton(), phi.skeleton()).unwrap() < 1e-12);
                prop_assert_eq!(back.decorations().len(), phi.decorations().len());
            }
        }
        #[test]
        fn concentrated_excursion_is_close_to_its_stretch(
            x0 in -2.0f64..2.0,
            inc in prop::collection::vec(-1.0f64..1.0, 1..6),
            a in -1.0f64..0.5,
            len in 0.01f64..1.0,
        ) {
            let b = a + len;
            let ex = excursion_from(x0, &inc);
            let sk = CadlagPath::scalar_step(vec![a, b], vec![x0, ex.last()[0]]).unwrap();
            let phi = DecoratedPath::new(sk, vec![Decoration { time: b, excursion: ex.clone() }]).unwrap();
            let h = ex.rescale_time(a, b).unwrap();
            let delta = 1e-6;
            let r = alpha_inf(&phi, &trivial_lift(&h), delta, 1 << 20).unwrap();
            prop_assert!(r.value <= len + r.bias + 1e-9, "{} > {}", r.value, len);
        }

        #[test]
        fn split_bound(h1 in arb_path(5, 1), h2 in arb_path(5, 1), c in 0.05f64..0.95) {
            let (p1, p2) = (linear_lift(&h1), linear_lift(&h2));
            let delta = 1e-6;
            let m = 1 << 18;
            let whole = alpha_inf(&p1, &p2, delta, m).unwrap();
            let (l1, r1) = p1.split_at(c).unwrap();
            let (l2, r2) = p2.split_at(c).unwrap();
            let left = alpha_inf(&l1, &l2, delta, m).unwrap();
            let right = alpha_inf(&r1, &r2, delta, m).unwrap();
            let tol = 2.0 * (whole.bias + left.bias) + 4.0 / m as f64;
            prop_assert!(whole.value <= left.value.max(right.value) + tol,
                "{} > max({}, {})", whole.value, left.value, right.value);
        }
    }
}
