//! Dispersing billiard with one flat cusp.
//!
//! The table is bounded by the walls `y = ±x^β/β`, `x ∈ [0, 1]`, tangent at
//! the origin, and by the arc of the circle centred at `(2, 0)` through the
//! wall ends `(1, ±1/β)`; the table lies outside that disk so all three
//! pieces are dispersing. The boundary is traversed counter-clockwise
//! starting at the cusp: lower wall, arc, upper wall.
//!
//! Collisions are stored as `(piece, parameter, θ)` where the parameter is
//! `x` on a wall and the polar angle offset `ψ` on the arc. The outgoing
//! direction is `cos θ n + sin θ τ` with `n` the inward normal and `τ` the
//! counter-clockwise tangent, so positive `θ` turns clockwise from `n`.

use std::f64::consts::FRAC_PI_2;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::pm::gauss_legendre_20;
use super::{Return, ReturnStructure};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Piece {
    Lower,
    Arc,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub r: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Collision {
    pub piece: Piece,
    pub param: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TableConfig {
    pub beta: f64,
    pub s_cut: f64,
}

impl Default for TableConfig {
    fn default() -> Self {
        Self { beta: 3.0, s_cut: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BilliardTable {
    beta: f64,
    s_cut: f64,
    radius: f64,
    half_angle: f64,
    wall_len: f64,
    int_beta: Option<i32>,
}

const CENTER: f64 = 2.0;
const EDGE_TOL: f64 = 1e-12;

#[inline]
fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

impl BilliardTable {
    pub fn new(cfg: TableConfig) -> Result<Self> {
        if !(cfg.beta > 2.0 && cfg.beta <= 6.0) {
            return Err(Error::Parameter(format!("cusp exponent β must lie in (2, 6], got {}", cfg.beta)));
        }
        if !(cfg.s_cut > 0.0 && cfg.s_cut < 1.0) {
            return Err(Error::Parameter(format!("s_cut must lie in (0, 1), got {}", cfg.s_cut)));
        }
        let h = 1.0 / cfg.beta;
        let mut t = Self {
            beta: cfg.beta,
            s_cut: cfg.s_cut,
            radius: (1.0 + h * h).sqrt(),
            half_angle: h.atan(),
            wall_len: 0.0,
            int_beta: (cfg.beta.fract() == 0.0).then_some(cfg.beta as i32),
        };
        t.wall_len = t.wall_length(1.0);
        Ok(t)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Tail index `β/(β − 1)` of cusp excursions.
    pub fn alpha(&self) -> f64 {
        self.beta / (self.beta - 1.0)
    }

    pub fn s_cut(&self) -> f64 {
        self.s_cut
    }

    pub fn perimeter(&self) -> f64 {
        2.0 * self.wall_len + 2.0 * self.radius * self.half_angle
    }

    #[inline]
    fn slope(&self, x: f64) -> f64 {
        match self.int_beta {
            Some(b) => x.powi(b - 1),
            None => x.powf(self.beta - 1.0),
        }
    }

    /// `x^β/β`.
    #[inline]
    fn wall(&self, x: f64) -> f64 {
        match self.int_beta {
            Some(b) => x.powi(b) / self.beta,
            None => x.powf(self.beta) / self.beta,
        }
    }

    /// Arc length of a wall from the cusp to abscissa `x`.
    pub fn wall_length(&self, x: f64) -> f64 {
        let (xs, ws) = gauss_legendre_20();
        let h = 0.5 * x;
        xs.iter()
            .zip(ws)
            .map(|(s, w)| {
                let m = self.slope(h * (1.0 + s));
                w * (1.0 + m * m).sqrt()
            })
            .sum::<f64>()
            * h
    }

    fn wall_abscissa(&self, len: f64) -> f64 {
        let mut x = len.clamp(0.0, 1.0);
        for _ in 0..50 {
            let m = self.slope(x);
            let dx = (self.wall_length(x) - len) / (1.0 + m * m).sqrt();
            x -= dx;
            if dx.abs() <= 1e-16 * x.max(1e-300) {
                break;
            }
        }
        x.clamp(0.0, 1.0)
    }

    pub fn in_cusp(&self, c: &Collision) -> bool {
        c.piece != Piece::Arc && c.param < self.s_cut
    }

    pub fn to_phase(&self, c: &Collision) -> PhasePoint {
        let r = match c.piece {
            Piece::Lower => self.wall_length(c.param),
            Piece::Arc => self.wall_len + self.radius * (self.half_angle - c.param),
            Piece::Upper => self.perimeter() - self.wall_length(c.param),
        };
        PhasePoint { r, theta: c.theta }
    }

    pub fn from_phase(&self, p: PhasePoint) -> Result<Collision> {
        let total = self.perimeter();
        if !(p.r >= 0.0 && p.r <= total) || !(p.theta.abs() <= FRAC_PI_2) {
            return Err(Error::Parameter(format!("phase point ({}, {}) outside Λ", p.r, p.theta)));
        }
        let arc_end = self.wall_len + 2.0 * self.radius * self.half_angle;
        let (piece, param) = if p.r < self.wall_len {
            (Piece::Lower, self.wall_abscissa(p.r))
        } else if p.r <= arc_end {
            (Piece::Arc, self.half_angle - (p.r - self.wall_len) / self.radius)
        } else {
            (Piece::Upper, self.wall_abscissa(total - p.r))
        };
        Ok(Collision {
            piece,
            param,
            theta: p.theta,
        })
    }

    /// Boundary point, inward normal and counter-clockwise tangent.
    pub fn frame(&self, piece: Piece, param: f64) -> ([f64; 2], [f64; 2], [f64; 2]) {
        match piece {
            Piece::Lower | Piece::Upper => {
                let s = if piece == Piece::Lower { -1.0 } else { 1.0 };
                let x = param;
                let m = s * self.slope(x);
                let k = 1.0 / (1.0 + m * m).sqrt();
                let q = [x, s * self.wall(x)];
                // tangent along increasing x is (1, m); counter-clockwise
                // runs with x on the lower wall and against it on the upper
                let tau = [-s * k, -s * m * k];
                (q, [-tau[1], tau[0]], tau)
            }
            Piece::Arc => {
                let (sn, cs) = param.sin_cos();
                let q = [CENTER - self.radius * cs, -self.radius * sn];
                (q, [-cs, -sn], [-sn, cs])
            }
        }
    }

    pub fn position(&self, c: &Collision) -> [f64; 2] {
        self.frame(c.piece, c.param).0
    }

    pub fn direction(&self, c: &Collision) -> [f64; 2] {
        let (_, n, tau) = self.frame(c.piece, c.param);
        let (s, co) = c.theta.sin_cos();
        [co * n[0] + s * tau[0], co * n[1] + s * tau[1]]
    }

    /// First positive ray parameter at which `q + t u` meets wall `s`.
    fn hit_wall(&self, s: f64, q: [f64; 2], u: [f64; 2]) -> Option<f64> {
        let b = self.beta;
        let f = |t: f64| {
            let x = (q[0] + t * u[0]).max(0.0);
            q[1] + t * u[1] - s * self.wall(x)
        };
        if u[0] == 0.0 {
            let t = (s * self.wall(q[0]) - q[1]) / u[1];
            return (t > 0.0).then_some(t);
        }
        let (mut lo, hi) = if u[0] > 0.0 {
            (((0.0 - q[0]) / u[0]).max(0.0), (1.0 + EDGE_TOL - q[0]) / u[0])
        } else {
            (((1.0 + EDGE_TOL - q[0]) / u[0]).max(0.0), -q[0] / u[0])
        };
        if !(hi > lo) {
            return None;
        }
        if lo == 0.0 {
            // skip the starting point itself
            lo = f64::MIN_POSITIVE;
        }
        let mut cuts = vec![lo];
        let ratio = s * u[1] / u[0];
        if ratio > 0.0 {
            let xc = ratio.powf(1.0 / (b - 1.0));
            let tc = (xc - q[0]) / u[0];
            if tc > lo && tc < hi {
                cuts.push(tc);
            }
        }
        cuts.push(hi);
        let df = |t: f64| {
            let x = (q[0] + t * u[0]).max(0.0);
            u[1] - s * u[0] * self.slope(x)
        };
        for w in cuts.windows(2) {
            let (a, c) = (w[0], w[1]);
            let (fa, fc) = (f(a), f(c));
            if fa == 0.0 && a > f64::MIN_POSITIVE {
                return Some(a);
            }
            if fa * fc <= 0.0 {
                return Some(safeguarded_root(&f, &df, a, c, fa));
            }
        }
        None
    }

    fn hit_arc(&self, q: [f64; 2], u: [f64; 2]) -> Option<(f64, f64)> {
        let d = [q[0] - CENTER, q[1]];
        let b = dot(u, d);
        let c = dot(d, d) - self.radius * self.radius;
        let disc = b * b - c;
        if disc < 0.0 || b >= 0.0 {
            return None;
        }
        let t = c / (-b + disc.sqrt());
        if !(t > 0.0) {
            return None;
        }
        let p = [q[0] + t * u[0], q[1] + t * u[1]];
        let psi = (-p[1]).atan2(CENTER - p[0]);
        (psi.abs() <= self.half_angle + EDGE_TOL).then(|| (t, psi.clamp(-self.half_angle, self.half_angle)))
    }

    /// One collision of the billiard map.
    pub fn step(&self, c: &Collision) -> Result<Collision> {
        let (q, _, _) = self.frame(c.piece, c.param);
        let u = self.direction(c);
        let mut best: Option<(f64, Piece, f64)> = None;
        let mut consider = |t: f64, piece: Piece, param: f64| {
            if best.is_none_or(|(bt, _, _)| t < bt) {
                best = Some((t, piece, param));
            }
        };
        for (piece, s) in [(Piece::Lower, -1.0), (Piece::Upper, 1.0)] {
            if piece != c.piece {
                if let Some(t) = self.hit_wall(s, q, u) {
                    consider(t, piece, (q[0] + t * u[0]).clamp(0.0, 1.0));
                }
            }
        }
        if c.piece != Piece::Arc {
            if let Some((t, psi)) = self.hit_arc(q, u) {
                consider(t, Piece::Arc, psi);
            }
        }
        let (_, piece, param) = best.ok_or_else(|| {
            Error::Geometry(format!("no boundary hit from {c:?} (position {q:?}, direction {u:?})"))
        })?;
        let (_, n, tau) = self.frame(piece, param);
        let un = dot(u, n);
        let out = [u[0] - 2.0 * un * n[0], u[1] - 2.0 * un * n[1]];
        let theta = dot(out, tau).atan2(dot(out, n));
        debug_assert!((theta.abs() - dot(u, tau).atan2(-un).abs()).abs() < 1e-9);
        Ok(Collision { piece, param, theta })
    }

    /// Billiard map in `(r, θ)` coordinates.
    pub fn step_phase(&self, p: PhasePoint) -> Result<PhasePoint> {
        let c = self.from_phase(p)?;
        Ok(self.to_phase(&self.step(&c)?))
    }

    /// Collisions `x_0, …, x_{n−1}`.
    pub fn orbit(&self, start: Collision, n: usize) -> Result<Vec<Collision>> {
        let mut out = Vec::with_capacity(n);
        let mut c = start;
        for _ in 0..n {
            out.push(c);
            c = self.step(&c)?;
        }
        Ok(out)
    }

    /// Returns to `Σ`, the collisions outside the cusp, streamed over `n`
    /// collisions from `start`. A return is labelled `1` when the next
    /// collision enters the cusp; the others always have `R = 1` and are
    /// kept only with `keep_trivial`. Also gives the collision after the
    /// last one visited.
    pub fn cusp_returns(&self, start: Collision, n: usize, keep_trivial: bool) -> Result<(ReturnStructure, Collision)> {
        let mut c = start;
        let mut open: Option<(usize, usize)> = None;
        let mut returns = Vec::new();
        for k in 0..n {
            let next = self.step(&c)?;
            if !self.in_cusp(&c) {
                if let Some((s, l)) = open {
                    if keep_trivial || l != 0 {
                        returns.push(Return {
                            start: s,
                            time: (k - s) as u64,
                            label: l,
                        });
                    }
                }
                open = Some((k, usize::from(k + 1 < n && self.in_cusp(&next))));
            }
            c = next;
        }
        Ok((ReturnStructure::new(returns)?, c))
    }

    /// Draw from `(2|∂Q|)^{−1} cos θ dr dθ`.
    pub fn sample_invariant(&self, rng: &mut Rng) -> Result<Collision> {
        let r = rng.random::<f64>() * self.perimeter();
        let theta = (2.0 * rng.random::<f64>() - 1.0).asin();
        self.from_phase(PhasePoint { r, theta })
    }
}

/// `v(r, θ) = (cos 3θ, cos 5θ)`, mean zero under `cos θ dr dθ`.
pub fn butterfly_observable(c: &Collision, out: &mut [f64]) {
    out[0] = (3.0 * c.theta).cos();
    out[1] = (5.0 * c.theta).cos();
}

/// Root of a monotone `f` on `[a, c]` with `f(a) = fa` and a sign change:
/// Newton steps that stay inside the bracket, bisection otherwise.
fn safeguarded_root(f: &impl Fn(f64) -> f64, df: &impl Fn(f64) -> f64, a: f64, c: f64, fa: f64) -> f64 {
    let (mut lo, mut hi) = (a, c);
    let rising = fa < 0.0;
    let mut t = 0.5 * (lo + hi);
    for _ in 0..200 {
        let ft = f(t);
        if ft == 0.0 {
            return t;
        }
        if (ft < 0.0) == rising {
            lo = t;
        } else {
            hi = t;
        }
        let d = df(t);
        let newton = if d != 0.0 { t - ft / d } else { f64::NAN };
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - t).abs() <= 1e-15 * t.abs() || hi - lo <= 1e-16 * hi.abs() {
            return next;
        }
        t = next;
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn table() -> BilliardTable {
        BilliardTable::new(TableConfig::default()).unwrap()
    }

    #[test]
    fn geometry() {
        let b = table();
        assert!((b.radius - (10.0f64 / 9.0).sqrt()).abs() < 1e-15);
        let corner_wall = b.frame(Piece::Lower, 1.0).0;
        let corner_arc = b.frame(Piece::Arc, b.half_angle).0;
        assert!((corner_wall[0] - corner_arc[0]).abs() < 1e-15 && (corner_wall[1] - corner_arc[1]).abs() < 1e-15);
        let top = b.frame(Piece::Arc, -b.half_angle).0;
        assert!((top[1] - 1.0 / 3.0).abs() < 1e-15);
        // wall length: ∫₀¹ √(1 + x⁴) dx
        assert!((b.wall_length(1.0) - 1.089_429_413_224_822).abs() < 1e-12);
        for r in [0.0, 0.3, 1.2, 1.5, 2.7] {
            let c = b.from_phase(PhasePoint { r, theta: 0.1 }).unwrap();
            assert!((b.to_phase(&c).r - r).abs() < 1e-13, "{r}");
        }
        assert!(b.from_phase(PhasePoint { r: 0.1, theta: 2.0 }).is_err());
        assert!(BilliardTable::new(TableConfig { beta: 1.5, s_cut: 0.2 }).is_err());
    }

    #[test]
    fn normal_shot_across_the_cusp() {
        let b = table();
        let x = 0.5;
        let c = Collision { piece: Piece::Lower, param: x, theta: 0.0 };
        let n = b.step(&c).unwrap();
        assert_eq!(n.piece, Piece::Upper);
        let p = b.position(&n);
        let q = b.position(&c);
        let u = b.direction(&c);
        // lands on the ray and on the wall
        let cross = (p[0] - q[0]) * u[1] - (p[1] - q[1]) * u[0];
        assert!(cross.abs() < 1e-14);
        assert!((p[1] - p[0].powi(3) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn reflection_and_reversal() {
        let b = table();
        let mut rng = stream(9, 0);
        let mut worst: f64 = 0.0;
        let mut c = b.sample_invariant(&mut rng).unwrap();
        for _ in 0..1000 {
            let n = b.step(&c).unwrap();
            let (_, nn, tau) = b.frame(n.piece, n.param);
            let u = b.direction(&c);
            let incoming = dot(u, tau).atan2(-dot(u, nn));
            assert!((incoming.abs() - n.theta.abs()).abs() < 1e-9);
            let back = b
                .step(&Collision { theta: -n.theta, ..n })
                .unwrap();
            let (p0, p1) = (b.to_phase(&c), b.to_phase(&back));
            worst = worst.max((p0.r - p1.r).abs()).max((p0.theta + p1.theta).abs());
            c = n;
        }
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn orbit_enters_the_cusp() {
        let b = table();
        let mut rng = stream(3, 1);
        let o = b.orbit(b.sample_invariant(&mut rng).unwrap(), 20_000).unwrap();
        assert!(o.iter().any(|c| b.in_cusp(c)));
        assert!(o.iter().any(|c| c.piece == Piece::Arc));
        let labels = |k: usize| (!b.in_cusp(&o[k])).then(|| usize::from(k + 1 < o.len() && b.in_cusp(&o[k + 1])));
        let full = ReturnStructure::from_labels(o.len(), labels);
        let (streamed, _) = b.cusp_returns(o[0], o.len(), true).unwrap();
        assert_eq!(full, streamed);
        let (deep, _) = b.cusp_returns(o[0], o.len(), false).unwrap();
        assert_eq!(deep.labels(), vec![1]);
        assert_eq!(deep.len(), full.times_with_label(1).len());
        let mut v = [0.0; 2];
        butterfly_observable(&o[0], &mut v);
        assert_eq!(v[0], (3.0 * o[0].theta).cos());
    }
}
