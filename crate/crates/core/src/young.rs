//! Young integrals and differential equations driven by càdlàg paths.
//!
//! Every solve runs on an augmented driver `z = (t, W)` whose first
//! coordinate is a clock, so `dX = A(X) dt + B(X) dW` becomes
//! `dX = F(X) dz` with `F = [A | B]`. Segments are integrated with RK4
//! substeps whose count follows the driver increment, which makes the
//! numerics blind to how fast a segment is traversed. Jumps use either the
//! forward rule `X⁺ = X⁻ + F(X⁻)Δz` or the Marcus time-1 flow.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::decorated::{collapse, delta_extension, Decoration, DecoratedPath, Extension};
use crate::error::{Error, Result};
use crate::path::{norm, CadlagPath, Mode};

type FieldFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// Drift `A: ℝ^m → ℝ^m` and noise `B: ℝ^m → ℝ^{m×d}` (row-major).
#[derive(Clone)]
pub struct VectorField {
    m: usize,
    d: usize,
    drift: Arc<FieldFn>,
    noise: Arc<FieldFn>,
    lipschitz: Option<f64>,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField")
            .field("m", &self.m)
            .field("d", &self.d)
            .field("lipschitz", &self.lipschitz)
            .finish_non_exhaustive()
    }
}

impl VectorField {
    pub fn new(
        m: usize,
        d: usize,
        drift: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        noise: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            m,
            d,
            drift: Arc::new(drift),
            noise: Arc::new(noise),
            lipschitz: None,
        }
    }

    /// Records a Lipschitz constant; the substep count on a segment is
    /// scaled by it when it exceeds one.
    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = Some(l);
        self
    }

    /// `A ≡ 0` and the given noise.
    pub fn driftless(
        m: usize,
        d: usize,
        noise: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self::new(m, d, |_, out| out.fill(0.0), noise)
    }

    /// `A ≡ a`, `B ≡ 0`.
    pub fn constant_drift(a: Vec<f64>, d: usize) -> Self {
        let m = a.len();
        Self::new(m, d, move |_, out| out.copy_from_slice(&a), |_, out| out.fill(0.0))
    }

    /// Constant coefficients `A ≡ a`, `B ≡ g` (row-major `m × d`).
    pub fn constant(a: Vec<f64>, g: Vec<f64>) -> Result<Self> {
        let m = a.len();
        if m == 0 || g.len() % m != 0 {
            return Err(Error::Shape(format!("noise matrix of {} entries for m = {m}", g.len())));
        }
        let d = g.len() / m;
        Ok(Self::new(
            m,
            d,
            move |_, out| out.copy_from_slice(&a),
            move |_, out| out.copy_from_slice(&g),
        )
        .with_lipschitz(0.0))
    }

    /// Scalar `dX = X dW`.
    pub fn linear_scalar() -> Self {
        Self::driftless(1, 1, |x, out| out[0] = x[0]).with_lipschitz(1.0)
    }

    /// `B(x) = diag(1, x₁)`, `A ≡ 0`: `dX¹ = dW¹`, `dX² = X¹ dW²`.
    pub fn nonmarcus_example() -> Self {
        Self::driftless(2, 2, |x, out| {
            out.copy_from_slice(&[1.0, 0.0, 0.0, x[0]]);
        })
        .with_lipschitz(1.0)
    }

    pub fn state_dim(&self) -> usize {
        self.m
    }

    pub fn noise_dim(&self) -> usize {
        self.d
    }

    pub fn drift(&self, x: &[f64], out: &mut [f64]) {
        (self.drift)(x, out)
    }

    pub fn noise(&self, x: &[f64], out: &mut [f64]) {
        (self.noise)(x, out)
    }

    /// `F(x) = [A(x) | B(x)]`, row-major `m × (1 + d)`.
    fn full(&self, x: &[f64], a: &mut [f64], b: &mut [f64], out: &mut [f64]) {
        (self.drift)(x, a);
        (self.noise)(x, b);
        let w = self.d + 1;
        for i in 0..self.m {
            out[i * w] = a[i];
            out[i * w + 1..(i + 1) * w].copy_from_slice(&b[i * self.d..(i + 1) * self.d]);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[default]
    Rk4,
    Euler,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    /// Driver increment covered by one substep at the coarsest level.
    pub mesh: f64,
    pub tolerance: f64,
    pub max_refinements: u32,
    pub blowup: f64,
    pub scheme: Scheme,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            mesh: 0.05,
            tolerance: 1e-10,
            max_refinements: 14,
            blowup: 1e12,
            scheme: Scheme::Rk4,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mesh > 0.0 && self.mesh.is_finite()) {
            return Err(Error::Parameter(format!("mesh must be positive, got {}", self.mesh)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Parameter(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if !(self.blowup > 0.0) {
            return Err(Error::Parameter("blow-up bound must be positive".into()));
        }
        Ok(())
    }

    /// A single pass at the given mesh, no refinement.
    pub fn fixed(mesh: f64, scheme: Scheme) -> Self {
        Self {
            mesh,
            max_refinements: 0,
            scheme,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JumpRule {
    Forward,
    Marcus,
}

/// Solver diagnostics for the JSON sidecar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub refinements: u32,
    /// Sup change of the grid values between the last two levels.
    pub max_step_error: f64,
    pub substeps: u64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub path: CadlagPath,
    pub report: SolveReport,
}

#[derive(Debug, Clone)]
pub struct DecoratedSolution {
    pub path: DecoratedPath,
    pub extension: Extension,
    pub report: SolveReport,
}

struct Work {
    a: Vec<f64>,
    b: Vec<f64>,
    f: Vec<f64>,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Work {
    fn new(m: usize, d: usize) -> Self {
        Self {
            a: vec![0.0; m],
            b: vec![0.0; m * d],
            f: vec![0.0; m * (d + 1)],
            k: [vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]],
            tmp: vec![0.0; m],
        }
    }
}

struct Integrator<'a> {
    vf: &'a VectorField,
    cfg: &'a SolveConfig,
    scale: f64,
    substeps: u64,
}

impl Integrator<'_> {
    // out = F(x) dz
    fn rate(&self, w: &mut Work, x: &[f64], dz: &[f64], slot: usize) {
        let cols = self.vf.d + 1;
        self.vf.full(x, &mut w.a, &mut w.b, &mut w.f);
        for i in 0..self.vf.m {
            w.k[slot][i] = w.f[i * cols..(i + 1) * cols]
                .iter()
                .zip(dz)
                .map(|(f, z)| f * z)
                .sum();
        }
    }

    fn count(&self, dz: &[f64]) -> usize {
        let lip = self.vf.lipschitz.unwrap_or(1.0).max(1.0);
        ((norm(dz) * lip * self.scale / self.cfg.mesh).ceil() as usize).max(1)
    }

    /// Flows `x' = F(x) dz` over unit parameter time.
    fn flow(&mut self, w: &mut Work, x: &mut [f64], dz: &[f64]) -> Result<()> {
        let n = self.count(dz);
        let h = 1.0 / n as f64;
        let m = self.vf.m;
        for _ in 0..n {
            match self.cfg.scheme {
                Scheme::Euler => {
                    self.rate(w, x, dz, 0);
                    for i in 0..m {
                        x[i] += h * w.k[0][i];
                    }
                }
                Scheme::Rk4 => {
                    self.rate(w, x, dz, 0);
                    for i in 0..m {
                        w.tmp[i] = x[i] + 0.5 * h * w.k[0][i];
                    }
                    let tmp = std::mem::take(&mut w.tmp);
                    self.rate(w, &tmp, dz, 1);
                    let mut tmp = tmp;
                    for i in 0..m {
                        tmp[i] = x[i] + 0.5 * h * w.k[1][i];
                    }
                    self.rate(w, &tmp, dz, 2);
                    for i in 0..m {
                        tmp[i] = x[i] + h * w.k[2][i];
                    }
                    self.rate(w, &tmp, dz, 3);
                    w.tmp = tmp;
                    for i in 0..m {
                        x[i] += h / 6.0 * (w.k[0][i] + 2.0 * w.k[1][i] + 2.0 * w.k[2][i] + w.k[3][i]);
                    }
                }
            }
            self.check(x)?;
        }
        self.substeps += n as u64;
        Ok(())
    }

    fn forward(&mut self, w: &mut Work, x: &mut [f64], dz: &[f64]) -> Result<()> {
        self.rate(w, x, dz, 0);
        for (xi, ki) in x.iter_mut().zip(&w.k[0]) {
            *xi += ki;
        }
        self.substeps += 1;
        self.check(x)
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        let n = norm(x);
        if !n.is_finite() || n > self.cfg.blowup {
            return Err(Error::Divergence(format!(
                "solution norm {n} exceeds the blow-up bound {}",
                self.cfg.blowup
            )));
        }
        Ok(())
    }
}

fn integrate_once(
    vf: &VectorField,
    xi: &[f64],
    z: &CadlagPath,
    cfg: &SolveConfig,
    rule: JumpRule,
    level: u32,
) -> Result<(CadlagPath, u64)> {
    let m = vf.m;
    let dim = z.dim();
    let mut it = Integrator {
        vf,
        cfg,
        scale: f64::powi(2.0, level as i32),
        substeps: 0,
    };
    let mut w = Work::new(m, vf.d);
    let mut x = xi.to_vec();
    let mut values = Vec::with_capacity(z.len() * m);
    let mut ends = Vec::with_capacity(z.segments() * m);
    let mut modes = Vec::with_capacity(z.segments());
    let mut dz = vec![0.0; dim];
    values.extend_from_slice(&x);
    for k in 0..z.segments() {
        let (v, e) = (z.value(k), z.end(k));
        for i in 0..dim {
            dz[i] = e[i] - v[i];
        }
        let moves = dz.iter().any(|&c| c != 0.0);
        if moves {
            it.flow(&mut w, &mut x, &dz)?;
        }
        modes.push(if moves { Mode::Linear } else { Mode::Step });
        ends.extend_from_slice(&x);
        let next = z.value(k + 1);
        for i in 0..dim {
            dz[i] = next[i] - e[i];
        }
        if dz.iter().any(|&c| c != 0.0) {
            match rule {
                JumpRule::Forward => it.forward(&mut w, &mut x, &dz)?,
                JumpRule::Marcus => it.flow(&mut w, &mut x, &dz)?,
            }
        }
        values.extend_from_slice(&x);
    }
    let path = CadlagPath::from_flat(m, z.times().to_vec(), values, modes, Some(ends))?;
    Ok((path, it.substeps))
}

/// Solves `dX = F(X) dz` on an augmented driver `z = (clock, W)` with
/// mesh halving.
pub fn solve_augmented(
    vf: &VectorField,
    xi: &[f64],
    z: &CadlagPath,
    cfg: &SolveConfig,
    rule: JumpRule,
) -> Result<Solution> {
    cfg.validate()?;
    if xi.len() != vf.m {
        return Err(Error::Shape(format!(
            "initial state has dimension {}, vector field expects {}",
            xi.len(),
            vf.m
        )));
    }
    if z.dim() != vf.d + 1 {
        return Err(Error::Shape(format!(
            "augmented driver has dimension {}, vector field expects 1 + {}",
            z.dim(),
            vf.d
        )));
    }
    let (mut prev, mut substeps) = integrate_once(vf, xi, z, cfg, rule, 0)?;
    if cfg.max_refinements == 0 {
        return Ok(Solution {
            path: prev,
            report: SolveReport {
                refinements: 0,
                max_step_error: f64::NAN,
                substeps,
            },
        });
    }
    let mut change = f64::INFINITY;
    for level in 1..=cfg.max_refinements {
        let (next, s) = integrate_once(vf, xi, z, cfg, rule, level)?;
        substeps += s;
        change = grid_change(&prev, &next);
        prev = next;
        let scale = 1.0 + prev.flat_values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if change <= cfg.tolerance * scale {
            return Ok(Solution {
                path: prev,
                report: SolveReport {
                    refinements: level,
                    max_step_error: change,
                    substeps,
                },
            });
        }
    }
    Err(Error::Accuracy(format!(
        "no convergence after {} refinements, last change {change}",
        cfg.max_refinements
    )))
}

fn grid_change(p: &CadlagPath, q: &CadlagPath) -> f64 {
    let mut c: f64 = 0.0;
    for k in 0..p.len() {
        c = c.max(crate::path::dist(p.value(k), q.value(k)));
    }
    for k in 0..p.segments() {
        c = c.max(crate::path::dist(p.end(k), q.end(k)));
    }
    c
}

fn check_driver(vf: &VectorField, driver: &CadlagPath) -> Result<()> {
    if driver.dim() != vf.d {
        return Err(Error::Shape(format!(
            "driver has dimension {}, vector field expects {}",
            driver.dim(),
            vf.d
        )));
    }
    Ok(())
}

/// `dX = A(X) dt + B(X) dW`, forward rule at jumps of `W`.
pub fn solve_young_ode(
    vf: &VectorField,
    xi: &[f64],
    driver: &CadlagPath,
    cfg: &SolveConfig,
) -> Result<Solution> {
    check_driver(vf, driver)?;
    solve_augmented(vf, xi, &driver.with_clock(), cfg, JumpRule::Forward)
}

/// Insert-solve-collapse: extends `ω = (ιId, φ)`, solves on the extension
/// and collapses the solution back to a decorated path.
pub fn solve_decorated_ode(
    vf: &VectorField,
    xi: &[f64],
    phi: &DecoratedPath,
    delta: f64,
    cfg: &SolveConfig,
) -> Result<DecoratedSolution> {
    check_driver(vf, phi.skeleton())?;
    let omega = with_clock(phi)?;
    let ext = delta_extension(&omega, delta)?;
    let sol = solve_augmented(vf, xi, ext.extended(), cfg, JumpRule::Forward)?;
    let extension = ext.with_path(sol.path)?;
    let path = collapse(&extension)?;
    Ok(DecoratedSolution {
        path,
        extension,
        report: sol.report,
    })
}

/// The decorated path `(ιId, φ)`: the clock is frozen during excursions.
pub fn with_clock(phi: &DecoratedPath) -> Result<DecoratedPath> {
    let decorations = phi
        .decorations()
        .iter()
        .map(|d| {
            let t = d.time;
            Ok(Decoration {
                time: t,
                excursion: d.excursion.map_points(phi.dim() + 1, |x| {
                    let mut v = Vec::with_capacity(x.len() + 1);
                    v.push(t);
                    v.extend_from_slice(x);
                    v
                })?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    DecoratedPath::new(phi.skeleton().with_clock(), decorations)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Jump {
    pub time: f64,
    pub delta: Vec<f64>,
}

/// Driver `W_c(t) + Σ_{t_j ≤ t} Δ_j` on the grid of `W_c` refined by the
/// jump times.
pub fn jump_driver(jumps: &[Jump], continuous: &CadlagPath) -> Result<CadlagPath> {
    let (a, b) = continuous.domain();
    let d = continuous.dim();
    for j in jumps {
        if !(j.time > a && j.time <= b) {
            return Err(Error::Domain { t: j.time, a, b });
        }
        if j.delta.len() != d {
            return Err(Error::Shape(format!(
                "jump of dimension {} for a driver of dimension {d}",
                j.delta.len()
            )));
        }
    }
    let times: Vec<f64> = jumps.iter().map(|j| j.time).collect();
    let p = continuous.insert_times(&times)?;
    let offset = |t: f64| {
        let mut o = vec![0.0; d];
        for j in jumps.iter().filter(|j| j.time <= t) {
            for (oi, di) in o.iter_mut().zip(&j.delta) {
                *oi += di;
            }
        }
        o
    };
    let mut values = Vec::with_capacity(p.len() * d);
    let mut ends = Vec::with_capacity(p.segments() * d);
    for k in 0..p.len() {
        let o = offset(p.times()[k]);
        values.extend(p.value(k).iter().zip(&o).map(|(v, o)| v + o));
        if k < p.segments() {
            ends.extend(p.end(k).iter().zip(&o).map(|(v, o)| v + o));
        }
    }
    CadlagPath::from_flat(d, p.times().to_vec(), values, p.modes().to_vec(), Some(ends))
}

/// Marcus SDE: continuous part along `drift_driver`, each jump replaced by
/// the time-1 flow of `dZ/ds = B(Z)Δ`.
pub fn solve_marcus(
    vf: &VectorField,
    xi: &[f64],
    jumps: &[Jump],
    drift_driver: &CadlagPath,
    cfg: &SolveConfig,
) -> Result<Solution> {
    check_driver(vf, drift_driver)?;
    let z = jump_driver(jumps, drift_driver)?;
    solve_augmented(vf, xi, &z.with_clock(), cfg, JumpRule::Marcus)
}

/// `∫ Y_i dW_j` as the limit of left-point sums, flattened row-major
/// (`dim Y × dim W`). On the joint grid both paths are affine on every
/// cell, so the limit is the midpoint rule on cells plus `Y(t⁻)ΔW(t)` at
/// jumps.
pub fn young_integral(y: &CadlagPath, w: &CadlagPath) -> Result<Vec<f64>> {
    if y.domain() != w.domain() {
        return Err(Error::Shape("integrand and integrator live on different intervals".into()));
    }
    let (ky, kw) = (y.dim(), w.dim());
    let grid = crate::path::union_grid(y.times(), w.times());
    let mut out = vec![0.0; ky * kw];
    let (mut sy, mut sw) = (0usize, 0usize);
    for c in 0..grid.len() - 1 {
        let (t0, t1) = (grid[c], grid[c + 1]);
        while sy + 1 < y.segments() && y.times()[sy + 1] <= t0 {
            sy += 1;
        }
        while sw + 1 < w.segments() && w.times()[sw + 1] <= t0 {
            sw += 1;
        }
        let (y0, y1) = (y.seg_point(sy, t0), y.seg_point(sy, t1));
        let (w0, w1) = (w.seg_point(sw, t0), w.seg_point(sw, t1));
        let w_next = if c + 2 == grid.len() {
            w.last().to_vec()
        } else {
            w.eval(t1)?
        };
        for i in 0..ky {
            let ym = 0.5 * (y0[i] + y1[i]);
            for j in 0..kw {
                out[i * kw + j] += ym * (w1[j] - w0[j]) + y1[i] * (w_next[j] - w1[j]);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decorated::{linear_lift, trivial_lift};
    use crate::path::sup_dist;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn identity() -> CadlagPath {
        CadlagPath::scalar_linear(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap()
    }

    fn unit_step() -> CadlagPath {
        CadlagPath::scalar_step(vec![0.0, 0.5, 1.0], vec![0.0, 1.0, 1.0]).unwrap()
    }

    #[test]
    fn integral_examples() {
        assert_abs_diff_eq!(young_integral(&identity(), &identity()).unwrap()[0], 0.5, epsilon = 1e-15);
        assert_eq!(young_integral(&unit_step(), &unit_step()).unwrap(), vec![0.0]);
        let c = CadlagPath::constant(0.0, 1.0, &[3.0]).unwrap();
        assert_eq!(young_integral(&identity(), &c).unwrap(), vec![0.0]);
        // Y jumps where W moves: left limits only
        let v = young_integral(&unit_step(), &identity()).unwrap()[0];
        assert_abs_diff_eq!(v, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn exponential() {
        let s = solve_young_ode(&VectorField::linear_scalar(), &[1.0], &identity(), &SolveConfig::default()).unwrap();
        assert_abs_diff_eq!(s.path.last()[0], std::f64::consts::E, epsilon = 1e-9);
        assert!(s.report.refinements >= 1);
    }

    #[test]
    fn pure_drift_and_forward_jump() {
        let vf = VectorField::constant_drift(vec![1.0], 1);
        let c = CadlagPath::constant(0.0, 1.0, &[0.0]).unwrap();
        let s = solve_young_ode(&vf, &[0.0], &c, &SolveConfig::default()).unwrap();
        assert_abs_diff_eq!(s.path.last()[0], 1.0, epsilon = 1e-14);
        let s = solve_young_ode(&VectorField::linear_scalar(), &[1.0], &unit_step(), &SolveConfig::default()).unwrap();
        assert_eq!(s.path.last()[0], 2.0);
        assert_eq!(s.path.eval(0.49).unwrap()[0], 1.0);
    }

    #[test]
    fn rk4_order() {
        let vf = VectorField::linear_scalar();
        let err = |mesh: f64| {
            let s = solve_young_ode(&vf, &[1.0], &identity(), &SolveConfig::fixed(mesh, Scheme::Rk4)).unwrap();
            (s.path.last()[0] - std::f64::consts::E).abs()
        };
        // √2 of driver increment per unit time because of the clock
        let (e1, e2) = (err(0.5), err(0.25));
        assert!((e1 / e2).log2() > 3.8, "{e1} {e2}");
    }

    #[test]
    fn marcus_examples() {
        let c = CadlagPath::constant(0.0, 1.0, &[0.0]).unwrap();
        let j = [Jump { time: 0.5, delta: vec![1.0] }];
        let s = solve_marcus(&VectorField::linear_scalar(), &[1.0], &j, &c, &SolveConfig::default()).unwrap();
        assert_abs_diff_eq!(s.path.last()[0], std::f64::consts::E, epsilon = 1e-9);
        let c2 = CadlagPath::constant(0.0, 1.0, &[0.0, 0.0]).unwrap();
        let j = [Jump { time: 0.5, delta: vec![1.0, 1.0] }];
        let s = solve_marcus(&VectorField::nonmarcus_example(), &[0.0, 0.0], &j, &c2, &SolveConfig::default()).unwrap();
        assert_abs_diff_eq!(s.path.last()[1], 0.5, epsilon = 1e-12);
        assert_eq!(s.path.left_limit(0.5).unwrap(), vec![0.0, 0.0]);
        let vf = VectorField::constant(vec![0.3], vec![1.0]).unwrap();
        let w = CadlagPath::sample_linear(0.0, 1.0, 9, |t| vec![t * t]).unwrap();
        let m = solve_marcus(&vf, &[0.2], &[], &w, &SolveConfig::default()).unwrap();
        let y = solve_young_ode(&vf, &[0.2], &w, &SolveConfig::default()).unwrap();
        assert!(sup_dist(&m.path, &y.path).unwrap() < 1e-8);
    }

    fn example_phi(h: impl Fn(f64) -> Vec<f64>) -> DecoratedPath {
        let sk = CadlagPath::step(vec![0.0, 0.5, 1.0], vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let ex = CadlagPath::sample_linear(0.0, 1.0, 257, h).unwrap();
        DecoratedPath::new(sk, vec![Decoration { time: 0.5, excursion: ex }]).unwrap()
    }

    #[test]
    fn nonmarcus_endpoints() {
        let vf = VectorField::nonmarcus_example();
        let cfg = SolveConfig::default();
        let s = solve_decorated_ode(&vf, &[0.0, 0.0], &example_phi(|s| vec![s, s * s]), 0.1, &cfg).unwrap();
        let x = s.path.skeleton().last().to_vec();
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 2.0 / 3.0, epsilon = 1e-5);
        let s = solve_decorated_ode(&vf, &[0.0, 0.0], &example_phi(|s| vec![s, s]), 0.1, &cfg).unwrap();
        assert_abs_diff_eq!(s.path.skeleton().last()[1], 0.5, epsilon = 1e-12);
        let l = trivial_lift(&example_phi(|s| vec![s, s]).skeleton().clone());
        let s = solve_decorated_ode(&vf, &[0.0, 0.0], &l, 0.1, &cfg).unwrap();
        assert_eq!(s.path.skeleton().last(), &[1.0, 0.0]);
        assert_eq!(s.extension.extended().times(), s.extension.extended().times());
    }

    #[test]
    fn drift_off_on_fictitious_intervals() {
        let vf = VectorField::constant_drift(vec![1.0], 1);
        let phi = linear_lift(&unit_step());
        let s = solve_decorated_ode(&vf, &[0.0], &phi, 0.4, &SolveConfig::default()).unwrap();
        let iv = s.extension.ledger()[0];
        let e = s.extension.extended();
        assert_eq!(e.eval(iv.u0).unwrap(), e.eval(0.5 * (iv.u0 + iv.u1)).unwrap());
        assert_abs_diff_eq!(s.path.skeleton().last()[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn blowup_is_reported() {
        let vf = VectorField::driftless(1, 1, |x, out| out[0] = x[0] * x[0]);
        let w = CadlagPath::scalar_linear(vec![0.0, 1.0], vec![0.0, 2.0]).unwrap();
        let r = solve_young_ode(&vf, &[1.0], &w, &SolveConfig::default());
        assert!(matches!(r, Err(Error::Divergence(_))), "{r:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn reparametrisation_equivariance(
            incs in prop::collection::vec(-1.0f64..1.0, 2..6),
            knots in prop::collection::vec(0.05f64..0.95, 1..4),
        ) {
            let n = incs.len();
            let times: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
            let mut v = vec![0.0];
            for d in &incs {
                v.push(v.last().unwrap() + d);
            }
            let w = CadlagPath::scalar_linear(times, v).unwrap();
            let mut k = knots.clone();
            k.sort_by(f64::total_cmp);
            k.dedup();
            let from: Vec<f64> = std::iter::once(0.0).chain(k.iter().copied()).chain([1.0]).collect();
            let to: Vec<f64> = (0..from.len()).map(|i| i as f64 / (from.len() - 1) as f64).collect();
            let rho = crate::path::TimeChange::new(from, to.clone()).unwrap();
            let w = w.insert_times(&to).unwrap();
            let vf = VectorField::driftless(1, 1, |x, out| out[0] = (x[0]).sin() + 1.0);
            let cfg = SolveConfig::default();
            let a = solve_young_ode(&vf, &[0.1], &w.compose(&rho).unwrap(), &cfg).unwrap().path;
            let b = solve_young_ode(&vf, &[0.1], &w, &cfg).unwrap().path.compose(&rho).unwrap();
            prop_assert!(sup_dist(&a, &b).unwrap() < 1e-7);
        }
    }
}
