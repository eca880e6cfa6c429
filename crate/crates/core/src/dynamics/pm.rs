//! Pomeau–Manneville intermittent map
//! `T(y) = y(1 + (2y)^γ)` on `[0, ½)`, `2y − 1` on `[½, 1]`.
//!
//! With `Y = [½, 1]` every visit `y ∈ Y` moves to `w = 2y − 1` and the
//! return time is fixed by which preimage interval `[x_n, x_{n−1})` of the
//! left branch contains `w`. The induced map on `Y` is Gibbs–Markov with a
//! smooth invariant density `ρ`, computed here by collocation of its
//! transfer operator; `E_Y R` and the return-time tail constant follow
//! from `ρ` without Monte Carlo error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PmMap {
    pub gamma: f64,
}

impl PmMap {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.5 && gamma < 1.0) {
            return Err(Error::Parameter(format!("γ must lie in (1/2, 1), got {gamma}")));
        }
        Ok(Self { gamma })
    }

    /// Tail index `1/γ` of the return times.
    pub fn alpha(&self) -> f64 {
        1.0 / self.gamma
    }

    #[inline]
    pub fn step(&self, y: f64) -> f64 {
        if y < 0.5 {
            y * (1.0 + (2.0 * y).powf(self.gamma))
        } else {
            2.0 * y - 1.0
        }
    }

    /// `y_0, …, y_{n−1}`.
    pub fn orbit(&self, y0: f64, n: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(n);
        let mut y = y0;
        for _ in 0..n {
            out.push(y);
            y = self.step(y);
        }
        out
    }

    /// `n` further steps from `y`, returning the final state.
    pub fn advance(&self, mut y: f64, n: usize) -> f64 {
        for _ in 0..n {
            y = self.step(y);
        }
        y
    }

    fn left_derivative(&self, y: f64) -> f64 {
        1.0 + (1.0 + self.gamma) * (2.0 * y).powf(self.gamma)
    }

    /// Preimage of `x ∈ [0, 1]` under the left branch. Newton from above
    /// converges monotonically since the branch is convex.
    pub fn left_preimage(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let mut y = x.min(0.5);
        for _ in 0..100 {
            let h = y * (1.0 + (2.0 * y).powf(self.gamma)) - x;
            let next = y - h / self.left_derivative(y);
            if !(next < y) {
                break;
            }
            y = next;
        }
        y
    }
}

/// Chebyshev points of the second kind on `[a, b]` with barycentric
/// interpolation.
struct Cheb {
    a: f64,
    b: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Cheb {
    fn new(n: usize, a: f64, b: f64) -> Self {
        let nodes = (0..n)
            .map(|j| {
                let c = (std::f64::consts::PI * j as f64 / (n - 1) as f64).cos();
                0.5 * (a + b) + 0.5 * (b - a) * c
            })
            .collect();
        let weights = (0..n)
            .map(|j| {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == n - 1 {
                    0.5 * s
                } else {
                    s
                }
            })
            .collect();
        Self { a, b, nodes, weights }
    }

    /// Lagrange basis values `ℓ_j(x)`.
    fn basis(&self, x: f64, out: &mut [f64]) {
        if let Some(j) = self.nodes.iter().position(|&t| t == x) {
            out.fill(0.0);
            out[j] = 1.0;
            return;
        }
        let mut s = 0.0;
        for (j, (&t, &w)) in self.nodes.iter().zip(&self.weights).enumerate() {
            out[j] = w / (x - t);
            s += out[j];
        }
        for o in out.iter_mut() {
            *o /= s;
        }
    }

    fn eval(&self, f: &[f64], x: f64) -> f64 {
        let mut b = vec![0.0; f.len()];
        self.basis(x, &mut b);
        b.iter().zip(f).map(|(l, v)| l * v).sum()
    }

    /// `∫_c^e` of the interpolant by 20-point Gauss–Legendre.
    fn integrate(&self, f: &[f64], c: f64, e: f64) -> f64 {
        let (xs, ws) = gauss_legendre_20();
        let (m, r) = (0.5 * (c + e), 0.5 * (e - c));
        xs.iter().zip(ws).map(|(x, w)| w * self.eval(f, m + r * x)).sum::<f64>() * r
    }

    fn derivative_at_a(&self, f: &[f64]) -> f64 {
        let h = 1e-5 * (self.b - self.a);
        let a = self.a;
        (-3.0 * self.eval(f, a) + 4.0 * self.eval(f, a + h) - self.eval(f, a + 2.0 * h)) / (2.0 * h)
    }
}

pub(crate) fn gauss_legendre_20() -> (&'static [f64; 20], &'static [f64; 20]) {
    const X: [f64; 20] = [
        -0.9931285991850949, -0.9639719272779138, -0.9122344282513259, -0.8391169718222188,
        -0.7463319064601508, -0.6360536807265150, -0.5108670019508271, -0.3737060887154195,
        -0.2277858511416451, -0.0765265211334973, 0.0765265211334973, 0.2277858511416451,
        0.3737060887154195, 0.5108670019508271, 0.6360536807265150, 0.7463319064601508,
        0.8391169718222188, 0.9122344282513259, 0.9639719272779138, 0.9931285991850949,
    ];
    const W: [f64; 20] = [
        0.0176140071391521, 0.0406014298003869, 0.0626720483341091, 0.0832767415767048,
        0.1019301198172404, 0.1181945319615184, 0.1316886384491766, 0.1420961093183820,
        0.1491729864726037, 0.1527533871307258, 0.1527533871307258, 0.1491729864726037,
        0.1420961093183820, 0.1316886384491766, 0.1181945319615184, 0.1019301198172404,
        0.0832767415767048, 0.0626720483341091, 0.0406014298003869, 0.0176140071391521,
    ];
    (&X, &W)
}

/// Constants of the induced system on `Y = [½, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmInduced {
    /// `E_Y R`, so `μ(Y) = 1 / E_Y R`.
    pub mean_return: f64,
    /// Induced density at `½`.
    pub density_half: f64,
    /// `lim t^α P_Y(R > t)`.
    pub tail_const: f64,
    /// Spectral residual `|Pρ − ρ|∞` of the collocated fixed point.
    pub residual: f64,
}

impl PmInduced {
    /// `R̄` for the unit-tail stable law: the Lévy tail of the excursion
    /// lengths per unit time is `x^{−α}` after scaling by `R̄^{−1/α}`.
    pub fn stable_scale(&self) -> f64 {
        self.mean_return / self.tail_const
    }
}

/// Collocation of the induced transfer operator with `nodes` Chebyshev
/// points and branches `R ≤ depth + 1`.
pub fn induced_constants(map: &PmMap, nodes: usize, depth: usize) -> Result<PmInduced> {
    if nodes < 4 || depth < 10 {
        return Err(Error::Parameter("need at least 4 nodes and depth 10".into()));
    }
    let g = map.gamma;
    let cheb = Cheb::new(nodes, 0.5, 1.0);
    let mut m = vec![0.0; nodes * nodes];
    let mut basis = vec![0.0; nodes];
    for i in 0..nodes {
        let z = cheb.nodes[i];
        let row = &mut m[i * nodes..(i + 1) * nodes];
        // R = 1: w = z
        cheb.basis(0.5 * (z + 1.0), &mut basis);
        for (r, b) in row.iter_mut().zip(&basis) {
            *r += 0.5 * b;
        }
        let mut w = z;
        let mut jac = 0.5;
        for _ in 0..depth {
            w = map.left_preimage(w);
            jac /= map.left_derivative(w);
            cheb.basis(0.5 * (w + 1.0), &mut basis);
            for (r, b) in row.iter_mut().zip(&basis) {
                *r += jac * b;
            }
        }
    }
    let mut rho = vec![1.0; nodes];
    let mut residual = f64::INFINITY;
    for _ in 0..500 {
        let next: Vec<f64> = (0..nodes)
            .map(|i| m[i * nodes..(i + 1) * nodes].iter().zip(&rho).map(|(a, b)| a * b).sum())
            .collect();
        let total = cheb.integrate(&next, 0.5, 1.0);
        let next: Vec<f64> = next.iter().map(|v| v / total).collect();
        residual = next.iter().zip(&rho).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        rho = next;
        if residual < 1e-14 {
            break;
        }
    }
    if residual > 1e-10 {
        return Err(Error::Accuracy(format!("induced density iteration stalled at {residual}")));
    }
    let density_half = cheb.eval(&rho, 0.5);
    let slope = cheb.derivative_at_a(&rho);

    // E_Y R = Σ_{n ≥ 0} P(R > n), P(R > n) = ∫_½^{(1 + x_{n−1})/2} ρ
    let tail_len = 1_000_000usize;
    let mut mean = 1.0;
    let mut x = 0.5;
    for n in 1..=tail_len {
        let len = 0.5 * x;
        mean += if n <= 200 {
            cheb.integrate(&rho, 0.5, 0.5 + len)
        } else {
            density_half * len + 0.5 * slope * len * len
        };
        x = map.left_preimage(x);
    }
    // x = x_N with N = tail_len; x_n ≈ (γ2^γ n + C)^{−1/γ}
    let k = g * 2f64.powf(g);
    let c = x.powf(-g) - k * tail_len as f64;
    let s0 = k * (tail_len as f64 + 0.5) + c;
    mean += 0.5 * density_half * s0.powf(1.0 - 1.0 / g) / (k * (1.0 / g - 1.0));
    Ok(PmInduced {
        mean_return: mean,
        density_half,
        tail_const: 0.5 * density_half * k.powf(-1.0 / g),
        residual,
    })
}

/// `v(y) = v₀` off `Y` and `v₀(1 − E_Y R)` on `Y`: exactly mean zero, with
/// `v(0) = v₀` and straight excursion profiles `P(s) = s v₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmObservable {
    pub v0: Vec<f64>,
    pub mean_return: f64,
}

impl PmObservable {
    pub fn new(v0: Vec<f64>, induced: &PmInduced) -> Self {
        Self {
            v0,
            mean_return: induced.mean_return,
        }
    }

    pub fn dim(&self) -> usize {
        self.v0.len()
    }

    #[inline]
    pub fn eval_into(&self, y: f64, out: &mut [f64]) {
        let f = if y < 0.5 { 1.0 } else { 1.0 - self.mean_return };
        for (o, v) in out.iter_mut().zip(&self.v0) {
            *o = f * v;
        }
    }

    pub fn eval(&self, y: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(y, &mut out);
        out
    }
}

/// Return times to `Y` read off an orbit: `(time of visit, R)` for every
/// visit whose next visit is inside the orbit.
pub fn returns_to_y(orbit: &[f64]) -> Vec<(usize, u64)> {
    let visits: Vec<usize> = orbit.iter().enumerate().filter(|(_, &y)| y >= 0.5).map(|(k, _)| k).collect();
    visits.windows(2).map(|w| (w[0], (w[1] - w[0]) as u64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::Rng;

    #[test]
    fn branch_examples() {
        let m = PmMap::new(2.0 / 3.0).unwrap();
        assert_eq!(m.step(0.75), 0.5);
        assert_eq!(m.orbit(0.0, 5), vec![0.0; 5]);
        assert_eq!(m.step(0.5), 0.0);
        assert!((m.step(0.25) - 0.25 * (1.0 + 0.5f64.powf(2.0 / 3.0))).abs() < 1e-16);
        assert_eq!(m.left_preimage(1.0), 0.5);
        for x in [1e-9, 0.01, 0.3, 0.99] {
            let e = (m.step(m.left_preimage(x)) - x).abs();
            assert!(e <= 4.0 * f64::EPSILON * x, "{x} {e}");
        }
        assert!(PmMap::new(0.4).is_err());
    }

    #[test]
    fn induced_constants_converge() {
        let m = PmMap::new(2.0 / 3.0).unwrap();
        let a = induced_constants(&m, 24, 20_000).unwrap();
        let b = induced_constants(&m, 40, 40_000).unwrap();
        assert!((a.mean_return - b.mean_return).abs() < 1e-6 * b.mean_return, "{a:?} {b:?}");
        assert!((a.tail_const - b.tail_const).abs() < 1e-6 * b.tail_const);
        assert!(a.mean_return > 1.0);
    }

    #[test]
    fn mean_return_matches_orbit_average() {
        let m = PmMap::new(2.0 / 3.0).unwrap();
        let ind = induced_constants(&m, 32, 20_000).unwrap();
        let mut r = stream(4, 0);
        let mut total = 0u64;
        let mut count = 0u64;
        let mut y = r.random::<f64>();
        let mut last = None;
        for k in 0..4_000_000u64 {
            if y >= 0.5 {
                if let Some(l) = last {
                    total += k - l;
                    count += 1;
                }
                last = Some(k);
            }
            y = m.step(y);
        }
        let emp = total as f64 / count as f64;
        // heavy-tailed average: loose check only
        assert!((emp - ind.mean_return).abs() < 0.05 * ind.mean_return, "{emp} vs {ind:?}");
        let obs = PmObservable::new(vec![1.0], &ind);
        assert_eq!(obs.eval(0.1), vec![1.0]);
        assert!((obs.eval(0.7)[0] - (1.0 - ind.mean_return)).abs() < 1e-15);
    }
}
