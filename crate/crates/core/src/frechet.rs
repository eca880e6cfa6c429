//! Fréchet and Skorokhod J1 distances via free-space diagrams.
//!
//! A path becomes a polygonal curve whose links are either *regular*
//! (affine pieces, traversed continuously) or *jumps* (left limit to right
//! value at one instant, never traversed through the middle). A monotone
//! matching may cross a jump of one curve only while the other curve sits
//! at a single point, or cross two jumps simultaneously.
//!
//! The J1 distance uses the time-augmented curves `t ↦ (t, h(t))` under the
//! norm `max(|Δt|, |Δx|)`, so the time discrepancy of the warp enters the
//! cost. The distance is bracketed by bisection on the free-space decision
//! problem; the returned value is always a feasible level, so it is an upper
//! bound within a relative slack of `1e-12`.

use crate::error::{Error, Result};
use crate::path::{check_same, dist, sup_dist, CadlagPath};

const SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Link {
    Regular,
    Jump,
}

#[derive(Debug, Clone)]
pub(crate) struct Curve {
    dim: usize,
    t: Vec<f64>,
    x: Vec<f64>,
    links: Vec<Link>,
}

impl Curve {
    pub(crate) fn from_path(h: &CadlagPath) -> Self {
        let dim = h.dim();
        let mut c = Curve {
            dim,
            t: vec![h.times()[0]],
            x: h.first().to_vec(),
            links: Vec::new(),
        };
        for k in 0..h.segments() {
            let t1 = h.times()[k + 1];
            c.t.push(t1);
            c.x.extend_from_slice(h.end(k));
            c.links.push(Link::Regular);
            if h.has_jump(k + 1) {
                c.t.push(t1);
                c.x.extend_from_slice(h.value(k + 1));
                c.links.push(Link::Jump);
            }
        }
        c
    }

    fn nodes(&self) -> usize {
        self.t.len()
    }

    fn xs(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    fn scale(&self) -> f64 {
        self.x
            .iter()
            .chain(&self.t)
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

type Iv = Option<(f64, f64)>;

fn clip(lo: f64, hi: f64) -> Iv {
    let (lo, hi) = (lo.max(0.0), hi.min(1.0));
    (lo <= hi).then_some((lo, hi))
}

fn meet(a: Iv, b: Iv) -> Iv {
    let ((a0, a1), (b0, b1)) = (a?, b?);
    clip(a0.max(b0), a1.min(b1))
}

fn from_min(a: Iv, m: f64) -> Iv {
    let (a0, a1) = a?;
    clip(a0.max(m), a1)
}

fn has0(a: Iv) -> bool {
    a.is_some_and(|(l, _)| l == 0.0)
}

fn has1(a: Iv) -> bool {
    a.is_some_and(|(_, h)| h == 1.0)
}

fn full(a: Iv) -> bool {
    has0(a) && has1(a)
}

struct Space<'a> {
    p: &'a Curve,
    q: &'a Curve,
    w: f64,
}

impl Space<'_> {
    fn ndist(&self, ta: f64, xa: &[f64], tb: f64, xb: &[f64]) -> f64 {
        let dx = dist(xa, xb);
        if self.w > 0.0 {
            dx.max(self.w * (ta - tb).abs())
        } else {
            dx
        }
    }

    fn pq(&self, i: usize, j: usize) -> f64 {
        self.ndist(self.p.t[i], self.p.xs(i), self.q.t[j], self.q.xs(j))
    }

    /// `{λ : |A + λ(B − A) − q| ≤ ε}` for the regular link `A → B`.
    fn seg_free(&self, c: &Curve, k: usize, tq: f64, xq: &[f64], eps: f64) -> Iv {
        let (xa, xb) = (c.xs(k), c.xs(k + 1));
        let (mut aa, mut ad, mut dd) = (0.0, 0.0, 0.0);
        for i in 0..c.dim {
            let a = xa[i] - xq[i];
            let d = xb[i] - xa[i];
            aa += a * a;
            ad += a * d;
            dd += d * d;
        }
        let e2 = eps * eps;
        let mut iv = if dd == 0.0 {
            if aa <= e2 {
                Some((0.0, 1.0))
            } else {
                None
            }
        } else {
            // foot of the perpendicular, with the offset evaluated directly
            // to avoid cancellation in the discriminant
            let lam = -ad / dd;
            let perp2: f64 = (0..c.dim)
                .map(|i| {
                    let r = xa[i] - xq[i] + lam * (xb[i] - xa[i]);
                    r * r
                })
                .sum();
            if perp2 > e2 {
                None
            } else {
                let s = ((e2 - perp2) / dd).sqrt();
                clip(lam - s, lam + s)
            }
        };
        if self.w > 0.0 && iv.is_some() {
            let a = c.t[k] - tq;
            let d = c.t[k + 1] - c.t[k];
            let r = eps / self.w;
            let tiv = if d == 0.0 {
                if a.abs() <= r {
                    Some((0.0, 1.0))
                } else {
                    None
                }
            } else {
                clip((-r - a) / d, (r - a) / d)
            };
            iv = meet(iv, tiv);
        }
        iv
    }

    /// Free set of link `k` of curve `c` against a node.
    fn link_free(&self, c: &Curve, k: usize, tq: f64, xq: &[f64], eps: f64) -> Iv {
        match c.links[k] {
            Link::Regular => self.seg_free(c, k, tq, xq, eps),
            Link::Jump => {
                let e = self.ndist(c.t[k], c.xs(k), tq, xq) <= eps;
                let v = self.ndist(c.t[k + 1], c.xs(k + 1), tq, xq) <= eps;
                match (e, v) {
                    (true, true) => Some((0.0, 1.0)),
                    (true, false) => Some((0.0, 0.0)),
                    (false, true) => Some((1.0, 1.0)),
                    (false, false) => None,
                }
            }
        }
    }

    // LF: node P_i vs Q link j
    fn lf(&self, i: usize, j: usize, eps: f64) -> Iv {
        self.link_free(self.q, j, self.p.t[i], self.p.xs(i), eps)
    }

    // BF: P link i vs node Q_j
    fn bf(&self, i: usize, j: usize, eps: f64) -> Iv {
        self.link_free(self.p, i, self.q.t[j], self.q.xs(j), eps)
    }

    fn decide(&self, eps: f64) -> bool {
        let (n1, n2) = (self.p.nodes() - 1, self.q.nodes() - 1);
        if self.pq(0, 0) > eps || self.pq(n1, n2) > eps {
            return false;
        }
        // reachable parts of the horizontal edges of the current row
        let mut bottom: Vec<Iv> = Vec::with_capacity(n1);
        let mut bfree: Vec<Iv> = (0..n1).map(|i| self.bf(i, 0, eps)).collect();
        let mut ok = true;
        for &f in &bfree {
            let r = if ok && has0(f) { f } else { None };
            ok = has1(r);
            bottom.push(r);
        }
        let mut left0_ok = true;
        for j in 0..n2 {
            let mut lfree = self.lf(0, j, eps);
            let mut left = if left0_ok && has0(lfree) { lfree } else { None };
            left0_ok = has1(left);
            let qj = self.q.links[j];
            for i in 0..n1 {
                let rfree = self.lf(i + 1, j, eps);
                let tfree = self.bf(i, j + 1, eps);
                let (l, b) = (left, bottom[i]);
                let (r, t) = match (self.p.links[i], qj) {
                    (Link::Regular, Link::Regular) => {
                        let r = if b.is_some() {
                            rfree
                        } else {
                            l.and_then(|(m, _)| from_min(rfree, m))
                        };
                        let t = if l.is_some() {
                            tfree
                        } else {
                            b.and_then(|(m, _)| from_min(tfree, m))
                        };
                        (r, t)
                    }
                    (Link::Jump, Link::Regular) => {
                        jump_cell(l, b, lfree, rfree, tfree)
                    }
                    (Link::Regular, Link::Jump) => {
                        let (t, r) = jump_cell(b, l, bfree[i], tfree, rfree);
                        (r, t)
                    }
                    (Link::Jump, Link::Jump) => {
                        let diag = self.pq(i, j) <= eps && self.pq(i + 1, j + 1) <= eps;
                        let c00 = has0(l) || has0(b);
                        let c10 = has1(b);
                        let c01 = has1(l);
                        let c11 = (c00 && diag) || (c01 && full(tfree)) || (c10 && full(rfree));
                        let pick = |side: bool, f: Iv| {
                            if side && has0(f) {
                                f
                            } else if c11 && has1(f) {
                                Some((1.0, 1.0))
                            } else {
                                None
                            }
                        };
                        (pick(c10, rfree), pick(c01, tfree))
                    }
                };
                left = r;
                lfree = rfree;
                bottom[i] = t;
                bfree[i] = tfree;
            }
            if j + 1 == n2 {
                return has1(left) || has1(bottom[n1 - 1]);
            }
        }
        false
    }
}

/// Cell whose horizontal link is a jump and vertical link regular. `l`,
/// `b` are the reachable entries, the free sets are those of the left,
/// right and top edges. Returns the reachable right and top edges.
fn jump_cell(l: Iv, b: Iv, lfree: Iv, rfree: Iv, tfree: Iv) -> (Iv, Iv) {
    let lmin = if has0(b) { Some(0.0) } else { l.map(|(m, _)| m) };
    let band = meet(lfree, rfree);
    let mut rmin: Option<f64> = has1(b).then_some(0.0);
    if let (Some(m), Some((y0, y1))) = (lmin, band) {
        let c = m.max(y0);
        if c <= y1 {
            rmin = Some(rmin.map_or(c, |r: f64| r.min(c)));
        }
    }
    let r = rmin.and_then(|m| from_min(rfree, m));
    let c01 = lmin.is_some_and(|m| has1(from_min(lfree, m)));
    let t = if c01 && has0(tfree) {
        tfree
    } else if has1(r) && has1(tfree) {
        Some((1.0, 1.0))
    } else {
        None
    };
    (r, t)
}

fn iterations(resolution: usize) -> Result<usize> {
    if resolution < 2 {
        return Err(Error::Parameter(format!("resolution must be ≥ 2, got {resolution}")));
    }
    let bits = (usize::BITS - (resolution - 1).leading_zeros()) as usize;
    Ok((2 * bits + 10).min(100))
}

/// Bisection on the decision problem. `upper` must be feasible when given.
fn bisect(p: &Curve, q: &Curve, w: f64, iters: usize, upper: Option<f64>) -> f64 {
    let sp = Space { p, q, w };
    let slack = SLACK * p.scale().max(q.scale()).max(1.0);
    let feasible = |e: f64| sp.decide(e + slack);
    let (n1, n2) = (p.nodes() - 1, q.nodes() - 1);
    let mut lo = sp.pq(0, 0).max(sp.pq(n1, n2));
    if feasible(lo) {
        return lo;
    }
    let mut hi = match upper {
        Some(u) if feasible(u) => u,
        _ => {
            let mut m: f64 = 0.0;
            for i in 0..=n1 {
                for j in 0..=n2 {
                    m = m.max(sp.pq(i, j));
                }
            }
            m
        }
    };
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Upper bound on the J1 distance together with the unwarped ceiling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct J1Bound {
    pub value: f64,
    pub sup_dist: f64,
}

/// `σ∞(h1, h2) = inf_ρ max(|ρ − Id|, |h1∘ρ − h2|)`. The bisection depth
/// grows with `resolution`, so the bound is non-increasing in it.
pub fn j1_dist(h1: &CadlagPath, h2: &CadlagPath, resolution: usize) -> Result<J1Bound> {
    check_same(h1, h2)?;
    let iters = iterations(resolution)?;
    let sd = sup_dist(h1, h2)?;
    let value = bisect(
        &Curve::from_path(h1),
        &Curve::from_path(h2),
        1.0,
        iters,
        Some(sd),
    )
    .min(sd);
    Ok(J1Bound { value, sup_dist: sd })
}

/// Fréchet distance of the images, ignoring time.
pub fn frechet_dist(h1: &CadlagPath, h2: &CadlagPath) -> Result<f64> {
    frechet_dist_with(h1, h2, 1 << 30)
}

pub fn frechet_dist_with(h1: &CadlagPath, h2: &CadlagPath, resolution: usize) -> Result<f64> {
    if h1.dim() != h2.dim() {
        return Err(Error::Shape(format!(
            "dimensions {} and {} differ",
            h1.dim(),
            h2.dim()
        )));
    }
    let iters = iterations(resolution)?;
    Ok(bisect(
        &Curve::from_path(h1),
        &Curve::from_path(h2),
        0.0,
        iters,
        None,
    ))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::path::TimeChange;
    use proptest::prelude::*;

    /// Discrete Fréchet distance on a dense sampling: an independent upper
    /// bound that converges to the continuous value as the grid refines.
    pub(crate) fn lattice_oracle(h1: &CadlagPath, h2: &CadlagPath, m: usize, w: f64) -> f64 {
        let sample = |h: &CadlagPath| {
            let (a, b) = h.domain();
            let mut ts: Vec<f64> = (0..=m).map(|k| a + (b - a) * k as f64 / m as f64).collect();
            ts.extend_from_slice(h.times());
            ts.sort_by(f64::total_cmp);
            ts.dedup();
            let mut out = Vec::new();
            for (k, &t) in ts.iter().enumerate() {
                if k > 0 {
                    out.push((t, h.left_limit(t).unwrap()));
                }
                out.push((t, h.eval(t).unwrap()));
            }
            out
        };
        let (p, q) = (sample(h1), sample(h2));
        let d = |a: &(f64, Vec<f64>), b: &(f64, Vec<f64>)| dist(&a.1, &b.1).max(w * (a.0 - b.0).abs());
        let mut prev = vec![f64::INFINITY; q.len()];
        for (i, pi) in p.iter().enumerate() {
            let mut cur = vec![f64::INFINITY; q.len()];
            for (j, qj) in q.iter().enumerate() {
                let best = if i == 0 && j == 0 {
                    0.0
                } else {
                    let mut b = f64::INFINITY;
                    if i > 0 {
                        b = b.min(prev[j]);
                    }
                    if j > 0 {
                        b = b.min(cur[j - 1]);
                    }
                    if i > 0 && j > 0 {
                        b = b.min(prev[j - 1]);
                    }
                    b
                };
                cur[j] = best.max(d(pi, qj));
            }
            prev = cur;
        }
        prev[q.len() - 1]
    }

    fn max_slope(h: &CadlagPath) -> f64 {
        (0..h.segments())
            .map(|k| dist(h.value(k), h.end(k)) / (h.times()[k + 1] - h.times()[k]))
            .fold(0.0, f64::max)
    }

    fn step_at(s: f64, h: f64) -> CadlagPath {
        CadlagPath::scalar_step(vec![0.0, s, 1.0], vec![0.0, h, h]).unwrap()
    }

    #[test]
    fn j1_spec_examples() {
        let a = step_at(0.5, 1.0);
        let b = step_at(0.6, 1.0);
        let r = j1_dist(&a, &b, 1 << 20).unwrap();
        assert!(j1_dist(&a, &b, 64).unwrap().value - 0.1 < 1.0 / 64.0);
        assert!((r.value - 0.1).abs() < 1e-9, "{r:?}");
        assert_eq!(r.sup_dist, 1.0);
        assert_eq!(j1_dist(&a, &a, 64).unwrap().value, 0.0);
        let half = step_at(0.5, 0.5);
        assert!((j1_dist(&a, &half, 64).unwrap().value - 0.5).abs() < 1e-9);
        assert!(j1_dist(&a, &b, 1).is_err());
    }

    #[test]
    fn frechet_spec_examples() {
        let l01 = CadlagPath::scalar_linear(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        let l02 = CadlagPath::scalar_linear(vec![0.0, 2.0], vec![0.0, 1.0]).unwrap();
        let l0to2 = CadlagPath::scalar_linear(vec![0.0, 1.0], vec![0.0, 2.0]).unwrap();
        assert_eq!(frechet_dist(&l01, &l02).unwrap(), 0.0);
        assert!((frechet_dist(&l01, &l0to2).unwrap() - 1.0).abs() < 1e-12);
        let rho = TimeChange::new(vec![0.0, 0.2, 1.0], vec![0.0, 0.7, 1.0]).unwrap();
        let h = CadlagPath::scalar_step(vec![0.0, 0.3, 0.6, 1.0], vec![0.0, 2.0, -1.0, 0.5]).unwrap();
        assert_eq!(frechet_dist(&h, &h.compose(&rho).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn jump_cannot_be_traversed() {
        // a jump 0→2 against a ramp 0→2: the ramp midpoint 1 must be matched
        // against 0 or 2
        let j = CadlagPath::scalar_step(vec![0.0, 0.5, 1.0], vec![0.0, 2.0, 2.0]).unwrap();
        let r = CadlagPath::scalar_linear(vec![0.0, 1.0], vec![0.0, 2.0]).unwrap();
        assert!((frechet_dist(&j, &r).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn matches_lattice_oracle_on_fixed_cases() {
        let a = CadlagPath::scalar_step(vec![0.0, 0.3, 0.7, 1.0], vec![0.0, 1.0, -0.5, 0.2]).unwrap();
        let b = CadlagPath::scalar_linear(vec![0.0, 0.4, 1.0], vec![0.1, 0.9, 0.0]).unwrap();
        let ours = j1_dist(&a, &b, 1 << 20).unwrap().value;
        let orc = lattice_oracle(&a, &b, 2000, 1.0);
        assert!((orc - ours).abs() < 2e-3, "{ours} {orc}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn j1_against_oracle(h1 in crate::path::tests::arb_path(5, 1), h2 in crate::path::tests::arb_path(5, 1)) {
            let ours = j1_dist(&h1, &h2, 1 << 20).unwrap();
            let m = 600;
            let orc = lattice_oracle(&h1, &h2, m, 1.0);
            // the lattice moves in grid steps, so it is off by at most one
            // step in time plus the value change over one step
            let tol = 2.0 * (1.0 + max_slope(&h1).max(max_slope(&h2))) / m as f64 + 1e-9;
            prop_assert!((ours.value - orc).abs() <= tol, "{} vs {} (tol {})", ours.value, orc, tol);
            prop_assert!(ours.value <= ours.sup_dist);
        }

        #[test]
        fn j1_symmetric_and_triangle(
            h1 in crate::path::tests::arb_path(6, 1),
            h2 in crate::path::tests::arb_path(6, 1),
            h3 in crate::path::tests::arb_path(6, 1),
        ) {
            let m = 1 << 16;
            let d12 = j1_dist(&h1, &h2, m).unwrap().value;
            let d21 = j1_dist(&h2, &h1, m).unwrap().value;
            let d23 = j1_dist(&h2, &h3, m).unwrap().value;
            let d13 = j1_dist(&h1, &h3, m).unwrap().value;
            prop_assert!((d12 - d21).abs() < 1e-9);
            prop_assert!(d13 <= d12 + d23 + 4.0 / m as f64);
        }

        #[test]
        fn j1_non_increasing_in_resolution(h1 in crate::path::tests::arb_path(6, 2), h2 in crate::path::tests::arb_path(6, 2)) {
            let mut prev = f64::INFINITY;
            for m in [2usize, 8, 64, 1024, 1 << 20] {
                let v = j1_dist(&h1, &h2, m).unwrap().value;
                prop_assert!(v <= prev);
                prev = v;
            }
        }

        #[test]
        fn frechet_zero_under_reparametrisation(
            h in crate::path::tests::arb_path(7, 2),
            knots in prop::collection::vec(0.05f64..0.95, 1..4),
            shift in prop::collection::vec(-0.04f64..0.04, 4),
        ) {
            let mut from: Vec<f64> = knots.clone();
            from.sort_by(f64::total_cmp);
            from.dedup();
            let mut to: Vec<f64> = from.iter().zip(&shift).map(|(f, s)| f + s).collect();
            to.sort_by(f64::total_cmp);
            from.insert(0, 0.0);
            from.push(1.0);
            to.insert(0, 0.0);
            to.push(1.0);
            prop_assume!(to.windows(2).all(|w| w[1] > w[0]) && from.windows(2).all(|w| w[1] > w[0]));
            let rho = TimeChange::new(from, to).unwrap();
            let g = h.compose(&rho).unwrap();
            prop_assert!(frechet_dist(&h, &g).unwrap() < 1e-9);
            prop_assert!(j1_dist(&g, &h, 1 << 20).unwrap().value <= rho.disc() + 1e-9);
        }
    }
}
