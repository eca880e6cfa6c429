//! Time-warp dynamic programming and the Skorokhod p-variation distance
//!
//! ```text
//! σ_{p-var}(h1, h2) = inf_ρ max{ |ρ − Id|, |(h1∘ρ − h2)(a)| + |h1∘ρ − h2|_{p-var} }
//! ```
//!
//! The infimum is bounded from above by evaluating the cost exactly on a
//! small set of candidate warps: the identity and the bottleneck-optimal
//! monotone lattice path for the uniform cost on a grid of `resolution`
//! points refined by both breakpoint sets.

use crate::error::{Error, Result};
use crate::path::{check_same, dist, sup_dist, union_grid, CadlagPath, Mode, TimeChange};
use crate::pvar::p_variation;

/// Pointwise difference `h1 − h2` on the union grid.
pub fn difference(h1: &CadlagPath, h2: &CadlagPath) -> Result<CadlagPath> {
    check_same(h1, h2)?;
    let u = union_grid(h1.times(), h2.times());
    let d = h1.dim();
    let n = u.len();
    let mut values = Vec::with_capacity(n * d);
    let mut modes = Vec::with_capacity(n - 1);
    let mut ends = Vec::with_capacity((n - 1) * d);
    let (mut k1, mut k2) = (0usize, 0usize);
    for (i, &t) in u.iter().enumerate() {
        while k1 + 1 < h1.segments() && h1.times()[k1 + 1] <= t {
            k1 += 1;
        }
        while k2 + 1 < h2.segments() && h2.times()[k2 + 1] <= t {
            k2 += 1;
        }
        if i + 1 == n {
            values.extend(h1.last().iter().zip(h2.last()).map(|(a, b)| a - b));
            break;
        }
        let x = h1.seg_point(k1, t);
        let y = h2.seg_point(k2, t);
        values.extend(x.iter().zip(&y).map(|(a, b)| a - b));
        let t1 = u[i + 1];
        let xe = h1.seg_point(k1, t1);
        let ye = h2.seg_point(k2, t1);
        ends.extend(xe.iter().zip(&ye).map(|(a, b)| a - b));
        modes.push(if h1.mode(k1) == Mode::Step && h2.mode(k2) == Mode::Step {
            Mode::Step
        } else {
            Mode::Linear
        });
    }
    CadlagPath::from_flat(d, u, values, modes, Some(ends))
}

/// `‖f‖_{p-var} = |f(a)| + |f|_{p-var}`.
pub fn pvar_norm(f: &CadlagPath, p: f64) -> Result<f64> {
    Ok(f.first().iter().map(|v| v * v).sum::<f64>().sqrt() + p_variation(f, p)?)
}

/// A candidate warp with its exact uniform cost `max(|ρ − Id|, |h1∘ρ − h2|∞)`.
#[derive(Debug, Clone)]
pub struct Warp {
    pub rho: TimeChange,
    pub cost: f64,
}

/// Warp of `h2`'s time onto `h1`'s time minimizing the lattice bottleneck
/// cost, ties broken toward the diagonal and then toward smaller time
/// discrepancy.
pub fn lattice_warp(h1: &CadlagPath, h2: &CadlagPath, resolution: usize) -> Result<Warp> {
    check_same(h1, h2)?;
    if resolution < 2 {
        return Err(Error::Parameter(format!("resolution must be ≥ 2, got {resolution}")));
    }
    let (a, b) = h1.domain();
    let uniform: Vec<f64> = (0..resolution)
        .map(|k| a + (b - a) * k as f64 / (resolution - 1) as f64)
        .chain([b])
        .collect();
    let g = union_grid(&union_grid(h1.times(), h2.times()), &uniform);
    let kk = g.len();
    let sample = |h: &CadlagPath| -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let r = g.iter().map(|&t| h.eval(t).expect("grid inside domain")).collect();
        let l = g
            .iter()
            .enumerate()
            .map(|(i, &t)| if i == 0 { h.first().to_vec() } else { h.left_limit(t).expect("grid inside domain") })
            .collect();
        (r, l)
    };
    let (r1, l1) = sample(h1);
    let (r2, l2) = sample(h2);
    let last = kk - 1;
    // pausing at b is the limit of steep warps approaching b from below
    let v1 = |i: usize, j: usize| if i == last && j < last { &l1[last] } else { &r1[i] };
    let v2 = |i: usize, j: usize| if j == last && i < last { &l2[last] } else { &r2[j] };
    let node = |i: usize, j: usize| (g[i] - g[j]).abs().max(dist(v1(i, j), v2(i, j)));
    let mut best = vec![f64::INFINITY; kk * kk];
    let mut from = vec![0u8; kk * kk];
    best[0] = node(0, 0);
    for i in 0..kk {
        for j in 0..kk {
            if i == 0 && j == 0 {
                continue;
            }
            let mut cand: Option<(f64, f64, u8)> = None;
            let mut offer = |val: f64, disc: f64, dir: u8| {
                let better = match cand {
                    None => true,
                    Some((bv, bd, _)) => val < bv || (val == bv && disc < bd),
                };
                if better {
                    cand = Some((val, disc, dir));
                }
            };
            if i > 0 && j > 0 {
                let e = dist(&l1[i], &l2[j]);
                offer(best[(i - 1) * kk + j - 1].max(e), (g[i - 1] - g[j - 1]).abs(), 0);
            }
            if i > 0 {
                let e = dist(&l1[i], v2(i - 1, j));
                offer(best[(i - 1) * kk + j].max(e), (g[i - 1] - g[j]).abs(), 1);
            }
            if j > 0 {
                let e = dist(v1(i, j - 1), &l2[j]);
                offer(best[i * kk + j - 1].max(e), (g[i] - g[j - 1]).abs(), 2);
            }
            let (v, _, dir) = cand.expect("a predecessor exists");
            best[i * kk + j] = v.max(node(i, j));
            from[i * kk + j] = dir;
        }
    }
    // backtrack to (t, s) pairs, keep a strictly increasing subsequence
    let mut pts = vec![(last, last)];
    let (mut i, mut j) = (last, last);
    while i > 0 || j > 0 {
        match from[i * kk + j] {
            0 => {
                i -= 1;
                j -= 1;
            }
            1 => i -= 1,
            _ => j -= 1,
        }
        pts.push((i, j));
    }
    pts.reverse();
    let mut ts = vec![a];
    let mut ss = vec![a];
    for &(i, j) in &pts[1..] {
        let (s, t) = (g[i], g[j]);
        if (i == last) != (j == last) {
            continue;
        }
        if t > *ts.last().unwrap() && s > *ss.last().unwrap() {
            ts.push(t);
            ss.push(s);
        }
    }
    let rho = TimeChange::new(ts, ss)?;
    let cost = j1_cost(h1, h2, &rho)?;
    Ok(Warp { rho, cost })
}

fn j1_cost(h1: &CadlagPath, h2: &CadlagPath, rho: &TimeChange) -> Result<f64> {
    Ok(rho.disc().max(sup_dist(&h1.compose(rho)?, h2)?))
}

fn pvar_cost(h1: &CadlagPath, h2: &CadlagPath, rho: &TimeChange, p: f64) -> Result<f64> {
    let diff = difference(&h1.compose(rho)?, h2)?;
    Ok(rho.disc().max(pvar_norm(&diff, p)?))
}

/// Upper bound on `σ_{p-var}` and the best uniform (J1) cost over the same
/// candidate warps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaBound {
    pub value: f64,
    pub j1_cost: f64,
}

pub fn sigma_pvar(h1: &CadlagPath, h2: &CadlagPath, p: f64, resolution: usize) -> Result<SigmaBound> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::Parameter(format!("p-variation exponent must be ≥ 1, got {p}")));
    }
    let (a, b) = h1.domain();
    let id = TimeChange::identity(a, b)?;
    let lw = lattice_warp(h1, h2, resolution)?;
    let mut value = f64::INFINITY;
    let mut best_j1 = f64::INFINITY;
    for (rho, j1) in [(id.clone(), j1_cost(h1, h2, &id)?), (lw.rho, lw.cost)] {
        value = value.min(pvar_cost(h1, h2, &rho, p)?);
        best_j1 = best_j1.min(j1);
    }
    Ok(SigmaBound {
        value,
        j1_cost: best_j1,
    })
}
