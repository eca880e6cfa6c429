//! Exact p-variation of sampled paths.
//!
//! For `p ≥ 1` the map `x ↦ |x − y|^p` is convex, so a partition point in
//! the interior of an affine segment can always be moved to one of the
//! segment ends without decreasing the partition sum. The supremum over all
//! partitions of `[a, b]` is therefore attained on the vertex sequence of
//! [`CadlagPath::vertices`], where it is computed by dynamic programming
//!
//! ```text
//! run[j] = max_{m < j} run[m] + |v_j − v_m|^p
//! ```
//!
//! with dyadic-block pruning: `run` is non-decreasing, so a block of
//! candidates with center `c` and radius `r` cannot improve the current
//! best when `run[top] + (|v_j − c| + r)^p` does not exceed it.

use crate::error::{Error, Result};
use crate::path::{dist, CadlagPath};

const SLACK: f64 = 1e-12;

fn check_p(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::Parameter(format!("p-variation exponent must be ≥ 1, got {p}")));
    }
    Ok(())
}

/// `|h|_{p-var}`. `p = ∞` gives the oscillation `sup |h(s) − h(t)|`.
pub fn p_variation(h: &CadlagPath, p: f64) -> Result<f64> {
    check_p(p)?;
    let verts = h.vertices();
    let dim = h.dim();
    let mut flat: Vec<f64> = verts.concat();
    if dim == 1 {
        flat = scalar_extrema(&flat);
    }
    Ok(pvar_flat(&flat, dim, p))
}

/// p-variation of a polygon given by its vertices.
pub fn pvar_points(points: &[Vec<f64>], p: f64) -> Result<f64> {
    check_p(p)?;
    let dim = points.first().map_or(1, Vec::len);
    if points.iter().any(|x| x.len() != dim) {
        return Err(Error::Shape("points have inconsistent dimension".into()));
    }
    Ok(pvar_flat(&points.concat(), dim, p))
}

/// Drops interior points of strictly monotone runs of a scalar sequence.
/// Such points are dominated: `|a − c|^p ≥ |a − b|^p + |b − c|^p` when `b`
/// lies between `a` and `c`.
fn scalar_extrema(x: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(x.len());
    for &v in x {
        if out.last() == Some(&v) {
            continue;
        }
        if out.len() >= 2 {
            let a = out[out.len() - 2];
            let b = out[out.len() - 1];
            if (a < b && b < v) || (a > b && b > v) {
                out.pop();
            }
        }
        out.push(v);
    }
    out
}

struct Blocks {
    levels: Vec<Vec<f64>>,
}

impl Blocks {
    // level n ≥ 1 holds radius of block [i·2^n, (i+1)·2^n) around its
    // center index i·2^n + 2^{n−1}
    fn new(pts: &[f64], dim: usize, len: usize) -> Self {
        let mut levels = vec![Vec::new()];
        let mut n = 1;
        while (1usize << n) <= len {
            let size = 1usize << n;
            let nb = len / size;
            let mut rad = Vec::with_capacity(nb);
            for b in 0..nb {
                let start = b * size;
                let c = &pts[(start + size / 2) * dim..(start + size / 2 + 1) * dim];
                let r = (start..start + size)
                    .map(|m| dist(c, &pts[m * dim..(m + 1) * dim]))
                    .fold(0.0, f64::max);
                rad.push(r);
            }
            levels.push(rad);
            n += 1;
        }
        Self { levels }
    }

    fn max_level(&self) -> usize {
        self.levels.len() - 1
    }
}

/// Core DP on flat vertex storage; returns `(Σ|Δ|^p)^{1/p}` or the
/// diameter for infinite `p`.
pub(crate) fn pvar_flat(pts: &[f64], dim: usize, p: f64) -> f64 {
    let len = pts.len() / dim;
    if len < 2 {
        return 0.0;
    }
    let pt = |i: usize| &pts[i * dim..(i + 1) * dim];
    let blocks = Blocks::new(pts, dim, len);
    let inf = p.is_infinite();
    let pw = |d: f64| if p == 1.0 { d } else { d.powf(p) };
    let mut run = vec![0.0f64; len];
    let mut diam: f64 = 0.0;
    for j in 1..len {
        let vj = pt(j);
        let mut best = if inf {
            diam.max(dist(pt(j - 1), vj))
        } else {
            run[j - 1] + pw(dist(pt(j - 1), vj))
        };
        let mut m = j as isize - 2;
        while m >= 0 {
            let mu = m as usize;
            let mut n = ((mu + 1).trailing_zeros() as usize).min(blocks.max_level());
            loop {
                if n == 0 {
                    let d = dist(pt(mu), vj);
                    if inf {
                        best = best.max(d);
                    } else {
                        let cand = run[mu] + pw(d);
                        if cand > best {
                            best = cand;
                        }
                    }
                    m -= 1;
                    break;
                }
                let size = 1usize << n;
                let start = mu + 1 - size;
                let c = pt(start + size / 2);
                let reach = (dist(c, vj) + blocks.levels[n][start >> n]) * (1.0 + SLACK);
                let skip = if inf {
                    reach <= best
                } else {
                    run[mu] + pw(reach) <= best
                };
                if skip {
                    m = start as isize - 1;
                    break;
                }
                n -= 1;
            }
        }
        if inf {
            diam = best;
        } else {
            run[j] = best;
        }
    }
    if inf {
        diam
    } else if p == 1.0 {
        run[len - 1]
    } else {
        run[len - 1].powf(1.0 / p)
    }
}
