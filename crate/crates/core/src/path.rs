//! Sampled càdlàg paths on a compact interval.
//!
//! A [`CadlagPath`] stores a strictly increasing grid `t_0 < … < t_N`, one
//! right value per grid time and one interpolation mode per segment. Each
//! segment also carries its *end*: the left limit at `t_{k+1}`. For a
//! [`Mode::Step`] segment the end equals the segment value. For a
//! [`Mode::Linear`] segment it is the endpoint of the affine piece, which
//! usually equals the next value but may differ from it when a linear ramp
//! is followed by a jump.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Step,
    Linear,
}

/// Euclidean norm of a difference.
#[inline]
pub fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

#[inline]
pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|a| a * a).sum::<f64>().sqrt()
}

#[inline]
fn lerp(v: f64, e: f64, lam: f64) -> f64 {
    (1.0 - lam) * v + lam * e
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PathRepr", into = "PathRepr")]
pub struct CadlagPath {
    dim: usize,
    times: Vec<f64>,
    values: Vec<f64>,
    modes: Vec<Mode>,
    ends: Vec<f64>,
}

impl CadlagPath {
    /// Builds a path from flat storage. `ends` defaults to the continuous
    /// choice (step: hold, linear: reach the next value).
    pub fn from_flat(
        dim: usize,
        times: Vec<f64>,
        values: Vec<f64>,
        modes: Vec<Mode>,
        ends: Option<Vec<f64>>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Shape("dimension must be at least 1".into()));
        }
        let n = times.len();
        if n < 2 {
            return Err(Error::Shape(format!("need at least 2 grid times, got {n}")));
        }
        if values.len() != n * dim {
            return Err(Error::Shape(format!(
                "{} values for {n} times of dimension {dim}",
                values.len()
            )));
        }
        if modes.len() != n - 1 {
            return Err(Error::Shape(format!(
                "{} modes for {} segments",
                modes.len(),
                n - 1
            )));
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Shape("times must be finite and strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Shape("values must be finite".into()));
        }
        let ends = match ends {
            Some(e) => {
                if e.len() != (n - 1) * dim {
                    return Err(Error::Shape(format!(
                        "{} end values for {} segments",
                        e.len(),
                        n - 1
                    )));
                }
                if e.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Shape("end values must be finite".into()));
                }
                for (k, m) in modes.iter().enumerate() {
                    if *m == Mode::Step && e[k * dim..(k + 1) * dim] != values[k * dim..(k + 1) * dim]
                    {
                        return Err(Error::Shape(format!(
                            "step segment {k} has an end different from its value"
                        )));
                    }
                }
                e
            }
            None => {
                let mut e = Vec::with_capacity((n - 1) * dim);
                for (k, m) in modes.iter().enumerate() {
                    let src = match m {
                        Mode::Step => k,
                        Mode::Linear => k + 1,
                    };
                    e.extend_from_slice(&values[src * dim..(src + 1) * dim]);
                }
                e
            }
        };
        Ok(Self {
            dim,
            times,
            values,
            modes,
            ends,
        })
    }

    pub fn new(times: Vec<f64>, values: Vec<Vec<f64>>, modes: Vec<Mode>) -> Result<Self> {
        let dim = values.first().map_or(0, Vec::len);
        if values.iter().any(|v| v.len() != dim) {
            return Err(Error::Shape("values have inconsistent dimension".into()));
        }
        Self::from_flat(dim, times, values.concat(), modes, None)
    }

    pub fn step(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        let m = times.len().saturating_sub(1);
        Self::new(times, values, vec![Mode::Step; m])
    }

    pub fn linear(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        let m = times.len().saturating_sub(1);
        Self::new(times, values, vec![Mode::Linear; m])
    }

    pub fn scalar_step(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let m = times.len().saturating_sub(1);
        Self::from_flat(1, times, values, vec![Mode::Step; m], None)
    }

    pub fn scalar_linear(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let m = times.len().saturating_sub(1);
        Self::from_flat(1, times, values, vec![Mode::Linear; m], None)
    }

    pub fn constant(a: f64, b: f64, value: &[f64]) -> Result<Self> {
        Self::from_flat(
            value.len(),
            vec![a, b],
            [value, value].concat(),
            vec![Mode::Step],
            None,
        )
    }

    /// Samples `f` at `n + 1` uniform points and joins them linearly.
    pub fn sample_linear(a: f64, b: f64, n: usize, f: impl Fn(f64) -> Vec<f64>) -> Result<Self> {
        let n = n.max(1);
        let times: Vec<f64> = (0..=n)
            .map(|k| if k == n { b } else { a + (b - a) * k as f64 / n as f64 })
            .collect();
        let values = times.iter().map(|&t| f(t)).collect();
        Self::linear(times, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn segments(&self) -> usize {
        self.modes.len()
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.times[0], self.times[self.times.len() - 1])
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn mode(&self, k: usize) -> Mode {
        self.modes[k]
    }

    pub fn value(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    /// Left limit at `t_{k+1}` of segment `k`.
    pub fn end(&self, k: usize) -> &[f64] {
        &self.ends[k * self.dim..(k + 1) * self.dim]
    }

    pub fn first(&self) -> &[f64] {
        self.value(0)
    }

    pub fn last(&self) -> &[f64] {
        self.value(self.len() - 1)
    }

    pub(crate) fn flat_values(&self) -> &[f64] {
        &self.values
    }

    /// Jump at grid point `k ≥ 1`: value minus left limit.
    pub fn jump_at(&self, k: usize) -> Vec<f64> {
        self.value(k)
            .iter()
            .zip(self.end(k - 1))
            .map(|(v, e)| v - e)
            .collect()
    }

    pub fn has_jump(&self, k: usize) -> bool {
        k >= 1 && self.value(k) != self.end(k - 1)
    }

    /// Grid indices carrying a nonzero jump.
    pub fn jump_indices(&self) -> Vec<usize> {
        (1..self.len()).filter(|&k| self.has_jump(k)).collect()
    }

    /// True when every end matches the following value.
    pub fn is_continuous(&self) -> bool {
        self.jump_indices().is_empty()
    }

    /// Whether some linear segment ends away from the next value.
    pub fn has_linear_jump(&self) -> bool {
        (0..self.segments()).any(|k| self.modes[k] == Mode::Linear && self.has_jump(k + 1))
    }

    pub(crate) fn seg_point_into(&self, k: usize, t: f64, out: &mut [f64]) {
        let v = self.value(k);
        match self.modes[k] {
            Mode::Step => out.copy_from_slice(v),
            Mode::Linear => {
                let (t0, t1) = (self.times[k], self.times[k + 1]);
                let lam = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
                let e = self.end(k);
                for i in 0..self.dim {
                    out[i] = lerp(v[i], e[i], lam);
                }
            }
        }
    }

    /// Evaluates segment `k`'s affine piece at `t ∈ [t_k, t_{k+1}]`.
    pub fn seg_point(&self, k: usize, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.seg_point_into(k, t, &mut out);
        out
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        let (a, b) = self.domain();
        if !(a..=b).contains(&t) {
            return Err(Error::Domain { t, a, b });
        }
        Ok(())
    }

    /// Segment index containing `t` in the right-continuous sense, or
    /// `len() - 1` for `t = b`.
    pub fn locate(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s <= t).saturating_sub(1)
    }

    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        self.check_domain(t)?;
        let k = self.locate(t);
        if k + 1 == self.len() {
            return Ok(self.last().to_vec());
        }
        Ok(self.seg_point(k, t))
    }

    pub fn left_limit(&self, t: f64) -> Result<Vec<f64>> {
        self.check_domain(t)?;
        let (a, b) = self.domain();
        if t <= a {
            return Err(Error::Domain { t, a, b });
        }
        let k = self.times.partition_point(|&s| s < t) - 1;
        Ok(self.seg_point(k, t))
    }

    /// Alternating sequence of right values and distinct segment ends.
    /// Every partition sum of the path is dominated by a partition sum of
    /// this sequence, so p-variation and diameter can be computed on it.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let mut out = vec![self.first().to_vec()];
        for k in 0..self.segments() {
            let e = self.end(k);
            if e != self.value(k) {
                out.push(e.to_vec());
            }
            if self.value(k + 1) != e {
                out.push(self.value(k + 1).to_vec());
            }
        }
        out
    }

    /// Refines the grid with extra times without changing the path.
    pub fn insert_times(&self, extra: &[f64]) -> Result<Self> {
        let (a, b) = self.domain();
        let mut extra: Vec<f64> = extra.to_vec();
        for &t in &extra {
            self.check_domain(t)?;
        }
        extra.sort_by(f64::total_cmp);
        extra.dedup();
        let d = self.dim;
        let mut times = Vec::with_capacity(self.len() + extra.len());
        let mut values = Vec::new();
        let mut modes = Vec::new();
        let mut ends = Vec::new();
        let mut it = extra.into_iter().filter(|&t| t > a && t < b).peekable();
        for k in 0..self.segments() {
            times.push(self.times[k]);
            values.extend_from_slice(self.value(k));
            let (t0, t1) = (self.times[k], self.times[k + 1]);
            while it.peek().is_some_and(|&t| t <= t0) {
                it.next();
            }
            while let Some(&t) = it.peek() {
                if t >= t1 {
                    break;
                }
                it.next();
                let p = self.seg_point(k, t);
                modes.push(self.modes[k]);
                ends.extend_from_slice(&p);
                times.push(t);
                values.extend_from_slice(&p);
            }
            modes.push(self.modes[k]);
            ends.extend_from_slice(self.end(k));
        }
        times.push(b);
        values.extend_from_slice(self.last());
        Self::from_flat(d, times, values, modes, Some(ends))
    }

    /// Restriction to `[c, e] ⊂ [a, b]`.
    pub fn restrict(&self, c: f64, e: f64) -> Result<Self> {
        self.check_domain(c)?;
        self.check_domain(e)?;
        if e <= c {
            return Err(Error::Parameter(format!("empty restriction [{c}, {e}]")));
        }
        let p = self.insert_times(&[c, e])?;
        let i0 = p.times.partition_point(|&s| s < c);
        let i1 = p.times.partition_point(|&s| s <= e) - 1;
        let d = p.dim;
        Self::from_flat(
            d,
            p.times[i0..=i1].to_vec(),
            p.values[i0 * d..(i1 + 1) * d].to_vec(),
            p.modes[i0..i1].to_vec(),
            Some(p.ends[i0 * d..i1 * d].to_vec()),
        )
    }

    /// Applies `f` pointwise to every stored value and end.
    pub fn map_points(&self, out_dim: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        let values: Vec<f64> = self.values.chunks(self.dim).flat_map(&f).collect();
        let ends: Vec<f64> = self.ends.chunks(self.dim).flat_map(&f).collect();
        Self::from_flat(out_dim, self.times.clone(), values, self.modes.clone(), Some(ends))
    }

    /// Applies the matrix `g` (`rows × dim`, row-major) pointwise.
    pub fn matrix_apply(&self, g: &[f64], rows: usize) -> Result<Self> {
        if g.len() != rows * self.dim {
            return Err(Error::Shape(format!(
                "matrix of {} entries is not {rows}x{}",
                g.len(),
                self.dim
            )));
        }
        let d = self.dim;
        self.map_points(rows, |x| {
            (0..rows)
                .map(|r| (0..d).map(|c| g[r * d + c] * x[c]).sum())
                .collect()
        })
    }

    /// The path `t ↦ (t, h(t))` in one more dimension. Every segment is
    /// linear since the clock moves.
    pub fn with_clock(&self) -> Self {
        let d = self.dim;
        let mut values = Vec::with_capacity(self.len() * (d + 1));
        let mut ends = Vec::with_capacity(self.segments() * (d + 1));
        for k in 0..self.len() {
            values.push(self.times[k]);
            values.extend_from_slice(self.value(k));
        }
        for k in 0..self.segments() {
            ends.push(self.times[k + 1]);
            ends.extend_from_slice(self.end(k));
        }
        Self {
            dim: d + 1,
            times: self.times.clone(),
            values,
            modes: vec![Mode::Linear; self.segments()],
            ends,
        }
    }

    /// Shifts and scales time affinely onto `[c, e]`.
    pub fn rescale_time(&self, c: f64, e: f64) -> Result<Self> {
        let (a, b) = self.domain();
        let n = self.len();
        let times: Vec<f64> = self
            .times
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                if k == 0 {
                    c
                } else if k + 1 == n {
                    e
                } else {
                    c + (e - c) * (t - a) / (b - a)
                }
            })
            .collect();
        Self::from_flat(
            self.dim,
            times,
            self.values.clone(),
            self.modes.clone(),
            Some(self.ends.clone()),
        )
    }

    /// The path `h ∘ ρ` on the domain of `ρ`.
    pub fn compose(&self, rho: &TimeChange) -> Result<Self> {
        let (a, b) = self.domain();
        let (ra, rb) = rho.range();
        if ra != a || rb != b {
            return Err(Error::Shape(format!(
                "time change range [{ra}, {rb}] differs from path domain [{a}, {b}]"
            )));
        }
        // (u, source time) pairs from both grids
        let mut pts: Vec<(f64, f64)> = rho.from.iter().copied().zip(rho.to.iter().copied()).collect();
        for &t in &self.times[1..self.len() - 1] {
            pts.push((rho.inverse(t)?, t));
        }
        pts.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
        for p in pts {
            match merged.last_mut() {
                Some(q) if q.0 == p.0 => {
                    if self.times.binary_search_by(|s| s.total_cmp(&p.1)).is_ok() {
                        *q = p;
                    }
                }
                _ => merged.push(p),
            }
        }
        let d = self.dim;
        let n = merged.len();
        let mut times = Vec::with_capacity(n);
        let mut values = Vec::with_capacity(n * d);
        let mut modes = Vec::with_capacity(n - 1);
        let mut ends = Vec::with_capacity((n - 1) * d);
        let mut buf = vec![0.0; d];
        for i in 0..n {
            let (u, s) = merged[i];
            times.push(u);
            let k = self.locate(s);
            if k + 1 == self.len() {
                values.extend_from_slice(self.last());
            } else {
                self.seg_point_into(k, s, &mut buf);
                values.extend_from_slice(&buf);
            }
            if i + 1 < n {
                let k = k.min(self.segments() - 1);
                modes.push(self.modes[k]);
                self.seg_point_into(k, merged[i + 1].1, &mut buf);
                ends.extend_from_slice(&buf);
            }
        }
        Self::from_flat(d, times, values, modes, Some(ends))
    }

    /// Writes `t,x1..xd,mode` rows with round-trip exact numbers. A linear
    /// segment ending in a jump is followed by an extra row with mode
    /// `left` holding the left limit at the same time.
    pub fn to_csv(&self) -> String {
        self.csv_with(|x| format!("{x:?}"))
    }

    /// Same layout with a fixed number of significant digits.
    pub fn to_csv_sig(&self, digits: usize) -> String {
        self.csv_with(|x| format_sig(x, digits))
    }

    fn csv_with(&self, fmt: impl Fn(f64) -> String) -> String {
        let mut s = String::from("t");
        for i in 1..=self.dim {
            s.push_str(&format!(",x{i}"));
        }
        s.push_str(",mode\n");
        let row = |s: &mut String, t: f64, x: &[f64], m: &str| {
            s.push_str(&fmt(t));
            for v in x {
                s.push(',');
                s.push_str(&fmt(*v));
            }
            s.push(',');
            s.push_str(m);
            s.push('\n');
        };
        let name = |m: Mode| match m {
            Mode::Step => "step",
            Mode::Linear => "linear",
        };
        for k in 0..self.segments() {
            row(&mut s, self.times[k], self.value(k), name(self.modes[k]));
            if self.modes[k] == Mode::Linear && self.has_jump(k + 1) {
                row(&mut s, self.times[k + 1], self.end(k), "left");
            }
        }
        row(
            &mut s,
            self.times[self.len() - 1],
            self.last(),
            name(self.modes[self.segments() - 1]),
        );
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty csv".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.len() < 3 || cols[0] != "t" || cols[cols.len() - 1] != "mode" {
            return Err(Error::Parse(format!("bad header {header:?}")));
        }
        let d = cols.len() - 2;
        for (i, c) in cols[1..=d].iter().enumerate() {
            if *c != format!("x{}", i + 1) {
                return Err(Error::Parse(format!("bad column name {c:?}")));
            }
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        let mut modes: Vec<Mode> = Vec::new();
        let mut ends: Vec<Option<Vec<f64>>> = Vec::new();
        for (ln, line) in lines.enumerate() {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != d + 2 {
                return Err(Error::Parse(format!("row {} has {} fields", ln + 2, f.len())));
            }
            let nums: Vec<f64> = f[..=d]
                .iter()
                .map(|x| x.parse::<f64>().map_err(|e| Error::Parse(format!("{x:?}: {e}"))))
                .collect::<Result<_>>()?;
            match f[d + 1] {
                "left" => {
                    let slot = ends
                        .last_mut()
                        .ok_or_else(|| Error::Parse("left row before any segment".into()))?;
                    *slot = Some(nums[1..].to_vec());
                }
                m => {
                    let mode = match m {
                        "step" => Mode::Step,
                        "linear" => Mode::Linear,
                        other => return Err(Error::Parse(format!("unknown mode {other:?}"))),
                    };
                    times.push(nums[0]);
                    values.extend_from_slice(&nums[1..]);
                    modes.push(mode);
                    ends.push(None);
                }
            }
        }
        let n = times.len();
        if n < 2 {
            return Err(Error::Parse("need at least two rows".into()));
        }
        modes.pop();
        ends.pop();
        let mut flat = Vec::with_capacity((n - 1) * d);
        for (k, e) in ends.iter().enumerate() {
            match (e, modes[k]) {
                (Some(e), _) => flat.extend_from_slice(e),
                (None, Mode::Step) => flat.extend_from_slice(&values[k * d..(k + 1) * d]),
                (None, Mode::Linear) => flat.extend_from_slice(&values[(k + 1) * d..(k + 2) * d]),
            }
        }
        Self::from_flat(d, times, values, modes, Some(flat))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("path serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Formats with `digits` significant digits, `%g` style.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let digits = digits.max(1);
    let e = x.abs().log10().floor() as i32;
    if (-5..digits as i32).contains(&e) {
        let dec = (digits as i32 - 1 - e).max(0) as usize;
        let s = format!("{x:.dec$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{x:.prec$e}", prec = digits - 1)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PathRepr {
    domain: [f64; 2],
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
    modes: Vec<Mode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ends: Option<Vec<Vec<f64>>>,
}

impl From<CadlagPath> for PathRepr {
    fn from(p: CadlagPath) -> Self {
        let ends = p
            .has_linear_jump()
            .then(|| p.ends.chunks(p.dim).map(<[f64]>::to_vec).collect());
        PathRepr {
            domain: [p.times[0], p.times[p.len() - 1]],
            values: p.values.chunks(p.dim).map(<[f64]>::to_vec).collect(),
            times: p.times,
            modes: p.modes,
            ends,
        }
    }
}

impl TryFrom<PathRepr> for CadlagPath {
    type Error = Error;

    fn try_from(r: PathRepr) -> Result<Self> {
        let dim = r.values.first().map_or(0, Vec::len);
        if r.values.iter().any(|v| v.len() != dim) {
            return Err(Error::Shape("values have inconsistent dimension".into()));
        }
        let ends = r.ends.map(|e| e.concat());
        let p = CadlagPath::from_flat(dim, r.times, r.values.concat(), r.modes, ends)?;
        if p.domain() != (r.domain[0], r.domain[1]) {
            return Err(Error::Shape("domain does not match the time grid".into()));
        }
        Ok(p)
    }
}

/// Continuous increasing bijection between two intervals, piecewise linear
/// on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeChange {
    from: Vec<f64>,
    to: Vec<f64>,
}

impl TimeChange {
    pub fn new(from: Vec<f64>, to: Vec<f64>) -> Result<Self> {
        if from.len() < 2 || from.len() != to.len() {
            return Err(Error::Shape("time change needs matching grids of length ≥ 2".into()));
        }
        let inc = |v: &[f64]| v.iter().all(|x| x.is_finite()) && v.windows(2).all(|w| w[1] > w[0]);
        if !inc(&from) || !inc(&to) {
            return Err(Error::Shape("time change must be strictly increasing".into()));
        }
        Ok(Self { from, to })
    }

    pub fn identity(a: f64, b: f64) -> Result<Self> {
        Self::new(vec![a, b], vec![a, b])
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.from[0], self.from[self.from.len() - 1])
    }

    pub fn range(&self) -> (f64, f64) {
        (self.to[0], self.to[self.to.len() - 1])
    }

    pub fn nodes(&self) -> (&[f64], &[f64]) {
        (&self.from, &self.to)
    }

    fn interp(x: &[f64], y: &[f64], t: f64) -> Result<f64> {
        let (a, b) = (x[0], x[x.len() - 1]);
        if !(a..=b).contains(&t) {
            return Err(Error::Domain { t, a, b });
        }
        let k = x.partition_point(|&s| s <= t).saturating_sub(1);
        if k + 1 >= x.len() {
            return Ok(y[y.len() - 1]);
        }
        if t == x[k] {
            return Ok(y[k]);
        }
        let lam = (t - x[k]) / (x[k + 1] - x[k]);
        Ok(lerp(y[k], y[k + 1], lam))
    }

    pub fn apply(&self, t: f64) -> Result<f64> {
        Self::interp(&self.from, &self.to, t)
    }

    pub fn inverse(&self, s: f64) -> Result<f64> {
        Self::interp(&self.to, &self.from, s)
    }

    pub fn inverted(&self) -> Self {
        Self {
            from: self.to.clone(),
            to: self.from.clone(),
        }
    }

    /// `sup |ρ(t) − t|`, exact since the difference is piecewise linear.
    pub fn disc(&self) -> f64 {
        self.from
            .iter()
            .zip(&self.to)
            .map(|(f, t)| (f - t).abs())
            .fold(0.0, f64::max)
    }
}

/// Common refinement of two grids.
pub(crate) fn union_grid(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut u: Vec<f64> = x.iter().chain(y).copied().collect();
    u.sort_by(f64::total_cmp);
    u.dedup();
    u
}

fn check_pair(h1: &CadlagPath, h2: &CadlagPath) -> Result<()> {
    if h1.dim() != h2.dim() {
        return Err(Error::Shape(format!(
            "dimensions {} and {} differ",
            h1.dim(),
            h2.dim()
        )));
    }
    if h1.domain() != h2.domain() {
        return Err(Error::Shape(format!(
            "domains {:?} and {:?} differ",
            h1.domain(),
            h2.domain()
        )));
    }
    Ok(())
}

pub(crate) fn check_same(h1: &CadlagPath, h2: &CadlagPath) -> Result<()> {
    check_pair(h1, h2)
}

/// Uniform distance. Both paths are affine on every cell of the union
/// grid, so the norm of the difference is convex there and its supremum is
/// attained at a right value or a left limit on the union grid. The result
/// is exact for every combination of modes.
pub fn sup_dist(h1: &CadlagPath, h2: &CadlagPath) -> Result<f64> {
    check_pair(h1, h2)?;
    let u = union_grid(h1.times(), h2.times());
    let d = h1.dim();
    let (mut x, mut y) = (vec![0.0; d], vec![0.0; d]);
    let mut best: f64 = 0.0;
    let (mut k1, mut k2) = (0usize, 0usize);
    for (i, &t) in u.iter().enumerate() {
        if i > 0 {
            // left limits: segments k1, k2 still cover (u_{i-1}, t]
            h1.seg_point_into(k1, t, &mut x);
            h2.seg_point_into(k2, t, &mut y);
            best = best.max(dist(&x, &y));
        }
        while k1 + 1 < h1.len() && h1.times[k1 + 1] <= t {
            k1 += 1;
        }
        while k2 + 1 < h2.len() && h2.times[k2 + 1] <= t {
            k2 += 1;
        }
        let xv = if k1 + 1 == h1.len() { h1.last().to_vec() } else { h1.seg_point(k1, t) };
        let yv = if k2 + 1 == h2.len() { h2.last().to_vec() } else { h2.seg_point(k2, t) };
        best = best.max(dist(&xv, &yv));
        k1 = k1.min(h1.segments() - 1);
        k2 = k2.min(h2.segments() - 1);
    }
    Ok(best)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    fn step01() -> CadlagPath {
        CadlagPath::scalar_step(vec![0.0, 0.5, 1.0], vec![0.0, 1.0, 1.0]).unwrap()
    }

    #[test]
    fn step_eval_and_left_limit() {
        let h = step01();
        assert_eq!(h.eval(0.5).unwrap(), vec![1.0]);
        assert_eq!(h.left_limit(0.5).unwrap(), vec![0.0]);
        assert_eq!(h.eval(0.0).unwrap(), vec![0.0]);
        assert_eq!(h.eval(1.0).unwrap(), vec![1.0]);
        assert!(matches!(h.eval(1.5), Err(Error::Domain { .. })));
        assert!(h.left_limit(0.0).is_err());
    }

    #[test]
    fn linear_eval() {
        let h = CadlagPath::scalar_linear(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        assert_eq!(h.eval(0.25).unwrap(), vec![0.25]);
        assert_eq!(h.left_limit(1.0).unwrap(), vec![1.0]);
    }

    #[test]
    fn linear_with_jump_end() {
        let h = CadlagPath::from_flat(
            1,
            vec![0.0, 1.0, 2.0],
            vec![0.0, 3.0, 3.0],
            vec![Mode::Linear, Mode::Step],
            Some(vec![1.0, 3.0]),
        )
        .unwrap();
        assert_eq!(h.left_limit(1.0).unwrap(), vec![1.0]);
        assert_eq!(h.eval(1.0).unwrap(), vec![3.0]);
        assert_eq!(h.eval(0.5).unwrap(), vec![0.5]);
        assert_eq!(h.vertices(), vec![vec![0.0], vec![1.0], vec![3.0]]);
        assert_eq!(CadlagPath::from_csv(&h.to_csv()).unwrap(), h);
        assert_eq!(CadlagPath::from_json(&h.to_json()).unwrap(), h);
    }

    #[test]
    fn invalid_shapes() {
        assert!(CadlagPath::scalar_step(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(CadlagPath::scalar_step(vec![0.0], vec![1.0]).is_err());
        assert!(CadlagPath::scalar_step(vec![0.0, 1.0], vec![1.0, f64::NAN]).is_err());
        assert!(CadlagPath::from_flat(1, vec![0.0, 1.0], vec![0.0, 1.0], vec![Mode::Step], Some(vec![2.0])).is_err());
    }

    #[test]
    fn sup_dist_examples() {
        let a = CadlagPath::scalar_step(vec![0.0, 0.5, 1.0], vec![0.0, 1.0, 1.0]).unwrap();
        let b = CadlagPath::scalar_step(vec![0.0, 0.6, 1.0], vec![0.0, 1.0, 1.0]).unwrap();
        assert_eq!(sup_dist(&a, &b).unwrap(), 1.0);
        assert_eq!(sup_dist(&a, &a).unwrap(), 0.0);
        let lin = CadlagPath::scalar_linear(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        let zero = CadlagPath::constant(0.0, 1.0, &[0.0]).unwrap();
        assert_eq!(sup_dist(&lin, &zero).unwrap(), 1.0);
        let other = CadlagPath::constant(0.0, 2.0, &[0.0]).unwrap();
        assert!(matches!(sup_dist(&lin, &other), Err(Error::Shape(_))));
    }

    #[test]
    fn sup_dist_mixed_modes_crossing() {
        // ramp 0→1 against a step to 0.5 at 0.3: the gap peaks at a left limit
        let lin = CadlagPath::scalar_linear(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        let st = CadlagPath::scalar_step(vec![0.0, 0.3, 1.0], vec![0.0, 0.5, 0.5]).unwrap();
        let exact = sup_dist(&lin, &st).unwrap();
        let brute = (0..=100_000)
            .map(|i| i as f64 / 100_000.0)
            .map(|t| (lin.eval(t).unwrap()[0] - st.eval(t).unwrap()[0]).abs())
            .fold(0.0, f64::max);
        assert!((exact - 0.5).abs() < 1e-15);
        assert!(exact >= brute);
    }

    #[test]
    fn format_sig_cases() {
        assert_eq!(format_sig(2.0 / 3.0, 9), "0.666666667");
        assert_eq!(format_sig(1.0, 9), "1");
        assert_eq!(format_sig(0.0, 9), "0");
        assert_eq!(format_sig(1.5e-9, 9), "1.50000000e-9");
        assert_eq!(format_sig(-123.25, 9), "-123.25");
    }

    #[test]
    fn compose_with_identity_and_warp() {
        let h = step01();
        let id = TimeChange::identity(0.0, 1.0).unwrap();
        assert_eq!(sup_dist(&h.compose(&id).unwrap(), &h).unwrap(), 0.0);
        let rho = TimeChange::new(vec![0.0, 0.6, 1.0], vec![0.0, 0.5, 1.0]).unwrap();
        let g = h.compose(&rho).unwrap();
        let target = CadlagPath::scalar_step(vec![0.0, 0.6, 1.0], vec![0.0, 1.0, 1.0]).unwrap();
        assert_eq!(sup_dist(&g, &target).unwrap(), 0.0);
        assert!((rho.disc() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn restrict_and_insert() {
        let h = CadlagPath::scalar_linear(vec![0.0, 1.0], vec![0.0, 2.0]).unwrap();
        let r = h.restrict(0.25, 0.75).unwrap();
        assert_eq!(r.domain(), (0.25, 0.75));
        assert_eq!(r.first(), &[0.5]);
        assert_eq!(r.last(), &[1.5]);
        let g = h.insert_times(&[0.1, 0.7, 0.7]).unwrap();
        assert_eq!(g.len(), 4);
        assert_eq!(sup_dist(&g, &h).unwrap(), 0.0);
    }

    pub(crate) fn arb_path(max_pts: usize, dim: usize) -> impl Strategy<Value = CadlagPath> {
        (2..=max_pts).prop_flat_map(move |n| {
            (
                prop::collection::vec(0.01f64..1.0, n - 1),
                prop::collection::vec(-3.0f64..3.0, n * dim),
                prop::collection::vec(any::<bool>(), n - 1),
            )
                .prop_map(move |(gaps, values, lin)| {
                    let total: f64 = gaps.iter().sum();
                    let mut times = vec![0.0];
                    let mut acc = 0.0;
                    for g in &gaps[..gaps.len() - 1] {
                        acc += g / total;
                        times.push(acc);
                    }
                    times.push(1.0);
                    let modes = lin
                        .into_iter()
                        .map(|l| if l { Mode::Linear } else { Mode::Step })
                        .collect();
                    CadlagPath::from_flat(dim, times, values, modes, None).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn csv_json_round_trip(h in arb_path(12, 2)) {
            prop_assert_eq!(CadlagPath::from_csv(&h.to_csv()).unwrap(), h.clone());
            prop_assert_eq!(CadlagPath::from_json(&h.to_json()).unwrap(), h);
        }

        #[test]
        fn sup_dist_dominates_sampling(h1 in arb_path(8, 1), h2 in arb_path(8, 1)) {
            let s = sup_dist(&h1, &h2).unwrap();
            for i in 0..=400 {
                let t = i as f64 / 400.0;
                let d = dist(&h1.eval(t).unwrap(), &h2.eval(t).unwrap());
                prop_assert!(d <= s + 1e-12);
            }
            prop_assert_eq!(s, sup_dist(&h2, &h1).unwrap());
        }

        #[test]
        fn eval_right_continuous(h in arb_path(8, 1)) {
            for k in 1..h.len() - 1 {
                let t = h.times()[k];
                let right = h.eval(t).unwrap()[0];
                let near = h.eval(t + 1e-12).unwrap()[0];
                prop_assert!((right - near).abs() < 1e-6);
                let left = h.left_limit(t).unwrap()[0];
                let before = h.eval(t - 1e-12).unwrap()[0];
                prop_assert!((left - before).abs() < 1e-6);
            }
        }

        #[test]
        fn insert_times_preserves_path(h in arb_path(8, 2), extra in prop::collection::vec(0.0f64..1.0, 0..6)) {
            let g = h.insert_times(&extra).unwrap();
            prop_assert!(sup_dist(&g, &h).unwrap() < 1e-12);
        }
    }
}
