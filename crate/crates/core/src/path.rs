//! Sampled paths and the path-space operations built on them: concatenation,
//! flat extension, terminal bumps, restriction, time reversal, metrics, and
//! quadratic variation along a partition sequence.
//!
//! A path is stored on an explicit grid with piecewise-linear interpolation
//! between samples. A cadlag jump is encoded by a duplicated time stamp: the
//! earlier sample holds the pre-jump value, the later one the post-jump value,
//! and evaluation at the stamp returns the post-jump value.

use crate::error::{Error, Result};
use crate::util::pairwise_sum;

/// A sampled trajectory `(t_i, x_i)` on `[0, t_end]`, immutable after
/// construction. Times start at 0 and are non-decreasing; a duplicated time
/// stamp encodes a jump and may never occur three times in a row.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl Path {
    /// Builds a path from samples, validating the grid invariants.
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidPath("empty sample list".into()));
        }
        if times.len() != values.len() {
            return Err(Error::InvalidPath(format!(
                "{} times vs {} values",
                times.len(),
                values.len()
            )));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidPath(format!(
                "first time must be 0, got {}",
                times[0]
            )));
        }
        for w in times.windows(2) {
            if w[1] < w[0] {
                return Err(Error::InvalidPath(format!(
                    "times decrease: {} after {}",
                    w[1], w[0]
                )));
            }
        }
        for w in times.windows(3) {
            if w[0] == w[1] && w[1] == w[2] {
                return Err(Error::InvalidPath(format!(
                    "time stamp {} repeated three times",
                    w[0]
                )));
            }
        }
        if times.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "path samples" });
        }
        Ok(Self { times, values })
    }

    /// The length-0 path sitting at `x0`.
    pub fn point(x0: f64) -> Self {
        Self { times: vec![0.0], values: vec![x0] }
    }

    /// Constant path at `x0` of the given duration.
    pub fn flat(x0: f64, duration: f64) -> Self {
        if duration <= 0.0 {
            Self::point(x0)
        } else {
            Self { times: vec![0.0, duration], values: vec![x0, x0] }
        }
    }

    /// Straight line from `x0` to `x1` over the given duration.
    pub fn line(x0: f64, x1: f64, duration: f64) -> Self {
        if duration <= 0.0 {
            Self::point(x0)
        } else {
            Self { times: vec![0.0, duration], values: vec![x0, x1] }
        }
    }

    /// Samples `f` at `n + 1` uniform grid points on `[0, duration]`.
    pub fn sampled(f: impl Fn(f64) -> f64, duration: f64, n: usize) -> Self {
        if duration <= 0.0 {
            return Self::point(f(0.0));
        }
        let n = n.max(1);
        let times: Vec<f64> = (0..=n).map(|i| duration * i as f64 / n as f64).collect();
        let values: Vec<f64> = times.iter().map(|&t| f(t)).collect();
        Self { times, values }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn num_samples(&self) -> usize {
        self.times.len()
    }

    /// Final time of the path (its length in the time sense).
    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn start_value(&self) -> f64 {
        self.values[0]
    }

    pub fn end_value(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// True if any time stamp is duplicated (a jump).
    pub fn has_jumps(&self) -> bool {
        self.times.windows(2).any(|w| w[0] == w[1])
    }

    /// Value at time `u` under the cadlag convention: at a jump stamp the
    /// post-jump value applies; elsewhere linear interpolation.
    pub fn value_at(&self, u: f64) -> f64 {
        if u >= self.t_end() {
            return self.end_value();
        }
        if u <= 0.0 {
            // a jump at time 0 still evaluates to the post-jump value
            let k = self.times.iter().take_while(|&&t| t == 0.0).count();
            return self.values[k - 1];
        }
        // last index with times[i] <= u
        let i = self.times.partition_point(|&t| t <= u) - 1;
        if self.times[i] == u {
            self.values[i]
        } else {
            let (t0, t1) = (self.times[i], self.times[i + 1]);
            let (v0, v1) = (self.values[i], self.values[i + 1]);
            v0 + (v1 - v0) * (u - t0) / (t1 - t0)
        }
    }

    /// Left limit at time `u` (pre-jump value when `u` carries a jump).
    pub fn left_limit_at(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return self.values[0];
        }
        if u > self.t_end() {
            return self.end_value();
        }
        let first = self.times.partition_point(|&t| t < u);
        if first < self.times.len() && self.times[first] == u {
            self.values[first]
        } else {
            self.value_at(u)
        }
    }

    /// Largest absolute sample value; for piecewise-linear paths this is the
    /// supremum norm of the trajectory.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest absolute increment from the start value.
    pub fn sup_increment(&self) -> f64 {
        let x0 = self.start_value();
        self.values.iter().fold(0.0, |m, v| m.max((v - x0).abs()))
    }

    /// Maximum slope over the segments; infinite when the path jumps.
    pub fn lipschitz_seminorm(&self) -> f64 {
        let mut lip = 0.0f64;
        for i in 1..self.times.len() {
            let dt = self.times[i] - self.times[i - 1];
            let dx = (self.values[i] - self.values[i - 1]).abs();
            if dt == 0.0 {
                if dx > 0.0 {
                    return f64::INFINITY;
                }
            } else {
                lip = lip.max(dx / dt);
            }
        }
        lip
    }

    /// Prefix ending at sample `i` (inclusive).
    pub fn prefix(&self, i: usize) -> Path {
        Path {
            times: self.times[..=i].to_vec(),
            values: self.values[..=i].to_vec(),
        }
    }

    /// Prefix `X_t`: the path restricted to `[0, t]`, same time origin.
    pub fn prefix_at(&self, t: f64) -> Result<Path> {
        self.restrict(0.0, t)
    }

    /// Concatenation `X (+) Z`: the continuation is glued continuously,
    /// `y_r = x_{r /\ s} + z_{(r-s)+} - z_0`.
    pub fn concat(&self, z: &Path) -> Path {
        let s = self.t_end();
        let offset = self.end_value() - z.start_value();
        let mut times = self.times.clone();
        let mut values = self.values.clone();
        // skip the continuation's first sample: it lands on (s, x_s)
        for i in 1..z.times.len() {
            times.push(s + z.times[i]);
            values.push(z.values[i] + offset);
        }
        Path { times, values }
    }

    /// Concatenation under a declared horizon: the continuation is truncated
    /// at `T - s` first when the result would exceed `T`.
    pub fn concat_within(&self, z: &Path, horizon: f64) -> Result<Path> {
        let s = self.t_end();
        if s > horizon {
            return Err(Error::HorizonExceeded { t_end: s, horizon });
        }
        let room = horizon - s;
        if z.t_end() <= room {
            Ok(self.concat(z))
        } else {
            Ok(self.concat(&z.restrict(0.0, room)?))
        }
    }

    /// Flat extension `X_{t, dt}`: holds the terminal value for `dt` more time.
    pub fn stop_extend(&self, dt: f64) -> Result<Path> {
        if dt < 0.0 {
            return Err(Error::NegativeDuration { dt });
        }
        if dt == 0.0 {
            return Ok(self.clone());
        }
        let mut times = self.times.clone();
        let mut values = self.values.clone();
        times.push(self.t_end() + dt);
        values.push(self.end_value());
        Ok(Path { times, values })
    }

    /// Terminal bump `X^h`: adds `h` to the final value only, encoded as a
    /// duplicated final stamp. Bumping an already-bumped path compounds the
    /// jump instead of stacking a third stamp.
    pub fn bump(&self, h: f64) -> Path {
        if h == 0.0 {
            return self.clone();
        }
        let n = self.times.len();
        let mut times = self.times.clone();
        let mut values = self.values.clone();
        if n >= 2 && times[n - 1] == times[n - 2] {
            values[n - 1] += h;
        } else {
            times.push(self.t_end());
            values.push(self.end_value() + h);
        }
        Path { times, values }
    }

    /// `X^{(eps)}`: bump the terminal value to exactly `eps`.
    pub fn bump_to(&self, eps: f64) -> Path {
        self.bump(eps - self.end_value())
    }

    /// Restriction `X|_{[s,t]}` re-based to start at time 0.
    pub fn restrict(&self, s: f64, t: f64) -> Result<Path> {
        let t_end = self.t_end();
        let eps = 1e-12 * t_end.max(1.0);
        if s < -eps || t > t_end + eps || s > t {
            return Err(Error::BadRestriction { s, t, t_end });
        }
        let s = s.clamp(0.0, t_end);
        let t = t.clamp(0.0, t_end);
        let mut times = vec![0.0];
        let mut values = vec![self.value_at(s)];
        for i in 0..self.times.len() {
            let u = self.times[i];
            if u > s && u < t {
                times.push(u - s);
                values.push(self.values[i]);
            }
        }
        if t > s {
            times.push(t - s);
            values.push(self.left_limit_at(t));
            // keep a terminal jump when t lands exactly on one
            if self.left_limit_at(t) != self.value_at(t) {
                times.push(t - s);
                values.push(self.value_at(t));
            }
        }
        Path::new(times, values)
    }

    /// Time reversal of `X|_{[s,t]}`: the path `u -> x_{t-u}` on `[0, t-s]`.
    /// Fails when a jump lies inside the window, since reversing a cadlag
    /// jump leaves the path space.
    pub fn reverse_restrict(&self, t: f64, s: f64) -> Result<Path> {
        let window = self.restrict(s, t)?;
        if window.has_jumps() {
            return Err(Error::JumpInWindow { s, t });
        }
        let len = window.t_end();
        let mut times: Vec<f64> = window.times.iter().rev().map(|u| len - u).collect();
        let values: Vec<f64> = window.values.iter().rev().copied().collect();
        // guard against -0.0 and rounding at the origin
        times[0] = 0.0;
        Path::new(times, values)
    }

    /// Dyadic refinement: inserts `levels` rounds of segment midpoints without
    /// changing the trajectory. Jump stamps are left untouched.
    pub fn refine_dyadic(&self, levels: u32) -> Path {
        let mut out = self.clone();
        for _ in 0..levels {
            let mut times = Vec::with_capacity(out.times.len() * 2);
            let mut values = Vec::with_capacity(out.times.len() * 2);
            times.push(out.times[0]);
            values.push(out.values[0]);
            for i in 1..out.times.len() {
                if out.times[i] > out.times[i - 1] {
                    times.push(0.5 * (out.times[i] + out.times[i - 1]));
                    values.push(0.5 * (out.values[i] + out.values[i - 1]));
                }
                times.push(out.times[i]);
                values.push(out.values[i]);
            }
            out = Path { times, values };
        }
        out
    }

    /// Scales increments around the start value: `x0 + gamma (x - x0)`.
    pub fn scale_increments(&self, gamma: f64) -> Path {
        let x0 = self.start_value();
        Path {
            times: self.times.clone(),
            values: self.values.iter().map(|v| x0 + gamma * (v - x0)).collect(),
        }
    }

    /// Parallel shift `X + h 1_{[t, T]}`: adds `h` to the path from `t`
    /// onward, inserting a jump stamp at `t`. At `t = 0` the pre-shift start
    /// value is retained as the pre-jump sample, so increment references see
    /// the unshifted origin; this is the right limit of shifts at t down to 0
    /// and is what Malliavin finite differences require.
    pub fn parallel_shift(&self, t: f64, h: f64) -> Path {
        if t <= 0.0 {
            let mut times = Vec::with_capacity(self.times.len() + 1);
            let mut values = Vec::with_capacity(self.times.len() + 1);
            times.push(0.0);
            values.push(self.values[0]);
            for i in 0..self.times.len() {
                times.push(self.times[i]);
                values.push(self.values[i] + h);
            }
            // the start sample may already carry a jump; keep pairs isolated
            if self.times.len() >= 2 && self.times[1] == 0.0 {
                times.remove(1);
                values.remove(1);
            }
            return Path { times, values };
        }
        let t_end = self.t_end();
        if t >= t_end {
            return self.bump(h);
        }
        let mut times = Vec::with_capacity(self.times.len() + 2);
        let mut values = Vec::with_capacity(self.times.len() + 2);
        for i in 0..self.times.len() {
            if self.times[i] < t {
                times.push(self.times[i]);
                values.push(self.values[i]);
            }
        }
        times.push(t);
        values.push(self.left_limit_at(t));
        times.push(t);
        values.push(self.value_at(t) + h);
        let after = self.times.partition_point(|&u| u <= t);
        for i in after..self.times.len() {
            times.push(self.times[i]);
            values.push(self.values[i] + h);
        }
        Path { times, values }
    }

    /// Block impulse `X + h 1_{[t, t+width)}`: adds `h` on the half-open
    /// window, with jump stamps at both edges.
    pub fn block_shift(&self, t: f64, width: f64, h: f64) -> Result<Path> {
        let end = t + width;
        let t_end = self.t_end();
        if t < 0.0 || end > t_end + 1e-12 * t_end.max(1.0) || width <= 0.0 {
            return Err(Error::WindowExceedsPath { t, end, t_end });
        }
        let up = self.parallel_shift(t, h);
        Ok(up.parallel_shift(end.min(up.t_end()), -h))
    }
}

/// Quadratic-variation partition sequence on `[0, horizon]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionScheme {
    /// Level `n` has `2^n + 1` points.
    Dyadic,
    /// Level `n` has `n + 1` points.
    Uniform,
}

/// A family of refining partitions `Pi = (Pi^N)` with strictly decreasing
/// mesh over a declared level range.
#[derive(Debug, Clone)]
pub struct PartitionSeq {
    pub scheme: PartitionScheme,
    pub n_min: u32,
    pub n_max: u32,
    pub horizon: f64,
}

impl PartitionSeq {
    pub fn new(scheme: PartitionScheme, n_min: u32, n_max: u32, horizon: f64) -> Result<Self> {
        if horizon <= 0.0 || !horizon.is_finite() {
            return Err(Error::InvalidConfig(format!("horizon {horizon} must be positive")));
        }
        if n_min > n_max || (scheme == PartitionScheme::Uniform && n_min == 0) {
            return Err(Error::InvalidConfig(format!("bad level range {n_min}..{n_max}")));
        }
        if scheme == PartitionScheme::Dyadic && n_max > 30 {
            return Err(Error::InvalidConfig("dyadic level above 30".into()));
        }
        Ok(Self { scheme, n_min, n_max, horizon })
    }

    /// Grid of level `n`.
    pub fn grid(&self, n: u32) -> Result<Vec<f64>> {
        if n < self.n_min || n > self.n_max {
            return Err(Error::LevelOutOfRange { level: n, min: self.n_min, max: self.n_max });
        }
        let pieces = match self.scheme {
            PartitionScheme::Dyadic => 1usize << n,
            PartitionScheme::Uniform => n as usize,
        };
        Ok((0..=pieces)
            .map(|i| self.horizon * i as f64 / pieces as f64)
            .collect())
    }

    /// Mesh size of level `n`.
    pub fn mesh(&self, n: u32) -> f64 {
        match self.scheme {
            PartitionScheme::Dyadic => self.horizon / (1u64 << n) as f64,
            PartitionScheme::Uniform => self.horizon / n as f64,
        }
    }
}

/// Quadratic variation of `X` along level `n` of the partition sequence:
/// the function `s -> sum of squared increments up to s`, sampled on the
/// level-`n` grid clamped to the path length.
pub fn quadratic_variation(x: &Path, pi: &PartitionSeq, n: u32) -> Result<Vec<(f64, f64)>> {
    let grid = pi.grid(n)?;
    let mut out = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    let mut prev = x.value_at(grid[0].min(x.t_end()));
    out.push((grid[0], 0.0));
    for &s in &grid[1..] {
        let cur = x.value_at(s.min(x.t_end()));
        acc += (cur - prev) * (cur - prev);
        prev = cur;
        out.push((s, acc));
    }
    Ok(out)
}

/// Merged evaluation points of two paths (for piecewise-linear sup computations).
fn merged_times(x: &Path, y: &Path, cap: f64) -> Vec<f64> {
    let mut ts: Vec<f64> = x
        .times
        .iter()
        .chain(y.times.iter())
        .copied()
        .filter(|&t| t <= cap)
        .collect();
    ts.push(cap);
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ts.dedup();
    ts
}

/// The metric `d_Lambda(X_t, Y_s) = t - s + sup_{u <= t} |x_u - y_{u /\ s}|`,
/// stated for `t >= s`; arguments are swapped otherwise.
pub fn lambda_distance(x: &Path, y: &Path) -> f64 {
    let (long, short) = if x.t_end() >= y.t_end() { (x, y) } else { (y, x) };
    let t = long.t_end();
    let s = short.t_end();
    let mut sup = 0.0f64;
    for u in merged_times(long, short, t) {
        let v = u.min(s);
        sup = sup.max((long.left_limit_at(u) - short.left_limit_at(v)).abs());
        sup = sup.max((long.value_at(u) - short.value_at(v)).abs());
    }
    (t - s) + sup
}

/// The Lipschitz-space metric
/// `d_1(Y_t, Y'_s) = t - s + |y_0 - y'_0| + [Y - Y'_{s, t-s}]_Lip`
/// where the shorter path is flat-extended to the longer length.
pub fn d1_distance(x: &Path, y: &Path) -> f64 {
    let (long, short) = if x.t_end() >= y.t_end() { (x, y) } else { (y, x) };
    let t = long.t_end();
    let s = short.t_end();
    let extended = short.stop_extend(t - s).expect("non-negative extension");
    let ts = merged_times(long, &extended, t);
    let mut lip = 0.0f64;
    for w in ts.windows(2) {
        let dt = w[1] - w[0];
        if dt > 0.0 {
            let d0 = long.value_at(w[0]) - extended.value_at(w[0]);
            let d1 = long.left_limit_at(w[1]) - extended.left_limit_at(w[1]);
            lip = lip.max((d1 - d0).abs() / dt);
        }
    }
    (t - s) + (long.start_value() - short.start_value()).abs() + lip
}

/// Reads a path from CSV with header `t,x`, one sample per row; duplicated
/// `t` rows encode jumps.
pub fn read_path_csv(path: &std::path::Path) -> Result<Path> {
    let text = std::fs::read_to_string(path)?;
    parse_path_csv(&text)
}

/// Parses the CSV path format from a string.
pub fn parse_path_csv(text: &str) -> Result<Path> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty CSV".into()))?;
    if header.trim() != "t,x" {
        return Err(Error::Parse(format!("expected header `t,x`, got `{header}`")));
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (i, line) in lines.enumerate() {
        let mut cols = line.trim().split(',');
        let (t, x) = match (cols.next(), cols.next(), cols.next()) {
            (Some(t), Some(x), None) => (t, x),
            _ => return Err(Error::Parse(format!("row {}: expected two columns", i + 2))),
        };
        times.push(
            t.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("row {}: {e}", i + 2)))?,
        );
        values.push(
            x.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("row {}: {e}", i + 2)))?,
        );
    }
    Path::new(times, values)
}

/// Writes a path in the CSV format read by [`read_path_csv`].
pub fn write_path_csv(path: &std::path::Path, x: &Path) -> Result<()> {
    let mut out = String::from("t,x\n");
    for (t, v) in x.times().iter().zip(x.values()) {
        out.push_str(&format!("{t},{v}\n"));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Mean of the squared terminal increments of a path batch, by pairwise sum.
pub fn qv_terminal_mean(paths: &[Path], pi: &PartitionSeq, n: u32) -> Result<f64> {
    let finals: Result<Vec<f64>> = paths
        .iter()
        .map(|p| Ok(quadratic_variation(p, pi, n)?.last().unwrap().1))
        .collect();
    Ok(pairwise_sum(&finals?) / paths.len() as f64)
}
