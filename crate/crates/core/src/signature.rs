//! Truncated signatures of time-augmented paths, computed two independent
//! ways: exact segment exponentials chained by Chen's identity, and pathwise
//! Stratonovich trapezoid sums. Also Ito iterated integrals via Hermite
//! polynomials, their signature combinations, and the kernels that reproduce
//! signature coordinates from iterated Stratonovich quadrature.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::path::Path;
use crate::util::factorial;
use crate::words::{word_count, Word, WordPoly};

/// Hard cap on the truncation depth (2^13 - 1 coordinates).
pub const MAX_DEPTH: usize = 12;
/// Default truncation depth.
pub const DEFAULT_DEPTH: usize = 6;

/// Truncated signature: all coordinates `S_a` with `|a| <= depth`, stored
/// flat and indexed by graded-lex word rank.
#[derive(Debug, Clone, PartialEq)]
pub struct Signature {
    depth: usize,
    coords: Vec<f64>,
    /// Start value of the underlying path (metadata; coordinates are built
    /// from increments only).
    pub base_offset: f64,
    /// Time length of the underlying path.
    pub length: f64,
}

impl Signature {
    /// The signature of a zero-length path: `S_e = 1`, all else 0.
    pub fn trivial(depth: usize, x0: f64) -> Result<Self> {
        if depth > MAX_DEPTH {
            return Err(Error::DepthTooLarge { depth, max: MAX_DEPTH });
        }
        let mut coords = vec![0.0; word_count(depth)];
        coords[0] = 1.0;
        Ok(Self { depth, coords, base_offset: x0, length: 0.0 })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Coordinate of a word; words longer than the depth are not stored.
    pub fn get(&self, w: &Word) -> f64 {
        assert!(w.len() <= self.depth, "word {w} beyond depth {}", self.depth);
        self.coords[w.rank()]
    }

    pub fn try_get(&self, w: &Word) -> Option<f64> {
        (w.len() <= self.depth).then(|| self.coords[w.rank()])
    }

    /// All stored (word, value) pairs in graded-lex order.
    pub fn iter(&self) -> impl Iterator<Item = (Word, f64)> + '_ {
        self.coords
            .iter()
            .enumerate()
            .map(|(r, &v)| (Word::from_rank(r), v))
    }

    /// Evaluates a word polynomial against this signature, instantiating the
    /// horizon symbol at the path length.
    pub fn eval_poly(&self, poly: &WordPoly) -> f64 {
        self.eval_poly_at(poly, self.length)
    }

    /// Evaluates a word polynomial with an explicit horizon value.
    pub fn eval_poly_at(&self, poly: &WordPoly, horizon: f64) -> f64 {
        poly.terms()
            .map(|(w, c)| c.eval(horizon) * self.get(w))
            .sum()
    }
}

/// Exact signature of one linear segment with increments `(dt, dx)`:
/// `S_a = dt^{|a|_0} dx^{|a|_1} / |a|!` (the tensor exponential).
pub fn seg_signature(dt: f64, dx: f64, depth: usize) -> Result<Signature> {
    if depth > MAX_DEPTH {
        return Err(Error::DepthTooLarge { depth, max: MAX_DEPTH });
    }
    if dt < 0.0 {
        return Err(Error::NegativeDuration { dt });
    }
    let mut coords = vec![0.0; word_count(depth)];
    for r in 0..coords.len() {
        let w = Word::from_rank(r);
        coords[r] = dt.powi(w.count0() as i32) * dx.powi(w.count1() as i32) / factorial(w.len());
    }
    Ok(Signature { depth, coords, base_offset: 0.0, length: dt })
}

/// Chen's identity: the signature of a concatenation is the convolution over
/// word splits, `S_a(X (+) Y) = sum_{bc = a} S_b(X) S_c(Y)`.
pub fn chen_concat(s1: &Signature, s2: &Signature) -> Result<Signature> {
    if s1.depth != s2.depth {
        return Err(Error::DepthMismatch { left: s1.depth, right: s2.depth });
    }
    let mut coords = vec![0.0; s1.coords.len()];
    for (r, slot) in coords.iter_mut().enumerate() {
        let w = Word::from_rank(r);
        let mut acc = 0.0;
        for k in 0..=w.len() {
            let (b, c) = w.split(k);
            acc += s1.coords[b.rank()] * s2.coords[c.rank()];
        }
        *slot = acc;
    }
    Ok(Signature {
        depth: s1.depth,
        coords,
        base_offset: s1.base_offset,
        length: s1.length + s2.length,
    })
}

fn check_continuous(x: &Path, op: &'static str) -> Result<()> {
    if x.has_jumps() {
        Err(Error::JumpsUnsupported { op })
    } else {
        Ok(())
    }
}

/// Exact truncated signature of a piecewise-linear path: fold of segment
/// exponentials under Chen's identity. Defined for continuous paths.
pub fn signature(x: &Path, depth: usize) -> Result<Signature> {
    check_continuous(x, "signature")?;
    signature_unchecked(x, depth)
}

/// Signature fold without the continuity check. A duplicated stamp is chained
/// as a zero-duration segment, which matches the limit of the trapezoid sums
/// defining the integrals on bump-extended paths.
pub(crate) fn signature_unchecked(x: &Path, depth: usize) -> Result<Signature> {
    let mut acc = Signature::trivial(depth, x.start_value())?;
    let (times, values) = (x.times(), x.values());
    for i in 1..times.len() {
        let seg = seg_signature(times[i] - times[i - 1], values[i] - values[i - 1], depth)?;
        acc = chen_concat(&acc, &seg)?;
    }
    Ok(acc)
}

/// Exact signatures of a path batch, in input order.
pub fn signature_batch(paths: &[Path], depth: usize) -> Result<Vec<Signature>> {
    paths
        .par_iter()
        .map(|p| signature(p, depth))
        .collect::<Result<Vec<_>>>()
}

/// Truncated signature by level-by-level Stratonovich trapezoid quadrature on
/// the path's own grid: letter 0 integrates the trapezoid against dt, letter
/// 1 averages the integrand across each step against dx. Converges to the
/// exact method at rate O(mesh^2) under grid refinement.
pub fn signature_strat(x: &Path, depth: usize) -> Result<Signature> {
    check_continuous(x, "signature_strat")?;
    if depth > MAX_DEPTH {
        return Err(Error::DepthTooLarge { depth, max: MAX_DEPTH });
    }
    let (times, values) = (x.times(), x.values());
    let n = times.len();
    let count = word_count(depth);
    let mut levels: Vec<Vec<f64>> = Vec::with_capacity(count);
    levels.push(vec![1.0; n]); // empty word
    for r in 1..count {
        let w = Word::from_rank(r);
        let parent = &levels[w.drop_last(1).rank()];
        let mut vals = vec![0.0; n];
        for i in 1..n {
            let avg = 0.5 * (parent[i - 1] + parent[i]);
            let step = match w.last().unwrap() {
                0 => times[i] - times[i - 1],
                _ => values[i] - values[i - 1],
            };
            vals[i] = vals[i - 1] + avg * step;
        }
        levels.push(vals);
    }
    let coords = levels.iter().map(|v| v[n - 1]).collect();
    Ok(Signature {
        depth,
        coords,
        base_offset: x.start_value(),
        length: x.t_end(),
    })
}

/// Values of the single coordinate `S_a(X_u)` at every grid time, by the
/// exact prefix method (Chen fold restricted to the prefixes of `a`).
pub fn running_coordinate(x: &Path, alpha: &Word) -> Result<Vec<f64>> {
    check_continuous(x, "running_coordinate")?;
    Ok(running_coordinate_unchecked(x, alpha))
}

pub(crate) fn running_coordinate_unchecked(x: &Path, alpha: &Word) -> Vec<f64> {
    let k = alpha.len();
    let (times, values) = (x.times(), x.values());
    let n = times.len();
    // seg coordinate of the middle piece alpha[l..j]: dt^z dx^o / (j-l)!
    let mut zeros = vec![vec![0usize; k + 1]; k + 1];
    for l in 0..=k {
        for j in l..=k {
            zeros[l][j] = (l..j).filter(|&i| alpha.letter(i) == 0).count();
        }
    }
    let mut state = vec![0.0; k + 1]; // state[j] = S_{alpha[..j]} of the prefix path
    state[0] = 1.0;
    let mut out = Vec::with_capacity(n);
    out.push(state[k]);
    for i in 1..n {
        let dt = times[i] - times[i - 1];
        let dx = values[i] - values[i - 1];
        let mut next = vec![0.0; k + 1];
        for j in 0..=k {
            let mut acc = 0.0;
            for l in 0..=j {
                let z = zeros[l][j];
                let o = j - l - z;
                acc += state[l] * dt.powi(z as i32) * dx.powi(o as i32) / factorial(j - l);
            }
            next[j] = acc;
        }
        state = next;
        out.push(state[k]);
    }
    out
}

/// The k-fold Ito iterated integral `J_k` as a function of time and terminal
/// increment: `J_k = (t^{k/2} / k!) H_k(x / sqrt t)` with the probabilist's
/// Hermite polynomial from the recurrence `H_{k+1} = x H_k - k H_{k-1}`.
pub fn ito_iterated(t: f64, x: f64, k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if t <= 0.0 {
        return 0.0;
    }
    let xi = x / t.sqrt();
    let mut h_prev = 1.0;
    let mut h = xi;
    for n in 1..k {
        let h_next = xi * h - n as f64 * h_prev;
        h_prev = h;
        h = h_next;
    }
    t.powi(k as i32 / 2) * t.sqrt().powi(k as i32 % 2) / factorial(k) * h
}

/// The signature combination equal to `J_k`: `sum over ||a|| = k of
/// (-2)^{-|a|_0} a`.
pub fn hermite_combination(k: usize) -> WordPoly {
    use crate::words::{words_with_weight, TPoly};
    use num_rational::Ratio;
    let mut out = WordPoly::zero();
    for w in words_with_weight(k) {
        let denom = (-2i64).pow(w.count0() as u32);
        out.add_term(w, TPoly::constant(Ratio::new(1, denom)));
    }
    out
}

/// The kernel reproducing one signature coordinate from iterated Stratonovich
/// integration: with `a = 0^{g0} 1 0^{g1} 1 ... 1 0^{gk}`,
/// `phi(t_1..t_k) = prod_l (t_{l+1} - t_l)^{g_l} / g_l!` where `t_0 = 0`,
/// `t_{k+1} = T`.
#[derive(Debug, Clone)]
pub struct IveKernel {
    word: Word,
    gammas: Vec<usize>,
    horizon: f64,
}

impl IveKernel {
    pub fn new(word: Word, horizon: f64) -> Self {
        let gammas = word.zero_runs();
        debug_assert_eq!(gammas.len(), word.count1() + 1);
        Self { word, gammas, horizon }
    }

    pub fn word(&self) -> &Word {
        &self.word
    }

    /// Number of integration slots, `k = |a|_1`.
    pub fn order(&self) -> usize {
        self.gammas.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Evaluates the kernel at ordered times in `[0, T]`.
    pub fn eval(&self, times: &[f64]) -> Result<f64> {
        let k = self.order();
        if times.len() != k {
            return Err(Error::InvalidConfig(format!(
                "kernel of order {k} got {} times",
                times.len()
            )));
        }
        let ordered = times.windows(2).all(|w| w[0] <= w[1])
            && times.first().map_or(true, |&t| t >= 0.0)
            && times.last().map_or(true, |&t| t <= self.horizon);
        if !ordered {
            return Err(Error::UnorderedTimes { horizon: self.horizon });
        }
        let mut prev = 0.0;
        let mut acc = 1.0;
        for l in 0..=k {
            let next = if l == k { self.horizon } else { times[l] };
            acc *= (next - prev).powi(self.gammas[l] as i32) / factorial(self.gammas[l]);
            prev = next;
        }
        Ok(acc)
    }
}

/// The operator `I_k`: nested Stratonovich trapezoid quadrature of a
/// signature kernel against dx in each slot. Satisfies
/// `I_k phi_k^a (X_T) = S_a(X_T)` up to quadrature error.
///
/// The product structure of the kernel makes each slot a running integral of
/// the previous one against `(u - s)^{g_l} / g_l!`, so the cost is
/// O(k n^2) rather than a full simplex sum. The input is piecewise linear,
/// so one midpoint insertion changes nothing about the trajectory but lets
/// the trapezoid sums resolve the integrand curvature between grid points.
pub fn iterated_strat_with_kernel(kern: &IveKernel, x: &Path) -> Result<f64> {
    check_continuous(x, "iterated_strat_with_kernel")?;
    let fine = x.refine_dyadic(1);
    let k = kern.order();
    let (times, values) = (fine.times(), fine.values());
    let n = times.len();
    let g = &kern.gammas;
    if k == 0 {
        return Ok(kern.horizon.powi(g[0] as i32) / factorial(g[0]));
    }
    // c[i] = inner value with the next slot variable pinned at grid point i
    let mut c: Vec<f64> = times
        .iter()
        .map(|&u| u.powi(g[0] as i32) / factorial(g[0]))
        .collect();
    for level in 1..k {
        let mut next = vec![0.0; n];
        for i in 1..n {
            let u = times[i];
            let weight = |j: usize| c[j] * (u - times[j]).powi(g[level] as i32) / factorial(g[level]);
            let mut acc = 0.0;
            for j in 1..=i {
                acc += 0.5 * (weight(j - 1) + weight(j)) * (values[j] - values[j - 1]);
            }
            next[i] = acc;
        }
        c = next;
    }
    let weight = |j: usize| {
        c[j] * (kern.horizon - times[j]).powi(g[k] as i32) / factorial(g[k])
    };
    let mut acc = 0.0;
    for j in 1..n {
        acc += 0.5 * (weight(j - 1) + weight(j)) * (values[j] - values[j - 1]);
    }
    Ok(acc)
}
