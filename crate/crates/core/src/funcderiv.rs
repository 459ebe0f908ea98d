//! Numerical functional differentiation: Dupire's spatial and temporal
//! derivatives, higher-order word derivatives, Malliavin parallel-shift
//! derivatives, the intrinsic embedding, seminorm estimation, and pathwise
//! Stratonovich integration of functional integrands.
//!
//! Word convention: the rightmost letter acts first, so `D_{001} f` means
//! `D_t (D_t (D_x f))`.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::path::Path;
use crate::signature::Signature;
use crate::words::{enumerate_words, Word};

/// Differentiation direction: letter 0 is time, letter 1 is space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Letter {
    Time,
    Space,
}

impl Letter {
    pub fn from_bit(b: u8) -> Letter {
        if b == 0 {
            Letter::Time
        } else {
            Letter::Space
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            Letter::Time => 0,
            Letter::Space => 1,
        }
    }
}

/// An evaluatable map from paths to reals. Implementations must be free of
/// hidden mutable state so that finite-difference stencils can evaluate them
/// concurrently.
pub trait Functional: Send + Sync {
    fn eval(&self, x: &Path) -> Result<f64>;

    /// Exact Dupire derivative in the given direction when one is known.
    /// Returning `None` makes [`delta_word`] fall back to finite differences.
    fn exact_derivative(&self, _letter: Letter) -> Option<ArcFunctional> {
        None
    }
}

pub type ArcFunctional = Arc<dyn Functional>;

impl Functional for ArcFunctional {
    fn eval(&self, x: &Path) -> Result<f64> {
        self.as_ref().eval(x)
    }

    fn exact_derivative(&self, letter: Letter) -> Option<ArcFunctional> {
        self.as_ref().exact_derivative(letter)
    }
}

/// Finite-difference configuration.
///
/// Steps are relative: the spatial step is `h_x * max(1, sup|x|)` and the
/// temporal step `h_t * max(1, t_end)`, both widened by `growth^level` per
/// nesting level so that nested differences balance truncation against
/// cancellation.
#[derive(Debug, Clone)]
pub struct DiffConfig {
    pub h_x: f64,
    pub h_t: f64,
    pub growth: f64,
    /// Highest order computed by nested finite differences; functionals with
    /// registered exact derivatives are not limited.
    pub max_order: usize,
    pub max_malliavin: usize,
    /// Declared global horizon; temporal extensions past it are rejected.
    pub horizon: Option<f64>,
    /// Use registered exact derivatives where available.
    pub use_exact: bool,
    /// Sampling resolution for seminorm estimation and anti-derivative
    /// quadrature.
    pub n_eps: usize,
}

impl Default for DiffConfig {
    fn default() -> Self {
        Self {
            h_x: 1e-5,
            h_t: 1e-4,
            growth: 10f64.sqrt(),
            max_order: 4,
            max_malliavin: 3,
            horizon: None,
            use_exact: true,
            n_eps: 21,
        }
    }
}

impl DiffConfig {
    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = Some(horizon);
        self
    }

    pub fn without_exact(mut self) -> Self {
        self.use_exact = false;
        self
    }

    pub fn spatial_step(&self, x: &Path, level: usize) -> f64 {
        self.h_x * x.sup_norm().max(1.0) * self.growth.powi(level as i32)
    }

    pub fn temporal_step(&self, x: &Path, level: usize) -> f64 {
        self.h_t * x.t_end().max(1.0) * self.growth.powi(level as i32)
    }
}

fn finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { context: "functional evaluation" })
    }
}

/// Spatial derivative by central difference on terminal bumps.
pub fn delta_x(f: &dyn Functional, x: &Path, cfg: &DiffConfig) -> Result<f64> {
    delta_word(f, x, &Word::from_letters(&[1]), cfg)
}

/// Temporal derivative by one-sided forward difference on flat extensions
/// (the right limit in the definition).
pub fn delta_t(f: &dyn Functional, x: &Path, cfg: &DiffConfig) -> Result<f64> {
    delta_word(f, x, &Word::from_letters(&[0]), cfg)
}

/// A spatial-derivative estimate with kink diagnostics: the one-sided
/// differences around the bump disagree visibly at a kink (e.g. a running
/// maximum at its argmax) while they agree to O(h) on smooth functionals.
#[derive(Debug, Clone, Copy)]
pub struct DerivEstimate {
    pub value: f64,
    pub one_sided_left: f64,
    pub one_sided_right: f64,
    pub kink_suspect: bool,
}

/// Central spatial difference plus one-sided comparisons; flags the result
/// kink-suspect when the one-sided slopes disagree by more than 10% of the
/// value scale.
pub fn delta_x_diagnostic(f: &dyn Functional, x: &Path, cfg: &DiffConfig) -> Result<DerivEstimate> {
    let h = cfg.spatial_step(x, 0);
    let up = finite(f.eval(&x.bump(h))?)?;
    let mid = finite(f.eval(x)?)?;
    let dn = finite(f.eval(&x.bump(-h))?)?;
    let right = (up - mid) / h;
    let left = (mid - dn) / h;
    let value = (up - dn) / (2.0 * h);
    let kink_suspect = (right - left).abs() > 0.1 * value.abs().max(1.0);
    Ok(DerivEstimate { value, one_sided_left: left, one_sided_right: right, kink_suspect })
}

/// Higher-order derivative `D_a f(X)`, rightmost letter first.
///
/// Registered exact derivatives are peeled from the right; anything left is
/// resolved by nested finite differences (central in space, forward in time)
/// with steps widened by `growth^level`.
pub fn delta_word(f: &dyn Functional, x: &Path, word: &Word, cfg: &DiffConfig) -> Result<f64> {
    if word.is_empty() {
        return finite(f.eval(x)?);
    }
    if cfg.use_exact {
        if let Some(g) = f.exact_derivative(Letter::from_bit(word.last().unwrap())) {
            return delta_word(g.as_ref(), x, &word.drop_last(1), cfg);
        }
    }
    if word.len() > cfg.max_order {
        return Err(Error::OrderTooHigh { order: word.len(), max: cfg.max_order });
    }
    let rest = word.drop_first();
    let level = word.len() - 1;
    match Letter::from_bit(word.first().unwrap()) {
        Letter::Space => {
            let h = cfg.spatial_step(x, level);
            if h <= 0.0 || !h.is_finite() {
                return Err(Error::StepUnderflow { step: h });
            }
            let up = delta_word(f, &x.bump(h), &rest, cfg)?;
            let dn = delta_word(f, &x.bump(-h), &rest, cfg)?;
            finite((up - dn) / (2.0 * h))
        }
        Letter::Time => {
            let d = cfg.temporal_step(x, level);
            if let Some(t) = cfg.horizon {
                if x.t_end() + d > t {
                    return Err(Error::HorizonExceeded { t_end: x.t_end(), horizon: t });
                }
            }
            let up = delta_word(f, &x.stop_extend(d)?, &rest, cfg)?;
            let base = delta_word(f, x, &rest, cfg)?;
            finite((up - base) / d)
        }
    }
}

/// The derivative `D_a f` as a functional of the base path, deferring to
/// [`delta_word`] on evaluation. Its own exact derivative prepends letters,
/// which keeps derivative composition associative.
pub struct DerivedFunctional {
    inner: ArcFunctional,
    word: Word,
    cfg: DiffConfig,
}

impl DerivedFunctional {
    pub fn new(inner: ArcFunctional, word: Word, cfg: DiffConfig) -> Self {
        Self { inner, word, cfg }
    }
}

impl Functional for DerivedFunctional {
    fn eval(&self, x: &Path) -> Result<f64> {
        delta_word(self.inner.as_ref(), x, &self.word, &self.cfg)
    }

    fn exact_derivative(&self, letter: Letter) -> Option<ArcFunctional> {
        let mut letters = vec![letter.bit()];
        letters.extend(self.word.letters());
        Some(Arc::new(DerivedFunctional {
            inner: self.inner.clone(),
            word: Word::from_letters(&letters),
            cfg: self.cfg.clone(),
        }))
    }
}

/// Table of derivative values `D_a f(X)` for all `|a| <= K` at a fixed base
/// path; doubles as a coefficient table for signature combinations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DerivTable {
    entries: BTreeMap<Word, f64>,
}

impl DerivTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, w: Word, v: f64) {
        self.entries.insert(w, v);
    }

    pub fn get(&self, w: &Word) -> Option<f64> {
        self.entries.get(w).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Word, &f64)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_word_len(&self) -> usize {
        self.entries.keys().map(|w| w.len()).max().unwrap_or(0)
    }

    /// Evaluates `sum c_a S_a` against a signature.
    pub fn eval(&self, sig: &Signature) -> f64 {
        self.entries.iter().map(|(w, c)| c * sig.get(w)).sum()
    }

    /// Same, restricted to words of length <= `max_len`.
    pub fn eval_truncated(&self, sig: &Signature, max_len: usize) -> f64 {
        self.entries
            .iter()
            .filter(|(w, _)| w.len() <= max_len)
            .map(|(w, c)| c * sig.get(w))
            .sum()
    }

    /// TSV serialization, `word <tab> coefficient` per row.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("word\tcoefficient\n");
        for (w, c) in &self.entries {
            out.push_str(&format!("{w}\t{c:.17e}\n"));
        }
        out
    }

    pub fn parse_tsv(text: &str) -> Result<Self> {
        let mut table = DerivTable::new();
        for (i, line) in text.lines().enumerate() {
            if i == 0 && line.starts_with("word") {
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split('\t');
            match (cols.next(), cols.next()) {
                (Some(w), Some(c)) => {
                    let word: Word = w.trim().parse()?;
                    let coeff: f64 = c
                        .trim()
                        .parse()
                        .map_err(|e| Error::Parse(format!("row {}: {e}", i + 1)))?;
                    table.insert(word, coeff);
                }
                _ => return Err(Error::Parse(format!("row {}: expected two columns", i + 1))),
            }
        }
        Ok(table)
    }
}

/// All derivatives `D_a f(X)` for `|a| <= max_len`. The empty-word entry is
/// `f(X)` itself.
pub fn derivative_table(
    f: &dyn Functional,
    x: &Path,
    max_len: usize,
    cfg: &DiffConfig,
) -> Result<DerivTable> {
    let mut table = DerivTable::new();
    for w in enumerate_words(max_len) {
        table.insert(w, delta_word(f, x, &w, cfg)?);
    }
    Ok(table)
}

/// First Malliavin derivative `D_t g(X_T)`: central finite difference of `g`
/// under the parallel shift `h 1_{[t, T]}`.
pub fn malliavin(g: &dyn Functional, x: &Path, t: f64, cfg: &DiffConfig) -> Result<f64> {
    malliavin_iter(g, x, &[t], cfg)
}

/// Iterated Malliavin derivative `D_{t_1 ... t_k} g(X_T)` by nested central
/// differences over all sign patterns of the k parallel shifts.
pub fn malliavin_iter(g: &dyn Functional, x: &Path, times: &[f64], cfg: &DiffConfig) -> Result<f64> {
    let k = times.len();
    if k == 0 {
        return finite(g.eval(x)?);
    }
    if k > cfg.max_malliavin {
        return Err(Error::MalliavinOrder { k, max: cfg.max_malliavin });
    }
    let sorted = times.windows(2).all(|w| w[0] <= w[1])
        && times[0] >= 0.0
        && *times.last().unwrap() <= x.t_end() + 1e-12 * x.t_end().max(1.0);
    if !sorted {
        return Err(Error::UnorderedTimes { horizon: x.t_end() });
    }
    let h = cfg.spatial_step(x, k - 1);
    let mut acc = 0.0;
    for mask in 0..(1u32 << k) {
        let mut shifted = x.clone();
        let mut sign = 1.0;
        for (i, &t) in times.iter().enumerate() {
            let s = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
            sign *= s;
            shifted = shifted.parallel_shift(t.min(shifted.t_end()), s * h);
        }
        acc += sign * finite(g.eval(&shifted)?)?;
    }
    finite(acc / (2.0 * h).powi(k as i32))
}

/// The intrinsic embedding `i_0 g(X_t) = g(X_{t, T-t})`: evaluates the
/// T-functional on the flat extension of the current path to the horizon.
/// Its temporal derivative vanishes identically (flat extensions compose),
/// which is registered as an exact derivative.
pub struct IntrinsicEmbed {
    g: ArcFunctional,
    horizon: f64,
}

/// Builds `i_0 g` for a declared horizon.
pub fn intrinsic_embed(g: ArcFunctional, horizon: f64) -> ArcFunctional {
    Arc::new(IntrinsicEmbed { g, horizon })
}

impl Functional for IntrinsicEmbed {
    fn eval(&self, x: &Path) -> Result<f64> {
        let room = self.horizon - x.t_end();
        if room < -1e-12 * self.horizon.max(1.0) {
            return Err(Error::HorizonExceeded { t_end: x.t_end(), horizon: self.horizon });
        }
        self.g.eval(&x.stop_extend(room.max(0.0))?)
    }

    fn exact_derivative(&self, letter: Letter) -> Option<ArcFunctional> {
        match letter {
            Letter::Time => Some(crate::functional::constant(0.0)),
            Letter::Space => None,
        }
    }
}

/// Sampled estimate of the seminorm `sup_{s <= t} sup_{eps in [x_0, x_s]}
/// |phi(X_s^{(eps)})|`: a lower bound of the true supremum at the sampling
/// resolution `n_eps`.
pub fn seminorm_estimate(phi: &dyn Functional, x: &Path, n_eps: usize) -> Result<f64> {
    if n_eps < 2 {
        return Err(Error::InvalidConfig(format!("n_eps = {n_eps} < 2")));
    }
    let x0 = x.start_value();
    let mut worst = 0.0f64;
    for i in 0..x.num_samples() {
        let prefix = x.prefix(i);
        let xs = prefix.end_value();
        let (lo, hi) = (x0.min(xs), x0.max(xs));
        for j in 0..n_eps {
            let eps = lo + (hi - lo) * j as f64 / (n_eps - 1) as f64;
            let v = finite(phi.eval(&prefix.bump_to(eps))?)?;
            worst = worst.max(v.abs());
        }
    }
    Ok(worst)
}

/// Pathwise Stratonovich integral of a functional integrand along a path:
/// the trapezoid sum `sum (phi(X_{t-}) + phi(X_t)) / 2 * dx`. Jump stamps
/// contribute the averaged pre/post value times the jump, matching the limit
/// definition on bump-extended paths.
pub fn strat_integral(phi: &dyn Functional, x: &Path) -> Result<f64> {
    let mut prev = finite(phi.eval(&x.prefix(0))?)?;
    let mut acc = 0.0;
    for i in 1..x.num_samples() {
        let cur = finite(phi.eval(&x.prefix(i))?)?;
        acc += 0.5 * (prev + cur) * (x.values()[i] - x.values()[i - 1]);
        prev = cur;
    }
    Ok(acc)
}

/// Anti-derivative form of the same integral:
/// `int_{x_0}^{x_t} phi(X_t^{(eps)}) d eps - int_0^t int_{x_0}^{x_s}
/// D_t phi(X_s^{(eps)}) d eps ds`, by composite Simpson in eps and trapezoid
/// in s. The time correction vanishes for integrands with `D_t phi = 0`.
pub fn strat_integral_antideriv(phi: &dyn Functional, x: &Path, cfg: &DiffConfig) -> Result<f64> {
    let spatial = |p: &Path, func: &dyn Fn(&Path) -> Result<f64>| -> Result<f64> {
        let (a, b) = (p.start_value(), p.end_value());
        simpson(a, b, cfg.n_eps, &|eps| func(&p.bump_to(eps)))
    };
    let main = spatial(x, &|p| phi.eval(p))?;
    // trapezoid in s of the inner eps-integral of D_t phi
    let mut correction = 0.0;
    let mut prev: Option<f64> = None;
    for i in 0..x.num_samples() {
        let prefix = x.prefix(i);
        let inner = spatial(&prefix, &|p| delta_t(phi, p, cfg))?;
        if let Some(prev_inner) = prev {
            let dt = x.times()[i] - x.times()[i - 1];
            correction += 0.5 * (prev_inner + inner) * dt;
        }
        prev = Some(inner);
    }
    Ok(main - correction)
}

/// Composite Simpson over [a, b] with at least `n` points (rounded up to an
/// even panel count). Degenerates gracefully when a = b.
fn simpson(a: f64, b: f64, n: usize, f: &dyn Fn(f64) -> Result<f64>) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let panels = ((n.max(3) - 1) / 2) * 2;
    let h = (b - a) / panels as f64;
    let mut acc = f(a)? + f(b)?;
    for j in 1..panels {
        let w = if j % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + h * j as f64)?;
    }
    Ok(acc * h / 3.0)
}

/// Residual of the functional Stratonovich formula,
/// `f(X_t) - f(X_0) - int D_t f ds - int D_x f o dx`,
/// with both integrals on the path's own grid. Vanishes at rate O(mesh^2)
/// under refinement for smooth functionals.
pub fn fsf_residual(f: &dyn Functional, x: &Path, cfg: &DiffConfig) -> Result<f64> {
    let n = x.num_samples();
    let mut time_vals = Vec::with_capacity(n);
    let mut space_vals = Vec::with_capacity(n);
    for i in 0..n {
        let prefix = x.prefix(i);
        time_vals.push(delta_t(f, &prefix, cfg)?);
        space_vals.push(delta_x(f, &prefix, cfg)?);
    }
    let mut time_int = 0.0;
    let mut space_int = 0.0;
    for i in 1..n {
        let dt = x.times()[i] - x.times()[i - 1];
        let dx = x.values()[i] - x.values()[i - 1];
        time_int += 0.5 * (time_vals[i - 1] + time_vals[i]) * dt;
        space_int += 0.5 * (space_vals[i - 1] + space_vals[i]) * dx;
    }
    let total = finite(f.eval(x)?)? - finite(f.eval(&x.prefix(0))?)?;
    Ok(total - time_int - space_int)
}

/// Block-averaged first Volterra (Frechet) kernel of a T-functional: the
/// response of `g` to the impulse `h 1_{[t, t+width)}`, normalized by the
/// block area.
pub fn volterra_kernel1(
    g: &dyn Functional,
    base: &Path,
    t: f64,
    width: f64,
    cfg: &DiffConfig,
) -> Result<f64> {
    let h = cfg.spatial_step(base, 0);
    let up = finite(g.eval(&base.block_shift(t, width, h)?)?)?;
    let dn = finite(g.eval(&base.block_shift(t, width, -h)?)?)?;
    Ok((up - dn) / (2.0 * h * width))
}
