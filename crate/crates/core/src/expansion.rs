//! Expansion engines: the functional Taylor expansion (forward, Maclaurin,
//! and backward variants), exact and estimated remainders, the intrinsic
//! value expansion driven by Malliavin kernels, kernel reconstruction, and
//! the chaos bridge for path-independent payoffs.

use std::sync::Arc;

use gauss_quad::GaussHermite;

use crate::error::{Error, Result};
use crate::funcderiv::{
    delta_word, malliavin_iter, ArcFunctional, DerivTable, DerivedFunctional, DiffConfig,
    Functional, Letter,
};
use crate::functional::{constant, of_terminal, ScalarFn};
use crate::path::Path;
use crate::signature::{hermite_combination, signature, IveKernel, Signature};
use crate::util::factorial;
use crate::words::{enumerate_words, Word};

/// One row of an expansion report: `coefficient * sig_value` is the term's
/// contribution to the truncation.
#[derive(Debug, Clone)]
pub struct ExpansionTerm {
    pub word: Word,
    pub coefficient: f64,
    pub sig_value: f64,
}

impl ExpansionTerm {
    pub fn product(&self) -> f64 {
        self.coefficient * self.sig_value
    }
}

/// Result of a truncated functional Taylor expansion. The truncation sums
/// the words of length strictly below `order`; when the functional is
/// evaluable at the target path, the exact remainder is reported alongside.
#[derive(Debug, Clone)]
pub struct ExpansionReport {
    pub order: usize,
    pub terms: Vec<ExpansionTerm>,
    pub truncated: f64,
    pub exact: Option<f64>,
    pub exact_remainder: Option<f64>,
}

impl ExpansionReport {
    fn from_parts(order: usize, terms: Vec<ExpansionTerm>, exact: Option<f64>) -> Self {
        let truncated = terms.iter().map(ExpansionTerm::product).sum();
        let exact_remainder = exact.map(|v| v - truncated);
        Self { order, terms, truncated, exact, exact_remainder }
    }

    /// Truncation restricted to words of length <= `max_len`.
    pub fn truncated_at(&self, max_len: usize) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.word.len() <= max_len)
            .map(ExpansionTerm::product)
            .sum()
    }

    /// Coefficient table of the expansion.
    pub fn coefficients(&self) -> DerivTable {
        let mut table = DerivTable::new();
        for t in &self.terms {
            table.insert(t.word, t.coefficient);
        }
        table
    }

    /// TSV rows `word, coefficient, sig_value, product`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("word\tcoefficient\tsig_value\tproduct\n");
        for t in &self.terms {
            out.push_str(&format!(
                "{}\t{:.12e}\t{:.12e}\t{:.12e}\n",
                t.word,
                t.coefficient,
                t.sig_value,
                t.product()
            ));
        }
        out
    }
}

/// Functional Taylor expansion of `f(X (+) Y)` around the base path `X`:
/// truncation `sum_{|a| < K} D_a f(X) S_a(Y)`; the exact remainder is
/// attached when `f` is evaluable at the concatenation.
pub fn fte(
    f: &dyn Functional,
    base: &Path,
    pert: &Path,
    order: usize,
    cfg: &DiffConfig,
) -> Result<ExpansionReport> {
    if order == 0 {
        return Err(Error::InvalidConfig("expansion order must be >= 1".into()));
    }
    if pert.has_jumps() {
        return Err(Error::JumpsUnsupported { op: "fte perturbation" });
    }
    if let Some(horizon) = cfg.horizon {
        let total = base.t_end() + pert.t_end();
        if total > horizon + 1e-12 * horizon.max(1.0) {
            return Err(Error::HorizonExceeded { t_end: total, horizon });
        }
    }
    let sig = signature(pert, order - 1)?;
    let mut terms = Vec::new();
    for w in enumerate_words(order - 1) {
        terms.push(ExpansionTerm {
            word: w,
            coefficient: delta_word(f, base, &w, cfg)?,
            sig_value: sig.get(&w),
        });
    }
    let exact = f.eval(&base.concat(pert)).ok();
    Ok(ExpansionReport::from_parts(order, terms, exact))
}

/// Functional Maclaurin expansion: the FTE around the length-0 path at the
/// start value of `X`, with `X` itself as the perturbation.
pub fn maclaurin(
    f: &dyn Functional,
    x: &Path,
    order: usize,
    cfg: &DiffConfig,
) -> Result<ExpansionReport> {
    if order == 0 {
        return Err(Error::InvalidConfig("expansion order must be >= 1".into()));
    }
    let base = Path::point(x.start_value());
    let sig = signature(x, order - 1)?;
    let mut terms = Vec::new();
    for w in enumerate_words(order - 1) {
        terms.push(ExpansionTerm {
            word: w,
            coefficient: delta_word(f, &base, &w, cfg)?,
            sig_value: sig.get(&w),
        });
    }
    let exact = f.eval(x).ok();
    Ok(ExpansionReport::from_parts(order, terms, exact))
}

/// Anticipative expansion of `f(X_s)` around the later prefix `X_t`, using
/// the signature of the time-reversed window.
///
/// Reversing a time-augmented window flips the orientation of the dx slots
/// but not of the dt slots, so each signature value carries the sign
/// `(-1)^{|a|_0}`; equivalently, the time component of the reversed window
/// runs backward. With that twist the reversed-window signature is the
/// group inverse of the window's and the expansion rewinds exactly on the
/// signature span. (Checked against `f = S_0`: the expansion must return
/// `s = t - (t - s)`, which forces the sign on the time letter.)
pub fn fte_backward(
    f: &dyn Functional,
    x: &Path,
    s: f64,
    t: f64,
    order: usize,
    cfg: &DiffConfig,
) -> Result<ExpansionReport> {
    if order == 0 {
        return Err(Error::InvalidConfig("expansion order must be >= 1".into()));
    }
    let late = x.prefix_at(t)?;
    let reversed = x.reverse_restrict(t, s)?;
    let sig = signature(&reversed, order - 1)?;
    let mut terms = Vec::new();
    for w in enumerate_words(order - 1) {
        let orientation = if w.count0() % 2 == 0 { 1.0 } else { -1.0 };
        terms.push(ExpansionTerm {
            word: w,
            coefficient: delta_word(f, &late, &w, cfg)?,
            sig_value: orientation * sig.get(&w),
        });
    }
    let exact = f.eval(&x.prefix_at(s)?).ok();
    Ok(ExpansionReport::from_parts(order, terms, exact))
}

/// The scale `rho(X_t) = 2 (t ∨ sup_s |x_s - x_0|)` controlling remainder
/// decay; the expansion converges geometrically once `rho < 1`.
pub fn rho(x: &Path) -> f64 {
    2.0 * x.t_end().max(x.sup_increment())
}

/// Sampled remainder bound for the order-K Maclaurin truncation.
#[derive(Debug, Clone)]
pub struct RemainderBound {
    /// Per-word bounds `2^{|a|_01} / |a|_0! * c_a * t^{|a|_0} * sup^{|a|_1}`
    /// over `|a| = K`.
    pub per_word: Vec<(Word, f64)>,
    /// Sum of the per-word bounds.
    pub total: f64,
    /// `C_K = max c_a`.
    pub c_k: f64,
    /// The decay scale `rho(X_t)`.
    pub rho: f64,
    /// The uniform bound `C_K rho^K`.
    pub uniform: f64,
}

/// Estimates the remainder bound components for the order-`k` truncation at
/// `x`: per-word constants `c_a = ||D_a f|| + (t ∨ 1) ||D_{0a} f||` with the
/// seminorms sampled at resolution `n_eps`. The sampled suprema are lower
/// bounds of the true constants, so the result is an estimated bound.
pub fn remainder_bound(
    f: ArcFunctional,
    x: &Path,
    k: usize,
    n_eps: usize,
    cfg: &DiffConfig,
) -> Result<RemainderBound> {
    if k == 0 {
        return Err(Error::InvalidConfig("remainder order must be >= 1".into()));
    }
    let t = x.t_end();
    let sup = x.sup_increment();
    let mut per_word = Vec::new();
    let mut c_k = 0.0f64;
    for w in enumerate_words(k) {
        if w.len() != k {
            continue;
        }
        let d_a = DerivedFunctional::new(f.clone(), w, cfg.clone());
        let d_0a = DerivedFunctional::new(f.clone(), w.insert(0, 0), cfg.clone());
        let c_a = crate::funcderiv::seminorm_estimate(&d_a, x, n_eps)?
            + t.max(1.0) * crate::funcderiv::seminorm_estimate(&d_0a, x, n_eps)?;
        c_k = c_k.max(c_a);
        let bound = 2f64.powi(w.count01() as i32) / factorial(w.count0())
            * c_a
            * t.powi(w.count0() as i32)
            * sup.powi(w.count1() as i32);
        per_word.push((w, bound));
    }
    let total = per_word.iter().map(|(_, b)| b).sum();
    let r = rho(x);
    Ok(RemainderBound { per_word, total, c_k, rho: r, uniform: c_k * r.powi(k as i32) })
}

/// Remainder bound for Lipschitz perturbations under the growth condition
/// `|D_a f| <= C1^K (K!)^{C2}`: the bound is
/// `(K!)^{C2 - 1} (2 C1 ([Y]_Lip ∨ 1) u)^K`.
pub fn remainder_bound_lip(c1: f64, c2: f64, y: &Path, k: usize) -> f64 {
    let scale = 2.0 * c1 * y.lipschitz_seminorm().max(1.0) * y.t_end();
    factorial(k).powf(c2 - 1.0) * scale.powi(k as i32)
}

/// Radius of convergence implied by the growth constants: `(1/(2 C1)) ∧ 1`
/// when `C2 < 1`, infinite when `C2 = 1`, zero (not analytic) when `C2 > 1`.
pub fn radius_estimate(c1: f64, c2: f64) -> f64 {
    if c2 > 1.0 {
        0.0
    } else if c2 < 1.0 {
        (1.0 / (2.0 * c1)).min(1.0)
    } else {
        f64::INFINITY
    }
}

/// Report of an intrinsic value expansion: per-order Stratonovich terms with
/// kernels given by iterated Malliavin derivatives at the flat start path.
#[derive(Debug, Clone)]
pub struct IveReport {
    /// `terms[k]` is the order-k contribution; order 0 is `g` at the flat
    /// extension of the start value.
    pub terms: Vec<f64>,
    pub truncated: f64,
    pub exact: f64,
    pub residual: f64,
}

/// Intrinsic value expansion of a T-functional along `x`:
/// `g(X_T) = g(X_{0,T}) + sum_{k < K} I_k[D_{t_1..t_k} g(X_{0,T})] + R_K`,
/// with each `I_k` a nested Stratonovich trapezoid quadrature over the
/// simplex of the path's grid.
pub fn ive_expand(
    g: &dyn Functional,
    x: &Path,
    k_max: usize,
    cfg: &DiffConfig,
) -> Result<IveReport> {
    if x.has_jumps() {
        return Err(Error::JumpsUnsupported { op: "ive_expand" });
    }
    let horizon = x.t_end();
    let flat = Path::flat(x.start_value(), horizon);
    let mut terms = vec![g.eval(&flat)?];
    for k in 1..k_max {
        let kernel = |times: &[f64]| malliavin_iter(g, &flat, times, cfg);
        terms.push(nested_strat_quadrature(x, k, &kernel)?);
    }
    let truncated = terms.iter().sum();
    let exact = g.eval(x)?;
    Ok(IveReport { terms, truncated, exact, residual: exact - truncated })
}

/// Nested Stratonovich trapezoid quadrature of a general simplex kernel
/// against `dx` in each slot, on the path's own grid. Supports k <= 3; the
/// kernel is memoized on grid tuples.
fn nested_strat_quadrature(
    x: &Path,
    k: usize,
    kernel: &dyn Fn(&[f64]) -> Result<f64>,
) -> Result<f64> {
    let (times, values) = (x.times(), x.values());
    let n = times.len();
    let strat = |f: &dyn Fn(usize) -> f64, hi: usize| -> f64 {
        let mut acc = 0.0;
        for i in 1..=hi {
            acc += 0.5 * (f(i - 1) + f(i)) * (values[i] - values[i - 1]);
        }
        acc
    };
    match k {
        1 => {
            let mut cache = vec![0.0; n];
            for (i, slot) in cache.iter_mut().enumerate() {
                *slot = kernel(&[times[i]])?;
            }
            Ok(strat(&|i| cache[i], n - 1))
        }
        2 => {
            let mut cache = vec![vec![0.0; n]; n];
            for j in 0..n {
                for i in 0..=j {
                    cache[i][j] = kernel(&[times[i], times[j]])?;
                }
            }
            let inner: Vec<f64> = (0..n).map(|j| strat(&|i| cache[i][j], j)).collect();
            Ok(strat(&|j| inner[j], n - 1))
        }
        3 => {
            // memoize on (i, j) pairs per outer index to keep memory flat
            let mut outer_vals = vec![0.0; n];
            for (l, slot) in outer_vals.iter_mut().enumerate() {
                let mut cache = vec![vec![0.0; l + 1]; l + 1];
                for j in 0..=l {
                    for i in 0..=j {
                        cache[i][j] = kernel(&[times[i], times[j], times[l]])?;
                    }
                }
                let inner: Vec<f64> = (0..=l).map(|j| strat(&|i| cache[i][j], j)).collect();
                *slot = strat(&|j| inner[j], l);
            }
            Ok(strat(&|l| outer_vals[l], n - 1))
        }
        _ => Err(Error::QuadratureOrder { k, max: 3 }),
    }
}

/// Reconstructs the order-k intrinsic kernel from intrinsic-functional
/// derivatives and signature kernels:
/// `D_{t_1..t_k} g(X_{0,T}) ~ sum_{|a|_1 = k, |a| <= K_word}
/// D_a i_0 g(X_0) phi^a(t_1..t_k)`.
pub fn ive_kernel_reconstruct(
    g: ArcFunctional,
    horizon: f64,
    x0: f64,
    times: &[f64],
    k_word: usize,
    cfg: &DiffConfig,
) -> Result<f64> {
    let k = times.len();
    let embedded = crate::funcderiv::intrinsic_embed(g, horizon);
    let base = Path::point(x0);
    let cfg = cfg.clone().with_horizon(horizon);
    let mut acc = 0.0;
    for w in enumerate_words(k_word) {
        if w.count1() != k {
            continue;
        }
        let coeff = delta_word(embedded.as_ref(), &base, &w, &cfg)?;
        if coeff != 0.0 {
            acc += coeff * IveKernel::new(w, horizon).eval(times)?;
        }
    }
    Ok(acc)
}

/// Price functional of a path-independent payoff under a Bachelier smoothing:
/// `f(X_t) = E[h(x_t + sigma sqrt(T - t) Z)]` by Gauss-Hermite quadrature.
/// Spatial and temporal derivatives follow the heat structure
/// (`D_x f = E[h']`, `D_t f = -(sigma^2/2) E[h'']`) when `h` carries them.
pub struct GaussianPriceFunctional {
    h: Arc<dyn ScalarFn>,
    sigma: f64,
    horizon: f64,
    nodes: usize,
}

/// Builds the Gauss-Hermite price functional of `h(x_T)`.
pub fn gaussian_price_functional(
    h: Arc<dyn ScalarFn>,
    sigma: f64,
    horizon: f64,
) -> ArcFunctional {
    Arc::new(GaussianPriceFunctional { h, sigma, horizon, nodes: 64 })
}

impl GaussianPriceFunctional {
    fn smoothed(&self, x: f64, t: f64) -> f64 {
        let std = self.sigma * (self.horizon - t).max(0.0).sqrt();
        if std == 0.0 {
            return self.h.eval(x);
        }
        let quad = GaussHermite::new(std::num::NonZeroUsize::new(self.nodes).unwrap());
        quad.integrate(|u| self.h.eval(x + std * std::f64::consts::SQRT_2 * u))
            / std::f64::consts::PI.sqrt()
    }
}

impl Functional for GaussianPriceFunctional {
    fn eval(&self, x: &Path) -> Result<f64> {
        if x.t_end() > self.horizon + 1e-12 * self.horizon.max(1.0) {
            return Err(Error::HorizonExceeded { t_end: x.t_end(), horizon: self.horizon });
        }
        Ok(self.smoothed(x.end_value(), x.t_end()))
    }

    fn exact_derivative(&self, letter: Letter) -> Option<ArcFunctional> {
        let dh = self.h.derivative()?;
        match letter {
            Letter::Space => Some(gaussian_price_functional(dh, self.sigma, self.horizon)),
            Letter::Time => {
                let ddh = dh.derivative()?;
                let base = gaussian_price_functional(ddh, self.sigma, self.horizon);
                Some(crate::functional::scale(-0.5 * self.sigma * self.sigma, base))
            }
        }
    }
}

/// Chaos coefficients of the path-independent payoff `h(x_T)` under the
/// Bachelier measure with volatility `sigma`: the spatial derivatives
/// `D_{1...1} f(0)` of the price functional at the origin,
/// `c_k = E[h^(k)(sigma sqrt(T) Z)]`.
///
/// Exact scalar derivative chains are integrated directly by Gauss-Hermite;
/// otherwise the smoothed function is differentiated by central finite
/// differences (limited to `cfg.max_order`). Two node counts cross-check the
/// quadrature.
pub fn chaos_coeffs(
    h: Arc<dyn ScalarFn>,
    sigma: f64,
    horizon: f64,
    k_max: usize,
    cfg: &DiffConfig,
) -> Result<Vec<f64>> {
    if sigma <= 0.0 || horizon <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "need sigma > 0 and horizon > 0, got {sigma}, {horizon}"
        )));
    }
    let std = sigma * horizon.sqrt();
    // collect the derivative chain as far as it goes
    let mut chain: Vec<Arc<dyn ScalarFn>> = vec![h.clone()];
    for _ in 0..k_max {
        match chain.last().unwrap().derivative() {
            Some(d) => chain.push(d),
            None => break,
        }
    }
    let gh_mean = |f: &dyn Fn(f64) -> f64, nodes: usize| -> f64 {
        GaussHermite::new(std::num::NonZeroUsize::new(nodes).unwrap()).integrate(|u| f(std * std::f64::consts::SQRT_2 * u))
            / std::f64::consts::PI.sqrt()
    };
    let mut coeffs = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let value = if k < chain.len() {
            let hk = chain[k].clone();
            let coarse = gh_mean(&|z| hk.eval(z), 40);
            let fine = gh_mean(&|z| hk.eval(z), 80);
            if (coarse - fine).abs() > 1e-7 * fine.abs().max(1.0) {
                return Err(Error::QuadratureNonConvergence(format!(
                    "chaos coefficient {k}: {coarse} vs {fine}"
                )));
            }
            fine
        } else {
            // finite differences on the smoothed function at the origin
            if k > cfg.max_order {
                return Err(Error::OrderTooHigh { order: k, max: cfg.max_order });
            }
            let smoothed = |x: f64| gh_mean(&|z| h.eval(x + z), 80);
            central_kth(&smoothed, 0.0, k, cfg)
        };
        coeffs.push(value);
    }
    Ok(coeffs)
}

/// k-th central difference of a scalar function, with the same step-widening
/// policy as nested path derivatives.
fn central_kth(f: &dyn Fn(f64) -> f64, x: f64, k: usize, cfg: &DiffConfig) -> f64 {
    if k == 0 {
        return f(x);
    }
    let h = cfg.h_x * cfg.growth.powi(k as i32 - 1);
    let mut acc = 0.0;
    for j in 0..=k {
        let sign = if (k - j) % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * crate::util::binomial(k, j) * f(x + (2.0 * j as f64 - k as f64) * h);
    }
    acc / (2.0 * h).powi(k as i32)
}

/// Converts chaos coefficients into a signature-coefficient table:
/// `sum_k c_k * sum_{||a|| = k} (-2)^{-|a|_0} S_a`.
pub fn chaos_to_signature(coeffs: &[f64]) -> DerivTable {
    let mut table = DerivTable::new();
    for (k, &c) in coeffs.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        for (w, poly) in hermite_combination(k).terms() {
            let prev = table.get(w).unwrap_or(0.0);
            table.insert(*w, prev + c * poly.eval(1.0));
        }
    }
    table
}

/// Chaos reconstruction `sum_k c_k J_k(t, x)` of a path-independent payoff.
pub fn chaos_reconstruct(coeffs: &[f64], t: f64, x: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(k, &c)| c * crate::signature::ito_iterated(t, x, k))
        .sum()
}

/// The payoff `h(x_t)` wrapped as a functional (path-independent).
pub fn payoff_of_terminal(h: Arc<dyn ScalarFn>) -> ArcFunctional {
    of_terminal(h)
}

/// Zero functional, occasionally useful as a placeholder coefficient.
pub fn zero_functional() -> ArcFunctional {
    constant(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::{
        exp_fn, exp_of, poly_fn, powi, product, sig_coord, sin_fn, start, sum,
        time_integral, time_integral_of_terminal,
    };
    use crate::signature::signature;
    use crate::util::rel_err_floor;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    fn cfg() -> DiffConfig {
        DiffConfig::default()
    }

    fn random_path(seed: u64, n: usize, t_end: f64, lip: f64, x0: f64) -> Path {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let times: Vec<f64> = (0..=n).map(|i| t_end * i as f64 / n as f64).collect();
        let dt = t_end / n as f64;
        let mut values = vec![x0];
        for _ in 0..n {
            let slope: f64 = rng.random_range(-lip..lip);
            values.push(values.last().unwrap() + slope * dt);
        }
        Path::new(times, values).unwrap()
    }

    #[test]
    fn fte_exact_on_signature_coordinates() {
        // Chen's identity as a Taylor series: zero remainder above the length
        let f = sig_coord(w("011"));
        let x = random_path(1, 20, 0.6, 1.0, 0.2);
        let y = random_path(2, 25, 0.8, 1.0, -0.1);
        let report = fte(f.as_ref(), &x, &y, 4, &cfg()).unwrap();
        assert!(report.exact_remainder.unwrap().abs() < 1e-12);
    }

    #[test]
    fn fte_classical_taylor_terms() {
        // path-independent analytic payoff: terms live on the all-ones words
        let f = exp_of(sig_coord(w("1")));
        let x = random_path(3, 15, 0.5, 1.0, 0.0);
        let y = random_path(4, 15, 0.4, 1.0, 0.0);
        let report = fte(f.as_ref(), &x, &y, 4, &cfg()).unwrap();
        let fx = f.eval(&x).unwrap();
        for term in &report.terms {
            if term.word.count0() > 0 {
                assert_eq!(term.coefficient, 0.0, "word {}", term.word);
            } else {
                // D_{1_k} exp(S_1) = exp(S_1)
                assert!((term.coefficient - fx).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fte_sin_integral_example() {
        // f = sqrt(2) int sin(x_s) ds from the flat start pi/4: the order-2
        // truncation (words up to length 2) is t + S_10(Y)
        let f = time_integral_of_terminal(sin_fn(2f64.sqrt(), 0.0));
        let base = Path::point(std::f64::consts::FRAC_PI_4);
        let y = random_path(5, 30, 0.5, 1.0, std::f64::consts::FRAC_PI_4);
        let report = fte(f.as_ref(), &base, &y, 3, &cfg()).unwrap();
        let sig = signature(&y, 2).unwrap();
        let expect = y.t_end() + sig.get(&w("10"));
        assert!(
            (report.truncated - expect).abs() < 1e-4,
            "{} vs {expect}",
            report.truncated
        );
        // and the remainder shrinks as the order grows
        let r2 = fte(f.as_ref(), &base, &y, 3, &cfg())
            .unwrap()
            .exact_remainder
            .unwrap()
            .abs();
        let r4 = fte(f.as_ref(), &base, &y, 5, &cfg())
            .unwrap()
            .exact_remainder
            .unwrap()
            .abs();
        assert!(r4 < r2);
    }

    #[test]
    fn maclaurin_examples() {
        let c = cfg();
        // single nonzero coefficient for a signature coordinate
        let f = sig_coord(w("011"));
        let x = random_path(6, 20, 0.7, 1.0, 0.3);
        let report = maclaurin(f.as_ref(), &x, 5, &c).unwrap();
        for term in &report.terms {
            let expect = if term.word == w("011") { 1.0 } else { 0.0 };
            assert_eq!(term.coefficient, expect, "word {}", term.word);
        }
        assert!(report.exact_remainder.unwrap().abs() < 1e-12);
        // cubic increment: coefficient 3! at 111
        let f = powi(sig_coord(w("1")), 3);
        let report = maclaurin(f.as_ref(), &x, 4, &c).unwrap();
        for term in &report.terms {
            let expect = if term.word == w("111") { 6.0 } else { 0.0 };
            assert!((term.coefficient - expect).abs() < 1e-12, "word {}", term.word);
        }
        // order 1 keeps only the constant term
        let report = maclaurin(f.as_ref(), &x, 1, &c).unwrap();
        assert_eq!(report.terms.len(), 1);
        assert_eq!(report.truncated, 0.0); // f at the length-0 path
    }

    #[test]
    fn backward_expansion_examples() {
        let c = cfg();
        let x = Path::sampled(|t| 0.4 * (2.0 * t).sin() + 0.3 * t, 1.0, 64);
        // f = S_1 is exactly reproduced at order 2
        let f = sig_coord(w("1"));
        let report = fte_backward(f.as_ref(), &x, 0.3, 0.9, 2, &c).unwrap();
        assert!(report.exact_remainder.unwrap().abs() < 1e-12);
        // s = t collapses to the evaluation
        let report = fte_backward(f.as_ref(), &x, 0.9, 0.9, 3, &c).unwrap();
        assert!((report.truncated - report.exact.unwrap()).abs() < 1e-12);
        // quadrature oracle for S_10 backward
        let f = sig_coord(w("10"));
        let report = fte_backward(f.as_ref(), &x, 0.2, 0.8, 4, &c).unwrap();
        assert!(
            report.exact_remainder.unwrap().abs() < 1e-10,
            "remainder {}",
            report.exact_remainder.unwrap()
        );
    }

    #[test]
    fn backward_forward_consistency() {
        let c = cfg();
        let f = exp_of(sig_coord(w("10")));
        let x = Path::sampled(|t| 0.3 * (1.5 * t).sin() + 0.2 * t, 0.8, 50);
        let (s, t) = (0.25, 0.65);
        // forward from X_s over the window, then backward from X_t
        let fwd = fte(
            f.as_ref(),
            &x.prefix_at(s).unwrap(),
            &x.restrict(s, t).unwrap(),
            6,
            &c,
        )
        .unwrap();
        let bwd = fte_backward(f.as_ref(), &x, s, t, 6, &c).unwrap();
        let f_t = f.eval(&x.prefix_at(t).unwrap()).unwrap();
        let f_s = f.eval(&x.prefix_at(s).unwrap()).unwrap();
        // each truncation carries its own order-6 remainder over the window
        assert!((fwd.truncated - f_t).abs() < 1e-4, "forward {}", fwd.truncated - f_t);
        assert!((bwd.truncated - f_s).abs() < 1e-4, "backward {}", bwd.truncated - f_s);
        // the round trip returns f(X_s) within combined tolerances
        let round_trip = bwd.truncated + (f_t - fwd.truncated);
        assert!((round_trip - f_s).abs() < 2e-4);
    }

    #[test]
    fn rho_example() {
        let x = Path::sampled(|t| 0.3 * (8.0 * t).sin(), 0.4, 64);
        // t = 0.4 dominates if sup increment < 0.4; rho = 2 max(t, sup)
        let r = rho(&x);
        assert!((r - 2.0 * 0.4f64.max(x.sup_increment())).abs() < 1e-15);
    }

    #[test]
    fn remainder_bound_dominates_exact() {
        let c = cfg();
        // f = exp(x_t - x_0) on small paths
        let f = exp_of(sig_coord(w("1")));
        for seed in 0..10u64 {
            let x = random_path(seed, 24, 0.2, 0.9, 0.0);
            assert!(rho(&x) <= 0.5, "test path too large");
            let bound = remainder_bound(f.clone(), &x, 3, 9, &c).unwrap();
            let report = maclaurin(f.as_ref(), &x, 3, &c).unwrap();
            let exact_r = report.exact_remainder.unwrap().abs();
            assert!(
                exact_r <= bound.total,
                "seed {seed}: remainder {exact_r} above bound {}",
                bound.total
            );
            assert!(bound.total.is_finite() && bound.uniform.is_finite());
        }
    }

    #[test]
    fn remainder_bound_on_spanned_functional() {
        let c = cfg();
        let f = sig_coord(w("11"));
        let x = random_path(3, 20, 0.2, 1.0, 0.0);
        let bound = remainder_bound(f.clone(), &x, 4, 7, &c).unwrap();
        let report = maclaurin(f.as_ref(), &x, 4, &c).unwrap();
        let exact_r = report.exact_remainder.unwrap().abs();
        assert!(exact_r <= 1e-12);
        assert!(bound.total >= 0.0);
    }

    #[test]
    fn lip_remainder_and_radius() {
        let y = Path::line(0.0, 0.25 * 0.25, 0.25); // slope 0.25 over [0, 0.25]
        for k in 1..=4usize {
            let b = remainder_bound_lip(1.0, 1.0, &y, k);
            assert!((b - 0.5f64.powi(k as i32)).abs() < 1e-12);
        }
        assert_eq!(radius_estimate(1.0, 1.0), f64::INFINITY);
        assert_eq!(radius_estimate(4.0, 0.5), 0.125);
        assert_eq!(radius_estimate(1.0, 1.5), 0.0);
    }

    #[test]
    fn signature_lipschitz_bound_holds() {
        // |S_a(Y_t)| <= Lip^{|a|_1} t^K / K!
        let y = random_path(9, 40, 0.8, 1.3, 0.0);
        let lip = y.lipschitz_seminorm();
        let sig = signature(&y, 5).unwrap();
        for (word, v) in sig.iter() {
            if word.is_empty() {
                continue;
            }
            let k = word.len();
            let bound = lip.powi(word.count1() as i32) * y.t_end().powi(k as i32) / factorial(k);
            assert!(
                v.abs() <= bound * (1.0 + 1e-12),
                "word {word}: {v} vs bound {bound}"
            );
        }
    }

    #[test]
    fn ive_terminal_value_exact_at_order_two() {
        let c = cfg();
        let g = crate::functional::terminal();
        let x = Path::sampled(|t| 0.4 * (2.2 * t).sin() + 0.1, 1.0, 48);
        let report = ive_expand(g.as_ref(), &x, 2, &c).unwrap();
        assert!((report.terms[0] - 0.1).abs() < 1e-9);
        assert!(report.residual.abs() < 1e-7, "residual {}", report.residual);
    }

    #[test]
    fn ive_quadratic_functional_exact_at_order_three() {
        let c = cfg();
        // g = (int x ds)^2 is quadratic in the path
        let g = powi(time_integral(), 2);
        let x = Path::sampled(|t| 0.5 * (1.8 * t).sin() + 0.3, 1.0, 40);
        let report = ive_expand(g.as_ref(), &x, 3, &c).unwrap();
        assert!(
            report.residual.abs() < 2e-4,
            "residual {} (terms {:?})",
            report.residual,
            report.terms
        );
    }

    #[test]
    fn ive_signature_payoff_concentrates_on_its_order() {
        let c = cfg();
        // g = S_10 restricted to Lambda_T: only the order-1 term contributes
        let g = sig_coord(w("10"));
        let x = Path::sampled(|t| 0.4 * (2.0 * t).sin(), 1.0, 40);
        let report = ive_expand(g.as_ref(), &x, 3, &c).unwrap();
        let sig = signature(&x, 2).unwrap();
        assert!(report.terms[0].abs() < 1e-12);
        assert!(
            (report.terms[1] - sig.get(&w("10"))).abs() < 1e-4,
            "order-1 term {} vs {}",
            report.terms[1],
            sig.get(&w("10"))
        );
        assert!(report.terms[2].abs() < 1e-6, "order-2 term {}", report.terms[2]);
    }

    #[test]
    fn ive_order_homogeneity() {
        let c = cfg();
        let g = powi(time_integral(), 2);
        let x = Path::sampled(|t| 0.3 * (2.0 * t).sin() + 0.2, 1.0, 32);
        let gamma = 1.5;
        let scaled = x.scale_increments(gamma);
        let a = ive_expand(g.as_ref(), &x, 3, &c).unwrap();
        let b = ive_expand(g.as_ref(), &scaled, 3, &c).unwrap();
        for k in 1..3usize {
            let expect = a.terms[k] * gamma.powi(k as i32);
            assert!(
                rel_err_floor(b.terms[k], expect, 1e-3) < 1e-2,
                "order {k}: {} vs {expect}",
                b.terms[k]
            );
        }
    }

    #[test]
    fn ive_order_cap() {
        let c = cfg();
        let g = crate::functional::terminal();
        let x = Path::sampled(|t| t, 1.0, 8);
        assert!(matches!(
            ive_expand(g.as_ref(), &x, 5, &c),
            Err(Error::QuadratureOrder { .. })
        ));
    }

    #[test]
    fn kernel_reconstruction_examples() {
        let c = cfg();
        let horizon = 1.0;
        // g = S_10 on Lambda_T: kernel T - t1 exactly at K_word = 2
        let g = sig_coord(w("10"));
        for t1 in [0.0, 0.3, 0.8] {
            let got = ive_kernel_reconstruct(g.clone(), horizon, 0.0, &[t1], 2, &c).unwrap();
            assert!(
                (got - (horizon - t1)).abs() < 1e-7,
                "t1 = {t1}: {got} vs {}",
                horizon - t1
            );
        }
        // g = S_11: kernel identically 1 at K_word = 2
        let g = sig_coord(w("11"));
        for times in [[0.1, 0.4], [0.2, 0.9]] {
            let got = ive_kernel_reconstruct(g.clone(), horizon, 0.0, &times, 2, &c).unwrap();
            assert!((got - 1.0).abs() < 1e-6, "times {times:?}: {got}");
        }
        // g = int x ds * x_T against the Malliavin oracle
        let g = product(time_integral(), crate::functional::terminal());
        let flat = Path::flat(0.0, horizon);
        for times in [[0.2, 0.5], [0.1, 0.9]] {
            let got = ive_kernel_reconstruct(g.clone(), horizon, 0.0, &times, 4, &c).unwrap();
            let oracle = malliavin_iter(g.as_ref(), &flat, &times, &c).unwrap();
            assert!(
                (got - oracle).abs() < 1e-3,
                "times {times:?}: {got} vs {oracle}"
            );
        }
    }

    #[test]
    fn chaos_coefficients_of_polynomials() {
        let c = cfg();
        // h(x) = x^3, sigma = 1, T: coefficients (0, 3T, 0, 6)
        let horizon = 0.7;
        let coeffs = chaos_coeffs(poly_fn(vec![0.0, 0.0, 0.0, 1.0]), 1.0, horizon, 4, &c).unwrap();
        let expect = [0.0, 3.0 * horizon, 0.0, 6.0, 0.0];
        for (k, (&got, &want)) in coeffs.iter().zip(expect.iter()).enumerate() {
            assert!((got - want).abs() < 1e-10, "k = {k}: {got} vs {want}");
        }
        // constant payoff
        let coeffs = chaos_coeffs(poly_fn(vec![1.0]), 1.0, 1.0, 3, &c).unwrap();
        assert!((coeffs[0] - 1.0).abs() < 1e-12);
        assert!(coeffs[1..].iter().all(|&v| v.abs() < 1e-12));
        // h(x) = x^2: (T, 0, 2)
        let coeffs = chaos_coeffs(poly_fn(vec![0.0, 0.0, 1.0]), 1.0, horizon, 2, &c).unwrap();
        assert!((coeffs[0] - horizon).abs() < 1e-10);
        assert!(coeffs[1].abs() < 1e-12);
        assert!((coeffs[2] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn chaos_reconstruction_pointwise() {
        let c = cfg();
        let horizon = 1.0;
        // polynomials reconstruct exactly
        let coeffs = chaos_coeffs(poly_fn(vec![0.0, 0.0, 0.0, 1.0]), 1.0, horizon, 4, &c).unwrap();
        for x in [-1.0, -0.2, 0.5, 1.3] {
            let got = chaos_reconstruct(&coeffs, horizon, x);
            assert!((got - x * x * x).abs() < 1e-9, "x = {x}: {got}");
        }
        // exp converges fast: K = 10 within 1e-4 on |x| <= 1 (tail is the
        // k = 11 Hermite term, which shrinks with the horizon scale)
        let horizon = 0.75;
        let coeffs = chaos_coeffs(exp_fn(1.0, 1.0), 1.0, horizon, 10, &c).unwrap();
        for x in [-1.0, -0.5, 0.0, 0.5, 1.0] {
            let got = chaos_reconstruct(&coeffs, horizon, x);
            assert!((got - x.exp()).abs() < 1e-4, "x = {x}: {got} vs {}", x.exp());
        }
    }

    #[test]
    fn chaos_fd_route_matches_exact_route() {
        let c = cfg();
        let horizon = 0.5;
        let exact = chaos_coeffs(exp_fn(1.0, 1.0), 1.0, horizon, 3, &c).unwrap();
        let fd = chaos_coeffs(
            crate::functional::scalar_from_fn(|x| x.exp()),
            1.0,
            horizon,
            3,
            &c,
        )
        .unwrap();
        for k in 0..=3 {
            assert!(
                (exact[k] - fd[k]).abs() < 1e-3,
                "k = {k}: {} vs {}",
                exact[k],
                fd[k]
            );
        }
    }

    #[test]
    fn chaos_signature_table_evaluates_path_independently() {
        let c = cfg();
        let horizon = 1.0;
        let coeffs = chaos_coeffs(poly_fn(vec![0.0, 0.0, 1.0]), 1.0, horizon, 2, &c).unwrap();
        let table = chaos_to_signature(&coeffs);
        // word table: T at e, 2 at 11, -1 at 0
        assert!((table.get(&Word::EMPTY).unwrap() - horizon).abs() < 1e-10);
        assert!((table.get(&w("11")).unwrap() - 2.0).abs() < 1e-10);
        assert!((table.get(&w("0")).unwrap() + 1.0).abs() < 1e-10);
        // evaluation on any path of length T gives x_T^2 (x_0 = 0)
        for seed in 0..10u64 {
            let x = random_path(seed + 50, 30, horizon, 1.0, 0.0);
            let sig = signature(&x, 2).unwrap();
            let got = table.eval(&sig);
            let expect = x.end_value() * x.end_value();
            assert!(
                rel_err_floor(got, expect, 1e-2) < 1e-10,
                "seed {seed}: {got} vs {expect}"
            );
        }
        // equal endpoints, different interiors: equal values
        let a = Path::sampled(|t| t * (1.0 - t) * 2.0 + 0.4 * t, horizon, 40);
        let b = Path::line(0.0, 0.4, horizon);
        let sa = signature(&a, 2).unwrap();
        let sb = signature(&b, 2).unwrap();
        assert!((table.eval(&sa) - table.eval(&sb)).abs() < 1e-10);
    }

    #[test]
    fn chaos_word_identity_via_fd() {
        // D_a f(0) = (-2)^{-|a|_0} D_{1_{||a||}} f(0) on the smoothed price
        let c = DiffConfig::default().without_exact();
        let horizon = 1.0;
        let f = gaussian_price_functional(exp_fn(1.0, 1.0), 1.0, horizon);
        let base = Path::point(0.0);
        let coeffs = chaos_coeffs(exp_fn(1.0, 1.0), 1.0, horizon, 4, &cfg()).unwrap();
        for word in ["0", "11", "01", "10", "011", "110", "00"] {
            let word = w(word);
            let got = delta_word(f.as_ref(), &base, &word, &c).unwrap();
            let expect = coeffs[word.weighted_len()] * (-2.0f64).powi(-(word.count0() as i32));
            assert!(
                (got - expect).abs() < 1e-3,
                "word {word}: {got} vs {expect}"
            );
        }
    }

    #[test]
    fn gaussian_price_heat_derivatives() {
        // h = x^2: u(t, x) = x^2 + sigma^2 (T - t); D_t = -sigma^2, D_xx = 2
        let sigma = 0.6;
        let f = gaussian_price_functional(poly_fn(vec![0.0, 0.0, 1.0]), sigma, 1.0);
        let x = Path::line(0.1, 0.4, 0.5);
        let c = cfg();
        let dt = crate::funcderiv::delta_t(f.as_ref(), &x, &c).unwrap();
        assert!((dt + sigma * sigma).abs() < 1e-10, "D_t {dt}");
        let dxx = delta_word(f.as_ref(), &x, &w("11"), &c).unwrap();
        assert!((dxx - 2.0).abs() < 1e-10);
        // FD route agrees
        let cfd = DiffConfig::default().without_exact();
        let dt_fd = crate::funcderiv::delta_t(f.as_ref(), &x, &cfd).unwrap();
        assert!((dt_fd - dt).abs() < 1e-5);
    }

    #[test]
    fn fte_rejects_jumpy_perturbations_and_order_zero() {
        let f = crate::functional::terminal();
        let x = Path::point(0.0);
        let y = Path::flat(0.0, 1.0).bump(0.1);
        assert!(fte(f.as_ref(), &x, &y, 2, &cfg()).is_err());
        assert!(fte(f.as_ref(), &x, &Path::flat(0.0, 1.0), 0, &cfg()).is_err());
        // horizon guard
        let c = cfg().with_horizon(1.0);
        let long = Path::flat(0.0, 0.8);
        assert!(fte(f.as_ref(), &long, &Path::flat(0.0, 0.5), 2, &c).is_err());
    }

    #[test]
    fn remainder_decay_for_exp_exotic() {
        let c = cfg();
        let f = exp_of(sig_coord(w("10")));
        let x = random_path(12, 24, 0.2, 1.0, 0.0);
        assert!(rho(&x) <= 0.5);
        // remainders plateau where a word level has zero coefficients, so
        // the geometric decay shows over two-step envelopes
        let remainders: Vec<f64> = (1..=6usize)
            .map(|k| {
                maclaurin(f.as_ref(), &x, k, &c)
                    .unwrap()
                    .exact_remainder
                    .unwrap()
                    .abs()
            })
            .collect();
        for pair in remainders.windows(2) {
            assert!(pair[1] <= pair[0] * (1.0 + 1e-12), "not monotone: {remainders:?}");
        }
        for k in 2..remainders.len() {
            assert!(
                remainders[k] <= 0.5 * remainders[k - 2],
                "no geometric envelope: {remainders:?}"
            );
        }
        assert!(remainders[5] < 1e-6, "order-6 remainder {}", remainders[5]);
    }

    #[test]
    fn sum_and_start_functionals_compose() {
        // sanity for the library combinators used across the tests
        let g = sum(sig_coord(w("10")), product(start(), sig_coord(w("0"))));
        let x = Path::line(2.0, 3.0, 1.0);
        // int x ds for the line from 2 to 3 = 2.5
        assert!((g.eval(&x).unwrap() - 2.5).abs() < 1e-14);
    }
}
