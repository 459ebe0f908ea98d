//! A small library of path functionals with registered exact derivatives,
//! plus the named registry used by the CLI.
//!
//! The Dupire derivatives obey the usual sum, product, and smooth chain
//! rules, so composite functionals propagate exact derivatives through their
//! structure; anything without a registered rule falls back to finite
//! differences in [`crate::funcderiv::delta_word`].

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::funcderiv::{ArcFunctional, Functional, Letter};
use crate::path::Path;
use crate::signature::running_coordinate_unchecked;
use crate::words::Word;

/// A scalar function with optional exact derivative, for post-composition
/// with path functionals.
pub trait ScalarFn: Send + Sync {
    fn eval(&self, x: f64) -> f64;
    fn derivative(&self) -> Option<Arc<dyn ScalarFn>>;
}

struct PolyFn(Vec<f64>);

impl ScalarFn for PolyFn {
    fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    fn derivative(&self) -> Option<Arc<dyn ScalarFn>> {
        let d: Vec<f64> = self
            .0
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, c)| i as f64 * c)
            .collect();
        Some(Arc::new(PolyFn(if d.is_empty() { vec![0.0] } else { d })))
    }
}

/// Polynomial `sum c_i x^i` with coefficients in ascending order.
pub fn poly_fn(coeffs: Vec<f64>) -> Arc<dyn ScalarFn> {
    Arc::new(PolyFn(coeffs))
}

struct ExpFn {
    amp: f64,
    rate: f64,
}

impl ScalarFn for ExpFn {
    fn eval(&self, x: f64) -> f64 {
        self.amp * (self.rate * x).exp()
    }

    fn derivative(&self) -> Option<Arc<dyn ScalarFn>> {
        Some(Arc::new(ExpFn { amp: self.amp * self.rate, rate: self.rate }))
    }
}

/// `amp * exp(rate x)`.
pub fn exp_fn(amp: f64, rate: f64) -> Arc<dyn ScalarFn> {
    Arc::new(ExpFn { amp, rate })
}

struct SinFn {
    amp: f64,
    phase: f64,
}

impl ScalarFn for SinFn {
    fn eval(&self, x: f64) -> f64 {
        self.amp * (x + self.phase).sin()
    }

    fn derivative(&self) -> Option<Arc<dyn ScalarFn>> {
        Some(Arc::new(SinFn { amp: self.amp, phase: self.phase + std::f64::consts::FRAC_PI_2 }))
    }
}

/// `amp * sin(x + phase)`; derivatives cycle through the phase shift.
pub fn sin_fn(amp: f64, phase: f64) -> Arc<dyn ScalarFn> {
    Arc::new(SinFn { amp, phase })
}

struct ScalarClosure<F>(F);

impl<F: Fn(f64) -> f64 + Send + Sync> ScalarFn for ScalarClosure<F> {
    fn eval(&self, x: f64) -> f64 {
        self.0(x)
    }

    fn derivative(&self) -> Option<Arc<dyn ScalarFn>> {
        None
    }
}

/// Wraps a closure without derivative information.
pub fn scalar_from_fn(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Arc<dyn ScalarFn> {
    Arc::new(ScalarClosure(f))
}

// ---------------------------------------------------------------------------
// path functionals

struct Constant(f64);

impl Functional for Constant {
    fn eval(&self, _x: &Path) -> Result<f64> {
        Ok(self.0)
    }

    fn exact_derivative(&self, _letter: Letter) -> Option<ArcFunctional> {
        Some(constant(0.0))
    }
}

/// The constant functional.
pub fn constant(c: f64) -> ArcFunctional {
    Arc::new(Constant(c))
}

struct Terminal;

impl Functional for Terminal {
    fn eval(&self, x: &Path) -> Result<f64> {
        Ok(x.end_value())
    }

    fn exact_derivative(&self, letter: Letter) -> Option<ArcFunctional> {
        Some(constant(match letter {
            Letter::Space => 1.0,
            Letter::Time => 0.0,
        }))
    }
}

/// The terminal value `x_t`.
pub fn terminal() -> ArcFunctional {
    Arc::new(Terminal)
}

struct Start;

impl Functional for Start {
    fn eval(&self, x: &Path) -> Result<f64> {
        Ok(x.start_value())
    }

    fn exact_derivative(&self, _letter: Letter) -> Option<ArcFunctional> {
        Some(constant(0.0))
    }
}

/// The start value `x_0` (insensitive to bumps and extensions).
pub fn start() -> ArcFunctional {
    Arc::new(Start)
}

struct SigCoord(Word);

impl Functional for SigCoord {
    fn eval(&self, x: &Path) -> Result<f64> {
        Ok(*running_coordinate_unchecked(x, &self.0).last().unwrap())
    }

    fn exact_derivative(&self, letter: Letter) -> Option<ArcFunctional> {
        match self.0.last() {
            None => Some(constant(0.0)),
            Some(l) if l == letter.bit() => Some(sig_coord(self.0.drop_last(1))),
            Some(_) => Some(constant(0.0)),
        }
    }
}

/// The signature coordinate `S_a` as a functional. Evaluation chains segment
/// exponentials, treating jump stamps as zero-duration segments so that
/// bump-extended paths are in its domain; derivatives follow the
/// suffix-removal rule.
pub fn sig_coord(word: Word) -> ArcFunctional {
    Arc::new(SigCoord(word))
}

struct Sum(ArcFunctional, ArcFunctional);

impl Functional for Sum {
    fn eval(&self, x: &Path) -> Result<f64> {
        Ok(self.0.eval(x)? + self.1.eval(x)?)
    }

    fn exact_derivative(&self, letter: Letter) -> Option<ArcFunctional> {
        Some(sum(self.0.exact_derivative(letter)?, self.1.exact_derivative(letter)?))
    }
}

pub fn sum(a: ArcFunctional, b: ArcFunctional) -> ArcFunctional {
    Arc::new(Sum(a, b))
}

struct Product(ArcFunctional, ArcFunctional);

impl Functional for Product {
    fn eval(&self, x: &Path) -> Result<f64> {
        Ok(self.0.eval(x)? * self.1.eval(x)?)
    }

    fn exact_derivative(&self, letter: Letter) -> Option<ArcFunctional> {
        let da = self.0.exact_derivative(letter)?;
        let db = self.1.exact_derivative(letter)?;
        Some(sum(product(da, self.1.clone()), product(self.0.clone(), db)))
    }
}

pub fn product(a: ArcFunctional, b: ArcFunctional) -> ArcFunctional {
    Arc::new(Product(a, b))
}

pub fn scale(c: f64, f: ArcFunctional) -> ArcFunctional {
    product(constant(c), f)
}

struct ExpOf(ArcFunctional);

impl Functional for ExpOf {
    fn eval(&self, x: &Path) -> Result<f64> {
        Ok(self.0.eval(x)?.exp())
    }

    fn exact_derivative(&self, letter: Letter) -> Option<ArcFunctional> {
        let df = self.0.exact_derivative(letter)?;
        Some(product(exp_of(self.0.clone()), df))
    }
}

/// `exp(f(X))` with the chain rule.
pub fn exp_of(f: ArcFunctional) -> ArcFunctional {
    Arc::new(ExpOf(f))
}

struct Pow(ArcFunctional, i32);

impl Functional for Pow {
    fn eval(&self, x: &Path) -> Result<f64> {
        Ok(self.0.eval(x)?.powi(self.1))
    }

    fn exact_derivative(&self, letter: Letter) -> Option<ArcFunctional> {
        if self.1 == 0 {
            return Some(constant(0.0));
        }
        let df = self.0.exact_derivative(letter)?;
        Some(product(scale(self.1 as f64, powi(self.0.clone(), self.1 - 1)), df))
    }
}

/// `f(X)^n` for integer n >= 0.
pub fn powi(f: ArcFunctional, n: i32) -> ArcFunctional {
    assert!(n >= 0);
    Arc::new(Pow(f, n))
}

struct OfTerminal(Arc<dyn ScalarFn>);

impl Functional for OfTerminal {
    fn eval(&self, x: &Path) -> Result<f64> {
        Ok(self.0.eval(x.end_value()))
    }

    fn exact_derivative(&self, letter: Letter) -> Option<ArcFunctional> {
        match letter {
            Letter::Time => Some(constant(0.0)),
            Letter::Space => Some(of_terminal(self.0.derivative()?)),
        }
    }
}

/// `h(x_t)` for a scalar `h`; spatial derivatives follow `h`'s chain.
pub fn of_terminal(h: Arc<dyn ScalarFn>) -> ArcFunctional {
    Arc::new(OfTerminal(h))
}

struct TimeIntegralOfTerminal(Arc<dyn ScalarFn>);

impl Functional for TimeIntegralOfTerminal {
    fn eval(&self, x: &Path) -> Result<f64> {
        // per-segment Simpson: exact to O(dt^4) on the piecewise-linear path
        let mut acc = 0.0;
        for i in 1..x.num_samples() {
            let dt = x.times()[i] - x.times()[i - 1];
            if dt > 0.0 {
                let (v0, v1) = (x.values()[i - 1], x.values()[i]);
                acc += dt / 6.0
                    * (self.0.eval(v0) + 4.0 * self.0.eval(0.5 * (v0 + v1)) + self.0.eval(v1));
            }
        }
        Ok(acc)
    }

    fn exact_derivative(&self, letter: Letter) -> Option<ArcFunctional> {
        match letter {
            Letter::Time => Some(of_terminal(self.0.clone())),
            Letter::Space => Some(constant(0.0)),
        }
    }
}

/// `int_0^t h(x_s) ds`; its temporal derivative is `h(x_t)`.
pub fn time_integral_of_terminal(h: Arc<dyn ScalarFn>) -> ArcFunctional {
    Arc::new(TimeIntegralOfTerminal(h))
}

struct RunningMax;

impl Functional for RunningMax {
    fn eval(&self, x: &Path) -> Result<f64> {
        Ok(x.values().iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v)))
    }
}

/// `max_{s <= t} x_s`. Not differentiable at the argmax; derivative calls
/// fall back to finite differences and may be flagged kink-suspect.
pub fn running_max() -> ArcFunctional {
    Arc::new(RunningMax)
}

struct SoftMax {
    temperature: f64,
}

impl Functional for SoftMax {
    fn eval(&self, x: &Path) -> Result<f64> {
        // time-weighted log-sum-exp over the trajectory: a smooth upper
        // surrogate of the running maximum that tightens as the temperature
        // drops
        let beta = 1.0 / self.temperature;
        let m = x.values().iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
        let mut weight = 0.0;
        for i in 1..x.num_samples() {
            let dt = x.times()[i] - x.times()[i - 1];
            weight += 0.5 * dt * ((beta * (x.values()[i - 1] - m)).exp()
                + (beta * (x.values()[i] - m)).exp());
        }
        if weight <= 0.0 {
            return Ok(m);
        }
        Ok(m + weight.ln() / beta)
    }
}

/// Smooth surrogate of the running maximum with the given temperature.
pub fn soft_running_max(temperature: f64) -> ArcFunctional {
    Arc::new(SoftMax { temperature })
}

struct FnFunctional<F> {
    name: &'static str,
    f: F,
}

impl<F: Fn(&Path) -> Result<f64> + Send + Sync> Functional for FnFunctional<F> {
    fn eval(&self, x: &Path) -> Result<f64> {
        let _ = self.name;
        (self.f)(x)
    }
}

/// Wraps a closure; no exact derivatives.
pub fn from_fn(
    name: &'static str,
    f: impl Fn(&Path) -> Result<f64> + Send + Sync + 'static,
) -> ArcFunctional {
    Arc::new(FnFunctional { name, f })
}

/// Memoizes evaluations keyed by the exact sample bits. Finite-difference
/// stencils revisit the same bumped paths many times; for expensive
/// functionals (Monte Carlo embeddings) the cache collapses that cost.
pub struct Cached {
    inner: ArcFunctional,
    memo: Mutex<HashMap<Vec<u64>, f64>>,
}

/// Wraps a functional in an evaluation cache.
pub fn cached(inner: ArcFunctional) -> ArcFunctional {
    Arc::new(Cached { inner, memo: Mutex::new(HashMap::new()) })
}

impl Functional for Cached {
    fn eval(&self, x: &Path) -> Result<f64> {
        let key: Vec<u64> = x
            .times()
            .iter()
            .chain(x.values())
            .map(|v| v.to_bits())
            .collect();
        if let Some(&v) = self.memo.lock().unwrap().get(&key) {
            return Ok(v);
        }
        let v = self.inner.eval(x)?;
        self.memo.lock().unwrap().insert(key, v);
        Ok(v)
    }

    fn exact_derivative(&self, letter: Letter) -> Option<ArcFunctional> {
        self.inner.exact_derivative(letter).map(cached)
    }
}

/// The time integral `int_0^t x_s ds` (trapezoid-exact on linear segments).
pub fn time_integral() -> ArcFunctional {
    // int x ds = S_10 + x_0 * S_0 with exact derivatives throughout
    sum(
        sig_coord("10".parse().unwrap()),
        product(start(), sig_coord("0".parse().unwrap())),
    )
}

/// Named functionals usable from the command line.
pub fn registry_names() -> &'static [&'static str] {
    &[
        "terminal",
        "increment",
        "duration",
        "int",
        "int_sq",
        "sin_integral",
        "exp_increment",
        "exp_int_increment",
        "running_max",
        "S_<word> (e.g. S_011)",
    ]
}

/// Looks up a functional by registry name. Signature coordinates are
/// addressed as `S_<word>` with `S_e` the constant 1.
pub fn lookup(name: &str) -> Result<ArcFunctional> {
    if let Some(word) = name.strip_prefix("S_") {
        return Ok(sig_coord(word.parse()?));
    }
    match name {
        "terminal" => Ok(terminal()),
        "increment" => Ok(sig_coord("1".parse().unwrap())),
        "duration" => Ok(sig_coord("0".parse().unwrap())),
        "int" => Ok(time_integral()),
        "int_sq" => Ok(powi(time_integral(), 2)),
        "sin_integral" => Ok(time_integral_of_terminal(sin_fn(2f64.sqrt(), 0.0))),
        "exp_increment" => Ok(exp_of(sig_coord("1".parse().unwrap()))),
        "exp_int_increment" => Ok(exp_of(sig_coord("10".parse().unwrap()))),
        "running_max" => Ok(running_max()),
        _ => Err(Error::UnknownName(name.into())),
    }
}
