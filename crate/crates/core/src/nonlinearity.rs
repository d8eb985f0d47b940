//! The nonlinearity `f`, its tail primitive `F(s) = ∫_s^∞ f`, its one-sided
//! Lipschitz constants and the structural hypotheses it satisfies.
//!
//! Catalog kinds have closed forms for everything. A [`CustomFn`] is a black
//! box and must declare the envelopes that the hypotheses talk about.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{adaptive_simpson, DEFAULT_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Kind {
    PurePower,
    PowerPlusPolynomial,
    DoublePower,
    Custom,
}

/// The power law `coeff · t^(−exponent)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub coeff: f64,
    pub exponent: f64,
}

impl Envelope {
    pub fn at(&self, t: f64) -> f64 {
        self.coeff * t.powf(-self.exponent)
    }
}

type Callable = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user supplied nonlinearity with its declared envelopes.
///
/// `singular` is a lower envelope `f(t) ≥ c₀ t^(−γ)` near zero; `tail` is an
/// upper envelope `f(t) ≤ c₁ t^(−γ_tail)` for `t > tail_start`.
#[derive(Clone)]
pub struct CustomFn {
    eval: Callable,
    pub singular: Envelope,
    pub tail: Envelope,
    pub tail_start: f64,
}

impl CustomFn {
    pub fn new<F>(f: F, singular: Envelope, tail: Envelope, tail_start: f64) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            eval: Arc::new(f),
            singular,
            tail,
            tail_start,
        }
    }
}

impl fmt::Debug for CustomFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomFn")
            .field("singular", &self.singular)
            .field("tail", &self.tail)
            .field("tail_start", &self.tail_start)
            .finish_non_exhaustive()
    }
}

/// Description of `f`. Construct through the kind-specific constructors,
/// which validate the parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "SpecRecord", into = "SpecRecord")]
pub struct NonlinearitySpec {
    kind: Kind,
    gamma: f64,
    c_sing: f64,
    poly_coeffs: Vec<f64>,
    beta: f64,
    d_sing: f64,
    custom: Option<CustomFn>,
}

/// Serialized form. Keys match the scenario config.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecRecord {
    kind: Kind,
    gamma: f64,
    #[serde(default = "one")]
    c_sing: f64,
    #[serde(default)]
    poly_coeffs: Vec<f64>,
    #[serde(default)]
    beta: f64,
    #[serde(default)]
    d_sing: f64,
}

fn one() -> f64 {
    1.0
}

impl TryFrom<SpecRecord> for NonlinearitySpec {
    type Error = Error;

    fn try_from(r: SpecRecord) -> Result<Self> {
        match r.kind {
            Kind::PurePower => Self::pure_power(r.gamma, r.c_sing),
            Kind::PowerPlusPolynomial => {
                Self::power_plus_polynomial(r.gamma, r.c_sing, r.poly_coeffs)
            }
            Kind::DoublePower => Self::double_power(r.gamma, r.c_sing, r.beta, r.d_sing),
            Kind::Custom => Err(Error::InvalidInput(
                "a custom nonlinearity carries a callable and cannot be loaded from a config".into(),
            )),
        }
    }
}

impl From<NonlinearitySpec> for SpecRecord {
    fn from(s: NonlinearitySpec) -> Self {
        SpecRecord {
            kind: s.kind,
            gamma: s.gamma,
            c_sing: s.c_sing,
            poly_coeffs: s.poly_coeffs,
            beta: s.beta,
            d_sing: s.d_sing,
        }
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Tail start used by the catalog kinds.
const CATALOG_TAIL_START: f64 = 1.0;
/// Relative slack when comparing sampled values with declared envelopes.
const ENVELOPE_SLACK: f64 = 1e-12;

impl NonlinearitySpec {
    /// `f(t) = c·t^(−γ)`.
    pub fn pure_power(gamma: f64, c_sing: f64) -> Result<Self> {
        check_positive("gamma", gamma)?;
        check_positive("c_sing", c_sing)?;
        Ok(Self {
            kind: Kind::PurePower,
            gamma,
            c_sing,
            poly_coeffs: Vec::new(),
            beta: 0.0,
            d_sing: 0.0,
            custom: None,
        })
    }

    /// `f(t) = c·t^(−γ) + g(t)` with `g(t) = Σ a_k t^k`, lowest degree first.
    pub fn power_plus_polynomial(gamma: f64, c_sing: f64, poly_coeffs: Vec<f64>) -> Result<Self> {
        check_positive("gamma", gamma)?;
        check_positive("c_sing", c_sing)?;
        if poly_coeffs.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidInput("polynomial coefficients must be finite".into()));
        }
        Ok(Self {
            kind: Kind::PowerPlusPolynomial,
            gamma,
            c_sing,
            poly_coeffs,
            beta: 0.0,
            d_sing: 0.0,
            custom: None,
        })
    }

    /// `f(t) = c·t^(−γ) + d·t^(−β)` with `β > 1`.
    pub fn double_power(gamma: f64, c_sing: f64, beta: f64, d_sing: f64) -> Result<Self> {
        check_positive("gamma", gamma)?;
        check_positive("c_sing", c_sing)?;
        if !(beta > 1.0 && beta.is_finite()) {
            return Err(Error::InvalidInput(format!("beta must exceed 1, got {beta}")));
        }
        if !(d_sing >= 0.0 && d_sing.is_finite()) {
            return Err(Error::InvalidInput(format!("d_sing must be nonnegative, got {d_sing}")));
        }
        Ok(Self {
            kind: Kind::DoublePower,
            gamma,
            c_sing,
            poly_coeffs: Vec::new(),
            beta,
            d_sing,
            custom: None,
        })
    }

    /// Wraps a black-box `f`. The declared tail envelope is checked on a
    /// geometric sample of `(tail_start, 10⁶·tail_start]`.
    pub fn custom(custom: CustomFn) -> Result<Self> {
        if !(custom.singular.exponent.is_finite() && custom.singular.coeff >= 0.0) {
            return Err(Error::InvalidInput("singular envelope must be finite and nonnegative".into()));
        }
        check_positive("tail_start", custom.tail_start)?;
        let t1 = custom.tail_start;
        for t in geometric_grid(t1 * (1.0 + 1e-9), t1 * 1e6, 256) {
            let v = (custom.eval)(t);
            if v > custom.tail.at(t) * (1.0 + ENVELOPE_SLACK) {
                return Err(Error::InvalidInput(format!(
                    "declared tail envelope violated at t = {t}: f = {v}, envelope = {}",
                    custom.tail.at(t)
                )));
            }
        }
        Ok(Self {
            kind: Kind::Custom,
            gamma: custom.singular.exponent,
            c_sing: custom.singular.coeff,
            poly_coeffs: Vec::new(),
            beta: 0.0,
            d_sing: 0.0,
            custom: Some(custom),
        })
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    /// Singular exponent γ (the declared one for custom kinds).
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn c_sing(&self) -> f64 {
        self.c_sing
    }

    pub fn poly_coeffs(&self) -> &[f64] {
        &self.poly_coeffs
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn d_sing(&self) -> f64 {
        self.d_sing
    }

    fn has_polynomial(&self) -> bool {
        self.poly_coeffs.iter().any(|&a| a != 0.0)
    }

    /// `f(t)` for `t > 0`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("f is defined for t > 0, got {t}")));
        }
        Ok(self.value(t))
    }

    /// Unchecked `f(t)`; callers guarantee `t > 0`.
    pub fn value(&self, t: f64) -> f64 {
        match self.kind {
            Kind::PurePower => self.c_sing * t.powf(-self.gamma),
            Kind::PowerPlusPolynomial => {
                self.c_sing * t.powf(-self.gamma) + poly_eval(&self.poly_coeffs, t)
            }
            Kind::DoublePower => {
                self.c_sing * t.powf(-self.gamma) + self.d_sing * t.powf(-self.beta)
            }
            Kind::Custom => (self.custom.as_ref().expect("custom callable").eval)(t),
        }
    }

    /// `f′(t)`: closed form for catalog kinds, central difference otherwise.
    pub fn derivative(&self, t: f64) -> f64 {
        let sing = -self.gamma * self.c_sing * t.powf(-self.gamma - 1.0);
        match self.kind {
            Kind::PurePower => sing,
            Kind::PowerPlusPolynomial => sing + poly_eval(&poly_derivative(&self.poly_coeffs), t),
            Kind::DoublePower => sing - self.beta * self.d_sing * t.powf(-self.beta - 1.0),
            Kind::Custom => {
                let h = 1e-6 * t;
                (self.value(t + h) - self.value(t - h)) / (2.0 * h)
            }
        }
    }

    /// Upper envelope `c₁ t^(−γ_tail)` valid beyond [`Self::tail_start`], if
    /// `f` has one. A nonzero polynomial part has none.
    pub fn tail_envelope(&self) -> Option<Envelope> {
        match self.kind {
            Kind::PurePower => Some(Envelope { coeff: self.c_sing, exponent: self.gamma }),
            Kind::PowerPlusPolynomial if !self.has_polynomial() => {
                Some(Envelope { coeff: self.c_sing, exponent: self.gamma })
            }
            Kind::PowerPlusPolynomial => None,
            Kind::DoublePower => Some(Envelope {
                coeff: self.c_sing + self.d_sing,
                exponent: self.gamma.min(self.beta),
            }),
            Kind::Custom => self.custom.as_ref().map(|c| c.tail),
        }
    }

    pub fn tail_start(&self) -> f64 {
        match &self.custom {
            Some(c) => c.tail_start,
            None => CATALOG_TAIL_START,
        }
    }

    /// Lower envelope `c₀ t^(−γ)` near zero.
    pub fn singular_envelope(&self) -> Envelope {
        Envelope { coeff: self.c_sing, exponent: self.gamma }
    }

    /// `F(s) = ∫_s^∞ f(t) dt`.
    pub fn tail_primitive(&self, s: f64) -> Result<f64> {
        if !(s > 0.0) {
            return Err(Error::Domain(format!("F is defined for s > 0, got {s}")));
        }
        let power = |c: f64, g: f64| -> Result<f64> {
            if g <= 1.0 {
                return Err(Error::Integrability(format!("t^(-{g}) with exponent <= 1")));
            }
            Ok(c * s.powf(1.0 - g) / (g - 1.0))
        };
        match self.kind {
            Kind::PurePower => power(self.c_sing, self.gamma),
            Kind::PowerPlusPolynomial => {
                if self.has_polynomial() {
                    return Err(Error::Integrability("nonzero polynomial part".into()));
                }
                power(self.c_sing, self.gamma)
            }
            Kind::DoublePower => {
                let tail = if self.d_sing == 0.0 { 0.0 } else { power(self.d_sing, self.beta)? };
                Ok(power(self.c_sing, self.gamma)? + tail)
            }
            Kind::Custom => {
                let c = self.custom.as_ref().expect("custom callable");
                if c.tail.exponent <= 1.0 {
                    return Err(Error::Integrability(format!(
                        "declared tail exponent {} <= 1",
                        c.tail.exponent
                    )));
                }
                let split = c.tail_start.max(10.0 * s);
                let body = adaptive_simpson(|t| self.value(t), s, split, DEFAULT_TOL)?;
                let g = c.tail.exponent;
                Ok(body + c.tail.coeff * split.powf(1.0 - g) / (g - 1.0))
            }
        }
    }

    /// Whether `F` is finite, i.e. profiles exist.
    pub fn integrable_at_infinity(&self) -> bool {
        self.tail_envelope().is_some_and(|e| e.exponent > 1.0)
    }

    /// Smallest `C ≥ 0` with `f(s) − f(t) ≤ C (s − t)` for `0 < t ≤ s ≤ M`.
    ///
    /// The singular terms are decreasing and contribute nothing; a polynomial
    /// part contributes `sup_[0,M] max(g′, 0)`. Custom kinds use clipped
    /// difference quotients on a geometric grid, doubled until stable to 1%.
    pub fn one_sided_lipschitz(&self, m: f64) -> f64 {
        match self.kind {
            Kind::PurePower | Kind::DoublePower => 0.0,
            Kind::PowerPlusPolynomial => positive_sup_of_derivative(&self.poly_coeffs, m),
            Kind::Custom => {
                let mut n = 512;
                let mut prev = self.sampled_lipschitz(m, n);
                while n < 1 << 18 {
                    n *= 2;
                    let next = self.sampled_lipschitz(m, n);
                    let settled = (next - prev).abs() <= 0.01 * next.abs().max(prev.abs());
                    prev = next;
                    if settled {
                        break;
                    }
                }
                prev
            }
        }
    }

    fn sampled_lipschitz(&self, m: f64, n: usize) -> f64 {
        let grid = geometric_grid(m * 1e-6, m, n);
        let vals: Vec<f64> = grid.iter().map(|&t| self.value(t)).collect();
        grid.windows(2)
            .zip(vals.windows(2))
            .map(|(t, v)| ((v[1] - v[0]) / (t[1] - t[0])).max(0.0))
            .fold(0.0, f64::max)
    }

    /// `sup_{0<t<ρ} f(t)·t^γ`, the constant `c₁` with `f(t) ≤ c₁ t^(−γ)`
    /// on `(0, ρ)`. Custom kinds report their declared tail coefficient.
    pub fn near_zero_envelope(&self, rho: f64) -> f64 {
        match self.kind {
            Kind::PurePower => self.c_sing,
            Kind::DoublePower => {
                if self.d_sing == 0.0 {
                    self.c_sing
                } else if self.beta <= self.gamma {
                    self.c_sing + self.d_sing * rho.powf(self.gamma - self.beta)
                } else {
                    f64::INFINITY
                }
            }
            Kind::PowerPlusPolynomial => {
                let n = 2048;
                let sup = (1..=n)
                    .map(|k| {
                        let t = rho * k as f64 / n as f64;
                        poly_eval(&self.poly_coeffs, t) * t.powf(self.gamma)
                    })
                    .fold(0.0, f64::max);
                self.c_sing + sup
            }
            Kind::Custom => self.custom.as_ref().map_or(f64::NAN, |c| c.tail.coeff),
        }
    }

    /// Evaluates the structural hypotheses on `probe_grid` (positive,
    /// increasing) and estimates `C(M)` for each of `m_values`.
    pub fn classify(&self, probe_grid: &[f64], m_values: &[f64]) -> ConditionFlags {
        let lipschitz: Vec<LipschitzEstimate> = m_values
            .iter()
            .map(|&m| LipschitzEstimate { m, c: self.one_sided_lipschitz(m) })
            .collect();
        let satisfies_f = if lipschitz.iter().all(|e| e.c.is_finite()) {
            FlagState::Holds
        } else {
            FlagState::Unknown
        };
        let (near, lower, tail, noninc) = match self.kind {
            Kind::Custom => self.classify_sampled(probe_grid),
            _ => self.classify_catalog(probe_grid),
        };
        ConditionFlags {
            satisfies_f,
            lipschitz,
            near_zero_superlinear: near,
            global_singular_lower: lower,
            tail_bound: tail,
            globally_nonincreasing: noninc,
        }
    }

    fn classify_catalog(&self, probe: &[f64]) -> (FlagState, FlagState, FlagState, FlagState) {
        use FlagState::*;
        match self.kind {
            Kind::PurePower | Kind::DoublePower => (Holds, Holds, Holds, Holds),
            _ => {
                let a = &self.poly_coeffs;
                let da = poly_derivative(a);
                let lower = probe.iter().all(|&t| self.value(t) * t.powf(self.gamma) > 0.0)
                    && leading(a) >= 0.0;
                let noninc = probe.iter().all(|&t| self.derivative(t) <= 0.0) && leading(&da) <= 0.0;
                (
                    Holds,
                    FlagState::from(lower),
                    FlagState::from(!self.has_polynomial()),
                    FlagState::from(noninc),
                )
            }
        }
    }

    fn classify_sampled(&self, probe: &[f64]) -> (FlagState, FlagState, FlagState, FlagState) {
        use FlagState::*;
        let c = self.custom.as_ref().expect("custom callable");
        let vals: Vec<f64> = probe.iter().map(|&t| self.value(t)).collect();
        if vals.iter().any(|v| !v.is_finite()) || probe.len() < 4 {
            return (Unknown, Unknown, Unknown, Unknown);
        }
        let low = probe.len().div_ceil(4);
        let near = FlagState::from(probe[..low].iter().zip(&vals).all(|(_, &v)| v > 0.0));
        let lower = if c.singular.coeff > 0.0 {
            FlagState::from(probe.iter().zip(&vals).all(|(&t, &v)| v >= c.singular.at(t) * (1.0 - ENVELOPE_SLACK)))
        } else {
            Unknown
        };
        let beyond: Vec<(f64, f64)> = probe
            .iter()
            .zip(&vals)
            .filter(|(&t, _)| t > c.tail_start)
            .map(|(&t, &v)| (t, v))
            .collect();
        let tail = if beyond.len() < 2 {
            Unknown
        } else {
            let mono = beyond.windows(2).all(|w| w[1].1 <= w[0].1);
            let env = beyond.iter().all(|&(t, v)| v <= c.tail.at(t) * (1.0 + ENVELOPE_SLACK));
            FlagState::from(mono && env)
        };
        let noninc = FlagState::from(vals.windows(2).all(|w| w[1] <= w[0]));
        (near, lower, tail, noninc)
    }

    /// True when `f > 0` at every point of `grid`.
    pub fn positive_on(&self, grid: &[f64]) -> bool {
        grid.iter().all(|&t| self.value(t) > 0.0)
    }
}

/// Three-valued outcome of a sampled hypothesis check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlagState {
    Holds,
    Fails,
    Unknown,
}

impl FlagState {
    pub fn holds(self) -> bool {
        self == FlagState::Holds
    }
}

impl From<bool> for FlagState {
    fn from(b: bool) -> Self {
        if b {
            FlagState::Holds
        } else {
            FlagState::Fails
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimate {
    pub m: f64,
    pub c: f64,
}

/// Which hypotheses `f` satisfies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionFlags {
    pub satisfies_f: FlagState,
    pub lipschitz: Vec<LipschitzEstimate>,
    pub near_zero_superlinear: FlagState,
    pub global_singular_lower: FlagState,
    pub tail_bound: FlagState,
    pub globally_nonincreasing: FlagState,
}

/// `n` points from `a` to `b` (inclusive) in geometric progression.
pub fn geometric_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(a > 0.0 && b > a && n >= 2);
    let r = (b / a).ln() / (n - 1) as f64;
    (0..n).map(|k| if k == n - 1 { b } else { a * (r * k as f64).exp() }).collect()
}

fn poly_eval(a: &[f64], t: f64) -> f64 {
    a.iter().rev().fold(0.0, |acc, &c| acc * t + c)
}

fn poly_derivative(a: &[f64]) -> Vec<f64> {
    a.iter().enumerate().skip(1).map(|(k, &c)| k as f64 * c).collect()
}

/// Leading nonzero coefficient, zero for the zero polynomial.
fn leading(a: &[f64]) -> f64 {
    a.iter().rev().copied().find(|&c| c != 0.0).unwrap_or(0.0)
}

/// `sup_[0,m] max(g′, 0)`: g′ peaks at an endpoint or at a root of g″.
fn positive_sup_of_derivative(a: &[f64], m: f64) -> f64 {
    let d1 = poly_derivative(a);
    let d2 = poly_derivative(&d1);
    let n = 1024;
    let mut best = poly_eval(&d1, 0.0).max(poly_eval(&d1, m));
    let mut prev_t = 0.0;
    let mut prev = poly_eval(&d2, 0.0);
    for k in 1..=n {
        let t = m * k as f64 / n as f64;
        let cur = poly_eval(&d2, t);
        best = best.max(poly_eval(&d1, t));
        if prev * cur < 0.0 {
            let (mut lo, mut hi) = (prev_t, t);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if (poly_eval(&d2, mid) < 0.0) == (prev < 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= f64::EPSILON * hi {
                    break;
                }
            }
            best = best.max(poly_eval(&d1, 0.5 * (lo + hi)));
        }
        prev = cur;
        prev_t = t;
    }
    best.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pure3() -> NonlinearitySpec {
        NonlinearitySpec::pure_power(3.0, 1.0).unwrap()
    }

    fn catalog() -> Vec<NonlinearitySpec> {
        vec![
            pure3(),
            NonlinearitySpec::pure_power(2.0, 0.7).unwrap(),
            NonlinearitySpec::double_power(3.0, 1.0, 2.0, 1.0).unwrap(),
            NonlinearitySpec::power_plus_polynomial(3.0, 1.0, vec![0.0]).unwrap(),
        ]
    }

    #[test]
    fn eval_examples() {
        assert_eq!(pure3().eval(1.0).unwrap(), 1.0);
        assert_relative_eq!(pure3().eval(0.5).unwrap(), 8.0, max_relative = 1e-15);
        let g1 = NonlinearitySpec::power_plus_polynomial(3.0, 1.0, vec![1.0]).unwrap();
        assert_relative_eq!(g1.eval(2.0).unwrap(), 1.125, max_relative = 1e-15);
    }

    #[test]
    fn eval_rejects_nonpositive_argument() {
        assert!(matches!(pure3().eval(0.0), Err(Error::Domain(_))));
        assert!(matches!(pure3().eval(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn tail_primitive_examples() {
        assert_relative_eq!(pure3().tail_primitive(1.0).unwrap(), 0.5, max_relative = 1e-15);
        assert_relative_eq!(pure3().tail_primitive(2.0).unwrap(), 0.125, max_relative = 1e-15);
        let dp = NonlinearitySpec::double_power(3.0, 1.0, 2.0, 1.0).unwrap();
        assert_relative_eq!(dp.tail_primitive(1.0).unwrap(), 1.5, max_relative = 1e-15);
    }

    #[test]
    fn tail_primitive_requires_integrable_tail() {
        let g1 = NonlinearitySpec::power_plus_polynomial(3.0, 1.0, vec![1.0]).unwrap();
        assert!(matches!(g1.tail_primitive(1.0), Err(Error::Integrability(_))));
        let weak = NonlinearitySpec::pure_power(0.5, 1.0).unwrap();
        assert!(matches!(weak.tail_primitive(1.0), Err(Error::Integrability(_))));
        let custom = NonlinearitySpec::custom(CustomFn::new(
            |t| 1.0 / t,
            Envelope { coeff: 1.0, exponent: 1.0 },
            Envelope { coeff: 1.0, exponent: 1.0 },
            1.0,
        ))
        .unwrap();
        assert!(matches!(custom.tail_primitive(1.0), Err(Error::Integrability(_))));
    }

    #[test]
    fn pure_power_matches_closed_forms() {
        let s = NonlinearitySpec::pure_power(2.5, 1.7).unwrap();
        for t in geometric_grid(1e-3, 1e3, 40) {
            assert_relative_eq!(s.eval(t).unwrap(), 1.7 * t.powf(-2.5), max_relative = 1e-12);
            assert_relative_eq!(
                s.tail_primitive(t).unwrap(),
                1.7 * t.powf(-1.5) / 1.5,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn primitive_derivative_is_minus_f() {
        for spec in catalog() {
            for s in geometric_grid(0.1, 10.0, 20) {
                let h = 1e-5 * s;
                let d = (spec.tail_primitive(s + h).unwrap() - spec.tail_primitive(s - h).unwrap())
                    / (2.0 * h);
                let f = spec.value(s);
                assert!(((d + f) / f).abs() <= 1e-6, "{:?} at s={s}", spec.kind());
            }
        }
    }

    #[test]
    fn custom_primitive_matches_closed_form() {
        let custom = NonlinearitySpec::custom(CustomFn::new(
            |t: f64| t.powi(-3),
            Envelope { coeff: 1.0, exponent: 3.0 },
            Envelope { coeff: 1.0, exponent: 3.0 },
            1.0,
        ))
        .unwrap();
        for s in [0.1, 0.5, 1.0, 3.0, 10.0] {
            let exact = 0.5 / (s * s);
            assert_relative_eq!(custom.tail_primitive(s).unwrap(), exact, max_relative = 1e-8);
        }
    }

    #[test]
    fn primitive_is_positive_and_decreasing() {
        for spec in catalog() {
            let vals: Vec<f64> = geometric_grid(1e-3, 1e3, 60)
                .into_iter()
                .map(|s| spec.tail_primitive(s).unwrap())
                .collect();
            assert!(vals.iter().all(|&v| v > 0.0));
            assert!(vals.windows(2).all(|w| w[1] < w[0]));
        }
    }

    #[test]
    fn lipschitz_examples() {
        assert_eq!(pure3().one_sided_lipschitz(10.0), 0.0);
        let sq = NonlinearitySpec::power_plus_polynomial(3.0, 1.0, vec![0.0, 0.0, 1.0]).unwrap();
        assert_relative_eq!(sq.one_sided_lipschitz(2.0), 4.0, max_relative = 1e-14);
        let g1 = NonlinearitySpec::power_plus_polynomial(3.0, 1.0, vec![1.0]).unwrap();
        assert_eq!(g1.one_sided_lipschitz(5.0), 0.0);
    }

    #[test]
    fn lipschitz_finds_interior_peak() {
        // g = 3t² − t³ has g′ = 6t − 3t² peaking at t = 1 with value 3.
        let s = NonlinearitySpec::power_plus_polynomial(2.0, 1.0, vec![0.0, 0.0, 3.0, -1.0]).unwrap();
        assert_relative_eq!(s.one_sided_lipschitz(4.0), 3.0, max_relative = 1e-12);
        assert_relative_eq!(s.one_sided_lipschitz(0.5), 2.25, max_relative = 1e-12);
    }

    #[test]
    fn lipschitz_custom_estimate_close_to_analytic() {
        let custom = NonlinearitySpec::custom(CustomFn::new(
            |t: f64| t.powi(-3) + t * t,
            Envelope { coeff: 1.0, exponent: 3.0 },
            Envelope { coeff: f64::MAX, exponent: 0.0 },
            1.0,
        ))
        .unwrap();
        // sup f′ on (0, 2] is f′(2) = 4 − 3/16; the singular part is not dropped here.
        let c = custom.one_sided_lipschitz(2.0);
        // Secants are refined until stable to 1%.
        assert!((c - 3.8125).abs() < 0.01 * 3.8125, "{c}");
    }

    #[test]
    fn lipschitz_is_nondecreasing_in_m() {
        let s = NonlinearitySpec::power_plus_polynomial(2.0, 1.0, vec![0.0, 0.0, 3.0, -1.0]).unwrap();
        let ms = geometric_grid(0.01, 10.0, 50);
        let cs: Vec<f64> = ms.iter().map(|&m| s.one_sided_lipschitz(m)).collect();
        assert!(cs.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn classify_examples() {
        let probe = geometric_grid(1e-4, 1e4, 200);
        let f = pure3().classify(&probe, &[1.0, 10.0]);
        assert!(f.satisfies_f.holds());
        assert!(f.near_zero_superlinear.holds());
        assert!(f.global_singular_lower.holds());
        assert!(f.tail_bound.holds());
        assert!(f.globally_nonincreasing.holds());
        assert_eq!(f.lipschitz, vec![
            LipschitzEstimate { m: 1.0, c: 0.0 },
            LipschitzEstimate { m: 10.0, c: 0.0 }
        ]);

        let g1 = NonlinearitySpec::power_plus_polynomial(3.0, 1.0, vec![1.0]).unwrap();
        let f = g1.classify(&probe, &[]);
        assert!(f.near_zero_superlinear.holds());
        assert_eq!(f.tail_bound, FlagState::Fails);
        assert!(f.globally_nonincreasing.holds());

        let dp = NonlinearitySpec::double_power(3.0, 1.0, 2.0, 1.0).unwrap();
        let f = dp.classify(&probe, &[]);
        assert!(f.global_singular_lower.holds());
        assert!(f.tail_bound.holds());
        let env = dp.tail_envelope().unwrap();
        assert_eq!((env.coeff, env.exponent), (2.0, 2.0));
    }

    #[test]
    fn classify_flags_are_consistent() {
        let probe = geometric_grid(1e-3, 1e3, 100);
        let specs = vec![
            NonlinearitySpec::power_plus_polynomial(3.0, 1.0, vec![0.0, 0.0, 1.0]).unwrap(),
            NonlinearitySpec::power_plus_polynomial(3.0, 1.0, vec![1.0, -0.1]).unwrap(),
        ];
        for s in catalog().into_iter().chain(specs) {
            let f = s.classify(&probe, &[]);
            if f.globally_nonincreasing.holds() {
                let t1 = s.tail_start();
                let beyond: Vec<f64> = probe.iter().copied().filter(|&t| t > t1).collect();
                assert!(beyond.windows(2).all(|w| s.value(w[1]) <= s.value(w[0])));
            }
        }
        let neg = NonlinearitySpec::power_plus_polynomial(3.0, 1.0, vec![1.0, -0.1]).unwrap();
        assert_eq!(neg.classify(&probe, &[]).global_singular_lower, FlagState::Fails);
    }

    #[test]
    fn classify_custom_by_sampling() {
        let probe = geometric_grid(1e-3, 1e3, 100);
        let custom = NonlinearitySpec::custom(CustomFn::new(
            |t: f64| 2.0 * t.powi(-3),
            Envelope { coeff: 1.0, exponent: 3.0 },
            Envelope { coeff: 2.0, exponent: 3.0 },
            1.0,
        ))
        .unwrap();
        let f = custom.classify(&probe, &[1.0]);
        assert!(f.near_zero_superlinear.holds());
        assert!(f.global_singular_lower.holds());
        assert!(f.tail_bound.holds());
        assert!(f.globally_nonincreasing.holds());

        let bumpy = NonlinearitySpec::custom(CustomFn::new(
            |t: f64| t.powi(-3) * (1.5 + (t).sin()),
            Envelope { coeff: 0.5, exponent: 3.0 },
            Envelope { coeff: 2.5, exponent: 3.0 },
            1.0,
        ))
        .unwrap();
        let f = bumpy.classify(&probe, &[]);
        assert_eq!(f.globally_nonincreasing, FlagState::Fails);
        assert!(f.global_singular_lower.holds());
    }

    #[test]
    fn custom_rejects_violated_tail_envelope() {
        let r = NonlinearitySpec::custom(CustomFn::new(
            |t: f64| t.powi(-2),
            Envelope { coeff: 1.0, exponent: 2.0 },
            Envelope { coeff: 1.0, exponent: 3.0 },
            1.0,
        ));
        assert!(matches!(r, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn near_zero_envelope_values() {
        assert_eq!(pure3().near_zero_envelope(1.0), 1.0);
        let g1 = NonlinearitySpec::power_plus_polynomial(3.0, 1.0, vec![1.0]).unwrap();
        assert_relative_eq!(g1.near_zero_envelope(2.0), 9.0, max_relative = 1e-12);
    }

    #[test]
    fn config_round_trip_and_rejections() {
        let s = NonlinearitySpec::double_power(3.0, 1.0, 2.0, 0.5).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        let back: NonlinearitySpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back.kind(), Kind::DoublePower);
        assert_eq!((back.beta(), back.d_sing()), (2.0, 0.5));

        let bad = r#"{"kind":"PurePower","gamma":3,"c_sing":1,"colour":2}"#;
        assert!(serde_json::from_str::<NonlinearitySpec>(bad).is_err());
        let custom = r#"{"kind":"Custom","gamma":3}"#;
        assert!(serde_json::from_str::<NonlinearitySpec>(custom).is_err());
        let neg = r#"{"kind":"PurePower","gamma":-1}"#;
        assert!(serde_json::from_str::<NonlinearitySpec>(neg).is_err());
    }
}
