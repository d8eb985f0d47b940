//! One-dimensional solutions `v_M` of `−v″ = f(v)`, `v(0) = 0`, `v′ > 0`.
//!
//! Every such profile satisfies `½(v′)² − F(v) = M` for some `M ≥ 0`, and is
//! recovered by inverting `Φ(v) = ∫₀^v ds/√(M + F(s)) = √2·t`.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::interp::MonotoneCubic;
use crate::io::fmt_f64;
use crate::nonlinearity::{Kind, NonlinearitySpec};
use crate::quad::{adaptive_simpson, DEFAULT_TOL};

/// Below this value of `Φ` the profile is taken from its leading-order
/// power law, since `F(s)` overflows for tiny `s`.
const ASYMPTOTIC_PHI: f64 = 1e-8;
const NEWTON_RTOL: f64 = 1e-12;
const MAX_BRACKET_DOUBLINGS: usize = 200;
const MAX_NEWTON_STEPS: usize = 200;

/// `K_γ = (γ+1)^(2/(γ+1)) / (2γ−2)^(1/(γ+1))`.
pub fn pure_constant(gamma: f64) -> Result<f64> {
    if !(gamma > 1.0 && gamma.is_finite()) {
        return Err(Error::Domain(format!("pure solution needs gamma > 1, got {gamma}")));
    }
    let e = 1.0 / (gamma + 1.0);
    Ok((gamma + 1.0).powf(2.0 * e) / (2.0 * gamma - 2.0).powf(e))
}

/// The explicit solution `K_γ x^(2/(γ+1))` of `−v″ = v^(−γ)`.
pub fn pure_exact(gamma: f64, x: f64) -> Result<f64> {
    let k = pure_constant(gamma)?;
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("pure solution needs x >= 0, got {x}")));
    }
    Ok(k * x.powf(2.0 / (gamma + 1.0)))
}

/// Pure solution for `−v″ = c·v^(−γ)`, i.e. `c^(1/(γ+1))·pure_exact`.
pub(crate) fn pure_exact_scaled(gamma: f64, c: f64, x: f64) -> Result<f64> {
    Ok(c.powf(1.0 / (gamma + 1.0)) * pure_exact(gamma, x)?)
}

/// `f` together with the first-integral constant `M`.
#[derive(Debug, Clone)]
pub struct ProfileParams {
    pub spec: NonlinearitySpec,
    pub m: f64,
}

impl ProfileParams {
    pub fn new(spec: NonlinearitySpec, m: f64) -> Result<Self> {
        if !(m >= 0.0 && m.is_finite()) {
            return Err(Error::InvalidInput(format!("M must be finite and >= 0, got {m}")));
        }
        if !spec.integrable_at_infinity() {
            return Err(Error::Integrability(
                "profiles exist only when f is integrable at infinity".into(),
            ));
        }
        Ok(Self { spec, m })
    }

    fn singular_blows_up(&self) -> bool {
        let e = self.spec.singular_envelope();
        e.exponent > 1.0 && e.coeff > 0.0
    }

    fn primitive(&self, s: f64) -> f64 {
        self.spec.tail_primitive(s).unwrap_or(f64::NAN)
    }

    /// `1/√(M + F(s))`, extended continuously to `s = 0`.
    fn integrand(&self, s: f64) -> f64 {
        if s <= 0.0 {
            if self.singular_blows_up() {
                return 0.0;
            }
            return 1.0 / (self.m + self.primitive(f64::MIN_POSITIVE)).sqrt();
        }
        1.0 / (self.m + self.primitive(s)).sqrt()
    }

    /// `Φ(v) = ∫₀^v ds/√(M + F(s))`.
    ///
    /// Split at `min(v, t₁)`; the near-zero piece is integrated in `w = √s`,
    /// which removes the derivative blow-up of the integrand at 0.
    pub fn phi(&self, v: f64) -> Result<f64> {
        if !(v >= 0.0) {
            return Err(Error::Domain(format!("phi needs v >= 0, got {v}")));
        }
        if v == 0.0 {
            return Ok(0.0);
        }
        let split = v.min(self.spec.tail_start());
        let near = adaptive_simpson(
            |w| 2.0 * w * self.integrand(w * w),
            0.0,
            split.sqrt(),
            0.5 * DEFAULT_TOL,
        )?;
        let far = if split < v {
            adaptive_simpson(|s| self.integrand(s), split, v, 0.5 * DEFAULT_TOL)?
        } else {
            0.0
        };
        Ok(near + far)
    }

    /// `Φ(b) − Φ(a)` for `0 < a`.
    fn phi_increment(&self, a: f64, b: f64) -> Result<f64> {
        adaptive_simpson(|s| self.integrand(s), a, b, 1e-13)
    }

    /// `Φ′(v) = 1/√(M + F(v))`.
    fn phi_slope(&self, v: f64) -> f64 {
        self.integrand(v)
    }

    /// Leading-order power law near the boundary.
    fn small_t_value(&self, t: f64) -> Option<f64> {
        if !self.singular_blows_up() {
            return None;
        }
        let e = self.spec.singular_envelope();
        pure_exact_scaled(e.exponent, e.coeff, t).ok()
    }

    fn growth_scale(&self, t: f64) -> f64 {
        self.small_t_value(t).filter(|v| *v > 0.0).unwrap_or(t.max(1e-3))
    }

    /// `v(t)`: the unique root of `Φ(v) = √2·t`.
    pub fn value(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::Domain(format!("profile needs t >= 0, got {t}")));
        }
        if t == 0.0 {
            return Ok(0.0);
        }
        let target = std::f64::consts::SQRT_2 * t;
        if target < ASYMPTOTIC_PHI {
            if let Some(v) = self.small_t_value(t) {
                return Ok(v);
            }
        }
        let (hi, phi_hi) = self.bracket(t, target)?;
        self.newton_from_above(target, hi, phi_hi, 0.0)
    }

    fn bracket(&self, t: f64, target: f64) -> Result<(f64, f64)> {
        let mut hi = self.growth_scale(t);
        for _ in 0..MAX_BRACKET_DOUBLINGS {
            let p = self.phi(hi)?;
            if p >= target {
                return Ok((hi, p));
            }
            hi *= 2.0;
        }
        Err(Error::RootFind(format!("no bracket for t = {t}")))
    }

    /// Newton on the convex increasing `Φ`, started to the right of the root
    /// so iterates decrease monotonically; bisection guards the lower end.
    fn newton_from_above(&self, target: f64, mut v: f64, mut phi_v: f64, mut lo: f64) -> Result<f64> {
        for _ in 0..MAX_NEWTON_STEPS {
            let gap = phi_v - target;
            if gap <= 0.0 {
                lo = lo.max(v);
            }
            let slope = self.phi_slope(v);
            let mut next = if slope > 0.0 { v - gap / slope } else { f64::NAN };
            if !(next > lo && next.is_finite()) {
                next = 0.5 * (lo + v);
            }
            if (next - v).abs() <= NEWTON_RTOL * v {
                return Ok(next);
            }
            phi_v += self.phi_increment(v, next)?;
            v = next;
        }
        Err(Error::RootFind(format!("Newton stalled for target {target}")))
    }

    /// `v′(t) = √(2(M + F(v(t))))`.
    pub fn derivative(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("profile derivative needs t > 0, got {t}")));
        }
        let v = self.value(t)?;
        Ok(self.slope_at_value(v))
    }

    fn slope_at_value(&self, v: f64) -> f64 {
        if v == 0.0 {
            if self.singular_blows_up() {
                return f64::INFINITY;
            }
            return (2.0 * (self.m + self.primitive(f64::MIN_POSITIVE))).sqrt();
        }
        (2.0 * (self.m + self.primitive(v))).sqrt()
    }

    /// Profile on `t_grid`, solved node after node from the previous root.
    pub fn tabulate(&self, t_grid: &[f64]) -> Result<ProfileTable> {
        if t_grid.is_empty() || !(t_grid[0] >= 0.0) || t_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("t_grid must be nonnegative and increasing".into()));
        }
        let mut v = Vec::with_capacity(t_grid.len());
        let (mut v_prev, mut phi_prev) = (0.0, 0.0);
        for &t in t_grid {
            let target = std::f64::consts::SQRT_2 * t;
            let vt = if t == 0.0 {
                0.0
            } else if target < ASYMPTOTIC_PHI && self.small_t_value(t).is_some() {
                self.small_t_value(t).unwrap()
            } else {
                let slope = self.phi_slope(v_prev);
                let guess = v_prev + (target - phi_prev) / slope;
                if v_prev > 0.0 && guess.is_finite() && guess > v_prev {
                    // The tangent of a convex Φ overshoots the root.
                    let phi_g = phi_prev + self.phi_increment(v_prev, guess)?;
                    self.newton_from_above(target, guess, phi_g, v_prev)?
                } else {
                    self.value(t)?
                }
            };
            if vt > 0.0 {
                phi_prev = target;
                v_prev = vt;
            }
            v.push(vt);
        }
        let v_prime = v.iter().map(|&x| self.slope_at_value(x)).collect();
        ProfileTable::from_parts(t_grid.to_vec(), v, v_prime, self.clone())
    }
}

/// Sampled profile `(t, v, v′)`.
#[derive(Debug, Clone)]
pub struct ProfileTable {
    t: Vec<f64>,
    v: Vec<f64>,
    v_prime: Vec<f64>,
    params: ProfileParams,
    interp: MonotoneCubic,
}

impl ProfileTable {
    /// Validates and assembles a table: `t` increasing from `t₀ ≥ 0`, `v`
    /// strictly increasing with `v(0) = 0`, `v′ > 0` where `t > 0`.
    pub fn from_parts(t: Vec<f64>, v: Vec<f64>, v_prime: Vec<f64>, params: ProfileParams) -> Result<Self> {
        if t.len() < 2 || t.len() != v.len() || t.len() != v_prime.len() {
            return Err(Error::InvalidInput("table columns need equal length >= 2".into()));
        }
        if !(t[0] >= 0.0) || t.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("t must be nonnegative and increasing".into()));
        }
        if t[0] == 0.0 && v[0] != 0.0 {
            return Err(Error::InvalidInput("profile must vanish at t = 0".into()));
        }
        if v.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("profile values must increase strictly".into()));
        }
        if t.iter().zip(&v_prime).any(|(&ti, &d)| ti > 0.0 && !(d > 0.0)) {
            return Err(Error::InvalidInput("profile derivative must be positive".into()));
        }
        let interp = MonotoneCubic::new(&t, &v);
        Ok(Self { t, v, v_prime, params, interp })
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn v_prime(&self) -> &[f64] {
        &self.v_prime
    }

    pub fn params(&self) -> &ProfileParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Monotone cubic interpolation; exact at nodes.
    pub fn interpolate(&self, t: f64) -> f64 {
        self.interp.eval(t)
    }

    /// `max_j |½ v′_j² − F(v_j) − M|` over nodes with `v > 0`.
    pub fn first_integral_drift(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (&v, &d) in self.v.iter().zip(&self.v_prime) {
            if v > 0.0 {
                let e = 0.5 * d * d - self.params.spec.tail_primitive(v)? - self.params.m;
                worst = worst.max(e.abs());
            }
        }
        Ok(worst)
    }

    /// CSV with header `t,v,v_prime` and 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,v,v_prime")?;
        for k in 0..self.t.len() {
            writeln!(w, "{},{},{}", fmt_f64(self.t[k]), fmt_f64(self.v[k]), fmt_f64(self.v_prime[k]))?;
        }
        Ok(())
    }
}

/// `t ↦ λ^(−2/(γ+1)) v(λt)` for a pure-power profile.
///
/// Nodes map exactly (`t/λ`), so no interpolation is involved. The first
/// integral constant becomes `λ^(2(γ−1)/(γ+1))·M`.
pub fn scaled_family(lambda: f64, base: &ProfileTable) -> Result<ProfileTable> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidInput(format!("scale must be positive, got {lambda}")));
    }
    let spec = &base.params.spec;
    if spec.kind() != Kind::PurePower {
        return Err(Error::InvalidInput("only pure-power profiles are scale invariant".into()));
    }
    let gamma = spec.gamma();
    let alpha = 2.0 / (gamma + 1.0);
    let sv = lambda.powf(-alpha);
    let sd = lambda.powf(1.0 - alpha);
    let t = base.t.iter().map(|&t| t / lambda).collect();
    let v = base.v.iter().map(|&v| v * sv).collect();
    let d = base.v_prime.iter().map(|&d| d * sd).collect();
    let m = base.params.m * lambda.powf(2.0 * (gamma - 1.0) / (gamma + 1.0));
    ProfileTable::from_parts(t, v, d, ProfileParams { spec: spec.clone(), m })
}

/// `max |(−v(t−h) + 2v(t) − v(t+h))/h² − f(v(t))|` over nodes whose two
/// neighbours are equally spaced.
pub fn ode_residual(table: &ProfileTable) -> Result<f64> {
    let (t, v) = (&table.t, &table.v);
    let spec = &table.params.spec;
    let mut worst: Option<f64> = None;
    for k in 1..t.len().saturating_sub(1) {
        let h1 = t[k] - t[k - 1];
        let h2 = t[k + 1] - t[k];
        if (h1 - h2).abs() > 1e-9 * h1.max(h2) || v[k] <= 0.0 {
            continue;
        }
        let h = 0.5 * (h1 + h2);
        let r = (-v[k - 1] + 2.0 * v[k] - v[k + 1]) / (h * h) - spec.value(v[k]);
        worst = Some(worst.unwrap_or(0.0).max(r.abs()));
    }
    worst.ok_or_else(|| Error::InvalidInput("no uniformly spaced interior node".into()))
}
