//! Light-tailed densities `p(x) = c·exp(-(g(x) - q(x)))` on the half-line.
//!
//! A [`DensityModel`] carries the exponent `g`, a small perturbation `q`,
//! `h = g'` with its first three derivatives, and the log normalizer.
//! Builtin families wire everything analytically; user models get finite
//! difference derivatives of `h`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, Window};
use crate::roots::{self, Tolerance};

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Builtin density families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Family {
    /// `p(x) = k·x^{k-1}·exp(-x^k)`, `k > 1`.
    Weibull { k: f64 },
    /// `p(x) = c·exp(-e^{x-1})`.
    ExpExp,
    /// `g(x) = x^{β+1}/(β+1)`, so `h(x) = x^β`.
    Power { beta: f64 },
}

impl Family {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Family::Weibull { k } if !(k.is_finite() && k > 1.0) => Err(Error::InvalidParameter(
                format!("weibull shape k must be > 1, got {k}"),
            )),
            Family::Power { beta } if !(beta.is_finite() && beta > 0.0) => Err(
                Error::InvalidParameter(format!("power exponent beta must be > 0, got {beta}")),
            ),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Weibull { k } => write!(f, "weibull(k={k})"),
            Family::ExpExp => write!(f, "exp_exp"),
            Family::Power { beta } => write!(f, "power(beta={beta})"),
        }
    }
}

/// Growth class of `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegularityClass {
    /// Regularly varying with index `β > 0`.
    RBeta(f64),
    /// Rapidly varying: the inverse of `h` is slowly varying.
    RInfinity,
}

impl fmt::Display for RegularityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegularityClass::RBeta(b) => write!(f, "RBeta({b})"),
            RegularityClass::RInfinity => write!(f, "RInfinity"),
        }
    }
}

/// A density on `[0, ∞)` in exponent form. Immutable once built.
#[derive(Clone)]
pub struct DensityModel {
    name: String,
    family: Option<Family>,
    g: RealFn,
    q: RealFn,
    q_is_zero: bool,
    h: RealFn,
    h1: RealFn,
    h2: RealFn,
    h3: RealFn,
    log_c: f64,
    class_hint: RegularityClass,
    theta: f64,
    x_min: f64,
}

impl fmt::Debug for DensityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensityModel")
            .field("name", &self.name)
            .field("family", &self.family)
            .field("log_c", &self.log_c)
            .field("class_hint", &self.class_hint)
            .field("theta", &self.theta)
            .field("x_min", &self.x_min)
            .finish_non_exhaustive()
    }
}

pub const DEFAULT_THETA: f64 = 0.5;

fn zero_fn() -> RealFn {
    Arc::new(|_| 0.0)
}

fn fd_step(x: f64, rel: f64) -> f64 {
    x.abs().max(1e-3) * rel
}

impl DensityModel {
    /// Builds and normalizes one of the builtin families.
    pub fn builtin(family: Family) -> Result<Self> {
        family.validate()?;
        let mut model = match family {
            Family::Weibull { k } => {
                let km1 = k - 1.0;
                Self::raw(
                    family.to_string(),
                    Arc::new(move |x: f64| x.powf(k) - km1 * x.ln()),
                    Arc::new(move |x: f64| k * x.powf(km1) - km1 / x),
                    Arc::new(move |x: f64| k * km1 * x.powf(k - 2.0) + km1 / (x * x)),
                    Arc::new(move |x: f64| {
                        k * km1 * (k - 2.0) * x.powf(k - 3.0) - 2.0 * km1 / (x * x * x)
                    }),
                    Arc::new(move |x: f64| {
                        k * km1 * (k - 2.0) * (k - 3.0) * x.powf(k - 4.0)
                            + 6.0 * km1 / (x * x * x * x)
                    }),
                    RegularityClass::RBeta(km1),
                    (km1 / k).powf(1.0 / k) + 1e-6,
                )
            }
            Family::ExpExp => {
                let e = Arc::new(|x: f64| (x - 1.0).exp()) as RealFn;
                Self::raw(
                    family.to_string(),
                    e.clone(),
                    e.clone(),
                    e.clone(),
                    e.clone(),
                    e,
                    RegularityClass::RInfinity,
                    0.0,
                )
            }
            Family::Power { beta } => Self::raw(
                family.to_string(),
                Arc::new(move |x: f64| x.powf(beta + 1.0) / (beta + 1.0)),
                Arc::new(move |x: f64| x.powf(beta)),
                Arc::new(move |x: f64| beta * x.powf(beta - 1.0)),
                Arc::new(move |x: f64| beta * (beta - 1.0) * x.powf(beta - 2.0)),
                Arc::new(move |x: f64| beta * (beta - 1.0) * (beta - 2.0) * x.powf(beta - 3.0)),
                RegularityClass::RBeta(beta),
                0.0,
            ),
        };
        model.family = Some(family);
        model.log_c = model.normalize()?;
        Ok(model)
    }

    pub fn weibull(k: f64) -> Result<Self> {
        Self::builtin(Family::Weibull { k })
    }

    pub fn exp_exp() -> Result<Self> {
        Self::builtin(Family::ExpExp)
    }

    pub fn power(beta: f64) -> Result<Self> {
        Self::builtin(Family::Power { beta })
    }

    /// A user model given `g` and `h = g'`. The derivatives of `h` are
    /// central finite differences.
    pub fn custom(
        name: impl Into<String>,
        g: RealFn,
        h: RealFn,
        class_hint: RegularityClass,
        x_min: f64,
    ) -> Result<Self> {
        if !x_min.is_finite() || x_min < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "x_min must be finite and non-negative, got {x_min}"
            )));
        }
        let (ha, hb, hc) = (h.clone(), h.clone(), h.clone());
        let h1: RealFn = Arc::new(move |x: f64| {
            let d = fd_step(x, 1e-5);
            (ha(x + d) - ha(x - d)) / (2.0 * d)
        });
        let h2: RealFn = Arc::new(move |x: f64| {
            let d = fd_step(x, 1e-4);
            (hb(x + d) - 2.0 * hb(x) + hb(x - d)) / (d * d)
        });
        let h3: RealFn = Arc::new(move |x: f64| {
            let d = fd_step(x, 2e-3);
            (hc(x + 2.0 * d) - 2.0 * hc(x + d) + 2.0 * hc(x - d) - hc(x - 2.0 * d))
                / (2.0 * d * d * d)
        });
        let mut model = Self::raw(name.into(), g, h, h1, h2, h3, class_hint, x_min);
        model.log_c = model.normalize()?;
        Ok(model)
    }

    #[allow(clippy::too_many_arguments)]
    fn raw(
        name: String,
        g: RealFn,
        h: RealFn,
        h1: RealFn,
        h2: RealFn,
        h3: RealFn,
        class_hint: RegularityClass,
        x_min: f64,
    ) -> Self {
        Self {
            name,
            family: None,
            g,
            q: zero_fn(),
            q_is_zero: true,
            h,
            h1,
            h2,
            h3,
            log_c: 0.0,
            class_hint,
            theta: DEFAULT_THETA,
            x_min,
        }
    }

    /// Replaces the perturbation `q` and renormalizes.
    pub fn with_q(mut self, q: RealFn) -> Result<Self> {
        self.q = q;
        self.q_is_zero = false;
        self.log_c = self.normalize()?;
        Ok(self)
    }

    pub fn with_theta(mut self, theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "theta must lie in (0, 1), got {theta}"
            )));
        }
        self.theta = theta;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn family(&self) -> Option<Family> {
        self.family
    }
    pub fn class_hint(&self) -> RegularityClass {
        self.class_hint
    }
    pub fn theta(&self) -> f64 {
        self.theta
    }
    pub fn x_min(&self) -> f64 {
        self.x_min
    }
    pub fn log_c(&self) -> f64 {
        self.log_c
    }
    pub fn has_perturbation(&self) -> bool {
        !self.q_is_zero
    }

    pub fn g(&self, x: f64) -> f64 {
        (self.g)(x)
    }
    pub fn q(&self, x: f64) -> f64 {
        (self.q)(x)
    }
    pub fn h(&self, x: f64) -> f64 {
        (self.h)(x)
    }
    pub fn h1(&self, x: f64) -> f64 {
        (self.h1)(x)
    }
    pub fn h2(&self, x: f64) -> f64 {
        (self.h2)(x)
    }
    pub fn h3(&self, x: f64) -> f64 {
        (self.h3)(x)
    }

    /// `log p(x)` without the normalizer, `-g(x) + q(x)`; `-∞` off the support.
    pub fn log_kernel(&self, x: f64) -> f64 {
        if x < 0.0 {
            return f64::NEG_INFINITY;
        }
        let v = -self.g(x) + self.q(x);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        self.log_c + self.log_kernel(x)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.log_pdf(x).exp()
    }

    /// Peak location and width of `exp(t·x - g(x) + q(x))`, used to lay
    /// out quadrature panels. The peak is `ψ(t)` when `t` is in the range
    /// of `h`, otherwise the left end `x_min`.
    pub fn tilt_window(&self, t: f64) -> Result<Window> {
        let center = if t >= self.h(self.x_min) {
            self.psi(t)?
        } else {
            self.x_min
        };
        let curvature = self.h1(center);
        let log_f = |x: f64| t * x + self.log_kernel(x);
        let analytic = 1.0 / curvature.sqrt();
        let scale = if analytic.is_finite() && analytic > 0.0 && center > self.x_min {
            analytic
        } else {
            quad::width_from_log(&log_f, 0.0, center)
        };
        Window::new(0.0, center, scale)
    }

    /// `-log ∫₀^∞ exp(-g + q)`.
    pub fn normalize(&self) -> Result<f64> {
        let window = self.tilt_window(0.0)?;
        let reference = self.log_kernel(window.center);
        if !reference.is_finite() {
            return Err(Error::NonIntegrable(format!(
                "log density is not finite at the peak x={}",
                window.center
            )));
        }
        let r = quad::integrate(|x| [(self.log_kernel(x) - reference).exp()], &window)?;
        if !(r.value[0] > 0.0 && r.value[0].is_finite()) {
            return Err(Error::NonIntegrable(format!(
                "normalizing integral is {}",
                r.value[0]
            )));
        }
        Ok(-(reference + r.value[0].ln()))
    }

    /// `ψ(u) = h^{←}(u)`, the inverse of the strictly increasing `h`.
    pub fn psi(&self, u: f64) -> Result<f64> {
        let floor = self.h(self.x_min);
        if !(u >= floor) || !u.is_finite() {
            return Err(Error::OutOfDomain {
                what: "psi",
                value: u,
                requirement: format!("u >= h(x_min) = {floor}"),
            });
        }
        if u == floor {
            return Ok(self.x_min);
        }
        let start = self.x_min.max(1.0);
        let hi = roots::expand_upper(|x| Ok(self.h(x)), u, start, 1e300)?;
        let lo = if hi == start { self.x_min } else { hi * 0.5 };
        let lo = lo.max(self.x_min);
        roots::solve_increasing(
            |x| Ok((self.h(x), self.h1(x))),
            u,
            lo,
            hi,
            0.5 * (lo + hi),
            Tolerance {
                f_abs: 1e-12 * u.abs().max(1.0),
                x_rel: 1e-15,
            },
        )
    }

    /// `ψ'(t) = 1/h'(ψ(t))`.
    pub fn psi_prime(&self, t: f64) -> Result<f64> {
        Ok(1.0 / self.h1(self.psi(t)?))
    }

    /// `ψ''(t) = -h''(x̂)/h'(x̂)³` at `x̂ = ψ(t)`.
    pub fn psi_second(&self, t: f64) -> Result<f64> {
        let x = self.psi(t)?;
        let d1 = self.h1(x);
        Ok(-self.h2(x) / (d1 * d1 * d1))
    }

    /// Karamata `ε` certifying the regularity class.
    ///
    /// For `RBeta(β)` this is `x·l'(x)/l(x)` with `l = h/x^β`. For
    /// `RInfinity` it is the `ε` of the inverse, `t·ψ'(t)/ψ(t)`, taken at
    /// `t = h(x)`.
    pub fn epsilon_of(&self, x: f64) -> Result<f64> {
        if !(x >= 1.0) {
            return Err(Error::OutOfDomain {
                what: "epsilon",
                value: x,
                requirement: "x >= 1".to_string(),
            });
        }
        Ok(match self.class_hint {
            RegularityClass::RBeta(beta) => x * self.h1(x) / self.h(x) - beta,
            RegularityClass::RInfinity => (self.h(x) / self.h1(x)) / x,
        })
    }
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Regularity certification
// ---------------------------------------------------------------------------

/// The four regularity conditions checked numerically.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckId {
    /// `x|ε'(x)|` and `x²|ε''(x)|` stay bounded (regularly varying case).
    EpsilonDerivativeBounds,
    /// `tε'(t)/ε(t) → 0` and `t²ε''(t)/ε(t) → 0` (rapidly varying case).
    EpsilonDerivativeRatios,
    /// `t^η·ε(t)` stays away from zero (rapidly varying case).
    EpsilonPowerFloor,
    /// `sup_{|v-x|<ϑx} |q(v)| <= 1/(x·√h(x))` for large `x`.
    PerturbationBound,
}

impl CheckId {
    pub fn as_str(&self) -> &'static str {
        match self {
            CheckId::EpsilonDerivativeBounds => "eps-derivative-bounds",
            CheckId::EpsilonDerivativeRatios => "eps-derivative-ratios",
            CheckId::EpsilonPowerFloor => "eps-power-floor",
            CheckId::PerturbationBound => "q-perturbation-bound",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularityCheck {
    pub id: CheckId,
    pub passed: bool,
    /// Worst value of the checked quantity over the top decade of the grid.
    pub witness: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularityReport {
    pub class: RegularityClass,
    pub beta_estimate: Option<f64>,
    pub epsilon_values: Vec<(f64, f64)>,
    pub checks: Vec<RegularityCheck>,
}

impl RegularityReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub const DEFAULT_ETA: f64 = 1.0 / 16.0;

/// Finite-difference step for derivatives of ε, relative to `x`.
const EPS_FD_REL: f64 = 1e-3;

/// Default classification grid: 61 log-spaced points over three decades.
pub fn default_classify_grid() -> Vec<f64> {
    log_grid(1.0, 1e3, 61)
}

pub fn classify(model: &DensityModel, x_grid: &[f64]) -> Result<RegularityReport> {
    classify_with_eta(model, x_grid, DEFAULT_ETA)
}

struct Decades {
    top: Vec<usize>,
    prev: Vec<usize>,
}

fn split_decades(xs: &[f64]) -> Decades {
    let x_max = xs.iter().cloned().fold(f64::MIN, f64::max);
    let top = (0..xs.len()).filter(|&i| xs[i] >= x_max / 10.0).collect();
    let prev = (0..xs.len())
        .filter(|&i| xs[i] >= x_max / 100.0 && xs[i] < x_max / 10.0)
        .collect();
    Decades { top, prev }
}

fn sup_over(values: &[f64], idx: &[usize]) -> f64 {
    idx.iter().map(|&i| values[i].abs()).fold(0.0, f64::max)
}

/// Certifies the regularity class of `h` over `x_grid` (≥ 3 decades).
///
/// Limits are judged as trends over the top decade of the grid, with a
/// tolerance band of ten times the rounding floor of the finite
/// differences. Failed checks are recorded, never raised.
pub fn classify_with_eta(
    model: &DensityModel,
    x_grid: &[f64],
    eta: f64,
) -> Result<RegularityReport> {
    let mut xs: Vec<f64> = x_grid.iter().cloned().filter(|&x| x >= 1.0).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if xs.len() < 3 || xs[xs.len() - 1] / xs[0] < 999.999 {
        return Err(Error::InvalidParameter(
            "classification grid must start at x >= 1 and span at least three decades".to_string(),
        ));
    }
    if !(eta > 0.0 && eta < 0.125) {
        return Err(Error::InvalidParameter(format!(
            "eta must lie in (0, 1/8), got {eta}"
        )));
    }
    // keep points where products like h²·h'' stay representable
    xs.retain(|&x| {
        let (h, h1) = (model.h(x), model.h1(x));
        h > 0.0 && h1 > 0.0 && h <= 1e100 && h1 <= 1e100
    });
    if xs.len() < 3 {
        return Err(Error::InvalidParameter(
            "h is not finite and positive on the grid".to_string(),
        ));
    }

    let eps = |x: f64| model.epsilon_of(x.max(1.0)).unwrap_or(f64::NAN);
    let epsilon_values: Vec<(f64, f64)> = xs.iter().map(|&x| (x, eps(x))).collect();
    let decades = split_decades(&xs);

    // first and second derivatives of ε in x, central differences
    let derivs: Vec<(f64, f64, f64)> = xs
        .iter()
        .map(|&x| {
            let d = x * EPS_FD_REL;
            let (lo, mid, hi) = (eps(x - d), eps(x), eps(x + d));
            (mid, (hi - lo) / (2.0 * d), (hi - 2.0 * mid + lo) / (d * d))
        })
        .collect();

    let mut checks = Vec::new();
    let mut beta_estimate = None;
    let n = xs.len();
    let slope_idx = decades.top[0];
    let log_slope = (model.h(xs[n - 1]).ln() - model.h(xs[slope_idx]).ln())
        / (xs[n - 1].ln() - xs[slope_idx].ln());

    match model.class_hint() {
        RegularityClass::RBeta(beta) => {
            beta_estimate = Some(log_slope);
            let ulp = 4.0 * f64::EPSILON * (beta + 1.0);
            let band_a = 10.0 * ulp / (2.0 * EPS_FD_REL);
            let band_b = 10.0 * 4.0 * ulp / (EPS_FD_REL * EPS_FD_REL);
            let a: Vec<f64> = xs.iter().zip(&derivs).map(|(&x, d)| x * d.1.abs()).collect();
            let b: Vec<f64> = xs
                .iter()
                .zip(&derivs)
                .map(|(&x, d)| x * x * d.2.abs())
                .collect();
            let finite = a.iter().chain(b.iter()).all(|v| v.is_finite());
            let top_a = sup_over(&a, &decades.top);
            let top_b = sup_over(&b, &decades.top);
            let prev_a = sup_over(&a, &decades.prev);
            let prev_b = sup_over(&b, &decades.prev);
            let passed = finite && top_a <= prev_a + band_a && top_b <= prev_b + band_b;
            checks.push(RegularityCheck {
                id: CheckId::EpsilonDerivativeBounds,
                passed,
                witness: top_a.max(top_b),
            });
        }
        RegularityClass::RInfinity => {
            // derivatives in t = h(x) via the chain rule
            let mut ratio_a = Vec::with_capacity(n);
            let mut ratio_b = Vec::with_capacity(n);
            for (&x, &(e, e1, e2)) in xs.iter().zip(&derivs) {
                let (h, h1, h2) = (model.h(x), model.h1(x), model.h2(x));
                let de_dt = e1 / h1;
                let d2e_dt2 = (e2 * h1 - e1 * h2) / (h1 * h1 * h1);
                ratio_a.push(h * de_dt / e);
                ratio_b.push(h * h * d2e_dt2 / e);
            }
            let ulp = 4.0 * f64::EPSILON;
            let band_a = 10.0 * ulp / (2.0 * EPS_FD_REL);
            let band_b = 10.0 * 4.0 * ulp / (EPS_FD_REL * EPS_FD_REL);
            let finite = ratio_a.iter().chain(ratio_b.iter()).all(|v| v.is_finite());
            let top_a = sup_over(&ratio_a, &decades.top);
            let top_b = sup_over(&ratio_b, &decades.top);
            let prev_a = sup_over(&ratio_a, &decades.prev);
            let prev_b = sup_over(&ratio_b, &decades.prev);
            let first_top = decades.top[0];
            let shrinking = ratio_a[n - 1].abs() <= ratio_a[first_top].abs() + band_a
                && ratio_b[n - 1].abs() <= ratio_b[first_top].abs() + band_b;
            checks.push(RegularityCheck {
                id: CheckId::EpsilonDerivativeRatios,
                passed: finite
                    && shrinking
                    && top_a <= prev_a + band_a
                    && top_b <= prev_b + band_b,
                witness: top_a.max(top_b),
            });

            // t^η ε(t) must not collapse: its log-log slope in t over the
            // top decade may not fall below -η/2
            let log_floor: Vec<f64> = xs
                .iter()
                .zip(&derivs)
                .map(|(&x, d)| eta * model.h(x).ln() + d.0.ln())
                .collect();
            let log_t_first = model.h(xs[first_top]).ln();
            let log_t_last = model.h(xs[n - 1]).ln();
            let slope = (log_floor[n - 1] - log_floor[first_top]) / (log_t_last - log_t_first);
            let positive = decades
                .top
                .iter()
                .all(|&i| log_floor[i].is_finite() && derivs[i].0 > 0.0);
            checks.push(RegularityCheck {
                id: CheckId::EpsilonPowerFloor,
                passed: positive && slope >= -0.5 * eta,
                witness: slope,
            });
        }
    }

    // perturbation bound, sampled on |v - x| < ϑx
    let theta = model.theta();
    let mut worst: f64 = 0.0;
    for &i in &decades.top {
        let x = xs[i];
        let bound_inv = x * model.h(x).sqrt();
        let sup_q = (0..=40)
            .map(|j| {
                let v = x * (1.0 - theta + 2.0 * theta * j as f64 / 40.0);
                model.q(v).abs()
            })
            .fold(0.0, f64::max);
        worst = worst.max(sup_q * bound_inv);
    }
    checks.push(RegularityCheck {
        id: CheckId::PerturbationBound,
        passed: worst.is_finite() && worst <= 1.0,
        witness: worst,
    });

    Ok(RegularityReport {
        class: model.class_hint(),
        beta_estimate,
        epsilon_values,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weibull_two_has_paper_h() {
        let m = DensityModel::weibull(2.0).unwrap();
        for &x in &[0.8, 1.0, 3.0, 10.0] {
            assert!((m.h(x) - (2.0 * x - 1.0 / x)).abs() < 1e-14);
        }
    }

    #[test]
    fn weibull_two_normalizer_is_ln_two() {
        let m = DensityModel::weibull(2.0).unwrap();
        assert!((m.log_c() - 2f64.ln()).abs() < 1e-9, "{}", m.log_c());
    }

    #[test]
    fn half_normal_normalizer() {
        let m = DensityModel::power(1.0).unwrap();
        let expected = (2.0 / std::f64::consts::PI).sqrt().ln();
        assert!((m.log_c() - expected).abs() < 1e-9);
        assert!((expected + 0.2258).abs() < 1e-4);
    }

    #[test]
    fn normalize_is_idempotent() {
        for m in [
            DensityModel::weibull(2.0).unwrap(),
            DensityModel::exp_exp().unwrap(),
            DensityModel::power(1.5).unwrap(),
        ] {
            assert!((m.normalize().unwrap() - m.log_c()).abs() < 1e-10);
        }
    }

    #[test]
    fn psi_closed_forms() {
        let w = DensityModel::weibull(2.0).unwrap();
        let x = w.psi(6.0).unwrap();
        assert!((x - (6.0 + 44f64.sqrt()) / 4.0).abs() < 1e-12);
        assert!((x - 3.15831).abs() < 1e-5);
        let e = DensityModel::exp_exp().unwrap();
        assert!((e.psi(1.0).unwrap() - 1.0).abs() < 1e-13);
        assert!((e.psi(std::f64::consts::E).unwrap() - 2.0).abs() < 1e-13);
        let p = DensityModel::power(1.0).unwrap();
        assert!((p.psi(7.25).unwrap() - 7.25).abs() < 1e-13);
    }

    #[test]
    fn psi_below_range_is_rejected() {
        let e = DensityModel::exp_exp().unwrap();
        assert!(matches!(e.psi(0.1), Err(Error::OutOfDomain { .. })));
        let w = DensityModel::weibull(2.0).unwrap();
        assert!(w.psi(-1.0).is_err());
    }

    #[test]
    fn epsilon_examples() {
        let w = DensityModel::weibull(2.0).unwrap();
        assert!((w.epsilon_of(1.0).unwrap() - 2.0).abs() < 1e-14);
        let x: f64 = 3.7;
        let k: f64 = 2.0;
        let expected = k * (k - 1.0) / (k * x.powf(k) - (k - 1.0));
        assert!((w.epsilon_of(x).unwrap() - expected).abs() < 1e-14);

        let e = DensityModel::exp_exp().unwrap();
        // t = 1 corresponds to x = ψ(1) = 1
        assert!((e.epsilon_of(1.0).unwrap() - 1.0).abs() < 1e-14);
        let t: f64 = 20.0;
        let via_x = e.epsilon_of(e.psi(t).unwrap()).unwrap();
        assert!((via_x - 1.0 / (t.ln() + 1.0)).abs() < 1e-12);

        let p = DensityModel::power(1.0).unwrap();
        for &x in &[1.0, 5.0, 100.0] {
            assert_eq!(p.epsilon_of(x).unwrap(), 0.0);
        }
        assert!(p.epsilon_of(0.5).is_err());
    }

    #[test]
    fn invalid_parameters() {
        assert!(matches!(
            DensityModel::weibull(1.0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(DensityModel::power(0.0).is_err());
        assert!(DensityModel::power(f64::NAN).is_err());
        assert!(DensityModel::weibull(2.0).unwrap().with_theta(1.0).is_err());
    }

    #[test]
    fn classify_builtins() {
        let grid = default_classify_grid();
        let w = classify(&DensityModel::weibull(2.0).unwrap(), &grid).unwrap();
        assert_eq!(w.class, RegularityClass::RBeta(1.0));
        assert!(w.all_passed(), "{w:?}");
        assert!((w.beta_estimate.unwrap() - 1.0).abs() < 0.02);

        let e = classify(&DensityModel::exp_exp().unwrap(), &grid).unwrap();
        assert_eq!(e.class, RegularityClass::RInfinity);
        assert!(e.all_passed(), "{e:?}");
        assert_eq!(e.checks.len(), 3);

        let p = classify(&DensityModel::power(1.0).unwrap(), &grid).unwrap();
        assert!(p.all_passed());
        assert!(p.epsilon_values.iter().all(|&(_, e)| e == 0.0));
    }

    #[test]
    fn classify_flags_a_large_perturbation() {
        let m = DensityModel::weibull(2.0)
            .unwrap()
            .with_q(Arc::new(|x: f64| 0.5 / (1.0 + x)))
            .unwrap();
        let r = classify(&m, &default_classify_grid()).unwrap();
        let q = r
            .checks
            .iter()
            .find(|c| c.id == CheckId::PerturbationBound)
            .unwrap();
        assert!(!q.passed);
        assert!(q.witness > 1.0);
    }

    #[test]
    fn classify_rejects_short_grid() {
        let m = DensityModel::weibull(2.0).unwrap();
        assert!(classify(&m, &log_grid(1.0, 50.0, 20)).is_err());
    }
}
