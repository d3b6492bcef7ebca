//! Exponential tilting of a [`DensityModel`].
//!
//! The tilted density is `π_t(x) = e^{tx} p(x) / Φ(t)`. Its first three
//! cumulants `m`, `s²`, `μ₃` are computed two ways: exactly, by log-space
//! quadrature, and asymptotically from the saddlepoint `x̂ = ψ(t)` with
//! `σ = h'(x̂)^{-1/2}`:
//!
//! ```text
//! m ~ ψ(t)        s² ~ ψ'(t)        μ₃ ~ ((M₆ - 9)/6)·ψ''(t)
//! log Φ(t) ≈ log c + ½·log 2π + log σ + K(x̂, t),   K(x, t) = tx - g(x)
//! ```
//!
//! where `M₆ = 15` is the sixth moment of the standard normal law.

use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::model::DensityModel;
use crate::quad::{self, SignedLog, Window};
use crate::roots::{self, Tolerance};

/// Sixth moment of the standard normal distribution.
pub const M6: f64 = 15.0;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// First three cumulants of a tilted density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub m: f64,
    pub s2: f64,
    pub mu3: f64,
}

impl Moments {
    pub fn s(&self) -> f64 {
        self.s2.sqrt()
    }

    /// `μ₃ / s³`.
    pub fn skewness(&self) -> f64 {
        self.mu3 / (self.s2 * self.s2.sqrt())
    }
}

/// Everything known about the tilt at one `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltState {
    pub t: f64,
    pub x_hat: f64,
    pub sigma: f64,
    pub log_phi: f64,
    pub m_exact: f64,
    pub s2_exact: f64,
    pub mu3_exact: f64,
    pub m_asym: f64,
    pub s2_asym: f64,
    pub mu3_asym: f64,
    pub m_refined: f64,
}

impl TiltState {
    /// Requires `t` in the range of `h`, so that `x̂ = ψ(t)` exists.
    pub fn compute(model: &DensityModel, t: f64) -> Result<Self> {
        let pass = tilted_pass(model, t)?;
        let exact = pass.moments();
        let x_hat = model.psi(t)?;
        let leading = moments_asymptotic(model, t, AsymptoticOrder::Leading)?;
        let refined = moments_asymptotic(model, t, AsymptoticOrder::Refined)?;
        Ok(Self {
            t,
            x_hat,
            sigma: model.h1(x_hat).powf(-0.5),
            log_phi: if t == 0.0 { 0.0 } else { pass.log_phi() },
            m_exact: exact.m,
            s2_exact: exact.s2,
            mu3_exact: exact.mu3,
            m_asym: leading.m,
            s2_asym: leading.s2,
            mu3_asym: leading.mu3,
            m_refined: refined.m,
        })
    }

    pub fn exact(&self) -> Moments {
        Moments {
            m: self.m_exact,
            s2: self.s2_exact,
            mu3: self.mu3_exact,
        }
    }
}

/// One quadrature pass over `e^{tx}p(x)` with weights `1, u, u², u³`,
/// `u = (x - center)/scale`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TiltedPass {
    pub window: Window,
    /// log of the factor pulled out of the integrand.
    pub log_ref: f64,
    pub integrals: [f64; 4],
}

impl TiltedPass {
    pub fn log_phi(&self) -> f64 {
        self.log_ref + self.integrals[0].ln()
    }

    pub fn moments(&self) -> Moments {
        let [i0, i1, i2, i3] = self.integrals;
        let s = self.window.scale;
        let d = s * i1 / i0;
        let r2 = s * s * i2 / i0;
        let r3 = s * s * s * i3 / i0;
        Moments {
            m: self.window.center + d,
            s2: r2 - d * d,
            mu3: r3 - 3.0 * d * r2 + 2.0 * d * d * d,
        }
    }
}

pub(crate) fn tilted_pass(model: &DensityModel, t: f64) -> Result<TiltedPass> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::OutOfDomain {
            what: "tilt",
            value: t,
            requirement: "finite t >= 0".to_string(),
        });
    }
    let window = model.tilt_window(t)?;
    let c = window.center;
    let s = window.scale;
    let kernel_c = model.log_kernel(c);
    if !kernel_c.is_finite() {
        return Err(Error::NonIntegrable(format!(
            "log density not finite at the tilt peak x={c}"
        )));
    }
    let r = quad::integrate(
        |x| {
            let e = (t * (x - c) + model.log_kernel(x) - kernel_c).exp();
            let u = (x - c) / s;
            [e, u * e, u * u * e, u * u * u * e]
        },
        &window,
    )?;
    if !(r.value[0] > 0.0) {
        return Err(Error::NonIntegrable(format!(
            "tilted mass at t={t} is {}",
            r.value[0]
        )));
    }
    Ok(TiltedPass {
        window,
        log_ref: model.log_c() + t * c + kernel_c,
        integrals: r.value,
    })
}

/// `log Φ(t) = log ∫ e^{tx} p(x) dx` by quadrature. `Φ(0) = 1` exactly.
pub fn log_mgf_quadrature(model: &DensityModel, t: f64) -> Result<f64> {
    if t == 0.0 {
        return Ok(0.0);
    }
    Ok(tilted_pass(model, t)?.log_phi())
}

fn laplace_point(model: &DensityModel, t: f64) -> Result<(f64, f64)> {
    let x_hat = model.psi(t)?;
    if x_hat < 2.0 * model.x_min() {
        return Err(Error::OutOfDomain {
            what: "laplace approximation",
            value: t,
            requirement: format!("psi(t) >= 2·x_min = {}", 2.0 * model.x_min()),
        });
    }
    Ok((x_hat, model.h1(x_hat).powf(-0.5)))
}

/// Laplace (Abel-type) approximation `log c + ½log 2π + log σ + K(x̂, t)`.
pub fn log_mgf_laplace(model: &DensityModel, t: f64) -> Result<f64> {
    let (x_hat, sigma) = laplace_point(model, t)?;
    let k = t * x_hat - model.g(x_hat);
    Ok(model.log_c() + LN_SQRT_2PI + sigma.ln() + k)
}

/// `Ψ(t, α) = ∫ (x - x̂)^α e^{tx} p(x) dx` as a signed log value.
pub fn psi_moment_integral(model: &DensityModel, t: f64, alpha: u32) -> Result<SignedLog> {
    if alpha > 3 {
        return Err(Error::InvalidParameter(format!(
            "alpha must be 0..=3, got {alpha}"
        )));
    }
    laplace_point(model, t)?;
    let pass = tilted_pass(model, t)?;
    let log_scale = pass.log_ref + alpha as f64 * pass.window.scale.ln();
    Ok(SignedLog::from_scaled(
        pass.integrals[alpha as usize],
        log_scale,
    ))
}

/// `∫_{-L}^{L} y^k e^{-y²/2} dy` for `k = 0..=kmax`.
fn truncated_gaussian_moments(big_l: f64, kmax: usize) -> Vec<f64> {
    let mut j = vec![0.0; kmax + 1];
    let boundary = (-0.5 * big_l * big_l).exp();
    j[0] = (2.0 * std::f64::consts::PI).sqrt() * erf(big_l / std::f64::consts::SQRT_2);
    for k in 2..=kmax {
        if k % 2 == 0 {
            let edge = if big_l.is_finite() {
                2.0 * big_l.powi(k as i32 - 1) * boundary
            } else {
                0.0
            };
            j[k] = (k - 1) as f64 * j[k - 2] - edge;
        }
    }
    j
}

/// Gaussian-weighted leading term of `Ψ(t, α)`:
/// `∫ y^α φ̃ - (h''(x̂)σ³/6) ∫ y^{3+α} φ̃` over `|y| < l^{1/3}/√2`,
/// with `φ̃(y) = e^{-y²/2}`.
pub fn t1_term(model: &DensityModel, t: f64, alpha: u32, l: f64) -> Result<f64> {
    if !(l > 1.0) {
        return Err(Error::InvalidParameter(format!("l must exceed 1, got {l}")));
    }
    let (x_hat, sigma) = laplace_point(model, t)?;
    let big_l = if l.is_infinite() {
        f64::INFINITY
    } else {
        l.cbrt() / std::f64::consts::SQRT_2
    };
    let a = alpha as usize;
    let j = truncated_gaussian_moments(big_l, a + 3);
    let skew = model.h2(x_hat) * sigma.powi(3) / 6.0;
    Ok(j[a] - skew * j[a + 3])
}

/// Exact cumulants of `π_t` by quadrature.
pub fn moments_exact(model: &DensityModel, t: f64) -> Result<Moments> {
    Ok(tilted_pass(model, t)?.moments())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsymptoticOrder {
    /// `(ψ, ψ', ((M₆-9)/6)ψ'')`.
    Leading,
    /// As `Leading`, with `m = x̂ - h''(x̂)σ⁴/2`.
    Refined,
}

pub fn moments_asymptotic(
    model: &DensityModel,
    t: f64,
    order: AsymptoticOrder,
) -> Result<Moments> {
    let x_hat = model.psi(t)?;
    let d1 = model.h1(x_hat);
    let d2 = model.h2(x_hat);
    let psi1 = 1.0 / d1;
    let psi2 = -d2 / (d1 * d1 * d1);
    let m = match order {
        AsymptoticOrder::Leading => x_hat,
        AsymptoticOrder::Refined => x_hat - d2 * psi1 * psi1 / 2.0,
    };
    Ok(Moments {
        m,
        s2: psi1,
        mu3: (M6 - 9.0) / 6.0 * psi2,
    })
}

/// Solves `m(t) = a` for the tilt parameter.
pub fn tilt_solve(model: &DensityModel, a: f64) -> Result<f64> {
    tilt_solve_from(model, a, None)
}

/// As [`tilt_solve`], starting Newton from `warm` when given.
pub fn tilt_solve_from(model: &DensityModel, a: f64, warm: Option<f64>) -> Result<f64> {
    let base_mean = moments_exact(model, 0.0)?.m;
    if !(a > base_mean) || !a.is_finite() {
        return Err(Error::BelowMean {
            target: a,
            base_mean,
        });
    }
    // ψ^{-1} = h, so h(a) is where m(t) ≈ a for large a
    let h_a = model.h(a);
    let rough = if h_a.is_finite() && h_a > 0.0 { h_a } else { 1.0 };
    let guess = warm.filter(|w| w.is_finite() && *w > 0.0).unwrap_or(rough);
    let hi = roots::expand_upper(
        |t| Ok(moments_exact(model, t)?.m),
        a,
        guess.max(1e-3),
        1e300,
    )?;
    let lo = if hi > guess.max(1e-3) { hi * 0.5 } else { 0.0 };
    let lo = if lo > 0.0 && moments_exact(model, lo)?.m > a {
        0.0
    } else {
        lo
    };
    roots::solve_increasing(
        |t| {
            let mo = moments_exact(model, t)?;
            Ok((mo.m, mo.s2))
        },
        a,
        lo,
        hi,
        guess,
        Tolerance {
            f_abs: 1e-8 * a.abs(),
            x_rel: 1e-13,
        },
    )
}

/// `μ₃/s³` of `π_t`.
pub fn skewness(model: &DensityModel, t: f64) -> Result<f64> {
    Ok(moments_exact(model, t)?.skewness())
}

/// Quantities that must vanish as `t → ∞` for the Laplace expansion to hold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    /// `h''(x̂)σ³`
    pub h2_sigma3: f64,
    /// `h''(x̂)σ⁴`
    pub h2_sigma4: f64,
    /// `|log σ| / ∫₁^t ψ(u) du`
    pub log_sigma_over_k: f64,
    /// `sup_{|x| ≤ σl} h'''(x̂ + x)·σ⁴l⁴` with `l = (ln t)³`
    pub sup_h3_window: f64,
}

/// Slowly varying cutoff `l(t) = (ln t)³`.
pub fn default_cutoff(t: f64) -> f64 {
    t.ln().powi(3)
}

pub fn diagnostics(model: &DensityModel, t: f64) -> Result<Diagnostics> {
    let (x_hat, sigma) = laplace_point(model, t)?;
    let h2 = model.h2(x_hat);
    // K(x̂(t), t) - K(x̂(1), 1) = ∫₁^t ψ(u) du since dK(x̂(t), t)/dt = ψ(t)
    let x_one = model.psi(1.0)?;
    let integral_psi = (t * x_hat - model.g(x_hat)) - (x_one - model.g(x_one));
    let l = default_cutoff(t);
    let reach = sigma * l;
    let sup_h3 = (0..=200)
        .map(|i| x_hat - reach + 2.0 * reach * i as f64 / 200.0)
        .filter(|&x| x > model.x_min())
        .map(|x| model.h3(x))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(Diagnostics {
        h2_sigma3: h2 * sigma.powi(3),
        h2_sigma4: h2 * sigma.powi(4),
        log_sigma_over_k: sigma.ln().abs() / integral_psi,
        sup_h3_window: sup_h3 * sigma.powi(4) * l.powi(4),
    })
}
