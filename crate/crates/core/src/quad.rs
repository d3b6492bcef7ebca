//! Panel-based Gauss–Kronrod quadrature for sharply peaked integrands.
//!
//! Integrands in this crate are of the form `exp(L(x))·w(x)` where `L`
//! can reach thousands of nats. Callers subtract a reference log value
//! before exponentiating, so everything the integrator sees is `O(1)`
//! near the peak. The layout is fixed: a core window `center ± 12·scale`
//! cut into 24 equal panels, then geometrically growing tail panels on
//! each side until their contribution drops below `1e-13` of the running
//! absolute total. Each panel is refined by bisection until the
//! Kronrod/Gauss difference is negligible against the whole integral, or
//! until halving stops shrinking it (rounding noise in the integrand).

use crate::error::{Error, Result};

/// 21-point Kronrod abscissae on `[-1, 1]` (non-negative half, descending).
const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_2,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_73,
    0.054_755_896_574_352,
    0.075_039_674_810_919_95,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_85,
    0.134_709_217_311_473_33,
    0.142_775_938_577_060_08,
    0.147_739_104_901_338_5,
    0.149_445_554_002_916_9,
];

/// 10-point Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

pub const CORE_HALF_WIDTH: f64 = 12.0;
pub const CORE_PANELS: usize = 24;
const TAIL_REL_TOL: f64 = 1e-13;
const REFINE_REL_TOL: f64 = 1e-15;
const MAX_TAIL_PANELS: usize = 400;
const MAX_DEPTH: u32 = 24;
const STALL_MIN_DEPTH: u32 = 3;

/// Where to place the panels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    /// Lower end of the support (`f64::NEG_INFINITY` for the whole line).
    pub lower: f64,
    pub center: f64,
    /// Natural width of the peak; the core spans `center ± 12·scale`.
    pub scale: f64,
}

impl Window {
    pub fn new(lower: f64, center: f64, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) || !center.is_finite() || center < lower {
            return Err(Error::InvalidParameter(format!(
                "quadrature window needs lower <= center and a finite positive scale \
                 (lower={lower}, center={center}, scale={scale})"
            )));
        }
        Ok(Self {
            lower,
            center,
            scale,
        })
    }

    /// Boundaries of the 24 core panels, clipped to the support.
    pub fn core_edges(&self) -> Vec<f64> {
        let left = (self.center - CORE_HALF_WIDTH * self.scale).max(self.lower);
        let right = self.center + CORE_HALF_WIDTH * self.scale;
        let step = (right - left) / CORE_PANELS as f64;
        (0..=CORE_PANELS)
            .map(|i| if i == CORE_PANELS { right } else { left + step * i as f64 })
            .collect()
    }
}

/// One Gauss–Kronrod evaluation of a vector-valued integrand.
#[derive(Debug, Clone, Copy)]
pub struct PanelEstimate<const N: usize> {
    pub value: [f64; N],
    pub error: [f64; N],
    pub abs: [f64; N],
}

pub fn gk21<const N: usize, F>(f: &F, a: f64, b: f64) -> PanelEstimate<N>
where
    F: Fn(f64) -> [f64; N],
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = [0.0; N];
    let mut gauss = [0.0; N];
    let mut abs = [0.0; N];
    for j in 0..N {
        kronrod[j] = WGK[10] * fc[j];
        abs[j] = WGK[10] * fc[j].abs();
    }
    for i in 0..10 {
        let dx = half * XGK[i];
        let lo = f(center - dx);
        let hi = f(center + dx);
        for j in 0..N {
            let sum = lo[j] + hi[j];
            kronrod[j] += WGK[i] * sum;
            abs[j] += WGK[i] * (lo[j].abs() + hi[j].abs());
            if i % 2 == 1 {
                gauss[j] += WG[i / 2] * sum;
            }
        }
    }
    let mut error = [0.0; N];
    for j in 0..N {
        error[j] = ((kronrod[j] - gauss[j]) * half).abs();
        kronrod[j] *= half;
        abs[j] *= half.abs();
    }
    PanelEstimate {
        value: kronrod,
        error,
        abs,
    }
}

/// Result of [`integrate`]: the integral and the integral of its absolute value.
#[derive(Debug, Clone, Copy)]
pub struct Integral<const N: usize> {
    pub value: [f64; N],
    pub abs: [f64; N],
}

fn refine<const N: usize, F>(
    f: &F,
    a: f64,
    b: f64,
    est: PanelEstimate<N>,
    scale: &[f64; N],
    depth: u32,
    out: &mut [f64; N],
) where
    F: Fn(f64) -> [f64; N],
{
    let converged = (0..N).all(|j| est.error[j] <= REFINE_REL_TOL * scale[j]);
    if converged || depth >= MAX_DEPTH {
        for j in 0..N {
            out[j] += est.value[j];
        }
        return;
    }
    let mid = 0.5 * (a + b);
    let left = gk21(f, a, mid);
    let right = gk21(f, mid, b);
    // bisection that no longer shrinks the error estimate is resolving rounding noise
    let stalled = depth >= STALL_MIN_DEPTH
        && (0..N).all(|j| {
            est.error[j] <= REFINE_REL_TOL * scale[j]
                || left.error[j] + right.error[j] >= 0.5 * est.error[j]
        });
    if stalled {
        for j in 0..N {
            out[j] += left.value[j] + right.value[j];
        }
        return;
    }
    refine(f, a, mid, left, scale, depth + 1, out);
    refine(f, mid, b, right, scale, depth + 1, out);
}

fn check_finite<const N: usize>(est: &PanelEstimate<N>, a: f64, b: f64) -> Result<()> {
    if est.value.iter().chain(est.abs.iter()).all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonIntegrable(format!(
            "non-finite integrand on panel [{a}, {b}]"
        )))
    }
}

/// Integrates `f` over `[window.lower, ∞)` with the fixed panel layout.
///
/// `f` must already be scaled so that its values near the peak are `O(1)`.
pub fn integrate<const N: usize, F>(f: F, window: &Window) -> Result<Integral<N>>
where
    F: Fn(f64) -> [f64; N],
{
    let edges = window.core_edges();
    let mut panels: Vec<(f64, f64, PanelEstimate<N>)> = Vec::with_capacity(CORE_PANELS + 64);
    let mut abs_total = [0.0; N];
    for w in edges.windows(2) {
        let est = gk21(&f, w[0], w[1]);
        check_finite(&est, w[0], w[1])?;
        for j in 0..N {
            abs_total[j] += est.abs[j];
        }
        panels.push((w[0], w[1], est));
    }

    let negligible = |est: &PanelEstimate<N>, total: &[f64; N]| {
        (0..N).all(|j| est.abs[j] <= TAIL_REL_TOL * total[j])
    };

    // right tail
    let mut a = edges[CORE_PANELS];
    let mut width = window.scale;
    let mut converged = false;
    for _ in 0..MAX_TAIL_PANELS {
        let b = a + width;
        let est = gk21(&f, a, b);
        check_finite(&est, a, b)?;
        for j in 0..N {
            abs_total[j] += est.abs[j];
        }
        let done = negligible(&est, &abs_total);
        panels.push((a, b, est));
        if done {
            converged = true;
            break;
        }
        a = b;
        width *= 2.0;
    }
    if !converged {
        return Err(Error::NonIntegrable(format!(
            "right tail still contributing after {MAX_TAIL_PANELS} panels (reached x={a})"
        )));
    }

    // left tail, down to the support boundary
    let mut b = edges[0];
    let mut width = window.scale;
    let mut steps = 0;
    while b > window.lower {
        let a = (b - width).max(window.lower);
        let est = gk21(&f, a, b);
        check_finite(&est, a, b)?;
        for j in 0..N {
            abs_total[j] += est.abs[j];
        }
        let done = negligible(&est, &abs_total);
        panels.push((a, b, est));
        if done {
            break;
        }
        b = a;
        width *= 2.0;
        steps += 1;
        if steps > MAX_TAIL_PANELS {
            return Err(Error::NonIntegrable(
                "left tail still contributing".to_string(),
            ));
        }
    }

    // refinement pass, summed in panel order
    let mut scale = [0.0; N];
    for j in 0..N {
        scale[j] = if abs_total[j] > 0.0 {
            abs_total[j]
        } else {
            f64::MIN_POSITIVE
        };
    }
    let mut value = [0.0; N];
    for (a, b, est) in panels {
        let mut part = [0.0; N];
        refine(&f, a, b, est, &scale, 0, &mut part);
        for j in 0..N {
            value[j] += part[j];
        }
    }
    Ok(Integral {
        value,
        abs: abs_total,
    })
}

/// A real number stored as a sign and the log of its magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLog {
    /// `-1.0`, `0.0` or `1.0`.
    pub sign: f64,
    pub log_abs: f64,
}

impl SignedLog {
    pub fn zero() -> Self {
        Self {
            sign: 0.0,
            log_abs: f64::NEG_INFINITY,
        }
    }

    /// `value·exp(log_scale)` without forming `exp(log_scale)`.
    pub fn from_scaled(value: f64, log_scale: f64) -> Self {
        if value == 0.0 {
            Self::zero()
        } else {
            Self {
                sign: value.signum(),
                log_abs: value.abs().ln() + log_scale,
            }
        }
    }

    /// Converts back to a plain float; overflows to ±∞ when too large.
    pub fn value(&self) -> f64 {
        if self.sign == 0.0 {
            0.0
        } else {
            self.sign * self.log_abs.exp()
        }
    }

    /// `self / other` as a plain float.
    pub fn ratio(&self, other: &SignedLog) -> f64 {
        if self.sign == 0.0 {
            0.0
        } else {
            self.sign * other.sign * (self.log_abs - other.log_abs).exp()
        }
    }
}

/// Finds a width `w` such that `log_f` drops by about half a nat from
/// `center` within `w`, looking right and (if room) left. Used when no
/// analytic curvature is available.
pub fn width_from_log<F: Fn(f64) -> f64>(log_f: &F, lower: f64, center: f64) -> f64 {
    let peak = log_f(center);
    let drop_at = |w: f64| -> f64 {
        let right = peak - log_f(center + w);
        let left = if center - w >= lower {
            peak - log_f(center - w)
        } else {
            f64::INFINITY
        };
        right.min(left)
    };
    let mut lo = 0.0;
    let mut hi = (center.abs() * 1e-8).max(1e-12);
    while drop_at(hi) < 0.5 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return hi;
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if drop_at(mid) < 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-3 * hi {
            break;
        }
    }
    hi
}
