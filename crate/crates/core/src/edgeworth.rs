//! Normalized tilted densities, their Edgeworth approximation, and a
//! Fourier-inversion oracle for the density of normalized sums.
//!
//! With `t` solving `m(t) = a` and `s² = s²(t)`, the normalized tilted
//! density is `π̄(x) = s·π_t(sx + a)`. For `n` i.i.d. draws from `π_t` the
//! normalized sum `(S - na)/(s√n)` has density `ρ_n`, approximated by
//!
//! ```text
//! ρ̂_n(x) = φ(x)·(1 + μ₃/(6√n·s³)·(x³ - 3x))
//! ```

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::DensityModel;
use crate::quad::{self, Window};
use crate::report::{num, Table};
use crate::tilt::{self, Moments};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Fourier step in `τ`.
pub const TAU_STEP: f64 = 0.01;
/// `|φ(τ/√n)|^n` below which the inversion integral is truncated.
pub const CF_CUTOFF: f64 = 1e-14;
/// Largest `τ/√n` the oracle is willing to reach before giving up.
pub const MAX_SCALED_TAU: f64 = 100.0;

pub fn std_normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// `π_t` for one fixed tilt, with everything needed to evaluate it cheaply.
#[derive(Debug, Clone)]
pub struct TiltedLaw {
    model: DensityModel,
    t: f64,
    a: f64,
    moments: Moments,
    window: Window,
    kernel_center: f64,
    log_mass: f64,
}

impl TiltedLaw {
    /// Tilt chosen so that the mean equals `a`.
    pub fn at_mean(model: &DensityModel, a: f64) -> Result<Self> {
        let t = tilt::tilt_solve(model, a)?;
        let mut law = Self::at_tilt(model, t)?;
        law.a = a;
        Ok(law)
    }

    /// Tilt `t`, normalized about the exact mean `m(t)`.
    pub fn at_tilt(model: &DensityModel, t: f64) -> Result<Self> {
        let pass = tilt::tilted_pass(model, t)?;
        let moments = pass.moments();
        Ok(Self {
            model: model.clone(),
            t,
            a: moments.m,
            moments,
            window: pass.window,
            kernel_center: model.log_kernel(pass.window.center),
            log_mass: pass.integrals[0].ln(),
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// Centering constant of `π̄`.
    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn moments(&self) -> Moments {
        self.moments
    }

    pub fn s(&self) -> f64 {
        self.moments.s()
    }

    /// Quadrature window of `π_t` in the original coordinates.
    pub fn window(&self) -> Window {
        self.window
    }

    /// `log π_t(x)`; `-∞` off the support.
    pub fn log_pdf(&self, x: f64) -> f64 {
        let c = self.window.center;
        self.t * (x - c) + self.model.log_kernel(x) - self.kernel_center - self.log_mass
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.log_pdf(x).exp()
    }

    /// `π̄(x) = s·π_t(sx + a)`; zero where `sx + a` leaves the support.
    pub fn normalized_pdf(&self, x: f64) -> f64 {
        let s = self.s();
        s * self.pdf(s * x + self.a)
    }

    /// Quadrature window of `π̄` in normalized coordinates.
    pub fn normalized_window(&self) -> Window {
        let s = self.s();
        Window {
            lower: (self.window.lower - self.a) / s,
            center: (self.window.center - self.a) / s,
            scale: self.window.scale / s,
        }
    }

    /// `E exp(iτ X̄)` for `X̄ ~ π̄`.
    pub fn charfn(&self, tau: f64) -> Result<Complex64> {
        if tau == 0.0 {
            return Ok(Complex64::new(1.0, 0.0));
        }
        if tau < 0.0 {
            return Ok(self.charfn(-tau)?.conj());
        }
        let s = self.s();
        let a = self.a;
        let r = quad::integrate(
            |x| {
                let w = self.pdf(x);
                let (sin, cos) = (tau * (x - a) / s).sin_cos();
                [w, w * cos, w * sin]
            },
            &self.window,
        )?;
        let [mass, re, im] = r.value;
        Ok(Complex64::new(re / mass, im / mass))
    }

    /// `∫ f(x) π̄(x) dx` for a vector of test functions.
    pub fn normalized_expectation<const N: usize, F>(&self, f: F) -> Result<[f64; N]>
    where
        F: Fn(f64) -> [f64; N],
    {
        let w = self.normalized_window();
        let r = quad::integrate(
            |x| {
                let p = self.normalized_pdf(x);
                let v = f(x);
                std::array::from_fn(|i| v[i] * p)
            },
            &w,
        )?;
        Ok(r.value)
    }

    /// `φ(x)(1 + μ₃/(6√n s³)(x³ - 3x))`.
    pub fn edgeworth(&self, n: usize, x: f64) -> f64 {
        let k = self.moments.skewness() / (6.0 * (n as f64).sqrt());
        std_normal_pdf(x) * (1.0 + k * (x * x * x - 3.0 * x))
    }
}

/// `π_t(x) = e^{tx} p(x) / Φ(t)`.
pub fn tilted_pdf(model: &DensityModel, t: f64, x: f64) -> Result<f64> {
    Ok(TiltedLaw::at_tilt(model, t)?.pdf(x))
}

pub fn normalized_tilted_pdf(model: &DensityModel, a_n: f64, x: f64) -> Result<f64> {
    Ok(TiltedLaw::at_mean(model, a_n)?.normalized_pdf(x))
}

pub fn edgeworth_density(model: &DensityModel, a_n: f64, n: usize, x: f64) -> Result<f64> {
    check_n(n)?;
    Ok(TiltedLaw::at_mean(model, a_n)?.edgeworth(n, x))
}

pub fn charfn(model: &DensityModel, a_n: f64, tau: f64) -> Result<Complex64> {
    TiltedLaw::at_mean(model, a_n)?.charfn(tau)
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    Ok(())
}

/// Tabulated `φ(τ_j/√n)^n` on `τ_j = j·TAU_STEP`, ready for inversion.
#[derive(Debug, Clone)]
pub struct FourierOracle {
    n: usize,
    values: Vec<Complex64>,
}

impl FourierOracle {
    pub fn new(law: &TiltedLaw, n: usize) -> Result<Self> {
        check_n(n)?;
        let root_n = (n as f64).sqrt();
        let power = |tau: f64| -> Result<Complex64> {
            let c = law.charfn(tau / root_n)?;
            if !(c.norm() <= 1.0 + 1e-9) {
                return Err(Error::OracleFailure(format!(
                    "|charfn({})| = {} exceeds 1",
                    tau / root_n,
                    c.norm()
                )));
            }
            Ok(c.powu(n as u32))
        };
        const BLOCK: usize = 256;
        let mut values: Vec<Complex64> = Vec::new();
        loop {
            let start = values.len();
            if start as f64 * TAU_STEP / root_n > MAX_SCALED_TAU {
                return Err(Error::OracleFailure(format!(
                    "characteristic function still above {CF_CUTOFF:e} at tau/sqrt(n) = {MAX_SCALED_TAU}"
                )));
            }
            let block: Vec<Complex64> = (start..start + BLOCK)
                .into_par_iter()
                .map(|j| power(j as f64 * TAU_STEP))
                .collect::<Result<_>>()?;
            if let Some(stop) = block.iter().position(|c| c.norm() < CF_CUTOFF) {
                values.extend_from_slice(&block[..stop]);
                return Ok(Self { n, values });
            }
            values.extend(block);
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Largest `τ` kept by the truncation.
    pub fn tau_max(&self) -> f64 {
        (self.values.len().saturating_sub(1)) as f64 * TAU_STEP
    }

    /// `ρ_n(x) = (1/2π)∫ e^{-iτx} φ(τ/√n)^n dτ` by the trapezoid rule.
    /// Conjugate symmetry folds the integral onto `τ ≥ 0`, where only the
    /// real part survives.
    pub fn density(&self, x: f64) -> f64 {
        let step = Complex64::from_polar(1.0, -TAU_STEP * x);
        let mut rot = Complex64::new(1.0, 0.0);
        let mut sum = 0.5 * self.values[0].re;
        for (j, v) in self.values.iter().enumerate().skip(1) {
            // re-anchor the rotation periodically to stop drift
            rot = if j % 64 == 0 {
                Complex64::from_polar(1.0, -(j as f64) * TAU_STEP * x)
            } else {
                rot * step
            };
            sum += (rot * v).re;
        }
        sum * TAU_STEP / std::f64::consts::PI
    }

    pub fn densities(&self, xs: &[f64]) -> Vec<f64> {
        xs.par_iter().map(|&x| self.density(x)).collect()
    }
}

pub fn convolution_density_oracle(
    model: &DensityModel,
    a_n: f64,
    n: usize,
    x_grid: &[f64],
) -> Result<Vec<f64>> {
    let law = TiltedLaw::at_mean(model, a_n)?;
    Ok(FourierOracle::new(&law, n)?.densities(x_grid))
}

/// Convolves the oracle at `n` with itself in `x`-space and compares with
/// the oracle at `2n`:
/// `ρ_{2n}(x) = √2 ∫ ρ_n(y) ρ_n(√2x - y) dy`. Returns the largest
/// absolute discrepancy over `x_grid`.
pub fn doubling_discrepancy(law: &TiltedLaw, n: usize, x_grid: &[f64]) -> Result<f64> {
    let single = FourierOracle::new(law, n)?;
    let double = FourierOracle::new(law, 2 * n)?;
    let h = 0.01;
    let half = 1600;
    let ys: Vec<f64> = (-half..=half).map(|i| i as f64 * h).collect();
    let rho_y = single.densities(&ys);
    let diffs: Vec<f64> = x_grid
        .par_iter()
        .map(|&x| {
            let shifted = std::f64::consts::SQRT_2 * x;
            let conv: f64 = ys
                .iter()
                .zip(&rho_y)
                .map(|(&y, &ry)| ry * single.density(shifted - y))
                .sum::<f64>()
                * h;
            (std::f64::consts::SQRT_2 * conv - double.density(x)).abs()
        })
        .collect();
    Ok(diffs.into_iter().fold(0.0, f64::max))
}

/// `∫|φ(τ)|² dτ` against `2π∫π̄²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParsevalReport {
    pub fourier_side: f64,
    pub density_side: f64,
    pub rel_err: f64,
}

pub fn parseval_check(law: &TiltedLaw) -> Result<ParsevalReport> {
    let oracle = FourierOracle::new(law, 1)?;
    // trapezoid on the symmetric domain, truncated where |φ| < 1e-14
    let fourier_side = 2.0
        * TAU_STEP
        * (oracle
            .values
            .iter()
            .map(|v| v.norm_sqr())
            .sum::<f64>()
            - 0.5);
    let [sq] = {
        let w = law.normalized_window();
        quad::integrate(
            |x| {
                let p = law.normalized_pdf(x);
                [p * p]
            },
            &w,
        )?
        .value
    };
    let density_side = 2.0 * std::f64::consts::PI * sq;
    Ok(ParsevalReport {
        fourier_side,
        density_side,
        rel_err: ((fourier_side - density_side) / density_side).abs(),
    })
}

/// Sup-norm comparison of `ρ̂_n` with the oracle `ρ_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeworthResult {
    pub a_n: f64,
    pub n: usize,
    pub x_grid: Vec<f64>,
    pub rho_hat: Vec<f64>,
    pub rho_oracle: Vec<f64>,
    pub sup_err: f64,
    /// `√n · sup_err`
    pub scaled_err: f64,
}

impl EdgeworthResult {
    /// Smallest value of `ρ̂_n` on the grid. The expansion may dip below 0.
    pub fn min_rho_hat(&self) -> f64 {
        self.rho_hat.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn table(&self, family: &str) -> Table {
        let mut t = Table::new(&["x", "rho_hat", "rho_oracle", "abs_err"]);
        t.comment(format!("family = {family}"))
            .comment(format!("a_n = {}", self.a_n))
            .comment(format!("n = {}", self.n))
            .comment(format!("scaled_err = {}", self.scaled_err));
        for i in 0..self.x_grid.len() {
            t.push_row(vec![
                num(self.x_grid[i]),
                num(self.rho_hat[i]),
                num(self.rho_oracle[i]),
                num((self.rho_hat[i] - self.rho_oracle[i]).abs()),
            ]);
        }
        t
    }
}

/// Uniform grid on `[lo, hi]` with `count` points.
pub fn uniform_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let step = (hi - lo) / (count - 1) as f64;
    (0..count)
        .map(|i| if i + 1 == count { hi } else { lo + step * i as f64 })
        .collect()
}

/// The default scan grid: `[-5, 5]` with step 0.05.
pub fn default_x_grid() -> Vec<f64> {
    uniform_grid(-5.0, 5.0, 201)
}

fn check_scan_grid(x_grid: &[f64]) -> Result<()> {
    let covers = x_grid.first().is_some_and(|&lo| lo <= -5.0)
        && x_grid.last().is_some_and(|&hi| hi >= 5.0);
    let fine = x_grid.windows(2).all(|w| w[1] > w[0] && w[1] - w[0] <= 0.05 + 1e-12);
    if covers && fine {
        Ok(())
    } else {
        Err(Error::InvalidParameter(
            "scan grid must be increasing, cover [-5, 5] and have step <= 0.05".into(),
        ))
    }
}

pub fn sup_error_scan_law(law: &TiltedLaw, n: usize, x_grid: &[f64]) -> Result<EdgeworthResult> {
    check_scan_grid(x_grid)?;
    let oracle = FourierOracle::new(law, n)?;
    let rho_oracle = oracle.densities(x_grid);
    let rho_hat: Vec<f64> = x_grid.iter().map(|&x| law.edgeworth(n, x)).collect();
    let sup_err = rho_hat
        .iter()
        .zip(&rho_oracle)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(EdgeworthResult {
        a_n: law.a(),
        n,
        x_grid: x_grid.to_vec(),
        rho_hat,
        rho_oracle,
        sup_err,
        scaled_err: (n as f64).sqrt() * sup_err,
    })
}

pub fn sup_error_scan(
    model: &DensityModel,
    a_n: f64,
    n: usize,
    x_grid: &[f64],
) -> Result<EdgeworthResult> {
    let law = TiltedLaw::at_mean(model, a_n)?;
    sup_error_scan_law(&law, n, x_grid)
}

/// `a_n = a₀·n^{exponent}`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PowerSchedule {
    pub a0: f64,
    pub exponent: f64,
}

impl PowerSchedule {
    /// `a₀·n^{1/(2k) - δ}`, which keeps `a_n^k/√n → 0`.
    pub fn for_weibull(k: f64, a0: f64, delta: f64) -> Self {
        Self {
            a0,
            exponent: 1.0 / (2.0 * k) - delta,
        }
    }

    pub fn a_n(&self, n: usize) -> f64 {
        self.a0 * (n as f64).powf(self.exponent)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weibull2() -> DensityModel {
        DensityModel::weibull(2.0).unwrap()
    }

    #[test]
    fn normalized_density_has_unit_moments() {
        let law = TiltedLaw::at_mean(&weibull2(), 5.0).unwrap();
        let [m0, m1, m2] = law.normalized_expectation(|x| [1.0, x, x * x]).unwrap();
        assert!((m0 - 1.0).abs() < 1e-10);
        assert!(m1.abs() < 1e-6);
        assert!((m2 - 1.0).abs() < 1e-5);
        assert_eq!(law.normalized_pdf(-1e3), 0.0);
    }

    #[test]
    fn gaussian_family_normalizes_to_phi() {
        let law = TiltedLaw::at_mean(&DensityModel::power(1.0).unwrap(), 10.0).unwrap();
        let sup = default_x_grid()
            .iter()
            .map(|&x| (law.normalized_pdf(x) - std_normal_pdf(x)).abs())
            .fold(0.0, f64::max);
        assert!(sup < 1e-6, "{sup}");
    }

    #[test]
    fn normalized_density_approaches_phi() {
        let grid = default_x_grid();
        let sups: Vec<f64> = [2.0, 4.0, 8.0]
            .iter()
            .map(|&a| {
                let law = TiltedLaw::at_mean(&weibull2(), a).unwrap();
                grid.iter()
                    .map(|&x| (law.normalized_pdf(x) - std_normal_pdf(x)).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        assert!(sups[0] > sups[1] && sups[1] > sups[2], "{sups:?}");
    }

    #[test]
    fn edgeworth_fixed_points() {
        let m = weibull2();
        let phi0 = 0.398_942_280_401_432_7;
        assert!((edgeworth_density(&m, 5.0, 16, 0.0).unwrap() - phi0).abs() < 1e-15);
        let r3 = 3f64.sqrt();
        assert!((edgeworth_density(&m, 5.0, 16, r3).unwrap() - std_normal_pdf(r3)).abs() < 1e-15);
        let mo = tilt::moments_exact(&m, tilt::tilt_solve(&m, 5.0).unwrap()).unwrap();
        let expected = std_normal_pdf(1.0) * (1.0 - 2.0 * mo.mu3 / (24.0 * mo.s2.powf(1.5)));
        assert!((edgeworth_density(&m, 5.0, 16, 1.0).unwrap() - expected).abs() < 1e-14);
        assert!(edgeworth_density(&m, 5.0, 0, 1.0).is_err());
    }

    #[test]
    fn charfn_basics() {
        let law = TiltedLaw::at_mean(&weibull2(), 5.0).unwrap();
        assert_eq!(law.charfn(0.0).unwrap(), Complex64::new(1.0, 0.0));
        for tau in [0.3, 1.0, 4.0] {
            let c = law.charfn(tau).unwrap();
            assert!(c.norm() <= 1.0);
            assert_eq!(law.charfn(-tau).unwrap(), c.conj());
        }
        // mean zero and unit variance: φ(τ) = 1 - τ²/2 + O(τ³)
        let c = law.charfn(1e-3).unwrap();
        assert!((c.re - (1.0 - 0.5e-6)).abs() < 1e-11);
        assert!(c.im.abs() < 1e-9);
    }

    #[test]
    fn parseval_holds() {
        for a in [6.0, 8.0] {
            let law = TiltedLaw::at_mean(&weibull2(), a).unwrap();
            let r = parseval_check(&law).unwrap();
            assert!(r.rel_err < 1e-3, "{r:?}");
        }
    }

    #[test]
    fn oracle_at_one_is_the_density() {
        let law = TiltedLaw::at_mean(&weibull2(), 6.0).unwrap();
        let grid = uniform_grid(-5.0, 5.0, 41);
        let o = FourierOracle::new(&law, 1).unwrap();
        for x in grid {
            assert!((o.density(x) - law.normalized_pdf(x)).abs() < 1e-6);
        }
    }

    #[test]
    fn oracle_is_gaussian_for_gaussian_family() {
        let m = DensityModel::power(1.0).unwrap();
        let grid = uniform_grid(-5.0, 5.0, 41);
        for n in [1, 8] {
            let rho = convolution_density_oracle(&m, 10.0, n, &grid).unwrap();
            for (x, r) in grid.iter().zip(rho) {
                assert!((r - std_normal_pdf(*x)).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn oracle_moments_under_convolution() {
        let grid = uniform_grid(-12.0, 12.0, 2401);
        let rho = convolution_density_oracle(&weibull2(), 5.0, 64, &grid).unwrap();
        let h = 0.01;
        let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for (x, r) in grid.iter().zip(&rho) {
            m0 += r * h;
            m1 += x * r * h;
            m2 += x * x * r * h;
        }
        assert!((m0 - 1.0).abs() < 1e-5);
        assert!(m1.abs() < 1e-4);
        assert!((m2 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn doubling_identity() {
        let law = TiltedLaw::at_mean(&weibull2(), 3.0).unwrap();
        let d = doubling_discrepancy(&law, 4, &uniform_grid(-4.0, 4.0, 9)).unwrap();
        assert!(d < 1e-6, "{d}");
    }

    #[test]
    fn scan_trends() {
        let grid = default_x_grid();
        let m = weibull2();
        let e8 = sup_error_scan(&m, 5.0, 8, &grid).unwrap();
        let e64 = sup_error_scan(&m, 5.0, 64, &grid).unwrap();
        assert!(e64.scaled_err < e8.scaled_err);
        assert!(e8.min_rho_hat() > -1e-3);
        let integral: f64 = e8.rho_hat.iter().sum::<f64>() * 0.05;
        assert!((integral - 1.0).abs() < 1e-5);
        let p = DensityModel::power(1.0).unwrap();
        for n in [1, 8, 64] {
            assert!(sup_error_scan(&p, 10.0, n, &grid).unwrap().scaled_err < 1e-3);
        }
        assert!(sup_error_scan(&m, 5.0, 8, &uniform_grid(-5.0, 5.0, 50)).is_err());
    }

    #[test]
    fn n_one_scan_compares_density_itself() {
        let law = TiltedLaw::at_mean(&weibull2(), 6.0).unwrap();
        let grid = default_x_grid();
        let r = sup_error_scan_law(&law, 1, &grid).unwrap();
        let direct = grid
            .iter()
            .map(|&x| (law.normalized_pdf(x) - law.edgeworth(1, x)).abs())
            .fold(0.0, f64::max);
        assert!((r.sup_err - direct).abs() < 1e-6);
    }

    #[test]
    fn weibull_schedule() {
        let s = PowerSchedule::for_weibull(2.0, 2.0, 0.05);
        assert!((s.exponent - 0.2).abs() < 1e-15);
        assert!((s.a_n(32) - 4.0).abs() < 1e-12);
    }
}
