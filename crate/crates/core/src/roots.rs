//! Safeguarded Newton iteration for increasing functions.

use crate::error::{Error, Result};

const MAX_ITER: usize = 200;

/// Stopping rule for [`solve_increasing`].
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    /// Required `|f(x) - target|`.
    pub f_abs: f64,
    /// Once `f_abs` is met, keep polishing until the step is below
    /// `x_rel·max(1, |x|)`.
    pub x_rel: f64,
}

/// Solves `f(x) = target` for a strictly increasing `f` on `[lo, hi]`.
///
/// `eval` returns `(f(x), f'(x))`. Newton steps that leave the current
/// bracket, or fail to halve it, are replaced by bisection. The caller
/// must supply a valid bracket: `f(lo) <= target <= f(hi)`.
pub fn solve_increasing<F>(
    mut eval: F,
    target: f64,
    mut lo: f64,
    mut hi: f64,
    guess: f64,
    tol: Tolerance,
) -> Result<f64>
where
    F: FnMut(f64) -> Result<(f64, f64)>,
{
    if !(lo < hi) {
        return Err(Error::RootNotFound(format!("empty bracket [{lo}, {hi}]")));
    }
    let mut x = if guess > lo && guess < hi {
        guess
    } else {
        0.5 * (lo + hi)
    };
    let mut dx_old = hi - lo;
    for _ in 0..MAX_ITER {
        let (fx, dfx) = eval(x)?;
        let resid = fx - target;
        if resid == 0.0 {
            return Ok(x);
        }
        if resid < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - resid / dfx;
        let newton_ok = dfx > 0.0 && newton.is_finite() && newton > lo && newton < hi;
        // bisect when Newton leaves the bracket or is not shrinking the step fast enough
        let (next, dx) = if !newton_ok || (2.0 * resid).abs() > (dx_old * dfx).abs() {
            let half = 0.5 * (hi - lo);
            (lo + half, half)
        } else {
            (newton, (resid / dfx).abs())
        };
        dx_old = dx;
        if resid.abs() <= tol.f_abs && dx <= tol.x_rel * x.abs().max(1.0) {
            return Ok(next);
        }
        if hi - lo <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
            if resid.abs() <= tol.f_abs {
                return Ok(x);
            }
            return Err(Error::RootNotFound(format!(
                "bracket collapsed at x={x} with residual {resid:e}"
            )));
        }
        x = next;
    }
    Err(Error::RootNotFound(format!(
        "no convergence after {MAX_ITER} iterations (bracket [{lo}, {hi}])"
    )))
}

/// Grows `hi` geometrically from `start` until `f(hi) >= target`.
pub fn expand_upper<F>(mut f: F, target: f64, start: f64, limit: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut hi = start;
    loop {
        if f(hi)? >= target {
            return Ok(hi);
        }
        if hi >= limit {
            return Err(Error::RootNotFound(format!(
                "could not bracket target {target} below {limit}"
            )));
        }
        hi = (hi * 2.0).max(hi + 1.0).min(limit);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: Tolerance = Tolerance {
        f_abs: 1e-12,
        x_rel: 1e-14,
    };

    #[test]
    fn cube_root() {
        let x = solve_increasing(|x| Ok((x * x * x, 3.0 * x * x)), 27.0, 0.0, 10.0, 9.0, TOL).unwrap();
        assert!((x - 3.0).abs() < 1e-13);
    }

    #[test]
    fn flat_derivative_falls_back_to_bisection() {
        // f' vanishes at the root, so Newton alone converges linearly at best.
        let x = solve_increasing(
            |x: f64| Ok(((x - 1.0).powi(3), 0.0)),
            0.0,
            -3.0,
            4.0,
            2.0,
            Tolerance {
                f_abs: 1e-15,
                x_rel: 1e-12,
            },
        )
        .unwrap();
        assert!((x - 1.0).abs() < 1e-4);
    }

    #[test]
    fn expand_finds_bracket() {
        let hi = expand_upper(|x| Ok(x.ln()), 10.0, 1.0, 1e9).unwrap();
        assert!(hi.ln() >= 10.0);
        assert!(expand_upper(|x| Ok(x.ln()), 100.0, 1.0, 1e9).is_err());
    }
}
