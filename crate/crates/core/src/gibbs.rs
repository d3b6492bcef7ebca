//! Tilt chains for the conditional law of a block `X₁..X_k` given
//! `S₁ⁿ = n·a_n`.
//!
//! With `s₁ⁱ = y₁ + … + y_i`, step `i` targets the conditional mean of the
//! remaining `n - i` summands:
//!
//! ```text
//! m_i = (n·a_n - s₁ⁱ)/(n - i),   m(t_i) = m_i,
//! z_i = (m_i - y_{i+1})/(s_i·√(n - i - 1))
//! log g_m  = Σ_{i<k} log π^{m_i}(y_{i+1})
//! log g_an = Σ_{i≤k} log π^{a_n}(y_i)
//! ```
//!
//! Densities are kept in log scale.

use crate::edgeworth::TiltedLaw;
use crate::error::{Error, Result};
use crate::model::DensityModel;
use crate::report::{num, Table};
use crate::tilt;

/// Default cut-off for [`growth_condition`].
pub const DEFAULT_GROWTH_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct GibbsChain {
    pub a_n: f64,
    pub n: usize,
    pub y: Vec<f64>,
    pub t_seq: Vec<f64>,
    pub m_seq: Vec<f64>,
    pub s2_seq: Vec<f64>,
    pub z_seq: Vec<f64>,
    pub log_g_m: f64,
    pub log_g_an: f64,
}

impl GibbsChain {
    pub fn k(&self) -> usize {
        self.y.len()
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&["i", "t_i", "m_i", "s2_i", "z_i"]);
        t.comment(format!("a_n = {}", self.a_n))
            .comment(format!("n = {}", self.n))
            .comment(format!("log_g_m = {}", self.log_g_m))
            .comment(format!("log_g_an = {}", self.log_g_an));
        for i in 0..self.k() {
            t.push_row(vec![
                i.to_string(),
                num(self.t_seq[i]),
                num(self.m_seq[i]),
                num(self.s2_seq[i]),
                num(self.z_seq[i]),
            ]);
        }
        t
    }
}

/// Solves the chain of tilts. Each `t_i` is warm-started from `t_{i-1}`.
pub fn build_chain(model: &DensityModel, a_n: f64, n: usize, y: &[f64]) -> Result<GibbsChain> {
    build_chain_with(model, a_n, n, y, true)
}

/// As [`build_chain`]; `warm = false` solves every tilt from scratch.
pub fn build_chain_with(
    model: &DensityModel,
    a_n: f64,
    n: usize,
    y: &[f64],
    warm: bool,
) -> Result<GibbsChain> {
    let k = y.len();
    if k == 0 || k + 1 >= n {
        return Err(Error::InvalidParameter(format!(
            "block length k={k} must satisfy 1 <= k < n - 1 (n={n})"
        )));
    }
    if let Some(bad) = y.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::OutOfDomain {
            what: "gibbs block",
            value: *bad,
            requirement: "finite y_i >= 0".into(),
        });
    }
    let base_mean = tilt::moments_exact(model, 0.0)?.m;
    let an_law = TiltedLaw::at_mean(model, a_n)?;
    let log_g_an = y.iter().map(|&v| an_law.log_pdf(v)).sum();

    let nf = n as f64;
    let mut partial = 0.0;
    let mut prev_t: Option<f64> = None;
    let mut chain = GibbsChain {
        a_n,
        n,
        y: y.to_vec(),
        t_seq: Vec::with_capacity(k),
        m_seq: Vec::with_capacity(k),
        s2_seq: Vec::with_capacity(k),
        z_seq: Vec::with_capacity(k),
        log_g_m: 0.0,
        log_g_an,
    };
    for i in 0..k {
        let m_i = if i == 0 {
            a_n
        } else {
            (nf * a_n - partial) / (nf - i as f64)
        };
        if !(m_i > base_mean) {
            return Err(Error::InfeasibleChain {
                step: i,
                mean: m_i,
                base_mean,
            });
        }
        let t_i = if i == 0 {
            an_law.t()
        } else {
            tilt::tilt_solve_from(model, m_i, if warm { prev_t } else { None })?
        };
        let law = if i == 0 {
            an_law.clone()
        } else {
            TiltedLaw::at_tilt(model, t_i)?
        };
        let s2 = law.moments().s2;
        chain.z_seq.push((m_i - y[i]) / (s2.sqrt() * (nf - i as f64 - 1.0).sqrt()));
        chain.log_g_m += law.log_pdf(y[i]);
        chain.t_seq.push(t_i);
        chain.m_seq.push(m_i);
        chain.s2_seq.push(s2);
        partial += y[i];
        prev_t = Some(t_i);
    }
    Ok(chain)
}

/// `ψ(t)²/(√n·ψ'(t))` at the tilt of `a_n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthReport {
    pub value: f64,
    pub t: f64,
    pub pass: bool,
}

pub fn growth_condition(model: &DensityModel, a_n: f64, n: usize) -> Result<GrowthReport> {
    growth_condition_with(model, a_n, n, DEFAULT_GROWTH_THRESHOLD)
}

pub fn growth_condition_with(
    model: &DensityModel,
    a_n: f64,
    n: usize,
    threshold: f64,
) -> Result<GrowthReport> {
    let t = tilt::tilt_solve(model, a_n)?;
    let psi = model.psi(t)?;
    let value = psi * psi / ((n as f64).sqrt() * model.psi_prime(t)?);
    Ok(GrowthReport {
        value,
        t,
        pass: value < threshold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZReport {
    pub max_abs_z: f64,
    /// `√n · max_i z_i²`
    pub sqrt_n_max_z2: f64,
}

pub fn z_smallness_check(chain: &GibbsChain) -> ZReport {
    let max_abs_z = chain.z_seq.iter().map(|z| z.abs()).fold(0.0, f64::max);
    ZReport {
        max_abs_z,
        sqrt_n_max_z2: (chain.n as f64).sqrt() * max_abs_z * max_abs_z,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weibull2() -> DensityModel {
        DensityModel::weibull(2.0).unwrap()
    }

    #[test]
    fn single_step_chain_matches_theorem_four_product() {
        let m = weibull2();
        let c = build_chain(&m, 4.0, 100, &[3.7]).unwrap();
        assert_eq!(c.m_seq[0], 4.0);
        assert_eq!(c.t_seq[0], tilt::tilt_solve(&m, 4.0).unwrap());
        assert_eq!(c.log_g_m, c.log_g_an);
    }

    #[test]
    fn z_vanishes_on_the_mean_path() {
        let m = weibull2();
        let c = build_chain(&m, 4.0, 100, &[4.0]).unwrap();
        assert_eq!(c.z_seq[0], 0.0);
        // y_{i+1} = m_i keeps every conditional mean at a_n
        let c = build_chain(&m, 4.0, 100, &[4.0, 4.0, 4.0]).unwrap();
        assert!(c.z_seq.iter().all(|z| z.abs() < 1e-12));
        let r = z_smallness_check(&c);
        assert!(r.max_abs_z < 1e-12);
    }

    #[test]
    fn two_step_example() {
        let m = weibull2();
        let c = build_chain(&m, 4.0, 200, &[4.0, 4.2]).unwrap();
        assert!((c.m_seq[1] - 796.0 / 199.0).abs() < 1e-12);
        assert!((c.m_seq[1] - 4.0).abs() < 1e-3);
        assert!((c.log_g_m - c.log_g_an).abs() < 0.01);
        let mo = tilt::moments_exact(&m, c.t_seq[1]).unwrap();
        assert!((mo.m - c.m_seq[1]).abs() < 1e-7);
    }

    #[test]
    fn structural_properties() {
        let m = weibull2();
        let y = [3.1, 4.5, 3.8];
        let c = build_chain(&m, 4.0, 50, &y).unwrap();
        let rev = build_chain(&m, 4.0, 50, &[3.8, 4.5, 3.1]).unwrap();
        assert!((c.log_g_an - rev.log_g_an).abs() < 1e-12);
        let prefix = build_chain(&m, 4.0, 50, &y[..2]).unwrap();
        assert_eq!(prefix.t_seq[..], c.t_seq[..2]);
        let cold = build_chain_with(&m, 4.0, 50, &y, false).unwrap();
        for (a, b) in c.t_seq.iter().zip(&cold.t_seq) {
            assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn infeasible_and_invalid() {
        let m = weibull2();
        assert!(matches!(
            build_chain(&m, 1.0, 10, &[5.0, 1.0]),
            Err(Error::InfeasibleChain { step: 1, .. })
        ));
        assert!(build_chain(&m, 4.0, 3, &[1.0, 1.0]).is_err());
        assert!(build_chain(&m, 4.0, 30, &[]).is_err());
        assert!(build_chain(&m, 4.0, 30, &[-1.0]).is_err());
    }

    #[test]
    fn growth_examples() {
        let m = weibull2();
        let g = growth_condition(&m, 2.0, 10_000).unwrap();
        let plug_in = 4.0 * m.h1(2.0) / 100.0;
        assert!(g.value / plug_in < 1.5 && plug_in / g.value < 1.5);
        assert!(g.pass);
        assert!(growth_condition(&m, 10.0, 100).unwrap().value > 1.0);
        let p = DensityModel::power(1.0).unwrap();
        for (a, pass) in [(3.0, true), (4.0, false)] {
            let g = growth_condition(&p, a, 10_000).unwrap();
            assert!((g.value - g.t * g.t / 100.0).abs() < 1e-9);
            assert_eq!(g.pass, pass);
        }
    }

    #[test]
    fn z_grows_with_first_coordinate() {
        let m = weibull2();
        let z: Vec<f64> = [3.0, 4.0, 5.0]
            .iter()
            .map(|&y1| build_chain(&m, 4.0, 100, &[y1]).unwrap().z_seq[0])
            .collect();
        assert!(z[0] > z[1] && z[1] > z[2] && z[2] < 0.0);
    }

    #[test]
    fn chain_table_columns() {
        let c = build_chain(&weibull2(), 4.0, 100, &[4.0, 4.1]).unwrap();
        let t = c.table();
        assert_eq!(t.columns, ["i", "t_i", "m_i", "s2_i", "z_i"]);
        assert_eq!(t.rows.len(), 2);
    }
}
