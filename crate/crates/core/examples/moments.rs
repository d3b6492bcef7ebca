//! Exact tilted moments against their saddlepoint asymptotics, and the
//! Laplace approximation of the moment generating function.
//!
//! cargo run --release --example moments

use gibbs_tilt::model::DensityModel;
use gibbs_tilt::tilt::{self, AsymptoticOrder};

fn main() -> gibbs_tilt::Result<()> {
    for model in [DensityModel::weibull(2.0)?, DensityModel::exp_exp()?] {
        println!("{}", model.name());
        println!(
            "{:>6} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12} {:>10}",
            "t", "m", "psi", "s2", "psi'", "mu3", "mu3 asym", "log gap"
        );
        for t in [10.0, 30.0, 100.0, 300.0] {
            let exact = tilt::moments_exact(&model, t)?;
            let asym = tilt::moments_asymptotic(&model, t, AsymptoticOrder::Leading)?;
            let gap = tilt::log_mgf_laplace(&model, t)? - tilt::log_mgf_quadrature(&model, t)?;
            println!(
                "{t:>6} {:>12.6} {:>12.6} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {gap:>10.2e}",
                exact.m, asym.m, exact.s2, asym.s2, exact.mu3, asym.mu3
            );
        }
    }

    // solving m(t) = a and reading off the skewness of the tilted law
    let weibull = DensityModel::weibull(2.0)?;
    for a in [2.0, 5.0, 20.0] {
        let t = tilt::tilt_solve(&weibull, a)?;
        println!("weibull(2): m(t) = {a} at t = {t:.6}, skewness {:.3e}", tilt::skewness(&weibull, t)?);
    }
    Ok(())
}
