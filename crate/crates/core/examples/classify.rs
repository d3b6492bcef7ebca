//! Certify the regularity class of `h` for each builtin family.
//!
//! cargo run --example classify

use gibbs_tilt::model::{classify, default_classify_grid, DensityModel};

fn main() -> gibbs_tilt::Result<()> {
    let grid = default_classify_grid();
    for model in [
        DensityModel::weibull(2.0)?,
        DensityModel::weibull(3.5)?,
        DensityModel::exp_exp()?,
        DensityModel::power(1.0)?,
    ] {
        let report = classify(&model, &grid)?;
        println!("{:<16} {}", model.name(), report.class);
        for c in &report.checks {
            println!(
                "    {:<24} {:<5} witness {:.3e}",
                c.id.as_str(),
                if c.passed { "ok" } else { "FAIL" },
                c.witness
            );
        }
    }
    Ok(())
}
