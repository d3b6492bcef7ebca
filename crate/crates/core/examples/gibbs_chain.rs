//! Tilt chains for a block of coordinates conditioned on an extreme sum,
//! and the z-diagnostics along an admissible schedule.
//!
//! cargo run --release --example gibbs_chain

use gibbs_tilt::edgeworth::{PowerSchedule, TiltedLaw};
use gibbs_tilt::gibbs;
use gibbs_tilt::model::DensityModel;

fn main() -> gibbs_tilt::Result<()> {
    let model = DensityModel::weibull(2.0)?;
    let chain = gibbs::build_chain(&model, 4.0, 200, &[4.0, 4.2, 3.9])?;
    print!("{}", chain.table().to_csv_string()?);

    let schedule = PowerSchedule::for_weibull(2.0, 0.3, 0.05);
    println!("\n{:>9} {:>7} {:>9} {:>11} {:>14}", "n", "a_n", "growth", "max|z|", "|gm - gan|");
    for n in [1_000, 10_000, 100_000, 1_000_000] {
        let a = schedule.a_n(n);
        let s = TiltedLaw::at_mean(&model, a)?.s();
        let chain = gibbs::build_chain(&model, a, n, &[a + s, a - s])?;
        let growth = gibbs::growth_condition(&model, a, n)?;
        println!(
            "{n:>9} {a:>7.3} {:>9.4} {:>11.3e} {:>14.3e}",
            growth.value,
            gibbs::z_smallness_check(&chain).max_abs_z,
            (chain.log_g_m - chain.log_g_an).abs()
        );
    }
    Ok(())
}
