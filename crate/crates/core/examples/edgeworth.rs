//! Edgeworth approximation of normalized sums of tilted variables,
//! judged by Fourier inversion of the characteristic function.
//!
//! cargo run --release --example edgeworth

use gibbs_tilt::edgeworth::{self, PowerSchedule, TiltedLaw};
use gibbs_tilt::model::DensityModel;

fn main() -> gibbs_tilt::Result<()> {
    let model = DensityModel::weibull(2.0)?;
    let schedule = PowerSchedule::for_weibull(2.0, 2.0, 0.05);
    let grid = edgeworth::default_x_grid();
    println!("{:>4} {:>8} {:>12} {:>14}", "n", "a_n", "sup err", "sqrt(n)*err");
    for n in [8, 16, 32, 64] {
        let r = edgeworth::sup_error_scan(&model, schedule.a_n(n), n, &grid)?;
        println!("{n:>4} {:>8.4} {:>12.4e} {:>14.4e}", r.a_n, r.sup_err, r.scaled_err);
    }

    let law = TiltedLaw::at_mean(&model, 6.0)?;
    let p = edgeworth::parseval_check(&law)?;
    println!(
        "Parseval at a = 6: {:.12} vs {:.12} (rel {:.1e})",
        p.fourier_side, p.density_side, p.rel_err
    );
    let d = edgeworth::doubling_discrepancy(&law, 8, &edgeworth::uniform_grid(-4.0, 4.0, 9))?;
    println!("oracle doubling identity n=8 -> 16: max discrepancy {d:.2e}");
    Ok(())
}
