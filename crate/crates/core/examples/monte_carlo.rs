//! Slab-conditioned Monte Carlo against the tilted product densities.
//!
//! cargo run --release --example monte_carlo

use gibbs_tilt::edgeworth::TiltedLaw;
use gibbs_tilt::model::DensityModel;
use gibbs_tilt::{gibbs, mc};

fn main() -> gibbs_tilt::Result<()> {
    let model = DensityModel::weibull(2.0)?;
    let (a, n, seed) = (3.0, 200, 42);
    let law = TiltedLaw::at_mean(&model, a)?;
    let s = law.s();
    let y = [a + s, a - s];
    let chain = gibbs::build_chain(&model, a, n, &y)?;
    let est = mc::conditional_density_mc(&model, a, n, &y, mc::default_delta(s, n), 100_000, seed)?;
    let g = chain.log_g_m.exp();
    println!(
        "density at y = ({:.3}, {:.3}): MC {:.5} ± {:.5}, tilted product {:.5}, ratio {:.4}",
        y[0],
        y[1],
        est.value,
        est.stderr,
        g,
        est.value / g
    );

    let draws = mc::sample_tilted(&model, law.t(), 100_000, seed)?;
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    println!("sampler mean {mean:.5} vs exact {:.5}", law.moments().m);

    for n in [4, 400] {
        let c = mc::independence_check(&model, a, n, 100_000, seed)?;
        println!("corr(X1, X2 | slab), n = {n}: {:+.4} ± {:.4}", c.value, c.stderr);
    }
    Ok(())
}
