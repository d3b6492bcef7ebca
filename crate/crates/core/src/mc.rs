//! Monte Carlo checks of the conditional approximations.
//!
//! Vectors `X₁..X_n` are drawn i.i.d. from `π^{a_n}`, kept when
//! `|S/n - a_n| ≤ δ`, and the density of the first `k` coordinates among
//! the kept vectors is estimated by a product Gaussian kernel.
//!
//! Work is split into [`BATCHES`] batches; batch `b` draws from the ChaCha
//! stream `b` keyed by the seed, so results do not depend on thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::edgeworth::TiltedLaw;
use crate::error::{Error, Result};
use crate::model::DensityModel;
use crate::quad::{self, CORE_HALF_WIDTH};
use crate::report::{num, Table};

pub const BATCHES: usize = 16;
/// Smallest slab acceptance rate accepted by the estimators.
pub const MIN_ACCEPTANCE: f64 = 1e-3;
/// `δ = DELTA_FACTOR · s/(2√n)`.
pub const DELTA_FACTOR: f64 = 4.0;
/// Slab used by [`independence_check`], as a multiple of `s/√n`.
pub const INDEPENDENCE_SLAB: f64 = 0.1;

const NODES_PER_SCALE: usize = 16;

/// Default slab half-width for a law with standard deviation `s`.
pub fn default_delta(s: f64, n: usize) -> f64 {
    DELTA_FACTOR * s / (2.0 * (n as f64).sqrt())
}

fn stream(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn split(total: usize, parts: usize) -> Vec<usize> {
    (0..parts)
        .map(|b| total / parts + usize::from(b < total % parts))
        .collect()
}

/// Inverse-CDF sampler for a tilted law.
///
/// The CDF is tabulated on `x̂ ± 12σ` by Gauss–Kronrod panels and the
/// inverse is a monotone cubic Hermite interpolant with slopes `1/π_t`.
#[derive(Debug, Clone)]
pub struct TiltedSampler {
    cdf: Vec<f64>,
    x: Vec<f64>,
    slope: Vec<f64>,
}

impl TiltedSampler {
    pub fn new(law: &TiltedLaw) -> Result<Self> {
        let w = law.window();
        let lo = (w.center - CORE_HALF_WIDTH * w.scale).max(w.lower);
        let hi = w.center + CORE_HALF_WIDTH * w.scale;
        let count = 2 * CORE_HALF_WIDTH as usize * NODES_PER_SCALE;
        let step = (hi - lo) / count as f64;
        let mut xs = vec![lo];
        let mut cdf = vec![0.0];
        for i in 0..count {
            let a = lo + step * i as f64;
            let b = if i + 1 == count { hi } else { a + step };
            let piece = quad::gk21(&|x| [law.pdf(x)], a, b).value[0];
            let next = cdf[cdf.len() - 1] + piece;
            // drop nodes that carry no mass so the inverse stays a function
            if next > cdf[cdf.len() - 1] {
                xs.push(b);
                cdf.push(next);
            } else {
                let last = xs.len() - 1;
                if last == 0 {
                    xs[0] = b;
                } else {
                    xs[last] = b;
                }
            }
        }
        let total = cdf[cdf.len() - 1];
        if !(total > 0.0) || xs.len() < 3 {
            return Err(Error::NonIntegrable("tilted law has no tabulated mass".into()));
        }
        for c in cdf.iter_mut() {
            *c /= total;
        }
        let raw: Vec<f64> = xs
            .iter()
            .map(|&x| {
                let p = law.pdf(x) / total;
                if p > 0.0 { 1.0 / p } else { f64::INFINITY }
            })
            .collect();
        let mut slope = raw;
        // Fritsch–Carlson: keep both end slopes within 3× the secant
        for i in 0..xs.len() - 1 {
            let secant = (xs[i + 1] - xs[i]) / (cdf[i + 1] - cdf[i]);
            for j in [i, i + 1] {
                if !(slope[j] <= 3.0 * secant) {
                    slope[j] = 3.0 * secant;
                }
            }
        }
        Ok(Self {
            cdf,
            x: xs,
            slope,
        })
    }

    /// Quantile function at `u ∈ [0, 1]`.
    pub fn quantile(&self, u: f64) -> f64 {
        let n = self.cdf.len();
        let i = self.cdf.partition_point(|&c| c <= u).clamp(1, n - 1) - 1;
        let (f0, f1) = (self.cdf[i], self.cdf[i + 1]);
        let h = f1 - f0;
        let s = ((u - f0) / h).clamp(0.0, 1.0);
        let (x0, x1) = (self.x[i], self.x[i + 1]);
        let (d0, d1) = (self.slope[i] * h, self.slope[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * x0
            + (s3 - 2.0 * s2 + s) * d0
            + (-2.0 * s3 + 3.0 * s2) * x1
            + (s3 - s2) * d1
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }
}

/// `count` i.i.d. draws from `π_t`, reproducible from `seed`.
pub fn sample_tilted(model: &DensityModel, t: f64, count: usize, seed: u64) -> Result<Vec<f64>> {
    let law = TiltedLaw::at_tilt(model, t)?;
    let sampler = TiltedSampler::new(&law)?;
    let parts: Vec<Vec<f64>> = split(count, BATCHES)
        .into_par_iter()
        .enumerate()
        .map(|(b, len)| {
            let mut rng = stream(seed, b);
            (0..len).map(|_| sampler.sample(&mut rng)).collect()
        })
        .collect();
    Ok(parts.concat())
}

/// A Monte Carlo estimate with a batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub acceptance_rate: f64,
}

impl McEstimate {
    pub fn table(&self) -> Table {
        let mut t = Table::new(&["value", "stderr", "n_samples", "acceptance_rate", "seed"]);
        t.push_row(vec![
            num(self.value),
            num(self.stderr),
            self.n_samples.to_string(),
            num(self.acceptance_rate),
            self.seed.to_string(),
        ]);
        t
    }
}

/// First `k` coordinates of the slab-accepted vectors, per batch.
struct SlabDraws {
    k: usize,
    batches: Vec<Vec<f64>>,
    n_samples: usize,
}

impl SlabDraws {
    fn accepted(&self) -> usize {
        self.batches.iter().map(|b| b.len() / self.k).sum()
    }

    fn acceptance_rate(&self) -> f64 {
        self.accepted() as f64 / self.n_samples as f64
    }
}

fn slab_draws(
    sampler: &TiltedSampler,
    a_n: f64,
    n: usize,
    k: usize,
    delta: f64,
    n_samples: usize,
    seed: u64,
) -> Result<SlabDraws> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("need 1 <= k <= n, got k={k}, n={n}")));
    }
    if n_samples < BATCHES {
        return Err(Error::InvalidParameter(format!(
            "need at least {BATCHES} samples, got {n_samples}"
        )));
    }
    let nf = n as f64;
    let batches: Vec<Vec<f64>> = split(n_samples, BATCHES)
        .into_par_iter()
        .enumerate()
        .map(|(b, len)| {
            let mut rng = stream(seed, b);
            let mut kept = Vec::new();
            let mut block = vec![0.0; n];
            for _ in 0..len {
                let mut sum = 0.0;
                for v in block.iter_mut() {
                    *v = sampler.sample(&mut rng);
                    sum += *v;
                }
                if (sum / nf - a_n).abs() <= delta {
                    kept.extend_from_slice(&block[..k]);
                }
            }
            kept
        })
        .collect();
    let draws = SlabDraws {
        k,
        batches,
        n_samples,
    };
    let rate = draws.acceptance_rate();
    if rate < MIN_ACCEPTANCE {
        return Err(Error::InsufficientAcceptance {
            rate,
            minimum: MIN_ACCEPTANCE,
        });
    }
    Ok(draws)
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let b = values.len() as f64;
    let mean = values.iter().sum::<f64>() / b;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (b - 1.0);
    (mean, (var / b).sqrt())
}

/// Silverman's rule for a `d`-dimensional product kernel.
fn silverman_bandwidths(draws: &SlabDraws) -> Vec<f64> {
    let k = draws.k;
    let count = draws.accepted() as f64;
    (0..k)
        .map(|j| {
            let coord = || draws.batches.iter().flat_map(|b| b.chunks(k).map(move |r| r[j]));
            let mean = coord().sum::<f64>() / count;
            let var = coord().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0);
            var.sqrt() * (4.0 / ((k as f64 + 2.0) * count)).powf(1.0 / (k as f64 + 4.0))
        })
        .collect()
}

fn kde_at(draws: &SlabDraws, y: &[f64], bandwidth: &[f64]) -> (f64, f64) {
    let k = draws.k;
    let norm: f64 = bandwidth
        .iter()
        .map(|h| h * (2.0 * std::f64::consts::PI).sqrt())
        .product();
    let per_batch: Vec<(f64, usize)> = draws
        .batches
        .iter()
        .map(|b| {
            let sum: f64 = b
                .chunks(k)
                .map(|row| {
                    let e: f64 = row
                        .iter()
                        .zip(y)
                        .zip(bandwidth)
                        .map(|((x, yj), h)| ((yj - x) / h).powi(2))
                        .sum();
                    (-0.5 * e).exp()
                })
                .sum();
            (sum / norm, b.len() / k)
        })
        .collect();
    let total: f64 = per_batch.iter().map(|(s, _)| s).sum();
    let accepted: usize = per_batch.iter().map(|(_, c)| c).sum();
    let batch_values: Vec<f64> = per_batch
        .iter()
        .map(|(s, c)| if *c > 0 { s / *c as f64 } else { 0.0 })
        .collect();
    let (_, stderr) = mean_and_stderr(&batch_values);
    (total / accepted as f64, stderr)
}

/// Options for [`conditional_density_mc_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KdeOptions {
    /// Multiplies the Silverman bandwidth.
    pub bandwidth_scale: f64,
}

impl Default for KdeOptions {
    fn default() -> Self {
        Self {
            bandwidth_scale: 1.0,
        }
    }
}

/// Density of `(X₁..X_k)` at `y` given `|S/n - a_n| ≤ δ`, under `π^{a_n}`.
pub fn conditional_density_mc(
    model: &DensityModel,
    a_n: f64,
    n: usize,
    y: &[f64],
    delta: f64,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    conditional_density_mc_with(model, a_n, n, y, delta, n_samples, seed, KdeOptions::default())
}

#[allow(clippy::too_many_arguments)]
pub fn conditional_density_mc_with(
    model: &DensityModel,
    a_n: f64,
    n: usize,
    y: &[f64],
    delta: f64,
    n_samples: usize,
    seed: u64,
    options: KdeOptions,
) -> Result<McEstimate> {
    let law = TiltedLaw::at_mean(model, a_n)?;
    let sampler = TiltedSampler::new(&law)?;
    let draws = slab_draws(&sampler, a_n, n, y.len(), delta, n_samples, seed)?;
    let bandwidth: Vec<f64> = silverman_bandwidths(&draws)
        .into_iter()
        .map(|h| h * options.bandwidth_scale)
        .collect();
    let (value, stderr) = kde_at(&draws, y, &bandwidth);
    Ok(McEstimate {
        value,
        stderr,
        n_samples,
        seed,
        acceptance_rate: draws.acceptance_rate(),
    })
}

/// Correlation of `(X₁, X₂)` among slab-accepted vectors, with slab
/// half-width `INDEPENDENCE_SLAB·s/√n`.
pub fn independence_check(
    model: &DensityModel,
    a_n: f64,
    n: usize,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    let law = TiltedLaw::at_mean(model, a_n)?;
    let delta = INDEPENDENCE_SLAB * law.s() / (n as f64).sqrt();
    independence_check_with_delta(&law, n, delta, n_samples, seed)
}

pub fn independence_check_with_delta(
    law: &TiltedLaw,
    n: usize,
    delta: f64,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    if n < 2 {
        return Err(Error::InvalidParameter("need n >= 2".into()));
    }
    let sampler = TiltedSampler::new(law)?;
    let draws = slab_draws(&sampler, law.a(), n, 2, delta, n_samples, seed)?;
    let corr = |rows: &mut dyn Iterator<Item = (f64, f64)>| -> Option<f64> {
        let pts: Vec<(f64, f64)> = rows.collect();
        let c = pts.len() as f64;
        if c < 3.0 {
            return None;
        }
        let (mx, my) = pts
            .iter()
            .fold((0.0, 0.0), |(a, b), (x, y)| (a + x / c, b + y / c));
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for (x, y) in &pts {
            sxy += (x - mx) * (y - my);
            sxx += (x - mx) * (x - mx);
            syy += (y - my) * (y - my);
        }
        Some(sxy / (sxx * syy).sqrt())
    };
    let pairs = |b: &Vec<f64>| b.chunks(2).map(|r| (r[0], r[1])).collect::<Vec<_>>();
    let value = corr(&mut draws.batches.iter().flat_map(pairs))
        .ok_or(Error::InsufficientAcceptance {
            rate: draws.acceptance_rate(),
            minimum: MIN_ACCEPTANCE,
        })?;
    let per_batch: Vec<f64> = draws
        .batches
        .iter()
        .filter_map(|b| corr(&mut pairs(b).into_iter()))
        .collect();
    let stderr = if per_batch.len() >= 2 {
        mean_and_stderr(&per_batch).1
    } else {
        f64::NAN
    };
    Ok(McEstimate {
        value,
        stderr,
        n_samples,
        seed,
        acceptance_rate: draws.acceptance_rate(),
    })
}

/// Tolerance used for the independence assertion: `5/√n_acc + 2/n`.
pub fn independence_bound(estimate: &McEstimate, n: usize) -> f64 {
    let accepted = estimate.acceptance_rate * estimate.n_samples as f64;
    5.0 / accepted.sqrt() + 2.0 / n as f64
}
