//! Batch command-line front end.
//!
//! Every run is a pure function of a [`RunConfig`]. Defaults depend on the
//! subcommand; command-line flags override them and a `--config` TOML file
//! overrides both. Each command writes CSV tables whose header comments
//! embed the full config.
//!
//! Exit codes: 0 all assertions hold, 1 an assertion failed, 2 bad
//! configuration, 3 numerical failure, 4 Monte Carlo failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::edgeworth::{self, PowerSchedule, TiltedLaw};
use crate::error::{Error, Result};
use crate::gibbs;
use crate::mc;
use crate::model::{self, DensityModel, Family};
use crate::model_file::ModelSpec;
use crate::report::{num, Table};
use crate::tilt;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "TILT_OUT_DIR";

pub const EXIT_PASS: i32 = 0;
pub const EXIT_ASSERTION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_MC: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Classify,
    Moments,
    Edgeworth,
    Gibbs,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Classify => "classify",
            Command::Moments => "moments",
            Command::Edgeworth => "edgeworth",
            Command::Gibbs => "gibbs",
        }
    }
}

/// Full description of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub family: Family,
    pub theta: f64,
    /// Model file; when set it replaces `family` and `theta`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_file: Option<PathBuf>,
    pub t_grid: Vec<f64>,
    pub n_grid: Vec<usize>,
    pub a_schedule: PowerSchedule,
    /// Block lengths for `gibbs`.
    pub k: Vec<usize>,
    /// Slab half-width; when absent `4·s/(2√n)` is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    pub samples: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Step of the Edgeworth scan grid on `[-5, 5]`.
    pub x_step: f64,
    pub eta: f64,
    pub growth_threshold: f64,
    /// Tolerance of Monte Carlo agreement, in standard errors.
    pub mc_sigmas: f64,
}

fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("out"))
}

impl RunConfig {
    pub fn defaults(command: Command) -> Self {
        let mut c = Self {
            command,
            family: Family::Weibull { k: 2.0 },
            theta: model::DEFAULT_THETA,
            model_file: None,
            t_grid: vec![10.0, 30.0, 100.0, 300.0],
            n_grid: vec![8, 16, 32, 64],
            a_schedule: PowerSchedule::for_weibull(2.0, 2.0, 0.05),
            k: vec![1, 2],
            delta: None,
            samples: 200_000,
            seed: 1,
            out_dir: default_out_dir(),
            x_step: 0.05,
            eta: model::DEFAULT_ETA,
            growth_threshold: gibbs::DEFAULT_GROWTH_THRESHOLD,
            mc_sigmas: 3.0,
        };
        if command == Command::Gibbs {
            c.n_grid = vec![100, 400];
            c.a_schedule = PowerSchedule {
                a0: 3.0,
                exponent: 0.0,
            };
        }
        c
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    /// Overlays the keys present in `text` onto `self`.
    pub fn overlay_toml(&self, text: &str) -> Result<Self> {
        let file: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let mut base = toml::Table::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        for (key, value) in file {
            base.insert(key, value);
        }
        let merged: Self = toml::Value::Table(base)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        merged.validate()?;
        Ok(merged)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.family.validate().map_err(|e| Error::Config(e.to_string()))?;
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return bad(format!("theta must lie in (0, 1), got {}", self.theta));
        }
        if self.t_grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return bad("t-grid entries must be finite and >= 0".into());
        }
        match self.command {
            Command::Moments if self.t_grid.len() < 2 => {
                return bad("t-grid needs at least two points".into());
            }
            Command::Edgeworth | Command::Gibbs if self.n_grid.is_empty() => {
                return bad("n-grid is empty".into());
            }
            _ => {}
        }
        if self.n_grid.contains(&0) {
            return bad("n-grid entries must be >= 1".into());
        }
        if !(self.a_schedule.a0 > 0.0 && self.a_schedule.exponent.is_finite()) {
            return bad("a-schedule needs a0 > 0 and a finite exponent".into());
        }
        if self.command == Command::Gibbs && (self.k.is_empty() || self.k.contains(&0)) {
            return bad("k must list block lengths >= 1".into());
        }
        if let Some(d) = self.delta {
            if !(d > 0.0) {
                return bad(format!("delta must be positive, got {d}"));
            }
        }
        if self.samples < mc::BATCHES {
            return bad(format!("samples must be at least {}", mc::BATCHES));
        }
        if !(self.x_step > 0.0 && self.x_step <= 0.05) {
            return bad("x-step must lie in (0, 0.05]".into());
        }
        Ok(())
    }

    pub fn model(&self) -> Result<DensityModel> {
        match &self.model_file {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                text.parse::<ModelSpec>()?.build()
            }
            None => DensityModel::builtin(self.family)?.with_theta(self.theta),
        }
    }

    fn header(&self) -> String {
        format!("gibbs-tilt {}\n{}", self.command.name(), self.to_toml().trim_end())
    }

    fn write(&self, name: &str, table: &mut Table) -> Result<PathBuf> {
        fs::create_dir_all(&self.out_dir)
            .map_err(|e| Error::Io(format!("{}: {e}", self.out_dir.display())))?;
        let path = self.out_dir.join(name);
        table.comments.insert(0, self.header());
        let file =
            fs::File::create(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        table.write_to(std::io::BufWriter::new(file))?;
        Ok(path)
    }
}

/// Result of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub passed: bool,
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

pub fn cmd_classify(config: &RunConfig) -> Result<Outcome> {
    let model = config.model()?;
    let report = model::classify_with_eta(&model, &model::default_classify_grid(), config.eta)?;
    let mut summary = vec![format!("{}: class {}", model.name(), report.class)];
    if let Some(b) = report.beta_estimate {
        summary.push(format!("beta estimate {b:.4}"));
    }
    let mut checks = Table::new(&["check", "passed", "witness"]);
    checks.comment(format!("class = {}", report.class));
    for c in &report.checks {
        summary.push(format!(
            "{} {} (witness {:.3e})",
            c.id.as_str(),
            if c.passed { "pass" } else { "FAIL" },
            c.witness
        ));
        checks.push_row(vec![c.id.as_str().into(), c.passed.to_string(), num(c.witness)]);
    }
    let mut eps = Table::new(&["x", "epsilon"]);
    for (x, e) in &report.epsilon_values {
        eps.push_row(vec![num(*x), num(*e)]);
    }
    Ok(Outcome {
        passed: report.all_passed(),
        files: vec![
            config.write("classify.csv", &mut checks)?,
            config.write("classify_epsilon.csv", &mut eps)?,
        ],
        summary,
    })
}

const MOMENT_COLUMNS: [&str; 14] = [
    "t",
    "m_exact",
    "psi",
    "m_refined",
    "s2_exact",
    "psi_prime",
    "mu3_exact",
    "mu3_asym",
    "skewness",
    "log_phi",
    "log_phi_laplace",
    "h2_sigma3",
    "h2_sigma4",
    "log_sigma_over_k",
];

pub fn cmd_moments(config: &RunConfig) -> Result<Outcome> {
    let model = config.model()?;
    let mut table = Table::new(&MOMENT_COLUMNS);
    let mut errs: [Vec<f64>; 4] = Default::default();
    let opt = |r: Result<f64>| r.map(num).unwrap_or_default();
    for &t in &config.t_grid {
        let ex = tilt::moments_exact(&model, t)?;
        let log_phi = tilt::log_mgf_quadrature(&model, t)?;
        let asym = tilt::moments_asymptotic(&model, t, tilt::AsymptoticOrder::Leading).ok();
        let refined = tilt::moments_asymptotic(&model, t, tilt::AsymptoticOrder::Refined).ok();
        let laplace = tilt::log_mgf_laplace(&model, t);
        let diag = tilt::diagnostics(&model, t).ok();
        if let (Some(a), Ok(lap)) = (asym, &laplace) {
            if t > 0.0 {
                errs[0].push((ex.m - a.m).abs() / a.m);
                errs[1].push((ex.s2 - a.s2).abs() / a.s2);
                errs[2].push(if a.mu3 != 0.0 {
                    (ex.mu3 - a.mu3).abs() / a.mu3.abs()
                } else {
                    ex.mu3.abs() / ex.s2.powf(1.5)
                });
                errs[3].push((lap - log_phi).abs());
            }
        }
        let cell = |v: Option<f64>| v.map(num).unwrap_or_default();
        table.push_row(vec![
            num(t),
            num(ex.m),
            cell(asym.map(|a| a.m)),
            cell(refined.map(|a| a.m)),
            num(ex.s2),
            cell(asym.map(|a| a.s2)),
            num(ex.mu3),
            cell(asym.map(|a| a.mu3)),
            num(ex.skewness()),
            num(log_phi),
            opt(laplace),
            cell(diag.map(|d| d.h2_sigma3)),
            cell(diag.map(|d| d.h2_sigma4)),
            cell(diag.map(|d| d.log_sigma_over_k)),
        ]);
    }
    let names = ["|m-psi|/psi", "|s2-psi'|/psi'", "mu3 rel err", "laplace gap"];
    let mut passed = errs[0].len() >= 2;
    let mut summary = vec![format!("{}: {} tilts", model.name(), config.t_grid.len())];
    for (name, e) in names.iter().zip(&errs) {
        let trend = e.windows(2).all(|w| w[1] < w[0] || (w[0] < 1e-12 && w[1] < 1e-12));
        passed &= trend;
        summary.push(format!(
            "{name}: {} {}",
            e.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>().join(" "),
            if trend { "decreasing" } else { "NOT decreasing" }
        ));
    }
    Ok(Outcome {
        passed,
        files: vec![config.write("moments.csv", &mut table)?],
        summary,
    })
}

pub fn cmd_edgeworth(config: &RunConfig) -> Result<Outcome> {
    let model = config.model()?;
    let count = (10.0 / config.x_step).ceil() as usize + 1;
    let grid = edgeworth::uniform_grid(-5.0, 5.0, count);
    let mut table = Table::new(&["n", "a_n", "sup_err", "scaled_err", "min_rho_hat"]);
    let mut files = Vec::new();
    let mut scaled = Vec::new();
    let mut summary = vec![format!("{}: Edgeworth scan", model.name())];
    for &n in &config.n_grid {
        let a = config.a_schedule.a_n(n);
        let r = edgeworth::sup_error_scan(&model, a, n, &grid)?;
        table.push_row(vec![
            n.to_string(),
            num(a),
            num(r.sup_err),
            num(r.scaled_err),
            num(r.min_rho_hat()),
        ]);
        if r.min_rho_hat() < -1e-3 {
            summary.push(format!("n={n}: rho_hat dips to {:.3e}", r.min_rho_hat()));
        }
        summary.push(format!("n={n} a_n={a:.4} sqrt(n)*sup_err={:.4e}", r.scaled_err));
        scaled.push(r.scaled_err);
        files.push(config.write(&format!("edgeworth_n{n}.csv"), &mut r.table(model.name()))?);
    }
    let passed = scaled.windows(2).all(|w| w[1] <= w[0]);
    if !passed {
        summary.push("scaled error is not non-increasing in n".into());
    }
    files.insert(0, config.write("edgeworth.csv", &mut table)?);
    Ok(Outcome {
        passed,
        files,
        summary,
    })
}

/// Alternates `a ± s` so each coordinate sits at an inflection point of a
/// near-Gaussian marginal.
pub fn typical_block(a: f64, s: f64, k: usize) -> Vec<f64> {
    (0..k).map(|i| if i % 2 == 0 { a + s } else { a - s }).collect()
}

pub fn cmd_gibbs(config: &RunConfig) -> Result<Outcome> {
    let model = config.model()?;
    let mut table = Table::new(&[
        "k",
        "n",
        "a_n",
        "delta",
        "growth",
        "max_abs_z",
        "log_g_m",
        "log_g_an",
        "mc_value",
        "mc_stderr",
        "ratio",
        "ratio_stderr",
        "acceptance_rate",
        "pass",
    ]);
    let mut files = Vec::new();
    let mut passed = true;
    let mut summary = vec![format!("{}: Gibbs conditioning", model.name())];
    for &k in &config.k {
        for &n in &config.n_grid {
            let a = config.a_schedule.a_n(n);
            let s = TiltedLaw::at_mean(&model, a)?.s();
            let y = typical_block(a, s, k);
            let chain = gibbs::build_chain(&model, a, n, &y)?;
            let growth = gibbs::growth_condition_with(&model, a, n, config.growth_threshold)?;
            let delta = config.delta.unwrap_or_else(|| mc::default_delta(s, n));
            let est =
                mc::conditional_density_mc(&model, a, n, &y, delta, config.samples, config.seed)?;
            let g = chain.log_g_m.exp();
            let ratio = est.value / g;
            let ratio_se = est.stderr / g;
            let ok = (ratio - 1.0).abs() <= config.mc_sigmas * ratio_se;
            passed &= ok;
            table.push_row(vec![
                k.to_string(),
                n.to_string(),
                num(a),
                num(delta),
                num(growth.value),
                num(gibbs::z_smallness_check(&chain).max_abs_z),
                num(chain.log_g_m),
                num(chain.log_g_an),
                num(est.value),
                num(est.stderr),
                num(ratio),
                num(ratio_se),
                num(est.acceptance_rate),
                ok.to_string(),
            ]);
            summary.push(format!(
                "k={k} n={n}: ratio {ratio:.4} ± {ratio_se:.4}{}{}",
                if ok { "" } else { " (outside tolerance)" },
                if growth.pass { "" } else { " [growth condition not met]" }
            ));
            files.push(config.write(&format!("gibbs_chain_k{k}_n{n}.csv"), &mut chain.table())?);
        }
    }
    files.insert(0, config.write("gibbs.csv", &mut table)?);
    Ok(Outcome {
        passed,
        files,
        summary,
    })
}

pub fn run_config(config: &RunConfig) -> Result<Outcome> {
    config.validate()?;
    match config.command {
        Command::Classify => cmd_classify(config),
        Command::Moments => cmd_moments(config),
        Command::Edgeworth => cmd_edgeworth(config),
        Command::Gibbs => cmd_gibbs(config),
    }
}

pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::Config(_) | Error::ModelFile(_) | Error::InvalidParameter(_) | Error::Io(_) => {
            EXIT_CONFIG
        }
        Error::InsufficientAcceptance { .. } => EXIT_MC,
        _ => EXIT_NUMERIC,
    }
}

#[derive(Debug, Parser)]
#[command(name = "gibbs-tilt", version, about = "Tilted-density asymptotics and Gibbs conditioning checks")]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Subcommand)]
enum CliCommand {
    /// Certify the regularity class of h.
    Classify,
    /// Exact versus asymptotic moments over the t-grid.
    Moments,
    /// Edgeworth error against the Fourier oracle over the n-grid.
    Edgeworth,
    /// Tilt chains checked against slab-conditioned Monte Carlo.
    Gibbs,
}

#[derive(Debug, Args)]
struct Flags {
    /// TOML file; its keys override flags and defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: $TILT_OUT_DIR or ./out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// weibull[:k], exp_exp or power[:beta].
    #[arg(long, global = true)]
    family: Option<String>,
    /// Model file, replacing --family.
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    /// Comma-separated tilts.
    #[arg(long, global = true, value_delimiter = ',')]
    t_grid: Option<Vec<f64>>,
    /// Comma-separated sample sizes.
    #[arg(long, global = true, value_delimiter = ',', num_args = 0..)]
    n_grid: Option<Vec<usize>>,
    /// `a0` for a constant level or `a0,exponent` for a0·n^exponent.
    #[arg(long, global = true)]
    a_schedule: Option<String>,
    #[arg(long, global = true)]
    delta: Option<f64>,
    #[arg(long, global = true)]
    samples: Option<usize>,
}

pub fn parse_family(text: &str) -> Result<Family> {
    let (name, param) = match text.split_once(':') {
        Some((n, p)) => (n, Some(p)),
        None => (text, None),
    };
    let value = |default: f64| -> Result<f64> {
        param.map_or(Ok(default), |p| {
            p.trim()
                .trim_start_matches("k=")
                .trim_start_matches("beta=")
                .parse()
                .map_err(|_| Error::Config(format!("bad family parameter `{p}`")))
        })
    };
    let family = match name.trim() {
        "weibull" => Family::Weibull { k: value(2.0)? },
        "exp_exp" if param.is_none() => Family::ExpExp,
        "power" => Family::Power { beta: value(1.0)? },
        _ => return Err(Error::Config(format!("unknown family `{text}`"))),
    };
    family.validate().map_err(|e| Error::Config(e.to_string()))?;
    Ok(family)
}

fn parse_schedule(text: &str) -> Result<PowerSchedule> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let parse = |p: &str| {
        p.parse::<f64>()
            .map_err(|_| Error::Config(format!("bad a-schedule `{text}`")))
    };
    match parts.as_slice() {
        [a0] => Ok(PowerSchedule {
            a0: parse(a0)?,
            exponent: 0.0,
        }),
        [a0, e] => Ok(PowerSchedule {
            a0: parse(a0)?,
            exponent: parse(e)?,
        }),
        _ => Err(Error::Config(format!("bad a-schedule `{text}`"))),
    }
}

fn build_config(command: Command, flags: &Flags) -> Result<RunConfig> {
    let mut c = RunConfig::defaults(command);
    if let Some(f) = &flags.family {
        c.family = parse_family(f)?;
    }
    if let Some(p) = &flags.model {
        c.model_file = Some(p.clone());
    }
    if let Some(v) = &flags.t_grid {
        c.t_grid = v.clone();
    }
    if let Some(v) = &flags.n_grid {
        c.n_grid = v.clone();
    }
    if let Some(s) = &flags.a_schedule {
        c.a_schedule = parse_schedule(s)?;
    }
    if let Some(d) = flags.delta {
        c.delta = Some(d);
    }
    if let Some(s) = flags.samples {
        c.samples = s;
    }
    if let Some(s) = flags.seed {
        c.seed = s;
    }
    if let Some(o) = &flags.out {
        c.out_dir = o.clone();
    }
    if let Some(path) = &flags.config {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        c = c.overlay_toml(&text)?;
        if c.command != command {
            return Err(Error::Config(format!(
                "config file is for `{}`, not `{}`",
                c.command.name(),
                command.name()
            )));
        }
    }
    c.validate()?;
    Ok(c)
}

fn display_path(p: &Path) -> String {
    p.display().to_string()
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    let command = match cli.command {
        CliCommand::Classify => Command::Classify,
        CliCommand::Moments => Command::Moments,
        CliCommand::Edgeworth => Command::Edgeworth,
        CliCommand::Gibbs => Command::Gibbs,
    };
    let outcome = build_config(command, &cli.flags).and_then(|c| run_config(&c));
    match outcome {
        Ok(o) => {
            for line in &o.summary {
                println!("{line}");
            }
            for f in &o.files {
                println!("wrote {}", display_path(f));
            }
            if o.passed {
                EXIT_PASS
            } else {
                eprintln!("assertions failed");
                EXIT_ASSERTION
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_flags() {
        assert_eq!(parse_family("weibull").unwrap(), Family::Weibull { k: 2.0 });
        assert_eq!(parse_family("weibull:3").unwrap(), Family::Weibull { k: 3.0 });
        assert_eq!(parse_family("power:beta=2").unwrap(), Family::Power { beta: 2.0 });
        assert_eq!(parse_family("exp_exp").unwrap(), Family::ExpExp);
        for bad in ["gamma", "weibull:0.5", "weibull:x", "exp_exp:2"] {
            assert!(matches!(parse_family(bad), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn config_round_trips_through_toml() {
        for cmd in [Command::Classify, Command::Moments, Command::Edgeworth, Command::Gibbs] {
            let c = RunConfig::defaults(cmd);
            let back = c.overlay_toml(&c.to_toml()).unwrap();
            assert_eq!(back, c);
        }
    }

    #[test]
    fn overlay_replaces_only_given_keys() {
        let c = RunConfig::defaults(Command::Edgeworth);
        let o = c.overlay_toml("seed = 9\nn_grid = [4, 8]\n").unwrap();
        assert_eq!(o.seed, 9);
        assert_eq!(o.n_grid, vec![4, 8]);
        assert_eq!(o.t_grid, c.t_grid);
        assert!(c.overlay_toml("bogus = 1").is_err());
        assert!(c.overlay_toml("n_grid = []").is_err());
    }

    #[test]
    fn schedules() {
        assert_eq!(parse_schedule("3").unwrap().a_n(100), 3.0);
        assert!((parse_schedule("2, 0.2").unwrap().a_n(32) - 4.0).abs() < 1e-12);
        assert!(parse_schedule("1,2,3").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::NonIntegrable("x".into())), EXIT_NUMERIC);
        assert_eq!(
            exit_code(&Error::InsufficientAcceptance {
                rate: 0.0,
                minimum: 1e-3
            }),
            EXIT_MC
        );
    }
}
