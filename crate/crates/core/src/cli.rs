//! Command-line front end.
//!
//! Subcommands: `check`, `recover`, `bound`, `montecarlo`, `sweep`. Every
//! parameter may come from a flat `key = value` config file (`--config`);
//! command-line flags override file values.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::channel_model::{build_shift_matrix, gen_channel, ChannelVector};
use crate::error::{Error, Result};
use crate::identifiability::{check_condition, IdentifiabilityReport, Verdict};
use crate::probability::{bound_l1_delta1, monte_carlo_probability_delta, sweep, write_csv, BoundPoint};
use crate::sparse_select::{recover_from_kernel, recovery_success, solve_p1, solve_pp_local, Normalization, RecoveryResult};
use crate::subspace::{
    build_quadratic_form, exact_covariance, kernel_basis, kernel_basis_nearest, noise_projector, sample_covariance,
    subspace_distance,
};

const PRECEDENCE: &str = "\
Parameters can also be read from a flat TOML file given with --config, e.g.

    M = 4
    L = 2
    Lp = 3
    p = 1.0
    trials = 10000
    seed = 7
    M_list = [2, 4, 8, 16]
    L_list = [2, 5, 10]
    out = \"sweep.csv\"

Flags given on the command line override values from the file.
Without --seed (flag or file) a random seed is drawn and printed to stderr.";

#[derive(Debug, Parser)]
#[command(name = "simo-ident", version, about = "Blind SIMO channel identifiability under l1/lp criteria", after_help = PRECEDENCE)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decide the identifiability condition; exit 0 identifiable, 2 boundary, 3 not identifiable.
    Check(ChannelArgs),
    /// Select the sparsest channel, from the true channel or through the subspace pipeline.
    Recover(RecoverArgs),
    /// Evaluate the probability lower bound for one (M, L).
    Bound(GridPointArgs),
    /// Monte Carlo estimate of the identifiability probability for one (M, L).
    Montecarlo(MonteCarloArgs),
    /// Bound and Monte Carlo estimate over an (M, L) grid.
    Sweep(SweepArgs),
}

#[derive(Debug, Args, Default)]
pub struct Common {
    /// Flat TOML file with default parameter values.
    #[arg(long, value_name = "PATH", global = true)]
    pub config: Option<PathBuf>,
    /// Random seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ChannelArgs {
    /// Channel JSON file: {"M": .., "L": .., "taps": [[..], ..]}.
    #[arg(long, value_name = "PATH", conflicts_with = "random")]
    pub channel: Option<PathBuf>,
    /// Draw a Gaussian channel with M antennas and order L (uses --seed).
    #[arg(long, num_args = 2, value_names = ["M", "L"])]
    pub random: Option<Vec<usize>>,
    /// Over-modeled channel order L'.
    #[arg(long = "Lp")]
    pub lp: Option<usize>,
    /// Sparsity exponent in (0, 1].
    #[arg(long)]
    pub p: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct RecoverArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    /// Recover through covariance -> noise projector -> kernel instead of from the true channel.
    #[arg(long)]
    pub pipeline: bool,
    /// Stacking depth of the covariance (default L').
    #[arg(long)]
    pub n: Option<usize>,
    /// Noise variance.
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Use a sampled covariance with this many windows instead of the exact one.
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GridPointArgs {
    #[arg(value_name = "M")]
    pub m: Option<usize>,
    #[arg(value_name = "L")]
    pub l: Option<usize>,
    /// CSV output path (stdout when absent).
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct MonteCarloArgs {
    #[command(flatten)]
    pub point: GridPointArgs,
    /// Over-modeled order (default L + 1).
    #[arg(long = "Lp")]
    pub lp: Option<usize>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Antenna counts, comma separated.
    #[arg(long = "M-list", value_delimiter = ',')]
    pub m_list: Option<Vec<usize>>,
    /// Channel orders, comma separated.
    #[arg(long = "L-list", value_delimiter = ',')]
    pub l_list: Option<Vec<usize>>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

/// Parameters as they may appear in a config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(rename = "M")]
    pub m: Option<usize>,
    #[serde(rename = "L")]
    pub l: Option<usize>,
    #[serde(rename = "Lp")]
    pub lp: Option<usize>,
    pub p: Option<f64>,
    pub sigma2: Option<f64>,
    pub n: Option<usize>,
    pub samples: Option<usize>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    #[serde(rename = "M_list")]
    pub m_list: Option<Vec<usize>>,
    #[serde(rename = "L_list")]
    pub l_list: Option<Vec<usize>>,
    pub channel: Option<PathBuf>,
    pub out: Option<PathBuf>,
    #[serde(skip)]
    source: Option<(PathBuf, String)>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.source = Some((path.to_path_buf(), text));
        Ok(cfg)
    }

    /// Error for `field`, located at its line in the config file when it came from there.
    fn invalid(&self, field: &str, msg: impl std::fmt::Display) -> Error {
        if let Some((path, text)) = &self.source {
            if let Some(line) = text.lines().position(|l| {
                let l = l.trim_start();
                l.strip_prefix(field).is_some_and(|rest| rest.trim_start().starts_with('='))
            }) {
                return Error::Config(format!("{}:{}: field `{field}`: {msg}", path.display(), line + 1));
            }
        }
        Error::Config(format!("field `{field}`: {msg}"))
    }

    /// Checks every present field against the preconditions of the modules it feeds.
    pub fn validate(&self) -> Result<()> {
        if let Some(m) = self.m {
            if m < 2 {
                return Err(self.invalid("M", format!("antenna count must be >= 2, got {m}")));
            }
        }
        if let Some(l) = self.l {
            if l < 1 {
                return Err(self.invalid("L", format!("channel order must be >= 1, got {l}")));
            }
        }
        if let (Some(l), Some(lp)) = (self.l, self.lp) {
            if lp < l {
                return Err(self.invalid("Lp", format!("L' = {lp} is below L = {l}")));
            }
        }
        if let Some(p) = self.p {
            if !(p > 0.0 && p <= 1.0) {
                return Err(self.invalid("p", format!("exponent must lie in (0, 1], got {p}")));
            }
        }
        if let Some(s) = self.sigma2 {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(self.invalid("sigma2", format!("noise variance must be >= 0, got {s}")));
            }
        }
        if self.samples == Some(0) {
            return Err(self.invalid("samples", "must be >= 1"));
        }
        if let Some(t) = self.trials {
            if t < crate::probability::MIN_TRIALS {
                return Err(self.invalid("trials", format!("must be >= {}, got {t}", crate::probability::MIN_TRIALS)));
            }
        }
        if let Some(list) = &self.m_list {
            if list.is_empty() {
                return Err(self.invalid("M_list", "grid must be nonempty"));
            }
            if let Some(&m) = list.iter().find(|&&m| m < 2) {
                return Err(self.invalid("M_list", format!("antenna count must be >= 2, got {m}")));
            }
        }
        if let Some(list) = &self.l_list {
            if list.is_empty() {
                return Err(self.invalid("L_list", "grid must be nonempty"));
            }
            if list.contains(&0) {
                return Err(self.invalid("L_list", "channel order must be >= 1"));
            }
        }
        Ok(())
    }

    /// Overlays `self` (command-line values) onto `base` (file values).
    fn over(self, base: ExperimentConfig) -> ExperimentConfig {
        ExperimentConfig {
            m: self.m.or(base.m),
            l: self.l.or(base.l),
            lp: self.lp.or(base.lp),
            p: self.p.or(base.p),
            sigma2: self.sigma2.or(base.sigma2),
            n: self.n.or(base.n),
            samples: self.samples.or(base.samples),
            trials: self.trials.or(base.trials),
            seed: self.seed.or(base.seed),
            m_list: self.m_list.or(base.m_list),
            l_list: self.l_list.or(base.l_list),
            channel: self.channel.or(base.channel),
            out: self.out.or(base.out),
            source: base.source,
        }
    }

    /// The configured seed, or a fresh one that is reported on stderr.
    fn seed(&self) -> u64 {
        self.seed.unwrap_or_else(|| {
            let seed = rand::random::<u64>();
            eprintln!("seed: {seed}");
            seed
        })
    }

    fn require<T: Copy>(&self, value: Option<T>, field: &str) -> Result<T> {
        value.ok_or_else(|| Error::Config(format!("missing required parameter `{field}`")))
    }
}

fn resolve(common: &Common, flags: ExperimentConfig) -> Result<ExperimentConfig> {
    let base = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let cfg = ExperimentConfig { seed: common.seed, ..flags }.over(base);
    cfg.validate()?;
    Ok(cfg)
}

fn channel_flags(args: &ChannelArgs) -> ExperimentConfig {
    let (m, l) = match args.random.as_deref() {
        Some([m, l]) => (Some(*m), Some(*l)),
        _ => (None, None),
    };
    ExperimentConfig { m, l, lp: args.lp, p: args.p, channel: args.channel.clone(), ..Default::default() }
}

fn load_channel(cfg: &ExperimentConfig) -> Result<ChannelVector> {
    if let Some(path) = &cfg.channel {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        return serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())));
    }
    match (cfg.m, cfg.l) {
        (Some(m), Some(l)) => gen_channel(m, l, cfg.seed()),
        _ => Err(Error::Config("a channel is required: give --channel PATH or --random M L".into())),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

pub fn verdict_exit_code(v: Verdict) -> u8 {
    match v {
        Verdict::Identifiable => 0,
        Verdict::Boundary => 2,
        Verdict::NotIdentifiable => 3,
    }
}

fn cmd_check(args: &ChannelArgs) -> Result<IdentifiabilityReport> {
    let cfg = resolve(&args.common, channel_flags(args))?;
    let h = load_channel(&cfg)?;
    let lp = cfg.require(cfg.lp, "Lp")?;
    check_condition(&h, lp, cfg.p.unwrap_or(1.0))
}

/// Output of `recover`: the recovery result plus how it was obtained and scored.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecoverOutput {
    pub mode: String,
    #[serde(flatten)]
    pub result: RecoveryResult,
    /// Shift-tolerant correlation with the true channel.
    pub success: f64,
    /// `success >= 1 - 1e-6`.
    pub recovered: bool,
    /// Largest principal angle between the estimated kernel and the true shift span.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel_angle: Option<f64>,
}

pub const RECOVERY_THRESHOLD: f64 = 1.0 - 1e-6;
const PP_MAX_ITER: usize = 100;

fn cmd_recover(args: &RecoverArgs) -> Result<RecoverOutput> {
    let flags = ExperimentConfig { n: args.n, sigma2: args.sigma2, samples: args.samples, ..channel_flags(&args.channel) };
    let mut cfg = resolve(&args.channel.common, flags)?;
    if cfg.channel.is_none() || cfg.samples.is_some() {
        // The channel draw and the symbol draw share one reported seed.
        cfg.seed = Some(cfg.seed());
    }
    let h = load_channel(&cfg)?;
    let lp = cfg.require(cfg.lp, "Lp")?;
    if lp < h.l() {
        return Err(Error::Parameter(format!("L' = {lp} is below L = {}", h.l())));
    }
    let p = cfg.p.unwrap_or(1.0);

    let (mode, result, kernel_angle) = if args.pipeline {
        let n = cfg.n.unwrap_or(lp);
        let sigma2 = cfg.sigma2.unwrap_or(0.0);
        let cov = match cfg.samples {
            Some(samples) => sample_covariance(&h, n, sigma2, samples, cfg.seed())?,
            None => exact_covariance(&h, n, sigma2)?,
        };
        let pi = noise_projector(&cov, h.l() + n + 1)?;
        let q = build_quadratic_form(&pi, lp, h.m())?;
        let dim = lp - h.l() + 1;
        let kernel = if cfg.samples.is_some() { kernel_basis_nearest(&q, dim)? } else { kernel_basis(&q, dim)? };
        let angle = subspace_distance(&kernel, &build_shift_matrix(&h, lp)?)?;
        let res = recover_from_kernel(&kernel, &Normalization::Coordinate, p)?.with_reference(&h, lp)?;
        ("pipeline", res, Some(angle))
    } else if p == 1.0 {
        ("analysis", solve_p1(&h, lp)?, None)
    } else {
        let g0 = DVector::zeros(lp - h.l());
        ("analysis", solve_pp_local(&h, lp, p, &g0, PP_MAX_ITER)?, None)
    };
    let success = recovery_success(&DVector::from_column_slice(&result.f_hat), &h, lp)?;
    Ok(RecoverOutput { mode: mode.into(), result, success, recovered: success >= RECOVERY_THRESHOLD, kernel_angle })
}

fn grid_flags(args: &GridPointArgs) -> ExperimentConfig {
    ExperimentConfig { m: args.m, l: args.l, out: args.out.clone(), ..Default::default() }
}

fn summary(row: &BoundPoint) -> String {
    let mut s = format!("M={} L={} delta={} p={}", row.m, row.l, row.delta, row.p);
    if let (Some(b), Some(e)) = (row.bound, row.eps_star) {
        s += &format!(" bound={b:.6} eps*={e:.4}");
    }
    if let (Some(est), Some(hw), Some(t)) = (row.mc_estimate, row.mc_halfwidth, row.trials) {
        s += &format!(" mc={est:.4}±{hw:.4} ({t} trials)");
    }
    s
}

/// CSV goes to `out` with one summary line per row on stdout; without `out`
/// the CSV goes to stdout and summaries to stderr.
fn emit_rows(rows: &[BoundPoint], out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            let file = fs::File::create(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            write_csv(rows, io::BufWriter::new(file))?;
            for row in rows {
                println!("{}", summary(row));
            }
        }
        None => {
            write_csv(rows, io::stdout().lock())?;
            for row in rows {
                eprintln!("{}", summary(row));
            }
        }
    }
    Ok(())
}

fn cmd_bound(args: &GridPointArgs) -> Result<()> {
    let cfg = resolve(&args.common, grid_flags(args))?;
    let row = bound_l1_delta1(cfg.require(cfg.m, "M")?, cfg.require(cfg.l, "L")?)?;
    emit_rows(&[row], cfg.out.as_deref())
}

const DEFAULT_TRIALS: usize = 10_000;

fn cmd_montecarlo(args: &MonteCarloArgs) -> Result<()> {
    let flags = ExperimentConfig { lp: args.lp, p: args.p, trials: args.trials, ..grid_flags(&args.point) };
    let cfg = resolve(&args.point.common, flags)?;
    let (m, l) = (cfg.require(cfg.m, "M")?, cfg.require(cfg.l, "L")?);
    let lp = cfg.lp.unwrap_or(l + 1);
    if lp <= l {
        return Err(Error::Parameter(format!("L' = {lp} must exceed L = {l}")));
    }
    let row = monte_carlo_probability_delta(
        m,
        l,
        lp - l,
        cfg.p.unwrap_or(1.0),
        cfg.trials.unwrap_or(DEFAULT_TRIALS),
        cfg.seed(),
    )?;
    emit_rows(&[row], cfg.out.as_deref())
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let flags = ExperimentConfig {
        m_list: args.m_list.clone(),
        l_list: args.l_list.clone(),
        p: args.p,
        trials: args.trials,
        out: args.out.clone(),
        ..Default::default()
    };
    let cfg = resolve(&args.common, flags)?;
    let m_list = cfg.m_list.clone().ok_or_else(|| Error::Config("missing required parameter `M_list`".into()))?;
    let l_list = cfg.l_list.clone().ok_or_else(|| Error::Config("missing required parameter `L_list`".into()))?;
    let rows = sweep(
        &m_list,
        &l_list,
        cfg.p.unwrap_or(1.0),
        cfg.trials.unwrap_or(DEFAULT_TRIALS),
        cfg.seed(),
    )?;
    emit_rows(&rows, cfg.out.as_deref())
}

/// Parses `args` and runs the chosen subcommand. Errors map to exit code 1.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let outcome = match &cli.command {
        Command::Check(args) => cmd_check(args).and_then(|r| {
            print_json(&r)?;
            Ok(verdict_exit_code(r.verdict))
        }),
        Command::Recover(args) => cmd_recover(args).and_then(|r| print_json(&r).map(|_| 0)),
        Command::Bound(args) => cmd_bound(args).map(|_| 0),
        Command::Montecarlo(args) => cmd_montecarlo(args).map(|_| 0),
        Command::Sweep(args) => cmd_sweep(args).map(|_| 0),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let file = ExperimentConfig { m: Some(4), p: Some(0.5), seed: Some(1), ..Default::default() };
        let flags = ExperimentConfig { p: Some(1.0), ..Default::default() };
        let merged = flags.over(file);
        assert_eq!(merged.m, Some(4));
        assert_eq!(merged.p, Some(1.0));
        assert_eq!(merged.seed, Some(1));
    }

    #[test]
    fn validation_reports_line_and_field() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.toml");
        fs::write(&path, "M = 4\nL = 2\np = 1.5\n").unwrap();
        let cfg = ExperimentConfig::load(&path).unwrap();
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains(":3: field `p`"), "{msg}");

        fs::write(&path, "M = 4\nbogus = 1\n").unwrap();
        let msg = ExperimentConfig::load(&path).unwrap_err().to_string();
        assert!(msg.contains("bogus"), "{msg}");
    }

    #[test]
    fn empty_grid_is_rejected() {
        let cfg = ExperimentConfig { m_list: Some(vec![]), ..Default::default() };
        assert!(cfg.validate().is_err());
    }
}
