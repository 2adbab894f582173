//! Command-line front end: `sweep-delta`, `sweep-sigma`, `verify` and
//! `report`.
//!
//! [`run`] returns the process exit code: 0 on success, 1 when the
//! computation fails, 2 on a usage error.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bounds::{amplitude_stats, bound_report, min_separation, AmplitudeStats, BoundReport, SpectralCharacteristics};
use crate::error::Error;
use crate::experiments::{
    preset_deltas, run_delta_sweep, run_sigma_sweep, sample_separated_spikes, sample_whitened_amplitudes, verify_jacobian,
    write_atomic, write_sweep, Sweep, SweepConfig, VerifyConfig,
};
use crate::model::{ProblemInstance, PsfSpec};
use crate::sensitivity::jacobian_psi_zero;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

const VERIFY_MAX_N: usize = 256;

#[derive(Debug, Parser)]
#[command(name = "spike-sens", version, about = "Small-noise sensitivity of multi-snapshot spike localisation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Worst case over random draws for each minimum separation.
    SweepDelta(SweepDeltaArgs),
    /// Worst case over random draws for each Gaussian PSF width.
    SweepSigma(SweepSigmaArgs),
    /// Finite-difference check of the analytic Jacobians.
    Verify(VerifyArgs),
    /// Sensitivity, characteristics and bounds of a single configuration, as JSON.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long, default_value_t = 501)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Snapshots; defaults to K.
    #[arg(long)]
    l: Option<usize>,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// CSV output; the config is written next to it with a .json extension.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SweepDeltaArgs {
    /// dirac, gaussian:<sigma> or tabulated:<csv>
    #[arg(long)]
    psf: PsfSpec,
    /// Comma-separated separations, or "preset".
    #[arg(long)]
    deltas: String,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct SweepSigmaArgs {
    /// Comma-separated Gaussian widths.
    #[arg(long)]
    sigmas: String,
    #[arg(long)]
    delta: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 64)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 3)]
    l: usize,
    #[arg(long, default_value = "dirac")]
    psf: PsfSpec,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    fd_step: f64,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long)]
    psf: PsfSpec,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    l: Option<usize>,
    /// Comma-separated locations in [0, 1).
    #[arg(long, conflicts_with = "delta")]
    taus: Option<String>,
    /// Draw locations with this minimum separation instead.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Write the JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn parse_list(raw: &str, what: &str) -> Result<Vec<f64>, Failure> {
    let values: Vec<f64> = raw
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| usage(format!("invalid {what} value {s:?}"))))
        .collect::<Result<_, _>>()?;
    if values.is_empty() {
        return Err(usage(format!("--{what} must list at least one value")));
    }
    if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(usage(format!("{what} values must be positive, got {bad}")));
    }
    Ok(values)
}

fn check_sizes(n: usize, k: usize, l: usize) -> Result<(), Failure> {
    if n == 0 || k == 0 || l == 0 {
        return Err(usage("--n, --k and --l must be positive"));
    }
    if n <= 2 * k {
        return Err(usage(format!("--n must exceed 2K (N = {n}, K = {k})")));
    }
    Ok(())
}

fn sweep_config(common: &Common, psf: PsfSpec, sweep: Sweep) -> Result<SweepConfig, Failure> {
    let l = common.l.unwrap_or(common.k);
    check_sizes(common.n, common.k, l)?;
    if l < common.k {
        return Err(usage(format!("--l must be at least K for whitening (L = {l}, K = {})", common.k)));
    }
    if common.trials == 0 {
        return Err(usage("--trials must be positive"));
    }
    Ok(SweepConfig { psf, n: common.n, k: common.k, l, trials: common.trials, seed: common.seed, sweep })
}

fn finish_sweep(common: &Common, config: &SweepConfig) -> Result<(), Failure> {
    let records = match config.sweep {
        Sweep::Delta { .. } => run_delta_sweep(config)?,
        Sweep::Sigma { .. } => run_sigma_sweep(config)?,
    };
    let sidecar = write_sweep(&common.out, config, &records)?;
    println!("wrote {} rows to {} (config {})", records.len(), common.out.display(), sidecar.display());
    Ok(())
}

fn sweep_delta(args: SweepDeltaArgs) -> Result<(), Failure> {
    let deltas = if args.deltas.trim() == "preset" {
        preset_deltas(args.common.n, args.common.k)
    } else {
        parse_list(&args.deltas, "deltas")?
    };
    let config = sweep_config(&args.common, args.psf, Sweep::Delta { deltas })?;
    finish_sweep(&args.common, &config)
}

fn sweep_sigma(args: SweepSigmaArgs) -> Result<(), Failure> {
    let raw = parse_list(&args.sigmas, "sigmas")?;
    let mut sigmas: Vec<f64> = Vec::with_capacity(raw.len());
    for s in raw {
        if sigmas.contains(&s) {
            eprintln!("warning: duplicate sigma {s} ignored");
        } else {
            sigmas.push(s);
        }
    }
    if !(args.delta.is_finite() && args.delta > 0.0) {
        return Err(usage(format!("--delta must be positive, got {}", args.delta)));
    }
    let psf = PsfSpec::gaussian(sigmas[0])?;
    let config = sweep_config(&args.common, psf, Sweep::Sigma { sigmas, delta: args.delta })?;
    finish_sweep(&args.common, &config)
}

fn verify(args: VerifyArgs) -> Result<bool, Failure> {
    check_sizes(args.n, args.k, args.l)?;
    if args.n > VERIFY_MAX_N {
        return Err(usage(format!("--n must be at most {VERIFY_MAX_N} for verification")));
    }
    if !(args.fd_step.is_finite() && args.fd_step > 0.0) {
        return Err(usage("--fd-step must be positive"));
    }
    let config = VerifyConfig { n: args.n, k: args.k, l: args.l, psf: args.psf, seed: args.seed, fd_step: args.fd_step };
    let report = verify_jacobian(&config)?;
    println!("{report}");
    Ok(report.passed)
}

#[derive(Debug, Serialize)]
struct SensitivityReport {
    psf: PsfSpec,
    n: usize,
    k: usize,
    l: usize,
    tau: Vec<f64>,
    /// Wrap-around minimum separation; 1 for a single spike.
    min_separation: f64,
    characteristics: SpectralCharacteristics,
    amplitudes: AmplitudeStats,
    bounds: BoundReport,
    jacobian_norm: f64,
    npf: f64,
    precondition_ok: bool,
    theorem1_dominates: Option<bool>,
    corollary_dominates: Option<bool>,
}

fn report(args: ReportArgs) -> Result<(), Failure> {
    let l = args.l.unwrap_or(args.k);
    check_sizes(args.n, args.k, l)?;
    if l < args.k {
        return Err(usage(format!("--l must be at least K (L = {l}, K = {})", args.k)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let tau = match (&args.taus, args.delta) {
        (Some(raw), None) => {
            let tau: Vec<f64> = raw
                .split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|_| usage(format!("invalid location {s:?}"))))
                .collect::<Result<_, _>>()?;
            if tau.len() != args.k {
                return Err(usage(format!("--taus has {} entries, expected K = {}", tau.len(), args.k)));
            }
            tau
        }
        (None, Some(delta)) => {
            if !(delta.is_finite() && delta > 0.0) {
                return Err(usage("--delta must be positive"));
            }
            sample_separated_spikes(args.k, delta, &mut rng)?
        }
        _ => return Err(usage("give exactly one of --taus or --delta")),
    };
    let x = sample_whitened_amplitudes(args.k, l, &mut rng)?;
    let amplitudes = amplitude_stats(&x)?;
    let characteristics = SpectralCharacteristics::compute(&args.psf, args.n)?;
    let delta = min_separation(&tau);
    let bounds = bound_report(&characteristics, &amplitudes, delta)?;
    let instance = ProblemInstance::new(args.n, args.psf.clone(), tau.clone(), x)?;
    let jac = jacobian_psi_zero(&instance)?;
    let npf = jac.jacobian_norm * instance.signal().norm();
    let out = SensitivityReport {
        psf: args.psf,
        n: args.n,
        k: args.k,
        l,
        tau,
        min_separation: delta,
        characteristics,
        amplitudes,
        precondition_ok: bounds.precondition_ok,
        theorem1_dominates: bounds.theorem1.map(|b| b >= jac.jacobian_norm),
        corollary_dominates: bounds.corollary_npf.map(|b| b >= npf),
        bounds,
        jacobian_norm: jac.jacobian_norm,
        npf,
    };
    let mut json = serde_json::to_vec_pretty(&out).map_err(Error::from)?;
    json.push(b'\n');
    match &args.out {
        Some(path) => write_atomic(path, &json)?,
        None => print!("{}", String::from_utf8_lossy(&json)),
    }
    Ok(())
}

/// Parses `args` (program name first) and runs the chosen subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::SweepDelta(a) => sweep_delta(a).map(|_| true),
        Command::SweepSigma(a) => sweep_sigma(a).map(|_| true),
        Command::Verify(a) => verify(a),
        Command::Report(a) => report(a).map(|_| true),
    };
    match outcome {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_FAILURE,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn list_parsing() {
        assert_eq!(parse_list("0.1, 0.2,0.3", "deltas").ok().unwrap(), vec![0.1, 0.2, 0.3]);
        assert!(matches!(parse_list("", "sigmas"), Err(Failure::Usage(_))));
        assert!(matches!(parse_list("0.1,x", "sigmas"), Err(Failure::Usage(_))));
        assert!(matches!(parse_list("0.1,-2", "sigmas"), Err(Failure::Usage(_))));
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(["spike-sens"]), EXIT_USAGE);
        assert_eq!(run(["spike-sens", "verify", "--n", "0"]), EXIT_USAGE);
        assert_eq!(run(["spike-sens", "verify", "--bogus"]), EXIT_USAGE);
        assert_eq!(run(["spike-sens", "sweep-delta", "--psf", "dirac", "--deltas", "0.1"]), EXIT_USAGE);
        assert_eq!(run(["spike-sens", "--help"]), EXIT_OK);
    }
}
