//! Command-line front end.
//!
//! Every subcommand prints a JSON summary on stdout. With `--out PATH` it
//! also writes its table to `PATH` (CSV) and the summary next to it with a
//! `.json` extension. Exit status: 0 success, 1 usage or configuration
//! error, 2 simulation or fit error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::analysis::{
    extract_efficiencies_with_noise, fit_delay_scan, fit_power_scan, fit_ring_down, spectral_fidelity,
};
use crate::bsfwm::memory_output_spectrum;
use crate::cavity::{lifetime_round_trips, survival_per_round_trip};
use crate::config::ConfigFile;
use crate::detection::detection_efficiency;
use crate::error::{Error, Result};
use crate::montecarlo::{delay_scan, power_scan, run_memory_experiment, run_scenario, ExperimentScenario, ScanStage};
use crate::multiplex::{multiplex_sweep, optimal_bin_count, output_photon_probability, write_sweep_csv};
use crate::spectral::{gaussian_spectrum, uniform_grid, SpectralIntensity};

#[derive(Debug, Parser)]
#[command(name = "cavity-memory", version, about = "Fiber-cavity quantum memory simulator")]
pub struct Cli {
    /// TOML scenario file; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides run.rng_seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// CSV output path; the JSON summary goes next to it.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides the trial count of the subcommand's run.
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bright signal, write controls only: slow-axis ring-down and its fit.
    Ringdown {
        /// Also dump raw time tags as NDJSON.
        #[arg(long)]
        tags: Option<PathBuf>,
    },
    /// Retrieved signal versus signal or read-control delay.
    DelayScan {
        #[arg(long, value_enum, default_value_t = StageArg::ReadVsWrite)]
        stage: StageArg,
        /// Default: -40 to 40 ps in 41 steps.
        #[command(flatten)]
        range: RangeArgs,
    },
    /// Unconverted signal and noise versus write-control energy.
    PowerScan {
        /// Default: 0 to 3 nJ in 16 steps.
        #[command(flatten)]
        range: RangeArgs,
    },
    /// Single-photon-level storage and retrieval: efficiencies, SNR, μ₁.
    Spl,
    /// Output probability of a memory-multiplexed heralded source.
    Multiplex {
        /// Largest bin count in the sweep; overrides multiplex.n_max.
        #[arg(long)]
        n_max: Option<usize>,
        /// Bin count for the headline value; overrides multiplex.n_bins.
        #[arg(long)]
        bins: Option<usize>,
    },
    /// Spectral fidelity between an input and a retrieved spectrum.
    Fidelity {
        /// Input spectrum CSV (`wavelength_nm,intensity`); a Gaussian at the
        /// configured signal when omitted.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Output spectrum CSV; simulated from the input when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StageArg {
    SignalVsWrite,
    ReadVsWrite,
}

impl From<StageArg> for ScanStage {
    fn from(s: StageArg) -> Self {
        match s {
            StageArg::SignalVsWrite => ScanStage::SignalVsWrite,
            StageArg::ReadVsWrite => ScanStage::ReadVsWrite,
        }
    }
}

/// `--from`, `--to`, `--steps`; unset values take per-command defaults.
#[derive(Debug, Clone, Copy, Args)]
pub struct RangeArgs {
    /// First scan point (ps for delay scans, nJ for power scans)
    #[arg(long, allow_negative_numbers = true)]
    pub from: Option<f64>,
    /// Last scan point, inclusive
    #[arg(long, allow_negative_numbers = true)]
    pub to: Option<f64>,
    /// Number of evenly spaced points
    #[arg(long)]
    pub steps: Option<usize>,
}

impl RangeArgs {
    fn points(&self, from: f64, to: f64, steps: usize) -> Result<Vec<f64>> {
        let (from, to) = (self.from.unwrap_or(from), self.to.unwrap_or(to));
        if !from.is_finite() || !to.is_finite() {
            return Err(Error::config("--from and --to must be finite"));
        }
        match self.steps.unwrap_or(steps) {
            0 => Err(Error::config("--steps must be >= 1")),
            1 => Ok(vec![from]),
            n => Ok(uniform_grid(from, to, n)),
        }
    }
}

struct Context {
    config: ConfigFile,
    base: PathBuf,
}

impl Context {
    fn load(cli: &Cli) -> Result<Self> {
        let (mut config, base) = match &cli.config {
            Some(path) => ConfigFile::load(path)?,
            None => (ConfigFile::default(), PathBuf::from(".")),
        };
        if let Some(seed) = cli.seed {
            config.run.rng_seed = seed;
        }
        Ok(Self { config, base })
    }

    fn spl(&self, trials: Option<u64>) -> Result<ExperimentScenario> {
        let mut s = self.config.to_scenario(&self.base)?;
        if let Some(n) = trials {
            s.n_trials = n;
        }
        s.validate()?;
        Ok(s)
    }

    fn bright(&self, trials: Option<u64>) -> Result<ExperimentScenario> {
        let mut s = self.config.to_bright_scenario(&self.base)?;
        if let Some(n) = trials {
            s.n_trials = n;
        }
        s.validate()?;
        Ok(s)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.display().to_string(), source }
}

/// Writes the CSV (if `--out` was given) and returns nothing; the caller
/// emits the summary.
fn write_table(out: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    if let Some(path) = out {
        let mut w = create(path)?;
        f(&mut w).map_err(io_err(path))?;
        w.flush().map_err(io_err(path))?;
    }
    Ok(())
}

fn emit_summary<T: Serialize>(out: Option<&Path>, summary: &T, stdout: &mut dyn Write) -> Result<()> {
    let text = serde_json::to_string_pretty(summary).expect("summary serialises");
    if let Some(path) = out {
        let json_path = path.with_extension("json");
        let mut w = create(&json_path)?;
        writeln!(w, "{text}").map_err(io_err(&json_path))?;
        w.flush().map_err(io_err(&json_path))?;
    }
    writeln!(stdout, "{text}").map_err(io_err(Path::new("<stdout>")))
}

/// Runs one parsed invocation, writing the summary to `stdout`.
pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    let ctx = Context::load(cli)?;
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Ringdown { tags } => {
            let mut s = ctx.bright(cli.trials)?.with_read_off();
            s.record_tags = tags.is_some();
            let run = run_scenario(&s)?;
            write_table(out, |w| run.write_csv(w))?;
            if let Some(path) = tags {
                let mut w = create(path)?;
                run.write_tags(&mut w).map_err(io_err(path))?;
                w.flush().map_err(io_err(path))?;
            }
            let storage = s.storage_wavelength()?;
            let p = survival_per_round_trip(&s.cavity, storage)?;
            if p >= 1.0 {
                return Err(Error::NonDecaying(format!(
                    "survival per round trip at {storage} is 1; the stored light never leaks"
                )));
            }
            let fit = fit_ring_down(&run.slow, (0, s.n_bins))?;
            let summary = json!({
                "lifetime": fit.lifetime,
                "ci95": [fit.ci95_low, fit.ci95_high],
                "r_squared": fit.r_squared,
                "bins_used": fit.bins_used,
                "model_lifetime": lifetime_round_trips(p)?,
                "round_trip_time_ns": s.cavity.round_trip_time_ns(),
                "n_trials": s.n_trials,
                "audit": run.audit,
            });
            emit_summary(out, &summary, stdout)
        }
        Command::DelayScan { stage, range } => {
            let s = ctx.bright(cli.trials)?;
            let scan = delay_scan(&s, &range.points(-40.0, 40.0, 41)?, (*stage).into())?;
            write_table(out, |w| scan.write_csv(w))?;
            let fit = fit_delay_scan(&scan)?;
            let summary = json!({
                "stage": scan.stage,
                "walkoff_ps": fit.walkoff_ps,
                "amplitude": fit.amplitude,
                "r_squared": fit.r_squared,
                "residuals": fit.residuals,
                "n_trials": scan.n_trials,
            });
            emit_summary(out, &summary, stdout)
        }
        Command::PowerScan { range } => {
            let s = ctx.bright(cli.trials)?;
            let energies = range.points(0.0, 3.0, 16)?;
            if let Some(e) = energies.iter().find(|e| !(**e >= 0.0)) {
                return Err(Error::config(format!("control energies must be >= 0, got {e} nJ")));
            }
            let scan = power_scan(&s, &energies)?;
            write_table(out, |w| scan.write_csv(w))?;
            let fit = fit_power_scan(&scan)?;
            let mut summary = serde_json::to_value(fit).expect("fit serialises");
            summary["n_trials"] = json!(s.n_trials);
            emit_summary(out, &summary, stdout)
        }
        Command::Spl => {
            let s = ctx.spl(cli.trials)?;
            let runs = run_memory_experiment(&s)?;
            write_table(out, |w| runs.write_csv(w))?;
            let report = extract_efficiencies_with_noise(
                &runs.off.histograms(),
                &runs.write.histograms(),
                &runs.all.histograms(),
                &runs.noise.histograms(),
                runs.t_read,
                detection_efficiency(&s.chain),
            )?;
            let value = |e: Option<crate::analysis::Estimate>| e.map(|e| e.value);
            let summary = json!({
                "eta_w": report.eta_w.value,
                "eta_r": report.eta_r.value,
                "eta_tot": report.eta_tot.value,
                "snr": value(report.snr),
                "mu1": value(report.mu1),
                "n_noise": value(report.n_noise),
                "std_err": {
                    "eta_w": report.eta_w.std_err,
                    "eta_r": report.eta_r.std_err,
                    "eta_tot": report.eta_tot.std_err,
                    "snr": report.snr.map(|e| e.std_err),
                    "mu1": report.mu1.map(|e| e.std_err),
                    "n_noise": report.n_noise.map(|e| e.std_err),
                },
                "t_read": runs.t_read,
                "n_trials": s.n_trials,
                "input_mean_photons": s.input_mean_photons,
            });
            emit_summary(out, &summary, stdout)
        }
        Command::Multiplex { n_max, bins } => {
            let mut cfg = ctx.config.multiplex(&ctx.base)?;
            if let Some(n) = bins {
                if *n == 0 {
                    return Err(Error::config("--bins must be >= 1"));
                }
                cfg = cfg.with_bins(*n);
            }
            let n_max = n_max.unwrap_or(ctx.config.multiplex.n_max);
            if n_max == 0 {
                return Err(Error::config("--n-max must be >= 1"));
            }
            let sweep = multiplex_sweep(&cfg, n_max);
            write_table(out, |w| write_sweep_csv(&sweep, w))?;
            let best = optimal_bin_count(&cfg, n_max);
            let summary = json!({
                "n_bins": cfg.n_bins,
                "p_out": output_photon_probability(&cfg),
                "p_out_single": output_photon_probability(&cfg.with_bins(1)),
                "optimal_n_bins": best,
                "p_out_optimal": output_photon_probability(&cfg.with_bins(best)),
                "config": cfg,
            });
            emit_summary(out, &summary, stdout)
        }
        Command::Fidelity { input, output } => {
            let s = ctx.spl(None)?;
            let read_spectrum = |path: &Path| -> Result<SpectralIntensity> {
                let f = File::open(path).map_err(io_err(path))?;
                SpectralIntensity::from_csv(f).map_err(|e| Error::config(format!("{}: {e}", path.display())))
            };
            let i_in = match input {
                Some(p) => read_spectrum(p)?,
                None => {
                    let c = s.signal_wavelength.nm();
                    let w = ctx.config.signal.bandwidth_nm;
                    let grid = uniform_grid(c - 5.0 * w, c + 5.0 * w, 2001);
                    gaussian_spectrum(s.signal_wavelength, w, &grid)?
                }
            };
            let i_out = match output {
                Some(p) => read_spectrum(p)?,
                None => memory_output_spectrum(&i_in, &s.write_pair, &s.read_pair, 1.0, None)?,
            };
            let f = spectral_fidelity(&i_in, &i_out)?;
            write_table(out, |w| {
                writeln!(w, "wavelength_nm,intensity_in,intensity_out")?;
                for x in i_in.grid() {
                    writeln!(w, "{x},{},{}", i_in.value_at(*x), i_out.value_at(*x))?;
                }
                Ok(())
            })?;
            emit_summary(out, &json!({ "fidelity": f }), stdout)
        }
    }
}

/// Parses `args`, runs, and returns the process exit code. Messages go to
/// `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if e.use_stderr() { write!(stderr, "{e}") } else { write!(stdout, "{e}") };
            return code;
        }
    };
    match execute(&cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if e.is_runtime() {
                2
            } else {
                1
            }
        }
    }
}
