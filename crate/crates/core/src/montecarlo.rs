//! Trial-by-trial photon simulation of write, storage, read, and detection.
//!
//! Each trial draws a Poisson number of signal photons and follows them one
//! at a time:
//!
//! * bin 0: the write pair may translate the photon onto the slow axis at the
//!   storage wavelength; untranslated photons leave through the exit facet.
//! * every bin `T`: a stored photon reaches the exit facet, where it leaks
//!   with probability `1 − R` (slow-axis detector, bin `T`). Otherwise it
//!   survives the rest of the round trip with probability `R·F`.
//! * bin `T_read`: before reaching the exit facet the read pair may translate
//!   it back to the signal wavelength; it then exits on the fast axis.
//!
//! Raman noise photons are injected on the fast axis at the signal
//! wavelength in bin 0 (write controls) and bin `T_read` (read controls).
//!
//! Trial `i` draws from its own ChaCha8 stream `(seed, i)`, so histograms do
//! not depend on how trials are split across workers.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::bsfwm::{
    conversion_angle, delay_profile, BsfwmCoupling, ControlPair, Photon, PolarizationAxis, Translation,
};
use crate::cavity::FiberCavity;
use crate::detection::{pair_noise_mean, DetectionChain, NoiseModel, SpectralWindow};
use crate::error::{Error, Result};
use crate::spectral::{translate_frequency, Shift, Wavelength};

/// Trials per work unit. Fixed so the merge order never matters.
const BLOCK_TRIALS: u64 = 2048;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentScenario {
    pub signal_wavelength: Wavelength,
    pub cavity: FiberCavity,
    pub coupling_write: BsfwmCoupling,
    pub coupling_read: BsfwmCoupling,
    pub write_pair: ControlPair,
    pub read_pair: ControlPair,
    pub noise: NoiseModel,
    pub chain: DetectionChain,
    pub fast_window: SpectralWindow,
    pub slow_window: SpectralWindow,
    /// Extra transmission applied to photons released by the read.
    pub readout_transmission: f64,
    /// Mean signal photons per pulse inside the fiber.
    pub input_mean_photons: f64,
    pub read_delay_ns: f64,
    pub n_trials: u64,
    pub rng_seed: u64,
    pub n_bins: usize,
    /// Keep every detection as a raw time tag.
    pub record_tags: bool,
}

impl ExperimentScenario {
    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::config("n_trials must be >= 1"));
        }
        if self.n_bins == 0 {
            return Err(Error::config("n_bins must be >= 1"));
        }
        if !(self.input_mean_photons >= 0.0) || !self.input_mean_photons.is_finite() {
            return Err(Error::config(format!("input_mean_photons must be >= 0, got {}", self.input_mean_photons)));
        }
        if !(self.read_delay_ns >= 0.0) || !self.read_delay_ns.is_finite() {
            return Err(Error::config(format!("read_delay_ns must be >= 0, got {}", self.read_delay_ns)));
        }
        if !(0.0..=1.0).contains(&self.readout_transmission) {
            return Err(Error::config(format!("readout_transmission {} outside [0, 1]", self.readout_transmission)));
        }
        let t_read = self.read_bin();
        if t_read >= self.n_bins {
            return Err(Error::config(format!(
                "read bin {t_read} (read_delay_ns = {}) must be < n_bins = {}",
                self.read_delay_ns, self.n_bins
            )));
        }
        self.storage_wavelength()?;
        Ok(())
    }

    /// Round-trip index at which the read pair acts.
    pub fn read_bin(&self) -> usize {
        (self.read_delay_ns / self.cavity.round_trip_time_ns()).round() as usize
    }

    pub fn storage_wavelength(&self) -> Result<Wavelength> {
        translate_frequency(
            self.signal_wavelength,
            self.write_pair.q_wavelength,
            self.write_pair.p_wavelength,
            Shift::Downshift,
        )
    }

    pub fn write_efficiency(&self) -> f64 {
        Translation::new(&self.write_pair, &self.coupling_write, self.signal_wavelength)
            .map(|t| t.probability)
            .unwrap_or(0.0)
    }

    pub fn read_efficiency(&self) -> f64 {
        self.storage_wavelength()
            .and_then(|r| Translation::new(&self.read_pair, &self.coupling_read, r))
            .map(|t| t.probability)
            .unwrap_or(0.0)
    }

    /// Mean Raman noise photons in bin 0 and in the read bin.
    pub fn noise_means(&self) -> (f64, f64) {
        let write = if self.write_pair.is_off() { 0.0 } else { pair_noise_mean(&self.noise, &self.write_pair) };
        let read = if self.read_pair.is_off() {
            0.0
        } else {
            let kappa = delay_profile(&self.coupling_read, self.read_pair.delay_ps);
            pair_noise_mean(&self.noise, &self.read_pair)
                + self.noise.stored_noise_readout_fraction * kappa * pair_noise_mean(&self.noise, &self.write_pair)
        };
        (write, read)
    }

    pub fn with_controls_off(&self) -> Self {
        Self { write_pair: self.write_pair.switched_off(), read_pair: self.read_pair.switched_off(), ..self.clone() }
    }

    pub fn with_read_off(&self) -> Self {
        Self { read_pair: self.read_pair.switched_off(), ..self.clone() }
    }

    pub fn with_input(&self, mean_photons: f64) -> Self {
        Self { input_mean_photons: mean_photons, ..self.clone() }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { rng_seed: seed, ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeTagHistogram {
    pub axis: PolarizationAxis,
    pub counts: Vec<u64>,
    pub n_trials: u64,
}

impl TimeTagHistogram {
    pub fn new(axis: PolarizationAxis, n_bins: usize, n_trials: u64) -> Self {
        Self { axis, counts: vec![0; n_bins], n_trials }
    }

    pub fn from_counts(axis: PolarizationAxis, counts: Vec<u64>, n_trials: u64) -> Self {
        Self { axis, counts, n_trials }
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Counts per trial in `bin`.
    pub fn rate(&self, bin: usize) -> f64 {
        self.counts[bin] as f64 / self.n_trials as f64
    }

    fn merge(&mut self, other: &Self) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }
}

/// Fast- and slow-axis histograms from one run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramSet {
    pub fast: TimeTagHistogram,
    pub slow: TimeTagHistogram,
}

impl HistogramSet {
    pub fn n_trials(&self) -> u64 {
        self.fast.n_trials
    }
}

/// Where every simulated photon ended up. Dark counts are tracked apart.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhotonAudit {
    pub signal_generated: u64,
    pub noise_generated: u64,
    pub detected: u64,
    /// Blocked by a collection window.
    pub filtered: u64,
    /// Reflected at the exit facet or missed by collection/SPCM.
    pub undetected: u64,
    /// Propagation, input-facet, or readout loss.
    pub lost_in_cavity: u64,
    pub remaining_in_cavity: u64,
    pub dark_counts: u64,
}

impl PhotonAudit {
    pub fn generated(&self) -> u64 {
        self.signal_generated + self.noise_generated
    }

    pub fn accounted(&self) -> u64 {
        self.detected + self.filtered + self.undetected + self.lost_in_cavity + self.remaining_in_cavity
    }

    pub fn is_balanced(&self) -> bool {
        self.generated() == self.accounted()
    }

    fn merge(&mut self, o: &Self) {
        self.signal_generated += o.signal_generated;
        self.noise_generated += o.noise_generated;
        self.detected += o.detected;
        self.filtered += o.filtered;
        self.undetected += o.undetected;
        self.lost_in_cavity += o.lost_in_cavity;
        self.remaining_in_cavity += o.remaining_in_cavity;
        self.dark_counts += o.dark_counts;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeTag {
    pub trial_index: u64,
    pub time_ns: f64,
    pub axis: PolarizationAxis,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutput {
    pub fast: TimeTagHistogram,
    pub slow: TimeTagHistogram,
    pub audit: PhotonAudit,
    /// Empty unless `record_tags` was set. Ordered by trial.
    pub tags: Vec<TimeTag>,
}

impl ScenarioOutput {
    fn empty(n_bins: usize, n_trials: u64) -> Self {
        Self {
            fast: TimeTagHistogram::new(PolarizationAxis::Fast, n_bins, n_trials),
            slow: TimeTagHistogram::new(PolarizationAxis::Slow, n_bins, n_trials),
            audit: PhotonAudit::default(),
            tags: Vec::new(),
        }
    }

    pub fn histograms(&self) -> HistogramSet {
        HistogramSet { fast: self.fast.clone(), slow: self.slow.clone() }
    }

    fn merge(mut self, other: Self) -> Self {
        self.fast.merge(&other.fast);
        self.slow.merge(&other.slow);
        self.audit.merge(&other.audit);
        self.tags.extend(other.tags);
        self
    }

    /// `bin,counts_fast,counts_slow`
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "bin,counts_fast,counts_slow")?;
        for (i, (f, s)) in self.fast.counts.iter().zip(&self.slow.counts).enumerate() {
            writeln!(out, "{i},{f},{s}")?;
        }
        Ok(())
    }

    /// One JSON object per line: `trial_index`, `time_ns`, `axis`.
    pub fn write_tags<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for tag in &self.tags {
            serde_json::to_writer(&mut out, tag)?;
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Everything a trial needs, resolved once per run.
struct Plan {
    signal: Photon,
    write: Translation,
    read: Translation,
    read_on: bool,
    t_read: usize,
    leak: f64,
    keep: f64,
    facet: f64,
    post_facet: f64,
    readout: f64,
    fast_window: SpectralWindow,
    slow_window: SpectralWindow,
    round_trip_ns: f64,
    n_bins: usize,
    signal_source: Option<Poisson<f64>>,
    write_noise: Option<Poisson<f64>>,
    read_noise: Option<Poisson<f64>>,
    dark: Option<Poisson<f64>>,
    record_tags: bool,
    key: [u8; 32],
}

fn poisson(mean: f64) -> Result<Option<Poisson<f64>>> {
    if mean <= 0.0 {
        return Ok(None);
    }
    Poisson::new(mean).map(Some).map_err(|e| Error::domain(format!("poisson mean {mean}: {e}")))
}

impl Plan {
    fn new(s: &ExperimentScenario) -> Result<Self> {
        s.validate()?;
        let storage = s.storage_wavelength()?;
        let write = Translation::new(&s.write_pair, &s.coupling_write, s.signal_wavelength)?;
        let read = Translation::new(&s.read_pair, &s.coupling_read, storage)?;
        let r = s.cavity.reflectivity_at(storage)?;
        let (write_noise, read_noise) = s.noise_means();
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&s.rng_seed.to_le_bytes());
        Ok(Self {
            signal: Photon { wavelength: s.signal_wavelength, axis: PolarizationAxis::Fast },
            write,
            read,
            read_on: !s.read_pair.is_off(),
            t_read: s.read_bin(),
            leak: 1.0 - r,
            keep: r * s.cavity.propagation_transmission(),
            facet: s.chain.facet_transmission,
            post_facet: s.chain.post_facet_efficiency(),
            readout: s.readout_transmission,
            fast_window: s.fast_window,
            slow_window: s.slow_window,
            round_trip_ns: s.cavity.round_trip_time_ns(),
            n_bins: s.n_bins,
            signal_source: poisson(s.input_mean_photons)?,
            write_noise: poisson(write_noise)?,
            read_noise: poisson(read_noise)?,
            dark: poisson(s.noise.dark_counts_per_gate())?,
            record_tags: s.record_tags,
            key,
        })
    }

    fn trial_rng(&self, trial: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(trial);
        rng
    }

    fn record(&self, out: &mut ScenarioOutput, trial: u64, axis: PolarizationAxis, bin: usize) {
        match axis {
            PolarizationAxis::Fast => out.fast.counts[bin] += 1,
            PolarizationAxis::Slow => out.slow.counts[bin] += 1,
        }
        if self.record_tags {
            out.tags.push(TimeTag { trial_index: trial, time_ns: bin as f64 * self.round_trip_ns, axis });
        }
    }

    /// Photon inside the fiber at the exit facet, about to leave on the fast
    /// axis.
    fn exit_fast(&self, rng: &mut ChaCha8Rng, out: &mut ScenarioOutput, trial: u64, photon: Photon, bin: usize) {
        if rng.random::<f64>() >= self.facet {
            out.audit.undetected += 1;
        } else {
            self.collect(rng, out, trial, photon, PolarizationAxis::Fast, bin);
        }
    }

    /// Photon already outside the fiber, heading for the `axis` collection
    /// fiber.
    fn collect(
        &self,
        rng: &mut ChaCha8Rng,
        out: &mut ScenarioOutput,
        trial: u64,
        photon: Photon,
        axis: PolarizationAxis,
        bin: usize,
    ) {
        let window = match axis {
            PolarizationAxis::Fast => &self.fast_window,
            PolarizationAxis::Slow => &self.slow_window,
        };
        if !window.passes(photon.wavelength) {
            out.audit.filtered += 1;
        } else if rng.random::<f64>() >= self.post_facet {
            out.audit.undetected += 1;
        } else {
            out.audit.detected += 1;
            self.record(out, trial, axis, bin);
        }
    }

    fn signal_photon(&self, rng: &mut ChaCha8Rng, out: &mut ScenarioOutput, trial: u64) {
        let mut photon = self.write.apply(self.signal, rng.random());
        if photon.axis == PolarizationAxis::Fast {
            self.exit_fast(rng, out, trial, photon, 0);
            return;
        }
        for bin in 0..self.n_bins {
            if self.read_on && bin == self.t_read {
                photon = self.read.apply(photon, rng.random());
                if photon.axis == PolarizationAxis::Fast {
                    if rng.random::<f64>() >= self.readout {
                        out.audit.lost_in_cavity += 1;
                    } else {
                        self.exit_fast(rng, out, trial, photon, bin);
                    }
                    return;
                }
            }
            if rng.random::<f64>() < self.leak {
                self.collect(rng, out, trial, photon, PolarizationAxis::Slow, bin);
                return;
            }
            if bin + 1 == self.n_bins {
                break;
            }
            if rng.random::<f64>() >= self.keep {
                out.audit.lost_in_cavity += 1;
                return;
            }
        }
        out.audit.remaining_in_cavity += 1;
    }

    fn noise_photons(
        &self,
        rng: &mut ChaCha8Rng,
        out: &mut ScenarioOutput,
        trial: u64,
        source: &Poisson<f64>,
        bin: usize,
    ) {
        let n = source.sample(rng) as u64;
        out.audit.noise_generated += n;
        for _ in 0..n {
            self.exit_fast(rng, out, trial, self.signal, bin);
        }
    }

    fn run_trial(&self, trial: u64, out: &mut ScenarioOutput) {
        let mut rng = self.trial_rng(trial);
        if let Some(src) = &self.signal_source {
            let n = src.sample(&mut rng) as u64;
            out.audit.signal_generated += n;
            for _ in 0..n {
                self.signal_photon(&mut rng, out, trial);
            }
        }
        if let Some(src) = &self.write_noise {
            self.noise_photons(&mut rng, out, trial, src, 0);
        }
        if self.read_on {
            if let Some(src) = &self.read_noise {
                self.noise_photons(&mut rng, out, trial, src, self.t_read);
            }
        }
        if let Some(dark) = &self.dark {
            for bin in 0..self.n_bins {
                for axis in [PolarizationAxis::Fast, PolarizationAxis::Slow] {
                    let n = dark.sample(&mut rng) as u64;
                    out.audit.dark_counts += n;
                    for _ in 0..n {
                        self.record(out, trial, axis, bin);
                    }
                }
            }
        }
    }

    fn run_block(&self, block: u64, n_trials: u64) -> ScenarioOutput {
        let mut out = ScenarioOutput::empty(self.n_bins, n_trials);
        let start = block * BLOCK_TRIALS;
        let end = (start + BLOCK_TRIALS).min(n_trials);
        for trial in start..end {
            self.run_trial(trial, &mut out);
        }
        out
    }
}

/// Simulates `scenario.n_trials` trials and returns per-axis histograms.
/// Output depends only on the scenario, not on the number of workers.
pub fn run_scenario(scenario: &ExperimentScenario) -> Result<ScenarioOutput> {
    let plan = Plan::new(scenario)?;
    let n = scenario.n_trials;
    let blocks = n.div_ceil(BLOCK_TRIALS);
    let empty = || ScenarioOutput::empty(scenario.n_bins, n);

    #[cfg(feature = "parallel")]
    let out = {
        use rayon::prelude::*;
        // Ordered reduction keeps the tag list sorted by trial.
        (0..blocks).into_par_iter().map(|b| plan.run_block(b, n)).reduce(empty, ScenarioOutput::merge)
    };
    #[cfg(not(feature = "parallel"))]
    let out = (0..blocks).map(|b| plan.run_block(b, n)).fold(empty(), ScenarioOutput::merge);

    Ok(out)
}

/// Runs `f` with every simulation inside it limited to `workers` threads.
#[cfg(feature = "parallel")]
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// [`run_scenario`] on a dedicated pool of `workers` threads.
#[cfg(feature = "parallel")]
pub fn run_scenario_with_workers(scenario: &ExperimentScenario, workers: usize) -> Result<ScenarioOutput> {
    with_workers(workers, || run_scenario(scenario))?
}

/// SplitMix64 finaliser, used to derive independent seeds for companion runs.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The four runs of a memory characterisation: signal alone, write only,
/// write and read, and write and read without signal (noise).
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryRuns {
    pub off: ScenarioOutput,
    pub write: ScenarioOutput,
    pub all: ScenarioOutput,
    pub noise: ScenarioOutput,
    pub t_read: usize,
}

impl MemoryRuns {
    /// Bin-by-bin CSV of all eight histograms.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "bin,off_fast,off_slow,write_fast,write_slow,all_fast,all_slow,noise_fast,noise_slow")?;
        for i in 0..self.off.fast.n_bins() {
            writeln!(
                out,
                "{i},{},{},{},{},{},{},{},{}",
                self.off.fast.counts[i],
                self.off.slow.counts[i],
                self.write.fast.counts[i],
                self.write.slow.counts[i],
                self.all.fast.counts[i],
                self.all.slow.counts[i],
                self.noise.fast.counts[i],
                self.noise.slow.counts[i],
            )?;
        }
        Ok(())
    }
}

pub fn run_memory_experiment(scenario: &ExperimentScenario) -> Result<MemoryRuns> {
    let seed = scenario.rng_seed;
    Ok(MemoryRuns {
        off: run_scenario(&scenario.with_controls_off().with_seed(derive_seed(seed, 1)))?,
        write: run_scenario(&scenario.with_read_off().with_seed(derive_seed(seed, 2)))?,
        all: run_scenario(&scenario.with_seed(derive_seed(seed, 3)))?,
        noise: run_scenario(&scenario.with_input(0.0).with_seed(derive_seed(seed, 4)))?,
        t_read: scenario.read_bin(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanStage {
    /// Signal delay relative to fixed write controls.
    SignalVsWrite,
    /// Read-control delay relative to fixed signal and write controls.
    ReadVsWrite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    /// Delay in ps for delay scans, `√(W_q·W_p)` in nJ for power scans.
    pub x: f64,
    pub signal_rate: f64,
    pub noise_rate: f64,
    pub corrected_rate: f64,
}

/// Fast-axis readout-bin rates (detections per trial) versus delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayScan {
    pub stage: ScanStage,
    /// Coupling of the scanned stage; the fit keeps its pulse durations.
    pub coupling: BsfwmCoupling,
    /// Peak rotation angle of the scanned stage.
    pub theta_max: f64,
    pub n_trials: u64,
    pub rows: Vec<ScanRow>,
}

impl DelayScan {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "delay_ps,signal_rate,noise_rate,corrected_rate")?;
        for r in &self.rows {
            writeln!(out, "{},{},{},{}", r.x, r.signal_rate, r.noise_rate, r.corrected_rate)?;
        }
        Ok(())
    }
}

pub fn delay_scan(scenario: &ExperimentScenario, delays: &[f64], stage: ScanStage) -> Result<DelayScan> {
    scenario.validate()?;
    let t_read = scenario.read_bin();
    let mut rows = Vec::with_capacity(delays.len());
    for (i, &delay) in delays.iter().enumerate() {
        let mut s = scenario.clone();
        match stage {
            ScanStage::SignalVsWrite => s.write_pair = s.write_pair.with_delay(delay)?,
            ScanStage::ReadVsWrite => s.read_pair = s.read_pair.with_delay(delay)?,
        }
        let i = i as u64;
        let signal = run_scenario(&s.with_seed(derive_seed(scenario.rng_seed, 2 * i + 100)))?;
        let noise = run_scenario(&s.with_input(0.0).with_seed(derive_seed(scenario.rng_seed, 2 * i + 101)))?;
        let signal_rate = signal.fast.rate(t_read);
        let noise_rate = noise.fast.rate(t_read);
        rows.push(ScanRow { x: delay, signal_rate, noise_rate, corrected_rate: signal_rate - noise_rate });
    }
    let (coupling, pair) = match stage {
        ScanStage::SignalVsWrite => (scenario.coupling_write, scenario.write_pair),
        ScanStage::ReadVsWrite => (scenario.coupling_read, scenario.read_pair),
    };
    Ok(DelayScan { stage, coupling, theta_max: conversion_angle(&coupling, &pair), n_trials: scenario.n_trials, rows })
}

/// Fast-axis bin-0 rates of the write-only scenario versus control energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerScan {
    pub n_trials: u64,
    pub rows: Vec<ScanRow>,
}

impl PowerScan {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "sqrt_wq_wp_nj,signal_rate,noise_rate,corrected_rate")?;
        for r in &self.rows {
            writeln!(out, "{},{},{},{}", r.x, r.signal_rate, r.noise_rate, r.corrected_rate)?;
        }
        Ok(())
    }
}

/// Sets `W_q = W_p = E` for every `E` in `energies` (nJ) with the read
/// controls off.
pub fn power_scan(scenario: &ExperimentScenario, energies: &[f64]) -> Result<PowerScan> {
    scenario.validate()?;
    let base = scenario.with_read_off();
    let mut rows = Vec::with_capacity(energies.len());
    for (i, &e) in energies.iter().enumerate() {
        let mut s = base.clone();
        s.write_pair = s.write_pair.with_energies(e, e)?;
        let i = i as u64;
        let signal = run_scenario(&s.with_seed(derive_seed(scenario.rng_seed, 2 * i + 1000)))?;
        let noise = run_scenario(&s.with_input(0.0).with_seed(derive_seed(scenario.rng_seed, 2 * i + 1001)))?;
        let signal_rate = signal.fast.rate(0);
        let noise_rate = noise.fast.rate(0);
        rows.push(ScanRow { x: e, signal_rate, noise_rate, corrected_rate: signal_rate - noise_rate });
    }
    Ok(PowerScan { n_trials: scenario.n_trials, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bsfwm::calibrate_xi;
    use crate::cavity::Reflectivity;

    fn reference(n_trials: u64) -> ExperimentScenario {
        ExperimentScenario { n_trials, n_bins: 40, ..ExperimentScenario::reference() }
    }

    fn noiseless(mut s: ExperimentScenario) -> ExperimentScenario {
        s.noise = NoiseModel::new(0.0, 0.0, 0.0, 0.0).unwrap();
        s
    }

    /// `|observed − expected| ≤ 3√expected`, with a floor for tiny means.
    fn within_3_sigma(observed: u64, expected: f64) -> bool {
        (observed as f64 - expected).abs() <= 3.0 * expected.max(1.0).sqrt()
    }

    #[test]
    fn same_seed_same_output_for_any_worker_count() {
        let mut s = reference(10_000);
        s.record_tags = true;
        s.noise = NoiseModel::new(0.05, 0.8, 2e5, 12.67).unwrap();
        let one = run_scenario_with_workers(&s, 1).unwrap();
        assert!(!one.tags.is_empty());
        for workers in [2, 8] {
            assert_eq!(run_scenario_with_workers(&s, workers).unwrap(), one);
        }
        assert_ne!(run_scenario(&s.with_seed(s.rng_seed + 1)).unwrap().fast, one.fast);
    }

    #[test]
    fn audit_balances() {
        let mut s = reference(20_000).with_input(3.0);
        s.noise = NoiseModel::new(0.05, 0.8, 1e5, 12.67).unwrap();
        s.n_bins = 5;
        let out = run_scenario(&s).unwrap();
        let a = out.audit;
        assert!(a.is_balanced(), "{a:?}");
        assert!(a.remaining_in_cavity > 0 && a.lost_in_cavity > 0 && a.noise_generated > 0);
        assert_eq!(out.fast.total() + out.slow.total(), a.detected + a.dark_counts);
    }

    #[test]
    fn perfect_memory_detects_every_photon_once_at_readout() {
        let mut s = noiseless(reference(5_000).with_input(2.0));
        s.cavity = FiberCavity::new(1.285, 1.478, 0.0, Reflectivity::Constant(1.0)).unwrap();
        let xi = calibrate_xi(1.0, 2.2, 2.2).unwrap();
        s.coupling_write = s.coupling_write.with_xi(xi).unwrap();
        s.coupling_read = s.coupling_read.with_xi(xi).unwrap();
        s.chain = DetectionChain::new(1.0, 1.0, 1.0).unwrap();
        s.readout_transmission = 1.0;
        s.read_delay_ns = 3.0 * s.cavity.round_trip_time_ns();
        s.record_tags = true;
        let out = run_scenario(&s).unwrap();
        assert_eq!(out.audit.detected, out.audit.signal_generated);
        assert_eq!(out.fast.counts[3], out.audit.signal_generated);
        assert_eq!(out.fast.total() + out.slow.total(), out.fast.counts[3]);
        // one tag per photon, each at 3 τ_rt, trials non-decreasing
        assert_eq!(out.tags.len() as u64, out.audit.signal_generated);
        assert!(out.tags.windows(2).all(|w| w[0].trial_index <= w[1].trial_index));
        assert!(out.tags.iter().all(|t| (t.time_ns - 3.0 * s.cavity.round_trip_time_ns()).abs() < 1e-12));
    }

    #[test]
    fn controls_off_leaves_signal_in_bin_zero() {
        let s = noiseless(reference(20_000).with_input(5.0)).with_controls_off();
        let out = run_scenario(&s).unwrap();
        assert_eq!(out.slow.total(), 0);
        assert_eq!(out.fast.total(), out.fast.counts[0]);
        let expected = 5.0 * 20_000.0 * crate::detection::detection_efficiency(&s.chain);
        assert!(within_3_sigma(out.fast.counts[0], expected));
    }

    #[test]
    fn write_only_rings_down_and_read_releases() {
        let s = noiseless(reference(50_000).with_input(5.0));
        let write = run_scenario(&s.with_read_off()).unwrap();
        let all = run_scenario(&s).unwrap();
        // slow-axis ratio ≈ p between neighbouring bins
        let p = survival_per_round_trip_of(&s);
        let sum = |r: std::ops::Range<usize>| write.slow.counts[r].iter().sum::<u64>() as f64;
        let ratio = sum(1..31) / sum(0..30);
        assert!((ratio - p).abs() < 0.01, "ratio {ratio}, p {p}");
        // bin 0 identical in distribution; later slow bins cut by 1 − η_r
        let cut = all.slow.counts[1..].iter().sum::<u64>() as f64 / write.slow.counts[1..].iter().sum::<u64>() as f64;
        assert!((cut - 0.13).abs() < 0.02, "cut {cut}");
        assert!(all.fast.counts[1] > 10 * write.fast.counts[1].max(1));
    }

    fn survival_per_round_trip_of(s: &ExperimentScenario) -> f64 {
        crate::cavity::survival_per_round_trip(&s.cavity, s.storage_wavelength().unwrap()).unwrap()
    }

    #[test]
    fn histograms_match_closed_form() {
        let n = 1_000_000u64;
        let s = noiseless(reference(n));
        let out = run_scenario(&s).unwrap();
        let nin = s.input_mean_photons * n as f64;
        let storage = s.storage_wavelength().unwrap();
        let r = s.cavity.reflectivity_at(storage).unwrap();
        let p = survival_per_round_trip_of(&s);
        let (ew, er) = (s.write_efficiency(), s.read_efficiency());
        let post = s.chain.post_facet_efficiency();
        let ts = s.chain.facet_transmission;
        let t_read = s.read_bin();

        assert!(within_3_sigma(out.fast.counts[0], nin * (1.0 - ew) * ts * post));
        assert!(within_3_sigma(
            out.fast.counts[t_read],
            nin * ew * p.powi(t_read as i32) * er * s.readout_transmission * ts * post
        ));
        for bin in 0..12 {
            let after_read = if bin >= t_read { 1.0 - er } else { 1.0 };
            let expected = nin * ew * p.powi(bin as i32) * after_read * (1.0 - r) * post;
            assert!(
                within_3_sigma(out.slow.counts[bin], expected),
                "bin {bin}: {} vs {expected}",
                out.slow.counts[bin]
            );
        }
    }

    #[test]
    fn noise_means_follow_model() {
        let n = 400_000u64;
        let s = reference(n).with_input(0.0);
        let out = run_scenario(&s).unwrap();
        let (w, r) = s.noise_means();
        let eta = crate::detection::detection_efficiency(&s.chain);
        assert!(within_3_sigma(out.fast.counts[0], w * n as f64 * eta));
        assert!(within_3_sigma(out.fast.counts[s.read_bin()], r * n as f64 * eta));
        assert_eq!(out.slow.total(), 0);
        assert_eq!(s.with_read_off().noise_means().1, 0.0);
    }

    #[test]
    fn rejects_read_beyond_histogram() {
        let mut s = reference(10);
        s.n_bins = 1;
        assert!(matches!(run_scenario(&s), Err(Error::Config(_))));
    }

    #[test]
    fn seeds_derive_apart() {
        assert_ne!(derive_seed(1, 1), derive_seed(1, 2));
        assert_ne!(derive_seed(1, 1), derive_seed(2, 1));
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
    }

    #[test]
    fn csv_layout() {
        let out = run_scenario(&ExperimentScenario { n_bins: 2, read_delay_ns: 0.0, ..reference(10) }).unwrap();
        let mut buf = Vec::new();
        out.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("bin,counts_fast,counts_slow\n0,"));
        assert_eq!(text.lines().count(), 3);
    }
}
