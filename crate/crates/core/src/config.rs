//! TOML scenario files.
//!
//! Every key carries its unit in its name. Missing sections and keys take
//! the reference values; unknown keys are rejected. Quantities that are not
//! given explicitly (`xi_rad_per_nj`, the noise coefficients, the readout
//! transmission, the facet reflectivity) are derived from the
//! `[calibration]` operating point when the scenario is built.
//!
//! ```toml
//! [signal]
//! wavelength_nm = 902.5
//! input_mean_photons = 1.0
//!
//! [controls.write]
//! q_energy_nj = 2.2
//! p_energy_nj = 2.2
//!
//! [cavity]
//! lifetime_round_trips = 16.0
//!
//! [run]
//! n_trials = 1000000
//! rng_seed = 7
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bsfwm::{calibrate_xi, BsfwmCoupling, ControlPair, Role};
use crate::cavity::{
    reflectivity_from_lifetime, survival_per_round_trip, FiberCavity, Reflectivity, DEFAULT_FIBER_LOSS_DB_PER_KM,
    DEFAULT_GROUP_INDEX, DEFAULT_LENGTH_M,
};
use crate::detection::{DetectionChain, NoiseModel, SpectralWindow};
use crate::error::{Error, Result};
use crate::montecarlo::ExperimentScenario;
use crate::multiplex::{zero_storage_efficiency, MultiplexConfig};
use crate::spectral::{CoatingCurve, Wavelength};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub signal: SignalSection,
    pub controls: ControlsSection,
    pub bsfwm: BsfwmSection,
    pub cavity: CavitySection,
    pub detection: DetectionSection,
    pub noise: NoiseSection,
    pub calibration: CalibrationSection,
    pub run: RunSection,
    pub multiplex: MultiplexSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalSection {
    pub wavelength_nm: f64,
    /// Spectral FWHM, used for the fidelity spectrum.
    pub bandwidth_nm: f64,
    pub duration_ps: f64,
    /// Single-photon-level mean photon number inside the fiber.
    pub input_mean_photons: f64,
    /// Mean photon number for bright-signal runs (`ringdown`, scans).
    pub bright_mean_photons: f64,
}

impl Default for SignalSection {
    fn default() -> Self {
        Self {
            wavelength_nm: 902.5,
            bandwidth_nm: 1.05,
            duration_ps: 1.1,
            input_mean_photons: 1.0,
            bright_mean_photons: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlsSection {
    pub q_wavelength_nm: f64,
    pub p_wavelength_nm: f64,
    pub duration_ps: f64,
    pub read_delay_ns: f64,
    pub write: PairSection,
    pub read: PairSection,
}

impl Default for ControlsSection {
    fn default() -> Self {
        Self {
            q_wavelength_nm: 790.1,
            p_wavelength_nm: 807.4,
            duration_ps: 2.3,
            read_delay_ns: 12.67,
            write: PairSection::default(),
            read: PairSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairSection {
    pub q_energy_nj: f64,
    pub p_energy_nj: f64,
    pub delay_ps: f64,
    /// Calibrated from `[calibration]` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi_rad_per_nj: Option<f64>,
}

impl Default for PairSection {
    fn default() -> Self {
        Self { q_energy_nj: 2.2, p_energy_nj: 2.2, delay_ps: 0.0, xi_rad_per_nj: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BsfwmSection {
    pub walkoff_ps: f64,
}

impl Default for BsfwmSection {
    fn default() -> Self {
        Self { walkoff_ps: 16.6 }
    }
}

/// At most one of `reflectivity`, `lifetime_round_trips`, `coating_csv` may
/// be set. With none of them the cavity uses the effective lifetime under
/// control-pulse operation, 16 round trips.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CavitySection {
    pub length_m: f64,
    pub group_index: f64,
    pub loss_db_per_km: f64,
    pub extra_loss_db_per_round_trip: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reflectivity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lifetime_round_trips: Option<f64>,
    /// `builtin` selects the bundled synthetic curve. Relative paths resolve
    /// against the config file's directory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coating_csv: Option<String>,
}

pub const DEFAULT_LIFETIME_ROUND_TRIPS: f64 = 16.0;

impl Default for CavitySection {
    fn default() -> Self {
        Self {
            length_m: DEFAULT_LENGTH_M,
            group_index: DEFAULT_GROUP_INDEX,
            loss_db_per_km: DEFAULT_FIBER_LOSS_DB_PER_KM,
            extra_loss_db_per_round_trip: 0.0,
            reflectivity: None,
            lifetime_round_trips: None,
            coating_csv: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionSection {
    pub facet_transmission: f64,
    pub collection_efficiency: f64,
    pub spcm_efficiency: f64,
    pub fast_window_center_nm: f64,
    pub slow_window_center_nm: f64,
    pub window_bandwidth_nm: f64,
}

impl Default for DetectionSection {
    fn default() -> Self {
        Self {
            facet_transmission: 0.74,
            collection_efficiency: 0.65,
            spcm_efficiency: 0.44,
            fast_window_center_nm: 902.5,
            slow_window_center_nm: 925.0,
            window_bandwidth_nm: 3.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    /// `a`; calibrated when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raman_coefficient_per_nj: Option<f64>,
    /// `b`; calibrated when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stored_noise_readout_fraction: Option<f64>,
    pub dark_rate_per_s: f64,
    pub gate_ns: f64,
}

/// Operating point the defaults are tuned to: efficiencies and readout-bin
/// noise at `W_q = W_p = energy_nj` for both pairs and optimal delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationSection {
    pub energy_nj: f64,
    pub write_efficiency: f64,
    pub read_efficiency: f64,
    /// Sets the readout transmission so write, one round trip, and read
    /// multiply to this value.
    pub total_efficiency: f64,
    pub noise_photons_per_pulse: f64,
}

impl Default for CalibrationSection {
    fn default() -> Self {
        Self {
            energy_nj: 2.2,
            write_efficiency: 0.95,
            read_efficiency: 0.87,
            total_efficiency: 0.73,
            noise_photons_per_pulse: 0.30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub n_trials: u64,
    pub bright_trials: u64,
    pub rng_seed: u64,
    pub n_bins: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub readout_transmission: Option<f64>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            n_trials: 1_000_000,
            bright_trials: 200_000,
            rng_seed: 20_180_601,
            n_bins: 80,
            readout_transmission: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultiplexSection {
    pub herald_probability: f64,
    pub n_bins: usize,
    pub n_max: usize,
    pub source_heralding_efficiency: f64,
    /// Defaults to the calibrated total efficiency with its one storage round
    /// trip removed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub memory_total_efficiency: Option<f64>,
    /// Defaults to the cavity's survival at the storage wavelength.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub survival_per_round_trip: Option<f64>,
}

impl Default for MultiplexSection {
    fn default() -> Self {
        Self {
            herald_probability: 0.05,
            n_bins: 10,
            n_max: 200,
            source_heralding_efficiency: 1.0,
            memory_total_efficiency: None,
            survival_per_round_trip: None,
        }
    }
}

fn field<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{name}: {msg}")),
        other => Error::Config(format!("{name}: {other}")),
    })
}

fn wavelength(name: &str, nm: f64) -> Result<Wavelength> {
    field(name, Wavelength::new(nm))
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::config(format!("{name} must be > 0, got {v}")));
    }
    Ok(v)
}

fn unit(name: &str, v: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::config(format!("{name} must be in [0, 1], got {v}")));
    }
    Ok(v)
}

impl ConfigFile {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    /// Parses `path`; relative coating paths inside it are resolved against
    /// its directory.
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text =
            std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        let cfg = Self::from_toml_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, base))
    }

    fn coating(&self, base: &Path) -> Result<Option<CoatingCurve>> {
        let Some(path) = &self.cavity.coating_csv else { return Ok(None) };
        if path == "builtin" {
            return Ok(Some(CoatingCurve::builtin()));
        }
        let full = base.join(path);
        let file =
            std::fs::File::open(&full).map_err(|source| Error::Io { path: full.display().to_string(), source })?;
        field("cavity.coating_csv", CoatingCurve::from_csv(file, None)).map(Some)
    }

    pub fn cavity(&self, base: &Path) -> Result<FiberCavity> {
        let c = &self.cavity;
        let given = [c.reflectivity.is_some(), c.lifetime_round_trips.is_some(), c.coating_csv.is_some()];
        if given.iter().filter(|g| **g).count() > 1 {
            return Err(Error::config("cavity: set at most one of reflectivity, lifetime_round_trips, coating_csv"));
        }
        let base_cavity = field(
            "cavity",
            FiberCavity::new(c.length_m, c.group_index, c.loss_db_per_km, Reflectivity::Constant(1.0))
                .and_then(|cav| cav.with_extra_loss_db(c.extra_loss_db_per_round_trip)),
        )?;
        let reflectivity = if let Some(curve) = self.coating(base)? {
            Reflectivity::Coating(curve)
        } else if let Some(r) = c.reflectivity {
            Reflectivity::Constant(unit("cavity.reflectivity", r)?)
        } else {
            let tau = c.lifetime_round_trips.unwrap_or(DEFAULT_LIFETIME_ROUND_TRIPS);
            let tau = positive("cavity.lifetime_round_trips", tau)?;
            Reflectivity::Constant(field("cavity.lifetime_round_trips", reflectivity_from_lifetime(tau, &base_cavity))?)
        };
        field("cavity", base_cavity.with_reflectivity(reflectivity))
    }

    fn pair(&self, role: Role, s: &PairSection, name: &str) -> Result<ControlPair> {
        let q = wavelength("controls.q_wavelength_nm", self.controls.q_wavelength_nm)?;
        let p = wavelength("controls.p_wavelength_nm", self.controls.p_wavelength_nm)?;
        field(name, ControlPair::new(role, q, p, s.q_energy_nj, s.p_energy_nj, s.delay_ps))
    }

    fn coupling(&self, s: &PairSection, target: f64, name: &str) -> Result<BsfwmCoupling> {
        let e = self.calibration.energy_nj;
        let xi = match s.xi_rad_per_nj {
            Some(xi) => xi,
            None => field("calibration", calibrate_xi(target, e, e))?,
        };
        field(name, BsfwmCoupling::new(xi, self.bsfwm.walkoff_ps, self.signal.duration_ps, self.controls.duration_ps))
    }

    /// Single-photon-level scenario with `run.n_trials` trials.
    pub fn to_scenario(&self, base: &Path) -> Result<ExperimentScenario> {
        let signal_wavelength = wavelength("signal.wavelength_nm", self.signal.wavelength_nm)?;
        let cal = &self.calibration;
        for (name, v) in [
            ("calibration.write_efficiency", cal.write_efficiency),
            ("calibration.read_efficiency", cal.read_efficiency),
            ("calibration.total_efficiency", cal.total_efficiency),
        ] {
            unit(name, v)?;
        }
        positive("calibration.energy_nj", cal.energy_nj)?;

        let cavity = self.cavity(base)?;
        let write_pair = self.pair(Role::Write, &self.controls.write, "controls.write")?;
        let read_pair = self.pair(Role::Read, &self.controls.read, "controls.read")?;
        let coupling_write = self.coupling(&self.controls.write, cal.write_efficiency, "controls.write")?;
        let coupling_read = self.coupling(&self.controls.read, cal.read_efficiency, "controls.read")?;

        let storage = field(
            "controls",
            crate::spectral::translate_frequency(
                signal_wavelength,
                write_pair.q_wavelength,
                write_pair.p_wavelength,
                crate::spectral::Shift::Downshift,
            ),
        )?;
        let survival = field("cavity", survival_per_round_trip(&cavity, storage))?;

        let n = &self.noise;
        let calibrated = field(
            "calibration.noise_photons_per_pulse",
            NoiseModel::calibrated(
                cal.noise_photons_per_pulse,
                2.0 * cal.energy_nj,
                2.0 * cal.energy_nj,
                cal.read_efficiency,
                survival,
            ),
        )?;
        let noise = field(
            "noise",
            NoiseModel::new(
                n.raman_coefficient_per_nj.unwrap_or(calibrated.raman_coefficient_per_nj),
                n.stored_noise_readout_fraction.unwrap_or(calibrated.stored_noise_readout_fraction),
                n.dark_rate_per_s,
                n.gate_ns,
            ),
        )?;

        let d = &self.detection;
        let chain =
            field("detection", DetectionChain::new(d.facet_transmission, d.collection_efficiency, d.spcm_efficiency))?;
        let fast_window = field(
            "detection.fast_window_center_nm",
            SpectralWindow::new(
                wavelength("detection.fast_window_center_nm", d.fast_window_center_nm)?,
                d.window_bandwidth_nm,
            ),
        )?;
        let slow_window = field(
            "detection.slow_window_center_nm",
            SpectralWindow::new(
                wavelength("detection.slow_window_center_nm", d.slow_window_center_nm)?,
                d.window_bandwidth_nm,
            ),
        )?;

        let readout_transmission = match self.run.readout_transmission {
            Some(t) => unit("run.readout_transmission", t)?,
            None => {
                let t = cal.total_efficiency / (cal.write_efficiency * survival * cal.read_efficiency);
                if !(t <= 1.0) {
                    return Err(Error::config(format!(
                        "calibration.total_efficiency = {} needs readout transmission {t} > 1 \
                         (write {} x survival {survival} x read {})",
                        cal.total_efficiency, cal.write_efficiency, cal.read_efficiency
                    )));
                }
                t
            }
        };

        if self.run.n_trials == 0 {
            return Err(Error::config("run.n_trials must be >= 1"));
        }
        let scenario = ExperimentScenario {
            signal_wavelength,
            cavity,
            coupling_write,
            coupling_read,
            write_pair,
            read_pair,
            noise,
            chain,
            fast_window,
            slow_window,
            readout_transmission,
            input_mean_photons: self.signal.input_mean_photons,
            read_delay_ns: self.controls.read_delay_ns,
            n_trials: self.run.n_trials,
            rng_seed: self.run.rng_seed,
            n_bins: self.run.n_bins,
            record_tags: false,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Bright-signal variant: `signal.bright_mean_photons` and
    /// `run.bright_trials`.
    pub fn to_bright_scenario(&self, base: &Path) -> Result<ExperimentScenario> {
        if self.run.bright_trials == 0 {
            return Err(Error::config("run.bright_trials must be >= 1"));
        }
        let mut s = self.to_scenario(base)?;
        s.input_mean_photons = self.signal.bright_mean_photons;
        s.n_trials = self.run.bright_trials;
        s.validate()?;
        Ok(s)
    }

    pub fn multiplex(&self, base: &Path) -> Result<MultiplexConfig> {
        let m = &self.multiplex;
        let scenario = self.to_scenario(base)?;
        let survival = match m.survival_per_round_trip {
            Some(p) => p,
            None => field("cavity", survival_per_round_trip(&scenario.cavity, scenario.storage_wavelength()?))?,
        };
        let eta = match m.memory_total_efficiency {
            Some(e) => e,
            None => {
                let p1 = survival_per_round_trip(&scenario.cavity, scenario.storage_wavelength()?)?;
                field("multiplex", zero_storage_efficiency(self.calibration.total_efficiency, p1))?.min(1.0)
            }
        };
        field(
            "multiplex",
            MultiplexConfig::new(m.herald_probability, m.n_bins, eta, survival, m.source_heralding_efficiency),
        )
    }
}

impl ExperimentScenario {
    /// The default configuration at single-photon level.
    pub fn reference() -> Self {
        ConfigFile::default().to_scenario(Path::new(".")).expect("default config is valid")
    }
}
