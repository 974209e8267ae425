//! Detection chain, collection windows, and the phenomenological Raman noise
//! model.

use serde::{Deserialize, Serialize};

use crate::bsfwm::ControlPair;
use crate::error::{Error, Result};
use crate::spectral::Wavelength;

fn unit_interval(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::domain(format!("{name} = {v} outside [0, 1]")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionChain {
    /// Exit facet transmission at the signal wavelength, `T_s`.
    pub facet_transmission: f64,
    /// Facet to SPCM collection efficiency, `η_c`.
    pub collection_efficiency: f64,
    /// SPCM quantum efficiency.
    pub spcm_efficiency: f64,
}

impl DetectionChain {
    pub fn new(facet_transmission: f64, collection_efficiency: f64, spcm_efficiency: f64) -> Result<Self> {
        unit_interval("facet transmission", facet_transmission)?;
        unit_interval("collection efficiency", collection_efficiency)?;
        unit_interval("SPCM efficiency", spcm_efficiency)?;
        Ok(Self { facet_transmission, collection_efficiency, spcm_efficiency })
    }

    /// Click probability for a photon already outside the fiber.
    pub fn post_facet_efficiency(&self) -> f64 {
        self.collection_efficiency * self.spcm_efficiency
    }
}

impl Default for DetectionChain {
    fn default() -> Self {
        Self { facet_transmission: 0.74, collection_efficiency: 0.65, spcm_efficiency: 0.44 }
    }
}

/// `T_s · η_c · η_SPCM`
pub fn detection_efficiency(chain: &DetectionChain) -> f64 {
    chain.facet_transmission * chain.collection_efficiency * chain.spcm_efficiency
}

/// Binary band-pass filter in front of a collection fiber.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralWindow {
    pub center: Wavelength,
    pub bandwidth_nm: f64,
}

impl SpectralWindow {
    pub fn new(center: Wavelength, bandwidth_nm: f64) -> Result<Self> {
        if !(bandwidth_nm > 0.0) || !bandwidth_nm.is_finite() {
            return Err(Error::domain(format!("window bandwidth must be > 0, got {bandwidth_nm} nm")));
        }
        Ok(Self { center, bandwidth_nm })
    }

    pub fn passes(&self, lambda: Wavelength) -> bool {
        (lambda.nm() - self.center.nm()).abs() <= 0.5 * self.bandwidth_nm
    }
}

/// Raman noise, linear in control energy.
///
/// The readout bin sees direct noise from the read controls plus noise
/// generated by the write controls, stored, and translated out by the read.
/// The split between the two terms is a calibration convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// `a`: noise photons per pulse per nJ of control energy.
    pub raman_coefficient_per_nj: f64,
    /// `b`: fraction of write-generated noise that the read returns.
    pub stored_noise_readout_fraction: f64,
    pub dark_rate_per_s: f64,
    /// Detection gate for dark counts, ns.
    pub gate_ns: f64,
}

impl NoiseModel {
    pub fn new(a: f64, b: f64, dark_rate_per_s: f64, gate_ns: f64) -> Result<Self> {
        for (name, v) in [
            ("raman coefficient", a),
            ("stored noise readout fraction", b),
            ("dark rate", dark_rate_per_s),
            ("gate", gate_ns),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::domain(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(Self { raman_coefficient_per_nj: a, stored_noise_readout_fraction: b, dark_rate_per_s, gate_ns })
    }

    /// Chooses `a` and `b` so that the readout-bin noise at optimal read delay
    /// totals `target` photons per pulse, with `b = η_r · p_stored`.
    pub fn calibrated(
        target: f64,
        write_energy_nj: f64,
        read_energy_nj: f64,
        read_efficiency: f64,
        stored_survival: f64,
    ) -> Result<Self> {
        let b = read_efficiency * stored_survival;
        let per_a = read_energy_nj + b * write_energy_nj;
        if !(per_a > 0.0) {
            return Err(Error::domain("noise calibration needs non-zero control energy"));
        }
        Self::new(target / per_a, b, 0.0, 0.0)
    }

    pub fn dark_counts_per_gate(&self) -> f64 {
        self.dark_rate_per_s * self.gate_ns * 1e-9
    }
}

impl Default for NoiseModel {
    /// 0.30 photons/pulse at 2.2 nJ per control, η_r = 0.87, τ_c = 16.
    fn default() -> Self {
        Self::calibrated(0.30, 4.4, 4.4, 0.87, (-1.0f64 / 16.0).exp()).expect("valid calibration")
    }
}

/// Direct Raman noise from one control pair, photons/pulse.
pub fn pair_noise_mean(model: &NoiseModel, pair: &ControlPair) -> f64 {
    model.raman_coefficient_per_nj * pair.total_energy_nj()
}

/// Mean noise in the readout bin, photons per pulse:
/// `a·(W_q^r + W_p^r) + b·κ·a·(W_q^w + W_p^w)` plus dark counts per gate.
pub fn noise_mean(model: &NoiseModel, write: &ControlPair, read: &ControlPair, read_kappa: f64) -> Result<f64> {
    unit_interval("read delay profile κ", read_kappa)?;
    Ok(pair_noise_mean(model, read)
        + model.stored_noise_readout_fraction * read_kappa * pair_noise_mean(model, write)
        + model.dark_counts_per_gate())
}

/// `signal / noise`; infinite when there is no noise.
pub fn snr(signal_mean: f64, noise_mean: f64) -> f64 {
    if noise_mean <= 0.0 {
        return f64::INFINITY;
    }
    signal_mean / noise_mean
}

/// Noise referred to the memory input, `N_noise / η`.
pub fn mu1_benchmark(noise_mean: f64, efficiency: f64) -> Result<f64> {
    if !(efficiency > 0.0) {
        return Err(Error::domain(format!("μ₁ needs efficiency > 0, got {efficiency}")));
    }
    Ok(noise_mean / efficiency)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bsfwm::Role;
    use proptest::prelude::*;

    fn wl(nm: f64) -> Wavelength {
        Wavelength::new(nm).unwrap()
    }

    fn pair(role: Role, w: f64) -> ControlPair {
        ControlPair::new(role, wl(790.1), wl(807.4), w, w, 0.0).unwrap()
    }

    #[test]
    fn detection_products() {
        let eta = detection_efficiency(&DetectionChain::new(0.74, 0.65, 0.44).unwrap());
        assert!((eta - 0.21164).abs() < 1e-12);
        assert_eq!(detection_efficiency(&DetectionChain::new(0.0, 0.65, 0.44).unwrap()), 0.0);
        assert_eq!(detection_efficiency(&DetectionChain::new(1.0, 1.0, 1.0).unwrap()), 1.0);
        assert!(DetectionChain::new(1.1, 0.5, 0.5).is_err());
    }

    #[test]
    fn zero_noise() {
        let m = NoiseModel::new(0.0, 0.0, 0.0, 12.67).unwrap();
        assert_eq!(noise_mean(&m, &pair(Role::Write, 2.2), &pair(Role::Read, 2.2), 1.0).unwrap(), 0.0);
    }

    #[test]
    fn calibrated_default_hits_target() {
        let m = NoiseModel::default();
        let n = noise_mean(&m, &pair(Role::Write, 2.2), &pair(Role::Read, 2.2), 1.0).unwrap();
        assert!((n - 0.30).abs() < 1e-12);
        assert!((m.raman_coefficient_per_nj - 0.037_518_415_893_571_8).abs() < 1e-12);
        assert!((m.stored_noise_readout_fraction - 0.817_289_364_647_724).abs() < 1e-12);
    }

    #[test]
    fn noise_doubles_with_energy() {
        let m = NoiseModel::default();
        let n1 = noise_mean(&m, &pair(Role::Write, 1.5), &pair(Role::Read, 1.2), 0.6).unwrap();
        let n2 = noise_mean(&m, &pair(Role::Write, 3.0), &pair(Role::Read, 2.4), 0.6).unwrap();
        assert!((n2 - 2.0 * n1).abs() < 1e-15);
    }

    #[test]
    fn dark_counts_add() {
        let m = NoiseModel::new(0.0, 0.0, 100.0, 12.67).unwrap();
        let n = noise_mean(&m, &pair(Role::Write, 1.0), &pair(Role::Read, 1.0), 0.0).unwrap();
        assert!((n - 1.267e-6).abs() < 1e-18);
        assert!(noise_mean(&m, &pair(Role::Write, 1.0), &pair(Role::Read, 1.0), 1.5).is_err());
    }

    #[test]
    fn snr_and_mu1() {
        assert!((snr(0.70, 0.30) - 2.333_333_333_333_333).abs() < 1e-12);
        assert_eq!(snr(0.4, 0.4), 1.0);
        assert_eq!(snr(0.0, 0.3), 0.0);
        assert_eq!(snr(0.5, 0.0), f64::INFINITY);
        assert!((mu1_benchmark(0.30, 0.70).unwrap() - 0.428_571_428_571_428_6).abs() < 1e-12);
        assert_eq!(mu1_benchmark(0.0, 0.5).unwrap(), 0.0);
        assert_eq!(mu1_benchmark(0.37, 1.0).unwrap(), 0.37);
        assert!(mu1_benchmark(0.3, 0.0).is_err());
    }

    #[test]
    fn windows() {
        let w = SpectralWindow::new(wl(925.0), 3.0).unwrap();
        assert!(w.passes(wl(925.14)));
        assert!(!w.passes(wl(902.5)));
        assert!(SpectralWindow::new(wl(925.0), 0.0).is_err());
    }

    proptest! {
        #[test]
        fn chain_bounded_by_min_factor(a in 0.0f64..=1.0, b in 0.0f64..=1.0, c in 0.0f64..=1.0, d in 0.0f64..0.5) {
            let eta = detection_efficiency(&DetectionChain::new(a, b, c).unwrap());
            prop_assert!(eta <= a.min(b).min(c) + 1e-15);
            let bigger = detection_efficiency(&DetectionChain::new((a + d).min(1.0), b, c).unwrap());
            prop_assert!(bigger >= eta);
        }

        #[test]
        fn noise_linear_in_each_energy(
            w in 0.1f64..5.0,
            r in 0.1f64..5.0,
            kappa in 0.0f64..=1.0,
        ) {
            let m = NoiseModel::default();
            let read = pair(Role::Read, r);
            // three points along the write energy axis: equal slopes
            let n: Vec<f64> = [w, 2.0 * w, 3.0 * w]
                .iter()
                .map(|e| noise_mean(&m, &pair(Role::Write, *e), &read, kappa).unwrap())
                .collect();
            prop_assert!(((n[1] - n[0]) - (n[2] - n[1])).abs() < 1e-14);
            let write = pair(Role::Write, w);
            let n: Vec<f64> = [r, 2.0 * r, 3.0 * r]
                .iter()
                .map(|e| noise_mean(&m, &write, &pair(Role::Read, *e), kappa).unwrap())
                .collect();
            prop_assert!(((n[1] - n[0]) - (n[2] - n[1])).abs() < 1e-14);
        }

        #[test]
        fn snr_times_mu1_is_input(n_in in 0.01f64..10.0, eta in 0.01f64..=1.0, noise in 0.001f64..5.0) {
            let s = snr(eta * n_in, noise);
            let mu1 = mu1_benchmark(noise, eta).unwrap();
            prop_assert!((s * mu1 - n_in).abs() <= 1e-12 * n_in.max(1.0));
        }
    }
}
