//! Bragg-scattering four-wave-mixing as a frequency-domain beam splitter.
//!
//! A control pair with energies `W_q`, `W_p` rotates the signal by
//! `θ = ξ·√(W_q·W_p)`; the translated fraction is `sin²θ`. When the signal
//! and controls are not optimally overlapped the angle is scaled by the
//! delay profile `κ(τ) ∈ [0, 1]`.
//!
//! The delay profile models the controls as a grating that the signal
//! sweeps through while walking off by `Δ_w` over the fiber: a Gaussian of
//! the combined pulse width convolved with a boxcar of width `Δ_w`,
//!
//! ```text
//! κ(τ) ∝ erf((τ + Δ_w/2)/(√2σ)) − erf((τ − Δ_w/2)/(√2σ)),   σ² = σ_s² + σ_c²
//! ```
//!
//! normalised to 1 at zero delay.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{translate_frequency, Shift, SpectralIntensity, Wavelength, FWHM_PER_SIGMA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolarizationAxis {
    Fast,
    Slow,
}

impl PolarizationAxis {
    pub fn toggled(self) -> Self {
        match self {
            PolarizationAxis::Fast => PolarizationAxis::Slow,
            PolarizationAxis::Slow => PolarizationAxis::Fast,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PolarizationAxis::Fast => "fast",
            PolarizationAxis::Slow => "slow",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Write,
    Read,
}

impl Role {
    pub fn shift(self) -> Shift {
        match self {
            Role::Write => Shift::Downshift,
            Role::Read => Shift::Upshift,
        }
    }

    /// Axis a photon must be on to be phase matched for this role.
    pub fn input_axis(self) -> PolarizationAxis {
        match self {
            Role::Write => PolarizationAxis::Fast,
            Role::Read => PolarizationAxis::Slow,
        }
    }
}

/// A q/p control pulse pair. Energies are in-fiber, in nJ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlPair {
    pub q_energy_nj: f64,
    pub p_energy_nj: f64,
    pub q_wavelength: Wavelength,
    pub p_wavelength: Wavelength,
    /// Signal–control delay relative to the optimum, ps.
    pub delay_ps: f64,
    pub role: Role,
}

impl ControlPair {
    pub fn new(
        role: Role,
        q_wavelength: Wavelength,
        p_wavelength: Wavelength,
        q_energy_nj: f64,
        p_energy_nj: f64,
        delay_ps: f64,
    ) -> Result<Self> {
        if !(q_energy_nj >= 0.0) || !(p_energy_nj >= 0.0) || !q_energy_nj.is_finite() || !p_energy_nj.is_finite() {
            return Err(Error::domain(format!(
                "control energies must be >= 0, got W_q = {q_energy_nj} nJ, W_p = {p_energy_nj} nJ"
            )));
        }
        if !delay_ps.is_finite() {
            return Err(Error::domain("control delay must be finite"));
        }
        Ok(Self { q_energy_nj, p_energy_nj, q_wavelength, p_wavelength, delay_ps, role })
    }

    pub fn is_off(&self) -> bool {
        self.q_energy_nj == 0.0 || self.p_energy_nj == 0.0
    }

    pub fn total_energy_nj(&self) -> f64 {
        self.q_energy_nj + self.p_energy_nj
    }

    pub fn with_energies(mut self, q_nj: f64, p_nj: f64) -> Result<Self> {
        self = Self::new(self.role, self.q_wavelength, self.p_wavelength, q_nj, p_nj, self.delay_ps)?;
        Ok(self)
    }

    pub fn with_delay(mut self, delay_ps: f64) -> Result<Self> {
        if !delay_ps.is_finite() {
            return Err(Error::domain("control delay must be finite"));
        }
        self.delay_ps = delay_ps;
        Ok(self)
    }

    pub fn switched_off(self) -> Self {
        Self { q_energy_nj: 0.0, p_energy_nj: 0.0, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BsfwmCoupling {
    pub xi_rad_per_nj: f64,
    pub walkoff_ps: f64,
    /// Intensity FWHM of the signal pulse, ps.
    pub signal_duration_ps: f64,
    /// Intensity FWHM of each control pulse, ps.
    pub control_duration_ps: f64,
}

impl BsfwmCoupling {
    pub fn new(xi_rad_per_nj: f64, walkoff_ps: f64, signal_duration_ps: f64, control_duration_ps: f64) -> Result<Self> {
        if !(xi_rad_per_nj >= 0.0) || !xi_rad_per_nj.is_finite() {
            return Err(Error::domain(format!("ξ must be >= 0, got {xi_rad_per_nj}")));
        }
        for (name, v) in [
            ("walk-off", walkoff_ps),
            ("signal duration", signal_duration_ps),
            ("control duration", control_duration_ps),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::domain(format!("{name} must be > 0, got {v} ps")));
            }
        }
        Ok(Self { xi_rad_per_nj, walkoff_ps, signal_duration_ps, control_duration_ps })
    }

    pub fn with_walkoff(self, walkoff_ps: f64) -> Result<Self> {
        Self::new(self.xi_rad_per_nj, walkoff_ps, self.signal_duration_ps, self.control_duration_ps)
    }

    pub fn with_xi(self, xi: f64) -> Result<Self> {
        Self::new(xi, self.walkoff_ps, self.signal_duration_ps, self.control_duration_ps)
    }

    /// Combined Gaussian width of the signal and control envelopes.
    pub fn combined_sigma_ps(&self) -> f64 {
        (self.signal_duration_ps.powi(2) + self.control_duration_ps.powi(2)).sqrt() / FWHM_PER_SIGMA
    }
}

/// `ξ` that yields `efficiency` at the given pair energies with optimal
/// overlap.
pub fn calibrate_xi(efficiency: f64, q_energy_nj: f64, p_energy_nj: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&efficiency) {
        return Err(Error::domain(format!("efficiency {efficiency} outside [0, 1]")));
    }
    let w = (q_energy_nj * p_energy_nj).sqrt();
    if !(w > 0.0) {
        return Err(Error::domain("calibration needs non-zero control energies"));
    }
    Ok(efficiency.sqrt().asin() / w)
}

/// Peak rotation angle `ξ·√(W_q·W_p)`, rad.
pub fn conversion_angle(coupling: &BsfwmCoupling, pair: &ControlPair) -> f64 {
    coupling.xi_rad_per_nj * (pair.q_energy_nj * pair.p_energy_nj).sqrt()
}

pub fn translation_efficiency(theta: f64) -> f64 {
    theta.sin().powi(2)
}

pub fn delay_profile(coupling: &BsfwmCoupling, delay_ps: f64) -> f64 {
    let s = std::f64::consts::SQRT_2 * coupling.combined_sigma_ps();
    let half = 0.5 * coupling.walkoff_ps;
    let overlap = |t: f64| libm::erf((t + half) / s) - libm::erf((t - half) / s);
    let peak = overlap(0.0);
    if peak <= 0.0 {
        return if delay_ps == 0.0 { 1.0 } else { 0.0 };
    }
    (overlap(delay_ps) / peak).clamp(0.0, 1.0)
}

/// `θ_max · κ(delay)` for the pair's configured delay.
pub fn effective_angle(coupling: &BsfwmCoupling, pair: &ControlPair) -> f64 {
    conversion_angle(coupling, pair) * delay_profile(coupling, pair.delay_ps)
}

/// A photon's spectral and polarization label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Photon {
    pub wavelength: Wavelength,
    pub axis: PolarizationAxis,
}

/// Relative tolerance for deciding a photon is on resonance.
pub const RESONANCE_TOLERANCE: f64 = 1e-9;

/// A resolved BSFWM interaction: which photons it acts on, where it sends
/// them, and with what probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Translation {
    pub input: Photon,
    pub output: Photon,
    pub probability: f64,
}

impl Translation {
    /// `resonant` is the wavelength the pair is phase matched for: the signal
    /// wavelength for a write, the storage wavelength for a read.
    pub fn new(pair: &ControlPair, coupling: &BsfwmCoupling, resonant: Wavelength) -> Result<Self> {
        let input = Photon { wavelength: resonant, axis: pair.role.input_axis() };
        let out_wavelength = translate_frequency(resonant, pair.q_wavelength, pair.p_wavelength, pair.role.shift())?;
        let output = Photon { wavelength: out_wavelength, axis: input.axis.toggled() };
        let probability = if pair.is_off() { 0.0 } else { translation_efficiency(effective_angle(coupling, pair)) };
        Ok(Self { input, output, probability })
    }

    pub fn is_resonant(&self, photon: &Photon) -> bool {
        photon.axis == self.input.axis && photon.wavelength.approx_eq(self.input.wavelength, RESONANCE_TOLERANCE)
    }

    /// `draw` is uniform on `[0, 1)`.
    #[inline]
    pub fn apply(&self, photon: Photon, draw: f64) -> Photon {
        if self.is_resonant(&photon) && draw < self.probability {
            self.output
        } else {
            photon
        }
    }
}

/// Single-photon BSFWM step. Non-resonant photons pass through unchanged.
pub fn apply_bsfwm(
    photon: Photon,
    pair: &ControlPair,
    coupling: &BsfwmCoupling,
    resonant: Wavelength,
    draw: f64,
) -> Result<Photon> {
    Ok(Translation::new(pair, coupling, resonant)?.apply(photon, draw))
}

/// Maps a spectrum through a frequency translation, conserving photon
/// number (`I_out dλ_out = I_in dλ_in`).
pub fn translate_spectrum(
    spectrum: &SpectralIntensity,
    q: Wavelength,
    p: Wavelength,
    shift: Shift,
) -> Result<SpectralIntensity> {
    let mut grid = Vec::with_capacity(spectrum.grid().len());
    let mut values = Vec::with_capacity(spectrum.grid().len());
    for (x, v) in spectrum.grid().iter().zip(spectrum.values()) {
        let out = translate_frequency(Wavelength::new(*x)?, q, p, shift)?.nm();
        grid.push(out);
        values.push(v * (x / out).powi(2));
    }
    SpectralIntensity::new(grid, values)
}

/// Delay-dependent spectral shift applied to the retrieved pulse, nm.
/// Disabled unless a caller supplies one.
pub trait SpectralShiftHook {
    fn shift_nm(&self, read_delay_ps: f64) -> f64;
}

/// Input spectrum after a write (downshift), storage, and read (upshift).
/// The flat conversion efficiency is applied as an overall scale.
pub fn memory_output_spectrum(
    input: &SpectralIntensity,
    write: &ControlPair,
    read: &ControlPair,
    efficiency: f64,
    hook: Option<&dyn SpectralShiftHook>,
) -> Result<SpectralIntensity> {
    let stored = translate_spectrum(input, write.q_wavelength, write.p_wavelength, Shift::Downshift)?;
    let out = translate_spectrum(&stored, read.q_wavelength, read.p_wavelength, Shift::Upshift)?;
    let out = match hook {
        Some(h) => {
            let dx = h.shift_nm(read.delay_ps);
            SpectralIntensity::new(out.grid().iter().map(|x| x + dx).collect(), out.values().to_vec())?
        }
        None => out,
    };
    out.scaled(efficiency)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{gaussian_spectrum, uniform_grid};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn wl(nm: f64) -> Wavelength {
        Wavelength::new(nm).unwrap()
    }

    fn pair(role: Role, wq: f64, wp: f64, delay: f64) -> ControlPair {
        ControlPair::new(role, wl(790.1), wl(807.4), wq, wp, delay).unwrap()
    }

    fn coupling(xi: f64) -> BsfwmCoupling {
        BsfwmCoupling::new(xi, 16.6, 1.1, 2.3).unwrap()
    }

    /// Direct numerical convolution: control Gaussian ⊛ boxcar ⊛ signal
    /// Gaussian on a fine grid. Independent of the erf closed form.
    fn numeric_profile(ts: f64, tc: f64, dw: f64, delays: &[f64]) -> Vec<f64> {
        let h = 0.01;
        let n = 8_001;
        let t0 = -(n as f64 - 1.0) / 2.0 * h;
        let t: Vec<f64> = (0..n).map(|i| t0 + h * i as f64).collect();
        let (ss, sc) = (ts / FWHM_PER_SIGMA, tc / FWHM_PER_SIGMA);
        let gauss = |s: f64| -> Vec<f64> { t.iter().map(|x| (-0.5 * (x / s).powi(2)).exp()).collect() };
        let box_: Vec<f64> = t.iter().map(|x| if x.abs() <= dw / 2.0 { 1.0 } else { 0.0 }).collect();
        let conv_at = |a: &[f64], b: &[f64], shift: f64| -> f64 {
            // ∫ a(u) b(shift − u) du
            let k = (shift / h).round() as isize;
            let mid = (n / 2) as isize;
            let mut acc = 0.0;
            for i in 0..n as isize {
                let j = k + 2 * mid - i;
                if j >= 0 && (j as usize) < n {
                    acc += a[i as usize] * b[j as usize];
                }
            }
            acc * h
        };
        let gc = gauss(sc);
        let gs = gauss(ss);
        // control ⊛ boxcar sampled on the grid
        let cb: Vec<f64> = t.iter().map(|x| conv_at(&gc, &box_, *x)).collect();
        let profile: Vec<f64> = delays.iter().map(|d| conv_at(&cb, &gs, *d)).collect();
        let peak = conv_at(&cb, &gs, 0.0);
        profile.into_iter().map(|v| v / peak).collect()
    }

    #[test]
    fn conversion_angles() {
        assert_eq!(conversion_angle(&coupling(1.0), &pair(Role::Write, 0.0, 0.0, 0.0)), 0.0);
        let theta = conversion_angle(&coupling(0.5), &pair(Role::Write, 4.0, 9.0, 0.0));
        assert!((theta - 3.0).abs() < 1e-15);
        let doubled = conversion_angle(&coupling(0.5), &pair(Role::Write, 8.0, 18.0, 0.0));
        assert!((doubled - 6.0).abs() < 1e-14);
    }

    #[test]
    fn efficiencies() {
        assert!((translation_efficiency(std::f64::consts::FRAC_PI_2) - 1.0).abs() < 1e-15);
        assert_eq!(translation_efficiency(0.0), 0.0);
        let theta = 0.95f64.sqrt().asin();
        assert!((theta - 1.345_282_920_896_765).abs() < 1e-12);
        assert!((translation_efficiency(theta) - 0.95).abs() < 1e-14);
    }

    #[test]
    fn calibration_hits_operating_points() {
        let xw = calibrate_xi(0.95, 2.2, 2.2).unwrap();
        assert!((xw - 0.611_492_236_771_257).abs() < 1e-12);
        let xr = calibrate_xi(0.87, 2.2, 2.2).unwrap();
        assert!((xr - 0.546_333_337_531_033).abs() < 1e-12);
        assert!(calibrate_xi(1.2, 2.2, 2.2).is_err());
        assert!(calibrate_xi(0.5, 0.0, 2.2).is_err());
    }

    #[test]
    fn profile_peak_and_tails() {
        let c = coupling(1.0);
        assert!((delay_profile(&c, 0.0) - 1.0).abs() < 1e-15);
        assert!(delay_profile(&c, 40.0) < 1e-12);
        assert!(delay_profile(&c, -40.0) < 1e-12);
    }

    #[test]
    fn profile_matches_numeric_convolution() {
        let c = coupling(1.0);
        let delays: Vec<f64> = (-14..=14).map(|i| i as f64 * 1.5).collect();
        let oracle = numeric_profile(1.1, 2.3, 16.6, &delays);
        for (d, o) in delays.iter().zip(&oracle) {
            assert!((delay_profile(&c, *d) - o).abs() < 2e-3, "delay {d}: {} vs {o}", delay_profile(&c, *d));
        }
    }

    fn fwhm(c: &BsfwmCoupling) -> f64 {
        // bisection for the half-maximum crossing on the positive side
        let (mut lo, mut hi) = (0.0, 100.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if delay_profile(c, mid) > 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        2.0 * lo
    }

    #[test]
    fn profile_width() {
        // Numerical convolution puts the κ FWHM at 16.600 ps for these pulses.
        let w = fwhm(&coupling(1.0));
        assert!((w - 16.6).abs() < 0.01, "fwhm {w}");
        let oracle = numeric_profile(1.1, 2.3, 16.6, &[8.3]);
        assert!((oracle[0] - 0.5).abs() < 2e-3);
    }

    #[test]
    fn delta_pulses_give_boxcar() {
        let c = BsfwmCoupling::new(1.0, 16.6, 1e-7, 1e-7).unwrap();
        assert!((fwhm(&c) - 16.6).abs() < 1e-9);
        assert!((delay_profile(&c, 8.0) - 1.0).abs() < 1e-12);
        assert!(delay_profile(&c, 8.6) < 1e-12);
    }

    #[test]
    fn walkoff_scaling_widens_profile() {
        let c = coupling(1.0);
        let wide = c.with_walkoff(33.2).unwrap();
        assert!((fwhm(&wide) - 2.0 * fwhm(&c)).abs() < 0.05);
    }

    #[test]
    fn write_moves_signal_to_storage() {
        let c = coupling(std::f64::consts::FRAC_PI_2);
        let p = pair(Role::Write, 1.0, 1.0, 0.0);
        let out =
            apply_bsfwm(Photon { wavelength: wl(902.5), axis: PolarizationAxis::Fast }, &p, &c, wl(902.5), 0.999_999)
                .unwrap();
        assert_eq!(out.axis, PolarizationAxis::Slow);
        assert!((out.wavelength.nm() - 925.1).abs() < 0.05);

        let read = pair(Role::Read, 1.0, 1.0, 0.0);
        let back = apply_bsfwm(out, &read, &c, out.wavelength, 0.3).unwrap();
        assert_eq!(back.axis, PolarizationAxis::Fast);
        assert!((back.wavelength.nm() - 902.5).abs() < 1e-9);
    }

    #[test]
    fn off_or_non_resonant_photons_pass() {
        let c = coupling(1.0);
        let off = pair(Role::Write, 0.0, 0.0, 0.0);
        let ph = Photon { wavelength: wl(902.5), axis: PolarizationAxis::Fast };
        assert_eq!(apply_bsfwm(ph, &off, &c, wl(902.5), 0.0).unwrap(), ph);
        let on = pair(Role::Write, 5.0, 5.0, 0.0);
        let wrong_axis = Photon { axis: PolarizationAxis::Slow, ..ph };
        assert_eq!(apply_bsfwm(wrong_axis, &on, &c, wl(902.5), 0.0).unwrap(), wrong_axis);
        let wrong_color = Photon { wavelength: wl(903.0), ..ph };
        assert_eq!(apply_bsfwm(wrong_color, &on, &c, wl(902.5), 0.0).unwrap(), wrong_color);
    }

    #[test]
    fn monte_carlo_conversion_fraction() {
        let xi = calibrate_xi(0.87, 2.2, 2.2).unwrap();
        let t = Translation::new(&pair(Role::Read, 2.2, 2.2, 0.0), &coupling(xi), wl(925.0)).unwrap();
        assert!((t.probability - 0.87).abs() < 1e-12);
        let ph = t.input;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let converted = (0..n).filter(|_| t.apply(ph, rng.random::<f64>()) == t.output).count();
        let frac = converted as f64 / n as f64;
        // binomial σ = √(0.87·0.13/10⁶) ≈ 3.4e-4
        assert!((frac - 0.87).abs() < 0.002, "fraction {frac}");
    }

    #[test]
    fn round_trip_spectrum_is_preserved() {
        let grid = uniform_grid(896.0, 909.0, 1301);
        let input = gaussian_spectrum(wl(902.5), 1.05, &grid).unwrap();
        let w = pair(Role::Write, 2.2, 2.2, 0.0);
        let r = pair(Role::Read, 2.2, 2.2, 0.0);
        let out = memory_output_spectrum(&input, &w, &r, 0.7, None).unwrap();
        for (a, b) in out.grid().iter().zip(input.grid()) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!((out.integral() / input.integral() - 0.7).abs() < 1e-9);

        let stored = translate_spectrum(&input, wl(790.1), wl(807.4), Shift::Downshift).unwrap();
        assert!((stored.integral() / input.integral() - 1.0).abs() < 1e-6);
    }

    struct ConstShift(f64);
    impl SpectralShiftHook for ConstShift {
        fn shift_nm(&self, _: f64) -> f64 {
            self.0
        }
    }

    #[test]
    fn shift_hook_moves_output() {
        let grid = uniform_grid(896.0, 909.0, 131);
        let input = gaussian_spectrum(wl(902.5), 1.05, &grid).unwrap();
        let w = pair(Role::Write, 2.2, 2.2, 0.0);
        let r = pair(Role::Read, 2.2, 2.2, 3.0);
        let out = memory_output_spectrum(&input, &w, &r, 1.0, Some(&ConstShift(0.2))).unwrap();
        assert!((out.grid()[0] - 896.2).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn efficiency_plus_survival_is_one(theta in 0.0f64..20.0) {
            let eta = translation_efficiency(theta);
            prop_assert!((eta + theta.cos().powi(2) - 1.0).abs() < 1e-15);
            prop_assert!((0.0..=1.0).contains(&eta));
        }

        #[test]
        fn profile_symmetric_and_bounded(
            d in 0.0f64..60.0,
            dw in 0.5f64..40.0,
            ts in 0.1f64..5.0,
            tc in 0.1f64..5.0,
        ) {
            let c = BsfwmCoupling::new(1.0, dw, ts, tc).unwrap();
            let k = delay_profile(&c, d);
            prop_assert!((0.0..=1.0).contains(&k));
            prop_assert!((k - delay_profile(&c, -d)).abs() < 1e-14);
        }

        #[test]
        fn bsfwm_preserves_photon(draw in 0.0f64..1.0, w in 0.0f64..5.0, axis_fast in any::<bool>()) {
            let c = coupling(0.6);
            let axis = if axis_fast { PolarizationAxis::Fast } else { PolarizationAxis::Slow };
            let ph = Photon { wavelength: wl(902.5), axis };
            let t = Translation::new(&pair(Role::Write, w, w, 0.0), &c, wl(902.5)).unwrap();
            let out = t.apply(ph, draw);
            // exactly one photon comes out, either untouched or relabelled
            prop_assert!(out == ph || out == t.output);
        }
    }
}
