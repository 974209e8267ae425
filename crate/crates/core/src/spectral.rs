//! Wavelength and frequency bookkeeping.
//!
//! Wavelengths are vacuum wavelengths in nanometres. The Bragg-scattering
//! frequency map works on inverse wavelengths, which are proportional to
//! angular frequency, so translations never round-trip through `2πc`.
//!
//! Also home to facet coating curves and sampled spectral intensities.

use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

const NM: f64 = 1e-9;

/// Vacuum wavelength in nanometres.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Wavelength(f64);

impl Wavelength {
    pub fn new(nm: f64) -> Result<Self> {
        if !nm.is_finite() || nm <= 0.0 {
            return Err(Error::domain(format!("wavelength must be positive and finite, got {nm} nm")));
        }
        Ok(Self(nm))
    }

    #[inline]
    pub fn nm(self) -> f64 {
        self.0
    }

    /// Inverse wavelength in nm⁻¹.
    #[inline]
    pub fn wavenumber(self) -> f64 {
        1.0 / self.0
    }

    pub fn to_omega(self) -> AngularFrequency {
        AngularFrequency(2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / (self.0 * NM))
    }

    /// Equality up to a relative tolerance, for resonance checks.
    pub fn approx_eq(self, other: Wavelength, rel_tol: f64) -> bool {
        (self.0 - other.0).abs() <= rel_tol * self.0.abs().max(other.0.abs())
    }
}

impl TryFrom<f64> for Wavelength {
    type Error = Error;

    fn try_from(nm: f64) -> Result<Self> {
        Wavelength::new(nm)
    }
}

impl From<Wavelength> for f64 {
    fn from(w: Wavelength) -> f64 {
        w.0
    }
}

impl fmt::Display for Wavelength {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} nm", self.0)
    }
}

/// Angular frequency in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct AngularFrequency(f64);

impl AngularFrequency {
    pub fn new(rad_per_s: f64) -> Result<Self> {
        if !rad_per_s.is_finite() || rad_per_s <= 0.0 {
            return Err(Error::domain(format!("angular frequency must be positive and finite, got {rad_per_s} rad/s")));
        }
        Ok(Self(rad_per_s))
    }

    #[inline]
    pub fn rad_per_s(self) -> f64 {
        self.0
    }

    pub fn to_wavelength(self) -> Wavelength {
        Wavelength(2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / self.0 / NM)
    }
}

pub fn wavelength_to_omega(lambda: Wavelength) -> AngularFrequency {
    lambda.to_omega()
}

pub fn omega_to_wavelength(omega: AngularFrequency) -> Wavelength {
    omega.to_wavelength()
}

/// Direction of a Bragg-scattering translation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shift {
    /// Signal is moved down in frequency by `ω_q − ω_p` (write).
    Downshift,
    /// Exact inverse of [`Shift::Downshift`] (read).
    Upshift,
}

/// Phase-matched frequency map `ω_out = ω_in ∓ (ω_q − ω_p)`.
///
/// The control pair must satisfy `ω_q >= ω_p`, i.e. `λ_q <= λ_p`.
pub fn translate_frequency(signal: Wavelength, q: Wavelength, p: Wavelength, direction: Shift) -> Result<Wavelength> {
    let detuning = q.wavenumber() - p.wavenumber();
    if detuning < 0.0 {
        return Err(Error::domain(format!("control pair must have ω_q >= ω_p (λ_q = {q}, λ_p = {p})")));
    }
    let out = match direction {
        Shift::Downshift => signal.wavenumber() - detuning,
        Shift::Upshift => signal.wavenumber() + detuning,
    };
    if !(out > 0.0) || !out.is_finite() {
        return Err(Error::domain(format!("translated inverse wavelength {out} nm⁻¹ is not positive")));
    }
    Ok(Wavelength(1.0 / out))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoatingSample {
    pub wavelength_nm: f64,
    pub transmission: f64,
    #[serde(default)]
    pub absorption: f64,
}

/// Tabulated facet transmission with a dichroic edge at `lambda0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoatingCurve {
    samples: Vec<CoatingSample>,
    lambda0: Wavelength,
}

const BUILTIN_COATING: &str = include_str!("../data/coating_synthetic.csv");

impl CoatingCurve {
    pub fn new(samples: Vec<CoatingSample>, lambda0: Wavelength) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::domain("coating curve needs at least two samples"));
        }
        for (i, s) in samples.iter().enumerate() {
            if !s.wavelength_nm.is_finite() || s.wavelength_nm <= 0.0 {
                return Err(Error::domain(format!(
                    "coating row {i}: wavelength {} nm is not positive",
                    s.wavelength_nm
                )));
            }
            if !(0.0..=1.0).contains(&s.transmission) {
                return Err(Error::domain(format!("coating row {i}: transmission {} outside [0, 1]", s.transmission)));
            }
            if !(0.0..=1.0).contains(&s.absorption) || s.absorption + s.transmission > 1.0 {
                return Err(Error::domain(format!(
                    "coating row {i}: absorption {} invalid for transmission {}",
                    s.absorption, s.transmission
                )));
            }
            if i > 0 && s.wavelength_nm <= samples[i - 1].wavelength_nm {
                return Err(Error::domain(format!("coating row {i}: wavelengths must be strictly increasing")));
            }
        }
        Ok(Self { samples, lambda0 })
    }

    /// Bundled synthetic short-wave-pass curve: T > 0.7 below 910 nm and
    /// T < 0.02 above 920 nm.
    pub fn builtin() -> Self {
        Self::from_csv(BUILTIN_COATING.as_bytes(), None).expect("bundled coating curve is valid")
    }

    /// Reads `wavelength_nm,transmission[,absorption]` CSV. Without an
    /// explicit `lambda0` the edge is placed at the first downward crossing
    /// of T = 0.5.
    pub fn from_csv<R: Read>(reader: R, lambda0: Option<Wavelength>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let expected: &[&str] = if headers.len() == 3 {
            &["wavelength_nm", "transmission", "absorption"]
        } else {
            &["wavelength_nm", "transmission"]
        };
        if headers.iter().ne(expected.iter().copied()) {
            return Err(Error::config(format!(
                "coating csv header must be `{}`, got `{}`",
                expected.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let samples = rdr.deserialize::<CoatingSample>().collect::<std::result::Result<Vec<_>, _>>()?;
        let lambda0 = match lambda0 {
            Some(l) => l,
            None => {
                half_transmission_edge(&samples).ok_or_else(|| Error::domain("coating curve never crosses T = 0.5"))?
            }
        };
        Self::new(samples, lambda0)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let with_abs = self.samples.iter().any(|s| s.absorption != 0.0);
        if with_abs {
            writeln!(out, "wavelength_nm,transmission,absorption")?;
        } else {
            writeln!(out, "wavelength_nm,transmission")?;
        }
        for s in &self.samples {
            if with_abs {
                writeln!(out, "{},{},{}", s.wavelength_nm, s.transmission, s.absorption)?;
            } else {
                writeln!(out, "{},{}", s.wavelength_nm, s.transmission)?;
            }
        }
        Ok(())
    }

    pub fn samples(&self) -> &[CoatingSample] {
        &self.samples
    }

    pub fn lambda0(&self) -> Wavelength {
        self.lambda0
    }

    pub fn range(&self) -> (f64, f64) {
        (self.samples[0].wavelength_nm, self.samples[self.samples.len() - 1].wavelength_nm)
    }

    fn interpolate(&self, lambda: Wavelength, field: impl Fn(&CoatingSample) -> f64) -> Result<f64> {
        let x = lambda.nm();
        let (lo, hi) = self.range();
        if x < lo || x > hi {
            return Err(Error::range(format!("{lambda} outside tabulated coating range [{lo}, {hi}] nm")));
        }
        let i = self.samples.partition_point(|s| s.wavelength_nm <= x);
        if i == self.samples.len() {
            return Ok(field(&self.samples[i - 1]));
        }
        let (a, b) = (&self.samples[i - 1], &self.samples[i]);
        let t = (x - a.wavelength_nm) / (b.wavelength_nm - a.wavelength_nm);
        Ok(field(a) + t * (field(b) - field(a)))
    }

    pub fn absorption(&self, lambda: Wavelength) -> Result<f64> {
        self.interpolate(lambda, |s| s.absorption)
    }

    /// `1 − T − A`, non-negative.
    pub fn reflectivity(&self, lambda: Wavelength) -> Result<f64> {
        let t = coating_transmission(self, lambda)?;
        let a = self.absorption(lambda)?;
        Ok((1.0 - t - a).max(0.0))
    }
}

fn half_transmission_edge(samples: &[CoatingSample]) -> Option<Wavelength> {
    samples.windows(2).find_map(|w| {
        let (a, b) = (&w[0], &w[1]);
        if a.transmission >= 0.5 && b.transmission < 0.5 {
            let t = (a.transmission - 0.5) / (a.transmission - b.transmission);
            Wavelength::new(a.wavelength_nm + t * (b.wavelength_nm - a.wavelength_nm)).ok()
        } else {
            None
        }
    })
}

/// Linearly interpolated facet transmission, clamped to `[0, 1]`.
/// No extrapolation outside the table.
pub fn coating_transmission(curve: &CoatingCurve, lambda: Wavelength) -> Result<f64> {
    curve.interpolate(lambda, |s| s.transmission).map(|t| t.clamp(0.0, 1.0))
}

/// Non-negative spectral intensity sampled on a strictly increasing grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralIntensity {
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl SpectralIntensity {
    pub const MIN_SAMPLES: usize = 8;

    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::domain(format!("grid has {} points but {} values", grid.len(), values.len())));
        }
        if grid.len() < Self::MIN_SAMPLES {
            return Err(Error::domain(format!(
                "spectrum needs at least {} samples, got {}",
                Self::MIN_SAMPLES,
                grid.len()
            )));
        }
        check_grid(&grid)?;
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::domain(format!("spectral intensity sample {v} is negative or not finite")));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Trapezoidal integral over the grid.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.grid, &self.values)
    }

    /// Linear interpolation, zero outside the sampled span.
    pub fn value_at(&self, x: f64) -> f64 {
        let (lo, hi) = (self.grid[0], self.grid[self.grid.len() - 1]);
        if x < lo || x > hi {
            return 0.0;
        }
        let i = self.grid.partition_point(|g| *g <= x);
        if i == self.grid.len() {
            return self.values[i - 1];
        }
        let t = (x - self.grid[i - 1]) / (self.grid[i] - self.grid[i - 1]);
        self.values[i - 1] + t * (self.values[i] - self.values[i - 1])
    }

    pub fn resample(&self, grid: &[f64]) -> Result<Self> {
        Self::new(grid.to_vec(), grid.iter().map(|x| self.value_at(*x)).collect())
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.grid.clone(), self.values.iter().map(|v| v * factor).collect())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "wavelength_nm,intensity")?;
        for (x, v) in self.grid.iter().zip(&self.values) {
            writeln!(out, "{x},{v}")?;
        }
        Ok(())
    }

    /// Reads `wavelength_nm,intensity` CSV.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            wavelength_nm: f64,
            intensity: f64,
        }
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().ne(["wavelength_nm", "intensity"]) {
            return Err(Error::config("spectrum csv header must be `wavelength_nm,intensity`"));
        }
        let (grid, values) = rdr
            .deserialize::<Row>()
            .map(|r| r.map(|r| (r.wavelength_nm, r.intensity)))
            .collect::<std::result::Result<(Vec<_>, Vec<_>), _>>()?;
        Self::new(grid, values)
    }
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("grid contains non-finite values"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("grid must be strictly increasing"));
    }
    Ok(())
}

pub(crate) fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1])).sum()
}

/// `n` evenly spaced points from `start` to `end` inclusive.
pub fn uniform_grid(start: f64, end: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "uniform grid needs at least two points");
    let step = (end - start) / (n - 1) as f64;
    (0..n).map(|i| start + step * i as f64).collect()
}

pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

/// Unit-area Gaussian with the given FWHM, sampled on `grid`.
///
/// The grid has to cover `center ± 3·fwhm`.
pub fn gaussian_spectrum(center: Wavelength, fwhm_nm: f64, grid: &[f64]) -> Result<SpectralIntensity> {
    if !(fwhm_nm > 0.0) || !fwhm_nm.is_finite() {
        return Err(Error::domain(format!("fwhm must be positive, got {fwhm_nm} nm")));
    }
    check_grid(grid)?;
    let c = center.nm();
    let (lo, hi) = match (grid.first(), grid.last()) {
        (Some(lo), Some(hi)) => (*lo, *hi),
        _ => return Err(Error::range("empty grid")),
    };
    if lo > c - 3.0 * fwhm_nm || hi < c + 3.0 * fwhm_nm {
        return Err(Error::range(format!("grid [{lo}, {hi}] nm does not span {c} ± 3·{fwhm_nm} nm")));
    }
    let sigma = fwhm_nm / FWHM_PER_SIGMA;
    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let values = grid.iter().map(|x| norm * (-0.5 * ((x - c) / sigma).powi(2)).exp()).collect();
    SpectralIntensity::new(grid.to_vec(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn wl(nm: f64) -> Wavelength {
        Wavelength::new(nm).unwrap()
    }

    #[test]
    fn omega_of_signal_wavelength() {
        // 2πc/λ at 902.5 nm, evaluated with 40-digit arithmetic.
        let w = wavelength_to_omega(wl(902.5)).rad_per_s();
        assert!((w - 2_087_148_551_034_740.5).abs() / w < 1e-14);
        let w = wavelength_to_omega(wl(299.792458)).rad_per_s();
        assert!((w / (2.0 * std::f64::consts::PI * 1e15) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn omega_round_trip() {
        for nm in [200.0, 790.1, 902.5, 925.14, 1550.0] {
            let back = omega_to_wavelength(wavelength_to_omega(wl(nm))).nm();
            assert!((back - nm).abs() / nm < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_wavelengths() {
        assert!(Wavelength::new(0.0).is_err());
        assert!(Wavelength::new(-3.0).is_err());
        assert!(Wavelength::new(f64::NAN).is_err());
        assert!(Wavelength::new(f64::INFINITY).is_err());
        assert!(AngularFrequency::new(0.0).is_err());
    }

    #[test]
    fn storage_wavelength() {
        let r = translate_frequency(wl(902.5), wl(790.1), wl(807.4), Shift::Downshift).unwrap();
        assert!((r.nm() - 925.142_861_437_890_4).abs() < 1e-9);
    }

    #[test]
    fn identical_controls_do_not_shift() {
        let r = translate_frequency(wl(902.5), wl(800.0), wl(800.0), Shift::Downshift).unwrap();
        assert!((r.nm() - 902.5).abs() <= 1e-15 * 902.5);
    }

    #[test]
    fn translation_errors() {
        // ω_q < ω_p
        assert!(translate_frequency(wl(902.5), wl(807.4), wl(790.1), Shift::Downshift).is_err());
        // shift larger than the signal frequency
        assert!(translate_frequency(wl(2000.0), wl(400.0), wl(1600.0), Shift::Downshift).is_err());
    }

    #[test]
    fn coating_interpolation() {
        let curve = CoatingCurve::new(
            vec![
                CoatingSample { wavelength_nm: 900.0, transmission: 0.8, absorption: 0.0 },
                CoatingSample { wavelength_nm: 902.0, transmission: 0.6, absorption: 0.0 },
                CoatingSample { wavelength_nm: 910.0, transmission: 0.1, absorption: 0.05 },
            ],
            wl(905.0),
        )
        .unwrap();
        assert_eq!(coating_transmission(&curve, wl(902.0)).unwrap(), 0.6);
        assert!((coating_transmission(&curve, wl(901.0)).unwrap() - 0.7).abs() < 1e-15);
        assert!((curve.reflectivity(wl(910.0)).unwrap() - 0.85).abs() < 1e-15);
        assert!(matches!(coating_transmission(&curve, wl(899.9)), Err(Error::Range(_))));
        assert!(matches!(coating_transmission(&curve, wl(910.1)), Err(Error::Range(_))));
    }

    #[test]
    fn coating_validation() {
        let s = |w, t| CoatingSample { wavelength_nm: w, transmission: t, absorption: 0.0 };
        assert!(CoatingCurve::new(vec![s(900.0, 0.5), s(900.0, 0.4)], wl(900.0)).is_err());
        assert!(CoatingCurve::new(vec![s(900.0, 1.2), s(901.0, 0.4)], wl(900.0)).is_err());
        assert!(CoatingCurve::new(vec![s(900.0, 0.5)], wl(900.0)).is_err());
    }

    #[test]
    fn builtin_coating_shape() {
        let curve = CoatingCurve::builtin();
        let (lo, hi) = curve.range();
        let mut x = lo;
        while x <= hi {
            let t = coating_transmission(&curve, wl(x)).unwrap();
            if x < 910.0 {
                assert!(t > 0.7, "T({x}) = {t}");
            }
            if x > 920.0 {
                assert!(t < 0.02, "T({x}) = {t}");
            }
            x += 0.25;
        }
        // monotone across the edge region
        let edge: Vec<f64> =
            uniform_grid(902.0, 960.0, 233).into_iter().map(|x| coating_transmission(&curve, wl(x)).unwrap()).collect();
        assert!(edge.windows(2).all(|w| w[1] <= w[0]));
        assert!(curve.lambda0().nm() > 910.0 && curve.lambda0().nm() < 920.0);
    }

    #[test]
    fn coating_csv_round_trip_and_header() {
        let curve = CoatingCurve::builtin();
        let mut buf = Vec::new();
        curve.write_csv(&mut buf).unwrap();
        let back = CoatingCurve::from_csv(buf.as_slice(), None).unwrap();
        assert_eq!(back, curve);

        let bad = "lambda,T\n900,0.5\n901,0.4\n";
        assert!(matches!(CoatingCurve::from_csv(bad.as_bytes(), None), Err(Error::Config(_))));

        let with_abs = "wavelength_nm,transmission,absorption\n900,0.5,0.1\n930,0.01,0.002\n";
        let c = CoatingCurve::from_csv(with_abs.as_bytes(), None).unwrap();
        assert!((c.reflectivity(wl(930.0)).unwrap() - 0.988).abs() < 1e-12);
    }

    #[test]
    fn gaussian_fwhm_and_normalisation() {
        let grid = uniform_grid(895.0, 910.0, 3001);
        let g = gaussian_spectrum(wl(902.5), 1.05, &grid).unwrap();
        let half = 1.05 / 2.0;
        assert!((g.value_at(902.5) / g.value_at(902.5 + half) - 2.0).abs() < 1e-6);
        // exact FWHM check away from interpolation error
        let sigma = 1.05 / FWHM_PER_SIGMA;
        let f = |x: f64| (-0.5 * ((x - 902.5) / sigma).powi(2)).exp();
        assert!((f(902.5) / f(902.5 - half) - 2.0).abs() < 1e-9);

        let peak = g.values().iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| grid[i]).unwrap();
        assert!((peak - 902.5).abs() < 1e-9);

        let coarse = gaussian_spectrum(wl(902.5), 1.05, &uniform_grid(895.0, 910.0, 6001)).unwrap();
        assert!((coarse.integral() / g.integral() - 1.0).abs() < 1e-6);
        assert!((g.integral() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn gaussian_grid_too_narrow() {
        let grid = uniform_grid(901.0, 904.0, 100);
        assert!(matches!(gaussian_spectrum(wl(902.5), 1.05, &grid), Err(Error::Range(_))));
        assert!(gaussian_spectrum(wl(902.5), 0.0, &uniform_grid(800.0, 1000.0, 100)).is_err());
    }

    #[test]
    fn spectrum_validation() {
        assert!(SpectralIntensity::new(vec![1.0, 2.0], vec![1.0, 1.0]).is_err());
        let grid = uniform_grid(1.0, 8.0, 8);
        assert!(SpectralIntensity::new(grid.clone(), vec![1.0; 7]).is_err());
        let mut neg = vec![1.0; 8];
        neg[3] = -0.1;
        assert!(SpectralIntensity::new(grid.clone(), neg).is_err());
        let mut unsorted = grid.clone();
        unsorted.swap(2, 3);
        assert!(SpectralIntensity::new(unsorted, vec![1.0; 8]).is_err());
    }

    proptest! {
        #[test]
        fn down_then_up_is_identity(
            s in 400.0f64..1600.0,
            q in 400.0f64..1600.0,
            gap in 0.0f64..0.00005,
        ) {
            let q = wl(q);
            // λ_p chosen so that ω_q - ω_p = gap nm⁻¹ and stays positive
            let p_inv = q.wavenumber() - gap;
            prop_assume!(p_inv > 0.0);
            let p = wl(1.0 / p_inv);
            let s = wl(s);
            if let Ok(r) = translate_frequency(s, q, p, Shift::Downshift) {
                let back = translate_frequency(r, q, p, Shift::Upshift).unwrap();
                prop_assert!((back.nm() - s.nm()).abs() / s.nm() < 1e-12);
            }
        }

        #[test]
        fn translation_scales_with_units(
            s in 800.0f64..1000.0,
            q in 700.0f64..800.0,
            dp in 0.0f64..20.0,
            k in 0.1f64..10.0,
        ) {
            let r = translate_frequency(wl(s), wl(q), wl(q + dp), Shift::Downshift).unwrap();
            let rk = translate_frequency(wl(s / k), wl(q / k), wl((q + dp) / k), Shift::Downshift).unwrap();
            prop_assert!((rk.wavenumber() / r.wavenumber() - k).abs() / k < 1e-12);
        }

        #[test]
        fn coating_bounded(x in 750.0f64..1000.0) {
            let curve = CoatingCurve::builtin();
            let t = coating_transmission(&curve, wl(x)).unwrap();
            prop_assert!((0.0..=1.0).contains(&t));
            let r = curve.reflectivity(wl(x)).unwrap();
            prop_assert!((0.0..=1.0).contains(&r));
        }
    }
}
