//! Extraction of lifetimes, efficiencies, noise figures, and spectral
//! fidelity from simulated (or measured) histograms and scans.

use serde::{Deserialize, Serialize};

use crate::bsfwm::{delay_profile, translation_efficiency};
use crate::detection::{mu1_benchmark, snr};
use crate::error::{Error, Result};
use crate::montecarlo::{DelayScan, HistogramSet, PowerScan, TimeTagHistogram};
use crate::optimize::minimize_bounded;
use crate::spectral::{trapezoid, SpectralIntensity};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifetimeFit {
    /// 1/e lifetime in round trips.
    pub lifetime: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    pub r_squared: f64,
    pub slope: f64,
    pub slope_std_err: f64,
    pub bins_used: usize,
}

impl LifetimeFit {
    pub fn covers(&self, tau: f64) -> bool {
        self.ci95_low <= tau && tau <= self.ci95_high
    }
}

struct WeightedLine {
    intercept: f64,
    slope: f64,
    slope_var: f64,
    r_squared: f64,
}

/// Straight-line fit with known per-point weights `1/σ²`.
fn weighted_line(x: &[f64], y: &[f64], w: &[f64]) -> WeightedLine {
    let sw: f64 = w.iter().sum();
    let sx: f64 = w.iter().zip(x).map(|(w, x)| w * x).sum();
    let sy: f64 = w.iter().zip(y).map(|(w, y)| w * y).sum();
    let (mx, my) = (sx / sw, sy / sw);
    // centred sums for stability
    let sxx: f64 = w.iter().zip(x).map(|(w, x)| w * (x - mx).powi(2)).sum();
    let sxy: f64 = w.iter().zip(x).zip(y).map(|((w, x), y)| w * (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = w.iter().zip(y).map(|(w, y)| w * (y - my).powi(2)).sum();
    let ss_res: f64 = w.iter().zip(x).zip(y).map(|((w, x), y)| w * (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) } else { 1.0 };
    WeightedLine { intercept, slope, slope_var: 1.0 / sxx, r_squared }
}

/// Weighted regression of `ln(counts)` on the bin index over
/// `bins.0..bins.1`, with weights equal to the counts (Poisson variance of the
/// logarithm). Empty bins are skipped.
pub fn fit_ring_down(hist: &TimeTagHistogram, bins: (usize, usize)) -> Result<LifetimeFit> {
    let end = bins.1.min(hist.n_bins());
    let (mut x, mut y, mut w) = (Vec::new(), Vec::new(), Vec::new());
    for t in bins.0..end {
        let c = hist.counts[t];
        if c > 0 {
            x.push(t as f64);
            y.push((c as f64).ln());
            w.push(c as f64);
        }
    }
    fit_log_linear(&x, &y, &w)
}

/// [`fit_ring_down`] on real-valued counts, e.g. expected-count curves.
pub fn fit_ring_down_counts(counts: &[f64]) -> Result<LifetimeFit> {
    let (mut x, mut y, mut w) = (Vec::new(), Vec::new(), Vec::new());
    for (t, c) in counts.iter().enumerate() {
        if *c > 0.0 {
            x.push(t as f64);
            y.push(c.ln());
            w.push(*c);
        }
    }
    fit_log_linear(&x, &y, &w)
}

fn fit_log_linear(x: &[f64], y: &[f64], w: &[f64]) -> Result<LifetimeFit> {
    if x.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "ring-down fit needs at least 3 non-empty bins, found {}",
            x.len()
        )));
    }
    let line = weighted_line(x, y, w);
    let ln_scale = y.iter().map(|v| v.abs()).fold(1.0, f64::max);
    if !(line.slope < -1e-12 * ln_scale) {
        return Err(Error::NonDecaying(format!("log-count slope {:.3e} per round trip is not negative", line.slope)));
    }
    let lifetime = -1.0 / line.slope;
    let slope_std_err = line.slope_var.sqrt();
    let half = Z95 * slope_std_err / (line.slope * line.slope);
    Ok(LifetimeFit {
        lifetime,
        ci95_low: lifetime - half,
        ci95_high: lifetime + half,
        r_squared: line.r_squared,
        slope: line.slope,
        slope_std_err,
        bins_used: x.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
}

impl Estimate {
    fn efficiency(value: f64, std_err: f64) -> Self {
        Self { value: value.clamp(0.0, 1.0), std_err }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub eta_w: Estimate,
    pub eta_r: Estimate,
    pub eta_tot: Estimate,
    /// Noise-corrected retrieved photons per pulse over noise photons per
    /// pulse; present only when a noise run was supplied.
    pub snr: Option<Estimate>,
    pub mu1: Option<Estimate>,
    /// Readout-bin noise, photons per pulse inside the fiber.
    pub n_noise: Option<Estimate>,
}

fn check_trials(sets: &[&HistogramSet]) -> Result<()> {
    let n = sets[0].n_trials();
    for s in sets {
        if s.fast.n_trials != n || s.slow.n_trials != n {
            return Err(Error::domain(format!(
                "histograms must share a trial count (found {} and {})",
                n,
                s.fast.n_trials.max(s.slow.n_trials)
            )));
        }
        if s.fast.n_bins() != sets[0].fast.n_bins() || s.slow.n_bins() != sets[0].fast.n_bins() {
            return Err(Error::domain("histograms must share a bin count"));
        }
    }
    Ok(())
}

fn nonzero(v: f64, what: &str) -> Result<f64> {
    if v <= 0.0 {
        return Err(Error::ZeroReference(format!("{what} has zero counts")));
    }
    Ok(v)
}

/// `1 − a/b` with Poisson errors on both counts.
fn one_minus_ratio(a: f64, b: f64) -> Estimate {
    let r = a / b;
    let se = if a > 0.0 { r * (1.0 / a + 1.0 / b).sqrt() } else { 1.0 / b };
    Estimate::efficiency(1.0 - r, se)
}

/// Write, read, and total efficiency from three runs:
///
/// * `η_w = 1 − fast_write[0] / fast_off[0]`
/// * `η_r = 1 − Σ slow_all[t_read..] / Σ slow_write[t_read..]`
/// * `η_tot = fast_all[t_read] / fast_off[0]`
///
/// The read efficiency uses the whole tail because a photon released at
/// `t_read` is also missing from every later leakage bin.
pub fn extract_efficiencies(
    off: &HistogramSet,
    write: &HistogramSet,
    all: &HistogramSet,
    t_read: usize,
) -> Result<EfficiencyReport> {
    extract(off, write, all, None, t_read)
}

/// As [`extract_efficiencies`], but subtracts a signal-free noise run from the
/// fast-axis bins and reports noise, SNR, and μ₁. `detection_efficiency`
/// converts detector counts back to photons inside the fiber.
pub fn extract_efficiencies_with_noise(
    off: &HistogramSet,
    write: &HistogramSet,
    all: &HistogramSet,
    noise: &HistogramSet,
    t_read: usize,
    detection_efficiency: f64,
) -> Result<EfficiencyReport> {
    if !(detection_efficiency > 0.0) {
        return Err(Error::domain("detection efficiency must be > 0"));
    }
    extract(off, write, all, Some((noise, detection_efficiency)), t_read)
}

fn extract(
    off: &HistogramSet,
    write: &HistogramSet,
    all: &HistogramSet,
    noise: Option<(&HistogramSet, f64)>,
    t_read: usize,
) -> Result<EfficiencyReport> {
    let mut sets = vec![off, write, all];
    if let Some((n, _)) = noise {
        sets.push(n);
    }
    check_trials(&sets)?;
    if t_read >= off.fast.n_bins() {
        return Err(Error::domain(format!("t_read = {t_read} beyond {} bins", off.fast.n_bins())));
    }
    let trials = off.n_trials() as f64;
    let noise_fast = |bin: usize| noise.map_or(0.0, |(n, _)| n.fast.counts[bin] as f64);

    let reference = nonzero(off.fast.counts[0] as f64, "signal-only fast-axis bin 0")?;

    let w0 = write.fast.counts[0] as f64;
    let n0 = noise_fast(0);
    let eta_w = {
        let r = (w0 - n0).max(0.0) / reference;
        let se = ((w0 + n0) / (reference * reference) + r * r / reference).sqrt();
        Estimate::efficiency(1.0 - r, se)
    };

    let tail = |h: &TimeTagHistogram| h.counts[t_read..].iter().sum::<u64>() as f64;
    let stored = nonzero(tail(&write.slow), "write-only slow-axis tail")?;
    let eta_r = one_minus_ratio(tail(&all.slow), stored);

    let a = all.fast.counts[t_read] as f64;
    let n = noise_fast(t_read);
    let corrected = a - n;
    let eta_tot_value = corrected / reference;
    let eta_tot = Estimate::efficiency(
        eta_tot_value,
        ((a + n) / (reference * reference) + eta_tot_value.powi(2) / reference).sqrt(),
    );

    let (snr_est, mu1, n_noise) = match noise {
        None => (None, None, None),
        Some((_, eta_det)) => {
            let n_noise = Estimate { value: n / trials / eta_det, std_err: n.sqrt() / trials / eta_det };
            let s = snr(corrected, n);
            let s_se = if n > 0.0 { (a / (n * n) + a * a / (n * n * n)).sqrt() } else { f64::INFINITY };
            let mu1 = if corrected > 0.0 {
                let value = mu1_benchmark(n_noise.value, eta_tot_value)?;
                let rel = (n.max(1.0) * (1.0 / n.max(1.0) + 1.0 / corrected).powi(2)
                    + a / (corrected * corrected)
                    + 1.0 / reference)
                    .sqrt();
                Some(Estimate { value, std_err: value * rel })
            } else {
                None
            };
            (Some(Estimate { value: s, std_err: s_se }), mu1, Some(n_noise))
        }
    };

    Ok(EfficiencyReport { eta_w, eta_r, eta_tot, snr: snr_est, mu1, n_noise })
}

/// Normalised overlap of square-root spectral intensities,
/// `∫√(I_in·I_out) / √(∫I_in · ∫I_out)`, by trapezoidal quadrature.
/// Spectra on different grids are both resampled onto the union grid.
pub fn spectral_fidelity(i_in: &SpectralIntensity, i_out: &SpectralIntensity) -> Result<f64> {
    let (a, b) = if i_in.grid() == i_out.grid() {
        (i_in.values().to_vec(), i_out.values().to_vec())
    } else {
        let mut grid: Vec<f64> = i_in.grid().iter().chain(i_out.grid()).copied().collect();
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        let grid_ref = grid.clone();
        return fidelity_on(
            &grid_ref,
            &grid.iter().map(|x| i_in.value_at(*x)).collect::<Vec<_>>(),
            &grid.iter().map(|x| i_out.value_at(*x)).collect::<Vec<_>>(),
        );
    };
    fidelity_on(i_in.grid(), &a, &b)
}

fn fidelity_on(grid: &[f64], a: &[f64], b: &[f64]) -> Result<f64> {
    let ia = trapezoid(grid, a);
    let ib = trapezoid(grid, b);
    if !(ia > 0.0) || !(ib > 0.0) {
        return Err(Error::domain("fidelity needs spectra with positive integral"));
    }
    let overlap: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x * y).sqrt()).collect();
    // Cauchy-Schwarz bounds the discrete sum by 1; trim round-off above it.
    Ok((trapezoid(grid, &overlap) / (ia * ib).sqrt()).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerScanFit {
    pub xi_rad_per_nj: f64,
    /// Fitted corrected rate at zero control energy.
    pub amplitude: f64,
    pub r_squared_signal: f64,
    pub noise_slope: f64,
    pub noise_intercept: f64,
    pub r_squared_noise: f64,
    pub signal_residuals: Vec<f64>,
}

fn r_squared(y: &[f64], fitted: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = y.iter().zip(fitted).map(|(v, f)| (v - f).powi(2)).sum();
    if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        0.0
    }
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|r| r * r).sum::<f64>() / v.len() as f64).sqrt()
}

/// Best amplitude for `y ≈ A·f` and the residual sum of squares.
fn linear_amplitude(y: &[f64], f: &[f64]) -> (f64, f64) {
    let ff: f64 = f.iter().map(|v| v * v).sum();
    if ff <= 0.0 {
        return (0.0, y.iter().map(|v| v * v).sum());
    }
    let a = y.iter().zip(f).map(|(y, f)| y * f).sum::<f64>() / ff;
    let ss = y.iter().zip(f).map(|(y, f)| (y - a * f).powi(2)).sum();
    (a, ss)
}

/// Fits the corrected signal to `W_in·cos²(ξ·√(W_q·W_p))` and the noise to a
/// straight line in control energy (weighted by Poisson variance).
pub fn fit_power_scan(scan: &PowerScan) -> Result<PowerScanFit> {
    let rows = &scan.rows;
    if rows.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "power-scan fit needs at least 5 energy points, got {}",
            rows.len()
        )));
    }
    let x: Vec<f64> = rows.iter().map(|r| r.x).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.corrected_rate).collect();

    let mut sorted = x.clone();
    sorted.sort_by(f64::total_cmp);
    let spacing = sorted.windows(2).map(|w| w[1] - w[0]).filter(|d| *d > 0.0).fold(f64::INFINITY, f64::min);
    let x_max = sorted[sorted.len() - 1];
    if !spacing.is_finite() || x_max <= 0.0 {
        return Err(Error::fit("power scan needs at least two distinct positive energies"));
    }
    // cos²(ξx) on a grid of spacing h cannot tell ξ from π/h − ξ.
    let xi_max = std::f64::consts::FRAC_PI_2 / spacing;
    let model = |xi: f64| -> Vec<f64> { x.iter().map(|x| (xi * x).cos().powi(2)).collect() };
    let (xi, ss) = minimize_bounded(|xi| linear_amplitude(&y, &model(xi)).1, 0.0, xi_max, 4000, 1e-12 * xi_max);
    let (amplitude, _) = linear_amplitude(&y, &model(xi));
    let fitted: Vec<f64> = model(xi).iter().map(|f| amplitude * f).collect();
    let residuals: Vec<f64> = y.iter().zip(&fitted).map(|(y, f)| y - f).collect();
    if !(amplitude > 0.0) || !ss.is_finite() {
        return Err(Error::fit(format!(
            "cos² fit did not converge (amplitude {amplitude:.4e}, residual rms {:.4e})",
            rms(&residuals)
        )));
    }
    let r2_signal = r_squared(&y, &fitted);

    let trials = scan.n_trials as f64;
    let noise: Vec<f64> = rows.iter().map(|r| r.noise_rate).collect();
    let weights: Vec<f64> = noise.iter().map(|n| trials * trials / (n * trials).max(1.0)).collect();
    let line = weighted_line(&x, &noise, &weights);

    Ok(PowerScanFit {
        xi_rad_per_nj: xi,
        amplitude,
        r_squared_signal: r2_signal,
        noise_slope: line.slope,
        noise_intercept: line.intercept,
        r_squared_noise: line.r_squared,
        signal_residuals: residuals,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayScanFit {
    pub walkoff_ps: f64,
    pub amplitude: f64,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
}

/// Fits the corrected rate to `A·sin²(θ_max·κ(τ; Δ_w))` over `Δ_w`, with the
/// pulse durations and `θ_max` taken from the scan.
pub fn fit_delay_scan(scan: &DelayScan) -> Result<DelayScanFit> {
    let rows = &scan.rows;
    if rows.len() < 7 {
        return Err(Error::InsufficientData(format!("delay-scan fit needs at least 7 delays, got {}", rows.len())));
    }
    if !(scan.theta_max > 0.0) {
        return Err(Error::fit("scanned stage has zero conversion angle"));
    }
    let x: Vec<f64> = rows.iter().map(|r| r.x).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.corrected_rate).collect();
    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    if !(hi > lo) {
        return Err(Error::fit("delay profile not resolved: all corrected rates are equal"));
    }
    let span = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let model = |walkoff: f64| -> Vec<f64> {
        let c = scan.coupling.with_walkoff(walkoff).expect("positive walk-off");
        x.iter().map(|t| translation_efficiency(scan.theta_max * delay_profile(&c, *t))).collect()
    };
    let upper = 4.0 * span.max(1.0);
    let (walkoff, ss) = minimize_bounded(|w| linear_amplitude(&y, &model(w)).1, 1e-3, upper, 2000, 1e-9);
    let (amplitude, _) = linear_amplitude(&y, &model(walkoff));
    let fitted: Vec<f64> = model(walkoff).iter().map(|f| amplitude * f).collect();
    let residuals: Vec<f64> = y.iter().zip(&fitted).map(|(y, f)| y - f).collect();
    if !(amplitude > 0.0) || !ss.is_finite() || walkoff >= upper * 0.999 {
        return Err(Error::fit(format!(
            "delay fit did not converge (walk-off {walkoff:.3} ps, residual rms {:.4e})",
            rms(&residuals)
        )));
    }
    Ok(DelayScanFit { walkoff_ps: walkoff, amplitude, r_squared: r_squared(&y, &fitted), residuals })
}
