//! Temporal multiplexing of a heralded photon source with the memory.
//!
//! Attempts `k = 1..N` each herald a photon with probability `p_h`. The first
//! heralded photon is stored and released at the synchronised output slot
//! after attempt `N`, so a photon heralded in attempt `k` waits `N − k` extra
//! round trips:
//!
//! ```text
//! P_out = Σ_k (1 − p_h)^(k−1) · p_h · η_src · η_tot · p^(N−k)
//! ```

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiplexConfig {
    pub herald_probability: f64,
    pub n_bins: usize,
    /// Store plus retrieve, without any extra storage round trips.
    pub memory_total_efficiency: f64,
    pub survival_per_round_trip: f64,
    pub source_heralding_efficiency: f64,
}

impl MultiplexConfig {
    pub fn new(
        herald_probability: f64,
        n_bins: usize,
        memory_total_efficiency: f64,
        survival_per_round_trip: f64,
        source_heralding_efficiency: f64,
    ) -> Result<Self> {
        let cfg = Self {
            herald_probability,
            n_bins,
            memory_total_efficiency,
            survival_per_round_trip,
            source_heralding_efficiency,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("herald_probability", self.herald_probability),
            ("memory_total_efficiency", self.memory_total_efficiency),
            ("survival_per_round_trip", self.survival_per_round_trip),
            ("source_heralding_efficiency", self.source_heralding_efficiency),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::domain(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if self.n_bins == 0 {
            return Err(Error::domain("n_bins must be >= 1"));
        }
        Ok(())
    }

    pub fn with_bins(self, n_bins: usize) -> Self {
        Self { n_bins, ..self }
    }
}

/// Probability that the synchronised output slot holds a photon.
pub fn output_photon_probability(cfg: &MultiplexConfig) -> f64 {
    let p = cfg.survival_per_round_trip;
    let miss = 1.0 - cfg.herald_probability;
    // Horner form of Σ_k miss^(k−1) p^(N−k)
    let mut sum = 0.0;
    let mut miss_pow = 1.0;
    for _ in 0..cfg.n_bins {
        sum = p * sum + miss_pow;
        miss_pow *= miss;
    }
    let value = cfg.herald_probability * cfg.source_heralding_efficiency * cfg.memory_total_efficiency * sum;
    value.clamp(0.0, 1.0)
}

/// `N ∈ [1, n_max]` maximising the output probability; ties go to the
/// smaller `N`.
pub fn optimal_bin_count(cfg: &MultiplexConfig, n_max: usize) -> usize {
    let mut best = (1, f64::NEG_INFINITY);
    for n in 1..=n_max.max(1) {
        let v = output_photon_probability(&cfg.with_bins(n));
        if v > best.1 {
            best = (n, v);
        }
    }
    best.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiplexPoint {
    pub n_bins: usize,
    pub p_out: f64,
}

/// `P_out` for `N = 1..=n_max`.
pub fn multiplex_sweep(cfg: &MultiplexConfig, n_max: usize) -> Vec<MultiplexPoint> {
    (1..=n_max.max(1))
        .map(|n| MultiplexPoint { n_bins: n, p_out: output_photon_probability(&cfg.with_bins(n)) })
        .collect()
}

/// `n_bins,p_out`
pub fn write_sweep_csv<W: Write>(points: &[MultiplexPoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "n_bins,p_out")?;
    for pt in points {
        writeln!(out, "{},{}", pt.n_bins, pt.p_out)?;
    }
    Ok(())
}

/// Removes the one storage round trip contained in a measured total
/// efficiency.
pub fn zero_storage_efficiency(eta_tot: f64, survival: f64) -> Result<f64> {
    if !(survival > 0.0) || survival > 1.0 {
        return Err(Error::domain(format!("survival {survival} outside (0, 1]")));
    }
    Ok(eta_tot / survival)
}
