//! Browser bindings for the demo page in `www/`.
//!
//! Every export returns a JSON string. Failures come back as
//! `{"error": "..."}` so the page can show them without exceptions.

use std::path::Path;

use cavity_memory::analysis::fit_ring_down;
use cavity_memory::bsfwm::{delay_profile, BsfwmCoupling};
use cavity_memory::cavity::{ring_down_expected_counts, survival_from_lifetime, RingDownModel};
use cavity_memory::config::ConfigFile;
use cavity_memory::montecarlo::run_scenario;
use cavity_memory::multiplex::{multiplex_sweep, optimal_bin_count, MultiplexConfig};
use cavity_memory::spectral::uniform_grid;
use cavity_memory::Result;
use serde_json::{json, Value};
use wasm_bindgen::prelude::wasm_bindgen;

/// Trial cap for the in-browser ring-down; about a second per click.
pub const MAX_RING_DOWN_TRIALS: u32 = 100_000;

fn respond(r: Result<Value>) -> String {
    match r {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e.to_string() }).to_string(),
    }
}

/// Normalised overlap κ(Δ) on `steps` delays between `from_ps` and `to_ps`.
#[wasm_bindgen]
pub fn delay_profile_curve(
    walkoff_ps: f64,
    signal_ps: f64,
    control_ps: f64,
    from_ps: f64,
    to_ps: f64,
    steps: u32,
) -> String {
    respond((|| {
        let coupling = BsfwmCoupling::new(0.0, walkoff_ps, signal_ps, control_ps)?;
        let delays = uniform_grid(from_ps, to_ps, steps.max(2) as usize);
        let kappa: Vec<f64> = delays.iter().map(|&d| delay_profile(&coupling, d)).collect();
        Ok(json!({ "delay_ps": delays, "kappa": kappa }))
    })())
}

/// Bright-pulse ring-down with the read pair off: simulated slow-axis
/// histogram, the geometric model scaled to bin 0, and a lifetime fit.
#[wasm_bindgen]
pub fn ring_down(tau_c: f64, trials: u32, seed: u32) -> String {
    respond((|| {
        let mut cfg = ConfigFile::default();
        cfg.cavity.lifetime_round_trips = Some(tau_c);
        cfg.run.rng_seed = u64::from(seed);
        let mut s = cfg.to_bright_scenario(Path::new("."))?.with_read_off();
        s.n_trials = u64::from(trials.clamp(1, MAX_RING_DOWN_TRIALS));
        s.validate()?;
        let run = run_scenario(&s)?;
        let counts = &run.slow.counts;
        let p = survival_from_lifetime(tau_c)?;
        let model = RingDownModel::new(s.cavity.round_trip_time_ns(), p)?;
        let fit = fit_ring_down(&run.slow, (0, s.n_bins));
        let fit = match fit {
            Ok(f) => json!({
                "lifetime": f.lifetime,
                "ci95": [f.ci95_low, f.ci95_high],
                "r_squared": f.r_squared,
            }),
            Err(e) => json!({ "error": e.to_string() }),
        };
        Ok(json!({
            "counts": counts,
            "model": ring_down_expected_counts(&model, counts.first().copied().unwrap_or(0) as f64, s.n_bins),
            "round_trip_time_ns": model.round_trip_time_ns,
            "n_trials": s.n_trials,
            "fit": fit,
        }))
    })())
}

/// `P_out(N)` for `N = 1..=n_max` with survival taken from `tau_c`.
#[wasm_bindgen]
pub fn multiplex_curve(herald_probability: f64, memory_total_efficiency: f64, tau_c: f64, n_max: u32) -> String {
    respond((|| {
        let n_max = n_max.clamp(1, 2000) as usize;
        let cfg =
            MultiplexConfig::new(herald_probability, 1, memory_total_efficiency, survival_from_lifetime(tau_c)?, 1.0)?;
        let points = multiplex_sweep(&cfg, n_max);
        let best_n = optimal_bin_count(&cfg, n_max);
        let best_p = points[best_n - 1].p_out;
        Ok(json!({
            "n_bins": points.iter().map(|p| p.n_bins).collect::<Vec<_>>(),
            "p_out": points.iter().map(|p| p.p_out).collect::<Vec<_>>(),
            "optimal_n_bins": best_n,
            "p_out_optimal": best_p,
        }))
    })())
}
