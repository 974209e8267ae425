//! Linear fiber cavity with dichroic end facets.
//!
//! A round trip is two fiber passes and two facet reflections, so the
//! per-round-trip survival is `R(λ)² · 10^(−2·L·α/10)` with an optional
//! extra loss term for splices and bends.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{CoatingCurve, Wavelength, SPEED_OF_LIGHT};

/// Group index that reproduces a 12.67 ns round trip for 1.285 m of fiber.
pub const DEFAULT_GROUP_INDEX: f64 = 1.478;
pub const DEFAULT_LENGTH_M: f64 = 1.285;
pub const DEFAULT_FIBER_LOSS_DB_PER_KM: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub enum Reflectivity {
    Constant(f64),
    Coating(CoatingCurve),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiberCavity {
    length_m: f64,
    group_index: f64,
    fiber_loss_db_per_km: f64,
    extra_loss_db_per_round_trip: f64,
    reflectivity: Reflectivity,
}

impl FiberCavity {
    pub fn new(length_m: f64, group_index: f64, fiber_loss_db_per_km: f64, reflectivity: Reflectivity) -> Result<Self> {
        if !(length_m > 0.0) || !length_m.is_finite() {
            return Err(Error::domain(format!("cavity length must be > 0, got {length_m} m")));
        }
        if !(group_index >= 1.0) || !group_index.is_finite() {
            return Err(Error::domain(format!("group index must be >= 1, got {group_index}")));
        }
        if !(fiber_loss_db_per_km >= 0.0) || !fiber_loss_db_per_km.is_finite() {
            return Err(Error::domain(format!("fiber loss must be >= 0, got {fiber_loss_db_per_km} dB/km")));
        }
        if let Reflectivity::Constant(r) = reflectivity {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::domain(format!("reflectivity {r} outside [0, 1]")));
            }
        }
        Ok(Self { length_m, group_index, fiber_loss_db_per_km, extra_loss_db_per_round_trip: 0.0, reflectivity })
    }

    /// 1.285 m of PM fiber at 5 dB/km with the bundled coating curve.
    pub fn reference() -> Self {
        Self::new(
            DEFAULT_LENGTH_M,
            DEFAULT_GROUP_INDEX,
            DEFAULT_FIBER_LOSS_DB_PER_KM,
            Reflectivity::Coating(CoatingCurve::builtin()),
        )
        .expect("reference cavity is valid")
    }

    pub fn with_extra_loss_db(mut self, db_per_round_trip: f64) -> Result<Self> {
        if !(db_per_round_trip >= 0.0) || !db_per_round_trip.is_finite() {
            return Err(Error::domain(format!("extra loss must be >= 0, got {db_per_round_trip} dB per round trip")));
        }
        self.extra_loss_db_per_round_trip = db_per_round_trip;
        Ok(self)
    }

    pub fn with_reflectivity(mut self, reflectivity: Reflectivity) -> Result<Self> {
        if let Reflectivity::Constant(r) = reflectivity {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::domain(format!("reflectivity {r} outside [0, 1]")));
            }
        }
        self.reflectivity = reflectivity;
        Ok(self)
    }

    pub fn length_m(&self) -> f64 {
        self.length_m
    }

    pub fn group_index(&self) -> f64 {
        self.group_index
    }

    pub fn fiber_loss_db_per_km(&self) -> f64 {
        self.fiber_loss_db_per_km
    }

    pub fn extra_loss_db_per_round_trip(&self) -> f64 {
        self.extra_loss_db_per_round_trip
    }

    pub fn reflectivity(&self) -> &Reflectivity {
        &self.reflectivity
    }

    pub fn reflectivity_at(&self, lambda: Wavelength) -> Result<f64> {
        match &self.reflectivity {
            Reflectivity::Constant(r) => Ok(*r),
            Reflectivity::Coating(curve) => curve.reflectivity(lambda),
        }
    }

    /// Transmission of everything except the facets over one round trip.
    pub fn propagation_transmission(&self) -> f64 {
        let length_km = self.length_m * 1e-3;
        let db = 2.0 * length_km * self.fiber_loss_db_per_km + self.extra_loss_db_per_round_trip;
        10f64.powf(-db / 10.0)
    }

    pub fn round_trip_time_ns(&self) -> f64 {
        round_trip_time(self)
    }

    pub fn ring_down_model(&self, lambda: Wavelength) -> Result<RingDownModel> {
        RingDownModel::new(self.round_trip_time_ns(), survival_per_round_trip(self, lambda)?)
    }
}

/// Round-trip time in ns, `2·L·n_g/c`.
pub fn round_trip_time(cavity: &FiberCavity) -> f64 {
    2.0 * cavity.length_m * cavity.group_index / SPEED_OF_LIGHT * 1e9
}

pub fn survival_per_round_trip(cavity: &FiberCavity, lambda: Wavelength) -> Result<f64> {
    let r = cavity.reflectivity_at(lambda)?;
    Ok(r * r * cavity.propagation_transmission())
}

/// 1/e lifetime in round trips, `−1/ln p`. Returns `f64::INFINITY` for a
/// lossless cavity.
pub fn lifetime_round_trips(p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::domain(format!("survival probability {p} outside (0, 1]")));
    }
    if p == 1.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-1.0 / p.ln())
}

/// Survival per round trip that gives a 1/e lifetime of `tau_c` round trips.
pub fn survival_from_lifetime(tau_c: f64) -> Result<f64> {
    if !(tau_c > 0.0) || tau_c.is_nan() {
        return Err(Error::domain(format!("lifetime must be > 0, got {tau_c}")));
    }
    Ok((-1.0 / tau_c).exp())
}

/// Implied reflectivities within this distance above 1 are rounded to 1.
pub const REFLECTIVITY_SLACK: f64 = 1e-6;

/// Facet reflectivity needed for a 1/e lifetime of `tau_c` round trips,
/// given the cavity's propagation loss.
pub fn reflectivity_from_lifetime(tau_c: f64, cavity: &FiberCavity) -> Result<f64> {
    let p = survival_from_lifetime(tau_c)?;
    let r = (p / cavity.propagation_transmission()).sqrt();
    if r > 1.0 + REFLECTIVITY_SLACK {
        let bound = lifetime_round_trips(cavity.propagation_transmission())?;
        return Err(Error::Infeasible(format!(
            "lifetime {tau_c} round trips exceeds the propagation-loss bound of {bound:.3}"
        )));
    }
    Ok(r.min(1.0))
}

/// Geometric ring-down of a cavity with a fixed survival per round trip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingDownModel {
    pub round_trip_time_ns: f64,
    pub survival_per_round_trip: f64,
    /// `f64::INFINITY` when `survival_per_round_trip == 1`.
    pub lifetime_round_trips: f64,
}

impl RingDownModel {
    pub fn new(round_trip_time_ns: f64, survival: f64) -> Result<Self> {
        Ok(Self {
            round_trip_time_ns,
            survival_per_round_trip: survival,
            lifetime_round_trips: lifetime_round_trips(survival)?,
        })
    }

    pub fn from_lifetime(round_trip_time_ns: f64, tau_c: f64) -> Result<Self> {
        Self::new(round_trip_time_ns, survival_from_lifetime(tau_c)?)
    }
}

/// Expected leakage counts `rate · p^T` for `T = 0..n_bins`.
pub fn ring_down_expected_counts(model: &RingDownModel, initial_rate: f64, n_bins: usize) -> Vec<f64> {
    let p = model.survival_per_round_trip;
    std::iter::successors(Some(initial_rate), |c| Some(c * p)).take(n_bins).collect()
}
