//! Click / no-click detector models with finite efficiency and dark clicks.

use serde::{Deserialize, Serialize};

use crate::error::{check_closed, check_unit, Error, Result};
use crate::math::pow_usize;
use crate::states::PhotonDistribution;

/// Single-photon detector: quantum efficiency, per-pulse dark-click
/// probability, and whether it resolves photon number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorModel {
    pub efficiency: f64,
    #[serde(default)]
    pub dark_prob: f64,
    #[serde(default)]
    pub pnr: bool,
}

impl DetectorModel {
    pub fn new(efficiency: f64, dark_prob: f64, pnr: bool) -> Result<Self> {
        let det = Self {
            efficiency,
            dark_prob,
            pnr,
        };
        det.validate()?;
        Ok(det)
    }

    /// Unit efficiency, no darks, non-PNR.
    pub fn ideal() -> Self {
        Self {
            efficiency: 1.0,
            dark_prob: 0.0,
            pnr: false,
        }
    }

    pub fn with_efficiency(efficiency: f64) -> Result<Self> {
        Self::new(efficiency, 0.0, false)
    }

    pub fn validate(&self) -> Result<()> {
        check_unit("efficiency", self.efficiency)?;
        if !(0.0..1.0).contains(&self.dark_prob) {
            return Err(Error::OutOfRange {
                name: "dark_prob",
                value: self.dark_prob,
                expected: "[0, 1)",
            });
        }
        Ok(())
    }

    /// No-click POVM element for `k` incident photons, darks excluded:
    /// `(1 - eta)^k`.
    pub fn photon_no_click(&self, k: usize) -> f64 {
        pow_usize(1.0 - self.efficiency, k)
    }

    /// Probability of no click with `k` incident photons, darks included.
    pub fn no_click_given(&self, k: usize) -> f64 {
        (1.0 - self.dark_prob) * self.photon_no_click(k)
    }

    pub fn click_given(&self, k: usize) -> f64 {
        1.0 - self.no_click_given(k)
    }

    /// Probability that a number-resolving detector reports exactly one
    /// count with `k` incident photons. A dark event adds one count.
    pub fn exactly_one_given(&self, k: usize) -> f64 {
        let eta = self.efficiency;
        let one_photon = if k == 0 {
            0.0
        } else {
            k as f64 * eta * pow_usize(1.0 - eta, k - 1)
        };
        one_photon * (1.0 - self.dark_prob) + self.photon_no_click(k) * self.dark_prob
    }
}

/// `(1 - dark) * sum_n p_n (1 - eta)^n`.
///
/// The no-click outcome has the same POVM element whether or not the
/// detector resolves photon number.
pub fn no_click_probability(dist: &PhotonDistribution, det: &DetectorModel) -> f64 {
    (1.0 - det.dark_prob) * dist.generating(1.0 - det.efficiency)
}

pub fn click_probability(dist: &PhotonDistribution, det: &DetectorModel) -> f64 {
    1.0 - no_click_probability(dist, det)
}

/// Converts a dark-count rate into a per-pulse click probability.
pub fn per_pulse_dark_prob(rate_hz: f64, rep_rate_hz: f64) -> Result<f64> {
    if !(rep_rate_hz > 0.0 && rep_rate_hz.is_finite()) {
        return Err(Error::OutOfRange {
            name: "rep_rate_hz",
            value: rep_rate_hz,
            expected: "> 0",
        });
    }
    check_closed("dark rate", rate_hz, 0.0, f64::INFINITY, ">= 0")?;
    if rate_hz >= rep_rate_hz {
        return Err(Error::OutOfRange {
            name: "dark rate",
            value: rate_hz,
            expected: "below the repetition rate",
        });
    }
    Ok(rate_hz / rep_rate_hz)
}
