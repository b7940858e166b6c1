//! Loss channels and the beamsplitter acting on photon-number statistics.
//!
//! Only diagonal states are propagated, so the beamsplitter reduces to
//! binomial routing of each photon into the reflected or transmitted port.

use serde::{Deserialize, Serialize};

use crate::error::{check_unit, Error, Result};
use crate::math::{binomial_row, ln_factorials};
use crate::states::PhotonDistribution;

/// Beamsplitter reflectance `R`; transmittance is `1 - R`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Reflectance(f64);

impl Reflectance {
    pub fn new(r: f64) -> Result<Self> {
        check_unit("reflectance", r).map(Self)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn transmittance(self) -> f64 {
        1.0 - self.0
    }
}

impl TryFrom<f64> for Reflectance {
    type Error = Error;

    fn try_from(r: f64) -> Result<Self> {
        Self::new(r)
    }
}

impl From<Reflectance> for f64 {
    fn from(r: Reflectance) -> f64 {
        r.0
    }
}

/// Joint photon-number statistics `P(k, m)` of the reflected (`k`) and
/// transmitted (`m`) beamsplitter outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    cutoff: usize,
    // row-major, (cutoff+1)^2
    probs: Vec<f64>,
}

impl JointDistribution {
    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn get(&self, k: usize, m: usize) -> f64 {
        if k > self.cutoff || m > self.cutoff {
            0.0
        } else {
            self.probs[k * (self.cutoff + 1) + m]
        }
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Photon statistics of the reflected port.
    pub fn reflected_marginal(&self) -> Vec<f64> {
        let w = self.cutoff + 1;
        self.probs.chunks(w).map(|row| row.iter().sum()).collect()
    }

    /// Photon statistics of the transmitted port.
    pub fn transmitted_marginal(&self) -> Vec<f64> {
        let w = self.cutoff + 1;
        let mut out = vec![0.0; w];
        for row in self.probs.chunks(w) {
            for (o, p) in out.iter_mut().zip(row) {
                *o += p;
            }
        }
        out
    }

    /// Transmitted-port weights after weighting each reflected count `k`
    /// by `herald(k)`: `sum_k P(k, m) herald(k)`.
    pub fn transmitted_given(&self, herald: impl Fn(usize) -> f64) -> Vec<f64> {
        let w = self.cutoff + 1;
        let mut out = vec![0.0; w];
        for (k, row) in self.probs.chunks(w).enumerate() {
            let h = herald(k);
            if h == 0.0 {
                continue;
            }
            for (o, p) in out.iter_mut().zip(row) {
                *o += p * h;
            }
        }
        out
    }
}

/// Binomial photon loss with the given transmittance.
pub fn loss_channel(dist: &PhotonDistribution, transmittance: f64) -> Result<PhotonDistribution> {
    let kappa = check_unit("transmittance", transmittance)?;
    let cutoff = dist.cutoff();
    let ln_fact = ln_factorials(cutoff);
    let mut out = vec![0.0; cutoff + 1];
    for (n, &p) in dist.probs().iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for (m, b) in binomial_row(n, kappa, &ln_fact).into_iter().enumerate() {
            out[m] += p * b;
        }
    }
    // Binomial rows are already normalized; no second renormalization, so
    // a unit transmittance is an exact identity.
    Ok(PhotonDistribution::from_parts(out, dist.tail_mass()))
}

/// Splits each photon of `dist` into the reflected port with probability `R`.
pub fn beamsplitter_joint(dist: &PhotonDistribution, r: Reflectance) -> JointDistribution {
    let cutoff = dist.cutoff();
    let w = cutoff + 1;
    let ln_fact = ln_factorials(cutoff);
    let mut probs = vec![0.0; w * w];
    for (n, &p) in dist.probs().iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for (k, b) in binomial_row(n, r.value(), &ln_fact).into_iter().enumerate() {
            probs[k * w + (n - k)] += p * b;
        }
    }
    JointDistribution { cutoff, probs }
}
