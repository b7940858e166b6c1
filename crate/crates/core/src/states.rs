//! Input states as truncated photon-number distributions, plus moment analysis.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_unit, Error, Result};
use crate::math::pow_usize;

/// Largest truncated tail mass a constructor accepts.
pub const MAX_TAIL_MASS: f64 = 1e-10;

/// Tolerance on the normalization of user-supplied probability vectors.
const NORM_TOLERANCE: f64 = 1e-9;

/// Diagonal of a single-mode density matrix, truncated at `cutoff` photons.
///
/// Entries are non-negative and sum to one. When a constructor had to cut an
/// infinite distribution short, the discarded probability (before
/// renormalizing) is kept in [`tail_mass`](Self::tail_mass).
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonDistribution {
    probs: Vec<f64>,
    tail_mass: f64,
}

/// Mean, variance and Mandel Q of a photon-number distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StateMoments {
    pub mean_n: f64,
    pub variance: f64,
    /// `variance / mean_n - 1`, or 0 for the vacuum.
    pub mandel_q: f64,
}

impl PhotonDistribution {
    /// Builds a distribution from explicit probabilities.
    ///
    /// The vector must be non-empty, non-negative and sum to one within
    /// 1e-9; it is renormalized exactly.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution(
                "empty probability vector".into(),
            ));
        }
        if let Some((n, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !(p.is_finite() && **p >= 0.0))
        {
            return Err(Error::InvalidDistribution(format!("p[{n}] = {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}"
            )));
        }
        Ok(Self::normalized(probs, 0.0))
    }

    /// Renormalizes raw non-negative weights. Callers guarantee a positive sum.
    pub(crate) fn normalized(mut probs: Vec<f64>, tail_mass: f64) -> Self {
        let total: f64 = probs.iter().sum();
        debug_assert!(total > 0.0);
        for p in &mut probs {
            *p /= total;
        }
        Self { probs, tail_mass }
    }

    pub(crate) fn from_parts(probs: Vec<f64>, tail_mass: f64) -> Self {
        Self { probs, tail_mass }
    }

    pub fn vacuum(cutoff: usize) -> Self {
        let mut probs = vec![0.0; cutoff + 1];
        probs[0] = 1.0;
        Self {
            probs,
            tail_mass: 0.0,
        }
    }

    /// Poisson statistics of a coherent state with mean photon number `mean_n`.
    pub fn coherent(mean_n: f64, cutoff: usize) -> Result<Self> {
        if !(mean_n >= 0.0 && mean_n.is_finite()) {
            return Err(Error::OutOfRange {
                name: "mean_n",
                value: mean_n,
                expected: ">= 0",
            });
        }
        if mean_n == 0.0 {
            return Ok(Self::vacuum(cutoff));
        }
        let ln_mu = mean_n.ln();
        let mut ln_fact = 0.0;
        let mut probs = Vec::with_capacity(cutoff + 1);
        for n in 0..=cutoff {
            if n > 0 {
                ln_fact += (n as f64).ln();
            }
            probs.push((-mean_n + n as f64 * ln_mu - ln_fact).exp());
        }
        let kept: f64 = probs.iter().sum();
        Self::truncated(probs, (1.0 - kept).max(0.0), cutoff)
    }

    /// Weak-squeezing model of a single-mode squeezed vacuum: vacuum with
    /// probability `1 - pair_prob`, two photons with probability `pair_prob`.
    pub fn smsv(pair_prob: f64, cutoff: usize) -> Result<Self> {
        if !(0.0..1.0).contains(&pair_prob) {
            return Err(Error::OutOfRange {
                name: "pair_prob",
                value: pair_prob,
                expected: "[0, 1)",
            });
        }
        if cutoff < 2 {
            return Err(Error::CutoffTooSmall {
                cutoff,
                tail: pair_prob,
                limit: 0.0,
            });
        }
        if pair_prob > 0.1 {
            log::warn!(
                "pair probability {pair_prob} is outside the weak-squeezing regime; \
                 multipair terms are not modelled"
            );
        }
        let mut probs = vec![0.0; cutoff + 1];
        probs[0] = 1.0 - pair_prob;
        probs[2] = pair_prob;
        Ok(Self {
            probs,
            tail_mass: 0.0,
        })
    }

    /// Bose-Einstein statistics with mean photon number `mean_n`.
    pub fn thermal(mean_n: f64, cutoff: usize) -> Result<Self> {
        if !(mean_n >= 0.0 && mean_n.is_finite()) {
            return Err(Error::OutOfRange {
                name: "mean_n",
                value: mean_n,
                expected: ">= 0",
            });
        }
        if mean_n == 0.0 {
            return Ok(Self::vacuum(cutoff));
        }
        let ratio = mean_n / (1.0 + mean_n);
        let p0 = 1.0 / (1.0 + mean_n);
        let probs: Vec<f64> = (0..=cutoff).map(|n| p0 * pow_usize(ratio, n)).collect();
        let tail = pow_usize(ratio, cutoff + 1);
        Self::truncated(probs, tail, cutoff)
    }

    /// Number state `|n>`.
    pub fn fock(n: usize, cutoff: usize) -> Result<Self> {
        if n > cutoff {
            return Err(Error::AboveCutoff { n, cutoff });
        }
        let mut probs = vec![0.0; cutoff + 1];
        probs[n] = 1.0;
        Ok(Self {
            probs,
            tail_mass: 0.0,
        })
    }

    /// Heralded single-photon mixture `(1-beta)|0><0| + beta|1><1|`.
    pub fn heralded_single(beta: f64) -> Result<Self> {
        let beta = check_unit("beta", beta)?;
        Ok(Self {
            probs: vec![1.0 - beta, beta],
            tail_mass: 0.0,
        })
    }

    fn truncated(probs: Vec<f64>, tail: f64, cutoff: usize) -> Result<Self> {
        if tail >= MAX_TAIL_MASS {
            return Err(Error::CutoffTooSmall {
                cutoff,
                tail,
                limit: MAX_TAIL_MASS,
            });
        }
        Ok(Self::normalized(probs, tail))
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Probability of `n` photons; zero above the cutoff.
    pub fn prob(&self, n: usize) -> f64 {
        self.probs.get(n).copied().unwrap_or(0.0)
    }

    pub fn cutoff(&self) -> usize {
        self.probs.len() - 1
    }

    /// Probability discarded by truncation before renormalization.
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }

    pub fn moments(&self) -> StateMoments {
        let mean_n = self.mean();
        let variance = self
            .probs
            .iter()
            .enumerate()
            .map(|(n, p)| (n as f64 - mean_n).powi(2) * p)
            .sum();
        let mandel_q = if mean_n > 0.0 {
            variance / mean_n - 1.0
        } else {
            0.0
        };
        StateMoments {
            mean_n,
            variance,
            mandel_q,
        }
    }

    /// Generating function `sum_n p_n s^n`.
    pub fn generating(&self, s: f64) -> f64 {
        // Horner from the top keeps this accurate for s near zero.
        self.probs.iter().rev().fold(0.0, |acc, p| acc * s + p)
    }

    /// Derivative of the generating function, `sum_n n p_n s^(n-1)`.
    pub fn generating_derivative(&self, s: f64) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (n, p)| acc * s + n as f64 * p)
    }

    /// Noiseless attenuation of the diagonal, `p_n -> T^n p_n / norm`.
    pub fn noiseless_attenuation(&self, transmittance: f64) -> Result<Self> {
        let t = check_unit("transmittance", transmittance)?;
        let weights: Vec<f64> = self
            .probs
            .iter()
            .enumerate()
            .map(|(n, p)| p * pow_usize(t, n))
            .collect();
        if weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::ImpossibleCondition);
        }
        Ok(Self::normalized(weights, self.tail_mass))
    }
}

/// Pure-state amplitudes `c_n` in the number basis.
#[derive(Debug, Clone, PartialEq)]
pub struct PureAmplitudes {
    amps: Vec<Complex64>,
}

impl PureAmplitudes {
    /// Normalized amplitudes; the squared magnitudes must already sum to one
    /// within 1e-9.
    pub fn new(amps: Vec<Complex64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::InvalidDistribution("empty amplitude vector".into()));
        }
        let norm: f64 = amps.iter().map(|c| c.norm_sqr()).sum();
        if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "squared amplitudes sum to {norm}"
            )));
        }
        let scale = norm.sqrt().recip();
        Ok(Self {
            amps: amps.into_iter().map(|c| c * scale).collect(),
        })
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn cutoff(&self) -> usize {
        self.amps.len() - 1
    }

    /// Number-basis populations `|c_n|^2`.
    pub fn populations(&self) -> PhotonDistribution {
        PhotonDistribution::normalized(self.amps.iter().map(|c| c.norm_sqr()).collect(), 0.0)
    }

    /// Applies `|n> -> t^n |n>` with `t = sqrt(T)` and renormalizes.
    /// Relative phases are untouched.
    pub fn attenuate(&self, transmittance: f64) -> Result<Self> {
        let t = check_unit("transmittance", transmittance)?.sqrt();
        let scaled: Vec<Complex64> = self
            .amps
            .iter()
            .enumerate()
            .map(|(n, c)| c * pow_usize(t, n))
            .collect();
        let norm: f64 = scaled.iter().map(|c| c.norm_sqr()).sum();
        if norm <= 0.0 {
            return Err(Error::ImpossibleCondition);
        }
        let scale = norm.sqrt().recip();
        Ok(Self {
            amps: scaled.into_iter().map(|c| c * scale).collect(),
        })
    }
}

/// Serializable description of an input state at the source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    Coherent {
        mean: f64,
        #[serde(default)]
        cutoff: Option<usize>,
    },
    Smsv {
        pair_prob: f64,
        #[serde(default)]
        cutoff: Option<usize>,
    },
    Thermal {
        mean: f64,
        #[serde(default)]
        cutoff: Option<usize>,
    },
    Fock {
        n: usize,
        #[serde(default)]
        cutoff: Option<usize>,
    },
    Heralded {
        beta: f64,
    },
}

impl StateSpec {
    /// Short label used in table column names.
    pub fn label(&self) -> &'static str {
        match self {
            StateSpec::Coherent { .. } => "coherent",
            StateSpec::Smsv { .. } => "smsv",
            StateSpec::Thermal { .. } => "thermal",
            StateSpec::Fock { .. } => "fock",
            StateSpec::Heralded { .. } => "heralded",
        }
    }

    /// Builds the distribution. A missing cutoff is chosen so the truncated
    /// tail stays below [`MAX_TAIL_MASS`].
    pub fn distribution(&self) -> Result<PhotonDistribution> {
        match *self {
            StateSpec::Coherent { mean, cutoff } => {
                PhotonDistribution::coherent(mean, cutoff.unwrap_or_else(|| auto_cutoff(mean, 0.0)))
            }
            StateSpec::Smsv { pair_prob, cutoff } => {
                PhotonDistribution::smsv(pair_prob, cutoff.unwrap_or(2))
            }
            StateSpec::Thermal { mean, cutoff } => PhotonDistribution::thermal(
                mean,
                cutoff.unwrap_or_else(|| auto_cutoff(mean, mean * mean)),
            ),
            StateSpec::Fock { n, cutoff } => PhotonDistribution::fock(n, cutoff.unwrap_or(n)),
            StateSpec::Heralded { beta } => PhotonDistribution::heralded_single(beta),
        }
    }
}

/// Cutoff heuristic: mean plus a generous multiple of the spread, with a
/// floor that covers the far tail of small-mean distributions.
fn auto_cutoff(mean: f64, extra_variance: f64) -> usize {
    if !(mean.is_finite() && mean >= 0.0) {
        return 0;
    }
    let sd = (mean + extra_variance).sqrt();
    let thermal_tail = if extra_variance > 0.0 {
        // (mu/(1+mu))^(c+1) < 1e-12
        (12.0 * std::f64::consts::LN_10 / (1.0 + 1.0 / mean).ln()).ceil()
    } else {
        0.0
    };
    (mean + 12.0 * sd + 30.0).max(thermal_tail).ceil() as usize
}
