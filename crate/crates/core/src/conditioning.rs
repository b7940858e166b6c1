//! Exact heralded outputs for zero- and single-photon subtraction, and the
//! relative-attenuation ratio `K(R) = <n>_out / ((1 - R) <n>_in)`.

use serde::{Deserialize, Serialize};

use crate::channels::{beamsplitter_joint, loss_channel, Reflectance};
use crate::detectors::DetectorModel;
use crate::error::{check_unit, Error, Result};
use crate::math::pow_usize;
use crate::states::{PhotonDistribution, StateSpec};

/// Channel transmittances of the setup.
///
/// `kappa_pdc` is the pair-source fiber coupling and `kappa_f` the connector
/// transmission in front of the variable beamsplitter; `eta1`/`eta2` are
/// the effective efficiencies of the heralding (reflected) and counting
/// (transmitted) channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossBudget {
    pub kappa_pdc: f64,
    pub kappa_f: f64,
    pub eta1: f64,
    pub eta2: f64,
}

impl LossBudget {
    pub fn new(kappa_pdc: f64, kappa_f: f64, eta1: f64, eta2: f64) -> Result<Self> {
        let b = Self {
            kappa_pdc,
            kappa_f,
            eta1,
            eta2,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn lossless() -> Self {
        Self {
            kappa_pdc: 1.0,
            kappa_f: 1.0,
            eta1: 1.0,
            eta2: 1.0,
        }
    }

    /// Values characterised for the reference setup: `kappa_pdc = 0.50`,
    /// `kappa_f = 0.86`, `eta1 = 0.32`, `eta2 = 0.28`.
    pub fn reference_setup() -> Self {
        Self {
            kappa_pdc: 0.50,
            kappa_f: 0.86,
            eta1: 0.32,
            eta2: 0.28,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_unit("kappa_pdc", self.kappa_pdc)?;
        check_unit("kappa_f", self.kappa_f)?;
        check_unit("eta1", self.eta1)?;
        check_unit("eta2", self.eta2)?;
        Ok(())
    }

    /// Transmittance between the source and the beamsplitter input.
    ///
    /// Only the squeezed-vacuum source sees the pair-coupling loss; for the
    /// heralded single photon it is already folded into `beta`, and the
    /// other states are injected directly into fiber.
    pub fn input_transmittance(&self, state: &StateSpec) -> f64 {
        match state {
            StateSpec::Smsv { .. } => self.kappa_pdc * self.kappa_f,
            _ => self.kappa_f,
        }
    }
}

/// Transmitted-mode state after a heralding outcome at the reflected port.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionedOutput {
    pub dist: PhotonDistribution,
    /// Probability of the heralding outcome.
    pub herald_prob: f64,
    pub mean_out: f64,
    /// Relative attenuation; `None` when the input mean is zero or the
    /// ratio has no finite limit.
    pub k: Option<f64>,
}

/// Zero-photon subtraction: conditions the transmitted port on a no-click
/// of `herald` at the reflected port.
///
/// Dark clicks scale the herald probability but cancel in the conditional
/// state. `K` is evaluated through the generating function at
/// `w = 1 - R eta`, `K = G'(w) / (G(w) <n>_in)`, which stays finite at `R = 1`.
pub fn zps_condition(
    dist: &PhotonDistribution,
    r: Reflectance,
    herald: &DetectorModel,
) -> Result<ConditionedOutput> {
    herald.validate()?;
    let joint = beamsplitter_joint(dist, r);
    let weights = joint.transmitted_given(|k| herald.photon_no_click(k));
    let photon_no_click: f64 = weights.iter().sum();
    let herald_prob = (1.0 - herald.dark_prob) * photon_no_click;
    if !(photon_no_click > 0.0 && herald_prob > 0.0) {
        return Err(Error::ImpossibleCondition);
    }
    let out = PhotonDistribution::normalized(weights, dist.tail_mass());
    let mean_in = dist.mean();
    let k = if mean_in > 0.0 {
        let w = 1.0 - r.value() * herald.efficiency;
        let g = dist.generating(w);
        (g > 0.0).then(|| dist.generating_derivative(w) / (g * mean_in))
    } else {
        None
    };
    Ok(ConditionedOutput {
        mean_out: out.mean(),
        dist: out,
        herald_prob,
        k,
    })
}

/// Single-photon subtraction: conditions on exactly one count
/// (`exact_one`, number-resolving idealization) or on any click.
pub fn sps_condition(
    dist: &PhotonDistribution,
    r: Reflectance,
    herald: &DetectorModel,
    exact_one: bool,
) -> Result<ConditionedOutput> {
    herald.validate()?;
    let joint = beamsplitter_joint(dist, r);
    let weights = if exact_one {
        joint.transmitted_given(|k| herald.exactly_one_given(k))
    } else {
        joint.transmitted_given(|k| herald.click_given(k))
    };
    let herald_prob: f64 = weights.iter().sum();
    if !(herald_prob > 0.0) {
        return Err(Error::ImpossibleCondition);
    }
    let out = PhotonDistribution::normalized(weights, dist.tail_mass());
    let mean_out = out.mean();
    let ordinary = r.transmittance() * dist.mean();
    Ok(ConditionedOutput {
        dist: out,
        herald_prob,
        mean_out,
        k: (ordinary > 0.0).then(|| mean_out / ordinary),
    })
}

/// `K(R)` measured with zero-photon heralding after an input loss.
///
/// The source state passes a loss channel of transmittance
/// `input_transmittance`, then the beamsplitter; the herald detector has
/// efficiency `budget.eta1`. Equals the lossless `K` at the effective
/// reflectance `input_transmittance * R * eta1`.
pub fn relative_attenuation(
    dist_at_source: &PhotonDistribution,
    r: Reflectance,
    budget: &LossBudget,
    input_transmittance: f64,
) -> Result<f64> {
    budget.validate()?;
    let at_vbs = loss_channel(dist_at_source, input_transmittance)?;
    if !(at_vbs.mean() > 0.0) {
        return Err(Error::ZeroMean);
    }
    let herald = DetectorModel::with_efficiency(budget.eta1)?;
    zps_condition(&at_vbs, r, &herald)?.k.ok_or(Error::ZeroMean)
}

/// State families with a closed-form `K(R)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosedFormKind {
    Coherent,
    Smsv,
    HeraldedSingle,
}

impl ClosedFormKind {
    pub fn of(state: &StateSpec) -> Option<Self> {
        match state {
            StateSpec::Coherent { .. } => Some(Self::Coherent),
            StateSpec::Smsv { .. } => Some(Self::Smsv),
            StateSpec::Heralded { .. } => Some(Self::HeraldedSingle),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormParams {
    pub beta: f64,
    pub kappa_pdc: f64,
    pub kappa_f: f64,
    pub eta1: f64,
}

impl ClosedFormParams {
    pub fn from_budget(budget: &LossBudget, beta: f64) -> Self {
        Self {
            beta,
            kappa_pdc: budget.kappa_pdc,
            kappa_f: budget.kappa_f,
            eta1: budget.eta1,
        }
    }
}

/// Lossy closed forms: `1`, `1 - kappa_pdc kappa_f R eta1`, and
/// `1 / (1 - beta kappa_f R eta1)`. The squeezed-vacuum form is first order
/// in the pair probability.
pub fn k_closed_form(kind: ClosedFormKind, r: f64, params: &ClosedFormParams) -> Result<f64> {
    check_unit("reflectance", r)?;
    check_unit("beta", params.beta)?;
    check_unit("kappa_pdc", params.kappa_pdc)?;
    check_unit("kappa_f", params.kappa_f)?;
    check_unit("eta1", params.eta1)?;
    match kind {
        ClosedFormKind::Coherent => Ok(1.0),
        ClosedFormKind::Smsv => Ok(1.0 - params.kappa_pdc * params.kappa_f * r * params.eta1),
        ClosedFormKind::HeraldedSingle => {
            let denom = 1.0 - params.beta * params.kappa_f * r * params.eta1;
            if denom > 0.0 {
                Ok(1.0 / denom)
            } else {
                Err(Error::Degenerate(format!(
                    "heralded-single denominator {denom} is not positive"
                )))
            }
        }
    }
}

/// `K` as estimated from click rates of a non-number-resolving detector at
/// the transmitted port.
///
/// With `x = kappa R eta1`, `y = kappa (1-R) eta2`, this is
/// `sum p_n [(1-x)^n - (1-x-y)^n] / (G(1-x) [1 - G(1-y)])`. Both
/// differences are factored as `y * h_n(a, b)` with
/// `h_n(a, b) = sum_j a^(n-1-j) b^j` so small `eta2` loses no precision.
pub fn k_click(dist: &PhotonDistribution, r: f64, kappa: f64, eta1: f64, eta2: f64) -> Result<f64> {
    check_unit("reflectance", r)?;
    check_unit("kappa", kappa)?;
    check_unit("eta1", eta1)?;
    check_unit("eta2", eta2)?;
    let x = kappa * r * eta1;
    let y = kappa * (1.0 - r) * eta2;
    if y <= 0.0 {
        return Err(Error::Degenerate(
            "no photons can reach the output detector".into(),
        ));
    }
    let no_click_1 = dist.generating(1.0 - x);
    let joint = weighted_difference_sum(dist, 1.0 - x, 1.0 - x - y);
    let output_click = weighted_difference_sum(dist, 1.0, 1.0 - y);
    if !(no_click_1 > 0.0) {
        return Err(Error::Degenerate("herald never reports no-click".into()));
    }
    if !(output_click > 0.0) {
        return Err(Error::Degenerate("output detector never clicks".into()));
    }
    Ok(joint / (no_click_1 * output_click))
}

/// `sum_n p_n h_n(a, b)` where `h_n(a, b) (a - b) = a^n - b^n`.
fn weighted_difference_sum(dist: &PhotonDistribution, a: f64, b: f64) -> f64 {
    let mut h = 0.0;
    let mut b_pow = 1.0;
    let mut total = 0.0;
    for &p in dist.probs().iter().skip(1) {
        h = a * h + b_pow;
        b_pow *= b;
        total += p * h;
    }
    total
}

/// `dK/dR` at `R = 0` for lossless heralding: `-Q` of the input.
pub fn initial_slope(dist: &PhotonDistribution) -> Result<f64> {
    let m = dist.moments();
    if !(m.mean_n > 0.0) {
        return Err(Error::ZeroMean);
    }
    Ok(-m.mandel_q)
}

/// Forward-difference slope `(K(h) - K(0)) / h` of the lossless `K(R)`,
/// computed through the full conditioning path.
pub fn finite_difference_slope(dist: &PhotonDistribution, h: f64) -> Result<f64> {
    let lossless = LossBudget::lossless();
    let k0 = relative_attenuation(dist, Reflectance::new(0.0)?, &lossless, 1.0)?;
    let kh = relative_attenuation(dist, Reflectance::new(h)?, &lossless, 1.0)?;
    Ok((kh - k0) / h)
}

/// Probability that an unconditioned transmitted-port detector clicks,
/// including input loss.
pub fn output_click_probability(
    dist_at_source: &PhotonDistribution,
    r: f64,
    kappa: f64,
    eta2: f64,
) -> f64 {
    let y = kappa * (1.0 - r) * eta2;
    1.0 - dist_at_source
        .probs()
        .iter()
        .enumerate()
        .map(|(n, p)| p * pow_usize(1.0 - y, n))
        .sum::<f64>()
}
