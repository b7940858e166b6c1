//! Pulse-by-pulse reconstruction of the counting experiment and the
//! post-selection estimator of `K`.
//!
//! Every pulse draws a photon number from the source distribution; each
//! photon survives the input loss, is routed by the beamsplitter, and is
//! detected with the channel efficiency. Independent dark clicks are OR-ed
//! into each detector. The run is split into shards, each driven by its own
//! ChaCha stream keyed by `(seed, shard)`, so results depend only on the
//! configuration and never on thread scheduling.

use std::io::{BufRead, BufWriter, Read, Write};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channels::Reflectance;
use crate::conditioning::{k_click, relative_attenuation, LossBudget};
use crate::detectors::per_pulse_dark_prob;
use crate::error::{Error, Result};
use crate::states::{PhotonDistribution, StateSpec};

pub const DEFAULT_REP_RATE_HZ: f64 = 1e8;

/// `|z|` above which a Monte Carlo estimate disagrees with its oracle.
pub const Z_TOLERANCE: f64 = 4.0;

const D1_BIT: u8 = 0b01;
const D2_BIT: u8 = 0b10;
const BINARY_MAGIC: &[u8; 8] = b"ZPSTAGS1";
pub const CSV_HEADER: &str = "pulse_index,click_d1,click_d2";

fn default_rep_rate() -> f64 {
    DEFAULT_REP_RATE_HZ
}

fn default_shards() -> u32 {
    8
}

/// One simulated experiment: source state, beamsplitter setting, losses,
/// detector darks, and run size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub state: StateSpec,
    pub reflectance: Reflectance,
    pub budget: LossBudget,
    #[serde(default)]
    pub dark1_hz: f64,
    #[serde(default)]
    pub dark2_hz: f64,
    #[serde(default = "default_rep_rate")]
    pub rep_rate_hz: f64,
    pub n_pulses: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_shards")]
    pub shards: u32,
}

impl ExperimentConfig {
    /// Noiseless run of `n_pulses` with the given state and reflectance.
    pub fn new(
        state: StateSpec,
        reflectance: f64,
        budget: LossBudget,
        n_pulses: u64,
    ) -> Result<Self> {
        let cfg = Self {
            state,
            reflectance: Reflectance::new(reflectance)?,
            budget,
            dark1_hz: 0.0,
            dark2_hz: 0.0,
            rep_rate_hz: DEFAULT_REP_RATE_HZ,
            n_pulses,
            seed: 0,
            shards: default_shards(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_pulses == 0 {
            return Err(Error::InvalidConfig("n_pulses must be at least 1".into()));
        }
        if self.shards == 0 {
            return Err(Error::InvalidConfig("shards must be at least 1".into()));
        }
        Reflectance::new(self.reflectance.value())?;
        self.budget.validate()?;
        self.dark1_prob()?;
        self.dark2_prob()?;
        self.state.distribution()?;
        Ok(())
    }

    pub fn dark1_prob(&self) -> Result<f64> {
        per_pulse_dark_prob(self.dark1_hz, self.rep_rate_hz)
    }

    pub fn dark2_prob(&self) -> Result<f64> {
        per_pulse_dark_prob(self.dark2_hz, self.rep_rate_hz)
    }

    pub fn source_distribution(&self) -> Result<PhotonDistribution> {
        self.state.distribution()
    }

    /// Transmittance from the source to the beamsplitter input.
    pub fn input_transmittance(&self) -> f64 {
        self.budget.input_transmittance(&self.state)
    }

    /// Analytic `K` with a number-resolving output detector.
    pub fn analytic_k(&self) -> Result<f64> {
        relative_attenuation(
            &self.source_distribution()?,
            self.reflectance,
            &self.budget,
            self.input_transmittance(),
        )
    }

    /// Exact expectation of the click-rate estimator.
    pub fn k_click_oracle(&self) -> Result<f64> {
        k_click(
            &self.source_distribution()?,
            self.reflectance.value(),
            self.input_transmittance(),
            self.budget.eta1,
            self.budget.eta2,
        )
    }

    /// SHA-256 over the canonical JSON encoding of the config.
    pub fn config_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// Run provenance attached to a tag stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunMetadata {
    pub artifact_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub shards: u32,
    pub n_pulses: u64,
}

impl RunMetadata {
    fn for_config(cfg: &ExperimentConfig) -> Self {
        Self {
            artifact_version: crate::ARTIFACT_VERSION.to_string(),
            config_hash: cfg.config_hash(),
            seed: cfg.seed,
            shards: cfg.shards,
            n_pulses: cfg.n_pulses,
        }
    }
}

/// Detection record for one pulse of the reference clock.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TagRecord {
    pub pulse_index: u64,
    pub click_d1: bool,
    pub click_d2: bool,
}

/// Per-pulse click flags for a whole run. The pulse index is the position
/// in the stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagStream {
    flags: Vec<u8>,
    meta: Option<RunMetadata>,
}

/// Sufficient statistics of a tag stream for the estimator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TagCounts {
    pub n_pulses: u64,
    pub d1_clicks: u64,
    pub d2_clicks: u64,
    /// Pulses with no click at D1.
    pub d1_no_click: u64,
    /// D2 clicks among pulses with no click at D1.
    pub d2_postselected: u64,
}

impl TagCounts {
    #[inline]
    fn push(&mut self, flags: u8) {
        let d1 = flags & D1_BIT != 0;
        let d2 = flags & D2_BIT != 0;
        self.n_pulses += 1;
        self.d1_clicks += d1 as u64;
        self.d2_clicks += d2 as u64;
        if !d1 {
            self.d1_no_click += 1;
            self.d2_postselected += d2 as u64;
        }
    }

    pub fn merge(self, other: Self) -> Self {
        Self {
            n_pulses: self.n_pulses + other.n_pulses,
            d1_clicks: self.d1_clicks + other.d1_clicks,
            d2_clicks: self.d2_clicks + other.d2_clicks,
            d1_no_click: self.d1_no_click + other.d1_no_click,
            d2_postselected: self.d2_postselected + other.d2_postselected,
        }
    }
}

impl TagStream {
    pub fn from_records(records: impl IntoIterator<Item = (bool, bool)>) -> Self {
        Self {
            flags: records
                .into_iter()
                .map(|(d1, d2)| (d1 as u8 * D1_BIT) | (d2 as u8 * D2_BIT))
                .collect(),
            meta: None,
        }
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn metadata(&self) -> Option<&RunMetadata> {
        self.meta.as_ref()
    }

    pub fn get(&self, pulse_index: usize) -> Option<TagRecord> {
        self.flags.get(pulse_index).map(|&f| record(pulse_index, f))
    }

    pub fn records(&self) -> impl Iterator<Item = TagRecord> + '_ {
        self.flags.iter().enumerate().map(|(i, &f)| record(i, f))
    }

    pub fn counts(&self) -> TagCounts {
        let mut c = TagCounts::default();
        for &f in &self.flags {
            c.push(f);
        }
        c
    }

    /// CSV with a `pulse_index,click_d1,click_d2` header and 0/1 flags.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = BufWriter::new(out);
        writeln!(w, "{CSV_HEADER}")?;
        for r in self.records() {
            writeln!(
                w,
                "{},{},{}",
                r.pulse_index, r.click_d1 as u8, r.click_d2 as u8
            )?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().transpose()?;
        if header.as_deref().map(str::trim) != Some(CSV_HEADER) {
            return Err(Error::MalformedTags("missing CSV header".into()));
        }
        let mut flags = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            let bad = || Error::MalformedTags(format!("line {}: {line:?}", i + 2));
            if fields.len() != 3 {
                return Err(bad());
            }
            let index: u64 = fields[0].trim().parse().map_err(|_| bad())?;
            if index != flags.len() as u64 {
                return Err(Error::MalformedTags(format!(
                    "pulse index {index} out of sequence at line {}",
                    i + 2
                )));
            }
            let flag = |s: &str| match s.trim() {
                "0" => Ok(false),
                "1" => Ok(true),
                _ => Err(bad()),
            };
            let (d1, d2) = (flag(fields[1])?, flag(fields[2])?);
            flags.push((d1 as u8 * D1_BIT) | (d2 as u8 * D2_BIT));
        }
        Ok(Self { flags, meta: None })
    }

    /// Compact binary form: 8-byte magic, little-endian `u64` pulse count,
    /// then one flag byte per pulse (bit 0 = D1, bit 1 = D2).
    pub fn write_binary<W: Write>(&self, out: W) -> Result<()> {
        let mut w = BufWriter::new(out);
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&(self.flags.len() as u64).to_le_bytes())?;
        w.write_all(&self.flags)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(Error::MalformedTags("bad magic".into()));
        }
        let mut len = [0u8; 8];
        input.read_exact(&mut len)?;
        let len = u64::from_le_bytes(len) as usize;
        let mut flags = Vec::with_capacity(len);
        input.read_to_end(&mut flags)?;
        if flags.len() != len {
            return Err(Error::MalformedTags(format!(
                "expected {len} records, found {}",
                flags.len()
            )));
        }
        if flags.iter().any(|f| f & !(D1_BIT | D2_BIT) != 0) {
            return Err(Error::MalformedTags("unknown flag bits".into()));
        }
        Ok(Self { flags, meta: None })
    }
}

fn record(i: usize, f: u8) -> TagRecord {
    TagRecord {
        pulse_index: i as u64,
        click_d1: f & D1_BIT != 0,
        click_d2: f & D2_BIT != 0,
    }
}

/// Everything a shard needs to generate pulses.
struct PulseModel {
    cdf: Vec<f64>,
    kappa: f64,
    r: f64,
    eta1: f64,
    eta2: f64,
    dark1: f64,
    dark2: f64,
}

impl PulseModel {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let dist = cfg.source_distribution()?;
        let mut acc = 0.0;
        let cdf = dist
            .probs()
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(Self {
            cdf,
            kappa: cfg.input_transmittance(),
            r: cfg.reflectance.value(),
            eta1: cfg.budget.eta1,
            eta2: cfg.budget.eta2,
            dark1: cfg.dark1_prob()?,
            dark2: cfg.dark2_prob()?,
        })
    }

    #[inline]
    fn photon_number<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cdf
            .partition_point(|&c| c <= u)
            .min(self.cdf.len() - 1)
    }

    #[inline]
    fn pulse<R: Rng>(&self, rng: &mut R) -> u8 {
        let n = self.photon_number(rng);
        let (mut d1, mut d2) = (false, false);
        for _ in 0..n {
            if rng.random::<f64>() >= self.kappa {
                continue;
            }
            if rng.random::<f64>() < self.r {
                d1 |= rng.random::<f64>() < self.eta1;
            } else {
                d2 |= rng.random::<f64>() < self.eta2;
            }
        }
        if self.dark1 > 0.0 {
            d1 |= rng.random::<f64>() < self.dark1;
        }
        if self.dark2 > 0.0 {
            d2 |= rng.random::<f64>() < self.dark2;
        }
        (d1 as u8 * D1_BIT) | (d2 as u8 * D2_BIT)
    }
}

/// Pulse-index range `[start, end)` of each shard.
fn shard_ranges(n_pulses: u64, shards: u32) -> Vec<(u64, u64)> {
    let s = shards as u64;
    let base = n_pulses / s;
    let extra = n_pulses % s;
    let mut start = 0;
    (0..s)
        .map(|i| {
            let len = base + u64::from(i < extra);
            let r = (start, start + len);
            start += len;
            r
        })
        .collect()
}

fn shard_rng(seed: u64, shard: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::from(shard));
    rng
}

fn run_shards<T: Send>(
    cfg: &ExperimentConfig,
    shard_fn: impl Fn(&PulseModel, &mut ChaCha8Rng, u64) -> T + Sync,
) -> Result<Vec<T>> {
    cfg.validate()?;
    let model = PulseModel::new(cfg)?;
    let ranges = shard_ranges(cfg.n_pulses, cfg.shards);
    Ok(ranges
        .par_iter()
        .enumerate()
        .map(|(shard, &(start, end))| {
            let mut rng = shard_rng(cfg.seed, shard as u32);
            shard_fn(&model, &mut rng, end - start)
        })
        .collect())
}

/// Simulates every pulse and keeps the full tag stream.
pub fn simulate(cfg: &ExperimentConfig) -> Result<TagStream> {
    let parts = run_shards(cfg, |model, rng, len| {
        (0..len).map(|_| model.pulse(rng)).collect::<Vec<u8>>()
    })?;
    let mut flags = Vec::with_capacity(cfg.n_pulses as usize);
    for p in parts {
        flags.extend_from_slice(&p);
    }
    Ok(TagStream {
        flags,
        meta: Some(RunMetadata::for_config(cfg)),
    })
}

/// Same pulses as [`simulate`], folded straight into counts without
/// storing the stream.
pub fn simulate_counts(cfg: &ExperimentConfig) -> Result<TagCounts> {
    let parts = run_shards(cfg, |model, rng, len| {
        let mut c = TagCounts::default();
        for _ in 0..len {
            c.push(model.pulse(rng));
        }
        c
    })?;
    Ok(parts
        .into_iter()
        .fold(TagCounts::default(), TagCounts::merge))
}

/// Post-selection estimate of `K` with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KEstimate {
    pub k_hat: f64,
    pub std_err: f64,
    pub rate_d2_all: f64,
    pub rate_d2_postselected: f64,
    pub n_noclick_pulses: u64,
}

/// Ratio of dark-corrected D2 click rates with and without post-selection
/// on no-click at D1.
pub fn estimate_k(tags: &TagStream, dark2_prob: f64) -> Result<KEstimate> {
    estimate_from_counts(&tags.counts(), dark2_prob)
}

/// Estimator on pre-aggregated counts.
///
/// The error bar combines the binomial errors of the two rates in
/// quadrature as if they were independent.
pub fn estimate_from_counts(c: &TagCounts, dark2_prob: f64) -> Result<KEstimate> {
    if c.d1_no_click == 0 {
        return Err(Error::NoHeraldEvents);
    }
    if c.d2_clicks == 0 {
        return Err(Error::Degenerate("no clicks at D2".into()));
    }
    let n_all = c.n_pulses as f64;
    let n_ps = c.d1_no_click as f64;
    let rate_all = c.d2_clicks as f64 / n_all;
    let rate_ps = c.d2_postselected as f64 / n_ps;
    let den = rate_all - dark2_prob;
    let num = rate_ps - dark2_prob;
    if den <= 0.0 {
        return Err(Error::NegativeCorrectedRate {
            rate: rate_all,
            dark: dark2_prob,
        });
    }
    if num < 0.0 {
        return Err(Error::NegativeCorrectedRate {
            rate: rate_ps,
            dark: dark2_prob,
        });
    }
    let se_all = (rate_all * (1.0 - rate_all) / n_all).sqrt();
    let se_ps = (rate_ps * (1.0 - rate_ps) / n_ps).sqrt();
    let k_hat = num / den;
    let std_err = ((se_ps / den).powi(2) + (num * se_all / (den * den)).powi(2)).sqrt();
    Ok(KEstimate {
        k_hat,
        std_err,
        rate_d2_all: rate_all,
        rate_d2_postselected: rate_ps,
        n_noclick_pulses: c.d1_no_click,
    })
}

/// Monte Carlo estimate compared with the click-rate oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossValidation {
    pub estimate: KEstimate,
    pub k_click: f64,
    pub k_analytic: f64,
    pub z: f64,
    pub passed: bool,
}

/// Runs the simulation for `cfg` and compares with the oracle for the same
/// config.
pub fn mc_vs_analytic(cfg: &ExperimentConfig) -> Result<CrossValidation> {
    mc_vs_oracle(cfg, cfg)
}

/// Simulates `sim` but takes the oracle from `oracle`; with mismatched
/// configs this is a negative control.
pub fn mc_vs_oracle(sim: &ExperimentConfig, oracle: &ExperimentConfig) -> Result<CrossValidation> {
    let counts = simulate_counts(sim)?;
    let estimate = estimate_from_counts(&counts, sim.dark2_prob()?)?;
    let k_click = oracle.k_click_oracle()?;
    let k_analytic = oracle.analytic_k()?;
    let diff = estimate.k_hat - k_click;
    let z = if estimate.std_err > 0.0 {
        diff / estimate.std_err
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY.copysign(diff)
    };
    Ok(CrossValidation {
        estimate,
        k_click,
        k_analytic,
        z,
        passed: z.abs() <= Z_TOLERANCE,
    })
}

/// The five reference configurations used for cross-validation, each with
/// `n_pulses` pulses.
pub fn canonical_configs(n_pulses: u64) -> Vec<(&'static str, ExperimentConfig)> {
    let reference = LossBudget::reference_setup();
    let base =
        |state: StateSpec, r: f64, budget: LossBudget, dark: f64, seed: u64| ExperimentConfig {
            state,
            reflectance: Reflectance::new(r).expect("valid reflectance"),
            budget,
            dark1_hz: dark,
            dark2_hz: dark,
            rep_rate_hz: DEFAULT_REP_RATE_HZ,
            n_pulses,
            seed,
            shards: 8,
        };
    vec![
        (
            "coherent",
            base(
                StateSpec::Coherent {
                    mean: 1.0,
                    cutoff: None,
                },
                0.5,
                reference,
                80.0,
                11,
            ),
        ),
        (
            "smsv-lossy",
            base(
                StateSpec::Smsv {
                    pair_prob: 1e-4,
                    cutoff: None,
                },
                0.5,
                reference,
                80.0,
                12,
            ),
        ),
        (
            "heralded-lossy",
            base(StateSpec::Heralded { beta: 0.38 }, 0.7, reference, 80.0, 13),
        ),
        (
            "thermal",
            base(
                StateSpec::Thermal {
                    mean: 0.5,
                    cutoff: None,
                },
                0.3,
                LossBudget::new(1.0, 1.0, 0.9, 0.5).expect("valid budget"),
                100.0,
                14,
            ),
        ),
        (
            "fock2",
            base(
                StateSpec::Fock { n: 2, cutoff: None },
                0.5,
                LossBudget::new(1.0, 1.0, 0.6, 0.6).expect("valid budget"),
                100.0,
                15,
            ),
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(state: StateSpec, r: f64, budget: LossBudget, n: u64) -> ExperimentConfig {
        ExperimentConfig::new(state, r, budget, n).unwrap()
    }

    #[test]
    fn vacuum_never_clicks() {
        let c = cfg(
            StateSpec::Heralded { beta: 0.0 },
            0.5,
            LossBudget::lossless(),
            10_000,
        );
        let tags = simulate(&c).unwrap();
        assert_eq!(tags.len(), 10_000);
        assert!(tags.records().all(|r| !r.click_d1 && !r.click_d2));
        assert!(matches!(estimate_k(&tags, 0.0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn single_photon_clicks_exactly_once() {
        let c = cfg(
            StateSpec::Fock { n: 1, cutoff: None },
            0.3,
            LossBudget::lossless(),
            200_000,
        );
        let tags = simulate(&c).unwrap();
        assert!(tags.records().all(|r| r.click_d1 != r.click_d2));
        let counts = tags.counts();
        let frac = counts.d1_clicks as f64 / counts.n_pulses as f64;
        let sigma = (0.3 * 0.7 / counts.n_pulses as f64).sqrt();
        assert!((frac - 0.3).abs() < 3.0 * sigma, "frac {frac}");
    }

    #[test]
    fn shard_ranges_cover_everything() {
        let r = shard_ranges(10, 3);
        assert_eq!(r, vec![(0, 4), (4, 7), (7, 10)]);
        assert_eq!(shard_ranges(2, 4).last(), Some(&(2, 2)));
    }

    #[test]
    fn pulse_indices_strictly_increase() {
        let c = cfg(
            StateSpec::Coherent {
                mean: 0.5,
                cutoff: None,
            },
            0.5,
            LossBudget::lossless(),
            1000,
        );
        let tags = simulate(&c).unwrap();
        let idx: Vec<u64> = tags.records().map(|r| r.pulse_index).collect();
        assert!(idx.windows(2).all(|w| w[1] == w[0] + 1));
        assert_eq!(tags.metadata().unwrap().n_pulses, 1000);
    }

    #[test]
    fn counts_match_stream() {
        let c = cfg(
            StateSpec::Thermal {
                mean: 0.8,
                cutoff: None,
            },
            0.4,
            LossBudget::reference_setup(),
            50_000,
        );
        assert_eq!(simulate(&c).unwrap().counts(), simulate_counts(&c).unwrap());
    }

    #[test]
    fn estimator_arithmetic() {
        let counts = TagCounts {
            n_pulses: 1000,
            d1_clicks: 200,
            d2_clicks: 100,
            d1_no_click: 800,
            d2_postselected: 60,
        };
        let e = estimate_from_counts(&counts, 0.0).unwrap();
        assert!((e.k_hat - 0.075 / 0.1).abs() < 1e-15);
        let se_ps = (0.075f64 * 0.925 / 800.0).sqrt();
        let se_all = (0.1f64 * 0.9 / 1000.0).sqrt();
        let expected = ((se_ps / 0.1).powi(2) + (0.075 * se_all / 0.01).powi(2)).sqrt();
        assert!((e.std_err - expected).abs() < 1e-15);

        assert!(matches!(
            estimate_from_counts(&counts, 0.2),
            Err(Error::NegativeCorrectedRate { .. })
        ));
        let none = TagCounts {
            d1_no_click: 0,
            ..counts
        };
        assert!(matches!(
            estimate_from_counts(&none, 0.0),
            Err(Error::NoHeraldEvents)
        ));
    }

    #[test]
    fn tag_io_round_trip() {
        let tags =
            TagStream::from_records([(false, true), (true, false), (true, true), (false, false)]);
        let mut csv = Vec::new();
        tags.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv.clone()).unwrap();
        assert!(text.starts_with("pulse_index,click_d1,click_d2\n0,0,1\n1,1,0\n"));
        assert_eq!(TagStream::read_csv(&csv[..]).unwrap(), tags);

        let mut bin = Vec::new();
        tags.write_binary(&mut bin).unwrap();
        assert_eq!(bin.len(), 16 + 4);
        assert_eq!(TagStream::read_binary(&bin[..]).unwrap(), tags);
    }

    #[test]
    fn malformed_tags_rejected() {
        assert!(TagStream::read_csv(&b"a,b,c\n"[..]).is_err());
        assert!(TagStream::read_csv(&b"pulse_index,click_d1,click_d2\n1,0,0\n"[..]).is_err());
        assert!(TagStream::read_csv(&b"pulse_index,click_d1,click_d2\n0,2,0\n"[..]).is_err());
        assert!(TagStream::read_binary(&b"NOTMAGIC\0\0\0\0\0\0\0\0"[..]).is_err());
    }

    #[test]
    fn invalid_configs() {
        let mut c = cfg(
            StateSpec::Heralded { beta: 0.5 },
            0.5,
            LossBudget::lossless(),
            10,
        );
        c.n_pulses = 0;
        assert!(c.validate().is_err());
        c.n_pulses = 10;
        c.shards = 0;
        assert!(c.validate().is_err());
        c.shards = 1;
        c.dark2_hz = 2e8;
        assert!(c.validate().is_err());
        assert!(serde_json::from_str::<ExperimentConfig>(
            r#"{"state":{"kind":"heralded","beta":0.5},"reflectance":0.5,
                "budget":{"kappa_pdc":1,"kappa_f":1,"eta1":1,"eta2":1},
                "n_pulses":10,"bogus":1}"#
        )
        .is_err());
    }

    #[test]
    fn config_hash_is_stable_and_sensitive() {
        let c = cfg(
            StateSpec::Heralded { beta: 0.5 },
            0.5,
            LossBudget::lossless(),
            10,
        );
        assert_eq!(c.config_hash(), c.clone().config_hash());
        assert_eq!(c.config_hash().len(), 64);
        let mut d = c.clone();
        d.seed = 1;
        assert_ne!(c.config_hash(), d.config_hash());
    }
}
