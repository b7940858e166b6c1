//! Tabulated `K` curves against reflectance or heralding efficiency.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::channels::{loss_channel, Reflectance};
use crate::conditioning::{
    k_click, k_closed_form, relative_attenuation, zps_condition, ClosedFormKind, ClosedFormParams,
    LossBudget,
};
use crate::detectors::DetectorModel;
use crate::error::{Error, Result};
use crate::montecarlo::{estimate_from_counts, simulate_counts, ExperimentConfig, Z_TOLERANCE};
use crate::states::StateSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    #[serde(rename = "R", alias = "r")]
    Reflectance,
    Eta1,
    Displacement,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engines {
    #[default]
    Analytic,
    Montecarlo,
    Both,
}

impl Engines {
    fn analytic(self) -> bool {
        matches!(self, Engines::Analytic | Engines::Both)
    }

    fn montecarlo(self) -> bool {
        matches!(self, Engines::Montecarlo | Engines::Both)
    }
}

/// What to sweep; the fixed parameters come from the base experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPlan {
    pub variable: SweepVariable,
    pub grid: Vec<f64>,
    #[serde(default)]
    pub engines: Engines,
    /// States for efficiency sweeps; defaults to the base state.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub states: Vec<StateSpec>,
    /// Heralding efficiency at zero displacement; defaults to the base `eta1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta1_max: Option<f64>,
    /// Gaussian mode-overlap waist for displacement sweeps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waist: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: ExperimentConfig,
    pub plan: SweepPlan,
}

impl SweepSpec {
    pub fn new(base: ExperimentConfig, plan: SweepPlan) -> Result<Self> {
        let spec = Self { base, plan };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        let plan = &self.plan;
        if plan.grid.is_empty() {
            return Err(Error::InvalidConfig("sweep grid is empty".into()));
        }
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        match plan.variable {
            SweepVariable::Reflectance | SweepVariable::Eta1 => {
                if let Some(v) = plan.grid.iter().find(|v| !in_unit(**v)) {
                    return Err(Error::InvalidConfig(format!(
                        "grid value {v} outside [0, 1]"
                    )));
                }
            }
            SweepVariable::Displacement => {
                if let Some(v) = plan.grid.iter().find(|v| !v.is_finite()) {
                    return Err(Error::InvalidConfig(format!(
                        "grid value {v} is not finite"
                    )));
                }
                if !(self.waist() > 0.0 && self.waist().is_finite()) {
                    return Err(Error::InvalidConfig("waist must be positive".into()));
                }
            }
        }
        if !in_unit(self.eta1_max()) {
            return Err(Error::InvalidConfig("eta1_max outside [0, 1]".into()));
        }
        for s in &plan.states {
            s.distribution()?;
        }
        Ok(())
    }

    fn eta1_max(&self) -> f64 {
        self.plan.eta1_max.unwrap_or(self.base.budget.eta1)
    }

    fn waist(&self) -> f64 {
        self.plan.waist.unwrap_or(1.0)
    }

    fn states(&self) -> Vec<StateSpec> {
        if self.plan.states.is_empty() {
            vec![self.base.state.clone()]
        } else {
            self.plan.states.clone()
        }
    }
}

/// Heralding efficiency after displacing the collection fiber by `dx`:
/// `eta1_max * exp(-2 dx^2 / w^2)`.
pub fn overlap_efficiency(eta1_max: f64, dx: f64, waist: f64) -> f64 {
    eta1_max * (-2.0 * dx * dx / (waist * waist)).exp()
}

/// Column-labelled numeric table; empty cells are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let i = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// One header line, then one line per row; empty cells stay empty.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.columns.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| c.map(|v| format!("{v}")).unwrap_or_default())
                .collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }

    /// Rows as an array of objects keyed by column name.
    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> = self
                        .columns
                        .iter()
                        .zip(row)
                        .map(|(c, v)| {
                            let v = v
                                .and_then(serde_json::Number::from_f64)
                                .map_or(Value::Null, Value::Number);
                            (c.clone(), v)
                        })
                        .collect();
                    Value::Object(obj)
                })
                .collect(),
        )
    }

    /// Rows where a Monte Carlo column deviates from its click-rate oracle
    /// by more than [`Z_TOLERANCE`] standard errors, as
    /// `(row, column, z)`.
    pub fn mc_disagreements(&self) -> Vec<(usize, String, f64)> {
        let mut out = Vec::new();
        for (ci, name) in self.columns.iter().enumerate() {
            let Some(suffix) = name.strip_prefix("K_mc") else {
                continue;
            };
            if suffix.starts_with("_stderr") {
                continue;
            }
            let (Some(se), Some(oracle)) = (
                self.column_index(&format!("K_mc_stderr{suffix}")),
                self.column_index(&format!("K_click{suffix}")),
            ) else {
                continue;
            };
            for (ri, row) in self.rows.iter().enumerate() {
                if let (Some(k), Some(s), Some(o)) = (row[ci], row[se], row[oracle]) {
                    let z = if s > 0.0 {
                        (k - o) / s
                    } else if k == o {
                        0.0
                    } else {
                        f64::INFINITY
                    };
                    if z.abs() > Z_TOLERANCE {
                        out.push((ri, name.clone(), z));
                    }
                }
            }
        }
        out
    }
}

/// Maps "no such outcome" conditions to an empty cell.
fn cell(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::ImpossibleCondition | Error::Degenerate(_) | Error::ZeroMean) => Ok(None),
        Err(e) => Err(e),
    }
}

fn mc_cell(cfg: &ExperimentConfig) -> Result<(Option<f64>, Option<f64>)> {
    let counts = simulate_counts(cfg)?;
    match estimate_from_counts(&counts, cfg.dark2_prob()?) {
        Ok(e) => Ok((Some(e.k_hat), Some(e.std_err))),
        Err(Error::NoHeraldEvents | Error::Degenerate(_) | Error::NegativeCorrectedRate { .. }) => {
            Ok((None, None))
        }
        Err(e) => Err(e),
    }
}

fn row_seed(seed: u64, row: usize) -> u64 {
    seed.wrapping_add((row as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Analytic `K` (number-resolving output), closed form, click oracle, and
/// Monte Carlo estimate at one configuration.
struct PointEval {
    k_analytic: Option<f64>,
    k_closed: Option<f64>,
    k_click: Option<f64>,
    k_mc: Option<f64>,
    k_mc_err: Option<f64>,
    herald_prob: Option<f64>,
}

fn evaluate_point(cfg: &ExperimentConfig, engines: Engines) -> Result<PointEval> {
    let source = cfg.source_distribution()?;
    let kappa = cfg.input_transmittance();
    let r = cfg.reflectance;
    let mut eval = PointEval {
        k_analytic: None,
        k_closed: None,
        k_click: None,
        k_mc: None,
        k_mc_err: None,
        herald_prob: None,
    };
    if engines.analytic() {
        eval.k_analytic = cell(relative_attenuation(&source, r, &cfg.budget, kappa))?;
        eval.k_closed = match ClosedFormKind::of(&cfg.state) {
            Some(kind) => {
                let beta = match cfg.state {
                    StateSpec::Heralded { beta } => beta,
                    _ => 0.0,
                };
                let params = ClosedFormParams::from_budget(&cfg.budget, beta);
                cell(k_closed_form(kind, r.value(), &params))?
            }
            None => None,
        };
        let at_vbs = loss_channel(&source, kappa)?;
        let herald = DetectorModel::new(cfg.budget.eta1, cfg.dark1_prob()?, false)?;
        eval.herald_prob = cell(zps_condition(&at_vbs, r, &herald).map(|o| o.herald_prob))?;
    }
    eval.k_click = cell(k_click(
        &source,
        r.value(),
        kappa,
        cfg.budget.eta1,
        cfg.budget.eta2,
    ))?;
    if engines.montecarlo() {
        (eval.k_mc, eval.k_mc_err) = mc_cell(cfg)?;
    }
    Ok(eval)
}

/// `K` against reflectance. Columns:
/// `R,K_analytic,K_closed_form,K_click,K_mc,K_mc_stderr,herald_prob`.
pub fn sweep_r(spec: &SweepSpec) -> Result<Table> {
    spec.validate()?;
    let engines = spec.plan.engines;
    let rows = spec
        .plan
        .grid
        .par_iter()
        .enumerate()
        .map(|(i, &r)| {
            let mut cfg = spec.base.clone();
            cfg.reflectance = Reflectance::new(r)?;
            cfg.seed = row_seed(spec.base.seed, i);
            let e = evaluate_point(&cfg, engines)?;
            Ok(vec![
                Some(r),
                e.k_analytic,
                e.k_closed,
                e.k_click,
                e.k_mc,
                e.k_mc_err,
                e.herald_prob,
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Table {
        columns: [
            "R",
            "K_analytic",
            "K_closed_form",
            "K_click",
            "K_mc",
            "K_mc_stderr",
            "herald_prob",
        ]
        .map(String::from)
        .to_vec(),
        rows,
    })
}

/// `K` against heralding efficiency at the base reflectance, one set of
/// columns per state: `[delta_x,]eta1,eta1_normalized,K_<state>,K_click_<state>[,K_mc_<state>,K_mc_stderr_<state>]`.
pub fn sweep_eta(spec: &SweepSpec) -> Result<Table> {
    spec.validate()?;
    let states = spec.states();
    let labels = column_labels(&states);
    let engines = spec.plan.engines;
    let eta1_max = spec.eta1_max();
    let displacement = spec.plan.variable == SweepVariable::Displacement;

    let mut columns = Vec::new();
    if displacement {
        columns.push("delta_x".to_string());
    }
    columns.push("eta1".into());
    columns.push("eta1_normalized".into());
    for l in &labels {
        columns.push(format!("K_{l}"));
        columns.push(format!("K_click_{l}"));
        if engines.montecarlo() {
            columns.push(format!("K_mc_{l}"));
            columns.push(format!("K_mc_stderr_{l}"));
        }
    }

    let rows = spec
        .plan
        .grid
        .par_iter()
        .enumerate()
        .map(|(i, &g)| {
            let eta1 = if displacement {
                overlap_efficiency(eta1_max, g, spec.waist())
            } else {
                g
            };
            let mut row = Vec::with_capacity(columns.len());
            if displacement {
                row.push(Some(g));
            }
            row.push(Some(eta1));
            row.push((eta1_max > 0.0).then(|| eta1 / eta1_max));
            for (si, state) in states.iter().enumerate() {
                let mut cfg = spec.base.clone();
                cfg.state = state.clone();
                cfg.budget = LossBudget {
                    eta1,
                    ..spec.base.budget
                };
                cfg.seed = row_seed(spec.base.seed, i * states.len() + si);
                let e = evaluate_point(&cfg, engines)?;
                row.push(e.k_analytic);
                row.push(e.k_click);
                if engines.montecarlo() {
                    row.push(e.k_mc);
                    row.push(e.k_mc_err);
                }
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Table { columns, rows })
}

fn column_labels(states: &[StateSpec]) -> Vec<String> {
    states
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let dup = states.iter().filter(|o| o.label() == s.label()).count() > 1;
            if dup {
                format!("{}_{i}", s.label())
            } else {
                s.label().to_string()
            }
        })
        .collect()
}

/// Dispatches on the swept variable.
pub fn run_sweep(spec: &SweepSpec) -> Result<Table> {
    match spec.plan.variable {
        SweepVariable::Reflectance => sweep_r(spec),
        SweepVariable::Eta1 | SweepVariable::Displacement => sweep_eta(spec),
    }
}

/// Headline numbers of a reflectance sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepSummary {
    pub k_min: Option<f64>,
    pub k_max: Option<f64>,
    /// Closed form at the last grid point, when the state has one.
    pub k_closed_form_endpoint: Option<f64>,
    /// `dK/dR` at `R = 0` including losses: `-kappa eta1 Q_source`.
    pub slope_at_zero: Option<f64>,
}

pub fn summarize(spec: &SweepSpec, table: &Table) -> Result<SweepSummary> {
    let ks: Vec<f64> = table
        .column("K_analytic")
        .unwrap_or_default()
        .into_iter()
        .flatten()
        .collect();
    let source = spec.base.source_distribution()?;
    let m = source.moments();
    let slope = (m.mean_n > 0.0)
        .then(|| -spec.base.input_transmittance() * spec.base.budget.eta1 * m.mandel_q);
    Ok(SweepSummary {
        k_min: ks.iter().copied().reduce(f64::min),
        k_max: ks.iter().copied().reduce(f64::max),
        k_closed_form_endpoint: table
            .column("K_closed_form")
            .and_then(|c| c.last().copied().flatten()),
        slope_at_zero: slope,
    })
}
