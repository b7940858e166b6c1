use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use zps_core::config::{sidecar_path, OutputFormat, Sidecar};
use zps_core::montecarlo::{
    canonical_configs, estimate_from_counts, simulate_counts, CrossValidation, RunMetadata,
    Z_TOLERANCE,
};
use zps_core::sweeps::{run_sweep, summarize};
use zps_core::{
    estimate_k, simulate, ExperimentConfig, KEstimate, RunConfig, StateSpec, ARTIFACT_VERSION,
};

const RECIPES: &[(&str, &str)] = &[
    ("fig3a", include_str!("../recipes/fig3a.json")),
    ("fig3b", include_str!("../recipes/fig3b.json")),
    ("fig3c", include_str!("../recipes/fig3c.json")),
    ("fig4", include_str!("../recipes/fig4.json")),
];

#[derive(Parser)]
#[command(name = "zps-sim", version, about = "Zero-photon subtraction simulator")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    /// Maximum number of worker threads.
    #[arg(long, env = "ZPS_SIM_THREADS", global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the photon-number distribution and moments of a state.
    State(StateArgs),
    /// Tabulate K against reflectance or heralding efficiency.
    Sweep(SweepArgs),
    /// Simulate a click record and estimate K from it.
    Mc(McArgs),
    /// Cross-check Monte Carlo estimates against the analytic oracle.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Coherent,
    Smsv,
    Thermal,
    Fock,
    Heralded,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

#[derive(Args)]
struct StateArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    /// Mean photon number (coherent, thermal).
    #[arg(long)]
    mean: Option<f64>,
    /// Pair probability per pulse (smsv).
    #[arg(long, default_value_t = 1e-4)]
    pair_prob: f64,
    /// Photon number (fock).
    #[arg(long)]
    n: Option<usize>,
    /// Single-photon probability (heralded).
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    cutoff: Option<usize>,
    /// Number of probabilities to print.
    #[arg(long, default_value_t = 10)]
    head: usize,
    /// Machine-readable output instead of the text report.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    pulses: Option<u64>,
    #[arg(long)]
    shards: Option<u32>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Bundled recipe (fig3a, fig3b, fig3c, fig4).
    #[arg(long, conflicts_with = "config")]
    recipe: Option<String>,
}

#[derive(Args)]
struct McArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Built-in configuration: coherent, smsv-lossy, heralded-lossy, thermal, fock2.
    #[arg(long, conflicts_with = "config", default_value = "coherent")]
    canonical: String,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    run: RunArgs,
}

enum Outcome {
    Passed,
    Failed,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Passed) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<Outcome> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("ZPS_SIM_THREADS must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring thread pool")?;
    }
    match cli.command {
        Command::State(args) => {
            init_logging(cli.verbose);
            cmd_state(args)
        }
        Command::Sweep(args) => cmd_sweep(args, cli.verbose),
        Command::Mc(args) => cmd_mc(args, cli.verbose),
        Command::Validate(args) => cmd_validate(args, cli.verbose),
    }
}

fn init_logging(level: u8) {
    let filter = match level {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(filter))
        .format_timestamp(None)
        .try_init();
}

fn cmd_state(args: StateArgs) -> Result<Outcome> {
    let need = |v: Option<f64>, flag: &str| v.ok_or_else(|| anyhow!("--{flag} is required"));
    let spec = match args.kind {
        Kind::Coherent => StateSpec::Coherent {
            mean: need(args.mean, "mean")?,
            cutoff: args.cutoff,
        },
        Kind::Thermal => StateSpec::Thermal {
            mean: need(args.mean, "mean")?,
            cutoff: args.cutoff,
        },
        Kind::Smsv => StateSpec::Smsv {
            pair_prob: args.pair_prob,
            cutoff: args.cutoff,
        },
        Kind::Fock => StateSpec::Fock {
            n: args.n.ok_or_else(|| anyhow!("--n is required"))?,
            cutoff: args.cutoff,
        },
        Kind::Heralded => StateSpec::Heralded {
            beta: need(args.beta, "beta")?,
        },
    };
    let dist = spec.distribution()?;
    let m = dist.moments();
    let head = &dist.probs()[..dist.probs().len().min(args.head)];
    let mut out = io::stdout().lock();
    match args.format {
        None => {
            writeln!(out, "state: {}", spec.label())?;
            writeln!(out, "cutoff: {}", dist.cutoff())?;
            writeln!(out, "tail mass: {:e}", dist.tail_mass())?;
            writeln!(out, "mean: {:.6}", m.mean_n)?;
            writeln!(out, "variance: {:.6}", m.variance)?;
            writeln!(out, "Mandel Q: {:.6}", m.mandel_q)?;
            writeln!(out, "n  p_n")?;
            for (n, p) in head.iter().enumerate() {
                writeln!(out, "{n}  {p:.6e}")?;
            }
        }
        Some(Format::Csv) => {
            writeln!(out, "n,probability")?;
            for (n, p) in head.iter().enumerate() {
                writeln!(out, "{n},{p:e}")?;
            }
        }
        Some(Format::Json) => {
            let v = json!({
                "state": spec,
                "cutoff": dist.cutoff(),
                "tail_mass": dist.tail_mass(),
                "moments": m,
                "probabilities": head,
            });
            writeln!(out, "{}", serde_json::to_string_pretty(&v)?)?;
        }
    }
    Ok(Outcome::Passed)
}

/// Loads the config (file, recipe or fallback), applies flag overrides and
/// starts logging at the larger of the flag and config verbosity.
fn load_config(
    run: &RunArgs,
    recipe: Option<&str>,
    fallback: impl FnOnce() -> Result<RunConfig>,
    verbose: u8,
) -> Result<RunConfig> {
    let mut cfg = if let Some(path) = &run.config {
        RunConfig::from_path(path).with_context(|| format!("reading {}", path.display()))?
    } else if let Some(name) = recipe {
        let (_, text) = RECIPES.iter().find(|(n, _)| *n == name).ok_or_else(|| {
            let names: Vec<_> = RECIPES.iter().map(|(n, _)| *n).collect();
            anyhow!("unknown recipe {name:?}; available: {}", names.join(", "))
        })?;
        RunConfig::from_json_str(text)?
    } else {
        fallback()?
    };
    if let Some(seed) = run.seed {
        cfg.experiment.seed = seed;
    }
    if let Some(n) = run.pulses {
        cfg.experiment.n_pulses = n;
    }
    if let Some(s) = run.shards {
        cfg.experiment.shards = s;
    }
    if let Some(f) = run.format {
        cfg.format = f.into();
    }
    if let Some(out) = &run.out {
        cfg.output = Some(out.clone());
    }
    cfg.validate()?;
    init_logging(verbose.max(cfg.verbosity));
    log::info!("config hash {}", cfg.experiment.config_hash());
    Ok(cfg)
}

fn metadata(cfg: &ExperimentConfig) -> RunMetadata {
    RunMetadata {
        artifact_version: ARTIFACT_VERSION.to_string(),
        config_hash: cfg.config_hash(),
        seed: cfg.seed,
        shards: cfg.shards,
        n_pulses: cfg.n_pulses,
    }
}

fn write_sidecar(target: &Path, cfg: &RunConfig) -> Result<()> {
    let sidecar = Sidecar {
        metadata: metadata(&cfg.experiment),
        config: cfg.clone(),
    };
    let path = sidecar_path(target);
    std::fs::write(&path, sidecar.to_json_pretty() + "\n")
        .with_context(|| format!("writing {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.6}"))
}

fn cmd_sweep(args: SweepArgs, verbose: u8) -> Result<Outcome> {
    let cfg = load_config(
        &args.run,
        args.recipe.as_deref(),
        || bail!("sweep needs --config or --recipe"),
        verbose,
    )?;
    let spec = cfg
        .sweep_spec()
        .ok_or_else(|| anyhow!("config has no sweep section"))?;
    let table = run_sweep(&spec)?;

    let mut report: Box<dyn Write> = match &cfg.output {
        Some(path) => {
            let mut w = create(path)?;
            match cfg.format {
                OutputFormat::Csv => table.write_csv(&mut w)?,
                OutputFormat::Json => {
                    serde_json::to_writer_pretty(&mut w, &table.to_json())?;
                    writeln!(w)?;
                }
            }
            w.flush()?;
            write_sidecar(path, &cfg)?;
            Box::new(io::stdout())
        }
        None => {
            let mut out = io::stdout().lock();
            match cfg.format {
                OutputFormat::Csv => table.write_csv(&mut out)?,
                OutputFormat::Json => {
                    writeln!(out, "{}", serde_json::to_string_pretty(&table.to_json())?)?
                }
            }
            Box::new(io::stderr())
        }
    };

    if table.columns.first().map(String::as_str) == Some("R") {
        let s = summarize(&spec, &table)?;
        writeln!(report, "K min: {}", fmt_opt(s.k_min))?;
        writeln!(report, "K max: {}", fmt_opt(s.k_max))?;
        writeln!(
            report,
            "closed form at last R: {}",
            fmt_opt(s.k_closed_form_endpoint)
        )?;
        writeln!(report, "slope at R=0: {}", fmt_opt(s.slope_at_zero))?;
    } else {
        writeln!(report, "rows: {}", table.rows.len())?;
    }
    let bad = table.mc_disagreements();
    for (row, col, z) in &bad {
        writeln!(
            report,
            "row {row}: {col} disagrees with the click oracle (z = {z:.2})"
        )?;
    }
    Ok(if bad.is_empty() {
        Outcome::Passed
    } else {
        Outcome::Failed
    })
}

fn cross_validate(exp: &ExperimentConfig, estimate: KEstimate) -> Result<CrossValidation> {
    let k_click = exp.k_click_oracle()?;
    let k_analytic = exp.analytic_k()?;
    let z = (estimate.k_hat - k_click) / estimate.std_err;
    Ok(CrossValidation {
        estimate,
        k_click,
        k_analytic,
        z,
        passed: z.abs() <= Z_TOLERANCE,
    })
}

fn cmd_mc(args: McArgs, verbose: u8) -> Result<Outcome> {
    let canonical = args.canonical.clone();
    let cfg = load_config(
        &args.run,
        None,
        || {
            let (_, exp) = canonical_configs(1_000_000)
                .into_iter()
                .find(|(n, _)| *n == canonical)
                .ok_or_else(|| anyhow!("unknown canonical config {canonical:?}"))?;
            Ok(RunConfig::new(exp))
        },
        verbose,
    )?;
    let exp = &cfg.experiment;
    let dark2 = exp.dark2_prob()?;

    let (counts, estimate) = match &cfg.output {
        Some(path) => {
            let tags = simulate(exp)?;
            let mut w = create(path)?;
            if path.extension().is_some_and(|e| e == "bin") {
                tags.write_binary(&mut w)?;
            } else {
                tags.write_csv(&mut w)?;
            }
            w.flush()?;
            write_sidecar(path, &cfg)?;
            (tags.counts(), estimate_k(&tags, dark2))
        }
        None => {
            let counts = simulate_counts(exp)?;
            (counts, estimate_from_counts(&counts, dark2))
        }
    };
    let estimate = estimate.context("estimating K")?;
    let cv = cross_validate(exp, estimate)?;

    let mut out = io::stdout().lock();
    match cfg.format {
        OutputFormat::Json => {
            let v = json!({
                "metadata": metadata(exp),
                "counts": counts,
                "estimate": cv.estimate,
                "k_click": cv.k_click,
                "k_analytic": cv.k_analytic,
                "z": cv.z,
                "passed": cv.passed,
            });
            writeln!(out, "{}", serde_json::to_string_pretty(&v)?)?;
        }
        OutputFormat::Csv => {
            writeln!(
                out,
                "n_pulses,d1_clicks,d2_clicks,d1_no_click,d2_postselected,k_hat,std_err,k_click,k_analytic,z"
            )?;
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                counts.n_pulses,
                counts.d1_clicks,
                counts.d2_clicks,
                counts.d1_no_click,
                counts.d2_postselected,
                cv.estimate.k_hat,
                cv.estimate.std_err,
                cv.k_click,
                cv.k_analytic,
                cv.z
            )?;
        }
    }
    if !cv.passed {
        eprintln!(
            "k_hat {:.5} +/- {:.5} is {:.2} sigma from the click oracle {:.5}",
            cv.estimate.k_hat, cv.estimate.std_err, cv.z, cv.k_click
        );
    }
    Ok(if cv.passed {
        Outcome::Passed
    } else {
        Outcome::Failed
    })
}

fn cmd_validate(args: ValidateArgs, verbose: u8) -> Result<Outcome> {
    let run = &args.run;
    let configs: Vec<(String, ExperimentConfig)> = if run.config.is_some() {
        let cfg = load_config(run, None, || unreachable!(), verbose)?;
        vec![("config".to_string(), cfg.experiment)]
    } else {
        init_logging(verbose);
        canonical_configs(run.pulses.unwrap_or(10_000_000))
            .into_iter()
            .map(|(name, mut c)| {
                if let Some(seed) = run.seed {
                    c.seed = seed;
                }
                if let Some(s) = run.shards {
                    c.shards = s;
                }
                (name.to_string(), c)
            })
            .collect()
    };
    let mut all_passed = true;
    let mut rows = Vec::new();
    for (name, exp) in &configs {
        let counts = simulate_counts(exp)?;
        let result = estimate_from_counts(&counts, exp.dark2_prob()?)
            .map_err(anyhow::Error::from)
            .and_then(|e| cross_validate(exp, e));
        match result {
            Ok(cv) => {
                all_passed &= cv.passed;
                println!(
                    "{} {name}: k_hat {:.5} +/- {:.5}, oracle {:.5}, z {:+.2}",
                    if cv.passed { "PASS" } else { "FAIL" },
                    cv.estimate.k_hat,
                    cv.estimate.std_err,
                    cv.k_click,
                    cv.z
                );
                rows.push(json!({ "name": name, "result": cv }));
            }
            Err(e) => {
                all_passed = false;
                println!("FAIL {name}: {e:#}");
                rows.push(json!({ "name": name, "error": format!("{e:#}") }));
            }
        }
    }
    if let Some(path) = &run.out {
        let mut w = create(path)?;
        serde_json::to_writer_pretty(&mut w, &rows)?;
        writeln!(w)?;
        w.flush()?;
    }
    Ok(if all_passed {
        Outcome::Passed
    } else {
        Outcome::Failed
    })
}
