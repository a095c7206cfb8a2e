//! Batch front end: JSON experiment configs in, JSON/CSV results out, one
//! experiment per invocation.
//!
//! Exit codes: 0 success, 1 bound violation detected by a verification
//! command, 2 config error, 3 numerical failure. The `ECHAIN_TOL`
//! environment variable overrides the state-validation tolerances.

use clap::{Args, Parser, Subcommand, ValueEnum};
use echain::chain::{run_deterministic, run_slocc_monte_carlo};
use echain::detect::{detection_report, SearchParams};
use echain::io::{ChainConfigRecord, ChannelSpec, StateRecord};
use echain::measures::{
    concurrence, eof_convex_roof_upper, eof_pure, eof_two_qubit, gk_concurrence,
    k_schmidt_fidelity_pure, kappa_for_decomposition, negativity, sep_distance_lower,
    sep_distance_upper, separability_bound, ConvexRoofParams, MeasureResult, SepUpperParams,
};
use echain::repeater::{bound_curve, simulate_scaling, ScalingSweepConfig};
use echain::tol::Tolerances;
use serde::Deserialize;
use serde_json::json;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "echain", version, about = "Entanglement chain experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct OutputArgs {
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct ChannelArgs {
    /// Channel family: depolarizing, amplitude_damping, dephasing, identity.
    #[arg(long)]
    channel: String,
    /// System dimension for depolarizing/identity.
    #[arg(long)]
    d: Option<usize>,
    /// Depolarizing or dephasing parameter.
    #[arg(long)]
    p: Option<f64>,
    /// Damping parameter.
    #[arg(long)]
    gamma: Option<f64>,
}

impl ChannelArgs {
    fn spec(&self) -> ChannelSpec {
        ChannelSpec::named(&self.channel, self.d, self.p, self.gamma)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Choi state of a channel plus its measures.
    Choi {
        #[command(flatten)]
        channel: ChannelArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Deterministic chain evolution from a JSON config.
    Chain {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Monte-Carlo post-selection statistics from a JSON config.
    Mc {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Repeater scaling sweep from a JSON config.
    Scaling {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Correctable-subspace detection report for a channel.
    Detect {
        #[command(flatten)]
        channel: ChannelArgs,
        #[arg(long, default_value = "50")]
        restarts: usize,
        #[arg(long, default_value = "2")]
        dim: usize,
        #[arg(long, default_value = "0")]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Contraction factors κ_k and the separability-bound table.
    Kappa {
        #[command(flatten)]
        channel: ChannelArgs,
        /// Evaluate a single k instead of every k in 2..=d.
        #[arg(long)]
        k: Option<usize>,
        /// Largest step of the bound table.
        #[arg(long, default_value = "10")]
        n_max: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Entanglement measures of a state from a JSON config.
    Measure {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
        #[arg(long)]
        seed: Option<u64>,
    },
}

/// Errors that carry their exit code.
enum CmdError {
    Config(String),
    Numerical(String),
    BoundViolation,
}

impl CmdError {
    fn code(&self) -> u8 {
        match self {
            CmdError::BoundViolation => 1,
            CmdError::Config(_) => 2,
            CmdError::Numerical(_) => 3,
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> CmdError {
    CmdError::Config(e.to_string())
}

fn run_err(e: impl std::fmt::Display) -> CmdError {
    CmdError::Numerical(e.to_string())
}

fn tolerances_from_env() -> Result<Tolerances, CmdError> {
    match std::env::var("ECHAIN_TOL") {
        Ok(v) => {
            let base: f64 = v
                .parse()
                .map_err(|_| CmdError::Config(format!("ECHAIN_TOL = '{v}' is not a float")))?;
            if !(base > 0.0 && base < 1.0) {
                return Err(CmdError::Config(format!(
                    "ECHAIN_TOL = {base} outside (0, 1)"
                )));
            }
            Ok(Tolerances::with_base(base))
        }
        Err(_) => Ok(Tolerances::default()),
    }
}

fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.16e}")
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn write_output(output: &OutputArgs, content: &str) -> Result<(), CmdError> {
    match &output.out {
        Some(path) => fs::write(path, content)
            .map_err(|e| CmdError::Numerical(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn json_output(output: &OutputArgs, value: &impl serde::Serialize) -> Result<(), CmdError> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| CmdError::Numerical(e.to_string()))?;
    s.push('\n');
    write_output(output, &s)
}

fn read_config<T: for<'de> Deserialize<'de>>(path: &PathBuf) -> Result<T, CmdError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CmdError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CmdError::Config(format!("config: {e}")))
}

fn measures_to_csv(results: &[MeasureResult]) -> String {
    let mut s = String::from("name,value\n");
    for r in results {
        s.push_str(&format!("{},{}\n", r.name, fmt_f64(r.value)));
    }
    s
}

fn cmd_choi(channel: &ChannelArgs, output: &OutputArgs) -> Result<(), CmdError> {
    let ch = channel.spec().build().map_err(config_err)?;
    let gamma = ch.choi().map_err(run_err)?;
    let mut results = Vec::new();
    if gamma.d_in() == 2 {
        results.push(MeasureResult::new(
            "concurrence",
            concurrence(gamma.density()).map_err(run_err)?,
        ));
        results.push(MeasureResult::new(
            "eof",
            eof_two_qubit(gamma.density()).map_err(run_err)?,
        ));
    }
    results.push(MeasureResult::new(
        "negativity",
        negativity(gamma.density()).map_err(run_err)?,
    ));
    results.push(MeasureResult::new(
        "sep_lower",
        sep_distance_lower(gamma.density()).map_err(run_err)?,
    ));
    match output.format {
        Format::Json => {
            let value = json!({
                "choi": StateRecord::from_density(gamma.density()),
                "measures": results,
            });
            json_output(output, &value)
        }
        Format::Csv => write_output(output, &measures_to_csv(&results)),
    }
}

fn cmd_chain(
    config_path: &PathBuf,
    output: &OutputArgs,
    seed: Option<u64>,
    tol: &Tolerances,
) -> Result<(), CmdError> {
    let record: ChainConfigRecord = read_config(config_path)?;
    let mut config = record.to_config_with(tol).map_err(config_err)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    let result = run_deterministic(&config).map_err(run_err)?;
    // verification: the decay bound and the separability bound when they apply
    let mut violated = false;
    for rec in &result.per_step {
        if let (Some(c), Some(b)) = (rec.concurrence, rec.choi_decay_bound) {
            if c > b + 1e-9 {
                violated = true;
            }
        }
        if let Some(b) = rec.separability_bound {
            if rec.sep_lower > b + 1e-9 {
                violated = true;
            }
        }
    }
    match output.format {
        Format::Json => json_output(output, &result)?,
        Format::Csv => {
            let mut s = String::from(
                "step,concurrence,eof,negativity,sep_lower,choi_decay_bound,separability_bound\n",
            );
            for rec in &result.per_step {
                s.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    rec.step,
                    fmt_opt(rec.concurrence),
                    fmt_opt(rec.eof),
                    fmt_f64(rec.negativity),
                    fmt_f64(rec.sep_lower),
                    fmt_opt(rec.choi_decay_bound),
                    fmt_opt(rec.separability_bound),
                ));
            }
            write_output(output, &s)?;
        }
    }
    if violated {
        Err(CmdError::BoundViolation)
    } else {
        Ok(())
    }
}

fn cmd_mc(
    config_path: &PathBuf,
    output: &OutputArgs,
    seed: Option<u64>,
    tol: &Tolerances,
) -> Result<(), CmdError> {
    let record: ChainConfigRecord = read_config(config_path)?;
    let mut config = record.to_config_with(tol).map_err(config_err)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    let result = run_slocc_monte_carlo(&config).map_err(run_err)?;
    let violated = result.empirical_prob > result.bound + 3.0 * result.binomial_sigma;
    match output.format {
        Format::Json => json_output(output, &result)?,
        Format::Csv => {
            let mut s = String::from(
                "trajectories,successes,hits,empirical_prob,bound,binomial_sigma\n",
            );
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                result.trajectories,
                result.successes,
                result.hits,
                fmt_f64(result.empirical_prob),
                fmt_f64(result.bound),
                fmt_f64(result.binomial_sigma),
            ));
            write_output(output, &s)?;
        }
    }
    if violated {
        Err(CmdError::BoundViolation)
    } else {
        Ok(())
    }
}

fn cmd_scaling(
    config_path: &PathBuf,
    output: &OutputArgs,
    seed: Option<u64>,
) -> Result<(), CmdError> {
    let mut config: ScalingSweepConfig = read_config(config_path)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    let result = simulate_scaling(&config).map_err(config_err)?;
    let curve = bound_curve(&config).map_err(config_err)?;
    match output.format {
        Format::Json => {
            let value = json!({
                "sweep": result,
                "bound_curve": curve
                    .iter()
                    .map(|(n, v)| json!({"n": n, "bound": v}))
                    .collect::<Vec<_>>(),
            });
            json_output(output, &value)?;
        }
        Format::Csv => {
            let mut s = String::from("n,m,p,endpoint_fidelity,survives,bound_value\n");
            for pt in &result.points {
                s.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    pt.n,
                    pt.m,
                    fmt_f64(config.p),
                    fmt_f64(pt.endpoint_fidelity),
                    pt.survives,
                    fmt_f64(pt.bound_value),
                ));
            }
            write_output(output, &s)?;
        }
    }
    Ok(())
}

fn cmd_detect(
    channel: &ChannelArgs,
    restarts: usize,
    dim: usize,
    seed: u64,
    output: &OutputArgs,
) -> Result<(), CmdError> {
    let ch = channel.spec().build().map_err(config_err)?;
    let report = detection_report(
        &ch,
        SearchParams {
            dim,
            restarts,
            iterations: 300,
            seed,
        },
    )
    .map_err(run_err)?;
    json_output(output, &report)
}

fn cmd_kappa(
    channel: &ChannelArgs,
    k: Option<usize>,
    n_max: usize,
    output: &OutputArgs,
) -> Result<(), CmdError> {
    let ch = channel.spec().build().map_err(config_err)?;
    let ks: Vec<usize> = match k {
        Some(k) => vec![k],
        None => (2..=ch.d_in()).collect(),
    };
    let mut kappas = Vec::new();
    let mut kappa_max: f64 = 0.0;
    for &k in &ks {
        let v = kappa_for_decomposition(&ch, k).map_err(config_err)?;
        kappa_max = kappa_max.max(v);
        kappas.push(json!({"k": k, "kappa": v}));
    }
    let contracting = kappa_max > 1e-12 && kappa_max < 1.0 - 1e-9;
    let table: Vec<(usize, Option<f64>)> = (0..=n_max)
        .map(|n| {
            let b = contracting
                .then(|| separability_bound(kappa_max, n, ch.d_in()).ok())
                .flatten();
            (n, b)
        })
        .collect();
    match output.format {
        Format::Json => {
            let value = json!({
                "d_a": ch.d_in(),
                "kappa": kappas,
                "kappa_max": kappa_max,
                "contracting": contracting,
                "bound_table": table
                    .iter()
                    .map(|(n, b)| json!({"n": n, "bound": b}))
                    .collect::<Vec<_>>(),
            });
            json_output(output, &value)?;
        }
        Format::Csv => {
            let mut s = String::from("n,separability_bound\n");
            for (n, b) in &table {
                s.push_str(&format!("{},{}\n", n, fmt_opt(*b)));
            }
            write_output(output, &s)?;
        }
    }
    Ok(())
}

/// Config for the measure subcommand.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasureConfig {
    state: StateRecord,
    /// Names: concurrence, eof, eof_upper, negativity, sep_lower, sep_upper,
    /// gk, k_fidelity.
    measures: Vec<String>,
    #[serde(default = "default_k")]
    k: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_restarts")]
    restarts: usize,
}

fn default_k() -> usize {
    2
}

fn default_restarts() -> usize {
    20
}

fn cmd_measure(
    config_path: &PathBuf,
    output: &OutputArgs,
    seed: Option<u64>,
    tol: &Tolerances,
) -> Result<(), CmdError> {
    let config: MeasureConfig = read_config(config_path)?;
    let seed = seed.unwrap_or(config.seed);
    let rho = config.state.to_density_with(tol).map_err(config_err)?;
    let pure = config.state.to_pure_with(tol).ok();
    let mut results = Vec::new();
    for name in &config.measures {
        let result = match name.as_str() {
            "concurrence" => MeasureResult::new("concurrence", concurrence(&rho).map_err(run_err)?),
            "eof" => match &pure {
                Some(psi) => MeasureResult::new("eof", eof_pure(psi)),
                None => MeasureResult::new("eof", eof_two_qubit(&rho).map_err(run_err)?),
            },
            "eof_upper" => {
                let res = eof_convex_roof_upper(
                    &rho,
                    ConvexRoofParams {
                        ensemble_size: rho.rank(1e-12).max(4),
                        restarts: config.restarts,
                        iterations: 200,
                        seed,
                    },
                )
                .map_err(run_err)?;
                let mut m = MeasureResult::new("eof_upper", res.value);
                m.metadata.insert(
                    "ensemble_size".into(),
                    serde_json::Value::from(res.ensemble.len()),
                );
                m.metadata
                    .insert("restarts".into(), serde_json::Value::from(config.restarts));
                m
            }
            "negativity" => MeasureResult::new("negativity", negativity(&rho).map_err(run_err)?),
            "sep_lower" => {
                MeasureResult::new("sep_lower", sep_distance_lower(&rho).map_err(run_err)?)
            }
            "sep_upper" => {
                let mut params = SepUpperParams::for_dims(rho.dims());
                params.restarts = config.restarts;
                params.seed = seed;
                MeasureResult::new("sep_upper", sep_distance_upper(&rho, params).map_err(run_err)?)
            }
            "gk" => {
                let psi = pure.as_ref().ok_or_else(|| {
                    CmdError::Config("gk needs a pure state record".into())
                })?;
                let mut m = MeasureResult::new("gk", gk_concurrence(psi, config.k).map_err(run_err)?);
                m.metadata.insert("k".into(), serde_json::Value::from(config.k));
                m
            }
            "k_fidelity" => {
                let psi = pure.as_ref().ok_or_else(|| {
                    CmdError::Config("k_fidelity needs a pure state record".into())
                })?;
                let mut m = MeasureResult::new(
                    "k_fidelity",
                    k_schmidt_fidelity_pure(psi, config.k).map_err(run_err)?,
                );
                m.metadata.insert("k".into(), serde_json::Value::from(config.k));
                m
            }
            other => return Err(CmdError::Config(format!("unknown measure '{other}'"))),
        };
        results.push(result);
    }
    match output.format {
        Format::Json => json_output(output, &results),
        Format::Csv => write_output(output, &measures_to_csv(&results)),
    }
}

fn dispatch(cli: &Cli) -> Result<(), CmdError> {
    let tol = tolerances_from_env()?;
    match &cli.command {
        Command::Choi { channel, output } => cmd_choi(channel, output),
        Command::Chain {
            config,
            output,
            seed,
        } => cmd_chain(config, output, *seed, &tol),
        Command::Mc {
            config,
            output,
            seed,
        } => cmd_mc(config, output, *seed, &tol),
        Command::Scaling {
            config,
            output,
            seed,
        } => cmd_scaling(config, output, *seed),
        Command::Detect {
            channel,
            restarts,
            dim,
            seed,
            output,
        } => cmd_detect(channel, *restarts, *dim, *seed, output),
        Command::Kappa {
            channel,
            k,
            n_max,
            output,
        } => cmd_kappa(channel, *k, *n_max, output),
        Command::Measure {
            config,
            output,
            seed,
        } => cmd_measure(config, output, *seed, &tol),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = match &e {
                CmdError::BoundViolation => {
                    json!({"error": "bound violation detected", "kind": "violation"})
                }
                CmdError::Config(msg) => json!({"error": msg, "kind": "config"}),
                CmdError::Numerical(msg) => json!({"error": msg, "kind": "numerical"}),
            };
            eprintln!("{record}");
            ExitCode::from(e.code())
        }
    }
}

