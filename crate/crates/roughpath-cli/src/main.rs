//! Command-line harness: sampling and lifting martingales, p-variation of
//! stored paths, rough solves with oracle comparisons, averaging runs,
//! chain-rule residual reports, moment-ratio checks, and bit-exact replay
//! of any recorded run.
//!
//! Exit codes: 0 success, 2 invalid configuration or input, 3 numerical
//! divergence, 5 replay mismatch, 64 unknown subcommand.

mod manifest;
mod spec;

use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use roughpath::error::Error;
use spec::{
    AvgSpec, BdgSpec, ItolemmaSpec, LiftSpec, PvarSpec, RdeSpec, RunSpec, SignatureSpec,
};

#[derive(Parser)]
#[command(name = "roughpath", version, about = "rough-path numerics harness")]
struct Cli {
    /// Output directory (flag beats the ROUGHPATH_OUT variable, which
    /// beats the built-in default `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Signature of a stored piecewise-linear path.
    Signature(SignatureArgs),
    /// p-variation or two-level distance of stored paths.
    Pvar(PvarArgs),
    /// Sample a martingale and write its level-2 lift and bracket.
    Lift(LiftArgs),
    /// Solve rough differential equations and compare schemes.
    Rde(RdeArgs),
    /// Run the discounted-averaging scheme and its convergence table.
    Avg(AvgArgs),
    /// Residuals of the pathwise chain-rule decomposition.
    Itolemma(ItolemmaArgs),
    /// Moment-equivalence ratio checks.
    Bdg(BdgArgs),
    /// Replay a recorded run and verify byte-identical outputs.
    Reproduce(ReproduceArgs),
}

#[derive(Args)]
struct SignatureArgs {
    /// Input grid path (.csv or .json).
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 2)]
    depth: usize,
    /// Also write the depth-2 restriction as a JSON envelope.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct PvarArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    p: f64,
    /// Read the input as a depth-2 rough path file.
    #[arg(long)]
    rough: bool,
    /// Report the two-level distance against this rough path instead.
    #[arg(long)]
    dp_against: Option<PathBuf>,
}

#[derive(Args)]
struct LiftArgs {
    /// Martingale kind: bm | phi.
    #[arg(long, default_value = "bm")]
    kind: String,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 1024)]
    steps: usize,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Lift rule: ito | strat | pl-ito.
    #[arg(long, default_value = "ito")]
    lift: String,
    /// Dyadic partition level for the pl-ito lift.
    #[arg(long)]
    partition_level: Option<u32>,
    /// Matrix integrand file for kind = phi.
    #[arg(long)]
    phi: Option<PathBuf>,
}

#[derive(Args)]
struct RdeArgs {
    /// Field registry key (gbm runs the closed-form comparison).
    #[arg(long, default_value = "gbm")]
    field: String,
    /// Driver lift: ito | strat.
    #[arg(long, default_value = "ito")]
    driver: String,
    #[arg(long, default_value_t = 1e-4)]
    mesh: f64,
    #[arg(long, default_value_t = 100)]
    paths: usize,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    #[arg(long, default_value_t = 1.0)]
    y0: f64,
    #[arg(long, default_value_t = 303)]
    seed: u64,
}

#[derive(Args)]
struct AvgArgs {
    /// JSON config file; command-line flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    field: Option<String>,
    #[arg(long)]
    field_scale: Option<f64>,
    #[arg(long)]
    y0: Option<f64>,
    /// Base rough path: trivial | strat-bm.
    #[arg(long)]
    gamma: Option<String>,
    /// Noise integrand: bm | bracket-sqrt | none.
    #[arg(long)]
    noise: Option<String>,
    /// Expectation mode: monte-carlo | closed-form.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    fine_steps: Option<usize>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Dyadic partition levels, e.g. 3,4,5,6,7,8.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<u32>>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ItolemmaArgs {
    /// Map registry key: square1d | linear | sin1d.
    #[arg(long, default_value = "square1d")]
    f: String,
    #[arg(long, default_value_t = 1e-4)]
    mesh: f64,
    #[arg(long, default_value_t = 100)]
    paths: usize,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    #[arg(long, default_value_t = 909)]
    seed: u64,
    /// Number of dyadic mesh halvings to report above the base mesh.
    #[arg(long, default_value_t = 3)]
    refinements: u32,
}

#[derive(Args)]
struct BdgArgs {
    #[arg(long, default_value_t = 2.5)]
    p: f64,
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long, default_value_t = 10_000)]
    paths: usize,
    #[arg(long, default_value_t = 128)]
    steps: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 2.0])]
    horizons: Vec<f64>,
    #[arg(long, default_value_t = 1010)]
    seed: u64,
}

#[derive(Args)]
struct ReproduceArgs {
    #[arg(long)]
    manifest: PathBuf,
}

/// Default avg configuration; a config file overrides these, flags
/// override both.
fn avg_defaults() -> AvgSpec {
    AvgSpec {
        field: "linear1d".into(),
        field_scale: 1.0,
        y0: 1.0,
        gamma: "trivial".into(),
        noise: "bm".into(),
        mode: "closed-form".into(),
        depth: 1,
        dim: 2,
        fine_steps: 512,
        t_max: 1.0,
        samples: 1000,
        levels: (1..=8).collect(),
        seed: 606,
    }
}

fn resolve_avg(args: &AvgArgs) -> Result<AvgSpec, Error> {
    let mut spec = avg_defaults();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)?;
        let file: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Error::Parse(format!("bad config: {e}")))?;
        // the config file holds a partial AvgSpec; merge field by field
        let mut base = serde_json::to_value(&spec).unwrap();
        if let (Some(base_map), Some(file_map)) = (base.as_object_mut(), file.as_object()) {
            for (k, v) in file_map {
                if !base_map.contains_key(k) && k != "command" {
                    return Err(Error::Parse(format!("unknown config key '{k}'")));
                }
                base_map.insert(k.clone(), v.clone());
            }
        }
        spec =
            serde_json::from_value(base).map_err(|e| Error::Parse(format!("bad config: {e}")))?;
    }
    if let Some(v) = &args.field {
        spec.field = v.clone();
    }
    if let Some(v) = args.field_scale {
        spec.field_scale = v;
    }
    if let Some(v) = args.y0 {
        spec.y0 = v;
    }
    if let Some(v) = &args.gamma {
        spec.gamma = v.clone();
    }
    if let Some(v) = &args.noise {
        spec.noise = v.clone();
    }
    if let Some(v) = &args.mode {
        spec.mode = v.clone();
    }
    if let Some(v) = args.depth {
        spec.depth = v;
    }
    if let Some(v) = args.dim {
        spec.dim = v;
    }
    if let Some(v) = args.fine_steps {
        spec.fine_steps = v;
    }
    if let Some(v) = args.t {
        spec.t_max = v;
    }
    if let Some(v) = args.samples {
        spec.samples = v;
    }
    if let Some(v) = &args.levels {
        spec.levels = v.clone();
    }
    if let Some(v) = args.seed {
        spec.seed = v;
    }
    Ok(spec)
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::InvalidSubcommand | ErrorKind::UnknownArgument => 64,
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = err.print();
                    return 0;
                }
                _ => 2,
            };
            let _ = err.print();
            return code;
        }
    };
    let out_dir = cli
        .out
        .or_else(|| std::env::var_os("ROUGHPATH_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));

    let spec = match &cli.command {
        Command::Reproduce(args) => {
            return match manifest::reproduce(&args.manifest) {
                Ok(manifest::ReplayOutcome::Match) => {
                    println!("replay matches: all outputs byte-identical");
                    0
                }
                Ok(manifest::ReplayOutcome::Mismatch(file, row, col, old, new)) => {
                    eprintln!(
                        "replay mismatch in {file} at row {row}, column {col}: stored '{old}', replayed '{new}'"
                    );
                    5
                }
                Err(err) => report(err),
            };
        }
        Command::Signature(args) => RunSpec::Signature(SignatureSpec {
            input: args.input.display().to_string(),
            depth: args.depth,
            json_out: args.json,
        }),
        Command::Pvar(args) => RunSpec::Pvar(PvarSpec {
            input: args.input.display().to_string(),
            p: args.p,
            rough: args.rough,
            dp_against: args.dp_against.as_ref().map(|p| p.display().to_string()),
        }),
        Command::Lift(args) => RunSpec::Lift(LiftSpec {
            kind: args.kind.clone(),
            dim: args.d,
            steps: args.steps,
            t_max: args.t,
            seed: args.seed,
            lift: args.lift.clone(),
            partition_level: args.partition_level,
            phi: args.phi.as_ref().map(|p| p.display().to_string()),
        }),
        Command::Rde(args) => RunSpec::Rde(RdeSpec {
            field: args.field.clone(),
            driver: args.driver.clone(),
            mesh: args.mesh,
            paths: args.paths,
            t_max: args.t,
            y0: args.y0,
            seed: args.seed,
        }),
        Command::Avg(args) => match resolve_avg(args) {
            Ok(spec) => RunSpec::Avg(spec),
            Err(err) => return report(err),
        },
        Command::Itolemma(args) => RunSpec::Itolemma(ItolemmaSpec {
            map: args.f.clone(),
            mesh: args.mesh,
            paths: args.paths,
            t_max: args.t,
            seed: args.seed,
            refinements: args.refinements,
        }),
        Command::Bdg(args) => RunSpec::Bdg(BdgSpec {
            p: args.p,
            q: args.q,
            depth: args.n,
            paths: args.paths,
            steps: args.steps,
            horizons: args.horizons.clone(),
            seed: args.seed,
        }),
    };

    match manifest::run_and_write(&spec, &out_dir) {
        Ok(m) => {
            println!(
                "{}: wrote {} file(s) to {} in {} ms",
                m.command,
                m.outputs.len(),
                out_dir.display(),
                m.duration_ms
            );
            0
        }
        Err(err) => report(err),
    }
}

fn report(err: Error) -> i32 {
    eprintln!("error: {err}");
    match err {
        Error::Diverged { .. } => 3,
        _ => 2,
    }
}
