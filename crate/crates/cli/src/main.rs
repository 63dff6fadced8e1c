use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};

use curvatura_cli::zoo::{list_zoo, ManifoldDescriptor};
use curvatura_cli::{report, run, with_workers, CliError, Command, Format, RunConfig};

/// Numerical verification of total mean curvature invariants, their first
/// variation, complex submanifold identities and tube formulas.
#[derive(Parser)]
#[command(name = "curvatura", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Pointwise and total K_2p, H_2p+1 and their intrinsic versions.
    Invariants(RunArgs),
    /// Euler–Lagrange operator L_2p (and complex identities in CP^N).
    ElCheck(RunArgs),
    /// Finite-difference first variation against the integral of L_2p.
    FirstVariation(RunArgs),
    /// Weyl–Gray tube volumes and the numeric tube oracle.
    Tube(RunArgs),
    /// Austerity and tubular-minimality checks.
    Austere(RunArgs),
    /// Every applicable check.
    ReportAll(RunArgs),
    /// Lists the manifold zoo.
    ListZoo {
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Zoo manifold name (see `list-zoo`).
    #[arg(long, required_unless_present = "config")]
    manifold: Option<String>,
    /// TOML run configuration.
    #[arg(long, conflicts_with = "manifold")]
    config: Option<PathBuf>,
    /// Manifold parameter override, `key=value` (repeatable).
    #[arg(long = "param")]
    params: Vec<String>,
    /// Comma-separated p values.
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<usize>>,
    /// Nodes per parameter axis.
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Tolerance overrides, `key=value[,key=value…]`.
    #[arg(long, value_delimiter = ',')]
    tol_overrides: Vec<String>,
}

fn config_from(command: Command, args: RunArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match (&args.config, &args.manifold) {
        (Some(path), _) => {
            let mut c = RunConfig::from_file(path)?;
            c.command = command;
            c
        }
        (None, Some(name)) => RunConfig::new(command, ManifoldDescriptor::named(name.clone())),
        (None, None) => return Err(CliError::Usage("one of --manifold or --config is required".into())),
    };
    for item in &args.params {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("parameter {item:?} is not key=value")))?;
        let v: f64 = v.parse().map_err(|_| CliError::Usage(format!("parameter {k} needs a number")))?;
        cfg.manifold.params.insert(k.to_string(), v);
    }
    if args.p.is_some() {
        cfg.p = args.p;
    }
    if let Some(r) = args.resolution {
        cfg.resolution = Some(vec![r]);
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if args.out.is_some() {
        cfg.out = args.out;
    }
    if let Some(f) = args.format {
        cfg.format = f;
    }
    cfg.tolerances.apply_overrides(&args.tol_overrides)?;
    Ok(cfg)
}

fn list(format: Format, out: Option<PathBuf>) -> Result<bool, CliError> {
    let entries = list_zoo()?;
    let text = match format {
        Format::Json => serde_json::to_string_pretty(&entries).map_err(|e| CliError::Output(e.to_string()))? + "\n",
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| CliError::Output(e.to_string());
            w.write_record(["name", "n", "m", "ambient", "closed", "complex", "params", "references"]).map_err(io)?;
            for e in &entries {
                let params = e.params.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";");
                let refs = e.references.iter().map(|r| format!("{}={}", r.quantity, r.value)).collect::<Vec<_>>().join(";");
                w.write_record([
                    e.name.clone(),
                    e.n.to_string(),
                    e.m.to_string(),
                    e.ambient.clone(),
                    e.closed.to_string(),
                    e.complex.to_string(),
                    params,
                    refs,
                ])
                .map_err(io)?;
            }
            String::from_utf8(w.into_inner().map_err(|e| CliError::Output(e.to_string()))?)
                .map_err(|e| CliError::Output(e.to_string()))?
        }
    };
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(true)
}

fn execute(cmd: Cmd) -> Result<bool, CliError> {
    let (command, args) = match cmd {
        Cmd::ListZoo { format, out } => return list(format, out),
        Cmd::Invariants(a) => (Command::Invariants, a),
        Cmd::ElCheck(a) => (Command::ElCheck, a),
        Cmd::FirstVariation(a) => (Command::FirstVariation, a),
        Cmd::Tube(a) => (Command::Tube, a),
        Cmd::Austere(a) => (Command::Austere, a),
        Cmd::ReportAll(a) => (Command::ReportAll, a),
    };
    let cfg = config_from(command, args)?;
    let rep = with_workers(|| run(&cfg))??;
    report::emit(&rep, cfg.format, cfg.out.as_deref())?;
    for failure in rep.failed_checks() {
        eprintln!("FAILED {failure}");
    }
    Ok(rep.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Usage(_) = e {
                eprintln!("{}", Cli::command().render_usage());
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
