use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use phaselab::lab::{emit_report, run_experiment, Config, Experiment, Format, ReportBundle};
use phaselab::LabError;

/// Runs one phaselab experiment and writes its report.
#[derive(Parser, Debug)]
#[command(name = "phaselab", version)]
struct Args {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    experiment: Experiment,
    /// Report path; CSV tables beyond the first go to `-<table>` siblings.
    /// Without it the report goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: Format,
    #[arg(long)]
    grid_nmax: Option<usize>,
    #[arg(long)]
    mass: Option<f64>,
    #[arg(long)]
    coupling: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    dressing: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

fn load_config(args: &Args) -> Result<Config, LabError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| LabError::Io { path: path.display().to_string(), message: e.to_string() })?;
            Config::parse(&text)?
        }
        None => Config::default(),
    };
    let overrides = [
        ("grid.nmax", args.grid_nmax.map(|v| v.to_string())),
        ("model.mass", args.mass.map(|v| v.to_string())),
        ("pot.lambda", args.coupling.map(|v| v.to_string())),
        ("evolve.tol", args.tol.map(|v| v.to_string())),
        ("dressing.recipe", args.dressing.clone()),
        ("seed", args.seed.map(|v| v.to_string())),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            cfg.set(key, &v).map_err(|m| LabError::config(format!("--{}: {m}", flag_name(key))))?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn flag_name(key: &str) -> &'static str {
    match key {
        "grid.nmax" => "grid-nmax",
        "model.mass" => "mass",
        "pot.lambda" => "coupling",
        "evolve.tol" => "tol",
        "dressing.recipe" => "dressing",
        _ => "seed",
    }
}

fn print_stdout(bundle: &ReportBundle, format: Format) {
    match format {
        Format::Json => println!("{}", bundle.to_json()),
        Format::Csv => {
            for (i, (suffix, text)) in bundle.csv_documents().into_iter().enumerate() {
                if i > 0 {
                    println!();
                }
                println!("# {}{}", bundle.experiment, suffix);
                print!("{text}");
            }
        }
    }
}

fn run(args: &Args) -> Result<bool, LabError> {
    let cfg = load_config(args)?;
    let bundle = run_experiment(args.experiment, &cfg)?;
    for v in &bundle.verdicts {
        log::info!(
            "{} {} = {:e} ({} {:e})",
            if v.pass { "PASS" } else { "FAIL" },
            v.name,
            v.value,
            v.relation,
            v.threshold
        );
    }
    match &args.out {
        Some(out) => {
            for p in emit_report(&bundle, args.format, out)? {
                log::info!("wrote {}", p.display());
            }
        }
        None => print_stdout(&bundle, args.format),
    }
    Ok(bundle.all_pass())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    match run(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
