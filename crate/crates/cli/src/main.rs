//! `casimir` — experiment driver.
//!
//! ```text
//! casimir run <config.cfg> [--out DIR] [--seed N] [--workers N]
//! casimir reproduce <2|3|4|5|6|7|9> [--out DIR] [--seed N] [--workers N]
//! ```
//!
//! Exit codes: 0 success, 1 runtime/numerical error, 2 usage or config
//! error, 3 a reproduce check failed.

mod config;
mod experiments;
mod figures;

use std::path::PathBuf;
use std::process::ExitCode;

use config::ExperimentConfig;

const USAGE: &str = "\
casimir — cavity-optomechanics trajectory and spectrum experiments

USAGE:
    casimir run <config.cfg> [--out DIR] [--seed N] [--workers N]
    casimir reproduce <figure-id> [--out DIR] [--seed N] [--workers N]

COMMANDS:
    run         execute the experiment described by a config file
    reproduce   run a bundled preset (figure ids: 2 3 4 5 6 7 9) and
                print PASS/FAIL lines for its validation targets

OPTIONS:
    --out DIR     output directory (default: config out_dir, or out/<name>)
    --seed N      override the config's master seed
    --workers N   worker threads for ensembles and scans (default: all cores)
";

struct Cli {
    command: String,
    positional: Vec<String>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    workers: Option<usize>,
}

fn parse_args(mut args: Vec<String>) -> Result<Cli, String> {
    if args.is_empty() {
        return Err("missing command".into());
    }
    let command = args.remove(0);
    let mut positional = Vec::new();
    let mut out = None;
    let mut seed = None;
    let mut workers = None;
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        match arg.as_str() {
            "--out" => {
                let v = it.next().ok_or("--out needs a value")?;
                out = Some(PathBuf::from(v));
            }
            "--seed" => {
                let v = it.next().ok_or("--seed needs a value")?;
                seed = Some(
                    v.parse::<u64>()
                        .map_err(|_| format!("invalid seed `{v}`"))?,
                );
            }
            "--workers" => {
                let v = it.next().ok_or("--workers needs a value")?;
                workers = Some(
                    v.parse::<usize>()
                        .map_err(|_| format!("invalid worker count `{v}`"))?,
                );
            }
            other if other.starts_with("--") => return Err(format!("unknown flag `{other}`")),
            other => positional.push(other.to_string()),
        }
    }
    Ok(Cli {
        command,
        positional,
        out,
        seed,
        workers,
    })
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--help" || a == "-h") || args.is_empty() {
        print!("{USAGE}");
        return if args.is_empty() {
            ExitCode::from(2)
        } else {
            ExitCode::SUCCESS
        };
    }
    let cli = match parse_args(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}\n\n{USAGE}");
            return ExitCode::from(2);
        }
    };
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot configure {n} workers: {e}");
            return ExitCode::from(2);
        }
    }

    match cli.command.as_str() {
        "run" => {
            let [config_path] = cli.positional.as_slice() else {
                eprintln!("error: `run` takes exactly one config path\n\n{USAGE}");
                return ExitCode::from(2);
            };
            let text = match std::fs::read_to_string(config_path) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read {config_path}: {e}");
                    return ExitCode::from(2);
                }
            };
            let config = match ExperimentConfig::parse(&text) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let out_dir = cli
                .out
                .or_else(|| config.out_dir.as_ref().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from(format!("out/{}", config.kind.name())));
            match experiments::run(&config, &out_dir, cli.seed) {
                Ok(outcome) => {
                    println!("wrote {}", outcome.out_dir.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
        "reproduce" => {
            let [figure] = cli.positional.as_slice() else {
                eprintln!("error: `reproduce` takes exactly one figure id\n\n{USAGE}");
                return ExitCode::from(2);
            };
            let figure: u32 = match figure.parse() {
                Ok(f) if figures::preset(f).is_some() => f,
                _ => {
                    eprintln!(
                        "error: unknown figure id `{figure}` (expected one of 2 3 4 5 6 7 9)"
                    );
                    return ExitCode::from(2);
                }
            };
            let out_dir = cli
                .out
                .unwrap_or_else(|| PathBuf::from(format!("out/fig{figure}")));
            match figures::reproduce(figure, &out_dir, cli.seed) {
                Ok(results) => {
                    let mut all_ok = true;
                    for r in &results {
                        println!("{}", r.line());
                        all_ok &= r.passed;
                    }
                    println!("wrote {}", out_dir.display());
                    if all_ok {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(3)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
        other => {
            eprintln!("error: unknown command `{other}`\n\n{USAGE}");
            ExitCode::from(2)
        }
    }
}
