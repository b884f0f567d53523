use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rbsim::clifford::CliffordTable;
use rbsim::SchemeKind;
use rbsim_cli::commands::{self, Overrides};
use rbsim_cli::{CliError, Config};

#[derive(Parser)]
#[command(name = "rbsim", version, about = "Composite-pulse randomized-benchmarking simulator")]
struct Cli {
    /// Worker threads for sequence evaluation (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Randomized-benchmarking experiments.
    #[command(subcommand)]
    Rb(RbCommand),
    /// Print the pulse expansion of one target rotation.
    Expand {
        /// Target angle in radians; accepts forms like `pi/2`.
        #[arg(long, allow_hyphen_values = true)]
        theta: String,
        #[arg(long, default_value = "0", allow_hyphen_values = true)]
        phi: String,
        #[arg(long, default_value = "b2")]
        scheme: String,
        #[arg(long)]
        json: bool,
    },
    /// Clifford-table audits.
    #[command(subcommand)]
    Clifford(CliffordCommand),
    /// Fit an existing records CSV.
    Fit {
        #[arg(long)]
        records: PathBuf,
        /// Config supplying the SPAM starting values.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write fit.json and decay.csv here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Subcommand)]
enum RbCommand {
    /// One experiment: records, fit report and decay curve.
    Run(RunArgs),
    /// Amplitude-error sweep over schemes.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        repeats: Option<u64>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (else config `output.dir`, then $RBSIM_OUT_DIR).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Use exact probabilities instead of sampled shots.
    #[arg(long)]
    exact: bool,
    #[arg(long)]
    json: bool,
    /// Print the effective config and exit.
    #[arg(long)]
    dump_config: bool,
}

#[derive(Subcommand)]
enum CliffordCommand {
    /// Closure, distinctness, decomposition and inversion audit.
    Check {
        #[arg(long)]
        json: bool,
        #[arg(long, default_value_t = 1000)]
        sequences: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Shift the phase of this gate's first driven pulse (mutation test).
        #[arg(long)]
        corrupt_gate: Option<usize>,
        #[arg(long, default_value_t = 0.1, allow_hyphen_values = true)]
        corrupt_phase_rad: f64,
    },
}

fn load_config(args: &RunArgs, repeats: Option<u64>) -> Result<Config, CliError> {
    let mut cfg = match &args.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    Overrides { seed: args.seed, exact: args.exact, repeats, out_dir: args.out_dir.clone() }.apply(&mut cfg);
    Ok(cfg)
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("--threads: {e}")))?;
    }
    match cli.command {
        Command::Rb(RbCommand::Run(args)) => {
            let cfg = load_config(&args, None)?;
            if args.dump_config {
                print!("{}", cfg.to_toml());
                return Ok(());
            }
            let dir = commands::resolve_out_dir(cfg.output.dir.as_deref());
            let report = commands::rb_run(&cfg, &dir)?;
            if args.json {
                print_json(&report);
            } else {
                let f = &report.fit;
                println!(
                    "{}: avg_error = {:.4e} ± {:.1e} (1σ), p = {:.8}, A0 = {:.4}, B0 = {:.4}{}",
                    cfg.experiment.scheme,
                    f.avg_error,
                    f.stderr_avg_error,
                    f.p,
                    f.a0,
                    f.b0,
                    f.flag.as_deref().map(|s| format!(" [{s}]")).unwrap_or_default()
                );
                println!("wrote records.csv, records.json, fit.json, decay.csv to {}", dir.display());
            }
        }
        Command::Rb(RbCommand::Sweep { run: args, repeats }) => {
            let cfg = load_config(&args, repeats)?;
            if args.dump_config {
                print!("{}", cfg.to_toml());
                return Ok(());
            }
            let dir = commands::resolve_out_dir(cfg.output.dir.as_deref());
            let rows = commands::rb_sweep(&cfg, &dir)?;
            if args.json {
                print_json(&rows);
            } else {
                for r in &rows {
                    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.3e}")).unwrap_or_else(|| "-".into());
                    println!(
                        "eps = {:>5.2}  {:<9} repeat {}  avg_error = {:>10} ± {:>9}  {}",
                        r.epsilon,
                        r.scheme.as_str(),
                        r.repeat,
                        fmt(r.avg_error),
                        fmt(r.stderr),
                        r.status
                    );
                }
                println!("wrote sweep.csv, sweep.json to {}", dir.display());
            }
        }
        Command::Expand { theta, phi, scheme, json } => {
            let theta = commands::parse_angle(&theta).map_err(CliError::Usage)?;
            let phi = commands::parse_angle(&phi).map_err(CliError::Usage)?;
            let scheme: SchemeKind = scheme.parse()?;
            let seq = commands::expand_target(theta, phi, scheme)?;
            if json {
                print_json(&serde_json::json!({
                    "scheme": scheme,
                    "theta": theta,
                    "phi": phi,
                    "pulses": seq.pulses,
                    "total_angle": seq.total_angle(),
                }));
            } else {
                print!("{}", commands::format_expansion(&seq));
            }
        }
        Command::Clifford(CliffordCommand::Check { json, sequences, seed, corrupt_gate, corrupt_phase_rad }) => {
            let table = match corrupt_gate {
                Some(g) => commands::corrupted_table(g, corrupt_phase_rad)?,
                None => CliffordTable::standard(),
            };
            let report = commands::clifford_check(&table, sequences, seed);
            if json {
                print_json(&report);
            } else {
                print!("{}", commands::format_check(&report));
            }
            report.into_result()?;
        }
        Command::Fit { records, config, out_dir, json } => {
            let cfg = match config {
                Some(path) => Config::load(&path)?,
                None => Config::default(),
            };
            let report = commands::fit_records(&records, cfg.spam())?;
            if let Some(dir) = out_dir {
                commands::write_fit_artifacts(&report, &dir)?;
            }
            if json {
                print_json(&report);
            } else {
                let f = &report.fit;
                println!(
                    "avg_error = {:.4e} ± {:.1e} (1σ), p = {:.8}, A0 = {:.4}, B0 = {:.4}",
                    f.avg_error, f.stderr_avg_error, f.p, f.a0, f.b0
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.report());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
