use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fmd_cli::config::{Mode, ProblemConfig, SettingConfig};
use fmd_cli::export;
use fmd_cli::run::oracle_report;
use fmd_cli::{parse_config, run, Overrides};
use fmd_core::SymTensor2;

#[derive(Parser)]
#[command(name = "fmd", version, about = "Free material design solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the grid problem and export displacement and flux.
    Solve(RunArgs),
    /// Solve, then reconstruct and certify the optimal design.
    Reconstruct(RunArgs),
    /// Check optimality conditions of an analytic candidate.
    Check(RunArgs),
    /// Scalar design through optimal transport.
    Scalar(RunArgs),
    /// Point-wise oracle for one stress.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    #[arg(long)]
    gap_tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Cell counts as `NX,NY`.
    #[arg(long, value_parser = parse_grid)]
    grid: Option<(usize, usize)>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct OracleArgs {
    /// amd, fibmd, fibmd_pm, imd or power_law_imd.
    #[arg(long)]
    setting: String,
    /// Stress as `s11,s22,s12`.
    #[arg(long, allow_hyphen_values = true)]
    stress: String,
    #[arg(long)]
    kappa_plus: Option<f64>,
    #[arg(long)]
    kappa_minus: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or("expected NX,NY")?;
    Ok((a.trim().parse().map_err(|e| format!("{e}"))?, b.trim().parse().map_err(|e| format!("{e}"))?))
}

fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    let v: Vec<f64> = s.split(',').map(|x| x.trim().parse::<f64>().map_err(|e| format!("{e}"))).collect::<Result<_, _>>()?;
    v.try_into().map_err(|_| "expected three comma-separated numbers".to_string())
}

fn configure_threads() {
    if let Some(n) = std::env::var("FMD_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn run_config(mode: Mode, args: RunArgs) -> Result<i32, String> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| format!("{}: {e}", args.config.display()))?;
    let mut cfg: ProblemConfig = parse_config(&text).map_err(|e| format!("{}: {e}", args.config.display()))?;
    cfg.mode = mode;
    let ov = Overrides { gap_tol: args.gap_tol, max_iter: args.max_iter, grid: args.grid, out: args.out, seed: args.seed };
    let outcome = run(&cfg, &ov).map_err(|e| e.to_string())?;
    print!("{}", export::json_text(&outcome.summary));
    eprintln!("wall time {:.3} s, output in {}", outcome.wall_time, outcome.out_dir.display());
    Ok(outcome.status.code())
}

fn main() -> ExitCode {
    configure_threads();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => run_config(Mode::Solve, a),
        Command::Reconstruct(a) => run_config(Mode::Reconstruct, a),
        Command::Check(a) => run_config(Mode::Check, a),
        Command::Scalar(a) => run_config(Mode::Scalar, a),
        Command::Oracle(a) => parse_triple(&a.stress).and_then(|s| {
            let cfg = ProblemConfig {
                mode: Mode::Oracle,
                setting: SettingConfig { kind: a.setting, kappa_plus: a.kappa_plus, kappa_minus: a.kappa_minus, p: a.p },
                c0: None,
                domain: None,
                grid: None,
                loads: None,
                solver: None,
                output: None,
                quadruple: None,
                measures: None,
                stress: Some(s),
            };
            let v = oracle_report(&cfg, SymTensor2::plane(s[0], s[1], s[2])).map_err(|e| e.to_string())?;
            print!("{}", export::json_text(&v));
            Ok(0)
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
