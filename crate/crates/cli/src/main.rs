use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use omtrans::commands::{cmd_spectrum, cmd_steady, cmd_sweep, cmd_upb_find, cmd_validate};
use omtrans::config::{parse_backend, parse_file, Format};
use omtrans::{exit, CliError};

#[derive(Parser)]
#[command(name = "omtrans", version, about = "Photon transport in a three-cavity optomechanical chain")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides run.out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Backend (overrides run.backends).
    #[arg(long, global = true, value_enum)]
    backend: Option<BackendArg>,
    /// RNG seed for `validate` (overrides run.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps.
    #[arg(long, global = true, env = "OMTRANS_THREADS")]
    threads: Option<usize>,
    /// Output format (overrides run.formats).
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Subcommand)]
enum Command {
    /// Detuning sweep of the configured study.
    Sweep,
    /// Steady state at the configured parameters.
    Steady,
    /// Polaron spectrum against dense diagonalization.
    Spectrum,
    /// Unconventional-blockade roots in a (g, detuning) box.
    UpbFind,
    /// Seeded property suites.
    Validate,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Analytic,
    Kerr,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Svg,
}

fn run(cli: Cli) -> Result<i32, CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    let load = || -> Result<_, CliError> {
        let path = cli
            .config
            .as_ref()
            .ok_or_else(|| CliError::Usage("this subcommand needs --config PATH".into()))?;
        let mut cfg = parse_file(path)?;
        for d in &cfg.defaults {
            log::info!("default {d}");
        }
        if let Some(out) = &cli.out {
            cfg.out = out.clone();
        }
        if let Some(b) = cli.backend {
            let name = match b {
                BackendArg::Analytic => "analytic",
                BackendArg::Kerr => "kerr",
                BackendArg::Full => "full",
            };
            let backend = parse_backend(name).expect("known backend");
            let mut s = cfg.solvers[0];
            s.backend = backend;
            cfg.solvers = vec![s];
        }
        if let Some(f) = cli.format {
            cfg.formats = vec![match f {
                FormatArg::Csv => Format::Csv,
                FormatArg::Json => Format::Json,
                FormatArg::Svg => Format::Svg,
            }];
        }
        Ok(cfg)
    };
    match cli.command {
        Command::Sweep => cmd_sweep(&load()?),
        Command::Steady => cmd_steady(&load()?),
        Command::Spectrum => cmd_spectrum(&load()?),
        Command::UpbFind => cmd_upb_find(&load()?),
        Command::Validate => {
            let seed = match (cli.seed, &cli.config) {
                (Some(s), _) => s,
                (None, Some(_)) => load()?.seed,
                (None, None) => 0,
            };
            Ok(cmd_validate(seed))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(c) => c,
        Err(e) => {
            log::error!("{e}");
            e.exit_code()
        }
    };
    debug_assert!((exit::SUCCESS..=exit::NON_CONVERGENCE).contains(&code));
    ExitCode::from(code as u8)
}
