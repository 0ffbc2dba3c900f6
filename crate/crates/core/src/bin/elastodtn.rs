use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use elastodtn::config::{load_config, Mode};
use elastodtn::run::{configure_threads, run, RunOptions};

/// Elastic grating scattering with a truncated DtN boundary and adaptive P1 elements.
#[derive(Parser)]
#[command(version)]
struct Cli {
    /// solve, adapt or study
    mode: Mode,
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides output.directory).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Recorded in the manifest; runs are deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = configure_threads(cli.threads).and_then(|_| load_config(&cli.config)).and_then(|config| {
        if let Some(m) = config.mode.filter(|&m| m != cli.mode) {
            log::warn!("config asks for {m:?}; running {:?} as requested on the command line", cli.mode);
        }
        let options = RunOptions {
            mode: cli.mode,
            out: cli.out.clone(),
            seed: cli.seed,
        };
        run(&config, &options)
    });
    match result {
        Ok(summary) => {
            if let Some(t) = summary.termination {
                log::info!("stopped: {t}");
            }
            log::info!("wrote {} files to {}", summary.files.len(), summary.out_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
