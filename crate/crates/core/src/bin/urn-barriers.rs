use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use urn_barriers::cli::{error_json, execute, Command, Invocation, Overrides};

#[derive(Parser)]
#[command(name = "urn-barriers", version, about = "Randomly reinforced urns with barriers")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate one path and write path.csv.
    Simulate(Common),
    /// Simulate one path and write its decomposition to series.csv.
    Decompose(Common),
    /// Exact law of (Z_N, S_N) by enumeration (small N only).
    Enumerate(Common),
    /// Run a statistical suite: convergence, sn, polya, clt, barrier, atom, cn, conjecture or all.
    Suite {
        name: Option<String>,
        #[arg(long = "suite")]
        suite_flag: Option<String>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    continuations: Option<usize>,
    /// Output directory; without it results go to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, env = "URN_THREADS")]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common, suite) = match cli.command {
        Cmd::Simulate(c) => (Command::Simulate, c, None),
        Cmd::Decompose(c) => (Command::Decompose, c, None),
        Cmd::Enumerate(c) => (Command::Enumerate, c, None),
        Cmd::Suite {
            name,
            suite_flag,
            common,
        } => (Command::Suite, common, suite_flag.or(name)),
    };
    if let Some(t) = common.threads {
        // a second initialisation can only fail if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let inv = Invocation {
        command,
        config_path: common.config,
        overrides: Overrides {
            seed: common.seed,
            horizon: common.horizon,
            paths: common.paths,
            continuations: common.continuations,
        },
        out: common.out,
        suite,
    };
    let mut stdout = std::io::stdout().lock();
    match execute(&inv, &mut stdout) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::from(2)
        }
    }
}
