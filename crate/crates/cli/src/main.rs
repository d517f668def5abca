use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use slfv::error::{Error, Location};
use slfv::harness::{self, ExperimentConfig, Kind};

/// Desk-scale experiments on ancestral growth of the infinite-parent
/// spatial Lambda-Fleming-Viot process.
#[derive(Debug, Parser)]
#[command(name = "slfv", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Growth speed of the dual process, optionally swept over ellipse shapes.
    Speed(Common),
    /// Express chain speed and its coupling with the dual process.
    Express(Common),
    /// Lattice passage times against the discretised and continuous dual.
    Fpp(Common),
    /// Two-column growth: exact extrapolation, or Monte Carlo with --mc.
    Twocol {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        mc: bool,
    },
    /// Forward process from a region, with occupancy frames.
    Forward(Common),
    /// Monte Carlo check of the duality relation.
    Duality(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Recipe file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "SLFV_WORKERS")]
    workers: Option<usize>,
    /// Also write SVG plots.
    #[arg(long)]
    svg: bool,
}

fn family(kind: Kind) -> &'static str {
    match kind {
        Kind::SpeedSweep => "speed",
        Kind::Express => "express",
        Kind::FppDomination => "fpp",
        Kind::TwocolExact | Kind::TwocolMc => "twocol",
        Kind::ForwardFrames => "forward",
        Kind::Duality => "duality",
    }
}

fn resolve(command: Command) -> slfv::Result<ExperimentConfig> {
    let (kind, common, mc) = match command {
        Command::Speed(c) => (Kind::SpeedSweep, c, false),
        Command::Express(c) => (Kind::Express, c, false),
        Command::Fpp(c) => (Kind::FppDomination, c, false),
        Command::Twocol { common, mc } => (Kind::TwocolExact, common, mc),
        Command::Forward(c) => (Kind::ForwardFrames, c, false),
        Command::Duality(c) => (Kind::Duality, c, false),
    };
    let mut cfg = match &common.config {
        Some(path) => {
            let cfg = ExperimentConfig::load(path)?;
            if family(cfg.kind) != family(kind) {
                return Err(Error::Config {
                    location: Location::Field("kind".into()),
                    message: format!("recipe is `{}`, not a `{}` experiment", cfg.kind.name(), family(kind)),
                });
            }
            cfg
        }
        None => ExperimentConfig::new(kind),
    };
    if mc {
        cfg.kind = Kind::TwocolMc;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(r) = common.reps {
        cfg.reps = r;
    }
    if let Some(o) = common.out {
        cfg.out = o;
    }
    if let Some(w) = common.workers {
        cfg.workers = w;
    }
    cfg.svg |= common.svg;
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = resolve(cli.command).and_then(|cfg| harness::run(&cfg));
    match result {
        Ok(summary) => {
            for f in &summary.files {
                println!("{}", summary.config.out.join(f).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
