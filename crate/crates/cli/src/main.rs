use std::path::PathBuf;
use std::process::ExitCode;

use chicgrasp_cli::commands::{
    cmd_eval, cmd_gen_demos, cmd_replay, cmd_train, EvalArgs, GenDemosArgs, ReplayArgs, TrainArgs,
};
use chicgrasp_cli::serve::{ServeOptions, TeleopServer};
use chicgrasp_cli::{CliError, Result};
use chicgrasp_core::policies::Algo;
use chicgrasp_core::Config;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "chicgrasp", version, about = "Pick-and-rehang imitation learning in simulation")]
struct Cli {
    /// TOML or JSON config; defaults to $CHICGRASP_CONFIG, then built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Record successful scripted-expert demonstrations.
    GenDemos {
        #[arg(long, default_value_t = 50)]
        n: usize,
        /// Comma-separated exemplar ids; all configured exemplars by default.
        #[arg(long, value_delimiter = ',')]
        exemplars: Vec<u8>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a policy and write `<out>`, its weight blob and a loss CSV.
    Train {
        #[arg(long)]
        algo: Algo,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Short schedule (30 epochs).
        #[arg(long)]
        fast: bool,
    },
    /// Evaluate one or more models and print the success table.
    Eval {
        #[arg(long = "model", required = true)]
        models: Vec<PathBuf>,
        /// Episodes per exemplar.
        #[arg(long, default_value_t = 50)]
        episodes: usize,
        #[arg(long, value_delimiter = ',')]
        exemplars: Vec<u8>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write `<report>.csv` and `<report>.md`.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Fail unless every model is of this algorithm.
        #[arg(long)]
        algo: Option<Algo>,
    },
    /// Replay a recorded demonstration open-loop.
    Replay {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0)]
        idx: usize,
        /// Re-place the carcass from this seed.
        #[arg(long)]
        seed_override: Option<u64>,
        /// Write an SVG trajectory plot here.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Serve teleoperation sessions over websocket.
    Serve {
        #[arg(long, default_value_t = 8765)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Advance one tick per command instead of in real time.
        #[arg(long)]
        lockstep: bool,
        /// Directory that saved demo paths are relative to.
        #[arg(long, default_value = ".")]
        data_dir: PathBuf,
    },
}

fn load_config(flag: Option<PathBuf>) -> Result<Config> {
    let path = flag.or_else(|| std::env::var_os("CHICGRASP_CONFIG").map(PathBuf::from));
    match path {
        Some(p) => Ok(Config::load(&p)?),
        None => Ok(Config::default()),
    }
}

fn or_all(cfg: &Config, ids: Vec<u8>) -> Vec<u8> {
    if ids.is_empty() {
        cfg.exemplar_ids()
    } else {
        ids
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(cli.config)?;
    match cli.cmd {
        Cmd::GenDemos {
            n,
            exemplars,
            seed,
            out,
        } => {
            let exemplars = or_all(&cfg, exemplars);
            let o = cmd_gen_demos(&cfg, &GenDemosArgs { n, exemplars, seed, out: out.clone() })?;
            println!(
                "wrote {} demos to {} ({} attempts, retention {:.3})",
                o.written,
                out.display(),
                o.attempts,
                o.retention
            );
        }
        Cmd::Train {
            algo,
            data,
            out,
            epochs,
            batch,
            lr,
            seed,
            fast,
        } => {
            let args = TrainArgs {
                algo,
                data,
                out: out.clone(),
                epochs,
                batch,
                lr,
                seed,
                fast,
            };
            let o = cmd_train(&cfg, &args)?;
            let last = o.history.last().map(|s| s.loss).unwrap_or(f64::NAN);
            println!(
                "trained {algo} for {} epochs in {:.1}s, final loss {last:.5}; model {}, losses {}",
                o.history.len(),
                o.elapsed.as_secs_f64(),
                out.display(),
                o.loss_csv.display()
            );
        }
        Cmd::Eval {
            models,
            episodes,
            exemplars,
            seed,
            report,
            algo,
        } => {
            let exemplars = or_all(&cfg, exemplars);
            let args = EvalArgs {
                models,
                episodes,
                exemplars,
                seed,
                report,
                expect_algo: algo,
            };
            let o = cmd_eval(&cfg, &args)?;
            print!("{}", o.table.to_markdown());
        }
        Cmd::Replay {
            data,
            idx,
            seed_override,
            plot,
        } => {
            let o = cmd_replay(&cfg, &ReplayArgs { data, idx, seed_override, plot: plot.clone() })?;
            for (tick, phase) in &o.timeline {
                println!("tick {tick:>5}  {}", phase.as_str());
            }
            let r = &o.report;
            println!(
                "final {}  success {}  failure_stage {}  ticks {}  cycle {:.1}s",
                o.final_phase.as_str(),
                r.success,
                r.failure_stage.as_str(),
                r.ticks_elapsed,
                r.cycle_seconds
            );
            if let Some(p) = plot {
                println!("plot written to {}", p.display());
            }
        }
        Cmd::Serve {
            port,
            host,
            lockstep,
            data_dir,
        } => {
            if !data_dir.is_dir() {
                return Err(CliError::Arg(format!("{} is not a directory", data_dir.display())));
            }
            let server = TeleopServer::bind(&format!("{host}:{port}"), cfg, ServeOptions { lockstep, data_dir })?;
            println!("teleop server listening on ws://{}", server.local_addr()?);
            server.run()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
