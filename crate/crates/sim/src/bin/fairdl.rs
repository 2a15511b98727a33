use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fairdl_ledger::{dump_chain, verify_dump};
use fairdl_sim::harness::experiment::run_experiment;
use fairdl_sim::harness::report::{read_traces, reports_fairness, write_report, write_traces};
use fairdl_sim::harness::experiment::cell_fairness;
use fairdl_sim::{Config, FrameworkKind, Result, SimError};

#[derive(Parser)]
#[command(name = "fairdl", version, about = "Fair collaborative learning over a token ledger")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured (framework, seed) cell and write traces and tables.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Replace the configured seeds with this one.
        #[arg(long)]
        seed: Option<u64>,
        /// Restrict to these frameworks (comma separated).
        #[arg(long, value_delimiter = ',')]
        framework: Vec<String>,
    },
    /// Recompute fairness from stored traces.
    Fairness {
        #[arg(long)]
        trace: PathBuf,
    },
    /// Check a ledger dump written by `run`.
    VerifyChain {
        #[arg(long)]
        dump: PathBuf,
    },
    /// Regenerate the tables from stored traces.
    Report {
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the built-in desk configuration as TOML.
    DeskConfig {
        #[arg(long, default_value_t = 1)]
        setting: u8,
        #[arg(long, default_value_t = 4)]
        parties: usize,
    },
}

fn run(config: PathBuf, out: PathBuf, seed: Option<u64>, framework: Vec<String>) -> Result<()> {
    let mut cfg = Config::load(&config)?;
    if let Some(s) = seed {
        cfg.seeds = vec![s];
    }
    if !framework.is_empty() {
        let mut kinds = Vec::new();
        let mut bad = Vec::new();
        for f in &framework {
            match FrameworkKind::parse(f) {
                Some(k) => kinds.push(k),
                None => bad.push(format!("unknown framework {f:?}")),
            }
        }
        if !bad.is_empty() {
            return Err(SimError::Config(bad));
        }
        cfg.frameworks = kinds;
    }
    cfg.validate()?;
    let cells = run_experiment(&cfg)?;
    std::fs::create_dir_all(&out)?;
    std::fs::write(out.join("config.toml"), cfg.to_toml())?;
    let chains = out.join("chains");
    for c in &cells {
        if let Some(chain) = &c.chain {
            std::fs::create_dir_all(&chains)?;
            std::fs::write(chains.join(format!("{}.jsonl", c.trace.label())), dump_chain(chain))?;
        }
    }
    let traces: Vec<_> = cells.into_iter().map(|c| c.trace).collect();
    write_traces(&traces, &out)?;
    write_report(&traces, &out)?;
    println!("wrote {} cells to {}", traces.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            out,
            seed,
            framework,
        } => run(config, out, seed, framework),
        Command::Fairness { trace } => read_traces(&trace).and_then(|traces| {
            println!("framework,setting,seed,r");
            for t in traces.iter().filter(|t| reports_fairness(t.framework)) {
                println!("{},{},{},{}", t.framework, t.setting, t.seed, cell_fairness(t)?.cell());
            }
            Ok(())
        }),
        Command::VerifyChain { dump } => match std::fs::read_to_string(&dump) {
            Ok(text) if verify_dump(&text) => {
                println!("valid: {}", dump.display());
                Ok(())
            }
            Ok(_) => {
                eprintln!("invalid: {}", dump.display());
                return ExitCode::FAILURE;
            }
            Err(e) => Err(e.into()),
        },
        Command::Report { traces, out } => read_traces(&traces).and_then(|t| write_report(&t, &out)),
        Command::DeskConfig { setting, parties } => {
            print!("{}", Config::desk(setting, parties).to_toml());
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
