use std::path::PathBuf;
use std::process::ExitCode;

use chainstory_sim::{run_simulation, write_outputs, BehaviorProfile, SimError, Target};
use clap::Parser;

#[derive(Parser)]
#[command(name = "chainstory-sim", version, about = "Seeded crowd simulator for chainstory")]
struct Args {
    #[arg(long, default_value_t = 25)]
    workers: usize,
    #[arg(long, default_value_t = 500)]
    steps: u64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// JSON behaviour profile; the built-in default when omitted.
    #[arg(long)]
    profile: Option<PathBuf>,
    /// `inproc`, or the base URL of a running service.
    #[arg(long, default_value = "inproc")]
    target: Target,
    /// Directory for events.log, summary.tsv and report.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(args: Args) -> Result<(), SimError> {
    let profile = match &args.profile {
        Some(path) => BehaviorProfile::from_file(path)?,
        None => BehaviorProfile::default(),
    };
    let run = run_simulation(args.workers, args.steps, args.seed, &profile, &args.target)?;
    let c = &run.report.counts;
    println!(
        "steps {}: {} starts, {} extends, {} branches, {} merges, {} stories, {} votes",
        args.steps, c.starts, c.extends, c.branches, c.merges, c.stories, c.votes
    );
    println!("chains created {}, implicit votes {}", c.chains_created, c.duplicates);
    print!("{}", run.report.summary.to_table());
    if let Some(dir) = &args.out {
        write_outputs(&run, dir)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("chainstory-sim: {e}");
            ExitCode::FAILURE
        }
    }
}
