mod cli;
mod commands;
mod symbol;

use clap::Parser;
use std::time::Instant;

use cli::{Cli, Command};
use commands::{emit_error, emit_report};

/// TETRALAB_THREADS caps the rayon pool; unset means the rayon default.
fn configure_threads() {
    if let Ok(value) = std::env::var("TETRALAB_THREADS") {
        if let Ok(n) = value.trim().parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
        }
    }
}

fn main() {
    configure_threads();
    let cli = Cli::parse();
    let start = Instant::now();

    let (result, report_path) = match &cli.command {
        Command::Moments(args) => (commands::run_moments(args), args.io.report.clone()),
        Command::Basis(args) => (commands::run_basis(args), args.io.report.clone()),
        Command::Relations(args) => (commands::run_relations(args), args.io.report.clone()),
        Command::BhCheck(args) => (commands::run_bh_check(args), args.io.report.clone()),
        Command::Ladder(args) => (commands::run_ladder(args), args.io.report.clone()),
        Command::Probe(args) => (commands::run_probe(args), args.io.report.clone()),
        Command::Recover(args) => (commands::run_recover(args), args.io.report.clone()),
        Command::CoeSample(args) => (commands::run_coe_sample(args), args.report.clone()),
    };

    let code = match result {
        Ok(output) => match emit_report(&output.report, report_path.as_ref()) {
            Ok(code) => code,
            Err(err) => emit_error(&err),
        },
        Err(err) => emit_error(&err),
    };
    // Timing stays on stderr: report bytes must not depend on the clock.
    eprintln!("wall_time_ms={}", start.elapsed().as_millis());
    std::process::exit(code);
}
