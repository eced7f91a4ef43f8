use std::process::ExitCode;

use clap::Parser;

mod artifacts;
mod check;
mod cli;
mod describe;
mod error;
mod generate;
mod map;
mod train;

use artifacts::Context;
use cli::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let argv = std::env::args().skip(1).collect();
    let mut ctx = Context::new(cli.out_dir.clone(), cli.seed, cli.grid, argv);
    let result = match &cli.command {
        Command::Generate(a) => generate::run(&mut ctx, a),
        Command::Train(a) => train::run(&mut ctx, a),
        Command::Map(a) => map::run(&mut ctx, a),
        Command::Describe(a) => describe::run(&mut ctx, a),
        Command::GradCheck(a) => check::grad_check(&mut ctx, a),
        Command::Eval(a) => check::eval(&mut ctx, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
