mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use commands::Context;

fn run(cli: &Cli) -> gramhd::Result<()> {
    gramhd::io::init_threads_from_env()?;
    let ctx = Context::new(&cli.global)?;
    match &cli.command {
        Command::GenScene => commands::gen_scene(&ctx),
        Command::Grid(a) => commands::grid(&ctx, a),
        Command::Superres(a) => commands::superres(&ctx, a),
        Command::Render(a) => commands::render(&ctx, a),
        Command::Orbit(a) => commands::orbit(&ctx, a),
        Command::ExtractMesh(a) => commands::extract_mesh(&ctx, a),
        Command::Epi(a) => commands::epi(&ctx, a),
        Command::Eval(a) => commands::eval(&ctx, a),
        Command::Bench(a) => commands::bench(&ctx, a),
    }
}

fn main() -> ExitCode {
    // clap exits with 2 on usage errors and 0 for --help / --version
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[E{:02}]: {e}", e.code());
            ExitCode::from(1)
        }
    }
}
