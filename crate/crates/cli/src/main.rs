mod args;
mod camera;
mod commands;
mod manifest;

use args::{Cli, Command};
use clap::Parser;
use commands::{Outcome, Usage};
use foamsim::engine::EngineError;
use std::process::ExitCode;

const EXIT_FAILURE: u8 = 1;
const EXIT_PARTIAL: u8 = 2;

/// Short label for the kind of failure, printed before the message.
fn category(err: &anyhow::Error) -> &'static str {
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return "config";
        }
        if let Some(e) = cause.downcast_ref::<EngineError>() {
            return match e {
                EngineError::SramBudget { .. } => "sram-budget",
                EngineError::Config(_) => "config",
                _ => "engine",
            };
        }
        if let Some(foamsim::forge::FormatError::Io(e)) = cause.downcast_ref() {
            if e.kind() != std::io::ErrorKind::InvalidData {
                return "io";
            }
        }
        if cause.is::<foamsim::forge::FormatError>() || cause.is::<serde_json::Error>() {
            return "format";
        }
        if let Some(e) = cause.downcast_ref::<std::io::Error>() {
            return if e.kind() == std::io::ErrorKind::InvalidData {
                "format"
            } else {
                "io"
            };
        }
    }
    "error"
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_FAILURE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error[config]: thread pool: {e}");
            return ExitCode::from(EXIT_FAILURE);
        }
    }
    let result = match &cli.command {
        Command::GenScene(a) => commands::gen_scene(a),
        Command::Partition(a) => commands::partition(a),
        Command::Render(a) => commands::render(a),
        Command::RenderRef(a) => commands::render_ref(a),
        Command::Compare(a) => commands::compare(a),
        Command::Report(a) => commands::report(a),
    };
    match result {
        Ok(Outcome::Complete) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => {
            eprintln!("warning: frame incomplete (missing pixels)");
            ExitCode::from(EXIT_PARTIAL)
        }
        Err(e) => {
            eprintln!("error[{}]: {e:#}", category(&e));
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
