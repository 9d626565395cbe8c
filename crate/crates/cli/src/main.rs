//! `ggr`: command-line driver for the genotype-guided radiomics pipeline.

mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    }))
    .init();
    let result = match &cli.command {
        Command::Synth(a) => commands::synth(&cli.global, a),
        Command::Preprocess(a) => commands::preprocess(&cli.global, a),
        Command::ExtractFeatures(a) => commands::extract_features(&cli.global, a),
        Command::Select(a) => commands::select(&cli.global, a),
        Command::TrainGgr(a) => commands::train_ggr(&cli.global, a),
        Command::Predict(a) => commands::predict(&cli.global, a),
        Command::Evaluate(a) => commands::evaluate(&cli.global, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace(['\n', '\r'], " ");
            eprintln!("error: kind={} msg={msg}", e.kind());
            ExitCode::from(1)
        }
    }
}
