use std::path::PathBuf;
use std::process::ExitCode;

use bregman_pnp::harness::{run_experiment, ExperimentConfig, Task, KEYS};
use bregman_pnp::Error;
use clap::{Arg, ArgAction, ArgMatches, Command};

const TASKS: [Task; 4] = [Task::Train, Task::Denoise, Task::Deblur, Task::SampleNoise];

fn flag(key: &str) -> String {
    key.replace('_', "-")
}

fn task_command(task: Task) -> Command {
    let about = match task {
        Task::Train => "Train a denoiser on a directory of images",
        Task::Denoise => "Add noise to an image and denoise it",
        Task::Deblur => "Blur an image, add Poisson noise and restore it",
        Task::SampleNoise => "Add noise matched to a geometry to an image",
    };
    let mut cmd = Command::new(task.name()).about(about).arg(
        Arg::new("config")
            .long("config")
            .value_name("FILE")
            .value_parser(clap::value_parser!(PathBuf))
            .help("key=value file; flags override its entries"),
    );
    for (key, default) in KEYS.iter().filter(|(k, _)| *k != "task") {
        let help = if default.is_empty() { String::new() } else { format!("[default: {default}]") };
        cmd = cmd.arg(Arg::new(*key).long(flag(key)).value_name("VALUE").action(ArgAction::Set).help(help));
    }
    cmd
}

fn cli() -> Command {
    Command::new("bpnp")
        .about("Bregman plug-and-play restoration for Poisson inverse problems")
        .subcommand_required(true)
        .subcommands(TASKS.map(task_command))
}

fn build_config(task: Task, m: &ArgMatches) -> Result<ExperimentConfig, Error> {
    let mut config = match m.get_one::<PathBuf>("config") {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    config.set("task", task.name())?;
    for (key, _) in KEYS.iter().filter(|(k, _)| *k != "task") {
        if let Some(v) = m.get_one::<String>(key) {
            config.set(key, v)?;
        }
    }
    Ok(config)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let matches = cli().get_matches();
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let task = Task::parse(name).expect("subcommands mirror tasks");
    let result = build_config(task, sub).and_then(|c| run_experiment(&c));
    match result {
        Ok(report) => {
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            for (k, v) in &report.metrics {
                println!("{k}={v}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
