mod args;
mod commands;
mod manifest;

use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

use args::{Cli, Command};
use commands::{Outcome, UsageError};
use manifest::{Manifest, RunConfig};

const EXIT_USAGE: u8 = 1;
const EXIT_MODULE: u8 = 2;
const EXIT_INVARIANT: u8 = 3;

fn thread_count(flag: Option<usize>) -> anyhow::Result<Option<usize>> {
    match std::env::var("MML_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(k) if k > 0 => Ok(Some(k)),
            _ => Err(UsageError(format!("MML_THREADS must be a positive integer, got '{v}'")).into()),
        },
        Err(_) => match flag {
            Some(0) => Err(UsageError("--threads must be positive".into()).into()),
            other => Ok(other),
        },
    }
}

fn execute(cmd: &Command) -> anyhow::Result<(Outcome, usize, f64)> {
    let common = cmd.common();
    if let Some(k) = thread_count(common.threads)? {
        rayon::ThreadPoolBuilder::new().num_threads(k).build_global()?;
    }
    let threads = rayon::current_num_threads();
    std::fs::create_dir_all(&common.out)
        .map_err(|e| UsageError(format!("cannot create output directory {}: {e}", common.out.display())))?;
    let start = Instant::now();
    let out = common.out.as_path();
    let outcome = match cmd {
        Command::Eq(a) => commands::eq(a, out)?,
        Command::Ortho(a) => commands::ortho(a, out)?,
        Command::Kernel(a) => commands::kernel(a, out)?,
        Command::Gap(a) => commands::gap(a, out)?,
        Command::Sample(a) => commands::sample(a, out)?,
        Command::Universality(a) => commands::universality(a, out)?,
    };
    Ok((outcome, threads, start.elapsed().as_secs_f64()))
}

/// Writes to stdout, treating a closed pipe as success.
fn emit(lines: &[String]) -> std::io::Result<()> {
    let mut out = std::io::stdout().lock();
    for line in lines {
        match writeln!(out, "{line}") {
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => return Ok(()),
            other => other?,
        }
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    let (outcome, threads, elapsed) = execute(&cli.command)?;
    let common = cli.command.common();
    let config = RunConfig {
        command: cli.command.name().into(),
        potential: outcome.potential.clone(),
        seed: common.seed,
        params: outcome.params.clone(),
    };
    let manifest = Manifest::new(config, &common.out, &outcome.files, threads, elapsed)?;
    manifest.write(&common.out)?;
    let mut lines = Vec::new();
    if common.json {
        let mut summary = outcome.summary.clone();
        summary["config_hash"] = manifest.config_hash.clone().into();
        summary["out"] = common.out.display().to_string().into();
        lines.push(serde_json::to_string_pretty(&summary)?);
    } else if !common.quiet {
        lines.extend(outcome.text.iter().cloned());
    }
    emit(&lines)?;
    Ok(if outcome.passed { 0 } else { EXIT_INVARIANT })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if e.downcast_ref::<UsageError>().is_some() { EXIT_USAGE } else { EXIT_MODULE })
        }
    }
}
