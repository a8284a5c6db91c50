//! Scenario runner for the ball-bearing dynamics library.
//!
//! Exit codes: 0 when every enabled check passes, 2 when a check fails,
//! 1 on configuration or runtime errors.

mod catalog;
mod config;
mod runner;

use std::process::ExitCode;

use config::{apply_override, ConfigError, ScenarioConfig};

const USAGE: &str = "\
usage:
  bearing-dyn run <config.json> [--override key=value]... [--quiet]
  bearing-dyn list

`run` accepts a path to a JSON scenario or the name of a bundled one
(see `list`). Dotted-path overrides patch the configuration before
validation, e.g. --override integration.h=5e-4. The environment variable
BEARING_DYN_SEED overrides the configured seed.
";

fn load_config_text(target: &str) -> Result<String, ConfigError> {
    match std::fs::read_to_string(target) {
        Ok(text) => Ok(text),
        Err(io_err) => match catalog::find(target) {
            Some(s) => Ok(s.config.to_string()),
            None => Err(ConfigError::Io(format!(
                "{target}: {io_err} (and no bundled scenario has that name)"
            ))),
        },
    }
}

fn run_command(target: &str, overrides: &[String], quiet: bool) -> ExitCode {
    let outcome = (|| -> Result<runner::RunSummary, Box<dyn std::error::Error>> {
        let text = load_config_text(target)?;
        let mut root: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        for spec in overrides {
            apply_override(&mut root, spec)?;
        }
        let cfg = ScenarioConfig::from_value(&root)?;
        let seed = match std::env::var("BEARING_DYN_SEED") {
            Ok(v) => v.parse::<u64>().map_err(|_| {
                ConfigError::Override(format!("BEARING_DYN_SEED='{v}' is not a u64"))
            })?,
            Err(_) => cfg.seed,
        };
        Ok(runner::execute(&cfg, seed, quiet)?)
    })();

    match outcome {
        Ok(summary) => {
            if !quiet {
                for check in &summary.checks {
                    let verdict = if check.passed { "PASS" } else { "FAIL" };
                    println!("[{verdict}] {}: {}", check.name, check.detail);
                }
                for warning in &summary.report.warnings {
                    println!("note: {warning}");
                }
            }
            if summary.all_passed() {
                if !quiet {
                    println!("all checks passed");
                }
                ExitCode::SUCCESS
            } else {
                let failed = summary.checks.iter().filter(|c| !c.passed).count();
                println!("{failed} check(s) failed");
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut positional = Vec::new();
    let mut overrides = Vec::new();
    let mut quiet = false;

    let mut iter = args.iter().peekable();
    while let Some(arg) = iter.next() {
        match arg.as_str() {
            "--quiet" => quiet = true,
            "--override" => match iter.next() {
                Some(spec) => overrides.push(spec.clone()),
                None => {
                    eprintln!("error: --override needs a key=value argument");
                    return ExitCode::from(1);
                }
            },
            "--help" | "-h" | "help" => {
                print!("{USAGE}");
                return ExitCode::SUCCESS;
            }
            other if other.starts_with("--override=") => {
                overrides.push(other["--override=".len()..].to_string());
            }
            other if other.starts_with('-') => {
                eprintln!("error: unknown flag '{other}'");
                eprint!("{USAGE}");
                return ExitCode::from(1);
            }
            other => positional.push(other.to_string()),
        }
    }

    match positional.first().map(String::as_str) {
        Some("run") => match positional.get(1) {
            Some(target) => run_command(target, &overrides, quiet),
            None => {
                eprintln!("error: run needs a config path or scenario name");
                eprint!("{USAGE}");
                ExitCode::from(1)
            }
        },
        Some("list") => {
            print!("{}", catalog::listing());
            ExitCode::SUCCESS
        }
        _ => {
            eprint!("{USAGE}");
            ExitCode::from(1)
        }
    }
}
