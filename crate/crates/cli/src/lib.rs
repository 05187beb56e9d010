//! Experiment runner: scenario configs in, CSV files and a verdict report out.

pub mod config;
pub mod report;
pub mod suites;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub use config::{parse_config, parse_str, ConfigError, ScenarioConfig, Suite};
pub use report::{emit_outputs, Record, RunReport};
pub use suites::{run_scenario, Precondition};

#[derive(Parser, Debug)]
#[command(name = "fracfp", version, about = "Fractional Fokker-Planck verification runner")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run one scenario, or every scenario matched by --batch.
    Run {
        /// Scenario file (key = value lines or JSON).
        config: Option<PathBuf>,
        /// Output directory; overrides `out` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Suite to run; overrides `suite` in the config.
        #[arg(long)]
        suite: Option<String>,
        /// Glob of scenario files, run concurrently, one output directory each.
        #[arg(long)]
        batch: Option<String>,
    },
}

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Parse, run and emit one scenario; returns the exit code.
pub fn run_one(path: &Path, out: Option<&Path>, suite: Option<Suite>) -> i32 {
    let mut cfg = match parse_config(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return EXIT_USAGE;
        }
    };
    if let Some(s) = suite {
        cfg.suite = s;
        if let Err((key, msg)) = config::validate(&cfg) {
            eprintln!("config error: {}: `{key}`: {msg}", path.display());
            return EXIT_USAGE;
        }
    }
    if let Some(o) = out {
        cfg.out = o.to_path_buf();
    }
    let report = match run_scenario(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{}: aborted: {e}", cfg.name);
            return EXIT_USAGE;
        }
    };
    if let Err(e) = emit_outputs(&report, &cfg.out) {
        eprintln!("output error: {e}");
        return EXIT_USAGE;
    }
    for (suite, t) in &report.timings {
        eprintln!("{}: {suite} took {:.3} s", cfg.name, t.as_secs_f64());
    }
    let verdict = if report.passed() { "PASS" } else { "FAIL" };
    println!("{}: {verdict} ({} checks) -> {}", cfg.name, report.records.len(), cfg.out.display());
    if report.passed() {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}

pub fn main_with(args: impl IntoIterator<Item = String>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    let Command::Run { config, out, suite, batch } = cli.command;
    let suite = match suite.as_deref().map(|s| (s, Suite::parse(s))) {
        None => None,
        Some((_, Some(s))) => Some(s),
        Some((s, None)) => {
            eprintln!("unknown suite `{s}`; expected evolve, steady, rates, inequalities or all");
            return EXIT_USAGE;
        }
    };
    match (config, batch) {
        (Some(path), None) => run_one(&path, out.as_deref(), suite),
        (None, Some(pattern)) => {
            let paths: Vec<PathBuf> = match glob::glob(&pattern) {
                Ok(it) => it.filter_map(|p| p.ok()).collect(),
                Err(e) => {
                    eprintln!("bad glob `{pattern}`: {e}");
                    return EXIT_USAGE;
                }
            };
            if paths.is_empty() {
                eprintln!("no scenario matches `{pattern}`");
                return EXIT_USAGE;
            }
            let root = out.unwrap_or_else(|| PathBuf::from("out"));
            let codes: Vec<i32> = std::thread::scope(|s| {
                let handles: Vec<_> = paths
                    .iter()
                    .map(|p| {
                        let dir = root.join(p.file_stem().unwrap_or_default());
                        s.spawn(move || run_one(p, Some(&dir), suite))
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().unwrap_or(EXIT_USAGE)).collect()
            });
            codes.into_iter().max().unwrap_or(EXIT_PASS)
        }
        _ => {
            eprintln!("usage: fracfp run <config-path> [--out DIR] [--suite NAME] | fracfp run --batch GLOB [--out DIR]");
            EXIT_USAGE
        }
    }
}
