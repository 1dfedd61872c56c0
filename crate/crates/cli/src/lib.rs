//! Batch driver: `generate`, `backtest`, `evaluate` and `date` over a
//! vintage tree, configured by a flat key-value file with overrides.

pub mod commands;
pub mod config;

use std::fmt;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{cmd_backtest, cmd_date, cmd_evaluate, cmd_generate};
pub use config::{ConfigError, ConfigFile, RunConfig, KEYS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "recession", version, about = "Real-time recession forecasting pipeline")]
pub struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override any configuration key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long, global = true, value_name = "DIR")]
    pub vintages: Option<String>,
    #[arg(long, global = true, value_name = "DIR")]
    pub output: Option<String>,
    #[arg(long, global = true, value_name = "FILE")]
    pub labels: Option<String>,
    #[arg(long, global = true, value_name = "FILE")]
    pub forecasts: Option<String>,
    #[arg(long = "as-of", global = true, value_name = "YYYY-MM")]
    pub as_of: Option<String>,
    /// Worker threads; 0 uses every available core.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Write a synthetic vintage tree with known ground truth.
    Generate,
    /// Expanding-window backtest for every configured model and horizon.
    Backtest,
    /// Score forecasts against labels; metrics table and curve files.
    Evaluate,
    /// Date the coincident factor of one vintage.
    Date,
    /// List every configuration key with its default.
    Keys,
}

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Core(recession_core::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => e.fmt(f),
            CliError::Core(e) => e.fmt(f),
        }
    }
}

impl std::error::Error for CliError {}

impl From<recession_core::Error> for CliError {
    fn from(e: recession_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_VALIDATION,
            CliError::Core(e) if e.is_validation() => EXIT_VALIDATION,
            CliError::Core(_) => EXIT_RUNTIME,
        }
    }
}

impl Cli {
    /// Flag overrides as (key, value) pairs; dedicated flags win over
    /// `--set` because they come later.
    pub fn overrides(&self) -> Result<Vec<(String, String)>, ConfigError> {
        let mut out = Vec::new();
        let mut problems = Vec::new();
        for s in &self.set {
            match s.split_once('=') {
                Some((k, v)) => out.push((k.trim().to_string(), v.trim().to_string())),
                None => problems.push(format!("--set `{s}`: expected KEY=VALUE")),
            }
        }
        let named = [
            ("vintages", &self.vintages),
            ("output", &self.output),
            ("labels", &self.labels),
            ("forecasts", &self.forecasts),
            ("as_of", &self.as_of),
        ];
        for (k, v) in named {
            if let Some(v) = v {
                out.push((k.to_string(), v.clone()));
            }
        }
        if let Some(w) = self.workers {
            out.push(("workers".to_string(), w.to_string()));
        }
        if problems.is_empty() {
            Ok(out)
        } else {
            Err(ConfigError { problems })
        }
    }

    pub fn resolve(&self, env: impl Fn(&str) -> Option<String>) -> Result<RunConfig, CliError> {
        let overrides = self.overrides().map_err(CliError::Config)?;
        let text = match &self.config {
            Some(p) => Some(std::fs::read_to_string(p).map_err(|e| {
                if e.kind() == std::io::ErrorKind::NotFound {
                    CliError::Core(recession_core::Error::NotFound(p.clone()))
                } else {
                    CliError::Core(recession_core::Error::Io {
                        path: p.clone(),
                        source: e,
                    })
                }
            })?),
            None => None,
        };
        let file = self.config.as_deref().zip(text.as_deref()).map(|(name, text)| ConfigFile { name, text });
        RunConfig::resolve(file, env, &overrides).map_err(CliError::Config)
    }
}

/// Runs `command` inside a pool capped at the configured worker count.
pub fn execute(command: Command, cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| CliError::Core(recession_core::Error::Validation(format!("worker pool: {e}"))))?;
    let result = pool.install(|| match command {
        Command::Generate => cmd_generate(cfg),
        Command::Backtest => cmd_backtest(cfg),
        Command::Evaluate => cmd_evaluate(cfg),
        Command::Date => cmd_date(cfg),
        Command::Keys => Ok(Vec::new()),
    });
    result.map_err(CliError::Core)
}

/// Text printed by `recession keys`.
pub fn key_table() -> String {
    let mut out = String::new();
    for k in KEYS {
        let env = k.env.map(|e| format!(" [env {e}]")).unwrap_or_default();
        let default = if k.default.is_empty() { "(empty)" } else { k.default };
        out.push_str(&format!("{:<16} {:<30} {}{}\n", k.name, default, k.help, env));
    }
    out
}

/// Full command-line entry point; returns the process exit code.
pub fn run<I, T>(args: I, env: impl Fn(&str) -> Option<String>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if cli.command == Command::Keys {
        print!("{}", key_table());
        return EXIT_OK;
    }
    let outcome = cli.resolve(env).and_then(|cfg| execute(cli.command, &cfg));
    match outcome {
        Ok(files) => {
            println!("wrote {} output paths", files.len());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
