//! Command-line front end: load data, replay quality events, execute JSON
//! plans, and emit reports and bench data.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 internal invariant
//! violation. Every failure prints a single `error: ...` line to stderr.

mod bench;
mod catalog_io;
mod commands;

use std::collections::HashMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use qtrail_core::store::StorageScheme;
use qtrail_core::value::ColumnType;
use qtrail_core::EngineConfig;

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_INTERNAL: u8 = 3;

/// Error with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_DATA,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INTERNAL,
            message: message.into(),
        }
    }
}

impl From<qtrail_core::PlanError> for CliError {
    fn from(e: qtrail_core::PlanError) -> Self {
        if e.is_internal() {
            CliError::internal(e.to_string())
        } else {
            CliError::data(e.to_string())
        }
    }
}

impl From<qtrail_core::StoreError> for CliError {
    fn from(e: qtrail_core::StoreError) -> Self {
        CliError::data(e.to_string())
    }
}

impl From<qtrail_core::TrailError> for CliError {
    fn from(e: qtrail_core::TrailError) -> Self {
        CliError::data(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::data(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::data(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Pretty,
}

#[derive(Debug, Clone, Copy)]
pub struct Limit(pub Option<u64>);

fn parse_limit(s: &str) -> Result<Limit, String> {
    if s == "unlimited" {
        return Ok(Limit(None));
    }
    s.parse::<u64>()
        .map(|n| Limit(Some(n)))
        .map_err(|_| format!("expected a number or 'unlimited', got '{s}'"))
}

fn parse_scheme(s: &str) -> Result<StorageScheme, String> {
    StorageScheme::parse(s).ok_or_else(|| format!("expected 'inline' or 'off-table', got '{s}'"))
}

#[derive(Debug, Clone)]
pub struct TypeList(pub HashMap<String, ColumnType>);

fn parse_types(s: &str) -> Result<TypeList, String> {
    let mut map = HashMap::new();
    for part in s.split(',') {
        let (col, ty) = part
            .split_once('=')
            .ok_or_else(|| format!("expected col=type, got '{part}'"))?;
        let ty = match ty {
            "int" => ColumnType::Int,
            "real" => ColumnType::Real,
            "text" => ColumnType::Text,
            other => return Err(format!("unknown type '{other}' (int, real, text)")),
        };
        map.insert(col.to_string(), ty);
    }
    Ok(TypeList(map))
}

#[derive(Debug, Parser)]
#[command(name = "qtrail", version, about = "Relational queries over quality-annotated tuples")]
pub struct Cli {
    /// Catalog directory.
    #[arg(long, global = true, default_value = "qtrail-catalog")]
    pub catalog: PathBuf,

    /// Upper bound of the quality score range.
    #[arg(long, global = true, default_value_t = 10)]
    pub max_quality: u32,

    /// Keep only the most recent N transitions per trail.
    #[arg(long, global = true, default_value = "unlimited", value_parser = parse_limit)]
    pub trail_limit: Limit,

    /// Grouping buffer budget in transitions.
    #[arg(long, global = true, default_value = "unlimited", value_parser = parse_limit)]
    pub buffer_limit: Limit,

    /// Disable BufferClean (spill directly on buffer pressure).
    #[arg(long, global = true)]
    pub no_buffer_clean: bool,

    /// Result output format.
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a CSV file (optional __qtrail column) into a new table.
    Load {
        file: PathBuf,
        #[arg(long)]
        table: String,
        #[arg(long, default_value = "inline", value_parser = parse_scheme)]
        scheme: StorageScheme,
        /// Unique tuple-id column (required for off-table tables and for
        /// event replay).
        #[arg(long)]
        id_column: Option<String>,
        /// Initial score for rows without a trail (default: max quality).
        #[arg(long)]
        default_score: Option<u32>,
        /// Timestamp of that initial transition.
        #[arg(long, default_value_t = 0)]
        default_timestamp: u64,
        /// Explicit column types, e.g. id=int,name=text.
        #[arg(long, value_parser = parse_types)]
        types: Option<TypeList>,
        /// Drop an existing table of the same name first.
        #[arg(long)]
        replace: bool,
    },
    /// Replay a quality-event CSV (table,tuple_id,action,score,timestamp,event).
    Events { file: PathBuf },
    /// Execute a JSON plan file and print the result rows.
    Query { plan: PathBuf },
    /// Print the per-table storage report as CSV.
    Report,
    /// Generate synthetic data and emit a propagation-overhead report.
    Bench {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 2000)]
        tuples: usize,
        #[arg(long, default_value_t = 20)]
        groups: i64,
        /// Maximum generated trail length.
        #[arg(long, default_value_t = 6)]
        trail_len: usize,
        /// Generate minimal transitions (no triggering-event text).
        #[arg(long)]
        minimal: bool,
    },
}

impl Cli {
    pub fn engine_config(&self) -> Result<EngineConfig, CliError> {
        let config = EngineConfig {
            max_quality: self.max_quality,
            trail_limit: self.trail_limit.0,
            buffer_limit: self.buffer_limit.0,
            buffer_clean_enabled: !self.no_buffer_clean,
        };
        config
            .validate()
            .map_err(|e| CliError::usage(e.to_string()))?;
        Ok(config)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if e.exit_code() == 0 {
                // --help / --version go to stdout and exit 0.
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let first = e.to_string();
            let line = first.lines().next().unwrap_or("invalid usage");
            let line = line.strip_prefix("error: ").unwrap_or(line);
            eprintln!("error: {line}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message.replace('\n', " "));
            ExitCode::from(e.code)
        }
    }
}
