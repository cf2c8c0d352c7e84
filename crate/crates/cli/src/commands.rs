//! Subcommand implementations.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use qtrail_core::plan::{execute_plan, parse_plan};
use qtrail_core::store::{read_events_csv, write_relation_csv, LoadOptions, StorageScheme};
use qtrail_core::text::serialize_trail;
use qtrail_core::value::Value;
use qtrail_core::{EngineConfig, Relation};

use crate::bench;
use crate::catalog_io::{validate_table_name, CatalogDir};
use crate::{Cli, CliError, Command, OutputFormat, TypeList};

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let config = cli.engine_config()?;
    let dir = CatalogDir::new(&cli.catalog);
    match &cli.command {
        Command::Load {
            file,
            table,
            scheme,
            id_column,
            default_score,
            default_timestamp,
            types,
            replace,
        } => cmd_load(
            &dir,
            &config,
            file,
            table,
            *scheme,
            id_column.as_deref(),
            *default_score,
            *default_timestamp,
            types.as_ref(),
            *replace,
        ),
        Command::Events { file } => cmd_events(&dir, &config, file),
        Command::Query { plan } => cmd_query(&dir, &config, plan, cli.format),
        Command::Report => cmd_report(&dir, &config),
        Command::Bench {
            seed,
            tuples,
            groups,
            trail_len,
            minimal,
        } => bench::run(
            &config,
            bench::Params {
                seed: *seed,
                tuples: *tuples,
                groups: *groups,
                trail_len: *trail_len,
                minimal: *minimal,
            },
        ),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_load(
    dir: &CatalogDir,
    config: &EngineConfig,
    file: &Path,
    table: &str,
    scheme: StorageScheme,
    id_column: Option<&str>,
    default_score: Option<u32>,
    default_timestamp: u64,
    types: Option<&TypeList>,
    replace: bool,
) -> Result<(), CliError> {
    validate_table_name(table)?;
    let mut catalog = dir.load(config)?;
    if replace {
        catalog.remove_table(table);
    }
    let options = LoadOptions {
        scheme: Some(scheme),
        id_column: id_column.map(str::to_owned),
        default_score,
        default_timestamp,
        types: types.map(|t| t.0.clone()).unwrap_or_default(),
    };
    let count = catalog.load_csv(file, table, &options, config)?;
    dir.save(&catalog)?;
    println!("loaded {count} tuples into {table}");
    Ok(())
}

fn cmd_events(dir: &CatalogDir, config: &EngineConfig, file: &Path) -> Result<(), CliError> {
    let events = read_events_csv(file)?;
    let mut catalog = dir.load(config)?;
    let outcome = catalog.apply_events(&events, config);
    dir.save(&catalog)?;
    for rejection in &outcome.rejections {
        eprintln!("rejected[{}]: {}", rejection.index, rejection.reason);
    }
    println!(
        "applied {}, rejected {}",
        outcome.applied,
        outcome.rejections.len()
    );
    Ok(())
}

fn cmd_query(
    dir: &CatalogDir,
    config: &EngineConfig,
    plan_path: &Path,
    format: OutputFormat,
) -> Result<(), CliError> {
    let text = fs::read_to_string(plan_path)?;
    let plan = parse_plan(&text)?;
    let catalog = dir.load(config)?;
    let (rel, metrics) = execute_plan(&plan, &catalog, config)?;
    match format {
        OutputFormat::Csv => {
            let stdout = io::stdout();
            write_relation_csv(&rel, stdout.lock())?;
        }
        OutputFormat::Pretty => print_pretty(&rel)?,
    }
    eprintln!(
        "metrics: buffer_clean_calls={} spill_count={} max_buffered_transitions={}",
        metrics.buffer_clean_calls, metrics.spill_count, metrics.max_buffered_transitions
    );
    Ok(())
}

fn print_pretty(rel: &Relation) -> Result<(), CliError> {
    let mut headers: Vec<String> = rel
        .schema()
        .columns()
        .iter()
        .map(|c| c.name.clone())
        .collect();
    headers.push("__qtrail".into());
    let rows: Vec<Vec<String>> = rel
        .tuples()
        .iter()
        .map(|t| {
            let mut row: Vec<String> = t.values.iter().map(Value::render).collect();
            row.push(serialize_trail(&t.trail));
            row
        })
        .collect();
    let mut widths: Vec<usize> = headers.iter().map(String::len).collect();
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let write_row = |out: &mut dyn Write, cells: &[String]| -> io::Result<()> {
        let line: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        writeln!(out, "{}", line.join("  "))
    };
    write_row(&mut out, &headers)?;
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    writeln!(out, "{}", rule.join("  "))?;
    for row in &rows {
        write_row(&mut out, row)?;
    }
    writeln!(out, "({} rows)", rows.len())?;
    Ok(())
}

fn cmd_report(dir: &CatalogDir, config: &EngineConfig) -> Result<(), CliError> {
    let catalog = dir.load(config)?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    writeln!(
        out,
        "table,scheme,tuples,transitions,data_bytes,trail_bytes,overhead_ratio"
    )?;
    for r in catalog.storage_report() {
        writeln!(
            out,
            "{},{},{},{},{},{},{:.6}",
            r.table,
            r.scheme.as_str(),
            r.tuples,
            r.transitions,
            r.data_bytes,
            r.trail_bytes,
            r.overhead_ratio
        )?;
    }
    Ok(())
}
