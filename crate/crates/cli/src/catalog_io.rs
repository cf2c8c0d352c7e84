//! Catalog persistence.
//!
//! The catalog directory holds `catalog.json` (table definitions) plus one
//! CSV per inline table (`<table>.csv`, with the `__qtrail` column) and two
//! per off-table table: `<table>.data.csv` (data only) and
//! `<table>.qtrail.csv` (id column + `__qtrail`), mirroring a companion
//! `R-QTrail (OID, QTrail)` table.

use std::collections::HashMap;
use std::fs::{self, File};
use std::path::{Path, PathBuf};

use qtrail_core::relation::{Column, QTuple, Relation, Schema};
use qtrail_core::store::{
    parse_cell, Catalog, LoadOptions, StorageScheme, QTRAIL_COLUMN,
};
use qtrail_core::text::{parse_trail, serialize_trail};
use qtrail_core::value::{ColumnType, KeyValue, Value};
use qtrail_core::EngineConfig;
use serde_json::{json, Value as Json};

use crate::CliError;

pub struct CatalogDir {
    dir: PathBuf,
}

const META_FILE: &str = "catalog.json";

fn type_name(ty: ColumnType) -> &'static str {
    match ty {
        ColumnType::Int => "int",
        ColumnType::Real => "real",
        ColumnType::Text => "text",
    }
}

fn type_from_name(name: &str) -> Result<ColumnType, CliError> {
    match name {
        "int" => Ok(ColumnType::Int),
        "real" => Ok(ColumnType::Real),
        "text" => Ok(ColumnType::Text),
        other => Err(CliError::data(format!("catalog.json: unknown type '{other}'"))),
    }
}

pub fn validate_table_name(name: &str) -> Result<(), CliError> {
    if name.is_empty()
        || !name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
    {
        return Err(CliError::usage(format!(
            "table name '{name}' must be non-empty and use only [A-Za-z0-9_-]"
        )));
    }
    Ok(())
}

impl CatalogDir {
    pub fn new(dir: &Path) -> Self {
        CatalogDir {
            dir: dir.to_path_buf(),
        }
    }

    fn meta_path(&self) -> PathBuf {
        self.dir.join(META_FILE)
    }

    /// Loads the persisted catalog; a missing directory is an empty catalog.
    pub fn load(&self, config: &EngineConfig) -> Result<Catalog, CliError> {
        let mut catalog = Catalog::new();
        let meta_path = self.meta_path();
        if !meta_path.exists() {
            return Ok(catalog);
        }
        let meta: Json = serde_json::from_reader(File::open(&meta_path)?)
            .map_err(|e| CliError::data(format!("catalog.json: {e}")))?;
        let tables = meta
            .get("tables")
            .and_then(Json::as_array)
            .ok_or_else(|| CliError::data("catalog.json: missing \"tables\" array"))?;
        for entry in tables {
            self.load_table(entry, &mut catalog, config)?;
        }
        Ok(catalog)
    }

    fn load_table(
        &self,
        entry: &Json,
        catalog: &mut Catalog,
        config: &EngineConfig,
    ) -> Result<(), CliError> {
        let name = entry
            .get("name")
            .and_then(Json::as_str)
            .ok_or_else(|| CliError::data("catalog.json: table without a name"))?;
        let scheme = entry
            .get("scheme")
            .and_then(Json::as_str)
            .and_then(StorageScheme::parse)
            .ok_or_else(|| CliError::data(format!("catalog.json: bad scheme for '{name}'")))?;
        let id_column = entry
            .get("id_column")
            .and_then(Json::as_str)
            .map(str::to_owned);
        let columns_json = entry
            .get("columns")
            .and_then(Json::as_array)
            .ok_or_else(|| CliError::data(format!("catalog.json: '{name}' lacks columns")))?;
        let mut columns = Vec::with_capacity(columns_json.len());
        for c in columns_json {
            let cname = c
                .get("name")
                .and_then(Json::as_str)
                .ok_or_else(|| CliError::data("catalog.json: column without a name"))?;
            let ty = type_from_name(
                c.get("type")
                    .and_then(Json::as_str)
                    .ok_or_else(|| CliError::data("catalog.json: column without a type"))?,
            )?;
            columns.push(Column::new(cname, ty));
        }

        match scheme {
            StorageScheme::Inline => {
                let path = self.dir.join(format!("{name}.csv"));
                let types: HashMap<String, ColumnType> = columns
                    .iter()
                    .map(|c| (c.name.clone(), c.ty))
                    .collect();
                let options = LoadOptions {
                    scheme: Some(StorageScheme::Inline),
                    id_column,
                    types,
                    ..LoadOptions::default()
                };
                catalog.load_csv(&path, name, &options, config)?;
            }
            StorageScheme::OffTable => {
                let id_column = id_column.ok_or_else(|| {
                    CliError::data(format!("catalog.json: off-table '{name}' lacks id_column"))
                })?;
                let rel =
                    self.read_off_table(name, &columns, &id_column, config)?;
                catalog.register_relation(name, StorageScheme::OffTable, Some(&id_column), &rel)?;
            }
        }
        Ok(())
    }

    fn read_off_table(
        &self,
        name: &str,
        columns: &[Column],
        id_column: &str,
        config: &EngineConfig,
    ) -> Result<Relation, CliError> {
        let schema = Schema::new(columns.to_vec());
        let id_idx = schema
            .col_index(id_column)
            .map_err(|_| CliError::data(format!("off-table '{name}': unknown id column")))?;
        let id_ty = columns[id_idx].ty;

        // Companion trail file first: id -> trail.
        let trail_path = self.dir.join(format!("{name}.qtrail.csv"));
        let mut trails: HashMap<KeyValue, qtrail_core::QualityTrail> = HashMap::new();
        let mut reader = csv::Reader::from_path(&trail_path)
            .map_err(|e| CliError::data(format!("{}: {e}", trail_path.display())))?;
        for record in reader.records() {
            let record = record.map_err(|e| CliError::data(e.to_string()))?;
            if record.len() != 2 {
                return Err(CliError::data(format!(
                    "{}: expected 2 columns",
                    trail_path.display()
                )));
            }
            let id = parse_cell(&record[0], id_ty)
                .map_err(|e| CliError::data(format!("{}: {e}", trail_path.display())))?;
            let trail = parse_trail(&record[1], config.max_quality)
                .map_err(|e| CliError::data(format!("{}: {e}", trail_path.display())))?;
            trails.insert(KeyValue::from(&id), trail);
        }

        let data_path = self.dir.join(format!("{name}.data.csv"));
        let mut reader = csv::Reader::from_path(&data_path)
            .map_err(|e| CliError::data(format!("{}: {e}", data_path.display())))?;
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| CliError::data(e.to_string()))?
            .iter()
            .map(str::to_owned)
            .collect();
        let expected: Vec<String> = columns.iter().map(|c| c.name.clone()).collect();
        if headers != expected {
            return Err(CliError::data(format!(
                "{}: header does not match catalog.json",
                data_path.display()
            )));
        }
        let mut rel = Relation::new(schema);
        for record in reader.records() {
            let record = record.map_err(|e| CliError::data(e.to_string()))?;
            let mut values = Vec::with_capacity(columns.len());
            for (cell, col) in record.iter().zip(columns) {
                values.push(
                    parse_cell(cell, col.ty)
                        .map_err(|e| CliError::data(format!("{}: {e}", data_path.display())))?,
                );
            }
            let trail = trails
                .remove(&KeyValue::from(&values[id_idx]))
                .ok_or_else(|| {
                    CliError::data(format!(
                        "off-table '{name}': no trail for id '{}'",
                        values[id_idx].render()
                    ))
                })?;
            rel.push(QTuple::new(values, trail))
                .map_err(|e| CliError::data(e.to_string()))?;
        }
        if !trails.is_empty() {
            return Err(CliError::data(format!(
                "off-table '{name}': {} trail rows without data rows",
                trails.len()
            )));
        }
        Ok(rel)
    }

    /// Persists every table and the catalog metadata.
    pub fn save(&self, catalog: &Catalog) -> Result<(), CliError> {
        fs::create_dir_all(&self.dir)?;
        let mut tables_meta = Vec::new();
        for name in catalog.table_names() {
            let def = catalog.table(name)?.def().clone();
            let rel = catalog.relation(name)?;
            let columns: Vec<Json> = def
                .schema
                .columns()
                .iter()
                .map(|c| json!({"name": c.name, "type": type_name(c.ty)}))
                .collect();
            tables_meta.push(json!({
                "name": def.name,
                "scheme": def.scheme.as_str(),
                "id_column": def.id_column,
                "columns": columns,
            }));
            match def.scheme {
                StorageScheme::Inline => {
                    let path = self.dir.join(format!("{name}.csv"));
                    qtrail_core::store::save_relation(&rel, &path)?;
                }
                StorageScheme::OffTable => {
                    let id_column = def
                        .id_column
                        .as_deref()
                        .ok_or_else(|| CliError::internal("off-table table without id column"))?;
                    let id_idx = def
                        .schema
                        .col_index(id_column)
                        .map_err(|e| CliError::internal(e.to_string()))?;

                    let data_path = self.dir.join(format!("{name}.data.csv"));
                    let mut w = csv::Writer::from_path(&data_path)?;
                    let header: Vec<&str> =
                        def.schema.columns().iter().map(|c| c.name.as_str()).collect();
                    w.write_record(&header).map_err(csv_err)?;
                    for t in rel.tuples() {
                        let record: Vec<String> = t.values.iter().map(Value::render).collect();
                        w.write_record(&record).map_err(csv_err)?;
                    }
                    w.flush()?;

                    let trail_path = self.dir.join(format!("{name}.qtrail.csv"));
                    let mut w = csv::Writer::from_path(&trail_path)?;
                    w.write_record([id_column, QTRAIL_COLUMN]).map_err(csv_err)?;
                    for t in rel.tuples() {
                        w.write_record([
                            t.values[id_idx].render(),
                            serialize_trail(&t.trail),
                        ])
                        .map_err(csv_err)?;
                    }
                    w.flush()?;
                }
            }
        }
        let meta = json!({ "tables": tables_meta });
        fs::write(self.meta_path(), serde_json::to_string_pretty(&meta).unwrap())?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::data(e.to_string())
}
