//! Typed, immutable, columnar customer table.
//!
//! A table is loaded once from a CSV file plus a JSON schema sidecar and is
//! never mutated afterwards. Filtering produces subset tables that share the
//! loaded column data and only carry the selected row positions, so subsets
//! are cheap and always preserve the original relative row order.

use std::collections::{HashMap, HashSet};
use std::fmt::{self, Write as _};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of distinct sample values kept per column for the planner metadata.
pub const SAMPLE_VALUES: usize = 5;

const DEFAULT_LIST_DELIMITER: &str = ";";

#[derive(Debug, Error)]
pub enum TableError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid schema sidecar: {0}")]
    Sidecar(String),
    #[error("column `{0}` is declared in the schema but missing from the csv header")]
    MissingColumn(String),
    #[error("csv column `{0}` is not declared in the schema")]
    UnknownColumn(String),
    #[error("cannot parse {raw:?} as {ctype} at row {row}, column `{column}`")]
    Parse {
        row: usize,
        column: String,
        raw: String,
        ctype: ColumnType,
    },
    #[error("duplicate customer id `{0}`")]
    DuplicateId(String),
    #[error("missing customer id at row {0}")]
    MissingId(usize),
    #[error("column `{0}` declared more than once")]
    DuplicateColumn(String),
    #[error("column `{column}` has {actual} values, expected {expected}")]
    Length {
        column: String,
        expected: usize,
        actual: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnType {
    Text,
    Number,
    Boolean,
    Date,
    TextList,
}

impl ColumnType {
    pub fn as_str(self) -> &'static str {
        match self {
            ColumnType::Text => "text",
            ColumnType::Number => "number",
            ColumnType::Boolean => "boolean",
            ColumnType::Date => "date",
            ColumnType::TextList => "text_list",
        }
    }
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    pub ctype: ColumnType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    /// Up to [`SAMPLE_VALUES`] distinct values, verbatim, in first-seen order.
    #[serde(default)]
    pub sample_values: Vec<String>,
    #[serde(default = "default_delimiter")]
    pub list_delimiter: String,
}

fn default_delimiter() -> String {
    DEFAULT_LIST_DELIMITER.to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub id_column: String,
    pub columns: Vec<ColumnMeta>,
}

impl Schema {
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Option<&ColumnMeta> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }
}

/// On-disk schema sidecar: `{"id_column": .., "columns": [{"name", "type", ..}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaSidecar {
    pub id_column: String,
    pub columns: Vec<ColumnSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub ctype: ColumnType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub list_delimiter: Option<String>,
}

impl SchemaSidecar {
    pub fn from_path(path: &Path) -> Result<Self, TableError> {
        let text = std::fs::read_to_string(path).map_err(|source| TableError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| TableError::Sidecar(e.to_string()))
    }
}

/// A single typed cell value.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Text(String),
    Number(f64),
    Boolean(bool),
    Date(NaiveDate),
    TextList(Vec<String>),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Text(s) => f.write_str(s),
            Value::Number(n) => write!(f, "{n}"),
            Value::Boolean(b) => write!(f, "{b}"),
            Value::Date(d) => write!(f, "{}", d.format("%Y-%m-%d")),
            Value::TextList(items) => f.write_str(&items.join(DEFAULT_LIST_DELIMITER)),
        }
    }
}

impl Value {
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Value::Text(s) => serde_json::Value::String(s.clone()),
            Value::Number(n) => serde_json::Number::from_f64(*n)
                .map(serde_json::Value::Number)
                .unwrap_or(serde_json::Value::Null),
            Value::Boolean(b) => serde_json::Value::Bool(*b),
            Value::Date(d) => serde_json::Value::String(d.format("%Y-%m-%d").to_string()),
            Value::TextList(items) => serde_json::Value::Array(
                items.iter().cloned().map(serde_json::Value::String).collect(),
            ),
        }
    }
}

/// Column storage; `None` is a null cell.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Text(Vec<Option<String>>),
    Number(Vec<Option<f64>>),
    Boolean(Vec<Option<bool>>),
    Date(Vec<Option<NaiveDate>>),
    TextList(Vec<Option<Vec<String>>>),
}

impl ColumnData {
    fn empty(ctype: ColumnType) -> Self {
        match ctype {
            ColumnType::Text => ColumnData::Text(Vec::new()),
            ColumnType::Number => ColumnData::Number(Vec::new()),
            ColumnType::Boolean => ColumnData::Boolean(Vec::new()),
            ColumnType::Date => ColumnData::Date(Vec::new()),
            ColumnType::TextList => ColumnData::TextList(Vec::new()),
        }
    }

    pub fn ctype(&self) -> ColumnType {
        match self {
            ColumnData::Text(_) => ColumnType::Text,
            ColumnData::Number(_) => ColumnType::Number,
            ColumnData::Boolean(_) => ColumnType::Boolean,
            ColumnData::Date(_) => ColumnType::Date,
            ColumnData::TextList(_) => ColumnType::TextList,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ColumnData::Text(v) => v.len(),
            ColumnData::Number(v) => v.len(),
            ColumnData::Boolean(v) => v.len(),
            ColumnData::Date(v) => v.len(),
            ColumnData::TextList(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, row: usize) -> Option<Value> {
        match self {
            ColumnData::Text(v) => v[row].clone().map(Value::Text),
            ColumnData::Number(v) => v[row].map(Value::Number),
            ColumnData::Boolean(v) => v[row].map(Value::Boolean),
            ColumnData::Date(v) => v[row].map(Value::Date),
            ColumnData::TextList(v) => v[row].clone().map(Value::TextList),
        }
    }

    fn push(&mut self, value: Option<Value>) -> Result<(), ColumnType> {
        match (self, value) {
            (ColumnData::Text(v), None) => v.push(None),
            (ColumnData::Number(v), None) => v.push(None),
            (ColumnData::Boolean(v), None) => v.push(None),
            (ColumnData::Date(v), None) => v.push(None),
            (ColumnData::TextList(v), None) => v.push(None),
            (ColumnData::Text(v), Some(Value::Text(s))) => v.push(Some(s)),
            (ColumnData::Number(v), Some(Value::Number(n))) => v.push(Some(n)),
            (ColumnData::Boolean(v), Some(Value::Boolean(b))) => v.push(Some(b)),
            (ColumnData::Date(v), Some(Value::Date(d))) => v.push(Some(d)),
            (ColumnData::TextList(v), Some(Value::TextList(l))) => v.push(Some(l)),
            (col, Some(_)) => return Err(col.ctype()),
        }
        Ok(())
    }

    fn render(&self, row: usize, delimiter: &str) -> String {
        match self {
            ColumnData::TextList(v) => v[row]
                .as_ref()
                .map(|items| items.join(delimiter))
                .unwrap_or_default(),
            other => other.get(row).map(|v| v.to_string()).unwrap_or_default(),
        }
    }

    /// First `limit` distinct non-null values in row order. List columns
    /// contribute their individual elements.
    fn samples(&self, limit: usize) -> Vec<String> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        let mut offer = |s: String, out: &mut Vec<String>| {
            if out.len() < limit && seen.insert(s.clone()) {
                out.push(s);
            }
        };
        for row in 0..self.len() {
            if out.len() >= limit {
                break;
            }
            match self {
                ColumnData::TextList(v) => {
                    if let Some(items) = &v[row] {
                        for item in items {
                            offer(item.clone(), &mut out);
                        }
                    }
                }
                other => {
                    if let Some(value) = other.get(row) {
                        offer(value.to_string(), &mut out);
                    }
                }
            }
        }
        out
    }
}

/// Parse one raw CSV cell into a typed value. Empty cells are nulls.
pub fn parse_cell(raw: &str, ctype: ColumnType, delimiter: &str) -> Result<Option<Value>, ()> {
    if raw.trim().is_empty() {
        return Ok(None);
    }
    let value = match ctype {
        ColumnType::Text => Value::Text(raw.to_string()),
        ColumnType::Number => {
            let n: f64 = raw.trim().parse().map_err(|_| ())?;
            if !n.is_finite() {
                return Err(());
            }
            Value::Number(n)
        }
        ColumnType::Boolean => match raw.trim().to_ascii_lowercase().as_str() {
            "true" | "t" | "yes" | "y" | "1" => Value::Boolean(true),
            "false" | "f" | "no" | "n" | "0" => Value::Boolean(false),
            _ => return Err(()),
        },
        ColumnType::Date => {
            Value::Date(NaiveDate::parse_from_str(raw.trim(), "%Y-%m-%d").map_err(|_| ())?)
        }
        ColumnType::TextList => Value::TextList(
            raw.split(delimiter)
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect(),
        ),
    };
    Ok(Some(value))
}

#[derive(Debug)]
struct TableData {
    schema: Schema,
    id_index: usize,
    columns: Vec<ColumnData>,
    ids: Vec<String>,
}

/// Immutable customer table, or a row subset of one.
#[derive(Debug, Clone)]
pub struct CustomerTable {
    data: Arc<TableData>,
    rows: Arc<Vec<u32>>,
}

impl CustomerTable {
    /// Load a table from a CSV file and its JSON schema sidecar.
    pub fn load(csv_path: &Path, schema_sidecar: &Path) -> Result<Self, TableError> {
        let sidecar = SchemaSidecar::from_path(schema_sidecar)?;
        let file = File::open(csv_path).map_err(|source| TableError::Io {
            path: csv_path.display().to_string(),
            source,
        })?;
        Self::from_reader(file, &sidecar)
    }

    pub fn from_reader<R: Read>(reader: R, sidecar: &SchemaSidecar) -> Result<Self, TableError> {
        let mut builder = TableBuilder::new(sidecar)?;
        let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = csv.headers()?.clone();

        let mut positions = vec![usize::MAX; builder.schema.columns.len()];
        let mut seen = HashSet::new();
        for (pos, name) in headers.iter().enumerate() {
            let name = name.trim();
            let idx = builder
                .schema
                .index_of(name)
                .ok_or_else(|| TableError::UnknownColumn(name.to_string()))?;
            if !seen.insert(idx) {
                return Err(TableError::DuplicateColumn(name.to_string()));
            }
            positions[idx] = pos;
        }
        if let Some(missing) = positions.iter().position(|p| *p == usize::MAX) {
            return Err(TableError::MissingColumn(
                builder.schema.columns[missing].name.clone(),
            ));
        }

        for (i, record) in csv.records().enumerate() {
            let record = record?;
            let row = i + 1;
            let mut cells = Vec::with_capacity(positions.len());
            for (idx, pos) in positions.iter().enumerate() {
                let meta = &builder.schema.columns[idx];
                let raw = record.get(*pos).unwrap_or("");
                let value = parse_cell(raw, meta.ctype, &meta.list_delimiter).map_err(|_| {
                    TableError::Parse {
                        row,
                        column: meta.name.clone(),
                        raw: raw.to_string(),
                        ctype: meta.ctype,
                    }
                })?;
                cells.push(value);
            }
            builder.push_row(cells)?;
        }
        builder.finish()
    }

    pub fn schema(&self) -> &Schema {
        &self.data.schema
    }

    pub fn id_column(&self) -> &str {
        &self.data.schema.id_column
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Physical row indices of this (sub)table, in order.
    pub fn row_indices(&self) -> &[u32] {
        &self.rows
    }

    /// Number of rows in the underlying loaded table.
    pub fn pool_size(&self) -> usize {
        self.data.ids.len()
    }

    pub fn column_data(&self, idx: usize) -> &ColumnData {
        &self.data.columns[idx]
    }

    pub fn id_at(&self, physical_row: u32) -> &str {
        &self.data.ids[physical_row as usize]
    }

    /// Customer ids in stable row order.
    pub fn audience_ids(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| self.data.ids[*r as usize].clone())
            .collect()
    }

    pub fn value(&self, physical_row: u32, column: usize) -> Option<Value> {
        self.data.columns[column].get(physical_row as usize)
    }

    /// Subset sharing this table's data. `rows` must be physical indices.
    pub fn with_rows(&self, rows: Vec<u32>) -> Self {
        debug_assert!(rows.iter().all(|r| (*r as usize) < self.data.ids.len()));
        CustomerTable {
            data: Arc::clone(&self.data),
            rows: Arc::new(rows),
        }
    }

    /// The full loaded table this subset was derived from.
    pub fn full_pool(&self) -> Self {
        CustomerTable {
            data: Arc::clone(&self.data),
            rows: Arc::new((0..self.data.ids.len() as u32).collect()),
        }
    }

    /// Select the rows whose ids are in `ids`, preserving table order.
    pub fn select_ids(&self, ids: &HashSet<String>) -> Self {
        let rows = self
            .rows
            .iter()
            .copied()
            .filter(|r| ids.contains(&self.data.ids[*r as usize]))
            .collect();
        self.with_rows(rows)
    }

    pub fn row_json(&self, physical_row: u32) -> serde_json::Map<String, serde_json::Value> {
        let mut map = serde_json::Map::new();
        for (idx, meta) in self.data.schema.columns.iter().enumerate() {
            let v = self
                .value(physical_row, idx)
                .map(|v| v.to_json())
                .unwrap_or(serde_json::Value::Null);
            map.insert(meta.name.clone(), v);
        }
        map
    }

    /// Write this (sub)table as CSV with a header row.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), TableError> {
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record(self.data.schema.columns.iter().map(|c| c.name.as_str()))?;
        for row in self.rows.iter() {
            let cells = self
                .data
                .columns
                .iter()
                .zip(&self.data.schema.columns)
                .map(|(col, meta)| col.render(*row as usize, &meta.list_delimiter));
            csv.write_record(cells)?;
        }
        csv.flush().map_err(|source| TableError::Io {
            path: "<csv writer>".into(),
            source,
        })?;
        Ok(())
    }

    /// One line per column: name, type, sample values and the optional description.
    pub fn metadata_summary(&self) -> String {
        let mut out = String::new();
        for meta in &self.data.schema.columns {
            let _ = write!(
                out,
                "- {} ({}): sample values [{}]",
                meta.name,
                meta.ctype,
                meta.sample_values
                    .iter()
                    .map(|s| format!("{s:?}"))
                    .collect::<Vec<_>>()
                    .join(", ")
            );
            if let Some(desc) = &meta.description {
                let _ = write!(out, "; {desc}");
            }
            out.push('\n');
        }
        out
    }
}

/// Incremental row-wise construction of a [`CustomerTable`].
pub struct TableBuilder {
    schema: Schema,
    id_index: usize,
    columns: Vec<ColumnData>,
    ids: Vec<String>,
    id_set: HashSet<String>,
}

impl TableBuilder {
    pub fn new(sidecar: &SchemaSidecar) -> Result<Self, TableError> {
        let mut names = HashMap::new();
        let mut columns = Vec::with_capacity(sidecar.columns.len());
        for (i, spec) in sidecar.columns.iter().enumerate() {
            if names.insert(spec.name.clone(), i).is_some() {
                return Err(TableError::DuplicateColumn(spec.name.clone()));
            }
            if let Some(d) = &spec.list_delimiter {
                if d.is_empty() {
                    return Err(TableError::Sidecar(format!(
                        "empty list_delimiter for column `{}`",
                        spec.name
                    )));
                }
            }
            columns.push(ColumnMeta {
                name: spec.name.clone(),
                ctype: spec.ctype,
                description: spec.description.clone(),
                sample_values: Vec::new(),
                list_delimiter: spec
                    .list_delimiter
                    .clone()
                    .unwrap_or_else(default_delimiter),
            });
        }
        let id_index = *names.get(&sidecar.id_column).ok_or_else(|| {
            TableError::Sidecar(format!(
                "id_column `{}` is not a declared column",
                sidecar.id_column
            ))
        })?;
        if matches!(
            columns[id_index].ctype,
            ColumnType::TextList | ColumnType::Boolean
        ) {
            return Err(TableError::Sidecar(
                "id_column must be a text, number or date column".into(),
            ));
        }
        let data = columns.iter().map(|c| ColumnData::empty(c.ctype)).collect();
        Ok(TableBuilder {
            schema: Schema {
                id_column: sidecar.id_column.clone(),
                columns,
            },
            id_index,
            columns: data,
            ids: Vec::new(),
            id_set: HashSet::new(),
        })
    }

    /// Append one row; `cells` are in schema order.
    pub fn push_row(&mut self, cells: Vec<Option<Value>>) -> Result<(), TableError> {
        let row = self.ids.len() + 1;
        if cells.len() != self.columns.len() {
            return Err(TableError::Length {
                column: "<row>".into(),
                expected: self.columns.len(),
                actual: cells.len(),
            });
        }
        let id = cells[self.id_index]
            .as_ref()
            .map(|v| v.to_string())
            .ok_or(TableError::MissingId(row))?;
        if !self.id_set.insert(id.clone()) {
            return Err(TableError::DuplicateId(id));
        }
        for (idx, cell) in cells.into_iter().enumerate() {
            let raw = cell.as_ref().map(|v| v.to_string()).unwrap_or_default();
            self.columns[idx]
                .push(cell)
                .map_err(|ctype| TableError::Parse {
                    row,
                    column: self.schema.columns[idx].name.clone(),
                    raw,
                    ctype,
                })?;
        }
        self.ids.push(id);
        Ok(())
    }

    pub fn finish(mut self) -> Result<CustomerTable, TableError> {
        for (meta, col) in self.schema.columns.iter_mut().zip(&self.columns) {
            meta.sample_values = col.samples(SAMPLE_VALUES);
        }
        let n = self.ids.len();
        Ok(CustomerTable {
            data: Arc::new(TableData {
                schema: self.schema,
                id_index: self.id_index,
                columns: self.columns,
                ids: self.ids,
            }),
            rows: Arc::new((0..n as u32).collect()),
        })
    }
}

impl CustomerTable {
    pub fn id_column_index(&self) -> usize {
        self.data.id_index
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sidecar() -> SchemaSidecar {
        serde_json::from_str(
            r#"{"id_column": "id", "columns": [
                {"name": "id", "type": "text"},
                {"name": "state", "type": "text", "description": "two-letter mailing state"},
                {"name": "age", "type": "number"}
            ]}"#,
        )
        .unwrap()
    }

    fn load(csv: &str) -> Result<CustomerTable, TableError> {
        CustomerTable::from_reader(csv.as_bytes(), &sidecar())
    }

    #[test]
    fn loads_three_row_fixture() {
        let t = load("id,state,age\nc1,NY,25\nc2,MA,40\nc3,NY,\n").unwrap();
        assert_eq!(t.row_count(), 3);
        assert_eq!(t.schema().columns.len(), 3);
        assert_eq!(t.audience_ids(), vec!["c1", "c2", "c3"]);
        assert_eq!(t.value(2, 2), None);
        assert_eq!(t.value(0, 2), Some(Value::Number(25.0)));
    }

    #[test]
    fn header_order_may_differ_from_schema() {
        let t = load("age,id,state\n25,c1,NY\n").unwrap();
        assert_eq!(t.value(0, 1), Some(Value::Text("NY".into())));
    }

    #[test]
    fn duplicate_id_is_rejected() {
        let err = load("id,state,age\nc1,NY,25\nc1,MA,40\n").unwrap_err();
        assert!(matches!(&err, TableError::DuplicateId(id) if id == "c1"));
        assert!(err.to_string().contains("c1"));
    }

    #[test]
    fn parse_failure_reports_row_and_column() {
        let err = load("id,state,age\nc1,NY,25\nc2,MA,thirty\n").unwrap_err();
        match err {
            TableError::Parse { row, column, raw, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "age");
                assert_eq!(raw, "thirty");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_and_missing_columns() {
        assert!(matches!(
            load("id,state,age,zip\nc1,NY,25,1\n"),
            Err(TableError::UnknownColumn(c)) if c == "zip"
        ));
        assert!(matches!(
            load("id,state\nc1,NY\n"),
            Err(TableError::MissingColumn(c)) if c == "age"
        ));
    }

    #[test]
    fn missing_id_is_rejected() {
        assert!(matches!(
            load("id,state,age\n,NY,25\n"),
            Err(TableError::MissingId(1))
        ));
    }

    #[test]
    fn text_list_uses_declared_delimiter() {
        let sc: SchemaSidecar = serde_json::from_str(
            r#"{"id_column": "id", "columns": [
                {"name": "id", "type": "text"},
                {"name": "pages", "type": "text_list", "list_delimiter": "|"},
                {"name": "tags", "type": "text_list"}
            ]}"#,
        )
        .unwrap();
        let t = CustomerTable::from_reader("id,pages,tags\nc1,Sale|Home,a;b\n".as_bytes(), &sc)
            .unwrap();
        assert_eq!(
            t.value(0, 1),
            Some(Value::TextList(vec!["Sale".into(), "Home".into()]))
        );
        assert_eq!(
            t.value(0, 2),
            Some(Value::TextList(vec!["a".into(), "b".into()]))
        );
    }

    #[test]
    fn metadata_summary_lists_each_column_once() {
        let t = load("id,state,age\nc1,NY,25\nc2,MA,40\nc3,NY,31\n").unwrap();
        let summary = t.metadata_summary();
        for name in ["id", "state", "age"] {
            let hits = summary
                .lines()
                .filter(|l| l.starts_with(&format!("- {name} (")))
                .count();
            assert_eq!(hits, 1, "{name}");
        }
        assert!(summary.contains("two-letter mailing state"));
        assert!(summary.contains(r#"["NY", "MA"]"#));
        assert_eq!(summary, t.metadata_summary());
    }

    #[test]
    fn empty_table_summary_has_empty_samples() {
        let t = load("id,state,age\n").unwrap();
        assert_eq!(t.row_count(), 0);
        assert!(t.audience_ids().is_empty());
        let summary = t.metadata_summary();
        assert_eq!(summary.lines().count(), 3);
        assert!(summary.contains("- age (number): sample values []"));
    }

    #[test]
    fn samples_cap_at_five_distinct() {
        let csv = (0..10).fold(String::from("id,state,age\n"), |mut s, i| {
            s.push_str(&format!("c{i},S{},{}\n", i % 7, i));
            s
        });
        let t = load(&csv).unwrap();
        assert_eq!(t.schema().columns[1].sample_values.len(), SAMPLE_VALUES);
    }

    #[test]
    fn subset_preserves_relative_order() {
        let t = load("id,state,age\nc1,NY,25\nc2,MA,40\nc3,NY,31\n").unwrap();
        let ids: HashSet<String> = ["c3", "c1"].iter().map(|s| s.to_string()).collect();
        assert_eq!(t.select_ids(&ids).audience_ids(), vec!["c1", "c3"]);
    }

    #[test]
    fn csv_round_trip() {
        let t = load("id,state,age\nc1,NY,25\nc2,\"M,A\",40.5\nc3,NY,\n").unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let again = CustomerTable::from_reader(buf.as_slice(), &sidecar()).unwrap();
        assert_eq!(again.audience_ids(), t.audience_ids());
        for row in 0..3 {
            for col in 0..3 {
                assert_eq!(again.value(row, col), t.value(row, col));
            }
        }
    }
}
