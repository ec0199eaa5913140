//! Column tables on disk, as Parquet or CSV.
//!
//! A [`Table`] is a list of named, typed columns. Readers take the expected
//! schema and refuse files whose column set differs, naming what is missing
//! and what is extra.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use parquet::basic::{Compression, ConvertedType, LogicalType, Repetition, Type as PhysicalType};
use parquet::data_type::{BoolType, ByteArray, ByteArrayType, DoubleType, Int64Type};
use parquet::file::properties::WriterProperties;
use parquet::file::reader::{FileReader, SerializedFileReader};
use parquet::file::writer::SerializedFileWriter;
use parquet::record::Field as Value;
use parquet::schema::types::Type;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    /// Parquet.
    #[default]
    Columnar,
    Csv,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Columnar => "parquet",
            Format::Csv => "csv",
        }
    }
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "columnar" | "parquet" => Ok(Format::Columnar),
            "csv" => Ok(Format::Csv),
            other => Err(format!("unknown format `{other}` (expected columnar or csv)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColumnType {
    I64,
    /// Nullable integer; an empty CSV cell is null.
    OptI64,
    F64,
    Bool,
    /// UTF-8 text; never null, an empty CSV cell is the empty string.
    Str,
}

impl ColumnType {
    fn name(self) -> &'static str {
        match self {
            ColumnType::I64 => "int64",
            ColumnType::OptI64 => "optional int64",
            ColumnType::F64 => "double",
            ColumnType::Bool => "boolean",
            ColumnType::Str => "string",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ColumnSpec {
    pub name: &'static str,
    pub ty: ColumnType,
}

pub const fn col(name: &'static str, ty: ColumnType) -> ColumnSpec {
    ColumnSpec { name, ty }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Column {
    I64(Vec<i64>),
    OptI64(Vec<Option<i64>>),
    F64(Vec<f64>),
    Bool(Vec<bool>),
    Str(Vec<String>),
}

impl Column {
    fn empty(ty: ColumnType, capacity: usize) -> Self {
        match ty {
            ColumnType::I64 => Column::I64(Vec::with_capacity(capacity)),
            ColumnType::OptI64 => Column::OptI64(Vec::with_capacity(capacity)),
            ColumnType::F64 => Column::F64(Vec::with_capacity(capacity)),
            ColumnType::Bool => Column::Bool(Vec::with_capacity(capacity)),
            ColumnType::Str => Column::Str(Vec::with_capacity(capacity)),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Column::I64(v) => v.len(),
            Column::OptI64(v) => v.len(),
            Column::F64(v) => v.len(),
            Column::Bool(v) => v.len(),
            Column::Str(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn ty(&self) -> ColumnType {
        match self {
            Column::I64(_) => ColumnType::I64,
            Column::OptI64(_) => ColumnType::OptI64,
            Column::F64(_) => ColumnType::F64,
            Column::Bool(_) => ColumnType::Bool,
            Column::Str(_) => ColumnType::Str,
        }
    }

    fn cell(&self, row: usize) -> String {
        match self {
            Column::I64(v) => v[row].to_string(),
            Column::OptI64(v) => v[row].map(|x| x.to_string()).unwrap_or_default(),
            Column::F64(v) => v[row].to_string(),
            Column::Bool(v) => v[row].to_string(),
            Column::Str(v) => v[row].clone(),
        }
    }

    fn push_text(&mut self, text: &str) -> Result<(), String> {
        fn num<T: FromStr>(text: &str) -> Result<T, String> {
            text.trim().parse().map_err(|_| format!("cannot parse `{text}`"))
        }
        match self {
            Column::I64(v) => v.push(num(text)?),
            Column::OptI64(v) => v.push(if text.trim().is_empty() { None } else { Some(num(text)?) }),
            Column::F64(v) => v.push(num(text)?),
            Column::Bool(v) => v.push(match text.trim() {
                "true" | "True" | "1" => true,
                "false" | "False" | "0" => false,
                other => return Err(format!("cannot parse `{other}` as boolean")),
            }),
            Column::Str(v) => v.push(text.to_string()),
        }
        Ok(())
    }

    fn push_value(&mut self, value: &Value) -> Result<(), String> {
        match (self, value) {
            (Column::I64(v), Value::Long(x)) => v.push(*x),
            (Column::OptI64(v), Value::Long(x)) => v.push(Some(*x)),
            (Column::OptI64(v), Value::Null) => v.push(None),
            (Column::F64(v), Value::Double(x)) => v.push(*x),
            (Column::Bool(v), Value::Bool(x)) => v.push(*x),
            (Column::Str(v), Value::Str(x)) => v.push(x.clone()),
            (c, other) => return Err(format!("unexpected value {other:?} in {} column", c.ty().name())),
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: schema mismatch (missing columns: {missing:?}; extra columns: {extra:?})")]
    SchemaMismatch { path: PathBuf, missing: Vec<String>, extra: Vec<String> },
    #[error("{path}: column `{column}` has type {found}, expected {expected}")]
    ColumnType { path: PathBuf, column: String, found: String, expected: &'static str },
    #[error("{path}: row {row}, column `{column}`: {message}")]
    Cell { path: PathBuf, row: usize, column: String, message: String },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Parquet { path: PathBuf, source: parquet::errors::ParquetError },
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error("table `{0}` has columns of different lengths")]
    Ragged(String),
}

/// Named columns in schema order.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: &'static str,
    pub schema: Vec<ColumnSpec>,
    pub columns: Vec<Column>,
}

impl Table {
    pub fn new(name: &'static str, schema: &[ColumnSpec], columns: Vec<Column>) -> Result<Self, IoError> {
        let n = columns.first().map_or(0, Column::len);
        let shaped = columns.len() == schema.len()
            && columns.iter().zip(schema).all(|(c, s)| c.len() == n && c.ty() == s.ty);
        if !shaped {
            return Err(IoError::Ragged(name.to_string()));
        }
        Ok(Self { name, schema: schema.to_vec(), columns })
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Column::len)
    }

    pub fn column(&self, name: &str) -> &Column {
        let i = self.schema.iter().position(|c| c.name == name).expect("column in schema");
        &self.columns[i]
    }

    pub fn i64s(&self, name: &str) -> &[i64] {
        match self.column(name) {
            Column::I64(v) => v,
            _ => panic!("column `{name}` is not int64"),
        }
    }

    pub fn opt_i64s(&self, name: &str) -> &[Option<i64>] {
        match self.column(name) {
            Column::OptI64(v) => v,
            _ => panic!("column `{name}` is not optional int64"),
        }
    }

    pub fn f64s(&self, name: &str) -> &[f64] {
        match self.column(name) {
            Column::F64(v) => v,
            _ => panic!("column `{name}` is not double"),
        }
    }

    pub fn bools(&self, name: &str) -> &[bool] {
        match self.column(name) {
            Column::Bool(v) => v,
            _ => panic!("column `{name}` is not boolean"),
        }
    }

    pub fn strs(&self, name: &str) -> &[String] {
        match self.column(name) {
            Column::Str(v) => v,
            _ => panic!("column `{name}` is not string"),
        }
    }
}

/// Path of table `stem` inside `dir` for `format`.
pub fn table_path(dir: &Path, stem: &str, format: Format) -> PathBuf {
    dir.join(format!("{stem}.{}", format.extension()))
}

pub fn write_table(path: &Path, format: Format, table: &Table) -> Result<(), IoError> {
    match format {
        Format::Csv => write_csv(path, table),
        Format::Columnar => write_parquet(path, table),
    }
}

pub fn read_table(
    path: &Path,
    format: Format,
    name: &'static str,
    schema: &[ColumnSpec],
) -> Result<Table, IoError> {
    let columns = match format {
        Format::Csv => read_csv(path, schema)?,
        Format::Columnar => read_parquet(path, schema)?,
    };
    Table::new(name, schema, columns)
}

/// Maps file columns onto `schema`, or reports the difference by name.
fn match_columns(path: &Path, found: &[String], schema: &[ColumnSpec]) -> Result<Vec<usize>, IoError> {
    let missing: Vec<String> =
        schema.iter().filter(|s| !found.iter().any(|f| f == s.name)).map(|s| s.name.to_string()).collect();
    let extra: Vec<String> = found.iter().filter(|f| !schema.iter().any(|s| s.name == *f)).cloned().collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(IoError::SchemaMismatch { path: path.to_path_buf(), missing, extra });
    }
    Ok(schema.iter().map(|s| found.iter().position(|f| f == s.name).expect("checked above")).collect())
}

fn write_csv(path: &Path, table: &Table) -> Result<(), IoError> {
    let err = |source| IoError::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(table.schema.iter().map(|c| c.name)).map_err(err)?;
    let mut record = Vec::with_capacity(table.columns.len());
    for row in 0..table.n_rows() {
        record.clear();
        record.extend(table.columns.iter().map(|c| c.cell(row)));
        w.write_record(&record).map_err(err)?;
    }
    w.flush().map_err(|source| IoError::File { path: path.to_path_buf(), source })
}

fn read_csv(path: &Path, schema: &[ColumnSpec]) -> Result<Vec<Column>, IoError> {
    let err = |source| IoError::Csv { path: path.to_path_buf(), source };
    let mut r = csv::Reader::from_path(path).map_err(err)?;
    let header: Vec<String> = r.headers().map_err(err)?.iter().map(str::to_string).collect();
    let positions = match_columns(path, &header, schema)?;
    let mut columns: Vec<Column> = schema.iter().map(|s| Column::empty(s.ty, 0)).collect();
    for (row, record) in r.records().enumerate() {
        let record = record.map_err(err)?;
        for ((column, spec), &at) in columns.iter_mut().zip(schema).zip(&positions) {
            column.push_text(&record[at]).map_err(|message| IoError::Cell {
                path: path.to_path_buf(),
                row,
                column: spec.name.to_string(),
                message,
            })?;
        }
    }
    Ok(columns)
}

fn parquet_field(spec: &ColumnSpec) -> Type {
    let (physical, repetition) = match spec.ty {
        ColumnType::I64 => (PhysicalType::INT64, Repetition::REQUIRED),
        ColumnType::OptI64 => (PhysicalType::INT64, Repetition::OPTIONAL),
        ColumnType::F64 => (PhysicalType::DOUBLE, Repetition::REQUIRED),
        ColumnType::Bool => (PhysicalType::BOOLEAN, Repetition::REQUIRED),
        ColumnType::Str => (PhysicalType::BYTE_ARRAY, Repetition::REQUIRED),
    };
    let mut b = Type::primitive_type_builder(spec.name, physical).with_repetition(repetition);
    if spec.ty == ColumnType::Str {
        b = b.with_logical_type(Some(LogicalType::String)).with_converted_type(ConvertedType::UTF8);
    }
    b.build().expect("valid primitive type")
}

fn write_parquet(path: &Path, table: &Table) -> Result<(), IoError> {
    let perr = |source| IoError::Parquet { path: path.to_path_buf(), source };
    let fields = table.schema.iter().map(|s| Arc::new(parquet_field(s))).collect();
    let schema = Type::group_type_builder(table.name).with_fields(fields).build().map_err(perr)?;
    let props = WriterProperties::builder().set_compression(Compression::SNAPPY).build();
    let file = File::create(path).map_err(|source| IoError::File { path: path.to_path_buf(), source })?;
    let mut writer = SerializedFileWriter::new(BufWriter::new(file), Arc::new(schema), Arc::new(props)).map_err(perr)?;
    let mut group = writer.next_row_group().map_err(perr)?;
    let mut columns = table.columns.iter();
    while let Some(mut cw) = group.next_column().map_err(perr)? {
        let column = columns.next().expect("one writer per schema column");
        match column {
            Column::I64(v) => cw.typed::<Int64Type>().write_batch(v, None, None),
            Column::OptI64(v) => {
                let values: Vec<i64> = v.iter().flatten().copied().collect();
                let defs: Vec<i16> = v.iter().map(|x| x.is_some() as i16).collect();
                cw.typed::<Int64Type>().write_batch(&values, Some(&defs), None)
            }
            Column::F64(v) => cw.typed::<DoubleType>().write_batch(v, None, None),
            Column::Bool(v) => cw.typed::<BoolType>().write_batch(v, None, None),
            Column::Str(v) => {
                let values: Vec<ByteArray> = v.iter().map(|s| ByteArray::from(s.as_bytes().to_vec())).collect();
                cw.typed::<ByteArrayType>().write_batch(&values, None, None)
            }
        }
        .map_err(perr)?;
        cw.close().map_err(perr)?;
    }
    group.close().map_err(perr)?;
    writer.close().map_err(perr)?;
    Ok(())
}

fn read_parquet(path: &Path, schema: &[ColumnSpec]) -> Result<Vec<Column>, IoError> {
    let perr = |source| IoError::Parquet { path: path.to_path_buf(), source };
    let file = File::open(path).map_err(|source| IoError::File { path: path.to_path_buf(), source })?;
    let reader = SerializedFileReader::new(file).map_err(perr)?;
    let descr = reader.metadata().file_metadata().schema_descr_ptr();
    let found: Vec<String> = descr.columns().iter().map(|c| c.name().to_string()).collect();
    let positions = match_columns(path, &found, schema)?;
    for (spec, &at) in schema.iter().zip(&positions) {
        let c = descr.column(at);
        let expected = parquet_field(spec);
        let same = c.physical_type() == expected.get_physical_type()
            && c.self_type().get_basic_info().repetition() == expected.get_basic_info().repetition();
        if !same {
            return Err(IoError::ColumnType {
                path: path.to_path_buf(),
                column: spec.name.to_string(),
                found: format!("{:?} {:?}", c.self_type().get_basic_info().repetition(), c.physical_type()),
                expected: spec.ty.name(),
            });
        }
    }
    let n_rows = reader.metadata().file_metadata().num_rows().max(0) as usize;
    let mut columns: Vec<Column> = schema.iter().map(|s| Column::empty(s.ty, n_rows)).collect();
    for (row, record) in reader.get_row_iter(None).map_err(perr)?.enumerate() {
        let record = record.map_err(perr)?;
        let values: Vec<&Value> = record.get_column_iter().map(|(_, v)| v).collect();
        for ((column, spec), &at) in columns.iter_mut().zip(schema).zip(&positions) {
            column.push_value(values[at]).map_err(|message| IoError::Cell {
                path: path.to_path_buf(),
                row,
                column: spec.name.to_string(),
                message,
            })?;
        }
    }
    Ok(columns)
}
