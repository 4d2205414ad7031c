//! Series ingestion and table output (CSV with a comment header, or JSON).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::measure::{PriceSeries, VolatilitySeries};

/// Values from a one- or multi-column CSV.
///
/// The value is the last column. With two or more columns the first is a
/// timestamp that must increase strictly (numerically when every stamp
/// parses as a number, lexicographically otherwise). A first row whose
/// value does not parse is treated as a header. Lines starting with `#`
/// are skipped.
pub fn read_series<R: Read>(reader: R) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut values = Vec::new();
    let mut stamps: Vec<String> = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        if record.is_empty() || record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let last = record.get(record.len() - 1).unwrap_or("");
        let value = match last.parse::<f64>() {
            Ok(v) => v,
            Err(_) if row == 0 => continue,
            Err(_) => {
                let line = record.position().map_or(row as u64 + 1, |p| p.line());
                return Err(invalid(format!("line {line}: cannot parse '{last}' as a number")));
            }
        };
        if record.len() >= 2 {
            stamps.push(record[0].to_string());
        }
        values.push(value);
    }
    if values.is_empty() {
        return Err(invalid("input contains no data rows"));
    }
    if !stamps.is_empty() {
        if stamps.len() != values.len() {
            return Err(invalid("rows disagree on whether a timestamp column is present"));
        }
        check_increasing(&stamps)?;
    }
    Ok(values)
}

fn check_increasing(stamps: &[String]) -> Result<()> {
    let numeric: Option<Vec<f64>> = stamps.iter().map(|s| s.parse().ok()).collect();
    let bad = match numeric {
        Some(t) => t.windows(2).position(|w| !(w[1] > w[0])),
        None => stamps.windows(2).position(|w| w[1] <= w[0]),
    };
    match bad {
        Some(i) => Err(invalid(format!(
            "timestamps are not strictly increasing at row {} ('{}' after '{}')",
            i + 1,
            stamps[i + 1],
            stamps[i]
        ))),
        None => Ok(()),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| invalid(format!("cannot open {}: {e}", path.display())))
}

pub fn read_price_csv(path: &Path) -> Result<PriceSeries> {
    PriceSeries::new(read_series(open(path)?)?)
}

pub fn read_volatility_csv(path: &Path) -> Result<VolatilitySeries> {
    VolatilitySeries::new(read_series(open(path)?)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(invalid(format!("unknown format '{s}' (expected csv or json)"))),
        }
    }
}

/// Hex SHA-256 of the canonical JSON encoding of a config.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Provenance carried by every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub command: String,
    pub version: String,
    pub config_hash: String,
    pub grids: BTreeMap<String, String>,
}

impl Meta {
    pub fn new(command: &str, config_hash: String) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash,
            grids: BTreeMap::new(),
        }
    }

    pub fn grid(mut self, name: &str, values: &[f64]) -> Self {
        let desc = match values {
            [] => "empty".to_string(),
            [v] => format!("{v}"),
            _ => format!("{} points from {} to {}", values.len(), values[0], values[values.len() - 1]),
        };
        self.grids.insert(name.to_string(), desc);
        self
    }

    fn header_lines(&self) -> Vec<String> {
        let mut lines = vec![
            format!("# command: {}", self.command),
            format!("# version: {}", self.version),
            format!("# config_hash: {}", self.config_hash),
        ];
        lines.extend(self.grids.iter().map(|(k, v)| format!("# grid {k}: {v}")));
        lines
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Missing,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::Num)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl Cell {
    fn to_field(&self) -> String {
        match self {
            Cell::Num(v) => format!("{v:e}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Missing => String::new(),
        }
    }

    fn to_json(&self) -> serde_json::Value {
        match self {
            Cell::Num(v) => serde_json::Number::from_f64(*v).map_or(serde_json::Value::Null, Into::into),
            Cell::Int(v) => (*v).into(),
            Cell::Text(s) => s.clone().into(),
            Cell::Missing => serde_json::Value::Null,
        }
    }
}

/// A tidy table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, out: W, meta: &Meta) -> Result<()> {
        let mut out = out;
        for line in meta.header_lines() {
            writeln!(out, "{line}")?;
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::to_field))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self, meta: &Meta) -> serde_json::Value {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: serde_json::Map<String, serde_json::Value> = self
                    .columns
                    .iter()
                    .cloned()
                    .zip(row.iter().map(Cell::to_json))
                    .collect();
                obj.into()
            })
            .collect();
        serde_json::json!({ "meta": meta, "rows": rows })
    }
}

/// Writes `stem.csv` or `stem.json` under `dir` and returns the path.
pub fn write_table(dir: &Path, stem: &str, table: &Table, meta: &Meta, format: Format) -> Result<PathBuf> {
    match format {
        Format::Csv => {
            let path = dir.join(format!("{stem}.csv"));
            table.write_csv(std::io::BufWriter::new(File::create(&path)?), meta)?;
            Ok(path)
        }
        Format::Json => {
            let path = dir.join(format!("{stem}.json"));
            write_json(&path, &table.to_json(meta))?;
            Ok(path)
        }
    }
}

/// Summary documents are always JSON, with the provenance under `meta`.
pub fn write_summary<T: Serialize>(dir: &Path, stem: &str, body: &T, meta: &Meta) -> Result<PathBuf> {
    let path = dir.join(format!("{stem}.json"));
    let value = serde_json::json!({ "meta": meta, "summary": body });
    write_json(&path, &value)?;
    Ok(path)
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut f = std::io::BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_column_with_header() {
        let v = read_series("price\n1.5\n2.0\n# note\n2.5\n".as_bytes()).unwrap();
        assert_eq!(v, vec![1.5, 2.0, 2.5]);
    }

    #[test]
    fn timestamp_column() {
        let v = read_series("t,p\n2001-01-02,1\n2001-01-03,2\n".as_bytes()).unwrap();
        assert_eq!(v, vec![1.0, 2.0]);
        let e = read_series("1,5\n3,6\n2,7\n".as_bytes()).unwrap_err();
        assert!(e.to_string().contains("row 2"), "{e}");
        // Numeric stamps compare as numbers, not strings.
        assert!(read_series("9,1\n10,2\n".as_bytes()).is_ok());
    }

    #[test]
    fn bad_value_reports_line() {
        let e = read_series("1\n2\nx\n".as_bytes()).unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
        assert!(read_series("".as_bytes()).is_err());
    }

    #[test]
    fn csv_has_header_comment() {
        let mut t = Table::new(&["order", "exponent"]);
        t.push(vec![1.0.into(), Cell::Missing]);
        let meta = Meta::new("direct", "abc".into()).grid("q", &[-4.0, 8.0]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf, &meta).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# command: direct\n"));
        assert!(text.contains("# config_hash: abc\n"));
        assert!(text.ends_with("order,exponent\n1e0,\n"));
    }

    #[test]
    fn hash_is_stable() {
        let a = config_hash(&serde_json::json!({"depth": 14})).unwrap();
        assert_eq!(a, config_hash(&serde_json::json!({"depth": 14})).unwrap());
        assert_eq!(a.len(), 64);
    }
}
