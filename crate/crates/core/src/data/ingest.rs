use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use super::{bits_for, ColumnKind, ColumnMeta, Table};
use crate::error::{Error, Result};

pub const DEFAULT_FLOAT_BITS: u32 = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColumnSpec {
    Int,
    Cat,
    Float { bits: u32 },
}

impl FromStr for ColumnSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "int" => Ok(Self::Int),
            "cat" => Ok(Self::Cat),
            "float" => Ok(Self::Float { bits: DEFAULT_FLOAT_BITS }),
            _ => {
                let bits = s
                    .strip_prefix("float:")
                    .and_then(|b| b.parse::<u32>().ok())
                    .filter(|b| (1..=64).contains(b))
                    .ok_or_else(|| Error::Input(format!("unknown column type `{s}` (int, cat, float or float:BITS)")))?;
                Ok(Self::Float { bits })
            }
        }
    }
}

/// Declared type of each CSV column, in order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schema(pub Vec<ColumnSpec>);

impl FromStr for Schema {
    type Err = Error;

    /// Comma-separated column types, e.g. `int,cat,float:16`.
    fn from_str(s: &str) -> Result<Self> {
        let cols = s.split(',').map(str::parse).collect::<Result<Vec<_>>>()?;
        if cols.is_empty() {
            return Err(Error::Input("empty schema".into()));
        }
        Ok(Schema(cols))
    }
}

pub fn ingest_csv(path: &Path, schema: &Schema) -> Result<Table> {
    ingest_reader(std::fs::File::open(path)?, schema)
}

/// Reads a headed CSV. Row numbers in errors are 1-based file lines.
pub fn ingest_reader<R: Read>(reader: R, schema: &Schema) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let m = schema.0.len();
    if header.len() != m {
        return Err(Error::Ingest {
            row: 1,
            msg: format!("header has {} columns, schema declares {m}", header.len()),
        });
    }
    let mut cells: Vec<Vec<String>> = vec![Vec::new(); m];
    let mut lines = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let row = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::Ingest { row, msg: e.to_string() }
        })?;
        lines.push(rec.position().map(|p| p.line() as usize).unwrap_or(0));
        for (c, cell) in rec.iter().enumerate() {
            cells[c].push(cell.to_owned());
        }
    }

    let mut columns = Vec::with_capacity(m);
    let mut values = Vec::with_capacity(m);
    for (c, spec) in schema.0.iter().enumerate() {
        let name = header[c].clone();
        let src = &cells[c];
        let bad = |i: usize, what: &str| Error::Ingest {
            row: lines[i],
            msg: format!("column `{name}`: cannot parse `{}` as {what}", src[i]),
        };
        let (meta, col) = match *spec {
            ColumnSpec::Int => {
                let col = src
                    .iter()
                    .enumerate()
                    .map(|(i, s)| s.parse::<u64>().map_err(|_| bad(i, "a non-negative integer")))
                    .collect::<Result<Vec<_>>>()?;
                let bits = bits_for(col.iter().copied().max().unwrap_or(0));
                (ColumnMeta { name: name.clone(), kind: ColumnKind::Int, bits, dictionary: Vec::new() }, col)
            }
            ColumnSpec::Cat => {
                let mut dict: BTreeMap<&str, u64> = src.iter().map(|s| (s.as_str(), 0)).collect();
                for (ordinal, v) in dict.values_mut().enumerate() {
                    *v = ordinal as u64;
                }
                let col = src.iter().map(|s| dict[s.as_str()]).collect();
                let bits = bits_for(dict.len().saturating_sub(1) as u64);
                let dictionary = dict.keys().map(|s| s.to_string()).collect();
                (ColumnMeta { name: name.clone(), kind: ColumnKind::Cat, bits, dictionary }, col)
            }
            ColumnSpec::Float { bits } => {
                let raw = src
                    .iter()
                    .enumerate()
                    .map(|(i, s)| s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| bad(i, "a finite number")))
                    .collect::<Result<Vec<_>>>()?;
                let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
                let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let (min, max) = if raw.is_empty() { (0.0, 0.0) } else { (min, max) };
                let col = raw.iter().map(|&v| quantize(v, min, max, bits)).collect();
                (ColumnMeta { name: name.clone(), kind: ColumnKind::Float { min, max }, bits, dictionary: Vec::new() }, col)
            }
        };
        columns.push(meta);
        values.push(col);
    }
    Table::new(columns, values)
}

/// Min-max scaling onto `0..=2^bits - 1`, rounding to the nearest cell.
fn quantize(v: f64, min: f64, max: f64, bits: u32) -> u64 {
    if max <= min {
        return 0;
    }
    let top = ((1u128 << bits) - 1) as f64;
    let cell = ((v - min) / (max - min) * top).round();
    (cell.clamp(0.0, top) as u128).min((1u128 << bits) - 1) as u64
}
