//! Tables, ingestion, synthetic data, workloads and ground-truth oracles.

mod ingest;
mod oracle;
mod snapshot;
mod stats;
mod synth;
mod workload;

pub use ingest::{ingest_csv, ingest_reader, ColumnSpec, Schema};
pub use oracle::{independence_cross_entropy, BitFrequencies, ExactOracle, OracleWalk};
pub use snapshot::{load_table, read_table, save_table, write_table, TABLE_MAGIC, TABLE_VERSION};
pub use stats::{aggregate, nearest_rank, QErrorStats};
pub use synth::{gen_synthetic, SynthKind, SynthParams, DUPLICATE_FRACTION};
pub use workload::{
    gen_balanced_workload, gen_workload, read_workload, write_workload, SelectivityClass, WorkloadConfig,
    WorkloadQuery, DEFAULT_SCALES,
};

use crate::error::{Error, Result};
use crate::zorder::{encode, BitSpec, QueryBox, ZKey};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ColumnKind {
    /// Non-negative integers stored as is.
    Int,
    /// Strings mapped to ordinals of their sorted distinct values.
    Cat,
    /// Reals min-max scaled onto a `bits`-bit grid.
    Float { min: f64, max: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ColumnMeta {
    pub name: String,
    pub kind: ColumnKind,
    /// Bits needed for this column's values.
    pub bits: u32,
    /// Sorted distinct source strings for categorical columns, empty otherwise.
    pub dictionary: Vec<String>,
}

impl ColumnMeta {
    pub fn int(name: impl Into<String>, bits: u32) -> Self {
        Self { name: name.into(), kind: ColumnKind::Int, bits, dictionary: Vec::new() }
    }
}

/// Column-major table of unsigned integer attributes.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    columns: Vec<ColumnMeta>,
    values: Vec<Vec<u64>>,
    rows: usize,
}

impl Table {
    pub fn new(columns: Vec<ColumnMeta>, values: Vec<Vec<u64>>) -> Result<Self> {
        if columns.is_empty() || columns.len() != values.len() {
            return Err(Error::Input(format!(
                "table needs one value column per declared column ({} declared, {} given)",
                columns.len(),
                values.len()
            )));
        }
        let rows = values[0].len();
        for (meta, col) in columns.iter().zip(&values) {
            if col.len() != rows {
                return Err(Error::Input(format!("column {} has {} rows, expected {rows}", meta.name, col.len())));
            }
            if meta.bits == 0 || meta.bits > 64 {
                return Err(Error::Input(format!("column {} has invalid width {} bits", meta.name, meta.bits)));
            }
            if meta.bits < 64 {
                if let Some(&v) = col.iter().find(|&&v| v >> meta.bits != 0) {
                    return Err(Error::Input(format!("column {} value {v} exceeds {} bits", meta.name, meta.bits)));
                }
            }
        }
        Ok(Self { columns, values, rows })
    }

    /// Integer table from row tuples, every column `bits` wide.
    pub fn from_rows(bits: u32, rows: &[Vec<u64>]) -> Result<Self> {
        let m = rows.first().map(Vec::len).unwrap_or(0);
        let mut values = vec![Vec::with_capacity(rows.len()); m];
        for (i, r) in rows.iter().enumerate() {
            if r.len() != m {
                return Err(Error::Ingest { row: i + 1, msg: format!("expected {m} values, found {}", r.len()) });
            }
            for (c, &v) in r.iter().enumerate() {
                values[c].push(v);
            }
        }
        let columns = (0..m).map(|c| ColumnMeta::int(format!("c{c}"), bits)).collect();
        Self::new(columns, values)
    }

    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn dims(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[ColumnMeta] {
        &self.columns
    }

    pub fn column(&self, c: usize) -> &[u64] {
        &self.values[c]
    }

    pub fn row(&self, r: usize) -> Vec<u64> {
        self.values.iter().map(|col| col[r]).collect()
    }

    /// Key layout covering every column: `m` columns at the widest column's bit width.
    pub fn bit_spec(&self) -> Result<BitSpec> {
        let b = self.columns.iter().map(|c| c.bits).max().unwrap_or(1);
        BitSpec::new(self.dims(), b)
    }

    /// Z keys of all rows in row order.
    pub fn keys(&self, spec: &BitSpec) -> Result<Vec<ZKey>> {
        let mut row = vec![0u64; self.dims()];
        (0..self.rows)
            .map(|r| {
                for (c, col) in self.values.iter().enumerate() {
                    row[c] = col[r];
                }
                encode(&row, spec)
            })
            .collect()
    }

    /// Source representation of a stored value.
    pub fn render(&self, c: usize, v: u64) -> String {
        let meta = &self.columns[c];
        match meta.kind {
            ColumnKind::Int => v.to_string(),
            ColumnKind::Cat => meta.dictionary.get(v as usize).cloned().unwrap_or_else(|| format!("#{v}")),
            ColumnKind::Float { min, max } => {
                let steps = ((1u128 << meta.bits) - 1) as f64;
                (min + (max - min) * v as f64 / steps).to_string()
            }
        }
    }
}

/// Exact number of rows inside `q`, by full scan.
pub fn brute_force_card(table: &Table, q: &QueryBox) -> u64 {
    let mut hits = vec![true; table.len()];
    for (iv, col) in q.dims.iter().zip(&table.values) {
        for (h, &v) in hits.iter_mut().zip(col) {
            *h &= iv.lo <= v && v <= iv.hi;
        }
    }
    hits.iter().filter(|&&h| h).count() as u64
}

/// Row ids inside `q`, ascending.
pub fn brute_force_rows(table: &Table, q: &QueryBox) -> Vec<u64> {
    (0..table.len())
        .filter(|&r| q.dims.iter().zip(&table.values).all(|(iv, col)| iv.lo <= col[r] && col[r] <= iv.hi))
        .map(|r| r as u64)
        .collect()
}

/// Minimum bit width able to hold `max` (at least 1).
pub(crate) fn bits_for(max: u64) -> u32 {
    (64 - max.leading_zeros()).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_round_trip_and_keys() {
        let t = Table::from_rows(3, &[vec![5, 2], vec![0, 7], vec![1, 1]]).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.row(0), vec![5, 2]);
        let spec = t.bit_spec().unwrap();
        assert_eq!(spec.key_bits(), 6);
        let keys = t.keys(&spec).unwrap();
        assert_eq!(keys[0], ZKey::from_u128(0b100110));
    }

    #[test]
    fn rejects_values_wider_than_column() {
        assert!(Table::from_rows(2, &[vec![4]]).is_err());
        assert!(Table::from_rows(2, &[vec![1, 2], vec![1]]).is_err());
    }

    #[test]
    fn brute_force_counts() {
        let t = Table::from_rows(4, &[vec![1, 1], vec![2, 3], vec![3, 9], vec![2, 3]]).unwrap();
        let spec = t.bit_spec().unwrap();
        assert_eq!(brute_force_card(&t, &QueryBox::full(&spec)), 4);
        let q = QueryBox::new(&[2, 0], &[3, 3], &spec).unwrap();
        assert_eq!(brute_force_card(&t, &q), 2);
        assert_eq!(brute_force_rows(&t, &q), vec![1, 3]);
        assert_eq!(brute_force_card(&t, &QueryBox::point(&[0, 0])), 0);
    }

    #[test]
    fn bit_widths() {
        assert_eq!(bits_for(0), 1);
        assert_eq!(bits_for(1), 1);
        assert_eq!(bits_for(2), 2);
        assert_eq!(bits_for(255), 8);
        assert_eq!(bits_for(u64::MAX), 64);
    }
}
