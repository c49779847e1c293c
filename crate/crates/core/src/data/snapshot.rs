use std::path::Path;

use super::{ColumnKind, ColumnMeta, Table};
use crate::codec::{checked_payload, put_str, seal, Reader};
use crate::error::{Error, Result};

pub const TABLE_MAGIC: &[u8; 7] = b"CIDXTAB";
pub const TABLE_VERSION: u16 = 1;

/// Columnar little-endian snapshot: header, per-column metadata, value
/// arrays, dictionaries, CRC32.
pub fn write_table(table: &Table) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + table.len() * table.dims() * 8);
    out.extend_from_slice(TABLE_MAGIC);
    out.extend_from_slice(&TABLE_VERSION.to_le_bytes());
    out.extend_from_slice(&(table.len() as u64).to_le_bytes());
    out.extend_from_slice(&(table.dims() as u32).to_le_bytes());
    for meta in table.columns() {
        out.push(meta.bits as u8);
        let (tag, min, max) = match meta.kind {
            ColumnKind::Int => (0u8, 0.0, 0.0),
            ColumnKind::Cat => (1, 0.0, 0.0),
            ColumnKind::Float { min, max } => (2, min, max),
        };
        out.push(tag);
        out.extend_from_slice(&min.to_le_bytes());
        out.extend_from_slice(&max.to_le_bytes());
        put_str(&mut out, &meta.name);
    }
    for c in 0..table.dims() {
        for v in table.column(c) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    for meta in table.columns() {
        out.extend_from_slice(&(meta.dictionary.len() as u32).to_le_bytes());
        for s in &meta.dictionary {
            put_str(&mut out, s);
        }
    }
    seal(out)
}

pub fn read_table(bytes: &[u8]) -> Result<Table> {
    if bytes.len() >= 7 && &bytes[..7] != TABLE_MAGIC {
        return Err(Error::Format("bad magic, not a table snapshot".into()));
    }
    let payload = checked_payload(bytes, "table snapshot")?;
    let mut r = Reader { buf: payload, pos: 0 };
    r.take(7)?;
    let version = r.u16()?;
    if version != TABLE_VERSION {
        return Err(Error::Format(format!("unsupported table version {version}")));
    }
    let rows = r.u64()? as usize;
    let m = r.u32()? as usize;
    if m == 0 || m > 4096 {
        return Err(Error::Format(format!("implausible column count {m}")));
    }
    let mut columns = Vec::with_capacity(m);
    for _ in 0..m {
        let bits = r.u8()? as u32;
        let tag = r.u8()?;
        let min = r.f64()?;
        let max = r.f64()?;
        let name = r.str()?;
        let kind = match tag {
            0 => ColumnKind::Int,
            1 => ColumnKind::Cat,
            2 => ColumnKind::Float { min, max },
            t => return Err(Error::Format(format!("unknown column kind {t}"))),
        };
        columns.push(ColumnMeta { name, kind, bits, dictionary: Vec::new() });
    }
    if rows.checked_mul(m * 8).is_none_or(|len| len > r.buf.len() - r.pos) {
        return Err(Error::Format("row count exceeds snapshot size".into()));
    }
    let mut values = Vec::with_capacity(m);
    for _ in 0..m {
        let mut col = Vec::with_capacity(rows);
        for _ in 0..rows {
            col.push(r.u64()?);
        }
        values.push(col);
    }
    for meta in columns.iter_mut() {
        let count = r.u32()? as usize;
        meta.dictionary = (0..count).map(|_| r.str()).collect::<Result<_>>()?;
    }
    if !r.done() {
        return Err(Error::Format("trailing bytes in table snapshot".into()));
    }
    Table::new(columns, values).map_err(|e| Error::Format(e.to_string()))
}

pub fn save_table(table: &Table, path: &Path) -> Result<()> {
    std::fs::write(path, write_table(table))?;
    Ok(())
}

pub fn load_table(path: &Path) -> Result<Table> {
    read_table(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ingest_reader;

    #[test]
    fn round_trip_keeps_everything() {
        let t = ingest_reader("id,city,x\n3,oslo,1.5\n9,bergen,-2\n3,oslo,0\n".as_bytes(), &"int,cat,float:8".parse().unwrap()).unwrap();
        let bytes = write_table(&t);
        let back = read_table(&bytes).unwrap();
        assert_eq!(back, t);
        assert_eq!(write_table(&back), bytes);
    }

    #[test]
    fn damaged_snapshots_fail_cleanly() {
        let t = Table::from_rows(4, &[vec![1, 2], vec![3, 4]]).unwrap();
        let bytes = write_table(&t);
        assert!(read_table(&bytes[..bytes.len() - 3]).is_err());
        let mut flipped = bytes.clone();
        flipped[20] ^= 0x40;
        assert!(read_table(&flipped).is_err());
        let mut magic = bytes.clone();
        magic[2] = b'Z';
        assert!(matches!(read_table(&magic), Err(Error::Format(m)) if m.contains("magic")));
    }
}
