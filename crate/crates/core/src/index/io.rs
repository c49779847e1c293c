use std::path::Path;

use super::{CardIndex, LeafPage, LinearSegment, Slot};
use crate::armodel::{deserialize, serialize, MaskedNet};
use crate::codec::{checked_payload, seal, Reader};
use crate::error::{Error, Result};
use crate::zorder::{BitSpec, ZKey};

pub const INDEX_MAGIC: &[u8; 7] = b"CIDXIDX";
pub const INDEX_VERSION: u16 = 1;

/// Header, model blob, bucket segments, page directory, slots, CRC32.
/// Keys take `ceil(n / 8)` little-endian bytes.
pub fn write_index(idx: &CardIndex<MaskedNet>) -> Vec<u8> {
    let spec = &idx.spec;
    let mut out = Vec::new();
    out.extend_from_slice(INDEX_MAGIC);
    out.extend_from_slice(&INDEX_VERSION.to_le_bytes());
    out.extend_from_slice(&(idx.slots.len() as u64).to_le_bytes());
    out.extend_from_slice(&(idx.fanout as u32).to_le_bytes());
    out.extend_from_slice(&(idx.buckets.len() as u32).to_le_bytes());
    out.extend_from_slice(&(spec.dims() as u16).to_le_bytes());
    out.extend_from_slice(&(spec.bits_per_dim() as u16).to_le_bytes());
    out.extend_from_slice(&(idx.ell as u16).to_le_bytes());
    out.extend_from_slice(&idx.b_err.to_le_bytes());

    let model = serialize(&idx.model);
    out.extend_from_slice(&(model.len() as u64).to_le_bytes());
    out.extend_from_slice(&model);

    for bucket in &idx.buckets {
        out.extend_from_slice(&(bucket.len() as u32).to_le_bytes());
        for s in bucket {
            out.extend_from_slice(&s.x.to_le_bytes(spec));
            for v in [s.y, s.l0, s.l1] {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out.extend_from_slice(&(idx.pages.len() as u64).to_le_bytes());
    for p in &idx.pages {
        out.extend_from_slice(&p.zmin.to_le_bytes(spec));
        out.extend_from_slice(&p.zmax.to_le_bytes(spec));
    }
    for s in &idx.slots {
        out.extend_from_slice(&s.key.to_le_bytes(spec));
        out.extend_from_slice(&s.row.to_le_bytes());
    }
    seal(out)
}

pub fn read_index(bytes: &[u8]) -> Result<CardIndex<MaskedNet>> {
    if bytes.len() >= 7 && &bytes[..7] != INDEX_MAGIC {
        return Err(Error::Format("bad magic, not an index file".into()));
    }
    let payload = checked_payload(bytes, "index file")?;
    let mut r = Reader { buf: payload, pos: 0 };
    r.take(7)?;
    let version = r.u16()?;
    if version != INDEX_VERSION {
        return Err(Error::Format(format!("unsupported index version {version}")));
    }
    let n_rows = r.u64()? as usize;
    let fanout = r.u32()? as usize;
    let n_s = r.u32()? as usize;
    let m = r.u16()? as usize;
    let b = r.u16()? as u32;
    let ell = r.u16()? as usize;
    let b_err = r.f64()?;
    let spec = BitSpec::new(m, b).map_err(|e| Error::Format(e.to_string()))?;
    if fanout == 0 || n_s == 0 {
        return Err(Error::Format("index header has zero fanout or bucket count".into()));
    }
    let kb = spec.key_bytes();
    let key = |r: &mut Reader| -> Result<ZKey> { Ok(ZKey::from_le_bytes(r.take(kb)?)) };

    let model_len = r.u64()? as usize;
    let model = deserialize(r.take(model_len)?)?;
    if model.key_bits() != spec.key_bits() || ell == 0 || ell > spec.key_bits() {
        return Err(Error::Format("model does not match the index key layout".into()));
    }

    let mut buckets = Vec::with_capacity(n_s.min(1 << 20));
    for _ in 0..n_s {
        let count = r.u32()? as usize;
        let mut segs = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            let x = key(&mut r)?;
            segs.push(LinearSegment { x, y: r.f64()?, l0: r.f64()?, l1: r.f64()? });
        }
        buckets.push(segs);
    }
    let page_count = r.u64()? as usize;
    if page_count != n_rows.div_ceil(fanout) {
        return Err(Error::Format(format!("{page_count} pages cannot hold {n_rows} tuples at {fanout} per page")));
    }
    let mut pages = Vec::with_capacity(page_count);
    for _ in 0..page_count {
        pages.push(LeafPage { zmin: key(&mut r)?, zmax: key(&mut r)? });
    }
    if n_rows.checked_mul(kb + 8).is_none_or(|len| len != payload.len() - r.pos) {
        return Err(Error::Format("slot array length does not match the tuple count".into()));
    }
    let mut slots = Vec::with_capacity(n_rows);
    for _ in 0..n_rows {
        let k = key(&mut r)?;
        slots.push(Slot { key: k, row: r.u64()? });
    }
    let idx = CardIndex { model, spec, ell, fanout, b_err, buckets, pages, slots };
    for (p, page) in idx.pages.iter().enumerate() {
        let s = idx.page_slots(p);
        if s[0].key != page.zmin || s[s.len() - 1].key != page.zmax {
            return Err(Error::Format(format!("page {p} directory entry disagrees with its slots")));
        }
    }
    if idx.slots.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Format("slots are not in Z order".into()));
    }
    Ok(idx)
}

pub fn save_index(idx: &CardIndex<MaskedNet>, path: &Path) -> Result<()> {
    std::fs::write(path, write_index(idx))?;
    Ok(())
}

pub fn load_index(path: &Path) -> Result<CardIndex<MaskedNet>> {
    read_index(&std::fs::read(path)?)
}
