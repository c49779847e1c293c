use std::path::Path;

use super::net::MaskedNet;
use crate::codec::{seal, Reader};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"CIDX";
pub const MODEL_VERSION: u16 = 1;

/// Little-endian model file: header, three (rows, cols, weights, biases)
/// blocks and a trailing CRC32 over everything before it.
pub fn serialize(net: &MaskedNet) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 * net.parameter_count() + 32);
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(net.n as u16).to_le_bytes());
    out.extend_from_slice(&(net.link() as u16).to_le_bytes());
    out.extend_from_slice(&(net.hidden as u16).to_le_bytes());
    out.push(3);
    for l in 0..3 {
        let mask = &net.masks.layers[l];
        out.extend_from_slice(&(mask.rows as u32).to_le_bytes());
        out.extend_from_slice(&(mask.cols as u32).to_le_bytes());
        for v in &net.weights[l] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in &net.biases[l] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    seal(out)
}

pub fn deserialize(bytes: &[u8]) -> Result<MaskedNet> {
    if bytes.len() < 4 {
        return Err(Error::Format("model file truncated".into()));
    }
    let (payload, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    let mut r = Reader { buf: payload, pos: 0 };
    if r.take(4)? != MODEL_MAGIC {
        return Err(Error::Format("bad magic, not a model file".into()));
    }
    let version = r.u16()?;
    if version != MODEL_VERSION {
        return Err(Error::Format(format!("unsupported model version {version}")));
    }
    let n = r.u16()? as usize;
    let link = r.u16()? as usize;
    let hidden = r.u16()? as usize;
    let layers = r.u8()?;
    if layers != 3 {
        return Err(Error::Format(format!("expected 3 layers, found {layers}")));
    }
    let mut net = MaskedNet::zeros(n, link, hidden).map_err(|e| Error::Format(e.to_string()))?;
    for l in 0..3 {
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let mask = &net.masks.layers[l];
        if rows != mask.rows || cols != mask.cols {
            return Err(Error::Format(format!(
                "layer {} is {rows}x{cols}, expected {}x{}",
                l + 1,
                mask.rows,
                mask.cols
            )));
        }
        for v in net.weights[l].iter_mut() {
            *v = r.f32()?;
        }
        for v in net.biases[l].iter_mut() {
            *v = r.f32()?;
        }
    }
    if r.pos != payload.len() {
        return Err(Error::Format(format!("{} trailing bytes after model", payload.len() - r.pos)));
    }
    if crc32fast::hash(payload) != stored {
        return Err(Error::Format("model checksum mismatch".into()));
    }
    net.apply_masks();
    Ok(net)
}

pub fn save(net: &MaskedNet, path: &Path) -> Result<()> {
    std::fs::write(path, serialize(net))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<MaskedNet> {
    deserialize(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net(n: usize, k: usize, h: usize) -> MaskedNet {
        MaskedNet::init(n, k, h, &mut ChaCha8Rng::seed_from_u64(n as u64)).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for &(n, k, h) in &[(1, 1, 1), (8, 3, 2), (32, 32, 4)] {
            let a = net(n, k, h);
            let b = deserialize(&serialize(&a)).unwrap();
            for l in 0..3 {
                let wa: Vec<u32> = a.weights(l).iter().map(|v| v.to_bits()).collect();
                let wb: Vec<u32> = b.weights(l).iter().map(|v| v.to_bits()).collect();
                assert_eq!(wa, wb);
                assert_eq!(a.biases(l), b.biases(l));
            }
            assert_eq!(a, b);
        }
    }

    #[test]
    fn default_size_within_budget() {
        let bytes = serialize(&net(32, 32, 4));
        assert!(bytes.len() <= 200 * 1024, "{} bytes", bytes.len());
    }

    #[test]
    fn corrupted_length_field_is_rejected() {
        let mut bytes = serialize(&net(8, 3, 2));
        // rows field of the first layer
        bytes[13..17].copy_from_slice(&999u32.to_le_bytes());
        let err = deserialize(&bytes).unwrap_err();
        assert!(matches!(err, Error::Format(_)), "{err}");
        let again = deserialize(&bytes).unwrap_err();
        assert_eq!(err.to_string(), again.to_string());
    }

    #[test]
    fn other_corruptions_are_rejected() {
        let good = serialize(&net(8, 3, 2));
        let mut magic = good.clone();
        magic[0] = b'X';
        assert!(deserialize(&magic).is_err());
        let mut version = good.clone();
        version[4] = 9;
        assert!(deserialize(&version).is_err());
        assert!(deserialize(&good[..good.len() - 7]).is_err());
        let mut flipped = good.clone();
        flipped[40] ^= 1;
        assert!(matches!(deserialize(&flipped), Err(Error::Format(m)) if m.contains("checksum")));
        assert!(deserialize(&[]).is_err());
    }
}
