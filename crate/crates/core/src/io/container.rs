//! Versioned block container.
//!
//! Layout: magic `NIRB`, format version (u32), block count (u32), then per
//! block a 4-byte tag, payload length (u64), payload and the CRC-32 of the
//! payload (u32). All integers and floats are little-endian.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{NirbError, Result};

pub const MAGIC: &[u8; 4] = b"NIRB";
pub const FORMAT_VERSION: u32 = 1;
/// Magic, version and block count.
pub const HEADER_BYTES: usize = 12;
/// Tag, length and CRC around every payload.
pub const BLOCK_OVERHEAD: usize = 16;

pub type Tag = [u8; 4];

pub fn section_name(tag: &Tag) -> &'static str {
    match tag {
        b"CONF" => "config",
        b"MESH" => "mesh",
        b"GRID" => "time grid",
        b"BASI" => "basis",
        b"PROV" => "provenance",
        b"RECT" => "rectification",
        b"TRAJ" => "trajectory",
        _ => "unknown",
    }
}

pub fn encode(blocks: &[(Tag, Vec<u8>)]) -> Vec<u8> {
    let total: usize = blocks.iter().map(|(_, p)| p.len() + BLOCK_OVERHEAD).sum();
    let mut out = Vec::with_capacity(HEADER_BYTES + total);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(blocks.len() as u32).to_le_bytes());
    for (tag, payload) in blocks {
        out.extend_from_slice(tag);
        out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        out.extend_from_slice(payload);
        out.extend_from_slice(&crc32fast::hash(payload).to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Vec<(Tag, Vec<u8>)>> {
    if bytes.len() < HEADER_BYTES {
        return Err(NirbError::Corrupt("truncated header".into()));
    }
    if &bytes[..4] != MAGIC {
        return Err(NirbError::Corrupt("bad magic number".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(NirbError::Version {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let count = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let mut pos = HEADER_BYTES;
    let mut blocks = Vec::with_capacity(count);
    for i in 0..count {
        if bytes.len() < pos + 12 {
            return Err(NirbError::Corrupt(format!("truncated block {i} header")));
        }
        let tag: Tag = bytes[pos..pos + 4].try_into().expect("4 bytes");
        let name = section_name(&tag);
        let len = u64::from_le_bytes(bytes[pos + 4..pos + 12].try_into().expect("8 bytes")) as usize;
        pos += 12;
        if bytes.len().saturating_sub(pos) < len.saturating_add(4) {
            return Err(NirbError::Corrupt(format!("truncated {name} section (block {i})")));
        }
        let payload = &bytes[pos..pos + len];
        let crc = u32::from_le_bytes(bytes[pos + len..pos + len + 4].try_into().expect("4 bytes"));
        if crc32fast::hash(payload) != crc {
            return Err(NirbError::Corrupt(format!("checksum mismatch in {name} section (block {i})")));
        }
        blocks.push((tag, payload.to_vec()));
        pos += len + 4;
    }
    if pos != bytes.len() {
        return Err(NirbError::Corrupt(format!("{} trailing bytes", bytes.len() - pos)));
    }
    Ok(blocks)
}

/// Writes to a temporary sibling and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = std::path::PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Default)]
pub struct Writer {
    pub buf: Vec<u8>,
}

impl Writer {
    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64s(&mut self, v: &[f64]) {
        for x in v {
            self.f64(*x);
        }
    }

    pub fn str(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.buf.extend_from_slice(s.as_bytes());
    }
}

pub struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    section: &'static str,
}

impl<'a> Reader<'a> {
    pub fn new(bytes: &'a [u8], section: &'static str) -> Self {
        Reader { bytes, pos: 0, section }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(NirbError::Corrupt(format!("{} section is shorter than its contents", self.section)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    /// A count that must fit in the remaining payload at `unit` bytes each.
    pub fn len(&mut self, unit: usize) -> Result<usize> {
        let n = self.u64()? as usize;
        if n.checked_mul(unit).is_none_or(|b| b > self.bytes.len() - self.pos) {
            return Err(NirbError::Corrupt(format!("{} section declares an impossible length {n}", self.section)));
        }
        Ok(n)
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| NirbError::Corrupt("length overflow".into()))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }

    pub fn str(&mut self) -> Result<String> {
        let n = self.len(1)?;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| NirbError::Corrupt(format!("{} section holds invalid text", self.section)))
    }

    pub fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(NirbError::Corrupt(format!("{} section has trailing bytes", self.section)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_corruption() {
        let blocks = vec![(*b"CONF", b"a = 1".to_vec()), (*b"GRID", vec![1, 2, 3])];
        let bytes = encode(&blocks);
        assert_eq!(bytes.len(), HEADER_BYTES + 2 * BLOCK_OVERHEAD + 8);
        assert_eq!(decode(&bytes).unwrap(), blocks);
        let e = decode(&bytes[..bytes.len() - 2]).unwrap_err().to_string();
        assert!(e.contains("time grid"), "{e}");
        let mut flipped = bytes.clone();
        flipped[HEADER_BYTES + 13] ^= 1;
        assert!(decode(&flipped).unwrap_err().to_string().contains("checksum"));
        let mut v = bytes;
        v[4] = 9;
        assert!(matches!(decode(&v), Err(NirbError::Version { found: 9, .. })));
    }
}
