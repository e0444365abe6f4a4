//! Binary model file.
//!
//! ```text
//! magic      9 bytes   "BIASRANK1"
//! variant    u8        0 = linear, 1 = quadratic
//! dimension  u64 LE
//! U          d·d f64 LE, row-major
//! b          d f64 LE
//! has_mean   u8        0 or 1
//! mean       d f64 LE  (only if has_mean = 1)
//! checksum   32 bytes  SHA-256 of every byte between magic and checksum
//! ```

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{BiasModel, Variant};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 9] = b"BIASRANK1";
const MAGIC_STEM: &[u8] = b"BIASRANK";
const CHECKSUM_LEN: usize = 32;

pub fn write_model<W: Write>(model: &BiasModel, mut out: W) -> std::io::Result<()> {
    let d = model.dimension();
    let mut payload = Vec::with_capacity(1 + 8 + 8 * (d * d + 2 * d) + 1);
    payload.push(match model.variant() {
        Variant::Linear => 0,
        Variant::Quadratic => 1,
    });
    payload.extend_from_slice(&(d as u64).to_le_bytes());
    for x in model.u().iter().chain(model.b()) {
        payload.extend_from_slice(&x.to_le_bytes());
    }
    match model.mean_vector() {
        Some(mean) => {
            payload.push(1);
            for x in mean {
                payload.extend_from_slice(&x.to_le_bytes());
            }
        }
        None => payload.push(0),
    }
    out.write_all(MODEL_MAGIC)?;
    out.write_all(&payload)?;
    out.write_all(&Sha256::digest(&payload))?;
    out.flush()
}

pub fn read_model<R: Read>(mut input: R) -> Result<BiasModel> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io("<model>", e))?;
    parse(&bytes)
}

pub fn save_model(model: &BiasModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_model(model, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<BiasModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse(&bytes)
}

fn parse(bytes: &[u8]) -> Result<BiasModel> {
    if bytes.len() < MODEL_MAGIC.len() || !bytes.starts_with(MAGIC_STEM) {
        return Err(Error::CorruptFile("missing magic string".into()));
    }
    let (magic, rest) = bytes.split_at(MODEL_MAGIC.len());
    if magic != MODEL_MAGIC {
        return Err(Error::VersionMismatch {
            expected: String::from_utf8_lossy(MODEL_MAGIC).into_owned(),
            found: String::from_utf8_lossy(magic).into_owned(),
        });
    }
    if rest.len() < CHECKSUM_LEN {
        return Err(Error::CorruptFile("truncated file".into()));
    }
    let (payload, checksum) = rest.split_at(rest.len() - CHECKSUM_LEN);
    if Sha256::digest(payload).as_slice() != checksum {
        return Err(Error::CorruptFile("checksum mismatch".into()));
    }

    let mut cur = Cursor { bytes: payload, pos: 0 };
    let variant = match cur.u8()? {
        0 => Variant::Linear,
        1 => Variant::Quadratic,
        tag => return Err(Error::CorruptFile(format!("unknown variant tag {tag}"))),
    };
    let d = usize::try_from(cur.u64()?).map_err(|_| Error::CorruptFile("dimension overflow".into()))?;
    let dd = d
        .checked_mul(d)
        .filter(|&n| n.saturating_mul(8) <= payload.len())
        .ok_or_else(|| Error::CorruptFile(format!("implausible dimension {d}")))?;
    let u = cur.f64s(dd)?;
    let b = cur.f64s(d)?;
    let mean = match cur.u8()? {
        0 => None,
        1 => Some(cur.f64s(d)?),
        flag => return Err(Error::CorruptFile(format!("bad mean-vector flag {flag}"))),
    };
    if cur.pos != payload.len() {
        return Err(Error::CorruptFile("trailing bytes after payload".into()));
    }

    let mut model = BiasModel::from_parts(variant, u, b).map_err(|e| Error::CorruptFile(e.to_string()))?;
    if let Some(mean) = mean {
        model.set_mean_vector(mean)?;
    }
    Ok(model)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::CorruptFile("truncated payload".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n * 8)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}
