//! Binary checkpoint format (all integers and floats little-endian):
//!
//! ```text
//! "DGDN"            magic
//! u32 version       1 = shared B block per stage, 2 = k−1 distinct B blocks
//! u32 p, u32 k, u32 stages
//! per stage:
//!   f64 raw_eta
//!   for each of [A.weight, A.bias, (B.weight, B.bias)…, fuse.weight, fuse.bias]:
//!     u64 n, then n × f64
//! u64 checksum      FNV-1a 64 over every preceding byte
//! ```

use std::path::Path;

use super::{DgdnConfig, DgdnModel};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"DGDN";
const VERSION_SHARED_B: u32 = 1;
const VERSION_DISTINCT_B: u32 = 2;

pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

impl DgdnModel {
    pub fn to_checkpoint_bytes(&self) -> Vec<u8> {
        let cfg = self.config();
        let mut out = Vec::with_capacity(32 + 8 * (self.num_parameters() + 8 * self.stages.len()));
        out.extend_from_slice(CHECKPOINT_MAGIC);
        let version = if cfg.shared_b {
            VERSION_SHARED_B
        } else {
            VERSION_DISTINCT_B
        };
        out.extend_from_slice(&version.to_le_bytes());
        for v in [cfg.p, cfg.k, cfg.stages] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for stage in &self.stages {
            let params = stage.params();
            out.extend_from_slice(&params[0].item().to_le_bytes());
            for t in &params[1..] {
                out.extend_from_slice(&(t.len() as u64).to_le_bytes());
                for v in t.data() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        let checksum = fnv1a64(&out);
        out.extend_from_slice(&checksum.to_le_bytes());
        out
    }

    pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 {
            return Err(Error::Integrity(format!("file is only {} bytes", bytes.len())));
        }
        if &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(Error::Version(format!(
                "bad magic {:?}, expected {:?}",
                &bytes[..4],
                CHECKPOINT_MAGIC
            )));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        let shared_b = match version {
            VERSION_SHARED_B => true,
            VERSION_DISTINCT_B => false,
            v => return Err(Error::Version(format!("checkpoint version {v} is not supported"))),
        };
        if bytes.len() < 28 {
            return Err(Error::Integrity("truncated header".into()));
        }
        let (payload, tail) = bytes.split_at(bytes.len() - 8);
        let stored = u64::from_le_bytes(tail.try_into().unwrap());
        if fnv1a64(payload) != stored {
            return Err(Error::Integrity("checksum mismatch".into()));
        }

        let mut r = Reader {
            buf: payload,
            pos: 8,
        };
        let p = r.u32()? as usize;
        let k = r.u32()? as usize;
        let stages = r.u32()? as usize;
        let config = DgdnConfig {
            p,
            k,
            stages,
            shared_b,
        };
        let mut model = DgdnModel::zeroed(config)
            .map_err(|e| Error::Integrity(format!("invalid header: {e}")))?;
        for stage in &mut model.stages {
            let mut params = stage.params_mut();
            *params[0].data_mut().first_mut().unwrap() = r.f64()?;
            for t in params.iter_mut().skip(1) {
                let n = r.u64()? as usize;
                if n != t.len() {
                    return Err(Error::Integrity(format!(
                        "array of {n} values where {} expected",
                        t.len()
                    )));
                }
                for v in t.data_mut() {
                    *v = r.f64()?;
                }
            }
        }
        if r.pos != payload.len() {
            return Err(Error::Integrity(format!(
                "{} trailing bytes",
                payload.len() - r.pos
            )));
        }
        Ok(model)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Integrity("unexpected end of payload".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn save_checkpoint(model: &DgdnModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, model.to_checkpoint_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<DgdnModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    DgdnModel::from_checkpoint_bytes(&bytes)
}
