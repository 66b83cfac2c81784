//! Binary policy files.
//!
//! Layout, all little-endian: the magic `SBPP`, a `u32` format version, a
//! `u32` network count (2: actor, critic), per network a `u32` layer count
//! followed by that many `u32` layer sizes, then every parameter as `f64`,
//! actor first. Within a network the parameters are ordered layer by layer,
//! weights row-major (`out × in`) then biases.

use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::mlp::{parameter_count, Mlp};
use crate::ppo::PolicyParams;

pub const MAGIC: [u8; 4] = *b"SBPP";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PolicyFileError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },
    #[error("unsupported format version: expected {expected}, found {found}")]
    UnsupportedVersion { expected: u32, found: u32 },
    #[error("policy file truncated: needed {needed} bytes, found {found}")]
    Truncated { needed: usize, found: usize },
    #[error("malformed policy file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn encode(params: &PolicyParams) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&2u32.to_le_bytes());
    for net in [&params.actor, &params.critic] {
        out.extend_from_slice(&(net.sizes().len() as u32).to_le_bytes());
        for &s in net.sizes() {
            out.extend_from_slice(&(s as u32).to_le_bytes());
        }
    }
    for net in [&params.actor, &params.critic] {
        for p in net.params() {
            out.extend_from_slice(&p.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], PolicyFileError> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(PolicyFileError::Truncated {
                needed: end,
                found: self.bytes.len(),
            });
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, PolicyFileError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64, PolicyFileError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<PolicyParams, PolicyFileError> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4).map_err(|_| PolicyFileError::BadMagic {
        expected: String::from_utf8_lossy(&MAGIC).into_owned(),
        found: String::from_utf8_lossy(bytes).into_owned(),
    })?;
    if magic != MAGIC {
        return Err(PolicyFileError::BadMagic {
            expected: String::from_utf8_lossy(&MAGIC).into_owned(),
            found: String::from_utf8_lossy(magic).into_owned(),
        });
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(PolicyFileError::UnsupportedVersion {
            expected: VERSION,
            found: version,
        });
    }
    let n_nets = r.u32()?;
    if n_nets != 2 {
        return Err(PolicyFileError::Malformed(format!(
            "expected 2 networks, found {n_nets}"
        )));
    }
    let mut shapes = Vec::new();
    for _ in 0..2 {
        let n = r.u32()? as usize;
        if !(2..=64).contains(&n) {
            return Err(PolicyFileError::Malformed(format!("implausible layer count {n}")));
        }
        let sizes = (0..n)
            .map(|_| r.u32().map(|s| s as usize))
            .collect::<Result<Vec<_>, _>>()?;
        if sizes.iter().any(|&s| s == 0 || s > 1 << 20) {
            return Err(PolicyFileError::Malformed(format!("invalid layer sizes {sizes:?}")));
        }
        shapes.push(sizes);
    }
    let mut nets = Vec::new();
    for sizes in &shapes {
        let count = parameter_count(sizes);
        let needed = r.pos + 8 * count;
        if needed > bytes.len() {
            return Err(PolicyFileError::Truncated {
                needed,
                found: bytes.len(),
            });
        }
        let params = (0..count).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
        nets.push(Mlp::from_params(sizes, params).expect("sizes checked"));
    }
    if r.pos != bytes.len() {
        return Err(PolicyFileError::Malformed(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    let critic = nets.pop().expect("two networks");
    let actor = nets.pop().expect("two networks");
    if actor.input_dim() != critic.input_dim() || critic.output_dim() != 1 {
        return Err(PolicyFileError::Malformed("actor and critic shapes disagree".into()));
    }
    Ok(PolicyParams { actor, critic })
}

/// Writes atomically through a temporary file in the same directory.
pub fn save(params: &PolicyParams, path: &Path) -> Result<(), PolicyFileError> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&encode(params))?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<PolicyParams, PolicyFileError> {
    decode(&fs::read(path)?)
}
