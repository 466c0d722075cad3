//! Binary policy checkpoints.
//!
//! Layout, all little-endian:
//!
//! | bytes | content |
//! |---|---|
//! | 8 | magic `UUVSIMPO` |
//! | 4 | format version (`u32`) |
//! | 4 | number of dimension entries `k` (`u32`) |
//! | 8·k | dimensions (`u64`): obs, actions, hidden sizes... |
//! | 8 | parameter count `p` (`u64`) |
//! | 8·p | parameters (`f64`), `[actor | critic | log_std]` |
//! | 8 | normalization sample count (`f64`) |
//! | 8·obs | normalization means (`f64`) |
//! | 8·obs | normalization variances (`f64`) |

use std::path::Path;

use super::policy::{Policy, PolicyError, RunningNorm};

pub const MAGIC: &[u8; 8] = b"UUVSIMPO";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("not a policy checkpoint (bad magic)")]
    Magic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("checkpoint is truncated")]
    Truncated,
    #[error("checkpoint has {0} trailing bytes")]
    Trailing(usize),
    #[error("checkpoint dimensions are invalid")]
    Dims,
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn to_bytes(policy: &Policy) -> Vec<u8> {
    let mut dims = vec![policy.obs_dim() as u64, policy.n_actions() as u64];
    dims.extend(policy.hidden().iter().map(|h| *h as u64));
    let mut out = Vec::with_capacity(32 + 8 * (dims.len() + policy.params.len() + 2 * policy.obs_dim()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for d in &dims {
        out.extend_from_slice(&d.to_le_bytes());
    }
    out.extend_from_slice(&(policy.params.len() as u64).to_le_bytes());
    let norm = &policy.norm;
    let floats = policy.params.iter().chain([&norm.count]).chain(&norm.mean).chain(&norm.var);
    for v in floats {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a>(&'a [u8]);

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], CheckpointError> {
        if self.0.len() < N {
            return Err(CheckpointError::Truncated);
        }
        let (head, rest) = self.0.split_at(N);
        self.0 = rest;
        Ok(head.try_into().expect("length checked"))
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        self.take().map(u32::from_le_bytes)
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        self.take().map(u64::from_le_bytes)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, CheckpointError> {
        if self.0.len() / 8 < n {
            return Err(CheckpointError::Truncated);
        }
        (0..n).map(|_| self.take().map(f64::from_le_bytes)).collect()
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<Policy, CheckpointError> {
    let mut r = Reader(bytes);
    if &r.take::<8>()? != MAGIC {
        return Err(CheckpointError::Magic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(CheckpointError::Version(version));
    }
    let k = r.u32()? as usize;
    if !(3..=64).contains(&k) {
        return Err(CheckpointError::Dims);
    }
    let dims = (0..k).map(|_| r.u64()).collect::<Result<Vec<_>, _>>()?;
    if dims.iter().any(|d| *d == 0 || *d > 1 << 20) {
        return Err(CheckpointError::Dims);
    }
    let dims: Vec<usize> = dims.into_iter().map(|d| d as usize).collect();
    let (obs, actions, hidden) = (dims[0], dims[1], &dims[2..]);
    let n_params = usize::try_from(r.u64()?).map_err(|_| CheckpointError::Dims)?;
    let params = r.f64s(n_params)?;
    let count = r.f64s(1)?[0];
    let mean = r.f64s(obs)?;
    let var = r.f64s(obs)?;
    if !r.0.is_empty() {
        return Err(CheckpointError::Trailing(r.0.len()));
    }
    Ok(Policy::from_parts(obs, actions, hidden, params, RunningNorm { count, mean, var })?)
}

pub fn save(policy: &Policy, path: &Path) -> Result<(), CheckpointError> {
    std::fs::write(path, to_bytes(policy))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Policy, CheckpointError> {
    from_bytes(&std::fs::read(path)?)
}
