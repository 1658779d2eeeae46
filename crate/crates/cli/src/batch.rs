//! Ciphertext batch files: one ciphertext per tensor position, instances across slots.
//!
//! Layout (little-endian): `"CDLB"`, u16 version, u8 kind, 32-byte public-key fingerprint,
//! u32 instance count, u8 rank, rank × u32 dims, u32 ciphertext count, then each ciphertext
//! as u32 length + bytes.

use hecnn_core::{Shape, Tensor};
use hecnn_he::{Ciphertext, HeContext};

use crate::error::CliError;

pub const BATCH_MAGIC: &[u8; 4] = b"CDLB";
pub const BATCH_VERSION: u16 = 1;
const MAX_RANK: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchKind {
    Inputs = 0,
    Results = 1,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchFile {
    pub kind: BatchKind,
    /// Fingerprint of the public key the inputs were encrypted under.
    pub fingerprint: [u8; 32],
    pub instances: usize,
    pub shape: Shape,
    /// Serialized ciphertexts, kept as bytes so outputs can be compared exactly.
    pub cts: Vec<Vec<u8>>,
}

impl BatchFile {
    pub fn from_tensor(kind: BatchKind, fingerprint: [u8; 32], instances: usize, t: &Tensor<Ciphertext>) -> Self {
        Self { kind, fingerprint, instances, shape: t.shape.clone(), cts: t.data.iter().map(Ciphertext::to_bytes).collect() }
    }

    pub fn to_tensor(&self, ctx: &HeContext) -> Result<Tensor<Ciphertext>, CliError> {
        let data = self
            .cts
            .iter()
            .enumerate()
            .map(|(i, b)| ctx.deserialize_ct(b).map_err(|e| CliError::validation(format!("ciphertext {i}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Tensor::new(self.shape.clone(), data))
    }

    pub fn byte_len(&self) -> usize {
        4 + 2 + 1 + 32 + 4 + 1 + 4 * self.shape.0.len() + 4 + self.cts.iter().map(|c| 4 + c.len()).sum::<usize>()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.byte_len());
        out.extend_from_slice(BATCH_MAGIC);
        out.extend_from_slice(&BATCH_VERSION.to_le_bytes());
        out.push(self.kind as u8);
        out.extend_from_slice(&self.fingerprint);
        out.extend_from_slice(&(self.instances as u32).to_le_bytes());
        out.push(self.shape.0.len() as u8);
        for &d in &self.shape.0 {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.extend_from_slice(&(self.cts.len() as u32).to_le_bytes());
        for c in &self.cts {
            out.extend_from_slice(&(c.len() as u32).to_le_bytes());
            out.extend_from_slice(c);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CliError> {
        let mut r = Cursor { buf: bytes, pos: 0 };
        if r.take(4)? != BATCH_MAGIC {
            return Err(bad("not a ciphertext batch (bad magic)"));
        }
        let version = u16::from_le_bytes(r.array()?);
        if version != BATCH_VERSION {
            return Err(bad(&format!("unsupported batch version {version}")));
        }
        let kind = match r.u8()? {
            0 => BatchKind::Inputs,
            1 => BatchKind::Results,
            k => return Err(bad(&format!("unknown batch kind {k}"))),
        };
        let fingerprint = r.array()?;
        let instances = r.u32()? as usize;
        let rank = r.u8()? as usize;
        if rank == 0 || rank > MAX_RANK {
            return Err(bad(&format!("tensor rank {rank} outside 1..={MAX_RANK}")));
        }
        let dims = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        let shape = Shape(dims);
        let count = r.u32()? as usize;
        let positions = shape.0.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
        if positions != Some(count) {
            return Err(bad(&format!("{count} ciphertexts do not fill shape {shape}")));
        }
        // Every ciphertext needs at least its length prefix.
        if count > (bytes.len() - r.pos) / 4 {
            return Err(bad("ciphertext count exceeds file size"));
        }
        let mut cts = Vec::with_capacity(count);
        for _ in 0..count {
            let len = r.u32()? as usize;
            cts.push(r.take(len)?.to_vec());
        }
        if r.pos != bytes.len() {
            return Err(bad(&format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Self { kind, fingerprint, instances, shape, cts })
    }
}

fn bad(msg: &str) -> CliError {
    CliError::validation(format!("batch file: {msg}"))
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CliError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| bad("truncated"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], CliError> {
        Ok(self.take(N)?.try_into().unwrap())
    }

    fn u8(&mut self) -> Result<u8, CliError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, CliError> {
        Ok(u32::from_le_bytes(self.array()?))
    }
}
