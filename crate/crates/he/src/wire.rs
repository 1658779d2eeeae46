//! Component framing shared by ciphertext and key files: u32 length then little-endian u64 words.

use crate::error::HeError;

pub(crate) struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new(magic: &[u8; 4]) -> Self {
        Self { buf: magic.to_vec() }
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn components(&mut self, comps: &[&[u64]]) {
        self.u32(comps.len() as u32);
        for c in comps {
            self.u32(c.len() as u32);
            self.buf.reserve(c.len() * 8);
            for w in *c {
                self.buf.extend_from_slice(&w.to_le_bytes());
            }
        }
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8], magic: &[u8; 4]) -> Result<Self, HeError> {
        if buf.len() < 4 || &buf[..4] != magic {
            return Err(HeError::Decode(format!(
                "bad magic, expected {:?}",
                String::from_utf8_lossy(magic)
            )));
        }
        Ok(Self { buf, pos: 4 })
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], HeError> {
        if self.buf.len() - self.pos < n {
            return Err(HeError::Decode("truncated input".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8, HeError> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16, HeError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub fn u32(&mut self) -> Result<u32, HeError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64, HeError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    /// Reads the component list; rejects lengths that overrun the buffer before allocating.
    pub fn components(&mut self) -> Result<Vec<Vec<u64>>, HeError> {
        let count = self.u32()? as usize;
        if count > 4096 {
            return Err(HeError::Decode(format!("implausible component count {count}")));
        }
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let len = self.u32()? as usize;
            let bytes = self.take(len.checked_mul(8).ok_or_else(|| HeError::Decode("length overflow".into()))?)?;
            out.push(bytes.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect());
        }
        Ok(out)
    }

    pub fn finish(self) -> Result<(), HeError> {
        if self.pos != self.buf.len() {
            return Err(HeError::Decode(format!("{} trailing bytes", self.buf.len() - self.pos)));
        }
        Ok(())
    }
}
