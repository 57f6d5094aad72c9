//! Little-endian byte writer/reader shared by the binary containers.

use crate::error::FormatError;

#[derive(Default)]
pub(crate) struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn with_header(magic: &[u8; 4], version: u16) -> Self {
        let mut w = Writer::default();
        w.bytes(magic);
        w.u16(version);
        w
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
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

    /// Samples are stored at 32-bit precision.
    pub fn f32s(&mut self, values: &[f64]) {
        self.buf.reserve(values.len() * 4);
        for &v in values {
            self.buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }

    /// Length-prefixed (u8) identifier.
    pub fn short_str(&mut self, s: &str) -> Result<(), FormatError> {
        let len = u8::try_from(s.len())
            .map_err(|_| FormatError::Malformed(format!("name {s:?} longer than 255 bytes")))?;
        self.u8(len);
        self.bytes(s.as_bytes());
        Ok(())
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
    /// Checks magic and version, returning the version read.
    pub fn header(buf: &'a [u8], magic: &[u8; 4], version: u16) -> Result<Self, FormatError> {
        let head = &buf[..buf.len().min(4)];
        if head != magic {
            return Err(FormatError::BadMagic {
                expected: *magic,
                found: head.to_vec(),
            });
        }
        let mut r = Reader { buf, pos: 4 };
        let found = r.u16()?;
        if found != version {
            return Err(FormatError::VersionMismatch {
                found,
                supported: version,
            });
        }
        Ok(r)
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn at_end(&self) -> bool {
        self.pos == self.buf.len()
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        if self.remaining() < n {
            return Err(FormatError::Truncated {
                offset: self.pos,
                needed: n,
                available: self.remaining(),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16, FormatError> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    pub fn u32(&mut self) -> Result<u32, FormatError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn f32s(&mut self, n: usize) -> Result<Vec<f64>, FormatError> {
        let bytes = n
            .checked_mul(4)
            .ok_or_else(|| FormatError::Malformed("sample count overflows".into()))?;
        let b = self.take(bytes)?;
        Ok(b
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect())
    }

    pub fn short_str(&mut self) -> Result<String, FormatError> {
        let n = self.u8()? as usize;
        let b = self.take(n)?;
        String::from_utf8(b.to_vec()).map_err(|_| FormatError::Malformed("name is not UTF-8".into()))
    }

    pub fn expect_end(&self) -> Result<(), FormatError> {
        if self.at_end() {
            Ok(())
        } else {
            Err(FormatError::Malformed(format!(
                "{} trailing bytes",
                self.remaining()
            )))
        }
    }
}

pub(crate) fn to_u32(v: usize, what: &str) -> Result<u32, FormatError> {
    u32::try_from(v).map_err(|_| FormatError::Malformed(format!("{what} {v} exceeds u32")))
}

pub(crate) fn to_u8(v: usize, what: &str) -> Result<u8, FormatError> {
    u8::try_from(v).map_err(|_| FormatError::Malformed(format!("{what} {v} exceeds u8")))
}

/// Non-finite samples cannot come out of a well-formed container.
pub(crate) fn check_finite(values: &[f64], what: &str) -> Result<(), FormatError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(FormatError::Malformed(format!("{what} contains non-finite samples")))
    }
}
