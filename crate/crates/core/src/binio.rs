//! Little-endian helpers shared by the binary file formats.

use std::io::{ErrorKind, Read, Write};

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use crate::complex::Complex;
use crate::error::{Error, Result};

/// Largest element count a header may announce before it is treated as corrupt.
pub(crate) const MAX_ELEMENTS: usize = 1 << 31;

fn eof(e: std::io::Error) -> Error {
    if e.kind() == ErrorKind::UnexpectedEof {
        Error::Format("unexpected end of file".into())
    } else {
        Error::Io(e)
    }
}

pub(crate) struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    pub fn new(inner: R) -> Self {
        Reader { inner }
    }

    pub fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let mut buf = [0u8; 4];
        self.inner.read_exact(&mut buf).map_err(eof)?;
        if &buf != expected {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&buf),
                String::from_utf8_lossy(expected)
            )));
        }
        Ok(())
    }

    pub fn version(&mut self, expected: u32) -> Result<()> {
        let found = self.u32()?;
        if found != expected {
            return Err(Error::VersionMismatch { expected, found });
        }
        Ok(())
    }

    pub fn u8(&mut self) -> Result<u8> {
        self.inner.read_u8().map_err(eof)
    }

    pub fn u32(&mut self) -> Result<u32> {
        self.inner.read_u32::<LE>().map_err(eof)
    }

    pub fn u64(&mut self) -> Result<u64> {
        self.inner.read_u64::<LE>().map_err(eof)
    }

    pub fn f64(&mut self) -> Result<f64> {
        self.inner.read_f64::<LE>().map_err(eof)
    }

    /// A `u32` count bounded by [`MAX_ELEMENTS`].
    pub fn count(&mut self, what: &str) -> Result<usize> {
        let n = self.u32()? as usize;
        if n > MAX_ELEMENTS {
            return Err(Error::Format(format!("{what} count {n} is implausible")));
        }
        Ok(n)
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let mut out = vec![0.0; n];
        self.inner.read_f64_into::<LE>(&mut out).map_err(eof)?;
        Ok(out)
    }

    pub fn complex(&mut self, n: usize) -> Result<Vec<Complex>> {
        let flat = self.f64s(2 * n)?;
        Ok(flat.chunks_exact(2).map(|p| Complex::new(p[0], p[1])).collect())
    }

    /// Fails unless the stream is exhausted.
    pub fn finish(mut self) -> Result<()> {
        let mut probe = [0u8; 1];
        match self.inner.read(&mut probe)? {
            0 => Ok(()),
            _ => Err(Error::Format("trailing bytes after payload".into())),
        }
    }
}

pub(crate) struct Writer<W> {
    inner: W,
}

impl<W: Write> Writer<W> {
    pub fn new(inner: W) -> Self {
        Writer { inner }
    }

    pub fn bytes(&mut self, b: &[u8]) -> Result<()> {
        Ok(self.inner.write_all(b)?)
    }

    pub fn u8(&mut self, v: u8) -> Result<()> {
        Ok(self.inner.write_u8(v)?)
    }

    pub fn u32(&mut self, v: u32) -> Result<()> {
        Ok(self.inner.write_u32::<LE>(v)?)
    }

    pub fn u64(&mut self, v: u64) -> Result<()> {
        Ok(self.inner.write_u64::<LE>(v)?)
    }

    pub fn f64(&mut self, v: f64) -> Result<()> {
        Ok(self.inner.write_f64::<LE>(v)?)
    }

    pub fn len(&mut self, n: usize) -> Result<()> {
        let n = u32::try_from(n).map_err(|_| Error::Format(format!("length {n} exceeds u32")))?;
        self.u32(n)
    }

    pub fn f64s(&mut self, v: &[f64]) -> Result<()> {
        v.iter().try_for_each(|x| self.f64(*x))
    }

    pub fn complex(&mut self, v: &[Complex]) -> Result<()> {
        v.iter().try_for_each(|z| {
            self.f64(z.re)?;
            self.f64(z.im)
        })
    }

}
