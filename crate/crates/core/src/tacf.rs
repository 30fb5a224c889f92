//! `TACF` frame records.
//!
//! Layout of one record, all integers little-endian:
//!
//! ```text
//! b"TACF" | version: u16 | side: u32 | timestamp_ms: u64 | side*side x f64
//! ```
//!
//! A sequence file is a plain concatenation of records.

use std::io::{self, Read, Write};

use crate::error::{Error, Result};
use crate::frame::TactileFrame;

pub const MAGIC: &[u8; 4] = b"TACF";
pub const VERSION: u16 = 1;

pub fn write_frame<W: Write>(w: &mut W, frame: &TactileFrame) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let side =
        u32::try_from(frame.side()).map_err(|_| Error::Format(format!("side {} does not fit in u32", frame.side())))?;
    w.write_all(&side.to_le_bytes())?;
    w.write_all(&frame.timestamp_ms.to_le_bytes())?;
    for f in frame.forces() {
        w.write_all(&f.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_sequence<W: Write>(w: &mut W, frames: &[TactileFrame]) -> Result<()> {
    for f in frames {
        write_frame(w, f)?;
    }
    Ok(())
}

pub fn encode_sequence(frames: &[TactileFrame]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_sequence(&mut buf, frames).expect("writing to a Vec cannot fail");
    buf
}

/// Read one record. `Ok(None)` at a clean end of stream.
pub fn read_frame<R: Read>(r: &mut R) -> Result<Option<TactileFrame>> {
    let mut magic = [0u8; 4];
    if !read_exact_or_eof(r, &mut magic)? {
        return Ok(None);
    }
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let mut b2 = [0u8; 2];
    r.read_exact(&mut b2).map_err(truncated)?;
    let version = u16::from_le_bytes(b2);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4).map_err(truncated)?;
    let side = u32::from_le_bytes(b4) as usize;
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8).map_err(truncated)?;
    let timestamp = u64::from_le_bytes(b8);
    let n = side
        .checked_mul(side)
        .ok_or_else(|| Error::Format(format!("side {side} overflows")))?;
    let mut forces = Vec::with_capacity(n.min(1 << 24));
    for _ in 0..n {
        r.read_exact(&mut b8).map_err(truncated)?;
        forces.push(f64::from_le_bytes(b8));
    }
    TactileFrame::new(side, forces, timestamp)
        .map(Some)
        .map_err(|e| Error::Format(e.to_string()))
}

pub fn read_sequence<R: Read>(r: &mut R) -> Result<Vec<TactileFrame>> {
    let mut out = Vec::new();
    while let Some(f) = read_frame(r)? {
        out.push(f);
    }
    Ok(out)
}

pub fn decode_sequence(bytes: &[u8]) -> Result<Vec<TactileFrame>> {
    read_sequence(&mut &bytes[..])
}

fn truncated(e: io::Error) -> Error {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        Error::Format("truncated record".into())
    } else {
        Error::Io(e)
    }
}

// True if the buffer was filled, false on EOF before the first byte.
fn read_exact_or_eof<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<bool> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) if filled == 0 => return Ok(false),
            Ok(0) => return Err(Error::Format("truncated record".into())),
            Ok(k) => filled += k,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(true)
}
