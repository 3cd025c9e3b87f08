use std::io::{self, Read, Write};

use thiserror::Error;

use super::Envelope;

pub const MAX_FRAME: usize = 64 * 1024 * 1024;

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("frame length {0} exceeds the 64 MiB limit")]
    TooLarge(usize),
    #[error("zero-length frame")]
    Empty,
    #[error("truncated frame: expected {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },
    #[error("invalid envelope JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}

/// JSON with object keys in sorted order.
pub fn to_sorted_json(env: &Envelope) -> Result<Vec<u8>, FrameError> {
    // serde_json's default map is ordered by key.
    let value = serde_json::to_value(env)?;
    Ok(serde_json::to_vec(&value)?)
}

/// 4-byte big-endian length, then the envelope JSON.
pub fn frame(env: &Envelope) -> Result<Vec<u8>, FrameError> {
    let body = to_sorted_json(env)?;
    if body.len() > MAX_FRAME {
        return Err(FrameError::TooLarge(body.len()));
    }
    let mut out = Vec::with_capacity(body.len() + 4);
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&body);
    Ok(out)
}

fn check_len(len: usize) -> Result<(), FrameError> {
    match len {
        0 => Err(FrameError::Empty),
        l if l > MAX_FRAME => Err(FrameError::TooLarge(l)),
        _ => Ok(()),
    }
}

/// Decode exactly one frame.
pub fn unframe(bytes: &[u8]) -> Result<Envelope, FrameError> {
    if bytes.len() < 4 {
        return Err(FrameError::Truncated { expected: 4, got: bytes.len() });
    }
    let len = u32::from_be_bytes(bytes[..4].try_into().unwrap()) as usize;
    check_len(len)?;
    let body = &bytes[4..];
    if body.len() != len {
        return Err(FrameError::Truncated { expected: len, got: body.len() });
    }
    Ok(serde_json::from_slice(body)?)
}

pub fn write_frame<W: Write>(w: &mut W, env: &Envelope) -> Result<(), FrameError> {
    w.write_all(&frame(env)?)?;
    Ok(())
}

/// Next frame from a stream; `None` on end of stream at a frame boundary.
pub fn read_frame<R: Read>(r: &mut R) -> Result<Option<Envelope>, FrameError> {
    let mut head = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut head[got..])? {
            0 if got == 0 => return Ok(None),
            0 => return Err(FrameError::Truncated { expected: 4, got }),
            k => got += k,
        }
    }
    let len = u32::from_be_bytes(head) as usize;
    check_len(len)?;
    let mut body = vec![0u8; len];
    let mut got = 0;
    while got < len {
        match r.read(&mut body[got..])? {
            0 => return Err(FrameError::Truncated { expected: len, got }),
            k => got += k,
        }
    }
    Ok(Some(serde_json::from_slice(&body)?))
}
