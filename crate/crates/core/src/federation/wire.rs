//! Broker message framing.
//!
//! Every message is a length-prefixed record, little-endian throughout:
//!
//! ```text
//! offset  size         field
//! 0       4            body length in bytes (u32, excludes these 4 bytes)
//! 4       1            msg_type   (1 = request, 2 = share)
//! 5       4            round      (u32)
//! 9       2            src client (u16)
//! 11      2            dst client (u16)
//! 13      1            layer      (u8)
//! 14      4            count      (u32)
//! 18      4·count      ids        (u32 global node ids)
//! ..      8·count·w    payload    (f64, row-major count × w)
//! ```
//!
//! The row width `w` is implied by the body length: requests carry no
//! payload, shares carry one row per id.

use byteorder::{ByteOrder, LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

pub const HEADER_LEN: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum MsgType {
    Request = 1,
    Share = 2,
}

impl MsgType {
    fn from_u8(b: u8) -> Result<Self> {
        match b {
            1 => Ok(MsgType::Request),
            2 => Ok(MsgType::Share),
            other => Err(Error::Format(format!("unknown message type {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub msg_type: MsgType,
    pub round: u32,
    pub src: u16,
    pub dst: u16,
    pub layer: u8,
    pub ids: Vec<u32>,
    pub payload: Vec<f64>,
}

impl Frame {
    /// Payload row width (0 when there is no payload).
    pub fn width(&self) -> usize {
        if self.ids.is_empty() {
            0
        } else {
            self.payload.len() / self.ids.len()
        }
    }

    pub fn encoded_len(&self) -> usize {
        4 + HEADER_LEN + 4 * self.ids.len() + 8 * self.payload.len()
    }
}

pub fn encode(f: &Frame) -> Result<Vec<u8>> {
    if !f.ids.is_empty() && !f.payload.len().is_multiple_of(f.ids.len()) {
        return Err(Error::Format(format!(
            "payload of {} values does not split into {} rows",
            f.payload.len(),
            f.ids.len()
        )));
    }
    if f.ids.is_empty() && !f.payload.is_empty() {
        return Err(Error::Format("payload without ids".into()));
    }
    let body = f.encoded_len() - 4;
    let body32 = u32::try_from(body).map_err(|_| Error::Format(format!("frame of {body} bytes is too large")))?;
    let mut out = Vec::with_capacity(body + 4);
    out.write_u32::<LE>(body32)?;
    out.write_u8(f.msg_type as u8)?;
    out.write_u32::<LE>(f.round)?;
    out.write_u16::<LE>(f.src)?;
    out.write_u16::<LE>(f.dst)?;
    out.write_u8(f.layer)?;
    out.write_u32::<LE>(f.ids.len() as u32)?;
    for &id in &f.ids {
        out.write_u32::<LE>(id)?;
    }
    for &v in &f.payload {
        out.write_u64::<LE>(v.to_bits())?;
    }
    Ok(out)
}

/// Decodes one frame from the front of `bytes`, returning it and the number
/// of bytes consumed.
pub fn decode(bytes: &[u8]) -> Result<(Frame, usize)> {
    if bytes.len() < 4 {
        return Err(Error::Format("truncated frame length".into()));
    }
    let body = LE::read_u32(bytes) as usize;
    let end = 4 + body;
    if body < HEADER_LEN || bytes.len() < end {
        return Err(Error::Format(format!("frame claims {body} body bytes, {} available", bytes.len() - 4)));
    }
    let mut r = &bytes[4..end];
    let msg_type = MsgType::from_u8(r.read_u8()?)?;
    let round = r.read_u32::<LE>()?;
    let src = r.read_u16::<LE>()?;
    let dst = r.read_u16::<LE>()?;
    let layer = r.read_u8()?;
    let count = r.read_u32::<LE>()? as usize;
    if r.len() < 4 * count {
        return Err(Error::Format(format!("frame lists {count} ids but is too short")));
    }
    let ids = (0..count).map(|_| r.read_u32::<LE>()).collect::<std::io::Result<Vec<_>>>()?;
    if !r.len().is_multiple_of(8) {
        return Err(Error::Format("payload is not a whole number of f64 values".into()));
    }
    let n = r.len() / 8;
    if (count == 0 && n > 0) || (count > 0 && !n.is_multiple_of(count)) {
        return Err(Error::Format(format!("{n} payload values do not split into {count} rows")));
    }
    let payload = (0..n)
        .map(|_| r.read_u64::<LE>().map(f64::from_bits))
        .collect::<std::io::Result<Vec<_>>>()?;
    Ok((
        Frame {
            msg_type,
            round,
            src,
            dst,
            layer,
            ids,
            payload,
        },
        end,
    ))
}
