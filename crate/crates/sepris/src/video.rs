//! SPRS video containers.
//!
//! Layout (little-endian): `"SPRS"`, u16 version, u16 camera-id length, id,
//! u32 date as days since 1970-01-01, u32 start second of the day, u16
//! width, u16 height, u8 channels, u8 fps, u32 frame count, then each frame's
//! planes back to back.

use std::path::Path;

use sepris_core::contract::Date;
use sepris_core::dab::FrameBuffer;
use sepris_core::storage::VideoRecord;

use crate::error::{read, write, FormatError, Reader};

pub const MAGIC: &[u8; 4] = b"SPRS";
pub const VERSION: u16 = 1;
const KIND: &str = "SPRS";

pub fn encode(record: &VideoRecord) -> Result<Vec<u8>, FormatError> {
    let first = &record.frames()[0];
    let narrow = |v: usize, what: &str| u16::try_from(v).map_err(|_| FormatError::malformed(KIND, format!("{what} {v} does not fit u16")));
    let days = u32::try_from(record.date().days_since_epoch()).map_err(|_| FormatError::malformed(KIND, "date before 1970"))?;
    let id = record.camera_id().as_bytes();
    let mut out = MAGIC.to_vec();
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&narrow(id.len(), "camera id length")?.to_le_bytes());
    out.extend_from_slice(id);
    out.extend_from_slice(&days.to_le_bytes());
    out.extend_from_slice(&record.start_seconds().to_le_bytes());
    out.extend_from_slice(&narrow(first.width(), "width")?.to_le_bytes());
    out.extend_from_slice(&narrow(first.height(), "height")?.to_le_bytes());
    out.push(first.channels() as u8);
    out.push(record.fps());
    out.extend_from_slice(&(record.frames().len() as u32).to_le_bytes());
    for f in record.frames() {
        out.extend_from_slice(f.pixels());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<VideoRecord, FormatError> {
    let mut r = Reader::new(bytes, KIND);
    if r.take(4)? != MAGIC {
        return Err(FormatError::BadMagic(KIND));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion { kind: KIND, version });
    }
    let id_len = usize::from(r.u16()?);
    let camera = std::str::from_utf8(r.take(id_len)?).map_err(|_| FormatError::malformed(KIND, "camera id is not UTF-8"))?.to_string();
    let date = Date::from_days_since_epoch(i64::from(r.u32()?));
    let start = r.u32()?;
    let (w, h) = (usize::from(r.u16()?), usize::from(r.u16()?));
    let (channels, fps) = (usize::from(r.u8()?), r.u8()?);
    let count = r.u32()? as usize;
    let frame_len = w * h * channels;
    let frames = (0..count)
        .map(|_| {
            let px = r.take(frame_len)?.to_vec();
            FrameBuffer::new(w, h, channels, px).map_err(|e| FormatError::malformed(KIND, e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if !r.rest().is_empty() {
        return Err(FormatError::malformed(KIND, "trailing bytes after last frame"));
    }
    VideoRecord::new(&camera, date, start, fps, frames).map_err(|e| FormatError::malformed(KIND, e.to_string()))
}

pub fn load(path: &Path) -> Result<VideoRecord, FormatError> {
    decode(&read(path)?)
}

pub fn save(path: &Path, record: &VideoRecord) -> Result<(), FormatError> {
    write(path, &encode(record)?)
}
