//! Binary PGM (P5) and PPM (P6) images with maxval 255.
//!
//! PPM pixels are interleaved RGB on disk; [`FrameBuffer`] keeps channels
//! planar, so reads and writes transpose.

use std::path::Path;

use sepris_core::dab::FrameBuffer;

use crate::error::{read, write, FormatError};

const KIND: &str = "PNM";

pub fn encode(frame: &FrameBuffer) -> Result<Vec<u8>, FormatError> {
    let magic = match frame.channels() {
        1 => "P5",
        3 => "P6",
        c => return Err(FormatError::malformed(KIND, format!("{c} channels cannot be written as PGM/PPM"))),
    };
    let (w, h, c) = (frame.width(), frame.height(), frame.channels());
    let mut out = format!("{magic}\n{w} {h}\n255\n").into_bytes();
    let plane_len = w * h;
    out.reserve(plane_len * c);
    for i in 0..plane_len {
        for ch in 0..c {
            out.push(frame.plane(ch)[i]);
        }
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<FrameBuffer, FormatError> {
    let mut pos = 0;
    let mut token = || -> Result<&str, FormatError> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if bytes.get(pos) == Some(&b'#') {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(FormatError::Truncated(KIND));
        }
        std::str::from_utf8(&bytes[start..pos]).map_err(|_| FormatError::BadMagic(KIND))
    };
    let channels = match token()? {
        "P5" => 1,
        "P6" => 3,
        _ => return Err(FormatError::BadMagic(KIND)),
    };
    let mut num = |what: &str| -> Result<usize, FormatError> {
        token()?.parse().map_err(|_| FormatError::malformed(KIND, format!("bad {what}")))
    };
    let (w, h, maxval) = (num("width")?, num("height")?, num("maxval")?);
    if maxval != 255 {
        return Err(FormatError::malformed(KIND, format!("maxval {maxval} unsupported, only 255")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    let raster = bytes.get(pos + 1..).ok_or(FormatError::Truncated(KIND))?;
    let n = w.checked_mul(h).and_then(|p| p.checked_mul(channels)).ok_or_else(|| FormatError::malformed(KIND, "dimensions overflow"))?;
    if raster.len() < n {
        return Err(FormatError::Truncated(KIND));
    }
    let plane_len = w * h;
    let mut planar = vec![0u8; n];
    for (i, &v) in raster[..n].iter().enumerate() {
        planar[(i % channels) * plane_len + i / channels] = v;
    }
    FrameBuffer::new(w, h, channels, planar).map_err(|e| FormatError::malformed(KIND, e.to_string()))
}

pub fn load(path: &Path) -> Result<FrameBuffer, FormatError> {
    decode(&read(path)?)
}

pub fn save(path: &Path, frame: &FrameBuffer) -> Result<(), FormatError> {
    write(path, &encode(frame)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use sepris_core::synth;

    #[test]
    fn gray_and_colour_round_trip() {
        for c in [1, 3] {
            let f = synth::natural_image(13, 7, c, 5);
            assert_eq!(decode(&encode(&f).unwrap()).unwrap(), f);
        }
    }

    #[test]
    fn reads_comments_and_interleaving() {
        let mut b = b"P6\n# made by hand\n2 1\n255\n".to_vec();
        b.extend_from_slice(&[1, 2, 3, 4, 5, 6]);
        let f = decode(&b).unwrap();
        assert_eq!(f.plane(0), &[1, 4]);
        assert_eq!(f.plane(2), &[3, 6]);
    }

    #[test]
    fn rejects_junk() {
        assert!(matches!(decode(b"P2\n1 1\n255\n0"), Err(FormatError::BadMagic(_))));
        assert!(matches!(decode(b"P5\n4 4\n255\n\0\0"), Err(FormatError::Truncated(_))));
        assert!(decode(b"P5\n1 1\n65535\n\0\0").is_err());
    }
}
