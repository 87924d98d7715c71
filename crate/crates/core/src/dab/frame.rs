use alloc::vec;
use alloc::vec::Vec;

use super::DabError;

/// Side length of the DCT block.
pub const BLOCK: usize = 8;
/// Side length of the shuffled tile.
pub const TILE: usize = 32;

/// A raw 8-bit frame, channel-planar and row-major within each channel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameBuffer {
    width: usize,
    height: usize,
    channels: usize,
    pixels: Vec<u8>,
}

impl FrameBuffer {
    pub fn new(width: usize, height: usize, channels: usize, pixels: Vec<u8>) -> Result<Self, DabError> {
        if width == 0 || height == 0 {
            return Err(DabError::Geometry("frame dimensions must be positive"));
        }
        if channels != 1 && channels != 3 {
            return Err(DabError::Geometry("frame must have 1 or 3 channels"));
        }
        if pixels.len() != width * height * channels {
            return Err(DabError::Geometry("pixel count does not match dimensions"));
        }
        Ok(FrameBuffer { width, height, channels, pixels })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self, DabError> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn plane(&self, channel: usize) -> &[u8] {
        let n = self.width * self.height;
        &self.pixels[channel * n..(channel + 1) * n]
    }

    pub fn get(&self, channel: usize, x: usize, y: usize) -> u8 {
        self.pixels[(channel * self.height + y) * self.width + x]
    }

    pub fn set(&mut self, channel: usize, x: usize, y: usize, v: u8) {
        self.pixels[(channel * self.height + y) * self.width + x] = v;
    }

    pub fn same_shape(&self, other: &FrameBuffer) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    /// Top-left `width` × `height` region of every channel.
    pub fn crop(&self, width: usize, height: usize) -> Result<FrameBuffer, DabError> {
        if width == 0 || height == 0 {
            return Err(DabError::Geometry("crop to zero size"));
        }
        if width > self.width || height > self.height {
            return Err(DabError::Geometry("crop larger than frame"));
        }
        let mut out = Vec::with_capacity(width * height * self.channels);
        for c in 0..self.channels {
            let plane = self.plane(c);
            for y in 0..height {
                out.extend_from_slice(&plane[y * self.width..y * self.width + width]);
            }
        }
        FrameBuffer::new(width, height, self.channels, out)
    }
}

/// Rounds `n` up to the next multiple of `m`.
pub(crate) fn round_up(n: usize, m: usize) -> usize {
    n.div_ceil(m) * m
}

/// Quantized DCT coefficients laid out like the padded frame they came from:
/// block `(bx, by)` of channel `c` occupies rows `8*by..8*by+8` and columns
/// `8*bx..8*bx+8`, with the DC term at the block's top-left.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoefficientPlane {
    pub(crate) padded_width: usize,
    pub(crate) padded_height: usize,
    pub(crate) original_width: usize,
    pub(crate) original_height: usize,
    pub(crate) channels: usize,
    pub(crate) coefficients: Vec<i16>,
}

impl CoefficientPlane {
    pub fn new(
        padded_width: usize,
        padded_height: usize,
        original_width: usize,
        original_height: usize,
        channels: usize,
        coefficients: Vec<i16>,
    ) -> Result<Self, DabError> {
        if padded_width == 0 || padded_height == 0 || padded_width % TILE != 0 || padded_height % TILE != 0 {
            return Err(DabError::Geometry("padded dimensions must be positive multiples of 32"));
        }
        if original_width == 0
            || original_height == 0
            || original_width > padded_width
            || original_height > padded_height
        {
            return Err(DabError::Geometry("original dimensions must fit inside the padding"));
        }
        if channels != 1 && channels != 3 {
            return Err(DabError::Geometry("plane must have 1 or 3 channels"));
        }
        if coefficients.len() != padded_width * padded_height * channels {
            return Err(DabError::Geometry("coefficient count does not match dimensions"));
        }
        Ok(CoefficientPlane { padded_width, padded_height, original_width, original_height, channels, coefficients })
    }

    pub fn padded_width(&self) -> usize {
        self.padded_width
    }

    pub fn padded_height(&self) -> usize {
        self.padded_height
    }

    pub fn original_width(&self) -> usize {
        self.original_width
    }

    pub fn original_height(&self) -> usize {
        self.original_height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn coefficients(&self) -> &[i16] {
        &self.coefficients
    }

    pub fn coefficients_mut(&mut self) -> &mut [i16] {
        &mut self.coefficients
    }

    #[inline]
    pub fn index(&self, channel: usize, x: usize, y: usize) -> usize {
        (channel * self.padded_height + y) * self.padded_width + x
    }

    pub fn get(&self, channel: usize, x: usize, y: usize) -> i16 {
        self.coefficients[self.index(channel, x, y)]
    }

    pub fn set(&mut self, channel: usize, x: usize, y: usize, v: i16) {
        let i = self.index(channel, x, y);
        self.coefficients[i] = v;
    }

    pub fn blocks_x(&self) -> usize {
        self.padded_width / BLOCK
    }

    pub fn blocks_y(&self) -> usize {
        self.padded_height / BLOCK
    }

    pub fn tiles_x(&self) -> usize {
        self.padded_width / TILE
    }

    pub fn tiles_y(&self) -> usize {
        self.padded_height / TILE
    }

    /// Copies block `(bx, by)` of `channel` out in natural (row-major) order.
    pub fn read_block(&self, channel: usize, bx: usize, by: usize) -> [[i16; BLOCK]; BLOCK] {
        let mut out = [[0i16; BLOCK]; BLOCK];
        for (u, row) in out.iter_mut().enumerate() {
            let start = self.index(channel, bx * BLOCK, by * BLOCK + u);
            row.copy_from_slice(&self.coefficients[start..start + BLOCK]);
        }
        out
    }

    pub fn write_block(&mut self, channel: usize, bx: usize, by: usize, block: &[[i16; BLOCK]; BLOCK]) {
        for (u, row) in block.iter().enumerate() {
            let start = self.index(channel, bx * BLOCK, by * BLOCK + u);
            self.coefficients[start..start + BLOCK].copy_from_slice(row);
        }
    }
}

/// Extends the frame right and down by repeating its last column and row
/// until both dimensions are multiples of `multiple`.
pub fn pad_edges(frame: &FrameBuffer, multiple: usize) -> FrameBuffer {
    let pw = round_up(frame.width, multiple);
    let ph = round_up(frame.height, multiple);
    if pw == frame.width && ph == frame.height {
        return frame.clone();
    }
    let mut out = Vec::with_capacity(pw * ph * frame.channels);
    for c in 0..frame.channels {
        let plane = frame.plane(c);
        for y in 0..ph {
            let src = &plane[y.min(frame.height - 1) * frame.width..][..frame.width];
            out.extend_from_slice(src);
            let last = src[frame.width - 1];
            out.extend(core::iter::repeat(last).take(pw - frame.width));
        }
    }
    FrameBuffer { width: pw, height: ph, channels: frame.channels, pixels: out }
}
