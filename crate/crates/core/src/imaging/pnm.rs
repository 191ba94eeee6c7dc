//! 8-bit binary PNM (P5 grayscale, P6 RGB) reading and P5 writing.

use thiserror::Error;

use super::{GrayImage, ImageError};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecodeError {
    #[error("unrecognized image signature")]
    UnknownFormat,
    #[error("malformed PNM header: {0}")]
    MalformedHeader(String),
    #[error("unsupported maxval {0}, only 255 is accepted")]
    UnsupportedMaxval(u32),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("PNG decode failed: {0}")]
    Png(String),
    #[error(transparent)]
    Image(#[from] ImageError),
}

struct Header {
    channels: usize,
    width: usize,
    height: usize,
    payload_start: usize,
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderReader<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32, DecodeError> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(DecodeError::MalformedHeader(format!("missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| DecodeError::MalformedHeader(format!("{what} out of range")))
    }
}

fn parse_header(bytes: &[u8]) -> Result<Header, DecodeError> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        Some([b'P', _]) => return Err(DecodeError::MalformedHeader("only P5 and P6 are supported".into())),
        _ => return Err(DecodeError::UnknownFormat),
    };
    let mut rd = HeaderReader { bytes, pos: 2 };
    let width = rd.number("width")? as usize;
    let height = rd.number("height")? as usize;
    let maxval = rd.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(DecodeError::MalformedHeader(format!("zero dimension {width}x{height}")));
    }
    if maxval != 255 {
        return Err(DecodeError::UnsupportedMaxval(maxval));
    }
    match bytes.get(rd.pos) {
        Some(b) if b.is_ascii_whitespace() => {}
        _ => return Err(DecodeError::MalformedHeader("missing whitespace after maxval".into())),
    }
    Ok(Header { channels, width, height, payload_start: rd.pos + 1 })
}

fn decode_pnm<T: Real>(bytes: &[u8]) -> Result<GrayImage<T>, DecodeError> {
    let h = parse_header(bytes)?;
    let expected = h.width * h.height * h.channels;
    let payload = &bytes[h.payload_start.min(bytes.len())..];
    if payload.len() < expected {
        return Err(DecodeError::Truncated { expected, found: payload.len() });
    }
    let scale = T::lit(255.0);
    let data: Vec<T> = if h.channels == 1 {
        payload[..expected].iter().map(|&b| T::lit(b as f64) / scale).collect()
    } else {
        payload[..expected]
            .chunks_exact(3)
            .map(|px| T::lit(luma(px[0], px[1], px[2])) / scale)
            .collect()
    };
    Ok(GrayImage::new(h.width, h.height, data)?)
}

fn luma(r: u8, g: u8, b: u8) -> f64 {
    (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64).min(255.0)
}

#[cfg(feature = "png")]
fn decode_png<T: Real>(bytes: &[u8]) -> Result<GrayImage<T>, DecodeError> {
    let mut decoder = png::Decoder::new(bytes);
    decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = decoder.read_info().map_err(|e| DecodeError::Png(e.to_string()))?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(|e| DecodeError::Png(e.to_string()))?;
    let (w, h) = (info.width as usize, info.height as usize);
    let channels = info.color_type.samples();
    let scale = T::lit(255.0);
    let data = buf[..info.buffer_size()]
        .chunks_exact(channels)
        .map(|px| match channels {
            1 | 2 => T::lit(px[0] as f64) / scale,
            _ => T::lit(luma(px[0], px[1], px[2])) / scale,
        })
        .collect();
    Ok(GrayImage::new(w, h, data)?)
}

/// Decodes an 8-bit P5/P6 PNM (and PNG when built with the `png` feature) into
/// intensities in `[0, 1]`. RGB is reduced with `0.299 R + 0.587 G + 0.114 B`.
pub fn decode_image<T: Real>(bytes: &[u8]) -> Result<GrayImage<T>, DecodeError> {
    #[cfg(feature = "png")]
    if bytes.starts_with(b"\x89PNG") {
        return decode_png(bytes);
    }
    decode_pnm(bytes)
}

/// Encodes as binary P5, rounding intensities to 8 bits after clamping to `[0, 1]`.
pub fn encode_pgm<T: Real>(img: &GrayImage<T>) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.data().iter().map(|&v| {
        let v = v.to_f64_lossy().clamp(0.0, 1.0);
        (v * 255.0).round() as u8
    }));
    out
}
