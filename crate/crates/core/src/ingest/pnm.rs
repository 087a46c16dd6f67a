//! Raster file I/O.
//!
//! Binary portable pixmap (`P6`, maxval 255) is the interchange format and
//! is handled here directly. Binary graymaps (`P5`) are read and expanded to
//! RGB. Files with a `.png` extension go through the `image` crate.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::RasterImage;

/// Largest accepted pixel count (width x height).
pub const MAX_PIXELS: usize = 1 << 31;

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<&'a [u8]> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::CorruptImage("truncated header".into()));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let tok = self.token()?;
        let text = std::str::from_utf8(tok)
            .map_err(|_| Error::CorruptImage(format!("non-ASCII {what}")))?;
        if !text.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::CorruptImage(format!("invalid {what} {text:?}")));
        }
        text.parse()
            .map_err(|_| Error::UnsupportedImage(format!("{what} {text} is too large")))
    }
}

/// Decodes a binary PPM (`P6`) or PGM (`P5`) with maxval 255.
pub fn decode_pnm(bytes: &[u8]) -> Result<RasterImage> {
    let mut reader = HeaderReader { bytes, pos: 0 };
    let magic = reader.token()?;
    let channels = match magic {
        b"P6" => 3,
        b"P5" => 1,
        _ => {
            return Err(Error::UnsupportedImage(format!(
                "magic {:?} is not P6 or P5",
                String::from_utf8_lossy(magic)
            )))
        }
    };
    let width = reader.number("width")?;
    let height = reader.number("height")?;
    let maxval = reader.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::CorruptImage(format!("zero extent {width}x{height}")));
    }
    if maxval != 255 {
        return Err(Error::UnsupportedImage(format!("maxval {maxval}, only 255 supported")));
    }
    let pixel_count = width
        .checked_mul(height)
        .filter(|&n| n <= MAX_PIXELS)
        .ok_or_else(|| Error::UnsupportedImage(format!("dimensions {width}x{height} too large")))?;
    // Exactly one whitespace byte separates the header from the raster.
    match bytes.get(reader.pos) {
        Some(b) if b.is_ascii_whitespace() => reader.pos += 1,
        _ => return Err(Error::CorruptImage("missing raster data".into())),
    }
    let needed = pixel_count * channels;
    let body = &bytes[reader.pos..];
    if body.len() < needed {
        return Err(Error::CorruptImage(format!(
            "header declares {needed} bytes of samples, found {}",
            body.len()
        )));
    }
    let body = &body[..needed];
    if channels == 1 {
        RasterImage::from_gray(width, height, body)
    } else {
        RasterImage::new(width, height, body.to_vec())
    }
}

/// Encodes as binary PPM (`P6`, maxval 255).
pub fn encode_ppm(image: &RasterImage) -> Vec<u8> {
    let header = format!("P6\n{} {}\n255\n", image.width(), image.height());
    let mut out = Vec::with_capacity(header.len() + image.pixels().len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(image.pixels());
    out
}

fn is_png(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

pub fn read_image(path: impl AsRef<Path>) -> Result<RasterImage> {
    let path = path.as_ref();
    if is_png(path) {
        let decoded = image::open(path)
            .map_err(|e| Error::CorruptImage(format!("{}: {e}", path.display())))?
            .into_rgb8();
        let (w, h) = decoded.dimensions();
        return RasterImage::new(w as usize, h as usize, decoded.into_raw());
    }
    let bytes = fs::read(path).map_err(|e| Error::file(path, e))?;
    decode_pnm(&bytes)
}

/// Writes atomically: the data goes to a temporary file in the target
/// directory which is then renamed over `path`.
pub fn write_image(image: &RasterImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if is_png(path) {
        let mut buf = Vec::new();
        image::write_buffer_with_format(
            &mut std::io::Cursor::new(&mut buf),
            image.pixels(),
            image.width() as u32,
            image.height() as u32,
            image::ExtendedColorType::Rgb8,
            image::ImageFormat::Png,
        )
        .map_err(|e| Error::UnsupportedImage(e.to_string()))?;
        return write_atomic(path, &buf);
    }
    write_atomic(path, &encode_ppm(image))
}

/// Writes `bytes` to `path` via a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::file(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::file(path, e))?;
    tmp.persist(path).map_err(|e| Error::file(path, e.error))?;
    Ok(())
}
