//! Netpbm codecs (PGM P2/P5, PPM P3/P6 at maxval 255), grayscale conversion
//! and intensity normalization.

use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::oracle::RealFrame;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed image at byte {offset}: {reason}")]
    Format { offset: usize, reason: String },
    #[error("invalid image dimensions {width}x{height} for {len} pixels")]
    Dimensions { width: usize, height: usize, len: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 || width.checked_mul(height) != Some(pixels.len()) {
            return Err(ImageError::Dimensions {
                width,
                height,
                len: pixels.len(),
            });
        }
        Ok(GrayImage { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self, ImageError> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self, ImageError> {
        let mut pixels = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                pixels.push(f(r, c));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: u8) {
        self.pixels[row * self.width + col] = value;
    }

    pub fn min_max(&self) -> (u8, u8) {
        self.pixels
            .iter()
            .fold((u8::MAX, u8::MIN), |(lo, hi), &p| (lo.min(p), hi.max(p)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 || width.checked_mul(height) != Some(pixels.len()) {
            return Err(ImageError::Dimensions {
                width,
                height,
                len: pixels.len(),
            });
        }
        Ok(RgbImage { width, height, pixels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Image {
    Gray(GrayImage),
    Rgb(RgbImage),
}

impl Image {
    /// Grayscale view, converting color input with [`rgb_to_gray`].
    pub fn into_gray(self) -> GrayImage {
        match self {
            Image::Gray(g) => g,
            Image::Rgb(c) => rgb_to_gray(&c),
        }
    }
}

pub fn read_image(path: impl AsRef<Path>) -> Result<Image, ImageError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| ImageError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode(&bytes)
}

/// Convenience wrapper: read any supported file as grayscale.
pub fn read_gray(path: impl AsRef<Path>) -> Result<GrayImage, ImageError> {
    read_image(path).map(Image::into_gray)
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, reason: impl Into<String>) -> ImageError {
        ImageError::Format {
            offset: self.pos,
            reason: reason.into(),
        }
    }

    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.data.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.data.get(self.pos) {
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize, ImageError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.data.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            self.pos = start;
            return Err(if start >= self.data.len() {
                self.err(format!("unexpected end of data, expected {what}"))
            } else {
                self.err(format!("expected {what}"))
            });
        }
        std::str::from_utf8(&self.data[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| ImageError::Format {
                offset: start,
                reason: format!("{what} out of range"),
            })
    }

    fn sample(&mut self) -> Result<u8, ImageError> {
        let start = {
            self.skip_space_and_comments();
            self.pos
        };
        let v = self.number("sample")?;
        u8::try_from(v).map_err(|_| ImageError::Format {
            offset: start,
            reason: format!("sample {v} exceeds maxval 255"),
        })
    }
}

/// Decode a PGM/PPM byte buffer.
pub fn decode(data: &[u8]) -> Result<Image, ImageError> {
    let mut cur = Cursor { data, pos: 0 };
    let (binary, color) = match data.get(..2) {
        Some(b"P2") => (false, false),
        Some(b"P5") => (true, false),
        Some(b"P3") => (false, true),
        Some(b"P6") => (true, true),
        _ => return Err(cur.err("bad magic number, expected P2, P3, P5 or P6")),
    };
    cur.pos = 2;
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    cur.skip_space_and_comments();
    let maxval_at = cur.pos;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(ImageError::Format {
            offset: maxval_at,
            reason: format!("zero dimension {width}x{height}"),
        });
    }
    if maxval != 255 {
        return Err(ImageError::Format {
            offset: maxval_at,
            reason: format!("maxval {maxval} unsupported, only 255 is accepted"),
        });
    }
    let count = width
        .checked_mul(height)
        .ok_or_else(|| cur.err("dimensions overflow"))?;
    let channels = if color { 3 } else { 1 };
    let samples = if binary {
        if !cur.data.get(cur.pos).is_some_and(u8::is_ascii_whitespace) {
            return Err(cur.err("expected a single whitespace byte after maxval"));
        }
        cur.pos += 1;
        let need = count * channels;
        let end = cur.pos + need;
        if end > data.len() {
            return Err(ImageError::Format {
                offset: data.len(),
                reason: format!("truncated payload: need {need} bytes, found {}", data.len() - cur.pos),
            });
        }
        data[cur.pos..end].to_vec()
    } else {
        let mut out = Vec::with_capacity(count * channels);
        for _ in 0..count * channels {
            out.push(cur.sample()?);
        }
        out
    };
    if color {
        let pixels = samples.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        Ok(Image::Rgb(RgbImage::new(width, height, pixels)?))
    } else {
        Ok(Image::Gray(GrayImage::new(width, height, samples)?))
    }
}

/// Binary PGM (P5) encoding.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

/// Write `img` as a binary PGM.
///
/// The file appears at `path` only once fully written; on error the
/// destination is left untouched.
pub fn write_image(img: &GrayImage, path: impl AsRef<Path>) -> Result<(), ImageError> {
    let path = path.as_ref();
    let io_err = |source| ImageError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(&encode_pgm(img)).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

/// BT.601 luma, rounded half away from zero.
pub fn rgb_to_gray(img: &RgbImage) -> GrayImage {
    let pixels = img.pixels.iter().map(|&p| luma(p)).collect();
    GrayImage {
        width: img.width,
        height: img.height,
        pixels,
    }
}

fn luma([r, g, b]: [u8; 3]) -> u8 {
    // weights scaled by 1000 so the sum is exact; all terms are non-negative
    let weighted = 299 * r as u32 + 587 * g as u32 + 114 * b as u32;
    ((weighted + 500) / 1000).min(255) as u8
}

/// Map intensities to `[0, 1]` as `pixel / 255`.
pub fn normalize(img: &GrayImage) -> RealFrame {
    let values = img.pixels.iter().map(|&p| p as f64 / 255.0).collect();
    RealFrame::new(img.width, img.height, values).expect("dimensions already validated")
}
