//! Image containers, grayscale conversion and binary PGM/PPM I/O.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use crate::realmath::Real;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("malformed PNM data: {0}")]
    Format(String),
    #[error("unsupported PNM variant: {0}")]
    Unsupported(String),
    #[error("image dimensions must be positive and match the pixel data")]
    Dimensions,
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// 8-bit single-channel image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 || data.len() != width as usize * height as usize {
            return Err(ImageError::Dimensions);
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        Self {
            width,
            height,
            data: vec![value; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> u8) -> Self {
        let mut img = Self::filled(width, height, 0);
        for y in 0..height {
            for x in 0..width {
                img.data[(y * width + x) as usize] = f(x, y);
            }
        }
        img
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[(y * self.width + x) as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, v: u8) {
        self.data[(y * self.width + x) as usize] = v;
    }

    /// Bilinear intensity at sub-pixel `(x, y)`; pixel centres sit on integer
    /// coordinates. `None` when any of the four taps falls outside the image.
    pub fn sample_bilinear<R: Real>(&self, x: R, y: R) -> Option<R> {
        let (x0, y0) = (x.floor_to_int(), y.floor_to_int());
        if x0 < 0 || y0 < 0 || x0 + 1 >= self.width as i64 || y0 + 1 >= self.height as i64 {
            return None;
        }
        let fx = x - R::from_i64(x0);
        let fy = y - R::from_i64(y0);
        let px =
            |dx: i64, dy: i64| R::from_i64(self.get((x0 + dx) as u32, (y0 + dy) as u32) as i64);
        let one = R::one();
        let top = px(0, 0) * (one - fx) + px(1, 0) * fx;
        let bottom = px(0, 1) * (one - fx) + px(1, 1) * fx;
        Some(top * (one - fy) + bottom * fy)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColorPixels {
    Rgb888(Vec<[u8; 3]>),
    /// Bits 15-11 red, 10-5 green, 4-0 blue.
    Rgb565(Vec<u16>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColorImage {
    width: u32,
    height: u32,
    pixels: ColorPixels,
}

impl ColorImage {
    pub fn new(width: u32, height: u32, pixels: ColorPixels) -> Result<Self, ImageError> {
        let n = match &pixels {
            ColorPixels::Rgb888(p) => p.len(),
            ColorPixels::Rgb565(p) => p.len(),
        };
        if width == 0 || height == 0 || n != width as usize * height as usize {
            return Err(ImageError::Dimensions);
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &ColorPixels {
        &self.pixels
    }

    pub fn to_rgb888(&self) -> Vec<[u8; 3]> {
        match &self.pixels {
            ColorPixels::Rgb888(p) => p.clone(),
            ColorPixels::Rgb565(p) => p.iter().map(|&c| rgb565_to_rgb888(c)).collect(),
        }
    }
}

/// Expands 5/6/5-bit channels to 8 bits by bit replication.
pub fn rgb565_to_rgb888(c: u16) -> [u8; 3] {
    let r5 = ((c >> 11) & 0x1f) as u8;
    let g6 = ((c >> 5) & 0x3f) as u8;
    let b5 = (c & 0x1f) as u8;
    [
        (r5 << 3) | (r5 >> 2),
        (g6 << 2) | (g6 >> 4),
        (b5 << 3) | (b5 >> 2),
    ]
}

/// Packs by truncating each channel to its 565 width.
pub fn rgb888_to_rgb565(rgb: [u8; 3]) -> u16 {
    ((rgb[0] as u16 >> 3) << 11) | ((rgb[1] as u16 >> 2) << 5) | (rgb[2] as u16 >> 3)
}

/// Integer luma: (77 R + 150 G + 29 B) >> 8.
pub fn luma(rgb: [u8; 3]) -> u8 {
    ((77 * rgb[0] as u32 + 150 * rgb[1] as u32 + 29 * rgb[2] as u32) >> 8) as u8
}

pub fn to_gray(img: &ColorImage) -> GrayImage {
    let data = match &img.pixels {
        ColorPixels::Rgb888(p) => p.iter().map(|&c| luma(c)).collect(),
        ColorPixels::Rgb565(p) => p.iter().map(|&c| luma(rgb565_to_rgb888(c))).collect(),
    };
    GrayImage {
        width: img.width,
        height: img.height,
        data,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Image {
    Gray(GrayImage),
    Color(ColorImage),
}

impl Image {
    /// Grayscale view; color images are converted.
    pub fn into_gray(self) -> GrayImage {
        match self {
            Image::Gray(g) => g,
            Image::Color(c) => to_gray(&c),
        }
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn header_number(&mut self, what: &str) -> Result<u32, ImageError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| ImageError::Format(format!("missing or invalid {what}")))
    }
}

/// Decodes a binary PGM (P5) or PPM (P6) with maxval 255.
pub fn decode_pnm(bytes: &[u8]) -> Result<Image, ImageError> {
    if bytes.len() < 2 {
        return Err(ImageError::Format("file too short".into()));
    }
    let channels = match &bytes[..2] {
        b"P5" => 1,
        b"P6" => 3,
        b"P1" | b"P2" | b"P3" | b"P4" | b"P7" => {
            return Err(ImageError::Unsupported(
                String::from_utf8_lossy(&bytes[..2]).into_owned(),
            ))
        }
        _ => return Err(ImageError::Format("bad magic number".into())),
    };
    let mut cur = Cursor { bytes, pos: 2 };
    let width = cur.header_number("width")?;
    let height = cur.header_number("height")?;
    let maxval = cur.header_number("maxval")?;
    if maxval != 255 {
        return Err(ImageError::Unsupported(format!("maxval {maxval}")));
    }
    if width == 0 || height == 0 {
        return Err(ImageError::Dimensions);
    }
    match bytes.get(cur.pos) {
        Some(c) if c.is_ascii_whitespace() => cur.pos += 1,
        _ => {
            return Err(ImageError::Format(
                "missing separator before pixel data".into(),
            ))
        }
    }
    let n = width as usize * height as usize * channels;
    let payload = bytes
        .get(cur.pos..cur.pos + n)
        .ok_or_else(|| ImageError::Format(format!("truncated payload: expected {n} bytes")))?;
    Ok(if channels == 1 {
        Image::Gray(GrayImage {
            width,
            height,
            data: payload.to_vec(),
        })
    } else {
        let px = payload
            .chunks_exact(3)
            .map(|c| [c[0], c[1], c[2]])
            .collect();
        Image::Color(ColorImage {
            width,
            height,
            pixels: ColorPixels::Rgb888(px),
        })
    })
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    out
}

/// RGB565 images are written in their expanded 8-bit form.
pub fn encode_ppm(img: &ColorImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    for px in img.to_rgb888() {
        out.extend_from_slice(&px);
    }
    out
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Image, ImageError> {
    decode_pnm(&fs::read(path)?)
}

pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<(), ImageError> {
    let bytes = match img {
        Image::Gray(g) => encode_pgm(g),
        Image::Color(c) => encode_ppm(c),
    };
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}
