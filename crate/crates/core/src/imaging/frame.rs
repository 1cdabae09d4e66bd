//! Raster frames and binary PNM (P5/P6) I/O.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

/// 8-bit RGB raster, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorFrame {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[u8; 3]>,
}

/// Luminance raster, row-major, values in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayFrame {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

/// Per-pixel foreground flags aligned with a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }
}

/// Integer pixel rectangle `[x0, x1) x [y0, y1)`, already clipped to a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelRect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl PixelRect {
    /// Rasterizes a continuous box by rounding its edges, then clips to the frame.
    /// A box that overlaps the frame always keeps at least one pixel.
    pub fn from_box(b: &BoundingBox, width: usize, height: usize) -> Option<PixelRect> {
        let clipped = b.clip(width as f64, height as f64)?;
        let span = |lo: f64, hi: f64, limit: usize| {
            let mut a = (lo.round().max(0.0) as usize).min(limit.saturating_sub(1));
            let mut z = (hi.round().max(0.0) as usize).min(limit);
            if z <= a {
                a = (lo.floor().max(0.0) as usize).min(limit - 1);
                z = a + 1;
            }
            (a, z)
        };
        let (x0, x1) = span(clipped.x, clipped.right(), width);
        let (y0, y1) = span(clipped.y, clipped.bottom(), height);
        Some(PixelRect { x0, y0, x1, y1 })
    }

    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }

    pub fn len(&self) -> usize {
        self.width() * self.height()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coords(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.y0..self.y1).flat_map(move |y| (self.x0..self.x1).map(move |x| (x, y)))
    }
}

impl ColorFrame {
    pub fn new(width: usize, height: usize, fill: [u8; 3]) -> Self {
        Self { width, height, pixels: vec![fill; width * height] }
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "{} pixels for a {width}x{height} frame",
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: [u8; 3]) {
        self.pixels[y * self.width + x] = c;
    }

    pub fn to_gray(&self) -> GrayFrame {
        GrayFrame {
            width: self.width,
            height: self.height,
            pixels: self
                .pixels
                .iter()
                .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
                .collect(),
        }
    }

    pub fn read_ppm(path: &Path) -> Result<Self> {
        let (w, h, maxval, data) = read_pnm(path, b"P6", 3)?;
        let scale = |v: u8| if maxval == 255 { v } else { ((v as u32 * 255) / maxval) as u8 };
        let pixels = data.chunks_exact(3).map(|c| [scale(c[0]), scale(c[1]), scale(c[2])]).collect();
        Ok(Self { width: w, height: h, pixels })
    }

    pub fn write_ppm(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        write!(out, "P6\n{} {}\n255\n", self.width, self.height)?;
        for p in &self.pixels {
            out.write_all(p)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Draws a one-pixel rectangle outline.
    pub fn draw_rect(&mut self, b: &BoundingBox, color: [u8; 3]) {
        let Some(r) = PixelRect::from_box(b, self.width, self.height) else { return };
        for x in r.x0..r.x1 {
            self.set(x, r.y0, color);
            self.set(x, r.y1 - 1, color);
        }
        for y in r.y0..r.y1 {
            self.set(r.x0, y, color);
            self.set(r.x1 - 1, y, color);
        }
    }
}

impl GrayFrame {
    pub fn new(width: usize, height: usize, fill: f64) -> Self {
        Self { width, height, pixels: vec![fill; width * height] }
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "{} pixels for a {width}x{height} frame",
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    /// Reads with coordinates clamped to the frame.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.pixels[y * self.width + x]
    }

    /// Bilinear sample with edge clamping.
    #[inline]
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let x0 = x.floor();
        let y0 = y.floor();
        let ax = x - x0;
        let ay = y - y0;
        let (xi, yi) = (x0 as isize, y0 as isize);
        let p00 = self.get_clamped(xi, yi);
        let p10 = self.get_clamped(xi + 1, yi);
        let p01 = self.get_clamped(xi, yi + 1);
        let p11 = self.get_clamped(xi + 1, yi + 1);
        (1.0 - ay) * ((1.0 - ax) * p00 + ax * p10) + ay * ((1.0 - ax) * p01 + ax * p11)
    }

    pub fn read_pgm(path: &Path) -> Result<Self> {
        let (w, h, maxval, data) = read_pnm(path, b"P5", 1)?;
        let k = 255.0 / maxval as f64;
        Ok(Self { width: w, height: h, pixels: data.iter().map(|&v| v as f64 * k).collect() })
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        write!(out, "P5\n{} {}\n255\n", self.width, self.height)?;
        let bytes: Vec<u8> = self.pixels.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
        out.write_all(&bytes)?;
        out.flush()?;
        Ok(())
    }
}

fn read_pnm(path: &Path, magic: &[u8; 2], channels: usize) -> Result<(usize, usize, u32, Vec<u8>)> {
    let bad = |msg: &str| Error::Image { path: path.to_path_buf(), msg: msg.to_string() };
    let mut reader = BufReader::new(std::fs::File::open(path)?);
    let mut tokens = Vec::with_capacity(4);
    let mut line = Vec::new();
    while tokens.len() < 4 {
        line.clear();
        if reader.read_until(b'\n', &mut line)? == 0 {
            return Err(bad("truncated header"));
        }
        let text = String::from_utf8_lossy(&line);
        let text = text.split('#').next().unwrap_or("");
        tokens.extend(text.split_whitespace().map(str::to_owned));
    }
    if tokens.len() > 4 {
        return Err(bad("raster data on a header line"));
    }
    if tokens[0].as_bytes() != magic {
        return Err(bad(&format!("expected {}", String::from_utf8_lossy(magic))));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| bad("bad header number"));
    let w = parse(&tokens[1])?;
    let h = parse(&tokens[2])?;
    let maxval = parse(&tokens[3])?;
    if maxval == 0 || maxval > 255 {
        return Err(bad("only 8-bit rasters are supported"));
    }
    let mut data = vec![0u8; w * h * channels];
    reader.read_exact(&mut data).map_err(|_| bad("truncated raster"))?;
    Ok((w, h, maxval as u32, data))
}
