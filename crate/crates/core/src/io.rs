//! Grayscale image and report I/O.
//!
//! Images are read into `[0, 1]` (sample / maxval) on a unit-spacing grid and
//! quantized only when written. PGM (plain `P2` and raw `P5`, 8 or 16 bit)
//! is handled here; PNG goes through the `png` crate. Tables are CSV with a
//! header row, reports pretty-printed JSON in struct field order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::ScalarField;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum BitDepth {
    #[default]
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn maxval(self) -> u32 {
        match self {
            BitDepth::Eight => 255,
            BitDepth::Sixteen => 65535,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImageFormat {
    PgmPlain,
    PgmRaw,
    Png,
}

impl ImageFormat {
    /// `.png` is PNG, anything else raw PGM.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()) {
            Some(e) if e == "png" => ImageFormat::Png,
            _ => ImageFormat::PgmRaw,
        }
    }
}

fn quantize(v: f64, maxval: u32) -> u32 {
    let q = (v.clamp(0.0, 1.0) * maxval as f64).round();
    q as u32
}

/// Reads a PGM or PNG file, dispatching on the magic bytes.
pub fn read_image(path: &Path) -> Result<ScalarField> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.starts_with(b"\x89PNG") {
        decode_png(&bytes)
    } else if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
        decode_pgm(&bytes)
    } else {
        Err(Error::Format(format!(
            "{}: not a PGM (P2/P5) or PNG file",
            path.display()
        )))
    }
}

/// Writes `u` (clamped to `[0, 1]`) in the format implied by the extension.
pub fn write_image(path: &Path, u: &ScalarField, depth: BitDepth) -> Result<()> {
    let bytes = match ImageFormat::from_path(path) {
        ImageFormat::Png => encode_png(u, depth)?,
        format => encode_pgm(u, depth, format == ImageFormat::PgmPlain),
    };
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(&bytes)?;
    out.flush()?;
    Ok(())
}

/// Writes `u` after an affine map of `[min u, max u]` onto `[0, 1]`, for
/// fields such as weights that live outside the intensity range.
pub fn write_image_normalized(path: &Path, u: &ScalarField, depth: BitDepth) -> Result<()> {
    let (lo, hi) = (u.min(), u.max());
    let scaled = if hi > lo {
        u.map(|v| (v - lo) / (hi - lo))?
    } else {
        u.map(|_| 0.0)?
    };
    write_image(path, &scaled, depth)
}

struct Tokens<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn skip_space(&mut self) {
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

    fn number(&mut self) -> Result<u32> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format(format!("malformed PGM number at byte {start}")))
    }
}

pub fn decode_pgm(bytes: &[u8]) -> Result<ScalarField> {
    let raw = bytes.starts_with(b"P5");
    let mut t = Tokens { bytes, pos: 2 };
    let width = t.number()? as usize;
    let height = t.number()? as usize;
    let maxval = t.number()?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!("PGM maxval {maxval} outside 1..=65535")));
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::Format("PGM dimensions overflow".into()))?;
    let mut samples = Vec::with_capacity(n);
    if raw {
        // exactly one whitespace byte separates the header from the raster
        let start = t.pos + 1;
        let wide = maxval > 255;
        let need = n * if wide { 2 } else { 1 };
        let data = bytes
            .get(start..start + need)
            .ok_or_else(|| Error::Format("truncated PGM raster".into()))?;
        if wide {
            samples.extend(data.chunks(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as u32));
        } else {
            samples.extend(data.iter().map(|&b| b as u32));
        }
    } else {
        for _ in 0..n {
            samples.push(t.number()?);
        }
    }
    if samples.iter().any(|&s| s > maxval) {
        return Err(Error::Format("PGM sample exceeds maxval".into()));
    }
    let values = samples.iter().map(|&s| s as f64 / maxval as f64).collect();
    ScalarField::new(width, height, 1.0, values)
}

pub fn encode_pgm(u: &ScalarField, depth: BitDepth, plain: bool) -> Vec<u8> {
    encode_pgm_maxval(u, depth.maxval(), plain)
}

/// PGM with an arbitrary `maxval` in `1..=65535`; samples are two bytes
/// wide in the raw format once `maxval > 255`.
pub fn encode_pgm_maxval(u: &ScalarField, maxval: u32, plain: bool) -> Vec<u8> {
    let maxval = maxval.clamp(1, 65535);
    let magic = if plain { "P2" } else { "P5" };
    let mut out = format!("{magic}\n{} {}\n{maxval}\n", u.width(), u.height()).into_bytes();
    let q: Vec<u32> = u.values().iter().map(|&v| quantize(v, maxval)).collect();
    if plain {
        for row in q.chunks(u.width()) {
            let line: Vec<String> = row.iter().map(|s| s.to_string()).collect();
            out.extend_from_slice(line.join(" ").as_bytes());
            out.push(b'\n');
        }
    } else if maxval > 255 {
        for s in q {
            out.extend_from_slice(&(s as u16).to_be_bytes());
        }
    } else {
        out.extend(q.iter().map(|&s| s as u8));
    }
    out
}

/// Largest PGM maxval that is a multiple of `denominator`, so that samples
/// `k/denominator` are stored and read back exactly.
pub fn exact_maxval(denominator: u32) -> Option<u32> {
    (1..=65535).contains(&denominator).then(|| denominator * (65535 / denominator))
}

/// Writes a PGM with an explicit `maxval`, plain `P2` when `plain` is set.
pub fn write_pgm_maxval(path: &Path, u: &ScalarField, maxval: u32, plain: bool) -> Result<()> {
    let bytes = encode_pgm_maxval(u, maxval, plain);
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(&bytes)?;
    out.flush()?;
    Ok(())
}

fn png_err(e: impl std::fmt::Display) -> Error {
    Error::Format(format!("PNG: {e}"))
}

pub fn decode_png(bytes: &[u8]) -> Result<ScalarField> {
    let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    let mut reader = decoder.read_info().map_err(png_err)?;
    let info = reader.info();
    if info.color_type != png::ColorType::Grayscale {
        return Err(Error::Format(format!(
            "PNG color type {:?} is not supported; grayscale only",
            info.color_type
        )));
    }
    let (width, height) = (info.width as usize, info.height as usize);
    let bit_depth = info.bit_depth;
    let mut buf = vec![0; reader.output_buffer_size().ok_or_else(|| png_err("image too large"))?];
    let frame = reader.next_frame(&mut buf).map_err(png_err)?;
    let data = &buf[..frame.buffer_size()];
    let values: Vec<f64> = match bit_depth {
        png::BitDepth::Eight => data.iter().map(|&b| b as f64 / 255.0).collect(),
        png::BitDepth::Sixteen => data
            .chunks(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / 65535.0)
            .collect(),
        other => {
            return Err(Error::Format(format!("PNG bit depth {other:?} is not supported")));
        }
    };
    ScalarField::new(width, height, 1.0, values)
}

pub fn encode_png(u: &ScalarField, depth: BitDepth) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, u.width() as u32, u.height() as u32);
        encoder.set_color(png::ColorType::Grayscale);
        let maxval = depth.maxval();
        let data: Vec<u8> = match depth {
            BitDepth::Eight => {
                encoder.set_depth(png::BitDepth::Eight);
                u.values().iter().map(|&v| quantize(v, maxval) as u8).collect()
            }
            BitDepth::Sixteen => {
                encoder.set_depth(png::BitDepth::Sixteen);
                u.values()
                    .iter()
                    .flat_map(|&v| (quantize(v, maxval) as u16).to_be_bytes())
                    .collect()
            }
        };
        let mut writer = encoder.write_header().map_err(png_err)?;
        writer.write_image_data(&data).map_err(png_err)?;
    }
    Ok(out)
}

/// Writes rows as CSV with a header row taken from the field names.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `value` as pretty-printed JSON followed by a newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// Reads a whole file into a string.
pub fn read_text(path: &Path) -> Result<String> {
    let mut s = String::new();
    BufReader::new(File::open(path)?).read_to_string(&mut s)?;
    Ok(s)
}
