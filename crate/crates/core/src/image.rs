//! Bytecode images: bytes become pixels row-major on a square canvas, which is
//! then resampled to one of the three supported resolutions.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Cursor};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::apk::{open_apk, ApkError, CodeSource};

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("cannot render an image from zero bytes")]
    EmptyInput,
    #[error(transparent)]
    Apk(#[from] ApkError),
    #[error("png encode: {0}")]
    PngEncode(#[from] png::EncodingError),
    #[error("png decode: {0}")]
    PngDecode(#[from] png::DecodingError),
    #[error("unsupported png layout: {0}")]
    UnsupportedPng(String),
    #[error("invalid image spec {0:?}")]
    InvalidSpec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorMode {
    Grayscale,
    Rgb,
}

impl ColorMode {
    pub fn channels(self) -> usize {
        match self {
            ColorMode::Grayscale => 1,
            ColorMode::Rgb => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ColorMode::Grayscale => "grayscale",
            ColorMode::Rgb => "rgb",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Resolution {
    #[serde(rename = "128")]
    R128,
    #[serde(rename = "256")]
    R256,
    #[serde(rename = "512")]
    R512,
}

impl Resolution {
    pub const ALL: [Resolution; 3] = [Resolution::R128, Resolution::R256, Resolution::R512];

    pub fn side(self) -> usize {
        match self {
            Resolution::R128 => 128,
            Resolution::R256 => 256,
            Resolution::R512 => 512,
        }
    }

    pub fn from_side(side: usize) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.side() == side)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Resample {
    #[default]
    NearestNeighbor,
    Bilinear,
}

/// Color mode and square output resolution. Textual form: `grayscale-128`, `rgb-512`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ImageSpec {
    pub color_mode: ColorMode,
    pub resolution: Resolution,
    pub resample: Resample,
}

impl ImageSpec {
    pub const fn new(color_mode: ColorMode, resolution: Resolution) -> Self {
        Self {
            color_mode,
            resolution,
            resample: Resample::NearestNeighbor,
        }
    }

    pub fn with_resample(mut self, resample: Resample) -> Self {
        self.resample = resample;
        self
    }

    /// The six (mode, resolution) cells, grayscale first.
    pub fn matrix() -> Vec<ImageSpec> {
        [ColorMode::Grayscale, ColorMode::Rgb]
            .into_iter()
            .flat_map(|m| Resolution::ALL.into_iter().map(move |r| ImageSpec::new(m, r)))
            .collect()
    }

    pub fn side(&self) -> usize {
        self.resolution.side()
    }

    /// `grayscale_128`, as used in image file names.
    pub fn file_tag(&self) -> String {
        format!("{}_{}", self.color_mode.as_str(), self.side())
    }
}

impl fmt::Display for ImageSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.color_mode.as_str(), self.side())
    }
}

impl FromStr for ImageSpec {
    type Err = ImageError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ImageError::InvalidSpec(s.to_string());
        let (mode, res) = s.split_once(['-', '_']).ok_or_else(bad)?;
        let color_mode = match mode.to_ascii_lowercase().as_str() {
            "grayscale" | "gray" | "greyscale" => ColorMode::Grayscale,
            "rgb" => ColorMode::Rgb,
            _ => return Err(bad()),
        };
        let side: usize = res.parse().map_err(|_| bad())?;
        let resolution = Resolution::from_side(side).ok_or_else(bad)?;
        Ok(ImageSpec::new(color_mode, resolution))
    }
}

impl Serialize for ImageSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ImageSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Square pre-resample canvas, row-major, `channels` bytes per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Canvas {
    pub side: usize,
    pub color_mode: ColorMode,
    pub pixels: Vec<u8>,
}

impl Canvas {
    pub fn pixel(&self, row: usize, col: usize) -> &[u8] {
        let c = self.color_mode.channels();
        let at = (row * self.side + col) * c;
        &self.pixels[at..at + c]
    }

    /// Inverse of [`encode_canvas`]: the first `source_len` bytes of the fill.
    pub fn to_bytes(&self, source_len: usize) -> Vec<u8> {
        self.pixels[..source_len.min(self.pixels.len())].to_vec()
    }
}

fn ceil_sqrt(n: usize) -> usize {
    let mut s = (n as f64).sqrt() as usize;
    while s * s < n {
        s += 1;
    }
    while s > 0 && (s - 1) * (s - 1) >= n {
        s -= 1;
    }
    s
}

/// Side of the square canvas for `len` bytes in `mode`.
pub fn canvas_side(len: usize, mode: ColorMode) -> usize {
    ceil_sqrt(len.div_ceil(mode.channels()))
}

/// Grayscale: byte i is pixel i. RGB: bytes (3i, 3i+1, 3i+2) are pixel i's (R, G, B).
/// Cells past the input are zero.
pub fn encode_canvas(data: &[u8], color_mode: ColorMode) -> Result<Canvas, ImageError> {
    if data.is_empty() {
        return Err(ImageError::EmptyInput);
    }
    let side = canvas_side(data.len(), color_mode);
    let mut pixels = vec![0u8; side * side * color_mode.channels()];
    pixels[..data.len()].copy_from_slice(data);
    Ok(Canvas {
        side,
        color_mode,
        pixels,
    })
}

/// Rendered image at `spec.resolution`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ByteImage {
    pub spec: ImageSpec,
    pub pixels: Vec<u8>,
    pub source_len: usize,
    pub canvas_side: usize,
}

impl ByteImage {
    pub fn side(&self) -> usize {
        self.spec.side()
    }

    pub fn channels(&self) -> usize {
        self.spec.color_mode.channels()
    }
}

pub fn resample(canvas: &Canvas, spec: ImageSpec, source_len: usize) -> ByteImage {
    debug_assert_eq!(canvas.color_mode, spec.color_mode);
    let pixels = match spec.resample {
        Resample::NearestNeighbor => resample_nearest(canvas, spec.side()),
        Resample::Bilinear => resample_bilinear(canvas, spec.side()),
    };
    ByteImage {
        spec,
        pixels,
        source_len,
        canvas_side: canvas.side,
    }
}

/// out(x, y) = canvas(floor(x·s/R), floor(y·s/R)), integer arithmetic only.
fn resample_nearest(canvas: &Canvas, out_side: usize) -> Vec<u8> {
    let s = canvas.side;
    let c = canvas.color_mode.channels();
    if s == out_side {
        return canvas.pixels.clone();
    }
    let src_index: Vec<usize> = (0..out_side).map(|i| i * s / out_side).collect();
    let mut out = Vec::with_capacity(out_side * out_side * c);
    for &sy in &src_index {
        let row = &canvas.pixels[sy * s * c..(sy + 1) * s * c];
        for &sx in &src_index {
            out.extend_from_slice(&row[sx * c..sx * c + c]);
        }
    }
    out
}

/// Pixel-center aligned bilinear interpolation with edge clamping.
fn resample_bilinear(canvas: &Canvas, out_side: usize) -> Vec<u8> {
    let s = canvas.side;
    let c = canvas.color_mode.channels();
    if s == out_side {
        return canvas.pixels.clone();
    }
    let scale = s as f64 / out_side as f64;
    let taps: Vec<(usize, usize, f64)> = (0..out_side)
        .map(|i| {
            let src = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (s - 1) as f64);
            let lo = src.floor() as usize;
            let hi = (lo + 1).min(s - 1);
            (lo, hi, src - lo as f64)
        })
        .collect();
    let at = |row: usize, col: usize, ch: usize| canvas.pixels[(row * s + col) * c + ch] as f64;
    let mut out = Vec::with_capacity(out_side * out_side * c);
    for &(y0, y1, fy) in &taps {
        for &(x0, x1, fx) in &taps {
            for ch in 0..c {
                let top = at(y0, x0, ch) * (1.0 - fx) + at(y0, x1, ch) * fx;
                let bottom = at(y1, x0, ch) * (1.0 - fx) + at(y1, x1, ch) * fx;
                out.push((top * (1.0 - fy) + bottom * fy).round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    out
}

/// `encode_canvas` followed by `resample`.
pub fn bytes_to_image(data: &[u8], spec: ImageSpec) -> Result<ByteImage, ImageError> {
    let canvas = encode_canvas(data, spec.color_mode)?;
    Ok(resample(&canvas, spec, data.len()))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `<sha256-of-apk>_<mode>_<res>.png`
pub fn image_file_name(sample_id: &str, spec: &ImageSpec) -> String {
    format!("{sample_id}_{}.png", spec.file_tag())
}

/// PNG bytes with pinned encoder settings (Up filter, deflate level 6), so output is bit-stable.
pub fn encode_png(image: &ByteImage) -> Result<Vec<u8>, ImageError> {
    let mut buf = Vec::new();
    {
        let side = image.side() as u32;
        let mut encoder = png::Encoder::new(&mut buf, side, side);
        encoder.set_color(match image.spec.color_mode {
            ColorMode::Grayscale => png::ColorType::Grayscale,
            ColorMode::Rgb => png::ColorType::Rgb,
        });
        encoder.set_depth(png::BitDepth::Eight);
        encoder.set_deflate_compression(png::DeflateCompression::Level(6));
        encoder.set_filter(png::Filter::Up);
        let mut writer = encoder.write_header()?;
        writer.write_image_data(&image.pixels)?;
        writer.finish()?;
    }
    Ok(buf)
}

pub fn write_png(image: &ByteImage, path: &Path) -> Result<(), ImageError> {
    let bytes = encode_png(image)?;
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    std::io::Write::write_all(&mut w, &bytes)?;
    std::io::Write::flush(&mut w)?;
    Ok(())
}

/// Pixels read back from a PNG written by [`write_png`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodedImage {
    pub color_mode: ColorMode,
    pub side: usize,
    pub pixels: Vec<u8>,
}

pub fn decode_png(bytes: &[u8]) -> Result<DecodedImage, ImageError> {
    let decoder = png::Decoder::new(Cursor::new(bytes));
    let mut reader = decoder.read_info()?;
    let mut pixels = vec![0; reader.output_buffer_size().unwrap_or(0)];
    let info = reader.next_frame(&mut pixels)?;
    if info.bit_depth != png::BitDepth::Eight || info.width != info.height {
        return Err(ImageError::UnsupportedPng(format!(
            "{}x{} at {:?}",
            info.width, info.height, info.bit_depth
        )));
    }
    let color_mode = match info.color_type {
        png::ColorType::Grayscale => ColorMode::Grayscale,
        png::ColorType::Rgb => ColorMode::Rgb,
        other => return Err(ImageError::UnsupportedPng(format!("{other:?}"))),
    };
    pixels.truncate(info.buffer_size());
    Ok(DecodedImage {
        color_mode,
        side: info.width as usize,
        pixels,
    })
}

pub fn read_png(path: &Path) -> Result<DecodedImage, ImageError> {
    decode_png(&fs::read(path)?)
}

/// Opens an APK, renders every spec in `specs` and writes one PNG per spec into `out_dir`.
/// Returns the sample id (SHA-256 of the APK file) and the written paths in `specs` order.
pub fn convert_apk(
    path: &Path,
    specs: &[ImageSpec],
    source: CodeSource,
    out_dir: &Path,
) -> Result<(String, Vec<(ImageSpec, PathBuf)>), ImageError> {
    let archive = open_apk(path)?;
    let sample_id = sha256_hex(archive.raw_bytes());
    let code = archive.collect_code_bytes(source)?;
    let mut written = Vec::with_capacity(specs.len());
    let mut canvases: Vec<Canvas> = Vec::new();
    for spec in specs {
        let canvas = match canvases.iter().find(|c| c.color_mode == spec.color_mode) {
            Some(c) => c,
            None => {
                canvases.push(encode_canvas(&code, spec.color_mode)?);
                canvases.last().expect("just pushed")
            }
        };
        let image = resample(canvas, *spec, code.len());
        let target = out_dir.join(image_file_name(&sample_id, spec));
        write_png(&image, &target)?;
        written.push((*spec, target));
    }
    Ok((sample_id, written))
}

/// Single-spec form of [`convert_apk`], also returning the in-memory image.
pub fn apk_to_image(
    path: &Path,
    spec: ImageSpec,
    source: CodeSource,
    out_dir: &Path,
) -> Result<(ByteImage, PathBuf), ImageError> {
    let archive = open_apk(path)?;
    let sample_id = sha256_hex(archive.raw_bytes());
    let code = archive.collect_code_bytes(source)?;
    let image = bytes_to_image(&code, spec)?;
    let target = out_dir.join(image_file_name(&sample_id, &spec));
    write_png(&image, &target)?;
    Ok((image, target))
}
