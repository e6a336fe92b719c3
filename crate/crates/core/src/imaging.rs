//! Raster types, PNG/PNM I/O, Gaussian blurring, thresholding and masked
//! centroids.
//!
//! All rasters store unit-interval `f64` samples row-major. Colour images are
//! interleaved (`HWC`). Coordinates follow the usual image convention: `x` is
//! the column, `y` the row, and pixel `(x, y)` sits at index `y * width + x`.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageReader, Luma, Rgb};

use crate::error::{Error, Result};

/// A continuous (or integral) pixel coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelPoint {
    pub x: f64,
    pub y: f64,
}

impl PixelPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &PixelPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// An integral pixel location inside a raster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pixel {
    pub x: usize,
    pub y: usize,
}

impl Pixel {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    pub fn to_point(self) -> PixelPoint {
        PixelPoint::new(self.x as f64, self.y as f64)
    }

    /// Euclidean distance to another pixel on the integer grid.
    pub fn distance(self, other: Pixel) -> f64 {
        let dx = self.x as f64 - other.x as f64;
        let dy = self.y as f64 - other.y as f64;
        (dx * dx + dy * dy).sqrt()
    }
}

/// A single- or three-channel image with unit-interval samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::Argument(format!(
                "images must have 1 or 3 channels, got {channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::dims(height * width * channels, data.len()));
        }
        if let Some(i) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Argument(format!(
                "sample {i} = {} lies outside [0, 1]",
                data[i]
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    /// Builds an image from a per-pixel function returning one value per channel.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::new(height, width, channels, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Builds an image from raw samples, clamping into `[0, 1]`.
    pub(crate) fn from_clamped(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height * width * channels);
        Self {
            height,
            width,
            channels,
            data: data.into_iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        }
    }

    pub fn gaussian_blur(&self, sigma: f64) -> Result<Self> {
        let data = blur_interleaved(&self.data, self.width, self.height, self.channels, sigma)?;
        Ok(Self::from_clamped(self.height, self.width, self.channels, data))
    }

    /// Channel-mean grayscale conversion.
    pub fn to_gray(&self) -> GrayMap {
        if self.channels == 1 {
            return GrayMap {
                height: self.height,
                width: self.width,
                data: self.data.clone(),
            };
        }
        let data = self
            .data
            .chunks_exact(self.channels)
            .map(|px| px.iter().sum::<f64>() / self.channels as f64)
            .collect();
        GrayMap {
            height: self.height,
            width: self.width,
            data,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        load_image(path)
    }

    /// Writes the image as a 16-bit PNG (or PNM when the extension says so).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let codes: Vec<u16> = self.data.iter().map(|&v| to_code16(v)).collect();
        let (w, h) = (self.width as u32, self.height as u32);
        let dynamic = if self.channels == 1 {
            DynamicImage::ImageLuma16(
                ImageBuffer::<Luma<u16>, _>::from_raw(w, h, codes).expect("buffer length checked"),
            )
        } else {
            DynamicImage::ImageRgb16(
                ImageBuffer::<Rgb<u16>, _>::from_raw(w, h, codes).expect("buffer length checked"),
            )
        };
        dynamic.save(path).map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::Decode {
                path: path.to_path_buf(),
                reason: other.to_string(),
            },
        })
    }
}

/// A single-channel unit-interval map: foreground mattes and saliency maps.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayMap {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl GrayMap {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::dims(height * width, data.len()));
        }
        if let Some(i) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Argument(format!(
                "sample {i} = {} lies outside [0, 1]",
                data[i]
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(height, width, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn same_shape(&self, other: &GrayMap) -> bool {
        self.height == other.height && self.width == other.width
    }

    /// Pointwise `1 - m`.
    pub fn inverted(&self) -> GrayMap {
        GrayMap {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|v| 1.0 - v).collect(),
        }
    }

    pub fn gaussian_blur(&self, sigma: f64) -> Result<Self> {
        let data = blur_interleaved(&self.data, self.width, self.height, 1, sigma)?;
        Ok(Self {
            height: self.height,
            width: self.width,
            data: data.into_iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        })
    }

    pub fn to_image(&self) -> Image {
        Image {
            height: self.height,
            width: self.width,
            channels: 1,
            data: self.data.clone(),
        }
    }

    /// Loads a map, averaging channels if the file is colour.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(load_image(path)?.to_gray())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_image().save(path)
    }
}

/// A boolean pixel mask (the candidate region).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    height: usize,
    width: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(height: usize, width: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::dims(height * width, data.len()));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn full(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![true; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    /// Member pixels in row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = Pixel> + '_ {
        let w = self.width;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| Pixel::new(i % w, i / w))
    }
}

fn to_code16(v: f64) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0).round() as u16
}

/// Reads a PNG or PGM/PPM file with 8- or 16-bit samples.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let decoded = reader.decode().map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let (channels, data): (usize, Vec<f64>) = match decoded {
        DynamicImage::ImageLuma8(buf) => (1, scale8(buf.as_raw())),
        DynamicImage::ImageRgb8(buf) => (3, scale8(buf.as_raw())),
        DynamicImage::ImageLuma16(buf) => (1, scale16(buf.as_raw())),
        DynamicImage::ImageRgb16(buf) => (3, scale16(buf.as_raw())),
        other => {
            return Err(Error::Decode {
                path: path.to_path_buf(),
                reason: format!("unsupported pixel layout {:?}", other.color()),
            })
        }
    };
    Image::new(h, w, channels, data)
}

fn scale8(raw: &[u8]) -> Vec<f64> {
    raw.iter().map(|&v| f64::from(v) / 255.0).collect()
}

fn scale16(raw: &[u16]) -> Vec<f64> {
    raw.iter().map(|&v| f64::from(v) / 65535.0).collect()
}

/// Sampled Gaussian truncated at `ceil(3 sigma)` and renormalised to sum 1.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f64>> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::Argument(format!("blur sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(vec![1.0]);
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let denom = 2.0 * sigma * sigma;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / denom).exp())
        .collect();
    let sum: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= sum);
    Ok(kernel)
}

/// Separable Gaussian blur with clamp-to-edge boundaries over an interleaved raster.
pub(crate) fn blur_interleaved(
    data: &[f64],
    width: usize,
    height: usize,
    channels: usize,
    sigma: f64,
) -> Result<Vec<f64>> {
    let kernel = gaussian_kernel(sigma)?;
    if kernel.len() == 1 || data.is_empty() {
        return Ok(data.to_vec());
    }
    let radius = (kernel.len() / 2) as isize;
    let clamp = |v: isize, hi: usize| v.clamp(0, hi as isize - 1) as usize;

    let mut horizontal = vec![0.0; data.len()];
    for y in 0..height {
        for x in 0..width {
            for c in 0..channels {
                let mut acc = 0.0;
                for (k, weight) in kernel.iter().enumerate() {
                    let sx = clamp(x as isize + k as isize - radius, width);
                    acc += weight * data[(y * width + sx) * channels + c];
                }
                horizontal[(y * width + x) * channels + c] = acc;
            }
        }
    }

    let mut out = vec![0.0; data.len()];
    for y in 0..height {
        for x in 0..width {
            for c in 0..channels {
                let mut acc = 0.0;
                for (k, weight) in kernel.iter().enumerate() {
                    let sy = clamp(y as isize + k as isize - radius, height);
                    acc += weight * horizontal[(sy * width + x) * channels + c];
                }
                out[(y * width + x) * channels + c] = acc;
            }
        }
    }
    Ok(out)
}

/// `true` exactly where `m(p) > tau`.
pub fn threshold_mask(m: &GrayMap, tau: f64) -> Mask {
    Mask {
        height: m.height,
        width: m.width,
        data: m.data.iter().map(|&v| v > tau).collect(),
    }
}

/// Saliency-weighted centroid of `s` over `omega`.
///
/// Falls back to the unweighted centroid of `omega` when the saliency mass is
/// zero, and to the whole image when `omega` is empty.
pub fn masked_centroid(s: &GrayMap, omega: &Mask) -> Result<PixelPoint> {
    if s.is_empty() {
        return Err(Error::Argument("centroid of a zero-sized map".into()));
    }
    if s.height != omega.height || s.width != omega.width {
        return Err(Error::dims(
            format!("{}x{}", s.width, s.height),
            format!("{}x{}", omega.width, omega.height),
        ));
    }
    let full;
    let omega = if omega.is_empty() {
        full = Mask::full(s.height, s.width);
        &full
    } else {
        omega
    };

    let (mut mass, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for p in omega.pixels() {
        let w = s.get(p.x, p.y);
        mass += w;
        sx += w * p.x as f64;
        sy += w * p.y as f64;
    }
    if mass > 0.0 {
        return Ok(PixelPoint::new(sx / mass, sy / mass));
    }

    let (mut n, mut sx, mut sy) = (0usize, 0.0, 0.0);
    for p in omega.pixels() {
        n += 1;
        sx += p.x as f64;
        sy += p.y as f64;
    }
    Ok(PixelPoint::new(sx / n as f64, sy / n as f64))
}
