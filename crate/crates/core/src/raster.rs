//! 8-bit RGB images, boolean masks, and their PNG encodings.

use std::path::Path;

use image::{GrayImage, ImageFormat, Luma, Rgb, RgbImage};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageRGB8 {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl ImageRGB8 {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::arg(format!("image must be nonempty, got {width}x{height}")));
        }
        if pixels.len() != width * height {
            return Err(Error::arg(format!(
                "{width}x{height} image needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, color: [u8; 3]) -> Result<Self> {
        Self::new(width, height, vec![color; width * height])
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

    pub fn pixels_mut(&mut self) -> &mut [[u8; 3]] {
        &mut self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, color: [u8; 3]) {
        self.pixels[y * self.width + x] = color;
    }

    pub fn read_png(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path)
            .map_err(|e| Error::Image(format!("{}: {e}", path.display())))?
            .into_rgb8();
        Self::from_rgb_image(&img)
    }

    pub fn from_png_bytes(bytes: &[u8]) -> Result<Self> {
        let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
            .map_err(|e| Error::Image(e.to_string()))?
            .into_rgb8();
        Self::from_rgb_image(&img)
    }

    fn from_rgb_image(img: &RgbImage) -> Result<Self> {
        let pixels = img.pixels().map(|p| p.0).collect();
        Self::new(img.width() as usize, img.height() as usize, pixels)
    }

    pub fn to_rgb_image(&self) -> RgbImage {
        RgbImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            Rgb(self.get(x as usize, y as usize))
        })
    }

    pub fn write_png(&self, path: impl AsRef<Path>) -> Result<()> {
        save(path.as_ref(), |p| {
            self.to_rgb_image().save_with_format(p, ImageFormat::Png)
        })
    }

    /// RGBA bytes for canvas-style consumers.
    pub fn to_rgba(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .flat_map(|&[r, g, b]| [r, g, b, 255])
            .collect()
    }
}

/// Boolean raster; `true` marks a masked (hateful) pixel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::arg(format!(
                "{width}x{height} mask needs {} bits, got {}",
                width * height,
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![true; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        self.bits[y * self.width + x] = on;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn same_dims(&self, width: usize, height: usize) -> bool {
        self.width == width && self.height == height
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.same_dims(other.width, other.height)
            && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    pub fn union(&self, other: &BinaryMask) -> Result<BinaryMask> {
        if !self.same_dims(other.width, other.height) {
            return Err(Error::arg("mask union of differing dims"));
        }
        let bits = self.bits.iter().zip(&other.bits).map(|(&a, &b)| a || b).collect();
        BinaryMask::new(self.width, self.height, bits)
    }

    /// Grayscale mask image: 255 = masked, 0 = clean.
    pub fn to_gray_image(&self) -> GrayImage {
        GrayImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            Luma([if self.get(x as usize, y as usize) { 255 } else { 0 }])
        })
    }

    pub fn write_png(&self, path: impl AsRef<Path>) -> Result<()> {
        save(path.as_ref(), |p| {
            self.to_gray_image().save_with_format(p, ImageFormat::Png)
        })
    }

    /// Reads a grayscale (or color, converted to luma) PNG; levels >= 128 are masked.
    pub fn read_png(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path)
            .map_err(|e| Error::Image(format!("{}: {e}", path.display())))?
            .into_luma8();
        let bits = img.pixels().map(|p| p.0[0] >= 128).collect();
        Self::new(img.width() as usize, img.height() as usize, bits)
    }
}

fn save(
    path: &Path,
    write: impl FnOnce(&Path) -> image::ImageResult<()>,
) -> Result<()> {
    write(path).map_err(|e| match e {
        image::ImageError::IoError(source) => Error::Write {
            path: path.to_path_buf(),
            source,
        },
        other => Error::Image(format!("{}: {other}", path.display())),
    })
}
