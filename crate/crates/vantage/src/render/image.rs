//! Byte image buffer with PNG round-tripping.

use crate::error::{Error, Result};
use crate::scalar::Real;
use image::{ColorType, DynamicImage, ImageEncoder};
use ndarray::Array3;
use std::path::Path;

/// Flat color used when compositing transparent renders for model input.
pub const COMPOSITE_BG: [u8; 3] = [96, 96, 96];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuf {
    pub width: usize,
    pub height: usize,
    /// 3 = RGB, 4 = RGBA.
    pub channels: usize,
    pub data: Vec<u8>,
}

impl ImageBuf {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![0; width * height * channels],
        }
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [u8] {
        let i = (y * self.width + x) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    /// Mean absolute byte difference across all channel values.
    pub fn l1_distance(&self, other: &ImageBuf) -> f64 {
        assert_eq!(self.data.len(), other.data.len(), "image shapes differ");
        let total: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a as f64 - b as f64).abs())
            .sum();
        total / self.data.len() as f64
    }

    /// Alpha-composites an RGBA image over a flat color, producing RGB.
    pub fn composite_over(&self, background: [u8; 3]) -> ImageBuf {
        assert_eq!(self.channels, 4, "composite needs an alpha channel");
        let mut out = ImageBuf::new(self.width, self.height, 3);
        for y in 0..self.height {
            for x in 0..self.width {
                let src = self.pixel(x, y);
                let a = src[3] as f64 / 255.0;
                let dst = out.pixel_mut(x, y);
                for c in 0..3 {
                    let v = src[c] as f64 * a + background[c] as f64 * (1.0 - a);
                    dst[c] = v.round().clamp(0.0, 255.0) as u8;
                }
            }
        }
        out
    }

    /// Count of pixels with nonzero alpha (RGBA) or any nonzero channel (RGB).
    pub fn coverage(&self) -> usize {
        let mut n = 0;
        for y in 0..self.height {
            for x in 0..self.width {
                let p = self.pixel(x, y);
                let hit = if self.channels == 4 {
                    p[3] > 0
                } else {
                    p.iter().any(|&v| v > 0)
                };
                if hit {
                    n += 1;
                }
            }
        }
        n
    }

    pub fn flip_horizontal(&self) -> ImageBuf {
        let mut out = self.clone();
        for y in 0..self.height {
            for x in 0..self.width {
                let src = self.pixel(self.width - 1 - x, y).to_vec();
                out.pixel_mut(x, y).copy_from_slice(&src);
            }
        }
        out
    }

    /// (3, H, W) tensor in [-1, 1]; RGBA images are composited over
    /// `composite` first.
    pub fn to_signed_tensor<R: Real>(&self, composite: [u8; 3]) -> Array3<R> {
        let rgb;
        let src = if self.channels == 4 {
            rgb = self.composite_over(composite);
            &rgb
        } else {
            self
        };
        Array3::from_shape_fn((3, self.height, self.width), |(c, y, x)| {
            R::of(src.pixel(x, y)[c] as f64 / 127.5 - 1.0)
        })
    }

    /// Inverse of `to_signed_tensor`: clamps to [-1, 1] and quantizes.
    pub fn from_signed_tensor<R: Real>(tensor: &Array3<R>) -> ImageBuf {
        let (c, h, w) = tensor.dim();
        assert_eq!(c, 3, "expected an RGB tensor");
        let mut img = ImageBuf::new(w, h, 3);
        for y in 0..h {
            for x in 0..w {
                for ch in 0..3 {
                    let v = tensor[[ch, y, x]].to_f64_().clamp(-1.0, 1.0);
                    img.pixel_mut(x, y)[ch] = ((v + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8;
                }
            }
        }
        img
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let color = match self.channels {
            3 => ColorType::Rgb8,
            4 => ColorType::Rgba8,
            c => return Err(Error::input(format!("unsupported channel count {c}"))),
        };
        let file = std::fs::File::create(path)?;
        let writer = std::io::BufWriter::new(file);
        let encoder = image::codecs::png::PngEncoder::new(writer);
        encoder.write_image(
            &self.data,
            self.width as u32,
            self.height as u32,
            color.into(),
        )?;
        Ok(())
    }

    pub fn load_png(path: &Path) -> Result<ImageBuf> {
        let img = image::open(path)?;
        Ok(match img {
            DynamicImage::ImageRgba8(rgba) => ImageBuf {
                width: rgba.width() as usize,
                height: rgba.height() as usize,
                channels: 4,
                data: rgba.into_raw(),
            },
            other => {
                let rgb = other.to_rgb8();
                ImageBuf {
                    width: rgb.width() as usize,
                    height: rgb.height() as usize,
                    channels: 3,
                    data: rgb.into_raw(),
                }
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut img = ImageBuf::new(5, 4, 4);
        for (i, v) in img.data.iter_mut().enumerate() {
            *v = (i * 7 % 256) as u8;
        }
        let path = dir.path().join("x.png");
        img.save_png(&path).unwrap();
        let back = ImageBuf::load_png(&path).unwrap();
        assert_eq!(img, back);
    }

    #[test]
    fn composite_blends_alpha() {
        let mut img = ImageBuf::new(1, 1, 4);
        img.pixel_mut(0, 0).copy_from_slice(&[200, 100, 0, 128]);
        let rgb = img.composite_over([0, 0, 100]);
        let p = rgb.pixel(0, 0);
        assert_eq!(p[0], 100);
        assert!(p[2] > 40 && p[2] < 60);
    }
}
