//! Grayscale image planes and their file formats (binary PGM, PNG).

use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, Luma, Rgb};

use crate::denoiser::PIXEL_FLOOR;
use crate::error::{Error, Result};

/// One channel of an image, with pixels in `[PIXEL_FLOOR, 1]` after loading.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePlane {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<f64>,
    pub source: Option<PathBuf>,
    /// Bits per sample of the source file (8 or 16); also used when saving.
    pub bit_depth: u8,
}

impl ImagePlane {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || pixels.len() != height * width {
            return Err(Error::shape(format!("{} pixels do not form a {height}x{width} image", pixels.len())));
        }
        Ok(Self { height, width, pixels, source: None, bit_depth: 16 })
    }

    pub fn size(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn with_pixels(&self, pixels: Vec<f64>) -> Result<Self> {
        let mut p = Self::new(self.height, self.width, pixels)?;
        p.bit_depth = self.bit_depth;
        Ok(p)
    }
}

fn is_pgm(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("pgm" | "pnm" | "ppm")
    )
}

fn decode(path: &Path) -> Result<DynamicImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let format = if is_pgm(path) { Some(image::ImageFormat::Pnm) } else { image::guess_format(&bytes).ok() };
    let format = format.ok_or_else(|| Error::format(format!("{}: unrecognized image format", path.display())))?;
    image::load_from_memory_with_format(&bytes, format)
        .map_err(|e| Error::format(format!("{}: {e}", path.display())))
}

/// Loads every channel of an image as a separate plane; alpha is dropped.
pub fn load_planes(path: &Path) -> Result<Vec<ImagePlane>> {
    let img = decode(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let color = img.color();
    let bit_depth: u8 = if color.bytes_per_pixel() / color.channel_count() >= 2 { 16 } else { 8 };
    let channels = if color.has_color() { 3 } else { 1 };
    let samples: Vec<u16> = if channels == 3 { img.into_rgb16().into_raw() } else { img.into_luma16().into_raw() };
    Ok((0..channels)
        .map(|c| ImagePlane {
            height: h,
            width: w,
            pixels: samples
                .iter()
                .skip(c)
                .step_by(channels)
                .map(|v| (*v as f64 / 65535.0).max(PIXEL_FLOOR))
                .collect(),
            source: Some(path.to_path_buf()),
            bit_depth,
        })
        .collect())
}

/// Loads a grayscale image; color files are converted to luma.
pub fn load_image(path: &Path) -> Result<ImagePlane> {
    let img = decode(path)?;
    let color = img.color();
    let bit_depth: u8 = if color.bytes_per_pixel() / color.channel_count() >= 2 { 16 } else { 8 };
    let luma = img.into_luma16();
    let (w, h) = luma.dimensions();
    Ok(ImagePlane {
        height: h as usize,
        width: w as usize,
        pixels: luma.into_raw().into_iter().map(|v| (v as f64 / 65535.0).max(PIXEL_FLOOR)).collect(),
        source: Some(path.to_path_buf()),
        bit_depth,
    })
}

fn quantize(v: f64, max: f64) -> f64 {
    (v.clamp(0.0, 1.0) * max).round()
}

fn encode<P: image::Pixel>(buf: ImageBuffer<P, Vec<P::Subpixel>>, path: &Path) -> Result<()>
where
    DynamicImage: From<ImageBuffer<P, Vec<P::Subpixel>>>,
{
    let img = DynamicImage::from(buf);
    let format = if is_pgm(path) { image::ImageFormat::Pnm } else { image::ImageFormat::Png };
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, format).map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
    std::fs::write(path, out.into_inner()).map_err(|e| Error::io(path, e))
}

/// Saves one plane (grayscale) or three planes (RGB) at the first plane's bit depth.
///
/// The format follows the extension: `.pgm`/`.pnm` write binary PNM, anything else PNG.
pub fn save_planes(planes: &[ImagePlane], path: &Path) -> Result<()> {
    let first = planes.first().ok_or_else(|| Error::shape("no planes to save"))?;
    if !(planes.len() == 1 || planes.len() == 3) || planes.iter().any(|p| p.size() != first.size()) {
        return Err(Error::shape("expected one plane or three planes of equal size"));
    }
    let (w, h) = (first.width as u32, first.height as u32);
    let interleaved = |max: f64| -> Vec<f64> {
        (0..first.pixels.len()).flat_map(|i| planes.iter().map(move |p| quantize(p.pixels[i], max))).collect()
    };
    let bad_len = || Error::shape("pixel buffer does not match image size");
    match (planes.len(), first.bit_depth) {
        (1, 8) => encode(
            ImageBuffer::<Luma<u8>, _>::from_raw(w, h, interleaved(255.0).into_iter().map(|v| v as u8).collect())
                .ok_or_else(bad_len)?,
            path,
        ),
        (1, _) => encode(
            ImageBuffer::<Luma<u16>, _>::from_raw(w, h, interleaved(65535.0).into_iter().map(|v| v as u16).collect())
                .ok_or_else(bad_len)?,
            path,
        ),
        (_, 8) => encode(
            ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, interleaved(255.0).into_iter().map(|v| v as u8).collect())
                .ok_or_else(bad_len)?,
            path,
        ),
        _ => encode(
            ImageBuffer::<Rgb<u16>, _>::from_raw(w, h, interleaved(65535.0).into_iter().map(|v| v as u16).collect())
                .ok_or_else(bad_len)?,
            path,
        ),
    }
}

pub fn save_image(plane: &ImagePlane, path: &Path) -> Result<()> {
    save_planes(std::slice::from_ref(plane), path)
}
