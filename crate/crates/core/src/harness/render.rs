//! Raster snapshots: one pixel per site, North up.

use std::io::Write;
use std::path::Path;

use image::codecs::png::PngEncoder;
use image::{ExtendedColorType, ImageEncoder};

use crate::blocking::BlockingPath;
use crate::error::{BmlError, Result};
use crate::lattice::{SiteState, TorusGrid};

pub const EAST_RGB: [u8; 3] = [255, 0, 0];
pub const NORTH_RGB: [u8; 3] = [0, 0, 255];
pub const EMPTY_RGB: [u8; 3] = [255, 255, 255];
pub const OVERLAY_RGB: [u8; 3] = [0, 255, 0];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    /// Row-major RGB, top row first.
    pub rgb: Vec<u8>,
}

impl Image {
    pub fn pixel(&self, col: usize, row: usize) -> [u8; 3] {
        let i = 3 * (row * self.width + col);
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }

    /// Pixel showing lattice site `(x, y)`.
    pub fn site_pixel(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixel(x, self.height - 1 - y)
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.rgb);
        out
    }

    pub fn write_ppm(&self, path: &Path) -> std::io::Result<()> {
        std::fs::File::create(path)?.write_all(&self.to_ppm())
    }

    pub fn to_png(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        PngEncoder::new(&mut out)
            .write_image(&self.rgb, self.width as u32, self.height as u32, ExtendedColorType::Rgb8)
            .map_err(|e| BmlError::Precondition(format!("png encoding failed: {e}")))?;
        Ok(out)
    }

    pub fn write_png(&self, path: &Path) -> Result<()> {
        let bytes = self.to_png()?;
        std::fs::write(path, bytes).map_err(|e| BmlError::Precondition(format!("cannot write {}: {e}", path.display())))
    }
}

/// Draw a two-dimensional configuration, East cars red, North cars blue,
/// vacancies white, with the sites of `overlay` paths (taken modulo the
/// torus) and the extra `marks` in green.
pub fn render_snapshot(grid: &TorusGrid, overlay: &[BlockingPath], marks: &[Vec<i64>]) -> Result<Image> {
    if grid.ndim() != 2 {
        return Err(BmlError::Unsupported(format!(
            "rendering needs a 2-d grid, got d={}",
            grid.ndim()
        )));
    }
    let (w, h) = (grid.dims()[0], grid.dims()[1]);
    let mut rgb = Vec::with_capacity(3 * w * h);
    for row in 0..h {
        let y = h - 1 - row;
        for x in 0..w {
            let colour = match grid.at(x as i64, y as i64) {
                SiteState::Empty => EMPTY_RGB,
                SiteState::EAST => EAST_RGB,
                _ => NORTH_RGB,
            };
            rgb.extend_from_slice(&colour);
        }
    }
    let mut img = Image { width: w, height: h, rgb };
    let sites = overlay.iter().flat_map(|p| p.sites.iter()).chain(marks);
    for z in sites {
        if z.len() != 2 {
            return Err(BmlError::Precondition(format!("overlay site {z:?} is not 2-d")));
        }
        let x = z[0].rem_euclid(w as i64) as usize;
        let y = z[1].rem_euclid(h as i64) as usize;
        let i = 3 * ((h - 1 - y) * w + x);
        img.rgb[i..i + 3].copy_from_slice(&OVERLAY_RGB);
    }
    Ok(img)
}
