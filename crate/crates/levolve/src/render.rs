//! Human-inspectable output: ASCII text and flat-color raster images.

use std::path::Path;

use crate::corpus::{render_vglc, TileGrid, NUM_TILES};

/// Pixels per tile cell in raster output.
pub const CELL: u32 = 16;

/// One RGB color per tile identity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Palette {
    pub colors: [[u8; 3]; NUM_TILES],
}

impl Default for Palette {
    fn default() -> Self {
        Palette {
            colors: [
                [139, 69, 19],   // 0 X ground: brown
                [178, 108, 55],  // 1 S breakable: light brown
                [135, 206, 235], // 2 - sky: light blue
                [255, 200, 50],  // 3 ? question: gold
                [200, 150, 40],  // 4 Q spent question: dull gold
                [200, 40, 40],   // 5 E enemy: red
                [30, 140, 40],   // 6 < pipe top left: green
                [40, 170, 50],   // 7 > pipe top right: lighter green
                [25, 120, 35],   // 8 [ pipe body left: dark green
                [35, 150, 45],   // 9 ] pipe body right: mid green
            ],
        }
    }
}

/// VGLC text form; same contract as the corpus renderer.
pub fn to_ascii(grid: &TileGrid) -> String {
    render_vglc(grid)
}

/// Write the grid as a PNG of 16x16 flat-color cells.
pub fn to_image(grid: &TileGrid, palette: &Palette, path: &Path) -> Result<(), image::ImageError> {
    let (h, w) = (grid.height() as u32, grid.width() as u32);
    let mut img = image::RgbImage::new(w * CELL, h * CELL);
    for (x, y, px) in img.enumerate_pixels_mut() {
        let id = grid.get((y / CELL) as usize, (x / CELL) as usize);
        *px = image::Rgb(palette.colors[id as usize]);
    }
    img.save(path)
}
