//! Tiling of rasters into fixed-size chips.

use crate::error::{Error, Result};

/// Offsets along one axis so that `tile`-sized windows cover `extent`.
/// The final window is clamped to the border, so windows may overlap but
/// every pixel appears in at least one.
pub fn tile_offsets(extent: usize, tile: usize, stride: usize) -> Result<Vec<usize>> {
    if tile == 0 || tile > extent {
        return Err(Error::InvalidTileSize {
            tile,
            height: extent,
            width: extent,
        });
    }
    if stride == 0 {
        return Err(Error::InvalidStride);
    }
    let mut offsets = Vec::new();
    let mut offset = 0;
    loop {
        if offset + tile >= extent {
            offsets.push(extent - tile);
            break;
        }
        offsets.push(offset);
        offset += stride;
    }
    Ok(offsets)
}

/// Row-major `(row, col)` offsets of a full tiling grid.
pub fn grid_offsets(
    height: usize,
    width: usize,
    tile: usize,
    stride: usize,
) -> Result<Vec<(usize, usize)>> {
    if tile == 0 || tile > height.min(width) {
        return Err(Error::InvalidTileSize {
            tile,
            height,
            width,
        });
    }
    let rows = tile_offsets(height, tile, stride)?;
    let cols = tile_offsets(width, tile, stride)?;
    let mut offsets = Vec::with_capacity(rows.len() * cols.len());
    for &r in &rows {
        for &c in &cols {
            offsets.push((r, c));
        }
    }
    Ok(offsets)
}
