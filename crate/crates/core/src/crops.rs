// SPDX-License-Identifier: Apache-2.0

//! Fixed-pattern crop geometry used for key expansion.
//!
//! A pattern is a list of grids. A plain grid with `m` rows and `n` columns
//! floor-partitions the frame: cell `(r, c)` covers
//! `x ∈ [⌊cW/n⌋, ⌊(c+1)W/n⌋)` and `y ∈ [⌊rH/m⌋, ⌊(r+1)H/m⌋)`.
//! A half-overlap grid adds the cell-sized windows placed at half-cell
//! stride that do not coincide with a plain cell.
//!
//! `crops17` is the 1×2, 2×1, 2×2 and 3×3 plain grids. `crops40` appends the
//! half-overlap windows of the same four grids (1 + 1 + 5 + 16), so its
//! first 17 crops are exactly `crops17`.

use image::DynamicImage;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CropError {
    #[error("image {width}x{height} is too small for pattern `{pattern}` (needs at least {min_width}x{min_height})")]
    TooSmall {
        pattern: String,
        width: u32,
        height: u32,
        min_width: u32,
        min_height: u32,
    },
    #[error("unknown crop pattern `{0}`")]
    UnknownPattern(String),
    #[error("grid in pattern `{0}` has a zero dimension")]
    EmptyGrid(String),
    #[error("crop {rect:?} is outside the {width}x{height} image")]
    OutOfBounds { rect: CropRect, width: u32, height: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CropRect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl CropRect {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Self { x, y, w, h }
    }

    pub fn full(width: u32, height: u32) -> Self {
        Self::new(0, 0, width, height)
    }

    pub fn area(&self) -> u64 {
        u64::from(self.w) * u64::from(self.h)
    }

    pub fn fits(&self, width: u32, height: u32) -> bool {
        self.w > 0
            && self.h > 0
            && u64::from(self.x) + u64::from(self.w) <= u64::from(width)
            && u64::from(self.y) + u64::from(self.h) <= u64::from(height)
    }

    /// True when the interiors intersect.
    pub fn overlaps(&self, other: &CropRect) -> bool {
        let (ax1, ay1) = (self.x + self.w, self.y + self.h);
        let (bx1, by1) = (other.x + other.w, other.y + other.h);
        self.x < bx1 && other.x < ax1 && self.y < by1 && other.y < ay1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Overlap {
    #[default]
    None,
    Half,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    pub rows: u32,
    pub cols: u32,
    #[serde(default)]
    pub overlap: Overlap,
}

impl GridSpec {
    pub const fn plain(rows: u32, cols: u32) -> Self {
        Self {
            rows,
            cols,
            overlap: Overlap::None,
        }
    }

    pub const fn half(rows: u32, cols: u32) -> Self {
        Self {
            rows,
            cols,
            overlap: Overlap::Half,
        }
    }

    pub fn len(&self) -> usize {
        let (m, n) = (self.rows as usize, self.cols as usize);
        match self.overlap {
            Overlap::None => m * n,
            Overlap::Half => (2 * m - 1) * (2 * n - 1) - m * n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Smallest frame `(width, height)` for which every crop is non-empty.
    pub fn min_size(&self) -> (u32, u32) {
        match self.overlap {
            Overlap::None => (self.cols, self.rows),
            Overlap::Half => (2 * self.cols, 2 * self.rows),
        }
    }

    fn push_rects(&self, width: u32, height: u32, out: &mut Vec<CropRect>) {
        match self.overlap {
            Overlap::None => {
                for r in 0..self.rows {
                    let (y0, y1) = (cut(height, r, self.rows), cut(height, r + 1, self.rows));
                    for c in 0..self.cols {
                        let (x0, x1) = (cut(width, c, self.cols), cut(width, c + 1, self.cols));
                        out.push(CropRect::new(x0, y0, x1 - x0, y1 - y0));
                    }
                }
            }
            Overlap::Half => {
                let (sx, sy) = (2 * self.cols, 2 * self.rows);
                for q in 0..sy - 1 {
                    let (y0, y1) = (cut(height, q, sy), cut(height, q + 2, sy));
                    for p in 0..sx - 1 {
                        if p % 2 == 0 && q % 2 == 0 {
                            continue;
                        }
                        let (x0, x1) = (cut(width, p, sx), cut(width, p + 2, sx));
                        out.push(CropRect::new(x0, y0, x1 - x0, y1 - y0));
                    }
                }
            }
        }
    }
}

/// `⌊i · len / parts⌋` without overflow.
fn cut(len: u32, i: u32, parts: u32) -> u32 {
    (u64::from(i) * u64::from(len) / u64::from(parts)) as u32
}

const CROPS17: [GridSpec; 4] = [
    GridSpec::plain(1, 2),
    GridSpec::plain(2, 1),
    GridSpec::plain(2, 2),
    GridSpec::plain(3, 3),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropPattern {
    pub name: String,
    pub grids: Vec<GridSpec>,
}

impl CropPattern {
    pub fn none() -> Self {
        Self {
            name: "none".into(),
            grids: Vec::new(),
        }
    }

    pub fn crops17() -> Self {
        Self {
            name: "crops17".into(),
            grids: CROPS17.to_vec(),
        }
    }

    pub fn crops40() -> Self {
        let mut grids = CROPS17.to_vec();
        grids.extend(CROPS17.iter().map(|g| GridSpec::half(g.rows, g.cols)));
        Self {
            name: "crops40".into(),
            grids,
        }
    }

    pub fn custom(name: impl Into<String>, grids: Vec<GridSpec>) -> Result<Self, CropError> {
        let name = name.into();
        if grids.iter().any(|g| g.rows == 0 || g.cols == 0) {
            return Err(CropError::EmptyGrid(name));
        }
        Ok(Self { name, grids })
    }

    pub fn by_name(name: &str) -> Result<Self, CropError> {
        match name {
            "none" => Ok(Self::none()),
            "crops17" => Ok(Self::crops17()),
            "crops40" => Ok(Self::crops40()),
            other => Err(CropError::UnknownPattern(other.to_owned())),
        }
    }

    /// Number of crops, excluding the original image.
    pub fn len(&self) -> usize {
        self.grids.iter().map(GridSpec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn min_size(&self) -> (u32, u32) {
        self.grids
            .iter()
            .map(GridSpec::min_size)
            .fold((1, 1), |(w, h), (gw, gh)| (w.max(gw), h.max(gh)))
    }

    /// Crops for a `width`×`height` frame, grid by grid, each row-major.
    pub fn generate(&self, width: u32, height: u32) -> Result<Vec<CropRect>, CropError> {
        if self.grids.iter().any(|g| g.rows == 0 || g.cols == 0) {
            return Err(CropError::EmptyGrid(self.name.clone()));
        }
        let (min_width, min_height) = self.min_size();
        if width < min_width || height < min_height {
            return Err(CropError::TooSmall {
                pattern: self.name.clone(),
                width,
                height,
                min_width,
                min_height,
            });
        }
        let mut out = Vec::with_capacity(self.len());
        for g in &self.grids {
            g.push_rects(width, height, &mut out);
        }
        Ok(out)
    }
}

pub fn generate_crops(width: u32, height: u32, pattern: &CropPattern) -> Result<Vec<CropRect>, CropError> {
    pattern.generate(width, height)
}

/// Pixel-exact sub-image.
pub fn crop_image(image: &DynamicImage, rect: CropRect) -> Result<DynamicImage, CropError> {
    let (width, height) = (image.width(), image.height());
    if !rect.fits(width, height) {
        return Err(CropError::OutOfBounds { rect, width, height });
    }
    Ok(image.crop_imm(rect.x, rect.y, rect.w, rect.h))
}
