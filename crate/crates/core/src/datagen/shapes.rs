//! Procedural sprites: disks, squares and crosses on a square canvas.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_SCALE: f64 = 0.2;
pub const MAX_SCALE: f64 = 0.9;
/// Sub-samples per pixel edge for antialiasing.
const SUPERSAMPLE: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Disk,
    Square,
    Cross,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 3] = [ShapeKind::Disk, ShapeKind::Square, ShapeKind::Cross];

    pub fn ordinal(self) -> usize {
        match self {
            ShapeKind::Disk => 0,
            ShapeKind::Square => 1,
            ShapeKind::Cross => 2,
        }
    }
}

/// Generating factors of one sprite.
///
/// `scale` is the diameter of the shape's bounding circle as a fraction of
/// the canvas side; `x`/`y` place its centre in canvas fractions. The
/// constructor clamps the centre so the bounding circle stays on the canvas.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    kind: ShapeKind,
    scale: f64,
    x: f64,
    y: f64,
    orientation: f64,
}

impl ShapeSpec {
    pub fn new(kind: ShapeKind, scale: f64, x: f64, y: f64, orientation: f64) -> Self {
        let scale = scale.clamp(MIN_SCALE, MAX_SCALE);
        let half = scale / 2.0;
        ShapeSpec {
            kind,
            scale,
            x: x.clamp(half, 1.0 - half),
            y: y.clamp(half, 1.0 - half),
            orientation: orientation.rem_euclid(FRAC_PI_2),
        }
    }

    pub fn kind(&self) -> ShapeKind {
        self.kind
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    /// Radians in `[0, π/2)`.
    pub fn orientation(&self) -> f64 {
        self.orientation
    }

    fn contains(&self, u: f64, v: f64, radius: f64) -> bool {
        match self.kind {
            ShapeKind::Disk => u * u + v * v <= radius * radius,
            ShapeKind::Square => {
                let h = radius * std::f64::consts::FRAC_1_SQRT_2;
                u.abs() <= h && v.abs() <= h
            }
            ShapeKind::Cross => {
                // Arm half-length a, half-width a/4, corners on the circle.
                let a = radius / (1.0f64 + 1.0 / 16.0).sqrt();
                let w = a / 4.0;
                (u.abs() <= a && v.abs() <= w) || (u.abs() <= w && v.abs() <= a)
            }
        }
    }
}

/// Square grayscale image, row-major, values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub side: usize,
    pub pixels: Vec<f64>,
}

impl Image {
    pub fn blank(side: usize) -> Self {
        Image {
            side,
            pixels: vec![0.0; side * side],
        }
    }

    pub fn from_pixels(side: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != side * side {
            return Err(Error::dim(format!(
                "{} pixels for a {side}x{side} image",
                pixels.len()
            )));
        }
        Ok(Image { side, pixels })
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.side + col]
    }
}

/// Antialiased rasterisation by 4×4 supersampling per pixel.
///
/// Pixel `(row, col)` covers `[col, col+1) × [row, row+1)` in canvas units;
/// `x` runs along columns and `y` along rows.
pub fn render_shape(spec: &ShapeSpec, side: usize) -> Result<Image> {
    if side < 8 {
        return Err(Error::usage(format!("image side must be >= 8, got {side}")));
    }
    let s = side as f64;
    let (cx, cy) = (spec.x * s, spec.y * s);
    let radius = spec.scale * s / 2.0;
    let (sin, cos) = spec.orientation.sin_cos();
    let step = 1.0 / SUPERSAMPLE as f64;
    let samples = (SUPERSAMPLE * SUPERSAMPLE) as f64;
    let mut img = Image::blank(side);
    for row in 0..side {
        for col in 0..side {
            let mut hits = 0usize;
            for sy in 0..SUPERSAMPLE {
                let py = row as f64 + (sy as f64 + 0.5) * step - cy;
                for sx in 0..SUPERSAMPLE {
                    let px = col as f64 + (sx as f64 + 0.5) * step - cx;
                    // Rotate the sample into the shape frame.
                    let u = cos * px + sin * py;
                    let v = -sin * px + cos * py;
                    if spec.contains(u, v, radius) {
                        hits += 1;
                    }
                }
            }
            img.pixels[row * side + col] = hits as f64 / samples;
        }
    }
    Ok(img)
}
