use std::f64::consts::FRAC_PI_2;

use crate::datagen::shapes::{Image, ShapeSpec, MAX_SCALE, MIN_SCALE};
use crate::error::{Error, Result};

/// Attribute names stored for sprite datasets, in matrix row order.
pub const SHAPE_ATTRIBUTE_NAMES: [&str; 5] = ["scale", "x", "y", "orientation", "area"];

/// Ground-truth factors of a sprite plus its pixel mass.
///
/// Factors are min-max normalised to `[0, 1]` over their generating ranges;
/// `shape` is the kind's ordinal divided by 2.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImageAttributes {
    pub shape: f64,
    pub scale: f64,
    pub x: f64,
    pub y: f64,
    pub orientation: f64,
    pub area: f64,
}

impl ImageAttributes {
    /// Values in [`SHAPE_ATTRIBUTE_NAMES`] order.
    pub fn stored(&self) -> [f64; 5] {
        [self.scale, self.x, self.y, self.orientation, self.area]
    }
}

pub fn normalize_scale(scale: f64) -> f64 {
    (scale - MIN_SCALE) / (MAX_SCALE - MIN_SCALE)
}

/// Mean pixel value.
pub fn pixel_area(image: &Image) -> f64 {
    if image.pixels.is_empty() {
        return 0.0;
    }
    image.pixels.iter().sum::<f64>() / image.pixels.len() as f64
}

pub fn image_attributes(spec: &ShapeSpec, image: &Image) -> ImageAttributes {
    ImageAttributes {
        shape: spec.kind().ordinal() as f64 / 2.0,
        scale: normalize_scale(spec.scale()),
        x: spec.x(),
        y: spec.y(),
        orientation: spec.orientation() / FRAC_PI_2,
        area: pixel_area(image),
    }
}

/// Recovers an attribute from pixels alone (for decoded images).
///
/// `x`/`y` come from the intensity centroid, `scale` from the radius of
/// gyration of the pixels at or above 0.5 (exact for disks up to
/// rasterisation, monotone in scale for every kind), `area` from the pixel
/// mass. Orientation is not recoverable this way.
pub fn estimate_image_attribute(image: &Image, name: &str) -> Result<f64> {
    let side = image.side as f64;
    let mass: f64 = image.pixels.iter().sum();
    let centroid = || {
        let (mut mx, mut my) = (0.0, 0.0);
        for r in 0..image.side {
            for c in 0..image.side {
                let v = image.at(r, c);
                mx += v * (c as f64 + 0.5);
                my += v * (r as f64 + 0.5);
            }
        }
        if mass > 0.0 {
            (mx / mass, my / mass)
        } else {
            (side / 2.0, side / 2.0)
        }
    };
    match name {
        "area" => Ok(pixel_area(image)),
        "x" => Ok(centroid().0 / side),
        "y" => Ok(centroid().1 / side),
        "scale" => {
            // Decoded images carry low-level haze that would dominate the
            // second moment of a small shape, so only lit pixels count.
            let lit = |r: usize, c: usize| image.at(r, c) >= 0.5;
            let cells = || (0..image.side).flat_map(|r| (0..image.side).map(move |c| (r, c)));
            let count = cells().filter(|&(r, c)| lit(r, c)).count() as f64;
            if count == 0.0 {
                return Ok(0.0);
            }
            let (mut cx, mut cy) = (0.0, 0.0);
            for (r, c) in cells().filter(|&(r, c)| lit(r, c)) {
                cx += c as f64 + 0.5;
                cy += r as f64 + 0.5;
            }
            let (cx, cy) = (cx / count, cy / count);
            let second: f64 = cells()
                .filter(|&(r, c)| lit(r, c))
                .map(|(r, c)| (c as f64 + 0.5 - cx).powi(2) + (r as f64 + 0.5 - cy).powi(2))
                .sum();
            let radius = (2.0 * second / count).sqrt();
            Ok(normalize_scale(2.0 * radius / side).clamp(0.0, 1.0))
        }
        other => Err(Error::usage(format!(
            "attribute {other:?} cannot be measured from pixels (supported: area, x, y, scale)"
        ))),
    }
}
