//! Latent traversals, attribute surfaces and their rendering.
//!
//! A traversal encodes an anchor, overwrites one latent code with each value
//! of a sweep, decodes, and re-measures an attribute on every output. A
//! surface does the same over a 2-d grid with the remaining codes drawn once
//! and held fixed.

use std::fmt::Write as _;

use crate::attributes::music::{
    music_attributes, ComplexityWeights, Measure, MusicAttributeConfig, TokenVocabulary,
    MEASURE_LEN, MUSIC_ATTRIBUTE_NAMES,
};
use crate::attributes::estimate_image_attribute;
use crate::datagen::{Dataset, Image};
use crate::error::{Error, Result};
use crate::numgrad::{SeededRng, Tensor};
use crate::vae::{argmax_blocks, MlpVae};

/// Default sweep of a latent code.
pub const SWEEP_RANGE: (f64, f64) = (-4.0, 4.0);
pub const SWEEP_STEPS: usize = 9;

/// How decoder outputs are read back as data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OutputKind {
    Image { side: usize },
    Music { vocab: TokenVocabulary },
}

impl OutputKind {
    pub fn of(dataset: &Dataset) -> OutputKind {
        match (dataset.side(), dataset.vocabulary()) {
            (Some(side), _) => OutputKind::Image { side },
            (None, Some(vocab)) => OutputKind::Music { vocab },
            (None, None) => unreachable!("datasets hold pixels or tokens"),
        }
    }

    pub fn attribute_names(&self) -> &'static [&'static str] {
        match self {
            OutputKind::Image { .. } => &["scale", "x", "y", "area"],
            OutputKind::Music { .. } => &MUSIC_ATTRIBUTE_NAMES,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Decoded {
    Image(Image),
    Measure(Measure),
}

/// Reads one decoder output row: pixels as-is, logits by per-position argmax
/// (continuations after a rest become rests).
pub fn interpret_output(kind: OutputKind, row: &[f64]) -> Result<Decoded> {
    match kind {
        OutputKind::Image { side } => Ok(Decoded::Image(Image::from_pixels(side, row.to_vec())?)),
        OutputKind::Music { vocab } => {
            if row.len() != MEASURE_LEN * vocab.size() {
                return Err(Error::dim(format!(
                    "{} logits for a {}-token vocabulary",
                    row.len(),
                    vocab.size()
                )));
            }
            let ids = argmax_blocks(row, vocab.size());
            let tokens: Vec<_> = ids.iter().map(|&i| vocab.token(i)).collect::<Result<_>>()?;
            Ok(Decoded::Measure(Measure::repaired(
                tokens.try_into().expect("one token per position"),
            )))
        }
    }
}

/// Attribute `name` measured on a decoded output.
pub fn decoded_attribute(kind: OutputKind, decoded: &Decoded, name: &str) -> Result<f64> {
    match (decoded, kind) {
        (Decoded::Image(img), _) => estimate_image_attribute(img, name),
        (Decoded::Measure(m), OutputKind::Music { vocab }) => {
            let idx = MUSIC_ATTRIBUTE_NAMES
                .iter()
                .position(|&n| n == name)
                .ok_or_else(|| {
                    Error::usage(format!(
                        "unknown music attribute {name:?}; available: {}",
                        MUSIC_ATTRIBUTE_NAMES.join(", ")
                    ))
                })?;
            let cfg = MusicAttributeConfig::for_vocabulary(&vocab);
            Ok(music_attributes(m, &ComplexityWeights::default(), &cfg)[idx])
        }
        (Decoded::Measure(_), OutputKind::Image { .. }) => {
            Err(Error::contract("measure decoded under an image output kind"))
        }
    }
}

/// `steps` evenly spaced values from `min` to `max` inclusive.
pub fn sweep_values(min: f64, max: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![min],
        _ => (0..steps)
            .map(|i| min + (max - min) * i as f64 / (steps - 1) as f64)
            .collect(),
    }
}

/// Number of sweep steps that do not decrease: the first step counts, and
/// each later step counts when its value is at least the previous one.
pub fn non_decreasing_steps(values: &[f64]) -> usize {
    if values.is_empty() {
        return 0;
    }
    1 + values.windows(2).filter(|w| w[1] >= w[0]).count()
}

/// Fraction of adjacent pairs with `v[i+1] >= v[i]`.
pub fn non_decreasing_fraction(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 1.0;
    }
    values.windows(2).filter(|w| w[1] >= w[0]).count() as f64 / (values.len() - 1) as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct Traversal {
    pub dim: usize,
    pub values: Vec<f64>,
    pub outputs: Vec<Decoded>,
    /// The attribute re-measured on each output.
    pub attribute: Vec<f64>,
}

/// Decodes `base` with code `dim` replaced by each sweep value.
pub fn traverse_code(
    model: &MlpVae,
    kind: OutputKind,
    base: &[f64],
    dim: usize,
    values: &[f64],
    attribute: &str,
) -> Result<Traversal> {
    let d = model.latent_dim();
    if base.len() != d {
        return Err(Error::dim(format!("{} latent codes, model has {d}", base.len())));
    }
    if dim >= d {
        return Err(Error::usage(format!("dimension {dim} outside the {d}-dimensional latent space")));
    }
    let mut z = Vec::with_capacity(values.len() * d);
    for &v in values {
        let mut row = base.to_vec();
        row[dim] = v;
        z.extend(row);
    }
    let out = model.decode(&Tensor::matrix(values.len(), d, z)?)?;
    let width = out.shape()[1];
    let outputs: Vec<Decoded> = out
        .data()
        .chunks(width)
        .map(|row| interpret_output(kind, row))
        .collect::<Result<_>>()?;
    let attribute = outputs
        .iter()
        .map(|o| decoded_attribute(kind, o, attribute))
        .collect::<Result<_>>()?;
    Ok(Traversal {
        dim,
        values: values.to_vec(),
        outputs,
        attribute,
    })
}

/// Traversal from the encoder mean of one input row.
pub fn traverse(
    model: &MlpVae,
    kind: OutputKind,
    anchor: &Tensor,
    dim: usize,
    values: &[f64],
    attribute: &str,
) -> Result<Traversal> {
    let (mu, _) = model.encode(anchor)?;
    if mu.shape()[0] != 1 {
        return Err(Error::contract("traversal anchor must be a single example"));
    }
    traverse_code(model, kind, mu.row(0), dim, values, attribute)
}

/// Attribute values over a grid spanned by two latent dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct Surface {
    pub x_dim: usize,
    pub y_dim: usize,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// `values[iy][ix]`.
    pub values: Vec<Vec<f64>>,
}

impl Surface {
    /// Mean over `y` for each `x` column.
    pub fn column_means(&self) -> Vec<f64> {
        (0..self.xs.len())
            .map(|ix| self.values.iter().map(|r| r[ix]).sum::<f64>() / self.ys.len() as f64)
            .collect()
    }

    /// Rows of `x,y,value` with a header.
    pub fn to_csv_string(&self, attribute: &str) -> String {
        let mut s = format!("x,y,{attribute}\n");
        for (iy, y) in self.ys.iter().enumerate() {
            for (ix, x) in self.xs.iter().enumerate() {
                writeln!(s, "{x},{y},{}", self.values[iy][ix]).expect("string write");
            }
        }
        s
    }
}

/// Sweeps `x_dim` and `y_dim` over `[-4, 4]` with the other codes drawn once
/// from a standard normal under `seed`.
pub fn attribute_surface(
    model: &MlpVae,
    kind: OutputKind,
    attribute: &str,
    (x_dim, y_dim): (usize, usize),
    (nx, ny): (usize, usize),
    seed: u64,
) -> Result<Surface> {
    if x_dim == y_dim {
        return Err(Error::usage("surface needs two different latent dimensions"));
    }
    let d = model.latent_dim();
    if x_dim >= d || y_dim >= d {
        return Err(Error::usage(format!("dimensions must be below {d}")));
    }
    let mut rng = SeededRng::new(seed);
    let base: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();
    let xs = sweep_values(SWEEP_RANGE.0, SWEEP_RANGE.1, nx);
    let ys = sweep_values(SWEEP_RANGE.0, SWEEP_RANGE.1, ny);
    let mut values = Vec::with_capacity(ny);
    for &y in &ys {
        let mut row = base.clone();
        row[y_dim] = y;
        values.push(traverse_code(model, kind, &row, x_dim, &xs, attribute)?.attribute);
    }
    Ok(Surface {
        x_dim,
        y_dim,
        xs,
        ys,
        values,
    })
}

/// Binary PGM (P5, maxval 255) of image tiles laid out row by row.
pub fn pgm_grid(rows: &[Vec<Image>]) -> Result<Vec<u8>> {
    let side = rows
        .first()
        .and_then(|r| r.first())
        .map(|i| i.side)
        .ok_or_else(|| Error::contract("empty image grid"))?;
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) || rows.iter().flatten().any(|i| i.side != side) {
        return Err(Error::contract("image grid rows must be equally sized"));
    }
    let (w, h) = (cols * side, rows.len() * side);
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    for row in rows {
        for r in 0..side {
            for img in row {
                for c in 0..side {
                    out.push((img.at(r, c).clamp(0.0, 1.0) * 255.0).round() as u8);
                }
            }
        }
    }
    Ok(out)
}

/// Step-indexed piano rolls of a music traversal.
pub fn piano_roll_text(traversal: &Traversal, vocab: &TokenVocabulary) -> String {
    let mut s = String::new();
    for (k, (v, out)) in traversal.values.iter().zip(&traversal.outputs).enumerate() {
        if let Decoded::Measure(m) = out {
            writeln!(s, "step {k} z[{}]={v}", traversal.dim).expect("string write");
            writeln!(s, "{m}").expect("string write");
            s.push_str(&m.piano_roll(vocab));
            s.push('\n');
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::sample_measure_dataset;
    use crate::datagen::MeasureSamplerConfig;
    use crate::vae::{Architecture, OutputHead};

    #[test]
    fn sweeps() {
        assert_eq!(sweep_values(-4.0, 4.0, 9), vec![-4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(sweep_values(1.0, 1.0, 3), vec![1.0; 3]);
        assert_eq!(non_decreasing_steps(&[1.0, 2.0, 2.0, 1.0, 3.0]), 4);
        assert_eq!(non_decreasing_steps(&[]), 0);
        assert_eq!(non_decreasing_fraction(&[3.0, 2.0, 2.0]), 0.5);
    }

    fn model(width: usize, head: OutputHead) -> MlpVae {
        let arch = Architecture::desk_scale(width, 4, head);
        MlpVae::new(arch, &mut SeededRng::new(3)).unwrap()
    }

    #[test]
    fn traversal_cardinality_and_degenerate_range() {
        let m = model(64, OutputHead::Real);
        let kind = OutputKind::Image { side: 8 };
        let anchor = Tensor::matrix(1, 64, vec![0.3; 64]).unwrap();
        let t = traverse(&m, kind, &anchor, 1, &sweep_values(-4.0, 4.0, 9), "area").unwrap();
        assert_eq!(t.outputs.len(), 9);
        assert_eq!(t.attribute.len(), 9);
        let flat = traverse(&m, kind, &anchor, 1, &sweep_values(2.0, 2.0, 9), "area").unwrap();
        assert!(flat.outputs.windows(2).all(|w| w[0] == w[1]));
        assert!(traverse(&m, kind, &anchor, 9, &[0.0], "area").is_err());
        assert!(traverse(&m, kind, &anchor, 0, &[0.0], "orientation").is_err());
    }

    #[test]
    fn music_outputs_decode_to_valid_measures() {
        let ds = sample_measure_dataset(3, &MeasureSamplerConfig::default()).unwrap();
        let kind = OutputKind::of(&ds);
        let m = model(ds.input_width(), ds.head());
        let t = traverse(&m, kind, &ds.inputs(&[0]), 0, &[-1.0, 1.0], "note_density").unwrap();
        for (o, a) in t.outputs.iter().zip(&t.attribute) {
            let Decoded::Measure(measure) = o else { panic!("expected a measure") };
            assert!(Measure::new(*measure.tokens()).is_ok());
            assert!((0.0..=1.0).contains(a));
        }
        let OutputKind::Music { vocab } = kind else { unreachable!() };
        assert!(piano_roll_text(&t, &vocab).starts_with("step 0 z[0]=-1"));
    }

    #[test]
    fn one_hot_logits_round_trip() {
        let ds = sample_measure_dataset(4, &MeasureSamplerConfig::default()).unwrap();
        let kind = OutputKind::of(&ds);
        let x = ds.inputs(&[2]);
        let Decoded::Measure(m) = interpret_output(kind, x.row(0)).unwrap() else { panic!() };
        assert_eq!(Some(m.clone()), ds.measure(2));
        let stored = ds.attribute(ds.attribute_index("contour").unwrap())[2];
        assert_eq!(decoded_attribute(kind, &Decoded::Measure(m), "contour").unwrap(), stored);
    }

    #[test]
    fn surface_shape_and_determinism() {
        let m = model(64, OutputHead::Real);
        let kind = OutputKind::Image { side: 8 };
        let s = attribute_surface(&m, kind, "area", (0, 2), (9, 9), 5).unwrap();
        assert_eq!(s.to_csv_string("area").lines().count(), 82);
        assert_eq!(s, attribute_surface(&m, kind, "area", (0, 2), (9, 9), 5).unwrap());
        assert!(attribute_surface(&m, kind, "area", (1, 1), (9, 9), 5).is_err());
    }

    #[test]
    fn pgm_layout() {
        let a = Image::from_pixels(2, vec![0.0, 1.0, 0.5, 0.25]).unwrap();
        let b = Image::from_pixels(2, vec![1.0; 4]).unwrap();
        let bytes = pgm_grid(&[vec![a, b]]).unwrap();
        let header = b"P5\n4 2\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(&bytes[header.len()..], &[0, 255, 255, 255, 128, 64, 255, 255]);
    }
}
