//! Synthetic datasets and their on-disk format.

mod io;
pub mod measures;
pub mod shapes;

use std::f64::consts::FRAC_PI_2;

use crate::attributes::image::{image_attributes, SHAPE_ATTRIBUTE_NAMES};
use crate::attributes::music::{Measure, TokenVocabulary, MEASURE_LEN};
use crate::error::{Error, Result};
use crate::numgrad::{SeededRng, Tensor};
use crate::vae::OutputHead;

pub use io::{fnv1a, load_dataset, save_dataset, DATASET_VERSION};
pub use measures::{sample_measure, sample_measure_dataset, MeasureSamplerConfig};
pub use shapes::{render_shape, Image, ShapeKind, ShapeSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    Shapes,
    Measures,
}

impl Domain {
    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Shapes => "shapes",
            Domain::Measures => "measures",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "shapes" => Ok(Domain::Shapes),
            "measures" => Ok(Domain::Measures),
            other => Err(Error::usage(format!(
                "unknown domain {other:?} (expected shapes or measures)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Examples {
    /// `n × side²` pixel rows.
    Pixels { side: usize, values: Vec<f64> },
    /// `n × 24` token ids.
    Tokens { vocab: TokenVocabulary, ids: Vec<u16> },
}

/// Seed and generator settings that produced a dataset.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GenerationManifest {
    pub seed: u64,
    pub config: Vec<(String, String)>,
}

impl GenerationManifest {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.config
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

/// Examples with an `L × N` attribute matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    examples: Examples,
    len: usize,
    attributes: Vec<Vec<f64>>,
    names: Vec<String>,
    manifest: GenerationManifest,
}

impl Dataset {
    pub fn new(
        examples: Examples,
        attributes: Vec<Vec<f64>>,
        names: Vec<String>,
        manifest: GenerationManifest,
    ) -> Result<Self> {
        let len = match &examples {
            Examples::Pixels { side, values } => {
                let w = side * side;
                if w == 0 || values.len() % w != 0 {
                    return Err(Error::dim("pixel payload is not a whole number of images"));
                }
                values.len() / w
            }
            Examples::Tokens { vocab, ids } => {
                if ids.len() % MEASURE_LEN != 0 {
                    return Err(Error::dim("token payload is not a whole number of measures"));
                }
                if let Some(bad) = ids.iter().find(|&&i| i as usize >= vocab.size()) {
                    return Err(Error::format(format!("token id {bad} outside vocabulary")));
                }
                ids.len() / MEASURE_LEN
            }
        };
        if attributes.len() != names.len() {
            return Err(Error::dim(format!(
                "{} attribute rows for {} names",
                attributes.len(),
                names.len()
            )));
        }
        if let Some(row) = attributes.iter().find(|r| r.len() != len) {
            return Err(Error::dim(format!(
                "attribute row of length {} for {len} examples",
                row.len()
            )));
        }
        for (i, n) in names.iter().enumerate() {
            if n.is_empty() || n.contains([',', ' ', '=']) {
                return Err(Error::contract(format!("invalid attribute name {n:?}")));
            }
            if names[..i].contains(n) {
                return Err(Error::contract(format!("duplicate attribute name {n}")));
            }
        }
        Ok(Dataset {
            examples,
            len,
            attributes,
            names,
            manifest,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn domain(&self) -> Domain {
        match self.examples {
            Examples::Pixels { .. } => Domain::Shapes,
            Examples::Tokens { .. } => Domain::Measures,
        }
    }

    pub fn examples(&self) -> &Examples {
        &self.examples
    }

    pub fn manifest(&self) -> &GenerationManifest {
        &self.manifest
    }

    pub fn attribute_names(&self) -> &[String] {
        &self.names
    }

    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Row `l` of the attribute matrix.
    pub fn attribute(&self, l: usize) -> &[f64] {
        &self.attributes[l]
    }

    pub fn attributes(&self) -> &[Vec<f64>] {
        &self.attributes
    }

    /// Width of one encoder input row.
    pub fn input_width(&self) -> usize {
        match &self.examples {
            Examples::Pixels { side, .. } => side * side,
            Examples::Tokens { vocab, .. } => MEASURE_LEN * vocab.size(),
        }
    }

    /// Matching decoder head.
    pub fn head(&self) -> OutputHead {
        match &self.examples {
            Examples::Pixels { .. } => OutputHead::Real,
            Examples::Tokens { vocab, .. } => OutputHead::Categorical {
                positions: MEASURE_LEN,
                classes: vocab.size(),
            },
        }
    }

    pub fn vocabulary(&self) -> Option<TokenVocabulary> {
        match &self.examples {
            Examples::Tokens { vocab, .. } => Some(*vocab),
            Examples::Pixels { .. } => None,
        }
    }

    pub fn side(&self) -> Option<usize> {
        match &self.examples {
            Examples::Pixels { side, .. } => Some(*side),
            Examples::Tokens { .. } => None,
        }
    }

    fn write_input(&self, i: usize, out: &mut [f64]) {
        match &self.examples {
            Examples::Pixels { side, values } => {
                let w = side * side;
                out.copy_from_slice(&values[i * w..(i + 1) * w]);
            }
            Examples::Tokens { vocab, ids } => {
                let v = vocab.size();
                out.fill(0.0);
                for (t, &id) in ids[i * MEASURE_LEN..(i + 1) * MEASURE_LEN].iter().enumerate() {
                    out[t * v + id as usize] = 1.0;
                }
            }
        }
    }

    /// Encoder inputs for the given example indices (tokens one-hot encoded).
    pub fn inputs(&self, indices: &[usize]) -> Tensor {
        let w = self.input_width();
        let mut t = Tensor::zeros(&[indices.len(), w]);
        for (row, &i) in t.data_mut().chunks_mut(w).zip(indices) {
            self.write_input(i, row);
        }
        t
    }

    pub fn all_inputs(&self) -> Tensor {
        self.inputs(&(0..self.len).collect::<Vec<_>>())
    }

    pub fn image(&self, i: usize) -> Option<Image> {
        match &self.examples {
            Examples::Pixels { side, values } => {
                let w = side * side;
                Some(Image {
                    side: *side,
                    pixels: values[i * w..(i + 1) * w].to_vec(),
                })
            }
            Examples::Tokens { .. } => None,
        }
    }

    pub fn measure(&self, i: usize) -> Option<Measure> {
        match &self.examples {
            Examples::Tokens { vocab, ids } => {
                let row: Vec<usize> = ids[i * MEASURE_LEN..(i + 1) * MEASURE_LEN]
                    .iter()
                    .map(|&v| v as usize)
                    .collect();
                Measure::from_ids(&row, vocab).ok()
            }
            Examples::Pixels { .. } => None,
        }
    }

    /// The examples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len) {
            return Err(Error::contract(format!("index {bad} out of {}", self.len)));
        }
        let examples = match &self.examples {
            Examples::Pixels { side, values } => {
                let w = side * side;
                let mut v = Vec::with_capacity(indices.len() * w);
                for &i in indices {
                    v.extend_from_slice(&values[i * w..(i + 1) * w]);
                }
                Examples::Pixels {
                    side: *side,
                    values: v,
                }
            }
            Examples::Tokens { vocab, ids } => {
                let mut v = Vec::with_capacity(indices.len() * MEASURE_LEN);
                for &i in indices {
                    v.extend_from_slice(&ids[i * MEASURE_LEN..(i + 1) * MEASURE_LEN]);
                }
                Examples::Tokens {
                    vocab: *vocab,
                    ids: v,
                }
            }
        };
        let attributes = self
            .attributes
            .iter()
            .map(|row| indices.iter().map(|&i| row[i]).collect())
            .collect();
        Dataset::new(examples, attributes, self.names.clone(), self.manifest.clone())
    }

    /// First `n` examples and the remainder.
    pub fn split_at(&self, n: usize) -> Result<(Dataset, Dataset)> {
        let n = n.min(self.len);
        let head: Vec<usize> = (0..n).collect();
        let tail: Vec<usize> = (n..self.len).collect();
        Ok((self.subset(&head)?, self.subset(&tail)?))
    }
}

/// `n` sprites with uniformly drawn factors.
///
/// Attributes are `scale, x, y, orientation, area` (see
/// [`crate::attributes::ImageAttributes`]). Sprite `i` draws from substream `i`.
pub fn sample_shape_dataset(n: usize, side: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::usage("n must be >= 1"));
    }
    if side < 8 {
        return Err(Error::usage(format!("image side must be >= 8, got {side}")));
    }
    let mut values = Vec::with_capacity(n * side * side);
    let mut attrs = vec![Vec::with_capacity(n); SHAPE_ATTRIBUTE_NAMES.len()];
    for i in 0..n {
        let mut rng = SeededRng::substream(seed, i as u64);
        let kind = ShapeKind::ALL[rng.below(3)];
        let scale = rng.uniform_range(shapes::MIN_SCALE, shapes::MAX_SCALE);
        let x = rng.uniform();
        let y = rng.uniform();
        let orientation = rng.uniform_range(0.0, FRAC_PI_2);
        let spec = ShapeSpec::new(kind, scale, x, y, orientation);
        let img = render_shape(&spec, side)?;
        for (row, v) in attrs.iter_mut().zip(image_attributes(&spec, &img).stored()) {
            row.push(v);
        }
        values.extend_from_slice(&img.pixels);
    }
    Dataset::new(
        Examples::Pixels { side, values },
        attrs,
        SHAPE_ATTRIBUTE_NAMES.iter().map(|s| s.to_string()).collect(),
        GenerationManifest {
            seed,
            config: vec![("side".into(), side.to_string())],
        },
    )
}
