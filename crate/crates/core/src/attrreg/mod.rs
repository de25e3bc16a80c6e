//! Attribute regularization.
//!
//! For a mini-batch of `m` examples and one attribute `a` bound to latent
//! dimension `r`, the regularizer compares the signs of all pairwise
//! attribute differences with a squashed version of the pairwise latent
//! differences:
//!
//! ```text
//! D_a(i, j) = a_i - a_j
//! D_r(i, j) = z_i[r] - z_j[r]
//! L(r, a)   = mean_ij | tanh(δ · D_r(i, j)) - sgn(D_a(i, j)) |
//! ```
//!
//! The mean runs over all `m²` entries, diagonal included, with
//! `sgn(0) = 0`. Minimising it makes `z[r]` increase monotonically with `a`.
//! The full objective adds `γ · Σ_l L(r_l, a_l)` to the β-VAE loss.

mod checkpoint;
mod train;

use serde::{Deserialize, Serialize};

use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::numgrad::{sign, SeededRng, Tape, Tensor, Var};
use crate::vae::{beta_vae_loss, VaeForward, VaeSession};

pub use checkpoint::{sidecar_path, Checkpoint, CheckpointMeta};
pub use train::{dataset_accuracy, init_model, train, EpochStats, TrainLog};

/// One regularized attribute: its row in the dataset and its latent dimension.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegEntry {
    pub name: String,
    pub attribute: usize,
    pub dim: usize,
}

/// Attribute → latent-dimension bindings.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegularizationSpec {
    entries: Vec<RegEntry>,
}

impl RegularizationSpec {
    pub fn new(entries: Vec<RegEntry>, latent_dim: usize) -> Result<Self> {
        if entries.len() > latent_dim {
            return Err(Error::usage(format!(
                "{} regularized attributes exceed {latent_dim} latent dimensions",
                entries.len()
            )));
        }
        for (i, e) in entries.iter().enumerate() {
            if e.dim >= latent_dim {
                return Err(Error::usage(format!(
                    "dimension {} for {} is outside the {latent_dim}-dimensional latent space",
                    e.dim, e.name
                )));
            }
            if entries[..i].iter().any(|o| o.dim == e.dim) {
                return Err(Error::usage(format!("dimension {} bound twice", e.dim)));
            }
            if entries[..i].iter().any(|o| o.name == e.name) {
                return Err(Error::usage(format!("attribute {} bound twice", e.name)));
            }
        }
        Ok(RegularizationSpec { entries })
    }

    /// Binds the named attributes to dimensions `0, 1, …` in the given order.
    pub fn by_name(dataset: &Dataset, names: &[&str], latent_dim: usize) -> Result<Self> {
        let dims: Vec<usize> = (0..names.len()).collect();
        Self::by_name_with_dims(dataset, names, &dims, latent_dim)
    }

    pub fn by_name_with_dims(
        dataset: &Dataset,
        names: &[&str],
        dims: &[usize],
        latent_dim: usize,
    ) -> Result<Self> {
        if names.len() != dims.len() {
            return Err(Error::usage("one dimension per attribute is required"));
        }
        let entries = names
            .iter()
            .zip(dims)
            .map(|(&name, &dim)| {
                let attribute = dataset.attribute_index(name).ok_or_else(|| {
                    Error::usage(format!(
                        "attribute {name:?} not in dataset; available: {}",
                        dataset.attribute_names().join(", ")
                    ))
                })?;
                Ok(RegEntry {
                    name: name.to_string(),
                    attribute,
                    dim,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        RegularizationSpec::new(entries, latent_dim)
    }

    pub fn entries(&self) -> &[RegEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn find(&self, name: &str) -> Option<&RegEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Checks the bindings still refer to the same attribute names.
    pub fn check_against(&self, dataset: &Dataset) -> Result<()> {
        for e in &self.entries {
            match dataset.attribute_names().get(e.attribute) {
                Some(n) if *n == e.name => {}
                _ => {
                    return Err(Error::usage(format!(
                        "attribute {:?} not at row {} of the dataset; available: {}",
                        e.name,
                        e.attribute,
                        dataset.attribute_names().join(", ")
                    )))
                }
            }
        }
        Ok(())
    }
}

/// Which latent code enters the regularizer.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatentSource {
    /// The reparameterized sample `z`.
    #[default]
    Sampled,
    /// The posterior mean `μ`.
    Mean,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArVaeConfig {
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    #[serde(default)]
    pub latent_source: LatentSource,
}

impl Default for ArVaeConfig {
    fn default() -> Self {
        ArVaeConfig::images()
    }
}

impl ArVaeConfig {
    /// Image defaults: γ = 10, δ = 1, β = 1.
    pub fn images() -> Self {
        ArVaeConfig {
            beta: 1.0,
            gamma: 10.0,
            delta: 1.0,
            batch_size: 64,
            epochs: 30,
            learning_rate: 1e-4,
            seed: 0,
            latent_source: LatentSource::Sampled,
        }
    }

    /// Music defaults: γ = 1, δ = 10, β = 0.001.
    pub fn music() -> Self {
        ArVaeConfig {
            beta: 0.001,
            gamma: 1.0,
            delta: 10.0,
            ..ArVaeConfig::images()
        }
    }

    /// β-VAE baseline for images (β = 4, no regularization).
    pub fn beta_vae_images() -> Self {
        ArVaeConfig {
            beta: 4.0,
            gamma: 0.0,
            ..ArVaeConfig::images()
        }
    }

    /// β-VAE baseline for music (β = 0.001, no regularization).
    pub fn beta_vae_music() -> Self {
        ArVaeConfig {
            gamma: 0.0,
            ..ArVaeConfig::music()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::usage(format!("beta must be >= 0, got {}", self.beta)));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::usage(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::usage(format!("delta must be > 0, got {}", self.delta)));
        }
        if self.batch_size < 2 {
            return Err(Error::usage("batch size must be >= 2"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::usage("learning rate must be > 0"));
        }
        Ok(())
    }
}

/// `D_a(i, j) = a_i - a_j`.
pub fn attribute_distance_matrix(a: &[f64]) -> Tensor {
    let m = a.len();
    let mut out = Vec::with_capacity(m * m);
    for &ai in a {
        for &aj in a {
            out.push(ai - aj);
        }
    }
    Tensor::matrix(m, m, out).expect("square matrix")
}

/// `D_r(i, j) = z_i - z_j`, differentiable in `z_r`.
pub fn latent_distance_matrix(tape: &mut Tape, z_r: Var) -> Result<Var> {
    tape.pairwise_diff(z_r)
}

/// The attribute regularization loss for one latent column `z_r`
/// (shape `m` or `m×1`) against attribute values `a`.
pub fn attr_reg_loss(tape: &mut Tape, z_r: Var, a: &[f64], delta: f64) -> Result<Var> {
    let m = tape.value(z_r).len();
    if m != a.len() {
        return Err(Error::dim(format!("{m} latent codes for {} attributes", a.len())));
    }
    if m < 2 {
        return Err(Error::contract("attribute regularization needs at least two examples"));
    }
    if !(delta > 0.0) {
        return Err(Error::contract(format!("delta must be > 0, got {delta}")));
    }
    let signs = attribute_distance_matrix(a).map(sign);
    let d_r = latent_distance_matrix(tape, z_r)?;
    let scaled = tape.scale(d_r, delta);
    let squashed = tape.tanh(scaled)?;
    let target = tape.constant(signs);
    let diff = tape.sub(squashed, target)?;
    let abs = tape.abs(diff)?;
    tape.mean(abs)
}

/// Scalar value of [`attr_reg_loss`] on plain slices.
pub fn attr_reg_value(z_r: &[f64], a: &[f64], delta: f64) -> Result<f64> {
    let mut tape = Tape::new();
    let z = tape.constant(Tensor::vector(z_r.to_vec()));
    let l = attr_reg_loss(&mut tape, z, a, delta)?;
    tape.value(l).item()
}

/// Handles to the pieces of one AR-VAE objective evaluation.
#[derive(Clone, Debug)]
pub struct ArVaeLoss {
    pub total: Var,
    pub recon: Var,
    pub kld: Var,
    /// One term per entry of the regularization spec.
    pub reg: Vec<Var>,
    pub forward: VaeForward,
}

/// `recon + β·KL + γ·Σ_l L(r_l, a_l)`.
///
/// `attributes[l]` holds the batch values of the spec's `l`-th attribute.
pub fn ar_vae_loss(
    session: &mut VaeSession<'_>,
    x: &Tensor,
    attributes: &[Vec<f64>],
    spec: &RegularizationSpec,
    config: &ArVaeConfig,
    rng: &mut SeededRng,
) -> Result<ArVaeLoss> {
    if attributes.len() != spec.len() {
        return Err(Error::dim(format!(
            "{} attribute rows for {} regularized attributes",
            attributes.len(),
            spec.len()
        )));
    }
    let base = beta_vae_loss(session, x, config.beta, rng)?;
    let latent = match config.latent_source {
        LatentSource::Sampled => base.forward.z,
        LatentSource::Mean => base.forward.mu,
    };
    let mut reg = Vec::with_capacity(spec.len());
    for (entry, a) in spec.entries().iter().zip(attributes) {
        let column = session.tape.slice_cols(latent, entry.dim, 1)?;
        reg.push(attr_reg_loss(&mut session.tape, column, a, config.delta)?);
    }
    let total = match reg.split_first() {
        None => base.total,
        Some((&first, rest)) => {
            let mut sum = first;
            for &r in rest {
                sum = session.tape.add(sum, r)?;
            }
            let weighted = session.tape.scale(sum, config.gamma);
            session.tape.add(base.total, weighted)?
        }
    };
    Ok(ArVaeLoss {
        total,
        recon: base.recon,
        kld: base.kld,
        reg,
        forward: base.forward,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numgrad::SeededRng;
    use proptest::prelude::*;

    /// Direct double loop over all pairs.
    fn naive_reg(z: &[f64], a: &[f64], delta: f64) -> f64 {
        let m = z.len();
        let mut total = 0.0;
        for i in 0..m {
            for j in 0..m {
                let s = if a[i] > a[j] {
                    1.0
                } else if a[i] < a[j] {
                    -1.0
                } else {
                    0.0
                };
                total += ((delta * (z[i] - z[j])).tanh() - s).abs();
            }
        }
        total / (m * m) as f64
    }

    #[test]
    fn distance_matrices() {
        assert_eq!(attribute_distance_matrix(&[3.0, 3.0]).data(), &[0.0; 4]);
        assert_eq!(attribute_distance_matrix(&[1.0, 2.0]).data(), &[0.0, -1.0, 1.0, 0.0]);
        let mut rng = SeededRng::new(1);
        let a: Vec<f64> = (0..8).map(|_| rng.standard_normal()).collect();
        let d = attribute_distance_matrix(&a);
        for i in 0..8 {
            for j in 0..8 {
                assert_eq!(d.at(i, j), -d.at(j, i));
            }
        }

        let mut t = Tape::new();
        let z = t.constant(Tensor::vector(vec![0.0, 0.0]));
        let dz = latent_distance_matrix(&mut t, z).unwrap();
        assert_eq!(t.value(dz).data(), &[0.0; 4]);
        let z = t.parameter(Tensor::vector(vec![-10.0, 10.0]));
        let dz = latent_distance_matrix(&mut t, z).unwrap();
        assert_eq!(t.value(dz).data(), &[0.0, -20.0, 20.0, 0.0]);
        let s = t.sum(dz).unwrap();
        assert_eq!(t.backward(s).unwrap().get(z).data(), &[0.0, 0.0]);
    }

    #[test]
    fn reg_loss_fixtures() {
        assert_eq!(attr_reg_value(&[0.0, 0.0], &[3.0, 3.0], 1.0).unwrap(), 0.0);
        assert!(attr_reg_value(&[-10.0, 10.0], &[1.0, 2.0], 1.0).unwrap() < 1e-8);
        let reversed = attr_reg_value(&[10.0, -10.0], &[1.0, 2.0], 1.0).unwrap();
        assert!((reversed - 1.0).abs() < 1e-8);
    }

    #[test]
    fn reg_loss_preconditions() {
        assert!(attr_reg_value(&[1.0], &[1.0], 1.0).is_err());
        assert!(attr_reg_value(&[1.0, 2.0], &[1.0], 1.0).is_err());
        assert!(attr_reg_value(&[1.0, 2.0], &[1.0, 2.0], 0.0).is_err());
    }

    #[test]
    fn vectorized_matches_double_loop() {
        let mut rng = SeededRng::new(77);
        for _ in 0..100 {
            let m = 2 + rng.below(63);
            let z: Vec<f64> = (0..m).map(|_| 2.0 * rng.standard_normal()).collect();
            let a: Vec<f64> = (0..m).map(|_| (rng.below(5)) as f64).collect();
            let delta = rng.uniform_range(0.1, 10.0);
            let v = attr_reg_value(&z, &a, delta).unwrap();
            assert!((v - naive_reg(&z, &a, delta)).abs() < 1e-12);
        }
    }

    #[test]
    fn reg_gradient_matches_finite_differences() {
        let mut rng = SeededRng::new(3);
        let z0: Vec<f64> = (0..6).map(|_| rng.standard_normal()).collect();
        let a: Vec<f64> = (0..6).map(|_| rng.standard_normal()).collect();
        let mut t = Tape::new();
        let z = t.parameter(Tensor::vector(z0.clone()));
        let l = attr_reg_loss(&mut t, z, &a, 1.5).unwrap();
        let g = t.backward(l).unwrap().get(z);
        let h = 1e-5;
        for i in 0..6 {
            let mut p = z0.clone();
            p[i] += h;
            let mut q = z0.clone();
            q[i] -= h;
            let fd = (naive_reg(&p, &a, 1.5) - naive_reg(&q, &a, 1.5)) / (2.0 * h);
            assert!((g.data()[i] - fd).abs() < 1e-8);
        }
    }

    #[test]
    fn spec_validation() {
        let e = |name: &str, dim| RegEntry {
            name: name.into(),
            attribute: 0,
            dim,
        };
        assert!(RegularizationSpec::new(vec![e("a", 0), e("b", 1)], 2).is_ok());
        assert!(RegularizationSpec::new(vec![e("a", 2)], 2).is_err());
        assert!(RegularizationSpec::new(vec![e("a", 0), e("b", 0)], 2).is_err());
        assert!(RegularizationSpec::new(vec![e("a", 0), e("b", 1), e("c", 2)], 2).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(ArVaeConfig::images().validate().is_ok());
        let bad = [
            ArVaeConfig { gamma: -1.0, ..ArVaeConfig::images() },
            ArVaeConfig { delta: 0.0, ..ArVaeConfig::images() },
            ArVaeConfig { batch_size: 1, ..ArVaeConfig::images() },
            ArVaeConfig { beta: f64::NAN, ..ArVaeConfig::images() },
        ];
        for c in bad {
            assert!(c.validate().is_err());
        }
    }

    fn arb_batch() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64)> {
        (2usize..24).prop_flat_map(|m| {
            (
                proptest::collection::vec(-5.0f64..5.0, m),
                proptest::collection::vec(-3.0f64..3.0, m),
                0.05f64..20.0,
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn reg_loss_bounded((z, a, delta) in arb_batch()) {
            let v = attr_reg_value(&z, &a, delta).unwrap();
            prop_assert!((0.0..=2.0).contains(&v));
        }
    }

    proptest! {
        #[test]
        fn invariant_to_increasing_attribute_transform((z, a, delta) in arb_batch()) {
            let warped: Vec<f64> = a.iter().map(|v| v.powi(3) + 5.0 * v).collect();
            prop_assert_eq!(
                attr_reg_value(&z, &a, delta).unwrap(),
                attr_reg_value(&z, &warped, delta).unwrap()
            );
        }

        #[test]
        fn delta_is_a_pure_scale((z, a, delta) in arb_batch()) {
            // Integer-valued codes and a power-of-two delta keep δ·(z_i - z_j)
            // and δ·z_i - δ·z_j bit-identical.
            let z: Vec<f64> = z.iter().map(|v| v.round()).collect();
            let delta = 2f64.powi((delta.log2().round()) as i32);
            let scaled: Vec<f64> = z.iter().map(|v| delta * v).collect();
            prop_assert_eq!(
                attr_reg_value(&z, &a, delta).unwrap(),
                attr_reg_value(&scaled, &a, 1.0).unwrap()
            );
        }

        #[test]
        fn permutation_invariant((z, a, delta) in arb_batch(), seed in 0u64..1000) {
            let perm = SeededRng::new(seed).permutation(z.len());
            let zp: Vec<f64> = perm.iter().map(|&i| z[i]).collect();
            let ap: Vec<f64> = perm.iter().map(|&i| a[i]).collect();
            let v = attr_reg_value(&z, &a, delta).unwrap();
            let w = attr_reg_value(&zp, &ap, delta).unwrap();
            prop_assert!((v - w).abs() < 1e-12);
        }
    }
}
