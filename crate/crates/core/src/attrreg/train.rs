use std::io::Write;

use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::numgrad::{AdamConfig, AdamState, SeededRng};
use crate::vae::{reconstruction_accuracy, Architecture, MlpVae};

use super::{ar_vae_loss, ArVaeConfig, RegularizationSpec};

const INIT_STREAM: u64 = 0;
const SHUFFLE_STREAM: u64 = 1;
const SAMPLE_STREAM: u64 = 2;

/// Examples scored for reconstruction accuracy when no validation split is given.
const ACCURACY_SAMPLE: usize = 1000;

/// A freshly initialised model drawn from the config seed's init substream.
pub fn init_model(arch: Architecture, seed: u64) -> Result<MlpVae> {
    MlpVae::new(arch, &mut SeededRng::substream(seed, INIT_STREAM))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub recon: f64,
    pub kld: f64,
    pub reg: Vec<f64>,
    pub recon_accuracy: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub attributes: Vec<String>,
    pub epochs: Vec<EpochStats>,
}

impl TrainLog {
    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["epoch".to_string(), "recon".into(), "kld".into()];
        h.extend(self.attributes.iter().map(|a| format!("reg_{a}")));
        h.push("recon_accuracy".into());
        h
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header())?;
        for e in &self.epochs {
            let mut row = vec![e.epoch.to_string(), e.recon.to_string(), e.kld.to_string()];
            row.extend(e.reg.iter().map(f64::to_string));
            row.push(e.recon_accuracy.to_string());
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn last(&self) -> Option<&EpochStats> {
        self.epochs.last()
    }
}

fn batches(order: &[usize], size: usize) -> impl Iterator<Item = &[usize]> {
    order.chunks(size).filter(|b| b.len() >= 2)
}

/// Reconstruction accuracy over a whole dataset, decoding the encoder means.
pub fn dataset_accuracy(model: &MlpVae, data: &Dataset) -> Result<f64> {
    mean_accuracy(model, data, usize::MAX)
}

fn mean_accuracy(model: &MlpVae, data: &Dataset, limit: usize) -> Result<f64> {
    let n = data.len().min(limit);
    let head = model.architecture().head;
    let mut weighted = 0.0;
    let idx: Vec<usize> = (0..n).collect();
    for chunk in idx.chunks(500) {
        let x = data.inputs(chunk);
        let acc = reconstruction_accuracy(&model.reconstruct(&x)?, &x, head)?;
        weighted += acc * chunk.len() as f64;
    }
    Ok(weighted / n as f64)
}

/// Trains `model` in place for `config.epochs` epochs.
///
/// Each epoch visits the training set once in a seeded shuffled order; a
/// final partial batch is kept when it holds at least two examples. The
/// logged reconstruction accuracy is measured on `validation`, or on the
/// first examples of the training set when none is given.
pub fn train(
    model: &mut MlpVae,
    data: &Dataset,
    validation: Option<&Dataset>,
    spec: &RegularizationSpec,
    config: &ArVaeConfig,
) -> Result<TrainLog> {
    if data.len() < 2 {
        return Err(Error::contract(format!(
            "training needs at least two examples, dataset has {}",
            data.len()
        )));
    }
    config.validate()?;
    spec.check_against(data)?;
    if data.input_width() != model.architecture().input_width {
        return Err(Error::dim(format!(
            "dataset width {}, model expects {}",
            data.input_width(),
            model.architecture().input_width
        )));
    }
    let adam_cfg = AdamConfig {
        learning_rate: config.learning_rate,
        ..AdamConfig::default()
    };
    let mut adam = AdamState::new(model.params(), adam_cfg);
    let mut shuffle_rng = SeededRng::substream(config.seed, SHUFFLE_STREAM);
    let mut sample_rng = SeededRng::substream(config.seed, SAMPLE_STREAM);
    let mut log = TrainLog {
        attributes: spec.entries().iter().map(|e| e.name.clone()).collect(),
        epochs: Vec::with_capacity(config.epochs),
    };
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..config.epochs {
        shuffle_rng.shuffle(&mut order);
        let (mut recon, mut kld) = (0.0, 0.0);
        let mut reg = vec![0.0; spec.len()];
        let mut count = 0usize;
        for (b, batch) in batches(&order, config.batch_size).enumerate() {
            let x = data.inputs(batch);
            let attrs: Vec<Vec<f64>> = spec
                .entries()
                .iter()
                .map(|e| {
                    let col = data.attribute(e.attribute);
                    batch.iter().map(|&i| col[i]).collect()
                })
                .collect();
            let mut session = model.session();
            let loss = ar_vae_loss(&mut session, &x, &attrs, spec, config, &mut sample_rng)?;
            let total = session.tape.value(loss.total).item()?;
            if !total.is_finite() {
                return Err(Error::NonFinite(format!(
                    "loss became {total} at epoch {epoch}, batch {b}"
                )));
            }
            recon += session.tape.value(loss.recon).item()?;
            kld += session.tape.value(loss.kld).item()?;
            for (acc, &r) in reg.iter_mut().zip(&loss.reg) {
                *acc += session.tape.value(r).item()?;
            }
            let grads = session.gradients(loss.total)?;
            drop(session);
            adam.step(model.params_mut(), &grads)?;
            count += 1;
        }
        let scale = 1.0 / count as f64;
        let recon_accuracy = match validation {
            Some(v) => dataset_accuracy(model, v)?,
            None => mean_accuracy(model, data, ACCURACY_SAMPLE)?,
        };
        log.epochs.push(EpochStats {
            epoch,
            recon: recon * scale,
            kld: kld * scale,
            reg: reg.iter().map(|r| r * scale).collect(),
            recon_accuracy,
        });
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::sample_shape_dataset;
    use crate::vae::{Architecture, OutputHead};

    fn setup() -> (Dataset, Architecture) {
        let data = sample_shape_dataset(40, 8, 5).unwrap();
        let arch = Architecture {
            input_width: 64,
            encoder_hidden: vec![16],
            decoder_hidden: vec![16],
            latent: 4,
            activation: crate::vae::Activation::Relu,
            head: OutputHead::Real,
        };
        (data, arch)
    }

    fn cfg(gamma: f64, epochs: usize) -> ArVaeConfig {
        ArVaeConfig {
            gamma,
            epochs,
            batch_size: 16,
            seed: 9,
            ..ArVaeConfig::images()
        }
    }

    #[test]
    fn zero_epochs_leaves_parameters() {
        let (data, arch) = setup();
        let spec = RegularizationSpec::by_name(&data, &["scale", "x"], 4).unwrap();
        let mut model = init_model(arch, 9).unwrap();
        let before = model.params().clone();
        let log = train(&mut model, &data, None, &spec, &cfg(10.0, 0)).unwrap();
        assert!(log.epochs.is_empty());
        assert_eq!(model.params(), &before);
    }

    #[test]
    fn same_seed_same_log() {
        let (data, arch) = setup();
        let spec = RegularizationSpec::by_name(&data, &["scale"], 4).unwrap();
        let run = || {
            let mut m = init_model(arch.clone(), 9).unwrap();
            let log = train(&mut m, &data, None, &spec, &cfg(10.0, 3)).unwrap();
            (log, m.params().clone())
        };
        let (a, pa) = run();
        let (b, pb) = run();
        assert_eq!(a, b);
        assert_eq!(pa, pb);
        assert_eq!(a.epochs.len(), 3);
        for e in &a.epochs {
            assert!(e.recon.is_finite() && e.kld.is_finite() && e.reg[0].is_finite());
        }
    }

    #[test]
    fn gamma_zero_matches_beta_vae() {
        let (data, arch) = setup();
        let spec = RegularizationSpec::by_name(&data, &["scale", "area"], 4).unwrap();
        let empty = RegularizationSpec::default();
        let mut a = init_model(arch.clone(), 9).unwrap();
        let mut b = init_model(arch, 9).unwrap();
        let la = train(&mut a, &data, None, &spec, &cfg(0.0, 3)).unwrap();
        let lb = train(&mut b, &data, None, &empty, &cfg(0.0, 3)).unwrap();
        assert_eq!(a.params(), b.params());
        for (x, y) in la.epochs.iter().zip(&lb.epochs) {
            assert_eq!(x.recon.to_bits(), y.recon.to_bits());
            assert_eq!(x.kld.to_bits(), y.kld.to_bits());
            assert_eq!(x.recon_accuracy.to_bits(), y.recon_accuracy.to_bits());
        }
    }

    #[test]
    fn partial_batches() {
        let order: Vec<usize> = (0..10).collect();
        let sizes: Vec<usize> = batches(&order, 4).map(<[usize]>::len).collect();
        assert_eq!(sizes, vec![4, 4, 2]);
        let order: Vec<usize> = (0..9).collect();
        let sizes: Vec<usize> = batches(&order, 4).map(<[usize]>::len).collect();
        assert_eq!(sizes, vec![4, 4]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let (data, arch) = setup();
        let spec = RegularizationSpec::default();
        let mut model = init_model(arch, 1).unwrap();
        let tiny = data.subset(&[0]).unwrap();
        assert!(matches!(
            train(&mut model, &tiny, None, &spec, &cfg(1.0, 1)),
            Err(Error::Contract(_))
        ));
        let other = sample_shape_dataset(4, 12, 1).unwrap();
        assert!(train(&mut model, &other, None, &spec, &cfg(1.0, 1)).is_err());
    }

    #[test]
    fn csv_layout() {
        let log = TrainLog {
            attributes: vec!["scale".into(), "x".into()],
            epochs: vec![EpochStats {
                epoch: 0,
                recon: 1.5,
                kld: 0.25,
                reg: vec![0.5, 1.0],
                recon_accuracy: 0.75,
            }],
        };
        assert_eq!(
            log.to_csv_string(),
            "epoch,recon,kld,reg_scale,reg_x,recon_accuracy\n0,1.5,0.25,0.5,1,0.75\n"
        );
    }
}
