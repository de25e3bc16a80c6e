use std::fmt::Write as _;
use std::path::Path;

use crate::attrreg::{
    dataset_accuracy, init_model, train as train_model, ArVaeConfig, Checkpoint, LatentSource,
    RegularizationSpec,
};
use crate::datagen::{
    load_dataset, sample_measure_dataset, sample_shape_dataset, save_dataset, Dataset, Domain,
    MeasureSamplerConfig,
};
use crate::error::{Error, Result};
use crate::explore::{
    attribute_surface, pgm_grid, piano_roll_text, sweep_values, traverse as traverse_model,
    Decoded, OutputKind, SWEEP_RANGE, SWEEP_STEPS,
};
use crate::metrics::{interpretability, LatentAttributeTable, MetricReport, MetricSettings};
use crate::vae::Architecture;

use super::{
    required, EvalArgs, GenDataArgs, InputRecord, ReconstructArgs, Run, SurfaceArgs, SweepArgs,
    TrainArgs, TraverseArgs,
};

const DEFAULT_LATENT: usize = 8;

fn load(path: &Path) -> Result<Dataset> {
    load_dataset(path).map_err(|e| match e {
        Error::Io(io) => Error::Io(std::io::Error::new(
            io.kind(),
            format!("cannot read dataset {}: {io}", path.display()),
        )),
        other => other,
    })
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::load(path).map_err(|e| match e {
        Error::Io(io) => Error::Io(std::io::Error::new(
            io.kind(),
            format!("cannot read checkpoint {}: {io}", path.display()),
        )),
        other => other,
    })
}

fn dataset_record(role: &str, path: &Path, data: &Dataset) -> InputRecord {
    InputRecord::new(role, path, data.digest_hex())
}

fn checkpoint_record(path: &Path, ck: &Checkpoint) -> InputRecord {
    InputRecord::new("checkpoint", path, ck.meta.params_digest.clone())
}

fn unknown_attribute(name: &str, available: &[String]) -> Error {
    Error::usage(format!(
        "unknown attribute {name:?}; available: {}",
        available.join(", ")
    ))
}

// gen-data

pub(super) fn resolve_gen_data(mut a: GenDataArgs) -> Result<GenDataArgs> {
    let domain = Domain::parse(&required(a.domain.clone(), "domain")?)?;
    let n = required(a.n, "n")?;
    if n == 0 {
        return Err(Error::usage("--n must be at least 1"));
    }
    a.seed.get_or_insert(0);
    match domain {
        Domain::Shapes => {
            a.side.get_or_insert(16);
        }
        Domain::Measures => {
            let d = MeasureSamplerConfig::default();
            a.onset_prob.get_or_insert(d.onset_prob);
            a.hold_prob.get_or_insert(d.hold_prob);
            a.max_step.get_or_insert(d.max_step);
        }
    }
    a.out.get_or_insert_with(|| format!("{}.ds", domain.as_str()));
    Ok(a)
}

pub(super) fn gen_data(run: &mut Run<'_>, a: &GenDataArgs) -> Result<()> {
    let domain = Domain::parse(a.domain.as_deref().unwrap_or_default())?;
    let n = a.n.unwrap_or_default();
    let seed = a.seed.unwrap_or_default();
    let data = match domain {
        Domain::Shapes => {
            let side = a.side.unwrap_or(16);
            if side < 8 {
                return Err(Error::usage("--side must be at least 8"));
            }
            sample_shape_dataset(n, side, seed)?
        }
        Domain::Measures => {
            let cfg = MeasureSamplerConfig {
                onset_prob: a.onset_prob.unwrap_or_default(),
                hold_prob: a.hold_prob.unwrap_or_default(),
                max_step: a.max_step.unwrap_or_default(),
                seed,
                ..MeasureSamplerConfig::default()
            };
            sample_measure_dataset(n, &cfg)?
        }
    };
    let out = a.out.clone().unwrap_or_default();
    save_dataset(&data, &run.path(&out)).map_err(|e| match e {
        Error::Io(io) => Error::Io(std::io::Error::new(
            io.kind(),
            format!("cannot write {}: {io}", run.path(&out).display()),
        )),
        other => other,
    })?;
    run.manifest(&out, a, Vec::new(), std::slice::from_ref(&out))?;
    run.say(format!("wrote {} ({} examples)", run.path(&out).display(), data.len()))?;
    run.say(format!("digest {}", data.digest_hex()))
}

// train

pub(super) fn resolve_train(mut a: TrainArgs) -> Result<TrainArgs> {
    let data = load(&required(a.data.clone(), "data")?)?;
    let base = match data.domain() {
        Domain::Shapes => ArVaeConfig::images(),
        Domain::Measures => ArVaeConfig::music(),
    };
    a.attributes
        .get_or_insert_with(|| data.attribute_names().to_vec());
    let l = a.attributes.as_ref().map_or(0, Vec::len);
    a.dims.get_or_insert_with(|| (0..l).collect());
    a.latent.get_or_insert(DEFAULT_LATENT);
    a.beta.get_or_insert(base.beta);
    a.gamma.get_or_insert(base.gamma);
    a.delta.get_or_insert(base.delta);
    a.epochs.get_or_insert(base.epochs);
    a.batch_size.get_or_insert(base.batch_size);
    a.lr.get_or_insert(base.learning_rate);
    a.seed.get_or_insert(base.seed);
    a.reg_latent.get_or_insert_with(|| "sampled".into());
    a.name.get_or_insert_with(|| "model".into());
    train_config(&a)?.validate()?;
    Ok(a)
}

fn train_config(a: &TrainArgs) -> Result<ArVaeConfig> {
    Ok(ArVaeConfig {
        beta: a.beta.unwrap_or_default(),
        gamma: a.gamma.unwrap_or_default(),
        delta: a.delta.unwrap_or_default(),
        batch_size: a.batch_size.unwrap_or_default(),
        epochs: a.epochs.unwrap_or_default(),
        learning_rate: a.lr.unwrap_or_default(),
        seed: a.seed.unwrap_or_default(),
        latent_source: match a.reg_latent.as_deref() {
            Some("sampled") | None => LatentSource::Sampled,
            Some("mean") => LatentSource::Mean,
            Some(other) => {
                return Err(Error::usage(format!(
                    "--reg-latent must be sampled or mean, got {other:?}"
                )))
            }
        },
    })
}

fn build_spec(data: &Dataset, names: &[String], dims: &[usize], latent: usize) -> Result<RegularizationSpec> {
    for n in names {
        if data.attribute_index(n).is_none() {
            return Err(unknown_attribute(n, data.attribute_names()));
        }
    }
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    RegularizationSpec::by_name_with_dims(data, &names, dims, latent)
}

pub(super) fn train(run: &mut Run<'_>, a: &TrainArgs) -> Result<()> {
    let data_path = a.data.clone().unwrap_or_default();
    let data = load(&data_path)?;
    let mut inputs = vec![dataset_record("data", &data_path, &data)];
    let validation = match &a.validation {
        Some(p) => {
            let v = load(p)?;
            inputs.push(dataset_record("validation", p, &v));
            Some(v)
        }
        None => None,
    };
    let latent = a.latent.unwrap_or(DEFAULT_LATENT);
    let spec = build_spec(
        &data,
        a.attributes.as_deref().unwrap_or_default(),
        a.dims.as_deref().unwrap_or_default(),
        latent,
    )?;
    let config = train_config(a)?;
    let arch = Architecture::desk_scale(data.input_width(), latent, data.head());
    let mut model = init_model(arch, config.seed)?;
    let log = train_model(&mut model, &data, validation.as_ref(), &spec, &config)?;
    let name = a.name.clone().unwrap_or_default();
    let ck = Checkpoint::new(model, spec, config, &data);
    let params = format!("{name}.params");
    let log_name = format!("{name}.log.csv");
    ck.save(&run.path(&params))?;
    run.write(&log_name, log.to_csv_string().as_bytes())?;
    run.manifest(
        &name,
        a,
        inputs,
        &[params.clone(), format!("{params}.toml"), log_name.clone()],
    )?;
    if let Some(e) = log.last() {
        run.say(format!(
            "epoch {} recon {:.4} kld {:.4} recon_accuracy {:.4}",
            e.epoch, e.recon, e.kld, e.recon_accuracy
        ))?;
    }
    run.say(format!("wrote {}", run.path(&params).display()))
}

// eval

pub(super) fn resolve_eval(mut a: EvalArgs) -> Result<EvalArgs> {
    required(a.checkpoint.as_ref(), "checkpoint")?;
    required(a.data.as_ref(), "data")?;
    let d = MetricSettings::default();
    a.bins.get_or_insert(d.bins);
    a.split_seed.get_or_insert(d.split_seed);
    a.absolute_scc.get_or_insert(d.absolute_scc);
    a.out.get_or_insert_with(|| "eval.csv".into());
    if a.bins == Some(0) {
        return Err(Error::usage("--bins must be at least 1"));
    }
    Ok(a)
}

/// Scored attribute names: explicit, else the regularized ones, else all.
fn scored_attributes(explicit: Option<&Vec<String>>, ck: &Checkpoint, data: &Dataset) -> Vec<String> {
    match explicit {
        Some(v) => v.clone(),
        None if !ck.spec().is_empty() => ck.spec().entries().iter().map(|e| e.name.clone()).collect(),
        None => data.attribute_names().to_vec(),
    }
}

pub(super) fn eval(run: &mut Run<'_>, a: &EvalArgs) -> Result<()> {
    let ck_path = a.checkpoint.clone().unwrap_or_default();
    let data_path = a.data.clone().unwrap_or_default();
    let ck = load_checkpoint(&ck_path)?;
    let data = load(&data_path)?;
    let names = scored_attributes(a.attributes.as_ref(), &ck, &data);
    let table = LatentAttributeTable::from_model(&ck.model, &data)?;
    let table = table
        .select_attributes(&names)
        .map_err(|_| unknown_attribute(names.iter().find(|n| data.attribute_index(n).is_none()).map_or("", String::as_str), data.attribute_names()))?;
    let settings = MetricSettings {
        bins: a.bins.unwrap_or(20),
        split_seed: a.split_seed.unwrap_or_default(),
        absolute_scc: a.absolute_scc.unwrap_or_default(),
    };
    let report = MetricReport::compute(&table, &settings)
        .with_recon_accuracy(dataset_accuracy(&ck.model, &data)?);
    let out = a.out.clone().unwrap_or_default();
    run.write(&out, report.to_csv_string().as_bytes())?;
    run.manifest(
        &out,
        a,
        vec![checkpoint_record(&ck_path, &ck), dataset_record("data", &data_path, &data)],
        std::slice::from_ref(&out),
    )?;
    run.say(report.summary())
}

// traverse

pub(super) fn resolve_traverse(mut a: TraverseArgs) -> Result<TraverseArgs> {
    required(a.checkpoint.as_ref(), "checkpoint")?;
    required(a.data.as_ref(), "data")?;
    a.index.get_or_insert(0);
    a.min.get_or_insert(SWEEP_RANGE.0);
    a.max.get_or_insert(SWEEP_RANGE.1);
    a.steps.get_or_insert(SWEEP_STEPS);
    a.select_by_mi.get_or_insert(false);
    a.out.get_or_insert_with(|| "traverse".into());
    if a.steps == Some(0) {
        return Err(Error::usage("--steps must be at least 1"));
    }
    Ok(a)
}

/// The latent dimension to sweep for `name`.
fn dimension_for(
    name: &str,
    ck: &Checkpoint,
    data: Option<&Dataset>,
    by_mi: bool,
) -> Result<usize> {
    if by_mi {
        let data = data.ok_or_else(|| Error::usage("--select-by-mi needs --data"))?;
        let l = data
            .attribute_index(name)
            .ok_or_else(|| unknown_attribute(name, data.attribute_names()))?;
        let table = LatentAttributeTable::from_model(&ck.model, data)?;
        return Ok(table.most_informative_dim(l, MetricSettings::default().bins));
    }
    ck.spec().find(name).map(|e| e.dim).ok_or_else(|| {
        let names: Vec<String> = ck.spec().entries().iter().map(|e| e.name.clone()).collect();
        Error::usage(format!(
            "attribute {name:?} is not regularized in this checkpoint; regularized: {} (use --select-by-mi for others)",
            if names.is_empty() { "none".to_string() } else { names.join(", ") }
        ))
    })
}

pub(super) fn traverse(run: &mut Run<'_>, a: &TraverseArgs) -> Result<()> {
    let ck_path = a.checkpoint.clone().unwrap_or_default();
    let data_path = a.data.clone().unwrap_or_default();
    let ck = load_checkpoint(&ck_path)?;
    let data = load(&data_path)?;
    let kind = ck.meta.output_kind()?;
    if OutputKind::of(&data) != kind {
        return Err(Error::format("dataset does not match the checkpoint's domain"));
    }
    let index = a.index.unwrap_or_default();
    if index >= data.len() {
        return Err(Error::usage(format!("--index {index} outside a dataset of {}", data.len())));
    }
    let names: Vec<String> = match &a.attributes {
        Some(v) => v.clone(),
        None => ck
            .spec()
            .entries()
            .iter()
            .filter(|e| kind.attribute_names().contains(&e.name.as_str()))
            .map(|e| e.name.clone())
            .collect(),
    };
    if names.is_empty() {
        return Err(Error::usage("no measurable regularized attributes to traverse; pass --attributes"));
    }
    let values = sweep_values(
        a.min.unwrap_or(SWEEP_RANGE.0),
        a.max.unwrap_or(SWEEP_RANGE.1),
        a.steps.unwrap_or(SWEEP_STEPS),
    );
    let anchor = data.inputs(&[index]);
    let by_mi = a.select_by_mi.unwrap_or_default();
    let mut csv = String::from("attribute,dim,step,code,value\n");
    let mut tiles = Vec::new();
    let mut text = String::new();
    for name in &names {
        let dim = dimension_for(name, &ck, Some(&data), by_mi)?;
        let t = traverse_model(&ck.model, kind, &anchor, dim, &values, name)?;
        for (k, (code, v)) in t.values.iter().zip(&t.attribute).enumerate() {
            writeln!(csv, "{name},{dim},{k},{code},{v}").expect("string write");
        }
        match kind {
            OutputKind::Image { .. } => tiles.push(
                t.outputs
                    .iter()
                    .filter_map(|o| match o {
                        Decoded::Image(i) => Some(i.clone()),
                        Decoded::Measure(_) => None,
                    })
                    .collect(),
            ),
            OutputKind::Music { vocab } => {
                writeln!(text, "== {name} (dim {dim})").expect("string write");
                text.push_str(&piano_roll_text(&t, &vocab));
            }
        }
    }
    let prefix = a.out.clone().unwrap_or_default();
    let (grid_name, grid) = match kind {
        OutputKind::Image { .. } => (format!("{prefix}.pgm"), pgm_grid(&tiles)?),
        OutputKind::Music { .. } => (format!("{prefix}.txt"), text.into_bytes()),
    };
    let csv_name = format!("{prefix}.csv");
    run.write(&grid_name, &grid)?;
    run.write(&csv_name, csv.as_bytes())?;
    run.manifest(
        &prefix,
        a,
        vec![checkpoint_record(&ck_path, &ck), dataset_record("data", &data_path, &data)],
        &[grid_name.clone(), csv_name.clone()],
    )?;
    run.say(format!("wrote {} and {}", run.path(&grid_name).display(), run.path(&csv_name).display()))
}

// surface

pub(super) fn resolve_surface(mut a: SurfaceArgs) -> Result<SurfaceArgs> {
    required(a.checkpoint.as_ref(), "checkpoint")?;
    required(a.attribute.as_ref(), "attribute")?;
    a.grid.get_or_insert(9);
    a.seed.get_or_insert(0);
    a.select_by_mi.get_or_insert(false);
    a.out.get_or_insert_with(|| "surface.csv".into());
    if a.grid < Some(1) {
        return Err(Error::usage("--grid must be at least 1"));
    }
    Ok(a)
}

pub(super) fn surface(run: &mut Run<'_>, a: &SurfaceArgs) -> Result<()> {
    let ck_path = a.checkpoint.clone().unwrap_or_default();
    let ck = load_checkpoint(&ck_path)?;
    let mut inputs = vec![checkpoint_record(&ck_path, &ck)];
    let data = match &a.data {
        Some(p) => {
            let d = load(p)?;
            inputs.push(dataset_record("data", p, &d));
            Some(d)
        }
        None => None,
    };
    let name = a.attribute.clone().unwrap_or_default();
    let x_dim = dimension_for(&name, &ck, data.as_ref(), a.select_by_mi.unwrap_or_default())?;
    let taken: Vec<usize> = ck.spec().entries().iter().map(|e| e.dim).collect();
    let y_dim = match a.other_dim {
        Some(d) => d,
        None => (0..ck.model.latent_dim())
            .find(|d| *d != x_dim && !taken.contains(d))
            .or_else(|| (0..ck.model.latent_dim()).find(|d| *d != x_dim))
            .ok_or_else(|| Error::usage("the model has a single latent dimension"))?,
    };
    let grid = a.grid.unwrap_or(9);
    let s = attribute_surface(
        &ck.model,
        ck.meta.output_kind()?,
        &name,
        (x_dim, y_dim),
        (grid, grid),
        a.seed.unwrap_or_default(),
    )?;
    let out = a.out.clone().unwrap_or_default();
    run.write(&out, s.to_csv_string(&name).as_bytes())?;
    run.manifest(&out, a, inputs, std::slice::from_ref(&out))?;
    run.say(format!(
        "wrote {} (x = dim {x_dim}, y = dim {y_dim})",
        run.path(&out).display()
    ))
}

// sweep

pub(super) fn resolve_sweep(mut a: SweepArgs) -> Result<SweepArgs> {
    let data = load(&required(a.data.clone(), "data")?)?;
    let base = match data.domain() {
        Domain::Shapes => ArVaeConfig::images(),
        Domain::Measures => ArVaeConfig::music(),
    };
    a.gammas.get_or_insert_with(|| vec![0.0, 1.0, 10.0]);
    a.deltas.get_or_insert_with(|| vec![1.0]);
    a.beta.get_or_insert(1.0);
    a.attributes
        .get_or_insert_with(|| data.attribute_names().to_vec());
    a.latent.get_or_insert(DEFAULT_LATENT);
    a.epochs.get_or_insert(base.epochs);
    a.batch_size.get_or_insert(base.batch_size);
    a.lr.get_or_insert(base.learning_rate);
    a.seed.get_or_insert(0);
    a.holdout.get_or_insert((data.len() / 6).clamp(1, 1000));
    a.out.get_or_insert_with(|| "sweep.csv".into());
    if a.holdout >= Some(data.len()) {
        return Err(Error::usage("--holdout must leave training examples"));
    }
    Ok(a)
}

pub(super) fn sweep(run: &mut Run<'_>, a: &SweepArgs) -> Result<()> {
    let data_path = a.data.clone().unwrap_or_default();
    let data = load(&data_path)?;
    let holdout = a.holdout.unwrap_or_default();
    let (train_set, eval_set) = data.split_at(data.len() - holdout)?;
    let latent = a.latent.unwrap_or(DEFAULT_LATENT);
    let names = a.attributes.clone().unwrap_or_default();
    let dims: Vec<usize> = (0..names.len()).collect();
    let spec = build_spec(&train_set, &names, &dims, latent)?;
    let arch = Architecture::desk_scale(data.input_width(), latent, data.head());
    let mut csv = String::from("gamma,delta,recon_accuracy,interpretability\n");
    for &gamma in a.gammas.as_deref().unwrap_or_default() {
        for &delta in a.deltas.as_deref().unwrap_or_default() {
            let config = ArVaeConfig {
                beta: a.beta.unwrap_or(1.0),
                gamma,
                delta,
                batch_size: a.batch_size.unwrap_or(64),
                epochs: a.epochs.unwrap_or_default(),
                learning_rate: a.lr.unwrap_or_default(),
                seed: a.seed.unwrap_or_default(),
                latent_source: LatentSource::Sampled,
            };
            let mut model = init_model(arch.clone(), config.seed)?;
            train_model(&mut model, &train_set, None, &spec, &config)?;
            let table = LatentAttributeTable::from_model(&model, &eval_set)?.select_attributes(&names)?;
            let interp = interpretability(&table, &MetricSettings::default()).mean;
            let acc = dataset_accuracy(&model, &eval_set)?;
            writeln!(csv, "{gamma},{delta},{acc},{interp}").expect("string write");
            run.say(format!(
                "gamma {gamma} delta {delta}: recon_accuracy {acc:.4} interpretability {interp:.4}"
            ))?;
        }
    }
    let out = a.out.clone().unwrap_or_default();
    run.write(&out, csv.as_bytes())?;
    run.manifest(&out, a, vec![dataset_record("data", &data_path, &data)], std::slice::from_ref(&out))?;
    run.say(format!("wrote {}", run.path(&out).display()))
}

// reconstruct

pub(super) fn resolve_reconstruct(mut a: ReconstructArgs) -> Result<ReconstructArgs> {
    required(a.checkpoint.as_ref(), "checkpoint")?;
    required(a.data.as_ref(), "data")?;
    a.start.get_or_insert(0);
    a.count.get_or_insert(8);
    a.out.get_or_insert_with(|| "reconstruct".into());
    if a.count == Some(0) {
        return Err(Error::usage("--count must be at least 1"));
    }
    Ok(a)
}

pub(super) fn reconstruct(run: &mut Run<'_>, a: &ReconstructArgs) -> Result<()> {
    let ck_path = a.checkpoint.clone().unwrap_or_default();
    let data_path = a.data.clone().unwrap_or_default();
    let ck = load_checkpoint(&ck_path)?;
    let data = load(&data_path)?;
    let kind = ck.meta.output_kind()?;
    if OutputKind::of(&data) != kind {
        return Err(Error::format("dataset does not match the checkpoint's domain"));
    }
    let start = a.start.unwrap_or_default();
    let end = (start + a.count.unwrap_or(8)).min(data.len());
    if start >= end {
        return Err(Error::usage(format!("--start {start} outside a dataset of {}", data.len())));
    }
    let idx: Vec<usize> = (start..end).collect();
    let x = data.inputs(&idx);
    let x_hat = ck.model.reconstruct(&x)?;
    let prefix = a.out.clone().unwrap_or_default();
    let decode = |t: &crate::numgrad::Tensor| -> Result<Vec<Decoded>> {
        let w = t.shape()[1];
        t.data()
            .chunks(w)
            .map(|row| crate::explore::interpret_output(kind, row))
            .collect()
    };
    let (inputs, outputs) = (decode(&x)?, decode(&x_hat)?);
    let (name, bytes) = match kind {
        OutputKind::Image { .. } => {
            let as_images = |v: Vec<Decoded>| {
                v.into_iter()
                    .filter_map(|d| match d {
                        Decoded::Image(i) => Some(i),
                        Decoded::Measure(_) => None,
                    })
                    .collect::<Vec<_>>()
            };
            (format!("{prefix}.pgm"), pgm_grid(&[as_images(inputs), as_images(outputs)])?)
        }
        OutputKind::Music { vocab } => {
            let mut s = String::new();
            for (k, (i, o)) in inputs.iter().zip(&outputs).enumerate() {
                if let (Decoded::Measure(i), Decoded::Measure(o)) = (i, o) {
                    writeln!(s, "example {}\ninput: {i}\n{}output: {o}\n{}", start + k, i.piano_roll(&vocab), o.piano_roll(&vocab))
                        .expect("string write");
                }
            }
            (format!("{prefix}.txt"), s.into_bytes())
        }
    };
    run.write(&name, &bytes)?;
    run.manifest(
        &prefix,
        a,
        vec![checkpoint_record(&ck_path, &ck), dataset_record("data", &data_path, &data)],
        std::slice::from_ref(&name),
    )?;
    run.say(format!("wrote {}", run.path(&name).display()))
}
