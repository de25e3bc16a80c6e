//! AR-VAE against a β-VAE baseline on synthetic shapes, scored with the full
//! metric suite on held-out data.
//!
//! cargo run --release --example compare_models -- [seed] [epochs]

use arvae::attrreg::{init_model, train, ArVaeConfig, RegularizationSpec};
use arvae::datagen::sample_shape_dataset;
use arvae::metrics::{LatentAttributeTable, MetricReport, MetricSettings};
use arvae::vae::Architecture;

fn main() -> arvae::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let seed = args.get(1).map_or(1, |s| s.parse().unwrap());
    let epochs = args.get(2).map_or(30, |s| s.parse().unwrap());
    let data = sample_shape_dataset(6000, 16, seed)?;
    let (train_set, held_out) = data.split_at(5000)?;
    let names = ["scale", "x", "y", "area"];
    let spec = RegularizationSpec::by_name(&train_set, &names, 8)?;
    let eval_rows: Vec<usize> = names
        .iter()
        .map(|n| held_out.attribute_index(n).unwrap())
        .collect();
    let arch = Architecture::desk_scale(train_set.input_width(), 8, train_set.head());
    for (label, config, spec) in [
        ("ar-vae", ArVaeConfig { epochs, seed, ..ArVaeConfig::images() }, spec.clone()),
        ("beta-vae", ArVaeConfig { epochs, seed, ..ArVaeConfig::beta_vae_images() }, RegularizationSpec::default()),
    ] {
        let mut model = init_model(arch.clone(), seed)?;
        let log = train(&mut model, &train_set, Some(&held_out), &spec, &config)?;
        let full = LatentAttributeTable::from_model(&model, &held_out)?;
        let table = LatentAttributeTable::new(
            (0..full.latent_dim()).map(|d| full.latent(d).to_vec()).collect(),
            eval_rows.iter().map(|&l| full.attribute(l).to_vec()).collect(),
            names.iter().map(|s| s.to_string()).collect(),
        )?;
        let report = MetricReport::compute(&table, &MetricSettings::default())
            .with_recon_accuracy(log.last().map_or(0.0, |e| e.recon_accuracy));
        println!("{label:>9}: {}", report.summary());
    }
    Ok(())
}
