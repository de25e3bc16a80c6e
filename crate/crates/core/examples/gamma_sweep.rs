//! Effect of the regularization strength on interpretability and
//! reconstruction for the shapes data.
//!
//! cargo run --release --example gamma_sweep -- [epochs]

use arvae::attrreg::{dataset_accuracy, init_model, train, ArVaeConfig, RegularizationSpec};
use arvae::datagen::sample_shape_dataset;
use arvae::metrics::{interpretability, LatentAttributeTable, MetricSettings};
use arvae::vae::Architecture;

fn main() -> arvae::Result<()> {
    let epochs = std::env::args().nth(1).map_or(20, |s| s.parse().expect("epochs"));
    let names = ["scale", "x", "y", "area"];
    let (train_set, held_out) = sample_shape_dataset(4000, 16, 2)?.split_at(3000)?;
    let spec = RegularizationSpec::by_name(&train_set, &names, 8)?;
    let selected: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    println!("gamma  delta  interpretability  recon_accuracy");
    for gamma in [0.0, 0.1, 1.0, 10.0] {
        for delta in [1.0, 10.0] {
            if gamma == 0.0 && delta != 1.0 {
                continue;
            }
            let config = ArVaeConfig {
                gamma,
                delta,
                epochs,
                seed: 2,
                ..ArVaeConfig::images()
            };
            let arch = Architecture::desk_scale(train_set.input_width(), 8, train_set.head());
            let mut model = init_model(arch, 2)?;
            train(&mut model, &train_set, None, &spec, &config)?;
            let table = LatentAttributeTable::from_model(&model, &held_out)?.select_attributes(&selected)?;
            let interp = interpretability(&table, &MetricSettings::default()).mean;
            let acc = dataset_accuracy(&model, &held_out)?;
            println!("{gamma:>5}  {delta:>5}  {interp:>16.4}  {acc:>14.4}");
        }
    }
    Ok(())
}
