//! Train an AR-VAE on synthetic shapes and report how well each regularized
//! dimension orders its attribute on held-out sprites.
//!
//! cargo run --release --example train_shapes -- [epochs] [seed]

use std::time::Instant;

use arvae::attrreg::{init_model, train, ArVaeConfig, RegularizationSpec};
use arvae::datagen::sample_shape_dataset;
use arvae::metrics::spearman;
use arvae::vae::Architecture;

fn main() -> arvae::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let epochs = args.get(1).map_or(30, |s| s.parse().expect("epochs"));
    let seed = args.get(2).map_or(1, |s| s.parse().expect("seed"));

    let data = sample_shape_dataset(6000, 16, seed)?;
    let (train_set, held_out) = data.split_at(5000)?;
    let spec = RegularizationSpec::by_name(&train_set, &["scale", "x", "y", "area"], 8)?;
    let config = ArVaeConfig {
        epochs,
        seed,
        ..ArVaeConfig::images()
    };
    let arch = Architecture::desk_scale(train_set.input_width(), 8, train_set.head());
    let mut model = init_model(arch, seed)?;

    let start = Instant::now();
    let log = train(&mut model, &train_set, Some(&held_out), &spec, &config)?;
    println!("trained {epochs} epochs in {:.1?}", start.elapsed());
    for e in log.epochs.iter().step_by(5).chain(log.last()) {
        let reg: Vec<String> = e.reg.iter().map(|r| format!("{r:.3}")).collect();
        println!(
            "epoch {:>2}  recon {:>7.3}  kld {:>6.3}  reg [{}]  acc {:.4}",
            e.epoch,
            e.recon,
            e.kld,
            reg.join(", "),
            e.recon_accuracy
        );
    }

    let (mu, _) = model.encode(&held_out.all_inputs())?;
    for e in spec.entries() {
        let rho = spearman(&mu.column(e.dim), held_out.attribute(e.attribute))?.rho;
        println!("{:>6} -> z[{}]  spearman {rho:.3}", e.name, e.dim);
    }
    Ok(())
}
