//! Train an AR-VAE on synthetic measures and traverse each regularized dimension.
//!
//! cargo run --release --example train_music -- [epochs] [seed]

use std::time::Instant;

use arvae::attrreg::{init_model, train, ArVaeConfig, RegularizationSpec};
use arvae::datagen::{sample_measure_dataset, MeasureSamplerConfig};
use arvae::explore::{non_decreasing_steps, sweep_values, traverse, OutputKind};
use arvae::vae::Architecture;

fn main() -> arvae::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let epochs = args.get(1).map_or(30, |s| s.parse().expect("number"));
    let seed = args.get(2).map_or(1, |s| s.parse().expect("number"));
    let cfg = MeasureSamplerConfig {
        seed,
        ..MeasureSamplerConfig::default()
    };
    let data = sample_measure_dataset(6000, &cfg)?;
    let (train_set, held_out) = data.split_at(5000)?;
    let names = ["pitch_range", "note_density", "contour"];
    let spec = RegularizationSpec::by_name(&train_set, &names, 8)?;
    let config = ArVaeConfig {
        epochs,
        seed,
        ..ArVaeConfig::music()
    };
    let arch = Architecture::desk_scale(train_set.input_width(), 8, train_set.head());
    let mut model = init_model(arch, seed)?;
    let start = Instant::now();
    let log = train(&mut model, &train_set, Some(&held_out), &spec, &config)?;
    println!("trained {epochs} epochs in {:.1?}", start.elapsed());
    if let Some(e) = log.last() {
        let reg: Vec<String> = e.reg.iter().map(|r| format!("{r:.3}")).collect();
        println!(
            "final recon {:.3}  kld {:.3}  reg [{}]  acc {:.4}",
            e.recon,
            e.kld,
            reg.join(", "),
            e.recon_accuracy
        );
    }
    let kind = OutputKind::of(&held_out);
    let sweep = sweep_values(-4.0, 4.0, 9);
    println!("non-decreasing steps of 9, for the first five held-out anchors:");
    for e in spec.entries() {
        let mut line = format!("{:>13}:", e.name);
        for anchor in 0..5 {
            let t = traverse(&model, kind, &held_out.inputs(&[anchor]), e.dim, &sweep, &e.name)?;
            line.push_str(&format!(" {}/9", non_decreasing_steps(&t.attribute)));
        }
        println!("{line}");
    }
    Ok(())
}
