//! Train a small shapes model, then write latent traversals as a PGM grid and
//! an attribute surface over two latent dimensions as CSV.
//!
//! cargo run --release --example traverse_surface -- [out-dir]

use std::path::PathBuf;

use arvae::attrreg::{init_model, train, ArVaeConfig, RegularizationSpec};
use arvae::datagen::sample_shape_dataset;
use arvae::explore::{
    attribute_surface, non_decreasing_fraction, pgm_grid, sweep_values, traverse, Decoded, OutputKind,
    SWEEP_RANGE, SWEEP_STEPS,
};
use arvae::vae::Architecture;

fn main() -> arvae::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    std::fs::create_dir_all(&dir)?;
    let data = sample_shape_dataset(3000, 16, 4)?;
    let names = ["scale", "x", "y", "area"];
    let spec = RegularizationSpec::by_name(&data, &names, 8)?;
    let config = ArVaeConfig {
        epochs: 15,
        seed: 4,
        ..ArVaeConfig::images()
    };
    let mut model = init_model(Architecture::desk_scale(data.input_width(), 8, data.head()), 4)?;
    train(&mut model, &data, None, &spec, &config)?;

    let kind = OutputKind::of(&data);
    let sweep = sweep_values(SWEEP_RANGE.0, SWEEP_RANGE.1, SWEEP_STEPS);
    let mut rows = Vec::new();
    for e in spec.entries() {
        let t = traverse(&model, kind, &data.inputs(&[0]), e.dim, &sweep, &e.name)?;
        let values: Vec<String> = t.attribute.iter().map(|v| format!("{v:.2}")).collect();
        println!("{:>5} z[{}]: {}", e.name, e.dim, values.join(" "));
        rows.push(
            t.outputs
                .into_iter()
                .filter_map(|o| match o {
                    Decoded::Image(img) => Some(img),
                    Decoded::Measure(_) => None,
                })
                .collect(),
        );
    }
    std::fs::write(dir.join("traversals.pgm"), pgm_grid(&rows)?)?;

    let x_dim = spec.find("x").map_or(1, |e| e.dim);
    let surface = attribute_surface(&model, kind, "x", (x_dim, 6), (9, 9), 0)?;
    std::fs::write(dir.join("surface_x.csv"), surface.to_csv_string("x"))?;
    println!(
        "x surface: column means non-decreasing for {:.0}% of adjacent pairs",
        100.0 * non_decreasing_fraction(&surface.column_means())
    );
    println!("wrote traversals.pgm and surface_x.csv to {}", dir.display());
    Ok(())
}
