//! Score two constructed latent tables: one that copies the attributes into
//! shuffled dimensions, one that is independent noise.
//!
//! cargo run --release --example metric_suite

use arvae::metrics::{LatentAttributeTable, MetricReport, MetricSettings};
use arvae::numgrad::SeededRng;

fn gaussian(rng: &mut SeededRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.standard_normal()).collect()
}

fn main() -> arvae::Result<()> {
    let n = 10_000;
    let mut rng = SeededRng::new(0);
    let names: Vec<String> = ["size", "weight", "tempo"].iter().map(|s| s.to_string()).collect();
    let attrs: Vec<Vec<f64>> = (0..3).map(|_| gaussian(&mut rng, n)).collect();

    let copied = [2, 0, 1]
        .iter()
        .map(|&l| attrs[l].iter().map(|v| v + 0.01 * rng.standard_normal()).collect())
        .collect();
    let noise = (0..3).map(|_| gaussian(&mut rng, n)).collect();

    let settings = MetricSettings::default();
    for (label, latents) in [("aligned", copied), ("independent", noise)] {
        let table = LatentAttributeTable::new(latents, attrs.clone(), names.clone())?;
        let report = MetricReport::compute(&table, &settings);
        println!("{label:>11}: {}", report.summary());
        if label == "aligned" {
            print!("{}", report.to_csv_string());
        }
    }
    Ok(())
}
