//! Generate synthetic shapes, print their attributes and write a contact sheet.
//!
//! cargo run --example shapes_dataset -- [out.pgm]

use arvae::datagen::sample_shape_dataset;
use arvae::explore::pgm_grid;

fn main() -> arvae::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "shapes.pgm".into());
    let data = sample_shape_dataset(32, 16, 7)?;
    println!("{:>3}  {}", "#", data.attribute_names().join("  "));
    for i in 0..8 {
        let row: Vec<String> = data
            .attributes()
            .iter()
            .map(|a| format!("{:.3}", a[i]))
            .collect();
        println!("{i:>3}  {}", row.join("  "));
    }
    let rows: Vec<Vec<_>> = (0..4)
        .map(|r| (0..8).filter_map(|c| data.image(r * 8 + c)).collect())
        .collect();
    std::fs::write(&out, pgm_grid(&rows)?)?;
    println!("wrote {out} (digest {})", data.digest_hex());
    Ok(())
}
