//! Sample measures and show each one as a piano roll with its attributes.
//!
//! cargo run --example music_attributes -- [count] [seed]

use arvae::attributes::{music_attributes, ComplexityWeights, MusicAttributeConfig, MUSIC_ATTRIBUTE_NAMES};
use arvae::datagen::{sample_measure, MeasureSamplerConfig};
use arvae::numgrad::SeededRng;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let count = args.get(1).map_or(3, |s| s.parse().expect("count"));
    let seed = args.get(2).map_or(0, |s| s.parse().expect("seed"));
    let cfg = MeasureSamplerConfig::default();
    let weights = ComplexityWeights::default();
    let attr_cfg = MusicAttributeConfig::for_vocabulary(&cfg.vocab);
    let mut rng = SeededRng::new(seed);
    for _ in 0..count {
        let m = sample_measure(&cfg, &mut rng);
        println!("{m}");
        print!("{}", m.piano_roll(&cfg.vocab));
        let values = music_attributes(&m, &weights, &attr_cfg);
        for (name, v) in MUSIC_ATTRIBUTE_NAMES.iter().zip(values) {
            print!("{name}={v:.3} ");
        }
        println!("\n");
    }
}
