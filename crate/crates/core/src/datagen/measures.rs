use serde::{Deserialize, Serialize};

use crate::attributes::music::{
    music_attributes, ComplexityWeights, Measure, MusicAttributeConfig, Token, TokenVocabulary,
    MEASURE_LEN, MUSIC_ATTRIBUTE_NAMES,
};
use crate::error::{Error, Result};
use crate::numgrad::SeededRng;

use super::{Dataset, Examples, GenerationManifest};

/// Random monophonic measures: an onset mask, then a pitch random walk.
///
/// At each tick a note starts with probability `onset_prob`; otherwise the
/// sounding note is held with probability `hold_prob`, else the tick rests.
/// The first onset's pitch is uniform over the vocabulary and each later
/// onset moves by a uniform integer step in `[-max_step, max_step]`,
/// reflected at the vocabulary edges.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureSamplerConfig {
    pub onset_prob: f64,
    pub hold_prob: f64,
    pub max_step: u8,
    pub vocab: TokenVocabulary,
    pub seed: u64,
}

impl Default for MeasureSamplerConfig {
    fn default() -> Self {
        MeasureSamplerConfig {
            onset_prob: 0.3,
            hold_prob: 0.7,
            max_step: 7,
            vocab: TokenVocabulary::default(),
            seed: 0,
        }
    }
}

impl MeasureSamplerConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("onset_prob", self.onset_prob), ("hold_prob", self.hold_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::usage(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        TokenVocabulary::new(self.vocab.low, self.vocab.high)?;
        Ok(())
    }
}

pub fn sample_measure(cfg: &MeasureSamplerConfig, rng: &mut SeededRng) -> Measure {
    let (low, high) = (i32::from(cfg.vocab.low), i32::from(cfg.vocab.high));
    let mut tokens = [Token::Rest; MEASURE_LEN];
    let mut previous: Option<i32> = None;
    let mut sounding = false;
    for tok in tokens.iter_mut() {
        if rng.bernoulli(cfg.onset_prob) {
            let pitch = match previous {
                None => low + rng.below(cfg.vocab.pitch_count()) as i32,
                Some(p) => {
                    let span = 2 * cfg.max_step as usize + 1;
                    let mut q = p + rng.below(span) as i32 - i32::from(cfg.max_step);
                    if q < low {
                        q = 2 * low - q;
                    }
                    if q > high {
                        q = 2 * high - q;
                    }
                    q.clamp(low, high)
                }
            };
            previous = Some(pitch);
            sounding = true;
            *tok = Token::Note(pitch as u8);
        } else if sounding && rng.bernoulli(cfg.hold_prob) {
            *tok = Token::Hold;
        } else {
            sounding = false;
        }
    }
    Measure::new(tokens).expect("sampler never holds after a rest")
}

/// `n` measures with their four musical attributes.
///
/// Measure `i` draws from substream `i` of the seed, so the result does not
/// depend on generation order.
pub fn sample_measure_dataset(n: usize, cfg: &MeasureSamplerConfig) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::usage("n must be >= 1"));
    }
    cfg.validate()?;
    let weights = ComplexityWeights::default();
    let attr_cfg = MusicAttributeConfig::for_vocabulary(&cfg.vocab);
    let mut ids = Vec::with_capacity(n * MEASURE_LEN);
    let mut attrs = vec![Vec::with_capacity(n); MUSIC_ATTRIBUTE_NAMES.len()];
    for i in 0..n {
        let mut rng = SeededRng::substream(cfg.seed, i as u64);
        let m = sample_measure(cfg, &mut rng);
        ids.extend(m.ids(&cfg.vocab)?.into_iter().map(|id| id as u16));
        for (row, v) in attrs.iter_mut().zip(music_attributes(&m, &weights, &attr_cfg)) {
            row.push(v);
        }
    }
    let manifest = GenerationManifest {
        seed: cfg.seed,
        config: vec![
            ("onset_prob".into(), cfg.onset_prob.to_string()),
            ("hold_prob".into(), cfg.hold_prob.to_string()),
            ("max_step".into(), cfg.max_step.to_string()),
            ("range".into(), attr_cfg.range.to_string()),
        ],
    };
    Dataset::new(
        Examples::Tokens {
            vocab: cfg.vocab,
            ids,
        },
        attrs,
        MUSIC_ATTRIBUTE_NAMES.iter().map(|s| s.to_string()).collect(),
        manifest,
    )
}
