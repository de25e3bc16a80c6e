//! Continuous attribute extractors for measures and sprites.

pub mod image;
pub mod music;

pub use image::{
    estimate_image_attribute, image_attributes, pixel_area, ImageAttributes,
    SHAPE_ATTRIBUTE_NAMES,
};
pub use music::{
    contour, music_attributes, note_density, pitch_range, rhythmic_complexity, ComplexityWeights,
    Measure, MusicAttributeConfig, PitchVariant, Token, TokenVocabulary, MEASURE_LEN,
    MUSIC_ATTRIBUTE_NAMES,
};
