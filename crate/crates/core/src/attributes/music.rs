//! Monophonic measures and their continuous attributes.
//!
//! A measure is 24 ticks (four beats of six ticks). Each tick holds a note
//! onset, a continuation `__` of the sounding note, or a rest `R`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MEASURE_LEN: usize = 24;
pub const TICKS_PER_BEAT: usize = 6;

const NOTE_NAMES: [&str; 12] = [
    "C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Token {
    /// Onset of a note with the given MIDI pitch.
    Note(u8),
    Hold,
    Rest,
}

impl Token {
    pub fn is_onset(self) -> bool {
        matches!(self, Token::Note(_))
    }

    /// Scientific pitch name, `C4` = MIDI 60.
    pub fn note_name(midi: u8) -> String {
        let octave = midi as i32 / 12 - 1;
        format!("{}{}", NOTE_NAMES[midi as usize % 12], octave)
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Note(m) => f.write_str(&Token::note_name(*m)),
            Token::Hold => f.write_str("__"),
            Token::Rest => f.write_str("R"),
        }
    }
}

impl FromStr for Token {
    type Err = Error;

    /// Accepts `__`, `R`, a MIDI integer, or a name such as `C4`, `F#3`, `Eb5`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "__" => return Ok(Token::Hold),
            "R" | "r" => return Ok(Token::Rest),
            _ => {}
        }
        if let Ok(m) = s.parse::<u8>() {
            if m < 128 {
                return Ok(Token::Note(m));
            }
        }
        let bad = || Error::format(format!("unrecognised token {s:?}"));
        let mut chars = s.chars();
        let letter = chars.next().ok_or_else(bad)?;
        let base: i32 = match letter.to_ascii_uppercase() {
            'C' => 0,
            'D' => 2,
            'E' => 4,
            'F' => 5,
            'G' => 7,
            'A' => 9,
            'B' => 11,
            _ => return Err(bad()),
        };
        let rest = chars.as_str();
        let (accidental, octave) = match rest.chars().next() {
            Some('#') => (1, &rest[1..]),
            Some('b') => (-1, &rest[1..]),
            _ => (0, rest),
        };
        let octave: i32 = octave.parse().map_err(|_| bad())?;
        let midi = (octave + 1) * 12 + base + accidental;
        if !(0..128).contains(&midi) {
            return Err(bad());
        }
        Ok(Token::Note(midi as u8))
    }
}

/// Bijection between tokens and dense integer ids.
///
/// Notes `low..=high` take ids `0..=high-low`, followed by the continuation
/// token and then the rest token.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenVocabulary {
    pub low: u8,
    pub high: u8,
}

impl Default for TokenVocabulary {
    fn default() -> Self {
        TokenVocabulary { low: 48, high: 84 }
    }
}

impl TokenVocabulary {
    pub fn new(low: u8, high: u8) -> Result<Self> {
        if low > high || high > 127 {
            return Err(Error::usage(format!("invalid pitch range {low}..={high}")));
        }
        Ok(TokenVocabulary { low, high })
    }

    pub fn pitch_count(&self) -> usize {
        (self.high - self.low) as usize + 1
    }

    pub fn size(&self) -> usize {
        self.pitch_count() + 2
    }

    /// Span in semitones.
    pub fn span(&self) -> f64 {
        f64::from(self.high - self.low)
    }

    pub fn id(&self, token: Token) -> Result<usize> {
        match token {
            Token::Note(m) if (self.low..=self.high).contains(&m) => Ok((m - self.low) as usize),
            Token::Note(m) => Err(Error::contract(format!(
                "pitch {m} outside vocabulary {}..={}",
                self.low, self.high
            ))),
            Token::Hold => Ok(self.pitch_count()),
            Token::Rest => Ok(self.pitch_count() + 1),
        }
    }

    pub fn token(&self, id: usize) -> Result<Token> {
        let p = self.pitch_count();
        match id {
            i if i < p => Ok(Token::Note(self.low + i as u8)),
            i if i == p => Ok(Token::Hold),
            i if i == p + 1 => Ok(Token::Rest),
            _ => Err(Error::contract(format!("token id {id} >= {}", self.size()))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Measure {
    tokens: [Token; MEASURE_LEN],
}

impl Measure {
    pub fn new(tokens: [Token; MEASURE_LEN]) -> Result<Self> {
        for t in 1..MEASURE_LEN {
            if tokens[t] == Token::Hold && tokens[t - 1] == Token::Rest {
                return Err(Error::contract(format!(
                    "continuation after a rest at tick {t}"
                )));
            }
        }
        Ok(Measure { tokens })
    }

    pub fn from_slice(tokens: &[Token]) -> Result<Self> {
        let arr: [Token; MEASURE_LEN] = tokens.try_into().map_err(|_| {
            Error::contract(format!(
                "a measure has {MEASURE_LEN} tokens, got {}",
                tokens.len()
            ))
        })?;
        Measure::new(arr)
    }

    /// Turns an arbitrary token sequence into a valid measure by replacing
    /// continuations that follow a rest with rests.
    pub fn repaired(mut tokens: [Token; MEASURE_LEN]) -> Self {
        for t in 1..MEASURE_LEN {
            if tokens[t] == Token::Hold && tokens[t - 1] == Token::Rest {
                tokens[t] = Token::Rest;
            }
        }
        Measure { tokens }
    }

    pub fn rests() -> Self {
        Measure {
            tokens: [Token::Rest; MEASURE_LEN],
        }
    }

    pub fn tokens(&self) -> &[Token; MEASURE_LEN] {
        &self.tokens
    }

    pub fn onset_pitches(&self) -> impl Iterator<Item = u8> + '_ {
        self.tokens.iter().filter_map(|t| match t {
            Token::Note(m) => Some(*m),
            _ => None,
        })
    }

    pub fn onset_mask(&self) -> [bool; MEASURE_LEN] {
        self.tokens.map(Token::is_onset)
    }

    /// Shifts every note by `semitones`.
    pub fn transposed(&self, semitones: i32) -> Result<Self> {
        let mut tokens = self.tokens;
        for t in &mut tokens {
            if let Token::Note(m) = t {
                let shifted = *m as i32 + semitones;
                if !(0..128).contains(&shifted) {
                    return Err(Error::contract("transposition leaves the MIDI range"));
                }
                *m = shifted as u8;
            }
        }
        Ok(Measure { tokens })
    }

    pub fn ids(&self, vocab: &TokenVocabulary) -> Result<Vec<usize>> {
        self.tokens.iter().map(|&t| vocab.id(t)).collect()
    }

    pub fn from_ids(ids: &[usize], vocab: &TokenVocabulary) -> Result<Self> {
        let tokens: Vec<Token> = ids.iter().map(|&i| vocab.token(i)).collect::<Result<_>>()?;
        Measure::from_slice(&tokens)
    }

    /// Time × pitch grid, highest pitch first: `#` onset, `-` held, `.` silent.
    pub fn piano_roll(&self, vocab: &TokenVocabulary) -> String {
        let mut sounding = [None; MEASURE_LEN];
        let mut current = None;
        for (t, tok) in self.tokens.iter().enumerate() {
            current = match tok {
                Token::Note(m) => Some((*m, true)),
                Token::Hold => current.map(|(m, _)| (m, false)),
                Token::Rest => None,
            };
            sounding[t] = current;
        }
        let mut out = String::new();
        for pitch in (vocab.low..=vocab.high).rev() {
            out.push_str(&format!("{:>4} ", Token::note_name(pitch)));
            for s in &sounding {
                out.push(match s {
                    Some((m, true)) if *m == pitch => '#',
                    Some((m, false)) if *m == pitch => '-',
                    _ => '.',
                });
            }
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.tokens.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let tokens: Vec<Token> = s
            .split_whitespace()
            .map(Token::from_str)
            .collect::<Result<_>>()?;
        Measure::from_slice(&tokens).map_err(|e| Error::format(e.to_string()))
    }
}

/// Metrical weights `f_t` for rhythmic complexity.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexityWeights([f64; MEASURE_LEN]);

impl Default for ComplexityWeights {
    /// Downbeat 1, half-bar 2, other beats 3, eighths 4, triplet eighths 5,
    /// remaining ticks 6.
    fn default() -> Self {
        let mut w = [0.0; MEASURE_LEN];
        for (t, v) in w.iter_mut().enumerate() {
            *v = if t == 0 {
                1.0
            } else if t % 12 == 0 {
                2.0
            } else if t % 6 == 0 {
                3.0
            } else if t % 3 == 0 {
                4.0
            } else if t % 2 == 0 {
                5.0
            } else {
                6.0
            };
        }
        ComplexityWeights(w)
    }
}

impl ComplexityWeights {
    pub fn new(weights: [f64; MEASURE_LEN]) -> Result<Self> {
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::usage("complexity weights must be finite and nonnegative"));
        }
        if weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::usage("complexity weights must not all be zero"));
        }
        Ok(ComplexityWeights(weights))
    }

    pub fn weights(&self) -> &[f64; MEASURE_LEN] {
        &self.0
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PitchVariant {
    /// Only note onsets carry a pitch.
    #[default]
    Onsets,
    /// Every tick carries a pitch, zero for rests and continuations.
    Literal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MusicAttributeConfig {
    /// Normalisation range `R` in semitones.
    pub range: f64,
    pub pitch_range_variant: PitchVariant,
    pub contour_variant: PitchVariant,
}

impl Default for MusicAttributeConfig {
    fn default() -> Self {
        MusicAttributeConfig::for_vocabulary(&TokenVocabulary::default())
    }
}

impl MusicAttributeConfig {
    pub fn for_vocabulary(vocab: &TokenVocabulary) -> Self {
        MusicAttributeConfig {
            range: vocab.span().max(1.0),
            pitch_range_variant: PitchVariant::Onsets,
            contour_variant: PitchVariant::Onsets,
        }
    }
}

fn literal_pitches(m: &Measure) -> impl Iterator<Item = f64> + '_ {
    m.tokens.iter().map(|t| match t {
        Token::Note(p) => f64::from(*p),
        _ => 0.0,
    })
}

/// Weighted share of onset positions.
pub fn rhythmic_complexity(m: &Measure, weights: &ComplexityWeights) -> f64 {
    let num: f64 = m
        .tokens
        .iter()
        .zip(weights.0.iter())
        .filter(|(t, _)| t.is_onset())
        .map(|(_, w)| w)
        .sum();
    num / weights.total()
}

/// Highest minus lowest pitch over `R`, clipped to `[0, 1]`.
pub fn pitch_range(m: &Measure, cfg: &MusicAttributeConfig) -> f64 {
    let (lo, hi) = match cfg.pitch_range_variant {
        PitchVariant::Onsets => m
            .onset_pitches()
            .map(f64::from)
            .fold(None, |acc: Option<(f64, f64)>, p| match acc {
                None => Some((p, p)),
                Some((lo, hi)) => Some((lo.min(p), hi.max(p))),
            }),
        PitchVariant::Literal => {
            if m.onset_pitches().next().is_none() {
                None
            } else {
                let lo = literal_pitches(m).fold(f64::INFINITY, f64::min);
                let hi = literal_pitches(m).fold(f64::NEG_INFINITY, f64::max);
                Some((lo, hi))
            }
        }
    }
    .unwrap_or((0.0, 0.0));
    ((hi - lo) / cfg.range).clamp(0.0, 1.0)
}

/// Fraction of ticks holding an onset.
pub fn note_density(m: &Measure) -> f64 {
    m.tokens.iter().filter(|t| t.is_onset()).count() as f64 / MEASURE_LEN as f64
}

/// Signed sum of successive pitch differences over `R`.
pub fn contour(m: &Measure, cfg: &MusicAttributeConfig) -> f64 {
    let pitches: Vec<f64> = match cfg.contour_variant {
        PitchVariant::Onsets => m.onset_pitches().map(f64::from).collect(),
        PitchVariant::Literal => literal_pitches(m).collect(),
    };
    let total: f64 = pitches.windows(2).map(|w| w[1] - w[0]).sum();
    total / cfg.range
}

pub const MUSIC_ATTRIBUTE_NAMES: [&str; 4] =
    ["rhy_complexity", "pitch_range", "note_density", "contour"];

/// All four attributes in [`MUSIC_ATTRIBUTE_NAMES`] order.
pub fn music_attributes(
    m: &Measure,
    weights: &ComplexityWeights,
    cfg: &MusicAttributeConfig,
) -> [f64; 4] {
    [
        rhythmic_complexity(m, weights),
        pitch_range(m, cfg),
        note_density(m),
        contour(m, cfg),
    ]
}
