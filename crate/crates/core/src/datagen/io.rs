//! Dataset files.
//!
//! One UTF-8 header line of space-separated `key=value` fields, a newline,
//! then the binary payload:
//!
//! ```text
//! arvae-dataset version=1 domain=shapes n=5000 width=256 side=16
//!   attributes=scale,x,y,orientation,area seed=7 payload=10440000
//!   digest=9c3e...  cfg.side=16
//! ```
//!
//! (shown wrapped; the header is a single line). Measures carry
//! `vocab=<low>-<high>` instead of `side`. The payload is the example block
//! (pixels as little-endian f64, or token ids as little-endian u16, `n × 24`)
//! followed by the `L × N` attribute matrix as little-endian f64, row by row.
//! `digest` is the 64-bit FNV-1a hash of the payload in hex.

use std::collections::HashMap;
use std::fs;
use std::hash::Hasher;
use std::path::Path;

use fnv::FnvHasher;

use crate::attributes::music::{TokenVocabulary, MEASURE_LEN};
use crate::error::{Error, Result};

use super::{Dataset, Domain, Examples, GenerationManifest};

pub const DATASET_VERSION: u32 = 1;
const MAGIC: &str = "arvae-dataset";

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

impl Dataset {
    fn payload(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match &self.examples {
            Examples::Pixels { values, .. } => {
                for v in values {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
            Examples::Tokens { ids, .. } => {
                for v in ids {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        for row in &self.attributes {
            for v in row {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// FNV-1a digest of the serialised payload.
    pub fn digest(&self) -> u64 {
        fnv1a(&self.payload())
    }

    pub fn digest_hex(&self) -> String {
        format!("{:016x}", self.digest())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let payload = self.payload();
        let mut header = format!(
            "{MAGIC} version={DATASET_VERSION} domain={} n={} width={}",
            self.domain().as_str(),
            self.len,
            self.input_width()
        );
        match &self.examples {
            Examples::Pixels { side, .. } => header.push_str(&format!(" side={side}")),
            Examples::Tokens { vocab, .. } => {
                header.push_str(&format!(" vocab={}-{}", vocab.low, vocab.high))
            }
        }
        header.push_str(&format!(
            " attributes={} seed={} payload={} digest={:016x}",
            self.names.join(","),
            self.manifest.seed,
            payload.len(),
            fnv1a(&payload)
        ));
        for (k, v) in &self.manifest.config {
            header.push_str(&format!(" cfg.{k}={v}"));
        }
        header.push('\n');
        let mut out = header.into_bytes();
        out.extend_from_slice(&payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let end = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::format("missing dataset header"))?;
        let header = std::str::from_utf8(&bytes[..end])
            .map_err(|_| Error::format("dataset header is not UTF-8"))?;
        let payload = &bytes[end + 1..];
        let mut fields = header.split(' ');
        if fields.next() != Some(MAGIC) {
            return Err(Error::format("not a dataset file"));
        }
        let mut kv = HashMap::new();
        let mut config = Vec::new();
        for f in fields {
            let (k, v) = f
                .split_once('=')
                .ok_or_else(|| Error::format(format!("malformed header field {f:?}")))?;
            if let Some(key) = k.strip_prefix("cfg.") {
                config.push((key.to_string(), v.to_string()));
            } else {
                kv.insert(k, v);
            }
        }
        let get = |k: &str| {
            kv.get(k)
                .copied()
                .ok_or_else(|| Error::format(format!("header lacks {k}")))
        };
        let num = |k: &str| -> Result<u64> {
            get(k)?
                .parse()
                .map_err(|_| Error::format(format!("bad {k} field")))
        };
        let version = num("version")?;
        if version != u64::from(DATASET_VERSION) {
            return Err(Error::format(format!("unsupported dataset version {version}")));
        }
        let n = num("n")? as usize;
        let declared = num("payload")? as usize;
        if payload.len() != declared {
            return Err(Error::format(format!(
                "payload is {} bytes, header declares {declared}",
                payload.len()
            )));
        }
        let digest = u64::from_str_radix(get("digest")?, 16)
            .map_err(|_| Error::format("bad digest field"))?;
        if fnv1a(payload) != digest {
            return Err(Error::format("payload digest mismatch"));
        }
        let names: Vec<String> = match get("attributes")? {
            "" => Vec::new(),
            s => s.split(',').map(str::to_string).collect(),
        };
        let domain = Domain::parse(get("domain")?).map_err(|e| Error::format(e.to_string()))?;
        let (examples, used) = match domain {
            Domain::Shapes => {
                let side = num("side")? as usize;
                let count = n * side * side;
                let bytes = payload
                    .get(..count * 8)
                    .ok_or_else(|| Error::format("payload too short for pixels"))?;
                let values = bytes
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                (Examples::Pixels { side, values }, count * 8)
            }
            Domain::Measures => {
                let (lo, hi) = get("vocab")?
                    .split_once('-')
                    .and_then(|(a, b)| Some((a.parse().ok()?, b.parse().ok()?)))
                    .ok_or_else(|| Error::format("bad vocab field"))?;
                let vocab = TokenVocabulary::new(lo, hi).map_err(|e| Error::format(e.to_string()))?;
                let count = n * MEASURE_LEN;
                let bytes = payload
                    .get(..count * 2)
                    .ok_or_else(|| Error::format("payload too short for tokens"))?;
                let ids = bytes
                    .chunks_exact(2)
                    .map(|c| u16::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                (Examples::Tokens { vocab, ids }, count * 2)
            }
        };
        let rest = &payload[used..];
        if rest.len() != names.len() * n * 8 {
            return Err(Error::format("attribute block has the wrong size"));
        }
        let mut values = rest
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let attributes = (0..names.len())
            .map(|_| values.by_ref().take(n).collect())
            .collect();
        let manifest = GenerationManifest {
            seed: num("seed")?,
            config,
        };
        let ds = Dataset::new(examples, attributes, names, manifest)
            .map_err(|e| Error::format(e.to_string()))?;
        if ds.input_width() as u64 != num("width")? {
            return Err(Error::format("width field disagrees with the examples"));
        }
        Ok(ds)
    }
}

pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    fs::write(path, dataset.to_bytes())?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    Dataset::from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{sample_measure_dataset, sample_shape_dataset, MeasureSamplerConfig};

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
    }

    #[test]
    fn round_trip_both_domains() {
        let shapes = sample_shape_dataset(20, 12, 4).unwrap();
        let back = Dataset::from_bytes(&shapes.to_bytes()).unwrap();
        assert_eq!(back, shapes);
        assert_eq!(back.digest(), shapes.digest());

        let music = sample_measure_dataset(15, &MeasureSamplerConfig::default()).unwrap();
        let back = Dataset::from_bytes(&music.to_bytes()).unwrap();
        assert_eq!(back, music);
        assert_eq!(back.manifest().get("range"), Some("36"));
    }

    #[test]
    fn truncation_and_corruption_are_format_errors() {
        let bytes = sample_shape_dataset(5, 8, 1).unwrap().to_bytes();
        for cut in [0, 10, bytes.len() / 2, bytes.len() - 1] {
            let err = Dataset::from_bytes(&bytes[..cut]).unwrap_err();
            assert!(matches!(err, Error::Format(_)), "cut {cut}: {err}");
        }
        let mut flipped = bytes.clone();
        let last = flipped.len() - 1;
        flipped[last] ^= 1;
        assert!(matches!(
            Dataset::from_bytes(&flipped),
            Err(Error::Format(_))
        ));
        let versioned = String::from_utf8_lossy(&bytes).replacen("version=1", "version=9", 1);
        assert!(matches!(
            Dataset::from_bytes(versioned.as_bytes()),
            Err(Error::Format(_))
        ));
    }
}
