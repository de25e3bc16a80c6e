//! Model checkpoints: the parameter file plus a TOML sidecar at
//! `<path>.toml` holding the architecture, regularization bindings and
//! training configuration.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attributes::music::TokenVocabulary;
use crate::datagen::{fnv1a, Dataset};
use crate::error::{Error, Result};
use crate::explore::OutputKind;
use crate::numgrad::ParameterSet;
use crate::vae::{Architecture, MlpVae, OutputHead};

use super::{ArVaeConfig, RegularizationSpec};

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub version: u32,
    pub architecture: Architecture,
    pub spec: RegularizationSpec,
    pub config: ArVaeConfig,
    /// Digest of the training dataset, hex.
    pub dataset_digest: String,
    /// Digest of the parameter file bytes, hex.
    pub params_digest: String,
    /// Token vocabulary of a music model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocabulary: Option<TokenVocabulary>,
}

impl CheckpointMeta {
    /// How the decoder's outputs are read back.
    pub fn output_kind(&self) -> Result<OutputKind> {
        match (self.architecture.head, self.vocabulary) {
            (OutputHead::Real, _) => {
                let side = (self.architecture.input_width as f64).sqrt().round() as usize;
                if side * side != self.architecture.input_width {
                    return Err(Error::format("image model input is not square"));
                }
                Ok(OutputKind::Image { side })
            }
            (OutputHead::Categorical { classes, .. }, Some(vocab)) if vocab.size() == classes => {
                Ok(OutputKind::Music { vocab })
            }
            _ => Err(Error::format("music checkpoint lacks a matching vocabulary")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: MlpVae,
    pub meta: CheckpointMeta,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".toml");
    PathBuf::from(s)
}

impl Checkpoint {
    /// Bundles a model trained on `dataset`.
    pub fn new(
        model: MlpVae,
        spec: RegularizationSpec,
        config: ArVaeConfig,
        dataset: &Dataset,
    ) -> Self {
        let meta = CheckpointMeta {
            version: CHECKPOINT_VERSION,
            architecture: model.architecture().clone(),
            spec,
            config,
            dataset_digest: dataset.digest_hex(),
            params_digest: format!("{:016x}", fnv1a(&model.params().to_bytes())),
            vocabulary: dataset.vocabulary(),
        };
        Checkpoint { model, meta }
    }

    pub fn spec(&self) -> &RegularizationSpec {
        &self.meta.spec
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.model.params().to_bytes();
        fs::write(path, &bytes)?;
        let meta = CheckpointMeta {
            params_digest: format!("{:016x}", fnv1a(&bytes)),
            ..self.meta.clone()
        };
        let text = toml::to_string(&meta)
            .map_err(|e| Error::format(format!("cannot serialise checkpoint metadata: {e}")))?;
        fs::write(sidecar_path(path), text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        let text = fs::read_to_string(sidecar_path(path))?;
        let meta: CheckpointMeta = toml::from_str(&text)
            .map_err(|e| Error::format(format!("bad checkpoint metadata: {e}")))?;
        if meta.version != CHECKPOINT_VERSION {
            return Err(Error::format(format!(
                "unsupported checkpoint version {}",
                meta.version
            )));
        }
        if meta.params_digest != format!("{:016x}", fnv1a(&bytes)) {
            return Err(Error::format("parameter file does not match its metadata digest"));
        }
        let params = ParameterSet::from_bytes(&bytes)?;
        let model = MlpVae::from_parameters(meta.architecture.clone(), params)?;
        RegularizationSpec::new(meta.spec.entries().to_vec(), model.latent_dim())
            .map_err(|e| Error::format(e.to_string()))?;
        Ok(Checkpoint { model, meta })
    }
}
