//! Checkpoint file format.
//!
//! Single JSON file:
//! `{"format_version": 1, "config": {...}, "params": {name: {"shape": [...],
//! "data": [...]}}}` with parameter names sorted, so a save/load/save cycle
//! is byte-identical.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelState};
use crate::tensor::Tensor;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ParamBlob {
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format_version: u32,
    config: ModelConfig,
    params: BTreeMap<String, ParamBlob>,
}

pub fn save_checkpoint<P: AsRef<Path>>(model: &ModelState, path: P) -> Result<()> {
    let mut params = BTreeMap::new();
    for (name, tensor) in model.named() {
        params.insert(
            name,
            ParamBlob {
                shape: tensor.shape().to_vec(),
                data: tensor.data().to_vec(),
            },
        );
    }
    let file = CheckpointFile {
        format_version: FORMAT_VERSION,
        config: model.config.clone(),
        params,
    };
    let out = std::fs::File::create(path)?;
    serde_json::to_writer(std::io::BufWriter::new(out), &file)?;
    Ok(())
}

pub fn load_checkpoint<P: AsRef<Path>>(path: P) -> Result<ModelState> {
    let file = std::fs::File::open(path)?;
    let parsed: CheckpointFile = serde_json::from_reader(std::io::BufReader::new(file))?;
    if parsed.format_version != FORMAT_VERSION {
        return Err(Error::Incompatible(format!(
            "checkpoint format_version {} (supported: {FORMAT_VERSION})",
            parsed.format_version
        )));
    }
    // Build the structure from the config, then substitute stored values.
    let skeleton = ModelState::init(parsed.config.clone(), 0)?;
    let params = parsed.params;
    skeleton.map(&mut |name, tensor| {
        let blob = params
            .get(name)
            .ok_or_else(|| Error::Incompatible(format!("checkpoint is missing parameter {name}")))?;
        if blob.shape != tensor.shape() {
            return Err(Error::Incompatible(format!(
                "parameter {name}: shape {:?} in file, {:?} expected",
                blob.shape,
                tensor.shape()
            )));
        }
        Tensor::param(blob.data.clone(), &blob.shape)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::{GinConfig, Pooling};

    fn small_model(seed: u64) -> ModelState {
        ModelState::init(
            ModelConfig {
                feature_dim: 3,
                gin: GinConfig {
                    num_layers: 2,
                    hidden_dim: 4,
                    epsilon: 0.0,
                    pooling: Pooling::Mean,
                },
            },
            seed,
        )
        .unwrap()
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let model = small_model(5);
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.json");
        let p2 = dir.path().join("b.json");
        save_checkpoint(&model, &p1).unwrap();
        let loaded = load_checkpoint(&p1).unwrap();
        save_checkpoint(&loaded, &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn round_trip_reproduces_every_parameter_bit_exactly() {
        let model = small_model(6);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        save_checkpoint(&model, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        for ((na, ta), (nb, tb)) in model.named().iter().zip(loaded.named().iter()) {
            assert_eq!(na, nb);
            assert_eq!(ta.shape(), tb.shape());
            assert!(ta
                .data()
                .iter()
                .zip(tb.data())
                .all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }

    #[test]
    fn truncated_file_fails_to_parse() {
        let model = small_model(7);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        save_checkpoint(&model, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Json(_))));
    }

    #[test]
    fn version_mismatch_is_an_incompatibility_error() {
        let model = small_model(8);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        save_checkpoint(&model, &path).unwrap();
        let text = std::fs::read_to_string(&path)
            .unwrap()
            .replace("\"format_version\":1", "\"format_version\":2");
        std::fs::write(&path, text).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Incompatible(_))));
    }
}
