//! Checkpoints: a directory holding `config.json` and one DHT1 file per parameter.

use std::fs;
use std::path::Path;

use super::{init, MaskerConfig, MaskerModel};
use crate::error::{Error, Result};
use crate::numerics::{tensor_read, tensor_write};

const CONFIG_FILE: &str = "config.json";

pub fn save_checkpoint(model: &MaskerModel, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|source| Error::Write {
        path: dir.to_path_buf(),
        source,
    })?;
    let cfg_path = dir.join(CONFIG_FILE);
    let json = serde_json::to_string_pretty(&model.config).expect("config serializes");
    fs::write(&cfg_path, json + "\n").map_err(|source| Error::Write {
        path: cfg_path,
        source,
    })?;
    for (name, t) in model.all_params() {
        tensor_write(t, dir.join(format!("{name}.dht")))?;
    }
    Ok(())
}

pub fn load_checkpoint(dir: impl AsRef<Path>) -> Result<MaskerModel> {
    let dir = dir.as_ref();
    let cfg_path = dir.join(CONFIG_FILE);
    let raw = fs::read_to_string(&cfg_path).map_err(|source| Error::Read {
        path: cfg_path.clone(),
        source,
    })?;
    let config: MaskerConfig = serde_json::from_str(&raw)
        .map_err(|e| Error::Config(format!("{}: {e}", cfg_path.display())))?;
    // shapes come from a fresh init; values are overwritten from disk
    let mut model = init(&config)?;
    let names: Vec<String> = model.all_params().into_iter().map(|(n, _)| n).collect();
    let mut loaded = Vec::with_capacity(names.len());
    for (name, (_, expected)) in names.iter().zip(model.all_params()) {
        let t = tensor_read(dir.join(format!("{name}.dht")))?;
        if t.dims() != expected.dims() {
            return Err(Error::Config(format!(
                "parameter {name} has dims {:?}, config implies {:?}",
                t.dims(),
                expected.dims()
            )));
        }
        loaded.push(t);
    }
    let mut it = loaded.into_iter();
    model.encoder.patch_proj = it.next().unwrap();
    for m in &mut model.encoder.mixers {
        *m = it.next().unwrap();
    }
    for slot in model.trainable_params_mut() {
        *slot = it.next().unwrap();
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = MaskerConfig {
            image_size: 8,
            embed_dim: 4,
            span_embed_dim: 4,
            seed: 3,
            ..Default::default()
        };
        let mut model = init(&cfg).unwrap();
        // perturb a trainable tensor so the load cannot just re-init
        model.head_bias = crate::numerics::Tensor::full(vec![16], 0.25).unwrap();
        save_checkpoint(&model, dir.path()).unwrap();
        let back = load_checkpoint(dir.path()).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn missing_checkpoint() {
        assert!(load_checkpoint("/nonexistent/ckpt").is_err());
    }
}
