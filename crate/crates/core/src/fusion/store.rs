//! Attention parameters on disk: one MMTS tensor per weight and a JSON
//! descriptor naming them.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::attention::FactorizedAttentionParams;
use crate::error::{Error, Result};
use crate::io::{read_json, read_tensor, write_json, write_tensor, TensorBlob};

pub const DESCRIPTOR_FILE: &str = "params.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightEntry {
    pub name: String,
    pub file: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDescriptor {
    pub kind: String,
    pub heads: usize,
    pub weights: Vec<WeightEntry>,
}

const KIND: &str = "factorized_attention";

/// Writes `subspace_<h>.mmts`, `modality.mmts` and the descriptor into `dir`.
pub fn save_attention_params(dir: &Path, params: &FactorizedAttentionParams) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut weights = Vec::new();
    let named = params
        .subspaces
        .iter()
        .enumerate()
        .map(|(h, w)| (format!("subspace_{h}"), w))
        .chain(std::iter::once(("modality".to_string(), &params.modality)));
    for (name, w) in named {
        let file = format!("{name}.mmts");
        write_tensor(&dir.join(&file), &TensorBlob::from_array2_f64(w))?;
        weights.push(WeightEntry {
            name,
            file,
            shape: w.shape().to_vec(),
        });
    }
    let desc = ParamDescriptor {
        kind: KIND.into(),
        heads: params.heads(),
        weights,
    };
    write_json(&dir.join(DESCRIPTOR_FILE), &desc)
}

pub fn load_attention_params(dir: &Path) -> Result<FactorizedAttentionParams> {
    let desc: ParamDescriptor = read_json(&dir.join(DESCRIPTOR_FILE))?;
    if desc.kind != KIND {
        return Err(Error::Unsupported {
            kind: "parameter set",
            detail: desc.kind,
        });
    }
    let load = |name: &str| -> Result<_> {
        let entry = desc
            .weights
            .iter()
            .find(|w| w.name == name)
            .ok_or_else(|| Error::validation(format!("descriptor lacks weight {name}")))?;
        let arr = read_tensor(&dir.join(&entry.file))?.to_array2()?;
        if arr.shape() != entry.shape.as_slice() {
            return Err(Error::Corruption(format!(
                "{} has shape {:?}, descriptor says {:?}",
                entry.file,
                arr.shape(),
                entry.shape
            )));
        }
        Ok(arr)
    };
    let subspaces = (0..desc.heads)
        .map(|h| load(&format!("subspace_{h}")))
        .collect::<Result<Vec<_>>>()?;
    FactorizedAttentionParams::new(subspaces, load("modality")?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = FactorizedAttentionParams::random(&mut rng, 6, 4, 3, 5).unwrap();
        save_attention_params(dir.path(), &p).unwrap();
        assert_eq!(load_attention_params(dir.path()).unwrap(), p);
        let desc: ParamDescriptor = read_json(&dir.path().join(DESCRIPTOR_FILE)).unwrap();
        assert_eq!(desc.weights.len(), 4);
        assert_eq!(desc.weights[3].shape, vec![4, 3]);
    }

    #[test]
    fn missing_weight_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = FactorizedAttentionParams::random(&mut rng, 2, 2, 2, 2).unwrap();
        save_attention_params(dir.path(), &p).unwrap();
        std::fs::remove_file(dir.path().join("subspace_1.mmts")).unwrap();
        assert!(matches!(load_attention_params(dir.path()), Err(Error::Io { .. })));
    }
}
