//! File formats: WAV audio, the MMTS binary tensor container, and JSON
//! simulation manifests.

pub mod manifest;
pub mod tensor;
pub mod wav;

use std::path::Path;

use serde::{de::DeserializeOwned, Serialize};

use crate::error::{Error, Result};

pub use manifest::{Range, SimulationManifest};
pub use tensor::{read_tensor, write_tensor, TensorBlob, TensorData};
pub use wav::{read_wav, write_wav, WavEncoding, WavWriteOptions};

/// Writes pretty-printed JSON followed by a newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}
