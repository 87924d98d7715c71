//! DAB keysets as JSON: `{"aes_key": hex, "shuffle_seed": hex, "quality": n, "frame_nonce_base": n}`.

use std::path::Path;

use sepris_core::dab::DabKeyset;

use crate::error::{read, write, FormatError};

pub fn load(path: &Path) -> Result<DabKeyset, FormatError> {
    Ok(serde_json::from_slice(&read(path)?)?)
}

pub fn save(path: &Path, keys: &DabKeyset) -> Result<(), FormatError> {
    let mut json = serde_json::to_vec_pretty(keys)?;
    json.push(b'\n');
    write(path, &json)
}
