//! COCO-style annotation passthrough. Degradation is pixel-wise, so geometry is
//! copied verbatim and only `images[].file_name` changes.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde_json::Value;

use crate::error::{Error, Result};

/// Rewrites every `images[].file_name` through `map`. Fails with the full list
/// of names that have no entry.
pub fn passthrough_annotations(mut doc: Value, map: &HashMap<String, String>) -> Result<Value> {
    let images = doc
        .get_mut("images")
        .and_then(Value::as_array_mut)
        .ok_or_else(|| Error::Annotation("missing `images` array".into()))?;
    let mut missing = BTreeSet::new();
    for (i, image) in images.iter_mut().enumerate() {
        let slot = image
            .get_mut("file_name")
            .ok_or_else(|| Error::Annotation(format!("images[{i}] has no file_name")))?;
        let name = slot.as_str().ok_or_else(|| Error::Annotation(format!("images[{i}].file_name is not a string")))?;
        match map.get(name) {
            Some(new) => *slot = Value::String(new.clone()),
            None => {
                missing.insert(name.to_owned());
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::UnmappedAnnotations(missing.into_iter().collect()));
    }
    Ok(doc)
}

pub fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    serde_json::from_str(&text).map_err(Error::json(path))
}
