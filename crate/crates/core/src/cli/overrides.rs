use serde_json::Value;

use crate::engine::ConfigError;

/// Sets `path` (dot separated; numeric segments index arrays) inside a JSON
/// document, creating missing objects along the way.
pub fn set_path(doc: &mut Value, path: &str, new: Value) -> Result<(), ConfigError> {
    if path.is_empty() {
        return Err(ConfigError::new("sweep.param", "empty parameter path"));
    }
    let mut cur = doc;
    let segments: Vec<&str> = path.split('.').collect();
    for (i, seg) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        cur = match cur {
            Value::Object(map) => {
                if last {
                    map.insert(seg.to_string(), new);
                    return Ok(());
                }
                map.entry(seg.to_string())
                    .or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let idx: usize = seg
                    .parse()
                    .map_err(|_| ConfigError::new(path, format!("segment {seg:?} must index an array")))?;
                let len = items.len();
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| ConfigError::new(path, format!("index {idx} out of range (len {len})")))?;
                if last {
                    *slot = new;
                    return Ok(());
                }
                slot
            }
            _ => {
                let prefix = segments[..i].join(".");
                return Err(ConfigError::new(path, format!("{prefix} is not an object")));
            }
        };
    }
    unreachable!("the last segment always returns")
}
