//! Output files. Floats are written with 17 significant digits so that every
//! value round-trips exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ohl_core::report::format_number;
use serde::Serialize;
use serde_json::{Number, Value};

use crate::Failure;

pub fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Data(format!("creating {}: {e}", dir.display())))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Failure::Data(format!("creating {}: {e}", path.display())))
}

fn widen(value: &mut Value) {
    match value {
        Value::Number(n) if n.is_f64() => {
            if let Some(v) = n.as_f64() {
                if let Ok(wide) = format_number(v).parse::<Number>() {
                    *n = wide;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(widen),
        Value::Object(map) => map.values_mut().for_each(widen),
        _ => {}
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, Failure> {
    let mut v = serde_json::to_value(value).map_err(|e| Failure::Data(format!("serializing report: {e}")))?;
    widen(&mut v);
    serde_json::to_string_pretty(&v).map_err(|e| Failure::Data(format!("serializing report: {e}")))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut out = create(path)?;
    writeln!(out, "{}", to_json(value)?)
        .and_then(|_| out.flush())
        .map_err(|e| Failure::Data(format!("writing {}: {e}", path.display())))
}

/// File-name-safe form of a strategy label.
pub fn slug(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

pub fn trace_path(dir: &Path, label: &str) -> PathBuf {
    dir.join(format!("trace_{}.csv", slug(label)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_floats_carry_seventeen_digits() {
        let text = to_json(&serde_json::json!({ "x": 0.1, "n": 3, "v": [1.0 / 3.0] })).unwrap();
        assert!(text.contains("1.0000000000000001e-1"), "{text}");
        assert!(text.contains("\"n\": 3"), "{text}");
        let back: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["v"][0].as_f64().unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn labels_become_file_names() {
        assert_eq!(slug("OHL eta=1e-3"), "OHL_eta_1e-3");
    }
}
