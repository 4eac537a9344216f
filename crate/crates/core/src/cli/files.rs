use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST: &str = "manifest.json";

/// Writes `dir/name` through a temporary file in the same directory and a
/// rename, so readers never see a partial file.
pub fn write_atomic<F>(dir: &Path, name: &str, body: F) -> Result<PathBuf>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w)?;
        w.flush()?;
    }
    tmp.as_file().sync_all()?;
    let target = dir.join(name);
    tmp.persist(&target).map_err(|e| Error::Io(e.error))?;
    Ok(target)
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    write_atomic(dir, name, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn output_dir(out: &Option<PathBuf>) -> Result<PathBuf> {
    let dir = out.clone().ok_or_else(|| Error::Config("--out is required".into()))?;
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// `flags` over `file`: every non-null flag replaces the file's value. A
/// file holding a run manifest contributes its `config` object.
pub fn merge_config(file: Option<Value>, flags: Value) -> Value {
    let mut base = match file {
        Some(Value::Object(mut m)) => match m.remove("config") {
            Some(Value::Object(c)) => c,
            _ => m,
        },
        _ => serde_json::Map::new(),
    };
    if let Value::Object(f) = flags {
        for (k, v) in f {
            let empty = v.is_null() || v.as_array().is_some_and(|a| a.is_empty());
            if !empty || !base.contains_key(&k) {
                base.insert(k, v);
            }
        }
    }
    Value::Object(base)
}

/// File name fragment for an athlete id.
pub fn slug(id: &str) -> String {
    let s: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    s.trim_matches('_').to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn flags_win_over_file() {
        let file = json!({"seed": 3, "chains": 2, "thin": 4});
        let flags = json!({"seed": 7, "chains": null, "burnin": null});
        assert_eq!(
            merge_config(Some(file), flags),
            json!({"seed": 7, "chains": 2, "thin": 4, "burnin": null})
        );
        let manifest = json!({"tool": "x", "config": {"seed": 9}});
        assert_eq!(merge_config(Some(manifest), json!({})), json!({"seed": 9}));
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        write_atomic(dir.path(), "a.txt", |w| Ok(w.write_all(b"one")?)).unwrap();
        write_atomic(dir.path(), "a.txt", |w| Ok(w.write_all(b"two")?)).unwrap();
        assert_eq!(fs::read(dir.path().join("a.txt")).unwrap(), b"two");
        assert!(write_atomic(dir.path(), "b.txt", |_| Err(Error::Empty("x".into()))).is_err());
        assert!(!dir.path().join("b.txt").exists());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn slugs() {
        assert_eq!(slug("M. Olsbu Roiseland"), "M__Olsbu_Roiseland");
        assert_eq!(slug("athlete_03"), "athlete_03");
    }
}
