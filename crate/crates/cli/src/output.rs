use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::failure::Failure;

/// An output directory checked up front for collisions with the files a
/// command is about to write.
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn prepare(root: &Path, names: &[&str], force: bool) -> Result<Self, Failure> {
        std::fs::create_dir_all(root).map_err(|source| Failure::Write {
            path: root.to_path_buf(),
            source,
        })?;
        if !force {
            let taken: Vec<String> = names
                .iter()
                .map(|n| root.join(n))
                .filter(|p| p.exists())
                .map(|p| p.display().to_string())
                .collect();
            if !taken.is_empty() {
                return Err(Failure::Exists(taken));
            }
        }
        Ok(OutDir {
            root: root.to_path_buf(),
        })
    }

    pub fn write(
        &self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    ) -> Result<(), Failure> {
        let path = self.root.join(name);
        let wrap = |source| Failure::Write {
            path: path.clone(),
            source,
        };
        let mut w = BufWriter::new(File::create(&path).map_err(wrap)?);
        body(&mut w).map_err(wrap)?;
        w.flush().map_err(wrap)
    }

    pub fn write_json(&self, name: &str, value: &impl Serialize) -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(value).map_err(|source| Failure::Json {
            name: name.to_string(),
            source,
        })?;
        text.push('\n');
        self.write(name, |w| w.write_all(text.as_bytes()))
    }
}
