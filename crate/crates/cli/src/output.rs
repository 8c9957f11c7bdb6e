use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rdt_lab::grid_tensor::snapshot::write_to;
use rdt_lab::grid_tensor::TensorField;

/// Fixed 17-significant-digit scientific format; round-trips every `f64`.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV built in memory.
#[derive(Debug, Clone)]
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self { text: format!("{}\n", header.join(",")) }
    }

    pub fn row(&mut self, cells: &[String]) {
        let _ = writeln!(self.text, "{}", cells.join(","));
    }

    pub fn nums(&mut self, values: &[f64]) {
        let cells: Vec<String> = values.iter().map(|&v| num(v)).collect();
        self.row(&cells);
    }
}

/// Files staged in memory and written only once the whole command has
/// succeeded. The last file added is written last.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    pub fn csv(&mut self, name: &str, csv: Csv) {
        self.files.push((name.into(), csv.text.into_bytes()));
    }

    pub fn text(&mut self, name: &str, text: String) {
        self.files.push((name.into(), text.into_bytes()));
    }

    pub fn snapshot(&mut self, name: &str, field: &TensorField) -> Result<()> {
        let mut buf = Vec::new();
        write_to(field, &mut buf)?;
        self.files.push((name.into(), buf));
        Ok(())
    }

    pub fn commit(self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut written = Vec::new();
        for (name, bytes) in self.files {
            let path = dir.join(name);
            std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
            written.push(path);
        }
        Ok(written)
    }
}
