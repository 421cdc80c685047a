//! Output directory staging and the CSV / text writers.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Files are written into a hidden sibling directory and moved into place
/// by `commit`, so a failed run leaves no partial output behind.
pub struct OutDir {
    target: PathBuf,
    staging: PathBuf,
    force: bool,
    committed: bool,
}

impl OutDir {
    pub fn create(target: &Path, force: bool) -> Result<Self> {
        if target.exists() && !force {
            bail!(
                "output directory {} already exists; pass --force to replace it",
                target.display()
            );
        }
        let name = target
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "out".into());
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent).with_context(|| format!("creating {}", parent.display()))?;
        let staging = parent.join(format!(".{name}.staging-{}", std::process::id()));
        if staging.exists() {
            fs::remove_dir_all(&staging)?;
        }
        fs::create_dir(&staging).with_context(|| format!("creating {}", staging.display()))?;
        Ok(OutDir {
            target: target.to_path_buf(),
            staging,
            force,
            committed: false,
        })
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<()> {
        let path = self.staging.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
    }

    pub fn commit(mut self) -> Result<PathBuf> {
        if self.target.exists() {
            if !self.force {
                bail!("output directory {} appeared during the run", self.target.display());
            }
            fs::remove_dir_all(&self.target)
                .with_context(|| format!("removing {}", self.target.display()))?;
        }
        fs::rename(&self.staging, &self.target)
            .with_context(|| format!("moving output into {}", self.target.display()))?;
        self.committed = true;
        Ok(self.target.clone())
    }
}

impl Drop for OutDir {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.staging);
        }
    }
}

fn schema_line(kind: &str) -> String {
    format!("# spreadlab schema_version={SCHEMA_VERSION} kind={kind}\n")
}

/// Schema line, header row, then rows. LF line endings.
pub fn csv_table<I>(kind: &str, header: &[&str], rows: I) -> Result<String>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(schema_line(kind).into_bytes());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("csv flush: {e}"))?;
    Ok(String::from_utf8(bytes)?)
}

pub fn csv_kv(kind: &str, entries: &[(String, String)]) -> Result<String> {
    csv_table(
        kind,
        &["key", "value"],
        entries.iter().map(|(k, v)| vec![k.clone(), v.clone()]),
    )
}

/// Aligned `key  value` lines under a title.
pub fn text_kv(title: &str, entries: &[(String, String)]) -> String {
    let width = entries.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut s = format!("{title}\n{}\n", "=".repeat(title.len()));
    for (k, v) in entries {
        s.push_str(&format!("{k:<width$}  {v}\n"));
    }
    s
}

pub fn kv(k: &str, v: impl ToString) -> (String, String) {
    (k.to_string(), v.to_string())
}
