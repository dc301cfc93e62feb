//! All-or-nothing output: files are written into a hidden temporary directory
//! beside the output directory and moved into place only once everything
//! has been produced.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use tempfile::TempDir;

use crate::manifest::{sha256_hex, OutputDigest, RunManifest};
use crate::MANIFEST_NAME;

pub struct Staging {
    dir: TempDir,
    out_dir: PathBuf,
    /// (name inside the staging dir, final destination)
    files: Vec<(String, PathBuf)>,
    digests: Vec<OutputDigest>,
}

fn parent_of(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

impl Staging {
    pub fn new(out_dir: &Path) -> anyhow::Result<Staging> {
        let parent = parent_of(out_dir);
        fs::create_dir_all(&parent).with_context(|| format!("cannot create {}", parent.display()))?;
        let dir = tempfile::Builder::new()
            .prefix(".policylens-staging-")
            .tempdir_in(&parent)
            .with_context(|| format!("cannot create a staging directory in {}", parent.display()))?;
        Ok(Staging {
            dir,
            out_dir: out_dir.to_path_buf(),
            files: Vec::new(),
            digests: Vec::new(),
        })
    }

    /// Stage `bytes` as `name`, destined for `<out-dir>/<name>`.
    pub fn add(&mut self, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
        let dest = self.out_dir.join(name);
        self.add_to(name, bytes, dest)
    }

    /// Stage `bytes` as `name` with an explicit destination path.
    pub fn add_to(&mut self, name: &str, bytes: &[u8], dest: PathBuf) -> anyhow::Result<()> {
        if self.files.iter().any(|(n, _)| n == name) {
            bail!("output {name} staged twice");
        }
        fs::write(self.dir.path().join(name), bytes).with_context(|| format!("cannot stage {name}"))?;
        let label = if dest == self.out_dir.join(name) {
            name.to_string()
        } else {
            dest.display().to_string()
        };
        self.digests.push(OutputDigest {
            name: label,
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        self.files.push((name.to_string(), dest));
        Ok(())
    }

    pub fn digests(&self) -> &[OutputDigest] {
        &self.digests
    }

    /// Replace the output directory wholesale with the staged one. An existing
    /// directory is replaced only when it is empty or holds a previous run
    /// (has a manifest); anything else is refused.
    pub fn commit_directory(self, mut manifest: RunManifest) -> anyhow::Result<()> {
        if self.files.iter().any(|(n, d)| *d != self.out_dir.join(n)) {
            bail!("directory commit cannot place files outside the output directory");
        }
        manifest.outputs = self.digests.clone();
        fs::write(self.dir.path().join(MANIFEST_NAME), manifest.to_json()).context("cannot stage manifest")?;

        let out = &self.out_dir;
        let backup = if out.exists() {
            if !out.is_dir() {
                bail!("{} exists and is not a directory", out.display());
            }
            let previous_run = out.join(MANIFEST_NAME).is_file();
            let empty = fs::read_dir(out)?.next().is_none();
            if !previous_run && !empty {
                bail!(
                    "refusing to replace {}: not empty and not a previous policylens output",
                    out.display()
                );
            }
            let backup = tempfile::Builder::new()
                .prefix(".policylens-old-")
                .tempdir_in(parent_of(out))?
                .keep();
            // rename onto an empty directory is allowed on unix but not everywhere
            fs::remove_dir(&backup)?;
            fs::rename(out, &backup).with_context(|| format!("cannot move aside {}", out.display()))?;
            Some(backup)
        } else {
            None
        };

        let staged = self.dir.keep();
        set_dir_mode(&staged);
        if let Err(e) = fs::rename(&staged, out) {
            if let Some(b) = &backup {
                let _ = fs::rename(b, out);
            }
            let _ = fs::remove_dir_all(&staged);
            return Err(e).with_context(|| format!("cannot move outputs into {}", out.display()));
        }
        if let Some(b) = backup {
            fs::remove_dir_all(&b).with_context(|| format!("cannot remove {}", b.display()))?;
        }
        Ok(())
    }

    /// Move each staged file to its destination and write the manifest last,
    /// leaving unrelated files in the output directory alone.
    pub fn commit_files(self, mut manifest: RunManifest, manifest_name: &str) -> anyhow::Result<()> {
        manifest.outputs = self.digests.clone();
        fs::write(self.dir.path().join(manifest_name), manifest.to_json()).context("cannot stage manifest")?;
        fs::create_dir_all(&self.out_dir).with_context(|| format!("cannot create {}", self.out_dir.display()))?;
        for (name, dest) in &self.files {
            persist(&self.dir.path().join(name), dest)?;
        }
        persist(&self.dir.path().join(manifest_name), &self.out_dir.join(manifest_name))
    }
}

/// Rename into place; across filesystems, copy to a sibling temp file first
/// so the destination never holds a partial file.
fn persist(from: &Path, to: &Path) -> anyhow::Result<()> {
    let parent = parent_of(to);
    fs::create_dir_all(&parent).with_context(|| format!("cannot create {}", parent.display()))?;
    if fs::rename(from, to).is_ok() {
        return Ok(());
    }
    let tmp = tempfile::NamedTempFile::new_in(&parent)?;
    fs::copy(from, tmp.path()).with_context(|| format!("cannot copy to {}", to.display()))?;
    tmp.persist(to).with_context(|| format!("cannot write {}", to.display()))?;
    Ok(())
}

#[cfg(unix)]
fn set_dir_mode(dir: &Path) {
    use std::os::unix::fs::PermissionsExt;
    let _ = fs::set_permissions(dir, fs::Permissions::from_mode(0o755));
}

#[cfg(not(unix))]
fn set_dir_mode(_dir: &Path) {}
