//! Pipeline manifest: stage status lines plus a sha256 line per emitted
//! artifact. Byte-identical inputs produce a byte-identical manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

#[derive(Default)]
pub struct Manifest {
    lines: Vec<String>,
}

impl Manifest {
    pub fn stage_ok(&mut self, name: &str) {
        self.lines.push(format!("stage {name} ok"));
    }

    pub fn stage_skipped(&mut self, name: &str, why: &str) {
        self.lines.push(format!("stage {name} skipped ({why})"));
    }

    pub fn stage_failed(&mut self, name: &str, why: &str) {
        self.lines.push(format!("stage {name} failed: {why}"));
    }

    /// Writes an artifact and records its digest.
    pub fn emit(&mut self, dir: &Path, name: &str, bytes: &[u8]) -> std::io::Result<()> {
        fs::write(dir.join(name), bytes)?;
        let digest = Sha256::digest(bytes);
        let mut hex = String::with_capacity(64);
        for b in digest {
            let _ = write!(hex, "{b:02x}");
        }
        self.lines.push(format!("file {name} sha256={hex}"));
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        let mut text = String::new();
        for l in &self.lines {
            text.push_str(l);
            text.push('\n');
        }
        fs::write(dir.join("MANIFEST"), text)
    }
}
