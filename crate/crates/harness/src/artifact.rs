//! Output files and the manifest that lists them.

use std::io;
use std::path::Path;

use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    /// File name relative to the output directory.
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn text(name: impl Into<String>, body: impl Into<String>) -> Self {
        Self { name: name.into(), bytes: body.into().into_bytes() }
    }

    pub fn as_str(&self) -> &str {
        std::str::from_utf8(&self.bytes).unwrap_or("")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub const MANIFEST_NAME: &str = "manifest.csv";

/// Writes every artifact under `out_dir`, then `manifest.csv` with one row
/// per artifact: name, size, content hash and the hash of `config_text`.
pub fn write_artifacts(out_dir: &Path, artifacts: &[Artifact], config_text: &str) -> io::Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let config_hash = sha256_hex(config_text.as_bytes());
    let mut manifest = String::from("file,bytes,sha256,config_sha256\n");
    for a in artifacts {
        if a.name == MANIFEST_NAME || a.name.contains(['/', '\\']) {
            return Err(io::Error::new(io::ErrorKind::InvalidInput, format!("bad artifact name `{}`", a.name)));
        }
        std::fs::write(out_dir.join(&a.name), &a.bytes)?;
        manifest += &format!("{},{},{},{config_hash}\n", a.name, a.bytes.len(), sha256_hex(&a.bytes));
    }
    std::fs::write(out_dir.join(MANIFEST_NAME), manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn manifest_lists_every_file() {
        let dir = tempfile::tempdir().unwrap();
        let arts = [Artifact::text("a.csv", "x\n1\n"), Artifact::text("b.svg", "<svg/>")];
        write_artifacts(dir.path(), &arts, "seed = 1").unwrap();
        let m = std::fs::read_to_string(dir.path().join(MANIFEST_NAME)).unwrap();
        assert_eq!(m.lines().count(), 3);
        assert!(m.contains(&format!("a.csv,4,{}", sha256_hex(b"x\n1\n"))));
        assert_eq!(std::fs::read_to_string(dir.path().join("b.svg")).unwrap(), "<svg/>");
    }
}
