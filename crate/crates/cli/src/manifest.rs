use std::fmt::Write as _;
use std::path::PathBuf;

use sha2::{Digest, Sha256};

/// Everything that determines a run's output.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub config: PathBuf,
    pub config_sha256: String,
    /// Subcommand and its arguments after the config path.
    pub command: Vec<String>,
    pub overrides: Vec<String>,
    pub out_dir: Option<PathBuf>,
    pub seed: u64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

impl RunManifest {
    pub fn lines(&self) -> Vec<String> {
        vec![
            format!("config = {}", self.config.display()),
            format!("config_sha256 = {}", self.config_sha256),
            format!("command = {}", self.command.join(" ")),
            format!("overrides = [{}]", self.overrides.join(", ")),
            format!("out_dir = {}", self.out_dir.as_ref().map_or("-".into(), |p| p.display().to_string())),
            format!("seed = {}", self.seed),
        ]
    }

    pub fn hash(&self) -> String {
        sha256_hex(self.lines().join("\n").as_bytes())
    }

    /// `#`-prefixed header placed at the top of every output file.
    pub fn header(&self) -> String {
        let mut h = format!("# mechcirc {}\n# manifest_sha256 = {}\n", env!("CARGO_PKG_VERSION"), self.hash());
        for l in self.lines() {
            h.push_str("# ");
            h.push_str(&l);
            h.push('\n');
        }
        h
    }
}
