//! Run provenance: which cases, agent, and protocol produced a transcript
//! file, with content hashes so results can be traced back to exact inputs.

use std::fs;
use std::io::Read;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use seqbench_core::runner::{ParsePolicy, Protocol};
use seqbench_core::{EnvKind, Mode};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub created_unix: u64,
    pub kind: EnvKind,
    pub mode: Mode,
    pub protocol: Protocol,
    pub parse_policy: ParsePolicy,
    pub budget: u32,
    /// Credential-free agent label.
    pub agent: String,
    pub case_set: String,
    pub case_set_sha256: String,
    pub case_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub donor_set: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub donor_set_sha256: Option<String>,
    pub transcripts: String,
    pub transcripts_sha256: String,
}

pub fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let mut file =
        fs::File::open(path).with_context(|| format!("open {} for hashing", path.display()))?;
    let mut hasher = Sha256::new();
    let mut buffer = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buffer)?;
        if n == 0 {
            break;
        }
        hasher.update(&buffer[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

pub fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn save(&self, path: &Path) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).with_context(|| format!("write {}", path.display()))?;
        Ok(())
    }

    pub fn load(path: &Path) -> anyhow::Result<RunManifest> {
        let text =
            fs::read_to_string(path).with_context(|| format!("read {}", path.display()))?;
        let manifest: RunManifest = serde_json::from_str(&text)
            .with_context(|| format!("parse manifest {}", path.display()))?;
        if manifest.format_version != MANIFEST_VERSION {
            anyhow::bail!(
                "unsupported manifest version {} in {}",
                manifest.format_version,
                path.display()
            );
        }
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        let manifest = RunManifest {
            format_version: MANIFEST_VERSION,
            created_unix: 1_700_000_000,
            kind: EnvKind::GuessNum,
            mode: Mode::Easy,
            protocol: Protocol::InContext { examples: 3 },
            parse_policy: ParsePolicy::Lenient,
            budget: 20,
            agent: "oracle".into(),
            case_set: "cases.jsonl".into(),
            case_set_sha256: "ab".into(),
            case_count: 400,
            donor_set: Some("donors.jsonl".into()),
            donor_set_sha256: Some("cd".into()),
            transcripts: "t.jsonl".into(),
            transcripts_sha256: "ef".into(),
        };
        manifest.save(&path).unwrap();
        assert_eq!(RunManifest::load(&path).unwrap(), manifest);
    }

    #[test]
    fn sha256_file_matches_known_vector() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x");
        fs::write(&path, b"abc").unwrap();
        assert_eq!(
            sha256_file(&path).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
