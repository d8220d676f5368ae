//! On-disk importance maps, one directory per AIL round.
//!
//! ```text
//! <root>/round_000/index.json     RoundIndex
//! <root>/round_000/000000.imp     one record per sample
//! ```
//!
//! A record is `"AILW"`, then `version`, `iteration`, `height`, `width` and
//! `id_len` as u32 LE, the UTF-8 sample id, and `height × width` f64 LE
//! weights in row-major order.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::importance::ImportanceMap;

pub const STORE_VERSION: u32 = 1;
const RECORD_MAGIC: &[u8; 4] = b"AILW";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoreEntry {
    pub id: String,
    pub file: String,
    pub height: usize,
    pub width: usize,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundIndex {
    pub version: u32,
    pub round: u32,
    pub config_hash: String,
    pub mean_importance: f64,
    pub entries: Vec<StoreEntry>,
}

#[derive(Clone, Debug)]
pub struct ImportanceStore {
    root: PathBuf,
}

pub fn encode_record(map: &ImportanceMap) -> Vec<u8> {
    let id = map.sample_id.as_bytes();
    let mut buf = Vec::with_capacity(24 + id.len() + 8 * map.weights.len());
    buf.extend_from_slice(RECORD_MAGIC);
    for v in [
        STORE_VERSION,
        map.iteration,
        map.height as u32,
        map.width as u32,
        id.len() as u32,
    ] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend_from_slice(id);
    for w in &map.weights {
        buf.extend_from_slice(&w.to_le_bytes());
    }
    buf
}

pub fn decode_record(bytes: &[u8]) -> Result<ImportanceMap> {
    let corrupt = |msg: &str| Error::CorruptStore(msg.to_string());
    if bytes.len() < 24 || &bytes[..4] != RECORD_MAGIC {
        return Err(corrupt("bad record header"));
    }
    let word =
        |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().expect("4 bytes"));
    let (version, iteration, height, width, id_len) = (
        word(0),
        word(1),
        word(2) as usize,
        word(3) as usize,
        word(4) as usize,
    );
    if version != STORE_VERSION {
        return Err(Error::CorruptStore(format!("record version {version}")));
    }
    let expected = 24 + id_len + 8 * height * width;
    if bytes.len() != expected {
        return Err(Error::CorruptStore(format!(
            "record is {} bytes, header implies {expected}",
            bytes.len()
        )));
    }
    let sample_id = std::str::from_utf8(&bytes[24..24 + id_len])
        .map_err(|_| corrupt("sample id is not UTF-8"))?
        .to_string();
    let weights = bytes[24 + id_len..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(ImportanceMap {
        sample_id,
        height,
        width,
        weights,
        iteration,
    })
}

impl ImportanceStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        Ok(ImportanceStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn round_dir(&self, round: u32) -> PathBuf {
        self.root.join(format!("round_{round:03}"))
    }

    pub fn save_round(&self, round: u32, maps: &[ImportanceMap], config_hash: &str) -> Result<()> {
        let dir = self.round_dir(round);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let mut entries = Vec::with_capacity(maps.len());
        let mut total = 0.0;
        let mut count = 0usize;
        for (k, map) in maps.iter().enumerate() {
            map.validate()?;
            let bytes = encode_record(map);
            let file = format!("{k:06}.imp");
            let path = dir.join(&file);
            fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
            total += map.weights.iter().sum::<f64>();
            count += map.weights.len();
            entries.push(StoreEntry {
                id: map.sample_id.clone(),
                file,
                height: map.height,
                width: map.width,
                sha256: hex::encode(Sha256::digest(&bytes)),
            });
        }
        let index = RoundIndex {
            version: STORE_VERSION,
            round,
            config_hash: config_hash.to_string(),
            mean_importance: if count == 0 {
                0.0
            } else {
                total / count as f64
            },
            entries,
        };
        let path = dir.join("index.json");
        let json = serde_json::to_vec_pretty(&index)?;
        fs::write(&path, json).map_err(|e| Error::io(&path, e))
    }

    pub fn load_index(&self, round: u32) -> Result<RoundIndex> {
        let path = self.round_dir(round).join("index.json");
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let index: RoundIndex = serde_json::from_slice(&bytes)
            .map_err(|e| Error::CorruptStore(format!("{}: {e}", path.display())))?;
        if index.version != STORE_VERSION || index.round != round {
            return Err(Error::CorruptStore(format!(
                "{}: version {} round {}",
                path.display(),
                index.version,
                index.round
            )));
        }
        Ok(index)
    }

    pub fn load_round(&self, round: u32) -> Result<Vec<ImportanceMap>> {
        let index = self.load_index(round)?;
        let dir = self.round_dir(round);
        index
            .entries
            .iter()
            .map(|entry| {
                let path = dir.join(&entry.file);
                let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
                if hex::encode(Sha256::digest(&bytes)) != entry.sha256 {
                    return Err(Error::CorruptStore(format!(
                        "{}: checksum mismatch",
                        path.display()
                    )));
                }
                let map = decode_record(&bytes)?;
                if map.sample_id != entry.id
                    || (map.height, map.width) != (entry.height, entry.width)
                {
                    return Err(Error::CorruptStore(format!(
                        "{}: does not match index",
                        path.display()
                    )));
                }
                Ok(map)
            })
            .collect()
    }

    /// Rounds present on disk, ascending.
    pub fn rounds(&self) -> Result<Vec<u32>> {
        let mut rounds = Vec::new();
        for entry in fs::read_dir(&self.root).map_err(|e| Error::io(&self.root, e))? {
            let entry = entry.map_err(|e| Error::io(&self.root, e))?;
            let name = entry.file_name();
            if let Some(r) = name
                .to_str()
                .and_then(|n| n.strip_prefix("round_"))
                .and_then(|n| n.parse().ok())
            {
                rounds.push(r);
            }
        }
        rounds.sort_unstable();
        Ok(rounds)
    }
}
