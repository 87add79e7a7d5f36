//! `kb-v1` directory layout.
//!
//! * `entries.log`: one sorted-key JSON entry per line, vectors excluded.
//! * `vectors.bin`: little-endian `f32` rows, row `i` belongs to entry `i`.
//! * `manifest`: `{"count", "dimension", "format"}`.
//!
//! The manifest is the commit point. An append writes the log line and the
//! vector row first, then replaces the manifest atomically. Bytes beyond the
//! committed count are a torn append and are truncated on open.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::graph::{from_canonical_text, to_canonical_text, CaseId};
use crate::json::to_canonical;
use crate::kb::embed::EmbeddingVector;
use crate::kb::summary::CaseSummary;
use crate::kb::{KbEntry, KbError};

pub const KB_FORMAT: &str = "kb-v1";
const MANIFEST: &str = "manifest";
const ENTRIES: &str = "entries.log";
const VECTORS: &str = "vectors.bin";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub dimension: usize,
    pub count: usize,
}

#[derive(Serialize, Deserialize)]
struct EntryLine {
    case_id: CaseId,
    timestamp: u64,
    summary: CaseSummary,
    graph: String,
}

#[derive(Debug)]
pub(crate) struct Store {
    dir: PathBuf,
    manifest: Manifest,
}

fn corrupt(message: impl Into<String>) -> KbError {
    KbError::Corrupt(message.into())
}

fn write_manifest(dir: &Path, manifest: &Manifest) -> io::Result<()> {
    let tmp = dir.join("manifest.tmp");
    let mut f = File::create(&tmp)?;
    f.write_all(to_canonical(manifest).expect("manifest serializes").as_bytes())?;
    f.write_all(b"\n")?;
    f.sync_all()?;
    fs::rename(&tmp, dir.join(MANIFEST))?;
    Ok(())
}

impl Store {
    /// Open or create a store. `dimension` is required when creating and
    /// checked against the manifest otherwise.
    pub fn open(dir: &Path, dimension: Option<usize>) -> Result<(Store, Vec<KbEntry>), KbError> {
        fs::create_dir_all(dir)?;
        let manifest_path = dir.join(MANIFEST);
        if !manifest_path.exists() {
            let dimension = dimension.ok_or_else(|| corrupt("new knowledge base needs a dimension"))?;
            let manifest = Manifest { format: KB_FORMAT.into(), dimension, count: 0 };
            File::create(dir.join(ENTRIES))?;
            File::create(dir.join(VECTORS))?;
            write_manifest(dir, &manifest)?;
            return Ok((Store { dir: dir.to_path_buf(), manifest }, Vec::new()));
        }

        let manifest: Manifest = serde_json::from_slice(&fs::read(&manifest_path)?)
            .map_err(|e| corrupt(format!("manifest: {e}")))?;
        if manifest.format != KB_FORMAT {
            return Err(corrupt(format!("unsupported format `{}`", manifest.format)));
        }
        if let Some(d) = dimension {
            if d != manifest.dimension {
                return Err(KbError::DimensionMismatch { expected: manifest.dimension, actual: d });
            }
        }

        let log = fs::read(dir.join(ENTRIES))?;
        let mut lines = Vec::with_capacity(manifest.count);
        let mut committed = 0usize;
        for _ in 0..manifest.count {
            let rest = &log[committed..];
            let end = rest
                .iter()
                .position(|b| *b == b'\n')
                .ok_or_else(|| corrupt("entries.log is shorter than the manifest count"))?;
            lines.push(&rest[..end]);
            committed += end + 1;
        }
        let row_bytes = manifest.dimension * 4;
        let vectors = fs::read(dir.join(VECTORS))?;
        if vectors.len() < manifest.count * row_bytes {
            return Err(corrupt("vectors.bin is shorter than the manifest count"));
        }

        let mut entries = Vec::with_capacity(manifest.count);
        for (i, line) in lines.iter().enumerate() {
            let parsed: EntryLine =
                serde_json::from_slice(line).map_err(|e| corrupt(format!("entries.log line {}: {e}", i + 1)))?;
            let graph = from_canonical_text(&parsed.graph).map_err(|e| corrupt(format!("entry {}: {e}", parsed.case_id)))?;
            let row = &vectors[i * row_bytes..(i + 1) * row_bytes];
            let raw: Vec<f32> = row.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
            let vector = EmbeddingVector::from_raw(raw).map_err(|e| corrupt(e.to_string()))?;
            entries.push(KbEntry { graph, summary: parsed.summary, vector, timestamp: parsed.timestamp });
        }

        // Drop torn tails.
        if log.len() > committed {
            OpenOptions::new().write(true).open(dir.join(ENTRIES))?.set_len(committed as u64)?;
        }
        if vectors.len() > manifest.count * row_bytes {
            OpenOptions::new()
                .write(true)
                .open(dir.join(VECTORS))?
                .set_len((manifest.count * row_bytes) as u64)?;
        }
        Ok((Store { dir: dir.to_path_buf(), manifest }, entries))
    }

    pub fn dimension(&self) -> usize {
        self.manifest.dimension
    }

    pub fn append(&mut self, entry: &KbEntry) -> Result<(), KbError> {
        let line = EntryLine {
            case_id: entry.graph.case_id().clone(),
            timestamp: entry.timestamp,
            summary: entry.summary.clone(),
            graph: to_canonical_text(&entry.graph),
        };
        let mut log = OpenOptions::new().append(true).open(self.dir.join(ENTRIES))?;
        log.write_all(to_canonical(&line).expect("entry serializes").as_bytes())?;
        log.write_all(b"\n")?;
        log.sync_data()?;

        let mut bytes = Vec::with_capacity(entry.vector.raw().len() * 4);
        for v in entry.vector.raw() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let mut vectors = OpenOptions::new().append(true).open(self.dir.join(VECTORS))?;
        vectors.write_all(&bytes)?;
        vectors.sync_data()?;

        let next = Manifest { count: self.manifest.count + 1, ..self.manifest.clone() };
        write_manifest(&self.dir, &next)?;
        self.manifest = next;
        Ok(())
    }
}
