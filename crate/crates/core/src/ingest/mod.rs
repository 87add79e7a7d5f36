//! Case records in, validated EAFD graphs out.

pub mod annotation;
pub mod extract;
pub mod record;
pub mod refine;

pub use annotation::{parse_annotations, strip_annotations, AnnotatedStatement, AnnotationError, ConflictRef, EvidenceRef};
pub use extract::{extract_graph, AnnotationExtractor, ExtractError, Extractor, LaneProposal};
pub use record::{parse_case_record, CaseRecord, DecisionRecord, EvidenceItem, RecordError, RECORD_FORMAT};
pub use refine::{refine_actions, MergeMap};

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

/// Every `*.json` file in a flat corpus directory, sorted by file name.
pub fn corpus_files(dir: &Path) -> io::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Record { path: PathBuf, source: RecordError },
}

/// Read every record of a corpus directory.
pub fn read_corpus(dir: &Path) -> Result<Vec<CaseRecord>, CorpusError> {
    let files = corpus_files(dir).map_err(|source| CorpusError::Io { path: dir.to_path_buf(), source })?;
    files
        .into_iter()
        .map(|path| {
            let bytes = fs::read(&path).map_err(|source| CorpusError::Io { path: path.clone(), source })?;
            parse_case_record(&bytes).map_err(|source| CorpusError::Record { path, source })
        })
        .collect()
}

/// Write records as `<case_id>.json` files.
pub fn write_corpus(dir: &Path, records: &[CaseRecord]) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    for r in records {
        fs::write(dir.join(format!("{}.json", r.case_id)), r.to_json())?;
    }
    Ok(())
}
