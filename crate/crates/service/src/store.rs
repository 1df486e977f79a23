//! File-backed store. Every write goes to a temporary file in the target
//! directory and is renamed into place, so readers never see a torn file.
//!
//! Layout under the root:
//! `applicants/<hex(applicant_id)>/report.json`, `.../applicant.json`,
//! `letters/<letter_id>.json`, `jobs/<job_id>.json`, `traces/<job_id>.ndjson`.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use lori_core::corpus::{MicroLabel, SentenceRecord};
use lori_core::pipeline::{format_fraction, ApplicantReport, HighlightSpan, Stage};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("corrupt record {path}: {source}")]
    Corrupt {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobRecord {
    pub job_id: String,
    pub applicant_id: String,
    pub content_hash: String,
    pub state: JobState,
    pub stage: Stage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// What the store keeps per applicant besides the report bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredApplicant {
    pub applicant_id: String,
    pub content_hash: String,
    pub job_id: String,
    /// Boundary spec the letters were cut with, in its textual form.
    pub boundary: String,
    pub letter_ids: Vec<String>,
}

/// Body of `GET /letters/{letter_id}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LetterView {
    pub letter_id: String,
    pub applicant_id: String,
    pub raw_text: String,
    pub sentences: Vec<SentenceRecord>,
    pub highlights: Vec<HighlightSpan>,
}

/// One row of `GET /applicants`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplicantRow {
    pub applicant_id: String,
    pub letters_count: u64,
    pub highlighted_sentences: u64,
    pub total_sentences: u64,
    /// Highlighted over total sentences across all letters, four decimals.
    pub highlight_proportion: String,
    pub micro_label_counts: std::collections::BTreeMap<MicroLabel, u64>,
}

impl ApplicantRow {
    pub fn from_report(r: &ApplicantReport) -> Self {
        Self {
            applicant_id: r.applicant_id.clone(),
            letters_count: r.letters_count,
            highlighted_sentences: r.total_highlighted(),
            total_sentences: r.total_sentences(),
            highlight_proportion: format_fraction(r.total_highlighted(), r.total_sentences()),
            micro_label_counts: r.micro_label_counts.clone(),
        }
    }
}

#[derive(Debug)]
pub struct Store {
    root: PathBuf,
    tmp_counter: AtomicU64,
}

fn safe_segment(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        for sub in ["applicants", "letters", "jobs", "traces"] {
            std::fs::create_dir_all(root.join(sub))?;
        }
        Ok(Self {
            root,
            tmp_counter: AtomicU64::new(0),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn applicant_dir(&self, applicant_id: &str) -> PathBuf {
        self.root.join("applicants").join(hex::encode(applicant_id.as_bytes()))
    }

    /// Atomically replaces `path` with `bytes`.
    pub fn write_atomic(&self, path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
        let dir = path.parent().expect("store paths have a parent");
        std::fs::create_dir_all(dir)?;
        let n = self.tmp_counter.fetch_add(1, Ordering::SeqCst);
        let tmp = dir.join(format!(".tmp-{}-{n}", std::process::id()));
        {
            let mut f = std::fs::File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_all()?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    fn read_opt(path: &Path) -> Result<Option<Vec<u8>>, StoreError> {
        match std::fs::read(path) {
            Ok(b) => Ok(Some(b)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Option<T>, StoreError> {
        Self::read_opt(path)?
            .map(|b| {
                serde_json::from_slice(&b).map_err(|source| StoreError::Corrupt {
                    path: path.to_owned(),
                    source,
                })
            })
            .transpose()
    }

    fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
        let mut v = serde_json::to_vec_pretty(value).expect("store records serialise");
        v.push(b'\n');
        v
    }

    pub fn put_job(&self, job: &JobRecord) -> Result<(), StoreError> {
        self.write_atomic(&self.root.join("jobs").join(format!("{}.json", job.job_id)), &Self::to_json(job))
    }

    pub fn job(&self, job_id: &str) -> Result<Option<JobRecord>, StoreError> {
        if !safe_segment(job_id) {
            return Ok(None);
        }
        Self::read_json(&self.root.join("jobs").join(format!("{job_id}.json")))
    }

    pub fn jobs(&self) -> Result<Vec<JobRecord>, StoreError> {
        let mut out = Vec::new();
        for entry in std::fs::read_dir(self.root.join("jobs"))? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "json") {
                if let Some(job) = Self::read_json(&path)? {
                    out.push(job);
                }
            }
        }
        out.sort_by(|a: &JobRecord, b| a.job_id.cmp(&b.job_id));
        Ok(out)
    }

    pub fn put_letter(&self, letter: &LetterView) -> Result<(), StoreError> {
        self.write_atomic(
            &self.root.join("letters").join(format!("{}.json", letter.letter_id)),
            &Self::to_json(letter),
        )
    }

    pub fn letter_bytes(&self, letter_id: &str) -> Result<Option<Vec<u8>>, StoreError> {
        if !safe_segment(letter_id) {
            return Ok(None);
        }
        Self::read_opt(&self.root.join("letters").join(format!("{letter_id}.json")))
    }

    pub fn put_trace(&self, job_id: &str, bytes: &[u8]) -> Result<(), StoreError> {
        self.write_atomic(&self.root.join("traces").join(format!("{job_id}.ndjson")), bytes)
    }

    /// Writes the report, then the applicant record that makes it visible.
    pub fn put_report(&self, stored: &StoredApplicant, report: &ApplicantReport) -> Result<(), StoreError> {
        let dir = self.applicant_dir(&stored.applicant_id);
        self.write_atomic(&dir.join("report.json"), report.to_json().as_bytes())?;
        self.write_atomic(&dir.join("applicant.json"), &Self::to_json(stored))
    }

    pub fn applicant(&self, applicant_id: &str) -> Result<Option<StoredApplicant>, StoreError> {
        Self::read_json(&self.applicant_dir(applicant_id).join("applicant.json"))
    }

    pub fn report_bytes(&self, applicant_id: &str) -> Result<Option<Vec<u8>>, StoreError> {
        if self.applicant(applicant_id)?.is_none() {
            return Ok(None);
        }
        Self::read_opt(&self.applicant_dir(applicant_id).join("report.json"))
    }

    pub fn report(&self, applicant_id: &str) -> Result<Option<ApplicantReport>, StoreError> {
        if self.applicant(applicant_id)?.is_none() {
            return Ok(None);
        }
        Self::read_json(&self.applicant_dir(applicant_id).join("report.json"))
    }

    /// Rows for every applicant with a completed report, by applicant id.
    pub fn applicant_rows(&self) -> Result<Vec<ApplicantRow>, StoreError> {
        let mut rows = Vec::new();
        for entry in std::fs::read_dir(self.root.join("applicants"))? {
            let dir = entry?.path();
            let stored: Option<StoredApplicant> = Self::read_json(&dir.join("applicant.json"))?;
            if stored.is_none() {
                continue;
            }
            if let Some(report) = Self::read_json::<ApplicantReport>(&dir.join("report.json"))? {
                rows.push(ApplicantRow::from_report(&report));
            }
        }
        rows.sort_by(|a, b| a.applicant_id.cmp(&b.applicant_id));
        Ok(rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let p = dir.path().join("x.json");
        store.write_atomic(&p, b"one").unwrap();
        store.write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        let leftovers = std::fs::read_dir(dir.path())
            .unwrap()
            .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with(".tmp"))
            .count();
        assert_eq!(leftovers, 0);
    }

    #[test]
    fn unsafe_ids_are_not_found() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        assert!(store.letter_bytes("../jobs/x").unwrap().is_none());
        assert!(store.job("..").unwrap().is_none());
        assert!(store.report_bytes("nobody").unwrap().is_none());
    }
}
