//! Dataset manifests: CSV `path,subject_id`, one image per line.
//!
//! Blank lines and `#` comments are ignored, except that a
//! `# source: synthetic` comment tags the dataset as generated. An optional
//! `path,subject_id` header line is accepted. Relative paths resolve against
//! the manifest's directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{IrisError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Synthetic,
    External,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub subject: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub source: Source,
}

impl DatasetManifest {
    /// Number of distinct subjects.
    pub fn class_count(&self) -> usize {
        self.per_subject().len()
    }

    /// Image count per subject id.
    pub fn per_subject(&self) -> BTreeMap<u32, usize> {
        let mut m = BTreeMap::new();
        for e in &self.entries {
            *m.entry(e.subject).or_insert(0) += 1;
        }
        m
    }

    /// Serializes with paths relative to `base` where possible.
    pub fn to_csv(&self, base: Option<&Path>) -> String {
        let mut s = String::new();
        if self.source == Source::Synthetic {
            s.push_str("# source: synthetic\n");
        }
        s.push_str("path,subject_id\n");
        for e in &self.entries {
            let p = base
                .and_then(|b| e.path.strip_prefix(b).ok())
                .unwrap_or(&e.path);
            let _ = writeln!(s, "{},{}", p.display(), e.subject);
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let base = path.parent();
        fs::write(path, self.to_csv(base)).map_err(|e| IrisError::io(path, e))
    }

    /// Checks contiguous ids `0..C` and at least two images per subject.
    pub fn validate(&self) -> Result<()> {
        let counts = self.per_subject();
        if counts.is_empty() {
            return Err(IrisError::EmptyDataset);
        }
        for (expected, (&id, _)) in counts.iter().enumerate() {
            if id as usize != expected {
                let max = *counts.keys().last().expect("non-empty");
                return Err(IrisError::Contiguity(format!(
                    "subject id {expected} is missing (ids span 0..={max})"
                )));
            }
        }
        if let Some((&subject, &count)) = counts.iter().find(|(_, &c)| c < 2) {
            return Err(IrisError::TooFewImages { subject, count });
        }
        Ok(())
    }
}

/// Parses manifest text. `base` resolves relative paths.
pub fn parse_manifest(text: &str, base: &Path) -> Result<DatasetManifest> {
    let mut entries = Vec::new();
    let mut source = Source::External;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if comment.trim() == "source: synthetic" {
                source = Source::Synthetic;
            }
            continue;
        }
        if line == "path,subject_id" {
            continue;
        }
        let (path, id) = line.rsplit_once(',').ok_or(IrisError::Parse {
            line: line_no,
            msg: format!("expected `path,subject_id`, found `{line}`"),
        })?;
        let subject = id.trim().parse::<u32>().map_err(|_| IrisError::Parse {
            line: line_no,
            msg: format!("subject id `{}` is not a non-negative integer", id.trim()),
        })?;
        let path = Path::new(path.trim());
        let path = if path.is_absolute() {
            path.to_path_buf()
        } else {
            base.join(path)
        };
        entries.push(ManifestEntry { path, subject });
    }
    Ok(DatasetManifest { entries, source })
}

/// Reads and validates a manifest file: every image must exist, ids must be
/// contiguous from zero, and every subject needs at least two images.
pub fn ingest(manifest_path: &Path) -> Result<DatasetManifest> {
    if !manifest_path.exists() {
        return Err(IrisError::MissingFile(manifest_path.to_path_buf()));
    }
    let text = fs::read_to_string(manifest_path).map_err(|e| IrisError::io(manifest_path, e))?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let manifest = parse_manifest(&text, base)?;
    if let Some(missing) = manifest.entries.iter().find(|e| !e.path.exists()) {
        return Err(IrisError::MissingFile(missing.path.clone()));
    }
    manifest.validate()?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_error_names_line() {
        let err = parse_manifest("a.pgm,0\nimg.pgm,abc\n", Path::new("/x")).unwrap_err();
        match err {
            IrisError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn gap_in_ids_reported() {
        let m = parse_manifest("a,0\nb,0\nc,1\nd,1\ne,3\nf,3\n", Path::new("/")).unwrap();
        match m.validate().unwrap_err() {
            IrisError::Contiguity(msg) => assert!(msg.contains("subject id 2"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn single_image_subject_rejected() {
        let m = parse_manifest("a,0\nb,0\nc,1\n", Path::new("/")).unwrap();
        assert!(matches!(
            m.validate(),
            Err(IrisError::TooFewImages { subject: 1, count: 1 })
        ));
    }

    #[test]
    fn header_comments_and_relative_paths() {
        let text = "# source: synthetic\npath,subject_id\n\nimgs/a.pgm,0\n/abs/b.pgm,1\n";
        let m = parse_manifest(text, Path::new("/data")).unwrap();
        assert_eq!(m.source, Source::Synthetic);
        assert_eq!(m.entries[0].path, PathBuf::from("/data/imgs/a.pgm"));
        assert_eq!(m.entries[1].path, PathBuf::from("/abs/b.pgm"));
        let back = parse_manifest(&m.to_csv(Some(Path::new("/data"))), Path::new("/data")).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn missing_file_reported() {
        let dir = tempfile::tempdir().unwrap();
        let mpath = dir.path().join("m.csv");
        fs::write(&mpath, "nope.pgm,0\n").unwrap();
        assert!(matches!(ingest(&mpath), Err(IrisError::MissingFile(p)) if p.ends_with("nope.pgm")));
        assert!(matches!(ingest(&dir.path().join("absent.csv")), Err(IrisError::MissingFile(_))));
    }

    #[test]
    fn large_manifest_counts() {
        let dir = tempfile::tempdir().unwrap();
        let mut text = String::from("path,subject_id\n");
        for s in 0..100 {
            for k in 0..5 {
                let name = format!("{s}_{k}.pgm");
                fs::write(dir.path().join(&name), b"").unwrap();
                text.push_str(&format!("{name},{s}\n"));
            }
        }
        let mpath = dir.path().join("m.csv");
        fs::write(&mpath, text).unwrap();
        let m = ingest(&mpath).unwrap();
        assert_eq!(m.entries.len(), 500);
        assert_eq!(m.class_count(), 100);
    }
}
