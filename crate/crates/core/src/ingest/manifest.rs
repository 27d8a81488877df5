//! Manifest files: first line declares the class names, every further line is
//! `path,subject_id,label_name`. Label names map to indices in declaration
//! order.

use super::{IngestError, Manifest, ManifestEntry};
use std::collections::HashSet;
use std::fs;
use std::path::Path;

pub fn load_manifest<P: AsRef<Path>>(path: P) -> Result<Manifest, IngestError> {
    let text = fs::read_to_string(path)?;
    parse_manifest(&text)
}

fn parse_manifest(text: &str) -> Result<Manifest, IngestError> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));

    let class_line = lines.next().ok_or(IngestError::EmptyManifest)?;
    let class_names: Vec<String> = class_line.split(',').map(|s| s.trim().to_string()).collect();
    if class_names.iter().any(|c| c.is_empty()) {
        return Err(IngestError::MalformedHeader("empty class name".into()));
    }

    let mut entries = Vec::new();
    let mut seen_paths = HashSet::new();
    for line in lines {
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(IngestError::MalformedHeader(format!(
                "manifest line {line:?}: expected path,subject,label"
            )));
        }
        let (path, subject_id, label_name) = (parts[0], parts[1], parts[2]);
        if subject_id.is_empty() {
            return Err(IngestError::MalformedHeader(format!(
                "manifest line {line:?}: empty subject id"
            )));
        }
        let label = class_names
            .iter()
            .position(|c| c == label_name)
            .ok_or_else(|| IngestError::UnknownLabel(label_name.to_string()))?;
        if !seen_paths.insert(path.to_string()) {
            return Err(IngestError::DuplicatePath(path.to_string()));
        }
        entries.push(ManifestEntry {
            path: path.to_string(),
            subject_id: subject_id.to_string(),
            label,
        });
    }
    if entries.is_empty() {
        return Err(IngestError::EmptyManifest);
    }
    Ok(Manifest { class_names, entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_map_to_declaration_order() {
        let m = parse_manifest("HC,AD\ns1.edf,subj01,AD\ns2.edf,subj02,HC\n").unwrap();
        assert_eq!(m.class_names, vec!["HC", "AD"]);
        assert_eq!(m.entries[0].label, 1);
        assert_eq!(m.entries[1].label, 0);
        assert_eq!(m.entries[0].subject_id, "subj01");
    }

    #[test]
    fn unknown_label_rejected() {
        match parse_manifest("HC,AD\ns1.edf,subj01,XX\n") {
            Err(IngestError::UnknownLabel(l)) => assert_eq!(l, "XX"),
            other => panic!("expected UnknownLabel, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_path_rejected() {
        match parse_manifest("HC,AD\ns1.edf,a,HC\ns1.edf,b,AD\n") {
            Err(IngestError::DuplicatePath(p)) => assert_eq!(p, "s1.edf"),
            other => panic!("expected DuplicatePath, got {other:?}"),
        }
    }

    #[test]
    fn empty_manifest_rejected() {
        assert!(matches!(parse_manifest(""), Err(IngestError::EmptyManifest)));
        assert!(matches!(parse_manifest("HC,AD\n"), Err(IngestError::EmptyManifest)));
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let m = parse_manifest("# dataset\nHC,AD\n\n# block\ns1.edf,a,HC\n").unwrap();
        assert_eq!(m.entries.len(), 1);
    }
}
