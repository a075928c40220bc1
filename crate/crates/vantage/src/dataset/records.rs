//! Serialized dataset records: one JSON object per line beside the image
//! directory, plus a top-level manifest.

use crate::error::{Error, Result};
use crate::geometry::records::{PoseRecord, RangesRecord};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitKind {
    Rendered,
    Augmented,
}

impl SplitKind {
    pub fn dir_name(&self) -> &'static str {
        match self {
            SplitKind::Rendered => "rendered",
            SplitKind::Augmented => "augmented",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaRecord {
    /// Image path relative to the split directory.
    pub image: String,
    pub object: String,
    pub color: String,
    pub background: Option<String>,
    pub caption: String,
    pub caption_ids: Vec<u32>,
    pub object_span_end: usize,
    pub split: SplitKind,
    pub pose: PoseRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectViews {
    pub object: String,
    pub color: String,
    pub views: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitStats {
    pub count: usize,
    pub per_object: Vec<ObjectViews>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: String,
    pub seed: u64,
    pub image_width: usize,
    pub image_height: usize,
    pub ranges: RangesRecord,
    pub rendered: SplitStats,
    pub augmented: SplitStats,
}

impl DatasetManifest {
    pub fn radius_range(&self) -> (f64, f64) {
        (self.ranges.radius_min, self.ranges.radius_max)
    }

    pub fn object_kinds(&self) -> Vec<String> {
        let mut kinds: Vec<String> = self
            .rendered
            .per_object
            .iter()
            .chain(self.augmented.per_object.iter())
            .map(|o| o.object.clone())
            .collect();
        kinds.sort();
        kinds.dedup();
        kinds
    }
}

/// Writes records as line-delimited JSON.
pub fn write_jsonl(path: &std::path::Path, records: &[MetaRecord]) -> Result<()> {
    let mut out = String::new();
    for rec in records {
        out.push_str(&serde_json::to_string(rec)?);
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_jsonl(path: &std::path::Path) -> Result<Vec<MetaRecord>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_record() -> MetaRecord {
        MetaRecord {
            image: "images/000012.png".into(),
            object: "arrowcar".into(),
            color: "red".into(),
            background: Some("flatgray".into()),
            caption: "a photo of red arrowcar on a flat gray background".into(),
            caption_ids: vec![1, 2, 3, 4, 5, 6, 7, 8, 9, 10],
            object_span_end: 5,
            split: SplitKind::Augmented,
            pose: PoseRecord {
                azimuth_deg: 123.45,
                elevation_deg: 10.0,
                radius: 1.62,
                pitch_deg: -3.0,
                yaw_deg: 2.5,
            },
        }
    }

    #[test]
    fn jsonl_round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("meta.jsonl");
        let records = vec![sample_record(); 3];
        write_jsonl(&path, &records).unwrap();
        let bytes_a = std::fs::read(&path).unwrap();
        let loaded = read_jsonl(&path).unwrap();
        assert_eq!(loaded, records);
        write_jsonl(&path, &loaded).unwrap();
        let bytes_b = std::fs::read(&path).unwrap();
        assert_eq!(bytes_a, bytes_b);
    }

    #[test]
    fn manifest_round_trip_is_byte_identical() {
        let manifest = DatasetManifest {
            version: "1".into(),
            seed: 42,
            image_width: 64,
            image_height: 64,
            ranges: RangesRecord::default(),
            rendered: SplitStats {
                count: 2,
                per_object: vec![ObjectViews {
                    object: "arrowcar".into(),
                    color: "red".into(),
                    views: 2,
                }],
            },
            augmented: SplitStats {
                count: 0,
                per_object: vec![],
            },
        };
        let a = serde_json::to_string_pretty(&manifest).unwrap();
        let back: DatasetManifest = serde_json::from_str(&a).unwrap();
        assert_eq!(back, manifest);
        let b = serde_json::to_string_pretty(&back).unwrap();
        assert_eq!(a, b);
    }
}
