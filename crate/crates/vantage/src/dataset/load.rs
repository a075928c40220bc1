//! Loading a generated dataset back from disk.

use crate::dataset::records::{read_jsonl, DatasetManifest, MetaRecord, SplitKind};
use crate::error::{Error, Result};
use crate::render::ImageBuf;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub root: PathBuf,
    pub manifest: DatasetManifest,
    pub rendered: Vec<MetaRecord>,
    pub augmented: Vec<MetaRecord>,
}

impl LoadedDataset {
    pub fn load(root: &Path) -> Result<Self> {
        let manifest_text = std::fs::read_to_string(root.join("manifest.json"))?;
        let manifest: DatasetManifest = serde_json::from_str(&manifest_text)?;
        let rendered = read_jsonl(&root.join("rendered/meta.jsonl"))?;
        let augmented = read_jsonl(&root.join("augmented/meta.jsonl"))?;
        if rendered.len() != manifest.rendered.count {
            return Err(Error::config(format!(
                "manifest says {} rendered records, found {}",
                manifest.rendered.count,
                rendered.len()
            )));
        }
        if augmented.len() != manifest.augmented.count {
            return Err(Error::config(format!(
                "manifest says {} augmented records, found {}",
                manifest.augmented.count,
                augmented.len()
            )));
        }
        Ok(Self {
            root: root.to_path_buf(),
            manifest,
            rendered,
            augmented,
        })
    }

    pub fn records(&self, split: SplitKind) -> &[MetaRecord] {
        match split {
            SplitKind::Rendered => &self.rendered,
            SplitKind::Augmented => &self.augmented,
        }
    }

    pub fn image_path(&self, record: &MetaRecord) -> PathBuf {
        self.root.join(record.split.dir_name()).join(&record.image)
    }

    pub fn load_image(&self, record: &MetaRecord) -> Result<ImageBuf> {
        ImageBuf::load_png(&self.image_path(record))
    }

    pub fn radius_range(&self) -> (f64, f64) {
        self.manifest.radius_range()
    }
}

/// Training and evaluation pose streams must come from different master
/// seeds or the "held-out" poses would replay training poses.
pub fn check_seed_disjoint(manifest: &DatasetManifest, eval_seed: u64) -> Result<()> {
    if manifest.seed == eval_seed {
        return Err(Error::Eval(format!(
            "evaluation seed {eval_seed} collides with the dataset seed; pick a different seed"
        )));
    }
    Ok(())
}

/// Object kinds appearing in both the manifest and the given list.
pub fn kinds_overlap(manifest: &DatasetManifest, kinds: &[String]) -> Vec<String> {
    let trained = manifest.object_kinds();
    kinds
        .iter()
        .filter(|k| trained.contains(k))
        .cloned()
        .collect()
}
