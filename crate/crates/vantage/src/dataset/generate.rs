//! Two-part dataset generation: a large clean-render split for geometric
//! supervision and a smaller appearance-augmented split with procedural
//! backgrounds and jittered object colors. Fully reproducible from one seed
//! via per-sample derived RNG streams.

use crate::dataset::captions::{
    augmented_caption_words, base_caption_words, caption_ids_of, caption_string,
    standard_vocabulary,
};
use crate::dataset::records::{
    DatasetManifest, MetaRecord, ObjectViews, SplitKind, SplitStats, write_jsonl,
};
use crate::error::{Error, Result};
use crate::geometry::records::{PoseRecord, RangesRecord};
use crate::geometry::{sample_pose, SamplingRanges};
use crate::nn::ops::batch_map;
use crate::nn::rng::rng_for;
use crate::render::{
    color_by_name, make_object, render, Background, ImageBuf, ObjectKind, RenderSpec,
    NAMED_BACKGROUNDS,
};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub kind: String,
    pub color: String,
}

impl ObjectSpec {
    pub fn new(kind: &str, color: &str) -> Self {
        Self {
            kind: kind.into(),
            color: color.into(),
        }
    }

    fn resolve(&self) -> Result<(ObjectKind, [u8; 3])> {
        Ok((ObjectKind::from_name(&self.kind)?, color_by_name(&self.color)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedConfig {
    pub objects: Vec<ObjectSpec>,
    pub views_per_object: usize,
    #[serde(default = "default_one")]
    pub appearance_variants: usize,
}

fn default_one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub seed: u64,
    #[serde(default = "default_image_size")]
    pub image_width: usize,
    #[serde(default = "default_image_size")]
    pub image_height: usize,
    pub objects: Vec<ObjectSpec>,
    pub views_per_object: usize,
    pub augmented: AugmentedConfig,
    #[serde(default)]
    pub ranges: RangesRecord,
}

fn default_image_size() -> usize {
    64
}

const COLOR_JITTER: i32 = 24;

fn render_spec(config_w: usize, config_h: usize, background: Background) -> RenderSpec {
    RenderSpec {
        width: config_w,
        height: config_h,
        background,
        ..RenderSpec::default()
    }
}

struct PreparedSample {
    image: ImageBuf,
    record: MetaRecord,
}

/// Renders `views_per_object` transparent-background samples per object.
pub fn generate_rendered_split(
    objects: &[ObjectSpec],
    views_per_object: usize,
    ranges: &SamplingRanges<f64>,
    seed: u64,
    image_size: (usize, usize),
    out_dir: &Path,
) -> Result<(SplitStats, Vec<MetaRecord>)> {
    if objects.is_empty() {
        return Err(Error::config("rendered split needs at least one object"));
    }
    if views_per_object == 0 {
        return Err(Error::config("views_per_object must be >= 1"));
    }
    ranges.validate()?;
    // Ids only; embeddings are irrelevant here.
    let mut vocab_rng = rng_for(0, "vocab-ids", &[]);
    let vocab = standard_vocabulary::<f64>(1, &mut vocab_rng);

    let resolved: Vec<(ObjectKind, [u8; 3])> = objects
        .iter()
        .map(|o| o.resolve())
        .collect::<Result<_>>()?;
    let total = objects.len() * views_per_object;
    let samples: Vec<Result<PreparedSample>> = batch_map(total, |flat| {
        let obj_idx = flat / views_per_object;
        let view_idx = flat % views_per_object;
        let (kind, color) = resolved[obj_idx];
        let mut rng = rng_for(seed, "rendered-pose", &[obj_idx as u64, view_idx as u64]);
        let pose = sample_pose(&mut rng, ranges)?;
        let object = make_object::<f64>(kind, color);
        let spec = render_spec(image_size.0, image_size.1, Background::Transparent);
        let image = render(&object, &pose, &spec)?;
        let words = base_caption_words(&objects[obj_idx].color, kind);
        let caption_ids = caption_ids_of(&vocab, &words)?;
        let record = MetaRecord {
            image: format!("images/{flat:06}.png"),
            object: kind.name().into(),
            color: objects[obj_idx].color.clone(),
            background: None,
            caption: caption_string(&words),
            caption_ids,
            object_span_end: 5,
            split: SplitKind::Rendered,
            pose: PoseRecord::from_pose(&pose),
        };
        Ok(PreparedSample { image, record })
    });

    write_split(out_dir, SplitKind::Rendered, samples, objects, views_per_object)
}

/// Renders the appearance-augmented split: same pose pipeline, but each
/// sample gets a procedural background, a jittered object color, and a
/// caption extended with the background phrase.
pub fn generate_augmented_split(
    objects: &[ObjectSpec],
    views_per_object: usize,
    appearance_variants: usize,
    ranges: &SamplingRanges<f64>,
    seed: u64,
    image_size: (usize, usize),
    out_dir: &Path,
) -> Result<(SplitStats, Vec<MetaRecord>)> {
    if objects.is_empty() {
        return Err(Error::config("augmented split needs a non-empty object subset"));
    }
    if views_per_object == 0 || appearance_variants == 0 {
        return Err(Error::config("augmented views and variants must be >= 1"));
    }
    ranges.validate()?;
    let mut vocab_rng = rng_for(0, "vocab-ids", &[]);
    let vocab = standard_vocabulary::<f64>(1, &mut vocab_rng);

    let resolved: Vec<(ObjectKind, [u8; 3])> = objects
        .iter()
        .map(|o| o.resolve())
        .collect::<Result<_>>()?;
    let per_object = views_per_object * appearance_variants;
    let total = objects.len() * per_object;
    let samples: Vec<Result<PreparedSample>> = batch_map(total, |flat| {
        let obj_idx = flat / per_object;
        let rest = flat % per_object;
        let view_idx = rest / appearance_variants;
        let variant = rest % appearance_variants;
        let (kind, base_color) = resolved[obj_idx];

        // The pose stream does not depend on appearance choices, so the
        // augmented image shares its pose with the underlying clean render.
        let mut pose_rng = rng_for(
            seed,
            "augmented-pose",
            &[obj_idx as u64, view_idx as u64],
        );
        let pose = sample_pose(&mut pose_rng, ranges)?;

        let mut app_rng = rng_for(
            seed,
            "augmented-appearance",
            &[obj_idx as u64, view_idx as u64, variant as u64],
        );
        let bg = &NAMED_BACKGROUNDS[app_rng.random_range(0..NAMED_BACKGROUNDS.len())];
        let mut color = base_color;
        for c in color.iter_mut() {
            let jittered = *c as i32 + app_rng.random_range(-COLOR_JITTER..=COLOR_JITTER);
            *c = jittered.clamp(0, 255) as u8;
        }

        let object = make_object::<f64>(kind, color);
        let spec = render_spec(image_size.0, image_size.1, Background::Style(bg.style));
        let image = render(&object, &pose, &spec)?;
        let words = augmented_caption_words(&objects[obj_idx].color, kind, bg);
        let caption_ids = caption_ids_of(&vocab, &words)?;
        let record = MetaRecord {
            image: format!("images/{flat:06}.png"),
            object: kind.name().into(),
            color: objects[obj_idx].color.clone(),
            background: Some(bg.name.into()),
            caption: caption_string(&words),
            caption_ids,
            object_span_end: 5,
            split: SplitKind::Augmented,
            pose: PoseRecord::from_pose(&pose),
        };
        Ok(PreparedSample { image, record })
    });

    write_split(out_dir, SplitKind::Augmented, samples, objects, per_object)
}

fn write_split(
    out_dir: &Path,
    split: SplitKind,
    samples: Vec<Result<PreparedSample>>,
    objects: &[ObjectSpec],
    views_per_object: usize,
) -> Result<(SplitStats, Vec<MetaRecord>)> {
    let split_dir = out_dir.join(split.dir_name());
    std::fs::create_dir_all(split_dir.join("images"))?;
    let mut records = Vec::with_capacity(samples.len());
    for sample in samples {
        let sample = sample?;
        sample.image.save_png(&split_dir.join(&sample.record.image))?;
        records.push(sample.record);
    }
    write_jsonl(&split_dir.join("meta.jsonl"), &records)?;
    let stats = SplitStats {
        count: records.len(),
        per_object: objects
            .iter()
            .map(|o| ObjectViews {
                object: o.kind.clone(),
                color: o.color.clone(),
                views: views_per_object,
            })
            .collect(),
    };
    Ok((stats, records))
}

/// Generates both splits and the manifest.
pub fn generate_dataset(config: &DatasetConfig, out_dir: &Path) -> Result<DatasetManifest> {
    let ranges: SamplingRanges<f64> = config.ranges.to_ranges();
    let image_size = (config.image_width, config.image_height);
    let (rendered, _) = generate_rendered_split(
        &config.objects,
        config.views_per_object,
        &ranges,
        config.seed,
        image_size,
        out_dir,
    )?;
    let (augmented, _) = generate_augmented_split(
        &config.augmented.objects,
        config.augmented.views_per_object,
        config.augmented.appearance_variants,
        &ranges,
        config.seed,
        image_size,
        out_dir,
    )?;
    let manifest = DatasetManifest {
        version: "1".into(),
        seed: config.seed,
        image_width: config.image_width,
        image_height: config.image_height,
        ranges: config.ranges,
        rendered,
        augmented,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(out_dir.join("manifest.json"), text)?;
    Ok(manifest)
}
