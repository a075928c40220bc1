//! Regressor training on pose-labeled image datasets with per-dataset label
//! masks and a 10% validation holdout each.

use crate::dataset::records::SplitKind;
use crate::dataset::LoadedDataset;
use crate::error::{Error, Result};
use crate::geometry::circular::angular_difference;
use crate::geometry::encoding::encode_factorized;
use crate::geometry::CameraPose;
use crate::nn::checkpoint::{assign_named, load_tensors, save_tensors, slot_views};
use crate::nn::optim::{clip_global_norm, zero_all_grads, AdamW, AdamWConfig, ParamGroup};
use crate::nn::rng::rng_for;
use crate::nn::schedule::WarmupCosine;
use crate::regressor::model::{PoseRegressor, RegressorConfig};
use crate::regressor::decode_estimate;
use crate::render::image::COMPOSITE_BG;
use crate::scalar::Real;

use ndarray::{s, Array2, Array4};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressorTrainConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub lr: f64,
    #[serde(default = "default_warmup")]
    pub warmup_frac: f64,
    #[serde(default = "default_clip")]
    pub grad_clip_norm: f64,
    #[serde(default = "default_wd")]
    pub weight_decay: f64,
    #[serde(default = "default_val_fraction")]
    pub val_fraction: f64,
    pub seed: u64,
}

fn default_warmup() -> f64 {
    0.01
}

fn default_clip() -> f64 {
    1.0
}

fn default_wd() -> f64 {
    1e-4
}

fn default_val_fraction() -> f64 {
    0.1
}

impl Default for RegressorTrainConfig {
    fn default() -> Self {
        Self {
            iterations: 1500,
            batch_size: 32,
            lr: 1e-3,
            warmup_frac: 0.01,
            grad_clip_norm: 1.0,
            weight_decay: 1e-4,
            val_fraction: 0.1,
            seed: 0,
        }
    }
}

/// In-memory training source: images, factorized targets, the poses they
/// came from, and which components carry labels.
pub struct RegressorDataset<R: Real> {
    pub name: String,
    pub images: Array4<R>,
    pub targets: Array2<R>,
    pub poses: Vec<CameraPose<f64>>,
    pub mask: [bool; 6],
}

/// Loads one or more dataset splits into a regressor training source.
pub fn build_regressor_dataset<R: Real>(
    data: &LoadedDataset,
    splits: &[SplitKind],
    name: &str,
    mask: [bool; 6],
) -> Result<RegressorDataset<R>> {
    let radius_range = data.radius_range();
    let (w, h) = (data.manifest.image_width, data.manifest.image_height);
    if w != h {
        return Err(Error::config("regressor expects square images"));
    }
    let records: Vec<_> = splits
        .iter()
        .flat_map(|s| data.records(*s).iter())
        .collect();
    if records.is_empty() {
        return Err(Error::config(format!("dataset {name} is empty")));
    }
    let mut images = Array4::zeros((records.len(), 3, h, w));
    let mut targets = Array2::zeros((records.len(), 6));
    let mut poses = Vec::with_capacity(records.len());
    for (i, rec) in records.iter().enumerate() {
        let img = data.load_image(rec)?;
        let tensor = img.to_signed_tensor::<R>(COMPOSITE_BG);
        images.slice_mut(s![i, .., .., ..]).assign(&tensor);
        let pose: CameraPose<f64> = rec.pose.to_pose()?;
        let enc = encode_factorized(&pose, radius_range)?;
        for (j, v) in enc.data.iter().enumerate() {
            targets[[i, j]] = R::of(*v);
        }
        poses.push(pose);
    }
    Ok(RegressorDataset {
        name: name.to_string(),
        images,
        targets,
        poses,
        mask,
    })
}

pub use crate::stats::ComponentStats;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetErrors {
    pub dataset: String,
    pub count: usize,
    pub degenerate: usize,
    pub azimuth_deg: ComponentStats,
    pub elevation_deg: ComponentStats,
    pub radius: ComponentStats,
    pub yaw_deg: ComponentStats,
    pub pitch_deg: ComponentStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub rows: Vec<DatasetErrors>,
}

impl ValidationReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "dataset,count,degenerate,azimuth_mean,azimuth_median,elevation_mean,elevation_median,radius_mean,radius_median,yaw_mean,yaw_median,pitch_mean,pitch_median\n",
        );
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                row.dataset,
                row.count,
                row.degenerate,
                row.azimuth_deg.mean,
                row.azimuth_deg.median,
                row.elevation_deg.mean,
                row.elevation_deg.median,
                row.radius.mean,
                row.radius.median,
                row.yaw_deg.mean,
                row.yaw_deg.median,
                row.pitch_deg.mean,
                row.pitch_deg.median,
            ));
        }
        out
    }

    pub fn row(&self, dataset: &str) -> Option<&DatasetErrors> {
        self.rows.iter().find(|r| r.dataset == dataset)
    }
}

/// Per-row variant of the masked loss for batches that mix datasets with
/// different label masks.
fn masked_sse_loss_rows<R: Real>(
    pred: &Array2<R>,
    target: &Array2<R>,
    masks: &[[bool; 6]],
) -> (R, Array2<R>) {
    let batch = pred.nrows();
    let inv_b = R::one() / R::of(batch as f64);
    let mut loss = R::zero();
    let mut grad = Array2::zeros(pred.raw_dim());
    for i in 0..batch {
        for j in 0..6 {
            if masks[i][j] {
                let diff = pred[[i, j]] - target[[i, j]];
                loss += diff * diff * inv_b;
                grad[[i, j]] = R::of(2.0) * diff * inv_b;
            }
        }
    }
    (loss, grad)
}

/// Trains the regressor; returns the model, its per-dataset validation
/// errors, and the loss curve.
pub fn train_regressor<R: Real>(
    cfg: RegressorConfig,
    tcfg: &RegressorTrainConfig,
    datasets: &[RegressorDataset<R>],
    radius_range: (f64, f64),
) -> Result<(PoseRegressor<R>, ValidationReport, Vec<f64>)> {
    if datasets.is_empty() {
        return Err(Error::config("regressor training needs at least one dataset"));
    }
    for ds in datasets {
        if !ds.mask.iter().any(|&m| m) {
            return Err(Error::config(format!(
                "dataset {} has an all-false label mask",
                ds.name
            )));
        }
    }
    let mut init_rng = rng_for(tcfg.seed, "regressor-init", &[]);
    let mut model = PoseRegressor::<R>::new(cfg, &mut init_rng);

    // Per-dataset 10% holdout, deterministic in the seed.
    let mut train_entries: Vec<(usize, usize)> = Vec::new();
    let mut val_entries: Vec<Vec<usize>> = Vec::new();
    for (d, ds) in datasets.iter().enumerate() {
        let n = ds.poses.len();
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = rng_for(tcfg.seed, "regressor-holdout", &[d as u64]);
        order.shuffle(&mut rng);
        let n_val = ((n as f64 * tcfg.val_fraction).round() as usize).clamp(1, n.saturating_sub(1).max(1));
        let (train_idx, val_idx) = order.split_at(n - n_val);
        train_entries.extend(train_idx.iter().map(|&i| (d, i)));
        val_entries.push(val_idx.to_vec());
    }
    if train_entries.len() < tcfg.batch_size {
        return Err(Error::config("fewer training samples than one batch"));
    }

    let schedule = WarmupCosine::new(tcfg.iterations, tcfg.warmup_frac);
    let mut opt = AdamW::<R>::new(AdamWConfig {
        weight_decay: tcfg.weight_decay,
        ..AdamWConfig::default()
    });
    let mut epoch_rng = rng_for(tcfg.seed, "regressor-epochs", &[]);
    let mut pool = train_entries.clone();
    pool.shuffle(&mut epoch_rng);
    let mut cursor = 0usize;
    let img_hw = datasets[0].images.dim().2;
    let mut losses = Vec::with_capacity(tcfg.iterations);

    for iter in 0..tcfg.iterations {
        if cursor + tcfg.batch_size > pool.len() {
            pool.shuffle(&mut epoch_rng);
            cursor = 0;
        }
        let batch = &pool[cursor..cursor + tcfg.batch_size];
        cursor += tcfg.batch_size;

        let mut images = Array4::zeros((batch.len(), 3, img_hw, img_hw));
        let mut targets = Array2::zeros((batch.len(), 6));
        let mut masks = Vec::with_capacity(batch.len());
        for (row, &(d, i)) in batch.iter().enumerate() {
            images
                .slice_mut(s![row, .., .., ..])
                .assign(&datasets[d].images.slice(s![i, .., .., ..]));
            targets
                .row_mut(row)
                .assign(&datasets[d].targets.row(i));
            masks.push(datasets[d].mask);
        }

        let (pred, cache) = model.forward_train(&images)?;
        let (loss, dpred) = masked_sse_loss_rows(&pred, &targets, &masks);
        let loss_f = loss.to_f64_();
        if !loss_f.is_finite() {
            return Err(Error::Divergence { iteration: iter });
        }
        losses.push(loss_f);
        model.backward(&cache, &dpred);

        let mut slots = Vec::new();
        model.collect(&mut slots);
        let mut groups = vec![ParamGroup {
            lr: schedule.lr_at(iter + 1, tcfg.lr),
            params: slots,
        }];
        clip_global_norm(&mut groups, tcfg.grad_clip_norm);
        opt.step(&mut groups)?;
        zero_all_grads(&mut groups);
    }

    let report = validate(&model, datasets, &val_entries, radius_range)?;
    Ok((model, report, losses))
}

fn validate<R: Real>(
    model: &PoseRegressor<R>,
    datasets: &[RegressorDataset<R>],
    val_entries: &[Vec<usize>],
    radius_range: (f64, f64),
) -> Result<ValidationReport> {
    let mut rows = Vec::new();
    for (d, ds) in datasets.iter().enumerate() {
        let idx = &val_entries[d];
        let mut az = Vec::new();
        let mut el = Vec::new();
        let mut ra = Vec::new();
        let mut yw = Vec::new();
        let mut pt = Vec::new();
        let mut degenerate = 0usize;
        for chunk in idx.chunks(64) {
            let mut images = Array4::zeros((chunk.len(), 3, ds.images.dim().2, ds.images.dim().3));
            for (row, &i) in chunk.iter().enumerate() {
                images
                    .slice_mut(s![row, .., .., ..])
                    .assign(&ds.images.slice(s![i, .., .., ..]));
            }
            let pred = model.forward(&images)?;
            for (row, &i) in chunk.iter().enumerate() {
                let raw: [f64; 6] = std::array::from_fn(|j| pred[[row, j]].to_f64_());
                match decode_estimate(&raw, radius_range) {
                    Ok(est) => {
                        let truth = &ds.poses[i];
                        az.push(angular_difference(
                            est.decoded.azimuth().to_degrees(),
                            truth.azimuth().to_degrees(),
                        ));
                        el.push((est.decoded.elevation() - truth.elevation()).abs().to_degrees());
                        ra.push((est.decoded.radius() - truth.radius()).abs());
                        yw.push((est.decoded.yaw() - truth.yaw()).abs().to_degrees());
                        pt.push((est.decoded.pitch() - truth.pitch()).abs().to_degrees());
                    }
                    Err(Error::DegenerateEstimate) => degenerate += 1,
                    Err(e) => return Err(e),
                }
            }
        }
        let stats = |v: &[f64]| ComponentStats::of(v);
        rows.push(DatasetErrors {
            dataset: ds.name.clone(),
            count: az.len(),
            degenerate,
            azimuth_deg: stats(&az),
            elevation_deg: stats(&el),
            radius: stats(&ra),
            yaw_deg: stats(&yw),
            pitch_deg: stats(&pt),
        });
    }
    Ok(ValidationReport { rows })
}

pub fn save_regressor<R: Real>(
    path: &Path,
    model: &mut PoseRegressor<R>,
    radius_range: (f64, f64),
) -> Result<()> {
    let meta = serde_json::json!({
        "kind": "pose_regressor",
        "config": model.cfg,
        "radius_range": [radius_range.0, radius_range.1],
    });
    let mut slots = Vec::new();
    model.collect(&mut slots);
    let views = slot_views(&slots);
    save_tensors(path, &meta, &views)
}

pub fn load_regressor<R: Real>(path: &Path) -> Result<(PoseRegressor<R>, (f64, f64))> {
    let (meta, tensors) = load_tensors::<R>(path)?;
    if meta["kind"] != "pose_regressor" {
        return Err(Error::Checkpoint(format!(
            "{} is not a pose regressor checkpoint",
            path.display()
        )));
    }
    let cfg: RegressorConfig = serde_json::from_value(meta["config"].clone())?;
    let rr = &meta["radius_range"];
    let radius_range = (
        rr[0].as_f64().ok_or_else(|| Error::Checkpoint("bad radius_range".into()))?,
        rr[1].as_f64().ok_or_else(|| Error::Checkpoint("bad radius_range".into()))?,
    );
    let mut rng = rng_for(0, "regressor-load", &[]);
    let mut model = PoseRegressor::<R>::new(cfg, &mut rng);
    let mut slots = Vec::new();
    model.collect(&mut slots);
    assign_named(&mut slots, &tensors)?;
    Ok((model, radius_range))
}
