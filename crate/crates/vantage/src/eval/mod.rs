//! Viewpoint-accuracy evaluation: generate images for requested poses, read
//! the achieved pose back through an oracle (normally the trained
//! regressor), and aggregate circular-aware errors into tables with
//! easy/diverse and challenging-viewpoint breakdowns.

use crate::dataset::records::DatasetManifest;
use crate::dataset::{check_seed_disjoint, kinds_overlap};
use crate::error::{Error, Result};
use crate::generator::{generate_image, ToyGenerator};
use crate::geometry::circular::angular_difference;
use crate::geometry::encoding::encode_factorized;
use crate::geometry::records::{PoseRecord, RangesRecord};
use crate::geometry::{sample_pose, CameraPose, SamplingRanges};
use crate::nn::rng::{derive_seed, rng_for};
use crate::regressor::{decode_estimate, PoseRegressor};
use crate::render::image::{ImageBuf, COMPOSITE_BG};
use crate::scalar::Real;
use crate::stats::ComponentStats;
use ndarray::{s, Array4};
use serde::{Deserialize, Serialize};

pub const BACK_VIEW_MIN_DEG: f64 = 135.0;
pub const BACK_VIEW_MAX_DEG: f64 = 225.0;
pub const DEFAULT_HIGH_ELEVATION_DEG: f64 = 40.0;
/// Runs with more degenerate estimates than this fraction are invalid.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Easy,
    Diverse,
}

impl Group {
    pub fn name(&self) -> &'static str {
        match self {
            Group::Easy => "easy",
            Group::Diverse => "diverse",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub object: String,
    pub color: String,
    #[serde(default)]
    pub background: Option<String>,
    pub group: Group,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChallengeSpec {
    pub back_views: usize,
    pub high_elevation_views: usize,
    #[serde(default = "default_high_el")]
    pub high_elevation_deg: f64,
}

fn default_high_el() -> f64 {
    DEFAULT_HIGH_ELEVATION_DEG
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSpec {
    pub seed: u64,
    pub cases: Vec<TestCase>,
    pub views_per_case: usize,
    #[serde(default)]
    pub ranges: RangesRecord,
    #[serde(default)]
    pub challenge: Option<ChallengeSpec>,
    /// When set, every test object kind must be absent from the training
    /// manifest (cross-category generalization protocol).
    #[serde(default)]
    pub require_unseen_kinds: bool,
}

impl TestSpec {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cases.is_empty() {
            return Err(Error::config("test spec has no cases"));
        }
        if self.views_per_case == 0 {
            return Err(Error::config("views_per_case must be >= 1"));
        }
        self.ranges.to_ranges::<f64>().validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    /// Minimal circular distance, degrees, in [0, 180].
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    /// Absolute radius error in object-diameter units.
    pub radius: f64,
    pub pitch_deg: f64,
    pub yaw_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub case_index: usize,
    pub view_index: usize,
    pub object: String,
    pub color: String,
    pub background: Option<String>,
    pub group: Group,
    /// Set on challenging-viewpoint records: "back_view" or
    /// "high_elevation". Challenge records stay out of the main tables.
    pub challenge: Option<String>,
    pub requested: PoseRecord,
    pub estimated: Option<PoseRecord>,
    pub degenerate: bool,
    pub errors: Option<ErrorRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsTable {
    pub count: usize,
    pub excluded: usize,
    pub azimuth_deg: ComponentStats,
    pub elevation_deg: ComponentStats,
    pub radius: ComponentStats,
    pub yaw_deg: ComponentStats,
    pub pitch_deg: ComponentStats,
}

impl MetricsTable {
    pub fn from_records<'a>(records: impl Iterator<Item = &'a EvalRecord>) -> MetricsTable {
        let mut az = Vec::new();
        let mut el = Vec::new();
        let mut ra = Vec::new();
        let mut yw = Vec::new();
        let mut pt = Vec::new();
        let mut excluded = 0usize;
        for rec in records {
            match &rec.errors {
                Some(e) => {
                    az.push(e.azimuth_deg);
                    el.push(e.elevation_deg);
                    ra.push(e.radius);
                    yw.push(e.yaw_deg);
                    pt.push(e.pitch_deg);
                }
                None => excluded += 1,
            }
        }
        MetricsTable {
            count: az.len(),
            excluded,
            azimuth_deg: ComponentStats::of(&az),
            elevation_deg: ComponentStats::of(&el),
            radius: ComponentStats::of(&ra),
            yaw_deg: ComponentStats::of(&yw),
            pitch_deg: ComponentStats::of(&pt),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("component,mean,median,count\n");
        for (name, stats) in [
            ("azimuth_deg", &self.azimuth_deg),
            ("elevation_deg", &self.elevation_deg),
            ("radius", &self.radius),
            ("yaw_deg", &self.yaw_deg),
            ("pitch_deg", &self.pitch_deg),
        ] {
            out.push_str(&format!("{},{},{},{}\n", name, stats.mean, stats.median, self.count));
        }
        let total = self.count + self.excluded;
        let rate = if total == 0 {
            0.0
        } else {
            self.excluded as f64 / total as f64
        };
        out.push_str(&format!("excluded_fraction,{rate},,{}\n", self.excluded));
        out
    }
}

/// Per-component error between a requested and an estimated pose.
pub fn pose_errors(requested: &CameraPose<f64>, estimated: &CameraPose<f64>) -> ErrorRecord {
    ErrorRecord {
        azimuth_deg: angular_difference(
            requested.azimuth().to_degrees(),
            estimated.azimuth().to_degrees(),
        ),
        elevation_deg: (requested.elevation() - estimated.elevation())
            .abs()
            .to_degrees(),
        radius: (requested.radius() - estimated.radius()).abs(),
        pitch_deg: (requested.pitch() - estimated.pitch()).abs().to_degrees(),
        yaw_deg: (requested.yaw() - estimated.yaw()).abs().to_degrees(),
    }
}

/// Source of pose estimates for generated images.
pub trait PoseOracle {
    /// Raw six-component estimate [sin az, cos az, el, r_norm, pitch, yaw].
    fn estimate(&self, image: &ImageBuf, requested: &CameraPose<f64>) -> Result<[f64; 6]>;
    fn name(&self) -> String;
}

/// The trained regressor.
pub struct RegressorOracle<R: Real> {
    pub model: PoseRegressor<R>,
}

impl<R: Real> PoseOracle for RegressorOracle<R> {
    fn estimate(&self, image: &ImageBuf, _requested: &CameraPose<f64>) -> Result<[f64; 6]> {
        let tensor = image.to_signed_tensor::<R>(COMPOSITE_BG);
        let mut batch = Array4::zeros((1, 3, image.height, image.width));
        batch.slice_mut(s![0, .., .., ..]).assign(&tensor);
        let out = self.model.forward(&batch)?;
        Ok(std::array::from_fn(|j| out[[0, j]].to_f64_()))
    }

    fn name(&self) -> String {
        "regressor".into()
    }
}

/// Testing stub: echoes the requested pose, optionally with a fixed azimuth
/// offset. Pins down the harness arithmetic independent of any model.
pub struct GroundTruthOracle {
    pub radius_range: (f64, f64),
    pub azimuth_offset_deg: f64,
}

impl PoseOracle for GroundTruthOracle {
    fn estimate(&self, _image: &ImageBuf, requested: &CameraPose<f64>) -> Result<[f64; 6]> {
        let shifted = CameraPose::new(
            requested.azimuth() + self.azimuth_offset_deg.to_radians(),
            requested.elevation(),
            requested.radius(),
            requested.pitch(),
            requested.yaw(),
        )?;
        let enc = encode_factorized(&shifted, self.radius_range)?;
        Ok(std::array::from_fn(|j| enc.data[j]))
    }

    fn name(&self) -> String {
        if self.azimuth_offset_deg == 0.0 {
            "stub:gt".into()
        } else {
            format!("stub:gt{:+}az", self.azimuth_offset_deg)
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalOutput {
    pub metrics: MetricsTable,
    pub breakdown: Vec<(String, MetricsTable)>,
    pub records: Vec<EvalRecord>,
    pub excluded_fraction: f64,
}

fn caption_for(case: &TestCase) -> Result<(Vec<String>, usize)> {
    use crate::dataset::captions::{augmented_caption_words, base_caption_words};
    use crate::render::{background_by_name, ObjectKind};
    let kind = ObjectKind::from_name(&case.object)?;
    let words = match &case.background {
        Some(bg) => augmented_caption_words(&case.color, kind, background_by_name(bg)?),
        None => base_caption_words(&case.color, kind),
    };
    Ok((words, 5))
}

/// Runs the full generate -> estimate -> decode -> aggregate pipeline.
pub fn evaluate<R: Real>(
    generator: &ToyGenerator<R>,
    oracle: &dyn PoseOracle,
    spec: &TestSpec,
    train_manifest: Option<&DatasetManifest>,
) -> Result<EvalOutput> {
    spec.validate()?;
    if let Some(manifest) = train_manifest {
        check_seed_disjoint(manifest, spec.seed)?;
        if spec.require_unseen_kinds {
            let kinds: Vec<String> = spec.cases.iter().map(|c| c.object.clone()).collect();
            let overlap = kinds_overlap(manifest, &kinds);
            if !overlap.is_empty() {
                return Err(Error::Eval(format!(
                    "test spec requires unseen kinds but {overlap:?} appear in training"
                )));
            }
        }
    }
    let ranges: SamplingRanges<f64> = spec.ranges.to_ranges();
    let radius_range = generator.radius_range;
    let vocab = &generator.vocab;
    let mut records = Vec::new();

    let run_one = |case_idx: usize,
                       view_idx: usize,
                       pose: CameraPose<f64>,
                       challenge: Option<String>,
                       records: &mut Vec<EvalRecord>|
     -> Result<()> {
        let case = &spec.cases[case_idx];
        let (words, span) = caption_for(case)?;
        let ids: Vec<u32> = words
            .iter()
            .map(|w| vocab.id(w))
            .collect::<Result<_>>()?;
        let gen_seed = derive_seed(
            spec.seed,
            "eval-generate",
            &[case_idx as u64, view_idx as u64, challenge.is_some() as u64],
        );
        let image = generate_image(generator, &ids, span, &pose, gen_seed)?;
        let raw = oracle.estimate(&image, &pose)?;
        let (estimated, errors, degenerate) = match decode_estimate(&raw, radius_range) {
            Ok(est) => {
                let err = pose_errors(&pose, &est.decoded);
                (Some(PoseRecord::from_pose(&est.decoded)), Some(err), false)
            }
            Err(Error::DegenerateEstimate) => (None, None, true),
            Err(e) => return Err(e),
        };
        records.push(EvalRecord {
            case_index: case_idx,
            view_index: view_idx,
            object: case.object.clone(),
            color: case.color.clone(),
            background: case.background.clone(),
            group: case.group,
            challenge,
            requested: PoseRecord::from_pose(&pose),
            estimated,
            degenerate,
            errors,
        });
        Ok(())
    };

    for case_idx in 0..spec.cases.len() {
        for view_idx in 0..spec.views_per_case {
            let mut rng = rng_for(spec.seed, "eval-pose", &[case_idx as u64, view_idx as u64]);
            let pose = sample_pose(&mut rng, &ranges)?;
            run_one(case_idx, view_idx, pose, None, &mut records)?;
        }
        if let Some(challenge) = &spec.challenge {
            let back_ranges = SamplingRanges {
                azimuth_full: false,
                azimuth_min: BACK_VIEW_MIN_DEG.to_radians(),
                azimuth_max: BACK_VIEW_MAX_DEG.to_radians(),
                ..ranges
            };
            for view_idx in 0..challenge.back_views {
                let mut rng =
                    rng_for(spec.seed, "eval-back", &[case_idx as u64, view_idx as u64]);
                let pose = sample_pose(&mut rng, &back_ranges)?;
                run_one(
                    case_idx,
                    view_idx,
                    pose,
                    Some("back_view".into()),
                    &mut records,
                )?;
            }
            // High-elevation azimuths avoid the back band so the two
            // challenge subsets stay disjoint by construction.
            let high_ranges = SamplingRanges {
                azimuth_full: false,
                azimuth_min: BACK_VIEW_MAX_DEG.to_radians(),
                azimuth_max: (BACK_VIEW_MIN_DEG + 360.0).to_radians(),
                elevation_min: challenge.high_elevation_deg.to_radians(),
                elevation_max: challenge.high_elevation_deg.to_radians(),
                ..ranges
            };
            for view_idx in 0..challenge.high_elevation_views {
                let mut rng =
                    rng_for(spec.seed, "eval-highel", &[case_idx as u64, view_idx as u64]);
                let pose = sample_pose(&mut rng, &high_ranges)?;
                run_one(
                    case_idx,
                    view_idx,
                    pose,
                    Some("high_elevation".into()),
                    &mut records,
                )?;
            }
        }
    }

    let excluded = records.iter().filter(|r| r.degenerate).count();
    let excluded_fraction = excluded as f64 / records.len() as f64;
    if excluded_fraction > MAX_EXCLUDED_FRACTION {
        return Err(Error::Eval(format!(
            "degenerate estimate rate {excluded_fraction:.4} exceeds {MAX_EXCLUDED_FRACTION}"
        )));
    }
    let metrics = MetricsTable::from_records(records.iter().filter(|r| r.challenge.is_none()));
    let breakdown = error_breakdown(&records);
    Ok(EvalOutput {
        metrics,
        breakdown,
        records,
        excluded_fraction,
    })
}

/// Per-group tables: whole/easy/diverse over the main set, plus one row per
/// challenging subset. Empty groups are omitted rather than reported as
/// zero.
pub fn error_breakdown(records: &[EvalRecord]) -> Vec<(String, MetricsTable)> {
    let mut out = Vec::new();
    let main: Vec<&EvalRecord> = records.iter().filter(|r| r.challenge.is_none()).collect();
    if !main.is_empty() {
        out.push((
            "whole".to_string(),
            MetricsTable::from_records(main.iter().copied()),
        ));
    }
    for group in [Group::Easy, Group::Diverse] {
        let subset: Vec<&EvalRecord> = main
            .iter()
            .copied()
            .filter(|r| r.group == group)
            .collect();
        if !subset.is_empty() {
            out.push((
                group.name().to_string(),
                MetricsTable::from_records(subset.into_iter()),
            ));
        }
    }
    for tag in ["back_view", "high_elevation"] {
        let subset: Vec<&EvalRecord> = records
            .iter()
            .filter(|r| r.challenge.as_deref() == Some(tag))
            .collect();
        if !subset.is_empty() {
            out.push((
                tag.to_string(),
                MetricsTable::from_records(subset.into_iter()),
            ));
        }
    }
    out
}

pub fn breakdown_csv(breakdown: &[(String, MetricsTable)]) -> String {
    let mut out = String::from(
        "group,count,azimuth_mean,azimuth_median,elevation_mean,elevation_median,radius_mean,radius_median,yaw_mean,yaw_median,pitch_mean,pitch_median\n",
    );
    for (name, t) in breakdown {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            name,
            t.count,
            t.azimuth_deg.mean,
            t.azimuth_deg.median,
            t.elevation_deg.mean,
            t.elevation_deg.median,
            t.radius.mean,
            t.radius.median,
            t.yaw_deg.mean,
            t.yaw_deg.median,
            t.pitch_deg.mean,
            t.pitch_deg.median,
        ));
    }
    out
}

pub fn records_jsonl(records: &[EvalRecord]) -> Result<String> {
    let mut out = String::new();
    for rec in records {
        out.push_str(&serde_json::to_string(rec)?);
        out.push('\n');
    }
    Ok(out)
}

/// Writes metrics.csv, breakdown.csv, and records.jsonl into `out_dir`.
pub fn write_eval_outputs(out_dir: &std::path::Path, output: &EvalOutput) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("metrics.csv"), output.metrics.to_csv())?;
    std::fs::write(out_dir.join("breakdown.csv"), breakdown_csv(&output.breakdown))?;
    std::fs::write(out_dir.join("records.jsonl"), records_jsonl(&output.records)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circular_error_uses_the_short_way_round() {
        let req = CameraPose::new(5f64.to_radians(), 0.1, 1.5, 0.0, 0.0).unwrap();
        let est = CameraPose::new(355f64.to_radians(), 0.1, 1.5, 0.0, 0.0).unwrap();
        let err = pose_errors(&req, &est);
        assert!((err.azimuth_deg - 10.0).abs() < 1e-9);
    }

    #[test]
    fn breakdown_partitions_cover_the_main_set() {
        let rec = |group: Group, challenge: Option<&str>, az_err: f64| EvalRecord {
            case_index: 0,
            view_index: 0,
            object: "arrowcar".into(),
            color: "red".into(),
            background: None,
            group,
            challenge: challenge.map(str::to_string),
            requested: PoseRecord {
                azimuth_deg: 0.0,
                elevation_deg: 0.0,
                radius: 1.5,
                pitch_deg: 0.0,
                yaw_deg: 0.0,
            },
            estimated: None,
            degenerate: false,
            errors: Some(ErrorRecord {
                azimuth_deg: az_err,
                elevation_deg: 1.0,
                radius: 0.1,
                pitch_deg: 0.5,
                yaw_deg: 0.5,
            }),
        };
        let records = vec![
            rec(Group::Easy, None, 10.0),
            rec(Group::Diverse, None, 20.0),
            rec(Group::Diverse, None, 30.0),
            rec(Group::Easy, Some("back_view"), 50.0),
        ];
        let breakdown = error_breakdown(&records);
        let get = |n: &str| breakdown.iter().find(|(g, _)| g == n).map(|(_, t)| t);
        assert_eq!(get("whole").unwrap().count, 3);
        assert_eq!(get("easy").unwrap().count, 1);
        assert_eq!(get("diverse").unwrap().count, 2);
        assert_eq!(get("back_view").unwrap().count, 1);
        assert!(get("high_elevation").is_none(), "empty group must be absent");
        assert_eq!(
            get("easy").unwrap().count + get("diverse").unwrap().count,
            get("whole").unwrap().count
        );
        // Single-group case: the group table equals the global table.
        let only_easy = vec![rec(Group::Easy, None, 10.0), rec(Group::Easy, None, 14.0)];
        let bd = error_breakdown(&only_easy);
        let whole = bd.iter().find(|(g, _)| g == "whole").unwrap();
        let easy = bd.iter().find(|(g, _)| g == "easy").unwrap();
        assert_eq!(whole.1, easy.1);
    }
}
