//! On-disk pose and range records. Files carry degrees; memory carries
//! radians.

use crate::error::Result;
use crate::geometry::{CameraPose, SamplingRanges};
use crate::scalar::Real;
use serde::{Deserialize, Serialize};

/// Flat pose record as stored in metadata files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub radius: f64,
    pub pitch_deg: f64,
    pub yaw_deg: f64,
}

impl PoseRecord {
    pub fn from_pose<R: Real>(pose: &CameraPose<R>) -> Self {
        Self {
            azimuth_deg: pose.azimuth().to_f64_().to_degrees(),
            elevation_deg: pose.elevation().to_f64_().to_degrees(),
            radius: pose.radius().to_f64_(),
            pitch_deg: pose.pitch().to_f64_().to_degrees(),
            yaw_deg: pose.yaw().to_f64_().to_degrees(),
        }
    }

    pub fn to_pose<R: Real>(&self) -> Result<CameraPose<R>> {
        CameraPose::new(
            R::of(self.azimuth_deg.to_radians()),
            R::of(self.elevation_deg.to_radians()),
            R::of(self.radius),
            R::of(self.pitch_deg.to_radians()),
            R::of(self.yaw_deg.to_radians()),
        )
    }
}

/// Sampling ranges as stored in config and manifest files (degrees).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangesRecord {
    pub radius_min: f64,
    pub radius_max: f64,
    pub elevation_min_deg: f64,
    pub elevation_max_deg: f64,
    pub pitch_bound_deg: f64,
    pub yaw_bound_deg: f64,
    #[serde(default = "default_true")]
    pub azimuth_full: bool,
    #[serde(default)]
    pub azimuth_min_deg: f64,
    #[serde(default = "default_360")]
    pub azimuth_max_deg: f64,
}

fn default_true() -> bool {
    true
}

fn default_360() -> f64 {
    360.0
}

impl Default for RangesRecord {
    fn default() -> Self {
        Self::from_ranges(&SamplingRanges::<f64>::default())
    }
}

impl RangesRecord {
    pub fn from_ranges<R: Real>(ranges: &SamplingRanges<R>) -> Self {
        Self {
            radius_min: ranges.radius_min.to_f64_(),
            radius_max: ranges.radius_max.to_f64_(),
            elevation_min_deg: ranges.elevation_min.to_f64_().to_degrees(),
            elevation_max_deg: ranges.elevation_max.to_f64_().to_degrees(),
            pitch_bound_deg: ranges.pitch_bound.to_f64_().to_degrees(),
            yaw_bound_deg: ranges.yaw_bound.to_f64_().to_degrees(),
            azimuth_full: ranges.azimuth_full,
            azimuth_min_deg: ranges.azimuth_min.to_f64_().to_degrees(),
            azimuth_max_deg: ranges.azimuth_max.to_f64_().to_degrees(),
        }
    }

    pub fn to_ranges<R: Real>(&self) -> SamplingRanges<R> {
        SamplingRanges {
            radius_min: R::of(self.radius_min),
            radius_max: R::of(self.radius_max),
            elevation_min: R::of(self.elevation_min_deg.to_radians()),
            elevation_max: R::of(self.elevation_max_deg.to_radians()),
            pitch_bound: R::of(self.pitch_bound_deg.to_radians()),
            yaw_bound: R::of(self.yaw_bound_deg.to_radians()),
            azimuth_full: self.azimuth_full,
            azimuth_min: R::of(self.azimuth_min_deg.to_radians()),
            azimuth_max: R::of(self.azimuth_max_deg.to_radians()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pose_record_round_trip() {
        let pose = CameraPose::new(1.234f64, 0.5, 1.62, -0.1, 0.2).unwrap();
        let rec = PoseRecord::from_pose(&pose);
        let back: CameraPose<f64> = rec.to_pose().unwrap();
        assert!((back.azimuth() - pose.azimuth()).abs() < 1e-12);
        assert!((back.elevation() - pose.elevation()).abs() < 1e-12);
        assert_eq!(back.radius(), pose.radius());
        assert!((back.pitch() - pose.pitch()).abs() < 1e-12);
        assert!((back.yaw() - pose.yaw()).abs() < 1e-12);
    }

    #[test]
    fn ranges_record_round_trip() {
        let ranges = SamplingRanges::<f64>::default();
        let rec = RangesRecord::from_ranges(&ranges);
        let back: SamplingRanges<f64> = rec.to_ranges();
        assert!((back.radius_min - ranges.radius_min).abs() < 1e-12);
        assert!((back.elevation_max - ranges.elevation_max).abs() < 1e-12);
        assert!((back.pitch_bound - ranges.pitch_bound).abs() < 1e-12);
        assert!(back.azimuth_full);
    }
}
