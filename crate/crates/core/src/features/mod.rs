//! Global feature extraction. A session maps to a 148-entry vector: the 114
//! classical HCI features followed by the 34 drawing-test features.

pub mod drawing;
pub mod hci;
pub mod kinematics;
pub mod manifest;

pub use drawing::{
    count_direction_changes, extract_drawing_features, pen_interval_stats, DirectionChangeConfig,
    DrawingFeatures, PenIntervalStats,
};
pub use hci::{extract_hci_features, HciFeatures};
pub use kinematics::{differentiate, KinematicSeries};
pub use manifest::{Category, FEATURES, N_DRAWING, N_FEATURES, N_HCI};

use crate::error::Result;
use crate::region::RegionMask;
use crate::trace::InteractionSession;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ExtractConfig {
    pub direction: DirectionChangeConfig,
    /// Apply a 3-tap moving average to positions before differentiating.
    pub smooth: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    /// Feature `n`, 1-based as in the manifest.
    pub fn get(&self, n: usize) -> f64 {
        self.0[n - 1]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Extracts the full vector from a drawing-test session.
pub fn extract_features(
    session: &InteractionSession,
    mask: &RegionMask,
    config: &ExtractConfig,
) -> Result<FeatureVector> {
    let drawing = extract_drawing_features(session, mask, &config.direction)?;
    let hci = extract_hci_features(session, config.smooth);
    let mut v = Vec::with_capacity(N_FEATURES);
    v.extend_from_slice(hci.as_slice());
    v.extend_from_slice(drawing.as_slice());
    debug_assert!(v.iter().all(|x| x.is_finite()));
    Ok(FeatureVector(v))
}
