//! Frozen 148-entry layout of the global feature vector. Indices 1-114 are
//! the classical HCI families, 115-148 the drawing-test features.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Time,
    Kinematic,
    Direction,
    Geometry,
    Pressure,
    Drawing,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::Time,
        Category::Kinematic,
        Category::Direction,
        Category::Geometry,
        Category::Pressure,
        Category::Drawing,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Time => "time",
            Category::Kinematic => "kinematic",
            Category::Direction => "direction",
            Category::Geometry => "geometry",
            Category::Pressure => "pressure",
            Category::Drawing => "drawing",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown category `{s}`")))
    }
}

pub const N_FEATURES: usize = 148;
pub const N_HCI: usize = 114;
pub const N_DRAWING: usize = 34;

use Category::*;

/// `(name, category)` in vector order.
pub const FEATURES: [(&str, Category); N_FEATURES] = [
    // Time (1-20)
    ("time_total_ms", Time),
    ("time_pen_down_ms", Time),
    ("time_pen_up_ms", Time),
    ("time_pen_down_ratio", Time),
    ("time_pen_up_ratio", Time),
    ("time_n_strokes", Time),
    ("time_n_samples", Time),
    ("time_strokes_per_s", Time),
    ("time_samples_per_down_s", Time),
    ("time_stroke_mean_ms", Time),
    ("time_stroke_std_ms", Time),
    ("time_stroke_median_ms", Time),
    ("time_stroke_p10_ms", Time),
    ("time_stroke_p90_ms", Time),
    ("time_gap_std_ms", Time),
    ("time_gap_median_ms", Time),
    ("time_first_down_ms", Time),
    ("time_vmax_ratio", Time),
    ("time_amax_ratio", Time),
    ("time_moving_ratio", Time),
    // Kinematic (21-50)
    ("kin_speed_mean", Kinematic),
    ("kin_speed_std", Kinematic),
    ("kin_speed_max", Kinematic),
    ("kin_speed_min", Kinematic),
    ("kin_speed_median", Kinematic),
    ("kin_speed_p10", Kinematic),
    ("kin_speed_p25", Kinematic),
    ("kin_speed_p75", Kinematic),
    ("kin_speed_p90", Kinematic),
    ("kin_vx_abs_mean", Kinematic),
    ("kin_vx_std", Kinematic),
    ("kin_vy_abs_mean", Kinematic),
    ("kin_vy_std", Kinematic),
    ("kin_vx_abs_max", Kinematic),
    ("kin_vy_abs_max", Kinematic),
    ("kin_acc_mean", Kinematic),
    ("kin_acc_std", Kinematic),
    ("kin_acc_max", Kinematic),
    ("kin_acc_median", Kinematic),
    ("kin_acc_p90", Kinematic),
    ("kin_tan_acc_pos_mean", Kinematic),
    ("kin_tan_acc_neg_mean", Kinematic),
    ("kin_jerk_mean", Kinematic),
    ("kin_jerk_std", Kinematic),
    ("kin_jerk_max", Kinematic),
    ("kin_jerk_median", Kinematic),
    ("kin_speed_local_maxima", Kinematic),
    ("kin_speed_maxima_per_stroke", Kinematic),
    ("kin_speed_mean_over_max", Kinematic),
    ("kin_path_speed", Kinematic),
    // Direction (51-70)
    ("dir_bin_000", Direction),
    ("dir_bin_045", Direction),
    ("dir_bin_090", Direction),
    ("dir_bin_135", Direction),
    ("dir_bin_180", Direction),
    ("dir_bin_225", Direction),
    ("dir_bin_270", Direction),
    ("dir_bin_315", Direction),
    ("dir_turn_mean", Direction),
    ("dir_turn_std", Direction),
    ("dir_turn_abs_mean", Direction),
    ("dir_turn_abs_total", Direction),
    ("dir_circ_mean_cos", Direction),
    ("dir_circ_mean_sin", Direction),
    ("dir_resultant_length", Direction),
    ("dir_angular_deviation", Direction),
    ("dir_start_end_angle", Direction),
    ("dir_turn_sharp_ratio", Direction),
    ("dir_turn_medium_ratio", Direction),
    ("dir_turn_smooth_ratio", Direction),
    // Geometry (71-96)
    ("geo_path_length", Geometry),
    ("geo_stroke_len_mean", Geometry),
    ("geo_stroke_len_std", Geometry),
    ("geo_stroke_len_max", Geometry),
    ("geo_stroke_len_min", Geometry),
    ("geo_stroke_len_median", Geometry),
    ("geo_bbox_width", Geometry),
    ("geo_bbox_height", Geometry),
    ("geo_bbox_area", Geometry),
    ("geo_bbox_aspect", Geometry),
    ("geo_hull_area", Geometry),
    ("geo_hull_perimeter", Geometry),
    ("geo_hull_fill_ratio", Geometry),
    ("geo_ink_density", Geometry),
    ("geo_start_end_distance", Geometry),
    ("geo_chord_mean", Geometry),
    ("geo_straightness_mean", Geometry),
    ("geo_stroke_width_mean", Geometry),
    ("geo_stroke_height_mean", Geometry),
    ("geo_centroid_dist_mean", Geometry),
    ("geo_centroid_dist_std", Geometry),
    ("geo_x_first", Geometry),
    ("geo_y_first", Geometry),
    ("geo_x_last", Geometry),
    ("geo_y_last", Geometry),
    ("geo_pen_up_jump_mean", Geometry),
    // Pressure (97-114)
    ("prs_mean", Pressure),
    ("prs_std", Pressure),
    ("prs_max", Pressure),
    ("prs_min", Pressure),
    ("prs_range", Pressure),
    ("prs_median", Pressure),
    ("prs_p10", Pressure),
    ("prs_p90", Pressure),
    ("prs_rate_abs_mean", Pressure),
    ("prs_rate_std", Pressure),
    ("prs_rate_abs_max", Pressure),
    ("prs_stroke_start_mean", Pressure),
    ("prs_stroke_end_mean", Pressure),
    ("prs_stroke_mean_std", Pressure),
    ("prs_speed_corr", Pressure),
    ("prs_above_mean_ratio", Pressure),
    ("prs_local_maxima", Pressure),
    ("prs_missing", Pressure),
    // Drawing (115-148)
    ("drw_outside_episodes", Drawing),
    ("drw_pen_downs", Drawing),
    ("drw_samples_inside", Drawing),
    ("drw_samples_outside", Drawing),
    ("drw_pen_down_max_samples", Drawing),
    ("drw_pen_down_max_ms", Drawing),
    ("drw_pen_down_min_samples", Drawing),
    ("drw_pen_down_min_ms", Drawing),
    ("drw_pen_down_mean_ms", Drawing),
    ("drw_pen_up_max_samples", Drawing),
    ("drw_pen_up_max_ms", Drawing),
    ("drw_pen_up_min_samples", Drawing),
    ("drw_pen_up_min_ms", Drawing),
    ("drw_pen_up_mean_ms", Drawing),
    ("drw_x_mean", Drawing),
    ("drw_y_mean", Drawing),
    ("drw_x_std", Drawing),
    ("drw_y_std", Drawing),
    ("drw_direction_changes", Drawing),
    ("drw_x_max", Drawing),
    ("drw_x_min", Drawing),
    ("drw_y_max", Drawing),
    ("drw_y_min", Drawing),
    ("drw_ended_early", Drawing),
    ("drw_time_inside_ms", Drawing),
    ("drw_time_outside_ms", Drawing),
    ("drw_time_drawing_ms", Drawing),
    ("drw_time_not_drawing_ms", Drawing),
    ("drw_ratio_inside_drawing", Drawing),
    ("drw_ratio_outside_drawing", Drawing),
    ("drw_ratio_inside_outside", Drawing),
    ("drw_ratio_drawing_test", Drawing),
    ("drw_drew_anything", Drawing),
    ("drw_n_samples", Drawing),
];

/// 0-based position of the first drawing feature.
pub const DRAWING_OFFSET: usize = N_HCI;

pub fn name(index: usize) -> &'static str {
    FEATURES[index].0
}

pub fn category(index: usize) -> Category {
    FEATURES[index].1
}

pub fn index_of(name: &str) -> Option<usize> {
    FEATURES.iter().position(|(n, _)| *n == name)
}

/// The `features-148.txt` manifest: header then `index,name,category` with
/// 1-based indices.
pub fn manifest_text() -> String {
    let mut out = String::from("index,name,category\n");
    for (i, (n, c)) in FEATURES.iter().enumerate() {
        out.push_str(&format!("{},{},{}\n", i + 1, n, c));
    }
    out
}

/// SHA-256 of the manifest text, hex encoded.
pub fn manifest_hash() -> String {
    hex::encode(Sha256::digest(manifest_text().as_bytes()))
}

pub fn category_counts() -> [(Category, usize); 6] {
    Category::ALL.map(|c| (c, FEATURES.iter().filter(|(_, k)| *k == c).count()))
}
