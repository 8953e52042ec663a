//! The 34 drawing-test features, numbered 1-34 in the order of the drawing
//! block of the manifest.

use crate::error::{Error, Result};
use crate::region::RegionMask;
use crate::stats;
use crate::trace::{pen_up_intervals, segment_strokes, InteractionSession, Stroke, TestId};

use super::manifest::N_DRAWING;

/// Thresholds for counting changes of drawing direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionChangeConfig {
    /// Both consecutive displacements must be longer than this (pixels).
    pub noise_floor_px: f64,
    /// A change is a turn of more than this many degrees.
    pub min_angle_deg: f64,
}

impl Default for DirectionChangeConfig {
    fn default() -> Self {
        Self {
            noise_floor_px: 2.0,
            min_angle_deg: 90.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DrawingFeatures([f64; N_DRAWING]);

impl DrawingFeatures {
    /// Feature `n`, 1-based.
    pub fn get(&self, n: usize) -> f64 {
        self.0[n - 1]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Counts, inside each stroke, turns sharper than the configured angle between
/// consecutive displacement vectors that both exceed the noise floor.
pub fn count_direction_changes(strokes: &[Stroke<'_>], config: &DirectionChangeConfig) -> usize {
    let cos_limit = config.min_angle_deg.to_radians().cos();
    let floor = config.noise_floor_px;
    strokes
        .iter()
        .map(|stroke| {
            let d: Vec<(f64, f64)> = stroke
                .samples
                .windows(2)
                .map(|w| (w[1].x - w[0].x, w[1].y - w[0].y))
                .collect();
            d.windows(2)
                .filter(|p| {
                    let (a, b) = (p[0], p[1]);
                    let (na, nb) = (a.0.hypot(a.1), b.0.hypot(b.1));
                    if na <= floor || nb <= floor {
                        return false;
                    }
                    (a.0 * b.0 + a.1 * b.1) / (na * nb) < cos_limit
                })
                .count()
        })
        .sum()
}

/// Pen-down and pen-up interval statistics.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PenIntervalStats {
    pub pen_downs: usize,
    pub down_max_samples: usize,
    pub down_max_ms: f64,
    pub down_min_samples: usize,
    pub down_min_ms: f64,
    pub down_mean_ms: f64,
    pub up_max_samples: f64,
    pub up_max_ms: f64,
    pub up_min_samples: f64,
    pub up_min_ms: f64,
    pub up_mean_ms: f64,
}

/// Pen-down intervals are stroke durations; pen-up intervals are the gaps
/// between consecutive strokes. Sample counts belong to the interval picked by
/// the matching duration extreme (first one on ties). A gap has no samples of
/// its own, so its count is the number of sampling periods it spans, with the
/// period taken as the median positive sample spacing inside strokes.
pub fn pen_interval_stats(strokes: &[Stroke<'_>]) -> PenIntervalStats {
    let mut out = PenIntervalStats {
        pen_downs: strokes.len(),
        ..Default::default()
    };
    if strokes.is_empty() {
        return out;
    }
    let longest = strokes
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.duration_ms().cmp(&b.1.duration_ms()).then(b.0.cmp(&a.0)))
        .map(|(_, s)| s)
        .expect("non-empty");
    let shortest = strokes
        .iter()
        .min_by_key(|s| s.duration_ms())
        .expect("non-empty");
    out.down_max_samples = longest.len();
    out.down_max_ms = longest.duration_ms() as f64;
    out.down_min_samples = shortest.len();
    out.down_min_ms = shortest.duration_ms() as f64;
    out.down_mean_ms =
        strokes.iter().map(|s| s.duration_ms() as f64).sum::<f64>() / strokes.len() as f64;

    let gaps: Vec<f64> = pen_up_intervals(strokes)
        .iter()
        .map(|g| g.duration_ms() as f64)
        .collect();
    if gaps.is_empty() {
        return out;
    }
    let spacings: Vec<f64> = strokes
        .iter()
        .flat_map(|s| s.samples.windows(2).map(|w| (w[1].t - w[0].t) as f64))
        .filter(|d| *d > 0.0)
        .collect();
    let period = stats::median(&spacings);
    let periods = |ms: f64| if period > 0.0 { (ms / period).round() } else { 0.0 };
    out.up_max_ms = stats::max(&gaps);
    out.up_min_ms = stats::min(&gaps);
    out.up_mean_ms = stats::mean(&gaps);
    out.up_max_samples = periods(out.up_max_ms);
    out.up_min_samples = periods(out.up_min_ms);
    out
}

/// Computes the drawing features of a test-6 session.
pub fn extract_drawing_features(
    session: &InteractionSession,
    mask: &RegionMask,
    direction: &DirectionChangeConfig,
) -> Result<DrawingFeatures> {
    if session.test_id != TestId::DRAWING {
        return Err(Error::WrongTest {
            expected: TestId::DRAWING.get(),
            actual: session.test_id.get(),
        });
    }
    let strokes = segment_strokes(session);
    let mut f = [0.0; N_DRAWING];

    let mut outside_episodes = 0usize;
    let mut inside_samples = 0usize;
    let mut outside_samples = 0usize;
    let mut time_inside = 0u64;
    let mut time_outside = 0u64;
    for stroke in &strokes {
        let inside: Vec<bool> = stroke
            .samples
            .iter()
            .map(|s| mask.point_inside(s.x, s.y))
            .collect();
        let mut was_outside = false;
        for (s, &ins) in stroke.samples.iter().zip(&inside) {
            if !s.is_ink() {
                continue;
            }
            if ins {
                inside_samples += 1;
            } else {
                outside_samples += 1;
                if !was_outside {
                    outside_episodes += 1;
                }
            }
            was_outside = !ins;
        }
        for (w, &ins) in stroke.samples.windows(2).zip(&inside) {
            let dt = w[1].t - w[0].t;
            if ins {
                time_inside += dt;
            } else {
                time_outside += dt;
            }
        }
    }

    let pen = pen_interval_stats(&strokes);
    let xs: Vec<f64> = session.samples.iter().map(|s| s.x).collect();
    let ys: Vec<f64> = session.samples.iter().map(|s| s.y).collect();
    let drawing = (time_inside + time_outside) as f64;
    let span = session.span_ms() as f64;

    f[0] = outside_episodes as f64;
    f[1] = pen.pen_downs as f64;
    f[2] = inside_samples as f64;
    f[3] = outside_samples as f64;
    f[4] = pen.down_max_samples as f64;
    f[5] = pen.down_max_ms;
    f[6] = pen.down_min_samples as f64;
    f[7] = pen.down_min_ms;
    f[8] = pen.down_mean_ms;
    f[9] = pen.up_max_samples;
    f[10] = pen.up_max_ms;
    f[11] = pen.up_min_samples;
    f[12] = pen.up_min_ms;
    f[13] = pen.up_mean_ms;
    f[14] = stats::mean(&xs);
    f[15] = stats::mean(&ys);
    f[16] = stats::std_dev(&xs);
    f[17] = stats::std_dev(&ys);
    f[18] = count_direction_changes(&strokes, direction) as f64;
    f[19] = stats::max(&xs);
    f[20] = stats::min(&xs);
    f[21] = stats::max(&ys);
    f[22] = stats::min(&ys);
    f[23] = if session.ended_early { 1.0 } else { 0.0 };
    f[24] = time_inside as f64;
    f[25] = time_outside as f64;
    f[26] = drawing;
    f[27] = (span - drawing).max(0.0);
    f[28] = stats::ratio(time_inside as f64, drawing);
    f[29] = stats::ratio(time_outside as f64, drawing);
    f[30] = stats::ratio(time_inside as f64, time_outside as f64);
    f[31] = stats::ratio(drawing, span);
    f[32] = if strokes.is_empty() { 0.0 } else { 1.0 };
    f[33] = session.samples.len() as f64;
    Ok(DrawingFeatures(f))
}
