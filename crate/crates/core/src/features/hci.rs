//! The 114 classical global features: Time, Kinematic, Direction, Geometry
//! and Pressure families, in manifest order.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8, PI};

use crate::stats::{self, mean, median, percentile, ratio, std_dev};
use crate::trace::{pen_up_intervals, segment_strokes, InteractionSession, Stroke};

use super::kinematics::{differentiate, KinematicSeries};
use super::manifest::N_HCI;

/// Speed above which the pen counts as moving (px/ms).
pub const MOVING_SPEED: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct HciFeatures([f64; N_HCI]);

impl HciFeatures {
    /// Feature `n`, 1-based.
    pub fn get(&self, n: usize) -> f64 {
        self.0[n - 1]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Index of the 45-degree direction bin centred on `k * 45` degrees.
pub fn direction_bin(angle: f64) -> usize {
    let a = (angle + FRAC_PI_8).rem_euclid(2.0 * PI);
    ((a / FRAC_PI_4) as usize).min(7)
}

fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

/// Convex hull by monotone chain, counter-clockwise, without collinear points.
pub fn convex_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(f64, f64)>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

fn polygon_area(ring: &[(f64, f64)]) -> f64 {
    let n = ring.len();
    if n < 3 {
        return 0.0;
    }
    let s: f64 = (0..n)
        .map(|i| {
            let (a, b) = (ring[i], ring[(i + 1) % n]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum();
    0.5 * s.abs()
}

fn polygon_perimeter(ring: &[(f64, f64)]) -> f64 {
    let n = ring.len();
    match n {
        0 | 1 => 0.0,
        2 => 2.0 * dist(ring[0], ring[1]),
        _ => (0..n).map(|i| dist(ring[i], ring[(i + 1) % n])).sum(),
    }
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (b.0 - a.0).hypot(b.1 - a.1)
}

fn stroke_length(s: &Stroke<'_>) -> f64 {
    s.samples
        .windows(2)
        .map(|w| dist((w[0].x, w[0].y), (w[1].x, w[1].y)))
        .sum()
}

/// Fraction of the pen-down span elapsed when `series` peaks, with `times`
/// giving the absolute time of each series entry.
fn peak_time_ratio(series: &[f64], times: &[f64], start: f64, span: f64) -> f64 {
    let Some((i, _)) = series
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (i, &v)| match best {
            Some((_, b)) if b >= v => best,
            _ => Some((i, v)),
        })
    else {
        return 0.0;
    };
    ratio(times[i] - start, span)
}

fn mean_of_filtered(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    mean(&v)
}

/// Computes the 114 classical features of any session.
pub fn extract_hci_features(session: &InteractionSession, smooth: bool) -> HciFeatures {
    let strokes = segment_strokes(session);
    let series: Vec<KinematicSeries> = strokes
        .iter()
        .map(|s| differentiate(s.samples, smooth))
        .collect();
    let mut f = [0.0; N_HCI];

    // Time
    let span = session.span_ms() as f64;
    let durations: Vec<f64> = strokes.iter().map(|s| s.duration_ms() as f64).collect();
    let gaps: Vec<f64> = pen_up_intervals(&strokes)
        .iter()
        .map(|g| g.duration_ms() as f64)
        .collect();
    let pen_down: f64 = durations.iter().sum();
    let pen_up: f64 = gaps.iter().sum();
    let stroke_samples: usize = strokes.iter().map(|s| s.len()).sum();

    // Absolute times of velocity and acceleration entries, concatenated.
    let mut speed_all = Vec::new();
    let mut speed_t = Vec::new();
    let mut acc_all = Vec::new();
    let mut acc_t = Vec::new();
    let mut moving_ms = 0.0;
    let mut total_dt = 0.0;
    for (s, k) in strokes.iter().zip(&series) {
        let mut t = s.t_first() as f64;
        let mut mids = Vec::with_capacity(k.dt.len());
        for (dt, v) in k.dt.iter().zip(&k.speed) {
            mids.push(t + dt / 2.0);
            t += dt;
            total_dt += dt;
            if *v > MOVING_SPEED {
                moving_ms += dt;
            }
        }
        speed_all.extend_from_slice(&k.speed);
        speed_t.extend_from_slice(&mids);
        acc_all.extend_from_slice(&k.acc);
        acc_t.extend(mids.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    }
    let (down_start, down_span) = match (strokes.first(), strokes.last()) {
        (Some(a), Some(b)) => (a.t_first() as f64, (b.t_last() - a.t_first()) as f64),
        _ => (0.0, 0.0),
    };

    f[0] = span;
    f[1] = pen_down;
    f[2] = pen_up;
    f[3] = ratio(pen_down, span);
    f[4] = ratio(pen_up, span);
    f[5] = strokes.len() as f64;
    f[6] = session.samples.len() as f64;
    f[7] = ratio(strokes.len() as f64, span / 1000.0);
    f[8] = ratio(stroke_samples as f64, pen_down / 1000.0);
    f[9] = mean(&durations);
    f[10] = std_dev(&durations);
    f[11] = median(&durations);
    f[12] = percentile(&durations, 10.0);
    f[13] = percentile(&durations, 90.0);
    f[14] = std_dev(&gaps);
    f[15] = median(&gaps);
    f[16] = strokes.first().map_or(0.0, |s| s.t_first() as f64);
    f[17] = peak_time_ratio(&speed_all, &speed_t, down_start, down_span);
    f[18] = peak_time_ratio(&acc_all, &acc_t, down_start, down_span);
    f[19] = ratio(moving_ms, total_dt);

    // Kinematic
    let vx: Vec<f64> = series.iter().flat_map(|k| k.vx.iter().copied()).collect();
    let vy: Vec<f64> = series.iter().flat_map(|k| k.vy.iter().copied()).collect();
    let vx_abs: Vec<f64> = vx.iter().map(|v| v.abs()).collect();
    let vy_abs: Vec<f64> = vy.iter().map(|v| v.abs()).collect();
    let tan: Vec<f64> = series.iter().flat_map(|k| k.tan_acc.iter().copied()).collect();
    let jerk: Vec<f64> = series.iter().flat_map(|k| k.jerk.iter().copied()).collect();
    let maxima: usize = series.iter().map(|k| stats::count_local_maxima(&k.speed)).sum();
    let lengths: Vec<f64> = strokes.iter().map(stroke_length).collect();
    let path: f64 = lengths.iter().sum();

    f[20] = mean(&speed_all);
    f[21] = std_dev(&speed_all);
    f[22] = stats::max(&speed_all);
    f[23] = stats::min(&speed_all);
    f[24] = median(&speed_all);
    f[25] = percentile(&speed_all, 10.0);
    f[26] = percentile(&speed_all, 25.0);
    f[27] = percentile(&speed_all, 75.0);
    f[28] = percentile(&speed_all, 90.0);
    f[29] = mean(&vx_abs);
    f[30] = std_dev(&vx);
    f[31] = mean(&vy_abs);
    f[32] = std_dev(&vy);
    f[33] = stats::max(&vx_abs);
    f[34] = stats::max(&vy_abs);
    f[35] = mean(&acc_all);
    f[36] = std_dev(&acc_all);
    f[37] = stats::max(&acc_all);
    f[38] = median(&acc_all);
    f[39] = percentile(&acc_all, 90.0);
    f[40] = mean_of_filtered(tan.iter().copied().filter(|a| *a > 0.0));
    f[41] = mean_of_filtered(tan.iter().copied().filter(|a| *a < 0.0));
    f[42] = mean(&jerk);
    f[43] = std_dev(&jerk);
    f[44] = stats::max(&jerk);
    f[45] = median(&jerk);
    f[46] = maxima as f64;
    f[47] = ratio(maxima as f64, strokes.len() as f64);
    f[48] = ratio(f[20], f[22]);
    f[49] = ratio(path, pen_down);

    // Direction
    let angles: Vec<f64> = series.iter().flat_map(|k| k.angle.iter().flatten().copied()).collect();
    for a in &angles {
        f[50 + direction_bin(*a)] += 1.0;
    }
    let turns: Vec<f64> = series
        .iter()
        .flat_map(|k| {
            let defined: Vec<f64> = k.angle.iter().flatten().copied().collect();
            defined
                .windows(2)
                .map(|w| wrap_angle(w[1] - w[0]))
                .collect::<Vec<_>>()
        })
        .collect();
    let turns_abs: Vec<f64> = turns.iter().map(|t| t.abs()).collect();
    let cos_mean = mean(&angles.iter().map(|a| a.cos()).collect::<Vec<_>>());
    let sin_mean = mean(&angles.iter().map(|a| a.sin()).collect::<Vec<_>>());
    let resultant = cos_mean.hypot(sin_mean).min(1.0);
    let n_turns = turns.len() as f64;
    f[58] = mean(&turns);
    f[59] = std_dev(&turns);
    f[60] = mean(&turns_abs);
    f[61] = turns_abs.iter().sum();
    f[62] = cos_mean;
    f[63] = sin_mean;
    f[64] = resultant;
    f[65] = if angles.is_empty() { 0.0 } else { (2.0 * (1.0 - resultant)).sqrt() };
    let ink: Vec<(f64, f64)> = strokes
        .iter()
        .flat_map(|s| s.samples.iter().map(|p| (p.x, p.y)))
        .collect();
    if let (Some(a), Some(b)) = (ink.first(), ink.last()) {
        if a != b {
            f[66] = (b.1 - a.1).atan2(b.0 - a.0);
        }
    }
    f[67] = ratio(turns_abs.iter().filter(|t| **t > FRAC_PI_2).count() as f64, n_turns);
    f[68] = ratio(
        turns_abs.iter().filter(|t| **t > FRAC_PI_4 && **t <= FRAC_PI_2).count() as f64,
        n_turns,
    );
    f[69] = ratio(turns_abs.iter().filter(|t| **t <= FRAC_PI_8).count() as f64, n_turns);

    // Geometry
    let xs: Vec<f64> = ink.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = ink.iter().map(|p| p.1).collect();
    let width = stats::max(&xs) - stats::min(&xs);
    let height = stats::max(&ys) - stats::min(&ys);
    let bbox = width * height;
    let hull = convex_hull(&ink);
    let hull_area = polygon_area(&hull);
    let chords: Vec<f64> = strokes
        .iter()
        .map(|s| {
            let (a, b) = (&s.samples[0], &s.samples[s.len() - 1]);
            dist((a.x, a.y), (b.x, b.y))
        })
        .collect();
    let straightness: Vec<f64> = chords.iter().zip(&lengths).map(|(c, l)| ratio(*c, *l)).collect();
    let extent = |get: fn(&crate::trace::StrokeSample) -> f64| -> Vec<f64> {
        strokes
            .iter()
            .map(|s| {
                let v: Vec<f64> = s.samples.iter().map(get).collect();
                stats::max(&v) - stats::min(&v)
            })
            .collect()
    };
    let (cx, cy) = (mean(&xs), mean(&ys));
    let centroid_d: Vec<f64> = ink.iter().map(|p| dist(*p, (cx, cy))).collect();
    let jumps: Vec<f64> = strokes
        .windows(2)
        .map(|w| {
            let (a, b) = (&w[0].samples[w[0].len() - 1], &w[1].samples[0]);
            dist((a.x, a.y), (b.x, b.y))
        })
        .collect();
    f[70] = path;
    f[71] = mean(&lengths);
    f[72] = std_dev(&lengths);
    f[73] = stats::max(&lengths);
    f[74] = stats::min(&lengths);
    f[75] = median(&lengths);
    f[76] = width;
    f[77] = height;
    f[78] = bbox;
    f[79] = ratio(width, height);
    f[80] = hull_area;
    f[81] = polygon_perimeter(&hull);
    f[82] = ratio(hull_area, bbox);
    f[83] = ratio(path, bbox);
    if let (Some(a), Some(b)) = (ink.first(), ink.last()) {
        f[84] = dist(*a, *b);
        f[91] = a.0;
        f[92] = a.1;
        f[93] = b.0;
        f[94] = b.1;
    }
    f[85] = mean(&chords);
    f[86] = mean(&straightness);
    f[87] = mean(&extent(|s| s.x));
    f[88] = mean(&extent(|s| s.y));
    f[89] = mean(&centroid_d);
    f[90] = std_dev(&centroid_d);
    f[95] = mean(&jumps);

    // Pressure
    let prs: Vec<f64> = strokes
        .iter()
        .flat_map(|s| s.samples.iter().filter_map(|p| p.pressure))
        .collect();
    if prs.is_empty() {
        f[113] = 1.0;
    } else {
        let rates: Vec<f64> = strokes
            .iter()
            .flat_map(|s| {
                s.samples
                    .windows(2)
                    .filter_map(|w| match (w[0].pressure, w[1].pressure) {
                        (Some(a), Some(b)) if w[1].t > w[0].t => {
                            Some((b - a) / (w[1].t - w[0].t) as f64)
                        }
                        _ => None,
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        let rates_abs: Vec<f64> = rates.iter().map(|r| r.abs()).collect();
        let per_stroke: Vec<Vec<f64>> = strokes
            .iter()
            .map(|s| s.samples.iter().filter_map(|p| p.pressure).collect())
            .filter(|v: &Vec<f64>| !v.is_empty())
            .collect();
        let (sp, pp): (Vec<f64>, Vec<f64>) = series
            .iter()
            .flat_map(|k| k.speed.iter().zip(&k.pressure))
            .filter_map(|(s, p)| p.map(|p| (*s, p)))
            .unzip();
        let m = mean(&prs);
        f[96] = m;
        f[97] = std_dev(&prs);
        f[98] = stats::max(&prs);
        f[99] = stats::min(&prs);
        f[100] = f[98] - f[99];
        f[101] = median(&prs);
        f[102] = percentile(&prs, 10.0);
        f[103] = percentile(&prs, 90.0);
        f[104] = mean(&rates_abs);
        f[105] = std_dev(&rates);
        f[106] = stats::max(&rates_abs);
        f[107] = mean_of_filtered(per_stroke.iter().map(|v| v[0]));
        f[108] = mean_of_filtered(per_stroke.iter().map(|v| v[v.len() - 1]));
        f[109] = std_dev(&per_stroke.iter().map(|v| mean(v)).collect::<Vec<_>>());
        f[110] = stats::pearson(&sp, &pp);
        f[111] = prs.iter().filter(|p| **p > m).count() as f64 / prs.len() as f64;
        f[112] = per_stroke.iter().map(|v| stats::count_local_maxima(v)).sum::<usize>() as f64;
    }

    HciFeatures(f)
}
