//! Finite-difference kinematics within a single stroke.

use crate::trace::StrokeSample;

/// A stroke after merging samples that share a timestamp.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MergedStroke {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub pressure: Vec<Option<f64>>,
}

impl MergedStroke {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Merges runs of equal timestamps by averaging position and pressure.
pub fn merge_duplicates(samples: &[StrokeSample]) -> MergedStroke {
    let mut out = MergedStroke::default();
    let mut i = 0;
    while i < samples.len() {
        let mut j = i;
        while j < samples.len() && samples[j].t == samples[i].t {
            j += 1;
        }
        let run = &samples[i..j];
        let n = run.len() as f64;
        out.t.push(samples[i].t as f64);
        out.x.push(run.iter().map(|s| s.x).sum::<f64>() / n);
        out.y.push(run.iter().map(|s| s.y).sum::<f64>() / n);
        let ps: Vec<f64> = run.iter().filter_map(|s| s.pressure).collect();
        out.pressure
            .push((!ps.is_empty()).then(|| ps.iter().sum::<f64>() / ps.len() as f64));
        i = j;
    }
    out
}

/// 3-tap moving average; the end points are kept as they are.
pub fn smooth3(xs: &[f64]) -> Vec<f64> {
    let mut out = xs.to_vec();
    for i in 1..xs.len().saturating_sub(1) {
        out[i] = (xs[i - 1] + xs[i] + xs[i + 1]) / 3.0;
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KinematicSeries {
    /// Interval lengths between merged samples (ms).
    pub dt: Vec<f64>,
    pub vx: Vec<f64>,
    pub vy: Vec<f64>,
    pub speed: Vec<f64>,
    /// Magnitude of the acceleration vector, one per pair of velocities.
    pub acc: Vec<f64>,
    /// Rate of change of speed, aligned with `acc`.
    pub tan_acc: Vec<f64>,
    pub jerk: Vec<f64>,
    /// Path-tangent angle `atan2(vy, vx)`; `None` where the speed is zero.
    pub angle: Vec<Option<f64>>,
    /// Mean pressure of the two interval end points, when both are known.
    pub pressure: Vec<Option<f64>>,
}

impl KinematicSeries {
    pub fn is_empty(&self) -> bool {
        self.speed.is_empty()
    }
}

fn derivative(values: &[(f64, f64)], times: &[f64]) -> (Vec<(f64, f64)>, Vec<f64>) {
    let mut d = Vec::with_capacity(values.len().saturating_sub(1));
    let mut mid = Vec::with_capacity(d.capacity());
    for i in 1..values.len() {
        let h = times[i] - times[i - 1];
        d.push(((values[i].0 - values[i - 1].0) / h, (values[i].1 - values[i - 1].1) / h));
        mid.push(0.5 * (times[i] + times[i - 1]));
    }
    (d, mid)
}

/// Velocity by first differences, acceleration and jerk by differencing again
/// over the midpoint times of the previous level. Samples with equal
/// timestamps are merged first. Fewer than two distinct timestamps give an
/// empty series.
pub fn differentiate(samples: &[StrokeSample], smooth: bool) -> KinematicSeries {
    let mut m = merge_duplicates(samples);
    if m.len() < 2 {
        return KinematicSeries::default();
    }
    if smooth {
        m.x = smooth3(&m.x);
        m.y = smooth3(&m.y);
    }
    let pos: Vec<(f64, f64)> = m.x.iter().copied().zip(m.y.iter().copied()).collect();
    let (v, tv) = derivative(&pos, &m.t);
    let (a, ta) = derivative(&v, &tv);
    let (j, _) = derivative(&a, &ta);
    let speed: Vec<f64> = v.iter().map(|(x, y)| x.hypot(*y)).collect();
    let tan_acc = (1..speed.len())
        .map(|i| (speed[i] - speed[i - 1]) / (tv[i] - tv[i - 1]))
        .collect();
    KinematicSeries {
        dt: m.t.windows(2).map(|w| w[1] - w[0]).collect(),
        vx: v.iter().map(|p| p.0).collect(),
        vy: v.iter().map(|p| p.1).collect(),
        angle: v
            .iter()
            .zip(&speed)
            .map(|((x, y), s)| (*s > 0.0).then(|| y.atan2(*x)))
            .collect(),
        speed,
        acc: a.iter().map(|(x, y)| x.hypot(*y)).collect(),
        tan_acc,
        jerk: j.iter().map(|(x, y)| x.hypot(*y)).collect(),
        pressure: m
            .pressure
            .windows(2)
            .map(|w| match (w[0], w[1]) {
                (Some(a), Some(b)) => Some(0.5 * (a + b)),
                _ => None,
            })
            .collect(),
    }
}
