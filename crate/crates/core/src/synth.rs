//! Synthetic drawing-test cohorts with planted group structure.
//!
//! Strokes are heading-smoothed random walks at a fixed 10 ms tick. Ordinary
//! strokes are pulled toward the region anchor and never leave the region;
//! with probability `out_of_margin` a stroke starts outside and wanders
//! freely.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::region::{default_tree, Point, RegionMask};
use crate::rng::{hash_str, rng_from, Rng};
use crate::trace::{
    serialize_canonical, write_subjects, Action, AgeGroup, Emotion, Gender, Handedness,
    InteractionSession, StrokeSample, SubjectRecord, TestId, Tool,
};

pub const TICK_MS: u64 = 10;

/// Normal distribution truncated below at `min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dist {
    pub mean: f64,
    pub sd: f64,
}

impl Dist {
    pub fn new(mean: f64, sd: f64) -> Self {
        Dist { mean, sd }
    }

    fn sample(&self, rng: &mut Rng, min: f64) -> f64 {
        let z: f64 = Normal::new(0.0, 1.0).unwrap().sample(rng);
        (self.mean + self.sd * z).max(min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub group: AgeGroup,
    pub subjects: usize,
    /// Mean pen speed in px/ms.
    pub speed: f64,
    /// Between-subject standard deviation of the speed.
    pub speed_jitter: f64,
    /// Per-stroke probability of a stroke outside the region.
    pub out_of_margin: f64,
    pub pen_down_ms: Dist,
    pub pen_up_ms: Dist,
    pub strokes: Dist,
    pub early_stop: f64,
    #[serde(default = "default_pressure")]
    pub pressure: f64,
}

fn default_pressure() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortSpec {
    pub seed: u64,
    #[serde(default = "default_device")]
    pub device: String,
    pub groups: Vec<GroupSpec>,
}

fn default_device() -> String {
    "synthetic tablet 1920x1200".into()
}

impl CohortSpec {
    pub fn from_toml(text: &str) -> Result<CohortSpec> {
        let spec: CohortSpec = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("cohort spec serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.groups.is_empty() {
            return bad("cohort has no groups".into());
        }
        for g in &self.groups {
            for (name, p) in [
                ("out_of_margin", g.out_of_margin),
                ("early_stop", g.early_stop),
                ("pressure", g.pressure),
            ] {
                if !(0.0..=1.0).contains(&p) {
                    return bad(format!("{}: {name} {p} outside [0,1]", g.group));
                }
            }
            for (name, d) in [
                ("pen_down_ms", g.pen_down_ms),
                ("pen_up_ms", g.pen_up_ms),
                ("strokes", g.strokes),
            ] {
                if !(d.mean > 0.0) || !(d.sd >= 0.0) {
                    return bad(format!("{}: {name} needs mean > 0 and sd >= 0", g.group));
                }
            }
            if !(g.speed > 0.0) || !(g.speed_jitter >= 0.0) {
                return bad(format!("{}: speed needs mean > 0 and jitter >= 0", g.group));
            }
        }
        Ok(())
    }

    /// Three groups separated by speed, stroke timing, out-of-region rate
    /// and pressure; `per_group` subjects each.
    pub fn planted(per_group: usize, seed: u64) -> CohortSpec {
        let group = |group, speed, oom, down, up, strokes, early, pressure| GroupSpec {
            group,
            subjects: per_group,
            speed,
            speed_jitter: speed * 0.1,
            out_of_margin: oom,
            pen_down_ms: Dist::new(down, down * 0.2),
            pen_up_ms: Dist::new(up, up * 0.2),
            strokes: Dist::new(strokes, 3.0),
            early_stop: early,
            pressure,
        };
        CohortSpec {
            seed,
            device: default_device(),
            groups: vec![
                group(AgeGroup::G1, 0.2, 0.3, 500.0, 900.0, 14.0, 0.7, 0.35),
                group(AgeGroup::G2, 0.5, 0.15, 800.0, 600.0, 22.0, 0.45, 0.5),
                group(AgeGroup::G3, 1.0, 0.03, 1100.0, 350.0, 30.0, 0.2, 0.65),
            ],
        }
    }
}

pub struct Cohort {
    pub sessions: Vec<InteractionSession>,
    pub subjects: Vec<SubjectRecord>,
}

/// Generates the cohort over the bundled tree region.
pub fn generate_cohort(spec: &CohortSpec) -> Result<Cohort> {
    generate_cohort_in(spec, &default_tree())
}

pub fn generate_cohort_in(spec: &CohortSpec, region: &RegionMask) -> Result<Cohort> {
    spec.validate()?;
    let mut jobs = Vec::new();
    let mut n = 0usize;
    for (gi, g) in spec.groups.iter().enumerate() {
        for i in 0..g.subjects {
            n += 1;
            jobs.push((format!("SYN{n:05}"), gi, i));
        }
    }
    let out: Vec<(InteractionSession, SubjectRecord)> = jobs
        .par_iter()
        .map(|(id, gi, i)| {
            let mut rng = rng_from(spec.seed, &[hash_str("subject"), *gi as u64, *i as u64]);
            let g = &spec.groups[*gi];
            (
                subject_session(id, g, &spec.device, region, &mut rng),
                subject_record(id, g.group, &mut rng),
            )
        })
        .collect();
    let (sessions, subjects) = out.into_iter().unzip();
    Ok(Cohort { sessions, subjects })
}

fn subject_record(id: &str, group: AgeGroup, rng: &mut Rng) -> SubjectRecord {
    let (levels, months) = match group {
        AgeGroup::G1 => ([2u8, 3], 18..42),
        AgeGroup::G2 => ([4, 6], 42..78),
        AgeGroup::G3 => ([7, 8], 78..104),
    };
    SubjectRecord {
        subject_id: id.to_string(),
        age_months: rng.random_range(months),
        educational_level: rng.random_range(levels[0]..=levels[1]),
        gender: if rng.random::<bool>() { Gender::Male } else { Gender::Female },
        handedness: if rng.random::<f64>() < 0.9 { Handedness::Right } else { Handedness::Left },
        adhd: Some(false),
        premature: None,
        prior_device_use: None,
        emotion: Emotion::Happy,
        grades: None,
    }
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

struct Canvas<'a> {
    region: &'a RegionMask,
    w: f64,
    h: f64,
}

impl Canvas<'_> {
    fn on_canvas(&self, p: Point) -> bool {
        p.0 >= 0.0 && p.1 >= 0.0 && p.0 <= self.w && p.1 <= self.h
    }

    fn inside(&self, p: Point) -> bool {
        self.on_canvas(p) && self.region.point_inside(p.0, p.1)
    }

    fn random_point(&self, rng: &mut Rng, want_inside: bool) -> Point {
        let (x0, y0, x1, y1) = self.region.bounds();
        let pad = if want_inside { 0.0 } else { 200.0 };
        let (x0, y0) = ((x0 - pad).max(0.0), (y0 - pad).max(0.0));
        let (x1, y1) = ((x1 + pad).min(self.w), (y1 + pad).min(self.h));
        for _ in 0..1000 {
            let p = (round2(rng.random_range(x0..x1)), round2(rng.random_range(y0..y1)));
            if self.inside(p) == want_inside {
                return p;
            }
        }
        if want_inside {
            self.region.anchor()
        } else {
            (0.0, 0.0)
        }
    }
}

fn wrap_angle(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

fn subject_session(
    id: &str,
    g: &GroupSpec,
    device: &str,
    region: &RegionMask,
    rng: &mut Rng,
) -> InteractionSession {
    let mut session = InteractionSession::new(id, TestId::DRAWING);
    session.device = device.to_string();
    session.tool = Tool::Stylus;
    session.ended_early = rng.random::<f64>() < g.early_stop;
    let (w, h) = session.canvas_size().map_or((1920.0, 1200.0), |(w, h)| (f64::from(w), f64::from(h)));
    let canvas = Canvas { region, w, h };
    let anchor = region.anchor();
    let cap = session.max_time_ms;
    let turn = Normal::new(0.0, 0.35).unwrap();
    let noise = Normal::new(0.0, 0.03).unwrap();

    let speed = g.speed + g.speed_jitter * Normal::new(0.0, 1.0).unwrap().sample(rng);
    let speed = speed.max(0.2 * g.speed);
    let step = speed * TICK_MS as f64;
    let n_strokes = g.strokes.sample(rng, 1.0).round() as usize;
    let mut t = rng.random_range(20..200) * TICK_MS;
    let mut last_end: Option<Point> = None;

    for _ in 0..n_strokes {
        let ticks = (g.pen_down_ms.sample(rng, TICK_MS as f64) / TICK_MS as f64).round().max(1.0) as u64;
        if t + ticks * TICK_MS > cap {
            break;
        }
        let outside = rng.random::<f64>() < g.out_of_margin;
        let mut p = match last_end {
            Some(e) if !outside => {
                let near = (0..50)
                    .map(|_| (round2(e.0 + rng.random_range(-80.0..80.0)), round2(e.1 + rng.random_range(-80.0..80.0))))
                    .find(|q| canvas.inside(*q));
                near.unwrap_or_else(|| canvas.random_point(rng, true))
            }
            _ => canvas.random_point(rng, !outside),
        };
        let mut heading = rng.random_range(-PI..PI);
        let pressure = (g.pressure + noise.sample(rng)).clamp(0.05, 1.0);
        for k in 0..=ticks {
            let action = match k {
                0 => Action::Down,
                _ if k == ticks => Action::Up,
                _ => Action::Move,
            };
            let prs = (pressure + noise.sample(rng) * 0.5).clamp(0.0, 1.0);
            session
                .samples
                .push(StrokeSample::new(t + k * TICK_MS, p.0, p.1, action, Tool::Stylus).with_pressure(round2(prs)));
            if k == ticks {
                break;
            }
            if !outside {
                let toward = (anchor.1 - p.1).atan2(anchor.0 - p.0);
                heading += 0.05 * wrap_angle(toward - heading);
            }
            heading = wrap_angle(heading + turn.sample(rng));
            let allowed = |q: Point| if outside { canvas.on_canvas(q) } else { canvas.inside(q) };
            let mut moved = false;
            for attempt in 0..12 {
                let a = if attempt == 0 { heading } else { rng.random_range(-PI..PI) };
                let q = (round2(p.0 + step * a.cos()), round2(p.1 + step * a.sin()));
                if allowed(q) {
                    heading = a;
                    p = q;
                    moved = true;
                    break;
                }
            }
            if !moved {
                heading = wrap_angle(heading + PI);
            }
        }
        last_end = Some(p);
        t += ticks * TICK_MS;
        let gap = (g.pen_up_ms.sample(rng, TICK_MS as f64) / TICK_MS as f64).round().max(1.0) as u64;
        t += gap * TICK_MS;
    }
    session
}

/// Writes `sessions/<id>.txt` in canonical form plus `subjects.csv`.
pub fn write_cohort(cohort: &Cohort, dir: &Path) -> Result<Vec<PathBuf>> {
    let sessions_dir = dir.join("sessions");
    std::fs::create_dir_all(&sessions_dir).map_err(|e| Error::io(&sessions_dir, e))?;
    let mut written = Vec::with_capacity(cohort.sessions.len() + 1);
    for s in &cohort.sessions {
        let path = sessions_dir.join(format!("{}.txt", s.subject_id));
        std::fs::write(&path, serialize_canonical(s)).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    let path = dir.join("subjects.csv");
    let f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    write_subjects(f, &cohort.subjects)?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{extract_features, ExtractConfig};
    use crate::selection::fdr_scores;
    use crate::trace::{segment_strokes, validate_session};

    fn small(per_group: usize) -> CohortSpec {
        CohortSpec::planted(per_group, 11)
    }

    #[test]
    fn sessions_need_no_repairs() {
        let c = generate_cohort(&small(10)).unwrap();
        assert_eq!(c.sessions.len(), 30);
        for s in &c.sessions {
            let r = validate_session(s);
            assert_eq!(r.repairs().count(), 0, "{:?}", r.issues);
            assert_eq!(r.flags().count(), 0, "{:?}", r.issues);
            assert!(!segment_strokes(s).is_empty());
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_cohort(&small(4)).unwrap();
        let b = generate_cohort(&small(4)).unwrap();
        let text = |c: &Cohort| c.sessions.iter().map(serialize_canonical).collect::<String>();
        assert_eq!(text(&a), text(&b));
        let mut other = small(4);
        other.seed += 1;
        assert_ne!(text(&a), text(&generate_cohort(&other).unwrap()));
    }

    #[test]
    fn no_excursions_means_no_outside_samples() {
        let mut spec = small(8);
        for g in &mut spec.groups {
            g.out_of_margin = 0.0;
        }
        let c = generate_cohort(&spec).unwrap();
        let mask = default_tree();
        for s in &c.sessions {
            let f = extract_features(s, &mask, &ExtractConfig::default()).unwrap();
            // Drawing feature 4 counts samples outside the margin.
            assert_eq!(f.get(118), 0.0);
        }
    }

    #[test]
    fn empirical_speed_matches_spec() {
        let mut spec = small(100);
        for g in &mut spec.groups {
            g.out_of_margin = 0.0;
        }
        let c = generate_cohort(&spec).unwrap();
        for (gi, g) in spec.groups.iter().enumerate() {
            // Per-subject mean step speed, then the group mean and its SE.
            let per_subject: Vec<f64> = c.sessions[gi * 100..(gi + 1) * 100]
                .iter()
                .map(|s| {
                    let mut v = Vec::new();
                    for st in segment_strokes(s) {
                        for w in st.samples.windows(2) {
                            let d = (w[1].x - w[0].x).hypot(w[1].y - w[0].y);
                            v.push(d / (w[1].t - w[0].t) as f64);
                        }
                    }
                    crate::stats::mean(&v)
                })
                .collect();
            let m = crate::stats::mean(&per_subject);
            let se = crate::stats::std_dev(&per_subject) / (per_subject.len() as f64).sqrt();
            // Rounding to 0.01 px and blocked steps bias the mean slightly low.
            let slack = 0.01 * g.speed;
            assert!((m - g.speed).abs() <= 3.0 * se + slack, "{}: {m} vs {} (se {se})", g.group, g.speed);
        }
    }

    #[test]
    fn speed_feature_separates_groups() {
        let mut spec = small(200);
        spec.groups[0].speed = 0.2;
        spec.groups[1].speed = 0.5;
        spec.groups[2].speed = 1.0;
        let c = generate_cohort(&spec).unwrap();
        let mask = default_tree();
        let rows: Vec<Vec<f64>> = c
            .sessions
            .iter()
            .map(|s| vec![extract_features(s, &mask, &ExtractConfig::default()).unwrap().get(21)])
            .collect();
        let labels: Vec<usize> = (0..600).map(|i| i / 200).collect();
        assert!(fdr_scores(&rows, &labels)[0] > 1.0);
    }

    #[test]
    fn toml_round_trip_and_validation() {
        let spec = small(3);
        assert_eq!(CohortSpec::from_toml(&spec.to_toml()).unwrap(), spec);
        let mut bad = spec.clone();
        bad.groups[1].early_stop = 1.5;
        assert!(bad.validate().is_err());
        let mut bad = spec;
        bad.groups[0].pen_down_ms.mean = 0.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn writes_canonical_files() {
        let dir = tempfile::tempdir().unwrap();
        let c = generate_cohort(&small(2)).unwrap();
        let files = write_cohort(&c, dir.path()).unwrap();
        assert_eq!(files.len(), 7);
        let text = std::fs::read(&files[0]).unwrap();
        let parsed = crate::trace::parse_canonical(&text).unwrap();
        assert_eq!(parsed, c.sessions[0]);
    }
}
