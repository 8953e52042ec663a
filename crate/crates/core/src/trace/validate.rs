//! Stream repair. Capture logs contain truncation artifacts, so a few
//! mechanical rules bring any parsed session back to the stroke invariants:
//!
//! * samples past the test cap are dropped;
//! * a move or up while the pen is up is dropped;
//! * a down with no matching up gets a synthesized up at its last sample;
//! * pressure outside [0, 1] is clamped.
//!
//! Duplicate timestamps inside a stroke only raise a warning.

use std::fmt;

use super::{Action, InteractionSession, StrokeSample};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Issue {
    /// A repair rule changed the sample stream.
    Repair(String),
    /// Suspicious but kept as is.
    Warning(String),
    /// Cannot be repaired; the session is kept but should be reviewed.
    Flag(String),
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::Repair(m) => write!(f, "repair: {m}"),
            Issue::Warning(m) => write!(f, "warning: {m}"),
            Issue::Flag(m) => write!(f, "flag: {m}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    /// The repaired session.
    pub session: InteractionSession,
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn repairs(&self) -> impl Iterator<Item = &str> {
        self.issues.iter().filter_map(|i| match i {
            Issue::Repair(m) => Some(m.as_str()),
            _ => None,
        })
    }

    pub fn warnings(&self) -> impl Iterator<Item = &str> {
        self.issues.iter().filter_map(|i| match i {
            Issue::Warning(m) => Some(m.as_str()),
            _ => None,
        })
    }

    pub fn flags(&self) -> impl Iterator<Item = &str> {
        self.issues.iter().filter_map(|i| match i {
            Issue::Flag(m) => Some(m.as_str()),
            _ => None,
        })
    }

    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }
}

pub fn validate_session(session: &InteractionSession) -> ValidationReport {
    let mut issues = Vec::new();
    let cap = session.max_time_ms;
    if cap != session.test_id.cap_ms() {
        issues.push(Issue::Flag(format!(
            "max_time_ms {cap} differs from the {} ms cap of test {}",
            session.test_id.cap_ms(),
            session.test_id
        )));
    }
    if session.samples.windows(2).any(|w| w[1].t < w[0].t) {
        issues.push(Issue::Flag("timestamps decrease; order kept".into()));
    }

    let kept: Vec<StrokeSample> = session.samples.iter().copied().filter(|s| s.t <= cap).collect();
    let truncated = session.samples.len() - kept.len();
    if truncated > 0 {
        issues.push(Issue::Warning(format!(
            "{truncated} samples after the {cap} ms cap truncated"
        )));
    }

    let mut out: Vec<StrokeSample> = Vec::with_capacity(kept.len() + 1);
    let mut pen_down = false;
    let mut dropped_orphans = 0usize;
    let mut clamped = 0usize;
    let mut duplicate_ts = 0usize;
    for (i, mut s) in kept.into_iter().enumerate() {
        if let Some(p) = s.pressure {
            if !(0.0..=1.0).contains(&p) {
                s.pressure = Some(p.clamp(0.0, 1.0));
                clamped += 1;
            }
        }
        match s.action {
            Action::Down => {
                if pen_down {
                    close_stroke(&mut out, &mut issues, i);
                }
                pen_down = true;
                out.push(s);
            }
            Action::Move | Action::Up => {
                if !pen_down {
                    dropped_orphans += 1;
                    continue;
                }
                if out.last().is_some_and(|prev| prev.t == s.t) {
                    duplicate_ts += 1;
                }
                out.push(s);
                if s.action == Action::Up {
                    pen_down = false;
                }
            }
        }
    }
    if pen_down {
        let n = out.len();
        close_stroke(&mut out, &mut issues, n);
    }
    if dropped_orphans > 0 {
        issues.push(Issue::Warning(format!(
            "{dropped_orphans} orphan move/up samples before a down dropped"
        )));
    }
    if clamped > 0 {
        issues.push(Issue::Repair(format!("{clamped} pressure values clamped to [0,1]")));
    }
    if duplicate_ts > 0 {
        issues.push(Issue::Warning(format!(
            "{duplicate_ts} duplicate timestamps within strokes; samples kept"
        )));
    }
    if let Some(s) = out.iter().find(|s| s.tool != session.tool) {
        issues.push(Issue::Warning(format!(
            "sample at t={} uses {} in a {} session",
            s.t,
            s.tool.as_str(),
            session.tool.as_str()
        )));
    }
    if out.is_empty() && !session.ended_early {
        issues.push(Issue::Flag(format!(
            "no interaction recorded in test {} and the timer ran out",
            session.test_id
        )));
    }

    let repaired = InteractionSession {
        samples: out,
        ..session.clone()
    };
    ValidationReport {
        session: repaired,
        issues,
    }
}

fn close_stroke(out: &mut Vec<StrokeSample>, issues: &mut Vec<Issue>, record: usize) {
    if let Some(last) = out.last().copied() {
        out.push(StrokeSample {
            action: Action::Up,
            ..last
        });
        issues.push(Issue::Repair(format!(
            "synthesized up at last sample (t={}, before input sample {})",
            last.t,
            record + 1
        )));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{segment_strokes, TestId, Tool};

    fn sample(t: u64, a: Action) -> StrokeSample {
        StrokeSample::new(t, 5.0, 5.0, a, Tool::Stylus)
    }

    fn session(samples: Vec<StrokeSample>) -> InteractionSession {
        let mut s = InteractionSession::new("s", TestId::DRAWING);
        s.samples = samples;
        s
    }

    #[test]
    fn missing_up_is_synthesized() {
        let s = session(vec![sample(0, Action::Down), sample(10, Action::Move)]);
        let r = validate_session(&s);
        assert_eq!(r.session.samples.len(), 3);
        assert_eq!(r.session.samples[2].action, Action::Up);
        assert_eq!(r.session.samples[2].t, 10);
        assert!(r.repairs().any(|m| m.starts_with("synthesized up at last sample")));
    }

    #[test]
    fn duplicate_timestamps_warn_only() {
        let s = session(vec![
            sample(0, Action::Down),
            sample(10, Action::Move),
            sample(10, Action::Move),
            sample(20, Action::Up),
        ]);
        let r = validate_session(&s);
        assert_eq!(r.session.samples.len(), 4);
        assert_eq!(r.repairs().count(), 0);
        assert!(r.warnings().any(|m| m.contains("duplicate timestamps")));
    }

    #[test]
    fn orphans_are_dropped() {
        let s = session(vec![
            sample(0, Action::Move),
            sample(5, Action::Up),
            sample(10, Action::Down),
            sample(20, Action::Up),
        ]);
        let r = validate_session(&s);
        assert_eq!(r.session.samples.len(), 2);
        assert!(r.warnings().any(|m| m.contains("orphan")));
    }

    #[test]
    fn truncates_at_cap() {
        // 125 s of drawing in one long stroke, one sample per 100 ms.
        let mut samples = vec![sample(0, Action::Down)];
        samples.extend((1..1250).map(|i| sample(i * 100, Action::Move)));
        samples.push(sample(125_000, Action::Up));
        let r = validate_session(&session(samples));
        let last = r.session.samples.last().unwrap();
        assert_eq!(last.t, 120_000);
        assert_eq!(last.action, Action::Up);
        assert!(r.session.samples.iter().all(|s| s.t <= 120_000));
        assert!(r.warnings().any(|m| m.contains("truncated")));
        assert_eq!(segment_strokes(&r.session).len(), 1);
    }

    #[test]
    fn empty_timeout_is_flagged() {
        let r = validate_session(&session(vec![]));
        assert_eq!(r.flags().count(), 1);
        let mut early = session(vec![]);
        early.ended_early = true;
        assert!(validate_session(&early).is_clean());
    }
}
