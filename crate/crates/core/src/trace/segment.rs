use super::{Action, InteractionSession, StrokeSample};

/// A contiguous run of samples from a pen-down to its pen-up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stroke<'a> {
    /// Index of the first sample in the session.
    pub start: usize,
    pub samples: &'a [StrokeSample],
}

impl Stroke<'_> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn t_first(&self) -> u64 {
        self.samples.first().map_or(0, |s| s.t)
    }

    pub fn t_last(&self) -> u64 {
        self.samples.last().map_or(0, |s| s.t)
    }

    /// `t_last - t_first` in milliseconds.
    pub fn duration_ms(&self) -> u64 {
        self.t_last() - self.t_first()
    }
}

/// Pen-up interval between the end of one stroke and the start of the next.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interval {
    pub start_ms: u64,
    pub end_ms: u64,
}

impl Interval {
    pub fn duration_ms(&self) -> u64 {
        self.end_ms.saturating_sub(self.start_ms)
    }
}

/// Splits the sample stream into strokes. A stroke starts at every `down` and
/// after every `up`, so no sample is dropped or duplicated; on a validated
/// session each stroke is exactly one down..up run.
pub fn segment_strokes(session: &InteractionSession) -> Vec<Stroke<'_>> {
    let samples = &session.samples;
    let mut strokes = Vec::new();
    let mut start = 0usize;
    for (i, s) in samples.iter().enumerate() {
        if s.action == Action::Down && i > start {
            strokes.push(Stroke {
                start,
                samples: &samples[start..i],
            });
            start = i;
        }
        if s.action == Action::Up {
            strokes.push(Stroke {
                start,
                samples: &samples[start..=i],
            });
            start = i + 1;
        }
    }
    if start < samples.len() {
        strokes.push(Stroke {
            start,
            samples: &samples[start..],
        });
    }
    strokes
}

/// Gaps between consecutive strokes. Idle time before the first stroke and
/// after the last one is not a pen-up interval.
pub fn pen_up_intervals(strokes: &[Stroke<'_>]) -> Vec<Interval> {
    strokes
        .windows(2)
        .map(|w| Interval {
            start_ms: w[0].t_last(),
            end_ms: w[1].t_first(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{TestId, Tool};

    fn session(actions: &[Action]) -> InteractionSession {
        let mut s = InteractionSession::new("s", TestId::DRAWING);
        s.samples = actions
            .iter()
            .enumerate()
            .map(|(i, &a)| StrokeSample::new(i as u64 * 10, 1.0, 1.0, a, Tool::Stylus))
            .collect();
        s
    }

    #[test]
    fn two_strokes() {
        use Action::*;
        let s = session(&[Down, Move, Up, Down, Up]);
        let strokes = segment_strokes(&s);
        assert_eq!(strokes.iter().map(|s| s.len()).collect::<Vec<_>>(), vec![3, 2]);
        let gaps = pen_up_intervals(&strokes);
        assert_eq!(gaps, vec![Interval { start_ms: 20, end_ms: 30 }]);
    }

    #[test]
    fn empty_session() {
        let s = session(&[]);
        assert!(segment_strokes(&s).is_empty());
        assert!(pen_up_intervals(&[]).is_empty());
    }

    #[test]
    fn unterminated_stroke_is_kept() {
        use Action::*;
        let s = session(&[Down, Move, Down, Move, Up]);
        let sizes: Vec<_> = segment_strokes(&s).iter().map(|s| s.len()).collect();
        assert_eq!(sizes, vec![2, 3]);
    }
}
