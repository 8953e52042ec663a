//! Interaction sessions, subject metadata and their on-disk formats.

mod canonical;
mod childcidb;
mod segment;
mod subjects;
mod validate;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use canonical::{parse_canonical, serialize_canonical};
pub use childcidb::{parse_childcidb, ChildCiDbMeta};
pub use segment::{pen_up_intervals, segment_strokes, Interval, Stroke};
pub use subjects::{read_subjects, read_subjects_file, write_subjects};
pub use validate::{validate_session, Issue, ValidationReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Down,
    Move,
    Up,
}

impl Action {
    pub fn as_str(self) -> &'static str {
        match self {
            Action::Down => "down",
            Action::Move => "move",
            Action::Up => "up",
        }
    }
}

impl FromStr for Action {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "down" => Ok(Action::Down),
            "move" => Ok(Action::Move),
            "up" => Ok(Action::Up),
            other => Err(format!("unknown action `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tool {
    Finger,
    Stylus,
}

impl Tool {
    pub fn as_str(self) -> &'static str {
        match self {
            Tool::Finger => "finger",
            Tool::Stylus => "stylus",
        }
    }
}

impl FromStr for Tool {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "finger" => Ok(Tool::Finger),
            "stylus" => Ok(Tool::Stylus),
            other => Err(format!("unknown tool `{other}`")),
        }
    }
}

/// One time-sampled touch or stylus event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrokeSample {
    /// Milliseconds since test start.
    pub t: u64,
    pub x: f64,
    pub y: f64,
    /// Normalized pressure; `None` when the device did not report it.
    pub pressure: Option<f64>,
    pub action: Action,
    pub tool: Tool,
}

impl StrokeSample {
    pub fn new(t: u64, x: f64, y: f64, action: Action, tool: Tool) -> Self {
        Self {
            t,
            x,
            y,
            pressure: None,
            action,
            tool,
        }
    }

    pub fn with_pressure(mut self, p: f64) -> Self {
        self.pressure = Some(p);
        self
    }

    /// Down and move samples put ink on the canvas; up samples do not.
    pub fn is_ink(&self) -> bool {
        matches!(self.action, Action::Down | Action::Move)
    }
}

/// Test number in the acquisition app (0..=6).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TestId(u8);

impl TestId {
    pub const DRAWING: TestId = TestId(6);

    pub fn new(id: i64) -> Result<Self> {
        if (0..=6).contains(&id) {
            Ok(TestId(id as u8))
        } else {
            Err(Error::UnknownTest(id))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// Per-test timer cap in milliseconds: tests 0-5 run at most 30 s and the
    /// drawing test at most 2 min.
    pub fn cap_ms(self) -> u64 {
        match self.0 {
            6 => 120_000,
            _ => 30_000,
        }
    }

    /// Tests 1-4 are finger tests, 5 and 6 use the stylus. Test 0 is a touch.
    pub fn default_tool(self) -> Tool {
        match self.0 {
            5 | 6 => Tool::Stylus,
            _ => Tool::Finger,
        }
    }
}

impl fmt::Display for TestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One child performing one test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionSession {
    pub subject_id: String,
    pub test_id: TestId,
    pub tool: Tool,
    pub max_time_ms: u64,
    /// The child pressed "Next" before the timer ran out.
    pub ended_early: bool,
    pub samples: Vec<StrokeSample>,
    pub device: String,
}

impl InteractionSession {
    pub fn new(subject_id: impl Into<String>, test_id: TestId) -> Self {
        Self {
            subject_id: subject_id.into(),
            test_id,
            tool: test_id.default_tool(),
            max_time_ms: test_id.cap_ms(),
            ended_early: false,
            samples: Vec::new(),
            device: String::new(),
        }
    }

    /// `t_last - t_first` over all samples.
    pub fn span_ms(&self) -> u64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t.saturating_sub(a.t),
            _ => 0,
        }
    }

    /// Canvas size parsed from a `WIDTHxHEIGHT` token in the device
    /// descriptor, e.g. `Galaxy Tab A 10.1 1920x1200`.
    pub fn canvas_size(&self) -> Option<(u32, u32)> {
        self.device.split_whitespace().find_map(|tok| {
            let (w, h) = tok.split_once(['x', 'X'])?;
            Some((w.parse().ok()?, h.parse().ok()?))
        })
    }
}

/// Registered session formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SessionFormat {
    #[serde(rename = "canonical")]
    Canonical,
    #[serde(rename = "childcidb-v1")]
    ChildCiDbV1,
}

impl SessionFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            SessionFormat::Canonical => "canonical",
            SessionFormat::ChildCiDbV1 => "childcidb-v1",
        }
    }
}

impl FromStr for SessionFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "canonical" => Ok(SessionFormat::Canonical),
            "childcidb-v1" => Ok(SessionFormat::ChildCiDbV1),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

/// Parses one session. Structural problems are errors; stream repairs are
/// left to [`validate_session`].
pub fn parse_session(bytes: &[u8], format: SessionFormat) -> Result<InteractionSession> {
    match format {
        SessionFormat::Canonical => parse_canonical(bytes),
        SessionFormat::ChildCiDbV1 => parse_childcidb(bytes, &ChildCiDbMeta::default()),
    }
}

/// Reads, parses and validates a session file. The ChildCIdb adapter takes
/// subject and test from the file name when the file itself does not say.
pub fn load_session_file(
    path: &Path,
    format: SessionFormat,
) -> Result<(InteractionSession, ValidationReport)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let session = match format {
        SessionFormat::Canonical => parse_canonical(&bytes),
        SessionFormat::ChildCiDbV1 => {
            let meta = ChildCiDbMeta::from_path(path);
            parse_childcidb(&bytes, &meta)
        }
    }
    .map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
    let report = validate_session(&session);
    Ok((report.session.clone(), report))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Handedness {
    Right,
    Left,
    Both,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Emotion {
    Happy,
    Normal,
    Sad,
    /// Does not know / does not answer.
    DkDa,
}

/// Demographic and enrolment metadata of one child.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectRecord {
    pub subject_id: String,
    pub age_months: u32,
    /// Spanish educational level, 2..=8.
    pub educational_level: u8,
    pub gender: Gender,
    pub handedness: Handedness,
    pub adhd: Option<bool>,
    pub premature: Option<bool>,
    pub prior_device_use: Option<bool>,
    pub emotion: Emotion,
    pub grades: Option<String>,
}

impl SubjectRecord {
    pub fn age_group(&self) -> Result<AgeGroup> {
        AgeGroup::from_level(self.educational_level)
    }
}

/// Age group derived from the educational level: levels 2-3, 4-6 and 7-8.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgeGroup {
    G1,
    G2,
    G3,
}

impl AgeGroup {
    pub const ALL: [AgeGroup; 3] = [AgeGroup::G1, AgeGroup::G2, AgeGroup::G3];

    pub fn from_level(level: u8) -> Result<Self> {
        match level {
            2 | 3 => Ok(AgeGroup::G1),
            4..=6 => Ok(AgeGroup::G2),
            7 | 8 => Ok(AgeGroup::G3),
            other => Err(Error::Invalid(format!(
                "educational level {other} outside 2..=8"
            ))),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        AgeGroup::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AgeGroup::G1 => "G1",
            AgeGroup::G2 => "G2",
            AgeGroup::G3 => "G3",
        }
    }
}

impl fmt::Display for AgeGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgeGroup {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "G1" => Ok(AgeGroup::G1),
            "G2" => Ok(AgeGroup::G2),
            "G3" => Ok(AgeGroup::G3),
            other => Err(Error::Invalid(format!("unknown group `{other}`"))),
        }
    }
}
