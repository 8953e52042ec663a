//! Adapter for ChildCIdb v1 style exports (`--format childcidb-v1`).
//!
//! Expected layout, one file per subject and test:
//!
//! * optional `# key=value` comment lines (`subject`, `test`, `ended_early`,
//!   `device`) that override what the file name says;
//! * an optional header row naming the columns; recognized names are
//!   `x`, `y`, `timestamp`/`time`/`t`, `pressure`/`p`,
//!   `action`/`event`/`type` and `tool`. Without a header the column order is
//!   `X Y TIMESTAMP PRESSURE ACTION`;
//! * fields separated by commas, semicolons, tabs or spaces;
//! * actions as Android `MotionEvent` codes (0 down, 1 up, 2 move) or names
//!   (`ACTION_DOWN`, `down`, ...); tool codes 1 finger, 2 stylus;
//! * absolute timestamps in milliseconds, rebased so the first sample is 0.
//!
//! File names such as `S0123_Test6.txt` or `0123/test_6.csv` give the subject
//! and test when no comment line does.

use std::path::Path;

use super::{Action, InteractionSession, StrokeSample, TestId, Tool};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChildCiDbMeta {
    pub subject_id: Option<String>,
    pub test_id: Option<u8>,
}

impl ChildCiDbMeta {
    pub fn from_path(path: &Path) -> Self {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let lower = stem.to_ascii_lowercase();
        let mut meta = ChildCiDbMeta::default();
        if let Some(pos) = lower.find("test") {
            let digits: String = lower[pos + 4..]
                .trim_start_matches(['_', '-', ' '])
                .chars()
                .take_while(char::is_ascii_digit)
                .collect();
            meta.test_id = digits.parse().ok();
            let prefix = stem[..pos].trim_end_matches(['_', '-', ' ']);
            if !prefix.is_empty() {
                meta.subject_id = Some(prefix.to_string());
            }
        }
        if meta.subject_id.is_none() {
            meta.subject_id = path
                .parent()
                .and_then(|p| p.file_name())
                .map(|s| s.to_string_lossy().into_owned())
                .filter(|s| !s.is_empty());
        }
        meta
    }
}

#[derive(Debug, Clone, Copy)]
struct Columns {
    x: usize,
    y: usize,
    t: usize,
    pressure: Option<usize>,
    action: usize,
    tool: Option<usize>,
}

const DEFAULT_COLUMNS: Columns = Columns {
    x: 0,
    y: 1,
    t: 2,
    pressure: Some(3),
    action: 4,
    tool: None,
};

fn split_fields(line: &str) -> Vec<&str> {
    line.split(|c: char| c == ',' || c == ';' || c.is_whitespace())
        .filter(|f| !f.is_empty())
        .collect()
}

fn header_columns(fields: &[&str]) -> Option<Columns> {
    let find = |names: &[&str]| {
        fields
            .iter()
            .position(|f| names.contains(&f.to_ascii_lowercase().as_str()))
    };
    Some(Columns {
        x: find(&["x"])?,
        y: find(&["y"])?,
        t: find(&["timestamp", "time", "t"])?,
        pressure: find(&["pressure", "p"]),
        action: find(&["action", "event", "type"])?,
        tool: find(&["tool", "tooltype"]),
    })
}

fn parse_action(s: &str) -> Option<Action> {
    match s.to_ascii_lowercase().as_str() {
        "0" | "action_down" | "down" | "5" | "action_pointer_down" => Some(Action::Down),
        "1" | "action_up" | "up" | "6" | "action_pointer_up" | "3" | "action_cancel" => {
            Some(Action::Up)
        }
        "2" | "action_move" | "move" => Some(Action::Move),
        _ => None,
    }
}

fn parse_tool(s: &str) -> Option<Tool> {
    match s.to_ascii_lowercase().as_str() {
        "1" | "finger" => Some(Tool::Finger),
        "2" | "stylus" | "pen" => Some(Tool::Stylus),
        _ => None,
    }
}

pub fn parse_childcidb(bytes: &[u8], meta: &ChildCiDbMeta) -> Result<InteractionSession> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Header(format!("not utf-8: {e}")))?;
    let mut subject_id = meta.subject_id.clone();
    let mut test_id = meta.test_id;
    let mut ended_early = false;
    let mut device = String::new();
    let mut columns: Option<Columns> = None;
    let mut raw: Vec<(i64, f64, f64, Option<f64>, Action, Option<Tool>)> = Vec::new();
    let mut record = 0usize;

    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((k, v)) = comment.split_once('=') {
                let v = v.trim();
                match k.trim() {
                    "subject" | "subject_id" => subject_id = Some(v.to_string()),
                    "test" | "test_id" => {
                        test_id = Some(
                            v.parse()
                                .map_err(|_| Error::Header(format!("bad test `{v}`")))?,
                        )
                    }
                    "ended_early" => ended_early = matches!(v, "true" | "1" | "yes"),
                    "device" => device = v.to_string(),
                    _ => {}
                }
            }
            continue;
        }
        let fields = split_fields(line);
        if columns.is_none() {
            if let Some(c) = header_columns(&fields) {
                columns = Some(c);
                continue;
            }
            columns = Some(DEFAULT_COLUMNS);
        }
        let c = columns.unwrap_or(DEFAULT_COLUMNS);
        record += 1;
        let malformed = |message: String| Error::Malformed { record, message };
        let get = |i: usize| {
            fields
                .get(i)
                .copied()
                .ok_or_else(|| malformed(format!("missing column {}", i + 1)))
        };
        let num = |i: usize| -> Result<f64> {
            let f = get(i)?;
            f.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| malformed(format!("bad number `{f}`")))
        };
        let x = num(c.x)?.max(0.0);
        let y = num(c.y)?.max(0.0);
        let t = num(c.t)?.round() as i64;
        let pressure = match c.pressure {
            Some(i) => Some(num(i)?),
            None => None,
        };
        let action_field = get(c.action)?;
        let action = parse_action(action_field)
            .ok_or_else(|| malformed(format!("unknown action `{action_field}`")))?;
        let tool = c.tool.and_then(|i| fields.get(i).and_then(|f| parse_tool(f)));
        raw.push((t, x, y, pressure, action, tool));
    }

    let subject_id = subject_id.ok_or_else(|| Error::Header("subject id unknown".into()))?;
    let test_id = TestId::new(i64::from(test_id.unwrap_or(6)))?;
    let default_tool = test_id.default_tool();
    let t0 = raw.first().map(|r| r.0).unwrap_or(0);
    let mut samples = Vec::with_capacity(raw.len());
    for (i, (t, x, y, pressure, action, tool)) in raw.into_iter().enumerate() {
        let rel = t - t0;
        if rel < 0 || samples.last().is_some_and(|p: &StrokeSample| (rel as u64) < p.t) {
            return Err(Error::NonMonotonic { record: i + 1 });
        }
        samples.push(StrokeSample {
            t: rel as u64,
            x,
            y,
            pressure,
            action,
            tool: tool.unwrap_or(default_tool),
        });
    }
    Ok(InteractionSession {
        subject_id,
        test_id,
        tool: samples.first().map(|s| s.tool).unwrap_or(default_tool),
        max_time_ms: test_id.cap_ms(),
        ended_early,
        samples,
        device,
    })
}
