//! Line-delimited canonical session format.
//!
//! ```text
//! subject_id=S0001
//! test_id=6
//! max_time_ms=120000
//! ended_early=true
//! device=Galaxy Tab A 1920x1200
//! tool=stylus
//! 0,812.5,433,0.41,down,stylus
//! 10,815,436.25,-,move,stylus
//! ```
//!
//! Header lines are `key=value`; every following non-empty line is one sample
//! `t,x,y,pressure|-,action,tool`. Lines starting with `#` are comments.

use std::fmt::Write as _;

use super::{Action, InteractionSession, StrokeSample, TestId, Tool};
use crate::error::{Error, Result};

pub fn parse_canonical(bytes: &[u8]) -> Result<InteractionSession> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Header(format!("not utf-8: {e}")))?;

    let mut subject_id = None;
    let mut test_id = None;
    let mut max_time_ms = None;
    let mut ended_early = None;
    let mut device = None;
    let mut tool = None;
    let mut samples = Vec::new();
    let mut in_records = false;
    let mut record = 0usize;

    for line in text.lines() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        if !in_records {
            if let Some((key, value)) = line.split_once('=') {
                let value = value.trim();
                match key.trim() {
                    "subject_id" => subject_id = Some(value.to_string()),
                    "test_id" => {
                        let id: i64 = value
                            .parse()
                            .map_err(|_| Error::Header(format!("bad test_id `{value}`")))?;
                        test_id = Some(TestId::new(id)?);
                    }
                    "max_time_ms" => {
                        max_time_ms = Some(
                            value
                                .parse::<u64>()
                                .map_err(|_| Error::Header(format!("bad max_time_ms `{value}`")))?,
                        )
                    }
                    "ended_early" => {
                        ended_early = Some(match value {
                            "true" | "1" | "yes" => true,
                            "false" | "0" | "no" => false,
                            other => {
                                return Err(Error::Header(format!("bad ended_early `{other}`")))
                            }
                        })
                    }
                    "device" => device = Some(value.to_string()),
                    "tool" => tool = Some(value.parse::<Tool>().map_err(Error::Header)?),
                    other => return Err(Error::Header(format!("unknown key `{other}`"))),
                }
                continue;
            }
            in_records = true;
        }
        record += 1;
        let sample = parse_record(line, record)?;
        if let Some(prev) = samples.last() {
            let prev: &StrokeSample = prev;
            if sample.t < prev.t {
                return Err(Error::NonMonotonic { record });
            }
        }
        samples.push(sample);
    }

    let subject_id = subject_id.ok_or_else(|| Error::Header("missing subject_id".into()))?;
    let test_id = test_id.ok_or_else(|| Error::Header("missing test_id".into()))?;
    let max_time_ms = max_time_ms.unwrap_or_else(|| test_id.cap_ms());
    if max_time_ms != test_id.cap_ms() {
        return Err(Error::Header(format!(
            "max_time_ms {max_time_ms} does not match the {} ms cap of test {test_id}",
            test_id.cap_ms()
        )));
    }
    let tool = tool
        .or_else(|| samples.first().map(|s| s.tool))
        .unwrap_or_else(|| test_id.default_tool());

    Ok(InteractionSession {
        subject_id,
        test_id,
        tool,
        max_time_ms,
        ended_early: ended_early.unwrap_or(false),
        samples,
        device: device.unwrap_or_default(),
    })
}

fn parse_record(line: &str, record: usize) -> Result<StrokeSample> {
    let malformed = |message: String| Error::Malformed { record, message };
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != 6 {
        return Err(malformed(format!("expected 6 fields, found {}", fields.len())));
    }
    let t = fields[0]
        .parse::<u64>()
        .map_err(|_| malformed(format!("bad timestamp `{}`", fields[0])))?;
    let x = parse_coord(fields[1]).ok_or_else(|| malformed(format!("bad x `{}`", fields[1])))?;
    let y = parse_coord(fields[2]).ok_or_else(|| malformed(format!("bad y `{}`", fields[2])))?;
    let pressure = match fields[3] {
        "-" => None,
        p => Some(
            p.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| malformed(format!("bad pressure `{p}`")))?,
        ),
    };
    let action = fields[4].parse::<Action>().map_err(malformed)?;
    let tool = fields[5].parse::<Tool>().map_err(malformed)?;
    Ok(StrokeSample {
        t,
        x,
        y,
        pressure,
        action,
        tool,
    })
}

fn parse_coord(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite() && *v >= 0.0)
}

/// Writes the canonical form. `f64` values use the shortest representation
/// that parses back to the same bits.
pub fn serialize_canonical(session: &InteractionSession) -> String {
    let mut out = String::with_capacity(64 + session.samples.len() * 32);
    let _ = writeln!(out, "subject_id={}", session.subject_id);
    let _ = writeln!(out, "test_id={}", session.test_id);
    let _ = writeln!(out, "max_time_ms={}", session.max_time_ms);
    let _ = writeln!(out, "ended_early={}", session.ended_early);
    let _ = writeln!(out, "device={}", session.device);
    let _ = writeln!(out, "tool={}", session.tool.as_str());
    for s in &session.samples {
        let _ = write!(out, "{},{},{},", s.t, s.x, s.y);
        match s.pressure {
            Some(p) => {
                let _ = write!(out, "{p}");
            }
            None => out.push('-'),
        }
        let _ = writeln!(out, ",{},{}", s.action.as_str(), s.tool.as_str());
    }
    out
}
