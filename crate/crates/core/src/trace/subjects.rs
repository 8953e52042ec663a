//! Sidecar subjects table: comma-separated, mandatory header row
//! `subject_id,age_months,educational_level,gender,handedness,adhd,premature,prior_device_use,emotion,grades`.
//! Tri-state fields take `true`, `false` or `unknown`.

use std::io::{Read, Write};
use std::path::Path;

use super::{Emotion, Gender, Handedness, SubjectRecord};
use crate::error::{Error, Result};

const HEADER: [&str; 10] = [
    "subject_id",
    "age_months",
    "educational_level",
    "gender",
    "handedness",
    "adhd",
    "premature",
    "prior_device_use",
    "emotion",
    "grades",
];

fn tri(s: &str, line: usize) -> Result<Option<bool>> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(Some(true)),
        "false" | "no" | "0" => Ok(Some(false)),
        "" | "unknown" | "-" => Ok(None),
        other => Err(Error::Malformed {
            record: line,
            message: format!("bad boolean `{other}`"),
        }),
    }
}

fn tri_str(v: Option<bool>) -> &'static str {
    match v {
        Some(true) => "true",
        Some(false) => "false",
        None => "unknown",
    }
}

pub fn read_subjects<R: Read>(reader: R) -> Result<Vec<SubjectRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != HEADER {
        return Err(Error::Malformed {
            record: 1,
            message: format!("subjects header must be `{}`", HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let bad = |message: String| Error::Malformed {
            record: line,
            message,
        };
        let field = |k: usize| row.get(k).unwrap_or("");
        let age_months = field(1)
            .parse::<u32>()
            .map_err(|_| bad(format!("bad age_months `{}`", field(1))))?;
        let educational_level = field(2)
            .parse::<u8>()
            .ok()
            .filter(|l| (2..=8).contains(l))
            .ok_or_else(|| bad(format!("educational_level `{}` outside 2..=8", field(2))))?;
        let gender = match field(3).to_ascii_lowercase().as_str() {
            "m" | "male" => Gender::Male,
            "f" | "female" => Gender::Female,
            _ => Gender::Unknown,
        };
        let handedness = match field(4).to_ascii_lowercase().as_str() {
            "right" | "r" => Handedness::Right,
            "left" | "l" => Handedness::Left,
            "both" => Handedness::Both,
            _ => Handedness::Unknown,
        };
        let emotion = match field(8).to_ascii_lowercase().as_str() {
            "happy" => Emotion::Happy,
            "normal" => Emotion::Normal,
            "sad" => Emotion::Sad,
            "dk_da" | "dk/da" | "" => Emotion::DkDa,
            other => return Err(bad(format!("bad emotion `{other}`"))),
        };
        let grades = Some(field(9).to_string()).filter(|g| !g.is_empty());
        out.push(SubjectRecord {
            subject_id: field(0).to_string(),
            age_months,
            educational_level,
            gender,
            handedness,
            adhd: tri(field(5), line)?,
            premature: tri(field(6), line)?,
            prior_device_use: tri(field(7), line)?,
            emotion,
            grades,
        });
    }
    Ok(out)
}

pub fn read_subjects_file(path: &Path) -> Result<Vec<SubjectRecord>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_subjects(f)
}

pub fn write_subjects<W: Write>(writer: W, subjects: &[SubjectRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(HEADER)?;
    for s in subjects {
        let gender = match s.gender {
            Gender::Male => "male",
            Gender::Female => "female",
            Gender::Unknown => "unknown",
        };
        let hand = match s.handedness {
            Handedness::Right => "right",
            Handedness::Left => "left",
            Handedness::Both => "both",
            Handedness::Unknown => "unknown",
        };
        let emotion = match s.emotion {
            Emotion::Happy => "happy",
            Emotion::Normal => "normal",
            Emotion::Sad => "sad",
            Emotion::DkDa => "dk_da",
        };
        w.write_record([
            s.subject_id.as_str(),
            &s.age_months.to_string(),
            &s.educational_level.to_string(),
            gender,
            hand,
            tri_str(s.adhd),
            tri_str(s.premature),
            tri_str(s.prior_device_use),
            emotion,
            s.grades.as_deref().unwrap_or(""),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<subjects>", e))?;
    Ok(())
}
