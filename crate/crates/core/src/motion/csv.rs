//! Feature and contact-label CSV files: one header row, one row per frame,
//! six decimal places.

use std::fmt::Write as _;

use super::{FeatureLayout, MotionClip, MotionError};

fn write_rows(header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            first = false;
            let _ = write!(out, "{v:.6}");
        }
        out.push('\n');
    }
    out
}

fn read_rows(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>), MotionError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(MotionError::Csv { line: 1, message: "missing header".into() })?;
    let header: Vec<String> = header.split(',').map(|h| h.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (i, l) in lines {
        let row = l
            .split(',')
            .map(|v| {
                v.trim().parse::<f64>().map_err(|_| MotionError::Csv {
                    line: i + 1,
                    message: format!("non-numeric value `{}`", v.trim()),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        if row.len() != header.len() {
            return Err(MotionError::Csv {
                line: i + 1,
                message: format!("{} values for {} columns", row.len(), header.len()),
            });
        }
        rows.push(row);
    }
    Ok((header, rows))
}

pub fn write_feature_csv(clip: &MotionClip) -> String {
    write_rows(&clip.layout.channel_names(), (0..clip.frames()).map(|f| clip.frame(f).to_vec()))
}

/// Reads a raw-unit feature CSV; the layout is recovered from the header.
pub fn read_feature_csv(text: &str, frame_time: f64) -> Result<MotionClip, MotionError> {
    let (header, rows) = read_rows(text)?;
    let layout = FeatureLayout::from_channel_names(&header)?;
    MotionClip::new(layout, frame_time, rows.concat(), false)
}

pub fn write_contact_csv(feet: &[String], contacts: &[Vec<f64>]) -> String {
    let header: Vec<String> = feet.iter().map(|f| format!("contact_{f}")).collect();
    write_rows(&header, contacts.iter().cloned())
}

/// Returns foot names and per-frame flags.
pub fn read_contact_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>), MotionError> {
    let (header, rows) = read_rows(text)?;
    let feet = header
        .iter()
        .map(|h| {
            h.strip_prefix("contact_")
                .map(str::to_string)
                .ok_or_else(|| MotionError::Csv { line: 1, message: format!("unexpected column `{h}`") })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((feet, rows))
}
