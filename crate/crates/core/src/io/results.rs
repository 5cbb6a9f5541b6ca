//! MOTChallenge-style result lines and ground-truth tables.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::tracker::TrackRow;

pub const GT_HEADER: &str = "frame,id,x,y,w,h";
pub const RESULT_DECIMALS: usize = 2;
pub const GT_DECIMALS: usize = 4;

/// One identity-labelled box on one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledBox {
    pub frame: u32,
    pub id: u64,
    pub bbox: BBox,
}

impl From<&TrackRow> for LabeledBox {
    fn from(r: &TrackRow) -> Self {
        Self {
            frame: r.frame,
            id: r.id,
            bbox: r.bbox,
        }
    }
}

fn sorted<T: Copy>(rows: &[T], key: impl Fn(&T) -> (u32, u64)) -> Vec<T> {
    let mut v = rows.to_vec();
    v.sort_by_key(|r| key(r));
    v
}

/// `frame,id,x,y,w,h,conf,-1,-1,-1` per row, frame-major then id-major.
pub fn format_tracks(rows: &[TrackRow]) -> String {
    let mut s = String::new();
    for r in sorted(rows, |r| (r.frame, r.id)) {
        let b = r.bbox;
        s.push_str(&format!(
            "{},{},{:.d$},{:.d$},{:.d$},{:.d$},{:.d$},-1,-1,-1\n",
            r.frame,
            r.id,
            b.x,
            b.y,
            b.w,
            b.h,
            r.conf,
            d = RESULT_DECIMALS
        ));
    }
    s
}

pub fn write_tracks(rows: &[TrackRow], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(format_tracks(rows).as_bytes())?;
    w.flush()?;
    Ok(())
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn field<T: std::str::FromStr>(path: &Path, line: u64, fields: &[&str], k: usize, name: &str) -> Result<T> {
    let raw = fields
        .get(k)
        .ok_or_else(|| parse_err(path, line, format!("missing {name}")))?;
    raw.trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("bad {name} {raw:?}")))
}

fn parse_box(path: &Path, line: u64, f: &[&str], start: usize) -> Result<BBox> {
    let x = field(path, line, f, start, "x")?;
    let y = field(path, line, f, start + 1, "y")?;
    let w = field(path, line, f, start + 2, "w")?;
    let h = field(path, line, f, start + 3, "h")?;
    BBox::new(x, y, w, h).map_err(|e| parse_err(path, line, e.to_string()))
}

/// Parses a result file. At least the first seven columns are required;
/// trailing columns are ignored.
pub fn read_tracks(path: &Path) -> Result<Vec<TrackRow>> {
    let reader = BufReader::new(File::open(path)?);
    let mut rows = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        let n = k as u64 + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() < 7 {
            return Err(parse_err(path, n, format!("expected at least 7 fields, found {}", f.len())));
        }
        let frame: u32 = field(path, n, &f, 0, "frame")?;
        if frame == 0 {
            return Err(parse_err(path, n, "frame numbers start at 1"));
        }
        rows.push(TrackRow {
            frame,
            id: field(path, n, &f, 1, "id")?,
            bbox: parse_box(path, n, &f, 2)?,
            conf: field(path, n, &f, 6, "conf")?,
        });
    }
    Ok(rows)
}

pub fn format_ground_truth(rows: &[LabeledBox]) -> String {
    let mut s = String::from(GT_HEADER);
    s.push('\n');
    for r in sorted(rows, |r| (r.frame, r.id)) {
        let b = r.bbox;
        s.push_str(&format!(
            "{},{},{:.d$},{:.d$},{:.d$},{:.d$}\n",
            r.frame,
            r.id,
            b.x,
            b.y,
            b.w,
            b.h,
            d = GT_DECIMALS
        ));
    }
    s
}

pub fn write_ground_truth(rows: &[LabeledBox], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(format_ground_truth(rows).as_bytes())?;
    w.flush()?;
    Ok(())
}

/// Reads a `frame,id,x,y,w,h` table (header required).
pub fn read_ground_truth(path: &Path) -> Result<Vec<LabeledBox>> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines.next().transpose()?;
    if header.as_deref().map(str::trim) != Some(GT_HEADER) {
        return Err(parse_err(path, 1, format!("expected header {GT_HEADER:?}")));
    }
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line?;
        let n = k as u64 + 2;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(parse_err(path, n, format!("expected 6 fields, found {}", f.len())));
        }
        let frame: u32 = field(path, n, &f, 0, "frame")?;
        if frame == 0 {
            return Err(parse_err(path, n, "frame numbers start at 1"));
        }
        rows.push(LabeledBox {
            frame,
            id: field(path, n, &f, 1, "id")?,
            bbox: parse_box(path, n, &f, 2)?,
        });
    }
    Ok(rows)
}
