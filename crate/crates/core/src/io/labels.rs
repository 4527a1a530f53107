use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Box7, Point3};

/// Category name written for boxes without a category.
pub const UNASSIGNED: &str = "unassigned";

const HEADER: &str = "# frame track_id cx cy cz length width height heading score category";

/// One box line: `frame track_id cx cy cz l w h heading score category`.
/// A missing track id is written as `-`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelRecord {
    pub frame: usize,
    pub track_id: Option<usize>,
    pub bbox: Box7,
    pub score: f64,
    pub category: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelFile {
    /// Length of the sequence the boxes refer to, from the `# frames N` line.
    pub frame_count: Option<usize>,
    pub records: Vec<LabelRecord>,
}

fn fixed(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

pub fn write_labels(path: &Path, frame_count: usize, records: &[LabelRecord]) -> Result<()> {
    let mut out = format!("# frames {frame_count}\n{HEADER}\n");
    for r in records {
        let b = &r.bbox;
        let c = b.center();
        let track = r.track_id.map_or_else(|| "-".to_string(), |t| t.to_string());
        let cat = r.category.as_deref().unwrap_or(UNASSIGNED);
        if cat.is_empty() || cat.contains(char::is_whitespace) {
            return Err(Error::InvalidParameter(format!("category name `{cat}` must be one non-empty word")));
        }
        let fields = [c.x, c.y, c.z, b.length, b.width, b.height, b.heading, r.score].map(fixed);
        writeln!(out, "{} {} {} {}", r.frame, track, fields.join(" "), cat).expect("write to string");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_labels(path: &Path) -> Result<LabelFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut frame_count = None;
    let mut records = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let err = |m: String| Error::format(path, format!("line {}: {m}", lineno + 1));
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(n) = comment.trim().strip_prefix("frames ") {
                frame_count = Some(n.trim().parse().map_err(|_| err(format!("bad frame count `{n}`")))?);
            }
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 11 {
            return Err(err(format!("expected 11 fields, found {}", f.len())));
        }
        let frame = f[0].parse().map_err(|_| err(format!("bad frame `{}`", f[0])))?;
        let track_id = match f[1] {
            "-" => None,
            t => Some(t.parse().map_err(|_| err(format!("bad track id `{t}`")))?),
        };
        let mut v = [0.0f64; 8];
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = f[2 + k].parse().map_err(|_| err(format!("bad number `{}`", f[2 + k])))?;
        }
        let bbox = Box7::new(Point3::new(v[0], v[1], v[2]), v[3], v[4], v[5], v[6]).map_err(|e| err(e.to_string()))?;
        let category = (f[10] != UNASSIGNED).then(|| f[10].to_string());
        records.push(LabelRecord {
            frame,
            track_id,
            bbox,
            score: v[7],
            category,
        });
    }
    Ok(LabelFile { frame_count, records })
}
