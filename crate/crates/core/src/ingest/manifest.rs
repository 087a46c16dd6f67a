//! Tab-separated dataset manifests.
//!
//! Two layouts are recognised by their header row:
//!
//! ```text
//! id  path  label  split                      (slides or image files)
//! id  parent  x  y  width  height  label      (crops inside a parent slide)
//! ```
//!
//! Blank lines and lines starting with `#` are skipped. Line numbers in
//! errors are 1-based physical line numbers.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::label::{parse_label, ClassLabel};

pub const SLIDE_HEADER: [&str; 4] = ["id", "path", "label", "split"];
pub const CROP_HEADER: [&str; 7] = ["id", "parent", "x", "y", "width", "height", "label"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Validation,
    Test,
    Unassigned,
}

impl SplitTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Validation => "validation",
            SplitTag::Test => "test",
            SplitTag::Unassigned => "unassigned",
        }
    }
}

impl FromStr for SplitTag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(SplitTag::Train),
            "validation" | "val" => Ok(SplitTag::Validation),
            "test" => Ok(SplitTag::Test),
            "unassigned" | "" => Ok(SplitTag::Unassigned),
            other => Err(format!("unknown split tag {other:?}")),
        }
    }
}

impl fmt::Display for SplitTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlideRecord {
    pub id: String,
    pub image_path: PathBuf,
    pub reference_label: ClassLabel,
    pub split_tag: SplitTag,
}

/// Pixel rectangle `(x, y, width, height)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bounds {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CropRecord {
    pub id: String,
    pub parent_slide_id: String,
    pub bounds: Bounds,
    pub reference_label: ClassLabel,
}

/// Anything with an id and a reference label.
pub trait Labeled {
    fn id(&self) -> &str;
    fn label(&self) -> ClassLabel;
}

impl Labeled for SlideRecord {
    fn id(&self) -> &str {
        &self.id
    }
    fn label(&self) -> ClassLabel {
        self.reference_label
    }
}

impl Labeled for CropRecord {
    fn id(&self) -> &str {
        &self.id
    }
    fn label(&self) -> ClassLabel {
        self.reference_label
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Manifest {
    Slides(Vec<SlideRecord>),
    Crops(Vec<CropRecord>),
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, line)| (i + 1, line.trim_end_matches('\r')))
        .filter(|(_, line)| !line.trim().is_empty() && !line.trim_start().starts_with('#'))
}

fn parse_field<T: FromStr>(line: usize, name: &str, raw: &str) -> Result<T> {
    raw.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid {name} {raw:?}"),
    })
}

fn check_unique<'a>(ids: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::DuplicateId(id.to_string()));
        }
    }
    Ok(())
}

/// Parses manifest text, dispatching on the header row.
pub fn parse_manifest(text: &str) -> Result<Manifest> {
    let mut lines = data_lines(text);
    let (header_line, header) = lines.next().ok_or(Error::EmptyDataset)?;
    let columns: Vec<String> = header
        .split('\t')
        .map(|c| c.trim().to_ascii_lowercase())
        .collect();
    if columns == SLIDE_HEADER {
        let mut records = Vec::new();
        for (line, row) in lines {
            records.push(parse_slide_row(line, row)?);
        }
        check_unique(records.iter().map(|r| r.id.as_str()))?;
        Ok(Manifest::Slides(records))
    } else if columns == CROP_HEADER {
        let mut records = Vec::new();
        for (line, row) in lines {
            records.push(parse_crop_row(line, row)?);
        }
        check_unique(records.iter().map(|r| r.id.as_str()))?;
        Ok(Manifest::Crops(records))
    } else {
        Err(Error::Parse {
            line: header_line,
            message: format!(
                "unrecognised header; expected `{}` or `{}`",
                SLIDE_HEADER.join("\\t"),
                CROP_HEADER.join("\\t")
            ),
        })
    }
}

fn split_row(line: usize, row: &str, expected: usize) -> Result<Vec<&str>> {
    let fields: Vec<&str> = row.split('\t').collect();
    if fields.len() != expected {
        return Err(Error::Parse {
            line,
            message: format!("expected {expected} tab-separated fields, got {}", fields.len()),
        });
    }
    Ok(fields)
}

fn parse_slide_row(line: usize, row: &str) -> Result<SlideRecord> {
    let f = split_row(line, row, SLIDE_HEADER.len())?;
    let id = f[0].trim();
    let path = f[1].trim();
    if id.is_empty() || path.is_empty() {
        return Err(Error::Parse {
            line,
            message: "id and path must be non-empty".into(),
        });
    }
    let reference_label = parse_label(f[2]).map_err(|e| Error::at_line(line, e))?;
    let split_tag = f[3].parse().map_err(|message| Error::Parse { line, message })?;
    Ok(SlideRecord {
        id: id.to_string(),
        image_path: PathBuf::from(path),
        reference_label,
        split_tag,
    })
}

fn parse_crop_row(line: usize, row: &str) -> Result<CropRecord> {
    let f = split_row(line, row, CROP_HEADER.len())?;
    let id = f[0].trim();
    let parent = f[1].trim();
    if id.is_empty() || parent.is_empty() {
        return Err(Error::Parse {
            line,
            message: "id and parent must be non-empty".into(),
        });
    }
    let bounds = Bounds {
        x: parse_field(line, "x", f[2])?,
        y: parse_field(line, "y", f[3])?,
        width: parse_field(line, "width", f[4])?,
        height: parse_field(line, "height", f[5])?,
    };
    if bounds.width == 0 || bounds.height == 0 {
        return Err(Error::Parse {
            line,
            message: "crop width and height must be at least 1".into(),
        });
    }
    let reference_label = parse_label(f[6]).map_err(|e| Error::at_line(line, e))?;
    Ok(CropRecord {
        id: id.to_string(),
        parent_slide_id: parent.to_string(),
        bounds,
        reference_label,
    })
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    parse_manifest(&text)
}

pub fn load_slide_manifest(path: impl AsRef<Path>) -> Result<Vec<SlideRecord>> {
    match load_manifest(path.as_ref())? {
        Manifest::Slides(records) => Ok(records),
        Manifest::Crops(_) => Err(Error::Parse {
            line: 1,
            message: format!("{} is a crop manifest, expected slides", path.as_ref().display()),
        }),
    }
}

pub fn load_crop_manifest(path: impl AsRef<Path>) -> Result<Vec<CropRecord>> {
    match load_manifest(path.as_ref())? {
        Manifest::Crops(records) => Ok(records),
        Manifest::Slides(_) => Err(Error::Parse {
            line: 1,
            message: format!("{} is a slide manifest, expected crops", path.as_ref().display()),
        }),
    }
}

/// Checks every crop against its parent's dimensions.
pub fn validate_crops(
    crops: &[CropRecord],
    parent_dims: &HashMap<String, (usize, usize)>,
) -> Result<()> {
    for crop in crops {
        let &(w, h) = parent_dims
            .get(&crop.parent_slide_id)
            .ok_or_else(|| Error::Range(format!(
                "crop {} references unknown parent {}",
                crop.id, crop.parent_slide_id
            )))?;
        let b = crop.bounds;
        if b.x + b.width > w || b.y + b.height > h {
            return Err(Error::OutOfBounds {
                x: b.x,
                y: b.y,
                width: w,
                height: h,
            });
        }
    }
    Ok(())
}

/// Renders slide records in manifest form (header included).
pub fn format_slide_manifest(records: &[SlideRecord]) -> String {
    let mut out = SLIDE_HEADER.join("\t");
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            r.id,
            r.image_path.display(),
            r.reference_label.code(),
            r.split_tag
        ));
    }
    out
}

pub fn format_crop_manifest(records: &[CropRecord]) -> String {
    let mut out = CROP_HEADER.join("\t");
    out.push('\n');
    for r in records {
        let b = r.bounds;
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            r.id,
            r.parent_slide_id,
            b.x,
            b.y,
            b.width,
            b.height,
            r.reference_label.code()
        ));
    }
    out
}
