//! Detection, track, tag, feature-track and homography files.
//!
//! Boxes use the MOT-challenge layout `frame,id,x,y,w,h,conf`; extra trailing
//! columns are ignored, `#` lines are comments and header rows are skipped.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, Detection, Homography};
use crate::klt::FeatureTrack;
use crate::metrics::Annotation;
use crate::pipeline::TrackRow;
use crate::track::{LinkTag, TrackerKind};

pub const BOX_HEADER: &str = "frame,id,x,y,w,h,conf";
pub const TAG_HEADER: &str = "frame,id,tracker";

/// One parsed box line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxRecord {
    pub frame: u32,
    pub id: i64,
    pub bbox: BoundingBox,
    pub confidence: f64,
}

impl BoxRecord {
    pub fn annotation(&self) -> Annotation {
        Annotation { frame: self.frame, id: self.id, bbox: self.bbox }
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line, msg: msg.into() }
}

/// Data records of a comma-separated file with their 1-based line numbers.
/// Header rows (first field starting with a letter) are skipped.
fn records(text: &str, path: &Path, min: usize) -> Result<Vec<(usize, csv::StringRecord)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let first = rec.get(0).unwrap_or("");
        if (rec.len() == 1 && first.is_empty()) || first.starts_with(|c: char| c.is_ascii_alphabetic()) {
            continue;
        }
        if rec.len() < min {
            return Err(parse_err(path, line, format!("expected at least {min} columns, found {}", rec.len())));
        }
        out.push((line, rec));
    }
    Ok(out)
}

fn num<T: std::str::FromStr>(path: &Path, line: usize, s: &str, what: &str) -> Result<T> {
    s.parse().map_err(|_| parse_err(path, line, format!("bad {what} {s:?}")))
}

fn finite(path: &Path, line: usize, s: &str, what: &str) -> Result<f64> {
    let v: f64 = num(path, line, s, what)?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("non-finite {what}")));
    }
    Ok(v)
}

/// Parses box records from text; `path` only labels errors.
pub fn parse_boxes(text: &str, path: &Path) -> Result<Vec<BoxRecord>> {
    let mut out = Vec::new();
    for (n, f) in records(text, path, 7)? {
        let frame: u32 = num(path, n, &f[0], "frame")?;
        let id: i64 = num(path, n, &f[1], "id")?;
        let x = finite(path, n, &f[2], "x")?;
        let y = finite(path, n, &f[3], "y")?;
        let w = finite(path, n, &f[4], "width")?;
        let h = finite(path, n, &f[5], "height")?;
        let confidence = finite(path, n, &f[6], "confidence")?;
        if w <= 0.0 || h <= 0.0 {
            return Err(parse_err(path, n, "non-positive size"));
        }
        out.push(BoxRecord { frame, id, bbox: BoundingBox { x, y, w, h }, confidence });
    }
    Ok(out)
}

pub fn read_boxes(path: &Path) -> Result<Vec<BoxRecord>> {
    parse_boxes(&std::fs::read_to_string(path)?, path)
}

/// Detections grouped by frame, in file order within a frame.
pub fn parse_detections(path: &Path) -> Result<BTreeMap<u32, Vec<Detection>>> {
    let mut out: BTreeMap<u32, Vec<Detection>> = BTreeMap::new();
    for r in read_boxes(path)? {
        out.entry(r.frame).or_default().push(Detection { frame_index: r.frame, bbox: r.bbox, confidence: r.confidence });
    }
    Ok(out)
}

pub fn read_annotations(path: &Path) -> Result<Vec<Annotation>> {
    Ok(read_boxes(path)?.iter().map(BoxRecord::annotation).collect())
}

pub fn format_boxes(records: &[BoxRecord]) -> String {
    let mut s = String::from(BOX_HEADER);
    s.push('\n');
    for r in records {
        let b = r.bbox;
        let _ = writeln!(s, "{},{},{},{},{},{},{}", r.frame, r.id, b.x, b.y, b.w, b.h, r.confidence);
    }
    s
}

pub fn write_boxes(records: &[BoxRecord], path: &Path) -> Result<()> {
    std::fs::write(path, format_boxes(records))?;
    Ok(())
}

/// `tracks.csv` -> `tracks.tags.csv`.
pub fn tags_path(tracks: &Path) -> PathBuf {
    let stem = tracks.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    tracks.with_file_name(format!("{stem}.tags.csv"))
}

/// Writes the track file and its tracker-tag sidecar, both sorted by `(frame, id)`.
pub fn write_tracks(rows: &[TrackRow], path: &Path) -> Result<()> {
    let mut rows = rows.to_vec();
    rows.sort_by_key(|r| (r.frame, r.id));
    let records: Vec<BoxRecord> =
        rows.iter().map(|r| BoxRecord { frame: r.frame, id: r.id as i64, bbox: r.bbox, confidence: r.confidence }).collect();
    write_boxes(&records, path)?;
    let mut tags = String::from(TAG_HEADER);
    tags.push('\n');
    for r in &rows {
        let _ = writeln!(tags, "{},{},{}", r.frame, r.id, r.tag.code());
    }
    std::fs::write(tags_path(path), tags)?;
    Ok(())
}

fn parse_tag(path: &Path, line: usize, s: &str) -> Result<LinkTag> {
    match s {
        "new" => Ok(LinkTag::New),
        "A" => Ok(LinkTag::Linked(TrackerKind::Appearance)),
        "K" => Ok(LinkTag::Linked(TrackerKind::Klt)),
        _ => Err(parse_err(path, line, format!("unknown tracker tag {s:?}"))),
    }
}

/// Tag sidecar as `(frame, id) -> tag`.
pub fn read_tags(path: &Path) -> Result<BTreeMap<(u32, u32), LinkTag>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = BTreeMap::new();
    for (n, f) in records(&text, path, 3)? {
        out.insert((num(path, n, &f[0], "frame")?, num(path, n, &f[1], "id")?), parse_tag(path, n, &f[2])?);
    }
    Ok(out)
}

/// Reads a track file together with its sidecar.
pub fn read_tracks(path: &Path) -> Result<Vec<TrackRow>> {
    let tags = read_tags(&tags_path(path))?;
    read_boxes(path)?
        .into_iter()
        .map(|r| {
            let id = u32::try_from(r.id).map_err(|_| parse_err(path, 0, format!("negative track id {}", r.id)))?;
            let tag = *tags.get(&(r.frame, id)).ok_or_else(|| parse_err(path, 0, format!("no tag for frame {} id {id}", r.frame)))?;
            Ok(TrackRow { frame: r.frame, id, bbox: r.bbox, confidence: r.confidence, tag })
        })
        .collect()
}

/// Feature tracks `frame_t,x_prev,y_prev,x_t,y_t`, grouped by `frame_t`.
pub fn parse_feature_tracks(path: &Path) -> Result<BTreeMap<u32, Vec<FeatureTrack>>> {
    let text = std::fs::read_to_string(path)?;
    let mut out: BTreeMap<u32, Vec<FeatureTrack>> = BTreeMap::new();
    for (n, f) in records(&text, path, 5)? {
        let frame: u32 = num(path, n, &f[0], "frame")?;
        let v: Vec<f64> = (1..5).map(|i| finite(path, n, &f[i], "coordinate")).collect::<Result<_>>()?;
        out.entry(frame).or_default().push(FeatureTrack::new(frame, (v[0], v[1]), (v[2], v[3])));
    }
    Ok(out)
}

pub fn write_feature_tracks(tracks: &[FeatureTrack], path: &Path) -> Result<()> {
    let mut s = String::from("frame,x_prev,y_prev,x,y\n");
    for t in tracks {
        let _ = writeln!(s, "{},{},{},{},{}", t.frame, t.prev.0, t.prev.1, t.next.0, t.next.1);
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Nine numbers, row-major, separated by whitespace or commas; `#` starts a comment.
pub fn read_homography(path: &Path) -> Result<Homography> {
    let text = std::fs::read_to_string(path)?;
    let mut vals = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line.split([',', ' ', '\t']).filter(|s| !s.is_empty()) {
            vals.push(finite(path, i + 1, tok, "entry")?);
        }
    }
    let m: [f64; 9] = vals
        .try_into()
        .map_err(|v: Vec<f64>| parse_err(path, 0, format!("expected 9 entries, found {}", v.len())))?;
    Ok(Homography(m))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(text: &str) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        std::fs::write(&p, text).unwrap();
        (dir, p)
    }

    #[test]
    fn detections() {
        let (_d, p) = tmp("1,-1,10,20,30,80,0.9\n");
        let m = parse_detections(&p).unwrap();
        assert_eq!(m[&1].len(), 1);
        assert_eq!(m[&1][0].bbox, BoundingBox { x: 10.0, y: 20.0, w: 30.0, h: 80.0 });
        assert_eq!(m[&1][0].confidence, 0.9);

        let (_d, p) = tmp("");
        assert!(parse_detections(&p).unwrap().is_empty());

        let (_d, p) = tmp("1,-1,10,20,-5,80,1\n");
        let e = parse_detections(&p).unwrap_err().to_string();
        assert!(e.contains("non-positive size") && e.contains("line 1"), "{e}");

        let (_d, p) = tmp("# header\nframe,id,x,y,w,h,conf\n2,-1,1,1,1,1,1,-1,-1,-1\n3,-1,1,1\n");
        let e = parse_detections(&p).unwrap_err().to_string();
        assert!(e.contains("line 4"), "{e}");
    }

    #[test]
    fn tracks_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("tracks.csv");
        write_tracks(&[], &p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), format!("{BOX_HEADER}\n"));
        assert_eq!(std::fs::read_to_string(tags_path(&p)).unwrap(), format!("{TAG_HEADER}\n"));

        let rows = vec![
            TrackRow { frame: 2, id: 0, bbox: BoundingBox { x: 0.1, y: 1.0 / 3.0, w: 10.5, h: 7.25 }, confidence: 0.9, tag: LinkTag::Linked(TrackerKind::Klt) },
            TrackRow { frame: 1, id: 1, bbox: BoundingBox { x: 5.0, y: 6.0, w: 1e-3, h: 2.0 }, confidence: 1.0, tag: LinkTag::New },
            TrackRow { frame: 1, id: 0, bbox: BoundingBox { x: 0.0, y: 0.0, w: 10.5, h: 7.25 }, confidence: 1.0, tag: LinkTag::New },
        ];
        write_tracks(&rows, &p).unwrap();
        let back = read_tracks(&p).unwrap();
        let mut sorted = rows.clone();
        sorted.sort_by_key(|r| (r.frame, r.id));
        assert_eq!(back, sorted);
        assert_eq!(std::fs::read_to_string(tags_path(&p)).unwrap(), "frame,id,tracker\n1,0,new\n1,1,new\n2,0,K\n");
    }

    #[test]
    fn feature_tracks_and_homography() {
        let (_d, p) = tmp("frame,x_prev,y_prev,x,y\n2,1,2,3,4\n2,5,6,7,8\n3,0,0,1,1\n");
        let m = parse_feature_tracks(&p).unwrap();
        assert_eq!(m[&2].len(), 2);
        assert_eq!(m[&3][0].next, (1.0, 1.0));

        let (_d, p) = tmp("1 0 0\n0 1 0\n0 0 1\n");
        assert_eq!(read_homography(&p).unwrap().0, [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let (_d, p) = tmp("1 0 0\n");
        assert!(read_homography(&p).is_err());
    }
}
