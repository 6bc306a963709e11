//! COCO-style annotation input, the free-region sidecar, and the JSONL
//! sample output.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Deserialize;
use serde_json::Value;

use super::generate::{AffordanceSample, SAMPLE_POINTS_MAX, SAMPLE_POINTS_MIN};
use super::{AffordanceError, AnnotatedFrame, BBox, Instance};
use crate::geometry::Point2;
use crate::scene::parse_error_parts;

pub type SampleRecord = AffordanceSample;

#[derive(Debug, Default, Deserialize)]
struct CocoFile {
    #[serde(default)]
    images: Vec<CocoImage>,
    #[serde(default)]
    annotations: Vec<CocoAnnotation>,
    #[serde(default)]
    categories: Vec<CocoCategory>,
}

#[derive(Debug, Deserialize)]
struct CocoImage {
    id: u64,
    width: u32,
    height: u32,
}

#[derive(Debug, Deserialize)]
struct CocoAnnotation {
    id: u64,
    image_id: u64,
    category_id: u64,
    bbox: [f64; 4],
    #[serde(default)]
    segmentation: Option<Value>,
}

#[derive(Debug, Deserialize)]
struct CocoCategory {
    id: u64,
    name: String,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    #[serde(default)]
    #[allow(dead_code)]
    version: Option<u32>,
    #[serde(default)]
    frames: BTreeMap<String, SidecarFrame>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SidecarFrame {
    #[serde(default)]
    free_regions: Vec<Vec<Point2>>,
    /// Mean depth per annotation id.
    #[serde(default)]
    depths: BTreeMap<String, f64>,
}

fn parse_json<T: for<'de> Deserialize<'de> + Default>(text: &str) -> Result<T, AffordanceError> {
    if text.trim().is_empty() {
        return Ok(T::default());
    }
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let (line, column, field, message) = parse_error_parts(&e);
        AffordanceError::Schema { line, column, field, message }
    })
}

/// First polygon of a COCO segmentation; RLE masks are ignored.
fn first_polygon(seg: &Value) -> Option<Vec<Point2>> {
    let polys = seg.as_array()?;
    polys.iter().find_map(|poly| {
        let coords: Vec<f64> = poly.as_array()?.iter().map(Value::as_f64).collect::<Option<_>>()?;
        (coords.len() >= 6 && coords.len().is_multiple_of(2)).then(|| coords.chunks(2).map(|c| Point2::new(c[0], c[1])).collect())
    })
}

/// Builds frames from COCO annotations plus the optional sidecar, in image order.
pub fn parse_frames(coco_text: &str, sidecar_text: Option<&str>) -> Result<Vec<AnnotatedFrame>, AffordanceError> {
    let coco: CocoFile = parse_json(coco_text)?;
    let sidecar: Sidecar = sidecar_text.map(parse_json).transpose()?.unwrap_or_default();
    let categories: BTreeMap<u64, &str> = coco.categories.iter().map(|c| (c.id, c.name.as_str())).collect();

    let mut frames: Vec<AnnotatedFrame> = coco
        .images
        .iter()
        .map(|img| AnnotatedFrame {
            id: img.id.to_string(),
            width: img.width,
            height: img.height,
            instances: vec![],
            free_regions: vec![],
        })
        .collect();
    let index: BTreeMap<u64, usize> = coco.images.iter().enumerate().map(|(k, img)| (img.id, k)).collect();

    for ann in &coco.annotations {
        let frame_id = ann.image_id.to_string();
        let Some(&k) = index.get(&ann.image_id) else {
            return Err(AffordanceError::InvalidFrame { frame: frame_id, message: format!("annotation {} references a missing image", ann.id) });
        };
        let Some(category) = categories.get(&ann.category_id) else {
            return Err(AffordanceError::InvalidFrame { frame: frame_id, message: format!("annotation {}: unknown category {}", ann.id, ann.category_id) });
        };
        let [x, y, w, h] = ann.bbox;
        let depth = sidecar.frames.get(&frame_id).and_then(|s| s.depths.get(&ann.id.to_string()).copied());
        frames[k].instances.push(Instance {
            id: ann.id,
            category: category.to_string(),
            bbox: BBox::from_xywh(x, y, w, h),
            mask: ann.segmentation.as_ref().and_then(first_polygon),
            depth,
        });
    }
    for (frame_id, extra) in sidecar.frames {
        let Some(frame) = frames.iter_mut().find(|f| f.id == frame_id) else {
            return Err(AffordanceError::InvalidFrame { frame: frame_id, message: "sidecar entry for an unknown image".into() });
        };
        frame.free_regions = extra.free_regions;
    }
    for f in &frames {
        f.validate()?;
    }
    Ok(frames)
}

fn read(path: &Path) -> Result<String, AffordanceError> {
    fs::read_to_string(path).map_err(|e| AffordanceError::Io { path: path.display().to_string(), message: e.to_string() })
}

pub fn load_frames(coco: &Path, sidecar: Option<&Path>) -> Result<Vec<AnnotatedFrame>, AffordanceError> {
    let coco_text = read(coco)?;
    let sidecar_text = sidecar.map(read).transpose()?;
    parse_frames(&coco_text, sidecar_text.as_deref())
}

/// One JSON object per line.
pub fn write_samples(samples: &[AffordanceSample]) -> String {
    let mut out = String::new();
    for s in samples {
        out.push_str(&serde_json::to_string(s).expect("samples serialize"));
        out.push('\n');
    }
    out
}

/// Parses JSONL samples and re-checks point counts and containment.
pub fn read_samples(text: &str) -> Result<Vec<AffordanceSample>, AffordanceError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = n + 1;
        let de = &mut serde_json::Deserializer::from_str(line);
        let s: AffordanceSample = serde_path_to_error::deserialize(de).map_err(|e| {
            let (_, column, field, message) = parse_error_parts(&e);
            AffordanceError::Schema { line: line_no, column, field, message }
        })?;
        let bad = |message: String| AffordanceError::InvalidFrame { frame: s.frame.clone(), message };
        if !(SAMPLE_POINTS_MIN..=SAMPLE_POINTS_MAX).contains(&s.points.len()) {
            return Err(bad(format!("line {line_no}: {} answer points", s.points.len())));
        }
        if let Some(p) = s.points.iter().find(|p| !s.truth.contains_strict(**p)) {
            return Err(bad(format!("line {line_no}: point ({}, {}) outside its truth region", p.x, p.y)));
        }
        out.push(s);
    }
    Ok(out)
}
