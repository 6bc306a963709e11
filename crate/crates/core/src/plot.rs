//! Top-down SVG rendering of an episode trace.
//!
//! Everything drawn comes from the trace alone: the header carries the map.
//! Output is a pure function of the trace, so replots are byte-identical.

use std::fmt::Write;

use crate::geometry::{AgentPose, Point2};
use crate::policy_local::{EpisodeTrace, Event, TraceError, TraceMap};
use crate::scene::polygon;

/// Pixels per meter.
const SCALE: f64 = 40.0;
const MARGIN: f64 = 10.0;
const SEGMENT_COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

struct Frame {
    origin: Point2,
    height_m: f64,
}

impl Frame {
    fn x(&self, p: Point2) -> f64 {
        MARGIN + (p.x - self.origin.x) * SCALE
    }

    fn y(&self, p: Point2) -> f64 {
        MARGIN + (self.height_m - (p.y - self.origin.y)) * SCALE
    }

    fn xy(&self, p: Point2) -> String {
        format!("{:.2},{:.2}", self.x(p), self.y(p))
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Path poses split at region switches; each segment keeps the region it
/// was heading to.
fn segments(trace: &EpisodeTrace) -> Vec<(Option<String>, Vec<AgentPose>)> {
    let mut out: Vec<(Option<String>, Vec<AgentPose>)> = vec![(None, vec![])];
    for e in trace.events() {
        match e {
            Event::Header { start, .. } => out.last_mut().expect("non-empty").1.push(*start),
            Event::GlobalDecision { region, .. } => {
                out.last_mut().expect("non-empty").0.get_or_insert_with(|| region.clone());
            }
            Event::RegionSwitch { to, .. } => {
                // the new segment starts where the previous one ended
                let last = out.last().and_then(|(_, p)| p.last().copied());
                out.push((Some(to.clone()), last.into_iter().collect()));
            }
            Event::Path { poses } => out.last_mut().expect("non-empty").1.extend(poses.iter().skip(1).copied()),
            _ => {}
        }
    }
    out
}

fn draw_map(svg: &mut String, map: &TraceMap, f: &Frame) {
    let cs = map.cell_size * SCALE;
    let _ = writeln!(svg, r##"<g id="walls" fill="#444">"##);
    for (r, row) in map.raster.iter().enumerate() {
        // picture order: row 0 is the top of the map
        let top = MARGIN + r as f64 * cs;
        let bytes = row.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            if bytes[i] != b'#' {
                i += 1;
                continue;
            }
            let start = i;
            while i < bytes.len() && bytes[i] == b'#' {
                i += 1;
            }
            let _ = writeln!(
                svg,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}"/>"#,
                MARGIN + start as f64 * cs,
                top,
                (i - start) as f64 * cs,
                cs
            );
        }
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(svg, r##"<g id="regions" fill="none" stroke="#999" stroke-dasharray="4 3" font-size="11" font-family="sans-serif">"##);
    for r in &map.regions {
        let pts: Vec<String> = r.polygon.iter().map(|p| f.xy(*p)).collect();
        let _ = writeln!(svg, r#"<polygon points="{}"/>"#, pts.join(" "));
        let c = polygon::centroid(&r.polygon);
        let label = r.label.as_deref().unwrap_or(&r.id);
        let _ = writeln!(
            svg,
            r##"<text x="{:.2}" y="{:.2}" fill="#666" stroke="none" text-anchor="middle">{}</text>"##,
            f.x(c),
            f.y(c),
            escape(label)
        );
    }
    let _ = writeln!(svg, "</g>");
}

/// Renders the trace as an SVG document.
pub fn render_svg(trace: &EpisodeTrace) -> Result<String, TraceError> {
    let (map, target, radius, task) = trace
        .events()
        .find_map(|e| match e {
            Event::Header { map, target, success_radius, task_id, .. } => Some((map, *target, *success_radius, task_id)),
            _ => None,
        })
        .ok_or(TraceError::Missing("header"))?;
    let cols = map.raster.first().map_or(0, |r| r.len());
    let rows = map.raster.len();
    let f = Frame { origin: map.origin, height_m: rows as f64 * map.cell_size };
    let width = cols as f64 * map.cell_size * SCALE + 2.0 * MARGIN;
    let height = rows as f64 * map.cell_size * SCALE + 2.0 * MARGIN + 20.0;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    draw_map(&mut svg, map, &f);

    let _ = writeln!(
        svg,
        r##"<circle id="target" cx="{:.2}" cy="{:.2}" r="{:.2}" fill="#2ca02c" fill-opacity="0.12" stroke="#2ca02c"/>"##,
        f.x(target),
        f.y(target),
        radius * SCALE
    );

    let segs = segments(trace);
    let _ = writeln!(svg, r#"<g id="path" fill="none" stroke-width="2" font-size="11" font-family="sans-serif">"#);
    for (k, (region, poses)) in segs.iter().enumerate() {
        let color = SEGMENT_COLORS[k % SEGMENT_COLORS.len()];
        if poses.len() >= 2 {
            let pts: Vec<String> = poses.iter().map(|p| f.xy(p.position())).collect();
            let dash = if k % 2 == 1 { r#" stroke-dasharray="6 3""# } else { "" };
            let _ = writeln!(svg, r#"<polyline class="segment" data-segment="{k}" points="{}" stroke="{color}"{dash}/>"#, pts.join(" "));
        }
        if segs.len() > 1 {
            if let Some(p) = poses.first() {
                let label = format!("segment {}: {}", k + 1, region.as_deref().unwrap_or("?"));
                let _ = writeln!(
                    svg,
                    r#"<text x="{:.2}" y="{:.2}" fill="{color}">{}</text>"#,
                    f.x(p.position()) + 6.0,
                    f.y(p.position()) - 6.0,
                    escape(&label)
                );
            }
        }
    }
    let _ = writeln!(svg, "</g>");

    let _ = writeln!(svg, r##"<g id="markers" stroke="#000" stroke-width="1">"##);
    for e in trace.events() {
        match e {
            Event::Header { start, .. } => {
                let _ = writeln!(
                    svg,
                    r##"<circle class="start" cx="{:.2}" cy="{:.2}" r="6" fill="#ffd700"/>"##,
                    f.x(start.position()),
                    f.y(start.position())
                );
            }
            Event::Waypoint { point, .. } => {
                let _ = writeln!(svg, r##"<circle class="waypoint" cx="{:.2}" cy="{:.2}" r="4" fill="#fff"/>"##, f.x(*point), f.y(*point));
            }
            Event::Scan { pose, visible, .. } => {
                let fill = if *visible > 0 { "#ff7f0e" } else { "#bbb" };
                let _ = writeln!(
                    svg,
                    r#"<rect class="scan" x="{:.2}" y="{:.2}" width="6" height="6" fill="{fill}"/>"#,
                    f.x(pose.position()) - 3.0,
                    f.y(pose.position()) - 3.0
                );
            }
            Event::Goal { goal, .. } => {
                let (x, y) = (f.x(*goal), f.y(*goal));
                let _ = writeln!(
                    svg,
                    r##"<path class="goal" d="M{:.2},{:.2} L{:.2},{:.2} M{:.2},{:.2} L{:.2},{:.2}" stroke="#d62728" stroke-width="3"/>"##,
                    x - 6.0,
                    y - 6.0,
                    x + 6.0,
                    y + 6.0,
                    x - 6.0,
                    y + 6.0,
                    x + 6.0,
                    y - 6.0
                );
            }
            _ => {}
        }
    }
    let _ = writeln!(svg, "</g>");

    let outcome = trace.events().find_map(|e| match e {
        Event::Terminate { ne, success, .. } => Some(format!("NE {ne:.2} m, {}", if *success { "success" } else { "failure" })),
        _ => None,
    });
    let caption = match outcome {
        Some(o) => format!("{task}: {o}"),
        None => task.clone(),
    };
    let _ = writeln!(
        svg,
        r#"<text x="{MARGIN:.0}" y="{:.2}" font-size="13" font-family="sans-serif">{}</text>"#,
        height - 6.0,
        escape(&caption)
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}
