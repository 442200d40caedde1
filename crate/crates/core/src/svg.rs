//! Static SVG rendering of scenarios, paths and attention snapshots.

use std::fmt::Write as _;

use crate::geometry::{Footprint, Point2, Pose2D, VehicleSpec};
use crate::scenario::Scenario;

pub const START_COLOR: &str = "magenta";
pub const TARGET_COLOR: &str = "cyan";
pub const OBSTACLE_COLOR: &str = "red";
pub const PATH_COLOR: &str = "blue";
pub const GHOST_COLOR: &str = "gray";
pub const ATTENTION_COLOR: &str = "orange";
/// Number of attention points highlighted.
pub const TOP_ATTENTION: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct RenderOptions {
    /// Pixels per meter.
    pub scale: f64,
    pub margin_m: f64,
    /// Draw every n-th path pose as a gray footprint; 0 disables.
    pub footprint_stride: usize,
    /// Extra poses drawn as magenta footprints (e.g. sampled initial poses).
    pub extra_starts: Vec<Pose2D>,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            scale: 20.0,
            margin_m: 3.0,
            footprint_stride: 10,
            extra_starts: Vec::new(),
        }
    }
}

/// Attention weights of one step, with each slot's obstacle point in world coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionSnapshot {
    pub points: Vec<Point2>,
    pub weights: Vec<f64>,
    pub mask: Vec<bool>,
}

impl AttentionSnapshot {
    /// Indices of the highest-weighted unmasked slots, at most [`TOP_ATTENTION`].
    pub fn top(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.points.len())
            .filter(|&i| self.mask.get(i).copied().unwrap_or(false) && self.weights[i] > 0.0)
            .collect();
        idx.sort_by(|&a, &b| self.weights[b].total_cmp(&self.weights[a]).then(a.cmp(&b)));
        idx.truncate(TOP_ATTENTION);
        idx
    }
}

struct View {
    min: Point2,
    height: f64,
    scale: f64,
}

impl View {
    fn map(&self, p: Point2) -> (f64, f64) {
        ((p.x - self.min.x) * self.scale, self.height - (p.y - self.min.y) * self.scale)
    }
}

fn polygon(out: &mut String, view: &View, pts: &[Point2], stroke: &str, fill: &str, opacity: f64) {
    let coords: Vec<String> = pts
        .iter()
        .map(|p| {
            let (x, y) = view.map(*p);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    let _ = writeln!(
        out,
        r#"<polygon points="{}" stroke="{stroke}" fill="{fill}" fill-opacity="{opacity}" stroke-width="1.5" stroke-linejoin="round"/>"#,
        coords.join(" ")
    );
}

/// Renders the scenario with an optional path and attention overlay.
pub fn render_svg(
    scenario: &Scenario,
    spec: &VehicleSpec,
    path: &[Pose2D],
    attention: Option<&AttentionSnapshot>,
    opts: &RenderOptions,
) -> String {
    let footprint = Footprint::new(spec).unwrap_or_else(|_| Footprint::new(&VehicleSpec::default()).expect("default spec is valid"));
    let mut pts: Vec<Point2> = scenario.obstacles.clone();
    for pose in [scenario.initial_pose, scenario.target_pose]
        .iter()
        .chain(path)
        .chain(&opts.extra_starts)
    {
        pts.extend(footprint.to_world(pose));
    }
    let (mut min, mut max) = (Point2::new(f64::INFINITY, f64::INFINITY), Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
    for p in &pts {
        min = Point2::new(min.x.min(p.x), min.y.min(p.y));
        max = Point2::new(max.x.max(p.x), max.y.max(p.y));
    }
    let m = opts.margin_m;
    min = Point2::new(min.x - m, min.y - m);
    max = Point2::new(max.x + m, max.y + m);
    let width = (max.x - min.x) * opts.scale;
    let height = (max.y - min.y) * opts.scale;
    let view = View {
        min,
        height,
        scale: opts.scale,
    };

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.2} {height:.2}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, "<title>{}</title>", xml_escape(&scenario.id));

    // Axes through the world origin.
    let (ox, oy) = view.map(Point2::new(0.0, 0.0));
    let _ = writeln!(
        out,
        r#"<g stroke="black" stroke-width="0.5" opacity="0.4"><line x1="0" y1="{oy:.2}" x2="{width:.2}" y2="{oy:.2}"/><line x1="{ox:.2}" y1="0" x2="{ox:.2}" y2="{height:.2}"/></g>"#
    );

    let _ = writeln!(out, r#"<g fill="{OBSTACLE_COLOR}">"#);
    for p in &scenario.obstacles {
        let (x, y) = view.map(*p);
        let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="1.5"/>"#);
    }
    let _ = writeln!(out, "</g>");

    if opts.footprint_stride > 0 && path.len() > 2 {
        for pose in path[1..path.len() - 1].iter().step_by(opts.footprint_stride) {
            polygon(&mut out, &view, &footprint.to_world(pose), GHOST_COLOR, "none", 0.0);
        }
    }
    if path.len() > 1 {
        let coords: Vec<String> = path
            .iter()
            .map(|p| {
                let (x, y) = view.map(p.position());
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" stroke="{PATH_COLOR}" fill="none" stroke-width="2"/>"#,
            coords.join(" ")
        );
    }
    for pose in &opts.extra_starts {
        polygon(&mut out, &view, &footprint.to_world(pose), START_COLOR, START_COLOR, 0.1);
    }
    polygon(&mut out, &view, &footprint.to_world(&scenario.target_pose), TARGET_COLOR, TARGET_COLOR, 0.2);
    polygon(&mut out, &view, &footprint.to_world(&scenario.initial_pose), START_COLOR, START_COLOR, 0.2);

    if let Some(att) = attention {
        let top = att.top();
        let wmax = top.first().map_or(1.0, |&i| att.weights[i]);
        let _ = writeln!(out, r#"<g fill="{ATTENTION_COLOR}" class="attention">"#);
        for i in top {
            let (x, y) = view.map(att.points[i]);
            let r = 3.0 + 5.0 * att.weights[i] / wmax;
            let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="{r:.2}" fill-opacity="0.8"/>"#);
        }
        let _ = writeln!(out, "</g>");
    }
    out.push_str("</svg>\n");
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
