//! Reeds–Shepp shortest paths for a car that can drive forward and backward
//! with a bounded turning radius.
//!
//! Path words are generated in normalized coordinates (unit turning radius)
//! from five base families (CSC, CCC, CCCC, CCSC, CCSCC). Each base formula is
//! evaluated under the time-flip, reflection and backwards symmetries so the
//! search covers all 48 words.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::geometry::{wrap_angle, Pose2D};

const ZERO: f64 = 1e-10;
/// Normalized segment lengths below this are dropped from returned paths.
const SEGMENT_EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SegmentKind {
    Left,
    Straight,
    Right,
}

impl SegmentKind {
    pub fn symbol(self) -> char {
        match self {
            SegmentKind::Left => 'L',
            SegmentKind::Straight => 'S',
            SegmentKind::Right => 'R',
        }
    }

    /// Curvature sign: +1 left, -1 right, 0 straight.
    pub fn turn_sign(self) -> f64 {
        match self {
            SegmentKind::Left => 1.0,
            SegmentKind::Straight => 0.0,
            SegmentKind::Right => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RsSegment {
    pub kind: SegmentKind,
    /// +1 forward, -1 backward.
    pub direction: i8,
    /// Normalized length (radians for arcs, radius units for straights), >= 0.
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RsPath {
    pub segments: Vec<RsSegment>,
    pub radius: f64,
    /// Length in meters.
    pub total_length: f64,
}

impl RsPath {
    pub fn word(&self) -> String {
        self.segments
            .iter()
            .map(|s| format!("{}{}", s.kind.symbol(), if s.direction > 0 { '+' } else { '-' }))
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// End pose reached by following the path from `start`.
    pub fn endpoint(&self, start: &Pose2D) -> Pose2D {
        let mut pose = *start;
        for seg in &self.segments {
            pose = advance(&pose, seg.kind, seg.direction as f64 * seg.length * self.radius, self.radius);
        }
        pose
    }
}

use SegmentKind::{Left as L, Right as R, Straight as S};

/// Segment-kind patterns indexed as in the classical word table.
const WORDS: [&[SegmentKind]; 18] = [
    &[L, R, L],
    &[R, L, R],
    &[L, R, L, R],
    &[R, L, R, L],
    &[L, R, S, L],
    &[R, L, S, R],
    &[L, S, R, L],
    &[R, S, L, R],
    &[L, R, S, R],
    &[R, L, S, L],
    &[R, S, R, L],
    &[L, S, L, R],
    &[L, S, R],
    &[R, S, L],
    &[L, S, L],
    &[R, S, R],
    &[L, R, S, L, R],
    &[R, L, S, R, L],
];

fn mod2pi(x: f64) -> f64 {
    let v = x % (2.0 * PI);
    if v < -PI {
        v + 2.0 * PI
    } else if v > PI {
        v - 2.0 * PI
    } else {
        v
    }
}

fn polar(x: f64, y: f64) -> (f64, f64) {
    (x.hypot(y), y.atan2(x))
}

fn tau_omega(u: f64, v: f64, xi: f64, eta: f64, phi: f64) -> (f64, f64) {
    let delta = mod2pi(u - v);
    let a = u.sin() - delta.sin();
    let b = u.cos() - delta.cos() - 1.0;
    let t1 = (eta * a - xi * b).atan2(xi * a + eta * b);
    let t2 = 2.0 * (delta.cos() - v.cos() - u.cos()) + 3.0;
    let tau = if t2 < 0.0 { mod2pi(t1 + PI) } else { mod2pi(t1) };
    (tau, mod2pi(tau - u + v - phi))
}

// Base formulas. Each returns signed normalized (t, u, v) for its word.

fn lp_sp_lp(x: f64, y: f64, phi: f64) -> Option<(f64, f64, f64)> {
    let (u, t) = polar(x - phi.sin(), y - 1.0 + phi.cos());
    if t >= -ZERO {
        let v = mod2pi(phi - t);
        if v >= -ZERO {
            return Some((t, u, v));
        }
    }
    None
}

fn lp_sp_rp(x: f64, y: f64, phi: f64) -> Option<(f64, f64, f64)> {
    let (u1, t1) = polar(x + phi.sin(), y - 1.0 - phi.cos());
    let u1 = u1 * u1;
    if u1 >= 4.0 {
        let u = (u1 - 4.0).sqrt();
        let theta = 2f64.atan2(u);
        let t = mod2pi(t1 + theta);
        let v = mod2pi(t - phi);
        if t >= -ZERO && v >= -ZERO {
            return Some((t, u, v));
        }
    }
    None
}

fn lp_rm_l(x: f64, y: f64, phi: f64) -> Option<(f64, f64, f64)> {
    let xi = x - phi.sin();
    let eta = y - 1.0 + phi.cos();
    let (u1, theta) = polar(xi, eta);
    if u1 <= 4.0 {
        let u = -2.0 * (0.25 * u1).asin();
        let t = mod2pi(theta + 0.5 * u + PI);
        let v = mod2pi(phi - t + u);
        if t >= -ZERO && u <= ZERO {
            return Some((t, u, v));
        }
    }
    None
}

fn lp_rup_lum_rm(x: f64, y: f64, phi: f64) -> Option<(f64, f64, f64)> {
    let xi = x + phi.sin();
    let eta = y - 1.0 - phi.cos();
    let rho = 0.25 * (2.0 + xi.hypot(eta));
    if rho <= 1.0 {
        let u = rho.acos();
        let (t, v) = tau_omega(u, -u, xi, eta, phi);
        if t >= -ZERO && v <= ZERO {
            return Some((t, u, v));
        }
    }
    None
}

fn lp_rum_lum_rp(x: f64, y: f64, phi: f64) -> Option<(f64, f64, f64)> {
    let xi = x + phi.sin();
    let eta = y - 1.0 - phi.cos();
    let rho = (20.0 - xi * xi - eta * eta) / 16.0;
    if (0.0..=1.0).contains(&rho) {
        let u = -rho.acos();
        if u >= -FRAC_PI_2 {
            let (t, v) = tau_omega(u, u, xi, eta, phi);
            if t >= -ZERO && v >= -ZERO {
                return Some((t, u, v));
            }
        }
    }
    None
}

fn lp_rm_sm_lm(x: f64, y: f64, phi: f64) -> Option<(f64, f64, f64)> {
    let xi = x - phi.sin();
    let eta = y - 1.0 + phi.cos();
    let (rho, theta) = polar(xi, eta);
    if rho >= 2.0 {
        let r = (rho * rho - 4.0).sqrt();
        let u = 2.0 - r;
        let t = mod2pi(theta + r.atan2(-2.0));
        let v = mod2pi(phi - FRAC_PI_2 - t);
        if t >= -ZERO && u <= ZERO && v <= ZERO {
            return Some((t, u, v));
        }
    }
    None
}

fn lp_rm_sm_rm(x: f64, y: f64, phi: f64) -> Option<(f64, f64, f64)> {
    let xi = x + phi.sin();
    let eta = y - 1.0 - phi.cos();
    let (rho, theta) = polar(-eta, xi);
    if rho >= 2.0 {
        let t = theta;
        let u = 2.0 - rho;
        let v = mod2pi(t + FRAC_PI_2 - phi);
        if t >= -ZERO && u <= ZERO && v <= ZERO {
            return Some((t, u, v));
        }
    }
    None
}

fn lp_rm_s_lm_rp(x: f64, y: f64, phi: f64) -> Option<(f64, f64, f64)> {
    let xi = x + phi.sin();
    let eta = y - 1.0 - phi.cos();
    let (rho, _) = polar(xi, eta);
    if rho >= 2.0 {
        let u = 4.0 - (rho * rho - 4.0).sqrt();
        if u <= ZERO {
            let t = mod2pi(((4.0 - u) * xi - 2.0 * eta).atan2(-2.0 * xi + (u - 4.0) * eta));
            let v = mod2pi(t - phi);
            if t >= -ZERO && v >= -ZERO {
                return Some((t, u, v));
            }
        }
    }
    None
}

/// A candidate word: index into [`WORDS`] and signed normalized lengths.
#[derive(Debug, Clone)]
struct Candidate {
    word: usize,
    lengths: Vec<f64>,
}

impl Candidate {
    fn length(&self) -> f64 {
        self.lengths.iter().map(|l| l.abs()).sum()
    }
}

type Base = fn(f64, f64, f64) -> Option<(f64, f64, f64)>;

/// Evaluates `base` under the four (time-flip × reflect) variants and pushes
/// every feasible word. `build` maps (t, u, v) to the signed segment list.
fn symmetric(
    out: &mut Vec<Candidate>,
    (x, y, phi): (f64, f64, f64),
    base: Base,
    words: (usize, usize),
    build: impl Fn(f64, f64, f64) -> Vec<f64>,
) {
    let variants = [
        (x, y, phi, words.0, 1.0),
        (-x, y, -phi, words.0, -1.0),
        (x, -y, -phi, words.1, 1.0),
        (-x, -y, phi, words.1, -1.0),
    ];
    for (vx, vy, vphi, word, sign) in variants {
        if let Some((t, u, v)) = base(vx, vy, vphi) {
            let lengths = build(t, u, v).into_iter().map(|l| l * sign).collect();
            out.push(Candidate { word, lengths });
        }
    }
}

fn candidates(x: f64, y: f64, phi: f64) -> Vec<Candidate> {
    let mut out = Vec::with_capacity(48);
    let fwd = (x, y, phi);
    let xb = x * phi.cos() + y * phi.sin();
    let yb = x * phi.sin() - y * phi.cos();
    let bwd = (xb, yb, phi);
    let h = FRAC_PI_2;

    // CSC
    symmetric(&mut out, fwd, lp_sp_lp, (14, 15), |t, u, v| vec![t, u, v]);
    symmetric(&mut out, fwd, lp_sp_rp, (12, 13), |t, u, v| vec![t, u, v]);
    // CCC
    symmetric(&mut out, fwd, lp_rm_l, (0, 1), |t, u, v| vec![t, u, v]);
    symmetric(&mut out, bwd, lp_rm_l, (0, 1), |t, u, v| vec![v, u, t]);
    // CCCC
    symmetric(&mut out, fwd, lp_rup_lum_rm, (2, 3), |t, u, v| vec![t, u, -u, v]);
    symmetric(&mut out, fwd, lp_rum_lum_rp, (2, 3), |t, u, v| vec![t, u, u, v]);
    // CCSC
    symmetric(&mut out, fwd, lp_rm_sm_lm, (4, 5), |t, u, v| vec![t, -h, u, v]);
    symmetric(&mut out, fwd, lp_rm_sm_rm, (8, 9), |t, u, v| vec![t, -h, u, v]);
    symmetric(&mut out, bwd, lp_rm_sm_lm, (6, 7), |t, u, v| vec![v, u, -h, t]);
    symmetric(&mut out, bwd, lp_rm_sm_rm, (10, 11), |t, u, v| vec![v, u, -h, t]);
    // CCSCC
    symmetric(&mut out, fwd, lp_rm_s_lm_rp, (16, 17), |t, u, v| vec![t, -h, u, -h, v]);
    out
}

fn to_path(c: &Candidate, radius: f64) -> RsPath {
    let segments: Vec<RsSegment> = WORDS[c.word]
        .iter()
        .zip(&c.lengths)
        .filter(|(_, l)| l.abs() > SEGMENT_EPS)
        .map(|(&kind, &l)| RsSegment {
            kind,
            direction: if l >= 0.0 { 1 } else { -1 },
            length: l.abs(),
        })
        .collect();
    let total_length = segments.iter().map(|s| s.length).sum::<f64>() * radius;
    RsPath {
        segments,
        radius,
        total_length,
    }
}

fn normalized_goal(start: &Pose2D, goal: &Pose2D, radius: f64) -> (f64, f64, f64) {
    let local = start.relative(goal);
    (local.x / radius, local.y / radius, local.theta)
}

/// Shortest Reeds–Shepp path from `start` to `goal` with turning radius `radius`.
/// Ties keep the earliest word in enumeration order.
pub fn rs_shortest(start: &Pose2D, goal: &Pose2D, radius: f64) -> RsPath {
    assert!(radius > 0.0, "turning radius must be positive");
    let (x, y, phi) = normalized_goal(start, goal, radius);
    let mut best: Option<(f64, Candidate)> = None;
    for c in candidates(x, y, phi) {
        let len = c.length();
        if best.as_ref().is_none_or(|(b, _)| len < *b) {
            best = Some((len, c));
        }
    }
    let (_, c) = best.expect("the Reeds-Shepp word set always contains a feasible word");
    to_path(&c, radius)
}

/// All feasible words for the pair, in enumeration order.
pub fn rs_all(start: &Pose2D, goal: &Pose2D, radius: f64) -> Vec<RsPath> {
    let (x, y, phi) = normalized_goal(start, goal, radius);
    candidates(x, y, phi).iter().map(|c| to_path(c, radius)).collect()
}

/// Moves along a constant-curvature segment by signed arc length `ds` (meters).
pub fn advance(pose: &Pose2D, kind: SegmentKind, ds: f64, radius: f64) -> Pose2D {
    let (s, c) = pose.theta.sin_cos();
    match kind {
        SegmentKind::Straight => Pose2D {
            x: pose.x + ds * c,
            y: pose.y + ds * s,
            theta: pose.theta,
        },
        _ => {
            let k = kind.turn_sign();
            let dphi = k * ds / radius;
            let th = pose.theta + dphi;
            Pose2D {
                x: pose.x + k * radius * (th.sin() - s),
                y: pose.y - k * radius * (th.cos() - c),
                theta: wrap_angle(th),
            }
        }
    }
}

/// A sampled path pose with the motion sign and segment it belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RsSample {
    pub pose: Pose2D,
    pub direction: i8,
    pub segment: usize,
}

/// Samples `path` from `start` at arc-length spacing `<= step`, including both
/// endpoints and every segment boundary.
pub fn sample_rs(path: &RsPath, start: &Pose2D, step: f64) -> Vec<RsSample> {
    assert!(step > 0.0, "sampling step must be positive");
    let first_dir = path.segments.first().map_or(0, |s| s.direction);
    let mut out = vec![RsSample {
        pose: *start,
        direction: first_dir,
        segment: 0,
    }];
    let mut seg_start = *start;
    for (i, seg) in path.segments.iter().enumerate() {
        let len = seg.length * path.radius;
        let n = (len / step).ceil().max(1.0) as usize;
        let signed = seg.direction as f64 * len;
        for k in 1..=n {
            let ds = signed * k as f64 / n as f64;
            out.push(RsSample {
                pose: advance(&seg_start, seg.kind, ds, path.radius),
                direction: seg.direction,
                segment: i,
            });
        }
        seg_start = out.last().expect("nonempty").pose;
    }
    out
}
