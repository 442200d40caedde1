//! Independent reference implementations used by the integration and
//! acceptance tests. Nothing here calls into the library's algorithms.

use std::f64::consts::PI;

/// Vehicle constants written out by hand.
pub const WHEELBASE: f64 = 3.0;
pub const WIDTH: f64 = 2.0;
pub const REAR_OVERHANG: f64 = 1.025;
pub const FRONT_OVERHANG: f64 = 3.925;
pub const CROP_L: f64 = 0.3;
pub const CROP_W: f64 = 0.2;

pub fn max_steer() -> f64 {
    32.0 * PI / 180.0
}

/// `(steer increment, speed)` for each action index.
pub fn action_row(i: usize) -> (f64, f64) {
    let d = 8.0 * PI / 180.0;
    [
        (-d, 0.8),
        (0.0, 0.8),
        (d, 0.8),
        (-d, -0.8),
        (0.0, -0.8),
        (d, -0.8),
        (-d, 0.0),
        (d, 0.0),
    ][i]
}

fn wrap(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let mut v = (a + PI) % (2.0 * PI);
    if v <= 0.0 {
        v += 2.0 * PI;
    }
    v - PI
}

/// One bicycle-model step: `(x, y, theta, delta)`.
pub fn bicycle_step(s: (f64, f64, f64, f64), action: usize) -> (f64, f64, f64, f64) {
    let (x, y, th, d) = s;
    let (dd, v) = action_row(action);
    let m = max_steer();
    let d2 = (d + dd).max(-m).min(m);
    let ds = v * 0.1;
    (
        x + ds * th.cos(),
        y + ds * th.sin(),
        wrap(th + ds / WHEELBASE * d2.tan()),
        d2,
    )
}

/// Chamfered footprint vertices in the vehicle frame, counter-clockwise.
pub fn footprint() -> Vec<(f64, f64)> {
    let (b, f, h) = (-REAR_OVERHANG, FRONT_OVERHANG, WIDTH / 2.0);
    vec![
        (b + CROP_L, -h),
        (f - CROP_L, -h),
        (f, -h + CROP_W),
        (f, h - CROP_W),
        (f - CROP_L, h),
        (b + CROP_L, h),
        (b, h - CROP_W),
        (b, -h + CROP_W),
    ]
}

/// Even-odd ray casting along +x.
pub fn ray_cast_inside(poly: &[(f64, f64)], p: (f64, f64)) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = poly[i];
        let (xj, yj) = poly[j];
        if (yi > p.1) != (yj > p.1) {
            let x_cross = xi + (p.1 - yi) * (xj - xi) / (yj - yi);
            if p.0 < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Footprint at `(x, y, theta)` in world coordinates.
pub fn world_footprint(x: f64, y: f64, th: f64) -> Vec<(f64, f64)> {
    let (s, c) = th.sin_cos();
    footprint()
        .into_iter()
        .map(|(px, py)| (x + c * px - s * py, y + s * px + c * py))
        .collect()
}

/// Brute-force collision: any obstacle strictly inside the world footprint.
pub fn collides_brute(x: f64, y: f64, th: f64, obstacles: &[(f64, f64)]) -> bool {
    let poly = world_footprint(x, y, th);
    obstacles.iter().any(|&p| ray_cast_inside(&poly, p))
}

/// Geometric center of the footprint for a rear-axle pose.
pub fn center(x: f64, y: f64, th: f64) -> (f64, f64) {
    let off = (FRONT_OVERHANG - REAR_OVERHANG) / 2.0;
    (x + off * th.cos(), y + off * th.sin())
}

/// Sign changes between consecutive nonzero entries, by explicit pairwise scan.
pub fn pivots_brute(dirs: &[i8]) -> usize {
    let nonzero: Vec<i8> = dirs.iter().copied().filter(|d| *d != 0).collect();
    (1..nonzero.len()).filter(|&i| nonzero[i] * nonzero[i - 1] < 0).count()
}

/// Sum of `|0.8 * 0.1|` for each moving primitive, accumulated in order.
pub fn distance_brute(actions: &[usize]) -> f64 {
    let mut total = 0.0;
    for &a in actions {
        let (_, v) = action_row(a);
        total += (v * 0.1).abs();
    }
    total
}

/// Recursive GAE: `A_t = delta_t + gamma * lambda * A_{t+1}` written as a
/// recursion from the front.
pub fn gae_recursive(
    rewards: &[f64],
    values: &[f64],
    terminal: &[bool],
    bootstrap: &[Option<f64>],
    gamma: f64,
    lambda: f64,
) -> Vec<f64> {
    fn adv(
        t: usize,
        r: &[f64],
        v: &[f64],
        term: &[bool],
        boot: &[Option<f64>],
        g: f64,
        l: f64,
    ) -> f64 {
        if term[t] {
            return r[t] - v[t];
        }
        if let Some(b) = boot[t] {
            return r[t] + g * b - v[t];
        }
        if t + 1 == r.len() {
            return r[t] - v[t];
        }
        r[t] + g * v[t + 1] - v[t] + g * l * adv(t + 1, r, v, term, boot, g, l)
    }
    (0..rewards.len())
        .map(|t| adv(t, rewards, values, terminal, bootstrap, gamma, lambda))
        .collect()
}

/// Pose after moving signed arc length `s` at constant steering, by closed form.
pub fn arc(x: f64, y: f64, th: f64, steer: f64, s: f64) -> (f64, f64, f64) {
    if steer == 0.0 {
        return (x + s * th.cos(), y + s * th.sin(), th);
    }
    let k = steer.tan() / WHEELBASE;
    let th2 = th + k * s;
    (
        x + ((th2).sin() - th.sin()) / k,
        y - ((th2).cos() - th.cos()) / k,
        th2,
    )
}

/// Path cost from `(direction, steer, length)` triples.
pub fn path_cost(
    segments: &[(i8, f64, f64)],
    switch_back: f64,
    backward: f64,
    steer_angle: f64,
    steer_change: f64,
) -> f64 {
    let mut total = 0.0;
    for (i, &(dir, steer, len)) in segments.iter().enumerate() {
        let (prev_dir, prev_steer) = if i == 0 { (0, 0.0) } else { (segments[i - 1].0, segments[i - 1].1) };
        let mut c = len * if dir < 0 { backward } else { 1.0 };
        if prev_dir != 0 && prev_dir != dir {
            c += switch_back;
        }
        c += steer_angle * steer.abs();
        c += steer_change * (steer - prev_steer).abs();
        total += c;
    }
    total
}
