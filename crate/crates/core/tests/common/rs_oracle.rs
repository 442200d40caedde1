//! Independent Reeds–Shepp word enumerator used as a test oracle.
//!
//! Uses the twelve base constructions from the original derivation (with the
//! explicit C|C C / C C|C and C|C S C / C S C|C variants) under time-flip and
//! reflection, and validates every candidate by integrating it.

use std::f64::consts::{FRAC_PI_2, PI};

#[derive(Clone, Copy, PartialEq, Debug)]
pub enum Turn {
    L,
    S,
    R,
}

#[derive(Clone, Debug)]
pub struct Word {
    pub dists: Vec<f64>,
    pub turns: Vec<Turn>,
}

impl Word {
    pub fn length(&self) -> f64 {
        self.dists.iter().map(|d| d.abs()).sum()
    }
}

fn m2p(a: f64) -> f64 {
    let mut v = a % (2.0 * PI);
    if v < -PI {
        v += 2.0 * PI;
    } else if v > PI {
        v -= 2.0 * PI;
    }
    v
}

fn pol(x: f64, y: f64) -> (f64, f64) {
    ((x * x + y * y).sqrt(), y.atan2(x))
}

use Turn::{L, R, S};

type F = fn(f64, f64, f64) -> Option<Word>;

fn w(d: &[f64], t: &[Turn]) -> Option<Word> {
    Some(Word { dists: d.to_vec(), turns: t.to_vec() })
}

fn lsl(x: f64, y: f64, phi: f64) -> Option<Word> {
    let (u, t) = pol(x - phi.sin(), y - 1.0 + phi.cos());
    if (0.0..=PI).contains(&t) {
        let v = m2p(phi - t);
        if (0.0..=PI).contains(&v) {
            return w(&[t, u, v], &[L, S, L]);
        }
    }
    None
}

fn lsr(x: f64, y: f64, phi: f64) -> Option<Word> {
    let (r, t1) = pol(x + phi.sin(), y - 1.0 - phi.cos());
    let r2 = r * r;
    if r2 >= 4.0 {
        let u = (r2 - 4.0).sqrt();
        let t = m2p(t1 + 2f64.atan2(u));
        let v = m2p(t - phi);
        if t >= 0.0 && v >= 0.0 {
            return w(&[t, u, v], &[L, S, R]);
        }
    }
    None
}

fn lxrxl(x: f64, y: f64, phi: f64) -> Option<Word> {
    let (u1, th) = pol(x - phi.sin(), y - 1.0 + phi.cos());
    if u1 <= 4.0 {
        let a = (0.25 * u1).acos();
        let t = m2p(a + th + FRAC_PI_2);
        let u = m2p(PI - 2.0 * a);
        let v = m2p(phi - t - u);
        return w(&[t, -u, v], &[L, R, L]);
    }
    None
}

fn lxrl(x: f64, y: f64, phi: f64) -> Option<Word> {
    let (u1, th) = pol(x - phi.sin(), y - 1.0 + phi.cos());
    if u1 <= 4.0 {
        let a = (0.25 * u1).acos();
        let t = m2p(a + th + FRAC_PI_2);
        let u = m2p(PI - 2.0 * a);
        let v = m2p(-phi + t + u);
        return w(&[t, -u, -v], &[L, R, L]);
    }
    None
}

fn lrxl(x: f64, y: f64, phi: f64) -> Option<Word> {
    let (u1, th) = pol(x - phi.sin(), y - 1.0 + phi.cos());
    if u1 <= 4.0 && u1 > 0.0 {
        let u = (1.0 - u1 * u1 * 0.125).acos();
        let a = (2.0 * u.sin() / u1).clamp(-1.0, 1.0).asin();
        let t = m2p(-a + th + FRAC_PI_2);
        let v = m2p(t - u - phi);
        return w(&[t, u, -v], &[L, R, L]);
    }
    None
}

fn lrxlr(x: f64, y: f64, phi: f64) -> Option<Word> {
    let (u1, th) = pol(x + phi.sin(), y - 1.0 - phi.cos());
    if u1 <= 2.0 {
        let a = ((u1 + 2.0) * 0.25).acos();
        let t = m2p(th + a + FRAC_PI_2);
        let u = m2p(a);
        let v = m2p(phi - t + 2.0 * u);
        if t >= 0.0 && u >= 0.0 && v >= 0.0 {
            return w(&[t, u, -u, -v], &[L, R, L, R]);
        }
    }
    None
}

fn lxrlxr(x: f64, y: f64, phi: f64) -> Option<Word> {
    let (u1, th) = pol(x + phi.sin(), y - 1.0 - phi.cos());
    let u2 = (20.0 - u1 * u1) / 16.0;
    if (0.0..=1.0).contains(&u2) && u1 > 0.0 {
        let u = u2.acos();
        let a = (2.0 * u.sin() / u1).clamp(-1.0, 1.0).asin();
        let t = m2p(th + a + FRAC_PI_2);
        let v = m2p(t - phi);
        if t >= 0.0 && v >= 0.0 {
            return w(&[t, -u, -u, v], &[L, R, L, R]);
        }
    }
    None
}

fn lxr90sl(x: f64, y: f64, phi: f64) -> Option<Word> {
    let (u1, th) = pol(x - phi.sin(), y - 1.0 + phi.cos());
    if u1 >= 2.0 {
        let r = (u1 * u1 - 4.0).sqrt();
        let u = r - 2.0;
        let a = 2f64.atan2(r);
        let t = m2p(th + a + FRAC_PI_2);
        let v = m2p(t - phi + FRAC_PI_2);
        if t >= 0.0 && v >= 0.0 {
            return w(&[t, -FRAC_PI_2, -u, -v], &[L, R, S, L]);
        }
    }
    None
}

fn lsr90xl(x: f64, y: f64, phi: f64) -> Option<Word> {
    let (u1, th) = pol(x - phi.sin(), y - 1.0 + phi.cos());
    if u1 >= 2.0 {
        let r = (u1 * u1 - 4.0).sqrt();
        let u = r - 2.0;
        let a = r.atan2(2.0);
        let t = m2p(th - a + FRAC_PI_2);
        let v = m2p(t - phi - FRAC_PI_2);
        if t >= 0.0 && v >= 0.0 {
            return w(&[t, u, FRAC_PI_2, -v], &[L, S, R, L]);
        }
    }
    None
}

fn lxr90sr(x: f64, y: f64, phi: f64) -> Option<Word> {
    let (u1, th) = pol(x + phi.sin(), y - 1.0 - phi.cos());
    if u1 >= 2.0 {
        let t = m2p(th + FRAC_PI_2);
        let u = u1 - 2.0;
        let v = m2p(phi - t - FRAC_PI_2);
        if t >= 0.0 && v >= 0.0 {
            return w(&[t, -FRAC_PI_2, -u, -v], &[L, R, S, R]);
        }
    }
    None
}

fn lsl90xr(x: f64, y: f64, phi: f64) -> Option<Word> {
    let (u1, th) = pol(x + phi.sin(), y - 1.0 - phi.cos());
    if u1 >= 2.0 {
        let t = m2p(th);
        let u = u1 - 2.0;
        let v = m2p(phi - t - FRAC_PI_2);
        if t >= 0.0 && v >= 0.0 {
            return w(&[t, u, FRAC_PI_2, -v], &[L, S, L, R]);
        }
    }
    None
}

fn lxr90sl90xr(x: f64, y: f64, phi: f64) -> Option<Word> {
    let (u1, th) = pol(x + phi.sin(), y - 1.0 - phi.cos());
    if u1 >= 4.0 {
        let r = (u1 * u1 - 4.0).sqrt();
        let u = r - 4.0;
        let a = 2f64.atan2(r);
        let t = m2p(th + a + FRAC_PI_2);
        let v = m2p(t - phi);
        if t >= 0.0 && v >= 0.0 {
            return w(&[t, -FRAC_PI_2, -u, -FRAC_PI_2, v], &[L, R, S, L, R]);
        }
    }
    None
}

const BASES: [F; 12] = [
    lsl, lsr, lxrxl, lxrl, lrxl, lrxlr, lxrlxr, lxr90sl, lxr90sr, lsr90xl, lsl90xr, lxr90sl90xr,
];

/// Integrates a normalized word from the origin.
pub fn integrate(word: &Word) -> (f64, f64, f64) {
    let (mut x, mut y, mut th) = (0.0f64, 0.0f64, 0.0f64);
    for (&d, &t) in word.dists.iter().zip(&word.turns) {
        match t {
            S => {
                x += d * th.cos();
                y += d * th.sin();
            }
            L => {
                let th2 = th + d;
                x += th2.sin() - th.sin();
                y += -th2.cos() + th.cos();
                th = th2;
            }
            R => {
                let th2 = th - d;
                x += -th2.sin() + th.sin();
                y += th2.cos() - th.cos();
                th = th2;
            }
        }
    }
    (x, y, th)
}

/// Every word feasible for the normalized goal `(x, y, phi)`, validated by integration.
pub fn all_words(x: f64, y: f64, phi: f64) -> Vec<Word> {
    let mut out = Vec::new();
    let flip = |t: Turn| match t {
        L => R,
        R => L,
        S => S,
    };
    for f in BASES {
        let cands = [
            f(x, y, phi).map(|w| w),
            f(-x, y, -phi).map(|mut w| {
                w.dists.iter_mut().for_each(|d| *d = -*d);
                w
            }),
            f(x, -y, -phi).map(|mut w| {
                w.turns.iter_mut().for_each(|t| *t = flip(*t));
                w
            }),
            f(-x, -y, phi).map(|mut w| {
                w.dists.iter_mut().for_each(|d| *d = -*d);
                w.turns.iter_mut().for_each(|t| *t = flip(*t));
                w
            }),
        ];
        for c in cands.into_iter().flatten() {
            if c.dists.iter().any(|d| !d.is_finite()) {
                continue;
            }
            let (ex, ey, eth) = integrate(&c);
            if (ex - x).hypot(ey - y) < 1e-7 && m2p(eth - phi).abs() < 1e-7 {
                out.push(c);
            }
        }
    }
    out
}

/// Minimum normalized length over the full word family.
pub fn min_length(x: f64, y: f64, phi: f64) -> f64 {
    all_words(x, y, phi)
        .iter()
        .map(Word::length)
        .fold(f64::INFINITY, f64::min)
}
