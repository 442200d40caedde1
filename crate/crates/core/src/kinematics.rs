//! Discrete-time kinematic bicycle model and the 8-entry primitive action table.

use serde::{Deserialize, Serialize};

use crate::geometry::{wrap_angle, Pose2D, VehicleSpec};

/// Control period of one primitive, seconds.
pub const PRIMITIVE_DT: f64 = 0.1;
/// Magnitude of the per-primitive steering increment.
pub const STEER_INCREMENT_DEG: f64 = 8.0;
/// Magnitude of the signed primitive speed, m/s.
pub const PRIMITIVE_SPEED: f64 = 0.8;
pub const NUM_ACTIONS: usize = 8;

/// Rear-axle pose plus front-wheel steering angle.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub delta: f64,
}

impl VehicleState {
    pub fn from_pose(pose: &Pose2D, delta: f64) -> Self {
        Self {
            x: pose.x,
            y: pose.y,
            theta: pose.theta,
            delta,
        }
    }

    pub fn pose(&self) -> Pose2D {
        Pose2D {
            x: self.x,
            y: self.y,
            theta: self.theta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimitiveAction {
    pub index: usize,
    /// Steering change applied before moving, radians.
    pub delta_steer: f64,
    /// Signed longitudinal speed, m/s.
    pub speed: f64,
    pub dt: f64,
    pub description: &'static str,
}

impl PrimitiveAction {
    /// Signed displacement along the heading for one step.
    pub fn displacement(&self) -> f64 {
        self.speed * self.dt
    }

    /// Motion sign: +1 forward, -1 reverse, 0 for in-place steering.
    pub fn direction(&self) -> i8 {
        if self.speed > 0.0 {
            1
        } else if self.speed < 0.0 {
            -1
        } else {
            0
        }
    }

    pub fn is_idle(&self) -> bool {
        self.speed == 0.0
    }
}

const TABLE: [(f64, f64, &str); NUM_ACTIONS] = [
    (-1.0, 1.0, "Turn right, forward"),
    (0.0, 1.0, "Straight, forward"),
    (1.0, 1.0, "Turn left, forward"),
    (-1.0, -1.0, "Turn right, reverse"),
    (0.0, -1.0, "Straight, reverse"),
    (1.0, -1.0, "Turn left, reverse"),
    (-1.0, 0.0, "Pre-steer right (no translation)"),
    (1.0, 0.0, "Pre-steer left (no translation)"),
];

/// The primitive for `index`, or `None` outside `0..8`.
pub fn action(index: usize) -> Option<PrimitiveAction> {
    TABLE.get(index).map(|&(steer, speed, description)| PrimitiveAction {
        index,
        delta_steer: steer * STEER_INCREMENT_DEG.to_radians(),
        speed: speed * PRIMITIVE_SPEED,
        dt: PRIMITIVE_DT,
        description,
    })
}

pub fn action_table() -> [PrimitiveAction; NUM_ACTIONS] {
    std::array::from_fn(|i| action(i).expect("index in range"))
}

/// Advances the state by one primitive: steer (clamped), translate along the
/// pre-update heading, then rotate with the updated steering angle.
pub fn step(state: &VehicleState, action: &PrimitiveAction, spec: &VehicleSpec) -> VehicleState {
    let delta = (state.delta + action.delta_steer).clamp(-spec.max_steer, spec.max_steer);
    let ds = action.displacement();
    let (s, c) = state.theta.sin_cos();
    VehicleState {
        x: state.x + ds * c,
        y: state.y + ds * s,
        theta: wrap_angle(state.theta + ds / spec.wheelbase * delta.tan()),
        delta,
    }
}

/// Turning radius for a fixed steering angle; `None` means straight-line motion.
pub fn turning_radius(spec: &VehicleSpec, delta: f64) -> Option<f64> {
    if delta == 0.0 {
        None
    } else {
        Some(spec.wheelbase / delta.abs().tan())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_rows() {
        let t = action_table();
        assert_eq!(t[1].delta_steer, 0.0);
        assert_eq!(t[1].speed, 0.8);
        assert_eq!(t[4].delta_steer, 0.0);
        assert_eq!(t[4].speed, -0.8);
        assert!(t.iter().all(|a| !(a.delta_steer == 0.0 && a.speed == 0.0)));
        assert!(t.iter().enumerate().all(|(i, a)| a.index == i && a.dt == 0.1));
        assert!(t[6].is_idle() && t[7].is_idle());
        assert_eq!(t[6].delta_steer, -(8f64.to_radians()));
        assert!(action(8).is_none());
    }

    #[test]
    fn straight_forward_step() {
        let spec = VehicleSpec::default();
        let s = step(&VehicleState::default(), &action(1).unwrap(), &spec);
        assert!((s.x - 0.08).abs() < 1e-15);
        assert_eq!((s.y, s.theta, s.delta), (0.0, 0.0, 0.0));
    }

    #[test]
    fn steering_clamps_at_limit() {
        let spec = VehicleSpec::default();
        let start = VehicleState {
            delta: spec.max_steer,
            ..Default::default()
        };
        let s = step(&start, &action(2).unwrap(), &spec);
        assert_eq!(s.delta, spec.max_steer);
        assert!((s.theta - 0.016663).abs() < 1e-6);
    }

    #[test]
    fn pre_steer_changes_only_delta() {
        let spec = VehicleSpec::default();
        let start = VehicleState {
            x: 1.0,
            y: 2.0,
            theta: 0.3,
            delta: 0.0,
        };
        let s = step(&start, &action(7).unwrap(), &spec);
        assert_eq!((s.x, s.y, s.theta), (1.0, 2.0, 0.3));
        assert!((s.delta - 8f64.to_radians()).abs() < 1e-15);
    }

    #[test]
    fn turning_radius_values() {
        let spec = VehicleSpec::default();
        assert!((turning_radius(&spec, 45f64.to_radians()).unwrap() - 3.0).abs() < 1e-12);
        assert!((turning_radius(&spec, spec.max_steer).unwrap() - 4.8010).abs() < 1e-3);
        assert_eq!(turning_radius(&spec, 0.0), None);
    }
}
