//! Simplified 8-DOF kinematic chain: a 2-axis linear gantry carrying a
//! 6-revolute arm with a paddle on the end.
//!
//! The chain is a stand-in with documented constants, not a model of any
//! particular arm. Joints, in order:
//!
//! ```text
//! q0  prismatic, gantry x (m)
//! q1  prismatic, gantry y (m)
//! q2  revolute, base yaw     (about z)
//! q3  revolute, shoulder pitch (about local x)
//! q4  revolute, elbow pitch    (about local x)
//! q5  revolute, forearm roll   (about local y)
//! q6  revolute, wrist pitch    (about local x)
//! q7  revolute, paddle yaw     (about local z)
//! ```
//!
//! At the all-zero pose the arm points at the human side (+y) and the paddle
//! normal is +y. Positive pitch tilts the paddle (and its normal) upward.

use crate::math::{Mat3, Vec3};
use serde::{Deserialize, Serialize};

pub const JOINT_COUNT: usize = 8;

/// Chain constants, joint limits, and the episode start pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobotConfig {
    /// World position of the gantry zero (shoulder column base), m.
    pub gantry_origin: Vec3,
    /// Shoulder riser height above the gantry origin, m.
    pub riser: f64,
    /// Upper-arm length, m.
    pub upper_arm: f64,
    /// Forearm length, m.
    pub forearm: f64,
    /// Wrist length, m.
    pub wrist: f64,
    /// Wrist-to-paddle-center offset, m.
    pub paddle_offset: f64,
    /// Paddle disk radius, m.
    pub paddle_radius: f64,
    /// Joint position limits (low, high) per joint.
    pub joint_limits: [(f64, f64); JOINT_COUNT],
    /// Forehand-ready episode start pose.
    pub home_pose: [f64; JOINT_COUNT],
}

impl Default for RobotConfig {
    fn default() -> Self {
        Self {
            gantry_origin: Vec3::new(0.0, -2.40, 0.10),
            riser: 0.15,
            upper_arm: 0.45,
            forearm: 0.35,
            wrist: 0.12,
            paddle_offset: 0.08,
            paddle_radius: 0.085,
            joint_limits: [
                (-1.0, 1.0),
                (-0.25, 0.25),
                (-2.9, 2.9),
                (-1.2, 1.2),
                (-2.0, 2.0),
                (-2.9, 2.9),
                (-1.6, 1.6),
                (-2.9, 2.9),
            ],
            home_pose: [0.40, 0.0, 0.0, 0.0, 0.0, 0.0, 0.15, 0.0],
        }
    }
}

impl RobotConfig {
    pub fn clamp_to_limits(&self, q: &mut [f64; JOINT_COUNT]) {
        for (v, (lo, hi)) in q.iter_mut().zip(self.joint_limits.iter()) {
            *v = v.clamp(*lo, *hi);
        }
    }

    pub fn at_limit(&self, q: &[f64; JOINT_COUNT]) -> bool {
        q.iter()
            .zip(self.joint_limits.iter())
            .any(|(v, (lo, hi))| *v <= *lo || *v >= *hi)
    }

    pub fn mid_range(&self) -> [f64; JOINT_COUNT] {
        let mut m = [0.0; JOINT_COUNT];
        for (v, (lo, hi)) in m.iter_mut().zip(self.joint_limits.iter()) {
            *v = (lo + hi) / 2.0;
        }
        m
    }

    pub fn half_range(&self) -> [f64; JOINT_COUNT] {
        let mut h = [0.0; JOINT_COUNT];
        for (v, (lo, hi)) in h.iter_mut().zip(self.joint_limits.iter()) {
            *v = (hi - lo) / 2.0;
        }
        h
    }
}

/// Paddle pose with the linear Jacobian of the paddle center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PaddlePose {
    pub center: Vec3,
    /// Unit normal of the hitting face.
    pub normal: Vec3,
    /// d(center)/d(q): one column per joint.
    pub jacobian: [Vec3; JOINT_COUNT],
}

impl PaddlePose {
    /// Paddle center velocity for the given joint velocities.
    pub fn velocity(&self, qdot: &[f64; JOINT_COUNT]) -> Vec3 {
        let mut v = Vec3::ZERO;
        for (col, qd) in self.jacobian.iter().zip(qdot.iter()) {
            v += *col * *qd;
        }
        v
    }
}

/// Forward kinematics with the analytic Jacobian of the paddle center.
pub fn forward_kinematics(config: &RobotConfig, q: &[f64; JOINT_COUNT]) -> PaddlePose {
    // Revolute joint bookkeeping: world axis and world origin per joint.
    let mut axes = [Vec3::ZERO; JOINT_COUNT];
    let mut origins = [Vec3::ZERO; JOINT_COUNT];

    let base = config.gantry_origin + Vec3::new(q[0], q[1], 0.0);
    let mut p = base + Vec3::new(0.0, 0.0, config.riser);
    let mut rot = Mat3::IDENTITY;

    // q2: yaw about world z at the shoulder column.
    axes[2] = rot.mul_vec(Vec3::new(0.0, 0.0, 1.0));
    origins[2] = p;
    rot = rot.mul(&Mat3::rot_z(q[2]));

    // q3: shoulder pitch.
    axes[3] = rot.mul_vec(Vec3::new(1.0, 0.0, 0.0));
    origins[3] = p;
    rot = rot.mul(&Mat3::rot_x(q[3]));
    p += rot.mul_vec(Vec3::new(0.0, config.upper_arm, 0.0));

    // q4: elbow pitch.
    axes[4] = rot.mul_vec(Vec3::new(1.0, 0.0, 0.0));
    origins[4] = p;
    rot = rot.mul(&Mat3::rot_x(q[4]));
    p += rot.mul_vec(Vec3::new(0.0, config.forearm, 0.0));

    // q5: forearm roll.
    axes[5] = rot.mul_vec(Vec3::new(0.0, 1.0, 0.0));
    origins[5] = p;
    rot = rot.mul(&Mat3::rot_y(q[5]));
    p += rot.mul_vec(Vec3::new(0.0, config.wrist, 0.0));

    // q6: wrist pitch.
    axes[6] = rot.mul_vec(Vec3::new(1.0, 0.0, 0.0));
    origins[6] = p;
    rot = rot.mul(&Mat3::rot_x(q[6]));

    // q7: paddle yaw.
    axes[7] = rot.mul_vec(Vec3::new(0.0, 0.0, 1.0));
    origins[7] = p;
    rot = rot.mul(&Mat3::rot_z(q[7]));

    let center = p + rot.mul_vec(Vec3::new(0.0, config.paddle_offset, 0.0));
    let normal = rot.mul_vec(Vec3::new(0.0, 1.0, 0.0));

    let mut jacobian = [Vec3::ZERO; JOINT_COUNT];
    jacobian[0] = Vec3::new(1.0, 0.0, 0.0);
    jacobian[1] = Vec3::new(0.0, 1.0, 0.0);
    for j in 2..JOINT_COUNT {
        jacobian[j] = axes[j].cross(center - origins[j]);
    }

    PaddlePose {
        center,
        normal,
        jacobian,
    }
}
