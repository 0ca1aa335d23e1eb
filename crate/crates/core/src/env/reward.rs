//! The weighted reward stack.
//!
//! Eleven terms with sim and real weight presets. Terms 1-3 score the
//! return itself, term 4 is the fault penalty (real preset only), terms 5-8
//! are episodic smoothness/safety proxies awarded at termination, and terms
//! 9-11 are per-step penalties. The weighted ceilings are 8.1 (sim) and 6.1
//! (real); penalties only subtract.
//!
//! Shapes not fixed by the published ranges are pinned here:
//!
//! - Landing term (1) = `w * (4 * closeness + approach)` where closeness =
//!   `max(0, 1 - d / d_max)` for a post-hit landing at distance `d` from the
//!   target in the middle of the human half, and approach is 1 on any paddle
//!   contact, else `max(0, 1 - min_dist / approach_scale)` over the episode.
//!   The dense approach share keeps the term's [0, 5] range while giving a
//!   non-hitting policy a usable gradient toward the ball.
//! - Net term (2) peaks for crossings at `net_height + net_target_above` and
//!   falls off linearly over `net_tolerance`.
//! - Episodic proxies (5-7) are `max(0, 1 - rms / reference)` over realized
//!   joint jerk/acceleration/velocity; (8) is mean closeness of joints to
//!   their range centers.
//! - Per-step penalties: -1 per step for paddle-table intersection (9),
//!   paddle skimming below `paddle_low_z` over the table (10), and any joint
//!   pinned at a position limit (11).

use crate::math::Vec2;
use serde::{Deserialize, Serialize};

/// Weights and shape constants for the reward stack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub w_landing: f64,
    pub w_net_clearance: f64,
    pub w_hit_and_land: f64,
    pub w_fault: f64,
    pub w_jerk: f64,
    pub w_accel: f64,
    pub w_velocity: f64,
    pub w_joint_angle: f64,
    pub w_collision: f64,
    pub w_paddle_height: f64,
    pub w_style: f64,

    /// Share of the landing term's 5-point budget carried by the dense
    /// approach component; the rest scales landing closeness.
    pub approach_share: f64,
    /// Landing target on the human half, m.
    pub landing_target: Vec2,
    /// Landing closeness falls to zero at this distance, m.
    pub landing_d_max: f64,
    /// Approach shaping scale, m.
    pub approach_scale: f64,
    /// Net crossing target height above the net, m.
    pub net_target_above: f64,
    /// Net closeness falls to zero at this |z - target|, m.
    pub net_tolerance: f64,
    /// rms references for the episodic proxies.
    pub jerk_reference: f64,
    pub accel_reference: f64,
    pub velocity_reference: f64,
    /// Paddle-height penalty threshold above the table plane, m.
    pub paddle_low_z: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self::sim()
    }
}

impl RewardConfig {
    /// Simulation-phase preset (weighted ceiling 8.1).
    pub fn sim() -> Self {
        Self {
            w_landing: 1.0,
            w_net_clearance: 1.0,
            w_hit_and_land: 0.1,
            w_fault: 0.0,
            w_jerk: 0.3,
            w_accel: 0.3,
            w_velocity: 0.4,
            w_joint_angle: 1.0,
            w_collision: 1.0,
            w_paddle_height: 0.5,
            w_style: 1.0,
            approach_share: 1.0,
            landing_target: Vec2::new(0.0, 0.685),
            landing_d_max: 1.0,
            approach_scale: 0.5,
            net_target_above: 0.15,
            net_tolerance: 0.5,
            jerk_reference: 20000.0,
            accel_reference: 150.0,
            velocity_reference: 4.0,
            paddle_low_z: 0.02,
        }
    }

    /// Fine-tuning preset (weighted ceiling 6.1): proxies off, fault on.
    pub fn real() -> Self {
        Self {
            w_fault: 1.0,
            w_jerk: 0.0,
            w_accel: 0.0,
            w_velocity: 0.0,
            w_joint_angle: 0.0,
            w_collision: 0.0,
            w_paddle_height: 0.0,
            w_style: 0.0,
            ..Self::sim()
        }
    }

    /// Largest achievable weighted episode return.
    pub fn max_weighted_score(&self) -> f64 {
        self.w_landing * 5.0
            + self.w_net_clearance
            + self.w_hit_and_land
            + self.w_fault * 0.0_f64.max(0.0)
            + self.w_jerk
            + self.w_accel
            + self.w_velocity
            + self.w_joint_angle
        // Terms 9-11 have max 0.
    }
}

/// Weighted per-term contributions for one step (or one episode when
/// accumulated). The sum of the fields is the scalar reward.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub landing: f64,
    pub net_clearance: f64,
    pub hit_and_land: f64,
    pub fault: f64,
    pub jerk: f64,
    pub accel: f64,
    pub velocity: f64,
    pub joint_angle: f64,
    pub collision: f64,
    pub paddle_height: f64,
    pub style: f64,
}

impl RewardBreakdown {
    pub fn total(&self) -> f64 {
        self.landing
            + self.net_clearance
            + self.hit_and_land
            + self.fault
            + self.jerk
            + self.accel
            + self.velocity
            + self.joint_angle
            + self.collision
            + self.paddle_height
            + self.style
    }

    pub fn add(&mut self, other: &RewardBreakdown) {
        self.landing += other.landing;
        self.net_clearance += other.net_clearance;
        self.hit_and_land += other.hit_and_land;
        self.fault += other.fault;
        self.jerk += other.jerk;
        self.accel += other.accel;
        self.velocity += other.velocity;
        self.joint_angle += other.joint_angle;
        self.collision += other.collision;
        self.paddle_height += other.paddle_height;
        self.style += other.style;
    }
}
