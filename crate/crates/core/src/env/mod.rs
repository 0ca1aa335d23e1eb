//! The single-throw table-tennis MDP.
//!
//! One episode: a ball is launched from a throw sample, the 8-DOF robot
//! tries to return it, and the episode ends on a post-hit landing (either
//! side), a miss, a fault, the ball leaving the play volume, or the step
//! cap. Control runs at 75 Hz.
//!
//! Sensors and actuators are delayed by per-episode Gaussian latencies, and
//! the observed ball position carries fresh per-axis uniform noise each
//! step. Latency and noise only affect what the agent sees and when its
//! commands take hold; the ground-truth physics is untouched.

pub mod kinematics;
pub mod latency;
pub mod reward;

use crate::human_model::ThrowSample;
use crate::math::{Vec2, Vec3};
use crate::physics::{
    bounce_table, paddle_contact, step_ball, BallState, PhysicsConstants, TableGeometry, TableSide,
};
use crate::policy::{
    forward, Action, Normalizer, ObservationWindow, VelocityLimits, ACTION_DIM, OBS_DIM,
};
use crate::rng::{rng_from, tag};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

pub use kinematics::{forward_kinematics, PaddlePose, RobotConfig, JOINT_COUNT};
pub use latency::{EpisodeLatencies, History, LatencyModel};
pub use reward::{RewardBreakdown, RewardConfig};

/// Full environment parameterization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub physics: PhysicsConstants,
    pub table: TableGeometry,
    pub robot: RobotConfig,
    pub latency: LatencyModel,
    pub reward: RewardConfig,
    pub limits: VelocityLimits,
    /// Half-width of the per-axis uniform ball observation noise, m.
    pub ball_noise: f64,
    pub max_steps: usize,
    pub control_rate_hz: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            physics: PhysicsConstants::default(),
            table: TableGeometry::default(),
            robot: RobotConfig::default(),
            latency: LatencyModel::default(),
            reward: RewardConfig::sim(),
            limits: VelocityLimits::default(),
            ball_noise: 0.040,
            max_steps: 200,
            control_rate_hz: 75.0,
        }
    }
}

impl EnvConfig {
    pub fn dt(&self) -> f64 {
        1.0 / self.control_rate_hz
    }

    /// Noiseless, latency-free variant for diagnostics.
    pub fn idealized(mut self) -> Self {
        self.latency = LatencyModel::zero();
        self.ball_noise = 0.0;
        self
    }
}

/// Why an episode faulted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultReason {
    NonFiniteAction,
    PaddleTableCollision,
}

/// Notable episode events, times in seconds since reset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EpisodeEvent {
    /// The throw's first touch on the robot side.
    IncomingBounce { t: f64, x: f64, y: f64 },
    /// Pre-hit bounce on the human side (steep throws arc over it).
    HumanSideBounce { t: f64, x: f64, y: f64 },
    /// Paddle contact.
    Hit { t: f64 },
    NetCrossing { t: f64, z: f64, toward_human: bool },
    NetHit { t: f64 },
    /// Post-hit table touch; human side = successful return.
    ReturnLanding {
        t: f64,
        x: f64,
        y: f64,
        side: TableSide,
        speed: f64,
    },
    /// Second robot-side bounce without a hit.
    SecondBounceMiss { t: f64 },
    /// Ball passed the robot and cannot come back.
    BallBehindRobot { t: f64 },
    OutOfBounds { t: f64 },
    Fault { t: f64, reason: FaultReason },
    Timeout { t: f64 },
}

/// One environment step's results.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub window: ObservationWindow,
    pub reward: f64,
    pub done: bool,
    pub breakdown: RewardBreakdown,
    pub events: Vec<EpisodeEvent>,
}

/// Optional per-step trace kept when recording is enabled.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepTrace {
    pub action: Action,
    pub reward: f64,
    pub breakdown: RewardBreakdown,
}

/// Everything worth keeping about one finished episode.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub throw: ThrowSample,
    pub events: Vec<EpisodeEvent>,
    pub total_return: f64,
    pub breakdown: RewardBreakdown,
    pub steps: usize,
    pub hit: bool,
    pub fault: bool,
    /// Post-hit landing on the human side, when the return succeeded.
    pub return_landing: Option<Vec2>,
    /// Ball speed at that landing, m/s.
    pub return_speed: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_trace: Option<Vec<StepTrace>>,
}

/// Sparse evaluation score: hit +1, human-side landing +1, fault -2.
pub fn sparse_eval_score(record: &EpisodeRecord) -> i32 {
    if record.fault {
        return -2;
    }
    let mut score = 0;
    if record.hit {
        score += 1;
        if record.return_landing.is_some() {
            score += 1;
        }
    }
    score
}

/// Landing-closeness shape: max(0, 1 - d / d_max).
pub fn landing_closeness(distance: f64, config: &RewardConfig) -> f64 {
    (1.0 - distance / config.landing_d_max).max(0.0)
}

/// Net-clearance shape: peaks at net_height + net_target_above.
pub fn net_clearance_value(z_crossing: f64, net_height: f64, config: &RewardConfig) -> f64 {
    let target = net_height + config.net_target_above;
    (1.0 - (z_crossing - target).abs() / config.net_tolerance).max(0.0)
}

#[derive(Debug, Clone, Copy)]
struct QueuedAction {
    issued: f64,
    velocities: [f64; ACTION_DIM],
}

/// The environment. One instance owns all its state; instances are
/// independent.
#[derive(Debug, Clone)]
pub struct Env {
    pub config: EnvConfig,
    active: bool,
    step_count: usize,
    q: [f64; JOINT_COUNT],
    prev_qdot: [f64; JOINT_COUNT],
    prev_accel: [f64; JOINT_COUNT],
    ball: BallState,
    throw: ThrowSample,
    latencies: EpisodeLatencies,
    noise_rng: rand_chacha::ChaCha8Rng,
    window: ObservationWindow,
    ball_history: History<Vec3>,
    joint_history: History<[f64; JOINT_COUNT]>,
    action_queue: Vec<QueuedAction>,
    hit_time: Option<f64>,
    robot_bounces: usize,
    net_reward_given: bool,
    min_paddle_ball_dist: f64,
    sum_sq_vel: f64,
    sum_sq_accel: f64,
    sum_sq_jerk: f64,
    sum_angle_dev: f64,
    motion_steps: usize,
    events: Vec<EpisodeEvent>,
    breakdown_total: RewardBreakdown,
    return_landing: Option<Vec2>,
    return_speed: Option<f64>,
    fault: bool,
    collect_trace: bool,
    trace: Vec<StepTrace>,
}

impl Env {
    pub fn new(config: EnvConfig) -> Self {
        let home = config.robot.home_pose;
        Self {
            config,
            active: false,
            step_count: 0,
            q: home,
            prev_qdot: [0.0; JOINT_COUNT],
            prev_accel: [0.0; JOINT_COUNT],
            ball: BallState::new(Vec3::ZERO, Vec3::ZERO, 0.0),
            throw: ThrowSample {
                init: BallState::new(Vec3::ZERO, Vec3::ZERO, 0.0),
                landing: Vec2::new(0.0, 0.0),
            },
            latencies: EpisodeLatencies {
                ball_obs: 0.0,
                arm_obs: 0.0,
                gantry_obs: 0.0,
                arm_action: 0.0,
                gantry_action: 0.0,
            },
            noise_rng: rng_from(&[0]),
            window: ObservationWindow::zeros(),
            ball_history: History::new(256),
            joint_history: History::new(256),
            action_queue: Vec::with_capacity(256),
            hit_time: None,
            robot_bounces: 0,
            net_reward_given: false,
            min_paddle_ball_dist: f64::INFINITY,
            sum_sq_vel: 0.0,
            sum_sq_accel: 0.0,
            sum_sq_jerk: 0.0,
            sum_angle_dev: 0.0,
            motion_steps: 0,
            events: Vec::new(),
            breakdown_total: RewardBreakdown::default(),
            return_landing: None,
            return_speed: None,
            fault: false,
            collect_trace: false,
            trace: Vec::new(),
        }
    }

    /// Keep per-step traces in the episode record.
    pub fn set_trace(&mut self, on: bool) {
        self.collect_trace = on;
    }

    pub fn is_active(&self) -> bool {
        self.active
    }

    /// Begin an episode: robot at home, ball at the throw's initial state,
    /// latencies sampled once, the window primed with 8 copies of the first
    /// observation.
    pub fn reset(
        &mut self,
        throw: &ThrowSample,
        latency_seed: u64,
        noise_seed: u64,
    ) -> Result<ObservationWindow> {
        if !throw.init.is_finite() || !self.config.table.in_world(throw.init.position) {
            return Err(Error::InfeasibleThrow(format!(
                "throw starts outside the play volume: {:?}",
                throw.init.position
            )));
        }
        self.active = true;
        self.step_count = 0;
        self.q = self.config.robot.home_pose;
        self.prev_qdot = [0.0; JOINT_COUNT];
        self.prev_accel = [0.0; JOINT_COUNT];
        self.ball = BallState {
            time: 0.0,
            ..throw.init
        };
        self.throw = *throw;
        let mut lat_rng = rng_from(&[latency_seed, tag("episode-latency")]);
        self.latencies = self.config.latency.sample(&mut lat_rng);
        self.noise_rng = rng_from(&[noise_seed, tag("episode-noise")]);
        self.ball_history.clear();
        self.joint_history.clear();
        self.action_queue.clear();
        self.hit_time = None;
        self.robot_bounces = 0;
        self.net_reward_given = false;
        self.min_paddle_ball_dist = f64::INFINITY;
        self.sum_sq_vel = 0.0;
        self.sum_sq_accel = 0.0;
        self.sum_sq_jerk = 0.0;
        self.sum_angle_dev = 0.0;
        self.motion_steps = 0;
        self.events.clear();
        self.breakdown_total = RewardBreakdown::default();
        self.return_landing = None;
        self.return_speed = None;
        self.fault = false;
        self.trace.clear();

        self.ball_history.push(0.0, self.ball.position);
        self.joint_history.push(0.0, self.q);
        let row = self.observe(0.0);
        self.window = ObservationWindow::filled_with(row);
        Ok(self.window)
    }

    /// Delayed, noisy observation row at wall time `t`.
    fn observe(&mut self, t: f64) -> [f64; OBS_DIM] {
        use rand::Rng;
        let ball = self.ball_history.at(t - self.latencies.ball_obs);
        let joints_arm = self.joint_history.at(t - self.latencies.arm_obs);
        let joints_gantry = self.joint_history.at(t - self.latencies.gantry_obs);
        let noise = self.config.ball_noise;
        let mut row = [0.0; OBS_DIM];
        row[0] = ball.x;
        row[1] = ball.y;
        row[2] = ball.z;
        if noise > 0.0 {
            row[0] += self.noise_rng.gen_range(-noise..=noise);
            row[1] += self.noise_rng.gen_range(-noise..=noise);
            row[2] += self.noise_rng.gen_range(-noise..=noise);
        }
        // Gantry joints report through the gantry channel, arm joints
        // through the arm channel.
        row[3] = joints_gantry[0];
        row[4] = joints_gantry[1];
        for j in 2..JOINT_COUNT {
            row[3 + j] = joints_arm[j];
        }
        row
    }

    /// Commanded joint velocities effective during the step starting at `t`.
    fn effective_command(&self, t: f64) -> [f64; ACTION_DIM] {
        let mut cmd = [0.0; ACTION_DIM];
        let mut arm_done = false;
        let mut gantry_done = false;
        for qa in self.action_queue.iter().rev() {
            if !gantry_done && qa.issued + self.latencies.gantry_action <= t {
                cmd[0] = qa.velocities[0];
                cmd[1] = qa.velocities[1];
                gantry_done = true;
            }
            if !arm_done && qa.issued + self.latencies.arm_action <= t {
                for j in 2..ACTION_DIM {
                    cmd[j] = qa.velocities[j];
                }
                arm_done = true;
            }
            if arm_done && gantry_done {
                break;
            }
        }
        cmd
    }

    /// Advance one control period.
    pub fn step(&mut self, action: &Action) -> Result<StepOutcome> {
        if !self.active {
            return Err(Error::EpisodeInactive);
        }
        let dt = self.config.dt();
        let t_now = self.step_count as f64 * dt;
        let t_next = (self.step_count + 1) as f64 * dt;
        let mut breakdown = RewardBreakdown::default();
        let mut events = Vec::new();
        let mut terminal = false;

        if !action.is_finite() {
            self.fault = true;
            breakdown.fault = self.config.reward.w_fault * -2.0;
            events.push(EpisodeEvent::Fault {
                t: t_now,
                reason: FaultReason::NonFiniteAction,
            });
            return Ok(self.finish_step(t_next, action, breakdown, events, true));
        }

        // Action enters its delay queue with per-joint velocity clamping.
        let mut clamped = [0.0; ACTION_DIM];
        for j in 0..ACTION_DIM {
            clamped[j] = action.0[j].clamp(-self.config.limits.0[j], self.config.limits.0[j]);
        }
        self.action_queue.push(QueuedAction {
            issued: t_now,
            velocities: clamped,
        });

        // Joint integration under the currently-active delayed command.
        let cmd = self.effective_command(t_now);
        let mut q_new = self.q;
        for j in 0..JOINT_COUNT {
            q_new[j] += cmd[j] * dt;
        }
        self.config.robot.clamp_to_limits(&mut q_new);
        let mut qdot = [0.0; JOINT_COUNT];
        let mut accel = [0.0; JOINT_COUNT];
        let mut jerk = [0.0; JOINT_COUNT];
        for j in 0..JOINT_COUNT {
            qdot[j] = (q_new[j] - self.q[j]) / dt;
            accel[j] = (qdot[j] - self.prev_qdot[j]) / dt;
            jerk[j] = (accel[j] - self.prev_accel[j]) / dt;
        }
        self.q = q_new;
        self.prev_qdot = qdot;
        self.prev_accel = accel;

        // Motion statistics for the episodic proxies.
        let mid = self.config.robot.mid_range();
        let half = self.config.robot.half_range();
        let mut v2 = 0.0;
        let mut a2 = 0.0;
        let mut j2 = 0.0;
        let mut dev = 0.0;
        for j in 0..JOINT_COUNT {
            v2 += qdot[j] * qdot[j];
            a2 += accel[j] * accel[j];
            j2 += jerk[j] * jerk[j];
            dev += ((self.q[j] - mid[j]).abs() / half[j]).min(1.0);
        }
        self.sum_sq_vel += v2 / JOINT_COUNT as f64;
        self.sum_sq_accel += a2 / JOINT_COUNT as f64;
        self.sum_sq_jerk += j2 / JOINT_COUNT as f64;
        self.sum_angle_dev += dev / JOINT_COUNT as f64;
        self.motion_steps += 1;

        let paddle = forward_kinematics(&self.config.robot, &self.q);
        let paddle_vel = paddle.velocity(&qdot);

        // Style and safety penalties.
        let over_table = paddle.center.x.abs() < self.config.table.half_width
            && paddle.center.y.abs() < self.config.table.half_length;
        if self.config.robot.at_limit(&self.q) {
            breakdown.style += self.config.reward.w_style * -1.0;
        }
        if over_table && paddle.center.z < self.config.reward.paddle_low_z {
            breakdown.paddle_height += self.config.reward.w_paddle_height * -1.0;
        }
        if over_table && paddle.center.z < 0.0 {
            // Collision: always the per-step penalty; terminal fault only
            // where the fault term is live (the real-preset safety layer
            // stops the robot, the sim preset relies on the penalty).
            breakdown.collision += self.config.reward.w_collision * -1.0;
            if self.config.reward.w_fault != 0.0 {
                self.fault = true;
                breakdown.fault += self.config.reward.w_fault * -2.0;
                events.push(EpisodeEvent::Fault {
                    t: t_now,
                    reason: FaultReason::PaddleTableCollision,
                });
                return Ok(self.finish_step(t_next, action, breakdown, events, true));
            }
        }

        // Ball segment with contact events.
        terminal |= self.advance_ball(dt, &paddle, paddle_vel, &mut breakdown, &mut events);

        // Approach shaping statistic (pre-hit only).
        if self.hit_time.is_none() {
            let d = (self.ball.position - paddle.center).norm();
            self.min_paddle_ball_dist = self.min_paddle_ball_dist.min(d);
        }

        // Miss shortcut: ball irrecoverably behind the robot.
        if !terminal
            && self.hit_time.is_none()
            && self.ball.velocity.y < 0.0
            && self.ball.position.y < self.config.robot.gantry_origin.y - 0.4
        {
            events.push(EpisodeEvent::BallBehindRobot { t: t_next });
            terminal = true;
        }

        if !terminal && self.step_count + 1 >= self.config.max_steps {
            events.push(EpisodeEvent::Timeout { t: t_next });
            terminal = true;
        }

        Ok(self.finish_step(t_next, action, breakdown, events, terminal))
    }

    /// Seal the step: histories, observation, episodic terms on termination.
    fn finish_step(
        &mut self,
        t_next: f64,
        action: &Action,
        mut breakdown: RewardBreakdown,
        events: Vec<EpisodeEvent>,
        terminal: bool,
    ) -> StepOutcome {
        self.step_count += 1;
        self.ball_history.push(t_next, self.ball.position);
        self.joint_history.push(t_next, self.q);
        let row = self.observe(t_next);
        self.window.push(row);

        if terminal {
            self.active = false;
            let r = &self.config.reward;
            // Approach share of the landing term.
            let approach = if self.hit_time.is_some() {
                1.0
            } else if self.min_paddle_ball_dist.is_finite() {
                (1.0 - self.min_paddle_ball_dist / r.approach_scale).max(0.0)
            } else {
                0.0
            };
            breakdown.landing += r.w_landing * r.approach_share * approach;
            // Episodic smoothness/safety proxies.
            if self.motion_steps > 0 {
                let n = self.motion_steps as f64;
                let rms_v = (self.sum_sq_vel / n).sqrt();
                let rms_a = (self.sum_sq_accel / n).sqrt();
                let rms_j = (self.sum_sq_jerk / n).sqrt();
                breakdown.velocity = r.w_velocity * (1.0 - rms_v / r.velocity_reference).max(0.0);
                breakdown.accel = r.w_accel * (1.0 - rms_a / r.accel_reference).max(0.0);
                breakdown.jerk = r.w_jerk * (1.0 - rms_j / r.jerk_reference).max(0.0);
                breakdown.joint_angle =
                    r.w_joint_angle * (1.0 - self.sum_angle_dev / n).max(0.0);
            }
        }

        self.events.extend_from_slice(&events);
        self.breakdown_total.add(&breakdown);
        let reward = breakdown.total();
        if self.collect_trace {
            self.trace.push(StepTrace {
                action: *action,
                reward,
                breakdown,
            });
        }
        StepOutcome {
            window: self.window,
            reward,
            done: terminal,
            breakdown,
            events,
        }
    }

    /// Move the ball through one control period, resolving paddle, table,
    /// net, and bounds events in order. Returns true when the episode ends.
    fn advance_ball(
        &mut self,
        dt: f64,
        paddle: &PaddlePose,
        paddle_vel: Vec3,
        breakdown: &mut RewardBreakdown,
        events: &mut Vec<EpisodeEvent>,
    ) -> bool {
        let constants = self.config.physics;
        let table = self.config.table;
        let r_ball = constants.ball_radius();
        let mut remaining = dt;

        for _ in 0..4 {
            if remaining <= 1e-12 {
                return false;
            }
            let a = self.ball;
            let b = match step_ball(&a, &constants, remaining) {
                Ok(s) => s,
                Err(_) => {
                    events.push(EpisodeEvent::OutOfBounds { t: a.time });
                    return true;
                }
            };

            // Candidate events on the segment, earliest fraction wins.
            #[derive(Clone, Copy, PartialEq)]
            enum Kind {
                Table,
                Net { blocked: bool },
                Paddle,
                Oob,
            }
            let mut best: Option<(f64, Kind)> = None;
            let consider = |s: f64, kind: Kind, best: &mut Option<(f64, Kind)>| {
                if best.map_or(true, |(bs, _)| s < bs) {
                    *best = Some((s, kind));
                }
            };

            // Table plane.
            if a.position.z > 0.0 && b.position.z <= 0.0 {
                let s = a.position.z / (a.position.z - b.position.z);
                let p = a.position.lerp(b.position, s);
                let vz = a.velocity.lerp(b.velocity, s).z;
                if table.on_table(p.x, p.y) && vz < 0.0 {
                    consider(s, Kind::Table, &mut best);
                }
            }
            // Net plane.
            if (a.position.y > 0.0) != (b.position.y > 0.0) && a.position.y != b.position.y {
                let s = a.position.y / (a.position.y - b.position.y);
                if (0.0..=1.0).contains(&s) {
                    let p = a.position.lerp(b.position, s);
                    let blocked =
                        p.z < table.net_height && p.z > -0.01 && p.x.abs() <= table.half_width;
                    consider(s, Kind::Net { blocked }, &mut best);
                }
            }
            // Paddle disk (pre-hit only).
            if self.hit_time.is_none() {
                let d_a = (a.position - paddle.center).dot(paddle.normal);
                let d_b = (b.position - paddle.center).dot(paddle.normal);
                let side = if d_a >= 0.0 { 1.0 } else { -1.0 };
                let surface = r_ball * side;
                let crossing = (d_a - surface) * (d_b - surface) < 0.0 || d_a.abs() <= r_ball;
                if crossing {
                    let s = if (d_a - d_b).abs() > 1e-12 {
                        ((d_a - surface) / (d_a - d_b)).clamp(0.0, 1.0)
                    } else {
                        0.0
                    };
                    let p = a.position.lerp(b.position, s);
                    let v = a.velocity.lerp(b.velocity, s);
                    let radial = {
                        let rel = p - paddle.center;
                        (rel - paddle.normal * rel.dot(paddle.normal)).norm()
                    };
                    let approaching =
                        side * (v - paddle_vel).dot(paddle.normal) < 0.0;
                    if radial <= self.config.robot.paddle_radius + r_ball && approaching {
                        consider(s, Kind::Paddle, &mut best);
                    }
                }
            }
            // Play volume exit at the segment end.
            if !table.in_world(b.position) {
                consider(1.0, Kind::Oob, &mut best);
            }

            let Some((s, kind)) = best else {
                self.ball = b;
                return false;
            };
            let event_state = BallState {
                position: a.position.lerp(b.position, s),
                velocity: a.velocity.lerp(b.velocity, s),
                time: a.time + (b.time - a.time) * s,
            };
            let consumed = remaining * s;

            match kind {
                Kind::Oob => {
                    self.ball = b;
                    events.push(EpisodeEvent::OutOfBounds { t: b.time });
                    return true;
                }
                Kind::Net { blocked: true } => {
                    self.ball = event_state;
                    events.push(EpisodeEvent::NetHit {
                        t: event_state.time,
                    });
                    return true;
                }
                Kind::Net { blocked: false } => {
                    let toward_human = event_state.velocity.y > 0.0;
                    events.push(EpisodeEvent::NetCrossing {
                        t: event_state.time,
                        z: event_state.position.z,
                        toward_human,
                    });
                    if toward_human && self.hit_time.is_some() && !self.net_reward_given {
                        self.net_reward_given = true;
                        let v = net_clearance_value(
                            event_state.position.z,
                            table.net_height,
                            &self.config.reward,
                        );
                        breakdown.net_clearance += self.config.reward.w_net_clearance * v;
                    }
                    self.ball = event_state;
                    self.ball.position.y += 1e-9 * event_state.velocity.y.signum();
                    remaining -= consumed;
                }
                Kind::Table => {
                    let x = event_state.position.x;
                    let y = event_state.position.y;
                    let t = event_state.time;
                    let side = if y < 0.0 {
                        TableSide::Robot
                    } else {
                        TableSide::Human
                    };
                    if self.hit_time.is_some() {
                        // Post-hit landing ends the episode.
                        let speed = event_state.velocity.norm();
                        events.push(EpisodeEvent::ReturnLanding { t, x, y, side, speed });
                        if side == TableSide::Human {
                            self.return_landing = Some(Vec2::new(x, y));
                            self.return_speed = Some(speed);
                            let r = &self.config.reward;
                            let d = Vec2::new(x, y).distance(r.landing_target);
                            breakdown.landing +=
                                r.w_landing * (5.0 - r.approach_share) * landing_closeness(d, r);
                            breakdown.hit_and_land += r.w_hit_and_land * 1.0;
                        }
                        self.ball = match bounce_table(&event_state, &constants) {
                            Ok(s) => s,
                            Err(_) => event_state,
                        };
                        return true;
                    }
                    match side {
                        TableSide::Robot => {
                            self.robot_bounces += 1;
                            if self.robot_bounces == 1 {
                                events.push(EpisodeEvent::IncomingBounce { t, x, y });
                            } else {
                                events.push(EpisodeEvent::SecondBounceMiss { t });
                                self.ball = event_state;
                                return true;
                            }
                        }
                        TableSide::Human => {
                            events.push(EpisodeEvent::HumanSideBounce { t, x, y });
                        }
                    }
                    self.ball = match bounce_table(&event_state, &constants) {
                        Ok(s) => s,
                        Err(_) => {
                            events.push(EpisodeEvent::OutOfBounds { t });
                            return true;
                        }
                    };
                    remaining -= consumed;
                }
                Kind::Paddle => {
                    let face = if (event_state.position - paddle.center).dot(paddle.normal) >= 0.0
                    {
                        paddle.normal
                    } else {
                        -paddle.normal
                    };
                    match paddle_contact(&event_state, face, paddle_vel, &constants) {
                        Ok(out) => {
                            self.hit_time = Some(event_state.time);
                            self.min_paddle_ball_dist = 0.0;
                            events.push(EpisodeEvent::Hit {
                                t: event_state.time,
                            });
                            self.ball = out;
                            remaining -= consumed;
                        }
                        Err(_) => {
                            self.ball = b;
                            return false;
                        }
                    }
                }
            }
        }
        false
    }

    /// Assemble the finished episode's record.
    pub fn into_record(self) -> EpisodeRecord {
        EpisodeRecord {
            throw: self.throw,
            events: self.events,
            total_return: self.breakdown_total.total(),
            breakdown: self.breakdown_total,
            steps: self.step_count,
            hit: self.hit_time.is_some(),
            fault: self.fault,
            return_landing: self.return_landing,
            return_speed: self.return_speed,
            step_trace: if self.collect_trace {
                Some(self.trace)
            } else {
                None
            },
        }
    }

    /// Ground-truth ball state (diagnostics and tests only).
    pub fn ball(&self) -> &BallState {
        &self.ball
    }

    /// Ground-truth joint positions (diagnostics and tests only).
    pub fn joints(&self) -> &[f64; JOINT_COUNT] {
        &self.q
    }

    pub fn paddle(&self) -> PaddlePose {
        forward_kinematics(&self.config.robot, &self.q)
    }
}

/// Run one full episode under a fixed policy parameter vector.
///
/// The normalizer passed in is read-only during the episode; the
/// observations seen are accumulated into the returned delta (one update per
/// window row consumed, including the primed row).
pub fn run_episode(
    env: &mut Env,
    params: &[f64],
    norm: &Normalizer,
    throw: &ThrowSample,
    latency_seed: u64,
    noise_seed: u64,
) -> Result<(EpisodeRecord, Normalizer)> {
    let mut window = env.reset(throw, latency_seed, noise_seed)?;
    let mut delta = Normalizer::new();
    delta.update(window.newest());
    let limits = env.config.limits;
    loop {
        let action = forward(params, &window, norm, &limits)?;
        let outcome = env.step(&action)?;
        delta.update(outcome.window.newest());
        window = outcome.window;
        if outcome.done {
            break;
        }
    }
    Ok((env.clone().into_record(), delta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::human_model::sample_throw;
    use crate::presets;
    use rand::Rng;

    fn narrow_throw(seed: u64) -> ThrowSample {
        let narrow = presets::distribution("narrow").unwrap();
        let (throw, _) = sample_throw(
            &narrow,
            seed,
            &PhysicsConstants::default(),
            &TableGeometry::default(),
            50_000,
        )
        .unwrap();
        throw
    }

    fn zero_policy() -> Vec<f64> {
        vec![0.0; crate::policy::PARAM_COUNT]
    }

    #[test]
    fn reset_is_deterministic() {
        let mut env = Env::new(EnvConfig::default());
        let throw = narrow_throw(1);
        let a = env.reset(&throw, 11, 22).unwrap();
        let b = env.reset(&throw, 11, 22).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_noise_zero_latency_first_observation_is_ground_truth() {
        let mut env = Env::new(EnvConfig::default().idealized());
        let throw = narrow_throw(2);
        let w = env.reset(&throw, 5, 6).unwrap();
        let row = w.newest();
        assert_eq!(row[0], throw.init.position.x);
        assert_eq!(row[1], throw.init.position.y);
        assert_eq!(row[2], throw.init.position.z);
        for j in 0..JOINT_COUNT {
            assert_eq!(row[3 + j], env.config.robot.home_pose[j]);
        }
    }

    #[test]
    fn episodes_are_bit_deterministic() {
        let throw = narrow_throw(3);
        let run = || {
            let mut env = Env::new(EnvConfig::default());
            run_episode(&mut env, &zero_policy(), &Normalizer::new(), &throw, 7, 8).unwrap()
        };
        let (a, da) = run();
        let (b, db) = run();
        assert_eq!(a.total_return.to_bits(), b.total_return.to_bits());
        assert_eq!(a.steps, b.steps);
        assert_eq!(a.events.len(), b.events.len());
        assert_eq!(da, db);
    }

    #[test]
    fn episode_always_terminates_within_cap() {
        for seed in 0..20 {
            let throw = narrow_throw(100 + seed);
            let mut env = Env::new(EnvConfig::default());
            let (record, _) =
                run_episode(&mut env, &zero_policy(), &Normalizer::new(), &throw, seed, seed)
                    .unwrap();
            assert!(record.steps <= 200);
            assert!(!record.events.is_empty());
        }
    }

    #[test]
    fn incoming_bounce_lands_near_sampled_landing() {
        // The env replays the throw at 75 Hz vs the sampler's 125 Hz; the
        // interpolated bounce must agree to a few millimeters.
        let throw = narrow_throw(4);
        let mut env = Env::new(EnvConfig::default());
        let (record, _) =
            run_episode(&mut env, &zero_policy(), &Normalizer::new(), &throw, 1, 1).unwrap();
        let bounce = record.events.iter().find_map(|e| match e {
            EpisodeEvent::IncomingBounce { x, y, .. } => Some(Vec2::new(*x, *y)),
            _ => None,
        });
        let bounce = bounce.expect("incoming bounce must occur");
        assert!(
            bounce.distance(throw.landing) < 0.01,
            "env bounce {:?} vs sampled {:?}",
            bounce,
            throw.landing
        );
    }

    #[test]
    fn latencies_do_not_touch_ground_truth() {
        // Same throw, same action script, action latencies pinned equal,
        // observation latencies wildly different: physics identical.
        let throw = narrow_throw(5);
        let script: Vec<Action> = (0..200)
            .map(|i| {
                let mut a = [0.0; ACTION_DIM];
                a[0] = if i % 2 == 0 { 0.5 } else { -0.5 };
                a[3] = 0.2;
                Action(a)
            })
            .collect();
        let run = |obs_latency_ms: f64| {
            let mut config = EnvConfig::default();
            config.ball_noise = 0.0;
            config.latency = LatencyModel {
                ball_obs_mean_ms: obs_latency_ms,
                ball_obs_spread_ms: 0.0,
                arm_obs_mean_ms: obs_latency_ms,
                arm_obs_spread_ms: 0.0,
                gantry_obs_mean_ms: obs_latency_ms,
                gantry_obs_spread_ms: 0.0,
                arm_action_mean_ms: 40.0,
                arm_action_spread_ms: 0.0,
                gantry_action_mean_ms: 40.0,
                gantry_action_spread_ms: 0.0,
                spread_is_variance: false,
                disabled: false,
            };
            let mut env = Env::new(config);
            env.reset(&throw, 1, 1).unwrap();
            let mut traj = Vec::new();
            for a in &script {
                let out = env.step(a).unwrap();
                traj.push(*env.ball());
                if out.done {
                    break;
                }
            }
            (traj, env.into_record())
        };
        let (traj_a, rec_a) = run(0.0);
        let (traj_b, rec_b) = run(120.0);
        assert_eq!(traj_a.len(), traj_b.len());
        for (a, b) in traj_a.iter().zip(traj_b.iter()) {
            assert_eq!(a.position, b.position);
        }
        assert_eq!(rec_a.events.len(), rec_b.events.len());
    }

    #[test]
    fn observation_noise_is_zero_mean() {
        let mut config = EnvConfig::default();
        config.latency = LatencyModel::zero();
        let throw = narrow_throw(6);
        let mut sum_err = Vec3::ZERO;
        let mut count = 0usize;
        let mut env = Env::new(config);
        let mut seed = 0u64;
        while count < 100_000 {
            seed += 1;
            env.reset(&throw, seed, seed).unwrap();
            loop {
                let out = env.step(&Action::zeros()).unwrap();
                let truth = env.ball().position;
                let row = out.window.newest();
                sum_err += Vec3::new(row[0], row[1], row[2]) - truth;
                count += 1;
                if out.done {
                    break;
                }
            }
        }
        let mean = sum_err / count as f64;
        assert!(mean.x.abs() < 0.002, "mean x error {}", mean.x);
        assert!(mean.y.abs() < 0.002, "mean y error {}", mean.y);
        assert!(mean.z.abs() < 0.002, "mean z error {}", mean.z);
    }

    #[test]
    fn breakdown_sums_to_reward_every_step() {
        let throw = narrow_throw(7);
        let mut env = Env::new(EnvConfig::default());
        env.reset(&throw, 3, 4).unwrap();
        let mut rng = crate::rng::rng_from(&[800]);
        loop {
            let mut a = [0.0; ACTION_DIM];
            for v in a.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
            let out = env.step(&Action(a)).unwrap();
            assert!((out.breakdown.total() - out.reward).abs() < 1e-12);
            if out.done {
                break;
            }
        }
    }

    #[test]
    fn returns_never_exceed_preset_ceilings() {
        for (reward, ceiling) in [(RewardConfig::sim(), 8.1), (RewardConfig::real(), 6.1)] {
            let mut config = EnvConfig::default();
            config.reward = reward;
            let mut env = Env::new(config);
            let mut rng = crate::rng::rng_from(&[801]);
            for seed in 0..200u64 {
                let throw = narrow_throw(1000 + seed);
                env.reset(&throw, seed, seed ^ 1).unwrap();
                let mut total = 0.0;
                loop {
                    let mut a = [0.0; ACTION_DIM];
                    for v in a.iter_mut() {
                        *v = rng.gen_range(-1.0..1.0);
                    }
                    let out = env.step(&Action(a)).unwrap();
                    total += out.reward;
                    if out.done {
                        break;
                    }
                }
                assert!(
                    total <= ceiling + 1e-9,
                    "return {total} exceeds ceiling {ceiling}"
                );
            }
        }
    }

    #[test]
    fn non_finite_action_faults_with_real_penalty() {
        let mut config = EnvConfig::default();
        config.reward = RewardConfig::real();
        let mut env = Env::new(config);
        let throw = narrow_throw(8);
        env.reset(&throw, 1, 2).unwrap();
        let mut a = [0.0; ACTION_DIM];
        a[4] = f64::NAN;
        let out = env.step(&Action(a)).unwrap();
        assert!(out.done);
        let record = env.into_record();
        assert!(record.fault);
        assert_eq!(sparse_eval_score(&record), -2);
        assert!(record.breakdown.fault <= -2.0 + 1e-12);
    }

    #[test]
    fn stepping_after_done_is_an_error() {
        let mut env = Env::new(EnvConfig::default());
        let throw = narrow_throw(9);
        env.reset(&throw, 1, 2).unwrap();
        loop {
            let out = env.step(&Action::zeros()).unwrap();
            if out.done {
                break;
            }
        }
        assert!(matches!(
            env.step(&Action::zeros()),
            Err(Error::EpisodeInactive)
        ));
    }

    #[test]
    fn sparse_score_cases() {
        let base = EpisodeRecord {
            throw: narrow_throw(10),
            events: vec![],
            total_return: 0.0,
            breakdown: RewardBreakdown::default(),
            steps: 10,
            hit: false,
            fault: false,
            return_landing: None,
            return_speed: None,
            step_trace: None,
        };
        assert_eq!(sparse_eval_score(&base), 0);
        let hit_only = EpisodeRecord {
            hit: true,
            ..base.clone()
        };
        assert_eq!(sparse_eval_score(&hit_only), 1);
        let full = EpisodeRecord {
            hit: true,
            return_landing: Some(Vec2::new(0.0, 0.7)),
            ..base.clone()
        };
        assert_eq!(sparse_eval_score(&full), 2);
        let faulted = EpisodeRecord {
            fault: true,
            hit: true,
            ..base
        };
        assert_eq!(sparse_eval_score(&faulted), -2);
    }

    #[test]
    fn reward_shape_helpers() {
        let r = RewardConfig::sim();
        assert_eq!(landing_closeness(0.0, &r), 1.0);
        assert_eq!(landing_closeness(1.0, &r), 0.0);
        assert_eq!(landing_closeness(2.0, &r), 0.0);
        let net_h = TableGeometry::default().net_height;
        assert_eq!(net_clearance_value(net_h + 0.15, net_h, &r), 1.0);
        assert!(net_clearance_value(net_h + 0.15 + 0.5, net_h, &r) < 1e-12);
    }

    #[test]
    fn a_reachable_throw_gets_hit_by_the_static_paddle() {
        // The home pose must be a credible forehand: across many narrow
        // throws, the untouched paddle should intercept at least a few.
        let mut hits = 0;
        for seed in 0..50 {
            let throw = narrow_throw(2000 + seed);
            let mut env = Env::new(EnvConfig::default().idealized());
            let (record, _) =
                run_episode(&mut env, &zero_policy(), &Normalizer::new(), &throw, 1, 1).unwrap();
            if record.hit {
                hits += 1;
            }
        }
        assert!(hits >= 3, "static home paddle hit only {hits}/50 throws");
    }

    #[test]
    fn infeasible_reset_rejected() {
        let mut env = Env::new(EnvConfig::default());
        let mut throw = narrow_throw(11);
        throw.init.position = Vec3::new(50.0, 0.0, 1.0);
        assert!(env.reset(&throw, 1, 1).is_err());
    }
}
