//! Ball-flight physics: quadratic drag, table bounce, paddle contact.
//!
//! The integrator is the semi-implicit update
//!
//! ```text
//! a = g - K_d * |v| * v
//! x' = x + dt * (v + dt * a / 2)
//! v' = v + dt * a
//! ```
//!
//! with `K_d = Cd * rho * A / (2 m)`. Spin is not modeled. All functions are
//! pure on value types; rollout workers can call them concurrently with no
//! shared state.
//!
//! Event detection (bounce, net, out-of-bounds) runs on the straight segment
//! between consecutive integrator states; event times come from linear
//! interpolation and the remainder of the step is re-integrated from the
//! post-event state, so a fixed step rate still resolves sub-step contacts.

use crate::math::{Vec2, Vec3};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Position/velocity/time of a ball in flight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallState {
    /// Meters. x lateral, y along the table (net at 0), z up from the table plane.
    pub position: Vec3,
    /// Meters per second.
    pub velocity: Vec3,
    /// Seconds since episode start.
    pub time: f64,
}

impl BallState {
    pub fn new(position: Vec3, velocity: Vec3, time: f64) -> Self {
        Self {
            position,
            velocity,
            time,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite() && self.velocity.is_finite() && self.time.is_finite()
    }
}

/// Physical constants of the ball/air/table system.
///
/// Defaults: standard 40 mm celluloid ball (m = 2.7 g, A = 1.256e-3 m^2,
/// Cd = 0.47) in sea-level air; restitution/friction are tunable estimates,
/// not measured values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhysicsConstants {
    /// m/s^2, signed (negative = down).
    pub gravity_z: f64,
    /// Dimensionless drag coefficient of the sphere.
    pub drag_coefficient: f64,
    /// kg/m^3.
    pub air_density: f64,
    /// kg.
    pub ball_mass: f64,
    /// m^2 cross-sectional area.
    pub cross_section: f64,
    /// Normal restitution of the table surface, in (0, 1].
    pub table_restitution: f64,
    /// Tangential speed loss per table bounce, in [0, 1].
    pub table_friction: f64,
    /// Normal restitution of the paddle rubber, in (0, 1].
    pub paddle_restitution: f64,
    /// m.
    pub ball_diameter: f64,
}

impl Default for PhysicsConstants {
    fn default() -> Self {
        Self {
            gravity_z: -9.81,
            drag_coefficient: 0.47,
            air_density: 1.29,
            ball_mass: 0.0027,
            cross_section: 1.256e-3,
            table_restitution: 0.87,
            table_friction: 0.10,
            paddle_restitution: 0.90,
            ball_diameter: 0.040,
        }
    }
}

impl PhysicsConstants {
    /// Drag factor `K_d = Cd * rho * A / (2 m)`, units 1/m.
    pub fn drag_factor(&self) -> f64 {
        self.drag_coefficient * self.air_density * self.cross_section / (2.0 * self.ball_mass)
    }

    /// Gravity as a vector.
    pub fn gravity(&self) -> Vec3 {
        Vec3::new(0.0, 0.0, self.gravity_z)
    }

    pub fn ball_radius(&self) -> f64 {
        self.ball_diameter / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ball_mass > 0.0) {
            return Err(Error::Validation("ball_mass must be positive".into()));
        }
        if self.drag_factor() < 0.0 {
            return Err(Error::Validation("drag factor must be >= 0".into()));
        }
        if !(self.table_restitution > 0.0 && self.table_restitution <= 1.0) {
            return Err(Error::Validation("table_restitution must be in (0,1]".into()));
        }
        if !(self.paddle_restitution > 0.0 && self.paddle_restitution <= 1.0) {
            return Err(Error::Validation(
                "paddle_restitution must be in (0,1]".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.table_friction) {
            return Err(Error::Validation("table_friction must be in [0,1]".into()));
        }
        Ok(())
    }
}

/// Table and play-volume geometry.
///
/// Sign convention (fixed): net plane at y = 0, robot side y < 0, human side
/// y > 0, table surface at z = 0. The world box bounds flight simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TableGeometry {
    /// Half the table length along y, m.
    pub half_length: f64,
    /// Half the table width along x, m.
    pub half_width: f64,
    /// Net height above the table plane, m.
    pub net_height: f64,
    /// Flight is abandoned below this z (floor relative to table plane), m.
    pub floor_z: f64,
    /// |x| beyond this is out of the play volume, m.
    pub world_x: f64,
    /// |y| beyond this is out of the play volume, m.
    pub world_y: f64,
    /// z above this is out of the play volume, m.
    pub world_z: f64,
}

impl Default for TableGeometry {
    fn default() -> Self {
        Self {
            half_length: 1.37,
            half_width: 0.7625,
            net_height: 0.1525,
            floor_z: -0.80,
            world_x: 3.0,
            world_y: 4.0,
            world_z: 5.0,
        }
    }
}

impl TableGeometry {
    /// Is a table-plane point on the table footprint?
    pub fn on_table(&self, x: f64, y: f64) -> bool {
        x.abs() <= self.half_width && y.abs() <= self.half_length
    }

    /// Robot half of the footprint (y < 0).
    pub fn on_robot_side(&self, x: f64, y: f64) -> bool {
        self.on_table(x, y) && y < 0.0
    }

    /// Human half of the footprint (y > 0).
    pub fn on_human_side(&self, x: f64, y: f64) -> bool {
        self.on_table(x, y) && y > 0.0
    }

    pub fn in_world(&self, p: Vec3) -> bool {
        p.x.abs() <= self.world_x
            && p.y.abs() <= self.world_y
            && p.z >= self.floor_z
            && p.z <= self.world_z
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.half_length > 0.0 && self.half_width > 0.0 && self.net_height > 0.0) {
            return Err(Error::Validation(
                "table dimensions must be positive".into(),
            ));
        }
        if self.floor_z >= 0.0 {
            return Err(Error::Validation("floor_z must be below the table plane".into()));
        }
        Ok(())
    }
}

/// An ordered sequence of ball states at a fixed sample period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<BallState>,
    /// Seconds between consecutive samples.
    pub sample_period: f64,
}

impl Trajectory {
    pub fn validate(&self) -> Result<()> {
        if self.samples.len() < 2 {
            return Err(Error::Validation("trajectory needs >= 2 samples".into()));
        }
        for w in self.samples.windows(2) {
            if w[1].time <= w[0].time {
                return Err(Error::Validation(
                    "trajectory timestamps must be strictly increasing".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Which half of the table a bounce happened on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TableSide {
    Robot,
    Human,
}

/// Events recorded while simulating a flight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FlightEvent {
    /// Ball touched the table plane inside the footprint and rebounded.
    Bounce {
        time: f64,
        x: f64,
        y: f64,
        side: TableSide,
    },
    /// Ball crossed the net plane above the net (clearance = z at crossing).
    NetCrossing { time: f64, x: f64, z: f64 },
    /// Ball struck the net; flight ends.
    NetHit { time: f64, x: f64, z: f64 },
    /// Ball left the play volume; flight ends.
    OutOfBounds { time: f64 },
}

impl FlightEvent {
    pub fn time(&self) -> f64 {
        match *self {
            FlightEvent::Bounce { time, .. }
            | FlightEvent::NetCrossing { time, .. }
            | FlightEvent::NetHit { time, .. }
            | FlightEvent::OutOfBounds { time } => time,
        }
    }
}

/// Result of [`simulate_flight`].
#[derive(Debug, Clone)]
pub struct Flight {
    pub trajectory: Trajectory,
    pub events: Vec<FlightEvent>,
}

impl Flight {
    /// (x, y) of the first bounce on the robot side, if any.
    pub fn robot_side_landing(&self) -> Option<Vec2> {
        self.events.iter().find_map(|e| match *e {
            FlightEvent::Bounce {
                x,
                y,
                side: TableSide::Robot,
                ..
            } => Some(Vec2::new(x, y)),
            _ => None,
        })
    }
}

/// One semi-implicit integrator step.
pub fn step_ball(state: &BallState, constants: &PhysicsConstants, dt: f64) -> Result<BallState> {
    if !state.is_finite() {
        return Err(Error::NonFinite {
            context: "step_ball input state",
        });
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be > 0, got {dt}")));
    }
    let k_d = constants.drag_factor();
    let v = state.velocity;
    let accel = constants.gravity() - v * (k_d * v.norm());
    Ok(BallState {
        position: state.position + (v + accel * (dt / 2.0)) * dt,
        velocity: v + accel * dt,
        time: state.time + dt,
    })
}

/// Apply the table bounce law to a state at the table plane.
///
/// Normal: `vz' = -e_t * vz`. Tangential: scaled by `1 - mu_t` (clamped to
/// [0, 1]). Position is unchanged.
pub fn bounce_table(incoming: &BallState, constants: &PhysicsConstants) -> Result<BallState> {
    if !incoming.is_finite() {
        return Err(Error::NonFinite {
            context: "bounce_table input state",
        });
    }
    if incoming.velocity.z >= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "bounce requires downward z velocity, got {}",
            incoming.velocity.z
        )));
    }
    let tangential = (1.0 - constants.table_friction).clamp(0.0, 1.0);
    Ok(BallState {
        position: incoming.position,
        velocity: Vec3::new(
            incoming.velocity.x * tangential,
            incoming.velocity.y * tangential,
            -constants.table_restitution * incoming.velocity.z,
        ),
        time: incoming.time,
    })
}

/// Impulsive contact with a rigid moving paddle.
///
/// The relative velocity's normal component reflects scaled by the paddle
/// restitution: `v_out = v_paddle + v_rel - (1 + e_p) (v_rel . n) n`. A
/// separating ball (`v_rel . n >= 0`) passes through unchanged. Geometric
/// gating (is the ball actually on the paddle disk?) is the caller's job.
pub fn paddle_contact(
    ball: &BallState,
    paddle_normal: Vec3,
    paddle_velocity: Vec3,
    constants: &PhysicsConstants,
) -> Result<BallState> {
    if !ball.is_finite() {
        return Err(Error::NonFinite {
            context: "paddle_contact ball state",
        });
    }
    if (paddle_normal.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "paddle normal must be unit length, |n| = {}",
            paddle_normal.norm()
        )));
    }
    let v_rel = ball.velocity - paddle_velocity;
    let vn = v_rel.dot(paddle_normal);
    if vn >= 0.0 {
        return Ok(*ball); // separating: no contact
    }
    let v_out = paddle_velocity + v_rel - paddle_normal * ((1.0 + constants.paddle_restitution) * vn);
    Ok(BallState {
        position: ball.position,
        velocity: v_out,
        time: ball.time,
    })
}

/// Options for [`simulate_flight`].
#[derive(Debug, Clone, Copy)]
pub struct FlightOptions {
    /// Hard cap on bounce events, guarding degenerate settle loops.
    pub max_bounces: usize,
}

impl Default for FlightOptions {
    fn default() -> Self {
        Self { max_bounces: 10 }
    }
}

/// Integrate a free flight, recording samples at `dt` and all events.
///
/// The flight ends at the horizon, when the ball leaves the play volume,
/// when it strikes the net, or after `max_bounces` table contacts.
pub fn simulate_flight(
    init: &BallState,
    constants: &PhysicsConstants,
    dt: f64,
    horizon: f64,
    table: &TableGeometry,
) -> Result<Flight> {
    if !(horizon > dt) {
        return Err(Error::InvalidArgument(format!(
            "horizon ({horizon}) must exceed dt ({dt})"
        )));
    }
    if !init.is_finite() {
        return Err(Error::NonFinite {
            context: "simulate_flight initial state",
        });
    }

    let mut samples = vec![*init];
    let mut events = Vec::new();
    let mut state = *init;
    let mut bounces = 0usize;
    let steps = (horizon / dt).ceil() as usize;

    'outer: for _ in 0..steps {
        let (next, step_events, terminal) =
            advance_with_events(&state, constants, dt, table, &mut bounces)?;
        events.extend_from_slice(&step_events);
        state = next;
        samples.push(state);
        if terminal {
            break 'outer;
        }
    }

    Ok(Flight {
        trajectory: Trajectory {
            samples,
            sample_period: dt,
        },
        events,
    })
}

/// Advance one fixed step, resolving any events inside it.
///
/// Returns the end-of-step state, the events that fired, and whether the
/// flight is over (net hit, out of bounds, bounce budget exhausted).
pub(crate) fn advance_with_events(
    state: &BallState,
    constants: &PhysicsConstants,
    dt: f64,
    table: &TableGeometry,
    bounces: &mut usize,
) -> Result<(BallState, Vec<FlightEvent>, bool)> {
    let mut events = Vec::new();
    let mut current = *state;
    let mut remaining = dt;

    // At most a few events can fire within one 13 ms step.
    for _ in 0..4 {
        let tentative = step_ball(&current, constants, remaining)?;

        match first_event_on_segment(&current, &tentative, table) {
            None => {
                current = tentative;
                break;
            }
            Some(hit) => {
                let event_state = interpolate(&current, &tentative, hit.fraction);
                let elapsed = remaining * hit.fraction;
                match hit.kind {
                    SegmentEventKind::TableBounce => {
                        let side = if event_state.position.y < 0.0 {
                            TableSide::Robot
                        } else {
                            TableSide::Human
                        };
                        events.push(FlightEvent::Bounce {
                            time: event_state.time,
                            x: event_state.position.x,
                            y: event_state.position.y,
                            side,
                        });
                        *bounces += 1;
                        if *bounces > 10 {
                            return Ok((event_state, events, true));
                        }
                        current = bounce_table(&event_state, constants)?;
                        remaining -= elapsed;
                        if remaining <= 1e-12 {
                            break;
                        }
                    }
                    SegmentEventKind::NetCrossing => {
                        events.push(FlightEvent::NetCrossing {
                            time: event_state.time,
                            x: event_state.position.x,
                            z: event_state.position.z,
                        });
                        // Not a terminal event: nudge past the plane and keep going.
                        current = event_state;
                        current.position.y += 1e-9 * event_state.velocity.y.signum();
                        remaining -= elapsed;
                        if remaining <= 1e-12 {
                            break;
                        }
                    }
                    SegmentEventKind::NetHit => {
                        events.push(FlightEvent::NetHit {
                            time: event_state.time,
                            x: event_state.position.x,
                            z: event_state.position.z,
                        });
                        return Ok((event_state, events, true));
                    }
                    SegmentEventKind::OutOfBounds => {
                        events.push(FlightEvent::OutOfBounds {
                            time: tentative.time,
                        });
                        return Ok((tentative, events, true));
                    }
                }
            }
        }
    }

    Ok((current, events, false))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum SegmentEventKind {
    TableBounce,
    NetCrossing,
    NetHit,
    OutOfBounds,
}

#[derive(Debug, Clone, Copy)]
struct SegmentEvent {
    kind: SegmentEventKind,
    /// Fraction of the segment at which the event occurs, in [0, 1].
    fraction: f64,
}

/// Linearly interpolate between two integrator states.
fn interpolate(a: &BallState, b: &BallState, s: f64) -> BallState {
    BallState {
        position: a.position.lerp(b.position, s),
        velocity: a.velocity.lerp(b.velocity, s),
        time: a.time + (b.time - a.time) * s,
    }
}

/// Earliest event on the straight segment from `a` to `b`, if any.
fn first_event_on_segment(
    a: &BallState,
    b: &BallState,
    table: &TableGeometry,
) -> Option<SegmentEvent> {
    let mut best: Option<SegmentEvent> = None;

    let mut consider = |candidate: SegmentEvent| {
        if best.map_or(true, |cur| candidate.fraction < cur.fraction) {
            best = Some(candidate);
        }
    };

    // Table plane crossing (downward, inside footprint).
    if a.position.z > 0.0 && b.position.z <= 0.0 {
        let s = a.position.z / (a.position.z - b.position.z);
        let p = a.position.lerp(b.position, s);
        let vz = a.velocity.lerp(b.velocity, s).z;
        if table.on_table(p.x, p.y) && vz < 0.0 {
            consider(SegmentEvent {
                kind: SegmentEventKind::TableBounce,
                fraction: s,
            });
        }
    }

    // Net plane crossing (either direction).
    if (a.position.y > 0.0) != (b.position.y > 0.0) && a.position.y != b.position.y {
        let s = a.position.y / (a.position.y - b.position.y);
        if (0.0..=1.0).contains(&s) {
            let p = a.position.lerp(b.position, s);
            let blocked = p.z < table.net_height && p.z > -0.01 && p.x.abs() <= table.half_width;
            consider(SegmentEvent {
                kind: if blocked {
                    SegmentEventKind::NetHit
                } else {
                    SegmentEventKind::NetCrossing
                },
                fraction: s,
            });
        }
    }

    // World exit, checked at the segment end.
    if !table.in_world(b.position) {
        consider(SegmentEvent {
            kind: SegmentEventKind::OutOfBounds,
            fraction: 1.0,
        });
    }

    best
}
