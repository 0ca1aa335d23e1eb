//! A stand-in opponent: a hidden throw distribution with an
//! interaction-conditioned sampling rule.
//!
//! The surrogate owns a hidden "true" behavior box that training code never
//! reads; only emitted throws are observable. Unconditioned (opening)
//! throws come from a narrower lob box, the way a player warming up without
//! an opponent only lobs. Once the robot returns a ball, the next throw is
//! drawn from the hidden box contracted toward the return: start position
//! pulled toward where the return landed, velocities scaled by the incoming
//! speed ratio (clamped to +/-20%). The conditioned box is a convex
//! combination of the hidden box and the target point, so emitted behavior
//! always stays inside the hidden support while depending on how the robot
//! plays - the nonstationarity that iterative refitting exists to track.

use crate::human_model::{sample_throw, BallDistribution, ThrowSample};
use crate::math::{Vec2, Vec3};
use crate::physics::{simulate_flight, BallState, PhysicsConstants, TableGeometry, Trajectory};
use crate::rng::rng_from;
use crate::{Error, Result};
use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// What the thrower perceives about a robot return.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnInfo {
    /// Landing point of the robot's return on the human side, m.
    pub landing: Vec2,
    /// Ball speed at that landing, m/s.
    pub speed: f64,
}

/// Anything that can supply throws for training, evaluation, or rallies.
///
/// Implementations may carry state across calls (a human reacts to the last
/// exchange), so phases that consume a source must run episodes in order.
pub trait ThrowSource {
    /// A fresh rally-opening throw (no robot return to react to).
    fn opening_throw(&mut self) -> Result<ThrowSample>;

    /// The thrower's answer to a robot return: the next throw, or None when
    /// the thrower fails to return it.
    fn attempt_return(&mut self, incoming: &ReturnInfo) -> Result<Option<ThrowSample>>;

    /// Rebase the source's randomness for a new experiment phase, so runs
    /// resumed at a phase boundary see the same stream as uninterrupted
    /// ones. Sources without randomness ignore this.
    fn reset_stream(&mut self, seed: u64) {
        let _ = seed;
    }
}

/// Tunable conditioning parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateParams {
    /// Contraction of the hidden box toward the conditioning target, [0, 1].
    pub coupling: f64,
    /// Velocity scale clamp half-width (0.2 = +/-20%).
    pub velocity_clamp: f64,
    /// Probability the surrogate returns a reachable ball.
    pub return_probability: f64,
    /// Rejection budget per conditioned sample before falling back to the
    /// hidden box.
    pub max_rejects: usize,
}

impl Default for SurrogateParams {
    fn default() -> Self {
        Self {
            coupling: 0.4,
            velocity_clamp: 0.2,
            return_probability: 0.95,
            max_rejects: 20_000,
        }
    }
}

/// The surrogate human thrower.
#[derive(Debug, Clone)]
pub struct SurrogateHuman {
    hidden: BallDistribution,
    lob: BallDistribution,
    params: SurrogateParams,
    physics: PhysicsConstants,
    table: TableGeometry,
    reference_speed: f64,
    rng: ChaCha8Rng,
}

impl SurrogateHuman {
    pub fn new(
        hidden: BallDistribution,
        lob: BallDistribution,
        params: SurrogateParams,
        physics: PhysicsConstants,
        table: TableGeometry,
        seed: u64,
    ) -> Result<Self> {
        hidden.validate(&table)?;
        lob.validate(&table)?;
        // Mid-range throw speed of the hidden behavior, used to normalize
        // the incoming-speed coupling.
        let mid_vel = (hidden.vel_min + hidden.vel_max) * 0.5;
        let reference_speed = mid_vel.norm().max(1e-6);
        Ok(Self {
            hidden,
            lob,
            params,
            physics,
            table,
            reference_speed,
            rng: rng_from(&[seed, crate::rng::tag("surrogate")]),
        })
    }

    /// Skill presets: the player's converged box is the hidden behavior and
    /// the same player's bootstrap-round box supplies the lobs.
    pub fn from_skill(
        skill: &str,
        params: SurrogateParams,
        physics: PhysicsConstants,
        table: TableGeometry,
        seed: u64,
    ) -> Result<Self> {
        let player = crate::presets::skill_player(skill)?;
        let hidden = crate::presets::distribution(&format!("{player}_m2"))?;
        let lob = crate::presets::distribution(&format!("{player}_m0"))?;
        Self::new(hidden, lob, params, physics, table, seed)
    }

    /// Contract the hidden box toward a target point by the coupling factor.
    fn conditioned_box(&self, incoming: &ReturnInfo) -> BallDistribution {
        let k = self.params.coupling.clamp(0.0, 1.0);
        let h = &self.hidden;

        // Start position target: the return's landing spot (the player hits
        // from where the ball comes to them); z stays at the box center.
        let target_pos = Vec3::new(
            incoming.landing.x,
            incoming.landing.y,
            (h.pos_min.z + h.pos_max.z) * 0.5,
        );
        // Velocity target: mid-range velocity scaled with the incoming speed.
        let ratio = (incoming.speed / self.reference_speed).clamp(
            1.0 - self.params.velocity_clamp,
            1.0 + self.params.velocity_clamp,
        );
        let target_vel = (h.vel_min + h.vel_max) * (0.5 * ratio);

        let pull = |lo: Vec3, hi: Vec3, t: Vec3| -> (Vec3, Vec3) {
            (lo + (t - lo) * k, hi + (t - hi) * k)
        };
        let (pos_min, pos_max) = pull(h.pos_min, h.pos_max, target_pos);
        let (vel_min, vel_max) = pull(h.vel_min, h.vel_max, target_vel);

        BallDistribution {
            pos_min,
            pos_max,
            vel_min,
            vel_max,
            land_min: h.land_min,
            land_max: h.land_max,
        }
    }

    fn sample_from(&mut self, dist: &BallDistribution) -> Result<ThrowSample> {
        let seed = self.rng.next_u64();
        match sample_throw(dist, seed, &self.physics, &self.table, self.params.max_rejects) {
            Ok((throw, _)) => Ok(throw),
            Err(Error::InfeasibleDistribution { .. }) if *dist != self.hidden => {
                // Conditioned slice was unplayable; fall back to the full
                // hidden behavior.
                let hidden = self.hidden;
                self.sample_from(&hidden)
            }
            Err(e) => Err(e),
        }
    }
}

impl ThrowSource for SurrogateHuman {
    fn reset_stream(&mut self, seed: u64) {
        self.rng = rng_from(&[seed, crate::rng::tag("surrogate")]);
    }

    fn opening_throw(&mut self) -> Result<ThrowSample> {
        let lob = self.lob;
        self.sample_from(&lob)
    }

    fn attempt_return(&mut self, incoming: &ReturnInfo) -> Result<Option<ThrowSample>> {
        // Miss roll first so the stream stays aligned whatever the outcome.
        let miss_roll: f64 = self.rng.gen_range(0.0..1.0);
        if miss_roll >= self.params.return_probability {
            return Ok(None);
        }
        let conditioned = self.conditioned_box(incoming);
        self.sample_from(&conditioned).map(Some)
    }
}

/// One recorded exchange step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TapeEntry {
    Opening(ThrowSample),
    Return(Option<ThrowSample>),
}

/// Wraps a source and records everything it emits.
pub struct RecordingSource<S: ThrowSource> {
    pub inner: S,
    pub tape: Vec<TapeEntry>,
}

impl<S: ThrowSource> RecordingSource<S> {
    pub fn new(inner: S) -> Self {
        Self {
            inner,
            tape: Vec::new(),
        }
    }
}

impl<S: ThrowSource> ThrowSource for RecordingSource<S> {
    fn opening_throw(&mut self) -> Result<ThrowSample> {
        let t = self.inner.opening_throw()?;
        self.tape.push(TapeEntry::Opening(t));
        Ok(t)
    }

    fn attempt_return(&mut self, incoming: &ReturnInfo) -> Result<Option<ThrowSample>> {
        let t = self.inner.attempt_return(incoming)?;
        self.tape.push(TapeEntry::Return(t));
        Ok(t)
    }
}

/// Replays a recorded tape; the consumer must request the same sequence of
/// call kinds that produced it.
pub struct TapeSource {
    entries: std::collections::VecDeque<TapeEntry>,
}

impl TapeSource {
    pub fn new(tape: Vec<TapeEntry>) -> Self {
        Self {
            entries: tape.into(),
        }
    }
}

impl ThrowSource for TapeSource {
    fn opening_throw(&mut self) -> Result<ThrowSample> {
        match self.entries.pop_front() {
            Some(TapeEntry::Opening(t)) => Ok(t),
            other => Err(Error::InvalidArgument(format!(
                "tape desync: expected opening throw, got {other:?}"
            ))),
        }
    }

    fn attempt_return(&mut self, incoming: &ReturnInfo) -> Result<Option<ThrowSample>> {
        let _ = incoming;
        match self.entries.pop_front() {
            Some(TapeEntry::Return(t)) => Ok(t),
            other => Err(Error::InvalidArgument(format!(
                "tape desync: expected return attempt, got {other:?}"
            ))),
        }
    }
}

/// Render a throw into a perception-rate observed trajectory: samples at
/// 125 Hz with per-axis uniform noise, truncated shortly after the first
/// robot-side bounce so fitting sees the bounce but not the far tail.
pub fn render_observed_trajectory(
    init: &BallState,
    physics: &PhysicsConstants,
    table: &TableGeometry,
    noise_half_width: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Trajectory> {
    let dt = 1.0 / crate::human_model::PERCEPTION_RATE_HZ;
    let flight = simulate_flight(init, physics, dt, 2.0, table)?;
    let cutoff = flight
        .events
        .iter()
        .find_map(|e| match e {
            crate::physics::FlightEvent::Bounce {
                time,
                side: crate::physics::TableSide::Robot,
                ..
            } => Some(time + 0.08),
            _ => None,
        })
        .unwrap_or(f64::MAX);
    let mut samples: Vec<BallState> = flight
        .trajectory
        .samples
        .into_iter()
        .take_while(|s| s.time <= cutoff)
        .collect();
    for s in samples.iter_mut() {
        if noise_half_width > 0.0 {
            s.position.x += rng.gen_range(-noise_half_width..=noise_half_width);
            s.position.y += rng.gen_range(-noise_half_width..=noise_half_width);
            s.position.z += rng.gen_range(-noise_half_width..=noise_half_width);
        }
    }
    let t = Trajectory {
        samples,
        sample_period: dt,
    };
    t.validate()?;
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn beginner(seed: u64) -> SurrogateHuman {
        SurrogateHuman::from_skill(
            "beginner",
            SurrogateParams::default(),
            PhysicsConstants::default(),
            TableGeometry::default(),
            seed,
        )
        .unwrap()
    }

    #[test]
    fn opening_throws_come_from_the_lob_box() {
        let mut s = beginner(1);
        let lob = presets::distribution("player3_m0").unwrap();
        for _ in 0..20 {
            let t = s.opening_throw().unwrap();
            assert!(lob.contains_init(t.init.position, t.init.velocity));
            assert!(lob.contains_landing(t.landing));
        }
    }

    #[test]
    fn conditioned_throws_stay_inside_the_hidden_box() {
        let mut s = beginner(2);
        let hidden = presets::distribution("player3_m2").unwrap();
        let mut returned = 0;
        for i in 0..40 {
            let info = ReturnInfo {
                landing: Vec2::new(-0.3 + 0.02 * i as f64, 0.5 + 0.01 * i as f64),
                speed: 4.0 + 0.1 * i as f64,
            };
            if let Some(t) = s.attempt_return(&info).unwrap() {
                returned += 1;
                assert!(
                    hidden.contains_init(t.init.position, t.init.velocity),
                    "conditioned throw escaped the hidden box: {:?}",
                    t.init
                );
            }
        }
        assert!(returned >= 30, "surrogate returned only {returned}/40");
    }

    #[test]
    fn conditioning_shifts_throw_positions_toward_the_landing() {
        let mut s = beginner(3);
        let mut left = Vec::new();
        let mut right = Vec::new();
        for i in 0..60 {
            let landing_x = if i % 2 == 0 { -0.6 } else { 0.6 };
            let info = ReturnInfo {
                landing: Vec2::new(landing_x, 0.7),
                speed: 5.0,
            };
            if let Some(t) = s.attempt_return(&info).unwrap() {
                if landing_x < 0.0 {
                    left.push(t.init.position.x);
                } else {
                    right.push(t.init.position.x);
                }
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(
            mean(&left) < mean(&right),
            "left-conditioned mean {} should sit left of right-conditioned {}",
            mean(&left),
            mean(&right)
        );
    }

    #[test]
    fn surrogate_is_deterministic_from_seed() {
        let run = |seed| {
            let mut s = beginner(seed);
            let mut throws = vec![s.opening_throw().unwrap()];
            for i in 0..10 {
                let info = ReturnInfo {
                    landing: Vec2::new(0.1 * i as f64 - 0.4, 0.6),
                    speed: 5.0,
                };
                if let Some(t) = s.attempt_return(&info).unwrap() {
                    throws.push(t);
                }
            }
            throws
        };
        assert_eq!(run(9), run(9));
        assert_ne!(run(9), run(10));
    }

    #[test]
    fn misses_happen_at_roughly_the_configured_rate() {
        let mut s = SurrogateHuman::from_skill(
            "beginner",
            SurrogateParams {
                return_probability: 0.7,
                ..SurrogateParams::default()
            },
            PhysicsConstants::default(),
            TableGeometry::default(),
            4,
        )
        .unwrap();
        let mut misses = 0;
        let n = 400;
        for _ in 0..n {
            let info = ReturnInfo {
                landing: Vec2::new(0.0, 0.7),
                speed: 5.0,
            };
            if s.attempt_return(&info).unwrap().is_none() {
                misses += 1;
            }
        }
        let rate = misses as f64 / n as f64;
        assert!((rate - 0.3).abs() < 0.08, "miss rate {rate}");
    }

    #[test]
    fn tape_replays_exactly() {
        let mut recorder = RecordingSource::new(beginner(5));
        let mut emitted = vec![recorder.opening_throw().unwrap()];
        for i in 0..5 {
            let info = ReturnInfo {
                landing: Vec2::new(0.1 * i as f64, 0.8),
                speed: 4.5,
            };
            if let Some(t) = recorder.attempt_return(&info).unwrap() {
                emitted.push(t);
            }
        }
        let mut tape = TapeSource::new(recorder.tape.clone());
        let mut replayed = vec![tape.opening_throw().unwrap()];
        for i in 0..5 {
            let info = ReturnInfo {
                landing: Vec2::new(0.1 * i as f64, 0.8),
                speed: 4.5,
            };
            if let Some(t) = tape.attempt_return(&info).unwrap() {
                replayed.push(t);
            }
        }
        assert_eq!(emitted, replayed);
        // Desync is detected.
        let mut tape = TapeSource::new(recorder.tape);
        let info = ReturnInfo {
            landing: Vec2::new(0.0, 0.8),
            speed: 4.5,
        };
        assert!(tape.attempt_return(&info).is_err());
    }

    #[test]
    fn rendered_trajectory_covers_flight_and_bounce() {
        let mut s = beginner(6);
        let throw = s.opening_throw().unwrap();
        let mut rng = rng_from(&[42]);
        let t = render_observed_trajectory(
            &throw.init,
            &PhysicsConstants::default(),
            &TableGeometry::default(),
            0.01,
            &mut rng,
        )
        .unwrap();
        assert!(t.samples.len() >= 10);
        // Contains samples near the table plane (the bounce region).
        let min_z = t.samples.iter().fold(f64::MAX, |m, s| m.min(s.position.z));
        assert!(min_z < 0.1, "min z {min_z}");
        // Noiseless render of the same throw is deterministic.
        let a = render_observed_trajectory(
            &throw.init,
            &PhysicsConstants::default(),
            &TableGeometry::default(),
            0.0,
            &mut rng_from(&[1]),
        )
        .unwrap();
        let b = render_observed_trajectory(
            &throw.init,
            &PhysicsConstants::default(),
            &TableGeometry::default(),
            0.0,
            &mut rng_from(&[2]),
        )
        .unwrap();
        assert_eq!(a, b);
    }
}
