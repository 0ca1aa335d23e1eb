//! Named throw-distribution presets.
//!
//! Sources: the hand-designed large/medium/narrow ablation boxes, the
//! converged reference box (`s2r_oracle`), and the per-player behavior
//! models at each refinement round (`player{1..5}_m{0..2}`).
//!
//! The published tables quote x velocity as a magnitude (symmetric about 0)
//! and y velocity as a magnitude toward the robot (so the signed y range is
//! `[-max, -min]`); z velocity and all positions are signed as printed.
//! [`from_table`] performs that conversion, taking arguments in the exact
//! row order of the tables.

use crate::human_model::BallDistribution;
use crate::math::{Vec2, Vec3};
use crate::{Error, Result};

/// Build a distribution from table-ordered values:
/// (min z vel, max z vel, max |x| vel, min |y| vel, max |y| vel,
///  x start min/max, y start min/max, z start min/max,
///  x land min/max, y land min/max).
#[allow(clippy::too_many_arguments)]
pub const fn from_table(
    min_z_vel: f64,
    max_z_vel: f64,
    max_x_vel: f64,
    min_y_vel: f64,
    max_y_vel: f64,
    x_start_min: f64,
    x_start_max: f64,
    y_start_min: f64,
    y_start_max: f64,
    z_start_min: f64,
    z_start_max: f64,
    x_land_min: f64,
    x_land_max: f64,
    y_land_min: f64,
    y_land_max: f64,
) -> BallDistribution {
    BallDistribution {
        pos_min: Vec3::new(x_start_min, y_start_min, z_start_min),
        pos_max: Vec3::new(x_start_max, y_start_max, z_start_max),
        vel_min: Vec3::new(-max_x_vel, -max_y_vel, min_z_vel),
        vel_max: Vec3::new(max_x_vel, -min_y_vel, max_z_vel),
        land_min: Vec2::new(x_land_min, y_land_min),
        land_max: Vec2::new(x_land_max, y_land_max),
    }
}

pub const LARGE: BallDistribution = from_table(
    -10.0, 10.0, 10.0, 2.0, 35.0, -0.76, 0.76, 0.1, 2.0, -0.4, 1.2, -0.76, 0.76, -1.37, -0.1,
);

pub const MEDIUM: BallDistribution = from_table(
    -0.1, 2.0, 1.5, 3.5, 8.5, -0.75, 0.4, 1.2, 1.37, 0.15, 0.6, -0.2, 0.7, -1.3, -0.5,
);

pub const NARROW: BallDistribution = from_table(
    -1.2, 1.5, 0.9, 5.0, 9.4, 0.15, 0.55, 1.01, 1.57, 0.25, 0.64, 0.18, 0.62, -1.26, -0.33,
);

pub const S2R_ORACLE: BallDistribution = from_table(
    -1.72, 2.72, 3.45, 2.96, 7.35, -0.82, 0.82, 0.03, 1.58, 0.19, 0.75, -0.62, 0.75, -1.36, -0.15,
);

pub const PLAYER1_M0: BallDistribution = from_table(
    1.25, 2.71, 1.70, 4.12, 6.31, -0.19, 0.19, 1.05, 2.51, 0.07, 0.62, -0.01, 0.67, -1.35, -0.2,
);
pub const PLAYER1_M1: BallDistribution = from_table(
    -1.47, 2.95, 3.05, 2.17, 6.63, -0.79, 0.63, 0.04, 1.87, 0.19, 0.83, -0.62, 0.74, -1.37, -0.15,
);
pub const PLAYER1_M2: BallDistribution = from_table(
    -1.56, 2.95, 3.05, 2.17, 6.63, -0.83, 0.70, 0.04, 1.92, 0.19, 0.83, -0.71, 0.74, -1.37, -0.15,
);

pub const PLAYER2_M0: BallDistribution = from_table(
    0.88, 2.84, 1.41, 3.97, 6.38, 0.02, 0.73, 0.85, 1.68, 0.15, 0.45, -0.08, 0.76, -1.34, -0.23,
);
pub const PLAYER2_M1: BallDistribution = from_table(
    -1.14, 2.84, 2.81, 3.52, 8.05, -0.86, 0.65, 0.37, 1.89, 0.08, 0.59, -0.52, 0.76, -1.36, -0.15,
);
pub const PLAYER2_M2: BallDistribution = from_table(
    -1.27, 3.07, 2.89, 2.74, 8.82, -0.87, 0.67, 0.08, 1.95, 0.01, 0.63, -0.68, 0.76, -1.37, -0.15,
);

pub const PLAYER3_M0: BallDistribution = from_table(
    0.64, 2.49, 0.79, 2.95, 6.03, 0.10, 0.61, 0.61, 1.35, 0.18, 0.52, -0.08, 0.76, -1.33, -0.22,
);
pub const PLAYER3_M1: BallDistribution = from_table(
    -1.23, 2.79, 2.59, 2.19, 7.11, -0.93, 0.79, 0.05, 1.83, -0.15, 1.10, -0.67, 0.76, -1.37, -0.18,
);
pub const PLAYER3_M2: BallDistribution = from_table(
    -1.39, 2.79, 2.78, 2.19, 7.11, -0.93, 0.81, 0.04, 1.92, -0.29, 1.11, -0.74, 0.76, -1.37, -0.16,
);

pub const PLAYER4_M0: BallDistribution = from_table(
    0.04, 2.25, 1.50, 4.44, 7.33, -0.09, 0.68, 1.01, 1.88, 0.15, 0.72, -0.02, 0.75, -1.37, -0.27,
);
pub const PLAYER4_M1: BallDistribution = from_table(
    -1.31, 2.73, 3.40, 3.33, 7.33, -0.8, 0.78, 0.21, 1.58, 0.24, 0.72, -0.19, 0.75, -1.37, -0.21,
);
pub const PLAYER4_M2: BallDistribution = from_table(
    -1.72, 2.73, 3.45, 2.96, 7.36, -0.83, 0.83, 0.04, 1.58, 0.19, 0.76, -0.63, 0.76, -1.37, -0.15,
);

pub const PLAYER5_M0: BallDistribution = from_table(
    0.52, 2.59, 0.68, 4.20, 6.34, 0.25, 0.42, 1.08, 1.44, 0.33, 0.58, 0.07, 0.58, -1.31, -0.30,
);
pub const PLAYER5_M1: BallDistribution = from_table(
    -0.70, 2.75, 2.30, 2.73, 6.94, -0.64, 0.55, 0.17, 1.81, 0.26, 0.76, -0.66, 0.73, -1.37, -0.16,
);
pub const PLAYER5_M2: BallDistribution = from_table(
    -0.87, 2.75, 2.68, 2.70, 6.94, -0.80, 0.64, 0.17, 1.82, 0.26, 0.79, -0.666, 0.73, -1.37, -0.16,
);

/// All preset names, lookup-ordered.
pub const PRESET_NAMES: [&str; 19] = [
    "large",
    "medium",
    "narrow",
    "s2r_oracle",
    "player1_m0",
    "player1_m1",
    "player1_m2",
    "player2_m0",
    "player2_m1",
    "player2_m2",
    "player3_m0",
    "player3_m1",
    "player3_m2",
    "player4_m0",
    "player4_m1",
    "player4_m2",
    "player5_m0",
    "player5_m1",
    "player5_m2",
];

/// Look up a preset by name.
pub fn distribution(name: &str) -> Result<BallDistribution> {
    let d = match name {
        "large" => LARGE,
        "medium" => MEDIUM,
        "narrow" => NARROW,
        "s2r_oracle" => S2R_ORACLE,
        "player1_m0" => PLAYER1_M0,
        "player1_m1" => PLAYER1_M1,
        "player1_m2" => PLAYER1_M2,
        "player2_m0" => PLAYER2_M0,
        "player2_m1" => PLAYER2_M1,
        "player2_m2" => PLAYER2_M2,
        "player3_m0" => PLAYER3_M0,
        "player3_m1" => PLAYER3_M1,
        "player3_m2" => PLAYER3_M2,
        "player4_m0" => PLAYER4_M0,
        "player4_m1" => PLAYER4_M1,
        "player4_m2" => PLAYER4_M2,
        "player5_m0" => PLAYER5_M0,
        "player5_m1" => PLAYER5_M1,
        "player5_m2" => PLAYER5_M2,
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown distribution preset '{other}' (known: {})",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    Ok(d)
}

/// Skill tiers mapped to players: 3 and 5 rally shortest, 1 longest.
pub fn skill_player(skill: &str) -> Result<&'static str> {
    match skill {
        "beginner" => Ok("player3"),
        "intermediate" => Ok("player4"),
        "advanced" => Ok("player1"),
        other => Err(Error::InvalidArgument(format!(
            "unknown skill preset '{other}' (beginner|intermediate|advanced)"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::TableGeometry;

    #[test]
    fn table_snapshot_values() {
        // Spot-lock one cell per conversion rule and a few per preset.
        assert_eq!(PLAYER1_M0.vel_min.z, 1.25);
        assert_eq!(PLAYER1_M1.vel_min.z, -1.47);
        assert_eq!(PLAYER1_M2.vel_min.z, -1.56);
        assert_eq!(PLAYER1_M0.vel_max.x, 1.70);
        assert_eq!(PLAYER1_M0.vel_min.x, -1.70);
        // |vy| in [4.12, 6.31] -> signed y velocity in [-6.31, -4.12].
        assert_eq!(PLAYER1_M0.vel_min.y, -6.31);
        assert_eq!(PLAYER1_M0.vel_max.y, -4.12);
        assert_eq!(NARROW.vel_max.y, -5.0);
        assert_eq!(NARROW.vel_min.y, -9.4);
        assert_eq!(NARROW.pos_min.x, 0.15);
        assert_eq!(MEDIUM.land_min.x, -0.2);
        assert_eq!(MEDIUM.land_max.y, -0.5);
        assert_eq!(LARGE.vel_min.y, -35.0);
        assert_eq!(LARGE.pos_min.z, -0.4);
        assert_eq!(S2R_ORACLE.vel_min.z, -1.72);
        assert_eq!(PLAYER5_M2.land_min.x, -0.666);
        assert_eq!(PLAYER4_M1.pos_min.x, -0.8);
        assert_eq!(PLAYER3_M1.pos_min.z, -0.15);
    }

    #[test]
    fn all_presets_validate() {
        let table = TableGeometry::default();
        for name in PRESET_NAMES {
            let d = distribution(name).unwrap();
            d.validate(&table)
                .unwrap_or_else(|e| panic!("preset {name}: {e}"));
        }
    }

    #[test]
    fn unknown_preset_is_an_error() {
        assert!(distribution("gigantic").is_err());
    }

    #[test]
    fn per_player_model_deltas_shrink_over_rounds() {
        use crate::human_model::distribution_delta;
        for p in 1..=5 {
            let m0 = distribution(&format!("player{p}_m0")).unwrap();
            let m1 = distribution(&format!("player{p}_m1")).unwrap();
            let m2 = distribution(&format!("player{p}_m2")).unwrap();
            let d01 = distribution_delta(&m0, &m1).summary;
            let d12 = distribution_delta(&m1, &m2).summary;
            assert!(
                d12 < d01,
                "player {p}: round 1->2 delta {d12} not below round 0->1 delta {d01}"
            );
        }
    }
}
