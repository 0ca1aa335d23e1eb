//! Sim-to-sim laboratory for cooperative table-tennis rally policies.
//!
//! The crate is organized around one experiment pipeline:
//!
//! - [`physics`] — ball flight with quadratic drag, table bounce, paddle
//!   contact. Pure value-type functions; the shared kernel for everything
//!   below.
//! - [`human_model`] — turns observed ball trajectories into a 16-number
//!   uniform throw distribution (simplex fitting, density clustering,
//!   min/max support extraction) and samples synthetic throws from it.
//! - [`policy`] — the control policy: a 3-layer gated dilated 1-D CNN over
//!   an 8x11 observation history, expressed as a pure function of a flat
//!   976-parameter vector.
//! - [`es`] — blackbox evolutionary search (BGS: antithetic orthogonal
//!   perturbations with difference-ranked elites; ARS ranking as a
//!   switchable baseline).
//! - [`env`] — the single-throw table-tennis MDP: simplified 8-DOF
//!   kinematic robot, per-episode sensor/actuation latencies, observation
//!   noise, and the weighted reward stack.
//! - [`surrogate`] — a hidden, interaction-conditioned throw generator
//!   standing in for a human opponent.
//! - [`pipeline`] — the iterative train/fine-tune orchestrator, baselines,
//!   seed selection, and rally evaluation.
//! - [`config`] / [`presets`] — experiment configuration and the named
//!   distribution / hyperparameter presets.
//!
//! All randomness flows from explicit seeds through ChaCha8 streams; a full
//! experiment is bit-reproducible from its master seed.

pub mod config;
pub mod env;
pub mod error;
pub mod es;
pub mod human_model;
pub mod math;
pub mod metrics;
pub mod physics;
pub mod pipeline;
pub mod policy;
pub mod presets;
pub mod rng;
pub mod surrogate;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
