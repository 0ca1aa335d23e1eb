//! The control policy: a 3-layer gated dilated 1-D CNN.
//!
//! Input is an 8x11 observation window (rows = timesteps oldest first,
//! columns = ball position (3) + joint positions (8)). Kernel size 2 with
//! dilations 1/2/4 and valid padding shrinks the time axis 8 -> 7 -> 5 -> 1;
//! the surviving slice is the 8-vector of joint velocities. Layers 1-2 are
//! gated (`tanh(conv_a) * sigmoid(conv_b)`), layer 3 is a plain tanh conv.
//! That assignment gives exactly 976 trainable scalars:
//!
//! ```text
//! layer 1 gated: 2 * (11*2*8  + 8)  = 368
//! layer 2 gated: 2 * (8*2*12  + 12) = 408
//! layer 3 plain:      12*2*8  + 8   = 200
//!                                     976
//! ```
//!
//! The whole network is a pure function of a flat parameter vector; there is
//! no autodiff anywhere in this crate.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

/// Timesteps in the observation window.
pub const OBS_STEPS: usize = 8;
/// Columns per observation row: ball position (3) + joint positions (8).
pub const OBS_DIM: usize = 11;
/// Joint velocity outputs.
pub const ACTION_DIM: usize = 8;
/// Total trainable scalars.
pub const PARAM_COUNT: usize = 976;

const L1_FILTERS: usize = 8;
const L2_FILTERS: usize = 12;
const L3_FILTERS: usize = ACTION_DIM;
const KERNEL: usize = 2;

/// One 8x11 observation window, rows oldest first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationWindow(pub [[f64; OBS_DIM]; OBS_STEPS]);

impl ObservationWindow {
    pub fn zeros() -> Self {
        Self([[0.0; OBS_DIM]; OBS_STEPS])
    }

    /// Window primed with the same row at every timestep.
    pub fn filled_with(row: [f64; OBS_DIM]) -> Self {
        Self([row; OBS_STEPS])
    }

    /// Drop the oldest row and append `row` as the newest.
    pub fn push(&mut self, row: [f64; OBS_DIM]) {
        self.0.rotate_left(1);
        self.0[OBS_STEPS - 1] = row;
    }

    pub fn newest(&self) -> &[f64; OBS_DIM] {
        &self.0[OBS_STEPS - 1]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }
}

/// Per-joint velocity limits, m/s for the two prismatic joints and rad/s for
/// the six revolute joints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityLimits(pub [f64; ACTION_DIM]);

impl Default for VelocityLimits {
    fn default() -> Self {
        Self([2.0, 2.0, 6.0, 6.0, 6.0, 6.0, 6.0, 6.0])
    }
}

/// An 8-vector of joint velocities, already clamped to limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action(pub [f64; ACTION_DIM]);

impl Action {
    pub fn zeros() -> Self {
        Self([0.0; ACTION_DIM])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Running per-column observation statistics (Welford form).
///
/// `variance` is the population variance `m2 / count`. Until two rows have
/// been seen the normalizer acts as the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub count: u64,
    pub mean: [f64; OBS_DIM],
    pub m2: [f64; OBS_DIM],
}

impl Default for Normalizer {
    fn default() -> Self {
        Self::new()
    }
}

impl Normalizer {
    pub fn new() -> Self {
        Self {
            count: 0,
            mean: [0.0; OBS_DIM],
            m2: [0.0; OBS_DIM],
        }
    }

    /// Welford update with one observation row.
    pub fn update(&mut self, row: &[f64; OBS_DIM]) {
        self.count += 1;
        let n = self.count as f64;
        for c in 0..OBS_DIM {
            let delta = row[c] - self.mean[c];
            self.mean[c] += delta / n;
            self.m2[c] += delta * (row[c] - self.mean[c]);
        }
    }

    pub fn variance(&self) -> [f64; OBS_DIM] {
        let mut v = [0.0; OBS_DIM];
        if self.count > 0 {
            for c in 0..OBS_DIM {
                v[c] = self.m2[c] / self.count as f64;
            }
        }
        v
    }

    /// (mean, std) actually applied by [`forward`]; identity until count >= 2.
    pub fn effective(&self) -> ([f64; OBS_DIM], [f64; OBS_DIM]) {
        if self.count < 2 {
            return ([0.0; OBS_DIM], [1.0; OBS_DIM]);
        }
        let var = self.variance();
        let mut std = [1.0; OBS_DIM];
        for c in 0..OBS_DIM {
            std[c] = var[c].sqrt().max(1e-8);
        }
        (self.mean, std)
    }

    /// Merge another accumulator into this one (parallel variance merge).
    ///
    /// Bitwise result depends on merge order; callers that need determinism
    /// must merge in a fixed order.
    pub fn merge(&mut self, other: &Normalizer) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let n_a = self.count as f64;
        let n_b = other.count as f64;
        let n = n_a + n_b;
        for c in 0..OBS_DIM {
            let delta = other.mean[c] - self.mean[c];
            self.mean[c] += delta * (n_b / n);
            self.m2[c] += other.m2[c] + delta * delta * n_a * n_b / n;
        }
        self.count += other.count;
    }
}

// Flat layout offsets. Weight tensors are indexed [filter][in_channel][k].
const L1A_W: usize = 0;
const L1A_B: usize = L1A_W + OBS_DIM * KERNEL * L1_FILTERS; // 176
const L1G_W: usize = L1A_B + L1_FILTERS; // 184
const L1G_B: usize = L1G_W + OBS_DIM * KERNEL * L1_FILTERS; // 360
const L2A_W: usize = L1G_B + L1_FILTERS; // 368
const L2A_B: usize = L2A_W + L1_FILTERS * KERNEL * L2_FILTERS; // 560
const L2G_W: usize = L2A_B + L2_FILTERS; // 572
const L2G_B: usize = L2G_W + L1_FILTERS * KERNEL * L2_FILTERS; // 764
const L3_W: usize = L2G_B + L2_FILTERS; // 776
const L3_B: usize = L3_W + L2_FILTERS * KERNEL * L3_FILTERS; // 968
const END: usize = L3_B + L3_FILTERS; // 976

/// A named slice of the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamSlice {
    pub name: &'static str,
    pub start: usize,
    pub len: usize,
}

/// The fixed mapping from flat indices to named tensors.
///
/// Slices tile [0, 976) exactly, in order, with no gaps or overlap.
pub fn param_layout() -> [ParamSlice; 10] {
    [
        ParamSlice { name: "layer1_value_weight", start: L1A_W, len: L1A_B - L1A_W },
        ParamSlice { name: "layer1_value_bias", start: L1A_B, len: L1G_W - L1A_B },
        ParamSlice { name: "layer1_gate_weight", start: L1G_W, len: L1G_B - L1G_W },
        ParamSlice { name: "layer1_gate_bias", start: L1G_B, len: L2A_W - L1G_B },
        ParamSlice { name: "layer2_value_weight", start: L2A_W, len: L2A_B - L2A_W },
        ParamSlice { name: "layer2_value_bias", start: L2A_B, len: L2G_W - L2A_B },
        ParamSlice { name: "layer2_gate_weight", start: L2G_W, len: L2G_B - L2G_W },
        ParamSlice { name: "layer2_gate_bias", start: L2G_B, len: L3_W - L2G_B },
        ParamSlice { name: "layer3_weight", start: L3_W, len: L3_B - L3_W },
        ParamSlice { name: "layer3_bias", start: L3_B, len: END - L3_B },
    ]
}

/// Per-layer parameter counts (value+gate combined): (368, 408, 200).
pub fn layer_param_counts() -> (usize, usize, usize) {
    (L2A_W - L1A_W, L3_W - L2A_W, END - L3_W)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Raw network output before clamping, each component in (-1, 1).
pub fn forward_raw(
    params: &[f64],
    obs: &ObservationWindow,
    norm: &Normalizer,
) -> Result<[f64; ACTION_DIM]> {
    if params.len() != PARAM_COUNT {
        return Err(Error::ShapeMismatch {
            expected: PARAM_COUNT,
            got: params.len(),
            context: "policy parameter vector",
        });
    }
    if !obs.is_finite() {
        return Err(Error::NonFinite {
            context: "observation window",
        });
    }

    let (mean, std) = norm.effective();
    let mut x = [[0.0f64; OBS_DIM]; OBS_STEPS];
    for t in 0..OBS_STEPS {
        for c in 0..OBS_DIM {
            x[t][c] = (obs.0[t][c] - mean[c]) / std[c];
        }
    }

    // Layer 1: kernel 2, dilation 1, gated. 8 -> 7 timesteps.
    let mut h1 = [[0.0f64; L1_FILTERS]; 7];
    for t in 0..7 {
        for f in 0..L1_FILTERS {
            let mut a = params[L1A_B + f];
            let mut g = params[L1G_B + f];
            let base = f * OBS_DIM * KERNEL;
            for c in 0..OBS_DIM {
                let w = base + c * KERNEL;
                a += params[L1A_W + w] * x[t][c] + params[L1A_W + w + 1] * x[t + 1][c];
                g += params[L1G_W + w] * x[t][c] + params[L1G_W + w + 1] * x[t + 1][c];
            }
            h1[t][f] = a.tanh() * sigmoid(g);
        }
    }

    // Layer 2: kernel 2, dilation 2, gated. 7 -> 5 timesteps.
    let mut h2 = [[0.0f64; L2_FILTERS]; 5];
    for t in 0..5 {
        for f in 0..L2_FILTERS {
            let mut a = params[L2A_B + f];
            let mut g = params[L2G_B + f];
            let base = f * L1_FILTERS * KERNEL;
            for c in 0..L1_FILTERS {
                let w = base + c * KERNEL;
                a += params[L2A_W + w] * h1[t][c] + params[L2A_W + w + 1] * h1[t + 2][c];
                g += params[L2G_W + w] * h1[t][c] + params[L2G_W + w + 1] * h1[t + 2][c];
            }
            h2[t][f] = a.tanh() * sigmoid(g);
        }
    }

    // Layer 3: kernel 2, dilation 4, plain tanh. 5 -> 1 timestep.
    let mut out = [0.0f64; ACTION_DIM];
    for f in 0..L3_FILTERS {
        let mut a = params[L3_B + f];
        let base = f * L2_FILTERS * KERNEL;
        for c in 0..L2_FILTERS {
            let w = base + c * KERNEL;
            a += params[L3_W + w] * h2[0][c] + params[L3_W + w + 1] * h2[4][c];
        }
        out[f] = a.tanh();
    }
    Ok(out)
}

/// Full policy evaluation: normalize, run the network, clamp to limits.
///
/// The raw tanh output is the commanded joint velocity; with the default
/// limits the clamp only guards externally supplied actions.
pub fn forward(
    params: &[f64],
    obs: &ObservationWindow,
    norm: &Normalizer,
    limits: &VelocityLimits,
) -> Result<Action> {
    let raw = forward_raw(params, obs, norm)?;
    let mut a = [0.0; ACTION_DIM];
    for j in 0..ACTION_DIM {
        a[j] = raw[j].clamp(-limits.0[j], limits.0[j]);
    }
    Ok(Action(a))
}

/// Checkpoint: parameters + normalizer + provenance metadata.
///
/// Binary layout (all little-endian):
///
/// ```text
/// magic   8 bytes  "RLBCKPT1"
/// version u32      1
/// count   u32      976
/// params  976 x f64
/// norm    u64 count, 11 x f64 mean, 11 x f64 m2
/// iter    u32
/// phase   u32 byte length + UTF-8 bytes
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub params: Vec<f64>,
    pub normalizer: Normalizer,
    pub iteration: u32,
    pub phase: String,
}

const CKPT_MAGIC: &[u8; 8] = b"RLBCKPT1";
const CKPT_VERSION: u32 = 1;

impl Checkpoint {
    pub fn new(params: Vec<f64>, normalizer: Normalizer, iteration: u32, phase: &str) -> Self {
        Self {
            params,
            normalizer,
            iteration,
            phase: phase.to_string(),
        }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        if self.params.len() != PARAM_COUNT {
            return Err(Error::ShapeMismatch {
                expected: PARAM_COUNT,
                got: self.params.len(),
                context: "checkpoint parameters",
            });
        }
        w.write_all(CKPT_MAGIC)?;
        w.write_all(&CKPT_VERSION.to_le_bytes())?;
        w.write_all(&(PARAM_COUNT as u32).to_le_bytes())?;
        for p in &self.params {
            w.write_all(&p.to_le_bytes())?;
        }
        w.write_all(&self.normalizer.count.to_le_bytes())?;
        for v in &self.normalizer.mean {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in &self.normalizer.m2 {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&self.iteration.to_le_bytes())?;
        let phase = self.phase.as_bytes();
        w.write_all(&(phase.len() as u32).to_le_bytes())?;
        w.write_all(phase)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CKPT_MAGIC {
            return Err(Error::CheckpointFormat("bad magic".into()));
        }
        let version = read_u32(&mut r)?;
        if version != CKPT_VERSION {
            return Err(Error::CheckpointFormat(format!(
                "unsupported version {version}"
            )));
        }
        let count = read_u32(&mut r)? as usize;
        if count != PARAM_COUNT {
            return Err(Error::CheckpointFormat(format!(
                "parameter count {count}, expected {PARAM_COUNT}"
            )));
        }
        let mut params = vec![0.0f64; count];
        for p in params.iter_mut() {
            *p = read_f64(&mut r)?;
        }
        let mut norm = Normalizer::new();
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        norm.count = u64::from_le_bytes(b8);
        for v in norm.mean.iter_mut() {
            *v = read_f64(&mut r)?;
        }
        for v in norm.m2.iter_mut() {
            *v = read_f64(&mut r)?;
        }
        let iteration = read_u32(&mut r)?;
        let phase_len = read_u32(&mut r)? as usize;
        if phase_len > 4096 {
            return Err(Error::CheckpointFormat("phase label too long".into()));
        }
        let mut phase = vec![0u8; phase_len];
        r.read_exact(&mut phase)?;
        let phase = String::from_utf8(phase)
            .map_err(|_| Error::CheckpointFormat("phase label is not UTF-8".into()))?;
        Ok(Self {
            params,
            normalizer: norm,
            iteration,
            phase,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let mut buf = Vec::with_capacity(PARAM_COUNT * 8 + 256);
        self.write_to(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::read_from(bytes.as_slice())
    }

    /// Human-readable JSON export of the same content.
    pub fn to_text(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_params(seed: u64) -> Vec<f64> {
        let mut rng = crate::rng::rng_from(&[seed]);
        (0..PARAM_COUNT).map(|_| rng.gen_range(-0.5..0.5)).collect()
    }

    fn random_obs(seed: u64) -> ObservationWindow {
        let mut rng = crate::rng::rng_from(&[seed, 1]);
        let mut w = ObservationWindow::zeros();
        for t in 0..OBS_STEPS {
            for c in 0..OBS_DIM {
                w.0[t][c] = rng.gen_range(-2.0..2.0);
            }
        }
        w
    }

    #[test]
    fn layer_decomposition_totals_976() {
        let (l1, l2, l3) = layer_param_counts();
        assert_eq!(l1, 368);
        assert_eq!(l2, 408);
        assert_eq!(l3, 200);
        assert_eq!(l1 + l2 + l3, PARAM_COUNT);
    }

    #[test]
    fn layout_covers_everything_once() {
        let layout = param_layout();
        let mut covered = vec![false; PARAM_COUNT];
        for s in layout {
            for i in s.start..s.start + s.len {
                assert!(!covered[i], "index {i} covered twice ({})", s.name);
                covered[i] = true;
            }
        }
        assert!(covered.iter().all(|&c| c), "layout has gaps");
        assert_eq!(
            layout.iter().find(|s| s.name == "layer3_bias").unwrap().len,
            8
        );
    }

    #[test]
    fn zero_params_give_zero_action() {
        let params = vec![0.0; PARAM_COUNT];
        let out = forward_raw(&params, &random_obs(3), &Normalizer::new()).unwrap();
        assert_eq!(out, [0.0; ACTION_DIM]);
    }

    #[test]
    fn wrong_param_length_rejected() {
        let params = vec![0.0; PARAM_COUNT - 1];
        assert!(forward_raw(&params, &random_obs(4), &Normalizer::new()).is_err());
    }

    #[test]
    fn output_is_inside_unit_box() {
        // Final tanh bounds every pre-clamp output. In f64 tanh saturates to
        // exactly +/-1 for large inputs, so the bound is closed numerically.
        for seed in 0..20 {
            let mut params = random_params(seed);
            for p in params.iter_mut() {
                *p *= 10.0; // exaggerate
            }
            let out = forward_raw(&params, &random_obs(seed), &Normalizer::new()).unwrap();
            for v in out {
                assert!((-1.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn every_input_timestep_reaches_the_output() {
        // Receptive field 1 + (2-1)(1+2+4) = 8 covers the whole window.
        let params = random_params(11);
        let norm = Normalizer::new();
        let base_obs = random_obs(12);
        let base = forward_raw(&params, &base_obs, &norm).unwrap();
        for t in 0..OBS_STEPS {
            let mut obs = base_obs;
            for c in 0..OBS_DIM {
                obs.0[t][c] += 0.25;
            }
            let out = forward_raw(&params, &obs, &norm).unwrap();
            assert!(
                out.iter().zip(base.iter()).any(|(a, b)| (a - b).abs() > 1e-9),
                "perturbing timestep {t} did not change the output"
            );
        }
    }

    #[test]
    fn identity_normalizer_statistics_are_identity() {
        // Mean 0 / variance 1 statistics must not alter the input at all.
        let params = random_params(21);
        let obs = random_obs(22);
        let mut norm = Normalizer::new();
        // Rows alternating +1/-1 give mean 0, population variance exactly 1.
        norm.update(&[1.0; OBS_DIM]);
        norm.update(&[-1.0; OBS_DIM]);
        let (mean, std) = norm.effective();
        assert_eq!(mean, [0.0; OBS_DIM]);
        assert_eq!(std, [1.0; OBS_DIM]);
        let with = forward_raw(&params, &obs, &norm).unwrap();
        let without = forward_raw(&params, &obs, &Normalizer::new()).unwrap();
        assert_eq!(with, without);
    }

    #[test]
    fn forward_is_deterministic() {
        let params = random_params(31);
        let obs = random_obs(32);
        let norm = Normalizer::new();
        let a = forward(&params, &obs, &norm, &VelocityLimits::default()).unwrap();
        let b = forward(&params, &obs, &norm, &VelocityLimits::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn clamp_respects_tight_limits() {
        let params = random_params(41);
        let obs = random_obs(42);
        let limits = VelocityLimits([0.01; ACTION_DIM]);
        let a = forward(&params, &obs, &Normalizer::new(), &limits).unwrap();
        for v in a.0 {
            assert!(v.abs() <= 0.01);
        }
    }

    #[test]
    fn normalizer_constant_stream() {
        let mut n = Normalizer::new();
        let row = [3.5; OBS_DIM];
        for _ in 0..50 {
            n.update(&row);
        }
        let (mean, _) = n.effective();
        for c in 0..OBS_DIM {
            assert!((mean[c] - 3.5).abs() < 1e-12);
            assert!(n.variance()[c].abs() < 1e-12);
        }
    }

    #[test]
    fn normalizer_two_point_closed_form() {
        let mut n = Normalizer::new();
        let mut a = [0.0; OBS_DIM];
        let mut b = [0.0; OBS_DIM];
        for c in 0..OBS_DIM {
            a[c] = c as f64;
            b[c] = 2.0 * c as f64 + 1.0;
        }
        n.update(&a);
        n.update(&b);
        let var = n.variance();
        for c in 0..OBS_DIM {
            let m = (a[c] + b[c]) / 2.0;
            let expect = ((a[c] - m).powi(2) + (b[c] - m).powi(2)) / 2.0;
            assert!((n.mean[c] - m).abs() < 1e-12);
            assert!((var[c] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn normalizer_order_invariance_within_tolerance() {
        let mut fwd = Normalizer::new();
        let mut rev = Normalizer::new();
        let a = [1.25; OBS_DIM];
        let b = [-0.75; OBS_DIM];
        fwd.update(&a);
        fwd.update(&b);
        rev.update(&b);
        rev.update(&a);
        for c in 0..OBS_DIM {
            assert!((fwd.mean[c] - rev.mean[c]).abs() < 1e-12);
            assert!((fwd.variance()[c] - rev.variance()[c]).abs() < 1e-12);
        }
    }

    #[test]
    fn normalizer_merge_matches_serial() {
        let mut rng = crate::rng::rng_from(&[55]);
        let rows: Vec<[f64; OBS_DIM]> = (0..64)
            .map(|_| {
                let mut r = [0.0; OBS_DIM];
                for v in r.iter_mut() {
                    *v = rng.gen_range(-3.0..3.0);
                }
                r
            })
            .collect();
        let mut serial = Normalizer::new();
        for r in &rows {
            serial.update(r);
        }
        let mut left = Normalizer::new();
        let mut right = Normalizer::new();
        for r in &rows[..20] {
            left.update(r);
        }
        for r in &rows[20..] {
            right.update(r);
        }
        left.merge(&right);
        assert_eq!(left.count, serial.count);
        for c in 0..OBS_DIM {
            assert!((left.mean[c] - serial.mean[c]).abs() < 1e-10);
            assert!((left.variance()[c] - serial.variance()[c]).abs() < 1e-10);
        }
    }

    #[test]
    fn checkpoint_binary_round_trip() {
        let mut norm = Normalizer::new();
        norm.update(&[0.5; OBS_DIM]);
        norm.update(&[1.5; OBS_DIM]);
        let ck = Checkpoint::new(random_params(61), norm, 7, "sim-1");
        let mut buf = Vec::new();
        ck.write_to(&mut buf).unwrap();
        let back = Checkpoint::read_from(buf.as_slice()).unwrap();
        assert_eq!(ck, back);
    }

    #[test]
    fn checkpoint_rejects_garbage() {
        assert!(Checkpoint::read_from(&b"not a checkpoint"[..]).is_err());
    }

    #[test]
    fn window_push_ordering() {
        let mut w = ObservationWindow::zeros();
        for i in 0..12 {
            let mut row = [0.0; OBS_DIM];
            row[0] = i as f64;
            w.push(row);
        }
        assert_eq!(w.0[0][0], 4.0); // oldest
        assert_eq!(w.newest()[0], 11.0);
    }
}
