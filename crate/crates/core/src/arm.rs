//! Simulated 4-DOF planar redundant arm over a virtual keyboard.
//!
//! The arm replaces the physical robot as both the data source (motor
//! babbling) and the plant driven by the imitation controller. Everything
//! here is deterministic given a seed: pure kinematics, two fixed affine
//! "stereo" cameras, a geometric touch plane and a quantized key row.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const NUM_JOINTS: usize = 4;
/// Raw modality row layout: q(4), v(4: x_L,y_L,x_R,y_R), p, s, u(4).
pub const RAW_DIMS: usize = 14;

/// 2x2 affine camera: v = A e + b.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub a: [[f64; 2]; 2],
    pub b: [f64; 2],
}

impl Camera {
    pub fn project(&self, e: [f64; 2]) -> [f64; 2] {
        [
            self.a[0][0] * e[0] + self.a[0][1] * e[1] + self.b[0],
            self.a[1][0] * e[0] + self.a[1][1] * e[1] + self.b[1],
        ]
    }

    pub fn det(&self) -> f64 {
        self.a[0][0] * self.a[1][1] - self.a[0][1] * self.a[1][0]
    }

    /// Analytic inverse of the affine map.
    pub fn unproject(&self, v: [f64; 2]) -> [f64; 2] {
        let d = self.det();
        let x = v[0] - self.b[0];
        let y = v[1] - self.b[1];
        [
            (self.a[1][1] * x - self.a[0][1] * y) / d,
            (-self.a[1][0] * x + self.a[0][0] * y) / d,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmConfig {
    pub link_lengths: [f64; 4],
    /// (lower, upper) per joint, radians.
    pub joint_limits: [(f64, f64); 4],
    /// Seconds per control step.
    pub dt: f64,
    /// The keyboard plane: contact whenever the end-effector height is at
    /// or below this.
    pub key_plane_height: f64,
    pub num_keys: usize,
    /// Horizontal extent of the key row.
    pub keyboard_x: (f64, f64),
    pub camera_left: Camera,
    pub camera_right: Camera,
    /// Babbling amplitude bound ū, rad/s.
    pub babble_amp_max: f64,
    /// Steps per babbling cycle; the sinusoid phase spans exactly one
    /// period across a cycle so the first and last command are zero.
    pub cycle_steps: usize,
    /// Home posture the babbling starts from.
    pub home: [f64; 4],
}

impl Default for ArmConfig {
    fn default() -> Self {
        let home = [1.1, -0.6, -0.5, -0.4];
        let span = 2.0 * std::f64::consts::PI / 3.0;
        ArmConfig {
            link_lengths: [0.5, 0.4, 0.3, 0.2],
            joint_limits: [
                (home[0] - span, home[0] + span),
                (home[1] - span, home[1] + span),
                (home[2] - span, home[2] + span),
                (home[3] - span, home[3] + span),
            ],
            dt: 0.1,
            key_plane_height: 0.25,
            num_keys: 8,
            keyboard_x: (0.0, 1.4),
            camera_left: Camera {
                a: [[1.2, 0.1], [-0.05, 1.1]],
                b: [0.1, -0.2],
            },
            camera_right: Camera {
                a: [[1.0, -0.08], [0.07, 0.95]],
                b: [-0.15, 0.1],
            },
            babble_amp_max: 0.5,
            cycle_steps: 60,
            home,
        }
    }
}

impl ArmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.link_lengths.iter().any(|&l| l <= 0.0) {
            return Err(Error::Config("link lengths must be positive".into()));
        }
        if self.joint_limits.iter().any(|&(lo, hi)| !(lo < hi)) {
            return Err(Error::Config("degenerate joint limits".into()));
        }
        if self.cycle_steps < 2 {
            return Err(Error::Config("cycle_steps must be >= 2".into()));
        }
        if self.camera_left.det().abs() < 1e-12 || self.camera_right.det().abs() < 1e-12 {
            return Err(Error::Config("camera maps must be invertible".into()));
        }
        if self.camera_left == self.camera_right {
            return Err(Error::Config("camera maps must be distinct".into()));
        }
        if self.num_keys == 0 || !(self.keyboard_x.0 < self.keyboard_x.1) {
            return Err(Error::Config("invalid keyboard geometry".into()));
        }
        Ok(())
    }
}

/// Full observable state; `e = FK(q)` and `v`, `p`, `s` are always derived
/// from `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmState {
    pub q: [f64; 4],
    pub e: [f64; 2],
    /// Contact flag, 0 or 1.
    pub p: f64,
    /// Active key id in (0, 1], 0 when silent.
    pub s: f64,
    /// Stereo camera coordinates (x_L, y_L, x_R, y_R).
    pub v: [f64; 4],
}

impl ArmState {
    pub fn from_joints(q: [f64; 4], config: &ArmConfig) -> ArmState {
        let e = forward_kinematics(q, config);
        let (p, s) = sense_touch_sound(e, config);
        let vl = config.camera_left.project(e);
        let vr = config.camera_right.project(e);
        ArmState {
            q,
            e,
            p,
            s,
            v: [vl[0], vl[1], vr[0], vr[1]],
        }
    }

    pub fn home(config: &ArmConfig) -> ArmState {
        ArmState::from_joints(config.home, config)
    }
}

/// Planar chain end-effector position: cumulative-angle sum of link vectors.
pub fn forward_kinematics(q: [f64; 4], config: &ArmConfig) -> [f64; 2] {
    let mut theta = 0.0;
    let mut e = [0.0, 0.0];
    for (qi, li) in q.iter().zip(&config.link_lengths) {
        theta += qi;
        e[0] += li * theta.cos();
        e[1] += li * theta.sin();
    }
    e
}

/// 2x4 Jacobian of the planar chain, row-major [de_x/dq; de_y/dq].
pub fn jacobian(q: [f64; 4], config: &ArmConfig) -> [[f64; 4]; 2] {
    let mut theta = [0.0; 4];
    let mut acc = 0.0;
    for i in 0..4 {
        acc += q[i];
        theta[i] = acc;
    }
    let mut j = [[0.0; 4]; 2];
    for col in 0..4 {
        for i in col..4 {
            j[0][col] += -config.link_lengths[i] * theta[i].sin();
            j[1][col] += config.link_lengths[i] * theta[i].cos();
        }
    }
    j
}

/// Touch and sound from an end-effector position: contact when at or below
/// the key plane; the key id is the horizontal coordinate quantized into
/// `num_keys` bins and mapped affinely into (0, 1].
pub fn sense_touch_sound(e: [f64; 2], config: &ArmConfig) -> (f64, f64) {
    if e[1] > config.key_plane_height {
        return (0.0, 0.0);
    }
    let (x0, x1) = config.keyboard_x;
    let frac = ((e[0] - x0) / (x1 - x0)).clamp(0.0, 1.0);
    let bin = ((frac * config.num_keys as f64).floor() as usize).min(config.num_keys - 1);
    (1.0, (bin + 1) as f64 / config.num_keys as f64)
}

/// Clamped Euler step: q' = clamp(q + u dt), everything else derived.
pub fn step(state: &ArmState, u: [f64; 4], config: &ArmConfig) -> ArmState {
    let mut q = state.q;
    for i in 0..4 {
        let (lo, hi) = config.joint_limits[i];
        q[i] = (q[i] + u[i] * config.dt).clamp(lo, hi);
    }
    ArmState::from_joints(q, config)
}

/// Proportional velocity gain of the oracle controller (1/s). A finite gain
/// gives the controller a realistic tracking lag on moving references, like
/// the built-in Cartesian controllers it stands in for; raising it toward
/// 1/dt turns the oracle into a deadbeat controller.
pub const IK_GAIN: f64 = 4.0;

/// One damped-least-squares step toward the end-effector position whose
/// left-camera image matches the target. Returns the joint velocity command
/// (bounded by ū) and whether it saturated.
pub fn ik_oracle_step(q: [f64; 4], target_v: [f64; 4], config: &ArmConfig) -> ([f64; 4], bool) {
    let target_e = config.camera_left.unproject([target_v[0], target_v[1]]);
    let e = forward_kinematics(q, config);
    let de = [target_e[0] - e[0], target_e[1] - e[1]];
    let j = jacobian(q, config);
    // JJ^T + damping^2 I, 2x2
    let lambda2 = 0.05 * 0.05;
    let mut jjt = [[lambda2, 0.0], [0.0, lambda2]];
    for r in 0..2 {
        for c in 0..2 {
            for k in 0..4 {
                jjt[r][c] += j[r][k] * j[c][k];
            }
        }
    }
    let det = jjt[0][0] * jjt[1][1] - jjt[0][1] * jjt[1][0];
    let rhs = [
        (jjt[1][1] * de[0] - jjt[0][1] * de[1]) / det,
        (-jjt[1][0] * de[0] + jjt[0][0] * de[1]) / det,
    ];
    let mut u = [0.0; 4];
    let mut saturated = false;
    let cap = config.babble_amp_max;
    for k in 0..4 {
        let dq = (j[0][k] * rhs[0] + j[1][k] * rhs[1]) * IK_GAIN;
        if dq.abs() > cap {
            saturated = true;
        }
        u[k] = dq.clamp(-cap, cap);
    }
    (u, saturated)
}

/// One recorded babbling step: post-step modality values paired with the
/// command that produced them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawRow {
    pub q: [f64; 4],
    pub v: [f64; 4],
    pub p: f64,
    pub s: f64,
    pub u: [f64; 4],
}

impl RawRow {
    pub fn to_array(&self) -> [f64; RAW_DIMS] {
        let mut a = [0.0; RAW_DIMS];
        a[..4].copy_from_slice(&self.q);
        a[4..8].copy_from_slice(&self.v);
        a[8] = self.p;
        a[9] = self.s;
        a[10..14].copy_from_slice(&self.u);
        a
    }

    pub fn from_array(a: &[f64; RAW_DIMS]) -> RawRow {
        RawRow {
            q: [a[0], a[1], a[2], a[3]],
            v: [a[4], a[5], a[6], a[7]],
            p: a[8],
            s: a[9],
            u: [a[10], a[11], a[12], a[13]],
        }
    }
}

/// Per-dimension (min, max) affine map onto [-1, 1]. Degenerate dimensions
/// (constant over the trace) normalize to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub min: [f64; RAW_DIMS],
    pub max: [f64; RAW_DIMS],
}

impl Normalization {
    pub fn fit(rows: &[RawRow]) -> Normalization {
        let mut min = [f64::INFINITY; RAW_DIMS];
        let mut max = [f64::NEG_INFINITY; RAW_DIMS];
        for row in rows {
            for (d, v) in row.to_array().iter().enumerate() {
                min[d] = min[d].min(*v);
                max[d] = max[d].max(*v);
            }
        }
        Normalization { min, max }
    }

    pub fn normalize_dim(&self, d: usize, v: f64) -> f64 {
        let span = self.max[d] - self.min[d];
        if span < 1e-12 {
            0.0
        } else {
            2.0 * (v - self.min[d]) / span - 1.0
        }
    }

    pub fn denormalize_dim(&self, d: usize, n: f64) -> f64 {
        let span = self.max[d] - self.min[d];
        if span < 1e-12 {
            self.min[d]
        } else {
            self.min[d] + (n + 1.0) * span / 2.0
        }
    }

    pub fn normalize_row(&self, row: &RawRow) -> [f64; RAW_DIMS] {
        let a = row.to_array();
        let mut out = [0.0; RAW_DIMS];
        for d in 0..RAW_DIMS {
            out[d] = self.normalize_dim(d, a[d]);
        }
        out
    }

    pub fn normalize_joints(&self, q: [f64; 4]) -> [f64; 4] {
        [
            self.normalize_dim(0, q[0]),
            self.normalize_dim(1, q[1]),
            self.normalize_dim(2, q[2]),
            self.normalize_dim(3, q[3]),
        ]
    }

    pub fn normalize_vision(&self, v: [f64; 4]) -> [f64; 4] {
        [
            self.normalize_dim(4, v[0]),
            self.normalize_dim(5, v[1]),
            self.normalize_dim(6, v[2]),
            self.normalize_dim(7, v[3]),
        ]
    }

    pub fn denormalize_vision(&self, v: [f64; 4]) -> [f64; 4] {
        [
            self.denormalize_dim(4, v[0]),
            self.denormalize_dim(5, v[1]),
            self.denormalize_dim(6, v[2]),
            self.denormalize_dim(7, v[3]),
        ]
    }

    pub fn denormalize_motor(&self, u: [f64; 4]) -> [f64; 4] {
        [
            self.denormalize_dim(10, u[0]),
            self.denormalize_dim(11, u[1]),
            self.denormalize_dim(12, u[2]),
            self.denormalize_dim(13, u[3]),
        ]
    }
}

/// A motor-babbling trace: raw time-ordered rows plus the normalization
/// fitted over the whole trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BabbleTrace {
    pub rows: Vec<RawRow>,
    pub normalization: Normalization,
    pub cycle_steps: usize,
}

impl BabbleTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn normalized_rows(&self) -> Vec<[f64; RAW_DIMS]> {
        self.rows
            .iter()
            .map(|r| self.normalization.normalize_row(r))
            .collect()
    }
}

/// Sinusoidal motor babbling: per cycle, per-joint amplitudes are drawn
/// uniformly from (-ū, ū) and the command follows one full sine period, so
/// every cycle starts and ends at zero velocity.
pub fn babble(config: &ArmConfig, cycles: usize, seed: u64) -> Result<BabbleTrace> {
    if cycles < 1 {
        return Err(Error::Input("babble requires at least one cycle".into()));
    }
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = ArmState::home(config);
    let mut rows = Vec::with_capacity(cycles * config.cycle_steps);
    let cap = config.babble_amp_max;
    for _ in 0..cycles {
        let amps: [f64; 4] = std::array::from_fn(|_| {
            if cap == 0.0 {
                0.0
            } else {
                rng.random_range(-cap..cap)
            }
        });
        for k in 0..config.cycle_steps {
            let phase =
                2.0 * std::f64::consts::PI * k as f64 / (config.cycle_steps - 1) as f64;
            let u: [f64; 4] = std::array::from_fn(|j| amps[j] * phase.sin());
            state = step(&state, u, config);
            rows.push(RawRow {
                q: state.q,
                v: state.v,
                p: state.p,
                s: state.s,
                u,
            });
        }
    }
    let normalization = Normalization::fit(&rows);
    Ok(BabbleTrace {
        rows,
        normalization,
        cycle_steps: config.cycle_steps,
    })
}

/// Babble and truncate to exactly `rows` rows.
pub fn babble_rows(config: &ArmConfig, rows: usize, seed: u64) -> Result<BabbleTrace> {
    if rows == 0 {
        return Err(Error::Input("babble requires at least one row".into()));
    }
    let cycles = rows.div_ceil(config.cycle_steps);
    let mut trace = babble(config, cycles, seed)?;
    trace.rows.truncate(rows);
    trace.normalization = Normalization::fit(&trace.rows);
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_arm_fk() {
        let mut config = ArmConfig::default();
        config.link_lengths = [1.0, 1.0, 1.0, 1.0];
        let e = forward_kinematics([0.0; 4], &config);
        assert!((e[0] - 4.0).abs() < 1e-12 && e[1].abs() < 1e-12);
        let e = forward_kinematics([std::f64::consts::FRAC_PI_2, 0.0, 0.0, 0.0], &config);
        assert!(e[0].abs() < 1e-12 && (e[1] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn fk_matches_complex_rotation_oracle() {
        use rand::{Rng, SeedableRng};
        let config = ArmConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..50 {
            let q: [f64; 4] = std::array::from_fn(|_| rng.random_range(-3.0..3.0));
            let e = forward_kinematics(q, &config);
            // oracle: accumulate links as complex numbers z *= e^{iq}
            let (mut re, mut im) = (0.0f64, 0.0f64);
            let (mut zr, mut zi) = (1.0f64, 0.0f64);
            for (qi, li) in q.iter().zip(&config.link_lengths) {
                let (s, c) = qi.sin_cos();
                let nr = zr * c - zi * s;
                let ni = zr * s + zi * c;
                zr = nr;
                zi = ni;
                re += li * zr;
                im += li * zi;
            }
            assert!((e[0] - re).abs() < 1e-12 && (e[1] - im).abs() < 1e-12);
        }
    }

    #[test]
    fn step_zero_velocity_is_identity() {
        let config = ArmConfig::default();
        let s0 = ArmState::home(&config);
        let s1 = step(&s0, [0.0; 4], &config);
        assert_eq!(s0, s1);
    }

    #[test]
    fn step_saturates_at_limits() {
        let config = ArmConfig::default();
        let q_up: [f64; 4] = std::array::from_fn(|i| config.joint_limits[i].1);
        let s0 = ArmState::from_joints(q_up, &config);
        let s1 = step(&s0, [1.0; 4], &config);
        assert_eq!(s1.q, q_up);
    }

    #[test]
    fn step_matches_independent_integrator() {
        use rand::{Rng, SeedableRng};
        let config = ArmConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut state = ArmState::home(&config);
        let mut q_oracle = state.q;
        for _ in 0..100 {
            let u: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            state = step(&state, u, &config);
            for i in 0..4 {
                let (lo, hi) = config.joint_limits[i];
                q_oracle[i] = (q_oracle[i] + u[i] * config.dt).clamp(lo, hi);
            }
        }
        assert_eq!(state.q, q_oracle);
    }

    #[test]
    fn fk_exact_on_every_trace_row_and_camera_consistency() {
        let config = ArmConfig::default();
        let trace = babble(&config, 5, 3).unwrap();
        let mut prev = ArmState::home(&config);
        for row in &trace.rows {
            prev = step(&prev, row.u, &config);
            let e = forward_kinematics(row.q, &config);
            // v is affine in e; unprojecting the stored left image recovers e
            let back = config.camera_left.unproject([row.v[0], row.v[1]]);
            assert!((back[0] - e[0]).abs() < 1e-9 && (back[1] - e[1]).abs() < 1e-9);
            assert_eq!(prev.q, row.q);
        }
    }

    #[test]
    fn touch_and_sound_cases() {
        let config = ArmConfig::default();
        let above = [0.5, config.key_plane_height + 0.1];
        assert_eq!(sense_touch_sound(above, &config), (0.0, 0.0));
        let leftmost = [config.keyboard_x.0, config.key_plane_height];
        let (p, s) = sense_touch_sound(leftmost, &config);
        assert_eq!(p, 1.0);
        assert!((s - 1.0 / config.num_keys as f64).abs() < 1e-12);
    }

    #[test]
    fn sound_is_monotone_step_function_of_x() {
        let config = ArmConfig::default();
        let (x0, x1) = config.keyboard_x;
        let mut prev = 0.0;
        let mut distinct = std::collections::BTreeSet::new();
        for k in 0..400 {
            let x = x0 + (x1 - x0) * k as f64 / 399.0;
            let (_, s) = sense_touch_sound([x, config.key_plane_height - 0.01], &config);
            assert!(s >= prev);
            prev = s;
            distinct.insert((s * 1e9) as i64);
        }
        assert_eq!(distinct.len(), config.num_keys);
    }

    #[test]
    fn babble_zero_amplitude_is_constant() {
        let mut config = ArmConfig::default();
        config.babble_amp_max = 0.0;
        let trace = babble(&config, 2, 1).unwrap();
        let home = ArmState::home(&config);
        for row in &trace.rows {
            assert_eq!(row.q, home.q);
            assert_eq!(row.u, [0.0; 4]);
        }
    }

    #[test]
    fn babble_cycles_start_and_end_at_zero_velocity() {
        let config = ArmConfig::default();
        let trace = babble(&config, 4, 99).unwrap();
        for c in 0..4 {
            let first = trace.rows[c * config.cycle_steps].u;
            let last = trace.rows[(c + 1) * config.cycle_steps - 1].u;
            for j in 0..4 {
                assert!(first[j].abs() < 1e-9);
                assert!(last[j].abs() < 1e-9);
            }
        }
    }

    #[test]
    fn babble_is_deterministic() {
        let config = ArmConfig::default();
        let a = babble(&config, 3, 7).unwrap();
        let b = babble(&config, 3, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn normalized_trace_in_range_and_no_flag_value() {
        let config = ArmConfig::default();
        let trace = babble(&config, 10, 21).unwrap();
        for row in trace.normalized_rows() {
            for v in row {
                assert!((-1.0..=1.0).contains(&v));
                assert!((v - (-2.0)).abs() > 0.5);
            }
        }
    }

    #[test]
    fn redundancy_witness_two_link_elbow_solutions() {
        // freeze joints 3 and 4: an effective 2-link arm with lengths
        // l1 = 0.5 and l2 = 0.9 has elbow-up and elbow-down solutions
        let config = ArmConfig::default();
        let l1 = config.link_lengths[0];
        let l2 = config.link_lengths[1] + config.link_lengths[2] + config.link_lengths[3];
        let target = [0.9, 0.6];
        let r2 = target[0] * target[0] + target[1] * target[1];
        let cos_q2 = (r2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
        assert!(cos_q2.abs() < 1.0, "target must be strictly reachable");
        let q2 = cos_q2.acos();
        let base = target[1].atan2(target[0]);
        let make = |elbow: f64| -> [f64; 4] {
            let q1 = base - (l2 * elbow.sin()).atan2(l1 + l2 * elbow.cos());
            [q1, elbow, 0.0, 0.0]
        };
        let qa = make(q2);
        let qb = make(-q2);
        assert!(qa != qb);
        let ea = forward_kinematics(qa, &config);
        let eb = forward_kinematics(qb, &config);
        let d = ((ea[0] - eb[0]).powi(2) + (ea[1] - eb[1]).powi(2)).sqrt();
        assert!(d < 1e-9, "redundant configs disagree by {}", d);
    }

    #[test]
    fn ik_oracle_fixed_point() {
        let config = ArmConfig::default();
        let state = ArmState::home(&config);
        let (u, sat) = ik_oracle_step(state.q, state.v, &config);
        assert!(!sat);
        let norm: f64 = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(norm < 1e-6);
    }

    #[test]
    fn ik_oracle_reduces_camera_distance() {
        let config = ArmConfig::default();
        let state = ArmState::home(&config);
        let target = [
            state.v[0] + 0.02,
            state.v[1] - 0.015,
            state.v[2],
            state.v[3],
        ];
        let dist = |s: &ArmState| {
            ((s.v[0] - target[0]).powi(2) + (s.v[1] - target[1]).powi(2)).sqrt()
        };
        let d0 = dist(&state);
        let (u, _) = ik_oracle_step(state.q, target, &config);
        let next = step(&state, u, &config);
        assert!(dist(&next) < d0);
    }

    #[test]
    fn ik_oracle_tracks_babble_vision_trajectory() {
        let config = ArmConfig::default();
        let trace = babble(&config, 4, 17).unwrap();
        let norm = &trace.normalization;
        let mut state = ArmState::home(&config);
        let mut se = 0.0;
        let mut n = 0usize;
        let steps = 200.min(trace.rows.len());
        for row in trace.rows.iter().take(steps) {
            let (u, _) = ik_oracle_step(state.q, row.v, &config);
            state = step(&state, u, &config);
            let got = norm.normalize_vision(state.v);
            let want = norm.normalize_vision(row.v);
            for k in 0..4 {
                se += (got[k] - want[k]).powi(2);
                n += 1;
            }
        }
        let mse_pct = 100.0 * se / n as f64;
        assert!(mse_pct < 0.5, "oracle tracking MSE% {}", mse_pct);
    }
}
