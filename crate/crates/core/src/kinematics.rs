//! Forward kinematics of a 6-DOF serial arm described by standard
//! Denavit-Hartenberg parameters, plus pose-distance arithmetic.
//!
//! Orientation is reported as roll-pitch-yaw angles under the intrinsic
//! X-Y-Z convention, `R = Rx(rx) * Ry(ry) * Rz(rz)`, every angle wrapped
//! into `(-pi, pi]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Number of joints of the arm.
pub const DOF: usize = 6;

/// The fixed start configuration every episode resets to.
pub fn initial_configuration<T: Scalar>() -> JointVector<T> {
    let h = T::FRAC_PI_2();
    JointVector::new([-h, -h, T::zero(), h, h, -h])
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle<T: Scalar>(angle: T) -> T {
    let two_pi = T::TAU();
    let mut wrapped = angle % two_pi;
    if wrapped <= -T::PI() {
        wrapped += two_pi;
    } else if wrapped > T::PI() {
        wrapped -= two_pi;
    }
    wrapped
}

/// Joint angles in radians, one per joint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointVector<T>(pub [T; DOF]);

impl<T: Scalar> JointVector<T> {
    pub fn new(angles: [T; DOF]) -> Self {
        Self(angles)
    }

    pub fn zeros() -> Self {
        Self([T::zero(); DOF])
    }

    pub fn angles(&self) -> &[T; DOF] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|a| a.is_finite())
    }

    /// Overwrites joint 4 from joints 2 and 3 with [`couple_joint4`].
    pub fn with_coupled_wrist(mut self) -> Self {
        self.0[3] = couple_joint4(self.0[1], self.0[2]);
        self
    }
}

/// End-effector pose: position in meters, roll-pitch-yaw in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose<T> {
    pub x: T,
    pub y: T,
    pub z: T,
    pub rx: T,
    pub ry: T,
    pub rz: T,
}

impl<T: Scalar> Pose<T> {
    /// Builds a pose, wrapping the Euler components into `(-pi, pi]`.
    pub fn new(position: [T; 3], orientation: [T; 3]) -> Self {
        Self {
            x: position[0],
            y: position[1],
            z: position[2],
            rx: wrap_angle(orientation[0]),
            ry: wrap_angle(orientation[1]),
            rz: wrap_angle(orientation[2]),
        }
    }

    pub fn from_array(v: [T; 6]) -> Self {
        Self::new([v[0], v[1], v[2]], [v[3], v[4], v[5]])
    }

    pub fn to_array(&self) -> [T; 6] {
        [self.x, self.y, self.z, self.rx, self.ry, self.rz]
    }

    pub fn position(&self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    pub fn orientation(&self) -> [T; 3] {
        [self.rx, self.ry, self.rz]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// One row of a standard DH table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DhRow<T> {
    /// Link length (m).
    pub a: T,
    /// Link offset (m).
    pub d: T,
    /// Link twist (rad).
    pub alpha: T,
    /// Joint-angle offset (rad).
    pub theta0: T,
}

/// Six-row DH description of the arm, serialized as six `[a, d, alpha, theta0]` rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DhChain<T> {
    rows: [DhRow<T>; DOF],
}

impl<T: Scalar> DhChain<T> {
    pub fn new(rows: [DhRow<T>; DOF]) -> Result<Self> {
        let finite = rows
            .iter()
            .all(|r| r.a.is_finite() && r.d.is_finite() && r.alpha.is_finite() && r.theta0.is_finite());
        if !finite {
            return Err(Error::InvalidConfig("DH chain entries must be finite".into()));
        }
        Ok(Self { rows })
    }

    /// Builds a chain from `(a, d, alpha, theta0)` rows; exactly six are required.
    pub fn from_rows(rows: &[[f64; 4]]) -> Result<Self> {
        if rows.len() != DOF {
            return Err(Error::InvalidConfig(format!(
                "DH chain needs exactly {DOF} rows, got {}",
                rows.len()
            )));
        }
        let mut out = [DhRow { a: T::zero(), d: T::zero(), alpha: T::zero(), theta0: T::zero() }; DOF];
        for (dst, src) in out.iter_mut().zip(rows) {
            *dst = DhRow { a: T::of(src[0]), d: T::of(src[1]), alpha: T::of(src[2]), theta0: T::of(src[3]) };
        }
        Self::new(out)
    }

    /// Manufacturer-published UR5e table.
    pub fn ur5e() -> Self {
        Self::from_rows(&UR5E_DH).expect("UR5e table is finite")
    }

    pub fn rows(&self) -> &[DhRow<T>; DOF] {
        &self.rows
    }

    pub fn to_rows(&self) -> Vec<[f64; 4]> {
        self.rows
            .iter()
            .map(|r| [r.a.to_f64_lossy(), r.d.to_f64_lossy(), r.alpha.to_f64_lossy(), r.theta0.to_f64_lossy()])
            .collect()
    }
}

/// UR5e standard DH parameters as `(a, d, alpha, theta0)`.
pub const UR5E_DH: [[f64; 4]; DOF] = [
    [0.0, 0.1625, std::f64::consts::FRAC_PI_2, 0.0],
    [-0.425, 0.0, 0.0, 0.0],
    [-0.3922, 0.0, 0.0, 0.0],
    [0.0, 0.1333, std::f64::consts::FRAC_PI_2, 0.0],
    [0.0, 0.0997, -std::f64::consts::FRAC_PI_2, 0.0],
    [0.0, 0.0996, 0.0, 0.0],
];

/// Closed per-joint intervals `[lo, hi]`. A collapsed interval freezes the joint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointLimits<T> {
    lo: [T; DOF],
    hi: [T; DOF],
}

impl<T: Scalar> JointLimits<T> {
    pub fn new(lo: [T; DOF], hi: [T; DOF]) -> Result<Self> {
        for i in 0..DOF {
            if !(lo[i].is_finite() && hi[i].is_finite()) || lo[i] > hi[i] {
                return Err(Error::InvalidConfig(format!(
                    "joint {} limits [{}, {}] are not a finite interval",
                    i + 1,
                    lo[i],
                    hi[i]
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn from_pairs(pairs: &[[f64; 2]]) -> Result<Self> {
        if pairs.len() != DOF {
            return Err(Error::InvalidConfig(format!(
                "joint limits need exactly {DOF} intervals, got {}",
                pairs.len()
            )));
        }
        let mut lo = [T::zero(); DOF];
        let mut hi = [T::zero(); DOF];
        for (i, p) in pairs.iter().enumerate() {
            lo[i] = T::of(p[0]);
            hi[i] = T::of(p[1]);
        }
        Self::new(lo, hi)
    }

    /// `[-pi, pi]` on every joint.
    pub fn full() -> Self {
        Self { lo: [-T::PI(); DOF], hi: [T::PI(); DOF] }
    }

    pub fn lo(&self) -> &[T; DOF] {
        &self.lo
    }

    pub fn hi(&self) -> &[T; DOF] {
        &self.hi
    }

    pub fn to_pairs(&self) -> Vec<[f64; 2]> {
        (0..DOF).map(|i| [self.lo[i].to_f64_lossy(), self.hi[i].to_f64_lossy()]).collect()
    }

    pub fn contains(&self, joints: &JointVector<T>) -> bool {
        joints.0.iter().enumerate().all(|(i, &q)| q >= self.lo[i] && q <= self.hi[i])
    }

    pub fn clamp_joint(&self, index: usize, value: T) -> T {
        value.max(self.lo[index]).min(self.hi[index])
    }

    pub fn clamp(&self, joints: &JointVector<T>) -> JointVector<T> {
        let mut out = *joints;
        for (i, q) in out.0.iter_mut().enumerate() {
            *q = self.clamp_joint(i, *q);
        }
        out
    }
}

/// Joint 4 value that keeps the wrist link vertical, from joints 2 and 3.
///
/// The first branch applies on the boundary `|pi/2 + j2| + j3 == pi`.
pub fn couple_joint4<T: Scalar>(j2: T, j3: T) -> T {
    if (T::FRAC_PI_2() + j2).abs() + j3 >= T::PI() {
        -T::PI() - j2
    } else {
        -j3 - j2
    }
}

type Mat3<T> = [[T; 3]; 3];

fn mat_mul<T: Scalar>(a: &Mat3<T>, b: &Mat3<T>) -> Mat3<T> {
    let mut out = [[T::zero(); 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

/// Converts a rotation matrix to intrinsic X-Y-Z angles `(rx, ry, rz)`.
///
/// At gimbal lock (`|ry| = pi/2`) `rz` is pinned to zero and the whole
/// residual rotation is folded into `rx`.
pub fn rotation_to_rpy<T: Scalar>(r: &[[T; 3]; 3]) -> [T; 3] {
    let cos_ry = r[0][0].hypot(r[0][1]);
    let ry = r[0][2].atan2(cos_ry);
    let degenerate = cos_ry <= T::epsilon() * T::of(16.0);
    let (rx, rz) = if degenerate {
        (r[2][1].atan2(r[1][1]), T::zero())
    } else {
        ((-r[1][2]).atan2(r[2][2]), (-r[0][1]).atan2(r[0][0]))
    };
    [wrap_angle(rx), wrap_angle(ry), wrap_angle(rz)]
}

/// Rotation matrix `Rx(rx) * Ry(ry) * Rz(rz)`.
pub fn rpy_to_rotation<T: Scalar>(rpy: [T; 3]) -> [[T; 3]; 3] {
    let (sa, ca) = rpy[0].sin_cos();
    let (sb, cb) = rpy[1].sin_cos();
    let (sc, cc) = rpy[2].sin_cos();
    let o = T::zero();
    let l = T::one();
    let rx = [[l, o, o], [o, ca, -sa], [o, sa, ca]];
    let ry = [[cb, o, sb], [o, l, o], [-sb, o, cb]];
    let rz = [[cc, -sc, o], [sc, cc, o], [o, o, l]];
    mat_mul(&mat_mul(&rx, &ry), &rz)
}

/// End-effector pose of `joints` on `chain`.
pub fn forward_kinematics<T: Scalar>(joints: &JointVector<T>, chain: &DhChain<T>) -> Result<Pose<T>> {
    if !joints.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite joint angles {:?}", joints.0)));
    }
    let o = T::zero();
    let mut rot: Mat3<T> = [[T::one(), o, o], [o, T::one(), o], [o, o, T::one()]];
    let mut pos = [o; 3];
    for (q, row) in joints.0.iter().zip(chain.rows.iter()) {
        let (st, ct) = (*q + row.theta0).sin_cos();
        let (sa, ca) = row.alpha.sin_cos();
        let link_rot = [[ct, -st * ca, st * sa], [st, ct * ca, -ct * sa], [o, sa, ca]];
        let link_pos = [row.a * ct, row.a * st, row.d];
        for i in 0..3 {
            pos[i] += rot[i][0] * link_pos[0] + rot[i][1] * link_pos[1] + rot[i][2] * link_pos[2];
        }
        rot = mat_mul(&rot, &link_rot);
    }
    Ok(Pose::new(pos, rotation_to_rpy(&rot)))
}

/// Weights of the position and orientation terms; non-negative and summing to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceWeights<T> {
    position: T,
    orientation: T,
}

impl<T: Scalar> DistanceWeights<T> {
    pub fn new(position: T, orientation: T) -> Result<Self> {
        let tol = T::epsilon() * T::of(64.0);
        let valid = position >= T::zero()
            && orientation >= T::zero()
            && (position + orientation - T::one()).abs() <= tol;
        if !valid {
            return Err(Error::InvalidConfig(format!(
                "distance weights ({position}, {orientation}) must be non-negative and sum to 1"
            )));
        }
        Ok(Self { position, orientation })
    }

    pub fn position(&self) -> T {
        self.position
    }

    pub fn orientation(&self) -> T {
        self.orientation
    }
}

impl<T: Scalar> Default for DistanceWeights<T> {
    fn default() -> Self {
        Self { position: T::of(0.5), orientation: T::of(0.5) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseDistance<T> {
    /// Euclidean position error (m).
    pub position: T,
    /// Euclidean norm of the wrapped Euler differences (rad).
    pub orientation: T,
    pub weighted: T,
}

pub fn pose_distance<T: Scalar>(a: &Pose<T>, b: &Pose<T>, weights: &DistanceWeights<T>) -> PoseDistance<T> {
    let norm = |v: [T; 3]| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let position = norm([a.x - b.x, a.y - b.y, a.z - b.z]);
    let orientation = norm([
        wrap_angle(a.rx - b.rx),
        wrap_angle(a.ry - b.ry),
        wrap_angle(a.rz - b.rz),
    ]);
    PoseDistance {
        position,
        orientation,
        weighted: weights.position * position + weights.orientation * orientation,
    }
}

/// Same as [`pose_distance`] but validates raw weights first.
pub fn pose_distance_weighted<T: Scalar>(a: &Pose<T>, b: &Pose<T>, wp: T, wo: T) -> Result<PoseDistance<T>> {
    Ok(pose_distance(a, b, &DistanceWeights::new(wp, wo)?))
}
