//! Precision-decay curriculum.
//!
//! The required reach precision shrinks from `e0` to `em` over `s` epochs
//! along a power curve with exponent `alpha`:
//!
//! ```text
//! eps(k) = em + ((s - k) / s)^alpha * (e0 - em)    for 0 <= k <= s
//! eps(k) = em                                      for k > s
//! ```
//!
//! `alpha < 1` keeps the early part of the curve flat, `alpha = 1` is linear
//! and `alpha > 1` front-loads the decay.

use serde::{Deserialize, Serialize};

use crate::environment::AugmentedGoal;
use crate::error::{Error, Result};
use crate::kinematics::Pose;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule<T>", into = "RawSchedule<T>", bound = "T: Scalar")]
pub struct DecaySchedule<T> {
    start: T,
    end: T,
    length: u64,
    slope: T,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule<T> {
    e0: T,
    em: T,
    s: u64,
    alpha: T,
}

impl<T: Scalar> TryFrom<RawSchedule<T>> for DecaySchedule<T> {
    type Error = Error;

    fn try_from(raw: RawSchedule<T>) -> Result<Self> {
        DecaySchedule::new(raw.e0, raw.em, raw.s, raw.alpha)
    }
}

impl<T: Scalar> From<DecaySchedule<T>> for RawSchedule<T> {
    fn from(s: DecaySchedule<T>) -> Self {
        RawSchedule { e0: s.start, em: s.end, s: s.length, alpha: s.slope }
    }
}

impl<T: Scalar> DecaySchedule<T> {
    /// `e0 > em > 0`, `s >= 1`, `alpha > 0`, all finite.
    pub fn new(e0: T, em: T, s: u64, alpha: T) -> Result<Self> {
        let finite = e0.is_finite() && em.is_finite() && alpha.is_finite();
        if !finite || !(e0 > em && em > T::zero()) || s == 0 || alpha <= T::zero() {
            return Err(Error::InvalidConfig(format!(
                "decay schedule needs e0 > em > 0, s >= 1, alpha > 0 (got e0={e0}, em={em}, s={s}, alpha={alpha})"
            )));
        }
        Ok(Self { start: e0, end: em, length: s, slope: alpha })
    }

    pub fn start(&self) -> T {
        self.start
    }

    pub fn end(&self) -> T {
        self.end
    }

    pub fn length(&self) -> u64 {
        self.length
    }

    pub fn slope(&self) -> T {
        self.slope
    }

    /// Required precision at epoch `k`.
    pub fn precision_at(&self, k: u64) -> T {
        if k == 0 {
            return self.start;
        }
        if k >= self.length {
            return self.end;
        }
        let remaining = T::of((self.length - k) as f64) / T::of(self.length as f64);
        self.end + remaining.powf(self.slope) * (self.start - self.end)
    }

    /// `(k, eps)` for `k = 0..=through`.
    pub fn curve(&self, through: u64) -> impl Iterator<Item = (u64, T)> + '_ {
        (0..=through).map(move |k| (k, self.precision_at(k)))
    }
}

/// Attaches the current precision to a target pose.
pub fn augment_goal<T: Scalar>(target: Pose<T>, epsilon: T) -> Result<AugmentedGoal<T>> {
    AugmentedGoal::new(target, epsilon)
}
