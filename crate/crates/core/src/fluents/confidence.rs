//! Logistic state-transition confidences and their compositions.

use serde::{Deserialize, Serialize};

/// Fraction of `delta` within which a measurement counts as sitting on the
/// saturating edge of a band.
pub const EDGE_TOLERANCE: f64 = 1e-9;

/// Which side of the threshold saturates to confidence 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Confidence 1 below `tau - delta`.
    Lower,
    /// Confidence 1 above `tau + delta`.
    Upper,
}

/// Threshold between two adjacent states with its uncertainty half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionSpec {
    pub tau: f64,
    pub delta: f64,
    pub direction: Direction,
}

impl TransitionSpec {
    pub const fn lower(tau: f64, delta: f64) -> Self {
        TransitionSpec {
            tau,
            delta,
            direction: Direction::Lower,
        }
    }

    pub const fn upper(tau: f64, delta: f64) -> Self {
        TransitionSpec {
            tau,
            delta,
            direction: Direction::Upper,
        }
    }

    /// Band `[tau - delta, tau + delta]`.
    pub fn band(&self) -> (f64, f64) {
        (self.tau - self.delta, self.tau + self.delta)
    }
}

/// Slope of the logistic inside a band of half-width `delta`.
fn slope(delta: f64, epsilon: f64) -> f64 {
    ((1.0 - epsilon) / epsilon).ln() / delta
}

/// Confidence that the measurement `x` is in the state on the saturating
/// side of `spec`.
///
/// Outside the band the value is exactly 0 or 1; inside it follows a
/// logistic through 0.5 at `tau` that reaches `epsilon` at the far edge.
/// The edge where confidence reaches 1 belongs to the saturated region; the
/// other edge keeps its logistic value `epsilon`. Both edges absorb measurements
/// within `EDGE_TOLERANCE * delta`.
pub fn transition_confidence(x: f64, spec: &TransitionSpec, epsilon: f64) -> f64 {
    let TransitionSpec {
        tau,
        delta,
        direction,
    } = *spec;
    let snap = EDGE_TOLERANCE * delta;
    let k = slope(delta, epsilon);
    match direction {
        Direction::Lower => {
            if x <= tau - delta + snap {
                1.0
            } else if x > tau + delta + snap {
                0.0
            } else if x >= tau + delta - snap {
                epsilon
            } else {
                1.0 / (1.0 + (k * (x - tau)).exp())
            }
        }
        Direction::Upper => {
            if x >= tau + delta - snap {
                1.0
            } else if x < tau - delta - snap {
                0.0
            } else if x <= tau - delta + snap {
                epsilon
            } else {
                1.0 / (1.0 + (-k * (x - tau)).exp())
            }
        }
    }
}

/// Middle-state confidence of a three-state fluent.
pub fn middle_confidence(c0: f64, c2: f64) -> f64 {
    (1.0 - c0) * (1.0 - c2)
}

/// Sign of a per-frame change that a locally temporal state looks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Motion {
    Increasing,
    Decreasing,
}

/// Threshold magnitude and half-width for per-frame changes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionThreshold {
    pub tau: f64,
    pub delta: f64,
}

impl MotionThreshold {
    pub fn spec(&self, toward: Motion) -> TransitionSpec {
        match toward {
            Motion::Increasing => TransitionSpec::upper(self.tau.abs(), self.delta),
            Motion::Decreasing => TransitionSpec::lower(-self.tau.abs(), self.delta),
        }
    }
}

/// Confidence that a single per-frame change `d` moves in `toward`.
pub fn step_motion_confidence(
    d: f64,
    toward: Motion,
    threshold: &MotionThreshold,
    epsilon: f64,
) -> f64 {
    transition_confidence(d, &threshold.spec(toward), epsilon)
}

/// Recency-weighted product of step confidences over a window of
/// measurements `history[0..=r]` (oldest first). The newest difference has
/// exponent 1, the oldest `1/r`.
pub fn motion_confidence(
    history: &[f64],
    toward: Motion,
    threshold: &MotionThreshold,
    epsilon: f64,
) -> f64 {
    let r = history.len().saturating_sub(1);
    history
        .windows(2)
        .enumerate()
        .map(|(k, pair)| {
            let age = (r - k) as f64;
            step_motion_confidence(pair[1] - pair[0], toward, threshold, epsilon).powf(1.0 / age)
        })
        .product()
}

/// `(toward low, toward high, no motion)` for a window of measurements.
pub fn temporal_confidences(
    history: &[f64],
    threshold: &MotionThreshold,
    epsilon: f64,
) -> (f64, f64, f64) {
    let down = motion_confidence(history, Motion::Decreasing, threshold, epsilon);
    let up = motion_confidence(history, Motion::Increasing, threshold, epsilon);
    (down, up, middle_confidence(down, up))
}

/// Evenly spaced `(x, confidence)` samples of a transition curve.
pub fn curve_samples(
    spec: &TransitionSpec,
    epsilon: f64,
    lo: f64,
    hi: f64,
    count: usize,
) -> Vec<(f64, f64)> {
    let n = count.max(2);
    (0..n)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            (x, transition_confidence(x, spec, epsilon))
        })
        .collect()
}
