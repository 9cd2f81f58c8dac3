//! Qualitative motion primitives: sparse regression of an angle series'
//! derivative onto a six-function time basis, swept over candidate periods.

pub mod add;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fluents::FluentStream;

pub use add::{evaluate_add, AddEntry, AddError, AddOutcome, ActionDatabase, Condition, Op, Quantity};

pub const BASIS_SIZE: usize = 6;

#[derive(Debug, Error, PartialEq)]
pub enum QmpError {
    #[error("need at least 3 samples, got {0}")]
    TooFewSamples(usize),
    #[error("sample spacing must be positive and finite")]
    InvalidSpacing,
    #[error("invalid regression config: {0}")]
    Config(String),
    #[error("derivative and basis lengths differ ({0} vs {1})")]
    Shape(usize, usize),
}

/// Uniformly sampled measurement series of one fluent channel.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleSeries {
    pub fluent_id: String,
    /// Seconds between samples.
    pub dt: f64,
    pub theta: Vec<f64>,
    /// `[start, end)` frame range.
    pub window: (usize, usize),
}

impl AngleSeries {
    pub fn new(fluent_id: impl Into<String>, dt: f64, theta: Vec<f64>) -> Self {
        let n = theta.len();
        AngleSeries {
            fluent_id: fluent_id.into(),
            dt,
            theta,
            window: (0, n),
        }
    }

    /// Sample times measured from the window start.
    pub fn times(&self) -> Vec<f64> {
        (0..self.theta.len()).map(|k| k as f64 * self.dt).collect()
    }
}

/// Second-order finite differences: central inside, one-sided at the ends.
pub fn estimate_derivative(theta: &[f64], dt: f64) -> Result<Vec<f64>, QmpError> {
    let n = theta.len();
    if n < 3 {
        return Err(QmpError::TooFewSamples(n));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(QmpError::InvalidSpacing);
    }
    let mut d = vec![0.0; n];
    d[0] = (-3.0 * theta[0] + 4.0 * theta[1] - theta[2]) / (2.0 * dt);
    for k in 1..n - 1 {
        d[k] = (theta[k + 1] - theta[k - 1]) / (2.0 * dt);
    }
    d[n - 1] = (3.0 * theta[n - 1] - 4.0 * theta[n - 2] + theta[n - 3]) / (2.0 * dt);
    Ok(d)
}

/// `[1, t, cos(2 pi t/T), sin(2 pi t/T), cos(pi t/T), sin(pi t/T)]`.
pub fn basis_row(t: f64, period: f64) -> [f64; BASIS_SIZE] {
    let w = 2.0 * PI * t / period;
    let h = PI * t / period;
    [1.0, t, w.cos(), w.sin(), h.cos(), h.sin()]
}

pub fn basis_matrix(t: &[f64], period: f64) -> DMatrix<f64> {
    DMatrix::from_fn(t.len(), BASIS_SIZE, |i, j| basis_row(t[i], period)[j])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegressionConfig {
    /// Penalty per nonzero coefficient when choosing the period.
    pub alpha: f64,
    /// Coefficients below this magnitude are zeroed.
    pub stls_threshold: f64,
    pub stls_iterations: usize,
    /// Candidate periods in seconds.
    pub period_grid: Vec<f64>,
}

/// `count` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp())
        .collect()
}

impl Default for RegressionConfig {
    fn default() -> Self {
        RegressionConfig {
            alpha: 0.01,
            stls_threshold: 0.05,
            stls_iterations: 10,
            period_grid: log_grid(0.25, 8.0, 24),
        }
    }
}

impl RegressionConfig {
    pub fn validate(&self) -> Result<(), QmpError> {
        if !(self.alpha >= 0.0) {
            return Err(QmpError::Config("alpha must be non-negative".into()));
        }
        if !(self.stls_threshold > 0.0) {
            return Err(QmpError::Config("stls_threshold must be positive".into()));
        }
        if self.stls_iterations == 0 {
            return Err(QmpError::Config("stls_iterations must be at least 1".into()));
        }
        if self.period_grid.is_empty() || self.period_grid.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(QmpError::Config("period_grid must be non-empty and positive".into()));
        }
        Ok(())
    }
}

fn least_squares(phi: &DMatrix<f64>, y: &DVector<f64>, active: &[usize]) -> Vec<f64> {
    let sub = phi.select_columns(active);
    let svd = sub.svd(true, true);
    let eps = f64::EPSILON * (phi.nrows().max(active.len()) as f64) * svd.singular_values.max();
    let sol = svd.solve(y, eps.max(1e-300)).expect("both factors were computed");
    sol.iter().copied().collect()
}

/// Sequentially thresholded least squares.
pub fn stls_fit(dtheta: &[f64], phi: &DMatrix<f64>, config: &RegressionConfig) -> Result<[f64; BASIS_SIZE], QmpError> {
    if phi.nrows() != dtheta.len() {
        return Err(QmpError::Shape(dtheta.len(), phi.nrows()));
    }
    let y = DVector::from_column_slice(dtheta);
    let mut active: Vec<usize> = (0..phi.ncols()).collect();
    let mut coef = [0.0; BASIS_SIZE];
    for _ in 0..config.stls_iterations {
        if active.is_empty() {
            break;
        }
        let sol = least_squares(phi, &y, &active);
        coef = [0.0; BASIS_SIZE];
        for (&j, &c) in active.iter().zip(&sol) {
            coef[j] = c;
        }
        let keep: Vec<usize> = active
            .iter()
            .copied()
            .filter(|&j| coef[j].abs() >= config.stls_threshold)
            .collect();
        if keep.len() == active.len() {
            break;
        }
        active = keep;
    }
    for c in coef.iter_mut() {
        if c.abs() < config.stls_threshold {
            *c = 0.0;
        }
    }
    Ok(coef)
}

/// Fitted primitive for one series and window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QmpModel {
    pub fluent_id: String,
    pub window: (usize, usize),
    pub lambda: [f64; BASIS_SIZE],
    pub period: f64,
    /// RMS of the derivative residual.
    pub residual: f64,
    pub sparsity: usize,
}

impl QmpModel {
    /// Amplitude of the whole-period terms.
    pub fn osc_amplitude(&self) -> f64 {
        self.lambda[2].hypot(self.lambda[3])
    }

    pub fn half_osc_amplitude(&self) -> f64 {
        self.lambda[4].hypot(self.lambda[5])
    }

    pub fn combined_osc_amplitude(&self) -> f64 {
        self.osc_amplitude().hypot(self.half_osc_amplitude())
    }

    /// Derivative predicted at time `t` from the window start.
    pub fn predict(&self, t: f64) -> f64 {
        basis_row(t, self.period).iter().zip(&self.lambda).map(|(a, b)| a * b).sum()
    }
}

/// Output record of the `qmp` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QmpRecord {
    pub fluent: String,
    pub window: [usize; 2],
    #[serde(rename = "T")]
    pub period: f64,
    pub lambda: [f64; BASIS_SIZE],
    pub residual: f64,
}

impl From<&QmpModel> for QmpRecord {
    fn from(m: &QmpModel) -> Self {
        QmpRecord {
            fluent: m.fluent_id.clone(),
            window: [m.window.0, m.window.1],
            period: m.period,
            lambda: m.lambda,
            residual: m.residual,
        }
    }
}

fn rms_residual(dtheta: &[f64], phi: &DMatrix<f64>, coef: &[f64; BASIS_SIZE]) -> f64 {
    let sum: f64 = dtheta
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let pred: f64 = (0..BASIS_SIZE).map(|j| phi[(i, j)] * coef[j]).sum();
            (d - pred).powi(2)
        })
        .sum();
    (sum / dtheta.len() as f64).sqrt()
}

/// Period sweep on a known derivative sampled at `t`.
pub fn characterize_derivative(
    fluent_id: &str,
    window: (usize, usize),
    t: &[f64],
    dtheta: &[f64],
    config: &RegressionConfig,
) -> Result<QmpModel, QmpError> {
    config.validate()?;
    if t.len() != dtheta.len() {
        return Err(QmpError::Shape(dtheta.len(), t.len()));
    }
    let mut grid = config.period_grid.clone();
    grid.sort_by(f64::total_cmp);
    let mut best: Option<(f64, QmpModel)> = None;
    for &period in &grid {
        let phi = basis_matrix(t, period);
        let lambda = stls_fit(dtheta, &phi, config)?;
        let residual = rms_residual(dtheta, &phi, &lambda);
        let sparsity = lambda.iter().filter(|c| **c != 0.0).count();
        let score = residual + config.alpha * sparsity as f64;
        // near-equal scores keep the smaller period
        if best.as_ref().is_none_or(|(s, _)| score < *s - 1e-12 * (1.0 + s.abs())) {
            best = Some((
                score,
                QmpModel {
                    fluent_id: fluent_id.to_string(),
                    window,
                    lambda,
                    period,
                    residual,
                    sparsity,
                },
            ));
        }
    }
    Ok(best.expect("grid is non-empty").1)
}

/// Estimates the derivative and fits the best-scoring primitive.
pub fn characterize(series: &AngleSeries, config: &RegressionConfig) -> Result<QmpModel, QmpError> {
    let d = estimate_derivative(&series.theta, series.dt)?;
    characterize_derivative(&series.fluent_id, series.window, &series.times(), &d, config)
}

/// `[start, end)` frame ranges of sliding windows. A sequence shorter than
/// one window but at least one second long yields a single window.
pub fn window_ranges(frames: usize, frame_rate: f64, window_s: f64, hop_s: f64) -> Vec<(usize, usize)> {
    let len = ((window_s * frame_rate).round() as usize).max(3);
    let hop = ((hop_s * frame_rate).round() as usize).max(1);
    if frames < len {
        let min = (frame_rate.round() as usize).max(3);
        return if frames >= min { vec![(0, frames)] } else { vec![] };
    }
    (0..=frames - len).step_by(hop).map(|s| (s, s + len)).collect()
}

/// Models of every gap-free series in one window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowModels {
    pub window: (usize, usize),
    pub models: BTreeMap<String, QmpModel>,
}

/// Characterizes each selected series over sliding windows. Series with an
/// indeterminate sample inside a window are skipped for that window.
pub fn characterize_stream(
    stream: &FluentStream,
    config: &RegressionConfig,
    window_s: f64,
    hop_s: f64,
    only: Option<&std::collections::BTreeSet<String>>,
) -> Result<Vec<WindowModels>, QmpError> {
    let n = stream.reports.len();
    let dt = 1.0 / stream.frame_rate;
    let mut out = Vec::new();
    for (start, end) in window_ranges(n, stream.frame_rate, window_s, hop_s) {
        let mut models = BTreeMap::new();
        for id in stream.series.keys() {
            if only.is_some_and(|set| !set.contains(id)) {
                continue;
            }
            let Some(theta) = stream.window(id, start, end) else {
                continue;
            };
            let series = AngleSeries {
                fluent_id: id.clone(),
                dt,
                theta,
                window: (start, end),
            };
            models.insert(id.clone(), characterize(&series, config)?);
        }
        out.push(WindowModels {
            window: (start, end),
            models,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(dt: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| k as f64 * dt).collect()
    }

    #[test]
    fn derivative_examples() {
        let t = grid(0.1, 20);
        let lin: Vec<f64> = t.iter().map(|t| 3.0 * t).collect();
        for d in estimate_derivative(&lin, 0.1).unwrap() {
            assert!((d - 3.0).abs() < 1e-12);
        }
        for d in estimate_derivative(&[2.0; 5], 0.1).unwrap() {
            assert_eq!(d, 0.0);
        }
        let dt = 1.0 / 30.0;
        let t = grid(dt, 90);
        let s: Vec<f64> = t.iter().map(|t| (2.0 * PI * t).sin()).collect();
        let d = estimate_derivative(&s, dt).unwrap();
        // Taylor remainders: w^3 h^2 / 6 central, w^3 h^2 / 3 one-sided
        let w = 2.0 * PI;
        let central = w.powi(3) * dt * dt / 6.0;
        for (k, (t, d)) in t.iter().zip(&d).enumerate() {
            let err = (d - w * (w * t).cos()).abs();
            let bound = if k == 0 || k == 89 { 2.0 * central } else { central };
            assert!(err <= bound * 1.001, "k={k} err={err} bound={bound}");
        }
        assert_eq!(estimate_derivative(&[1.0, 2.0], 0.1), Err(QmpError::TooFewSamples(2)));
    }

    #[test]
    fn basis_rows() {
        let t = 2.0;
        let r = basis_row(0.0, t);
        assert_eq!(r, [1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let r = basis_row(t / 2.0, t);
        let want = [1.0, 1.0, -1.0, 0.0, 0.0, 1.0];
        for (a, b) in r.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        let r = basis_row(t, t);
        let want = [1.0, 2.0, 1.0, 0.0, -1.0, 0.0];
        for (a, b) in r.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn stls_examples() {
        let cfg = RegressionConfig {
            stls_threshold: 0.1,
            ..Default::default()
        };
        let t = grid(1.0 / 30.0, 90);
        let phi = basis_matrix(&t, 2.0);
        let fit = stls_fit(&[3.0; 90], &phi, &cfg).unwrap();
        assert!((fit[0] - 3.0).abs() < 1e-9);
        assert!(fit[1..].iter().all(|c| *c == 0.0));
        assert_eq!(stls_fit(&[0.0; 90], &phi, &cfg).unwrap(), [0.0; 6]);

        let t0 = 1.5;
        let d: Vec<f64> = t.iter().map(|t| 2.0 * PI / t0 * (2.0 * PI * t / t0).cos()).collect();
        let fit = stls_fit(&d, &basis_matrix(&t, t0), &cfg).unwrap();
        assert!((fit[2] - 2.0 * PI / t0).abs() < 1e-9);
        assert_eq!(fit.iter().filter(|c| **c != 0.0).count(), 1);
    }

    #[test]
    fn characterize_examples() {
        let cfg = RegressionConfig {
            // no half of 2.0 in the grid: cos(pi t) is also the half-period term of T = 1
            period_grid: vec![0.5, 1.3, 2.0, 3.1],
            ..Default::default()
        };
        let dt = 1.0 / 30.0;
        let theta: Vec<f64> = grid(dt, 180).iter().map(|t| 1.0 + 0.5 * (PI * t).sin()).collect();
        let m = characterize(&AngleSeries::new("s", dt, theta), &cfg).unwrap();
        assert_eq!(m.period, 2.0);
        assert_eq!(m.sparsity, 1);
        assert!(m.residual < 0.05);

        let ramp: Vec<f64> = grid(dt, 90).iter().map(|t| 0.1 * t).collect();
        let m = characterize(&AngleSeries::new("r", dt, ramp), &cfg).unwrap();
        assert!((m.lambda[0] - 0.1).abs() < 1e-9);
        assert_eq!(m.sparsity, 1);
        assert_eq!(m.period, 0.5);

        // jitter too small for any coefficient to pass the threshold
        let noise: Vec<f64> = (0..90).map(|k| if k % 2 == 0 { 1e-4 } else { -1e-4 }).collect();
        let loud = RegressionConfig { alpha: 10.0, ..cfg };
        let m = characterize(&AngleSeries::new("n", dt, noise), &loud).unwrap();
        assert_eq!(m.lambda, [0.0; 6]);
    }

    #[test]
    fn window_ranges_slide() {
        assert_eq!(window_ranges(150, 30.0, 3.0, 1.0), vec![(0, 90), (30, 120), (60, 150)]);
        assert_eq!(window_ranges(45, 30.0, 3.0, 1.0), vec![(0, 45)]);
        assert!(window_ranges(10, 30.0, 3.0, 1.0).is_empty());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn thresholded_coefficients_are_zero(
            coefs in proptest::array::uniform6(-2.0..2.0f64),
            noise in proptest::collection::vec(-0.3..0.3f64, 60),
            eta in 0.01..0.5f64,
        ) {
            let t = grid(0.05, 60);
            let phi = basis_matrix(&t, 1.3);
            let d: Vec<f64> = (0..60)
                .map(|i| (0..6).map(|j| phi[(i, j)] * coefs[j]).sum::<f64>() + noise[i])
                .collect();
            let cfg = RegressionConfig { stls_threshold: eta, ..Default::default() };
            let fit = stls_fit(&d, &phi, &cfg).unwrap();
            for c in fit {
                prop_assert!(c == 0.0 || c.abs() >= eta);
            }
        }

        #[test]
        fn sparsity_is_monotone_in_alpha(
            amp in 0.1..1.0f64,
            slope in -0.5..0.5f64,
            noise in proptest::collection::vec(-0.2..0.2f64, 90),
        ) {
            let dt = 1.0 / 30.0;
            let theta: Vec<f64> = (0..90)
                .map(|k| {
                    let t = k as f64 * dt;
                    amp * (2.0 * PI * t / 1.7).sin() + slope * t + 0.02 * noise[k]
                })
                .collect();
            let series = AngleSeries::new("p", dt, theta);
            let mut last = usize::MAX;
            for alpha in [0.0, 0.001, 0.01, 0.05, 0.1, 0.5, 1.0, 5.0] {
                let cfg = RegressionConfig { alpha, ..Default::default() };
                let m = characterize(&series, &cfg).unwrap();
                prop_assert!(m.sparsity <= last);
                last = m.sparsity;
            }
        }
    }
}
