//! Streaming Taylor-polynomial predictive monitor.
//!
//! The monitor keeps a FIFO window of the latest `degree + 1` samples. Every
//! observation after warm-up refits the approximated Taylor polynomial at the
//! newest sample, predicts the next `horizon` states and evaluates the safety
//! specification on each of them.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numdiff::check_tau;
use crate::taylor::{check_degree, horner, taylor_coefficients, PredictionSet, Sample};

/// Relative tolerance on the spacing between consecutive observations.
pub const TIMESTAMP_TOLERANCE: f64 = 1e-6;

type LevelFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Real-valued safety level `φ(x)`; `φ(x) >= 0` is safe, `φ(x) < 0` is a violation.
#[derive(Clone)]
pub struct SafetySpec {
    name: String,
    min_dim: usize,
    level: Arc<LevelFn>,
}

impl SafetySpec {
    /// `min_dim` is the number of state components `level` reads.
    pub fn new(
        name: impl Into<String>,
        min_dim: usize,
        level: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            min_dim,
            level: Arc::new(level),
        }
    }

    /// Boolean property encoded as `φ = -1` when unsafe and `φ = 0` otherwise.
    pub fn boolean(
        name: impl Into<String>,
        min_dim: usize,
        unsafe_if: impl Fn(&[f64]) -> bool + Send + Sync + 'static,
    ) -> Self {
        Self::new(
            name,
            min_dim,
            move |x| if unsafe_if(x) { -1.0 } else { 0.0 },
        )
    }

    /// `φ(x) = offset + Σ weights[i]·x[i]`.
    pub fn affine(name: impl Into<String>, weights: Vec<f64>, offset: f64) -> Self {
        let min_dim = weights.len();
        Self::new(name, min_dim, move |x| {
            offset + weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn min_dim(&self) -> usize {
        self.min_dim
    }

    pub fn level(&self, x: &[f64]) -> f64 {
        (self.level)(x)
    }
}

impl fmt::Debug for SafetySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SafetySpec")
            .field("name", &self.name)
            .field("min_dim", &self.min_dim)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub struct MonitorConfig {
    pub tau: f64,
    pub degree: usize,
    pub horizon: usize,
    pub spec: SafetySpec,
}

impl MonitorConfig {
    pub fn new(tau: f64, degree: usize, horizon: usize, spec: SafetySpec) -> Self {
        Self {
            tau,
            degree,
            horizon,
            spec,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_tau(self.tau)?;
        check_degree(self.degree)?;
        if self.horizon == 0 {
            return Err(Error::config("horizon must be at least 1"));
        }
        Ok(())
    }
}

/// Predicted safety levels for the next `h` sampling instants.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorVerdict {
    pub at_time: f64,
    /// `φ(x̂_1) … φ(x̂_h)`.
    pub predicted_levels: Vec<f64>,
    pub min_level: f64,
    /// Smallest `m` in `1..=h` with `φ(x̂_m) < 0`.
    pub first_violation: Option<usize>,
    pub warning: bool,
}

impl MonitorVerdict {
    pub fn from_levels(at_time: f64, predicted_levels: Vec<f64>) -> Self {
        let mut v = Self {
            at_time,
            predicted_levels,
            min_level: f64::INFINITY,
            first_violation: None,
            warning: false,
        };
        v.refresh_statistics();
        v
    }

    fn empty(capacity: usize) -> Self {
        Self {
            at_time: f64::NAN,
            predicted_levels: Vec::with_capacity(capacity),
            min_level: f64::INFINITY,
            first_violation: None,
            warning: false,
        }
    }

    fn refresh_statistics(&mut self) {
        self.min_level = self
            .predicted_levels
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        self.first_violation = self
            .predicted_levels
            .iter()
            .position(|&l| l < 0.0)
            .map(|i| i + 1);
        self.warning = self.first_violation.is_some();
    }
}

/// Buffers sized once the state dimension is known.
#[derive(Debug)]
struct Buffers {
    dim: usize,
    /// Ring of `degree + 1` rows, each `dim` wide.
    ring: Vec<f64>,
    scratch: Vec<f64>,
    derivs: Vec<f64>,
    /// `dim × degree`, row-major.
    coeffs: Vec<f64>,
    /// `horizon × dim`, row-major.
    predicted: Vec<f64>,
}

/// Taylor-polynomial predictive monitor over one sample stream.
#[derive(Debug)]
pub struct Monitor {
    config: MonitorConfig,
    buffers: Option<Buffers>,
    /// Ring index of the oldest row.
    head: usize,
    len: usize,
    last_time: Option<f64>,
    verdict: MonitorVerdict,
    has_verdict: bool,
}

impl Monitor {
    pub fn new(config: MonitorConfig) -> Result<Self> {
        config.validate()?;
        let verdict = MonitorVerdict::empty(config.horizon);
        Ok(Self {
            config,
            buffers: None,
            head: 0,
            len: 0,
            last_time: None,
            verdict,
            has_verdict: false,
        })
    }

    pub fn config(&self) -> &MonitorConfig {
        &self.config
    }

    /// Number of buffered samples, at most `degree + 1`.
    pub fn window_len(&self) -> usize {
        self.len
    }

    pub fn is_warming_up(&self) -> bool {
        self.len < self.capacity()
    }

    fn capacity(&self) -> usize {
        self.config.degree + 1
    }

    /// Clears the window; the next observation starts a new warm-up.
    pub fn reset(&mut self) {
        self.head = 0;
        self.len = 0;
        self.last_time = None;
        self.has_verdict = false;
    }

    /// Ingests the state `x` sampled at time `t`.
    ///
    /// Returns `None` during warm-up (the first `degree` samples) and the
    /// verdict for the next `horizon` instants otherwise. An off-grid
    /// timestamp clears the window, keeps `x` as the first sample of a new
    /// warm-up and reports [`Error::Sampling`]. Non-finite or wrongly sized
    /// states are rejected without touching the window.
    pub fn observe(&mut self, x: &[f64], t: f64) -> Result<Option<&MonitorVerdict>> {
        if !t.is_finite() {
            return Err(Error::data(format!("non-finite timestamp {t}")));
        }
        if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
            return Err(Error::data(format!("non-finite state component {bad}")));
        }
        self.ensure_buffers(x.len())?;

        let tau = self.config.tau;
        let mut off_grid = None;
        if let Some(prev) = self.last_time {
            let expected = prev + tau;
            if (t - expected).abs() > TIMESTAMP_TOLERANCE * tau {
                off_grid = Some(expected);
                self.reset();
            }
        }

        self.push(x);
        self.last_time = Some(t);
        if let Some(expected) = off_grid {
            return Err(Error::Sampling { expected, got: t });
        }
        if self.len < self.capacity() {
            self.has_verdict = false;
            return Ok(None);
        }

        self.predict(t);
        self.has_verdict = true;
        Ok(Some(&self.verdict))
    }

    /// Feeds `samples` in order, calling `on_verdict(index, self)` after every
    /// observation that produced a verdict.
    pub fn replay<F>(&mut self, samples: &[Sample], mut on_verdict: F) -> Result<()>
    where
        F: FnMut(usize, &Monitor),
    {
        for (k, s) in samples.iter().enumerate() {
            if self.observe(&s.state, s.time)?.is_some() {
                on_verdict(k, self);
            }
        }
        Ok(())
    }

    /// The most recent verdict, if the last observation produced one.
    pub fn last_verdict(&self) -> Option<&MonitorVerdict> {
        self.has_verdict.then_some(&self.verdict)
    }

    /// Predicted state `x̂_m`, `m` in `1..=horizon`, behind the last verdict.
    pub fn predicted_state(&self, m: usize) -> Option<&[f64]> {
        if !self.has_verdict || m == 0 || m > self.config.horizon {
            return None;
        }
        let b = self.buffers.as_ref()?;
        Some(&b.predicted[(m - 1) * b.dim..m * b.dim])
    }

    /// Owned copy of the predictions behind the last verdict.
    pub fn prediction_set(&self) -> Option<PredictionSet> {
        if !self.has_verdict {
            return None;
        }
        let b = self.buffers.as_ref()?;
        Some(PredictionSet {
            base_time: self.verdict.at_time,
            tau: self.config.tau,
            states: b.predicted.chunks(b.dim).map(<[f64]>::to_vec).collect(),
        })
    }

    fn ensure_buffers(&mut self, dim: usize) -> Result<()> {
        match &self.buffers {
            Some(b) if b.dim == dim => Ok(()),
            Some(b) => Err(Error::data(format!(
                "state dimension {dim} does not match stream dimension {}",
                b.dim
            ))),
            None => {
                if dim == 0 {
                    return Err(Error::data("state dimension must be at least 1"));
                }
                if dim < self.config.spec.min_dim() {
                    return Err(Error::data(format!(
                        "safety spec '{}' needs {} state components, got {dim}",
                        self.config.spec.name(),
                        self.config.spec.min_dim()
                    )));
                }
                let l = self.config.degree;
                self.buffers = Some(Buffers {
                    dim,
                    ring: vec![0.0; (l + 1) * dim],
                    scratch: vec![0.0; l + 1],
                    derivs: vec![0.0; l],
                    coeffs: vec![0.0; dim * l],
                    predicted: vec![0.0; self.config.horizon * dim],
                });
                Ok(())
            }
        }
    }

    fn push(&mut self, x: &[f64]) {
        let cap = self.capacity();
        let b = self.buffers.as_mut().expect("buffers sized before push");
        let slot = if self.len < cap {
            let slot = (self.head + self.len) % cap;
            self.len += 1;
            slot
        } else {
            // Full: overwrite the oldest row and advance the head.
            let slot = self.head;
            self.head = (self.head + 1) % cap;
            slot
        };
        b.ring[slot * b.dim..(slot + 1) * b.dim].copy_from_slice(x);
    }

    fn predict(&mut self, t: f64) {
        let cap = self.capacity();
        let l = self.config.degree;
        let h = self.config.horizon;
        let tau = self.config.tau;
        let b = self.buffers.as_mut().expect("buffers sized before predict");
        let dim = b.dim;

        for d in 0..dim {
            for (k, slot) in b.scratch.iter_mut().enumerate() {
                let row = (self.head + k) % cap;
                *slot = b.ring[row * dim + d];
            }
            taylor_coefficients(
                &mut b.scratch,
                tau,
                &mut b.derivs,
                &mut b.coeffs[d * l..(d + 1) * l],
            );
        }

        let newest = (self.head + cap - 1) % cap;
        let base = &b.ring[newest * dim..(newest + 1) * dim];
        self.verdict.at_time = t;
        self.verdict.predicted_levels.clear();
        for m in 1..=h {
            let delta = m as f64 * tau;
            let row = &mut b.predicted[(m - 1) * dim..m * dim];
            for (d, out) in row.iter_mut().enumerate() {
                *out = horner(base[d], &b.coeffs[d * l..(d + 1) * l], delta);
            }
            self.verdict
                .predicted_levels
                .push(self.config.spec.level(row));
        }
        self.verdict.refresh_statistics();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taylor::{predict_horizon, Stencil};
    use approx::assert_relative_eq;

    fn line_spec() -> SafetySpec {
        SafetySpec::affine("one_minus_x", vec![-1.0], 1.0)
    }

    #[test]
    fn config_validation() {
        let spec = line_spec();
        assert!(Monitor::new(MonitorConfig::new(0.01, 2, 50, spec.clone())).is_ok());
        assert!(Monitor::new(MonitorConfig::new(0.01, 0, 50, spec.clone()))
            .unwrap_err()
            .is_config());
        assert!(Monitor::new(MonitorConfig::new(0.01, 2, 0, spec.clone()))
            .unwrap_err()
            .is_config());
        assert!(Monitor::new(MonitorConfig::new(0.0, 2, 5, spec.clone()))
            .unwrap_err()
            .is_config());
        assert!(Monitor::new(MonitorConfig::new(0.01, 33, 5, spec))
            .unwrap_err()
            .is_config());
    }

    #[test]
    fn warm_up_then_fixed_window() {
        for degree in 1..=5 {
            let mut mon = Monitor::new(MonitorConfig::new(0.1, degree, 3, line_spec())).unwrap();
            for k in 0..20 {
                let t = k as f64 * 0.1;
                let out = mon.observe(&[t], t).unwrap().is_some();
                assert_eq!(out, k >= degree, "degree {degree}, sample {k}");
                assert_eq!(mon.window_len(), (k + 1).min(degree + 1));
            }
        }
    }

    #[test]
    fn constant_boolean_stream() {
        let spec = SafetySpec::boolean("never", 1, |_| false);
        let mut mon = Monitor::new(MonitorConfig::new(0.1, 2, 4, spec)).unwrap();
        let mut last = None;
        for k in 0..5 {
            last = mon.observe(&[7.0], k as f64 * 0.1).unwrap().cloned();
        }
        let v = last.unwrap();
        assert_eq!(v.predicted_levels, vec![0.0; 4]);
        assert!(!v.warning);
        assert_eq!(v.first_violation, None);
        assert_eq!(v.min_level, 0.0);
    }

    #[test]
    fn line_stream_levels() {
        let tau = 0.1;
        let mut mon = Monitor::new(MonitorConfig::new(tau, 1, 5, line_spec())).unwrap();
        assert!(mon.observe(&[0.0], 0.0).unwrap().is_none());
        let v = mon.observe(&[0.1], 0.1).unwrap().unwrap().clone();
        for (got, want) in v.predicted_levels.iter().zip([0.8, 0.7, 0.6, 0.5, 0.4]) {
            assert_relative_eq!(*got, want, epsilon = 1e-12);
        }
        assert!(!v.warning);

        let mut verdicts = Vec::new();
        for k in 2..=6 {
            let t = k as f64 * tau;
            verdicts.push(mon.observe(&[t], t).unwrap().unwrap().clone());
        }
        let at_half = &verdicts[3];
        assert_relative_eq!(at_half.at_time, 0.5, epsilon = 1e-12);
        for (got, want) in at_half
            .predicted_levels
            .iter()
            .zip([0.4, 0.3, 0.2, 0.1, 0.0])
        {
            assert_relative_eq!(*got, want, epsilon = 1e-12);
        }
        let at_six = &verdicts[4];
        for (got, want) in at_six
            .predicted_levels
            .iter()
            .zip([0.3, 0.2, 0.1, 0.0, -0.1])
        {
            assert_relative_eq!(*got, want, epsilon = 1e-12);
        }
        // φ(x̂_4) is an exact tie at zero, so rounding decides between 4 and 5.
        let first = at_six.first_violation.unwrap();
        assert!(first == 4 || first == 5);
        assert!(at_six.predicted_levels[first - 1] < 0.0);
        assert!(at_six.predicted_levels[..first - 1]
            .iter()
            .all(|&l| l >= 0.0));
        assert!(at_six.warning);
        assert_relative_eq!(at_six.min_level, -0.1, epsilon = 1e-12);
    }

    #[test]
    fn off_grid_sample_resets_window() {
        let mut mon = Monitor::new(MonitorConfig::new(0.1, 2, 3, line_spec())).unwrap();
        for k in 0..4 {
            mon.observe(&[1.0], k as f64 * 0.1).unwrap();
        }
        assert!(mon.last_verdict().is_some());
        let err = mon.observe(&[1.0], 0.45).unwrap_err();
        assert!(matches!(err, Error::Sampling { .. }));
        assert_eq!(mon.window_len(), 1);
        assert!(mon.last_verdict().is_none());
        assert!(mon.observe(&[1.0], 0.55).unwrap().is_none());
        assert!(mon.observe(&[1.0], 0.65).unwrap().is_some());
    }

    #[test]
    fn rejects_bad_states() {
        let mut mon = Monitor::new(MonitorConfig::new(0.1, 1, 3, line_spec())).unwrap();
        mon.observe(&[1.0], 0.0).unwrap();
        assert!(matches!(mon.observe(&[1.0, 2.0], 0.1), Err(Error::Data(_))));
        assert!(matches!(mon.observe(&[f64::NAN], 0.1), Err(Error::Data(_))));
        assert_eq!(mon.window_len(), 1);
        assert!(mon.observe(&[1.0], 0.1).unwrap().is_some());

        let spec = SafetySpec::affine("planar", vec![1.0, 1.0], 0.0);
        let mut mon = Monitor::new(MonitorConfig::new(0.1, 1, 3, spec)).unwrap();
        assert!(matches!(mon.observe(&[1.0], 0.0), Err(Error::Data(_))));
    }

    #[test]
    fn matches_batch_prediction_bitwise() {
        let tau = 0.05;
        let traj: Vec<Vec<f64>> = (0..30)
            .map(|k| {
                let s = k as f64 * tau;
                vec![s.sin(), (2.0 * s).cos(), s * s]
            })
            .collect();
        let spec = SafetySpec::new("sum", 3, |x| 1.0 - x.iter().sum::<f64>());
        let (degree, h) = (3, 7);
        let mut mon = Monitor::new(MonitorConfig::new(tau, degree, h, spec.clone())).unwrap();
        for (k, x) in traj.iter().enumerate() {
            let t = k as f64 * tau;
            if mon.observe(x, t).unwrap().is_none() {
                continue;
            }
            let stencil = Stencil::from_states(
                traj[k - degree..=k].to_vec(),
                (k - degree) as f64 * tau,
                tau,
            )
            .unwrap();
            let batch = predict_horizon(&stencil, degree, h).unwrap();
            let online = mon.prediction_set().unwrap();
            assert_eq!(online.states, batch.states);
            let levels: Vec<f64> = batch.states.iter().map(|s| spec.level(s)).collect();
            assert_eq!(mon.last_verdict().unwrap().predicted_levels, levels);
            assert_eq!(mon.predicted_state(h).unwrap(), batch.at(h));
        }
    }

    #[test]
    fn verdict_statistics() {
        let v = MonitorVerdict::from_levels(1.0, vec![0.5, 0.0, -0.2, 0.3, -1.0]);
        assert_eq!(v.min_level, -1.0);
        assert_eq!(v.first_violation, Some(3));
        assert!(v.warning);
        let v = MonitorVerdict::from_levels(1.0, vec![0.5, 0.0]);
        assert_eq!(v.first_violation, None);
        assert!(!v.warning);
    }
}
