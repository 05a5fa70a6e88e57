//! Evaluation of monitor output against ground truth.
//!
//! Boolean accuracy labels a warning issued at step `i` against the true
//! safety levels in `[i + 1, i + h]`, the window the monitor claims to cover.
//! Steps whose window runs past the end of the log are not evaluated.

use crate::error::{Error, Result};
use crate::sim::TrajectoryLog;
use crate::taylor::PredictionSet;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// `TP / (TP + FN)`, `None` when no unsafe windows were evaluated.
    pub fn tpr(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// `TN / (TN + FP)`, `None` when no safe windows were evaluated.
    pub fn tnr(&self) -> Option<f64> {
        ratio(self.tn, self.tn + self.fp)
    }

    fn record(&mut self, warning: bool, unsafe_ahead: bool) {
        match (warning, unsafe_ahead) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            tn: self.tn + o.tn,
        }
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// `tpr`/`tnr` for reports: a value or `N/A`.
pub fn format_rate(rate: Option<f64>) -> String {
    rate.map_or_else(|| "N/A".to_string(), |r| format!("{r:.6}"))
}

fn check_aligned(a: usize, b: usize, what: &str) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::data(format!("{what}: lengths differ ({a} vs {b})")))
    }
}

/// Labels every step `i` with `i + h < truth_levels.len()`.
///
/// `warnings[i]` is the monitor's warning at step `i` (false during warm-up).
/// The window `[i + 1, i + h]` is unsafe if any true level in it is negative.
pub fn label_confusion(
    truth_levels: &[f64],
    warnings: &[bool],
    horizon: usize,
) -> Result<ConfusionCounts> {
    check_aligned(
        truth_levels.len(),
        warnings.len(),
        "truth levels vs warnings",
    )?;
    if horizon == 0 {
        return Err(Error::config("horizon must be at least 1"));
    }
    let n = truth_levels.len();
    // next_unsafe[i]: smallest j >= i with a negative level, n if none.
    let mut next_unsafe = vec![n; n + 1];
    for i in (0..n).rev() {
        next_unsafe[i] = if truth_levels[i] < 0.0 {
            i
        } else {
            next_unsafe[i + 1]
        };
    }
    let mut counts = ConfusionCounts::default();
    for i in (0..n).take_while(|i| i + horizon < n) {
        let unsafe_ahead = next_unsafe[i + 1] <= i + horizon;
        counts.record(warnings[i], unsafe_ahead);
    }
    Ok(counts)
}

/// Indices where the true level turns negative: the first sample, if unsafe,
/// and every safe-to-unsafe transition.
pub fn unsafe_entries(truth_levels: &[f64]) -> Vec<usize> {
    (0..truth_levels.len())
        .filter(|&i| truth_levels[i] < 0.0 && (i == 0 || truth_levels[i - 1] >= 0.0))
        .collect()
}

/// Lead, in steps, of the earliest warning inside `[t_unsafe - hτ, t_unsafe)`;
/// `0` when there is none. Ranges from `0` to `h`.
pub fn earliest_warning_lead(
    warn_times: &[f64],
    unsafe_time: f64,
    horizon: usize,
    tau: f64,
) -> f64 {
    let slack = 1e-9 * tau;
    let window_start = unsafe_time - horizon as f64 * tau - slack;
    warn_times
        .iter()
        .copied()
        .filter(|&t| t >= window_start && t < unsafe_time - slack)
        .fold(None, |acc: Option<f64>, t| {
            Some(acc.map_or(t, |a| a.min(t)))
        })
        .map_or(0.0, |earliest| (unsafe_time - earliest) / tau)
}

/// Lead of the earliest warning before every unsafe entry of the log.
pub fn warning_leads(
    times: &[f64],
    warnings: &[bool],
    truth_levels: &[f64],
    horizon: usize,
    tau: f64,
) -> Result<Vec<f64>> {
    check_aligned(times.len(), warnings.len(), "times vs warnings")?;
    check_aligned(times.len(), truth_levels.len(), "times vs truth levels")?;
    let warn_times: Vec<f64> = times
        .iter()
        .zip(warnings)
        .filter_map(|(&t, &w)| w.then_some(t))
        .collect();
    Ok(unsafe_entries(truth_levels)
        .into_iter()
        .map(|i| earliest_warning_lead(&warn_times, times[i], horizon, tau))
        .collect())
}

/// Mean `|d_predicted - d_observed|` of the minimum safety level over the horizon.
///
/// At step `i`, `d_predicted` is the minimum of the current true level and the
/// predicted levels (`None` during warm-up, such steps are skipped) and
/// `d_observed` is the minimum true level over `[i, i + h]`. Steps whose window
/// runs past the log are skipped. Returns `None` if nothing was evaluated.
pub fn min_safety_distance_error<V: AsRef<[f64]>>(
    predicted_levels: &[Option<V>],
    truth_levels: &[f64],
    horizon: usize,
) -> Result<Option<f64>> {
    check_aligned(
        predicted_levels.len(),
        truth_levels.len(),
        "predictions vs truth levels",
    )?;
    let n = truth_levels.len();
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in (0..n).take_while(|i| i + horizon < n) {
        let Some(pred) = predicted_levels[i].as_ref() else {
            continue;
        };
        let d_predicted = pred
            .as_ref()
            .iter()
            .copied()
            .fold(truth_levels[i], f64::min);
        let d_observed = truth_levels[i..=i + horizon]
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        sum += (d_predicted - d_observed).abs();
        count += 1;
    }
    Ok((count > 0).then(|| sum / count as f64))
}

/// Prediction error statistics at one lookahead.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationRecord {
    pub lookahead_steps: usize,
    pub lookahead_seconds: f64,
    /// Root mean square of `‖x̂_m - ξ(t + mτ)‖`.
    pub rmse: f64,
    pub mean: f64,
    /// Population standard deviation of the error norm.
    pub std: f64,
    pub count: usize,
}

/// Error norm statistics per lookahead `m = 1..=h` over all prediction sets.
///
/// Each set must start on a grid point of `truth`; lookaheads past the end
/// of the log are ignored. Lookaheads with no ground truth at all are omitted.
pub fn rmse_by_lookahead(
    prediction_sets: &[PredictionSet],
    truth: &TrajectoryLog,
) -> Result<Vec<AblationRecord>> {
    let horizon = prediction_sets
        .iter()
        .map(PredictionSet::horizon)
        .max()
        .unwrap_or(0);
    let mut sum = vec![0.0; horizon];
    let mut sum_sq = vec![0.0; horizon];
    let mut count = vec![0usize; horizon];

    for set in prediction_sets {
        let base = truth.index_of(set.base_time).ok_or_else(|| {
            Error::data(format!(
                "prediction base time {} is off the truth grid",
                set.base_time
            ))
        })?;
        for (m, state) in (1..=set.horizon()).zip(&set.states) {
            let Some(actual) = truth.samples.get(base + m) else {
                break;
            };
            check_aligned(
                state.len(),
                actual.state.len(),
                "prediction vs truth dimension",
            )?;
            let err = state
                .iter()
                .zip(&actual.state)
                .map(|(p, a)| (p - a) * (p - a))
                .sum::<f64>()
                .sqrt();
            sum[m - 1] += err;
            sum_sq[m - 1] += err * err;
            count[m - 1] += 1;
        }
    }

    Ok((0..horizon)
        .filter(|&k| count[k] > 0)
        .map(|k| {
            let n = count[k] as f64;
            let mean = sum[k] / n;
            let var = (sum_sq[k] / n - mean * mean).max(0.0);
            AblationRecord {
                lookahead_steps: k + 1,
                lookahead_seconds: (k + 1) as f64 * truth.tau,
                rmse: (sum_sq[k] / n).sqrt(),
                mean,
                std: var.sqrt(),
                count: count[k],
            }
        })
        .collect())
}
