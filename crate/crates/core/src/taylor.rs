//! Approximated Taylor polynomials built from backward differences.
//!
//! For each state dimension independently,
//! `P̄_l(s) = x_0 + Σ_{i=1}^{l} ∇ⁱx_0 / i! · (s - t)^i`,
//! i.e. the degree-`l` Taylor polynomial at the newest sample time `t` with
//! every derivative replaced by its backward-difference estimate.

use crate::error::{Error, Result};
use crate::numdiff::{
    backward_differences_in_place, bd_coefficient_magnitude, check_tau, factorial_f64,
};
use crate::MAX_DEGREE;

/// Relative tolerance on sample spacing inside a stencil.
const SPACING_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub time: f64,
    pub state: Vec<f64>,
}

impl Sample {
    pub fn new(time: f64, state: Vec<f64>) -> Self {
        Self { time, state }
    }
}

/// Uniformly spaced samples, oldest first.
#[derive(Debug, Clone)]
pub struct Stencil {
    samples: Vec<Sample>,
    tau: f64,
}

impl Stencil {
    pub fn new(samples: Vec<Sample>, tau: f64) -> Result<Self> {
        check_tau(tau)?;
        let first = samples
            .first()
            .ok_or(Error::StencilLength { needed: 1, got: 0 })?;
        let dim = first.state.len();
        if dim == 0 {
            return Err(Error::data("state dimension must be at least 1"));
        }
        for (k, s) in samples.iter().enumerate() {
            if s.state.len() != dim {
                return Err(Error::data(format!(
                    "sample {k} has dimension {}, expected {dim}",
                    s.state.len()
                )));
            }
            if !s.time.is_finite() || s.state.iter().any(|v| !v.is_finite()) {
                return Err(Error::data(format!("sample {k} is not finite")));
            }
            if k > 0 {
                let gap = s.time - samples[k - 1].time;
                if (gap - tau).abs() > SPACING_TOLERANCE * tau {
                    return Err(Error::data(format!(
                        "non-uniform spacing between samples {} and {k}: {gap} vs tau {tau}",
                        k - 1
                    )));
                }
            }
        }
        Ok(Self { samples, tau })
    }

    /// Builds a stencil from bare states at times `t0, t0 + τ, …`.
    pub fn from_states(states: Vec<Vec<f64>>, t0: f64, tau: f64) -> Result<Self> {
        let samples = states
            .into_iter()
            .enumerate()
            .map(|(k, state)| Sample::new(t0 + k as f64 * tau, state))
            .collect();
        Self::new(samples, tau)
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn dim(&self) -> usize {
        self.samples[0].state.len()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn newest(&self) -> &Sample {
        self.samples.last().expect("stencil is non-empty")
    }
}

pub(crate) fn check_degree(degree: usize) -> Result<()> {
    if (1..=MAX_DEGREE).contains(&degree) {
        Ok(())
    } else {
        Err(Error::config(format!(
            "degree must be in 1..={MAX_DEGREE}, got {degree}"
        )))
    }
}

/// `x_0 + δ·(c_1 + δ·(c_2 + … + δ·c_l))`.
#[inline]
pub(crate) fn horner(base: f64, coeffs: &[f64], delta: f64) -> f64 {
    let acc = coeffs.iter().rev().fold(0.0, |acc, c| acc * delta + c);
    base + acc * delta
}

/// Fills `coeffs[i - 1] = ∇ⁱx_0 / i!` from a scratch copy of one dimension's
/// stencil (`scratch.len() == coeffs.len() + 1`) and returns `∇ⁱx_0` in `derivs`.
#[inline]
pub(crate) fn taylor_coefficients(
    scratch: &mut [f64],
    tau: f64,
    derivs: &mut [f64],
    coeffs: &mut [f64],
) {
    backward_differences_in_place(scratch, tau, derivs);
    for (i, (c, d)) in coeffs.iter_mut().zip(derivs.iter()).enumerate() {
        *c = d / factorial_f64(i + 1);
    }
}

/// Approximated Taylor polynomial of every state dimension around `base_time`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorModel {
    base_time: f64,
    base_state: Vec<f64>,
    /// `derivs[d][i - 1] = ∇ⁱ` of dimension `d`.
    derivs: Vec<Vec<f64>>,
    /// `coeffs[d][i - 1] = ∇ⁱ / i!`.
    coeffs: Vec<Vec<f64>>,
    degree: usize,
}

impl TaylorModel {
    /// Fits the model to the newest `degree + 1` samples of the stencil.
    pub fn fit(stencil: &Stencil, degree: usize) -> Result<Self> {
        check_degree(degree)?;
        let len = stencil.len();
        if len < degree + 1 {
            return Err(Error::StencilLength {
                needed: degree + 1,
                got: len,
            });
        }
        let window = &stencil.samples[len - (degree + 1)..];
        let newest = stencil.newest();
        let dim = stencil.dim();

        let mut scratch = vec![0.0; degree + 1];
        let mut derivs = Vec::with_capacity(dim);
        let mut coeffs = Vec::with_capacity(dim);
        for d in 0..dim {
            for (slot, s) in scratch.iter_mut().zip(window) {
                *slot = s.state[d];
            }
            let mut dd = vec![0.0; degree];
            let mut cc = vec![0.0; degree];
            taylor_coefficients(&mut scratch, stencil.tau, &mut dd, &mut cc);
            if dd.iter().any(|v| !v.is_finite()) {
                return Err(Error::data(format!(
                    "non-finite derivative estimate in dimension {d}"
                )));
            }
            derivs.push(dd);
            coeffs.push(cc);
        }

        Ok(Self {
            base_time: newest.time,
            base_state: newest.state.clone(),
            derivs,
            coeffs,
            degree,
        })
    }

    pub fn base_time(&self) -> f64 {
        self.base_time
    }

    pub fn base_state(&self) -> &[f64] {
        &self.base_state
    }

    pub fn derivs(&self) -> &[Vec<f64>] {
        &self.derivs
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.base_state.len()
    }

    /// Value of the polynomial at absolute time `s`.
    pub fn evaluate(&self, s: f64) -> Vec<f64> {
        self.evaluate_offset(s - self.base_time)
    }

    /// Value of the polynomial at `base_time + delta`.
    pub fn evaluate_offset(&self, delta: f64) -> Vec<f64> {
        self.base_state
            .iter()
            .zip(&self.coeffs)
            .map(|(&x0, c)| horner(x0, c, delta))
            .collect()
    }
}

/// Predicted states `x̂_1 … x̂_h`, where `x̂_m` estimates `ξ(base_time + mτ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub base_time: f64,
    pub tau: f64,
    pub states: Vec<Vec<f64>>,
}

impl PredictionSet {
    pub fn horizon(&self) -> usize {
        self.states.len()
    }

    /// `x̂_m` for `m` in `1..=horizon`.
    pub fn at(&self, m: usize) -> &[f64] {
        &self.states[m - 1]
    }
}

/// Fits once at the newest sample and evaluates at `t + mτ`, `m = 1..=h`.
pub fn predict_horizon(stencil: &Stencil, degree: usize, horizon: usize) -> Result<PredictionSet> {
    if horizon == 0 {
        return Err(Error::config("horizon must be at least 1"));
    }
    let model = TaylorModel::fit(stencil, degree)?;
    let tau = stencil.tau();
    let states = (1..=horizon)
        .map(|m| model.evaluate_offset(m as f64 * tau))
        .collect();
    Ok(PredictionSet {
        base_time: model.base_time,
        tau,
        states,
    })
}

/// Leading-order bound on `|ξ(t + mτ) - P̄_l(t + mτ)|`:
///
/// `B_{l+1}/(l+1)! · (mτ)^{l+1} + τ · Σ_{p=1}^{l} B_{p+1}/(p+1)! · c_p`
///
/// with `c_p` = [`bd_coefficient_magnitude`]`(p)` and `deriv_bounds = [B_1, …, B_{l+1}]`.
/// The `O(τ²)` remainder is omitted.
pub fn prediction_error_bound(
    degree: usize,
    m: usize,
    tau: f64,
    deriv_bounds: &[f64],
) -> Result<f64> {
    check_degree(degree)?;
    check_tau(tau)?;
    if m == 0 {
        return Err(Error::config("lookahead index must be at least 1"));
    }
    if deriv_bounds.len() != degree + 1 {
        return Err(Error::config(format!(
            "expected {} derivative bounds, got {}",
            degree + 1,
            deriv_bounds.len()
        )));
    }
    if deriv_bounds.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
        return Err(Error::config(
            "derivative bounds must be finite and non-negative",
        ));
    }
    let bound = |p: usize| deriv_bounds[p - 1];
    let remainder =
        bound(degree + 1) / factorial_f64(degree + 1) * (m as f64 * tau).powi(degree as i32 + 1);
    let mut bd_terms = 0.0;
    for p in 1..=degree {
        bd_terms += bound(p + 1) / factorial_f64(p + 1) * bd_coefficient_magnitude(p)?;
    }
    Ok(remainder + tau * bd_terms)
}
