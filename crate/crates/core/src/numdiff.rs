//! Backward-difference (BD) estimates of time derivatives over uniform stencils.
//!
//! The `i`-th backward difference at the newest sample `x_0` is defined
//! inductively: `∇¹x_0 = (x_0 - x_{-1}) / τ` and
//! `∇ⁱx_0 = (∇ⁱ⁻¹x_0 - ∇ⁱ⁻¹x_{-1}) / τ`. It is a first-order accurate
//! estimate of `ξ⁽ⁱ⁾(t)` and needs the `i + 1` newest samples.

use num_bigint::BigInt;
use num_traits::ToPrimitive;

use crate::error::{Error, Result};
use crate::MAX_DEGREE;

/// `n!` for `n = 0..=MAX_DEGREE + 1`, exact.
const FACTORIALS: [u128; MAX_DEGREE + 2] = {
    let mut table = [1u128; MAX_DEGREE + 2];
    let mut n = 1;
    while n < MAX_DEGREE + 2 {
        table[n] = table[n - 1] * n as u128;
        n += 1;
    }
    table
};

/// Exact `n!` for `n <= 33`.
pub fn factorial(n: usize) -> Result<u128> {
    FACTORIALS
        .get(n)
        .copied()
        .ok_or_else(|| Error::config(format!("factorial argument {n} exceeds {}", MAX_DEGREE + 1)))
}

/// `n!` as a float; only used with `n` already validated.
pub(crate) fn factorial_f64(n: usize) -> f64 {
    FACTORIALS[n] as f64
}

/// Evenly spaced samples of one state dimension, oldest first.
///
/// The last element is `x_0 = ξ(t)`; the element `j` places before it is
/// `x_{-j} = ξ(t - jτ)`.
#[derive(Debug, Clone, Copy)]
pub struct UniformWindow<'a> {
    values: &'a [f64],
    tau: f64,
}

impl<'a> UniformWindow<'a> {
    pub fn new(values: &'a [f64], tau: f64) -> Result<Self> {
        check_tau(tau)?;
        if values.is_empty() {
            return Err(Error::StencilLength { needed: 1, got: 0 });
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::data(format!("non-finite sample value {bad}")));
        }
        Ok(Self { values, tau })
    }

    pub fn values(&self) -> &'a [f64] {
        self.values
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub(crate) fn check_tau(tau: f64) -> Result<()> {
    if tau.is_finite() && tau > 0.0 {
        Ok(())
    } else {
        Err(Error::config(format!(
            "sampling interval must be positive and finite, got {tau}"
        )))
    }
}

fn check_order(i: usize) -> Result<()> {
    if (1..=MAX_DEGREE).contains(&i) {
        Ok(())
    } else {
        Err(Error::config(format!(
            "derivative order must be in 1..={MAX_DEGREE}, got {i}"
        )))
    }
}

/// Binomial coefficient `C(i, j)` by Pascal's rule in exact integer arithmetic.
pub fn binomial(i: usize, j: usize) -> Result<u64> {
    if i > MAX_DEGREE || j > i {
        return Err(Error::config(format!(
            "binomial({i}, {j}) out of range (need j <= i <= {MAX_DEGREE})"
        )));
    }
    let mut row = [0u64; MAX_DEGREE + 1];
    row[0] = 1;
    for n in 1..=i {
        for k in (1..=n).rev() {
            row[k] += row[k - 1];
        }
    }
    Ok(row[j])
}

/// Iterated differencing in place.
///
/// `buf` holds `k + 1` samples oldest first. On return `derivs[i - 1]` holds
/// `∇ⁱx_0` for `i = 1..=derivs.len()`; `buf` is left holding the difference
/// table diagonal and should be treated as scratch. Requires
/// `buf.len() > derivs.len()`.
pub(crate) fn backward_differences_in_place(buf: &mut [f64], tau: f64, derivs: &mut [f64]) {
    let last = buf.len() - 1;
    debug_assert!(derivs.len() <= last);
    for (order, slot) in (1..=derivs.len()).zip(derivs.iter_mut()) {
        for j in (order..=last).rev() {
            buf[j] = (buf[j] - buf[j - 1]) / tau;
        }
        *slot = buf[last];
    }
}

/// `∇ⁱx_0` of the window, computed by iterated differencing.
pub fn backward_difference(window: &UniformWindow<'_>, i: usize) -> Result<f64> {
    check_order(i)?;
    if window.len() < i + 1 {
        return Err(Error::StencilLength {
            needed: i + 1,
            got: window.len(),
        });
    }
    let mut buf = window.values[window.len() - (i + 1)..].to_vec();
    let mut derivs = vec![0.0; i];
    backward_differences_in_place(&mut buf, window.tau, &mut derivs);
    Ok(derivs[i - 1])
}

/// All of `∇¹x_0 … ∇^l x_0` from the newest `l + 1` samples of the window.
pub fn backward_differences(window: &UniformWindow<'_>, l: usize) -> Result<Vec<f64>> {
    check_order(l)?;
    if window.len() < l + 1 {
        return Err(Error::StencilLength {
            needed: l + 1,
            got: window.len(),
        });
    }
    let mut buf = window.values[window.len() - (l + 1)..].to_vec();
    let mut derivs = vec![0.0; l];
    backward_differences_in_place(&mut buf, window.tau, &mut derivs);
    Ok(derivs)
}

/// `|Σ_{j=0}^{i} (-1)^j C(i, j) (-j)^{i+1}|`, the leading coefficient of the
/// BD truncation error, summed exactly.
pub fn bd_coefficient_magnitude(i: usize) -> Result<f64> {
    check_order(i)?;
    let mut sum = BigInt::from(0);
    for j in 0..=i {
        let term = BigInt::from(binomial(i, j)?) * BigInt::from(-(j as i64)).pow(i as u32 + 1);
        if j % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    let magnitude = if sum < BigInt::from(0) { -sum } else { sum };
    Ok(magnitude
        .to_f64()
        .expect("BigInt to f64 saturates rather than failing"))
}

/// Leading-order bound on `|ξ⁽ⁱ⁾(t) - ∇ⁱx_0|`:
/// `τ · B / (i+1)! · bd_coefficient_magnitude(i)` where `B` bounds
/// `|ξ⁽ⁱ⁺¹⁾|` near `t`. The `O(τ²)` remainder is not included.
pub fn bd_error_bound(i: usize, tau: f64, deriv_bound_ip1: f64) -> Result<f64> {
    check_tau(tau)?;
    if !(deriv_bound_ip1 >= 0.0 && deriv_bound_ip1.is_finite()) {
        return Err(Error::config(format!(
            "derivative bound must be finite and non-negative, got {deriv_bound_ip1}"
        )));
    }
    let coeff = bd_coefficient_magnitude(i)?;
    Ok(tau * deriv_bound_ip1 / factorial_f64(i + 1) * coeff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Closed form `Σ_j (-1)^j C(i,j) x_{-j} / τ^i`, kept as an independent oracle.
    fn closed_form(values: &[f64], tau: f64, i: usize) -> f64 {
        let n = values.len();
        let mut acc = 0.0;
        for j in 0..=i {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * binomial(i, j).unwrap() as f64 * values[n - 1 - j];
        }
        acc / tau.powi(i as i32)
    }

    fn window(values: &[f64], tau: f64) -> UniformWindow<'_> {
        UniformWindow::new(values, tau).unwrap()
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(0, 0).unwrap(), 1);
        assert_eq!(binomial(4, 2).unwrap(), 6);
        assert_eq!(binomial(14, 7).unwrap(), 3432);
        assert_eq!(binomial(32, 16).unwrap(), 601_080_390);
        assert!(binomial(3, 4).unwrap_err().is_config());
        assert!(binomial(33, 1).unwrap_err().is_config());
    }

    #[test]
    fn small_windows() {
        let w = window(&[1.0, 2.0, 4.0], 1.0);
        assert_eq!(backward_difference(&w, 1).unwrap(), 2.0);
        assert_eq!(backward_difference(&w, 2).unwrap(), 1.0);
        assert!(matches!(
            backward_difference(&w, 3),
            Err(Error::StencilLength { needed: 4, got: 3 })
        ));
    }

    #[test]
    fn constant_window_has_zero_differences() {
        let values = [3.25; 8];
        for tau in [1e-3, 0.1, 2.0] {
            let w = window(&values, tau);
            for i in 1..8 {
                assert_eq!(backward_difference(&w, i).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn square_first_difference() {
        // (t² - (t - τ)²) / τ = 2t - τ at t = 1, τ = 0.1
        let w = window(&[0.81, 1.0], 0.1);
        assert_relative_eq!(backward_difference(&w, 1).unwrap(), 1.9, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            UniformWindow::new(&[1.0, f64::NAN], 0.1),
            Err(Error::Data(_))
        ));
        assert!(UniformWindow::new(&[1.0], 0.0).unwrap_err().is_config());
        assert!(UniformWindow::new(&[1.0], -1.0).unwrap_err().is_config());
        assert!(matches!(
            UniformWindow::new(&[], 1.0),
            Err(Error::StencilLength { .. })
        ));
        let w = window(&[1.0, 2.0], 1.0);
        assert!(backward_difference(&w, 0).unwrap_err().is_config());
    }

    #[test]
    fn coefficient_magnitudes() {
        assert_eq!(bd_coefficient_magnitude(1).unwrap(), 1.0);
        assert_eq!(bd_coefficient_magnitude(2).unwrap(), 6.0);
        assert_eq!(bd_coefficient_magnitude(3).unwrap(), 36.0);
        // The alternating sum equals i! · C(i+1, 2) (Stirling numbers of the second kind).
        for i in 1..=MAX_DEGREE {
            let expected = factorial(i).unwrap() as f64 * (i * (i + 1) / 2) as f64;
            assert_relative_eq!(
                bd_coefficient_magnitude(i).unwrap(),
                expected,
                max_relative = 1e-15
            );
        }
    }

    #[test]
    fn error_bound_values() {
        assert_relative_eq!(bd_error_bound(1, 0.1, 2.0).unwrap(), 0.1, epsilon = 1e-15);
        assert_eq!(bd_error_bound(2, 0.01, 0.0).unwrap(), 0.0);
        assert_relative_eq!(bd_error_bound(2, 0.01, 1.0).unwrap(), 0.01, epsilon = 1e-15);
        // The square's first difference misses 2t by exactly τ.
        let w = window(&[0.81, 1.0], 0.1);
        let err = (2.0 - backward_difference(&w, 1).unwrap()).abs();
        assert_relative_eq!(err, bd_error_bound(1, 0.1, 2.0).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn all_orders_match_single_order() {
        let values: Vec<f64> = (0..9).map(|k| (0.3 * k as f64).exp()).collect();
        let w = window(&values, 0.3);
        let all = backward_differences(&w, 8).unwrap();
        for i in 1..=8 {
            assert_eq!(all[i - 1], backward_difference(&w, i).unwrap());
        }
    }

    proptest! {
        #[test]
        fn iterated_matches_closed_form(
            values in prop::collection::vec(-10.0f64..10.0, 15),
            tau in 0.05f64..2.0,
            i in 1usize..=14,
        ) {
            let w = window(&values, tau);
            let iterated = backward_difference(&w, i).unwrap();
            let closed = closed_form(&values, tau, i);
            let scale = closed.abs().max(iterated.abs()).max(
                values.iter().map(|v| v.abs()).fold(0.0, f64::max) * (1u64 << i) as f64
                    / tau.powi(i as i32));
            prop_assert!((iterated - closed).abs() <= 1e-12 * scale);
        }

        #[test]
        fn linear_in_values(
            a in prop::collection::vec(-5.0f64..5.0, 6),
            b in prop::collection::vec(-5.0f64..5.0, 6),
            alpha in -3.0f64..3.0,
            i in 1usize..=5,
        ) {
            let tau = 0.25;
            let combo: Vec<f64> = a.iter().zip(&b).map(|(x, y)| alpha * x + y).collect();
            let lhs = backward_difference(&window(&combo, tau), i).unwrap();
            let rhs = alpha * backward_difference(&window(&a, tau), i).unwrap()
                + backward_difference(&window(&b, tau), i).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
        }

        #[test]
        fn polynomial_exactness(
            coeffs in prop::collection::vec(-2.0f64..2.0, 1..=5),
            t in -1.0f64..1.0,
        ) {
            // ξ of degree d = coeffs.len() - 1; ∇^d is exact and equals d!·c_d.
            let d = coeffs.len() - 1;
            prop_assume!(d >= 1);
            let tau = 0.5;
            let xi = |s: f64| coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c);
            let values: Vec<f64> = (0..=d).rev().map(|j| xi(t - j as f64 * tau)).collect();
            let got = backward_difference(&window(&values, tau), d).unwrap();
            let expected = factorial(d).unwrap() as f64 * coeffs[d];
            prop_assert!((got - expected).abs() <= 1e-9);
        }
    }
}
