//! Ground-truth trajectories: closed-form signals and RK4-integrated
//! closed-loop systems `ẋ = f(x, π(t, x))`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::monitor::SafetySpec;
use crate::numdiff::check_tau;
use crate::taylor::{Sample, Stencil};

/// Any state component beyond this magnitude aborts a simulation.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

type DynamicsFn = dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync;
type ControllerFn = dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync;

/// Closed-loop system: plant dynamics `f(x, u)` and feedback controller `π(t, x)`.
pub struct SystemModel {
    pub name: String,
    pub dim_x: usize,
    pub dim_u: usize,
    pub initial_state: Vec<f64>,
    dynamics: Box<DynamicsFn>,
    controller: Box<ControllerFn>,
}

impl SystemModel {
    pub fn new(
        name: impl Into<String>,
        initial_state: Vec<f64>,
        dim_u: usize,
        dynamics: impl Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
        controller: impl Fn(f64, &[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            dim_x: initial_state.len(),
            dim_u,
            initial_state,
            dynamics: Box::new(dynamics),
            controller: Box::new(controller),
        }
    }

    /// Autonomous system `ẋ = f(x)`.
    pub fn autonomous(
        name: impl Into<String>,
        initial_state: Vec<f64>,
        dynamics: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self::new(
            name,
            initial_state,
            0,
            move |x, _| dynamics(x),
            |_, _| Vec::new(),
        )
    }

    pub fn with_initial_state(mut self, x0: Vec<f64>) -> Self {
        assert_eq!(x0.len(), self.dim_x, "initial state dimension");
        self.initial_state = x0;
        self
    }

    pub fn control(&self, t: f64, x: &[f64]) -> Vec<f64> {
        (self.controller)(t, x)
    }

    /// Closed-loop vector field at `(t, x)`.
    pub fn derivative(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let u = self.control(t, x);
        (self.dynamics)(x, &u)
    }
}

impl fmt::Debug for SystemModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemModel")
            .field("name", &self.name)
            .field("dim_x", &self.dim_x)
            .field("dim_u", &self.dim_u)
            .field("initial_state", &self.initial_state)
            .finish_non_exhaustive()
    }
}

fn axpy(x: &[f64], a: f64, k: &[f64]) -> Vec<f64> {
    x.iter().zip(k).map(|(xi, ki)| xi + a * ki).collect()
}

/// One classical RK4 step of the closed loop, re-evaluating the controller at every stage.
pub fn rk4_step(model: &SystemModel, t: f64, x: &[f64], dt: f64) -> Result<Vec<f64>> {
    let stage = |tt: f64, xx: &[f64]| -> Result<Vec<f64>> {
        let k = model.derivative(tt, xx);
        if k.len() != xx.len() || k.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                step: 0,
                reason: format!("non-finite derivative at t = {tt}"),
            });
        }
        Ok(k)
    };
    let k1 = stage(t, x)?;
    let k2 = stage(t + 0.5 * dt, &axpy(x, 0.5 * dt, &k1))?;
    let k3 = stage(t + 0.5 * dt, &axpy(x, 0.5 * dt, &k2))?;
    let k4 = stage(t + dt, &axpy(x, dt, &k3))?;
    Ok((0..x.len())
        .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Analytic,
    Integrated {
        substeps: usize,
    },
    /// Read back from a file.
    External,
}

/// Samples at `t_i = t0 + i·τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub tau: f64,
    pub samples: Vec<Sample>,
    pub provenance: Provenance,
}

impl TrajectoryLog {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, |s| s.state.len())
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.samples.iter().map(|s| s.state.as_slice())
    }

    /// Safety level of every logged state.
    pub fn levels(&self, spec: &SafetySpec) -> Vec<f64> {
        self.states().map(|x| spec.level(x)).collect()
    }

    /// The `len` samples ending at index `end` (inclusive).
    pub fn stencil(&self, end: usize, len: usize) -> Result<Stencil> {
        if len == 0 || end + 1 < len || end >= self.samples.len() {
            return Err(Error::StencilLength {
                needed: len,
                got: (end + 1).min(self.samples.len()),
            });
        }
        Stencil::new(self.samples[end + 1 - len..=end].to_vec(), self.tau)
    }

    /// Index of the sample at time `t`, if `t` lies on the grid.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let t0 = self.samples.first()?.time;
        let k = ((t - t0) / self.tau).round();
        if k < 0.0 || k as usize >= self.samples.len() {
            return None;
        }
        let k = k as usize;
        ((self.samples[k].time - t).abs() <= 1e-6 * self.tau).then_some(k)
    }
}

/// Integrates the closed loop from `model.initial_state`, logging `steps + 1`
/// samples spaced `τ` apart with `substeps` RK4 steps per sampling interval.
pub fn simulate(
    model: &SystemModel,
    tau: f64,
    steps: usize,
    substeps: usize,
) -> Result<TrajectoryLog> {
    check_tau(tau)?;
    if steps == 0 || substeps == 0 {
        return Err(Error::config("steps and substeps must be at least 1"));
    }
    let dt = tau / substeps as f64;
    let mut x = model.initial_state.clone();
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(Sample::new(0.0, x.clone()));
    for step in 1..=steps {
        let t_prev = (step - 1) as f64 * tau;
        for j in 0..substeps {
            x = rk4_step(model, t_prev + j as f64 * dt, &x, dt).map_err(|e| match e {
                Error::Divergence { reason, .. } => Error::Divergence { step, reason },
                other => other,
            })?;
        }
        if let Some(v) = x
            .iter()
            .find(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT)
        {
            return Err(Error::Divergence {
                step,
                reason: format!("state component {v} exceeds {DIVERGENCE_LIMIT:e}"),
            });
        }
        samples.push(Sample::new(step as f64 * tau, x.clone()));
    }
    Ok(TrajectoryLog {
        tau,
        samples,
        provenance: Provenance::Integrated { substeps },
    })
}

/// Closed-form trajectories used as exact oracles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Analytic {
    Constant {
        value: f64,
    },
    /// `intercept + slope·s`
    Affine {
        intercept: f64,
        slope: f64,
    },
    /// `c0 + c1·s + c2·s²`
    Quadratic {
        c0: f64,
        c1: f64,
        c2: f64,
    },
    /// `amplitude·sin(omega·s + phase)`
    Sine {
        amplitude: f64,
        omega: f64,
        phase: f64,
    },
    /// `(cos s, -sin s)`, the unit harmonic oscillator from `(1, 0)`.
    Oscillator,
}

pub const ANALYTIC_KINDS: [&str; 5] = ["constant", "affine", "quadratic", "sine", "oscillator"];

impl Analytic {
    /// Parses a kind name; empty `params` selects defaults
    /// (`constant 1`, `affine 3 + 2s`, `quadratic s²`, `sine sin s`).
    pub fn from_name(kind: &str, params: &[f64]) -> Result<Self> {
        let p = |i: usize, default: f64| params.get(i).copied().unwrap_or(default);
        let expected = match kind {
            "constant" => 1,
            "affine" => 2,
            "quadratic" | "sine" => 3,
            "oscillator" => 0,
            other => return Err(Error::config(format!("unknown trajectory kind '{other}'"))),
        };
        if params.len() > expected {
            return Err(Error::config(format!(
                "'{kind}' takes at most {expected} parameters, got {}",
                params.len()
            )));
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("trajectory parameters must be finite"));
        }
        Ok(match kind {
            "constant" => Analytic::Constant { value: p(0, 1.0) },
            "affine" => Analytic::Affine {
                intercept: p(0, 3.0),
                slope: p(1, 2.0),
            },
            "quadratic" => Analytic::Quadratic {
                c0: p(0, 0.0),
                c1: p(1, 0.0),
                c2: p(2, 1.0),
            },
            "sine" => Analytic::Sine {
                amplitude: p(0, 1.0),
                omega: p(1, 1.0),
                phase: p(2, 0.0),
            },
            _ => Analytic::Oscillator,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Analytic::Oscillator => 2,
            _ => 1,
        }
    }

    pub fn eval(&self, s: f64) -> Vec<f64> {
        match *self {
            Analytic::Constant { value } => vec![value],
            Analytic::Affine { intercept, slope } => vec![intercept + slope * s],
            Analytic::Quadratic { c0, c1, c2 } => vec![c0 + s * (c1 + s * c2)],
            Analytic::Sine {
                amplitude,
                omega,
                phase,
            } => vec![amplitude * (omega * s + phase).sin()],
            Analytic::Oscillator => vec![s.cos(), -s.sin()],
        }
    }
}

/// Exact samples of `kind` at `s = i·τ`, `i = 0..=steps`.
pub fn analytic_log(kind: Analytic, tau: f64, steps: usize) -> Result<TrajectoryLog> {
    check_tau(tau)?;
    let samples = (0..=steps)
        .map(|i| {
            let t = i as f64 * tau;
            Sample::new(t, kind.eval(t))
        })
        .collect();
    Ok(TrajectoryLog {
        tau,
        samples,
        provenance: Provenance::Analytic,
    })
}

/// Unit harmonic oscillator `ẋ = v, v̇ = -x` as an integrable model.
pub fn oscillator_model() -> SystemModel {
    SystemModel::autonomous("oscillator", vec![1.0, 0.0], |x| vec![x[1], -x[0]])
}

pub const BUILTIN_SYSTEMS: [&str; 2] = ["car_track", "altitude_hold"];

/// Circular race track: centerline radius, half width, clearance threshold (m).
pub const TRACK_RADIUS: f64 = 10.0;
pub const TRACK_HALF_WIDTH: f64 = 1.0;
pub const TRACK_CLEARANCE: f64 = 0.5;
const CAR_SPEED_REF: f64 = 2.0;
const CAR_LOOKAHEAD: f64 = 2.0;
const CAR_SPEED_GAIN: f64 = 1.5;

/// Altitude corridor (ft).
pub const ALT_MIN: f64 = 1000.0;
pub const ALT_MAX: f64 = 45000.0;
const ALT_SEGMENT: f64 = 15.0;
const ALT_RAMP: f64 = 6.0;
const ALT_KP: f64 = 0.25;
const ALT_KD: f64 = 1.0;
const ALT_TARGETS: usize = 4096;

/// Default sampling interval of a built-in system.
pub fn default_tau(name: &str) -> f64 {
    match name {
        "altitude_hold" => 0.033,
        _ => 0.01,
    }
}

/// Clearance to the nearer track boundary minus the threshold.
pub fn track_spec() -> SafetySpec {
    SafetySpec::new("track_clearance", 2, |x| {
        let r = x[0].hypot(x[1]);
        (TRACK_HALF_WIDTH - (r - TRACK_RADIUS).abs()) - TRACK_CLEARANCE
    })
}

/// Distance to the nearer altitude bound.
pub fn altitude_spec() -> SafetySpec {
    SafetySpec::new("altitude_corridor", 1, |x| {
        (x[0] - ALT_MIN).min(ALT_MAX - x[0])
    })
}

/// `1 - max_i |x_i|`, used for the analytic trajectories.
pub fn unit_box_spec() -> SafetySpec {
    SafetySpec::new("unit_box", 1, |x| {
        1.0 - x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    })
}

/// Safety specification associated with a system or analytic kind.
pub fn spec_for(name: &str) -> Result<SafetySpec> {
    match name {
        "car_track" => Ok(track_spec()),
        "altitude_hold" => Ok(altitude_spec()),
        n if ANALYTIC_KINDS.contains(&n) => Ok(unit_box_spec()),
        other => Err(Error::config(format!("unknown system '{other}'"))),
    }
}

/// Desk-scale closed-loop systems with their safety specifications.
///
/// - `car_track`: unicycle `(x, y, θ, v)` driving counter-clockwise on a
///   circular track, steered by pure pursuit toward a wavy racing line whose
///   amplitude and phase are drawn from `seed`.
/// - `altitude_hold`: vertical point mass `(alt, climb)` under PD control
///   toward a reference that ramps between random targets near the lower
///   corridor bound every 15 s.
pub fn builtin_system(name: &str, seed: u64) -> Result<(SystemModel, SafetySpec)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match name {
        "car_track" => Ok((car_track(&mut rng), track_spec())),
        "altitude_hold" => Ok((altitude_hold(&mut rng), altitude_spec())),
        other => Err(Error::config(format!("unknown system '{other}'"))),
    }
}

fn car_track(rng: &mut ChaCha8Rng) -> SystemModel {
    let amplitude: f64 = rng.gen_range(0.35..0.75);
    let phase: f64 = rng.gen_range(0.0..2.0 * PI);
    let lobes = 3.0;
    let racing_radius = move |psi: f64| TRACK_RADIUS + amplitude * (lobes * psi + phase).sin();

    let dynamics = |x: &[f64], u: &[f64]| {
        let (theta, v) = (x[2], x[3]);
        vec![v * theta.cos(), v * theta.sin(), u[0], u[1]]
    };
    let controller = move |_t: f64, x: &[f64]| {
        let (px, py, theta, v) = (x[0], x[1], x[2], x[3]);
        let psi = py.atan2(px) + CAR_LOOKAHEAD / TRACK_RADIUS;
        let r = racing_radius(psi);
        let (dx, dy) = (r * psi.cos() - px, r * psi.sin() - py);
        let bearing = dy.atan2(dx) - theta;
        let alpha = bearing.sin().atan2(bearing.cos());
        let curvature = 2.0 * alpha.sin() / dx.hypot(dy);
        vec![v * curvature, CAR_SPEED_GAIN * (CAR_SPEED_REF - v)]
    };
    SystemModel::new(
        "car_track",
        vec![TRACK_RADIUS, 0.0, FRAC_PI_2, CAR_SPEED_REF],
        2,
        dynamics,
        controller,
    )
}

fn altitude_hold(rng: &mut ChaCha8Rng) -> SystemModel {
    let start = 2500.0;
    let mut targets = Vec::with_capacity(ALT_TARGETS);
    targets.push(start);
    for _ in 1..ALT_TARGETS {
        targets.push(rng.gen_range(500.0..4000.0));
    }
    let reference = move |t: f64| {
        let seg = (t.max(0.0) / ALT_SEGMENT).floor() as usize;
        let from = targets[seg % ALT_TARGETS];
        let to = targets[(seg + 1) % ALT_TARGETS];
        let s = ((t - seg as f64 * ALT_SEGMENT) / ALT_RAMP).clamp(0.0, 1.0);
        from + (to - from) * 0.5 * (1.0 - (PI * s).cos())
    };
    let dynamics = |x: &[f64], u: &[f64]| vec![x[1], u[0]];
    let controller = move |t: f64, x: &[f64]| vec![ALT_KP * (reference(t) - x[0]) - ALT_KD * x[1]];
    SystemModel::new("altitude_hold", vec![start, 0.0], 1, dynamics, controller)
}
