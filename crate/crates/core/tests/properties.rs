use proptest::prelude::*;

use tpm_core::baseline::{ttc_monitor_new, TtcVerdict};
use tpm_core::metrics::rmse_by_lookahead;
use tpm_core::sim::{analytic_log, builtin_system, default_tau, simulate, Analytic};
use tpm_core::taylor::{predict_horizon, Stencil};
use tpm_core::{Monitor, MonitorConfig, MonitorVerdict, SafetySpec};

fn run(config: MonitorConfig, stream: &[Vec<f64>], tau: f64) -> Vec<Option<MonitorVerdict>> {
    let mut mon = Monitor::new(config).unwrap();
    stream
        .iter()
        .enumerate()
        .map(|(k, x)| mon.observe(x, k as f64 * tau).unwrap().cloned())
        .collect()
}

fn stream_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 2), 2..40)
}

fn planar_spec() -> SafetySpec {
    SafetySpec::new("disk", 2, |x| 4.0 - x[0].hypot(x[1]))
}

proptest! {
    #[test]
    fn ttc_is_degree_one_monitor(stream in stream_strategy(), h in 1usize..30) {
        let tau = 0.05;
        let tpm = run(MonitorConfig::new(tau, 1, h, planar_spec()), &stream, tau);
        let mut ttc = ttc_monitor_new(tau, h, planar_spec()).unwrap();
        for (k, (x, expected)) in stream.iter().zip(&tpm).enumerate() {
            let got = ttc.observe(x, k as f64 * tau).unwrap().map(TtcVerdict::from_verdict);
            prop_assert_eq!(got.as_ref().map(|v| &v.verdict), expected.as_ref());
            if let Some(v) = got {
                prop_assert_eq!(v.ttc_steps, v.verdict.first_violation);
            }
        }
    }

    #[test]
    fn longer_horizon_never_clears_a_warning(
        stream in stream_strategy(),
        degree in 1usize..4,
        h in 1usize..20,
        extra in 1usize..20,
    ) {
        let tau = 0.1;
        let short = run(MonitorConfig::new(tau, degree, h, planar_spec()), &stream, tau);
        let long = run(MonitorConfig::new(tau, degree, h + extra, planar_spec()), &stream, tau);
        for (s, l) in short.iter().zip(&long) {
            match (s, l) {
                (Some(s), Some(l)) => {
                    prop_assert_eq!(&l.predicted_levels[..h], &s.predicted_levels[..]);
                    prop_assert!(!s.warning || l.warning);
                }
                (None, None) => {}
                _ => prop_assert!(false, "warm-up differs"),
            }
        }
    }

    #[test]
    fn replay_is_deterministic(stream in stream_strategy(), degree in 1usize..6) {
        let cfg = || MonitorConfig::new(0.02, degree, 8, planar_spec());
        prop_assert_eq!(run(cfg(), &stream, 0.02), run(cfg(), &stream, 0.02));
    }
}

#[test]
fn higher_degree_beats_ttc_on_oscillator() {
    let tau = 0.01;
    let log = analytic_log(Analytic::Oscillator, tau, 2000).unwrap();
    let spec = SafetySpec::new("unit", 2, |x| 1.5 - x[0].hypot(x[1]));
    let curve = |degree| {
        let mut sets = Vec::new();
        let mut mon = Monitor::new(MonitorConfig::new(tau, degree, 50, spec.clone())).unwrap();
        mon.replay(&log.samples, |_, m| sets.push(m.prediction_set().unwrap()))
            .unwrap();
        rmse_by_lookahead(&sets, &log).unwrap()
    };
    let ttc = curve(1);
    for degree in 2..=4 {
        for (hi, lo) in curve(degree).iter().zip(&ttc) {
            assert!(
                hi.rmse <= lo.rmse,
                "degree {degree} at {} s",
                lo.lookahead_seconds
            );
        }
    }
}

#[test]
fn sine_prediction_error_is_at_least_first_order() {
    for degree in 1..=3 {
        for m in [1, 5, 10] {
            let err = |tau: f64| {
                let t = 0.9;
                let t0 = t - degree as f64 * tau;
                let states = (0..=degree)
                    .map(|k| vec![(t0 + k as f64 * tau).sin()])
                    .collect();
                let st = Stencil::from_states(states, t0, tau).unwrap();
                let pred = predict_horizon(&st, degree, m).unwrap();
                ((t + m as f64 * tau).sin() - pred.at(m)[0]).abs()
            };
            for tau in [1e-2, 5e-3] {
                let ratio = err(tau) / err(tau / 2.0);
                assert!(
                    ratio >= 1.8,
                    "degree {degree}, m {m}, tau {tau}: ratio {ratio}"
                );
            }
        }
    }
}

#[test]
fn simulated_timestamps_are_exact_multiples() {
    for name in ["car_track", "altitude_hold"] {
        let (model, _) = builtin_system(name, 1).unwrap();
        let tau = default_tau(name);
        let log = simulate(&model, tau, 500, 2).unwrap();
        for (i, s) in log.samples.iter().enumerate() {
            assert_eq!(s.time, i as f64 * tau);
        }
    }
}

#[test]
fn different_seeds_give_different_runs() {
    let (a, _) = builtin_system("altitude_hold", 1).unwrap();
    let (b, _) = builtin_system("altitude_hold", 2).unwrap();
    let la = simulate(&a, 0.033, 1000, 2).unwrap();
    let lb = simulate(&b, 0.033, 1000, 2).unwrap();
    assert_ne!(la.samples, lb.samples);
}
