//! Time-domain simulation of the rig with injectable bias faults.
//!
//! Faults are additive step biases: a bias on a pump command shifts the
//! flow actually delivered (the logged command stays clean), a bias on a
//! sensor shifts its reading (the physical state is untouched).  The
//! integrator is a fixed-step fourth-order Runge-Kutta scheme; on this
//! linear plant the response to simultaneous faults is then the sum of
//! the individual responses to machine precision.

use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::bondgraph::{DeriveError, StateSpace};
use crate::var::{FaultSet, Variable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultKind {
    /// Bias on a pump command: changes what the plant receives.
    ActuatorBias,
    /// Bias on a sensor reading: changes what the observer sees.
    SensorBias,
}

/// One additive step bias, active from `onset_s` onwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultSpec {
    pub target: Variable,
    pub onset_s: f64,
    pub magnitude: f64,
}

impl FaultSpec {
    pub fn new(target: Variable, onset_s: f64, magnitude: f64) -> Self {
        FaultSpec {
            target,
            onset_s,
            magnitude,
        }
    }

    pub fn kind(&self) -> FaultKind {
        if self.target.is_input() {
            FaultKind::ActuatorBias
        } else {
            FaultKind::SensorBias
        }
    }

    pub fn active_at(&self, t: f64) -> bool {
        t >= self.onset_s
    }
}

/// A named set of faults to inject in one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FaultScenario {
    pub name: String,
    pub faults: Vec<FaultSpec>,
}

impl FaultScenario {
    pub fn nominal() -> Self {
        FaultScenario {
            name: "nominal".to_string(),
            faults: Vec::new(),
        }
    }

    pub fn single(target: Variable, onset_s: f64, magnitude: f64) -> Self {
        Self::simultaneous(vec![FaultSpec::new(target, onset_s, magnitude)])
    }

    /// Several faults, named after the targets joined with `+`.
    pub fn simultaneous(faults: Vec<FaultSpec>) -> Self {
        let name = if faults.is_empty() {
            "nominal".to_string()
        } else {
            faults
                .iter()
                .map(|f| f.target.name())
                .collect::<Vec<_>>()
                .join("+")
        };
        FaultScenario { name, faults }
    }

    pub fn named(name: &str, faults: Vec<FaultSpec>) -> Self {
        FaultScenario {
            name: name.to_string(),
            faults,
        }
    }

    /// The set of faulted variables, in canonical order.
    pub fn injected_set(&self) -> FaultSet {
        self.faults.iter().map(|f| f.target).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon_s: f64,
    /// Commanded pump flows.
    pub u: Vec<f64>,
    /// Initial state; `None` starts at the equilibrium for `u`.
    pub x0: Option<Vec<f64>>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 0.01,
            horizon_s: 100.0,
            u: vec![1.0, 1.0],
            x0: None,
        }
    }
}

/// Sampled run: `times[k]` holds the instant of sample `k`, the other
/// fields hold one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Sensor readings, bias faults included.
    pub outputs: Vec<Vec<f64>>,
    /// Commanded pump flows, never including actuator biases.
    pub commanded: Vec<Vec<f64>>,
}

impl SimulationTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("time step and horizon must be positive finite numbers")]
    BadTiming,
    #[error("input vector has {got} entries, expected {expected}")]
    InputSize { got: usize, expected: usize },
    #[error("initial state has {got} entries, expected {expected}")]
    StateSize { got: usize, expected: usize },
    #[error("simulation produced a non-finite value at t = {t}")]
    NonFinite { t: f64 },
    #[error(transparent)]
    Derive(#[from] DeriveError),
}

pub fn simulate(
    ss: &StateSpace,
    scenario: &FaultScenario,
    cfg: &SimConfig,
) -> Result<SimulationTrace, SimError> {
    if !(cfg.dt > 0.0 && cfg.dt.is_finite() && cfg.horizon_s >= 0.0 && cfg.horizon_s.is_finite()) {
        return Err(SimError::BadTiming);
    }
    let nx = ss.num_states();
    let nu = ss.num_inputs();
    let ny = ss.num_outputs();
    if cfg.u.len() != nu {
        return Err(SimError::InputSize {
            got: cfg.u.len(),
            expected: nu,
        });
    }

    let mut x: Vec<f64> = match &cfg.x0 {
        Some(x0) => {
            if x0.len() != nx {
                return Err(SimError::StateSize {
                    got: x0.len(),
                    expected: nx,
                });
            }
            x0.clone()
        }
        None => ss.steady_state(&cfg.u)?.iter().copied().collect(),
    };

    let actuator: Vec<(usize, f64, f64)> = scenario
        .faults
        .iter()
        .filter(|f| f.kind() == FaultKind::ActuatorBias)
        .map(|f| (f.target.input_index().unwrap(), f.onset_s, f.magnitude))
        .collect();
    let sensor: Vec<(usize, f64, f64)> = scenario
        .faults
        .iter()
        .filter(|f| f.kind() == FaultKind::SensorBias)
        .map(|f| (f.target.measured_index().unwrap(), f.onset_s, f.magnitude))
        .collect();

    let delivered = |t: f64, buf: &mut [f64]| {
        buf.copy_from_slice(&cfg.u);
        for &(j, onset, magnitude) in &actuator {
            if t >= onset {
                buf[j] += magnitude;
            }
        }
    };
    // dx/dt = A x + B u(t), written out to avoid per-step allocation.
    let deriv = |t: f64, x: &[f64], ubuf: &mut [f64], out: &mut [f64]| {
        delivered(t, ubuf);
        for i in 0..nx {
            let mut s = 0.0;
            for j in 0..nx {
                s += ss.a[(i, j)] * x[j];
            }
            for j in 0..nu {
                s += ss.b[(i, j)] * ubuf[j];
            }
            out[i] = s;
        }
    };

    let steps = (cfg.horizon_s / cfg.dt).round() as usize;
    let mut trace = SimulationTrace {
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        outputs: Vec::with_capacity(steps + 1),
        commanded: Vec::with_capacity(steps + 1),
    };

    let mut ubuf = vec![0.0; nu];
    let mut k1 = vec![0.0; nx];
    let mut k2 = vec![0.0; nx];
    let mut k3 = vec![0.0; nx];
    let mut k4 = vec![0.0; nx];
    let mut xs = vec![0.0; nx];

    for k in 0..=steps {
        let t = k as f64 * cfg.dt;

        // Record the sample.
        delivered(t, &mut ubuf);
        let mut y = vec![0.0; ny];
        for i in 0..ny {
            let mut s = 0.0;
            for j in 0..nx {
                s += ss.c[(i, j)] * x[j];
            }
            for j in 0..nu {
                s += ss.d[(i, j)] * ubuf[j];
            }
            y[i] = s;
        }
        for &(i, onset, magnitude) in &sensor {
            if t >= onset {
                y[i] += magnitude;
            }
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(SimError::NonFinite { t });
        }
        trace.times.push(t);
        trace.states.push(x.clone());
        trace.outputs.push(y);
        trace.commanded.push(cfg.u.clone());

        if k == steps {
            break;
        }

        // Classic Runge-Kutta step.
        let h = cfg.dt;
        deriv(t, &x, &mut ubuf, &mut k1);
        for i in 0..nx {
            xs[i] = x[i] + 0.5 * h * k1[i];
        }
        deriv(t + 0.5 * h, &xs, &mut ubuf, &mut k2);
        for i in 0..nx {
            xs[i] = x[i] + 0.5 * h * k2[i];
        }
        deriv(t + 0.5 * h, &xs, &mut ubuf, &mut k3);
        for i in 0..nx {
            xs[i] = x[i] + h * k3[i];
        }
        deriv(t + h, &xs, &mut ubuf, &mut k4);
        for i in 0..nx {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }

    Ok(trace)
}

/// Adds zero-mean Gaussian noise to every sensor sample, deterministically
/// for a given seed.  A non-positive deviation leaves the trace untouched.
pub fn apply_measurement_noise(trace: &mut SimulationTrace, std_dev: f64, seed: u64) {
    if std_dev <= 0.0 {
        return;
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, std_dev).expect("finite deviation");
    for row in &mut trace.outputs {
        for y in row.iter_mut() {
            *y += normal.sample(&mut rng);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bondgraph::{assign_causality, derive_state_equations, three_tank, TankParams};
    use crate::var::Variable::*;
    use nalgebra::DMatrix;

    fn rig() -> StateSpace {
        let model = three_tank(&TankParams::default()).unwrap();
        let causality = assign_causality(&model).unwrap();
        derive_state_equations(&model, &causality).unwrap()
    }

    fn defaults() -> SimConfig {
        SimConfig::default()
    }

    #[test]
    fn nominal_run_holds_the_equilibrium() {
        let trace = simulate(&rig(), &FaultScenario::nominal(), &defaults()).unwrap();
        assert_eq!(trace.len(), 10_001);
        assert_eq!(trace.times[0], 0.0);
        assert!((trace.times[10_000] - 100.0).abs() < 1e-9);
        let expected = [3.0, 2.0, 3.0, 1.0, 1.0];
        for k in [0, 1, 5_000, 10_000] {
            for (i, want) in expected.iter().enumerate() {
                assert!(
                    (trace.outputs[k][i] - want).abs() < 1e-9,
                    "sample {k}, channel {i}"
                );
            }
        }
    }

    #[test]
    fn pump_bias_settles_at_the_shifted_equilibrium() {
        let scenario = FaultScenario::single(Msf1, 50.0, 0.2);
        let trace = simulate(&rig(), &scenario, &defaults()).unwrap();
        let last = trace.states.last().unwrap();
        assert!((last[0] - 3.4).abs() < 1e-4);
        assert!((last[1] - 2.2).abs() < 1e-4);
        assert!((last[2] - 3.2).abs() < 1e-4);
        // The logged command never shows the bias.
        assert_eq!(trace.commanded.last().unwrap(), &vec![1.0, 1.0]);
        // Before onset nothing moves.
        let mid = &trace.states[4_000];
        assert!((mid[0] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn sensor_bias_shifts_the_reading_only() {
        let nominal = simulate(&rig(), &FaultScenario::nominal(), &defaults()).unwrap();
        let scenario = FaultScenario::single(De1, 50.0, 0.6);
        let faulty = simulate(&rig(), &scenario, &defaults()).unwrap();
        assert_eq!(nominal.states, faulty.states, "physics must be untouched");
        for k in 0..faulty.len() {
            let expected_bias = if faulty.times[k] >= 50.0 { 0.6 } else { 0.0 };
            let observed = faulty.outputs[k][0] - nominal.outputs[k][0];
            assert!((observed - expected_bias).abs() < 1e-12, "sample {k}");
            assert_eq!(faulty.outputs[k][1], nominal.outputs[k][1]);
        }
    }

    #[test]
    fn responses_superpose_on_the_linear_plant() {
        let ss = rig();
        let cfg = defaults();
        let nominal = simulate(&ss, &FaultScenario::nominal(), &cfg).unwrap();
        let a = simulate(&ss, &FaultScenario::single(Msf1, 50.0, 0.2), &cfg).unwrap();
        let b = simulate(&ss, &FaultScenario::single(Df2, 50.0, 0.2), &cfg).unwrap();
        let both = simulate(
            &ss,
            &FaultScenario::simultaneous(vec![
                FaultSpec::new(Msf1, 50.0, 0.2),
                FaultSpec::new(Df2, 50.0, 0.2),
            ]),
            &cfg,
        )
        .unwrap();
        for k in 0..nominal.len() {
            for i in 0..5 {
                let sum = (a.outputs[k][i] - nominal.outputs[k][i])
                    + (b.outputs[k][i] - nominal.outputs[k][i]);
                let joint = both.outputs[k][i] - nominal.outputs[k][i];
                assert!((sum - joint).abs() < 1e-9, "sample {k}, channel {i}");
            }
        }
    }

    #[test]
    fn halving_the_step_barely_moves_the_endpoint() {
        let ss = rig();
        let scenario = FaultScenario::single(Msf2, 50.0, 0.2);
        let coarse = simulate(&ss, &scenario, &defaults()).unwrap();
        let fine = simulate(
            &ss,
            &scenario,
            &SimConfig {
                dt: 0.005,
                ..defaults()
            },
        )
        .unwrap();
        let xc = coarse.states.last().unwrap();
        let xf = fine.states.last().unwrap();
        for i in 0..3 {
            assert!((xc[i] - xf[i]).abs() < 1e-8, "state {i}");
        }
    }

    #[test]
    fn divergence_is_reported() {
        let unstable = StateSpace {
            a: DMatrix::from_row_slice(1, 1, &[10.0]),
            b: DMatrix::from_row_slice(1, 1, &[0.0]),
            c: DMatrix::from_row_slice(1, 1, &[1.0]),
            d: DMatrix::from_row_slice(1, 1, &[0.0]),
            state_names: vec!["x".into()],
            input_names: vec!["u".into()],
            output_names: vec!["y".into()],
        };
        let cfg = SimConfig {
            dt: 0.01,
            horizon_s: 200.0,
            u: vec![0.0],
            x0: Some(vec![1.0]),
        };
        match simulate(&unstable, &FaultScenario::nominal(), &cfg) {
            Err(SimError::NonFinite { t }) => assert!(t > 0.0),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn config_errors_are_specific() {
        let ss = rig();
        assert!(matches!(
            simulate(
                &ss,
                &FaultScenario::nominal(),
                &SimConfig {
                    dt: 0.0,
                    ..defaults()
                }
            ),
            Err(SimError::BadTiming)
        ));
        assert!(matches!(
            simulate(
                &ss,
                &FaultScenario::nominal(),
                &SimConfig {
                    u: vec![1.0],
                    ..defaults()
                }
            ),
            Err(SimError::InputSize { got: 1, expected: 2 })
        ));
        assert!(matches!(
            simulate(
                &ss,
                &FaultScenario::nominal(),
                &SimConfig {
                    x0: Some(vec![1.0]),
                    ..defaults()
                }
            ),
            Err(SimError::StateSize { got: 1, expected: 3 })
        ));
    }

    #[test]
    fn noise_is_seeded_and_optional() {
        let ss = rig();
        let base = simulate(&ss, &FaultScenario::nominal(), &defaults()).unwrap();

        let mut same_a = base.clone();
        let mut same_b = base.clone();
        apply_measurement_noise(&mut same_a, 0.01, 7);
        apply_measurement_noise(&mut same_b, 0.01, 7);
        assert_eq!(same_a.outputs, same_b.outputs);
        assert_ne!(same_a.outputs, base.outputs);

        let mut other_seed = base.clone();
        apply_measurement_noise(&mut other_seed, 0.01, 8);
        assert_ne!(other_seed.outputs, same_a.outputs);

        let mut untouched = base.clone();
        apply_measurement_noise(&mut untouched, 0.0, 7);
        assert_eq!(untouched.outputs, base.outputs);
        // States are never noisy.
        assert_eq!(same_a.states, base.states);
    }

    #[test]
    fn scenario_names_and_sets() {
        assert_eq!(FaultScenario::nominal().name, "nominal");
        let s = FaultScenario::simultaneous(vec![
            FaultSpec::new(De1, 50.0, 0.6),
            FaultSpec::new(Df2, 50.0, 0.2),
        ]);
        assert_eq!(s.name, "De1+Df2");
        assert_eq!(s.injected_set(), crate::var::fault_set(&[De1, Df2]));
        assert_eq!(FaultSpec::new(Msf1, 0.0, 0.1).kind(), FaultKind::ActuatorBias);
        assert_eq!(FaultSpec::new(Df1, 0.0, 0.1).kind(), FaultKind::SensorBias);
    }
}
