//! Residual generation and alarm decision.
//!
//! Each balance equation of the rig becomes a residual evaluated purely
//! from sensor readings and commanded pump flows, with time derivatives
//! taken as backward differences:
//!
//! ```text
//! r_De1 = C1·d(De1)/dt − (u1 − Df1)
//! r_De2 = C2·d(De2)/dt − (Df1 + Df2 − De2/R0)
//! r_De3 = C3·d(De3)/dt − (u2 − Df2)
//! r_Df1 = Df1 − (De1 − De2)/R1
//! r_Df2 = Df2 − (De3 − De2)/R2
//! ```
//!
//! An alarm fires only if the signal stays beyond its threshold for every
//! sample of the persistence window ending at the decision instant, which
//! rides out onset spikes from the differentiated step faults.  Alarm
//! levels are window means of the *raw* signals, so a quiet channel still
//! reports its (near-zero) level for use in magnitude estimation.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::bondgraph::TankParams;
use crate::plant::SimulationTrace;
use crate::var::{Constraint, Variable};

/// Alarm thresholds, one per measured variable and one per residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub global: [f64; 5],
    pub local: [f64; 5],
}

impl Thresholds {
    /// Global thresholds scale with each sensor's quiescent reading; the
    /// residuals all live on the scale of the valve flows, so they share
    /// one uniform threshold derived from the smallest flow reading.
    pub fn from_nominal(nominal: &[f64; 5], frac: f64) -> Self {
        let flow_scale = nominal[3].abs().min(nominal[4].abs());
        Thresholds {
            global: std::array::from_fn(|i| frac * nominal[i].abs()),
            local: [frac * flow_scale; 5],
        }
    }
}

/// Residual samples; `times[k]` is the instant of row `values[k]`.
/// Starts one sample into the source trace (backward differences).
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualTrace {
    pub times: Vec<f64>,
    pub values: Vec<[f64; 5]>,
}

pub fn compute_residuals(trace: &SimulationTrace, params: &TankParams) -> ResidualTrace {
    let mut times = Vec::new();
    let mut values = Vec::new();
    for k in 1..trace.len() {
        let dt = trace.times[k] - trace.times[k - 1];
        let y = &trace.outputs[k];
        let yp = &trace.outputs[k - 1];
        let u = &trace.commanded[k];
        let (de1, de2, de3, df1, df2) = (y[0], y[1], y[2], y[3], y[4]);
        let r = [
            params.c1 * (de1 - yp[0]) / dt - (u[0] - df1),
            params.c2 * (de2 - yp[1]) / dt - (df1 + df2 - de2 / params.r0),
            params.c3 * (de3 - yp[2]) / dt - (u[1] - df2),
            df1 - (de1 - de2) / params.r1,
            df2 - (de3 - de2) / params.r2,
        ];
        times.push(trace.times[k]);
        values.push(r);
    }
    ResidualTrace { times, values }
}

/// Window means of the sensor deviations (`global`) and residuals
/// (`local`) over the persistence window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyObservation {
    pub global: [f64; 5],
    pub local: [f64; 5],
}

impl SteadyObservation {
    /// Stacked 10-vector (sensor deviations, then residuals) used by the
    /// least-squares magnitude fits.
    pub fn extended(&self) -> DVector<f64> {
        DVector::from_iterator(10, self.global.iter().chain(self.local.iter()).copied())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlobalAlarm {
    Normal,
    High,
    Low,
}

impl GlobalAlarm {
    pub fn sign(self) -> f64 {
        match self {
            GlobalAlarm::Normal => 0.0,
            GlobalAlarm::High => 1.0,
            GlobalAlarm::Low => -1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            GlobalAlarm::Normal => "normal",
            GlobalAlarm::High => "high",
            GlobalAlarm::Low => "low",
        }
    }
}

/// Everything decided at the decision instant: per-sensor alarms, per-
/// residual violations, and the window-mean levels behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct AlarmState {
    pub decided_at: f64,
    pub global: [GlobalAlarm; 5],
    pub local: [bool; 5],
    pub levels: SteadyObservation,
}

impl AlarmState {
    pub fn global_alarm(&self, v: Variable) -> GlobalAlarm {
        self.global[v.measured_index().expect("measured variable")]
    }

    pub fn is_violated(&self, c: Constraint) -> bool {
        self.local[c.index()]
    }

    /// Window-mean deviation of a sensor from its quiescent reading.
    pub fn level(&self, v: Variable) -> f64 {
        self.levels.global[v.measured_index().expect("measured variable")]
    }

    /// Window-mean value of a residual.
    pub fn residual_level(&self, c: Constraint) -> f64 {
        self.levels.local[c.index()]
    }

    /// Measured variables with a non-normal alarm, in canonical order.
    pub fn alarmed(&self) -> Vec<Variable> {
        Variable::MEASURED
            .iter()
            .copied()
            .filter(|&v| self.global_alarm(v) != GlobalAlarm::Normal)
            .collect()
    }

    /// Violated constraints, in declaration order.
    pub fn violated(&self) -> Vec<Constraint> {
        Constraint::ALL
            .iter()
            .copied()
            .filter(|&c| self.is_violated(c))
            .collect()
    }

    pub fn violation_mask(&self) -> [bool; 5] {
        self.local
    }

    pub fn any_alarm(&self) -> bool {
        self.global.iter().any(|&g| g != GlobalAlarm::Normal) || self.local.iter().any(|&v| v)
    }

    /// The fault candidates a violated constraint implicates.
    pub fn conflicts(&self) -> Vec<BTreeSet<Variable>> {
        self.violated()
            .iter()
            .map(|c| c.members().iter().copied().collect())
            .collect()
    }
}

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("no samples fall inside the decision window [{from}, {to}]")]
    EmptyWindow { from: f64, to: f64 },
}

fn window(times: &[f64], from: f64, to: f64) -> Vec<usize> {
    times
        .iter()
        .enumerate()
        .filter(|(_, &t)| t >= from - 1e-9 && t <= to + 1e-9)
        .map(|(i, _)| i)
        .collect()
}

/// Window means without any thresholding, used both for alarm levels and
/// for building fault response templates.
pub fn steady_observation(
    trace: &SimulationTrace,
    residuals: &ResidualTrace,
    nominal: &[f64; 5],
    persistence_s: f64,
    decided_at_s: f64,
) -> Result<SteadyObservation, DetectError> {
    let from = decided_at_s - persistence_s;
    let empty = || DetectError::EmptyWindow {
        from,
        to: decided_at_s,
    };

    let g_idx = window(&trace.times, from, decided_at_s);
    let l_idx = window(&residuals.times, from, decided_at_s);
    if g_idx.is_empty() || l_idx.is_empty() {
        return Err(empty());
    }

    let mut global = [0.0; 5];
    for &k in &g_idx {
        for i in 0..5 {
            global[i] += trace.outputs[k][i] - nominal[i];
        }
    }
    for g in &mut global {
        *g /= g_idx.len() as f64;
    }

    let mut local = [0.0; 5];
    for &k in &l_idx {
        for i in 0..5 {
            local[i] += residuals.values[k][i];
        }
    }
    for l in &mut local {
        *l /= l_idx.len() as f64;
    }

    Ok(SteadyObservation { global, local })
}

pub fn detect_alarms(
    trace: &SimulationTrace,
    residuals: &ResidualTrace,
    nominal: &[f64; 5],
    thresholds: &Thresholds,
    persistence_s: f64,
    decided_at_s: f64,
) -> Result<AlarmState, DetectError> {
    let from = decided_at_s - persistence_s;
    let levels = steady_observation(trace, residuals, nominal, persistence_s, decided_at_s)?;
    let g_idx = window(&trace.times, from, decided_at_s);
    let l_idx = window(&residuals.times, from, decided_at_s);

    let global = std::array::from_fn(|i| {
        let thr = thresholds.global[i];
        let above = g_idx
            .iter()
            .all(|&k| trace.outputs[k][i] - nominal[i] > thr);
        let below = g_idx
            .iter()
            .all(|&k| trace.outputs[k][i] - nominal[i] < -thr);
        if above {
            GlobalAlarm::High
        } else if below {
            GlobalAlarm::Low
        } else {
            GlobalAlarm::Normal
        }
    });

    let local = std::array::from_fn(|i| {
        let thr = thresholds.local[i];
        l_idx.iter().all(|&k| residuals.values[k][i].abs() > thr)
    });

    Ok(AlarmState {
        decided_at: decided_at_s,
        global,
        local,
        levels,
    })
}

/// Sensitivity of each residual to a sustained bias on each measured
/// variable once derivatives have settled: rows follow the residual
/// order, columns the measured variables.
pub fn steady_constraint_jacobian(params: &TankParams) -> DMatrix<f64> {
    DMatrix::from_row_slice(
        5,
        5,
        &[
            0.0, 0.0, 0.0, 1.0, 0.0, //
            0.0, 1.0 / params.r0, 0.0, -1.0, -1.0, //
            0.0, 0.0, 0.0, 0.0, 1.0, //
            -1.0 / params.r1, 1.0 / params.r1, 0.0, 1.0, 0.0, //
            0.0, 1.0 / params.r2, -1.0 / params.r2, 0.0, 1.0,
        ],
    )
}
