//! Derives linear state-space equations from a causally assigned model.
//!
//! Every bond's effort and flow is expressed as a linear combination of
//! the capacitance states and the source inputs, propagating element laws
//! and junction balances to a fixpoint.  Capacitance flow balances then
//! give `dx/dt = A·x + B·u`, and sensor reads give `y = C·x + D·u`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use super::{BondGraphModel, CausalAssignment, ElementKind, JunctionKind, SensorKind};

#[derive(Debug, Error)]
pub enum DeriveError {
    #[error("could not resolve the {quantity} on the bond between `{tail}` and `{head}`")]
    Unresolved {
        quantity: &'static str,
        tail: String,
        head: String,
    },
    #[error("model has no capacitance, nothing to integrate")]
    NoStates,
    #[error("state matrix is singular; the rig has no unique steady state")]
    SingularStateMatrix,
    #[error("input vector has {got} entries, expected {expected}")]
    InputSize { got: usize, expected: usize },
}

/// Linear time-invariant model `dx/dt = A x + B u`, `y = C x + D u`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub state_names: Vec<String>,
    pub input_names: Vec<String>,
    pub output_names: Vec<String>,
}

impl StateSpace {
    pub fn num_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn num_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn num_outputs(&self) -> usize {
        self.c.nrows()
    }

    /// Equilibrium state for a constant input, from `A x + B u = 0`.
    pub fn steady_state(&self, u: &[f64]) -> Result<DVector<f64>, DeriveError> {
        if u.len() != self.num_inputs() {
            return Err(DeriveError::InputSize {
                got: u.len(),
                expected: self.num_inputs(),
            });
        }
        let u = DVector::from_column_slice(u);
        let rhs = -(&self.b * u);
        self.a
            .clone()
            .lu()
            .solve(&rhs)
            .ok_or(DeriveError::SingularStateMatrix)
    }

    /// Sensor readings at the equilibrium for a constant input.
    pub fn steady_outputs(&self, u: &[f64]) -> Result<Vec<f64>, DeriveError> {
        let x = self.steady_state(u)?;
        let u = DVector::from_column_slice(u);
        let y = &self.c * x + &self.d * u;
        Ok(y.iter().copied().collect())
    }

    /// Steady-state gain from each input to each output: `C(−A)⁻¹B + D`.
    pub fn dc_gain(&self) -> Result<DMatrix<f64>, DeriveError> {
        let x = self
            .a
            .clone()
            .lu()
            .solve(&(-self.b.clone()))
            .ok_or(DeriveError::SingularStateMatrix)?;
        Ok(&self.c * x + &self.d)
    }

    /// True when every eigenvalue of `A` has a negative real part.
    pub fn is_hurwitz(&self) -> bool {
        self.a.complex_eigenvalues().iter().all(|ev| ev.re < 0.0)
    }
}

/// Linear form over (states ⧺ inputs).
#[derive(Debug, Clone, PartialEq)]
pub(super) struct LinExpr(pub(super) Vec<f64>);

impl LinExpr {
    fn zero(len: usize) -> Self {
        LinExpr(vec![0.0; len])
    }

    fn unit(len: usize, at: usize) -> Self {
        let mut coef = vec![0.0; len];
        coef[at] = 1.0;
        LinExpr(coef)
    }

    fn scaled(&self, k: f64) -> Self {
        LinExpr(self.0.iter().map(|c| c * k).collect())
    }

    fn add_scaled(&mut self, other: &LinExpr, k: f64) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += k * b;
        }
    }
}

/// Fully resolved per-bond efforts and flows, the raw material for both
/// the state equations and the influence graph.
pub(super) struct BondExpressions {
    pub(super) efforts: Vec<LinExpr>,
    pub(super) flows: Vec<LinExpr>,
    /// Node indices of the capacitances, in state order.
    pub(super) states: Vec<usize>,
    /// Node indices of the flow sources, in input order.
    pub(super) inputs: Vec<usize>,
    pub(super) width: usize,
}

pub(super) fn propagate(
    model: &BondGraphModel,
    causality: &CausalAssignment,
) -> Result<BondExpressions, DeriveError> {
    let states = model.capacitances();
    let inputs = model.flow_sources();
    if states.is_empty() {
        return Err(DeriveError::NoStates);
    }
    let nx = states.len();
    let width = nx + inputs.len();

    let mut efforts: Vec<Option<LinExpr>> = vec![None; model.bonds.len()];
    let mut flows: Vec<Option<LinExpr>> = vec![None; model.bonds.len()];

    // Seeds: capacitance bonds carry the state as effort, source bonds
    // carry the input as flow (signed along the bond arrow).
    for (b, bond) in model.bonds.iter().enumerate() {
        for node in [bond.tail, bond.head] {
            match model.nodes[node].element_kind() {
                Some(ElementKind::Capacitance) => {
                    let i = states.iter().position(|&s| s == node).unwrap();
                    efforts[b] = Some(LinExpr::unit(width, i));
                }
                Some(ElementKind::FlowSource) => {
                    let j = inputs.iter().position(|&s| s == node).unwrap();
                    // Positive source output flows away from the element.
                    let sign = if bond.tail == node { 1.0 } else { -1.0 };
                    flows[b] = Some(LinExpr::unit(width, nx + j).scaled(sign));
                }
                _ => {}
            }
        }
    }

    let junctions: Vec<usize> = (0..model.nodes.len())
        .filter(|&i| model.nodes[i].junction_kind().is_some())
        .collect();

    loop {
        let mut progressed = false;

        // Resistance laws, in the orientation causality picked.
        for (b, bond) in model.bonds.iter().enumerate() {
            for node in [bond.tail, bond.head] {
                if model.nodes[node].element_kind() != Some(ElementKind::Resistance) {
                    continue;
                }
                let super::Node::Element { value: r, .. } = &model.nodes[node] else {
                    unreachable!()
                };
                // Power flows into the element when the arrow points at it.
                let sign = if bond.head == node { 1.0 } else { -1.0 };
                if causality.delivers_effort_to(b, node) {
                    // Conductance causality: flow = ±effort / R.
                    if flows[b].is_none() {
                        if let Some(e) = &efforts[b] {
                            flows[b] = Some(e.scaled(sign / r));
                            progressed = true;
                        }
                    }
                } else if efforts[b].is_none() {
                    // Resistance causality: effort = ±R · flow.
                    if let Some(f) = &flows[b] {
                        efforts[b] = Some(f.scaled(sign * r));
                        progressed = true;
                    }
                }
            }
        }

        // Junction balances.
        for &j in &junctions {
            let kind = model.nodes[j].junction_kind().unwrap();
            let incident = model.bonds_at(j);
            match kind {
                JunctionKind::Zero => {
                    // Common effort: copy any known effort to the rest.
                    if let Some(expr) = incident.iter().find_map(|&b| efforts[b].clone()) {
                        for &b in &incident {
                            if efforts[b].is_none() {
                                efforts[b] = Some(expr.clone());
                                progressed = true;
                            }
                        }
                    }
                    // Flow balance: Σ ±flow = 0 solves one unknown.
                    solve_balance(model, &incident, j, &mut flows, width, &mut progressed);
                }
                JunctionKind::One => {
                    // Common flow: copy any known flow to the rest.
                    if let Some(expr) = incident.iter().find_map(|&b| flows[b].clone()) {
                        for &b in &incident {
                            if flows[b].is_none() {
                                flows[b] = Some(expr.clone());
                                progressed = true;
                            }
                        }
                    }
                    // Effort balance: Σ ±effort = 0 solves one unknown.
                    solve_balance(model, &incident, j, &mut efforts, width, &mut progressed);
                }
            }
        }

        if !progressed {
            break;
        }
    }

    let unwrap_all = |table: Vec<Option<LinExpr>>,
                      quantity: &'static str|
     -> Result<Vec<LinExpr>, DeriveError> {
        table
            .into_iter()
            .enumerate()
            .map(|(b, expr)| {
                expr.ok_or_else(|| DeriveError::Unresolved {
                    quantity,
                    tail: model.nodes[model.bonds[b].tail].name().to_string(),
                    head: model.nodes[model.bonds[b].head].name().to_string(),
                })
            })
            .collect()
    };

    Ok(BondExpressions {
        efforts: unwrap_all(efforts, "effort")?,
        flows: unwrap_all(flows, "flow")?,
        states,
        inputs,
        width,
    })
}

/// If exactly one summand of Σ ±q = 0 over `incident` is unknown, solve
/// for it.
fn solve_balance(
    model: &BondGraphModel,
    incident: &[usize],
    junction: usize,
    table: &mut [Option<LinExpr>],
    width: usize,
    progressed: &mut bool,
) {
    let unknown: Vec<usize> = incident
        .iter()
        .copied()
        .filter(|&b| table[b].is_none())
        .collect();
    if unknown.len() != 1 {
        return;
    }
    let target = unknown[0];
    let mut sum = LinExpr::zero(width);
    for &b in incident {
        if b == target {
            continue;
        }
        let sign = model.bonds[b].orientation(junction);
        sum.add_scaled(table[b].as_ref().unwrap(), sign);
    }
    let target_sign = model.bonds[target].orientation(junction);
    table[target] = Some(sum.scaled(-1.0 / target_sign));
    *progressed = true;
}

pub fn derive_state_equations(
    model: &BondGraphModel,
    causality: &CausalAssignment,
) -> Result<StateSpace, DeriveError> {
    let exprs = propagate(model, causality)?;
    let nx = exprs.states.len();
    let nu = exprs.inputs.len();

    // A and B from the capacitance flow balances.
    let mut ab = DMatrix::zeros(nx, exprs.width);
    for (i, &cnode) in exprs.states.iter().enumerate() {
        let b = model.bonds_at(cnode)[0];
        let bond = model.bonds[b];
        let super::Node::Element { value: c, .. } = &model.nodes[cnode] else {
            unreachable!()
        };
        let into = bond.orientation(cnode);
        for (k, coef) in exprs.flows[b].0.iter().enumerate() {
            ab[(i, k)] = into * coef / c;
        }
    }

    // C and D from the sensor reads.
    let mut cd = DMatrix::zeros(model.sensors.len(), exprs.width);
    for (s, sensor) in model.sensors.iter().enumerate() {
        let b = model.bonds_at(sensor.junction)[0];
        let expr = match sensor.kind {
            SensorKind::Effort => &exprs.efforts[b],
            SensorKind::Flow => &exprs.flows[b],
        };
        for (k, coef) in expr.0.iter().enumerate() {
            cd[(s, k)] = *coef;
        }
    }

    Ok(StateSpace {
        a: ab.columns(0, nx).into_owned(),
        b: ab.columns(nx, nu).into_owned(),
        c: cd.columns(0, nx).into_owned(),
        d: cd.columns(nx, nu).into_owned(),
        state_names: exprs
            .states
            .iter()
            .map(|&n| model.nodes[n].name().to_string())
            .collect(),
        input_names: exprs
            .inputs
            .iter()
            .map(|&n| model.nodes[n].name().to_string())
            .collect(),
        output_names: model.sensors.iter().map(|s| s.name.clone()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bondgraph::{assign_causality, three_tank, TankParams};
    use approx::assert_relative_eq;

    fn unit_rig() -> StateSpace {
        rig_with(TankParams::default())
    }

    fn rig_with(params: TankParams) -> StateSpace {
        let model = three_tank(&params).unwrap();
        let causality = assign_causality(&model).unwrap();
        derive_state_equations(&model, &causality).unwrap()
    }

    #[test]
    fn unit_matrices_match_hand_derivation() {
        let ss = unit_rig();
        let a = DMatrix::from_row_slice(3, 3, &[-1.0, 1.0, 0.0, 1.0, -3.0, 1.0, 0.0, 1.0, -1.0]);
        let b = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let c = DMatrix::from_row_slice(
            5,
            3,
            &[
                1.0, 0.0, 0.0, //
                0.0, 1.0, 0.0, //
                0.0, 0.0, 1.0, //
                1.0, -1.0, 0.0, //
                0.0, -1.0, 1.0,
            ],
        );
        assert_relative_eq!(ss.a, a, epsilon = 1e-12);
        assert_relative_eq!(ss.b, b, epsilon = 1e-12);
        assert_relative_eq!(ss.c, c, epsilon = 1e-12);
        assert_eq!(ss.d, DMatrix::zeros(5, 2));
        assert_eq!(ss.state_names, vec!["C1", "C2", "C3"]);
        assert_eq!(ss.input_names, vec!["Msf1", "Msf2"]);
        assert_eq!(ss.output_names, vec!["De1", "De2", "De3", "Df1", "Df2"]);
    }

    #[test]
    fn general_parameters_follow_the_physics() {
        let params = TankParams {
            c1: 2.0,
            c2: 3.0,
            c3: 1.5,
            r0: 0.5,
            r1: 2.0,
            r2: 4.0,
        };
        let ss = rig_with(params);
        // dp1/dt = (u1 − (p1−p2)/R1)/C1, etc.
        assert_relative_eq!(ss.a[(0, 0)], -1.0 / (2.0 * 2.0));
        assert_relative_eq!(ss.a[(0, 1)], 1.0 / (2.0 * 2.0));
        assert_relative_eq!(ss.a[(0, 2)], 0.0);
        assert_relative_eq!(ss.a[(1, 0)], 1.0 / (2.0 * 3.0));
        assert_relative_eq!(ss.a[(1, 1)], -(1.0 / 2.0 + 1.0 / 4.0 + 1.0 / 0.5) / 3.0);
        assert_relative_eq!(ss.a[(1, 2)], 1.0 / (4.0 * 3.0));
        assert_relative_eq!(ss.a[(2, 1)], 1.0 / (4.0 * 1.5));
        assert_relative_eq!(ss.a[(2, 2)], -1.0 / (4.0 * 1.5));
        assert_relative_eq!(ss.b[(0, 0)], 1.0 / 2.0);
        assert_relative_eq!(ss.b[(2, 1)], 1.0 / 1.5);
        // Valve sensor rows scale with conductance.
        assert_relative_eq!(ss.c[(3, 0)], 1.0 / 2.0);
        assert_relative_eq!(ss.c[(3, 1)], -1.0 / 2.0);
        assert_relative_eq!(ss.c[(4, 1)], -1.0 / 4.0);
        assert_relative_eq!(ss.c[(4, 2)], 1.0 / 4.0);
    }

    #[test]
    fn steady_state_for_reference_inputs() {
        let ss = unit_rig();
        let x = ss.steady_state(&[1.0, 1.0]).unwrap();
        assert_relative_eq!(x[0], 3.0, epsilon = 1e-12);
        assert_relative_eq!(x[1], 2.0, epsilon = 1e-12);
        assert_relative_eq!(x[2], 3.0, epsilon = 1e-12);
        let y = ss.steady_outputs(&[1.0, 1.0]).unwrap();
        assert_relative_eq!(y[3], 1.0, epsilon = 1e-12);
        assert_relative_eq!(y[4], 1.0, epsilon = 1e-12);

        // Raising the first pump by 20% lifts tanks 1 and 2 but leaves the
        // second valve's drop unchanged.
        let x = ss.steady_state(&[1.2, 1.0]).unwrap();
        assert_relative_eq!(x[0], 3.4, epsilon = 1e-12);
        assert_relative_eq!(x[1], 2.2, epsilon = 1e-12);
        assert_relative_eq!(x[2], 3.2, epsilon = 1e-12);
    }

    #[test]
    fn dc_gain_columns() {
        let ss = unit_rig();
        let g = ss.dc_gain().unwrap();
        let expected = DMatrix::from_row_slice(
            5,
            2,
            &[
                2.0, 1.0, //
                1.0, 1.0, //
                1.0, 2.0, //
                1.0, 0.0, //
                0.0, 1.0,
            ],
        );
        assert_relative_eq!(g, expected, epsilon = 1e-12);
    }

    #[test]
    fn rig_is_stable() {
        let ss = unit_rig();
        assert!(ss.is_hurwitz());
        let mut eigs: Vec<f64> = ss.a.complex_eigenvalues().iter().map(|e| e.re).collect();
        eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_relative_eq!(eigs[0], -2.0 - 3.0_f64.sqrt(), epsilon = 1e-9);
        assert_relative_eq!(eigs[1], -1.0, epsilon = 1e-9);
        assert_relative_eq!(eigs[2], -2.0 + 3.0_f64.sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn input_size_checked() {
        let ss = unit_rig();
        assert!(matches!(
            ss.steady_state(&[1.0]),
            Err(DeriveError::InputSize { .. })
        ));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn params() -> impl Strategy<Value = TankParams> {
            (
                0.1f64..10.0,
                0.1f64..10.0,
                0.1f64..10.0,
                0.1f64..10.0,
                0.1f64..10.0,
                0.1f64..10.0,
            )
                .prop_map(|(c1, c2, c3, r0, r1, r2)| TankParams {
                    c1,
                    c2,
                    c3,
                    r0,
                    r1,
                    r2,
                })
        }

        proptest! {
            #[test]
            fn always_stable_and_consistent(p in params(), u1 in 0.1f64..5.0, u2 in 0.1f64..5.0) {
                let ss = rig_with(p);
                prop_assert!(ss.is_hurwitz());
                let x = ss.steady_state(&[u1, u2]).unwrap();
                let residual = &ss.a * &x + &ss.b * DVector::from_column_slice(&[u1, u2]);
                prop_assert!(residual.amax() < 1e-9);
                // Mass balance at equilibrium: outlet flow equals pumping.
                let q0 = x[1] / p.r0;
                prop_assert!((q0 - (u1 + u2)).abs() < 1e-9);
            }
        }
    }
}
