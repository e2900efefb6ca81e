//! Builds the signed influence graph between measured signals and pump
//! sources.
//!
//! Nodes are the rig's observable quantities (pump commands, pressure
//! sensors, valve flow sensors).  An arc `a → b` with gain `g` means a
//! sustained deviation on `a` drives `b` at rate (for pressures) or
//! proportion (for flows) `g`, holding other measured signals fixed.
//! Propagation stops at measured signals: a measured valve flow feeding a
//! tank appears as its own node, not as the pressures behind it.
//! Unmeasured flows (such as an outlet drain) are expanded through the
//! pressures that drive them; expansion back onto the destination's own
//! pressure is a self-loop and is dropped.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use super::derive::{propagate, DeriveError};
use super::{BondGraphModel, CausalAssignment, ElementKind, Node, SensorKind};
use crate::var::Variable;

#[derive(Debug, Error)]
pub enum InfluenceError {
    #[error(transparent)]
    Derive(#[from] DeriveError),
    #[error("sensor `{0}` is not a recognised rig signal name")]
    UnknownSensor(String),
    #[error("source `{0}` is not a recognised rig signal name")]
    UnknownSource(String),
    #[error("pressure at junction `{0}` is unmeasured; arcs through it cannot be anchored")]
    UnmeasuredState(String),
}

/// One signed influence `from → to`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfluenceArc {
    pub from: Variable,
    pub to: Variable,
    pub gain: f64,
}

/// Signed directed graph over the rig's measured signals and sources.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceGraph {
    arcs: Vec<InfluenceArc>,
}

impl InfluenceGraph {
    pub fn new(mut arcs: Vec<InfluenceArc>) -> Self {
        arcs.sort_by(|x, y| (x.from, x.to).cmp(&(y.from, y.to)));
        InfluenceGraph { arcs }
    }

    pub fn arcs(&self) -> &[InfluenceArc] {
        &self.arcs
    }

    pub fn gain(&self, from: Variable, to: Variable) -> Option<f64> {
        self.arcs
            .iter()
            .find(|a| a.from == from && a.to == to)
            .map(|a| a.gain)
    }

    /// Upstream neighbours of `v` with their gains, in canonical order.
    pub fn predecessors(&self, v: Variable) -> Vec<(Variable, f64)> {
        self.arcs
            .iter()
            .filter(|a| a.to == v)
            .map(|a| (a.from, a.gain))
            .collect()
    }

    /// Downstream neighbours of `v` with their gains, in canonical order.
    pub fn successors(&self, v: Variable) -> Vec<(Variable, f64)> {
        self.arcs
            .iter()
            .filter(|a| a.from == v)
            .map(|a| (a.to, a.gain))
            .collect()
    }

    /// Every variable that appears on at least one arc, in canonical order.
    pub fn nodes(&self) -> Vec<Variable> {
        let mut set = std::collections::BTreeSet::new();
        for a in &self.arcs {
            set.insert(a.from);
            set.insert(a.to);
        }
        set.into_iter().collect()
    }

    /// Nodes with no incoming arc (the rig's root causes).
    pub fn sources(&self) -> Vec<Variable> {
        self.nodes()
            .into_iter()
            .filter(|&v| self.predecessors(v).is_empty())
            .collect()
    }

    /// Graphviz rendering.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph influence {\n    rankdir=LR;\n");
        for v in self.sources() {
            let _ = writeln!(out, "    \"{v}\" [shape=box];");
        }
        for a in &self.arcs {
            let _ = writeln!(
                out,
                "    \"{}\" -> \"{}\" [label=\"{:+.3}\"];",
                a.from, a.to, a.gain
            );
        }
        out.push_str("}\n");
        out
    }

    /// One `from -> to  gain` line per arc.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        for a in &self.arcs {
            let _ = writeln!(out, "{:5} -> {:4}  {:+.4}", a.from, a.to, a.gain);
        }
        out
    }
}

fn add_gain(
    gains: &mut BTreeMap<(Variable, Variable), f64>,
    from: Variable,
    to: Variable,
    gain: f64,
) {
    if from != to && gain != 0.0 {
        *gains.entry((from, to)).or_insert(0.0) += gain;
    }
}

pub fn derive_influence_graph(
    model: &BondGraphModel,
    causality: &CausalAssignment,
) -> Result<InfluenceGraph, InfluenceError> {
    let exprs = propagate(model, causality)?;
    let nx = exprs.states.len();

    // Input slots → source variables, by node name.
    let input_var: Vec<Variable> = exprs
        .inputs
        .iter()
        .map(|&n| {
            let name = model.nodes[n].name();
            name.parse::<Variable>()
                .ok()
                .filter(|v| v.is_input())
                .ok_or_else(|| InfluenceError::UnknownSource(name.to_string()))
        })
        .collect::<Result<_, _>>()?;

    // Sensor variables and junction → sensor lookups.
    let mut effort_sensor_at: BTreeMap<usize, Variable> = BTreeMap::new();
    let mut flow_sensor_at: BTreeMap<usize, Variable> = BTreeMap::new();
    for sensor in &model.sensors {
        let v = sensor
            .name
            .parse::<Variable>()
            .ok()
            .filter(|v| v.is_measured())
            .ok_or_else(|| InfluenceError::UnknownSensor(sensor.name.clone()))?;
        match sensor.kind {
            SensorKind::Effort => effort_sensor_at.insert(sensor.junction, v),
            SensorKind::Flow => flow_sensor_at.insert(sensor.junction, v),
        };
    }

    // State slots → the pressure sensor on the capacitance's junction,
    // when one exists.  Expansion through an unmeasured state is an error.
    let state_junction: Vec<usize> = exprs
        .states
        .iter()
        .map(|&cnode| {
            let b = model.bonds_at(cnode)[0];
            model.bonds[b].partner(cnode)
        })
        .collect();
    let state_var: Vec<Option<Variable>> = state_junction
        .iter()
        .map(|j| effort_sensor_at.get(j).copied())
        .collect();
    let anchored = |k: usize| -> Result<Variable, InfluenceError> {
        state_var[k].ok_or_else(|| {
            InfluenceError::UnmeasuredState(model.nodes[state_junction[k]].name().to_string())
        })
    };

    let mut gains: BTreeMap<(Variable, Variable), f64> = BTreeMap::new();

    // Expand a bond expression into arcs onto `to`, scaled by `k`.
    let expand = |gains: &mut BTreeMap<(Variable, Variable), f64>,
                  expr: &super::derive::LinExpr,
                  to: Variable,
                  k: f64,
                  skip_state: Option<usize>|
     -> Result<(), InfluenceError> {
        for (slot, &coef) in expr.0.iter().enumerate() {
            if coef == 0.0 {
                continue;
            }
            if slot < nx {
                if Some(slot) == skip_state {
                    continue;
                }
                add_gain(gains, anchored(slot)?, to, k * coef);
            } else {
                add_gain(gains, input_var[slot - nx], to, k * coef);
            }
        }
        Ok(())
    };

    for sensor in &model.sensors {
        let to = sensor.name.parse::<Variable>().unwrap();
        match sensor.kind {
            SensorKind::Flow => {
                // A measured flow responds instantly to the pressures and
                // sources entering its junction.
                let b = model.bonds_at(sensor.junction)[0];
                expand(&mut gains, &exprs.flows[b], to, 1.0, None)?;
            }
            SensorKind::Effort => {
                let junction = sensor.junction;
                // Find the capacitance that integrates this pressure.
                let cap = model.bonds_at(junction).into_iter().find_map(|b| {
                    let partner = model.bonds[b].partner(junction);
                    (model.nodes[partner].element_kind() == Some(ElementKind::Capacitance))
                        .then_some((b, partner))
                });
                let Some((cap_bond, cap_node)) = cap else {
                    // Pure algebraic pressure: expand its effort directly.
                    let b = model.bonds_at(junction)[0];
                    expand(&mut gains, &exprs.efforts[b], to, 1.0, None)?;
                    continue;
                };
                let Node::Element { value: c, .. } = &model.nodes[cap_node] else {
                    unreachable!()
                };
                let own_state = exprs.states.iter().position(|&s| s == cap_node);
                for b in model.bonds_at(junction) {
                    if b == cap_bond {
                        continue;
                    }
                    let scale = model.bonds[b].orientation(junction) / c;
                    let partner = model.bonds[b].partner(junction);
                    if let Some(&flow) = flow_sensor_at.get(&partner) {
                        // The neighbouring flow is measured: stop here.
                        add_gain(&mut gains, flow, to, scale);
                    } else {
                        // Unmeasured branch: push through to the pressures
                        // and sources behind it.
                        expand(&mut gains, &exprs.flows[b], to, scale, own_state)?;
                    }
                }
            }
        }
    }

    Ok(InfluenceGraph::new(
        gains
            .into_iter()
            .map(|((from, to), gain)| InfluenceArc { from, to, gain })
            .collect(),
    ))
}
