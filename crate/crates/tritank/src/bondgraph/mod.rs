//! Bond-graph model of the rig and everything derived from it.
//!
//! A model is a set of one-port elements (flow sources, capacitances,
//! resistances) wired to 0- and 1-junctions through directed power bonds,
//! plus effort/flow sensors attached to junctions.  From a causally
//! assigned model the submodules derive the linear state-space equations
//! ([`derive_state_equations`]) and the signed influence graph between
//! measured variables ([`derive_influence_graph`]).

mod causality;
mod derive;
mod influence;
mod parse;

pub use causality::{assign_causality, CausalAssignment, CausalityError};
pub use derive::{derive_state_equations, DeriveError, StateSpace};
pub use influence::{derive_influence_graph, InfluenceArc, InfluenceError, InfluenceGraph};
pub use parse::{parse_model, ModelParseError};

use serde::Deserialize;
use thiserror::Error;

/// Physical parameters of the three-tank rig: tank capacitances and valve
/// resistances.  `r0` is the outlet valve draining tank 2.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TankParams {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub r0: f64,
    pub r1: f64,
    pub r2: f64,
}

impl Default for TankParams {
    fn default() -> Self {
        TankParams {
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            r0: 1.0,
            r1: 1.0,
            r2: 1.0,
        }
    }
}

impl TankParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, v) in [
            ("c1", self.c1),
            ("c2", self.c2),
            ("c3", self.c3),
            ("r0", self.r0),
            ("r1", self.r1),
            ("r2", self.r2),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(ModelError::BadParameter {
                    name: name.to_string(),
                    value: v,
                });
            }
        }
        Ok(())
    }
}

/// One-port element kinds supported by the modelling layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    /// `Sf`: imposes a flow, accepts whatever effort the net returns.
    FlowSource,
    /// `C`: energy storage; its effort is a state variable.
    Capacitance,
    /// `R`: dissipation; relates effort and flow algebraically.
    Resistance,
}

impl ElementKind {
    fn label(self) -> &'static str {
        match self {
            ElementKind::FlowSource => "Sf",
            ElementKind::Capacitance => "C",
            ElementKind::Resistance => "R",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JunctionKind {
    /// Common-effort junction; flows sum to zero.
    Zero,
    /// Common-flow junction; efforts sum to zero.
    One,
}

#[derive(Debug, Clone)]
pub enum Node {
    Element {
        kind: ElementKind,
        name: String,
        /// Capacitance or resistance value; unused for sources.
        value: f64,
    },
    Junction {
        kind: JunctionKind,
        name: String,
    },
}

impl Node {
    pub fn name(&self) -> &str {
        match self {
            Node::Element { name, .. } | Node::Junction { name, .. } => name,
        }
    }

    pub fn junction_kind(&self) -> Option<JunctionKind> {
        match self {
            Node::Junction { kind, .. } => Some(*kind),
            Node::Element { .. } => None,
        }
    }

    pub fn element_kind(&self) -> Option<ElementKind> {
        match self {
            Node::Element { kind, .. } => Some(*kind),
            Node::Junction { .. } => None,
        }
    }
}

/// A directed power bond.  The arrow (tail → head) fixes the sign
/// convention: positive flow and positive power move from tail to head.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bond {
    pub tail: usize,
    pub head: usize,
}

impl Bond {
    /// The endpoint opposite `node`.
    pub fn partner(&self, node: usize) -> usize {
        if self.tail == node {
            self.head
        } else {
            self.tail
        }
    }

    pub fn touches(&self, node: usize) -> bool {
        self.tail == node || self.head == node
    }

    /// +1 if the bond points into `node`, −1 if it points out.
    pub fn orientation(&self, node: usize) -> f64 {
        if self.head == node {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SensorKind {
    /// Reads the common effort of a 0-junction.
    Effort,
    /// Reads the common flow of a 1-junction.
    Flow,
}

#[derive(Debug, Clone)]
pub struct Sensor {
    pub name: String,
    pub kind: SensorKind,
    pub junction: usize,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("duplicate node or sensor name `{0}`")]
    DuplicateName(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("element `{name}` must have exactly one bond, found {found}")]
    ElementBondCount { name: String, found: usize },
    #[error("bond endpoints must include at least one junction (`{tail}` -- `{head}`)")]
    BondBetweenElements { tail: String, head: String },
    #[error("{kind} sensor `{name}` must sit on a {expected} junction")]
    SensorPlacement {
        kind: &'static str,
        name: String,
        expected: &'static str,
    },
    #[error("sensor `{0}` must be attached to a junction, not an element")]
    SensorOnElement(String),
    #[error("junction `{0}` has no bonds")]
    IsolatedJunction(String),
    #[error("parameter `{name}` must be finite and positive, got {value}")]
    BadParameter { name: String, value: f64 },
}

/// A bond-graph model under construction or ready for causal analysis.
#[derive(Debug, Clone, Default)]
pub struct BondGraphModel {
    pub nodes: Vec<Node>,
    pub bonds: Vec<Bond>,
    pub sensors: Vec<Sensor>,
}

impl BondGraphModel {
    pub fn new() -> Self {
        Self::default()
    }

    fn add_node(&mut self, node: Node) -> Result<usize, ModelError> {
        if self.lookup(node.name()).is_some() {
            return Err(ModelError::DuplicateName(node.name().to_string()));
        }
        self.nodes.push(node);
        Ok(self.nodes.len() - 1)
    }

    pub fn add_flow_source(&mut self, name: &str) -> Result<usize, ModelError> {
        self.add_node(Node::Element {
            kind: ElementKind::FlowSource,
            name: name.to_string(),
            value: 0.0,
        })
    }

    pub fn add_capacitance(&mut self, name: &str, value: f64) -> Result<usize, ModelError> {
        if !value.is_finite() || value <= 0.0 {
            return Err(ModelError::BadParameter {
                name: name.to_string(),
                value,
            });
        }
        self.add_node(Node::Element {
            kind: ElementKind::Capacitance,
            name: name.to_string(),
            value,
        })
    }

    pub fn add_resistance(&mut self, name: &str, value: f64) -> Result<usize, ModelError> {
        if !value.is_finite() || value <= 0.0 {
            return Err(ModelError::BadParameter {
                name: name.to_string(),
                value,
            });
        }
        self.add_node(Node::Element {
            kind: ElementKind::Resistance,
            name: name.to_string(),
            value,
        })
    }

    pub fn add_zero_junction(&mut self, name: &str) -> Result<usize, ModelError> {
        self.add_node(Node::Junction {
            kind: JunctionKind::Zero,
            name: name.to_string(),
        })
    }

    pub fn add_one_junction(&mut self, name: &str) -> Result<usize, ModelError> {
        self.add_node(Node::Junction {
            kind: JunctionKind::One,
            name: name.to_string(),
        })
    }

    pub fn add_bond(&mut self, tail: usize, head: usize) -> usize {
        self.bonds.push(Bond { tail, head });
        self.bonds.len() - 1
    }

    pub fn add_effort_sensor(&mut self, name: &str, junction: usize) -> Result<(), ModelError> {
        self.add_sensor(name, SensorKind::Effort, junction)
    }

    pub fn add_flow_sensor(&mut self, name: &str, junction: usize) -> Result<(), ModelError> {
        self.add_sensor(name, SensorKind::Flow, junction)
    }

    fn add_sensor(
        &mut self,
        name: &str,
        kind: SensorKind,
        junction: usize,
    ) -> Result<(), ModelError> {
        if self.lookup(name).is_some() || self.sensors.iter().any(|s| s.name == name) {
            return Err(ModelError::DuplicateName(name.to_string()));
        }
        match (kind, self.nodes[junction].junction_kind()) {
            (SensorKind::Effort, Some(JunctionKind::Zero))
            | (SensorKind::Flow, Some(JunctionKind::One)) => {}
            (_, None) => return Err(ModelError::SensorOnElement(name.to_string())),
            (SensorKind::Effort, _) => {
                return Err(ModelError::SensorPlacement {
                    kind: "effort",
                    name: name.to_string(),
                    expected: "0",
                })
            }
            (SensorKind::Flow, _) => {
                return Err(ModelError::SensorPlacement {
                    kind: "flow",
                    name: name.to_string(),
                    expected: "1",
                })
            }
        }
        self.sensors.push(Sensor {
            name: name.to_string(),
            kind,
            junction,
        });
        Ok(())
    }

    /// Node index by name.
    pub fn lookup(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name() == name)
    }

    pub fn bonds_at(&self, node: usize) -> Vec<usize> {
        (0..self.bonds.len())
            .filter(|&b| self.bonds[b].touches(node))
            .collect()
    }

    /// Capacitance elements in declaration order; these become the states.
    pub fn capacitances(&self) -> Vec<usize> {
        self.nodes_of_kind(ElementKind::Capacitance)
    }

    /// Flow sources in declaration order; these become the inputs.
    pub fn flow_sources(&self) -> Vec<usize> {
        self.nodes_of_kind(ElementKind::FlowSource)
    }

    fn nodes_of_kind(&self, kind: ElementKind) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| self.nodes[i].element_kind() == Some(kind))
            .collect()
    }

    /// Structural sanity checks shared by the builder API and the parser.
    pub fn validate(&self) -> Result<(), ModelError> {
        for (i, node) in self.nodes.iter().enumerate() {
            match node {
                Node::Element { name, .. } => {
                    let count = self.bonds_at(i).len();
                    if count != 1 {
                        return Err(ModelError::ElementBondCount {
                            name: name.clone(),
                            found: count,
                        });
                    }
                }
                Node::Junction { name, .. } => {
                    if self.bonds_at(i).is_empty() {
                        return Err(ModelError::IsolatedJunction(name.clone()));
                    }
                }
            }
        }
        for bond in &self.bonds {
            let tail_junction = self.nodes[bond.tail].junction_kind().is_some();
            let head_junction = self.nodes[bond.head].junction_kind().is_some();
            if !tail_junction && !head_junction {
                return Err(ModelError::BondBetweenElements {
                    tail: self.nodes[bond.tail].name().to_string(),
                    head: self.nodes[bond.head].name().to_string(),
                });
            }
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        let mut out = String::new();
        for node in &self.nodes {
            match node {
                Node::Element { kind, name, value } => {
                    if *kind == ElementKind::FlowSource {
                        out.push_str(&format!("{} {}\n", kind.label(), name));
                    } else {
                        out.push_str(&format!("{} {} = {}\n", kind.label(), name, value));
                    }
                }
                Node::Junction { kind, name } => {
                    let label = match kind {
                        JunctionKind::Zero => "0-junction",
                        JunctionKind::One => "1-junction",
                    };
                    out.push_str(&format!("{label} {name}\n"));
                }
            }
        }
        for bond in &self.bonds {
            out.push_str(&format!(
                "bond {} -> {}\n",
                self.nodes[bond.tail].name(),
                self.nodes[bond.head].name()
            ));
        }
        for sensor in &self.sensors {
            let label = match sensor.kind {
                SensorKind::Effort => "effort",
                SensorKind::Flow => "flow",
            };
            out.push_str(&format!(
                "{label} sensor {} @ {}\n",
                sensor.name,
                self.nodes[sensor.junction].name()
            ));
        }
        out
    }
}

/// Builds the canonical three-tank rig.
///
/// Tanks 1 and 3 are fed by the pumps `Msf1`/`Msf2` and drain through the
/// valves `R1`/`R2` into tank 2, which empties through the outlet `R0`.
/// Every tank pressure is measured (`De1..De3`), as are both inter-tank
/// valve flows (`Df1`, `Df2`); the outlet flow is unmeasured.
pub fn three_tank(params: &TankParams) -> Result<BondGraphModel, ModelError> {
    params.validate()?;
    let mut m = BondGraphModel::new();

    let msf1 = m.add_flow_source("Msf1")?;
    let msf2 = m.add_flow_source("Msf2")?;
    let c1 = m.add_capacitance("C1", params.c1)?;
    let c2 = m.add_capacitance("C2", params.c2)?;
    let c3 = m.add_capacitance("C3", params.c3)?;
    let r0 = m.add_resistance("R0", params.r0)?;
    let r1 = m.add_resistance("R1", params.r1)?;
    let r2 = m.add_resistance("R2", params.r2)?;

    let tank1 = m.add_zero_junction("tank1")?;
    let tank2 = m.add_zero_junction("tank2")?;
    let tank3 = m.add_zero_junction("tank3")?;
    let valve1 = m.add_one_junction("valve1")?;
    let valve2 = m.add_one_junction("valve2")?;
    let outlet = m.add_one_junction("outlet")?;

    m.add_bond(msf1, tank1);
    m.add_bond(tank1, c1);
    m.add_bond(tank1, valve1);
    m.add_bond(valve1, r1);
    m.add_bond(valve1, tank2);
    m.add_bond(tank2, c2);
    m.add_bond(msf2, tank3);
    m.add_bond(tank3, c3);
    m.add_bond(tank3, valve2);
    m.add_bond(valve2, r2);
    m.add_bond(valve2, tank2);
    m.add_bond(tank2, outlet);
    m.add_bond(outlet, r0);

    m.add_effort_sensor("De1", tank1)?;
    m.add_effort_sensor("De2", tank2)?;
    m.add_effort_sensor("De3", tank3)?;
    m.add_flow_sensor("Df1", valve1)?;
    m.add_flow_sensor("Df2", valve2)?;

    m.validate()?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_tank_shape() {
        let m = three_tank(&TankParams::default()).unwrap();
        assert_eq!(m.nodes.len(), 14);
        assert_eq!(m.bonds.len(), 13);
        assert_eq!(m.sensors.len(), 5);
        assert_eq!(m.capacitances().len(), 3);
        assert_eq!(m.flow_sources().len(), 2);
        m.validate().unwrap();
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut m = BondGraphModel::new();
        m.add_flow_source("Msf1").unwrap();
        assert!(matches!(
            m.add_capacitance("Msf1", 1.0),
            Err(ModelError::DuplicateName(_))
        ));
    }

    #[test]
    fn sensor_placement_enforced() {
        let mut m = BondGraphModel::new();
        let j0 = m.add_zero_junction("t").unwrap();
        let j1 = m.add_one_junction("v").unwrap();
        assert!(m.add_effort_sensor("De1", j0).is_ok());
        assert!(matches!(
            m.add_effort_sensor("De2", j1),
            Err(ModelError::SensorPlacement { .. })
        ));
        assert!(matches!(
            m.add_flow_sensor("Df1", j0),
            Err(ModelError::SensorPlacement { .. })
        ));
    }

    #[test]
    fn validation_catches_dangling_elements() {
        let mut m = BondGraphModel::new();
        m.add_capacitance("C1", 1.0).unwrap();
        m.add_zero_junction("t1").unwrap();
        let err = m.validate().unwrap_err();
        assert!(matches!(err, ModelError::ElementBondCount { .. }));
    }

    #[test]
    fn nonpositive_parameters_rejected() {
        let params = TankParams {
            r1: 0.0,
            ..TankParams::default()
        };
        assert!(three_tank(&params).is_err());
        let mut m = BondGraphModel::new();
        assert!(m.add_resistance("R1", -2.0).is_err());
    }
}
