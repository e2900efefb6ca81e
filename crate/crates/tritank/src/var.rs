//! Named variables and local constraints of the three-tank rig.
//!
//! Everything downstream — signature rows, conflict sets, influence arcs,
//! fault templates — speaks in terms of these two enums, so their
//! declaration order doubles as the canonical display and tie-breaking
//! order: supply inputs first, then pressure sensors, then flow sensors.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// A system variable: an unmeasured supply input (`Msf*`) or a measured
/// signal (`De*` tank pressures, `Df*` valve flows).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variable {
    /// Pump feeding tank 1 (unmeasured flow source).
    Msf1,
    /// Pump feeding tank 3 (unmeasured flow source).
    Msf2,
    /// Pressure sensor on tank 1.
    De1,
    /// Pressure sensor on tank 2.
    De2,
    /// Pressure sensor on tank 3.
    De3,
    /// Flow sensor on the valve between tanks 1 and 2.
    Df1,
    /// Flow sensor on the valve between tanks 3 and 2.
    Df2,
}

impl Variable {
    pub const ALL: [Variable; 7] = [
        Variable::Msf1,
        Variable::Msf2,
        Variable::De1,
        Variable::De2,
        Variable::De3,
        Variable::Df1,
        Variable::Df2,
    ];

    /// The five measured signals, in measurement-vector order.
    pub const MEASURED: [Variable; 5] = [
        Variable::De1,
        Variable::De2,
        Variable::De3,
        Variable::Df1,
        Variable::Df2,
    ];

    /// The two unmeasured supply inputs, in input-vector order.
    pub const INPUTS: [Variable; 2] = [Variable::Msf1, Variable::Msf2];

    pub fn name(self) -> &'static str {
        match self {
            Variable::Msf1 => "Msf1",
            Variable::Msf2 => "Msf2",
            Variable::De1 => "De1",
            Variable::De2 => "De2",
            Variable::De3 => "De3",
            Variable::Df1 => "Df1",
            Variable::Df2 => "Df2",
        }
    }

    pub fn is_input(self) -> bool {
        matches!(self, Variable::Msf1 | Variable::Msf2)
    }

    pub fn is_measured(self) -> bool {
        !self.is_input()
    }

    /// Position within the measurement vector, or `None` for inputs.
    pub fn measured_index(self) -> Option<usize> {
        Variable::MEASURED.iter().position(|&v| v == self)
    }

    /// Position within the input vector, or `None` for measured signals.
    pub fn input_index(self) -> Option<usize> {
        Variable::INPUTS.iter().position(|&v| v == self)
    }

    /// For a supply input, the balance constraint of the tank it feeds.
    pub fn balance_constraint(self) -> Option<Constraint> {
        match self {
            Variable::Msf1 => Some(Constraint::TankBalance1),
            Variable::Msf2 => Some(Constraint::TankBalance3),
            _ => None,
        }
    }

    /// For a supply input, the valve constraint adjacent to the fed tank.
    pub fn adjacent_flow_constraint(self) -> Option<Constraint> {
        match self {
            Variable::Msf1 => Some(Constraint::ValveFlow1),
            Variable::Msf2 => Some(Constraint::ValveFlow2),
            _ => None,
        }
    }

    /// Constraints this variable appears in (derivative terms included).
    pub fn signature(self) -> BTreeSet<Constraint> {
        Constraint::ALL
            .iter()
            .copied()
            .filter(|c| c.members().contains(&self))
            .collect()
    }

    /// Constraints this variable still appears in once derivatives have
    /// settled; a steady measurement window can only implicate these.
    pub fn steady_signature(self) -> BTreeSet<Constraint> {
        Constraint::ALL
            .iter()
            .copied()
            .filter(|c| c.steady_members().contains(&self))
            .collect()
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown variable `{0}` (expected one of Msf1, Msf2, De1, De2, De3, Df1, Df2)")]
pub struct UnknownVariable(pub String);

impl FromStr for Variable {
    type Err = UnknownVariable;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variable::ALL
            .iter()
            .copied()
            .find(|v| v.name() == s)
            .ok_or_else(|| UnknownVariable(s.to_string()))
    }
}

/// A local consistency test over one component's measurements.
///
/// Each constraint is named after the measurement whose component it
/// watches: `r_De1` is the balance of tank 1, `r_Df1` the valve law
/// between tanks 1 and 2, and so on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Constraint {
    /// `r_De1`: C1·d(De1)/dt = u1 − Df1.
    TankBalance1,
    /// `r_De2`: C2·d(De2)/dt = Df1 + Df2 − De2/R0.
    TankBalance2,
    /// `r_De3`: C3·d(De3)/dt = u2 − Df2.
    TankBalance3,
    /// `r_Df1`: Df1 = (De1 − De2)/R1.
    ValveFlow1,
    /// `r_Df2`: Df2 = (De3 − De2)/R2.
    ValveFlow2,
}

impl Constraint {
    pub const ALL: [Constraint; 5] = [
        Constraint::TankBalance1,
        Constraint::TankBalance2,
        Constraint::TankBalance3,
        Constraint::ValveFlow1,
        Constraint::ValveFlow2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Constraint::TankBalance1 => "r_De1",
            Constraint::TankBalance2 => "r_De2",
            Constraint::TankBalance3 => "r_De3",
            Constraint::ValveFlow1 => "r_Df1",
            Constraint::ValveFlow2 => "r_Df2",
        }
    }

    /// Position within the residual vector.
    pub fn index(self) -> usize {
        Constraint::ALL.iter().position(|&c| c == self).unwrap()
    }

    /// Every variable appearing in the constraint expression, including
    /// through the time-derivative term.
    pub fn members(self) -> &'static [Variable] {
        match self {
            Constraint::TankBalance1 => &[Variable::Msf1, Variable::De1, Variable::Df1],
            Constraint::TankBalance2 => &[Variable::De2, Variable::Df1, Variable::Df2],
            Constraint::TankBalance3 => &[Variable::Msf2, Variable::De3, Variable::Df2],
            Constraint::ValveFlow1 => &[Variable::De1, Variable::De2, Variable::Df1],
            Constraint::ValveFlow2 => &[Variable::De2, Variable::De3, Variable::Df2],
        }
    }

    /// Variables still present once the derivative term has settled to
    /// zero.  Effort-sensor biases drop out of their own tank balance in
    /// steady operation because they only enter it through d(De·)/dt.
    pub fn steady_members(self) -> &'static [Variable] {
        match self {
            Constraint::TankBalance1 => &[Variable::Msf1, Variable::Df1],
            Constraint::TankBalance2 => &[Variable::De2, Variable::Df1, Variable::Df2],
            Constraint::TankBalance3 => &[Variable::Msf2, Variable::Df2],
            Constraint::ValveFlow1 => &[Variable::De1, Variable::De2, Variable::Df1],
            Constraint::ValveFlow2 => &[Variable::De2, Variable::De3, Variable::Df2],
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A set of fault candidates, ordered canonically.
pub type FaultSet = BTreeSet<Variable>;

/// Convenience constructor for literal fault sets.
pub fn fault_set(vars: &[Variable]) -> FaultSet {
    vars.iter().copied().collect()
}

/// Renders a fault set as `{Msf1, Df2}` (empty set as `{}`).
pub fn format_set(set: &FaultSet) -> String {
    let inner: Vec<&str> = set.iter().map(|v| v.name()).collect();
    format!("{{{}}}", inner.join(", "))
}

/// Renders a list of candidate sets as `{A} | {B} | {C}`.
pub fn format_sets(sets: &[FaultSet]) -> String {
    let parts: Vec<String> = sets.iter().map(format_set).collect();
    parts.join(" | ")
}
