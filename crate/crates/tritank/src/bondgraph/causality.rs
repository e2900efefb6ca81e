//! Sequential causality assignment.
//!
//! Each bond gets a causal mark: the endpoint that *receives* the effort
//! signal (the other endpoint receives the flow).  Sources and storage
//! elements fix their own marks — a flow source always receives effort, an
//! integrally-causal capacitance always imposes it — and the junction
//! rules are propagated to a fixpoint:
//!
//! * 0-junction: exactly one bond delivers effort *to* the junction;
//! * 1-junction: exactly one bond receives effort *from* the junction
//!   (its partner determines the common flow).
//!
//! Resistances are flexible and end up in whichever orientation the
//! junctions force.  Contradictions (e.g. two flow sources feeding one
//! 1-junction) surface as structured errors naming the junction.

use thiserror::Error;

use super::{BondGraphModel, ElementKind, JunctionKind};

/// Completed assignment: for each bond, the node index receiving effort.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CausalAssignment {
    pub effort_to: Vec<usize>,
}

impl CausalAssignment {
    /// True if the bond delivers effort to `node` (and thus takes the
    /// flow decision from the other side).
    pub fn delivers_effort_to(&self, bond: usize, node: usize) -> bool {
        self.effort_to[bond] == node
    }
}

#[derive(Debug, Error)]
pub enum CausalityError {
    #[error("causality conflict at junction `{junction}`: {detail}")]
    Conflict { junction: String, detail: String },
    #[error("causality under-determined: bond between `{tail}` and `{head}` never got a mark")]
    Unresolved { tail: String, head: String },
    #[error("conflicting element causality on bond between `{tail}` and `{head}`")]
    ElementConflict { tail: String, head: String },
}

/// Assigns causal marks to every bond of a validated model.
pub fn assign_causality(model: &BondGraphModel) -> Result<CausalAssignment, CausalityError> {
    let mut marks: Vec<Option<usize>> = vec![None; model.bonds.len()];

    // Element-imposed marks: Sf receives effort, C (integral) imposes it.
    for (b, bond) in model.bonds.iter().enumerate() {
        for node in [bond.tail, bond.head] {
            let wanted = match model.nodes[node].element_kind() {
                Some(ElementKind::FlowSource) => Some(node),
                Some(ElementKind::Capacitance) => Some(bond.partner(node)),
                _ => None,
            };
            if let Some(target) = wanted {
                match marks[b] {
                    None => marks[b] = Some(target),
                    Some(existing) if existing == target => {}
                    Some(_) => {
                        return Err(CausalityError::ElementConflict {
                            tail: model.nodes[bond.tail].name().to_string(),
                            head: model.nodes[bond.head].name().to_string(),
                        })
                    }
                }
            }
        }
    }

    // Propagate junction constraints to a fixpoint.
    let junctions: Vec<usize> = (0..model.nodes.len())
        .filter(|&i| model.nodes[i].junction_kind().is_some())
        .collect();
    loop {
        let mut progressed = false;
        for &j in &junctions {
            let kind = model.nodes[j].junction_kind().unwrap();
            let incident = model.bonds_at(j);
            // A bond is "deciding" when its mark points at the side that the
            // junction rule allows only once: towards the junction for a
            // 0-junction, away from it for a 1-junction.
            let decides = |mark: usize| match kind {
                JunctionKind::Zero => mark == j,
                JunctionKind::One => mark != j,
            };
            let mut deciders = 0usize;
            let mut open = Vec::new();
            for &b in &incident {
                match marks[b] {
                    Some(mark) if decides(mark) => deciders += 1,
                    Some(_) => {}
                    None => open.push(b),
                }
            }
            if deciders > 1 {
                return Err(conflict(model, j, kind, deciders));
            }
            if deciders == 1 && !open.is_empty() {
                // Remaining bonds take the non-deciding orientation.
                for b in open {
                    let other = model.bonds[b].partner(j);
                    marks[b] = Some(match kind {
                        JunctionKind::Zero => other,
                        JunctionKind::One => j,
                    });
                    progressed = true;
                }
            } else if deciders == 0 && open.len() == 1 {
                // Everything else is non-deciding, so the last open bond
                // must take the deciding role.
                let b = open[0];
                let other = model.bonds[b].partner(j);
                marks[b] = Some(match kind {
                    JunctionKind::Zero => j,
                    JunctionKind::One => other,
                });
                progressed = true;
            } else if deciders == 0 && open.is_empty() {
                return Err(conflict(model, j, kind, 0));
            }
        }
        if !progressed {
            break;
        }
    }

    let mut effort_to = Vec::with_capacity(marks.len());
    for (b, mark) in marks.iter().enumerate() {
        match mark {
            Some(node) => effort_to.push(*node),
            None => {
                return Err(CausalityError::Unresolved {
                    tail: model.nodes[model.bonds[b].tail].name().to_string(),
                    head: model.nodes[model.bonds[b].head].name().to_string(),
                })
            }
        }
    }
    Ok(CausalAssignment { effort_to })
}

fn conflict(
    model: &BondGraphModel,
    junction: usize,
    kind: JunctionKind,
    deciders: usize,
) -> CausalityError {
    let role = match kind {
        JunctionKind::Zero => "effort-imposing",
        JunctionKind::One => "flow-imposing",
    };
    let detail = if deciders == 0 {
        format!("no {role} bond remains available")
    } else {
        format!("{deciders} bonds compete for the single {role} slot")
    };
    CausalityError::Conflict {
        junction: model.nodes[junction].name().to_string(),
        detail,
    }
}
