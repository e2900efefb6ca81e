//! Diagnosis by fault signature matching.
//!
//! Each fault candidate owns a static binary signature: the set of
//! residuals its injection can deflect, read straight off the constraint
//! membership table.  The observed violation pattern is compared against
//! single signatures first, then against unions of two signatures.  The
//! scheme is oblivious to magnitudes and signs, and it has no answer when
//! the observed pattern matches nothing — both weaknesses show up in the
//! benchmark table.

use crate::var::{fault_set, Constraint, FaultSet, Variable};

/// Binary fault-signature matrix: one row per fault candidate, one
/// column per residual.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignatureMatrix {
    rows: Vec<(Variable, [bool; 5])>,
}

impl SignatureMatrix {
    /// Rows from the structural constraint membership of each variable.
    pub fn from_structure() -> Self {
        let rows = Variable::ALL
            .iter()
            .map(|&v| {
                let sig = v.signature();
                (v, std::array::from_fn(|i| sig.contains(&Constraint::ALL[i])))
            })
            .collect();
        SignatureMatrix { rows }
    }

    pub fn row(&self, v: Variable) -> [bool; 5] {
        self.rows.iter().find(|(rv, _)| *rv == v).unwrap().1
    }

    pub fn rows_are_distinct(&self) -> bool {
        for (i, (_, a)) in self.rows.iter().enumerate() {
            for (_, b) in &self.rows[i + 1..] {
                if a == b {
                    return false;
                }
            }
        }
        true
    }

    /// Fixed-width table with `x` marks.
    pub fn render(&self) -> String {
        let mut out = String::from("fault  ");
        for c in Constraint::ALL {
            out.push_str(&format!(" {:>5}", c.name()));
        }
        out.push('\n');
        for (v, row) in &self.rows {
            out.push_str(&format!("{:<7}", v.name()));
            for hit in row {
                out.push_str(&format!(" {:>5}", if *hit { "x" } else { "." }));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdiVerdict {
    /// One signature reproduces the observed pattern on its own.
    Exact,
    /// Only unions of two signatures reproduce the pattern.
    Ambiguous,
    /// Nothing in the signature table reproduces the pattern.
    NoMatch,
}

impl FdiVerdict {
    pub fn label(self) -> &'static str {
        match self {
            FdiVerdict::Exact => "exact",
            FdiVerdict::Ambiguous => "ambiguous",
            FdiVerdict::NoMatch => "no-match",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdiDiagnosis {
    pub verdict: FdiVerdict,
    /// Candidate fault sets, in canonical set order.
    pub candidates: Vec<FaultSet>,
    pub observed: [bool; 5],
}

pub fn diagnose(matrix: &SignatureMatrix, observed: [bool; 5]) -> FdiDiagnosis {
    if observed.iter().all(|&b| !b) {
        return FdiDiagnosis {
            verdict: FdiVerdict::Exact,
            candidates: vec![FaultSet::new()],
            observed,
        };
    }

    let singles: Vec<FaultSet> = Variable::ALL
        .iter()
        .copied()
        .filter(|&v| matrix.row(v) == observed)
        .map(|v| fault_set(&[v]))
        .collect();
    if !singles.is_empty() {
        return FdiDiagnosis {
            verdict: FdiVerdict::Exact,
            candidates: singles,
            observed,
        };
    }

    let mut pairs: Vec<FaultSet> = Vec::new();
    for (i, &v) in Variable::ALL.iter().enumerate() {
        for &w in &Variable::ALL[i + 1..] {
            let (rv, rw) = (matrix.row(v), matrix.row(w));
            let union: [bool; 5] = std::array::from_fn(|k| rv[k] || rw[k]);
            if union == observed {
                pairs.push(fault_set(&[v, w]));
            }
        }
    }
    pairs.sort();

    if pairs.is_empty() {
        FdiDiagnosis {
            verdict: FdiVerdict::NoMatch,
            candidates: vec![],
            observed,
        }
    } else {
        FdiDiagnosis {
            verdict: FdiVerdict::Ambiguous,
            candidates: pairs,
            observed,
        }
    }
}

/// Violation mask from a list of constraints, for driving the matcher
/// directly.
pub fn mask_of(constraints: &[Constraint]) -> [bool; 5] {
    let mut mask = [false; 5];
    for c in constraints {
        mask[c.index()] = true;
    }
    mask
}
