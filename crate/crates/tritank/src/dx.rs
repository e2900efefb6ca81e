//! Consistency-based diagnosis with fault-model refinement.
//!
//! Every violated constraint indicts the set of variables it involves (a
//! conflict); candidate diagnoses are the hitting sets of those
//! conflicts.  Pure structure stops there, and the minimal hitting sets
//! are often too optimistic: a steady-state pattern can be hittable by a
//! small set whose fault models cannot actually reproduce the observed
//! magnitudes, while the true (larger) set can.  Refinement therefore
//! fits each candidate's response templates to the observed sensor
//! deviations and residual levels by least squares and keeps the smallest
//! candidates that reproduce them.

use std::collections::{BTreeSet, VecDeque};

use nalgebra::DMatrix;
use thiserror::Error;

use crate::bondgraph::{StateSpace, TankParams};
use crate::detection::{
    compute_residuals, steady_observation, AlarmState, DetectError, SteadyObservation,
};
use crate::plant::{simulate, FaultScenario, SimConfig, SimError};
use crate::var::{format_set, FaultSet, Variable};

/// Minimal hitting sets of a conflict family, ordered by cardinality and
/// then canonically.  An empty family has the empty set as its only
/// hitting set; an empty conflict is unhittable, so the result is empty.
///
/// Breadth-first tree search: each branch extends a partial hitting set
/// with one element of the first conflict it misses, branches dominated
/// by an already confirmed hitting set are closed, and a final sweep
/// removes any remaining supersets.
pub fn minimal_hitting_sets<T: Ord + Copy>(conflicts: &[BTreeSet<T>]) -> Vec<BTreeSet<T>> {
    if conflicts.iter().any(|c| c.is_empty()) {
        return vec![];
    }
    let mut confirmed: Vec<BTreeSet<T>> = Vec::new();
    let mut seen: BTreeSet<BTreeSet<T>> = BTreeSet::new();
    let mut queue: VecDeque<BTreeSet<T>> = VecDeque::from([BTreeSet::new()]);

    while let Some(path) = queue.pop_front() {
        if confirmed.iter().any(|h| h.is_subset(&path)) {
            continue;
        }
        match conflicts.iter().find(|c| c.is_disjoint(&path)) {
            None => confirmed.push(path),
            Some(missed) => {
                for &el in missed {
                    let mut child = path.clone();
                    child.insert(el);
                    if seen.insert(child.clone()) {
                        queue.push_back(child);
                    }
                }
            }
        }
    }

    let mut minimal: Vec<BTreeSet<T>> = confirmed
        .iter()
        .filter(|h| !confirmed.iter().any(|o| o != *h && o.is_subset(h)))
        .cloned()
        .collect();
    minimal.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    minimal
}

/// Every hitting set up to `max_size`, minimal or not, in the same
/// order.  Refinement needs the supersets: the best-fitting explanation
/// is not always a minimal one.
pub fn all_hitting_sets<T: Ord + Copy>(
    conflicts: &[BTreeSet<T>],
    max_size: usize,
) -> Vec<BTreeSet<T>> {
    if conflicts.iter().any(|c| c.is_empty()) {
        return vec![];
    }
    let universe: Vec<T> = conflicts
        .iter()
        .flatten()
        .copied()
        .collect::<BTreeSet<T>>()
        .into_iter()
        .collect();
    let n = universe.len();
    assert!(n < usize::BITS as usize, "universe too large to enumerate");

    let mut sets: Vec<BTreeSet<T>> = Vec::new();
    for mask in 0usize..(1 << n) {
        if mask.count_ones() as usize > max_size {
            continue;
        }
        let candidate: BTreeSet<T> = universe
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, &el)| el)
            .collect();
        if conflicts.iter().all(|c| !c.is_disjoint(&candidate)) {
            sets.push(candidate);
        }
    }
    sets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    sets
}

/// Steady response of the observation vector to a unit bias on one
/// variable, measured through the same simulate/observe pipeline as the
/// benchmark runs.
#[derive(Debug, Clone, PartialEq)]
pub struct FaultTemplate {
    pub fault: Variable,
    pub response: SteadyObservation,
}

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Detect(#[from] DetectError),
}

/// One template per variable, from unit-bias simulations.  On the linear
/// plant any observed pattern is then an exact linear combination of the
/// templates of the faults that produced it.
pub fn build_fault_templates(
    ss: &StateSpace,
    params: &TankParams,
    cfg: &SimConfig,
    onset_s: f64,
    persistence_s: f64,
    decided_at_s: f64,
) -> Result<Vec<FaultTemplate>, TemplateError> {
    let steady = ss.steady_outputs(&cfg.u).map_err(SimError::from)?;
    let nominal: [f64; 5] = std::array::from_fn(|i| steady[i]);

    Variable::ALL
        .iter()
        .map(|&fault| {
            let scenario = FaultScenario::single(fault, onset_s, 1.0);
            let trace = simulate(ss, &scenario, cfg)?;
            let residuals = compute_residuals(&trace, params);
            let response =
                steady_observation(&trace, &residuals, &nominal, persistence_s, decided_at_s)?;
            Ok(FaultTemplate { fault, response })
        })
        .collect()
}

/// One candidate that survived refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct AcceptedFit {
    pub candidate: FaultSet,
    /// Fitted bias magnitude per member, in canonical order.
    pub magnitudes: Vec<(Variable, f64)>,
    /// Relative reconstruction error of the fit.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Refinement {
    /// Accepted candidates of the smallest accepted cardinality.
    pub accepted: Vec<AcceptedFit>,
    pub notes: Vec<String>,
}

impl Refinement {
    pub fn diagnoses(&self) -> Vec<FaultSet> {
        self.accepted.iter().map(|a| a.candidate.clone()).collect()
    }
}

/// Fits each candidate's templates to the observation and keeps all
/// candidates of the smallest cardinality whose relative residual stays
/// below `tol`.  Candidates whose templates are linearly dependent
/// cannot pin their magnitudes down and are rejected.  Candidates must
/// arrive sorted by cardinality.
pub fn refine_with_fault_models(
    candidates: &[FaultSet],
    observed: &SteadyObservation,
    templates: &[FaultTemplate],
    tol: f64,
) -> Refinement {
    let obs = observed.extended();
    let obs_scale = obs.norm().max(1e-12);
    let template_of = |v: Variable| -> &FaultTemplate {
        templates
            .iter()
            .find(|t| t.fault == v)
            .expect("template for every variable")
    };

    let mut refinement = Refinement::default();
    let mut accepted_cardinality: Option<usize> = None;

    for candidate in candidates {
        if let Some(k) = accepted_cardinality {
            if candidate.len() > k {
                break;
            }
        }

        if candidate.is_empty() {
            // The no-fault candidate is judged on the absolute level:
            // settling noise sits orders of magnitude below `tol`, while
            // anything worth an alarm sits orders of magnitude above.
            let residual = obs.norm();
            if residual < tol {
                accepted_cardinality = Some(0);
                refinement.accepted.push(AcceptedFit {
                    candidate: candidate.clone(),
                    magnitudes: vec![],
                    residual,
                });
            }
            continue;
        }

        let members: Vec<Variable> = candidate.iter().copied().collect();
        let mut t = DMatrix::zeros(10, members.len());
        for (j, &v) in members.iter().enumerate() {
            t.set_column(j, &template_of(v).response.extended());
        }

        let svd = t.clone().svd(true, true);
        // Simulated templates carry ~1e-6 settling remainders, so a
        // structurally dependent combination still shows a tiny spurious
        // singular value; anything below 1e-4 of the largest is noise.
        let eps = (svd.singular_values.max() * 1e-4).max(1e-12);
        if svd.rank(eps) < members.len() {
            refinement.notes.push(format!(
                "rejected {}: member templates are linearly dependent",
                format_set(candidate)
            ));
            continue;
        }
        let beta = match svd.solve(&obs, eps) {
            Ok(beta) => beta,
            Err(_) => continue,
        };
        let residual = (&obs - &t * &beta).norm() / obs_scale;
        if residual < tol {
            accepted_cardinality = Some(members.len());
            refinement.accepted.push(AcceptedFit {
                candidate: candidate.clone(),
                magnitudes: members
                    .iter()
                    .zip(beta.iter())
                    .map(|(&v, &m)| (v, m))
                    .collect(),
                residual,
            });
        }
    }

    if refinement.accepted.is_empty() {
        refinement
            .notes
            .push("no candidate reproduces the observed levels".to_string());
    }
    refinement
}

#[derive(Debug, Clone, PartialEq)]
pub struct DxDiagnosis {
    /// Conflicts drawn from the violated constraints.
    pub conflicts: Vec<FaultSet>,
    pub minimal_hitting_sets: Vec<FaultSet>,
    pub refinement: Refinement,
}

impl DxDiagnosis {
    pub fn diagnoses(&self) -> Vec<FaultSet> {
        self.refinement.diagnoses()
    }
}

pub fn diagnose(
    alarms: &AlarmState,
    templates: &[FaultTemplate],
    tol: f64,
    max_size: usize,
) -> DxDiagnosis {
    let conflicts = alarms.conflicts();
    let minimal = minimal_hitting_sets(&conflicts);
    let candidates = all_hitting_sets(&conflicts, max_size);
    let refinement = refine_with_fault_models(&candidates, &alarms.levels, templates, tol);
    DxDiagnosis {
        conflicts,
        minimal_hitting_sets: minimal,
        refinement,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bondgraph::{assign_causality, derive_state_equations, three_tank};
    use crate::detection::{detect_alarms, Thresholds};
    use crate::plant::FaultSpec;
    use crate::var::Variable::*;
    use crate::var::{fault_set, Constraint};

    fn sets(raw: &[&[Variable]]) -> Vec<FaultSet> {
        raw.iter().map(|s| fault_set(s)).collect()
    }

    fn conflicts_of(constraints: &[Constraint]) -> Vec<FaultSet> {
        constraints
            .iter()
            .map(|c| c.members().iter().copied().collect())
            .collect()
    }

    #[test]
    fn textbook_two_conflicts() {
        let conflicts = vec![fault_set(&[De1, De2]), fault_set(&[De2, De3])];
        assert_eq!(
            minimal_hitting_sets(&conflicts),
            sets(&[&[De2], &[De1, De3]])
        );
    }

    #[test]
    fn flow_sensor_pattern_has_four_minimal_explanations() {
        use Constraint::*;
        let conflicts = conflicts_of(&[TankBalance2, TankBalance3, ValveFlow2]);
        assert_eq!(
            minimal_hitting_sets(&conflicts),
            sets(&[&[Df2], &[Msf2, De2], &[De2, De3], &[De3, Df1]])
        );
    }

    #[test]
    fn degenerate_families() {
        assert_eq!(minimal_hitting_sets::<Variable>(&[]), vec![FaultSet::new()]);
        assert_eq!(all_hitting_sets::<Variable>(&[], 7), vec![FaultSet::new()]);
        let unhittable = vec![fault_set(&[De1]), FaultSet::new()];
        assert_eq!(minimal_hitting_sets(&unhittable), vec![]);
        assert_eq!(all_hitting_sets(&unhittable, 7), vec![]);
    }

    #[test]
    fn full_enumeration_keeps_supersets_and_order() {
        use Constraint::*;
        let conflicts = conflicts_of(&[TankBalance2, TankBalance3, ValveFlow2]);
        let all = all_hitting_sets(&conflicts, 3);
        let minimal = minimal_hitting_sets(&conflicts);

        assert_eq!(all[0], fault_set(&[Df2]), "smallest first");
        for m in &minimal {
            assert!(all.contains(m), "minimal set {} missing", format_set(m));
        }
        assert!(all.contains(&fault_set(&[De2, De3, Df2])), "superset kept");
        assert!(all.len() > minimal.len());
        for s in &all {
            assert!(s.len() <= 3);
            assert!(conflicts.iter().all(|c| !c.is_disjoint(s)));
        }
        let mut sorted = all.clone();
        sorted.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        assert_eq!(all, sorted);

        assert_eq!(all_hitting_sets(&conflicts, 1), sets(&[&[Df2]]));
    }

    mod oracle {
        use super::*;
        use proptest::prelude::*;

        /// Plain subset enumeration plus a minimality sweep.
        fn brute_force(conflicts: &[BTreeSet<u8>]) -> Vec<BTreeSet<u8>> {
            if conflicts.iter().any(|c| c.is_empty()) {
                return vec![];
            }
            let universe: Vec<u8> = conflicts
                .iter()
                .flatten()
                .copied()
                .collect::<BTreeSet<u8>>()
                .into_iter()
                .collect();
            let mut hitting: Vec<BTreeSet<u8>> = Vec::new();
            for mask in 0usize..(1 << universe.len()) {
                let s: BTreeSet<u8> = universe
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .map(|(_, &el)| el)
                    .collect();
                if conflicts.iter().all(|c| !c.is_disjoint(&s)) {
                    hitting.push(s);
                }
            }
            let mut minimal: Vec<BTreeSet<u8>> = hitting
                .iter()
                .filter(|h| !hitting.iter().any(|o| o != *h && o.is_subset(h)))
                .cloned()
                .collect();
            minimal.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
            minimal
        }

        proptest! {
            #[test]
            fn tree_search_agrees_with_brute_force(
                conflicts in proptest::collection::vec(
                    proptest::collection::btree_set(0u8..6, 1..4),
                    1..6,
                )
            ) {
                prop_assert_eq!(minimal_hitting_sets(&conflicts), brute_force(&conflicts));
            }
        }
    }

    // --- refinement against the simulated rig ---

    struct Bench {
        templates: Vec<FaultTemplate>,
        ss: StateSpace,
        cfg: SimConfig,
        thresholds: Thresholds,
        nominal: [f64; 5],
    }

    impl Bench {
        fn new() -> Self {
            let model = three_tank(&TankParams::default()).unwrap();
            let causality = assign_causality(&model).unwrap();
            let ss = derive_state_equations(&model, &causality).unwrap();
            let cfg = SimConfig::default();
            let nominal = [3.0, 2.0, 3.0, 1.0, 1.0];
            let templates =
                build_fault_templates(&ss, &TankParams::default(), &cfg, 50.0, 0.5, 99.0).unwrap();
            let thresholds = Thresholds::from_nominal(&nominal, 0.05);
            Bench {
                templates,
                ss,
                cfg,
                thresholds,
                nominal,
            }
        }

        fn alarms(&self, faults: Vec<FaultSpec>) -> AlarmState {
            let scenario = FaultScenario::simultaneous(faults);
            let trace = simulate(&self.ss, &scenario, &self.cfg).unwrap();
            let residuals = compute_residuals(&trace, &TankParams::default());
            detect_alarms(
                &trace,
                &residuals,
                &self.nominal,
                &self.thresholds,
                0.5,
                99.0,
            )
            .unwrap()
        }
    }

    #[test]
    fn templates_follow_the_steady_gains() {
        let bench = Bench::new();
        let msf1 = &bench.templates[0];
        assert_eq!(msf1.fault, Msf1);
        for (got, want) in msf1.response.global.iter().zip([2.0, 1.0, 1.0, 1.0, 0.0]) {
            assert!((got - want).abs() < 1e-4);
        }
        for (got, want) in msf1.response.local.iter().zip([1.0, 0.0, 0.0, 0.0, 0.0]) {
            assert!((got - want).abs() < 1e-4);
        }
        // A pressure-sensor bias moves no physics: unit reading offset,
        // and only the valve equation notices.
        let de1 = &bench.templates[2];
        assert_eq!(de1.fault, De1);
        for (got, want) in de1.response.global.iter().zip([1.0, 0.0, 0.0, 0.0, 0.0]) {
            assert!((got - want).abs() < 1e-6);
        }
        for (got, want) in de1.response.local.iter().zip([0.0, 0.0, 0.0, -1.0, 0.0]) {
            assert!((got - want).abs() < 1e-6);
        }
    }

    #[test]
    fn plain_double_fault_is_recovered_with_magnitudes() {
        let bench = Bench::new();
        let alarms = bench.alarms(vec![
            FaultSpec::new(De1, 50.0, 0.6),
            FaultSpec::new(Df2, 50.0, 0.2),
        ]);
        let d = diagnose(&alarms, &bench.templates, 1e-3, 7);
        assert_eq!(d.diagnoses(), sets(&[&[De1, Df2]]));
        let fit = &d.refinement.accepted[0];
        assert!((fit.magnitudes[0].1 - 0.6).abs() < 1e-5);
        assert!((fit.magnitudes[1].1 - 0.2).abs() < 1e-5);
        assert!(fit.residual < 1e-9);
    }

    #[test]
    fn refinement_prefers_a_superset_that_actually_fits() {
        let bench = Bench::new();
        let alarms = bench.alarms(vec![
            FaultSpec::new(De1, 50.0, 0.6),
            FaultSpec::new(De3, 50.0, 0.6),
            FaultSpec::new(Df2, 50.0, 0.2),
        ]);
        let d = diagnose(&alarms, &bench.templates, 1e-3, 7);
        // Structure alone would settle for two faults; none of the pairs
        // reproduces the levels.
        assert_eq!(d.minimal_hitting_sets[0].len(), 2);
        assert_eq!(d.diagnoses(), sets(&[&[De1, De3, Df2]]));
        let fit = &d.refinement.accepted[0];
        let magnitudes: Vec<f64> = fit.magnitudes.iter().map(|(_, m)| *m).collect();
        assert!((magnitudes[0] - 0.6).abs() < 1e-5);
        assert!((magnitudes[1] - 0.6).abs() < 1e-5);
        assert!((magnitudes[2] - 0.2).abs() < 1e-5);
    }

    #[test]
    fn dependent_template_combinations_are_rejected() {
        let bench = Bench::new();
        let alarms = bench.alarms(vec![FaultSpec::new(Msf1, 50.0, 0.2)]);
        let dependent = vec![fault_set(&[Msf1, De1, De2, De3, Df1])];
        let refinement =
            refine_with_fault_models(&dependent, &alarms.levels, &bench.templates, 1e-3);
        assert!(refinement.accepted.is_empty());
        assert!(refinement
            .notes
            .iter()
            .any(|n| n.contains("linearly dependent")));
    }

    #[test]
    fn quiet_rig_diagnoses_the_empty_set() {
        let bench = Bench::new();
        let alarms = bench.alarms(vec![]);
        let d = diagnose(&alarms, &bench.templates, 1e-3, 7);
        assert!(d.conflicts.is_empty());
        assert_eq!(d.minimal_hitting_sets, vec![FaultSet::new()]);
        assert_eq!(d.diagnoses(), vec![FaultSet::new()]);
    }
}
