//! Causal localisation on the influence graph.
//!
//! Works in three moves.  A *backward search* walks the influence graph
//! upstream from every alarmed signal, pruning at quiet measured nodes,
//! and collects the possible root causes: pump sources reached through
//! alarmed territory, plus alarmed signals with no alarmed ancestor.  A
//! *forward test* checks each candidate downstream: a pump hypothesis
//! gets its magnitude from its direct child and is dropped if it would
//! visibly deflect a quiet signal.  Finally a *joint fit* searches the
//! smallest subsets of surviving candidates whose analytic response
//! templates reproduce every alarm level with the right signs.  If the
//! survivors cannot explain the pattern, the search widens once to every
//! backward candidate and alarmed signal (a pump wrongly dropped by the
//! forward test gets a second chance), and as a last resort the alarmed
//! signals themselves are reported.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};

use crate::bondgraph::{DeriveError, InfluenceGraph, StateSpace, TankParams};
use crate::detection::{steady_constraint_jacobian, AlarmState, GlobalAlarm, Thresholds};
use crate::var::{FaultSet, Variable};

#[derive(Debug, Clone)]
pub struct IgDiagnoser {
    graph: InfluenceGraph,
    /// Steady gain of each measured variable to each pump command.
    dc: DMatrix<f64>,
    /// Steady sensitivity of each residual to each measured variable.
    jac: DMatrix<f64>,
    thresholds: Thresholds,
    tol: f64,
}

/// Outcome of the forward test for one backward candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub source: Variable,
    /// Estimated bias magnitude.
    pub magnitude: f64,
    /// Alarmed variables this source explains in sign and size.
    pub explained: Vec<Variable>,
    pub accepted: bool,
    /// The source's own neighbourhood of constraints backs it up.
    pub locally_confirmed: bool,
    pub rejected_because: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IgStage {
    /// No alarms, nothing to explain.
    Quiet,
    /// Forward-tested candidates explained everything.
    Primary,
    /// The widened candidate pool was needed.
    Readmitted,
    /// No consistent subset; the alarmed signals are reported as-is.
    Fallback,
}

impl IgStage {
    pub fn label(self) -> &'static str {
        match self {
            IgStage::Quiet => "quiet",
            IgStage::Primary => "primary",
            IgStage::Readmitted => "readmitted",
            IgStage::Fallback => "fallback",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IgDiagnosis {
    /// Backward-search candidates, in canonical order.
    pub backward: Vec<Variable>,
    pub hypotheses: Vec<Hypothesis>,
    /// The selected fault set.
    pub sources: FaultSet,
    /// Fitted bias magnitude per selected source.
    pub magnitudes: Vec<(Variable, f64)>,
    /// Each alarmed variable with the source that accounts for most of
    /// its deviation.
    pub covers: Vec<(Variable, Variable)>,
    /// All consistent sets of the winning cardinality, best first.
    pub candidates: Vec<FaultSet>,
    pub stage: IgStage,
}

impl IgDiagnoser {
    pub fn new(
        graph: InfluenceGraph,
        ss: &StateSpace,
        params: &TankParams,
        thresholds: Thresholds,
        tol: f64,
    ) -> Result<Self, DeriveError> {
        Ok(IgDiagnoser {
            graph,
            dc: ss.dc_gain()?,
            jac: steady_constraint_jacobian(params),
            thresholds,
            tol,
        })
    }

    pub fn graph(&self) -> &InfluenceGraph {
        &self.graph
    }

    /// Root-cause candidates from walking the graph upstream of every
    /// alarmed signal.  Walks continue through alarmed measured nodes,
    /// stop at quiet ones, and pick up pump sources on the way; an
    /// alarmed signal with no alarmed ancestor is its own candidate.
    pub fn backward_search(&self, alarms: &AlarmState) -> Vec<Variable> {
        let alarmed: BTreeSet<Variable> = alarms.alarmed().into_iter().collect();
        let mut candidates: BTreeSet<Variable> = BTreeSet::new();

        for &start in &alarmed {
            let mut has_alarmed_ancestor = false;
            let mut visited: BTreeSet<Variable> = BTreeSet::new();
            let mut queue: Vec<Variable> = self
                .graph
                .predecessors(start)
                .into_iter()
                .map(|(p, _)| p)
                .collect();
            while let Some(p) = queue.pop() {
                if !visited.insert(p) {
                    continue;
                }
                if p.is_input() {
                    candidates.insert(p);
                } else if alarmed.contains(&p) {
                    has_alarmed_ancestor = true;
                    queue.extend(self.graph.predecessors(p).into_iter().map(|(q, _)| q));
                }
                // A quiet measured node blocks the walk.
            }
            if !has_alarmed_ancestor {
                candidates.insert(start);
            }
        }
        candidates.into_iter().collect()
    }

    /// Downstream check of one candidate.  Sensors explain exactly
    /// themselves and always pass.  A pump's magnitude is read off its
    /// direct child; the hypothesis falls if it predicts a visible
    /// deflection on any quiet signal.
    pub fn forward_test(&self, source: Variable, alarms: &AlarmState) -> Hypothesis {
        if source.is_measured() {
            let confirmed = source
                .steady_signature()
                .iter()
                .all(|&c| alarms.is_violated(c));
            return Hypothesis {
                source,
                magnitude: alarms.level(source),
                explained: vec![source],
                accepted: true,
                locally_confirmed: confirmed,
                rejected_because: None,
            };
        }

        let j = source.input_index().unwrap();
        let child = self
            .graph
            .successors(source)
            .first()
            .map(|(c, _)| *c)
            .expect("pump feeds a tank");
        let child_mi = child.measured_index().unwrap();
        let gain = self.dc[(child_mi, j)];
        let magnitude = if gain.abs() > 1e-12 {
            alarms.level(child) / gain
        } else {
            0.0
        };

        let mut explained = Vec::new();
        let mut rejected_because = None;
        for (i, &v) in Variable::MEASURED.iter().enumerate() {
            let predicted = magnitude * self.dc[(i, j)];
            match alarms.global_alarm(v) {
                GlobalAlarm::Normal => {
                    if predicted.abs() > self.thresholds.global[i] && rejected_because.is_none() {
                        rejected_because = Some(format!("would visibly deflect quiet {v}"));
                    }
                }
                alarm => {
                    if predicted.abs() > self.thresholds.global[i]
                        && predicted.signum() == alarm.sign()
                    {
                        explained.push(v);
                    }
                }
            }
        }

        let confirmed = alarms.is_violated(source.balance_constraint().unwrap())
            && !alarms.is_violated(source.adjacent_flow_constraint().unwrap());

        Hypothesis {
            source,
            magnitude,
            explained: explained.clone(),
            accepted: rejected_because.is_none() && !explained.is_empty(),
            locally_confirmed: confirmed,
            rejected_because,
        }
    }

    /// Extended steady response of one fault candidate: the five sensor
    /// deviations, then the five residual levels they imply.
    fn extended_template(&self, v: Variable) -> DVector<f64> {
        let mut global = DVector::zeros(5);
        match v.measured_index() {
            Some(mi) => global[mi] = 1.0,
            None => {
                let j = v.input_index().unwrap();
                for i in 0..5 {
                    global[i] = self.dc[(i, j)];
                }
            }
        }
        let local = &self.jac * &global;
        let mut t = DVector::zeros(10);
        for i in 0..5 {
            t[i] = global[i];
            t[5 + i] = local[i];
        }
        t
    }

    /// Least-squares fit of a candidate set against the observed levels,
    /// under the sign constraints the alarms impose.  `None` when the
    /// set cannot account for the observation.
    fn consistent(&self, set: &FaultSet, alarms: &AlarmState) -> Option<Vec<(Variable, f64)>> {
        if set.is_empty() {
            return None;
        }
        // Eligibility: a blamed sensor must be alarmed, a blamed pump
        // must have its tank balance violated.
        for &v in set {
            match v.measured_index() {
                Some(_) => {
                    if alarms.global_alarm(v) == GlobalAlarm::Normal {
                        return None;
                    }
                }
                None => {
                    if !alarms.is_violated(v.balance_constraint().unwrap()) {
                        return None;
                    }
                }
            }
        }

        let members: Vec<Variable> = set.iter().copied().collect();
        let mut t = DMatrix::zeros(10, members.len());
        for (j, &v) in members.iter().enumerate() {
            t.set_column(j, &self.extended_template(v));
        }
        let obs = alarms.levels.extended();
        let obs_scale = obs.norm().max(1e-12);

        let svd = t.clone().svd(true, true);
        let eps = (svd.singular_values.max() * 1e-9).max(1e-12);
        if svd.rank(eps) < members.len() {
            return None;
        }
        let beta = svd.solve(&obs, eps).ok()?;
        if (&obs - &t * &beta).norm() / obs_scale >= self.tol {
            return None;
        }

        // Sign constraints: sensor coefficients must match the alarm
        // direction, pump coefficients the sign of their tank residual.
        for (&v, &b) in members.iter().zip(beta.iter()) {
            match v.measured_index() {
                Some(_) => {
                    if b.signum() != alarms.global_alarm(v).sign() {
                        return None;
                    }
                }
                None => {
                    let balance = v.balance_constraint().unwrap();
                    if b * alarms.residual_level(balance) <= 0.0 {
                        return None;
                    }
                }
            }
        }

        Some(members.iter().zip(beta.iter()).map(|(&v, &b)| (v, b)).collect())
    }

    /// All consistent subsets of the pool at the smallest workable
    /// cardinality, ranked pump-heavy first, then canonically.
    fn minimal_consistent(
        &self,
        pool: &BTreeSet<Variable>,
        alarms: &AlarmState,
    ) -> Vec<(FaultSet, Vec<(Variable, f64)>)> {
        let pool: Vec<Variable> = pool.iter().copied().collect();
        let n = pool.len();
        let mut subsets: Vec<FaultSet> = (1usize..(1 << n))
            .map(|mask| {
                pool.iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .map(|(_, &v)| v)
                    .collect()
            })
            .collect();
        subsets.sort_by(|a: &FaultSet, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));

        let mut found: Vec<(FaultSet, Vec<(Variable, f64)>)> = Vec::new();
        for set in subsets {
            if let Some((first, _)) = found.first() {
                if set.len() > first.len() {
                    break;
                }
            }
            if let Some(fit) = self.consistent(&set, alarms) {
                found.push((set, fit));
            }
        }

        let pump_count = |s: &FaultSet| s.iter().filter(|v| v.is_input()).count();
        found.sort_by(|(a, _), (b, _)| {
            pump_count(b)
                .cmp(&pump_count(a))
                .then_with(|| a.cmp(b))
        });
        found
    }

    pub fn diagnose(&self, alarms: &AlarmState) -> IgDiagnosis {
        if !alarms.any_alarm() {
            return IgDiagnosis {
                backward: vec![],
                hypotheses: vec![],
                sources: FaultSet::new(),
                magnitudes: vec![],
                covers: vec![],
                candidates: vec![],
                stage: IgStage::Quiet,
            };
        }

        let backward = self.backward_search(alarms);
        let hypotheses: Vec<Hypothesis> = backward
            .iter()
            .map(|&v| self.forward_test(v, alarms))
            .collect();

        let survivors: BTreeSet<Variable> = hypotheses
            .iter()
            .filter(|h| h.accepted)
            .map(|h| h.source)
            .collect();

        let mut stage = IgStage::Primary;
        let mut consistent = self.minimal_consistent(&survivors, alarms);
        if consistent.is_empty() {
            // Second chance: every backward candidate and alarmed signal.
            let widened: BTreeSet<Variable> = backward
                .iter()
                .copied()
                .chain(alarms.alarmed())
                .collect();
            consistent = self.minimal_consistent(&widened, alarms);
            stage = IgStage::Readmitted;
        }

        if let Some((sources, fit)) = consistent.first().cloned() {
            let covers = self.covers(&fit, alarms);
            IgDiagnosis {
                backward,
                hypotheses,
                sources,
                magnitudes: fit,
                covers,
                candidates: consistent.into_iter().map(|(s, _)| s).collect(),
                stage,
            }
        } else {
            // Report the raw alarms.
            let sources: FaultSet = alarms.alarmed().into_iter().collect();
            let magnitudes = sources.iter().map(|&v| (v, alarms.level(v))).collect();
            let covers = sources.iter().map(|&v| (v, v)).collect();
            IgDiagnosis {
                backward,
                hypotheses,
                sources,
                magnitudes,
                covers,
                candidates: vec![],
                stage: IgStage::Fallback,
            }
        }
    }

    fn covers(
        &self,
        fit: &[(Variable, f64)],
        alarms: &AlarmState,
    ) -> Vec<(Variable, Variable)> {
        alarms
            .alarmed()
            .into_iter()
            .map(|y| {
                let yi = y.measured_index().unwrap();
                let who = fit
                    .iter()
                    .map(|&(v, b)| (v, (b * self.extended_template(v)[yi]).abs()))
                    .max_by(|(va, ca), (vb, cb)| {
                        ca.partial_cmp(cb)
                            .unwrap()
                            .then_with(|| vb.cmp(va))
                    })
                    .map(|(v, _)| v)
                    .expect("non-empty fit");
                (y, who)
            })
            .collect()
    }
}
