//! Experiment driver tying the whole pipeline together: configuration,
//! the benchmark fault table, scenario files, and report rendering.
//!
//! A [`Workbench`] is built once from a [`Config`]; it derives the state
//! equations and influence graph from the rig's bond graph, sizes
//! thresholds and fault magnitudes from the operating point, and then
//! answers [`run_scenario`](Workbench::run_scenario) queries by
//! simulating, detecting and running all three diagnosers side by side.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::Deserialize;
use thiserror::Error;

use crate::bondgraph::{
    assign_causality, derive_influence_graph, derive_state_equations, three_tank,
    CausalityError, DeriveError, InfluenceError, ModelError, StateSpace, TankParams,
};
use crate::detection::{
    compute_residuals, detect_alarms, AlarmState, DetectError, Thresholds,
};
use crate::dx::{self, build_fault_templates, DxDiagnosis, FaultTemplate, TemplateError};
use crate::fdi::{self, FdiDiagnosis, SignatureMatrix};
use crate::ig::{IgDiagnoser, IgDiagnosis};
use crate::plant::{
    apply_measurement_noise, simulate, FaultScenario, FaultSpec, SimConfig, SimError,
};
use crate::var::{format_set, FaultSet, Variable};

/// The benchmark fault table: seven single faults followed by twelve
/// simultaneous combinations of increasing size.
pub const TABLE_ROWS: [&[Variable]; 19] = {
    use Variable::*;
    [
        &[Msf1],
        &[Msf2],
        &[De1],
        &[De2],
        &[De3],
        &[Df1],
        &[Df2],
        &[Msf1, Df2],
        &[De1, Df2],
        &[De3, Df2],
        &[De1, De3],
        &[Df1, Df2],
        &[Msf1, De1, Df2],
        &[De1, De3, Df2],
        &[De1, Df1, Df2],
        &[Msf1, Msf2, Df1],
        &[Msf1, Msf2, Df1, Df2],
        &[Msf1, Msf2, De2, Df1, Df2],
        &[Msf1, Msf2, De1, De2, Df1, Df2],
    ]
};

/// Everything the workbench needs to run an experiment.  Every field has
/// a sensible default, so an empty TOML document is a valid config.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Integration step, seconds.
    pub dt: f64,
    /// Simulated span, seconds.
    pub horizon_s: f64,
    /// When injected faults switch on, seconds.
    pub onset_s: f64,
    /// Bias size as a fraction of the faulted signal's quiescent value.
    pub magnitude_frac: f64,
    /// Alarm thresholds as a fraction of each quiescent reading.
    pub threshold_frac: f64,
    /// How long a deviation must persist to count, seconds.
    pub persistence_s: f64,
    /// When alarms are read off, seconds.
    pub decided_at_s: f64,
    /// Relative residual below which a fault-model fit is accepted.
    pub dx_tol: f64,
    /// Relative residual for the influence-graph joint fit.
    pub ig_tol: f64,
    /// Largest candidate set the consistency search will entertain.
    pub dx_max_size: usize,
    /// Standard deviation of additive measurement noise (0 disables).
    pub noise_std: f64,
    pub noise_seed: u64,
    /// Commanded pump flows.
    pub u: Vec<f64>,
    pub params: TankParams,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            dt: 0.01,
            horizon_s: 100.0,
            onset_s: 50.0,
            magnitude_frac: 0.2,
            threshold_frac: 0.05,
            persistence_s: 0.5,
            decided_at_s: 99.0,
            dx_tol: 1e-3,
            ig_tol: 1e-3,
            dx_max_size: 7,
            noise_std: 0.0,
            noise_seed: 0,
            u: vec![1.0, 1.0],
            params: TankParams::default(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Config, WorkbenchError> {
        let config: Config =
            toml::from_str(text).map_err(|e| WorkbenchError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), WorkbenchError> {
        let bad = |msg: &str| Err(WorkbenchError::Config(msg.to_string()));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if !(self.horizon_s > 0.0 && self.horizon_s.is_finite()) {
            return bad("horizon_s must be positive");
        }
        if !(0.0..=self.horizon_s).contains(&self.onset_s) {
            return bad("onset_s must fall inside the horizon");
        }
        if !(0.0..=self.horizon_s).contains(&self.decided_at_s) {
            return bad("decided_at_s must fall inside the horizon");
        }
        if !(self.persistence_s >= 0.0 && self.persistence_s <= self.decided_at_s) {
            return bad("persistence_s must fit before the decision instant");
        }
        if !(self.threshold_frac > 0.0 && self.threshold_frac.is_finite()) {
            return bad("threshold_frac must be positive");
        }
        if !self.magnitude_frac.is_finite() {
            return bad("magnitude_frac must be finite");
        }
        if self.noise_std < 0.0 {
            return bad("noise_std must not be negative");
        }
        Ok(())
    }

    fn sim_config(&self) -> SimConfig {
        SimConfig {
            dt: self.dt,
            horizon_s: self.horizon_s,
            u: self.u.clone(),
            x0: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum WorkbenchError {
    #[error("bad configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Causality(#[from] CausalityError),
    #[error(transparent)]
    Derive(#[from] DeriveError),
    #[error(transparent)]
    Influence(#[from] InfluenceError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("scenario line {line}: {message}")]
    Scenario { line: usize, message: String },
}

/// One scenario's complete result: what was injected, what the rig
/// showed, and what each method concluded.
#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub name: String,
    pub injected: FaultSet,
    pub alarms: AlarmState,
    pub fdi: FdiDiagnosis,
    pub dx: DxDiagnosis,
    pub ig: IgDiagnosis,
}

impl ScenarioOutcome {
    /// The signature match names exactly the injected set.
    pub fn fdi_exact(&self) -> bool {
        self.fdi.candidates == vec![self.injected.clone()]
    }

    /// The consistency engine's refined answer is exactly the injected
    /// set, with no rivals.
    pub fn dx_exact(&self) -> bool {
        self.dx.diagnoses() == vec![self.injected.clone()]
    }

    /// The causal localiser's selected sources are the injected set.
    pub fn ig_exact(&self) -> bool {
        self.ig.sources == self.injected
    }
}

/// Exact-identification tally for one method.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MethodScore {
    pub singles_exact: usize,
    pub singles_total: usize,
    pub multiples_exact: usize,
    pub multiples_total: usize,
}

impl MethodScore {
    fn cell(exact: usize, total: usize) -> String {
        if total == 0 {
            return "-".to_string();
        }
        format!("{}/{} ({:.1}%)", exact, total, 100.0 * exact as f64 / total as f64)
    }

    pub fn singles_cell(&self) -> String {
        Self::cell(self.singles_exact, self.singles_total)
    }

    pub fn multiples_cell(&self) -> String {
        Self::cell(self.multiples_exact, self.multiples_total)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub outcomes: Vec<ScenarioOutcome>,
    pub fdi: MethodScore,
    pub dx: MethodScore,
    pub ig: MethodScore,
}

fn score(outcomes: &[ScenarioOutcome], exact: fn(&ScenarioOutcome) -> bool) -> MethodScore {
    let mut s = MethodScore::default();
    for o in outcomes {
        match o.injected.len() {
            0 => {}
            1 => {
                s.singles_total += 1;
                s.singles_exact += exact(o) as usize;
            }
            _ => {
                s.multiples_total += 1;
                s.multiples_exact += exact(o) as usize;
            }
        }
    }
    s
}

pub struct Workbench {
    config: Config,
    ss: StateSpace,
    nominal: [f64; 5],
    thresholds: Thresholds,
    signature: SignatureMatrix,
    templates: Vec<FaultTemplate>,
    ig: IgDiagnoser,
}

impl Workbench {
    pub fn new(config: Config) -> Result<Workbench, WorkbenchError> {
        config.validate()?;
        let model = three_tank(&config.params)?;
        let causality = assign_causality(&model)?;
        let ss = derive_state_equations(&model, &causality)?;
        let graph = derive_influence_graph(&model, &causality)?;

        let steady = ss.steady_outputs(&config.u)?;
        let nominal: [f64; 5] = std::array::from_fn(|i| steady[i]);
        let thresholds = Thresholds::from_nominal(&nominal, config.threshold_frac);
        let templates = build_fault_templates(
            &ss,
            &config.params,
            &config.sim_config(),
            config.onset_s,
            config.persistence_s,
            config.decided_at_s,
        )?;
        let ig = IgDiagnoser::new(graph, &ss, &config.params, thresholds, config.ig_tol)?;

        Ok(Workbench {
            config,
            ss,
            nominal,
            thresholds,
            signature: SignatureMatrix::from_structure(),
            templates,
            ig,
        })
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn state_space(&self) -> &StateSpace {
        &self.ss
    }

    pub fn nominal(&self) -> &[f64; 5] {
        &self.nominal
    }

    pub fn thresholds(&self) -> &Thresholds {
        &self.thresholds
    }

    pub fn signature(&self) -> &SignatureMatrix {
        &self.signature
    }

    pub fn templates(&self) -> &[FaultTemplate] {
        &self.templates
    }

    pub fn diagnoser(&self) -> &IgDiagnoser {
        &self.ig
    }

    /// Bias size for one variable: the configured fraction of its
    /// quiescent value (commanded flow for pumps, steady reading for
    /// sensors).
    pub fn magnitude_for(&self, v: Variable) -> f64 {
        let base = match v.input_index() {
            Some(j) => self.config.u[j],
            None => self.nominal[v.measured_index().unwrap()],
        };
        self.config.magnitude_frac * base.abs()
    }

    /// A scenario biasing each listed variable at the configured onset.
    pub fn scenario_for(&self, targets: &[Variable]) -> FaultScenario {
        FaultScenario::simultaneous(
            targets
                .iter()
                .map(|&v| FaultSpec::new(v, self.config.onset_s, self.magnitude_for(v)))
                .collect(),
        )
    }

    pub fn builtin_scenarios(&self) -> Vec<FaultScenario> {
        TABLE_ROWS.iter().map(|row| self.scenario_for(row)).collect()
    }

    pub fn simulate_scenario(
        &self,
        scenario: &FaultScenario,
    ) -> Result<crate::plant::SimulationTrace, WorkbenchError> {
        let mut trace = simulate(&self.ss, scenario, &self.config.sim_config())?;
        if self.config.noise_std > 0.0 {
            apply_measurement_noise(&mut trace, self.config.noise_std, self.config.noise_seed);
        }
        Ok(trace)
    }

    pub fn run_scenario(
        &self,
        scenario: &FaultScenario,
    ) -> Result<ScenarioOutcome, WorkbenchError> {
        let trace = self.simulate_scenario(scenario)?;
        let residuals = compute_residuals(&trace, &self.config.params);
        let alarms = detect_alarms(
            &trace,
            &residuals,
            &self.nominal,
            &self.thresholds,
            self.config.persistence_s,
            self.config.decided_at_s,
        )?;

        let fdi = fdi::diagnose(&self.signature, alarms.violation_mask());
        let dx = dx::diagnose(
            &alarms,
            &self.templates,
            self.config.dx_tol,
            self.config.dx_max_size,
        );
        let ig = self.ig.diagnose(&alarms);

        Ok(ScenarioOutcome {
            name: scenario.name.clone(),
            injected: scenario.injected_set(),
            alarms,
            fdi,
            dx,
            ig,
        })
    }

    /// Runs the full benchmark table and tallies exact identifications.
    pub fn run_table1(&self) -> Result<ExperimentReport, WorkbenchError> {
        let outcomes: Vec<ScenarioOutcome> = self
            .builtin_scenarios()
            .iter()
            .map(|s| self.run_scenario(s))
            .collect::<Result<_, _>>()?;
        Ok(ExperimentReport {
            fdi: score(&outcomes, ScenarioOutcome::fdi_exact),
            dx: score(&outcomes, ScenarioOutcome::dx_exact),
            ig: score(&outcomes, ScenarioOutcome::ig_exact),
            outcomes,
        })
    }
}

/// Parses a scenario file.  Grammar, one directive per line:
///
/// ```text
/// # comment
/// name <free text>
/// fault <variable> <onset-seconds> <magnitude>
/// ```
pub fn parse_scenario(text: &str) -> Result<FaultScenario, WorkbenchError> {
    let mut name: Option<String> = None;
    let mut faults: Vec<FaultSpec> = Vec::new();
    let mut seen: BTreeSet<Variable> = BTreeSet::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |message: String| WorkbenchError::Scenario { line, message };
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut words = body.split_whitespace();
        let directive = words.next().unwrap();
        match directive {
            "name" => {
                let rest: Vec<&str> = words.collect();
                if rest.is_empty() {
                    return Err(err("name needs a value".to_string()));
                }
                name = Some(rest.join(" "));
            }
            "fault" => {
                let args: Vec<&str> = words.collect();
                if args.len() != 3 {
                    return Err(err(format!(
                        "fault takes <variable> <onset-seconds> <magnitude>, found {} words",
                        args.len()
                    )));
                }
                let target: Variable = args[0]
                    .parse()
                    .map_err(|_| err(format!("unknown variable `{}`", args[0])))?;
                let onset: f64 = args[1]
                    .parse()
                    .map_err(|_| err(format!("bad onset `{}`", args[1])))?;
                let magnitude: f64 = args[2]
                    .parse()
                    .map_err(|_| err(format!("bad magnitude `{}`", args[2])))?;
                if !seen.insert(target) {
                    return Err(err(format!("{target} is already faulted")));
                }
                faults.push(FaultSpec::new(target, onset, magnitude));
            }
            other => {
                return Err(err(format!(
                    "unknown directive `{other}` (expected `name` or `fault`)"
                )));
            }
        }
    }

    let scenario = FaultScenario::simultaneous(faults);
    Ok(match name {
        Some(n) => FaultScenario::named(&n, scenario.faults),
        None => scenario,
    })
}

fn exact_marker(exact: bool) -> &'static str {
    if exact {
        "  [exact]"
    } else {
        ""
    }
}

fn plus_join(set: &FaultSet) -> String {
    set.iter()
        .map(|v| v.name())
        .collect::<Vec<_>>()
        .join("+")
}

fn pipe_join(sets: &[FaultSet]) -> String {
    sets.iter().map(plus_join).collect::<Vec<_>>().join("|")
}

/// Human-readable block for one scenario.
pub fn render_outcome_text(o: &ScenarioOutcome) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scenario {}", o.name);
    let _ = writeln!(s, "  injected  {}", format_set(&o.injected));

    let alarmed = o.alarms.alarmed();
    let alarm_line = if alarmed.is_empty() {
        "none".to_string()
    } else {
        alarmed
            .iter()
            .map(|&v| format!("{v}:{}", o.alarms.global_alarm(v).label()))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let _ = writeln!(s, "  alarmed   {alarm_line}");

    let violated = o.alarms.violated();
    let violated_line = if violated.is_empty() {
        "none".to_string()
    } else {
        violated
            .iter()
            .map(|c| c.name())
            .collect::<Vec<_>>()
            .join(" ")
    };
    let _ = writeln!(s, "  violated  {violated_line}");

    let _ = writeln!(
        s,
        "  fdi       {} -> {}{}",
        o.fdi.verdict.label(),
        crate::var::format_sets(&o.fdi.candidates),
        exact_marker(o.fdi_exact()),
    );

    let _ = writeln!(
        s,
        "  dx        {}{}",
        crate::var::format_sets(&o.dx.diagnoses()),
        exact_marker(o.dx_exact()),
    );
    for fit in &o.dx.refinement.accepted {
        if fit.candidate.is_empty() {
            continue;
        }
        let mags = fit
            .magnitudes
            .iter()
            .map(|(v, m)| format!("{v}={m:+.3}"))
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(s, "            fit {}: {mags}", format_set(&fit.candidate));
    }

    let _ = writeln!(
        s,
        "  ig        {} (stage {}){}",
        format_set(&o.ig.sources),
        o.ig.stage.label(),
        exact_marker(o.ig_exact()),
    );
    if !o.ig.magnitudes.is_empty() && o.ig.stage != crate::ig::IgStage::Fallback {
        let mags = o
            .ig
            .magnitudes
            .iter()
            .map(|(v, m)| format!("{v}={m:+.3}"))
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(s, "            fit: {mags}");
    }
    s
}

/// The full benchmark report as text: one block per row, then the
/// exact-identification summary.
pub fn render_report_text(report: &ExperimentReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "benchmark fault table: {} scenarios\n",
        report.outcomes.len()
    );
    for (i, o) in report.outcomes.iter().enumerate() {
        let _ = writeln!(s, "row {:>2}", i + 1);
        s.push_str(&render_outcome_text(o));
        s.push('\n');
    }
    let _ = writeln!(s, "summary (exactly identified)");
    let _ = writeln!(s, "  method  singles          multiples");
    for (label, sc) in [
        ("fdi", &report.fdi),
        ("dx", &report.dx),
        ("ig", &report.ig),
    ] {
        let _ = writeln!(
            s,
            "  {:<6}  {:<15}  {:<15}",
            label,
            sc.singles_cell(),
            sc.multiples_cell()
        );
    }
    s
}

/// A simulation trace as CSV: time, tank pressures, sensor readings,
/// commanded pump flows.
pub fn render_trace_csv(trace: &crate::plant::SimulationTrace) -> String {
    let mut s = String::from("t,p1,p2,p3,De1,De2,De3,Df1,Df2,u1,u2\n");
    for (i, &t) in trace.times.iter().enumerate() {
        let _ = write!(s, "{t:.6}");
        for x in &trace.states[i] {
            let _ = write!(s, ",{x:.6}");
        }
        for y in &trace.outputs[i] {
            let _ = write!(s, ",{y:.6}");
        }
        for u in &trace.commanded[i] {
            let _ = write!(s, ",{u:.6}");
        }
        s.push('\n');
    }
    s
}

/// The benchmark report as CSV, one row per scenario.  Sets are joined
/// with `+`, alternative candidates with `|`.
pub fn render_report_csv(report: &ExperimentReport) -> String {
    let mut s = String::from(
        "scenario,injected,fdi_verdict,fdi,fdi_exact,dx,dx_exact,ig,ig_exact\n",
    );
    for o in &report.outcomes {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            o.name,
            plus_join(&o.injected),
            o.fdi.verdict.label(),
            pipe_join(&o.fdi.candidates),
            o.fdi_exact(),
            pipe_join(&o.dx.diagnoses()),
            o.dx_exact(),
            plus_join(&o.ig.sources),
            o.ig_exact(),
        );
    }
    s
}
