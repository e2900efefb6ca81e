//! Acceptance checks for the workbench as a whole.  Each test prints a
//! `[PASS]` line describing the criterion it pins down; run with
//! `cargo test --test acceptance -- --nocapture` to see them.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tritank::dx::minimal_hitting_sets;
use tritank::plant::FaultScenario;
use tritank::var::{Constraint, Variable};
use tritank::workbench::{render_report_csv, Config, ExperimentReport, Workbench};

struct Fixture {
    frac: f64,
    wb: Workbench,
    report: ExperimentReport,
}

static FIXTURES: OnceLock<Vec<Fixture>> = OnceLock::new();

fn fixtures() -> &'static [Fixture] {
    FIXTURES.get_or_init(|| {
        [0.1, 0.2, 0.5]
            .into_iter()
            .map(|frac| {
                let config = Config {
                    magnitude_frac: frac,
                    ..Config::default()
                };
                let wb = Workbench::new(config).expect("default rig builds");
                let report = wb.run_table1().expect("benchmark runs");
                Fixture { frac, wb, report }
            })
            .collect()
    })
}

fn at(frac: f64) -> &'static Fixture {
    fixtures()
        .iter()
        .find(|f| f.frac == frac)
        .expect("fixture for fraction")
}

#[test]
fn criterion_1_single_faults_are_identified() {
    let r = &at(0.2).report;
    assert!(r.fdi.singles_exact >= 5, "fdi singles {}", r.fdi.singles_exact);
    assert_eq!(r.dx.singles_exact, 7, "dx singles");
    assert_eq!(r.ig.singles_exact, 7, "ig singles");
    assert_eq!(r.fdi.singles_total, 7);
    println!(
        "[PASS] criterion 1: all 7 single faults identified by dx and ig; \
         signature matching manages {}/7",
        r.fdi.singles_exact
    );
}

#[test]
fn criterion_2_influence_graph_handles_multiples() {
    let r = &at(0.2).report;
    assert_eq!(r.ig.multiples_total, 12);
    assert!(r.ig.multiples_exact >= 11, "ig multiples {}", r.ig.multiples_exact);
    println!(
        "[PASS] criterion 2: influence-graph localisation pins {}/12 multiple-fault rows",
        r.ig.multiples_exact
    );
}

#[test]
fn criterion_3_methods_rank_as_expected() {
    let r = &at(0.2).report;
    let (f, d, g) = (
        r.fdi.multiples_exact,
        r.dx.multiples_exact,
        r.ig.multiples_exact,
    );
    assert!(g > d && d >= f, "ranking ig {g} > dx {d} >= fdi {f}");
    assert!(f <= 3, "fdi multiples {f}");
    assert!(d >= 6, "dx multiples {d}");
    println!(
        "[PASS] criterion 3: on multiples ig ({g}/12) beats dx ({d}/12) beats fdi ({f}/12)"
    );
}

#[test]
fn criterion_4_verdicts_are_magnitude_invariant() {
    let frs = fixtures();
    for row in 0..19 {
        let flags: Vec<(bool, bool, bool)> = frs
            .iter()
            .map(|f| {
                let o = &f.report.outcomes[row];
                (o.fdi_exact(), o.dx_exact(), o.ig_exact())
            })
            .collect();
        for pair in flags.windows(2) {
            assert_eq!(
                pair[0],
                pair[1],
                "row {} changes verdict between magnitude fractions",
                row + 1
            );
        }
    }
    println!(
        "[PASS] criterion 4: all 19 rows keep their verdicts at bias fractions 0.1, 0.2 and 0.5"
    );
}

/// Brute-force oracle: enumerate every subset of the conflict universe,
/// keep the hitting sets, drop anything with a smaller hitting subset.
fn brute_minimal(conflicts: &[BTreeSet<Variable>]) -> Vec<BTreeSet<Variable>> {
    let universe: Vec<Variable> = conflicts
        .iter()
        .flatten()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut hitting: Vec<BTreeSet<Variable>> = Vec::new();
    for mask in 0u32..(1 << universe.len()) {
        let set: BTreeSet<Variable> = universe
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, &v)| v)
            .collect();
        if conflicts.iter().all(|c| c.iter().any(|x| set.contains(x))) {
            hitting.push(set);
        }
    }
    let mut minimal: Vec<BTreeSet<Variable>> = hitting
        .iter()
        .filter(|s| {
            !hitting
                .iter()
                .any(|o| o.len() < s.len() && o.is_subset(s))
        })
        .cloned()
        .collect();
    minimal.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    minimal
}

#[test]
fn criterion_5_numerical_machinery_holds_up() {
    // Hitting sets against the brute-force oracle on random families.
    let mut rng = ChaCha8Rng::seed_from_u64(20260823);
    let families = 150;
    for _ in 0..families {
        let n_conflicts = rng.random_range(0..=5);
        let conflicts: Vec<BTreeSet<Variable>> = (0..n_conflicts)
            .map(|_| {
                let size = rng.random_range(0..=4);
                (0..size)
                    .map(|_| Variable::ALL[rng.random_range(0..Variable::ALL.len())])
                    .collect()
            })
            .collect();
        assert_eq!(
            minimal_hitting_sets(&conflicts),
            brute_minimal(&conflicts),
            "family {conflicts:?}"
        );
    }

    // Superposition: the rig responds linearly, so deviations add.
    let wb = &at(0.2).wb;
    let nominal = wb.simulate_scenario(&FaultScenario::nominal()).unwrap();
    let a = wb
        .simulate_scenario(&wb.scenario_for(&[Variable::Msf1]))
        .unwrap();
    let b = wb
        .simulate_scenario(&wb.scenario_for(&[Variable::Df2]))
        .unwrap();
    let joint = wb
        .simulate_scenario(&wb.scenario_for(&[Variable::Msf1, Variable::Df2]))
        .unwrap();
    let mut worst = 0.0f64;
    for i in 0..nominal.times.len() {
        for k in 0..5 {
            let da = a.outputs[i][k] - nominal.outputs[i][k];
            let db = b.outputs[i][k] - nominal.outputs[i][k];
            let dj = joint.outputs[i][k] - nominal.outputs[i][k];
            worst = worst.max((da + db - dj).abs());
        }
    }
    assert!(worst <= 1e-9, "superposition defect {worst:.3e}");

    // Every benchmark row's observed levels are a linear combination of
    // its injected faults' response templates.  The solve tolerates rank
    // deficiency: the largest rows stack more faults than the steady
    // response space has dimensions, which hides them from *every*
    // steady-state method but must not break linearity itself.
    let mut worst_fit = 0.0f64;
    for o in &at(0.2).report.outcomes {
        let members: Vec<Variable> = o.injected.iter().copied().collect();
        let mut t = DMatrix::zeros(10, members.len());
        for (j, &v) in members.iter().enumerate() {
            let template = wb
                .templates()
                .iter()
                .find(|t| t.fault == v)
                .expect("template for every variable");
            t.set_column(j, &template.response.extended());
        }
        let obs = o.alarms.levels.extended();
        let svd = t.clone().svd(true, true);
        let eps = svd.singular_values.max() * 1e-4;
        let beta = svd.solve(&obs, eps).expect("least squares solves");
        let rel = (&obs - &t * &beta).norm() / obs.norm();
        assert!(rel < 1e-6, "{}: relative residual {rel:.3e}", o.name);
        worst_fit = worst_fit.max(rel);
    }

    println!(
        "[PASS] criterion 5: hitting sets match the oracle on {families} random families, \
         superposition holds to {worst:.1e}, injected-set fits stay below {worst_fit:.1e}"
    );
}

#[test]
fn criterion_6_structure_is_sound() {
    let wb = &at(0.2).wb;

    assert!(wb.signature().rows_are_distinct(), "signature rows collide");

    // Constraint membership is exactly the transpose of the signatures.
    for c in Constraint::ALL {
        let members: BTreeSet<Variable> = c.members().iter().copied().collect();
        let transposed: BTreeSet<Variable> = Variable::ALL
            .iter()
            .copied()
            .filter(|v| v.signature().contains(&c))
            .collect();
        assert_eq!(members, transposed, "constraint {}", c.name());
    }

    let graph = wb.diagnoser().graph();
    assert!(graph.gain(Variable::Msf1, Variable::De1).unwrap() > 0.0);
    assert_eq!(graph.sources(), vec![Variable::Msf1, Variable::Msf2]);
    for s in graph.sources() {
        assert!(graph.predecessors(s).is_empty(), "{s} has predecessors");
    }

    // A healthy rig raises nothing and every method says "no fault".
    let o = wb.run_scenario(&FaultScenario::nominal()).unwrap();
    assert!(o.alarms.alarmed().is_empty());
    assert!(o.alarms.violated().is_empty());
    assert!(o.fdi_exact() && o.dx_exact() && o.ig_exact());

    println!(
        "[PASS] criterion 6: signatures, constraint membership, influence graph and the \
         healthy-rig baseline all check out"
    );
}

#[test]
fn criterion_7_reports_are_deterministic() {
    let wb = &at(0.2).wb;
    let first = render_report_csv(&wb.run_table1().unwrap());
    let second = render_report_csv(&wb.run_table1().unwrap());
    assert_eq!(first, second, "same workbench, different bytes");

    let rebuilt = Workbench::new(Config::default()).expect("default rig builds");
    let third = render_report_csv(&rebuilt.run_table1().unwrap());
    assert_eq!(first, third, "rebuilt workbench, different bytes");

    assert!(first.starts_with("scenario,injected,"));
    assert_eq!(first.lines().count(), 20);
    println!(
        "[PASS] criterion 7: benchmark CSV is byte-identical across runs and across \
         freshly built workbenches"
    );
}
