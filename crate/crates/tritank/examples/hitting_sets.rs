//! Consistency-based diagnosis: violated equations become conflicts,
//! minimal hitting sets enumerate every explanation, and linear fault
//! models pick the ones that reproduce the measured levels.
//!
//! Run with `cargo run --example hitting_sets`.

use tritank::dx::{diagnose, minimal_hitting_sets};
use tritank::var::{format_set, format_sets, Variable};
use tritank::workbench::{Config, Workbench};

fn main() {
    let wb = Workbench::new(Config::default()).expect("default rig builds");

    // Two biased flow sensors: every residual fires.
    let scenario = wb.scenario_for(&[Variable::Df1, Variable::Df2]);
    let outcome = wb.run_scenario(&scenario).expect("scenario runs");

    println!("injected {}\n", scenario.name);
    println!("conflicts (one per violated equation, listing its suspects):");
    for c in &outcome.dx.conflicts {
        println!("  {}", format_set(c));
    }

    let minimal = minimal_hitting_sets(&outcome.dx.conflicts);
    println!("\nminimal hitting sets (structure alone):");
    println!("  {}", format_sets(&minimal));

    println!("\nfault-model refinement over all candidates up to size 7:");
    for fit in &outcome.dx.refinement.accepted {
        let mags: Vec<String> = fit
            .magnitudes
            .iter()
            .map(|(v, m)| format!("{v} = {m:+.4}"))
            .collect();
        println!(
            "  {}  fits with {}  (residual {:.2e})",
            format_set(&fit.candidate),
            mags.join(", "),
            fit.residual
        );
    }
    for note in &outcome.dx.refinement.notes {
        println!("  note: {note}");
    }
    println!("\nfinal diagnoses: {}", format_sets(&outcome.dx.diagnoses()));

    // The same machinery on a masking combination: five sensor biases
    // whose contributions cancel inside two residuals.  The levels are
    // genuinely reproducible by a smaller set, so refinement is led
    // astray -- an honest limit of steady-state reasoning.
    let masked = wb.scenario_for(&[
        Variable::Msf1,
        Variable::Msf2,
        Variable::De2,
        Variable::Df1,
        Variable::Df2,
    ]);
    let outcome = wb.run_scenario(&masked).expect("scenario runs");
    println!("\ninjected {}", masked.name);
    println!("violated equations only: {:?}", {
        let v: Vec<&str> = outcome.alarms.violated().iter().map(|c| c.name()).collect();
        v
    });
    println!("diagnoses: {}", format_sets(&outcome.dx.diagnoses()));
    println!("the four-fault answer reproduces the levels exactly, so no");
    println!("steady-state method can tell it from the five-fault truth.");

    let d = diagnose(&outcome.alarms, wb.templates(), 1e-3, 4);
    println!(
        "capping the search at size 4 keeps the answer: {}",
        format_sets(&d.diagnoses())
    );
}
