//! Classic signature-based isolation: one precomputed row of expected
//! residual violations per fault, matched against what the rig shows.
//!
//! The matrix is structurally sound -- every row is distinct -- yet the
//! demo runs straight into its two blind spots: patterns produced by
//! several faults at once match either the wrong single row or a pile
//! of two-fault unions, and outer pressure sensors leave a pattern no
//! row predicts at steady state.
//!
//! Run with `cargo run --example signature_matrix`.

use tritank::fdi::{diagnose, SignatureMatrix};
use tritank::var::{format_sets, Variable};
use tritank::workbench::{Config, Workbench};

fn main() {
    let matrix = SignatureMatrix::from_structure();
    println!("signature matrix (x = fault makes the residual fire)");
    print!("{}", matrix.render());
    println!("rows distinct: {}\n", matrix.rows_are_distinct());

    let wb = Workbench::new(Config::default()).expect("default rig builds");
    let cases: [&[Variable]; 5] = [
        &[Variable::Msf1],
        &[Variable::De2],
        &[Variable::De1],
        &[Variable::De3, Variable::Df2],
        &[Variable::Df1, Variable::Df2],
    ];

    for targets in cases {
        let scenario = wb.scenario_for(targets);
        let outcome = wb.run_scenario(&scenario).expect("scenario runs");
        let d = diagnose(wb.signature(), outcome.alarms.violation_mask());
        println!("injected {}", scenario.name);
        print!("  observed ");
        for (fired, c) in d.observed.iter().zip(tritank::var::Constraint::ALL) {
            if *fired {
                print!("{} ", c.name());
            }
        }
        println!();
        println!(
            "  verdict {} -> {}{}",
            d.verdict.label(),
            format_sets(&d.candidates),
            if d.candidates == vec![scenario.injected_set()] {
                "   (correct)"
            } else {
                "   (wrong or undecided)"
            }
        );
    }

    println!("\nthe {{De3, Df2}} case is the telling one: the combined pattern");
    println!("equals Df2's own row, so the matcher answers 'exactly Df2' with");
    println!("full confidence and silently drops the second fault.");
}
