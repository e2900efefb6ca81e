//! The headline experiment: all 19 benchmark fault scenarios through
//! all three diagnosers, with the exact-identification tally.
//!
//! Run with `cargo run --example table1`.
//! Pass `--csv` for the machine-readable form.

use tritank::workbench::{render_report_csv, render_report_text, Config, Workbench};

fn main() {
    let csv = std::env::args().any(|a| a == "--csv");
    let wb = Workbench::new(Config::default()).expect("default rig builds");
    let report = wb.run_table1().expect("benchmark runs");
    if csv {
        print!("{}", render_report_csv(&report));
    } else {
        print!("{}", render_report_text(&report));
        println!();
        println!("reading the summary: signature matching (fdi) is reliable only");
        println!("when one fault is present and its row is unique; consistency");
        println!("with fault models (dx) recovers most combinations but accepts");
        println!("whatever reproduces the levels; the influence graph (ig) adds");
        println!("causal direction and sign constraints and drops only the");
        println!("heaviest masking case.");
    }
}
