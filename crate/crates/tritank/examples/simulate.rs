//! Build the three-tank rig from its bond graph, derive the state
//! equations, and watch the measured levels move through a pump bias.
//!
//! Run with `cargo run --example simulate`.

use tritank::bondgraph::{assign_causality, derive_state_equations, three_tank, TankParams};
use tritank::plant::{simulate, FaultScenario, SimConfig};
use tritank::var::Variable;

fn main() {
    let params = TankParams::default();
    let model = three_tank(&params).expect("valid rig");
    println!("rig description");
    println!("---------------");
    print!("{}", model.describe());

    let causality = assign_causality(&model).expect("causal rig");
    let ss = derive_state_equations(&model, &causality).expect("derivable rig");

    println!("\nstate equations  dx/dt = A x + B u,  y = C x");
    println!("A = {:.1}", ss.a);
    println!("B = {:.1}", ss.b);
    println!("C = {:.1}", ss.c);

    let u = [1.0, 1.0];
    let steady = ss.steady_outputs(&u).expect("stable rig");
    println!("steady readings at u = {u:?}:");
    for (v, y) in Variable::MEASURED.iter().zip(&steady) {
        println!("  {v} = {y:.3}");
    }

    // Pump 1 delivers 20% more than commanded from t = 50 s on.
    let scenario = FaultScenario::single(Variable::Msf1, 50.0, 0.2);
    let cfg = SimConfig {
        u: u.to_vec(),
        ..SimConfig::default()
    };
    let trace = simulate(&ss, &scenario, &cfg).expect("finite trajectory");

    println!("\nreadings through the {} bias:", scenario.name);
    println!(
        "{:>6}  {:>7} {:>7} {:>7} {:>7} {:>7}",
        "t", "De1", "De2", "De3", "Df1", "Df2"
    );
    for probe in [49.0, 50.0, 51.0, 53.0, 57.0, 70.0, 99.0] {
        let i = trace
            .times
            .iter()
            .position(|&t| (t - probe).abs() < 1e-9)
            .unwrap();
        let y = &trace.outputs[i];
        println!(
            "{:>6.1}  {:>7.4} {:>7.4} {:>7.4} {:>7.4} {:>7.4}",
            trace.times[i], y[0], y[1], y[2], y[3], y[4]
        );
    }
    println!("\nthe rig settles to a new equilibrium about 0.4 above the old");
    println!("tank-1 level; the commanded u in the log never changes, which");
    println!("is exactly the discrepancy the residuals below will exploit.");
}
