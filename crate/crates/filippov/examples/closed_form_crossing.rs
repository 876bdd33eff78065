//! The constant-field benchmark against its closed form.
//!
//! Below y = 0 the field is (1,1), above it (0,1); an orbit started below
//! crosses after |y0| time units and continues straight up. The global
//! solver must reproduce the piecewise-linear formula to integrator
//! accuracy, event included.

use filippov::flow::{solve, FlowControls};
use filippov::systems::{example1, example1_flow};
use nalgebra::dvector;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = example1();
    let controls = FlowControls::default();

    println!("{:>6} {:>6} {:>5}  {:>12} {:>12}  {:>9}", "x0", "y0", "T", "x(T)", "y(T)", "error");
    let mut worst = 0.0f64;
    for &(x0, y0, t) in &[
        (0.0, -0.5, 1.0),
        (-1.0, -2.0, 3.0),
        (0.3, 0.2, 0.7),
        (0.0, -0.25, 0.25),
        (2.0, -1.0, 0.5),
    ] {
        let traj = solve(&sys, &dvector![x0, y0], 0.0, t, &controls)?;
        let end = traj.final_state();
        let (xe, ye) = example1_flow(t, x0, y0);
        let err = ((end[0] - xe).powi(2) + (end[1] - ye).powi(2)).sqrt();
        worst = worst.max(err);
        println!(
            "{:>6.2} {:>6.2} {:>5.2}  {:>12.8} {:>12.8}  {:>9.2e}",
            x0, y0, t, end[0], end[1], err
        );
    }
    println!("\nworst endpoint error {worst:.2e}");

    let traj = solve(&sys, &dvector![0.0, -0.5], 0.0, 1.0, &controls)?;
    for e in &traj.events {
        println!(
            "crossing at t = {:.15} through surface {} ({} -> {}), sign {:+}",
            e.t, e.surface, e.pre, e.post, e.sign
        );
    }
    Ok(())
}
