//! Flow-map Jacobians across switching surfaces.
//!
//! Each certified crossing inserts a saltation factor between the smooth
//! variational arcs. For the constant-field benchmark the correction is
//! exactly [[1, -1], [0, 1]]; on the damped benchmark the transported
//! Jacobian is checked against a central finite difference of the flow map
//! through one to several crossings.

use filippov::benchmarks;
use filippov::flow::{solve, FlowControls};
use filippov::systems::{example1, Tolerances};
use filippov::variational::jacobian;
use nalgebra::{dmatrix, dvector, DMatrix};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let controls = FlowControls::default();
    let tol = Tolerances::default();

    let sys = example1();
    let traj = solve(&sys, &dvector![0.0, -0.5], 0.0, 1.0, &controls)?;
    let tj = jacobian(&sys, &traj, &tol)?;
    let exact = dmatrix![1.0, -1.0; 0.0, 1.0];
    println!("constant-field Jacobian through one crossing:");
    print_matrix(&tj.matrix);
    println!("|J - exact|_max = {:.2e}\n", (&tj.matrix - &exact).amax());

    let tb = benchmarks::tier_b()?;
    let x0 = dvector![0.8, 0.3];
    let t = 4.0;
    let traj = solve(&tb.system, &x0, 0.0, t, &controls)?;
    let tj = jacobian(&tb.system, &traj, &tol)?;
    println!(
        "damped benchmark from ({}, {}) over T = {t}: {} crossings, condition {:.2e}",
        x0[0], x0[1], tj.crossings, tj.condition
    );
    print_matrix(&tj.matrix);

    let h = 1e-6;
    let mut fd = DMatrix::zeros(2, 2);
    for j in 0..2 {
        let mut xp = x0.clone();
        let mut xm = x0.clone();
        xp[j] += h;
        xm[j] -= h;
        let fp = solve(&tb.system, &xp, 0.0, t, &controls)?.final_state();
        let fm = solve(&tb.system, &xm, 0.0, t, &controls)?.final_state();
        fd.set_column(j, &((fp - fm) / (2.0 * h)));
    }
    println!("central finite difference:");
    print_matrix(&fd);
    println!(
        "relative disagreement {:.2e}",
        (&tj.matrix - &fd).amax() / tj.matrix.amax()
    );
    Ok(())
}

fn print_matrix(m: &DMatrix<f64>) {
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:>14.8}", m[(i, j)])).collect();
        println!("  [{}]", row.join(" "));
    }
}
