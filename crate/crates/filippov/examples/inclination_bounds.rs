//! Measured inclination constants and the bound chain they certify.
//!
//! On a saddle box V the nonlinear remainder of the return map is bounded
//! by k (and k1 on the refinement V1); feasibility of (a, k, k1) yields a
//! recursion that forces tangent slopes toward the unstable cone at rate
//! 1/b and keeps them below (1 + 1/(b1-1)) eta afterwards. Every iterate
//! of every trace inside V must satisfy the chain; iterates after the
//! first exit are excluded, not re-admitted.

use filippov::benchmarks;
use filippov::flow::FlowControls;
use filippov::lambda::{measure_constants_auto, verify_bounds, ChartBox, DEFAULT_ETA};
use filippov::manifolds::{adapted_coordinates, inclination_trace_from};
use filippov::poincare::{find_fixed_point, PoincareMap};
use nalgebra::dvector;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ext = benchmarks::tier_b()?.extended(0.02)?;
    let map = PoincareMap::new(&ext, 0.0, FlowControls::default());
    let saddle = find_fixed_point(&map, &dvector![0.0, 0.0])?;
    let chart = adapted_coordinates(&saddle)?;

    // The expanding multiplier is around 20, so orbits from the edge of a
    // generous box land far out on the homoclinic loop after one period
    // and the one-step remainder there is order one. Feasibility demands a
    // much smaller box; the bisection finds its scale.
    let box_v = ChartBox::uniform(2, 0.05)?;
    let box_v1 = ChartBox::new(dvector![0.01, 0.05])?;
    let c = measure_constants_auto(&map, &saddle, &chart, &box_v, &box_v1, 5, DEFAULT_ETA, 4)?;
    println!(
        "feasible box half-widths: V = ({:.3e}, {:.3e}), V1 = ({:.3e}, {:.3e})",
        c.box_v.half[0], c.box_v.half[1], c.box_v1.half[0], c.box_v1.half[1]
    );
    println!(
        "a  = {:.6}   k  = {:.4e}   a1 = a + k = {:.6}",
        c.a, c.k, c.a1
    );
    println!(
        "b  = 1/a - k = {:.6}   b1 = (b+1)/2 = {:.6}   k1 = {:.4e}",
        c.b, c.b1, c.k1
    );
    println!("eta = {:.1e}   feasible: {}\n", c.eta, c.feasible);

    // Traces seeded inside V, mostly along the stable direction so several
    // iterates stay in the box before the unstable coordinate ejects them.
    let (hs, hu) = (c.box_v.half[0], c.box_v.half[1]);
    let mut total_checked = 0usize;
    let mut all = true;
    for &(fs, fu, vs, vu) in &[
        (0.8, 1e-3, 1.0, 0.3),
        (-0.6, 5e-4, 1.0, -0.5),
        (0.4, -2e-3, 0.7, 1.0),
        (-0.9, -2e-4, 1.0, 0.05),
    ] {
        let r0 = chart.to_world(&dvector![fs * hs, fu * hu]);
        let v0 = &chart.basis * dvector![vs, vu];
        let trace = inclination_trace_from(&map, &chart, r0, v0, 12, false)?;
        let rep = verify_bounds(&trace, &c, &chart);
        all &= rep.all_pass;
        println!(
            "seed l = ({:+.2e}, {:+.2e}): n0 = {:?}, n1 = {:?}, excluded past {:?}, all pass: {}",
            fs * hs,
            fu * hu,
            rep.n0,
            rep.n1,
            rep.excluded.first(),
            rep.all_pass
        );
        for ch in &rep.checks {
            if ch.applicable && ch.checked > 0 {
                total_checked += ch.checked;
                println!(
                    "    {:22} checked {:>3} worst margin {:+.3e}",
                    ch.name, ch.checked, ch.worst_margin
                );
            }
        }
    }
    println!("\n{total_checked} inequalities checked, all pass: {all}");
    Ok(())
}
