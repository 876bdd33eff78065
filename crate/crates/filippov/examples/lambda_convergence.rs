//! C0/C1 accumulation of an iterated disk onto the unstable manifold.
//!
//! A small disk Delta crossing the stable manifold transversally at a
//! homoclinic point is iterated forward; sub-disks through the orbit of q
//! converge to any switching-clear disk D inside the unstable manifold in
//! C1, and to switching-meeting targets in C0. The table reports both
//! distances, the worst stable/unstable slope, and the sub-disk radius.

use filippov::benchmarks;
use filippov::flow::FlowControls;
use filippov::lambda::{lambda_experiment, measure_constants_auto, ChartBox, DEFAULT_ETA};
use filippov::manifolds::{
    adapted_coordinates, continue_manifold, find_transversal_intersection, local_manifold, Branch,
    GrowthCaps, ManifoldAtlas,
};
use filippov::poincare::{find_fixed_point, PoincareMap};
use nalgebra::dvector;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ext = benchmarks::tier_b()?.extended(0.02)?;
    let map = PoincareMap::new(&ext, 0.0, FlowControls::default());
    let saddle = find_fixed_point(&map, &dvector![0.0, 0.0])?;
    let chart = adapted_coordinates(&saddle)?;
    let caps = GrowthCaps::default();

    let grow = |branch| -> Result<_, filippov::error::Error> {
        let local = local_manifold(&map, &saddle, branch, 1, 0.05)?;
        continue_manifold(
            &map,
            &ManifoldAtlas::from_local(saddle.clone(), branch, 1, local),
            4,
            &caps,
        )
    };
    let wu = grow(Branch::Unstable)?;
    let ws = grow(Branch::Stable)?;

    let box_v = ChartBox::uniform(2, 0.05)?;
    let box_v1 = ChartBox::new(dvector![0.01, 0.05])?;
    let constants =
        measure_constants_auto(&map, &saddle, &chart, &box_v, &box_v1, 5, DEFAULT_ETA, 4)?;

    // Delta: a window of the unstable atlas around a macroscopic crossing
    // of the stable manifold. Homoclinic points accumulate on the saddle,
    // and the experiment prefers the steepest crossing inside Delta, so
    // the window steers it to the intended q. Target D: an early unstable
    // disk, switching-clear.
    let hits = find_transversal_intersection(&wu, &ws, &map.system.surfaces, 1e-4)?;
    let hit = hits
        .iter()
        .filter(|h| h.transversal && (&h.point - &saddle.point).norm() > 0.1)
        .max_by(|a, b| a.angle.total_cmp(&b.angle))
        .ok_or("no homoclinic point away from the saddle")?;
    let (disk_idx, param) = hit.wu_location;
    let delta = wu.disks[disk_idx].window((param - 0.3).max(-1.0), (param + 0.3).min(1.0))?;
    let target = wu.disks[1].clone();
    let table = lambda_experiment(
        &map,
        &chart,
        &delta,
        &ws,
        &target,
        &[1, 2, 3, 4, 5, 6],
        &caps,
        Some(&constants),
        1e-4,
    )?;

    println!(
        "homoclinic point q = ({:.6}, {:.6}), crossing angle {:.3e}",
        table.q[0], table.q[1], table.angle
    );
    println!(
        "C1 comparison binding (target clear of the switching set): {}",
        table.c1_required
    );
    if let Some(n2) = table.n2 {
        println!("bound chain predicts the eta regime past n2 = {n2}");
    }
    println!(
        "\n{:>3} {:>11} {:>11} {:>11} {:>11} {:>9}",
        "n", "C0", "C1", "mu_max", "radius", "coverage"
    );
    for r in &table.rows {
        println!(
            "{:>3} {:>11.4e} {:>11.4e} {:>11.4e} {:>11.4e} {:>9.3}",
            r.n, r.c0, r.c1, r.mu_max, r.radius, r.coverage
        );
    }
    Ok(())
}
