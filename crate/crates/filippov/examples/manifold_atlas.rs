//! Growing global manifold atlases at the forced saddle.
//!
//! Local disks come from the adapted eigenframe with a certified clearance
//! from the switching set; each continuation step maps the previous
//! fundamental segment forward (stable branches use the inverse map) and
//! remeshes to the curvature caps. Node counts grow roughly by the
//! unstable multiplier per step.

use filippov::benchmarks;
use filippov::flow::FlowControls;
use filippov::manifolds::{
    continue_manifold, local_manifold, Branch, GrowthCaps, ManifoldAtlas,
};
use filippov::poincare::{find_fixed_point, PoincareMap};
use nalgebra::dvector;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ext = benchmarks::tier_b()?.extended(0.02)?;
    let map = PoincareMap::new(&ext, 0.0, FlowControls::default());
    let saddle = find_fixed_point(&map, &dvector![0.0, 0.0])?;
    println!(
        "saddle ({:.6}, {:.6}), multipliers {:.4} / {:.4}",
        saddle.point[0],
        saddle.point[1],
        saddle.stable[0].value.norm(),
        saddle.unstable[0].value.norm()
    );

    let caps = GrowthCaps::default();
    for branch in [Branch::Unstable, Branch::Stable] {
        let local = local_manifold(&map, &saddle, branch, 1, 0.05)?;
        let atlas = ManifoldAtlas::from_local(saddle.clone(), branch, 1, local);
        let grown = continue_manifold(&map, &atlas, 5, &caps)?;
        println!("\n{:?} branch, side +1:", branch);
        println!(
            "{:>5} {:>7} {:>11} {:>9} {:>15}",
            "disk", "nodes", "resolution", "crossed", "arc length"
        );
        for (i, d) in grown.disks.iter().enumerate() {
            let crossed = d.crossed.iter().filter(|&&c| c).count();
            println!(
                "{:>5} {:>7} {:>11.3e} {:>9} {:>15.6}",
                i,
                d.nodes.len(),
                d.resolution,
                crossed,
                d.arc_length()
            );
        }
        for t in &grown.truncations {
            println!("truncated: {} at ({:.4}, {:.4})", t.message, t.x[0], t.x[1]);
        }
    }
    Ok(())
}
