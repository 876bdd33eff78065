//! Transversal homoclinic points of the forced benchmark.
//!
//! At amplitude zero the loop survives as a connection: the atlases
//! coincide, and away from the saddle the sweep finds no transversal
//! crossing. Forcing splits the manifolds into a tangle; the sweep then
//! certifies crossing angle and switching-set clearance for every hit.

use filippov::benchmarks;
use filippov::flow::FlowControls;
use filippov::manifolds::{
    continue_manifold, find_transversal_intersection, local_manifold, Branch, GrowthCaps,
    ManifoldAtlas,
};
use filippov::poincare::{find_fixed_point, PoincareMap};
use nalgebra::dvector;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tb = benchmarks::tier_b()?;
    let caps = GrowthCaps::default();

    for &eps in &[0.0, 0.02] {
        let ext = tb.extended(eps)?;
        let map = PoincareMap::new(&ext, 0.0, FlowControls::default());
        let saddle = find_fixed_point(&map, &dvector![0.0, 0.0])?;
        let grow = |branch| -> Result<_, filippov::error::Error> {
            let local = local_manifold(&map, &saddle, branch, 1, 0.05)?;
            continue_manifold(
                &map,
                &ManifoldAtlas::from_local(saddle.clone(), branch, 1, local),
                5,
                &caps,
            )
        };
        let wu = grow(Branch::Unstable)?;
        let ws = grow(Branch::Stable)?;
        let hits = find_transversal_intersection(&wu, &ws, &map.system.surfaces, 1e-4)?;
        // The saddle itself is a trivial intersection of its own branches.
        let real: Vec<_> = hits
            .iter()
            .filter(|h| h.transversal && (&h.point - &saddle.point).norm() > 0.05)
            .collect();
        println!(
            "eps = {eps}: {} segment crossings, {} transversal homoclinic hits",
            hits.len(),
            real.len()
        );
        for h in real.iter().take(6) {
            println!(
                "  q = ({:>9.6}, {:>9.6})  angle {:.3e}  clearance {:.3e}",
                h.point[0], h.point[1], h.angle, h.sigma_distance
            );
        }
        println!();
    }
    Ok(())
}
