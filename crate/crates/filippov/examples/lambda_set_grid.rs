//! Membership grids for preimages of the switching set.
//!
//! Lambda_n collects the points whose first n iterates stay off every
//! switching surface; its complement layers are the preimages F^{-j}(Sigma).
//! For the linear map diag(2, 1/2) and the surface x = 1 the layers are
//! the vertical lines x = 2^{-j}; for the constant-field benchmark's
//! time-1 map they are the horizontal lines y = -j.

use filippov::flow::FlowControls;
use filippov::lambda::{lambda_set_depth, LinearMap};
use filippov::poincare::{ExtendedSystem, PoincareMap};
use filippov::systems::{example1, polynomial_surface, Poly, SwitchingFunction};
use nalgebra::{dmatrix, dvector};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Linear saddle map with the surface x = 1: preimages at x = 2^{-j}.
    let f = LinearMap { matrix: dmatrix![2.0, 0.0; 0.0, 0.5] };
    let surface: SwitchingFunction = polynomial_surface(
        0,
        "x = 1",
        Poly::new(2, vec![(1.0, vec![1, 0]), (-1.0, vec![0, 0])])?,
    );
    let set = lambda_set_depth(
        &f,
        std::slice::from_ref(&surface),
        5,
        &dvector![0.01, -0.1],
        &dvector![1.2, 0.1],
        &[241, 1],
        2.5e-3,
    )?;
    println!("linear saddle, surface x = 1, grid on [0.01, 1.2] x {{0}}:");
    println!("  new members per layer: {:?}", set.counts);
    for j in 0..=5 {
        let xs: Vec<f64> =
            set.points.iter().filter(|p| p.depth == Some(j)).map(|p| p.x[0]).collect();
        for &x in &xs {
            println!(
                "  layer {j}: grid point x = {x:.5}, exact preimage at {:.5}",
                0.5f64.powi(j as i32)
            );
        }
        assert_eq!(set.members(j).len(), set.counts[..=j].iter().sum::<usize>());
    }
    println!("  members(j) nests cumulatively: sizes {:?}", (0..=5).map(|j| set.members(j).len()).collect::<Vec<_>>());

    // Time-1 map of the constant-field benchmark: the slab below y = 0
    // reaches the surface after |y| time units, so depth j sits at y = -j.
    let ext = ExtendedSystem::autonomous(example1(), 1.0)?;
    let map = PoincareMap::new(&ext, 0.0, FlowControls::default());
    let surfaces = map.system.surfaces.clone();
    let set = lambda_set_depth(
        &map,
        &surfaces,
        3,
        &dvector![-0.5, -3.4],
        &dvector![0.5, 0.6],
        &[1, 81],
        0.021,
    )?;
    println!("\nconstant-field benchmark, time-1 map, y in [-3.4, 0.6]:");
    println!("  new members per layer: {:?}", set.counts);
    for j in 0..=3 {
        let ys: Vec<f64> =
            set.points.iter().filter(|p| p.depth == Some(j)).map(|p| p.x[1]).collect();
        println!("  layer {j} (expected y = -{j}): {} points, y in {:?}", ys.len(), minmax(&ys));
    }
    let flagged = set.points.iter().filter(|p| p.failed.is_some()).count();
    println!("  flagged points: {flagged}");
    Ok(())
}

fn minmax(v: &[f64]) -> Option<(f64, f64)> {
    let lo = v.iter().copied().reduce(f64::min)?;
    let hi = v.iter().copied().reduce(f64::max)?;
    Some((lo, hi))
}
