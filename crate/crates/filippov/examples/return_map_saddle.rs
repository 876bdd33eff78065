//! The time-T return map of the forced benchmark and its saddle.
//!
//! At amplitude zero the origin is a fixed point with multipliers exp(-3)
//! and exp(3); forcing drifts it without losing hyperbolicity. The map
//! composed with its inverse must return the start to Newton accuracy even
//! when the orbit passes through the switching surface.

use filippov::benchmarks;
use filippov::flow::FlowControls;
use filippov::poincare::{find_fixed_point, PoincareMap};
use nalgebra::dvector;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tb = benchmarks::tier_b()?;

    println!(
        "{:>5}  {:>12} {:>12}  {:>11} {:>11}  {:>7}",
        "eps", "saddle x", "saddle y", "|mult| in", "|mult| out", "margin"
    );
    for &eps in &[0.0, 0.01, 0.02, 0.05] {
        let ext = tb.extended(eps)?;
        let map = PoincareMap::new(&ext, 0.0, FlowControls::default());
        let s = find_fixed_point(&map, &dvector![0.0, 0.0])?;
        let mut mods: Vec<f64> = s.eigenvalues.iter().map(|z| z.norm()).collect();
        mods.sort_by(f64::total_cmp);
        println!(
            "{:>5.2}  {:>12.6e} {:>12.6e}  {:>11.6} {:>11.6}  {:>7.3}",
            eps, s.point[0], s.point[1], mods[0], mods[1], s.margin
        );
    }
    println!("unforced multipliers: exp(-3) = {:.6}, exp(3) = {:.4}\n", (-3.0f64).exp(), 3.0f64.exp());

    // Inverse composed with forward, through the switching surface.
    let ext = tb.extended(0.02)?;
    let map = PoincareMap::new(&ext, 0.0, FlowControls::default());
    let mut worst = 0.0f64;
    for &(x, y) in &[(0.9, 0.5), (0.5, 0.8), (1.1, -0.2), (0.2, 0.9)] {
        let x0 = dvector![x, y];
        let image = map.eval(&x0)?;
        let back = map.eval_inverse(&image)?;
        let crossings = map.eval_trajectory(&x0)?.events.len();
        let err = (&back - &x0).norm();
        worst = worst.max(err);
        println!(
            "P^-1(P(({x:>4.1}, {y:>4.1}))) returns with error {err:.2e}  ({crossings} crossings)"
        );
    }
    println!("\nworst round trip {worst:.2e}");
    Ok(())
}
