//! Conjugacy of return maps at different phase sections.
//!
//! The flow between phases t1 and t2 intertwines the two time-T maps:
//! phi . P_{t1} = P_{t2} . phi pointwise wherever orbits stay in the map
//! domain. Samples whose orbits refuse (tangency, blow-up) are excluded
//! with the reason recorded, never silently dropped. The saddle family
//! traced across a full period must close up on itself.

use filippov::benchmarks;
use filippov::flow::FlowControls;
use filippov::poincare::{conjugacy_residual, saddle_phase_family};
use nalgebra::{dvector, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tb = benchmarks::tier_b()?;
    let controls = FlowControls::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);

    for &eps in &[0.0, 0.02] {
        let ext = tb.extended(eps)?;
        println!("eps = {eps}:");
        for &(t1, t2) in &[(0.0, 0.75), (0.0, 1.5), (0.5, 2.25)] {
            let points: Vec<DVector<f64>> = (0..60)
                .map(|_| {
                    dvector![rng.gen_range(-0.4..0.8), rng.gen_range(-0.5..0.5)]
                })
                .collect();
            let rep = conjugacy_residual(&ext, t1, t2, &points, &controls);
            println!(
                "  sections ({t1:>4}, {t2:>4}): {} samples, {} excluded, max residual {:.3e}",
                rep.samples.len(),
                rep.excluded.len(),
                rep.max_residual
            );
        }
    }

    let ext = tb.extended(0.02)?;
    let sections: Vec<f64> = (0..8).map(|i| 3.0 * i as f64 / 8.0).collect();
    let family = saddle_phase_family(&ext, &sections, &dvector![0.0, 0.0], &controls)?;
    println!("\nsaddle continued across {} phases:", family.saddles.len());
    for s in &family.saddles {
        println!(
            "  t0 = {:>5.3}: saddle ({:>12.6e}, {:>12.6e}), margin {:.3}",
            s.section, s.point[0], s.point[1], s.margin
        );
    }
    println!("closure residual around the period: {:.3e}", family.closure_residual);
    Ok(())
}
