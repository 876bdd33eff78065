//! Point classification under the crossing-only convention.
//!
//! Orbits continue through a switching surface only at certified crossing
//! points: one active surface, regular gradient, and one-sided Lie
//! derivatives of equal sign. Everything else (tangency, opposite signs,
//! corners) terminates the flow with the class attached, never silently.

use filippov::systems::{
    classify_point, polynomial_field, polynomial_surface, PiecewiseSystem, PointClass, Poly,
    RegionTable, Tolerances,
};
use nalgebra::dvector;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Lower field (1, x), upper field (0, 1), switching at y = 0. The lower
    // Lie derivative is x, so the surface is crossed for x > 0, repelled
    // for x < 0, and grazed at x = 0.
    let graze = PiecewiseSystem::new(
        vec![
            polynomial_field(
                "lower",
                vec![
                    Poly::new(2, vec![(1.0, vec![0, 0])])?,
                    Poly::var(2, 0),
                ],
            )?,
            polynomial_field(
                "upper",
                vec![Poly::new(2, vec![])?, Poly::new(2, vec![(1.0, vec![0, 0])])?],
            )?,
        ],
        vec![polynomial_surface(0, "y", Poly::var(2, 1))],
        RegionTable::new(vec![(vec![-1], 0), (vec![1], 1)]),
    )?;

    // Two surfaces x = 0 and y = 0 meeting at the origin.
    let cross = PiecewiseSystem::new(
        vec![polynomial_field(
            "northeast drift",
            vec![
                Poly::new(2, vec![(1.0, vec![0, 0])])?,
                Poly::new(2, vec![(1.0, vec![0, 0])])?,
            ],
        )?; 4],
        vec![
            polynomial_surface(0, "x", Poly::var(2, 0)),
            polynomial_surface(1, "y", Poly::var(2, 1)),
        ],
        RegionTable::new(vec![
            (vec![-1, -1], 0),
            (vec![-1, 1], 1),
            (vec![1, -1], 2),
            (vec![1, 1], 3),
        ]),
    )?;

    let tol = Tolerances::default();
    let cases: [(&str, &PiecewiseSystem, [f64; 2]); 5] = [
        ("interior point", &graze, [0.5, -0.3]),
        ("crossing (Lie derivative x = 1)", &graze, [1.0, 0.0]),
        ("no crossing orbit (x = -1)", &graze, [-1.0, 0.0]),
        ("grazing (x = 0)", &graze, [0.0, 0.0]),
        ("corner of two surfaces", &cross, [0.0, 0.0]),
    ];
    for (what, sys, p) in cases {
        let class = classify_point(sys, &dvector![p[0], p[1]], 0.0, &tol)?;
        println!("{what:35} -> {}", describe(&class));
    }
    Ok(())
}

fn describe(c: &PointClass) -> String {
    match c {
        PointClass::Interior { component } => format!("interior, component {component}"),
        PointClass::Crossing { surface, pre, post, sign } => {
            format!("crossing surface {surface}: {pre} -> {post}, sign {sign:+}")
        }
        PointClass::Tangency { surface } => format!("tangency on surface {surface}"),
        PointClass::NonRegular { surface } => format!("non-regular gradient on surface {surface}"),
        PointClass::Corner { surfaces } => format!("corner of surfaces {surfaces:?}"),
    }
}
