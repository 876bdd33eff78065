//! Tangent transport along trajectories: smooth variational propagation on
//! arcs and rank-one saltation corrections at crossings.
//!
//! The trajectory Jacobian is the ordered product `M_k S_k ... S_1 M_0` of
//! arc fundamental solutions and per-crossing corrections
//! `S = I + (X_post - X_pre) grad_h^T / <grad_h, X_pre>`, with both fields
//! evaluated at the crossing point and absolute crossing time, pre and post
//! taken in traversal order. The same formula serves forward and backward
//! runs: reversing time flips the sign of both the numerator fields and the
//! denominator Lie derivative.

use nalgebra::DMatrix;

use crate::flow::{CrossingEvent, Terminal, Trajectory};
use crate::linalg::condition_number;
use crate::ode::{self, DenseArc};
use crate::systems::{
    classify_point, PiecewiseSystem, PointClass, SmoothField, State, SwitchingFunction,
    Tolerances,
};
use crate::{Error, Result};

/// Trajectory Jacobian together with bookkeeping for trust decisions.
#[derive(Debug, Clone)]
pub struct TransportedJacobian {
    pub matrix: DMatrix<f64>,
    pub condition: f64,
    pub crossings: usize,
}

/// Propagate a matrix of tangent vectors along one smooth arc by integrating
/// the variational equation `M' = Df(phi(t), t) M` with the base orbit read
/// from the dense arc.
pub fn propagate_smooth(
    field: &SmoothField,
    arc: &DenseArc,
    m0: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = field.dim;
    if m0.nrows() != n {
        return Err(Error::Invalid(format!(
            "variational seed has {} rows, field dimension is {}",
            m0.nrows(),
            n
        )));
    }
    let cols = m0.ncols();
    let dt = arc.t1 - arc.t0;
    if dt == 0.0 {
        return Ok(m0.clone());
    }
    let rhs = |w: &State, t: f64| -> Result<State> {
        let x = arc.eval(t);
        let j = field.jacobian(&x, t)?;
        let m = DMatrix::from_column_slice(n, cols, w.as_slice());
        let k = j * m;
        Ok(State::from_column_slice(k.as_slice()))
    };
    let w0 = State::from_column_slice(m0.as_slice());
    let out = ode::integrate(&rhs, w0, arc.t0, dt, &default_variational_controls())?;
    Ok(DMatrix::from_column_slice(n, cols, out.y1.as_slice()))
}

fn default_variational_controls() -> ode::OdeControls {
    ode::OdeControls::default()
}

/// Saltation correction at a crossing, in traversal order.
pub fn crossing_correction(
    pre: &SmoothField,
    post: &SmoothField,
    surface: &SwitchingFunction,
    x: &State,
    t: f64,
    tol: &Tolerances,
) -> Result<DMatrix<f64>> {
    let f_pre = pre.eval(x, t)?;
    let f_post = post.eval(x, t)?;
    let grad = surface.gradient(x)?;
    let denom = grad.dot(&f_pre);
    let threshold = tol.tangency_rel * f_pre.norm() * grad.norm();
    if denom.abs() < threshold {
        return Err(Error::Tangency {
            surface: surface.index,
            t,
            value: denom.abs(),
            threshold,
        });
    }
    let n = x.len();
    let jump = (&f_post - &f_pre) / denom;
    let mut s = DMatrix::identity(n, n);
    for i in 0..n {
        for j in 0..n {
            s[(i, j)] += jump[i] * grad[j];
        }
    }
    Ok(s)
}

fn surface_by_index<'a>(
    system: &'a PiecewiseSystem,
    index: usize,
) -> Result<&'a SwitchingFunction> {
    system
        .surfaces
        .iter()
        .find(|s| s.index == index)
        .ok_or_else(|| Error::Invalid(format!("no surface with index {}", index)))
}

fn correction_for_event(
    system: &PiecewiseSystem,
    ev: &CrossingEvent,
    tol: &Tolerances,
) -> Result<DMatrix<f64>> {
    crossing_correction(
        &system.components[ev.pre],
        &system.components[ev.post],
        surface_by_index(system, ev.surface)?,
        &ev.x,
        ev.t,
        tol,
    )
}

/// Jacobian of the flow map along a completed trajectory whose endpoints are
/// off the switching set. Refused otherwise: on the surface only one-sided
/// derivatives exist.
pub fn jacobian(
    system: &PiecewiseSystem,
    trajectory: &Trajectory,
    tol: &Tolerances,
) -> Result<TransportedJacobian> {
    if trajectory.status != Terminal::Completed {
        return Err(Error::DomainExit {
            reason: format!(
                "jacobian requested on a trajectory with status {:?}",
                trajectory.status
            ),
        });
    }
    for (label, x, t) in [
        ("initial", &trajectory.x0, trajectory.t0),
        ("final", &trajectory.final_state(), trajectory.t_end()),
    ] {
        match classify_point(system, x, t, tol)? {
            PointClass::Interior { .. } => {}
            class => {
                return Err(Error::Hypothesis {
                    reason: format!(
                        "{} trajectory endpoint classifies as {:?}; only one-sided derivatives exist on the switching set",
                        label, class
                    ),
                })
            }
        }
    }
    let n = system.dim;
    let mut m = DMatrix::identity(n, n);
    let mut events = trajectory.events.iter();
    for arc in &trajectory.arcs {
        m = propagate_smooth(&system.components[arc.component], &arc.dense, &m)?;
        if let Some(ev) = events.next() {
            m = correction_for_event(system, ev, tol)? * m;
        }
    }
    Ok(TransportedJacobian {
        condition: condition_number(&m),
        crossings: trajectory.events.len(),
        matrix: m,
    })
}

/// Transport a single tangent vector along a completed trajectory. Cheaper
/// than the full matrix when only one direction is tracked, and exact for
/// the same reasons.
pub fn propagate_tangent(
    system: &PiecewiseSystem,
    trajectory: &Trajectory,
    v0: &State,
    tol: &Tolerances,
) -> Result<State> {
    let n = system.dim;
    let mut v = DMatrix::from_column_slice(n, 1, v0.as_slice());
    let mut events = trajectory.events.iter();
    for arc in &trajectory.arcs {
        v = propagate_smooth(&system.components[arc.component], &arc.dense, &v)?;
        if let Some(ev) = events.next() {
            v = correction_for_event(system, ev, tol)? * v;
        }
    }
    Ok(State::from_column_slice(v.as_slice()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{integrate_smooth, solve, FlowControls};
    use crate::ode::OdeControls;
    use crate::systems::{constant_field, example1, linear_field};
    use nalgebra::DVector;

    fn v2(x: f64, y: f64) -> State {
        State::from_vec(vec![x, y])
    }

    #[test]
    fn saddle_variational_is_exponential() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let field = linear_field("saddle", a);
        let t = 0.7;
        let arc = integrate_smooth(&field, &v2(0.3, -0.2), 0.0, t, &OdeControls::default()).unwrap();
        let m = propagate_smooth(&field, &arc, &DMatrix::identity(2, 2)).unwrap();
        assert!((m[(0, 0)] - t.exp()).abs() < 1e-9);
        assert!((m[(1, 1)] - (-t).exp()).abs() < 1e-9);
        assert!(m[(0, 1)].abs() < 1e-12);
        assert!(m[(1, 0)].abs() < 1e-12);
    }

    #[test]
    fn zero_duration_returns_the_seed() {
        let field = constant_field("f", vec![1.0, 1.0]);
        let arc = integrate_smooth(&field, &v2(0.0, 0.0), 0.0, 0.0, &OdeControls::default()).unwrap();
        let seed = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let m = propagate_smooth(&field, &arc, &seed).unwrap();
        assert_eq!(m, seed);
    }

    #[test]
    fn constant_fields_have_identity_variational() {
        let sys = example1();
        let arc = integrate_smooth(&sys.components[0], &v2(0.0, -0.5), 0.0, 0.4, &OdeControls::default()).unwrap();
        let m = propagate_smooth(&sys.components[0], &arc, &DMatrix::identity(2, 2)).unwrap();
        assert!((m - DMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn crossing_correction_closed_form() {
        let sys = example1();
        let tol = Tolerances::default();
        let x = v2(0.5, 0.0);
        // Upward crossing: lower (1,1) to upper (0,1).
        let s = crossing_correction(&sys.components[0], &sys.components[1], &sys.surfaces[0], &x, 0.5, &tol).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 0.0, 1.0]);
        assert!((&s - &expected).norm() < 1e-14);
        // Reverse traversal swaps the roles.
        let s_back = crossing_correction(&sys.components[1], &sys.components[0], &sys.surfaces[0], &x, 0.5, &tol).unwrap();
        let expected_back = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!((&s_back - &expected_back).norm() < 1e-14);
        // Round trip is the identity.
        assert!((s_back * s - DMatrix::identity(2, 2)).norm() < 1e-14);
        // Equal fields cross without correction.
        let s_id = crossing_correction(&sys.components[0], &sys.components[0], &sys.surfaces[0], &x, 0.5, &tol).unwrap();
        assert!((s_id - DMatrix::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn determinant_identity_for_corrections() {
        // det S = <grad h, X_post> / <grad h, X_pre> for any field pair.
        let tol = Tolerances::default();
        let h = crate::systems::SwitchingFunction::new(0, "h", |x: &State| x[1] - 0.2 * x[0]);
        let pairs = [
            (vec![1.0, 1.0], vec![0.3, 2.0]),
            (vec![0.5, -1.0], vec![1.0, -0.4]),
            (vec![2.0, 1.3], vec![-1.0, 0.8]),
        ];
        for (fa, fb) in pairs {
            let pre = constant_field("a", fa.clone());
            let post = constant_field("b", fb.clone());
            let x = v2(0.7, 0.14);
            let grad = h.gradient(&x).unwrap();
            let la = grad.dot(&DVector::from_vec(fa));
            let lb = grad.dot(&DVector::from_vec(fb));
            let s = crossing_correction(&pre, &post, &h, &x, 0.0, &tol).unwrap();
            assert!((s.determinant() - lb / la).abs() < 1e-12);
        }
    }

    #[test]
    fn trajectory_jacobian_across_one_crossing() {
        let sys = example1();
        let controls = FlowControls::default();
        let traj = solve(&sys, &v2(0.0, -0.5), 0.0, 1.0, &controls).unwrap();
        let jac = jacobian(&sys, &traj, &controls.tol).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 0.0, 1.0]);
        assert!((&jac.matrix - &expected).norm() < 1e-10);
        assert_eq!(jac.crossings, 1);
        // Finite differences agree (the map is affine on this branch).
        let h = 1e-6;
        for j in 0..2 {
            let mut dp = v2(0.0, -0.5);
            dp[j] += h;
            let mut dm = v2(0.0, -0.5);
            dm[j] -= h;
            let fp = solve(&sys, &dp, 0.0, 1.0, &controls).unwrap().final_state();
            let fm = solve(&sys, &dm, 0.0, 1.0, &controls).unwrap().final_state();
            for i in 0..2 {
                let fd = (fp[i] - fm[i]) / (2.0 * h);
                assert!((fd - jac.matrix[(i, j)]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn crossing_free_jacobian_is_identity() {
        let sys = example1();
        let controls = FlowControls::default();
        let traj = solve(&sys, &v2(0.0, 0.5), 0.0, 1.0, &controls).unwrap();
        let jac = jacobian(&sys, &traj, &controls.tol).unwrap();
        assert!((jac.matrix - DMatrix::identity(2, 2)).norm() < 1e-12);
        assert_eq!(jac.crossings, 0);
    }

    #[test]
    fn jacobian_composes_across_legs() {
        let sys = example1();
        let controls = FlowControls::default();
        let p = v2(-0.2, -0.4);
        let leg1 = solve(&sys, &p, 0.0, 0.7, &controls).unwrap();
        let leg2 = solve(&sys, &leg1.final_state(), 0.7, 0.6, &controls).unwrap();
        let whole = solve(&sys, &p, 0.0, 1.3, &controls).unwrap();
        let j1 = jacobian(&sys, &leg1, &controls.tol).unwrap().matrix;
        let j2 = jacobian(&sys, &leg2, &controls.tol).unwrap().matrix;
        let jw = jacobian(&sys, &whole, &controls.tol).unwrap().matrix;
        assert!((j2 * j1 - jw).norm() < 1e-7);
    }

    #[test]
    fn endpoint_on_the_surface_is_refused() {
        let sys = example1();
        let controls = FlowControls::default();
        let traj = solve(&sys, &v2(0.0, -0.5), 0.0, 0.5, &controls).unwrap();
        assert!((traj.final_state()[1]).abs() < 1e-12);
        match jacobian(&sys, &traj, &controls.tol) {
            Err(Error::Hypothesis { .. }) => {}
            other => panic!("expected refusal, got {:?}", other),
        }
    }

    #[test]
    fn tangent_transport_matches_matrix_column() {
        let sys = example1();
        let controls = FlowControls::default();
        let traj = solve(&sys, &v2(0.1, -0.6), 0.0, 1.2, &controls).unwrap();
        let jac = jacobian(&sys, &traj, &controls.tol).unwrap();
        let v = propagate_tangent(&sys, &traj, &v2(1.0, 0.4), &controls.tol).unwrap();
        let expected = &jac.matrix * v2(1.0, 0.4);
        assert!((v - expected).norm() < 1e-10);
    }
}
