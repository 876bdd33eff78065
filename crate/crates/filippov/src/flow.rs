//! Global orbits of piecewise smooth systems in the crossing convention.
//!
//! [`solve`] integrates arc by arc: inside a region the component field is
//! smooth and the Dormand-Prince stepper runs freely; every accepted step is
//! scanned for sign changes of the switching functions, the earliest one is
//! polished to the event tolerance on the dense interpolant, and the hit is
//! classified. Certified crossings switch the active component and continue;
//! anything else (tangency, corner, degenerate gradient) truncates the orbit
//! with an explicit terminal status. A surface just crossed stays disarmed
//! until the orbit has left a small band around it, so the restart cannot
//! immediately re-trigger the same event.

use crate::ode::{self, DenseArc, Dopri5, OdeControls};
use crate::systems::{
    classify_point, PiecewiseSystem, PointClass, SmoothField, State, SwitchingFunction,
    Tolerances,
};
use crate::{Error, Result};

/// Controls for global flow construction.
#[derive(Debug, Clone, Copy)]
pub struct FlowControls {
    pub ode: OdeControls,
    pub tol: Tolerances,
    /// Absolute tolerance on |h| at a located event.
    pub event_tol: f64,
    /// A crossed surface re-arms once |h| exceeds `rearm_factor * event_tol`.
    pub rearm_factor: f64,
    /// Hard cap on the number of crossings per trajectory.
    pub event_cap: usize,
    /// Minimal time between consecutive events before accumulation is suspected.
    pub min_arc: f64,
    /// Interior dense samples per accepted step in the event scan.
    pub scan_points: usize,
    /// State norm beyond which the orbit counts as blown up.
    pub norm_cap: f64,
}

impl Default for FlowControls {
    fn default() -> Self {
        FlowControls {
            ode: OdeControls::default(),
            tol: Tolerances::default(),
            event_tol: 1e-12,
            rearm_factor: 10.0,
            event_cap: 10_000,
            min_arc: 1e-9,
            scan_points: 8,
            norm_cap: 1e8,
        }
    }
}

/// A certified crossing along a trajectory. `pre` and `post` are in
/// traversal order (the component active before and after the event along
/// the integration direction); `sign` is the intrinsic crossing sign of the
/// forward flow.
#[derive(Debug, Clone)]
pub struct CrossingEvent {
    pub t: f64,
    pub x: State,
    pub surface: usize,
    pub pre: usize,
    pub post: usize,
    pub sign: f64,
    pub residual: f64,
}

/// One smooth arc of a trajectory.
#[derive(Debug, Clone)]
pub struct FlowArc {
    pub component: usize,
    pub dense: DenseArc,
}

/// Why a trajectory stopped.
#[derive(Debug, Clone, PartialEq)]
pub enum Terminal {
    /// Reached the requested duration.
    Completed,
    /// Hit a point where the crossing convention does not apply.
    HitNonCrossing { class: PointClass },
    /// State norm exceeded the cap.
    BlewUp,
    /// Left the declared admissible domain (reserved for callers that clip).
    LeftDomain,
}

/// A global orbit: smooth arcs joined at crossing events.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub t0: f64,
    pub x0: State,
    /// Requested signed duration.
    pub requested: f64,
    pub arcs: Vec<FlowArc>,
    pub events: Vec<CrossingEvent>,
    pub status: Terminal,
}

impl Trajectory {
    pub fn t_end(&self) -> f64 {
        self.arcs.last().map(|a| a.dense.t1).unwrap_or(self.t0)
    }

    pub fn final_state(&self) -> State {
        self.arcs
            .last()
            .map(|a| a.dense.y1.clone())
            .unwrap_or_else(|| self.x0.clone())
    }

    pub fn direction(&self) -> f64 {
        if self.requested >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Dense evaluation across arcs; `t` must lie in the covered span.
    pub fn eval(&self, t: f64) -> State {
        if self.arcs.is_empty() {
            return self.x0.clone();
        }
        let dir = self.direction();
        let idx = self
            .arcs
            .partition_point(|a| (t - a.dense.t1) * dir > 0.0)
            .min(self.arcs.len() - 1);
        self.arcs[idx].dense.eval(t)
    }

    /// Smallest time gap between consecutive events.
    pub fn min_event_gap(&self) -> Option<f64> {
        self.events
            .windows(2)
            .map(|w| (w[1].t - w[0].t).abs())
            .min_by(|a, b| a.partial_cmp(b).unwrap())
    }
}

/// Integrate one smooth component field over a signed duration.
pub fn integrate_smooth(
    field: &SmoothField,
    x0: &State,
    t0: f64,
    dt: f64,
    controls: &OdeControls,
) -> Result<DenseArc> {
    let rhs = |y: &State, t: f64| field.eval(y, t);
    ode::integrate(&rhs, x0.clone(), t0, dt, controls)
}

/// Outcome of scanning an arc for surface events.
#[derive(Debug, Clone)]
pub struct EventHit {
    pub t: f64,
    pub surface: usize,
    pub residual: f64,
}

/// Earliest certified sign change of any switching function along the arc.
///
/// Returns `Ok(None)` when no surface changes sign. An interior near-touch
/// (|h| dips to the event tolerance without changing sign) cannot be
/// certified either way and raises a tangency-suspicion error.
pub fn locate_event(
    arc: &DenseArc,
    surfaces: &[SwitchingFunction],
    controls: &FlowControls,
) -> Result<Option<EventHit>> {
    let armed = vec![true; surfaces.len()];
    for step in arc.steps() {
        if let Some(hit) = scan_span(arc, step.t0, step.t1, surfaces, &armed, controls)? {
            return Ok(Some(hit));
        }
    }
    Ok(None)
}

/// Scan one step span for the earliest armed event, with the grazing check.
fn scan_span(
    arc: &DenseArc,
    ta: f64,
    tb: f64,
    surfaces: &[SwitchingFunction],
    armed: &[bool],
    controls: &FlowControls,
) -> Result<Option<EventHit>> {
    if surfaces.is_empty() || ta == tb {
        return Ok(None);
    }
    let m = controls.scan_points + 1;
    let mut times = Vec::with_capacity(m + 1);
    for j in 0..=m {
        times.push(ta + (tb - ta) * j as f64 / m as f64);
    }
    let mut best: Option<EventHit> = None;
    for (si, surf) in surfaces.iter().enumerate() {
        if !armed[si] {
            continue;
        }
        let mut values = Vec::with_capacity(times.len());
        for &t in &times {
            values.push(surf.eval(&arc.eval(t))?);
        }
        let mut changed = false;
        for j in 0..m {
            if values[j] == 0.0 || values[j].signum() != values[j + 1].signum() {
                let hit = refine_crossing(arc, surf, times[j], times[j + 1], controls)?;
                if best
                    .as_ref()
                    .map(|b| (hit.t - b.t) * (tb - ta).signum() < 0.0)
                    .unwrap_or(true)
                {
                    best = Some(hit);
                }
                changed = true;
                break;
            }
        }
        if changed {
            continue;
        }
        // No sign change: look for an interior |h| minimum grazing the surface.
        for j in 1..m {
            if values[j].abs() < values[j - 1].abs() && values[j].abs() <= values[j + 1].abs() {
                let (t_min, h_min, dh_min) =
                    refine_extremum(arc, surf, times[j - 1], times[j + 1])?;
                if h_min.abs() <= controls.event_tol {
                    let x = arc.eval(t_min);
                    let g = surf.gradient(&x)?;
                    let v = arc.deriv(t_min);
                    return Err(Error::Tangency {
                        surface: surf.index,
                        t: t_min,
                        value: dh_min.abs(),
                        threshold: controls.tol.tangency_rel * v.norm() * g.norm(),
                    });
                }
                break;
            }
        }
    }
    Ok(best)
}

/// Safeguarded Newton on g(t) = h(arc(t)) inside a sign-change bracket.
fn refine_crossing(
    arc: &DenseArc,
    surf: &SwitchingFunction,
    mut lo: f64,
    mut hi: f64,
    controls: &FlowControls,
) -> Result<EventHit> {
    let mut g_lo = surf.eval(&arc.eval(lo))?;
    let g_hi = surf.eval(&arc.eval(hi))?;
    if g_lo == 0.0 {
        return Ok(EventHit {
            t: lo,
            surface: surf.index,
            residual: 0.0,
        });
    }
    debug_assert!(g_lo.signum() != g_hi.signum() || g_hi == 0.0);
    let mut t = if g_hi == g_lo {
        0.5 * (lo + hi)
    } else {
        lo - g_lo * (hi - lo) / (g_hi - g_lo)
    };
    for _ in 0..80 {
        let x = arc.eval(t);
        let g = surf.eval(&x)?;
        if g.abs() <= controls.event_tol {
            return Ok(EventHit {
                t,
                surface: surf.index,
                residual: g.abs(),
            });
        }
        // Shrink the bracket around the sign change.
        if g.signum() == g_lo.signum() {
            lo = t;
            g_lo = g;
        } else {
            hi = t;
        }
        let grad = surf.gradient(&x)?;
        let dg = grad.dot(&arc.deriv(t));
        let newton = if dg != 0.0 { t - g / dg } else { f64::NAN };
        t = if newton.is_finite()
            && (newton - lo) * (newton - hi) < 0.0
        {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    let residual = surf.eval(&arc.eval(t))?.abs();
    Err(Error::NotConvergent {
        what: format!("event refinement on surface {}", surf.index),
        iterations: 80,
        residual,
    })
}

/// Locate the interior extremum of h along the arc inside [ta, tb] by
/// bisecting the derivative sign change; returns (t, h, dh/dt).
fn refine_extremum(
    arc: &DenseArc,
    surf: &SwitchingFunction,
    ta: f64,
    tb: f64,
) -> Result<(f64, f64, f64)> {
    let dh = |t: f64| -> Result<f64> {
        let x = arc.eval(t);
        Ok(surf.gradient(&x)?.dot(&arc.deriv(t)))
    };
    let mut lo = ta;
    let mut hi = tb;
    let mut d_lo = dh(lo)?;
    let d_hi = dh(hi)?;
    if d_lo.signum() == d_hi.signum() {
        // Monotone after all: report the smaller endpoint value.
        let (t, h) = [(ta, surf.eval(&arc.eval(ta))?), (tb, surf.eval(&arc.eval(tb))?)]
            .into_iter()
            .min_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .unwrap();
        return Ok((t, h, dh(t)?));
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let d_mid = dh(mid)?;
        if d_mid.signum() == d_lo.signum() {
            lo = mid;
            d_lo = d_mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    Ok((t, surf.eval(&arc.eval(t))?, dh(t)?))
}

/// Crossing time of the smooth flow of `field` from `r`, by Newton on
/// F(t) = h(phi(t; r)) seeded at `t_guess`.
pub fn crossing_time(
    field: &SmoothField,
    surface: &SwitchingFunction,
    r: &State,
    t_guess: f64,
    controls: &FlowControls,
) -> Result<f64> {
    let dir = if t_guess >= 0.0 { 1.0 } else { -1.0 };
    let mut span = (1.5 * t_guess.abs()).max(1e-3);
    let max_span = 10.0 * (t_guess.abs() + 1.0);
    let rhs = |y: &State, t: f64| field.eval(y, t);
    let mut arc = ode::integrate(&rhs, r.clone(), 0.0, dir * span, &controls.ode)?;
    let mut t = t_guess;
    let mut residual = f64::INFINITY;
    for _ in 0..60 {
        if t.abs() > span {
            span = (1.5 * t.abs()).min(max_span);
            if t.abs() > max_span {
                return Err(Error::NotConvergent {
                    what: format!("crossing time on surface {}", surface.index),
                    iterations: 60,
                    residual,
                });
            }
            arc = ode::integrate(&rhs, r.clone(), 0.0, dir * span, &controls.ode)?;
        }
        let x = arc.eval(t);
        let g = surface.eval(&x)?;
        residual = g.abs();
        if residual <= controls.event_tol {
            return Ok(t);
        }
        let grad = surface.gradient(&x)?;
        let f = field.eval(&x, t)?;
        let dg = grad.dot(&f);
        if dg == 0.0 || !dg.is_finite() {
            return Err(Error::Tangency {
                surface: surface.index,
                t,
                value: dg.abs(),
                threshold: controls.tol.tangency_rel * f.norm() * grad.norm(),
            });
        }
        let t_next = t - g / dg;
        // Keep the iterate on the integrated side of r.
        t = if dir > 0.0 { t_next.max(0.0) } else { t_next.min(0.0) };
    }
    Err(Error::NotConvergent {
        what: format!("crossing time on surface {}", surface.index),
        iterations: 60,
        residual,
    })
}

/// Global solve: the flow of the piecewise system from `(x0, t0)` over the
/// signed `duration`, switching components at certified crossings only.
pub fn solve(
    system: &PiecewiseSystem,
    x0: &State,
    t0: f64,
    duration: f64,
    controls: &FlowControls,
) -> Result<Trajectory> {
    let start_class = classify_point(system, x0, t0, &controls.tol)?;
    let forward = duration >= 0.0;
    let mut armed = vec![true; system.surfaces.len()];
    let component = match &start_class {
        PointClass::Interior { component } => *component,
        PointClass::Crossing {
            surface, pre, post, ..
        } => {
            let pos = surface_position(system, *surface)?;
            armed[pos] = false;
            if forward {
                *post
            } else {
                *pre
            }
        }
        other => {
            return Err(Error::Hypothesis {
                reason: format!(
                    "initial point classifies as {:?}; the flow starts only from Interior or Crossing points",
                    other
                ),
            })
        }
    };

    let mut traj = Trajectory {
        t0,
        x0: x0.clone(),
        requested: duration,
        arcs: Vec::new(),
        events: Vec::new(),
        status: Terminal::Completed,
    };
    if duration == 0.0 {
        traj.arcs.push(FlowArc {
            component,
            dense: DenseArc::trivial(t0, x0.clone()),
        });
        return Ok(traj);
    }

    let t_end = t0 + duration;
    let mut t_cur = t0;
    let mut x_cur = x0.clone();
    let mut comp_cur = component;

    'outer: loop {
        let field = &system.components[comp_cur];
        let rhs = |y: &State, t: f64| field.eval(y, t);
        let mut stepper = Dopri5::new(
            &rhs,
            t_cur,
            x_cur.clone(),
            duration,
            t_end - t_cur,
            controls.ode,
        )?;
        let mut arc = DenseArc::trivial(t_cur, x_cur.clone());
        loop {
            let step = match stepper.step_toward(t_end)? {
                Some(s) => s,
                None => {
                    traj.arcs.push(FlowArc {
                        component: comp_cur,
                        dense: arc,
                    });
                    traj.status = Terminal::Completed;
                    break 'outer;
                }
            };
            ode::push_step(&mut arc, step);
            let span_a = arc.steps().last().unwrap().t0;
            let span_b = arc.steps().last().unwrap().t1;

            // Re-arm surfaces once the orbit is clear of the event band.
            let x_a = arc.eval(span_a);
            for (pos, surf) in system.surfaces.iter().enumerate() {
                if !armed[pos]
                    && surf.eval(&x_a)?.abs() > controls.rearm_factor * controls.event_tol
                {
                    armed[pos] = true;
                }
            }

            let scan = scan_span(&arc, span_a, span_b, &system.surfaces, &armed, controls);
            let hit = match scan {
                Ok(h) => h,
                Err(Error::Tangency { surface, t, .. }) => {
                    truncate(&mut arc, t);
                    traj.arcs.push(FlowArc {
                        component: comp_cur,
                        dense: arc,
                    });
                    traj.status = Terminal::HitNonCrossing {
                        class: PointClass::Tangency { surface },
                    };
                    break 'outer;
                }
                Err(e) => return Err(e),
            };

            if let Some(hit) = hit {
                let x_star = arc.eval(hit.t);
                truncate(&mut arc, hit.t);
                traj.arcs.push(FlowArc {
                    component: comp_cur,
                    dense: arc,
                });
                let class = classify_point(system, &x_star, hit.t, &controls.tol)?;
                match class {
                    PointClass::Crossing {
                        surface,
                        pre,
                        post,
                        sign,
                    } => {
                        let (expected, next) = if forward { (pre, post) } else { (post, pre) };
                        if expected != comp_cur {
                            return Err(Error::Invalid(format!(
                                "crossing bookkeeping: component {} arrived at a crossing whose {} side is {}",
                                comp_cur,
                                if forward { "pre" } else { "post" },
                                expected
                            )));
                        }
                        if let Some(last) = traj.events.last() {
                            let gap = (hit.t - last.t).abs();
                            if gap < controls.min_arc {
                                return Err(Error::EventAccumulation {
                                    gap,
                                    min_arc: controls.min_arc,
                                    t: hit.t,
                                });
                            }
                        }
                        if traj.events.len() + 1 > controls.event_cap {
                            return Err(Error::EventCap {
                                cap: controls.event_cap,
                                t: hit.t,
                            });
                        }
                        traj.events.push(CrossingEvent {
                            t: hit.t,
                            x: x_star.clone(),
                            surface,
                            pre: comp_cur,
                            post: next,
                            sign,
                            residual: hit.residual,
                        });
                        let pos = surface_position(system, surface)?;
                        armed[pos] = false;
                        t_cur = hit.t;
                        x_cur = x_star;
                        comp_cur = next;
                        continue 'outer;
                    }
                    other => {
                        traj.status = Terminal::HitNonCrossing { class: other };
                        break 'outer;
                    }
                }
            }

            if stepper.y.norm() > controls.norm_cap {
                traj.arcs.push(FlowArc {
                    component: comp_cur,
                    dense: arc,
                });
                traj.status = Terminal::BlewUp;
                break 'outer;
            }
        }
    }
    Ok(traj)
}

fn truncate(arc: &mut DenseArc, t: f64) {
    arc.t1 = t;
    arc.y1 = arc.eval(t);
}

fn surface_position(system: &PiecewiseSystem, index: usize) -> Result<usize> {
    system
        .surfaces
        .iter()
        .position(|s| s.index == index)
        .ok_or_else(|| Error::Invalid(format!("no surface with index {}", index)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{constant_field, example1, example1_flow, linear_field};
    use nalgebra::DMatrix;

    fn v2(x: f64, y: f64) -> State {
        State::from_vec(vec![x, y])
    }

    #[test]
    fn smooth_integration_of_the_upper_field() {
        let field = constant_field("upper", vec![0.0, 1.0]);
        let arc = integrate_smooth(&field, &v2(0.0, -0.5), 0.0, 0.3, &OdeControls::default()).unwrap();
        assert!((arc.y1 - v2(0.0, -0.2)).norm() < 1e-14);
        let zero = integrate_smooth(&field, &v2(0.2, 0.7), 1.0, 0.0, &OdeControls::default()).unwrap();
        assert_eq!(zero.y1, v2(0.2, 0.7));
    }

    #[test]
    fn smooth_saddle_closed_form() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let field = linear_field("saddle", a);
        let arc = integrate_smooth(
            &field,
            &v2(1.0, 1.0),
            0.0,
            std::f64::consts::LN_2,
            &OdeControls::default(),
        )
        .unwrap();
        assert!((arc.y1 - v2(2.0, 0.5)).norm() < 1e-10);
    }

    #[test]
    fn locate_event_on_the_lower_arc() {
        let sys = example1();
        let controls = FlowControls::default();
        let arc = integrate_smooth(&sys.components[0], &v2(0.0, -0.5), 0.0, 1.0, &controls.ode).unwrap();
        let hit = locate_event(&arc, &sys.surfaces, &controls).unwrap().unwrap();
        assert_eq!(hit.surface, 0);
        assert!((hit.t - 0.5).abs() < 1e-12);
        assert!(hit.residual <= controls.event_tol);
    }

    #[test]
    fn no_event_when_the_arc_stays_above() {
        let sys = example1();
        let controls = FlowControls::default();
        let arc = integrate_smooth(&sys.components[1], &v2(0.0, 0.5), 0.0, 1.0, &controls.ode).unwrap();
        assert!(locate_event(&arc, &sys.surfaces, &controls).unwrap().is_none());
    }

    #[test]
    fn quadratic_graze_raises_tangency_suspicion() {
        // y(t) = (t - 1)^2 touches y = 0 at t = 1 without changing sign.
        let field = SmoothField::new(2, "graze", |x: &State, _t| {
            State::from_vec(vec![1.0, 2.0 * (x[0] - 1.0)])
        });
        let surf = SwitchingFunction::new(0, "y", |x: &State| x[1]);
        let controls = FlowControls::default();
        let arc = integrate_smooth(&field, &v2(0.0, 1.0), 0.0, 2.0, &controls.ode).unwrap();
        match locate_event(&arc, &[surf], &controls) {
            Err(Error::Tangency { surface, t, .. }) => {
                assert_eq!(surface, 0);
                assert!((t - 1.0).abs() < 1e-5);
            }
            other => panic!("expected tangency suspicion, got {:?}", other),
        }
    }

    #[test]
    fn crossing_time_newton() {
        let sys = example1();
        let controls = FlowControls::default();
        let t = crossing_time(&sys.components[0], &sys.surfaces[0], &v2(0.0, -0.5), 0.4, &controls).unwrap();
        assert!((t - 0.5).abs() < 1e-12);
        let t = crossing_time(&sys.components[0], &sys.surfaces[0], &v2(0.2, -0.8), 0.5, &controls).unwrap();
        assert!((t - 0.8).abs() < 1e-12);
        // Already on the surface with positive Lie derivative.
        let t = crossing_time(&sys.components[0], &sys.surfaces[0], &v2(0.3, 0.0), 0.1, &controls).unwrap();
        assert!(t.abs() < 1e-12);
    }

    #[test]
    fn solve_crosses_once_and_matches_the_closed_form() {
        let sys = example1();
        let controls = FlowControls::default();
        let traj = solve(&sys, &v2(0.0, -0.5), 0.0, 1.0, &controls).unwrap();
        assert_eq!(traj.status, Terminal::Completed);
        assert_eq!(traj.events.len(), 1);
        let ev = &traj.events[0];
        assert!((ev.t - 0.5).abs() < 1e-12);
        assert!((ev.x[0] - 0.5).abs() < 1e-12);
        assert_eq!((ev.pre, ev.post), (0, 1));
        assert!(ev.residual <= controls.event_tol);
        let (ex, ey) = example1_flow(1.0, 0.0, -0.5);
        assert!((traj.final_state() - v2(ex, ey)).norm() < 1e-12);
    }

    #[test]
    fn solve_without_events() {
        let sys = example1();
        let traj = solve(&sys, &v2(0.0, 0.5), 0.0, 1.0, &FlowControls::default()).unwrap();
        assert_eq!(traj.status, Terminal::Completed);
        assert!(traj.events.is_empty());
        assert!((traj.final_state() - v2(0.0, 1.5)).norm() < 1e-12);
    }

    #[test]
    fn solve_grid_against_the_closed_form() {
        let sys = example1();
        let controls = FlowControls::default();
        for ix in -3..=3 {
            for iy in -3..=3 {
                for tt in [-1.5, -0.6, 0.6, 1.5] {
                    let (x, y) = (0.4 * ix as f64, 0.4 * iy as f64);
                    let traj = solve(&sys, &v2(x, y), 0.0, tt, &controls).unwrap();
                    let (ex, ey) = example1_flow(tt, x, y);
                    let err = (traj.final_state() - v2(ex, ey)).norm();
                    assert!(
                        err < 1e-9,
                        "mismatch {:.2e} at x={} y={} t={}",
                        err,
                        x,
                        y,
                        tt
                    );
                }
            }
        }
    }

    #[test]
    fn backward_solve_inverts_forward() {
        let sys = example1();
        let controls = FlowControls::default();
        for p in [v2(0.0, -0.5), v2(0.3, 0.2), v2(-1.0, -0.1)] {
            let fwd = solve(&sys, &p, 0.0, 1.0, &controls).unwrap();
            let back = solve(&sys, &fwd.final_state(), 1.0, -1.0, &controls).unwrap();
            assert_eq!(back.status, Terminal::Completed);
            assert!((back.final_state() - &p).norm() < 1e-8);
        }
    }

    #[test]
    fn solve_is_a_flow_in_time() {
        let sys = example1();
        let controls = FlowControls::default();
        for p in [v2(0.0, -0.7), v2(0.5, 0.1), v2(-0.2, -0.3)] {
            for (t1, t2) in [(0.4, 0.8), (0.9, 0.3), (0.25, 1.5)] {
                let leg1 = solve(&sys, &p, 0.0, t1, &controls).unwrap();
                let leg2 = solve(&sys, &leg1.final_state(), t1, t2, &controls).unwrap();
                let whole = solve(&sys, &p, 0.0, t1 + t2, &controls).unwrap();
                assert!((leg2.final_state() - whole.final_state()).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn trajectory_dense_evaluation_spans_arcs() {
        let sys = example1();
        let traj = solve(&sys, &v2(0.0, -0.5), 0.0, 1.0, &FlowControls::default()).unwrap();
        for k in 0..=20 {
            let t = k as f64 / 20.0;
            let (ex, ey) = example1_flow(t, 0.0, -0.5);
            assert!((traj.eval(t) - v2(ex, ey)).norm() < 1e-11, "at t = {}", t);
        }
    }

    #[test]
    fn starting_on_the_surface_uses_the_crossing_orientation() {
        let sys = example1();
        let controls = FlowControls::default();
        // Forward from the crossing: continue with the upper field.
        let fwd = solve(&sys, &v2(0.3, 0.0), 0.0, 0.5, &controls).unwrap();
        assert!((fwd.final_state() - v2(0.3, 0.5)).norm() < 1e-12);
        // Backward from the crossing: re-enter the lower field.
        let back = solve(&sys, &v2(0.3, 0.0), 0.0, -0.5, &controls).unwrap();
        assert!((back.final_state() - v2(-0.2, -0.5)).norm() < 1e-12);
    }

    #[test]
    fn tangency_start_is_refused() {
        let toward_up = constant_field("up", vec![0.0, 1.0]);
        let toward_down = constant_field("down", vec![0.0, -1.0]);
        let h = SwitchingFunction::new(0, "y", |x: &State| x[1]);
        let sys = PiecewiseSystem::new(
            vec![toward_up, toward_down],
            vec![h],
            crate::systems::RegionTable::new(vec![(vec![-1], 0), (vec![1], 1)]),
        )
        .unwrap();
        match solve(&sys, &v2(0.0, 0.0), 0.0, 1.0, &FlowControls::default()) {
            Err(Error::Hypothesis { .. }) => {}
            other => panic!("expected hypothesis violation, got {:?}", other),
        }
    }
}
