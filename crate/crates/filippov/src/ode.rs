//! Adaptive Dormand-Prince 5(4) integration with a continuous extension.
//!
//! The stepper exposes one accepted step at a time so the flow layer can
//! scan each step for switching-surface events before committing to the
//! next. Every accepted step stores the quartic interpolation coefficients;
//! a [`DenseArc`] is the concatenation of those steps and evaluates the
//! solution and its time derivative anywhere inside its span. For constant
//! and linear right sides the continuous extension is exact to rounding,
//! which the closed-form oracles rely on.

use nalgebra::DVector;

use crate::systems::State;
use crate::{Error, Result};

/// Step-size and tolerance controls for the embedded pair.
#[derive(Debug, Clone, Copy)]
pub struct OdeControls {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Cap on |h|; infinite by default.
    pub h_max: f64,
    /// Budget of accepted + rejected steps per integration.
    pub max_steps: usize,
}

impl Default for OdeControls {
    fn default() -> Self {
        OdeControls {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            h_max: f64::INFINITY,
            max_steps: 10_000_000,
        }
    }
}

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

// Dormand-Prince tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
// Embedded error weights (order 5 minus order 4).
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Continuous-extension weights.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// One accepted step with its interpolation coefficients.
#[derive(Debug, Clone)]
pub struct DenseStep {
    pub t0: f64,
    pub t1: f64,
    cont: [State; 5],
}

impl DenseStep {
    /// Solution at `t` inside the step span.
    pub fn eval(&self, t: f64) -> State {
        let h = self.t1 - self.t0;
        let theta = if h == 0.0 { 0.0 } else { (t - self.t0) / h };
        let theta1 = 1.0 - theta;
        let [c1, c2, c3, c4, c5] = &self.cont;
        c1 + theta * (c2 + theta1 * (c3 + theta * (c4 + theta1 * c5)))
    }

    /// Time derivative of the interpolant at `t`.
    pub fn deriv(&self, t: f64) -> State {
        let h = self.t1 - self.t0;
        if h == 0.0 {
            return State::zeros(self.cont[0].len());
        }
        let theta = (t - self.t0) / h;
        let theta1 = 1.0 - theta;
        let [_, c2, c3, c4, c5] = &self.cont;
        (c2 + (1.0 - 2.0 * theta) * c3
            + theta * (2.0 - 3.0 * theta) * c4
            + 2.0 * theta * theta1 * (theta1 - theta) * c5)
            / h
    }

    pub fn y0(&self) -> State {
        self.cont[0].clone()
    }

    pub fn y1(&self) -> State {
        &self.cont[0] + &self.cont[1]
    }
}

/// A contiguous run of accepted steps from `t0` to `t1` (either direction).
#[derive(Debug, Clone)]
pub struct DenseArc {
    pub t0: f64,
    pub t1: f64,
    pub y0: State,
    pub y1: State,
    steps: Vec<DenseStep>,
}

impl DenseArc {
    pub fn trivial(t0: f64, y0: State) -> Self {
        DenseArc {
            t0,
            t1: t0,
            y0: y0.clone(),
            y1: y0,
            steps: Vec::new(),
        }
    }

    pub fn steps(&self) -> &[DenseStep] {
        &self.steps
    }

    pub fn direction(&self) -> f64 {
        if self.t1 >= self.t0 {
            1.0
        } else {
            -1.0
        }
    }

    fn locate(&self, t: f64) -> &DenseStep {
        debug_assert!(!self.steps.is_empty());
        let dir = self.direction();
        // First step whose far end is at or beyond t.
        let idx = self
            .steps
            .partition_point(|s| (t - s.t1) * dir > 0.0)
            .min(self.steps.len() - 1);
        &self.steps[idx]
    }

    /// Solution at `t`; `t` must lie inside the arc span (a small slack for
    /// rounding at the ends is tolerated).
    pub fn eval(&self, t: f64) -> State {
        if self.steps.is_empty() {
            return self.y0.clone();
        }
        let dir = self.direction();
        let slack = 1e-9 * (1.0 + self.t0.abs().max(self.t1.abs()));
        debug_assert!(
            (t - self.t0) * dir >= -slack && (self.t1 - t) * dir >= -slack,
            "dense evaluation at t = {} outside [{}, {}]",
            t,
            self.t0,
            self.t1
        );
        self.locate(t).eval(t)
    }

    /// Interpolant derivative at `t`.
    pub fn deriv(&self, t: f64) -> State {
        if self.steps.is_empty() {
            return State::zeros(self.y0.len());
        }
        self.locate(t).deriv(t)
    }

    fn push(&mut self, step: DenseStep) {
        self.t1 = step.t1;
        self.y1 = step.y1();
        self.steps.push(step);
    }
}

/// Step-at-a-time Dormand-Prince driver with first-same-as-last reuse.
pub struct Dopri5<'f> {
    f: &'f dyn Fn(&State, f64) -> Result<State>,
    pub t: f64,
    pub y: State,
    k1: State,
    h: f64,
    dir: f64,
    controls: OdeControls,
    steps_used: usize,
}

impl<'f> Dopri5<'f> {
    /// `span` bounds how far from `t0` the driver will be asked to step; the
    /// starting-step probe stays inside it because the right hand side may be
    /// defined only on that window (a matrix flow riding a stored arc, say).
    pub fn new(
        f: &'f dyn Fn(&State, f64) -> Result<State>,
        t0: f64,
        y0: State,
        dir: f64,
        span: f64,
        controls: OdeControls,
    ) -> Result<Self> {
        let k1 = f(&y0, t0)?;
        let dir = if dir >= 0.0 { 1.0 } else { -1.0 };
        let h = initial_step(f, t0, &y0, &k1, dir, span.abs(), &controls)?;
        Ok(Dopri5 {
            f,
            t: t0,
            y: y0,
            k1,
            h,
            dir,
            controls,
            steps_used: 0,
        })
    }

    /// Advance one accepted step toward `t_limit`, clamping the step so the
    /// limit is never overshot. Returns `None` once the limit is reached.
    pub fn step_toward(&mut self, t_limit: f64) -> Result<Option<DenseStep>> {
        let remaining = (t_limit - self.t) * self.dir;
        let t_scale = 1.0 + self.t.abs();
        if remaining <= 1e-14 * t_scale {
            return Ok(None);
        }
        let mut h = self.h.min(self.controls.h_max).max(1e-14 * t_scale);
        let mut last_in_span = false;
        if h >= remaining {
            h = remaining;
            last_in_span = true;
        }
        loop {
            self.steps_used += 1;
            if self.steps_used > self.controls.max_steps {
                return Err(Error::NotConvergent {
                    what: "integration step budget".into(),
                    iterations: self.controls.max_steps,
                    residual: (t_limit - self.t).abs(),
                });
            }
            let hs = h * self.dir;
            let (y1, k_stages, err) = self.try_step(hs)?;
            if err <= 1.0 {
                let step = make_dense(&self.y, &y1, &k_stages, hs, self.t);
                // Step accepted: advance and propose the next step size.
                self.t = if last_in_span { t_limit } else { self.t + hs };
                self.y = y1;
                self.k1 = k_stages[6].clone();
                let fac = (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, FAC_MAX);
                self.h = (h * fac).min(self.controls.h_max);
                return Ok(Some(step));
            }
            let fac = (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, 1.0);
            h *= fac;
            last_in_span = false;
            if h <= 1e-14 * t_scale {
                return Err(Error::StepUnderflow { t: self.t, h });
            }
        }
    }

    /// One trial step of signed size `hs`; returns the candidate endpoint,
    /// all seven stages, and the scaled error norm.
    fn try_step(&self, hs: f64) -> Result<(State, [State; 7], f64)> {
        let (t, y) = (self.t, &self.y);
        let f = self.f;
        let k1 = self.k1.clone();
        let k2 = f(&(y + hs * (A21 * &k1)), t + C2 * hs)?;
        let k3 = f(&(y + hs * (A31 * &k1 + A32 * &k2)), t + C3 * hs)?;
        let k4 = f(&(y + hs * (A41 * &k1 + A42 * &k2 + A43 * &k3)), t + C4 * hs)?;
        let k5 = f(
            &(y + hs * (A51 * &k1 + A52 * &k2 + A53 * &k3 + A54 * &k4)),
            t + C5 * hs,
        )?;
        let k6 = f(
            &(y + hs * (A61 * &k1 + A62 * &k2 + A63 * &k3 + A64 * &k4 + A65 * &k5)),
            t + hs,
        )?;
        let y1 = y + hs * (B1 * &k1 + B3 * &k3 + B4 * &k4 + B5 * &k5 + B6 * &k6);
        let k7 = f(&y1, t + hs)?;
        let err_vec: DVector<f64> =
            hs * (E1 * &k1 + E3 * &k3 + E4 * &k4 + E5 * &k5 + E6 * &k6 + E7 * &k7);
        let n = y.len();
        let mut acc = 0.0;
        for i in 0..n {
            let sc = self.controls.abs_tol
                + self.controls.rel_tol * y[i].abs().max(y1[i].abs());
            let q = err_vec[i] / sc;
            acc += q * q;
        }
        let err = (acc / n as f64).sqrt();
        Ok((y1, [k1, k2, k3, k4, k5, k6, k7], err))
    }
}

fn make_dense(y0: &State, y1: &State, k: &[State; 7], hs: f64, t0: f64) -> DenseStep {
    let ydiff = y1 - y0;
    let bspl = hs * &k[0] - &ydiff;
    let cont5 = hs
        * (D1 * &k[0] + D3 * &k[2] + D4 * &k[3] + D5 * &k[4] + D6 * &k[5] + D7 * &k[6]);
    let cont4 = &ydiff - hs * &k[6] - &bspl;
    DenseStep {
        t0,
        t1: t0 + hs,
        cont: [y0.clone(), ydiff, bspl, cont4, cont5],
    }
}

/// Hairer-style starting step size estimate.
fn initial_step(
    f: &dyn Fn(&State, f64) -> Result<State>,
    t0: f64,
    y0: &State,
    f0: &State,
    dir: f64,
    span: f64,
    controls: &OdeControls,
) -> Result<f64> {
    let n = y0.len();
    let sc = |y: &State, i: usize| controls.abs_tol + controls.rel_tol * y[i].abs();
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for i in 0..n {
        let s = sc(y0, i);
        d0 += (y0[i] / s).powi(2);
        d1 += (f0[i] / s).powi(2);
    }
    let d0 = (d0 / n as f64).sqrt();
    let d1 = (d1 / n as f64).sqrt();
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    if span > 0.0 {
        h0 = h0.min(span);
    }
    let y1 = y0 + dir * h0 * f0;
    let f1 = f(&y1, t0 + dir * h0)?;
    let mut d2 = 0.0;
    for i in 0..n {
        let s = sc(y0, i);
        d2 += ((f1[i] - f0[i]) / s).powi(2);
    }
    let d2 = (d2 / n as f64).sqrt() / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok((100.0 * h0).min(h1).min(controls.h_max))
}

/// Integrate `y' = f(y, t)` from `(t0, y0)` over signed duration `dt`.
pub fn integrate(
    f: &dyn Fn(&State, f64) -> Result<State>,
    y0: State,
    t0: f64,
    dt: f64,
    controls: &OdeControls,
) -> Result<DenseArc> {
    let mut arc = DenseArc::trivial(t0, y0.clone());
    if dt == 0.0 {
        return Ok(arc);
    }
    let t_end = t0 + dt;
    let mut stepper = Dopri5::new(f, t0, y0, dt, dt, *controls)?;
    while let Some(step) = stepper.step_toward(t_end)? {
        arc.push(step);
    }
    arc.t1 = t_end;
    arc.y1 = stepper.y;
    Ok(arc)
}

/// Extend an arc in place by driving a stepper (used by the flow layer).
pub(crate) fn push_step(arc: &mut DenseArc, step: DenseStep) {
    arc.push(step);
}
