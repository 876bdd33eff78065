//! Time-T return maps for periodically forced piecewise smooth systems.
//!
//! An [`ExtendedSystem`] pairs an autonomous base system with an optional
//! T-periodic perturbation scaled by `epsilon`; the sum is an ordinary
//! non-autonomous [`PiecewiseSystem`] and all flow machinery applies
//! unchanged. The [`PoincareMap`] at phase section `t0` sends `x` to
//! `phi(T; x, t0)`, the state reached after one forcing period. Points whose
//! orbit leaves the crossing regime (tangency, corner, blow-up, event
//! budget) are outside the map's domain; such refusals are reported as
//! errors and collected in a domain log rather than silently patched.
//!
//! [`find_fixed_point`] runs a damped Newton iteration on `P(x) - x` with
//! Jacobians from the variational transport, falling back to finite
//! differences of the map when a trajectory grazes the tangency threshold.
//! The result carries the spectrum split into stable and unstable parts
//! together with the certified hyperbolicity margin.

use std::sync::Mutex;

use nalgebra::{Complex, DMatrix};

use crate::error::Error;
use crate::flow::{self, FlowControls, Terminal, Trajectory};
use crate::linalg;
use crate::systems::{PiecewiseSystem, SmoothField, State};
use crate::variational::{self, TransportedJacobian};
use crate::Result;

/// Minimal distance of every Floquet multiplier from the unit circle for a
/// fixed point to count as hyperbolic.
pub const HYPERBOLICITY_MARGIN: f64 = 1e-6;

/// Newton residual target for fixed point location.
pub const NEWTON_TOL: f64 = 1e-10;

const NEWTON_MAX_ITER: usize = 60;

/// Relative step for finite difference Jacobians of the return map.
const MAP_FD_STEP: f64 = 1e-6;

/// A T-periodic forcing term: one field per component of the base system.
#[derive(Clone)]
pub struct Perturbation {
    pub fields: Vec<SmoothField>,
    pub period: f64,
}

impl Perturbation {
    pub fn new(fields: Vec<SmoothField>, period: f64) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::Invalid(format!("perturbation period {period} must be positive")));
        }
        Ok(Perturbation { fields, period })
    }
}

/// Autonomous base plus scaled periodic forcing, presented as a single
/// piecewise system. Switching surfaces are shared with the base: the
/// forcing changes the vector fields, never the geometry.
pub struct ExtendedSystem {
    pub base: PiecewiseSystem,
    pub perturbation: Option<Perturbation>,
    pub period: f64,
    pub epsilon: f64,
    effective: PiecewiseSystem,
}

impl ExtendedSystem {
    pub fn new(
        base: PiecewiseSystem,
        perturbation: Option<Perturbation>,
        period: f64,
        epsilon: f64,
    ) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::Invalid(format!("period {period} must be positive")));
        }
        if let Some(p) = &perturbation {
            if p.fields.len() != base.components.len() {
                return Err(Error::Invalid(format!(
                    "perturbation has {} fields for {} components",
                    p.fields.len(),
                    base.components.len()
                )));
            }
            if (p.period - period).abs() > 1e-12 * period {
                return Err(Error::Invalid(format!(
                    "perturbation period {} differs from system period {}",
                    p.period, period
                )));
            }
            for f in &p.fields {
                if f.dim != base.dim {
                    return Err(Error::Invalid(format!(
                        "perturbation field dimension {} does not match state dimension {}",
                        f.dim, base.dim
                    )));
                }
            }
        }
        let effective = build_effective(&base, perturbation.as_ref(), period, epsilon)?;
        Ok(ExtendedSystem { base, perturbation, period, epsilon, effective })
    }

    /// Autonomous system viewed as trivially forced with the given period.
    pub fn autonomous(base: PiecewiseSystem, period: f64) -> Result<Self> {
        ExtendedSystem::new(base, None, period, 0.0)
    }

    /// The combined system `X0 + epsilon * X1` actually integrated.
    pub fn system(&self) -> &PiecewiseSystem {
        &self.effective
    }

    /// Same base and forcing at a different amplitude.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<ExtendedSystem> {
        ExtendedSystem::new(self.base.clone(), self.perturbation.clone(), self.period, epsilon)
    }

    pub fn flow(
        &self,
        x0: &State,
        t0: f64,
        duration: f64,
        controls: &FlowControls,
    ) -> Result<Trajectory> {
        flow::solve(&self.effective, x0, t0, duration, controls)
    }
}

fn build_effective(
    base: &PiecewiseSystem,
    perturbation: Option<&Perturbation>,
    period: f64,
    epsilon: f64,
) -> Result<PiecewiseSystem> {
    let mut components = Vec::with_capacity(base.components.len());
    match perturbation {
        None => components.extend(base.components.iter().cloned()),
        Some(p) => {
            for (f0, f1) in base.components.iter().zip(&p.fields) {
                let mut f =
                    SmoothField::combine(format!("{} + eps*forcing", f0.label), f0, 1.0, f1, epsilon)?;
                f.period = Some(period);
                components.push(f);
            }
        }
    }
    PiecewiseSystem::new(components, base.surfaces.clone(), base.assignment.clone())
}

/// A point refused by the return map, with the obstruction that stopped it.
#[derive(Clone, Debug)]
pub struct RefusalRecord {
    pub x: State,
    pub kind: &'static str,
    pub message: String,
}

/// Time-T map `x -> phi(T; x, t0)` of the effective system at phase `t0`.
pub struct PoincareMap {
    pub system: PiecewiseSystem,
    pub period: f64,
    pub section: f64,
    pub epsilon: f64,
    pub controls: FlowControls,
    refusals: Mutex<Vec<RefusalRecord>>,
}

impl PoincareMap {
    pub fn new(ext: &ExtendedSystem, section: f64, controls: FlowControls) -> PoincareMap {
        PoincareMap {
            system: ext.system().clone(),
            period: ext.period,
            section,
            epsilon: ext.epsilon,
            controls,
            refusals: Mutex::new(Vec::new()),
        }
    }

    /// Full orbit segment over one period. Truncated orbits are recorded in
    /// the domain log and reported as errors: the map is undefined there.
    pub fn eval_trajectory(&self, x: &State) -> Result<Trajectory> {
        let traj = flow::solve(&self.system, x, self.section, self.period, &self.controls)
            .map_err(|e| self.refuse(x, e))?;
        match &traj.status {
            Terminal::Completed => Ok(traj),
            other => {
                let err = Error::DomainExit {
                    reason: format!("orbit from section t0={} stopped: {:?}", self.section, other),
                };
                Err(self.refuse(x, err))
            }
        }
    }

    pub fn eval(&self, x: &State) -> Result<State> {
        Ok(self.eval_trajectory(x)?.final_state())
    }

    /// Backward orbit segment realizing the inverse map: integrates from
    /// the arrival phase `t0 + T` back to the section.
    pub fn inverse_trajectory(&self, x: &State) -> Result<Trajectory> {
        let traj = flow::solve(
            &self.system,
            x,
            self.section + self.period,
            -self.period,
            &self.controls,
        )
        .map_err(|e| self.refuse(x, e))?;
        match &traj.status {
            Terminal::Completed => Ok(traj),
            other => {
                let err = Error::DomainExit {
                    reason: format!("backward orbit to section t0={} stopped: {:?}", self.section, other),
                };
                Err(self.refuse(x, err))
            }
        }
    }

    /// Inverse map, evaluated by backward flow.
    pub fn eval_inverse(&self, x: &State) -> Result<State> {
        Ok(self.inverse_trajectory(x)?.final_state())
    }

    /// n-fold composition; negative n iterates the inverse.
    pub fn iterate(&self, x: &State, n: i64) -> Result<State> {
        let mut y = x.clone();
        for _ in 0..n.unsigned_abs() {
            y = if n >= 0 { self.eval(&y)? } else { self.eval_inverse(&y)? };
        }
        Ok(y)
    }

    /// Derivative of the map via variational transport along the orbit.
    pub fn jacobian_at(&self, x: &State) -> Result<TransportedJacobian> {
        let traj = self.eval_trajectory(x)?;
        variational::jacobian(&self.system, &traj, &self.controls.tol)
    }

    /// Central finite differences of the map itself. Slower and less
    /// accurate than transport, but defined whenever the neighboring orbits
    /// are, so it serves as the fallback near tangency thresholds.
    pub fn fd_jacobian(&self, x: &State) -> Result<DMatrix<f64>> {
        let n = x.len();
        let mut j = DMatrix::zeros(n, n);
        for col in 0..n {
            let step = MAP_FD_STEP * (1.0 + x[col].abs());
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[col] += step;
            xm[col] -= step;
            let fp = self.eval(&xp)?;
            let fm = self.eval(&xm)?;
            j.set_column(col, &((fp - fm) / (2.0 * step)));
        }
        Ok(j)
    }

    /// Points refused so far, in evaluation order.
    pub fn domain_log(&self) -> Vec<RefusalRecord> {
        self.refusals.lock().unwrap().clone()
    }

    fn refuse(&self, x: &State, err: Error) -> Error {
        self.refusals.lock().unwrap().push(RefusalRecord {
            x: x.clone(),
            kind: err.kind(),
            message: err.to_string(),
        });
        err
    }
}

/// A hyperbolic fixed point of the return map with its certified spectrum.
#[derive(Clone, Debug)]
pub struct SaddleData {
    pub point: State,
    pub section: f64,
    pub epsilon: f64,
    pub jacobian: DMatrix<f64>,
    pub eigenvalues: Vec<Complex<f64>>,
    pub stable: Vec<linalg::EigenPair>,
    pub unstable: Vec<linalg::EigenPair>,
    /// min over the spectrum of | |alpha| - 1 |.
    pub margin: f64,
    /// |P(p) - p| at acceptance.
    pub residual: f64,
}

impl SaddleData {
    pub fn stable_dim(&self) -> usize {
        self.stable.len()
    }

    pub fn unstable_dim(&self) -> usize {
        self.unstable.len()
    }

    pub fn is_saddle(&self) -> bool {
        !self.stable.is_empty() && !self.unstable.is_empty()
    }

    /// Real unit eigenvector for a one dimensional stable part.
    pub fn stable_direction(&self) -> Result<State> {
        real_direction(&self.stable, "stable")
    }

    /// Real unit eigenvector for a one dimensional unstable part.
    pub fn unstable_direction(&self) -> Result<State> {
        real_direction(&self.unstable, "unstable")
    }
}

fn real_direction(part: &[linalg::EigenPair], which: &str) -> Result<State> {
    if part.len() != 1 {
        return Err(Error::DegenerateSpectrum {
            reason: format!("{which} subspace has dimension {}, expected 1", part.len()),
        });
    }
    let pair = &part[0];
    if pair.value.im.abs() > 1e-12 * (1.0 + pair.value.re.abs()) {
        return Err(Error::DegenerateSpectrum {
            reason: format!("{which} eigenvalue {} is not real", pair.value),
        });
    }
    let v: State = pair.vector.map(|z| z.re);
    let n = v.norm();
    if n < 1e-12 {
        return Err(Error::DegenerateSpectrum {
            reason: format!("{which} eigenvector has no real part"),
        });
    }
    Ok(v / n)
}

/// Newton iteration for `P(x) = x` with spectral certification.
///
/// The derivative comes from variational transport; if transport fails with
/// a tangency report the step retries with finite differences of the map.
/// Multipliers closer to the unit circle than [`HYPERBOLICITY_MARGIN`]
/// make the result an error rather than a silently accepted saddle.
pub fn find_fixed_point(map: &PoincareMap, guess: &State) -> Result<SaddleData> {
    let mut x = guess.clone();
    let id = DMatrix::<f64>::identity(x.len(), x.len());
    let mut residual = f64::INFINITY;
    let mut converged = false;
    for _ in 0..NEWTON_MAX_ITER {
        let fx = map.eval(&x)? - &x;
        residual = fx.norm();
        if residual <= NEWTON_TOL * (1.0 + x.norm()) {
            converged = true;
            break;
        }
        let dp = map_jacobian(map, &x)?;
        let lhs = &dp - &id;
        let delta = lhs
            .lu()
            .solve(&(-&fx))
            .ok_or_else(|| Error::DegenerateSpectrum {
                reason: "DP - I is singular along the Newton iteration".into(),
            })?;
        x += delta;
    }
    if !converged {
        return Err(Error::NotConvergent {
            what: "fixed point Newton iteration".into(),
            iterations: NEWTON_MAX_ITER,
            residual,
        });
    }

    let jacobian = map_jacobian(map, &x)?;
    let pairs = linalg::eigen_pairs(&jacobian)?;
    let eigenvalues: Vec<Complex<f64>> = pairs.iter().map(|p| p.value).collect();
    let margin = eigenvalues
        .iter()
        .map(|a| (a.norm() - 1.0).abs())
        .fold(f64::INFINITY, f64::min);
    if margin < HYPERBOLICITY_MARGIN {
        return Err(Error::NotHyperbolic { margin });
    }
    let mut stable = Vec::new();
    let mut unstable = Vec::new();
    for p in pairs {
        if p.value.norm() < 1.0 {
            stable.push(p);
        } else {
            unstable.push(p);
        }
    }
    Ok(SaddleData {
        point: x,
        section: map.section,
        epsilon: map.epsilon,
        jacobian,
        eigenvalues,
        stable,
        unstable,
        margin,
        residual,
    })
}

fn map_jacobian(map: &PoincareMap, x: &State) -> Result<DMatrix<f64>> {
    match map.jacobian_at(x) {
        Ok(tj) => Ok(tj.matrix),
        Err(Error::Tangency { .. }) => map.fd_jacobian(x),
        Err(e) => Err(e),
    }
}

/// Fixed points of the section family `P^{t}` for each phase in `sections`,
/// continued by flowing the previous point forward as the next predictor.
///
/// The returned family traces one orbit of the underlying periodic
/// solution: `closure_residual` measures how far flowing the last point to
/// `sections[0] + T` lands from the first point.
pub struct PhaseFamily {
    pub saddles: Vec<SaddleData>,
    pub closure_residual: f64,
}

pub fn saddle_phase_family(
    ext: &ExtendedSystem,
    sections: &[f64],
    guess: &State,
    controls: &FlowControls,
) -> Result<PhaseFamily> {
    if sections.is_empty() {
        return Err(Error::Invalid("empty section list".into()));
    }
    let mut saddles: Vec<SaddleData> = Vec::with_capacity(sections.len());
    let mut seed = guess.clone();
    for (k, &t0) in sections.iter().enumerate() {
        if k > 0 {
            let dt = t0 - sections[k - 1];
            let hop = ext.flow(&saddles[k - 1].point, sections[k - 1], dt, controls)?;
            if !matches!(hop.status, Terminal::Completed) {
                return Err(Error::DomainExit {
                    reason: format!("predictor orbit between sections stopped: {:?}", hop.status),
                });
            }
            seed = hop.final_state();
        }
        let map = PoincareMap::new(ext, t0, controls.clone());
        let saddle = find_fixed_point(&map, &seed)?;
        seed = saddle.point.clone();
        saddles.push(saddle);
    }
    let last = saddles.last().unwrap();
    let back = ext.flow(
        &last.point,
        *sections.last().unwrap(),
        sections[0] + ext.period - sections.last().unwrap(),
        controls,
    )?;
    let closure_residual = match back.status {
        Terminal::Completed => (back.final_state() - &saddles[0].point).norm(),
        _ => f64::INFINITY,
    };
    Ok(PhaseFamily { saddles, closure_residual })
}

/// One sample of the conjugacy defect between two phase sections.
#[derive(Clone, Debug)]
pub struct ConjugacySample {
    pub x: State,
    /// |phi_{t1->t2}(P^{t1}(x)) - P^{t2}(phi_{t1->t2}(x))|.
    pub residual: f64,
}

#[derive(Debug)]
pub struct ConjugacyReport {
    pub t1: f64,
    pub t2: f64,
    pub epsilon: f64,
    pub samples: Vec<ConjugacySample>,
    pub excluded: Vec<RefusalRecord>,
    pub max_residual: f64,
}

/// Checks that the flow between phases intertwines the two section maps:
/// `phi_{t1->t2} . P^{t1} = P^{t2} . phi_{t1->t2}` on every sample whose
/// four orbit legs all stay in the crossing regime. Samples that lose an
/// orbit leg are excluded and reported, never patched.
pub fn conjugacy_residual(
    ext: &ExtendedSystem,
    t1: f64,
    t2: f64,
    points: &[State],
    controls: &FlowControls,
) -> ConjugacyReport {
    let map1 = PoincareMap::new(ext, t1, controls.clone());
    let map2 = PoincareMap::new(ext, t2, controls.clone());
    let dt = t2 - t1;
    let mut samples = Vec::new();
    let mut excluded = Vec::new();
    for x in points {
        match conjugacy_sample(ext, &map1, &map2, t1, dt, x, controls) {
            Ok(residual) => samples.push(ConjugacySample { x: x.clone(), residual }),
            Err(e) => excluded.push(RefusalRecord {
                x: x.clone(),
                kind: e.kind(),
                message: e.to_string(),
            }),
        }
    }
    let max_residual = samples.iter().map(|s| s.residual).fold(0.0, f64::max);
    ConjugacyReport { t1, t2, epsilon: ext.epsilon, samples, excluded, max_residual }
}

fn conjugacy_sample(
    ext: &ExtendedSystem,
    map1: &PoincareMap,
    map2: &PoincareMap,
    t1: f64,
    dt: f64,
    x: &State,
    controls: &FlowControls,
) -> Result<f64> {
    let hop = |y: &State, from: f64| -> Result<State> {
        if dt == 0.0 {
            return Ok(y.clone());
        }
        let traj = ext.flow(y, from, dt, controls)?;
        match traj.status {
            Terminal::Completed => Ok(traj.final_state()),
            ref other => Err(Error::DomainExit {
                reason: format!("conjugacy transport leg stopped: {other:?}"),
            }),
        }
    };
    let left = hop(&map1.eval(x)?, t1 + map1.period)?;
    let right = map2.eval(&hop(x, t1)?)?;
    Ok((left - right).norm())
}
