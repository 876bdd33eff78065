//! Quantitative verification of the inclination machinery.
//!
//! The module measures the proof constants of the accumulation argument on
//! an adapted chart, checks every inequality of the bound chain against
//! inclination traces produced by [`crate::manifolds`], computes C0/C1
//! distances between meshed disks, runs the disk-convergence experiment,
//! and approximates the finite-depth union of switching-set preimages.
//!
//! The bound chain lives on a box `V` around the saddle, in chart
//! coordinates `(x_s, x_u)` with the stable block first. Writing the map as
//! `P(x) = A x + (P_s, P_u)(x)` with `A` the linearization at the saddle,
//! the measured data are
//!
//! * `a`: the worst contraction among `|alpha_s|` and `1/|alpha_u|`,
//! * `k`: the largest partial of the nonlinear remainder over `V`,
//! * `k1`: the same maximum over a thin sub-box `V1`,
//!
//! and the derived quantities `a1 = a + k`, `b = 1/a - k`, `b1 = (b+1)/2`.
//! Feasibility demands `a1 < 1`, `b > 1`, `k < (b-1)^2/4`, `k < 1`, and
//! `k1 < min(eta, k)`; an exactly linear map has `k = k1 = 0`, which the
//! chain accepts as the degenerate tight case. Every downstream inequality
//! (one-step recursion, geometric decay, threshold index, seed and
//! preservation conditions, the final `(1 + 1/(b1-1)) eta` bound, and the
//! unstable-stretch lower bound) is checked per iterate with a small
//! relative slack so that exactly-tight linear data pass.
//!
//! Preimage sets are approximated forward: `x` lies in `F^{-n}(Sigma)`
//! exactly when `F^n(x)` lies in `Sigma`, so no inverse map is required and
//! the per-point distance can be pulled back through the orbit Jacobian.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::Error;
use crate::manifolds::{
    find_transversal_intersection, image_disk, inclination_trace_from, Branch, Chart, Disk,
    GrowthCaps, InclinationTrace, ManifoldAtlas,
};
use crate::poincare::{PoincareMap, SaddleData};
use crate::systems::{State, SwitchingFunction};
use crate::Result;

/// Default closeness target of the accumulation experiment.
pub const DEFAULT_ETA: f64 = 1e-2;
/// Relative slack applied to every bound-chain inequality, absorbing
/// propagation noise while keeping exactly-tight linear cases passing.
pub const BOUND_SLACK: f64 = 1e-9;
/// Smallest parameter half-width the sub-disk sizing will try.
const RHO_MIN: f64 = 1e-12;
/// Headroom multiplier of the predicted sub-disk half-width, how many
/// times a verified radius may be doubled chasing coverage, and the target
/// fraction of the comparison disk the window should project over.
const RHO_HEADROOM: f64 = 2.0;
const RHO_GROW_TRIES: usize = 3;
const COVER_GOAL: f64 = 0.95;
/// Hard cap on constants-measurement grids.
const MAX_GRID_POINTS: usize = 1_000_000;

/// Axis-aligned box around the chart origin, in chart coordinates.
#[derive(Clone, Debug)]
pub struct ChartBox {
    pub half: DVector<f64>,
}

impl ChartBox {
    pub fn new(half: DVector<f64>) -> Result<ChartBox> {
        if half.is_empty() || half.iter().any(|&h| !(h > 0.0) || !h.is_finite()) {
            return Err(Error::Invalid("box half-widths must be positive and finite".into()));
        }
        Ok(ChartBox { half })
    }

    pub fn uniform(dim: usize, half: f64) -> Result<ChartBox> {
        ChartBox::new(DVector::from_element(dim, half))
    }

    pub fn dim(&self) -> usize {
        self.half.len()
    }

    pub fn contains(&self, local: &State) -> bool {
        local.len() == self.half.len()
            && local.iter().zip(self.half.iter()).all(|(&x, &h)| x.abs() <= h)
    }

    pub fn scaled(&self, theta: f64) -> ChartBox {
        ChartBox { half: &self.half * theta }
    }
}

/// Measured contraction/nonlinearity data of the map on an adapted chart,
/// plus the derived chain constants and the feasibility verdict.
#[derive(Clone, Debug)]
pub struct ProofConstants {
    pub a: f64,
    pub k: f64,
    pub k1: f64,
    pub a1: f64,
    pub b: f64,
    pub b1: f64,
    pub eta: f64,
    pub box_v: ChartBox,
    pub box_v1: ChartBox,
    /// Grid points per axis used for the maxima.
    pub samples: usize,
    pub feasible: bool,
    /// Human-readable names of the failed inequalities, empty when feasible.
    pub failures: Vec<String>,
    /// Largest box scale factor found feasible by bisection, when the
    /// measured boxes are not.
    pub shrink_estimate: Option<f64>,
}

impl ProofConstants {
    /// Derives the chain constants and evaluates feasibility. No shrink
    /// estimate is attached; only [`measure_constants`] can re-measure.
    pub fn from_measurements(
        a: f64,
        k: f64,
        k1: f64,
        eta: f64,
        box_v: ChartBox,
        box_v1: ChartBox,
        samples: usize,
    ) -> ProofConstants {
        let a1 = a + k;
        let b = 1.0 / a - k;
        let b1 = 0.5 * (b + 1.0);
        let failures = feasibility_failures(a, k, k1, eta);
        ProofConstants {
            a,
            k,
            k1,
            a1,
            b,
            b1,
            eta,
            box_v,
            box_v1,
            samples,
            feasible: failures.is_empty(),
            failures,
            shrink_estimate: None,
        }
    }
}

fn feasibility_failures(a: f64, k: f64, k1: f64, eta: f64) -> Vec<String> {
    let mut out = Vec::new();
    if !(a > 0.0 && a < 1.0) {
        out.push(format!("a in (0, 1): a = {a:.6e}"));
        return out;
    }
    let a1 = a + k;
    let b = 1.0 / a - k;
    if !(a1 < 1.0) {
        out.push(format!("a1 = a + k < 1: a1 = {a1:.6e}"));
    }
    if !(b > 1.0) {
        out.push(format!("b = 1/a - k > 1: b = {b:.6e}"));
    }
    if !(k < 0.25 * (b - 1.0) * (b - 1.0)) {
        out.push(format!("k < (b-1)^2/4: k = {:.6e}, bound = {:.6e}", k, 0.25 * (b - 1.0) * (b - 1.0)));
    }
    if !(k < 1.0) {
        out.push(format!("k < 1: k = {k:.6e}"));
    }
    // An exactly linear map has k = k1 = 0; the strict refinement is
    // vacuous there and the chain holds with equalities.
    if !(k1 < eta.min(k) || (k1 == 0.0 && k == 0.0)) {
        out.push(format!("k1 < min(eta, k): k1 = {:.6e}, min = {:.6e}", k1, eta.min(k)));
    }
    out
}

/// Grid over `[-half, half]^dim`, `samples` points per axis, corners
/// included.
fn chart_grid(half: &DVector<f64>, samples: usize) -> Result<Vec<State>> {
    let dim = half.len();
    let total = samples.checked_pow(dim as u32).filter(|&t| t <= MAX_GRID_POINTS);
    let Some(total) = total else {
        return Err(Error::Invalid(format!(
            "constants grid {samples}^{dim} exceeds {MAX_GRID_POINTS} points"
        )));
    };
    if samples < 2 {
        return Err(Error::Invalid("constants grid needs at least 2 samples per axis".into()));
    }
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; dim];
    loop {
        let p = DVector::from_iterator(
            dim,
            idx.iter().zip(half.iter()).map(|(&j, &h)| {
                -h + 2.0 * h * j as f64 / (samples - 1) as f64
            }),
        );
        out.push(p);
        let mut axis = 0;
        loop {
            if axis == dim {
                return Ok(out);
            }
            idx[axis] += 1;
            if idx[axis] < samples {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
    }
}

/// Largest partial of the nonlinear remainder `DP(x) - DP(p)` over the box
/// grid, all in chart coordinates.
fn max_remainder(
    map: &PoincareMap,
    chart: &Chart,
    linear_part: &DMatrix<f64>,
    half: &DVector<f64>,
    samples: usize,
) -> Result<f64> {
    let grid = chart_grid(half, samples)?;
    let maxima: Result<Vec<f64>> = grid
        .par_iter()
        .map(|local| {
            let world = chart.to_world(local);
            let jac = map.jacobian_at(&world)?.matrix;
            let local_jac = &chart.inverse * jac * &chart.basis;
            let rem = local_jac - linear_part;
            Ok(rem.iter().fold(0.0f64, |m, &e| m.max(e.abs())))
        })
        .collect();
    Ok(maxima?.into_iter().fold(0.0, f64::max))
}

/// Measures the chain constants of `map` on the chart boxes.
///
/// `a` comes from the saddle spectrum, `k` and `k1` are grid maxima of the
/// remainder partials over `V` and `V1`. When the result is infeasible the
/// returned object carries the failing inequalities and a bisection
/// estimate of the box scale at which feasibility is recovered.
pub fn measure_constants(
    map: &PoincareMap,
    saddle: &SaddleData,
    chart: &Chart,
    box_v: &ChartBox,
    box_v1: &ChartBox,
    samples: usize,
    eta: f64,
) -> Result<ProofConstants> {
    if !(eta > 0.0) {
        return Err(Error::Invalid("eta must be positive".into()));
    }
    if box_v.dim() != chart.dim() || box_v1.dim() != chart.dim() {
        return Err(Error::Invalid("box dimension disagrees with the chart".into()));
    }
    if box_v1.half.iter().zip(box_v.half.iter()).any(|(&h1, &h)| h1 > h) {
        return Err(Error::Invalid("V1 must be contained in V".into()));
    }
    let a = saddle
        .stable
        .iter()
        .map(|p| p.value.norm())
        .chain(saddle.unstable.iter().map(|p| 1.0 / p.value.norm()))
        .fold(0.0f64, f64::max);
    let linear_part = &chart.inverse * &saddle.jacobian * &chart.basis;

    let k = max_remainder(map, chart, &linear_part, &box_v.half, samples)?;
    let k1 = max_remainder(map, chart, &linear_part, &box_v1.half, samples)?;
    let mut constants =
        ProofConstants::from_measurements(a, k, k1, eta, box_v.clone(), box_v1.clone(), samples);
    if !constants.feasible {
        constants.shrink_estimate =
            shrink_estimate(map, chart, &linear_part, a, eta, box_v, box_v1, samples)?;
    }
    Ok(constants)
}

/// Bisection estimate of the largest box scale at which the constants turn
/// feasible; `None` when even the smallest probed scale fails.
fn shrink_estimate(
    map: &PoincareMap,
    chart: &Chart,
    linear_part: &DMatrix<f64>,
    a: f64,
    eta: f64,
    box_v: &ChartBox,
    box_v1: &ChartBox,
    samples: usize,
) -> Result<Option<f64>> {
    let probe = |theta: f64| -> Result<bool> {
        let k = max_remainder(map, chart, linear_part, &box_v.scaled(theta).half, samples)?;
        let k1 = max_remainder(map, chart, linear_part, &box_v1.scaled(theta).half, samples)?;
        Ok(feasibility_failures(a, k, k1, eta).is_empty())
    };
    let mut hi = 1.0;
    let mut lo = 0.5;
    let mut found = false;
    for _ in 0..12 {
        if probe(lo)? {
            found = true;
            break;
        }
        hi = lo;
        lo *= 0.5;
    }
    if !found {
        return Ok(None);
    }
    for _ in 0..8 {
        let mid = 0.5 * (lo + hi);
        if probe(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo))
}

/// Repeats [`measure_constants`], shrinking both boxes by the bisection
/// estimate, until a feasible object is found or `max_shrinks` is spent.
/// The last (possibly infeasible) measurement is returned either way.
pub fn measure_constants_auto(
    map: &PoincareMap,
    saddle: &SaddleData,
    chart: &Chart,
    box_v: &ChartBox,
    box_v1: &ChartBox,
    samples: usize,
    eta: f64,
    max_shrinks: usize,
) -> Result<ProofConstants> {
    let mut v = box_v.clone();
    let mut v1 = box_v1.clone();
    let mut constants = measure_constants(map, saddle, chart, &v, &v1, samples, eta)?;
    for _ in 0..max_shrinks {
        if constants.feasible {
            return Ok(constants);
        }
        let theta = constants.shrink_estimate.unwrap_or(0.5);
        v = v.scaled(theta);
        v1 = v1.scaled(theta);
        constants = measure_constants(map, saddle, chart, &v, &v1, samples, eta)?;
    }
    Ok(constants)
}

/// Right-hand side of the one-step inclination recursion.
pub fn lambda_recursion_bound(c: &ProofConstants, lambda_prev: f64) -> f64 {
    (c.a1 * lambda_prev + c.k) / c.b
}

/// Geometric inclination bound after `n` steps from `lambda0`.
pub fn lambda_geometric_bound(c: &ProofConstants, lambda0: f64, n: usize) -> f64 {
    lambda0 / c.b.powi(n as i32) + c.k / (c.b - 1.0)
}

/// Geometric bound of the refined chain after `j` steps from `mu0`.
pub fn mu_geometric_bound(c: &ProofConstants, mu0: f64, j: usize) -> f64 {
    mu0 / c.b1.powi(j as i32) + c.k1 / (c.b1 - 1.0)
}

/// The final closeness bound `(1 + 1/(b1-1)) eta`.
pub fn final_eta_bound(c: &ProofConstants) -> f64 {
    (1.0 + 1.0 / (c.b1 - 1.0)) * c.eta
}

/// Lower bound on the expanding-block stretch given the previous
/// inclination.
pub fn stretch_lower_bound(c: &ProofConstants, mu_prev: f64) -> f64 {
    c.b - c.k * mu_prev
}

/// One failed inequality instance.
#[derive(Clone, Debug)]
pub struct BoundViolation {
    /// Absolute iterate index in the trace.
    pub n: usize,
    pub lhs: f64,
    pub rhs: f64,
}

/// Pass/fail record of one inequality family over a trace.
#[derive(Clone, Debug)]
pub struct BoundCheck {
    pub name: &'static str,
    /// False when the trace offers no iterate the inequality speaks about.
    pub applicable: bool,
    pub checked: usize,
    /// Worst `rhs - lhs` over the checked iterates (stretch checks store
    /// `lhs - rhs`); infinite when nothing was checked.
    pub worst_margin: f64,
    pub failures: Vec<BoundViolation>,
}

impl BoundCheck {
    fn new(name: &'static str) -> BoundCheck {
        BoundCheck {
            name,
            applicable: false,
            checked: 0,
            worst_margin: f64::INFINITY,
            failures: Vec::new(),
        }
    }

    fn record(&mut self, n: usize, lhs: f64, rhs: f64, slack: f64) {
        self.applicable = true;
        self.checked += 1;
        self.worst_margin = self.worst_margin.min(rhs - lhs);
        if lhs > rhs + slack {
            self.failures.push(BoundViolation { n, lhs, rhs });
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Full bound-chain verdict for one inclination trace.
#[derive(Clone, Debug)]
pub struct BoundReport {
    pub checks: Vec<BoundCheck>,
    /// Iterate indices excluded because the orbit left `V` (chain checks
    /// stop at the first exit; later returns are not re-admitted).
    pub excluded: Vec<usize>,
    /// Predicted index from which the inclination sits below `(b-1)/4`.
    pub n0: Option<usize>,
    /// Anchor of the refined chain: first in-`V1` iterate at or past `n0`
    /// with inclination at most `(b-1)/2`.
    pub n1: Option<usize>,
    /// Absolute index from which the final `eta` bound is demanded.
    pub n2: Option<usize>,
    pub feasible: bool,
    pub all_pass: bool,
}

impl BoundReport {
    pub fn check(&self, name: &str) -> Option<&BoundCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn smallest_n_with_decay(numerator: f64, base: f64, target: f64) -> usize {
    if numerator <= target {
        return 0;
    }
    ((numerator / target).ln() / base.ln()).ceil().max(0.0) as usize
}

/// Checks every inequality of the bound chain against a measured trace.
///
/// The trace and constants must live on the same chart; for backward
/// traces the constants must describe the inverse map. Iterates after the
/// orbit first leaves `V` are excluded and flagged. The refined chain is
/// anchored at the first iterate inside `V1` whose inclination has decayed
/// below `(b-1)/2`, mirroring the choice of the sub-disk in the argument,
/// and runs while the orbit stays inside `V1`.
pub fn verify_bounds(
    trace: &InclinationTrace,
    constants: &ProofConstants,
    chart: &Chart,
) -> BoundReport {
    let mut report = BoundReport {
        checks: Vec::new(),
        excluded: Vec::new(),
        n0: None,
        n1: None,
        n2: None,
        feasible: constants.feasible,
        all_pass: false,
    };
    if !constants.feasible {
        return report;
    }
    let c = constants;
    let records = &trace.records;

    // Longest prefix of iterates inside V with finite inclination.
    let mut prefix = 0;
    for r in records {
        let local = chart.to_local(&r.point);
        if !c.box_v.contains(&local) || !r.lambda.is_finite() {
            break;
        }
        prefix += 1;
    }
    report.excluded = (prefix..records.len()).collect();

    let mut recursion = BoundCheck::new("lambda recursion");
    let mut geometric = BoundCheck::new("lambda geometric");
    let mut threshold = BoundCheck::new("threshold past n0");
    let mut stretch = BoundCheck::new("stretch lower bound");
    let mut seed = BoundCheck::new("mu seed");
    let mut preservation = BoundCheck::new("mu preservation");
    let mut mu_geometric = BoundCheck::new("mu geometric");
    let mut final_eta = BoundCheck::new("final eta bound");

    let slack = |rhs: f64| BOUND_SLACK * (1.0 + rhs.abs());

    if prefix > 0 {
        let lambda0 = records[0].lambda;
        let quarter = 0.25 * (c.b - 1.0);
        let tail = c.k / (c.b - 1.0);
        let n0 = smallest_n_with_decay(lambda0, c.b, quarter - tail);
        report.n0 = Some(n0);

        for n in 1..prefix {
            let rhs = lambda_recursion_bound(c, records[n - 1].lambda);
            recursion.record(n, records[n].lambda, rhs, slack(rhs));
            if let Some(s) = records[n].stretch {
                // Lower bound: store the margin with the sign flipped so
                // `worst_margin` keeps its "distance to violation" meaning.
                let rhs = stretch_lower_bound(c, records[n - 1].lambda);
                stretch.applicable = true;
                stretch.checked += 1;
                stretch.worst_margin = stretch.worst_margin.min(s - rhs);
                if s < rhs - slack(rhs) {
                    stretch.failures.push(BoundViolation { n, lhs: s, rhs });
                }
            }
        }
        for (n, r) in records.iter().enumerate().take(prefix) {
            let rhs = lambda_geometric_bound(c, lambda0, n);
            geometric.record(n, r.lambda, rhs, slack(rhs));
            if n >= n0 {
                threshold.record(n, r.lambda, quarter, slack(quarter));
            }
        }

        // Refined chain: anchor, then run while the orbit stays in V1.
        let half = 0.5 * (c.b - 1.0);
        let anchor = (n0.min(prefix)..prefix).find(|&n| {
            let local = chart.to_local(&records[n].point);
            c.box_v1.contains(&local) && records[n].lambda <= half
        });
        if let Some(n1) = anchor {
            report.n1 = Some(n1);
            let mu0 = records[n1].lambda;
            let j2 = smallest_n_with_decay(mu0, c.b1, c.eta);
            report.n2 = Some(n1 + j2);
            let eta_rhs = final_eta_bound(c);
            for n in n1..prefix {
                let local = chart.to_local(&records[n].point);
                if !c.box_v1.contains(&local) {
                    break;
                }
                let j = n - n1;
                let mu = records[n].lambda;
                if j == 0 {
                    seed.record(n, mu, half, slack(half));
                } else {
                    preservation.record(n, mu, half, slack(half));
                    let rhs = mu_geometric_bound(c, mu0, j);
                    mu_geometric.record(n, mu, rhs, slack(rhs));
                }
                if j >= j2 {
                    final_eta.record(n, mu, eta_rhs, slack(eta_rhs));
                }
            }
        }
    }

    report.checks = vec![
        recursion,
        geometric,
        threshold,
        stretch,
        seed,
        preservation,
        mu_geometric,
        final_eta,
    ];
    report.all_pass = report.checks.iter().all(BoundCheck::passed);
    report
}

/// C0/C1 separation of two meshed disks.
#[derive(Clone, Copy, Debug)]
pub struct DiskDistance {
    /// Symmetric Hausdorff distance, nodes against interpolated meshes.
    pub c0: f64,
    /// Largest principal angle between tangent lines at matched arc-length
    /// fractions, minimized over the two orientation pairings.
    pub c1: f64,
}

/// Measures the C0 and C1 separation of two disks of equal dimension.
///
/// Parameters are aligned by normalized arc length; since either mesh may
/// run in the opposite geometric direction, the C1 component takes the
/// smaller of the two orientation matchings.
pub fn disk_distance(d1: &Disk, d2: &Disk) -> Result<DiskDistance> {
    if d1.dim != d2.dim {
        return Err(Error::Invalid("disk dimensions disagree".into()));
    }
    if d1.nodes[0].len() != d2.nodes[0].len() {
        return Err(Error::Invalid("disk ambient dimensions disagree".into()));
    }
    let sup_to = |from: &Disk, to: &Disk| -> f64 {
        from.nodes.iter().map(|x| to.nearest_param(x).1).fold(0.0, f64::max)
    };
    let c0 = sup_to(d1, d2).max(sup_to(d2, d1));

    let mut params: Vec<f64> = d1.params.iter().chain(d2.params.iter()).copied().collect();
    params.sort_by(f64::total_cmp);
    params.dedup();
    let angle = |t1: &State, t2: &State| -> Result<f64> {
        let a = (t1.dot(t2).abs() / (t1.norm() * t2.norm())).clamp(0.0, 1.0).acos();
        if a.is_finite() {
            Ok(a)
        } else {
            Err(Error::DegenerateSpectrum { reason: "degenerate tangent frame".into() })
        }
    };
    let mut forward = 0.0f64;
    let mut reverse = 0.0f64;
    for &s in &params {
        let t1 = d1.tangent_at(s);
        forward = forward.max(angle(&t1, &d2.tangent_at(s))?);
        reverse = reverse.max(angle(&t1, &d2.tangent_at(-s))?);
    }
    Ok(DiskDistance { c0, c1: forward.min(reverse) })
}

/// Pulls a u-disk back along the stable branch until every node lies in
/// `bounds` on the chart, returning the localized disk and the number of
/// inverse steps spent. Mirrors the reduction of an arbitrary disk to the
/// local case.
pub fn localize_disk(
    map: &PoincareMap,
    disk: &Disk,
    chart: &Chart,
    bounds: &ChartBox,
    caps: &GrowthCaps,
    max_m: usize,
) -> Result<(Disk, usize)> {
    let inside =
        |d: &Disk| d.nodes.iter().all(|x| bounds.contains(&chart.to_local(x)));
    let mut current = disk.clone();
    for m in 0..=max_m {
        if inside(&current) {
            return Ok((current, m));
        }
        if m == max_m {
            break;
        }
        let (next, refusal) = image_disk(map, &current, Branch::Stable, caps, m + 1)?;
        if let Some(r) = refusal {
            return Err(Error::DomainExit {
                reason: format!("pullback step {} left the domain: {}", m + 1, r.message),
            });
        }
        current = next.ok_or_else(|| Error::DomainExit {
            reason: format!("pullback step {} produced no disk", m + 1),
        })?;
    }
    Err(Error::NotConvergent {
        what: "disk localization".into(),
        iterations: max_m,
        residual: f64::NAN,
    })
}

/// One row of the accumulation experiment.
#[derive(Clone, Debug)]
pub struct LambdaRow {
    pub n: usize,
    pub c0: f64,
    pub c1: f64,
    /// Largest inclination over the compared window.
    pub mu_max: f64,
    /// Verified parameter half-width of the sub-disk around `q`.
    pub radius: f64,
    /// Whether a window of the iterate projected over the target; when
    /// false the whole iterate was compared and the distances are crude.
    pub windowed: bool,
    /// Fraction of the target's parameter range spanned by the window's
    /// projections; the C0 column includes the uncovered remainder.
    pub coverage: f64,
}

/// Output of [`lambda_experiment`].
#[derive(Clone, Debug)]
pub struct ConvergenceTable {
    pub rows: Vec<LambdaRow>,
    /// The certified transversal crossing of the seed disk with the stable
    /// set, and its parameter on the seed disk.
    pub q: State,
    pub q_param: f64,
    /// Angle of the crossing at `q`.
    pub angle: f64,
    /// False when the target disk meets the switching set; only the C0
    /// column is then expected to converge.
    pub c1_required: bool,
    /// Predicted index past which the C1 column should sit below the final
    /// bound, when feasible constants were supplied.
    pub n2: Option<usize>,
}

enum ChainOutcome {
    Clean(Disk),
    /// Some iterate was truncated or refused: the window is too wide for
    /// the domain or the caps.
    Dirty,
    /// Some iterate merged below mesh resolution: the window is too thin.
    Vanished,
}

fn iterate_chain(
    map: &PoincareMap,
    seed: &Disk,
    n: usize,
    caps: &GrowthCaps,
) -> Result<ChainOutcome> {
    let mut current = seed.clone();
    for j in 1..=n {
        let (next, refusal) = image_disk(map, &current, Branch::Unstable, caps, j)?;
        if refusal.is_some() {
            return Ok(ChainOutcome::Dirty);
        }
        match next {
            Some(d) => current = d,
            None => return Ok(ChainOutcome::Vanished),
        }
    }
    Ok(ChainOutcome::Clean(current))
}

/// Restricts `image` to its longest contiguous stretch projecting onto the
/// interior of `target`; falls back to the whole image when nothing
/// projects. Returns the window, whether one was found, and the fraction
/// of the target's parameter range the window projects over.
fn window_over(image: &Disk, target: &Disk) -> Result<(Disk, bool, f64)> {
    let proj: Vec<f64> = image.nodes.iter().map(|x| target.nearest_param(x).0).collect();
    let interior: Vec<bool> = proj.iter().map(|p| p.abs() < 1.0 - 1e-9).collect();
    let mut best: Option<(usize, usize)> = None;
    let mut start = None;
    for (i, &ok) in interior.iter().enumerate() {
        if ok && start.is_none() {
            start = Some(i);
        }
        if !ok || i + 1 == interior.len() {
            if let Some(s) = start.take() {
                let e = if ok { i } else { i - 1 };
                if e > s && best.map_or(true, |(bs, be)| e - s > be - bs) {
                    best = Some((s, e));
                }
            }
        }
    }
    match best {
        Some((s, e)) => {
            let w = image.window(image.params[s], image.params[e])?;
            let lo = proj[s..=e].iter().copied().fold(f64::INFINITY, f64::min);
            let hi = proj[s..=e].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Ok((w, true, 0.5 * (hi - lo)))
        }
        None => Ok((image.clone(), false, 0.0)),
    }
}

/// Runs the disk-accumulation experiment.
///
/// `delta` must cross the stable atlas transversally at a point clear of
/// the switching set; the crossing is located with the intersection sweep
/// and violated hypotheses are reported as errors. For each scheduled `n`
/// a sub-disk of `delta` around the crossing is sized: its half-width is
/// predicted from the measured per-step stretch along the orbit of the
/// crossing (the raw multiplier is useless here, orbits shadowing a
/// homoclinic loop alternate compression and expansion), then adjusted by
/// bisection until the `n`-step image chain is clean, then widened while
/// that improves coverage of the target. The image is restricted to its
/// window over `target` and compared in C0/C1. When `target` meets the
/// switching set only the C0 column is expected to converge.
pub fn lambda_experiment(
    map: &PoincareMap,
    chart: &Chart,
    delta: &Disk,
    stable: &ManifoldAtlas,
    target: &Disk,
    schedule: &[usize],
    caps: &GrowthCaps,
    constants: Option<&ProofConstants>,
    clearance: f64,
) -> Result<ConvergenceTable> {
    let surfaces = &map.system.surfaces;
    let delta_atlas = ManifoldAtlas::from_local(
        stable.saddle.clone(),
        Branch::Unstable,
        1,
        delta.clone(),
    );
    // Sweep with zero clearance so a crossing inside the forbidden band is
    // reported as the hypothesis violation it is, not as a missing hit.
    let hits = find_transversal_intersection(&delta_atlas, stable, surfaces, 0.0)?;
    if hits.is_empty() {
        return Err(Error::Hypothesis {
            reason: "the seed disk does not intersect the stable set".into(),
        });
    }
    let best = hits
        .iter()
        .filter(|h| h.transversal && h.sigma_distance > clearance)
        .max_by(|p, q| p.angle.total_cmp(&q.angle));
    let Some(hit) = best else {
        if hits.iter().any(|h| h.transversal) {
            return Err(Error::Hypothesis {
                reason: format!(
                    "every transversal crossing lies within {clearance:.1e} of the switching set"
                ),
            });
        }
        return Err(Error::Hypothesis {
            reason: "the seed disk meets the stable set tangentially".into(),
        });
    };
    let q = hit.point.clone();
    let q_param = hit.wu_location.1;

    let rho_edge = (q_param + 1.0).min(1.0 - q_param);
    if rho_edge <= RHO_MIN {
        return Err(Error::Invalid(
            "the crossing sits at the edge of the seed disk; widen the seed".into(),
        ));
    }

    let n2 = constants.filter(|c| c.feasible).map(|c| {
        let t = delta.tangent_at(q_param);
        let (s, u) = chart.split_norms(&t);
        let mu = if u > 0.0 { s / u } else { f64::INFINITY };
        smallest_n_with_decay(mu.max(0.5 * (c.b - 1.0)), c.b1, c.eta)
    });

    // Per-step stretch along the orbit of q, for the half-width prediction.
    let n_max = schedule.iter().copied().max().unwrap_or(0);
    let qtrace =
        inclination_trace_from(map, chart, q.clone(), delta.tangent_at(q_param), n_max, false)?;
    if qtrace.records.len() <= n_max {
        let note = qtrace.truncated.map(|m| format!(": {m}")).unwrap_or_default();
        return Err(Error::DomainExit {
            reason: format!(
                "the orbit of q supports {} of {} requested iterates{note}",
                qtrace.records.len().saturating_sub(1),
                n_max
            ),
        });
    }
    let mut growth = vec![1.0f64; n_max + 1];
    for n in 1..=n_max {
        growth[n] = growth[n - 1] * qtrace.records[n].stretch.unwrap_or(1.0);
    }
    let l_delta = delta.arc_length().max(f64::MIN_POSITIVE);
    let l_target = target.arc_length();

    let sub_disk = |rho: f64| delta.window((q_param - rho).max(-1.0), (q_param + rho).min(1.0));
    let rows: Result<Vec<LambdaRow>> = schedule
        .par_iter()
        .map(|&n| {
            // Half-width whose n-step image should span a few target arcs.
            let predicted =
                2.0 * RHO_HEADROOM * l_target / (l_delta * growth[n].max(f64::MIN_POSITIVE));
            let mut rho = predicted.clamp(RHO_MIN, rho_edge);
            let mut accepted: Option<(f64, Disk)> = None;
            let (mut shrunk, mut grown) = (false, false);
            for _ in 0..90 {
                match iterate_chain(map, &sub_disk(rho)?, n, caps)? {
                    ChainOutcome::Clean(d) => {
                        accepted = Some((rho, d));
                        break;
                    }
                    ChainOutcome::Dirty => {
                        // Too wide; growing back past a verified failure
                        // would loop, so give up instead.
                        if grown {
                            break;
                        }
                        shrunk = true;
                        rho *= 0.5;
                        if rho < RHO_MIN {
                            break;
                        }
                    }
                    ChainOutcome::Vanished => {
                        if shrunk {
                            break;
                        }
                        grown = true;
                        rho *= 2.0;
                        if rho > rho_edge {
                            break;
                        }
                    }
                }
            }
            let Some((mut rho, image)) = accepted else {
                return Err(Error::NotConvergent {
                    what: format!("sub-disk sizing for iterate {n}"),
                    iterations: n,
                    residual: rho,
                });
            };
            let (mut window, mut windowed, mut coverage) = window_over(&image, target)?;
            for _ in 0..RHO_GROW_TRIES {
                if coverage >= COVER_GOAL {
                    break;
                }
                let next = (rho * 2.0).min(rho_edge);
                if next <= rho {
                    break;
                }
                let ChainOutcome::Clean(d) = iterate_chain(map, &sub_disk(next)?, n, caps)?
                else {
                    break;
                };
                let (w, wd, cov) = window_over(&d, target)?;
                if cov <= coverage {
                    break;
                }
                rho = next;
                window = w;
                windowed = wd;
                coverage = cov;
            }
            let dist = disk_distance(&window, target)?;
            let mu_max = window
                .tangents
                .iter()
                .map(|t| {
                    let (s, u) = chart.split_norms(t);
                    if u > 0.0 {
                        s / u
                    } else {
                        f64::INFINITY
                    }
                })
                .fold(0.0, f64::max);
            Ok(LambdaRow { n, c0: dist.c0, c1: dist.c1, mu_max, radius: rho, windowed, coverage })
        })
        .collect();
    let mut rows = rows?;
    rows.sort_by_key(|r| r.n);

    let meets_sigma = target.crossed.iter().any(|&c| c) || {
        let mut near = false;
        for x in &target.nodes {
            if crate::manifolds::sigma_distance(surfaces, x)? <= clearance {
                near = true;
                break;
            }
        }
        near
    };

    Ok(ConvergenceTable {
        rows,
        q,
        q_param,
        angle: hit.angle,
        c1_required: !meets_sigma,
        n2,
    })
}

/// A map that can be iterated over a grid: the time-T return map, a closed
/// form for oracles, or anything in between.
pub trait IteratedMap: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &State) -> Result<State>;
    fn jacobian(&self, x: &State) -> Result<DMatrix<f64>>;
}

impl IteratedMap for PoincareMap {
    fn dim(&self) -> usize {
        self.system.dim
    }

    fn apply(&self, x: &State) -> Result<State> {
        self.eval(x)
    }

    fn jacobian(&self, x: &State) -> Result<DMatrix<f64>> {
        Ok(self.jacobian_at(x)?.matrix)
    }
}

/// Exact linear map, mostly for oracles.
pub struct LinearMap {
    pub matrix: DMatrix<f64>,
}

impl IteratedMap for LinearMap {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn apply(&self, x: &State) -> Result<State> {
        Ok(&self.matrix * x)
    }

    fn jacobian(&self, _x: &State) -> Result<DMatrix<f64>> {
        Ok(self.matrix.clone())
    }
}

/// A grid point admitted into the finite-depth preimage set, or flagged
/// because its orbit died before `depth` iterates.
#[derive(Clone, Debug)]
pub struct LambdaSetPoint {
    pub x: State,
    /// Smallest `n` with `F^n(x)` within tolerance of the switching set;
    /// `None` for flagged points.
    pub depth: Option<usize>,
    /// First-order distance from `x` to the depth-`n` preimage.
    pub distance: f64,
    pub failed: Option<String>,
}

/// Finite-depth approximation of the union of switching-set preimages.
#[derive(Clone, Debug)]
pub struct LambdaSet {
    pub depth: usize,
    pub tol: f64,
    /// Admitted and flagged grid points; grid points matching no depth are
    /// omitted.
    pub points: Vec<LambdaSetPoint>,
    /// `counts[n]` is the number of points whose smallest depth is `n`;
    /// cumulative sums give the nested depth sets.
    pub counts: Vec<usize>,
}

impl LambdaSet {
    /// Members of the depth-`d` set, `d <= depth`.
    pub fn members(&self, d: usize) -> Vec<&LambdaSetPoint> {
        self.points.iter().filter(|p| p.depth.map_or(false, |n| n <= d)).collect()
    }
}

/// Sweeps a grid over the box `[lo, hi]` and keeps the points within `tol`
/// of some preimage `F^{-n}(Sigma)`, `n <= depth`, with the smallest such
/// `n` per point.
///
/// Membership is tested forward: `x` lies near `F^{-n}(Sigma)` when
/// `F^n(x)` lies near `Sigma`, with the residual pulled back through the
/// orbit Jacobian so `tol` is meaningful in grid units. Orbits that die
/// before reaching `depth` iterates flag their point instead of failing
/// the sweep.
pub fn lambda_set_depth(
    f: &dyn IteratedMap,
    surfaces: &[SwitchingFunction],
    depth: usize,
    lo: &State,
    hi: &State,
    resolution: &[usize],
    tol: f64,
) -> Result<LambdaSet> {
    let dim = f.dim();
    if lo.len() != dim || hi.len() != dim || resolution.len() != dim {
        return Err(Error::Invalid("grid bounds must match the map dimension".into()));
    }
    if lo.iter().zip(hi.iter()).any(|(&a, &b)| !(a < b)) {
        return Err(Error::Invalid("grid bounds must satisfy lo < hi".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::Invalid("tolerance must be positive".into()));
    }
    let total: usize = resolution.iter().product();
    if total == 0 || total > 4_000_000 {
        return Err(Error::Invalid(format!("grid of {total} points is out of range")));
    }

    let mut grid = Vec::with_capacity(total);
    let mut idx = vec![0usize; dim];
    'gen: loop {
        let p = DVector::from_iterator(
            dim,
            idx.iter().enumerate().map(|(i, &j)| {
                if resolution[i] == 1 {
                    0.5 * (lo[i] + hi[i])
                } else {
                    lo[i] + (hi[i] - lo[i]) * j as f64 / (resolution[i] - 1) as f64
                }
            }),
        );
        grid.push(p);
        let mut axis = 0;
        loop {
            if axis == dim {
                break 'gen;
            }
            idx[axis] += 1;
            if idx[axis] < resolution[axis] {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
    }

    let classify = |x0: &State| -> Option<LambdaSetPoint> {
        let flagged = |e: &Error| {
            Some(LambdaSetPoint {
                x: x0.clone(),
                depth: None,
                distance: f64::INFINITY,
                failed: Some(e.to_string()),
            })
        };
        let member = |n: usize, distance: f64| {
            Some(LambdaSetPoint { x: x0.clone(), depth: Some(n), distance, failed: None })
        };
        let mut x = x0.clone();
        let mut jac = DMatrix::<f64>::identity(dim, dim);
        for n in 0..=depth {
            let mut dist = f64::INFINITY;
            for s in surfaces {
                let h = match s.eval(&x) {
                    Ok(h) => h,
                    Err(e) => return flagged(&e),
                };
                let g = match s.gradient(&x) {
                    Ok(g) => g,
                    Err(e) => return flagged(&e),
                };
                let pullback = (jac.transpose() * g).norm();
                if pullback > 0.0 {
                    dist = dist.min(h.abs() / pullback);
                }
            }
            if dist <= tol {
                return member(n, dist);
            }
            if n == depth {
                break;
            }
            match (f.jacobian(&x), f.apply(&x)) {
                (Ok(j), Ok(y)) => {
                    x = y;
                    jac = j * jac;
                }
                (Err(e), Ok(y)) => {
                    // A refused derivative with a valid image means the
                    // image landed on the switching set, where only
                    // one-sided derivatives exist. That is exact
                    // membership one level deeper; the raw residual
                    // stands in for the unavailable pullback distance.
                    let residual = surfaces
                        .iter()
                        .filter_map(|s| s.eval(&y).ok())
                        .map(f64::abs)
                        .fold(f64::INFINITY, f64::min);
                    if residual <= 1e-9 * (1.0 + y.norm()) {
                        return member(n + 1, residual);
                    }
                    return flagged(&e);
                }
                (_, Err(e)) => return flagged(&e),
            }
        }
        None
    };

    let points: Vec<LambdaSetPoint> = grid.par_iter().filter_map(|x| classify(x)).collect();
    let mut counts = vec![0usize; depth + 1];
    for p in &points {
        if let Some(n) = p.depth {
            counts[n] += 1;
        }
    }
    Ok(LambdaSet { depth, tol, points, counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::FlowControls;
    use crate::manifolds::{adapted_coordinates, inclination_trace_from, DiskProvenance};
    use crate::poincare::{find_fixed_point, ExtendedSystem};
    use crate::systems::{polynomial_surface, Poly, SmoothField, PiecewiseSystem};
    use nalgebra::dvector;

    /// Saddle flow whose time-1 map is diag(1/2, 2): stable x, unstable y.
    fn linear_saddle_map() -> PoincareMap {
        let l = std::f64::consts::LN_2;
        let field = SmoothField::new(2, "saddle", move |x: &State, _t: f64| {
            dvector![-l * x[0], l * x[1]]
        })
        .with_jacobian(move |_x: &State, _t: f64| {
            DMatrix::from_row_slice(2, 2, &[-l, 0.0, 0.0, l])
        });
        let system = PiecewiseSystem::smooth(field);
        let ext = ExtendedSystem::autonomous(system, 1.0).unwrap();
        PoincareMap::new(&ext, 0.0, FlowControls::default())
    }

    fn linear_saddle_data(map: &PoincareMap) -> SaddleData {
        find_fixed_point(map, &dvector![1e-3, -2e-3]).unwrap()
    }

    fn unit_boxes() -> (ChartBox, ChartBox) {
        (ChartBox::uniform(2, 1.0).unwrap(), ChartBox::new(dvector![0.06, 1.0]).unwrap())
    }

    #[test]
    fn constants_arithmetic_matches_hand_values() {
        let (v, v1) = unit_boxes();
        let c = ProofConstants::from_measurements(0.5, 0.1, 0.05, 0.1, v, v1, 2);
        assert!((c.a1 - 0.6).abs() < 1e-15);
        assert!((c.b - 1.9).abs() < 1e-15);
        assert!((c.b1 - 1.45).abs() < 1e-15);
        assert!(c.feasible, "failures: {:?}", c.failures);
        assert!(0.1 < 0.25 * (c.b - 1.0) * (c.b - 1.0));
    }

    #[test]
    fn constants_flag_infeasible_nonlinearity() {
        let (v, v1) = unit_boxes();
        let c = ProofConstants::from_measurements(0.5, 0.9, 0.5, 0.1, v, v1, 2);
        assert!(!c.feasible);
        assert!(c.failures.iter().any(|f| f.contains("a1")));
        assert!(c.failures.iter().any(|f| f.contains("(b-1)^2/4")));
    }

    #[test]
    fn linear_saddle_constants_are_exact() {
        let map = linear_saddle_map();
        let saddle = linear_saddle_data(&map);
        let chart = adapted_coordinates(&saddle).unwrap();
        let (v, v1) = unit_boxes();
        let c = measure_constants(&map, &saddle, &chart, &v, &v1, 3, DEFAULT_ETA).unwrap();
        assert!((c.a - 0.5).abs() < 1e-9, "a = {}", c.a);
        assert!(c.k < 1e-8, "k = {}", c.k);
        assert!(c.k1 < 1e-8, "k1 = {}", c.k1);
        assert!(c.feasible, "failures: {:?}", c.failures);
        assert!((c.b - 2.0).abs() < 1e-7);
    }

    #[test]
    fn geometric_bound_matches_hand_arithmetic() {
        let (v, v1) = unit_boxes();
        let c = ProofConstants::from_measurements(0.5, 0.1, 0.05, 0.1, v, v1, 2);
        let rhs = lambda_geometric_bound(&c, 1.0, 3);
        assert!((rhs - (1.0 / 6.859 + 1.0 / 9.0)).abs() < 1e-12, "rhs = {rhs}");
        assert!((rhs - 0.2569053).abs() < 1e-6);
    }

    #[test]
    fn linear_trace_passes_every_bound_with_exclusions() {
        let map = linear_saddle_map();
        let saddle = linear_saddle_data(&map);
        let chart = adapted_coordinates(&saddle).unwrap();
        let (v, v1) = unit_boxes();
        let c = measure_constants(&map, &saddle, &chart, &v, &v1, 3, DEFAULT_ETA).unwrap();
        let trace = inclination_trace_from(
            &map,
            &chart,
            dvector![0.1, 1e-3],
            dvector![1.0, 1.0],
            14,
            false,
        )
        .unwrap();
        let report = verify_bounds(&trace, &c, &chart);
        assert!(report.all_pass, "checks: {:?}", report.checks);
        // The orbit leaves the unit box once 1e-3 * 2^n > 1.
        assert!(!report.excluded.is_empty());
        assert_eq!(report.excluded[0], 10);
        // Measured b sits a hair under 2, so the threshold index may round
        // up from the exact value 2.
        assert!(report.n0.is_some_and(|n| n == 2 || n == 3), "n0 = {:?}", report.n0);
        assert!(report.n1.is_some());
        // Exactly linear data are tight: recursion margins vanish.
        let rec = report.check("lambda recursion").unwrap();
        assert!(rec.applicable && rec.worst_margin.abs() < 1e-9);
        let stretch = report.check("stretch lower bound").unwrap();
        assert!(stretch.applicable && stretch.worst_margin.abs() < 1e-9);
    }

    #[test]
    fn infeasible_constants_skip_bound_checks() {
        let map = linear_saddle_map();
        let saddle = linear_saddle_data(&map);
        let chart = adapted_coordinates(&saddle).unwrap();
        let (v, v1) = unit_boxes();
        let c = ProofConstants::from_measurements(0.5, 0.9, 0.5, 0.1, v, v1, 2);
        let trace = inclination_trace_from(
            &map,
            &chart,
            dvector![0.1, 1e-3],
            dvector![1.0, 1.0],
            4,
            false,
        )
        .unwrap();
        let report = verify_bounds(&trace, &c, &chart);
        assert!(!report.feasible && !report.all_pass);
        assert!(report.checks.is_empty());
    }

    fn segment(a: (f64, f64), b: (f64, f64), nodes: usize) -> Disk {
        let pts: Vec<State> = (0..nodes)
            .map(|i| {
                let w = i as f64 / (nodes - 1) as f64;
                dvector![a.0 + w * (b.0 - a.0), a.1 + w * (b.1 - a.1)]
            })
            .collect();
        Disk::from_nodes(pts, DiskProvenance::Seed).unwrap()
    }

    #[test]
    fn disk_distance_identity_and_translation() {
        let d = segment((-1.0, 0.0), (1.0, 0.0), 41);
        let same = disk_distance(&d, &d).unwrap();
        assert_eq!(same.c0, 0.0);
        assert_eq!(same.c1, 0.0);

        let shifted = segment((-1.0, 0.25), (1.0, 0.25), 17);
        let dist = disk_distance(&d, &shifted).unwrap();
        assert!((dist.c0 - 0.25).abs() < 1e-12);
        assert!(dist.c1 < 1e-12);
    }

    #[test]
    fn disk_distance_rotation_against_cloud_oracle() {
        let theta: f64 = 0.3;
        let d = segment((-1.0, 0.0), (1.0, 0.0), 401);
        let rot = |p: (f64, f64)| -> (f64, f64) {
            (p.0 * theta.cos() - p.1 * theta.sin(), p.0 * theta.sin() + p.1 * theta.cos())
        };
        let r = segment(rot((-1.0, 0.0)), rot((1.0, 0.0)), 401);
        let dist = disk_distance(&d, &r).unwrap();
        assert!((dist.c1 - theta).abs() < 1e-12, "c1 = {}", dist.c1);

        // Dense point clouds give the symmetric Hausdorff distance without
        // interpolation shortcuts.
        let cloud = |d: &Disk, m: usize| -> Vec<State> {
            (0..m).map(|i| d.eval(-1.0 + 2.0 * i as f64 / (m - 1) as f64)).collect()
        };
        let (ca, cb) = (cloud(&d, 2001), cloud(&r, 2001));
        let sup = |from: &[State], to: &[State]| -> f64 {
            from.iter()
                .map(|x| to.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min))
                .fold(0.0, f64::max)
        };
        let oracle = sup(&ca, &cb).max(sup(&cb, &ca));
        assert!((dist.c0 - oracle).abs() < 2e-3, "c0 = {}, oracle = {oracle}", dist.c0);
        assert!((dist.c0 - theta.sin()).abs() < 1e-9);
    }

    #[test]
    fn disk_distance_is_a_pseudo_metric_on_samples() {
        let a = segment((-1.0, 0.0), (1.0, 0.1), 31);
        let b = segment((-0.9, 0.4), (1.1, 0.3), 7);
        let c = segment((-1.2, -0.3), (0.8, -0.5), 13);
        let dab = disk_distance(&a, &b).unwrap();
        let dba = disk_distance(&b, &a).unwrap();
        assert!((dab.c0 - dba.c0).abs() < 1e-12);
        assert!((dab.c1 - dba.c1).abs() < 1e-12);
        let dbc = disk_distance(&b, &c).unwrap();
        let dac = disk_distance(&a, &c).unwrap();
        assert!(dac.c0 <= dab.c0 + dbc.c0 + 1e-10);
        assert!(dac.c1 <= dab.c1 + dbc.c1 + 1e-10);
    }

    #[test]
    fn localize_disk_pulls_back_into_the_box() {
        let map = linear_saddle_map();
        let saddle = linear_saddle_data(&map);
        let chart = adapted_coordinates(&saddle).unwrap();
        let bounds = ChartBox::uniform(2, 1.0).unwrap();
        let far = segment((0.0, 2.9), (0.0, 3.9), 9);
        let caps = GrowthCaps::default();
        let (local, m) = localize_disk(&map, &far, &chart, &bounds, &caps, 8).unwrap();
        assert_eq!(m, 2);
        for x in &local.nodes {
            assert!(x[1] <= 0.975 + 1e-9 && x[1] >= 0.725 - 1e-9);
        }
    }

    #[test]
    fn lambda_experiment_linear_c1_decays_geometrically() {
        let map = linear_saddle_map();
        let saddle = linear_saddle_data(&map);
        let chart = adapted_coordinates(&saddle).unwrap();
        let (v, v1) = unit_boxes();
        let constants =
            measure_constants(&map, &saddle, &chart, &v, &v1, 3, DEFAULT_ETA).unwrap();

        // Stable atlas: a straight segment of the x-axis.
        let ws_disk = segment((1.0, 0.0), (1e-4, 0.0), 101);
        let stable = ManifoldAtlas::from_local(saddle.clone(), Branch::Stable, 1, ws_disk);
        // Seed disk crossing the stable axis at (0.3, 0) with slope 2.
        let lambda0 = 0.5;
        let delta = segment((0.25, -0.1), (0.35, 0.1), 41);
        let target = segment((0.0, 0.2), (0.0, 1.0), 33);
        let caps = GrowthCaps { h_max: 0.05, max_nodes_per_disk: 4000, ..GrowthCaps::default() };
        let table = lambda_experiment(
            &map,
            &chart,
            &delta,
            &stable,
            &target,
            &[2, 4, 6],
            &caps,
            Some(&constants),
            1e-4,
        )
        .unwrap();
        assert!(table.c1_required);
        assert!((table.q[0] - 0.3).abs() < 1e-9 && table.q[1].abs() < 1e-12);
        for row in &table.rows {
            assert!(row.windowed, "iterate {} never projected over the target", row.n);
            let bound = lambda0 / constants.b.powi(row.n as i32);
            assert!(
                row.c1 <= bound * (1.0 + 1e-6) + 1e-12,
                "n = {}: c1 = {} > {}",
                row.n,
                row.c1,
                bound
            );
            assert!(row.mu_max <= lambda0 / 4.0f64.powi(row.n as i32) * (1.0 + 1e-6));
        }
        assert!(table.rows.windows(2).all(|w| w[1].c1 < w[0].c1));
    }

    #[test]
    fn lambda_experiment_rejects_tangential_seed() {
        let map = linear_saddle_map();
        let saddle = linear_saddle_data(&map);
        let chart = adapted_coordinates(&saddle).unwrap();
        let ws_disk = segment((1.0, 0.0), (1e-4, 0.0), 101);
        let stable = ManifoldAtlas::from_local(saddle.clone(), Branch::Stable, 1, ws_disk);
        // Parabolic arc touching the axis at (0.3, 0) without crossing.
        let nodes: Vec<State> = (0..41)
            .map(|i| {
                let s = -0.1 + 0.2 * i as f64 / 40.0;
                dvector![0.3 + s, s * s]
            })
            .collect();
        let delta = Disk::from_nodes(nodes, DiskProvenance::Seed).unwrap();
        let target = segment((0.0, 0.2), (0.0, 1.0), 9);
        let err = lambda_experiment(
            &map,
            &chart,
            &delta,
            &stable,
            &target,
            &[1],
            &GrowthCaps::default(),
            None,
            1e-4,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Hypothesis { .. }), "got {err:?}");
    }

    fn vertical_surface(at: f64) -> SwitchingFunction {
        let h = Poly::new(2, vec![(1.0, vec![1, 0]), (-at, vec![0, 0])]).unwrap();
        polynomial_surface(0, "x = c", h)
    }

    #[test]
    fn lambda_set_identity_map_is_sigma_at_every_depth() {
        let id = LinearMap { matrix: DMatrix::identity(2, 2) };
        let sigma = vec![vertical_surface(0.0)];
        let set = lambda_set_depth(
            &id,
            &sigma,
            4,
            &dvector![-1.0, -1.0],
            &dvector![1.0, 1.0],
            &[41, 5],
            0.025,
        )
        .unwrap();
        assert!(set.counts[0] > 0);
        assert!(set.counts[1..].iter().all(|&c| c == 0));
        for p in &set.points {
            assert_eq!(p.depth, Some(0));
            assert!(p.x[0].abs() <= 0.025 + 1e-12);
        }
    }

    #[test]
    fn lambda_set_linear_map_finds_halving_preimages() {
        let f = LinearMap { matrix: DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]) };
        let sigma = vec![vertical_surface(1.0)];
        let depth = 6;
        let tol = 1.0 / 512.0;
        let set = lambda_set_depth(
            &f,
            &sigma,
            depth,
            &dvector![0.0, -0.5],
            &dvector![1.25, 0.5],
            &[641, 3],
            tol,
        )
        .unwrap();
        for n in 0..=depth {
            assert!(set.counts[n] > 0, "no points at depth {n}");
        }
        for p in &set.points {
            let n = p.depth.unwrap();
            let expected = 0.5f64.powi(n as i32);
            // The pullback metric turns the forward residual into exact
            // distance along x for this diagonal map.
            assert!(
                (p.x[0] - expected).abs() <= tol + 1e-12,
                "x = {}, depth {n}",
                p.x[0]
            );
        }
        // Nesting: cumulative member counts grow with depth.
        let mut last = 0;
        for d in 0..=depth {
            let m = set.members(d).len();
            assert!(m >= last);
            last = m;
        }
    }

    #[test]
    fn lambda_set_example1_time_one_map_peels_integer_lines() {
        let ext = ExtendedSystem::autonomous(crate::systems::example1(), 1.0).unwrap();
        let map = PoincareMap::new(&ext, 0.0, FlowControls::default());
        let sigma = vec![polynomial_surface(0, "y = 0", Poly::var(2, 1))];
        let set = lambda_set_depth(
            &map,
            &sigma,
            3,
            &dvector![-0.5, -3.4],
            &dvector![0.5, 0.6],
            &[3, 81],
            0.021,
        )
        .unwrap();
        for p in &set.points {
            let n = p.depth.unwrap();
            assert!(
                (p.x[1] + n as f64).abs() <= 0.021 + 1e-9,
                "y = {}, depth {n}",
                p.x[1]
            );
        }
        for n in 0..=3 {
            assert!(set.counts[n] > 0, "depth {n} empty");
        }
    }
}
