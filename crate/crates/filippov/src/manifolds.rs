//! Invariant manifolds of return-map saddles: local graphs, global
//! continuation, transversal intersections and inclination measurements.
//!
//! Manifolds are represented as meshed 1-disks (polylines with unit tangent
//! frames and parameters in [-1, 1]). The data model stores the disk
//! dimension for generality, but continuation and intersection are
//! implemented for u = 1 on planar sections, which is the scale every
//! experiment here runs at.
//!
//! The local manifold is computed by iterate-and-trim: a straight seed
//! segment along the eigenvector is mapped node-wise, the image curve is
//! resampled as a graph over the eigen-axis in the adapted chart, and the
//! procedure repeats until the graph stops moving. Global atlases then grow
//! one Poincare image per step from a fundamental segment, re-meshing by
//! bisection of pre-image parameters so the image spacing and turning stay
//! within the growth caps. A node whose orbit leaves the crossing regime
//! truncates the branch there; truncation is recorded, not patched.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::Error;
use crate::flow::Trajectory;
use crate::linalg;
use crate::poincare::{PoincareMap, RefusalRecord, SaddleData};
use crate::systems::{State, SwitchingFunction};
use crate::Result;

/// Tangent crossing angles below this cannot be certified as transversal.
pub const ANGLE_THRESHOLD: f64 = 1e-3;

/// Default required distance of intersection points from the switching set.
pub const SIGMA_CLEARANCE: f64 = 1e-4;

/// Node-wise C0 convergence target of the local graph iteration.
pub const LOCAL_C0_TOL: f64 = 1e-8;

/// Nodes of the local seed grid (per branch side).
const LOCAL_NODES: usize = 48;

const LOCAL_MAX_ITER: usize = 120;

/// Relative floor under which a tangent's expanding component counts as
/// degenerate.
const TRANSVERSALITY_EPS: f64 = 1e-12;

/// Affine chart sending the saddle to the origin, the stable eigenspace to
/// `{x_u = 0}` and the unstable eigenspace to `{x_s = 0}`. Local
/// coordinates are ordered `(x_s, x_u)`.
#[derive(Clone, Debug)]
pub struct Chart {
    pub origin: State,
    /// Columns: stable basis vectors, then unstable ones.
    pub basis: DMatrix<f64>,
    pub inverse: DMatrix<f64>,
    pub stable_dim: usize,
    pub unstable_dim: usize,
    pub condition: f64,
}

impl Chart {
    pub fn dim(&self) -> usize {
        self.stable_dim + self.unstable_dim
    }

    pub fn to_local(&self, x: &State) -> State {
        &self.inverse * (x - &self.origin)
    }

    pub fn to_world(&self, q: &State) -> State {
        &self.origin + &self.basis * q
    }

    /// Tangent vectors transform by the linear part only.
    pub fn tangent_to_local(&self, v: &State) -> State {
        &self.inverse * v
    }

    pub fn tangent_to_world(&self, w: &State) -> State {
        &self.basis * w
    }

    /// Norms of the stable and unstable blocks of a world tangent.
    pub fn split_norms(&self, v: &State) -> (f64, f64) {
        let w = self.tangent_to_local(v);
        let s = w.rows(0, self.stable_dim).norm();
        let u = w.rows(self.stable_dim, self.unstable_dim).norm();
        (s, u)
    }
}

/// Builds the adapted chart from the saddle's eigenbasis. Complex spectra
/// and near-defective bases are rejected with the measured condition
/// number; the chart is only as good as the basis is independent.
pub fn adapted_coordinates(saddle: &SaddleData) -> Result<Chart> {
    let n = saddle.point.len();
    let s = saddle.stable_dim();
    let u = saddle.unstable_dim();
    if s + u != n {
        return Err(Error::DegenerateSpectrum {
            reason: format!("stable + unstable dimensions {s}+{u} do not fill dimension {n}"),
        });
    }
    let mut basis = DMatrix::zeros(n, n);
    for (col, pair) in saddle.stable.iter().chain(saddle.unstable.iter()).enumerate() {
        if pair.value.im.abs() > 1e-10 * (1.0 + pair.value.re.abs()) {
            return Err(Error::DegenerateSpectrum {
                reason: format!("complex multiplier {} has no real eigenline", pair.value),
            });
        }
        let v: State = pair.vector.map(|z| z.re);
        let norm = v.norm();
        if norm < 1e-12 {
            return Err(Error::DegenerateSpectrum {
                reason: "eigenvector with vanishing real part".into(),
            });
        }
        basis.set_column(col, &(v / norm));
    }
    let condition = linalg::condition_number(&basis);
    if !condition.is_finite() || condition > 1e10 {
        return Err(Error::DegenerateSpectrum {
            reason: format!("eigenbasis condition number {condition:.3e} beyond threshold 1e10"),
        });
    }
    let inverse = basis.clone().try_inverse().ok_or_else(|| Error::DegenerateSpectrum {
        reason: format!("eigenbasis not invertible (condition {condition:.3e})"),
    })?;
    Ok(Chart {
        origin: saddle.point.clone(),
        basis,
        inverse,
        stable_dim: s,
        unstable_dim: u,
        condition,
    })
}

/// How a disk came to be.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DiskProvenance {
    Seed,
    /// k-th Poincare image (or preimage, on stable branches) of the seed.
    Image { iterate: usize },
}

/// A meshed 1-disk: polyline nodes with unit tangent frames, parameterized
/// over [-1, 1] by normalized arc length.
#[derive(Clone, Debug)]
pub struct Disk {
    pub params: Vec<f64>,
    pub nodes: Vec<State>,
    pub tangents: Vec<State>,
    /// Per node: did the generating orbit segment cross a switching
    /// surface. Seed disks carry `false`.
    pub crossed: Vec<bool>,
    pub dim: usize,
    pub provenance: DiskProvenance,
    /// Largest node spacing in the mesh.
    pub resolution: f64,
}

impl Disk {
    /// Builds a disk from ordered polyline data; parameters are assigned by
    /// cumulative arc length scaled to [-1, 1].
    pub fn polyline(
        nodes: Vec<State>,
        tangents: Vec<State>,
        crossed: Vec<bool>,
        provenance: DiskProvenance,
    ) -> Result<Disk> {
        if nodes.len() < 2 {
            return Err(Error::Invalid(format!("disk needs at least 2 nodes, got {}", nodes.len())));
        }
        if tangents.len() != nodes.len() || crossed.len() != nodes.len() {
            return Err(Error::Invalid("disk node/tangent/marker lengths disagree".into()));
        }
        let mut arc = Vec::with_capacity(nodes.len());
        arc.push(0.0);
        let mut resolution = 0.0f64;
        for i in 1..nodes.len() {
            let step = (&nodes[i] - &nodes[i - 1]).norm();
            if step == 0.0 {
                return Err(Error::Invalid(format!("disk nodes {i}-1 and {i} coincide")));
            }
            resolution = resolution.max(step);
            arc.push(arc[i - 1] + step);
        }
        let total = *arc.last().unwrap();
        let params: Vec<f64> = arc.iter().map(|a| -1.0 + 2.0 * a / total).collect();
        let mut unit_tangents = Vec::with_capacity(tangents.len());
        for (i, t) in tangents.iter().enumerate() {
            let n = t.norm();
            if !(n > 0.0 && n.is_finite()) {
                return Err(Error::Invalid(format!("disk tangent {i} degenerate")));
            }
            unit_tangents.push(t / n);
        }
        Ok(Disk {
            params,
            nodes,
            tangents: unit_tangents,
            crossed,
            dim: 1,
            provenance,
            resolution,
        })
    }

    /// Polyline with tangents estimated by central differences.
    pub fn from_nodes(nodes: Vec<State>, provenance: DiskProvenance) -> Result<Disk> {
        let m = nodes.len();
        if m < 2 {
            return Err(Error::Invalid("disk needs at least 2 nodes".into()));
        }
        let mut tangents = Vec::with_capacity(m);
        for i in 0..m {
            let (a, b) = if i == 0 {
                (0, 1)
            } else if i == m - 1 {
                (m - 2, m - 1)
            } else {
                (i - 1, i + 1)
            };
            tangents.push(&nodes[b] - &nodes[a]);
        }
        let crossed = vec![false; m];
        Disk::polyline(nodes, tangents, crossed, provenance)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn arc_length(&self) -> f64 {
        self.nodes.windows(2).map(|w| (&w[1] - &w[0]).norm()).sum()
    }

    fn bracket(&self, s: f64) -> (usize, f64) {
        let s = s.clamp(-1.0, 1.0);
        let i = match self.params.binary_search_by(|p| p.total_cmp(&s)) {
            Ok(i) => i.min(self.params.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.params.len() - 2),
        };
        let span = self.params[i + 1] - self.params[i];
        let w = if span > 0.0 { (s - self.params[i]) / span } else { 0.0 };
        (i, w.clamp(0.0, 1.0))
    }

    /// Piecewise linear embedding evaluation at parameter `s` in [-1, 1].
    pub fn eval(&self, s: f64) -> State {
        let (i, w) = self.bracket(s);
        &self.nodes[i] * (1.0 - w) + &self.nodes[i + 1] * w
    }

    /// Interpolated unit tangent at parameter `s`.
    pub fn tangent_at(&self, s: f64) -> State {
        let (i, w) = self.bracket(s);
        let t = &self.tangents[i] * (1.0 - w) + &self.tangents[i + 1] * w;
        let n = t.norm();
        if n > 0.0 {
            t / n
        } else {
            self.tangents[i].clone()
        }
    }

    /// Closest point of the mesh to `x`: returns `(parameter, distance)`.
    pub fn nearest_param(&self, x: &State) -> (f64, f64) {
        let mut best = (self.params[0], f64::INFINITY);
        for i in 0..self.nodes.len() - 1 {
            let a = &self.nodes[i];
            let d = &self.nodes[i + 1] - a;
            let len2 = d.norm_squared();
            let w = if len2 > 0.0 { ((x - a).dot(&d) / len2).clamp(0.0, 1.0) } else { 0.0 };
            let p = a + &d * w;
            let dist = (x - p).norm();
            if dist < best.1 {
                let s = self.params[i] + w * (self.params[i + 1] - self.params[i]);
                best = (s, dist);
            }
        }
        best
    }

    /// Sub-disk over the parameter interval [lo, hi], reparameterized to
    /// [-1, 1]. Interpolated end nodes inherit the crossing marker of the
    /// segment they cut.
    pub fn window(&self, lo: f64, hi: f64) -> Result<Disk> {
        if !(lo < hi) {
            return Err(Error::Invalid(format!("empty disk window [{lo}, {hi}]")));
        }
        let mut nodes = vec![self.eval(lo)];
        let mut tangents = vec![self.tangent_at(lo)];
        let (ilo, _) = self.bracket(lo);
        let mut crossed = vec![self.crossed[ilo] || self.crossed[ilo + 1]];
        for i in 0..self.nodes.len() {
            if self.params[i] > lo && self.params[i] < hi {
                // Skip interior nodes that would collide with the cut ends.
                if (&self.nodes[i] - nodes.last().unwrap()).norm() > 1e-14 {
                    nodes.push(self.nodes[i].clone());
                    tangents.push(self.tangents[i].clone());
                    crossed.push(self.crossed[i]);
                }
            }
        }
        let end = self.eval(hi);
        if (&end - nodes.last().unwrap()).norm() <= 1e-14 {
            nodes.pop();
            tangents.pop();
            crossed.pop();
        }
        let (ihi, _) = self.bracket(hi);
        nodes.push(end);
        tangents.push(self.tangent_at(hi));
        crossed.push(self.crossed[ihi] || self.crossed[ihi + 1]);
        Disk::polyline(nodes, tangents, crossed, self.provenance.clone())
    }
}

/// Which invariant manifold an atlas follows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Stable,
    Unstable,
}

/// Global manifold continuation: ordered disks, each one Poincare image
/// (unstable) or preimage (stable) of its predecessor, abutting at their
/// shared endpoint. Orbits that left the admissible domain are recorded in
/// `truncations`.
#[derive(Clone, Debug)]
pub struct ManifoldAtlas {
    pub saddle: SaddleData,
    pub branch: Branch,
    /// +1 follows the eigenvector, -1 the reflected branch.
    pub side: i8,
    pub disks: Vec<Disk>,
    pub truncations: Vec<RefusalRecord>,
}

impl ManifoldAtlas {
    pub fn from_local(saddle: SaddleData, branch: Branch, side: i8, local: Disk) -> ManifoldAtlas {
        ManifoldAtlas { saddle, branch, side, disks: vec![local], truncations: Vec::new() }
    }

    pub fn frontier(&self) -> &Disk {
        self.disks.last().expect("atlas holds at least the seed disk")
    }

    pub fn total_nodes(&self) -> usize {
        self.disks.iter().map(Disk::len).sum()
    }

    pub fn total_arc(&self) -> f64 {
        self.disks.iter().map(Disk::arc_length).sum()
    }
}

/// Mesh growth controls for continuation.
#[derive(Clone, Debug)]
pub struct GrowthCaps {
    /// Image nodes closer than this are merged.
    pub h_min: f64,
    /// Image spacing above this is refined by pre-image bisection.
    pub h_max: f64,
    /// Maximal turning angle between adjacent node tangents, radians.
    pub max_turn: f64,
    pub max_nodes_per_disk: usize,
    pub max_total_nodes: usize,
}

impl Default for GrowthCaps {
    fn default() -> Self {
        GrowthCaps {
            h_min: 1e-7,
            h_max: 1e-2,
            max_turn: 0.15,
            max_nodes_per_disk: 40_000,
            max_total_nodes: 400_000,
        }
    }
}

fn branch_trajectory(map: &PoincareMap, branch: Branch, x: &State) -> Result<Trajectory> {
    match branch {
        Branch::Unstable => map.eval_trajectory(x),
        Branch::Stable => map.inverse_trajectory(x),
    }
}

fn branch_back(map: &PoincareMap, branch: Branch, x: &State) -> Result<State> {
    match branch {
        Branch::Unstable => map.eval_inverse(x),
        Branch::Stable => map.eval(x),
    }
}

/// Distance to the switching set, in state units: `min_i |h_i| / |grad h_i|`.
pub fn sigma_distance(surfaces: &[SwitchingFunction], x: &State) -> Result<f64> {
    let mut best = f64::INFINITY;
    for s in surfaces {
        let h = s.eval(x)?;
        let g = s.gradient(x)?.norm();
        if g > 0.0 {
            best = best.min(h.abs() / g);
        }
    }
    Ok(best)
}

/// Local invariant manifold of the saddle as a graph over the eigen-axis.
///
/// A straight fundamental segment of length `radius` along the branch
/// eigenvector (direction `side`) is iterated node-wise under the map
/// (unstable) or its inverse (stable); after each sweep the image curve is
/// resampled as a graph over the axis grid and the loop stops once the
/// graph moves less than [`LOCAL_C0_TOL`] node-wise. The seed segment must
/// stay clear of every switching surface; otherwise the call reports the
/// largest admissible radius instead of computing a nonsmooth graph.
pub fn local_manifold(
    map: &PoincareMap,
    saddle: &SaddleData,
    branch: Branch,
    side: i8,
    radius: f64,
) -> Result<Disk> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Invalid(format!("local manifold radius {radius} must be positive")));
    }
    if side != 1 && side != -1 {
        return Err(Error::Invalid(format!("branch side {side} must be +1 or -1")));
    }
    let chart = adapted_coordinates(saddle)?;
    if chart.stable_dim != 1 || chart.unstable_dim != 1 {
        return Err(Error::Invalid(
            "local manifold construction is implemented for planar saddles (s = u = 1)".into(),
        ));
    }
    // Local coordinate index carrying the branch, and the transverse one.
    let (axis, cross) = match branch {
        Branch::Stable => (0usize, 1usize),
        Branch::Unstable => (1usize, 0usize),
    };

    // Certify the seed segment's clearance from the switching set before
    // trusting a graph over it: both the pointwise distance and the sign of
    // every h_i are tracked, so a crossing between samples cannot slip
    // through the grid.
    let clearance_floor = SIGMA_CLEARANCE;
    let samples = 4 * LOCAL_NODES;
    let mut admissible = radius;
    let mut clean = true;
    let mut prev_signs: Vec<f64> = Vec::new();
    'seed: for i in 0..=samples {
        let r = radius * i as f64 / samples as f64;
        let mut q = DVector::zeros(2);
        q[axis] = side as f64 * r;
        let x = chart.to_world(&q);
        for (si, surf) in map.system.surfaces.iter().enumerate() {
            let h = surf.eval(&x)?;
            let g = surf.gradient(&x)?.norm();
            let too_close = g > 0.0 && h.abs() / g < clearance_floor;
            let sign_flip = i > 0 && h * prev_signs[si] < 0.0;
            if too_close || sign_flip {
                admissible = radius * (i.saturating_sub(1)) as f64 / samples as f64;
                clean = false;
                break 'seed;
            }
            if i == 0 {
                prev_signs.push(h);
            } else {
                prev_signs[si] = h;
            }
        }
    }
    if !clean {
        return Err(Error::ShrinkRadius {
            requested: radius,
            admissible,
            reason: "seed segment enters the switching-surface clearance zone".into(),
        });
    }

    let m = LOCAL_NODES;
    let grid: Vec<f64> = (0..=m).map(|i| side as f64 * radius * i as f64 / m as f64).collect();
    let mut graph = vec![0.0f64; m + 1];
    let mut crossed = vec![false; m + 1];
    let mut converged = false;
    for _ in 0..LOCAL_MAX_ITER {
        let worlds: Vec<State> = grid
            .iter()
            .zip(&graph)
            .map(|(&a, &g)| {
                let mut q = DVector::zeros(2);
                q[axis] = a;
                q[cross] = g;
                chart.to_world(&q)
            })
            .collect();
        let images: Vec<Result<(State, bool)>> = worlds
            .par_iter()
            .map(|x| {
                let traj = branch_trajectory(map, branch, x)?;
                Ok((traj.final_state(), !traj.events.is_empty()))
            })
            .collect();
        let mut pts = Vec::with_capacity(m + 1);
        let mut marks = Vec::with_capacity(m + 1);
        for r in images {
            let (x, c) = r?;
            pts.push(chart.to_local(&x));
            marks.push(c);
        }
        // The saddle itself is fixed; pin it to kill residual drift.
        pts[0] = DVector::zeros(2);

        // Resample the image curve as a graph over the axis grid. The image
        // stretches the axis by roughly the unstable multiplier, so the
        // grid is always interior to the image's axis range.
        let key: Vec<f64> = pts.iter().map(|p| side as f64 * p[axis]).collect();
        for i in 1..key.len() {
            if key[i] <= key[i - 1] {
                return Err(Error::NotConvergent {
                    what: format!(
                        "local manifold graph lost monotonicity at node {i}; reduce the radius"
                    ),
                    iterations: 0,
                    residual: key[i] - key[i - 1],
                });
            }
        }
        let mut delta = 0.0f64;
        let mut next = graph.clone();
        for (i, &a) in grid.iter().enumerate() {
            let target = side as f64 * a;
            let j = match key.binary_search_by(|k| k.total_cmp(&target)) {
                Ok(j) => j.min(key.len() - 2),
                Err(j) => j.saturating_sub(1).min(key.len() - 2),
            };
            let span = key[j + 1] - key[j];
            let w = if span > 0.0 { ((target - key[j]) / span).clamp(0.0, 1.0) } else { 0.0 };
            let value = pts[j][cross] * (1.0 - w) + pts[j + 1][cross] * w;
            delta = delta.max((value - next[i]).abs());
            next[i] = value;
            crossed[i] = marks[j] || marks[j + 1];
        }
        next[0] = 0.0;
        graph = next;
        if delta <= LOCAL_C0_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NotConvergent {
            what: "local manifold graph iteration".into(),
            iterations: LOCAL_MAX_ITER,
            residual: f64::NAN,
        });
    }

    let nodes: Vec<State> = grid
        .iter()
        .zip(&graph)
        .map(|(&a, &g)| {
            let mut q = DVector::zeros(2);
            q[axis] = a;
            q[cross] = g;
            chart.to_world(&q)
        })
        .collect();
    let mut tangents = Vec::with_capacity(nodes.len());
    for i in 0..nodes.len() {
        let (a, b) = if i == 0 {
            (0, 1)
        } else if i == nodes.len() - 1 {
            (nodes.len() - 2, nodes.len() - 1)
        } else {
            (i - 1, i + 1)
        };
        tangents.push(&nodes[b] - &nodes[a]);
    }
    Disk::polyline(nodes, tangents, crossed, DiskProvenance::Seed)
}

struct MappedNode {
    param: f64,
    point: State,
    tangent: State,
    crossed: bool,
}

/// Maps `source` one step along the branch with adaptive pre-image
/// refinement. Returns the image disk and an optional truncation record.
pub fn image_disk(
    map: &PoincareMap,
    source: &Disk,
    branch: Branch,
    caps: &GrowthCaps,
    iterate: usize,
) -> Result<(Option<Disk>, Option<RefusalRecord>)> {
    let tol = map.controls.tol.clone();
    let map_one = |s: f64| -> std::result::Result<MappedNode, (State, Error)> {
        let x = source.eval(s);
        let traj = branch_trajectory(map, branch, &x).map_err(|e| (x.clone(), e))?;
        let v0 = source.tangent_at(s);
        let v = crate::variational::propagate_tangent(&map.system, &traj, &v0, &tol)
            .map_err(|e| (x.clone(), e))?;
        Ok(MappedNode {
            param: s,
            point: traj.final_state(),
            tangent: v,
            crossed: !traj.events.is_empty(),
        })
    };

    // Start from the source mesh, refine where the image is too coarse.
    let mut truncation: Option<RefusalRecord> = None;
    let mut nodes: Vec<MappedNode> = Vec::new();
    {
        let results: Vec<_> = source.params.par_iter().map(|&s| map_one(s)).collect();
        for r in results {
            match r {
                Ok(n) => nodes.push(n),
                Err((x, e)) => {
                    truncation = Some(RefusalRecord {
                        x,
                        kind: e.kind(),
                        message: e.to_string(),
                    });
                    break;
                }
            }
        }
    }
    if nodes.len() < 2 {
        return Ok((None, truncation));
    }

    for _pass in 0..40 {
        let mut wanted: Vec<f64> = Vec::new();
        for w in nodes.windows(2) {
            let gap = (&w[1].point - &w[0].point).norm();
            let ta = w[0].tangent.normalize();
            let tb = w[1].tangent.normalize();
            let turn = ta.dot(&tb).clamp(-1.0, 1.0).acos();
            if (gap > caps.h_max || turn > caps.max_turn)
                && (w[1].param - w[0].param) > 1e-12
                && nodes.len() + wanted.len() < caps.max_nodes_per_disk
            {
                wanted.push(0.5 * (w[0].param + w[1].param));
            }
        }
        if wanted.is_empty() {
            break;
        }
        let results: Vec<_> = wanted.par_iter().map(|&s| map_one(s)).collect();
        let mut failed_at: Option<(f64, RefusalRecord)> = None;
        for r in results {
            match r {
                Ok(n) => nodes.push(n),
                Err((x, e)) => {
                    let s = source.nearest_param(&x).0;
                    if failed_at.as_ref().map_or(true, |(fs, _)| s < *fs) {
                        failed_at = Some((
                            s,
                            RefusalRecord { x, kind: e.kind(), message: e.to_string() },
                        ));
                    }
                }
            }
        }
        if let Some((s_fail, record)) = failed_at {
            // Keep only the part of the branch before the failing orbit.
            nodes.retain(|n| n.param < s_fail);
            truncation = Some(record);
            if nodes.len() < 2 {
                return Ok((None, truncation));
            }
        }
        nodes.sort_by(|a, b| a.param.total_cmp(&b.param));
    }
    nodes.sort_by(|a, b| a.param.total_cmp(&b.param));

    // Merge nodes closer than h_min, keeping the ends.
    let mut kept: Vec<MappedNode> = Vec::with_capacity(nodes.len());
    let last_index = nodes.len() - 1;
    for (i, n) in nodes.into_iter().enumerate() {
        let close = kept
            .last()
            .map(|p| (&n.point - &p.point).norm() < caps.h_min)
            .unwrap_or(false);
        if close && i != last_index {
            continue;
        }
        if close && i == last_index {
            kept.pop();
        }
        kept.push(n);
    }
    if kept.len() < 2 {
        return Ok((None, truncation));
    }
    let nodes: Vec<State> = kept.iter().map(|n| n.point.clone()).collect();
    let tangents: Vec<State> = kept.iter().map(|n| n.tangent.clone()).collect();
    let crossed: Vec<bool> = kept.iter().map(|n| n.crossed).collect();
    let disk = Disk::polyline(nodes, tangents, crossed, DiskProvenance::Image { iterate })?;
    Ok((Some(disk), truncation))
}

/// Grows the atlas by `steps` Poincare images of the frontier.
///
/// The first continuation step maps only the fundamental segment of the
/// seed disk (between the preimage of its endpoint and the endpoint), so
/// consecutive disks abut instead of re-covering the seed; every later step
/// maps the whole frontier disk. Atlases are immutable snapshots: the input
/// is cloned and extended.
pub fn continue_manifold(
    map: &PoincareMap,
    atlas: &ManifoldAtlas,
    steps: usize,
    caps: &GrowthCaps,
) -> Result<ManifoldAtlas> {
    let mut out = atlas.clone();
    for _ in 0..steps {
        if out.total_nodes() >= caps.max_total_nodes {
            break;
        }
        if !out.truncations.is_empty() {
            break;
        }
        let iterate = out.disks.len();
        let source = if out.disks.len() == 1 {
            let frontier = out.frontier();
            let end = frontier.nodes.last().unwrap();
            let pre = branch_back(map, out.branch, end)?;
            let (s_star, dist) = frontier.nearest_param(&pre);
            if dist > 10.0 * frontier.resolution {
                return Err(Error::Invalid(format!(
                    "fundamental preimage lies {dist:.3e} off the seed disk; \
                     the local radius is too small to span a fundamental domain"
                )));
            }
            frontier.window(s_star, 1.0)?
        } else {
            out.frontier().clone()
        };
        let (disk, truncation) = image_disk(map, &source, out.branch, caps, iterate)?;
        if let Some(r) = truncation {
            out.truncations.push(r);
        }
        match disk {
            Some(d) => out.disks.push(d),
            None => break,
        }
    }
    Ok(out)
}

/// A certified intersection candidate of two atlases.
#[derive(Clone, Debug)]
pub struct IntersectionHit {
    pub point: State,
    /// Principal angle between the tangent lines, in [0, pi/2].
    pub angle: f64,
    /// Distance to the switching set at the hit.
    pub sigma_distance: f64,
    /// Whether the angle clears [`ANGLE_THRESHOLD`].
    pub transversal: bool,
    /// (disk index, parameter) on the unstable atlas.
    pub wu_location: (usize, f64),
    /// (disk index, parameter) on the stable atlas.
    pub ws_location: (usize, f64),
}

struct SegmentRef {
    disk: usize,
    node: usize,
}

/// Sweeps every segment pair of the two atlases for crossings, refines each
/// hit on the mesh parameterizations, and returns the hits at least
/// `clearance` away from the switching set, ordered along the unstable
/// atlas. `transversal` marks hits whose tangent angle clears the
/// certification threshold; an empty result is a valid outcome.
pub fn find_transversal_intersection(
    wu: &ManifoldAtlas,
    ws: &ManifoldAtlas,
    surfaces: &[SwitchingFunction],
    clearance: f64,
) -> Result<Vec<IntersectionHit>> {
    if wu.branch != Branch::Unstable || ws.branch != Branch::Stable {
        return Err(Error::Invalid(
            "intersection sweep expects (unstable, stable) atlases in that order".into(),
        ));
    }
    let dim = wu.saddle.point.len();
    if dim != 2 {
        return Err(Error::Invalid("intersection sweep is implemented for planar sections".into()));
    }

    // Uniform spatial hash over unstable segments to keep the sweep near
    // linear; lobed atlases carry tens of thousands of segments.
    let mut cell = 0.0f64;
    let mut count = 0usize;
    let mut wu_segments: Vec<SegmentRef> = Vec::new();
    for (di, d) in wu.disks.iter().enumerate() {
        for ni in 0..d.len() - 1 {
            cell += (&d.nodes[ni + 1] - &d.nodes[ni]).norm();
            count += 1;
            wu_segments.push(SegmentRef { disk: di, node: ni });
        }
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    let cell = (cell / count as f64).max(1e-12);
    let key = |x: f64, y: f64| -> (i64, i64) { ((x / cell).floor() as i64, (y / cell).floor() as i64) };
    let mut grid: std::collections::HashMap<(i64, i64), Vec<usize>> =
        std::collections::HashMap::new();
    for (idx, sref) in wu_segments.iter().enumerate() {
        let d = &wu.disks[sref.disk];
        let (a, b) = (&d.nodes[sref.node], &d.nodes[sref.node + 1]);
        let (k0, k1) = (key(a[0].min(b[0]), a[1].min(b[1])), key(a[0].max(b[0]), a[1].max(b[1])));
        for i in k0.0..=k1.0 {
            for j in k0.1..=k1.1 {
                grid.entry((i, j)).or_default().push(idx);
            }
        }
    }

    let mut hits: Vec<IntersectionHit> = Vec::new();
    for (ws_di, wsd) in ws.disks.iter().enumerate() {
        for ws_ni in 0..wsd.len() - 1 {
            let (c, d) = (&wsd.nodes[ws_ni], &wsd.nodes[ws_ni + 1]);
            let (k0, k1) =
                (key(c[0].min(d[0]), c[1].min(d[1])), key(c[0].max(d[0]), c[1].max(d[1])));
            let mut seen: Vec<usize> = Vec::new();
            for i in k0.0..=k1.0 {
                for j in k0.1..=k1.1 {
                    if let Some(v) = grid.get(&(i, j)) {
                        seen.extend_from_slice(v);
                    }
                }
            }
            seen.sort_unstable();
            seen.dedup();
            for idx in seen {
                let sref = &wu_segments[idx];
                let wud = &wu.disks[sref.disk];
                let (a, b) = (&wud.nodes[sref.node], &wud.nodes[sref.node + 1]);
                let Some((t, u)) = segment_cross(a, b, c, d) else { continue };
                let point = a * (1.0 - t) + b * t;
                let su = wud.params[sref.node]
                    + t * (wud.params[sref.node + 1] - wud.params[sref.node]);
                let ss = wsd.params[ws_ni] + u * (wsd.params[ws_ni + 1] - wsd.params[ws_ni]);
                let tu = wud.tangent_at(su);
                let tsv = wsd.tangent_at(ss);
                let angle = (tu.dot(&tsv).abs() / (tu.norm() * tsv.norm())).clamp(0.0, 1.0).acos();
                let sd = sigma_distance(surfaces, &point)?;
                if sd < clearance {
                    continue;
                }
                hits.push(IntersectionHit {
                    point,
                    angle,
                    sigma_distance: sd,
                    transversal: angle >= ANGLE_THRESHOLD,
                    wu_location: (sref.disk, su),
                    ws_location: (ws_di, ss),
                });
            }
        }
    }

    // Abutting segments report their shared endpoint twice; merge clusters.
    hits.sort_by(|p, q| {
        (p.wu_location.0, p.wu_location.1)
            .partial_cmp(&(q.wu_location.0, q.wu_location.1))
            .unwrap()
    });
    let mut merged: Vec<IntersectionHit> = Vec::new();
    for h in hits {
        let dup = merged.iter().any(|m| (&m.point - &h.point).norm() < 1e-9);
        if !dup {
            merged.push(h);
        }
    }
    Ok(merged)
}

/// Proper crossing of segments [a, b] and [c, d]: fractional positions
/// (t, u) in [0, 1]^2, None for parallel or disjoint pairs.
fn segment_cross(a: &State, b: &State, c: &State, d: &State) -> Option<(f64, f64)> {
    let r = b - a;
    let s = d - c;
    let denom = r[0] * s[1] - r[1] * s[0];
    let scale = r.norm() * s.norm();
    if denom.abs() <= 1e-14 * scale {
        return None;
    }
    let qp = c - a;
    let t = (qp[0] * s[1] - qp[1] * s[0]) / denom;
    let u = (qp[0] * r[1] - qp[1] * r[0]) / denom;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
        Some((t, u))
    } else {
        None
    }
}

/// One sample of an inclination trace.
#[derive(Clone, Debug)]
pub struct InclinationRecord {
    pub n: usize,
    /// Base point r_n.
    pub point: State,
    /// Unit tangent v_n.
    pub tangent: State,
    /// |v_n^s| / |v_n^u| in the adapted chart (roles swap on backward
    /// traces).
    pub lambda: f64,
    /// |v_n^u| / |v_{n-1}^u|, the expanding-block stretch; None at n = 0.
    pub stretch: Option<f64>,
    /// Did the orbit segment from r_{n-1} cross a switching surface.
    pub crossed: bool,
}

/// Tangent evolution along a map orbit, with per-iterate inclinations.
#[derive(Clone, Debug)]
pub struct InclinationTrace {
    pub records: Vec<InclinationRecord>,
    /// Filled when the orbit left the map domain before the requested
    /// iterate count; the records up to that point remain valid.
    pub truncated: Option<String>,
    pub backward: bool,
}

/// Trace seeded at a disk node, following the forward map.
pub fn inclination_trace(
    map: &PoincareMap,
    chart: &Chart,
    disk: &Disk,
    node: usize,
    iterates: usize,
) -> Result<InclinationTrace> {
    if node >= disk.len() {
        return Err(Error::Invalid(format!("disk node {node} out of {}", disk.len())));
    }
    inclination_trace_from(
        map,
        chart,
        disk.nodes[node].clone(),
        disk.tangents[node].clone(),
        iterates,
        false,
    )
}

/// Core trace driver. Forward traces measure `lambda = |v^s| / |v^u|` and
/// the unstable stretch; backward traces (under the inverse map) measure
/// the mirrored quantities, realizing the time-reversal symmetry.
pub fn inclination_trace_from(
    map: &PoincareMap,
    chart: &Chart,
    r0: State,
    v0: State,
    iterates: usize,
    backward: bool,
) -> Result<InclinationTrace> {
    let split = |v: &State| -> (f64, f64) {
        let (s, u) = chart.split_norms(v);
        if backward {
            (u, s)
        } else {
            (s, u)
        }
    };
    let (top0, bot0) = split(&v0);
    let norm0 = v0.norm();
    if !(norm0 > 0.0) {
        return Err(Error::Invalid("zero seed tangent".into()));
    }
    if bot0 <= TRANSVERSALITY_EPS * norm0 {
        return Err(Error::NotTransversal {
            reason: format!(
                "seed tangent expanding component {:.3e} below {:.1e} of |v|",
                bot0, TRANSVERSALITY_EPS
            ),
        });
    }
    let mut records = Vec::with_capacity(iterates + 1);
    let mut r = r0;
    let mut v = &v0 / norm0;
    let mut bot_prev = bot0 / norm0;
    records.push(InclinationRecord {
        n: 0,
        point: r.clone(),
        tangent: v.clone(),
        lambda: top0 / bot0,
        stretch: None,
        crossed: false,
    });
    let mut truncated = None;
    for n in 1..=iterates {
        let traj = if backward { map.inverse_trajectory(&r) } else { map.eval_trajectory(&r) };
        let traj = match traj {
            Ok(t) => t,
            Err(e) => {
                truncated = Some(e.to_string());
                break;
            }
        };
        let w = match crate::variational::propagate_tangent(
            &map.system,
            &traj,
            &v,
            &map.controls.tol,
        ) {
            Ok(w) => w,
            Err(e) => {
                truncated = Some(e.to_string());
                break;
            }
        };
        let (top, bot) = split(&w);
        if bot <= TRANSVERSALITY_EPS * w.norm() {
            return Err(Error::NotTransversal {
                reason: format!("expanding component degenerated at iterate {n}"),
            });
        }
        let stretch = bot / bot_prev;
        r = traj.final_state();
        let wn = w.norm();
        v = &w / wn;
        bot_prev = bot / wn;
        records.push(InclinationRecord {
            n,
            point: r.clone(),
            tangent: v.clone(),
            lambda: top / bot,
            stretch: Some(stretch),
            crossed: !traj.events.is_empty(),
        });
    }
    Ok(InclinationTrace { records, truncated, backward })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::FlowControls;
    use crate::poincare::{find_fixed_point, ExtendedSystem, PoincareMap};
    use crate::systems::{self, PiecewiseSystem, SmoothField};
    use nalgebra::{dvector, Complex, DVector};

    fn saddle_from_matrix(p: State, m: DMatrix<f64>) -> SaddleData {
        let pairs = crate::linalg::eigen_pairs(&m).unwrap();
        let mut stable = Vec::new();
        let mut unstable = Vec::new();
        for pair in pairs {
            if pair.value.norm() < 1.0 {
                stable.push(pair);
            } else {
                unstable.push(pair);
            }
        }
        let eigenvalues = stable.iter().chain(&unstable).map(|p| p.value).collect();
        SaddleData {
            point: p,
            section: 0.0,
            epsilon: 0.0,
            jacobian: m,
            eigenvalues,
            stable,
            unstable,
            margin: 0.5,
            residual: 0.0,
        }
    }

    #[test]
    fn diagonal_saddle_gives_axis_chart() {
        let s = saddle_from_matrix(dvector![0.0, 0.0], DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 2.0]));
        let chart = adapted_coordinates(&s).unwrap();
        // Stable eigenvector is the x axis here, so local (x_s, x_u)
        // coordinates read off (x, y) directly.
        let q = chart.to_local(&dvector![0.3, -0.7]);
        assert!((q[0].abs() - 0.3).abs() < 1e-12 && (q[1].abs() - 0.7).abs() < 1e-12);
        let back = chart.to_world(&q);
        assert!((back - dvector![0.3, -0.7]).norm() < 1e-12);
        assert!(chart.condition < 1.0 + 1e-9);
    }

    #[test]
    fn shear_chart_aligns_the_slanted_eigenvector() {
        let s = saddle_from_matrix(
            dvector![0.0, 0.0],
            DMatrix::from_row_slice(2, 2, &[0.5, 1.0, 0.0, 2.0]),
        );
        let chart = adapted_coordinates(&s).unwrap();
        // Unstable eigenvector of [[0.5, 1], [0, 2]] is (1, 1.5).
        let v = dvector![1.0, 1.5];
        let q = chart.to_local(&v);
        assert!(q[0].abs() < 1e-10, "unstable eigenvector should map to the x_u axis");
        assert!(q[1].abs() > 1.0);
        for sample in [dvector![0.2, 0.1], dvector![-0.4, 0.9]] {
            let round = chart.to_world(&chart.to_local(&sample));
            assert!((round - &sample).norm() < 1e-12);
        }
    }

    #[test]
    fn complex_spectrum_is_rejected() {
        let rot = DMatrix::from_row_slice(2, 2, &[0.0, -2.0, 2.0, 0.0]);
        let pairs = crate::linalg::eigen_pairs(&rot).unwrap();
        let s = SaddleData {
            point: dvector![0.0, 0.0],
            section: 0.0,
            epsilon: 0.0,
            jacobian: rot,
            eigenvalues: pairs.iter().map(|p| p.value).collect(),
            stable: vec![],
            unstable: pairs,
            margin: 1.0,
            residual: 0.0,
        };
        match adapted_coordinates(&s) {
            Err(Error::DegenerateSpectrum { .. }) => {}
            other => panic!("expected DegenerateSpectrum, got {other:?}"),
        }
    }

    fn linear_system(rate_x: f64, rate_y: f64) -> PiecewiseSystem {
        PiecewiseSystem::smooth(
            SmoothField::new(2, "linear", move |x: &State, _| {
                dvector![rate_x * x[0], rate_y * x[1]]
            })
            .with_jacobian(move |_: &State, _| {
                DMatrix::from_row_slice(2, 2, &[rate_x, 0.0, 0.0, rate_y])
            }),
        )
    }

    /// Time-1 map diag(2, 1/2).
    fn doubling_map() -> PoincareMap {
        let ln2 = std::f64::consts::LN_2;
        let ext = ExtendedSystem::autonomous(linear_system(ln2, -ln2), 1.0).unwrap();
        PoincareMap::new(&ext, 0.0, FlowControls::default())
    }

    fn doubling_saddle(map: &PoincareMap) -> SaddleData {
        find_fixed_point(map, &dvector![1e-3, 1e-3]).unwrap()
    }

    #[test]
    fn linear_local_manifold_is_the_axis_segment() {
        let map = doubling_map();
        let saddle = doubling_saddle(&map);
        let disk = local_manifold(&map, &saddle, Branch::Unstable, 1, 0.5).unwrap();
        assert_eq!(disk.len(), LOCAL_NODES + 1);
        for node in &disk.nodes {
            assert!(node[1].abs() < 1e-10, "unstable manifold should be the x axis");
        }
        let end = disk.nodes.last().unwrap();
        assert!((end[0] - 0.5).abs() < 1e-9);
        let stable = local_manifold(&map, &saddle, Branch::Stable, -1, 0.4).unwrap();
        for node in &stable.nodes {
            assert!(node[0].abs() < 1e-10, "stable manifold should be the y axis");
        }
        assert!((stable.nodes.last().unwrap()[1] + 0.4).abs() < 1e-9);
    }

    #[test]
    fn linear_continuation_doubles_and_abuts() {
        let map = doubling_map();
        let saddle = doubling_saddle(&map);
        let local = local_manifold(&map, &saddle, Branch::Unstable, 1, 0.25).unwrap();
        let atlas = ManifoldAtlas::from_local(saddle, Branch::Unstable, 1, local);
        let caps = GrowthCaps { h_max: 0.05, ..GrowthCaps::default() };
        let grown = continue_manifold(&map, &atlas, 3, &caps).unwrap();
        assert_eq!(grown.disks.len(), 4);
        assert!(grown.truncations.is_empty());
        for d in &grown.disks {
            for node in &d.nodes {
                assert!(node[1].abs() < 1e-9);
            }
        }
        // Seed reaches 0.25; images end at 0.5, 1.0, 2.0.
        let ends: Vec<f64> = grown.disks.iter().map(|d| d.nodes.last().unwrap()[0]).collect();
        assert!((ends[1] - 0.5).abs() < 1e-8, "ends {ends:?}");
        assert!((ends[2] - 1.0).abs() < 1e-7);
        assert!((ends[3] - 2.0).abs() < 1e-7);
        for k in 1..grown.disks.len() {
            let prev_end = grown.disks[k - 1].nodes.last().unwrap();
            let start = &grown.disks[k].nodes[0];
            assert!((prev_end - start).norm() < 1e-7, "disks must abut");
        }
    }

    #[test]
    fn local_manifold_reports_shrink_radius_when_seed_hits_sigma() {
        let ln2 = std::f64::consts::LN_2;
        let field = SmoothField::new(2, "linear", move |x: &State, _| {
            dvector![ln2 * x[0], -ln2 * x[1]]
        });
        let h = systems::polynomial_surface(
            0,
            "x - 0.3",
            systems::Poly::new(2, vec![(1.0, vec![1, 0]), (-0.3, vec![0, 0])]).unwrap(),
        );
        let sys = PiecewiseSystem::new(
            vec![field.clone(), field],
            vec![h],
            systems::RegionTable::new(vec![(vec![-1], 0), (vec![1], 1)]),
        )
        .unwrap();
        let ext = ExtendedSystem::autonomous(sys, 1.0).unwrap();
        let map = PoincareMap::new(&ext, 0.0, FlowControls::default());
        let saddle = find_fixed_point(&map, &dvector![1e-3, 1e-3]).unwrap();
        match local_manifold(&map, &saddle, Branch::Unstable, 1, 0.5) {
            Err(Error::ShrinkRadius { requested, admissible, .. }) => {
                assert_eq!(requested, 0.5);
                assert!(admissible > 0.25 && admissible < 0.3, "admissible {admissible}");
            }
            other => panic!("expected ShrinkRadius, got {other:?}"),
        }
    }

    #[test]
    fn tier_a_local_manifold_tangency_error_shrinks_with_radius() {
        let ext =
            ExtendedSystem::autonomous(crate::benchmarks::tier_a(), 1.0).unwrap();
        let map = PoincareMap::new(&ext, 0.0, FlowControls::default());
        let saddle = find_fixed_point(&map, &dvector![1e-4, 1e-4]).unwrap();
        let dir = saddle.unstable_direction().unwrap();
        let angle_of = |radius: f64| -> f64 {
            let disk = local_manifold(&map, &saddle, Branch::Unstable, 1, radius).unwrap();
            let chord = disk.nodes.last().unwrap() - &disk.nodes[0];
            (chord.dot(&dir).abs() / chord.norm()).clamp(0.0, 1.0).acos()
        };
        let coarse = angle_of(0.2);
        let fine = angle_of(0.02);
        assert!(coarse < 0.2, "already roughly tangent, got {coarse}");
        assert!(fine < 0.35 * coarse, "tangency error should shrink: {fine} vs {coarse}");
    }

    #[test]
    fn synthetic_atlases_cross_at_right_angle() {
        let s1 = saddle_from_matrix(
            dvector![0.0, 0.0],
            DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 2.0]),
        );
        let horizontal = Disk::from_nodes(
            (0..=20).map(|i| dvector![-1.0 + 0.1 * i as f64, 0.5]).collect(),
            DiskProvenance::Seed,
        )
        .unwrap();
        let vertical = Disk::from_nodes(
            (0..=20).map(|i| dvector![0.25, -1.0 + 0.1 * i as f64]).collect(),
            DiskProvenance::Seed,
        )
        .unwrap();
        let wu = ManifoldAtlas::from_local(s1.clone(), Branch::Unstable, 1, horizontal);
        let ws = ManifoldAtlas::from_local(s1, Branch::Stable, 1, vertical);
        let hits = find_transversal_intersection(&wu, &ws, &[], 0.0).unwrap();
        assert_eq!(hits.len(), 1);
        let hit = &hits[0];
        assert!((&hit.point - dvector![0.25, 0.5]).norm() < 1e-12);
        assert!((hit.angle - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!(hit.transversal);
        assert!(hit.sigma_distance.is_infinite());
    }

    #[test]
    fn inclination_trace_matches_the_linear_recursion() {
        let map = doubling_map();
        let saddle = doubling_saddle(&map);
        let chart = adapted_coordinates(&saddle).unwrap();
        // Seed v with (v_s, v_u) = (1, 1) at a point on the unstable axis.
        let trace = inclination_trace_from(
            &map,
            &chart,
            dvector![0.1, 0.0],
            dvector![1.0, 1.0].normalize(),
            6,
            false,
        )
        .unwrap();
        assert!(trace.truncated.is_none());
        assert_eq!(trace.records.len(), 7);
        for rec in &trace.records {
            let expect = 0.25f64.powi(rec.n as i32);
            assert!(
                (rec.lambda - expect).abs() < 1e-8 * (1.0 + expect),
                "lambda_{} = {}, expected {}",
                rec.n,
                rec.lambda,
                expect
            );
            if let Some(st) = rec.stretch {
                assert!((st - 2.0).abs() < 1e-8, "stretch {st}");
            }
        }
    }

    #[test]
    fn seed_inclination_reads_off_the_components() {
        let map = doubling_map();
        let saddle = doubling_saddle(&map);
        let chart = adapted_coordinates(&saddle).unwrap();
        // World (x, y) = (v_u, v_s) here; (v_s, v_u) = (1, 2) gives 0.5.
        let trace = inclination_trace_from(
            &map,
            &chart,
            dvector![0.05, 0.0],
            dvector![2.0, 1.0],
            0,
            false,
        )
        .unwrap();
        assert!((trace.records[0].lambda - 0.5).abs() < 1e-12);
    }

    #[test]
    fn stable_seed_tangent_is_not_transversal() {
        let map = doubling_map();
        let saddle = doubling_saddle(&map);
        let chart = adapted_coordinates(&saddle).unwrap();
        match inclination_trace_from(&map, &chart, dvector![0.1, 0.0], dvector![0.0, 1.0], 3, false)
        {
            Err(Error::NotTransversal { .. }) => {}
            other => panic!("expected NotTransversal, got {other:?}"),
        }
    }

    #[test]
    fn backward_trace_mirrors_the_forward_bound() {
        let map = doubling_map();
        let saddle = doubling_saddle(&map);
        let chart = adapted_coordinates(&saddle).unwrap();
        // Backward trace seeds on the stable axis; the mirrored inclination
        // |v_u| / |v_s| obeys the same 4^{-n} decay.
        let trace = inclination_trace_from(
            &map,
            &chart,
            dvector![0.0, 0.1],
            dvector![1.0, 1.0],
            5,
            true,
        )
        .unwrap();
        for rec in &trace.records {
            let expect = 0.25f64.powi(rec.n as i32);
            assert!((rec.lambda - expect).abs() < 1e-8 * (1.0 + expect));
        }
    }

    #[test]
    fn window_and_nearest_param_are_consistent() {
        let disk = Disk::from_nodes(
            (0..=10).map(|i| dvector![i as f64 * 0.1, 0.0]).collect(),
            DiskProvenance::Seed,
        )
        .unwrap();
        let (s, d) = disk.nearest_param(&dvector![0.34, 0.02]);
        assert!(d < 0.03);
        assert!((disk.eval(s)[0] - 0.34).abs() < 1e-12);
        let w = disk.window(-0.5, 0.5).unwrap();
        assert!((w.nodes[0][0] - 0.25).abs() < 1e-12);
        assert!((w.nodes.last().unwrap()[0] - 0.75).abs() < 1e-12);
        assert!((w.params[0] + 1.0).abs() < 1e-12);
        assert!((w.params.last().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trace_from_disk_node_uses_its_frame() {
        let map = doubling_map();
        let saddle = doubling_saddle(&map);
        let chart = adapted_coordinates(&saddle).unwrap();
        let disk = local_manifold(&map, &saddle, Branch::Unstable, 1, 0.3).unwrap();
        let trace = inclination_trace(&map, &chart, &disk, disk.len() / 2, 4).unwrap();
        // Tangents of the unstable axis have no stable component at all.
        for rec in &trace.records {
            assert!(rec.lambda < 1e-9, "lambda {}", rec.lambda);
            if let Some(st) = rec.stretch {
                assert!((st - 2.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn saddle_helper_builds_consistent_eigenpairs() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]);
        let s = saddle_from_matrix(dvector![0.0, 0.0], m.clone());
        assert_eq!(s.stable_dim(), 1);
        assert_eq!(s.unstable_dim(), 1);
        let pair = &s.unstable[0];
        let av: DVector<Complex<f64>> = m.map(|x| Complex::new(x, 0.0)) * &pair.vector;
        let lv: DVector<Complex<f64>> = &pair.vector * pair.value;
        assert!((av - lv).norm() < 1e-10);
    }
}
