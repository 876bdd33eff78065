//! Experiment configuration: strict JSON or TOML schemas mapped onto the
//! library's domain types.
//!
//! Parsing is strict: unknown keys are rejected everywhere, so a typo in a
//! tolerance name fails the run instead of silently running with defaults.
//! Numeric controls default to the library defaults when omitted. The
//! format is chosen by file extension.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::benchmarks;
use crate::error::Error;
use crate::flow::FlowControls;
use crate::manifolds::GrowthCaps;
use crate::poincare::{ExtendedSystem, Perturbation};
use crate::systems::{
    polynomial_field, polynomial_surface, PiecewiseSystem, Poly, RegionTable, SmoothField, State,
};
use crate::Result;

/// Top-level experiment description.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    #[serde(default)]
    pub extension: ExtensionConfig,
    pub experiment: ExperimentSpec,
    #[serde(default)]
    pub controls: ControlsConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Seed of every pseudo-random choice the experiment makes.
    #[serde(default)]
    pub seed: u64,
}

/// Which system to build: a named builtin or an explicit polynomial one.
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemConfig {
    /// Constant fields (1,1) below `y = 0` and (0,1) above; the flow has
    /// the four-branch closed form used as the grid oracle.
    Example1,
    /// Duffing split along the inert surface x = 1.
    TierA,
    /// The unsplit twin of `tier-a`.
    TierASmooth,
    /// Duffing left of x = 1, damped and re-injected right of it, tuned to
    /// a homoclinic loop that genuinely crosses the surface.
    TierB,
    /// Smooth linear saddle with the given rates; its time-T map has
    /// multipliers `exp(rate T)` and zero nonlinear remainder.
    LinearSaddle {
        contraction_rate: f64,
        expansion_rate: f64,
    },
    /// Explicit piecewise polynomial system.
    Polynomial {
        dim: usize,
        components: Vec<ComponentConfig>,
        #[serde(default)]
        surfaces: Vec<SurfaceConfig>,
        #[serde(default)]
        regions: Vec<RegionConfig>,
    },
}

/// One polynomial term `coefficient * x^exponents`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub coefficient: f64,
    pub exponents: Vec<u32>,
}

/// One smooth polynomial component field.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentConfig {
    pub label: String,
    /// One polynomial (list of terms) per state coordinate.
    pub field: Vec<Vec<TermConfig>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceConfig {
    pub label: String,
    pub terms: Vec<TermConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub signs: Vec<i8>,
    pub component: usize,
}

/// Periodic extension: the period, the amplitudes to sweep, and optional
/// additive forcing terms.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtensionConfig {
    /// Forcing and return-map period. Defaults to the builtin's own period
    /// for `tier-b`, and must be given for map experiments otherwise.
    pub period: Option<f64>,
    /// Amplitudes to sweep; defaults to the single value 0.
    #[serde(default)]
    pub epsilons: Vec<f64>,
    /// Additive forcing `amplitude * cos(2 pi harmonic t / T + phase)` on
    /// one coordinate each, applied identically in every region.
    #[serde(default)]
    pub forcing: Vec<ForcingTerm>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingTerm {
    pub coordinate: usize,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default = "one_u32")]
    pub harmonic: u32,
    #[serde(default)]
    pub phase: f64,
}

fn one() -> f64 {
    1.0
}

fn one_u32() -> u32 {
    1
}

/// The experiment to run, with its own parameters.
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentSpec {
    Simulate(SimulateSpec),
    Poincare(PoincareSpec),
    Manifold(ManifoldSpec),
    Intersect(IntersectSpec),
    LambdaVerify(LambdaVerifySpec),
    Conjugacy(ConjugacySpec),
    LambdaSet(LambdaSetSpec),
}

impl ExperimentSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentSpec::Simulate(_) => "simulate",
            ExperimentSpec::Poincare(_) => "poincare",
            ExperimentSpec::Manifold(_) => "manifold",
            ExperimentSpec::Intersect(_) => "intersect",
            ExperimentSpec::LambdaVerify(_) => "lambda-verify",
            ExperimentSpec::Conjugacy(_) => "conjugacy",
            ExperimentSpec::LambdaSet(_) => "lambda-set",
        }
    }

    /// Whether the experiment is built on the time-T return map and hence
    /// needs a period.
    pub fn needs_period(&self) -> bool {
        !matches!(self, ExperimentSpec::Simulate(_))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSpec {
    pub x0: Vec<f64>,
    #[serde(default)]
    pub t0: f64,
    pub duration: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoincareSpec {
    pub guess: Vec<f64>,
    /// Phase sections to continue the fixed point across; a single entry
    /// just solves at that section.
    #[serde(default)]
    pub sections: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldSpec {
    pub guess: Vec<f64>,
    #[serde(default)]
    pub section: f64,
    /// Any of "stable", "unstable".
    pub branches: Vec<String>,
    #[serde(default = "one_i8")]
    pub side: i8,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
}

fn one_i8() -> i8 {
    1
}

fn default_radius() -> f64 {
    0.05
}

fn default_steps() -> usize {
    4
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntersectSpec {
    pub guess: Vec<f64>,
    #[serde(default)]
    pub section: f64,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// Hits closer to the switching set than this are dropped.
    #[serde(default = "default_clearance")]
    pub clearance: f64,
    /// Hits closer to the saddle than this are dropped (the fixed point
    /// itself is always a trivial intersection).
    #[serde(default)]
    pub exclude_near_saddle: f64,
}

fn default_clearance() -> f64 {
    1e-4
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaVerifySpec {
    pub guess: Vec<f64>,
    #[serde(default)]
    pub section: f64,
    /// Half-widths of the constants box V, one per dimension.
    pub box_v: Vec<f64>,
    /// Half-widths of the refinement box V1.
    pub box_v1: Vec<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// How many times the boxes may be shrunk chasing feasibility.
    #[serde(default = "default_shrinks")]
    pub max_shrinks: usize,
    /// Inclination traces: seeds on a deterministic pseudo-random grid in
    /// V, this many iterates each.
    #[serde(default = "default_traces")]
    pub traces: usize,
    #[serde(default = "default_iterates")]
    pub iterates: usize,
}

fn default_samples() -> usize {
    5
}

fn default_eta() -> f64 {
    crate::lambda::DEFAULT_ETA
}

fn default_shrinks() -> usize {
    4
}

fn default_traces() -> usize {
    10
}

fn default_iterates() -> usize {
    20
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConjugacySpec {
    /// Pairs (t1, t2) of phase sections.
    pub section_pairs: Vec<(f64, f64)>,
    #[serde(default = "default_conjugacy_samples")]
    pub samples: usize,
    /// Sampling box corners.
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

fn default_conjugacy_samples() -> usize {
    100
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaSetSpec {
    #[serde(default)]
    pub section: f64,
    pub depth: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub resolution: Vec<usize>,
    pub tol: f64,
}

/// Numeric controls; every field falls back to the library default.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlsConfig {
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub max_steps: Option<usize>,
    pub step_max: Option<f64>,
    pub surface_tol: Option<f64>,
    pub gradient_tol: Option<f64>,
    pub tangency_rel: Option<f64>,
    pub event_tol: Option<f64>,
    pub rearm_factor: Option<f64>,
    pub event_cap: Option<usize>,
    pub min_arc: Option<f64>,
    pub scan_points: Option<usize>,
    pub norm_cap: Option<f64>,
    pub mesh_h_min: Option<f64>,
    pub mesh_h_max: Option<f64>,
    pub mesh_max_turn: Option<f64>,
    pub max_nodes_per_disk: Option<usize>,
    pub max_total_nodes: Option<usize>,
}

impl ControlsConfig {
    pub fn flow(&self) -> Result<FlowControls> {
        let mut c = FlowControls::default();
        let set = |name: &str, target: &mut f64, v: Option<f64>| -> Result<()> {
            if let Some(v) = v {
                if !(v > 0.0) {
                    return Err(Error::Invalid(format!("{name} must be positive, got {v}")));
                }
                *target = v;
            }
            Ok(())
        };
        set("rel_tol", &mut c.ode.rel_tol, self.rel_tol)?;
        set("abs_tol", &mut c.ode.abs_tol, self.abs_tol)?;
        set("step_max", &mut c.ode.h_max, self.step_max)?;
        set("surface_tol", &mut c.tol.surface, self.surface_tol)?;
        set("gradient_tol", &mut c.tol.gradient, self.gradient_tol)?;
        set("tangency_rel", &mut c.tol.tangency_rel, self.tangency_rel)?;
        set("event_tol", &mut c.event_tol, self.event_tol)?;
        set("rearm_factor", &mut c.rearm_factor, self.rearm_factor)?;
        set("min_arc", &mut c.min_arc, self.min_arc)?;
        set("norm_cap", &mut c.norm_cap, self.norm_cap)?;
        if let Some(v) = self.max_steps {
            c.ode.max_steps = v;
        }
        if let Some(v) = self.event_cap {
            c.event_cap = v;
        }
        if let Some(v) = self.scan_points {
            if v < 2 {
                return Err(Error::Invalid(format!("scan_points must be at least 2, got {v}")));
            }
            c.scan_points = v;
        }
        Ok(c)
    }

    pub fn caps(&self) -> Result<GrowthCaps> {
        let mut g = GrowthCaps::default();
        let set = |name: &str, target: &mut f64, v: Option<f64>| -> Result<()> {
            if let Some(v) = v {
                if !(v > 0.0) {
                    return Err(Error::Invalid(format!("{name} must be positive, got {v}")));
                }
                *target = v;
            }
            Ok(())
        };
        set("mesh_h_min", &mut g.h_min, self.mesh_h_min)?;
        set("mesh_h_max", &mut g.h_max, self.mesh_h_max)?;
        set("mesh_max_turn", &mut g.max_turn, self.mesh_max_turn)?;
        if let Some(v) = self.max_nodes_per_disk {
            g.max_nodes_per_disk = v;
        }
        if let Some(v) = self.max_total_nodes {
            g.max_total_nodes = v;
        }
        Ok(g)
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Artifact directory; created if missing. Overridden by --out.
    pub dir: Option<PathBuf>,
    /// Prefix prepended to every artifact file name.
    #[serde(default)]
    pub prefix: String,
}

/// Reads a config, dispatching on the file extension.
pub fn load(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let parsed: ExperimentConfig = match path.extension().and_then(|s| s.to_str()) {
        Some("json") => serde_json::from_str(&text)
            .map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?,
        Some("toml") => toml::from_str(&text)
            .map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?,
        other => {
            return Err(Error::Invalid(format!(
                "{}: unsupported config extension {:?} (expected json or toml)",
                path.display(),
                other.unwrap_or("none")
            )))
        }
    };
    parsed.validate()?;
    Ok(parsed)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        for &e in &self.extension.epsilons {
            if !(e >= 0.0 && e.is_finite()) {
                return Err(Error::Invalid(format!("epsilon {e} must be nonnegative")));
            }
        }
        if let Some(t) = self.extension.period {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Invalid(format!("period {t} must be positive")));
            }
        }
        if self.experiment.needs_period() && self.period().is_none() {
            return Err(Error::Invalid(format!(
                "experiment {} is built on the return map and needs extension.period",
                self.experiment.kind()
            )));
        }
        let dim = self.system.dim()?;
        for f in &self.extension.forcing {
            if f.coordinate >= dim {
                return Err(Error::Invalid(format!(
                    "forcing coordinate {} out of dimension {dim}",
                    f.coordinate
                )));
            }
        }
        if matches!(self.system, SystemConfig::TierB) && !self.extension.forcing.is_empty() {
            return Err(Error::Invalid(
                "tier-b bundles its own forcing; extension.forcing must be empty".into(),
            ));
        }
        self.controls.flow()?;
        self.controls.caps()?;
        self.experiment.validate(dim)?;
        Ok(())
    }

    /// Effective period: explicit, or the builtin's own.
    pub fn period(&self) -> Option<f64> {
        self.extension.period.or(match self.system {
            SystemConfig::TierB => Some(benchmarks::TIER_B_PERIOD),
            _ => None,
        })
    }

    /// Amplitudes to sweep; `[0]` when unspecified.
    pub fn epsilons(&self) -> Vec<f64> {
        if self.extension.epsilons.is_empty() {
            vec![0.0]
        } else {
            self.extension.epsilons.clone()
        }
    }

    /// Builds the extended system at one amplitude.
    pub fn extended(&self, epsilon: f64) -> Result<ExtendedSystem> {
        if let SystemConfig::TierB = self.system {
            let ext = benchmarks::tier_b()?.extended(epsilon)?;
            if let Some(t) = self.extension.period {
                if (t - ext.period).abs() > 1e-12 {
                    return Err(Error::Invalid(format!(
                        "tier-b period is {}, config asks for {t}",
                        ext.period
                    )));
                }
            }
            return Ok(ext);
        }
        let base = self.system.build()?;
        let period = self.period().unwrap_or(1.0);
        if self.extension.forcing.is_empty() {
            return ExtendedSystem::new(base, None, period, epsilon);
        }
        let dim = base.dim;
        let terms = self.extension.forcing.clone();
        let field = SmoothField::new(dim, "forcing", move |_x: &State, t: f64| {
            let mut v = DVector::zeros(dim);
            for f in &terms {
                let w = 2.0 * std::f64::consts::PI * f.harmonic as f64 / period;
                v[f.coordinate] += f.amplitude * (w * t + f.phase).cos();
            }
            v
        })
        .with_jacobian(move |_x: &State, _t: f64| DMatrix::zeros(dim, dim))
        .with_period(period);
        let fields = vec![field; base.components.len()];
        ExtendedSystem::new(base, Some(Perturbation::new(fields, period)?), period, epsilon)
    }
}

impl SystemConfig {
    pub fn dim(&self) -> Result<usize> {
        match self {
            SystemConfig::Example1
            | SystemConfig::TierA
            | SystemConfig::TierASmooth
            | SystemConfig::TierB
            | SystemConfig::LinearSaddle { .. } => Ok(2),
            SystemConfig::Polynomial { dim, .. } => {
                if *dim == 0 {
                    Err(Error::Invalid("polynomial system dimension must be positive".into()))
                } else {
                    Ok(*dim)
                }
            }
        }
    }

    pub fn build(&self) -> Result<PiecewiseSystem> {
        match self {
            SystemConfig::Example1 => Ok(crate::systems::example1()),
            SystemConfig::TierA => Ok(benchmarks::tier_a()),
            SystemConfig::TierASmooth => Ok(benchmarks::tier_a_smooth()),
            SystemConfig::TierB => Ok(benchmarks::tier_b()?.system.clone()),
            SystemConfig::LinearSaddle { contraction_rate, expansion_rate } => {
                let (a, b) = (*contraction_rate, *expansion_rate);
                if !(a < 0.0 && b > 0.0) {
                    return Err(Error::Invalid(format!(
                        "linear saddle needs contraction_rate < 0 < expansion_rate, got {a}, {b}"
                    )));
                }
                let field = SmoothField::new(2, "linear saddle", move |x: &State, _t| {
                    DVector::from_column_slice(&[a * x[0], b * x[1]])
                })
                .with_jacobian(move |_x: &State, _t| {
                    DMatrix::from_row_slice(2, 2, &[a, 0.0, 0.0, b])
                });
                Ok(PiecewiseSystem::smooth(field))
            }
            SystemConfig::Polynomial { dim, components, surfaces, regions } => {
                let dim = *dim;
                let poly = |terms: &[TermConfig]| -> Result<Poly> {
                    Poly::new(
                        dim,
                        terms.iter().map(|t| (t.coefficient, t.exponents.clone())).collect(),
                    )
                };
                let mut fields = Vec::with_capacity(components.len());
                for c in components {
                    if c.field.len() != dim {
                        return Err(Error::Invalid(format!(
                            "component {} has {} coordinates for dimension {dim}",
                            c.label,
                            c.field.len()
                        )));
                    }
                    let polys: Result<Vec<Poly>> = c.field.iter().map(|t| poly(t)).collect();
                    fields.push(polynomial_field(&c.label, polys?)?);
                }
                let surfs: Result<Vec<_>> = surfaces
                    .iter()
                    .enumerate()
                    .map(|(i, s)| Ok(polynomial_surface(i, &s.label, poly(&s.terms)?)))
                    .collect();
                let table = if regions.is_empty() && surfaces.is_empty() {
                    RegionTable::new(vec![(vec![], 0)])
                } else {
                    RegionTable::new(
                        regions.iter().map(|r| (r.signs.clone(), r.component)).collect(),
                    )
                };
                PiecewiseSystem::new(fields, surfs?, table)
            }
        }
    }
}

impl ExperimentSpec {
    fn validate(&self, dim: usize) -> Result<()> {
        let check_point = |name: &str, v: &[f64]| -> Result<()> {
            if v.len() != dim {
                return Err(Error::Invalid(format!(
                    "{name} has {} coordinates for dimension {dim}",
                    v.len()
                )));
            }
            Ok(())
        };
        match self {
            ExperimentSpec::Simulate(s) => {
                check_point("x0", &s.x0)?;
                if !(s.duration.is_finite() && s.duration != 0.0) {
                    return Err(Error::Invalid("duration must be finite and nonzero".into()));
                }
            }
            ExperimentSpec::Poincare(s) => check_point("guess", &s.guess)?,
            ExperimentSpec::Manifold(s) => {
                check_point("guess", &s.guess)?;
                if s.branches.is_empty() {
                    return Err(Error::Invalid("manifold needs at least one branch".into()));
                }
                for b in &s.branches {
                    if b != "stable" && b != "unstable" {
                        return Err(Error::Invalid(format!(
                            "unknown branch {b:?} (expected \"stable\" or \"unstable\")"
                        )));
                    }
                }
                if s.side != 1 && s.side != -1 {
                    return Err(Error::Invalid(format!("side {} must be 1 or -1", s.side)));
                }
            }
            ExperimentSpec::Intersect(s) => check_point("guess", &s.guess)?,
            ExperimentSpec::LambdaVerify(s) => {
                check_point("guess", &s.guess)?;
                check_point("box_v", &s.box_v)?;
                check_point("box_v1", &s.box_v1)?;
                if !(s.eta > 0.0) {
                    return Err(Error::Invalid(format!("eta must be positive, got {}", s.eta)));
                }
                if s.samples < 2 {
                    return Err(Error::Invalid("samples must be at least 2".into()));
                }
            }
            ExperimentSpec::Conjugacy(s) => {
                check_point("lo", &s.lo)?;
                check_point("hi", &s.hi)?;
                if s.section_pairs.is_empty() {
                    return Err(Error::Invalid("conjugacy needs at least one section pair".into()));
                }
                if s.samples == 0 {
                    return Err(Error::Invalid("conjugacy needs at least one sample".into()));
                }
            }
            ExperimentSpec::LambdaSet(s) => {
                check_point("lo", &s.lo)?;
                check_point("hi", &s.hi)?;
                if s.resolution.len() != dim {
                    return Err(Error::Invalid(format!(
                        "resolution has {} entries for dimension {dim}",
                        s.resolution.len()
                    )));
                }
                if !(s.tol > 0.0) {
                    return Err(Error::Invalid(format!("tol must be positive, got {}", s.tol)));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_roundtrip_with_defaults() {
        let text = r#"
            system = "tier-b"
            seed = 7

            [extension]
            epsilons = [0.0, 0.02]

            [experiment.poincare]
            guess = [0.0, 0.0]
        "#;
        let cfg: ExperimentConfig = toml::from_str(text).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.period(), Some(benchmarks::TIER_B_PERIOD));
        assert_eq!(cfg.epsilons(), vec![0.0, 0.02]);
        assert_eq!(cfg.experiment.kind(), "poincare");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"
            system = "example1"
            typo_key = 1

            [experiment.simulate]
            x0 = [0.0, -0.5]
            duration = 1.0
        "#;
        let err = toml::from_str::<ExperimentConfig>(text).unwrap_err();
        assert!(err.to_string().contains("typo_key"), "{err}");

        let text = r#"
            system = "example1"

            [experiment.simulate]
            x0 = [0.0, -0.5]
            duration = 1.0
            tupo = 2.0
        "#;
        let err = toml::from_str::<ExperimentConfig>(text).unwrap_err();
        assert!(err.to_string().contains("tupo"), "{err}");
    }

    #[test]
    fn json_parses_polynomial_system() {
        let text = r#"{
            "system": {"polynomial": {
                "dim": 2,
                "components": [
                    {"label": "left", "field": [
                        [{"coefficient": 1.0, "exponents": [0, 0]}],
                        [{"coefficient": 1.0, "exponents": [0, 0]}]
                    ]},
                    {"label": "right", "field": [
                        [],
                        [{"coefficient": 1.0, "exponents": [0, 0]}]
                    ]}
                ],
                "surfaces": [{"label": "y", "terms": [{"coefficient": 1.0, "exponents": [0, 1]}]}],
                "regions": [
                    {"signs": [-1], "component": 0},
                    {"signs": [1], "component": 1}
                ]
            }},
            "experiment": {"simulate": {"x0": [0.0, -0.5], "duration": 1.0}}
        }"#;
        let cfg: ExperimentConfig = serde_json::from_str(text).unwrap();
        cfg.validate().unwrap();
        let sys = cfg.system.build().unwrap();
        assert_eq!(sys.dim, 2);
        assert_eq!(sys.components.len(), 2);
        // The parsed system is Example 1; check one field value each side.
        let f = sys.components[0].eval(&nalgebra::dvector![0.3, -0.2], 0.0).unwrap();
        assert_eq!((f[0], f[1]), (1.0, 1.0));
        let f = sys.components[1].eval(&nalgebra::dvector![0.3, 0.2], 0.0).unwrap();
        assert_eq!((f[0], f[1]), (0.0, 1.0));
    }

    #[test]
    fn map_experiments_demand_a_period() {
        let text = r#"
            system = "example1"

            [experiment.poincare]
            guess = [0.0, 0.0]
        "#;
        let cfg: ExperimentConfig = toml::from_str(text).unwrap();
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("period"), "{err}");
    }

    #[test]
    fn forcing_builds_a_periodic_extension() {
        let text = r#"
            system = "tier-a"

            [extension]
            period = 3.0
            epsilons = [0.05]
            forcing = [{ coordinate = 1 }]

            [experiment.poincare]
            guess = [0.0, 0.0]
        "#;
        let cfg: ExperimentConfig = toml::from_str(text).unwrap();
        cfg.validate().unwrap();
        let ext = cfg.extended(0.05).unwrap();
        assert_eq!(ext.epsilon, 0.05);
        // Forcing acts on y only and equals cos(2 pi t / 3) at amplitude 1.
        let f = ext.system().components[0].eval(&nalgebra::dvector![0.0, 0.0], 0.75).unwrap();
        let base = benchmarks::tier_a().components[0]
            .eval(&nalgebra::dvector![0.0, 0.0], 0.75)
            .unwrap();
        let w = 2.0 * std::f64::consts::PI * 0.75 / 3.0;
        assert!((f[1] - (base[1] + 0.05 * w.cos())).abs() < 1e-15);
        assert_eq!(f[0], base[0]);
    }
}
