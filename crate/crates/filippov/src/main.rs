//! Command-line front end: one subcommand per experiment, all parameters
//! from a config file, artifacts written as CSV and JSON.
//!
//! The subcommand must agree with the experiment block in the config; the
//! mismatch error exists so a stale shell history cannot silently run the
//! wrong experiment against a tuned config.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use filippov::config::{self, ExperimentConfig, ExperimentSpec};
use filippov::error::Error;
use filippov::flow;
use filippov::lambda::{self, ChartBox};
use filippov::manifolds::{
    adapted_coordinates, continue_manifold, find_transversal_intersection, inclination_trace_from,
    local_manifold, Branch, ManifoldAtlas,
};
use filippov::poincare::{
    conjugacy_residual, find_fixed_point, saddle_phase_family, ExtendedSystem, PoincareMap,
};
use filippov::report;
use filippov::systems::State;
use filippov::Result;

const OUT_ENV: &str = "FILIPPOV_OUT";
const THREADS_ENV: &str = "FILIPPOV_THREADS";

#[derive(Parser)]
#[command(
    name = "filippov",
    about = "Piecewise-smooth flows, return maps, invariant manifolds, and lambda-lemma reports",
    version
)]
struct Cli {
    /// Experiment configuration (.toml or .json).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Artifact directory (overrides config and FILIPPOV_OUT).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker thread count (overrides FILIPPOV_THREADS; default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed override for every pseudo-random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// off, error, warn, info, debug, trace.
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Flow a trajectory and record its crossing events.
    Simulate,
    /// Locate a fixed point of the time-T map, optionally across phases.
    Poincare,
    /// Grow stable/unstable manifold atlases at a saddle.
    Manifold,
    /// Sweep grown atlases for transversal intersections.
    Intersect,
    /// Measure proof constants and check inclination bounds on traces.
    LambdaVerify,
    /// Residuals of the conjugacy between two phase sections.
    Conjugacy,
    /// Classify a grid against preimages of the switching set.
    LambdaSet,
}

impl Command {
    fn kind(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Poincare => "poincare",
            Command::Manifold => "manifold",
            Command::Intersect => "intersect",
            Command::LambdaVerify => "lambda-verify",
            Command::Conjugacy => "conjugacy",
            Command::LambdaSet => "lambda-set",
        }
    }
}

fn main() {
    let cli = Cli::parse();
    init_logging(&cli.log_level);
    if let Err(e) = execute(&cli) {
        let text = report::json_text(&report::error_json(&e));
        let dir = cli
            .out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));
        let _ = report::write_artifact(&dir, "", "error.json", &text);
        eprint!("{text}");
        std::process::exit(1);
    }
}

fn init_logging(level: &str) {
    let filter = level.parse().unwrap_or(log::LevelFilter::Warn);
    let _ = env_logger::Builder::new().filter_level(filter).try_init();
}

fn execute(cli: &Cli) -> Result<()> {
    if let Some(n) = resolve_threads(cli)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    }
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Invalid("--config is required".into()))?;
    let cfg = config::load(path)?;
    if cfg.experiment.kind() != cli.command.kind() {
        return Err(Error::Invalid(format!(
            "subcommand {} does not match the config experiment {}",
            cli.command.kind(),
            cfg.experiment.kind()
        )));
    }
    let out = resolve_out(cli, &cfg);
    let seed = cli.seed.unwrap_or(cfg.seed);
    let runner = Runner { cfg: &cfg, out, seed };
    match &cfg.experiment {
        ExperimentSpec::Simulate(s) => runner.simulate(s),
        ExperimentSpec::Poincare(s) => runner.poincare(s),
        ExperimentSpec::Manifold(s) => runner.manifold(s),
        ExperimentSpec::Intersect(s) => runner.intersect(s),
        ExperimentSpec::LambdaVerify(s) => runner.lambda_verify(s),
        ExperimentSpec::Conjugacy(s) => runner.conjugacy(s),
        ExperimentSpec::LambdaSet(s) => runner.lambda_set(s),
    }
}

fn resolve_threads(cli: &Cli) -> Result<Option<usize>> {
    if cli.threads.is_some() {
        return Ok(cli.threads);
    }
    match std::env::var(THREADS_ENV) {
        Ok(s) => s
            .parse()
            .map(Some)
            .map_err(|_| Error::Invalid(format!("{THREADS_ENV}={s} is not a thread count"))),
        Err(_) => Ok(None),
    }
}

fn resolve_out(cli: &Cli, cfg: &ExperimentConfig) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

struct Runner<'c> {
    cfg: &'c ExperimentConfig,
    out: PathBuf,
    seed: u64,
}

impl Runner<'_> {
    fn write(&self, name: &str, contents: &str) -> Result<()> {
        let path = report::write_artifact(&self.out, &self.cfg.output.prefix, name, contents)?;
        log::info!("wrote {}", path.display());
        Ok(())
    }

    fn write_json(&self, name: &str, v: &Value) -> Result<()> {
        self.write(name, &report::json_text(v))
    }

    /// "-eps{i}" on sweeps, empty for a single amplitude.
    fn suffix(&self, i: usize) -> String {
        if self.cfg.epsilons().len() == 1 {
            String::new()
        } else {
            format!("-eps{i}")
        }
    }

    fn sweep(&self, mut body: impl FnMut(usize, f64) -> Result<()>) -> Result<()> {
        for (i, eps) in self.cfg.epsilons().into_iter().enumerate() {
            body(i, eps)?;
        }
        Ok(())
    }

    fn map_at(&self, eps: f64, section: f64) -> Result<(ExtendedSystem, PoincareMap)> {
        let ext = self.cfg.extended(eps)?;
        let controls = self.cfg.controls.flow()?;
        let map = PoincareMap::new(&ext, section, controls);
        Ok((ext, map))
    }

    fn simulate(&self, s: &config::SimulateSpec) -> Result<()> {
        let x0 = DVector::from_column_slice(&s.x0);
        let controls = self.cfg.controls.flow()?;
        if self.cfg.period().is_none() {
            if !self.cfg.extension.forcing.is_empty() {
                return Err(Error::Invalid("extension.forcing needs extension.period".into()));
            }
            if self.cfg.epsilons().iter().any(|&e| e != 0.0) {
                return Err(Error::Invalid(
                    "nonzero epsilons need extension.period to act on anything".into(),
                ));
            }
            let system = self.cfg.system.build()?;
            let traj = flow::solve(&system, &x0, s.t0, s.duration, &controls)?;
            self.write("trajectory.csv", &report::trajectory_csv(&traj))?;
            return self.write_json("events.json", &report::events_json(&traj));
        }
        self.sweep(|i, eps| {
            let ext = self.cfg.extended(eps)?;
            let traj = flow::solve(ext.system(), &x0, s.t0, s.duration, &controls)?;
            let sfx = self.suffix(i);
            self.write(&format!("trajectory{sfx}.csv"), &report::trajectory_csv(&traj))?;
            self.write_json(&format!("events{sfx}.json"), &report::events_json(&traj))
        })
    }

    fn poincare(&self, s: &config::PoincareSpec) -> Result<()> {
        let guess = DVector::from_column_slice(&s.guess);
        self.sweep(|i, eps| {
            let sfx = self.suffix(i);
            if s.sections.len() > 1 {
                let ext = self.cfg.extended(eps)?;
                let controls = self.cfg.controls.flow()?;
                let family = saddle_phase_family(&ext, &s.sections, &guess, &controls)?;
                self.write_json(&format!("phase-family{sfx}.json"), &report::phase_family_json(&family))
            } else {
                let section = s.sections.first().copied().unwrap_or(0.0);
                let (_ext, map) = self.map_at(eps, section)?;
                let saddle = find_fixed_point(&map, &guess)?;
                self.write_json(&format!("saddle{sfx}.json"), &report::saddle_json(&saddle))
            }
        })
    }

    fn grow(
        &self,
        map: &PoincareMap,
        saddle: &filippov::poincare::SaddleData,
        branch: Branch,
        side: i8,
        radius: f64,
        steps: usize,
    ) -> Result<ManifoldAtlas> {
        let local = local_manifold(map, saddle, branch, side, radius)?;
        let atlas = ManifoldAtlas::from_local(saddle.clone(), branch, side, local);
        continue_manifold(map, &atlas, steps, &self.cfg.controls.caps()?)
    }

    fn manifold(&self, s: &config::ManifoldSpec) -> Result<()> {
        let guess = DVector::from_column_slice(&s.guess);
        self.sweep(|i, eps| {
            let (_ext, map) = self.map_at(eps, s.section)?;
            let saddle = find_fixed_point(&map, &guess)?;
            let sfx = self.suffix(i);
            self.write_json(&format!("saddle{sfx}.json"), &report::saddle_json(&saddle))?;
            for name in &s.branches {
                let branch = if name == "stable" { Branch::Stable } else { Branch::Unstable };
                let atlas = self.grow(&map, &saddle, branch, s.side, s.radius, s.steps)?;
                self.write(&format!("atlas-{name}{sfx}.csv"), &report::atlas_csv(&atlas))?;
            }
            Ok(())
        })
    }

    fn intersect(&self, s: &config::IntersectSpec) -> Result<()> {
        let guess = DVector::from_column_slice(&s.guess);
        self.sweep(|i, eps| {
            let (_ext, map) = self.map_at(eps, s.section)?;
            let saddle = find_fixed_point(&map, &guess)?;
            let wu = self.grow(&map, &saddle, Branch::Unstable, 1, s.radius, s.steps)?;
            let ws = self.grow(&map, &saddle, Branch::Stable, 1, s.radius, s.steps)?;
            let mut hits =
                find_transversal_intersection(&wu, &ws, &map.system.surfaces, s.clearance)?;
            // Coincident manifolds produce sub-threshold zigzag crossings,
            // and same-saddle atlases always meet at the saddle itself;
            // neither is a homoclinic point.
            hits.retain(|h| {
                h.transversal && (&h.point - &saddle.point).norm() > s.exclude_near_saddle
            });
            let sfx = self.suffix(i);
            self.write(&format!("atlas-unstable{sfx}.csv"), &report::atlas_csv(&wu))?;
            self.write(&format!("atlas-stable{sfx}.csv"), &report::atlas_csv(&ws))?;
            self.write_json(&format!("intersections{sfx}.json"), &report::intersections_json(&hits))
        })
    }

    fn lambda_verify(&self, s: &config::LambdaVerifySpec) -> Result<()> {
        let guess = DVector::from_column_slice(&s.guess);
        let box_v = ChartBox::new(DVector::from_column_slice(&s.box_v))?;
        let box_v1 = ChartBox::new(DVector::from_column_slice(&s.box_v1))?;
        self.sweep(|i, eps| {
            let (_ext, map) = self.map_at(eps, s.section)?;
            let saddle = find_fixed_point(&map, &guess)?;
            let chart = adapted_coordinates(&saddle)?;
            let constants = lambda::measure_constants_auto(
                &map, &saddle, &chart, &box_v, &box_v1, s.samples, s.eta, s.max_shrinks,
            )?;
            let sfx = self.suffix(i);
            self.write_json(&format!("constants{sfx}.json"), &report::constants_json(&constants))?;
            if !constants.feasible {
                return Err(Error::Hypothesis {
                    reason: format!(
                        "proof constants stay infeasible after {} shrinks: {}",
                        s.max_shrinks,
                        constants.failures.join("; ")
                    ),
                });
            }
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(i as u64));
            let dim = chart.dim();
            let mut reports = Vec::with_capacity(s.traces);
            let mut all_pass = true;
            for t in 0..s.traces {
                let l: State = DVector::from_fn(dim, |r, _| {
                    rng.gen_range(-constants.box_v.half[r]..=constants.box_v.half[r])
                });
                let g: State = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..=1.0_f64));
                let v0 = &chart.basis * g;
                if v0.norm() < 1e-6 {
                    continue;
                }
                let trace =
                    inclination_trace_from(&map, &chart, chart.to_world(&l), v0, s.iterates, false)?;
                let rep = lambda::verify_bounds(&trace, &constants, &chart);
                all_pass &= rep.all_pass;
                if t == 0 {
                    self.write(&format!("trace{sfx}.csv"), &report::trace_csv(&trace))?;
                }
                reports.push(report::bound_report_json(&rep));
            }
            self.write_json(
                &format!("bound-reports{sfx}.json"),
                &json!({ "epsilon": eps, "all_pass": all_pass, "traces": reports }),
            )
        })
    }

    fn conjugacy(&self, s: &config::ConjugacySpec) -> Result<()> {
        let lo = DVector::from_column_slice(&s.lo);
        let hi = DVector::from_column_slice(&s.hi);
        let controls = self.cfg.controls.flow()?;
        self.sweep(|i, eps| {
            let ext = self.cfg.extended(eps)?;
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(i as u64));
            let reports: Vec<Value> = s
                .section_pairs
                .iter()
                .map(|&(t1, t2)| {
                    let points: Vec<State> = (0..s.samples)
                        .map(|_| {
                            DVector::from_fn(lo.len(), |r, _| rng.gen_range(lo[r]..=hi[r]))
                        })
                        .collect();
                    report::conjugacy_json(&conjugacy_residual(&ext, t1, t2, &points, &controls))
                })
                .collect();
            self.write_json(
                &format!("conjugacy{}.json", self.suffix(i)),
                &json!({ "epsilon": eps, "pairs": reports }),
            )
        })
    }

    fn lambda_set(&self, s: &config::LambdaSetSpec) -> Result<()> {
        let lo = DVector::from_column_slice(&s.lo);
        let hi = DVector::from_column_slice(&s.hi);
        self.sweep(|i, eps| {
            let (_ext, map) = self.map_at(eps, s.section)?;
            let set = lambda::lambda_set_depth(
                &map,
                &map.system.surfaces,
                s.depth,
                &lo,
                &hi,
                &s.resolution,
                s.tol,
            )?;
            let sfx = self.suffix(i);
            self.write(&format!("lambda-set{sfx}.csv"), &report::lambda_set_csv(&set))?;
            self.write_json(&format!("lambda-set{sfx}.json"), &report::lambda_set_json(&set))
        })
    }
}
