//! Artifact serialization: CSV tables and JSON reports.
//!
//! CSV numbers use full-precision scientific notation so downstream diffs
//! are exact. JSON objects serialize with sorted keys; together with the
//! fixed row orders every artifact is byte-deterministic for a given
//! config and seed. Non-finite floats appear in JSON as the strings
//! "inf", "-inf", "nan" instead of being nulled.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use serde_json::{json, Value};

use crate::error::Error;
use crate::flow::{Terminal, Trajectory};
use crate::lambda::{BoundReport, ConvergenceTable, LambdaSet, ProofConstants};
use crate::manifolds::{InclinationTrace, IntersectionHit, ManifoldAtlas};
use crate::poincare::{ConjugacyReport, PhaseFamily, RefusalRecord, SaddleData};
use crate::systems::PointClass;
use crate::Result;

/// Full-precision scientific notation (17 significant digits).
pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn float(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v.is_nan() {
        json!("nan")
    } else if v > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn vector(v: &DVector<f64>) -> Value {
    Value::Array(v.iter().map(|&c| float(c)).collect())
}

fn matrix(m: &DMatrix<f64>) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| float(m[(i, j)])).collect()))
            .collect(),
    )
}

fn complex(z: &Complex<f64>) -> Value {
    json!({ "re": float(z.re), "im": float(z.im) })
}

fn point_class(class: &PointClass) -> Value {
    match class {
        PointClass::Interior { component } => json!({ "kind": "interior", "component": component }),
        PointClass::Crossing { surface, pre, post, sign } => json!({
            "kind": "crossing", "surface": surface, "pre": pre, "post": post, "sign": sign
        }),
        PointClass::Tangency { surface } => json!({ "kind": "tangency", "surface": surface }),
        PointClass::NonRegular { surface } => json!({ "kind": "non-regular", "surface": surface }),
        PointClass::Corner { surfaces } => json!({ "kind": "corner", "surfaces": surfaces }),
    }
}

fn terminal(status: &Terminal) -> Value {
    match status {
        Terminal::Completed => json!({ "kind": "completed" }),
        Terminal::HitNonCrossing { class } => {
            json!({ "kind": "hit-non-crossing", "class": point_class(class) })
        }
        Terminal::BlewUp => json!({ "kind": "blew-up" }),
        Terminal::LeftDomain => json!({ "kind": "left-domain" }),
    }
}

fn refusal(r: &RefusalRecord) -> Value {
    json!({ "x": vector(&r.x), "kind": r.kind, "message": r.message })
}

fn coordinate_header(dim: usize) -> String {
    (0..dim).map(|j| format!("x{j}")).collect::<Vec<_>>().join(",")
}

/// Trajectory as one row per integrator step knot, arcs in order.
/// Columns: t, coordinates, active component.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let dim = traj.x0.len();
    let mut out = format!("t,{},component\n", coordinate_header(dim));
    let mut row = |t: f64, x: &DVector<f64>, c: usize| {
        let coords = x.iter().map(|&v| fmt(v)).collect::<Vec<_>>().join(",");
        let _ = writeln!(out, "{},{},{}", fmt(t), coords, c);
    };
    for arc in &traj.arcs {
        let steps = arc.dense.steps();
        if steps.is_empty() {
            row(arc.dense.t0, &arc.dense.y0, arc.component);
        }
        for step in steps {
            row(step.t0, &step.eval(step.t0), arc.component);
        }
        row(arc.dense.t1, &arc.dense.y1, arc.component);
    }
    out
}

/// Crossing events plus the terminal status.
pub fn events_json(traj: &Trajectory) -> Value {
    let events: Vec<Value> = traj
        .events
        .iter()
        .map(|e| {
            json!({
                "t": float(e.t),
                "x": vector(&e.x),
                "surface": e.surface,
                "pre": e.pre,
                "post": e.post,
                "sign": e.sign,
                "residual": float(e.residual),
            })
        })
        .collect();
    json!({
        "t0": float(traj.t0),
        "x0": vector(&traj.x0),
        "requested": float(traj.requested),
        "t_end": float(traj.t_end()),
        "final_state": vector(&traj.final_state()),
        "status": terminal(&traj.status),
        "event_count": events.len(),
        "min_event_gap": traj.min_event_gap().map_or(Value::Null, float),
        "events": events,
    })
}

/// Atlas polylines, one row per node.
/// Columns: disk, node, param, coordinates, crossed.
pub fn atlas_csv(atlas: &ManifoldAtlas) -> String {
    let dim = atlas.saddle.point.len();
    let mut out = format!("disk,node,param,{},crossed\n", coordinate_header(dim));
    for (d, disk) in atlas.disks.iter().enumerate() {
        for i in 0..disk.nodes.len() {
            let coords = disk.nodes[i].iter().map(|&v| fmt(v)).collect::<Vec<_>>().join(",");
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                d,
                i,
                fmt(disk.params[i]),
                coords,
                disk.crossed[i] as u8
            );
        }
    }
    out
}

pub fn saddle_json(s: &SaddleData) -> Value {
    let pairs = |v: &[crate::linalg::EigenPair]| -> Vec<Value> {
        v.iter()
            .map(|p| {
                json!({
                    "value": complex(&p.value),
                    "vector": Value::Array(p.vector.iter().map(complex).collect()),
                })
            })
            .collect()
    };
    json!({
        "point": vector(&s.point),
        "section": float(s.section),
        "epsilon": float(s.epsilon),
        "jacobian": matrix(&s.jacobian),
        "eigenvalues": Value::Array(s.eigenvalues.iter().map(complex).collect()),
        "stable": pairs(&s.stable),
        "unstable": pairs(&s.unstable),
        "margin": float(s.margin),
        "residual": float(s.residual),
    })
}

pub fn phase_family_json(f: &PhaseFamily) -> Value {
    json!({
        "saddles": Value::Array(f.saddles.iter().map(saddle_json).collect()),
        "closure_residual": float(f.closure_residual),
    })
}

pub fn intersections_json(hits: &[IntersectionHit]) -> Value {
    let list: Vec<Value> = hits
        .iter()
        .map(|h| {
            json!({
                "point": vector(&h.point),
                "angle": float(h.angle),
                "sigma_distance": float(h.sigma_distance),
                "transversal": h.transversal,
                "wu_location": { "disk": h.wu_location.0, "param": float(h.wu_location.1) },
                "ws_location": { "disk": h.ws_location.0, "param": float(h.ws_location.1) },
            })
        })
        .collect();
    json!({ "count": list.len(), "hits": list })
}

pub fn constants_json(c: &ProofConstants) -> Value {
    json!({
        "a": float(c.a),
        "k": float(c.k),
        "k1": float(c.k1),
        "a1": float(c.a1),
        "b": float(c.b),
        "b1": float(c.b1),
        "eta": float(c.eta),
        "box_v": vector(&c.box_v.half),
        "box_v1": vector(&c.box_v1.half),
        "samples": c.samples,
        "feasible": c.feasible,
        "failures": c.failures,
        "shrink_estimate": c.shrink_estimate.map_or(Value::Null, float),
    })
}

/// Per-inequality pass/fail with margins.
pub fn bound_report_json(r: &BoundReport) -> Value {
    let checks: Vec<Value> = r
        .checks
        .iter()
        .map(|c| {
            let failures: Vec<Value> = c
                .failures
                .iter()
                .map(|v| json!({ "n": v.n, "lhs": float(v.lhs), "rhs": float(v.rhs) }))
                .collect();
            json!({
                "name": c.name,
                "applicable": c.applicable,
                "checked": c.checked,
                "worst_margin": float(c.worst_margin),
                "pass": c.passed(),
                "failures": failures,
            })
        })
        .collect();
    json!({
        "feasible": r.feasible,
        "all_pass": r.all_pass,
        "n0": r.n0.map_or(Value::Null, |n| json!(n)),
        "n1": r.n1.map_or(Value::Null, |n| json!(n)),
        "n2": r.n2.map_or(Value::Null, |n| json!(n)),
        "excluded": r.excluded,
        "checks": checks,
    })
}

/// Inclination trace, one row per iterate.
/// Columns: n, coordinates, tangent, lambda, stretch, crossed.
pub fn trace_csv(trace: &InclinationTrace) -> String {
    let dim = trace.records.first().map_or(0, |r| r.point.len());
    let tangent_header =
        (0..dim).map(|j| format!("v{j}")).collect::<Vec<_>>().join(",");
    let mut out = format!("n,{},{},lambda,stretch,crossed\n", coordinate_header(dim), tangent_header);
    for r in &trace.records {
        let coords = r.point.iter().map(|&v| fmt(v)).collect::<Vec<_>>().join(",");
        let tang = r.tangent.iter().map(|&v| fmt(v)).collect::<Vec<_>>().join(",");
        let stretch = r.stretch.map_or_else(String::new, fmt);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.n,
            coords,
            tang,
            fmt(r.lambda),
            stretch,
            r.crossed as u8
        );
    }
    out
}

/// The convergence table: n, C0, C1, mu_max, radius_n.
pub fn convergence_csv(table: &ConvergenceTable) -> String {
    let mut out = String::from("n,C0,C1,mu_max,radius_n\n");
    for r in &table.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.n,
            fmt(r.c0),
            fmt(r.c1),
            fmt(r.mu_max),
            fmt(r.radius)
        );
    }
    out
}

/// Experiment context for the convergence table: the homoclinic point, the
/// crossing angle, which comparisons bind, and per-row mesh diagnostics.
pub fn convergence_json(table: &ConvergenceTable) -> Value {
    let rows: Vec<Value> = table
        .rows
        .iter()
        .map(|r| {
            json!({
                "n": r.n,
                "c0": float(r.c0),
                "c1": float(r.c1),
                "mu_max": float(r.mu_max),
                "radius": float(r.radius),
                "windowed": r.windowed,
                "coverage": float(r.coverage),
            })
        })
        .collect();
    json!({
        "q": vector(&table.q),
        "q_param": float(table.q_param),
        "angle": float(table.angle),
        "c1_required": table.c1_required,
        "n2": table.n2.map_or(Value::Null, |n| json!(n)),
        "rows": rows,
    })
}

pub fn conjugacy_json(r: &ConjugacyReport) -> Value {
    let samples: Vec<Value> = r
        .samples
        .iter()
        .map(|s| json!({ "x": vector(&s.x), "residual": float(s.residual) }))
        .collect();
    json!({
        "t1": float(r.t1),
        "t2": float(r.t2),
        "epsilon": float(r.epsilon),
        "max_residual": float(r.max_residual),
        "sample_count": samples.len(),
        "samples": samples,
        "excluded": Value::Array(r.excluded.iter().map(refusal).collect()),
    })
}

/// Lambda-set membership grid, one row per classified point.
/// Columns: coordinates, depth (empty when not a member), distance, failed.
pub fn lambda_set_csv(set: &LambdaSet) -> String {
    let dim = set.points.first().map_or(0, |p| p.x.len());
    let mut out = format!("{},depth,distance,failed\n", coordinate_header(dim));
    for p in &set.points {
        let coords = p.x.iter().map(|&v| fmt(v)).collect::<Vec<_>>().join(",");
        let depth = p.depth.map_or_else(String::new, |d| d.to_string());
        let failed = p.failed.as_deref().unwrap_or("");
        let _ = writeln!(out, "{},{},{},{:?}", coords, depth, fmt(p.distance), failed);
    }
    out
}

pub fn lambda_set_json(set: &LambdaSet) -> Value {
    let flagged = set.points.iter().filter(|p| p.failed.is_some()).count();
    json!({
        "depth": set.depth,
        "tol": float(set.tol),
        "counts": set.counts,
        "grid_points": set.points.len(),
        "flagged": flagged,
    })
}

/// Machine-readable error report; `hypothesis` names what failed.
pub fn error_json(err: &Error) -> Value {
    json!({ "error": err.kind(), "message": err.to_string() })
}

/// Writes one artifact under `dir`, creating the directory if needed.
pub fn write_artifact(dir: &Path, prefix: &str, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(format!("{prefix}{name}"));
    fs::write(&path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

/// Sorted-key, newline-terminated JSON text.
pub fn json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json serialization");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{solve, FlowControls};
    use crate::systems::example1;
    use nalgebra::dvector;

    #[test]
    fn trajectory_csv_has_full_precision_and_events_json_matches() {
        let sys = example1();
        let traj =
            solve(&sys, &dvector![0.0, -0.5], 0.0, 1.0, &FlowControls::default()).unwrap();
        let csv = trajectory_csv(&traj);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,x0,x1,component");
        let first = lines.next().unwrap();
        assert!(first.starts_with("0.0000000000000000e0,"), "{first}");
        assert!(first.ends_with(",0"), "{first}");
        let last = csv.lines().last().unwrap();
        assert!(last.ends_with(",1"), "{last}");

        let ev = events_json(&traj);
        assert_eq!(ev["event_count"], json!(1));
        assert_eq!(ev["status"]["kind"], json!("completed"));
        assert_eq!(ev["events"][0]["surface"], json!(0));
    }

    #[test]
    fn json_keys_are_sorted_and_nonfinite_floats_survive() {
        let v = json!({ "zeta": 1, "alpha": 2, "m": float(f64::INFINITY) });
        let text = json_text(&v);
        let alpha = text.find("alpha").unwrap();
        let zeta = text.find("zeta").unwrap();
        assert!(alpha < zeta);
        assert!(text.contains("\"inf\""));
        assert_eq!(float(f64::NEG_INFINITY), json!("-inf"));
        assert_eq!(float(f64::NAN), json!("nan"));
        assert_eq!(float(0.5), json!(0.5));
    }

    #[test]
    fn csv_floats_carry_17_significant_digits() {
        let s = fmt(std::f64::consts::PI);
        assert_eq!(s, "3.1415926535897931e0");
        let parsed: f64 = s.parse().unwrap();
        assert_eq!(parsed, std::f64::consts::PI);
    }
}
