//! Piecewise smooth systems: component fields, switching surfaces, and the
//! pointwise classification that decides where the crossing convention
//! applies.
//!
//! A point is a crossing point of surface `i` when (i) no other surface is
//! active there, (ii) `grad h_i` is bounded away from zero, and (iii) the Lie
//! derivatives of `h_i` along the two adjacent fields are nonzero with equal
//! sign. Everything downstream (event handling, saltation corrections,
//! manifold growth) consults [`classify_point`] and refuses to continue
//! through anything that is not `Interior` or `Crossing`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// State vector type used throughout the crate.
pub type State = DVector<f64>;

/// Relative step for central finite differences (gradients and Jacobians
/// without analytic closures).
pub const FD_REL_STEP: f64 = 1e-6;

/// Classification tolerances. `surface` is scale-aware: a surface is active
/// at `x` when `|h_i(x)| <= surface * (1 + |x|)`.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub surface: f64,
    pub gradient: f64,
    /// Transversality is certified when `|<grad h, X>| >= tangency_rel * |X| * |grad h|`.
    pub tangency_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            surface: 1e-10,
            gradient: 1e-8,
            tangency_rel: 1e-6,
        }
    }
}

type FieldFn = dyn Fn(&State, f64) -> State + Send + Sync;
type JacFn = dyn Fn(&State, f64) -> DMatrix<f64> + Send + Sync;
type ScalarFn = dyn Fn(&State) -> f64 + Send + Sync;
type GradFn = dyn Fn(&State) -> State + Send + Sync;

/// One smooth component field `X(x, t)`, possibly time-periodic.
#[derive(Clone)]
pub struct SmoothField {
    pub dim: usize,
    pub label: String,
    f: Arc<FieldFn>,
    jac: Option<Arc<JacFn>>,
    /// Declared period of the time dependence; `None` for autonomous fields.
    pub period: Option<f64>,
}

impl fmt::Debug for SmoothField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SmoothField({}, dim {})", self.label, self.dim)
    }
}

impl SmoothField {
    pub fn new<F>(dim: usize, label: impl Into<String>, f: F) -> Self
    where
        F: Fn(&State, f64) -> State + Send + Sync + 'static,
    {
        SmoothField {
            dim,
            label: label.into(),
            f: Arc::new(f),
            jac: None,
            period: None,
        }
    }

    pub fn with_jacobian<J>(mut self, jac: J) -> Self
    where
        J: Fn(&State, f64) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.jac = Some(Arc::new(jac));
        self
    }

    pub fn with_period(mut self, period: f64) -> Self {
        self.period = Some(period);
        self
    }

    /// Evaluate the field, rejecting non-finite output.
    pub fn eval(&self, x: &State, t: f64) -> Result<State> {
        let v = (self.f)(x, t);
        if v.len() != self.dim {
            return Err(Error::Evaluation {
                what: format!("field {}", self.label),
                t,
                reason: format!("returned dimension {} instead of {}", v.len(), self.dim),
            });
        }
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::Evaluation {
                what: format!("field {}", self.label),
                t,
                reason: "non-finite value".into(),
            });
        }
        Ok(v)
    }

    /// Weighted sum `wa * a + wb * b` of two fields on the same space. The
    /// analytic Jacobian survives when both summands carry one.
    pub fn combine(
        label: impl Into<String>,
        a: &SmoothField,
        wa: f64,
        b: &SmoothField,
        wb: f64,
    ) -> Result<SmoothField> {
        if a.dim != b.dim {
            return Err(Error::Invalid(format!(
                "cannot combine fields of dimension {} and {}",
                a.dim, b.dim
            )));
        }
        let (fa, fb) = (a.f.clone(), b.f.clone());
        let mut out = SmoothField::new(a.dim, label, move |x: &State, t| {
            wa * fa(x, t) + wb * fb(x, t)
        });
        if let (Some(ja), Some(jb)) = (a.jac.clone(), b.jac.clone()) {
            out.jac = Some(Arc::new(move |x: &State, t| wa * ja(x, t) + wb * jb(x, t)));
        }
        out.period = match (a.period, b.period) {
            (None, p) | (p, None) => p,
            (Some(p), Some(q)) => Some(if p >= q { p } else { q }),
        };
        Ok(out)
    }

    /// Spatial Jacobian `dX/dx`, analytic when provided, otherwise central
    /// finite differences with relative step [`FD_REL_STEP`].
    pub fn jacobian(&self, x: &State, t: f64) -> Result<DMatrix<f64>> {
        if let Some(jac) = &self.jac {
            let m = jac(x, t);
            if m.iter().any(|c| !c.is_finite()) {
                return Err(Error::Evaluation {
                    what: format!("jacobian of field {}", self.label),
                    t,
                    reason: "non-finite value".into(),
                });
            }
            return Ok(m);
        }
        let n = self.dim;
        let mut m = DMatrix::zeros(n, n);
        let mut xp = x.clone();
        let mut xm = x.clone();
        for j in 0..n {
            let step = FD_REL_STEP * (1.0 + x[j].abs());
            xp[j] = x[j] + step;
            xm[j] = x[j] - step;
            let fp = self.eval(&xp, t)?;
            let fm = self.eval(&xm, t)?;
            for i in 0..n {
                m[(i, j)] = (fp[i] - fm[i]) / (2.0 * step);
            }
            xp[j] = x[j];
            xm[j] = x[j];
        }
        Ok(m)
    }
}

/// A switching surface `h_i = 0` with its gradient.
#[derive(Clone)]
pub struct SwitchingFunction {
    pub index: usize,
    pub label: String,
    h: Arc<ScalarFn>,
    grad: Option<Arc<GradFn>>,
}

impl fmt::Debug for SwitchingFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SwitchingFunction({}, index {})", self.label, self.index)
    }
}

impl SwitchingFunction {
    pub fn new<H>(index: usize, label: impl Into<String>, h: H) -> Self
    where
        H: Fn(&State) -> f64 + Send + Sync + 'static,
    {
        SwitchingFunction {
            index,
            label: label.into(),
            h: Arc::new(h),
            grad: None,
        }
    }

    pub fn with_gradient<G>(mut self, grad: G) -> Self
    where
        G: Fn(&State) -> State + Send + Sync + 'static,
    {
        self.grad = Some(Arc::new(grad));
        self
    }

    pub fn eval(&self, x: &State) -> Result<f64> {
        let v = (self.h)(x);
        if !v.is_finite() {
            return Err(Error::Evaluation {
                what: format!("surface {}", self.label),
                t: f64::NAN,
                reason: "non-finite value".into(),
            });
        }
        Ok(v)
    }

    pub fn gradient(&self, x: &State) -> Result<State> {
        if let Some(grad) = &self.grad {
            let g = grad(x);
            if g.iter().any(|c| !c.is_finite()) {
                return Err(Error::Evaluation {
                    what: format!("gradient of surface {}", self.label),
                    t: f64::NAN,
                    reason: "non-finite value".into(),
                });
            }
            return Ok(g);
        }
        let n = x.len();
        let mut g = DVector::zeros(n);
        let mut xp = x.clone();
        let mut xm = x.clone();
        for j in 0..n {
            let step = FD_REL_STEP * (1.0 + x[j].abs());
            xp[j] = x[j] + step;
            xm[j] = x[j] - step;
            g[j] = (self.eval(&xp)? - self.eval(&xm)?) / (2.0 * step);
            xp[j] = x[j];
            xm[j] = x[j];
        }
        Ok(g)
    }
}

/// Sign-vector to component lookup. Signs are `-1` or `+1` per surface, in
/// surface order.
#[derive(Debug, Clone)]
pub struct RegionTable {
    entries: Vec<(Vec<i8>, usize)>,
}

impl RegionTable {
    pub fn new(entries: Vec<(Vec<i8>, usize)>) -> Self {
        RegionTable { entries }
    }

    pub fn component(&self, signs: &[i8]) -> Result<usize> {
        self.entries
            .iter()
            .find(|(s, _)| s.as_slice() == signs)
            .map(|(_, c)| *c)
            .ok_or_else(|| Error::UnassignedRegion {
                signs: signs.to_vec(),
            })
    }

    pub fn entries(&self) -> &[(Vec<i8>, usize)] {
        &self.entries
    }
}

/// A piecewise smooth system: component fields on regions cut out by the
/// switching surfaces, glued by the region table.
#[derive(Debug, Clone)]
pub struct PiecewiseSystem {
    pub dim: usize,
    pub components: Vec<SmoothField>,
    pub surfaces: Vec<SwitchingFunction>,
    pub assignment: RegionTable,
}

impl PiecewiseSystem {
    pub fn new(
        components: Vec<SmoothField>,
        surfaces: Vec<SwitchingFunction>,
        assignment: RegionTable,
    ) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Invalid("system needs at least one component".into()));
        }
        let dim = components[0].dim;
        if components.iter().any(|c| c.dim != dim) {
            return Err(Error::Invalid("component dimensions disagree".into()));
        }
        for (signs, comp) in assignment.entries() {
            if signs.len() != surfaces.len() {
                return Err(Error::Invalid(format!(
                    "sign vector {:?} does not match surface count {}",
                    signs,
                    surfaces.len()
                )));
            }
            if *comp >= components.len() {
                return Err(Error::Invalid(format!(
                    "region table references component {} of {}",
                    comp,
                    components.len()
                )));
            }
            if signs.iter().any(|s| *s != -1 && *s != 1) {
                return Err(Error::Invalid(format!("sign vector {:?} has entries outside {{-1, 1}}", signs)));
            }
        }
        Ok(PiecewiseSystem {
            dim,
            components,
            surfaces,
            assignment,
        })
    }

    /// Smooth single-component system (no switching).
    pub fn smooth(field: SmoothField) -> Self {
        PiecewiseSystem {
            dim: field.dim,
            components: vec![field],
            surfaces: Vec::new(),
            assignment: RegionTable::new(vec![(vec![], 0)]),
        }
    }

    /// Component index governing `x`, valid away from every surface.
    pub fn region_of(&self, x: &State) -> Result<usize> {
        let mut signs = Vec::with_capacity(self.surfaces.len());
        for s in &self.surfaces {
            let v = s.eval(x)?;
            if v == 0.0 {
                return Err(Error::Invalid(format!(
                    "region query on switching surface {}",
                    s.index
                )));
            }
            signs.push(if v > 0.0 { 1 } else { -1 });
        }
        self.assignment.component(&signs)
    }

    /// The two components adjacent to surface `i` at `x`, as
    /// `(minus side, plus side)` of `h_i`.
    pub fn adjacent(&self, x: &State, surface: usize) -> Result<(usize, usize)> {
        let mut signs = Vec::with_capacity(self.surfaces.len());
        for s in &self.surfaces {
            if s.index == surface {
                signs.push(0);
            } else {
                let v = s.eval(x)?;
                signs.push(if v > 0.0 { 1 } else { -1 });
            }
        }
        let pos = self
            .surfaces
            .iter()
            .position(|s| s.index == surface)
            .ok_or_else(|| Error::Invalid(format!("no surface with index {}", surface)))?;
        let mut minus = signs.clone();
        minus[pos] = -1;
        let mut plus = signs;
        plus[pos] = 1;
        Ok((
            self.assignment.component(&minus)?,
            self.assignment.component(&plus)?,
        ))
    }
}

/// Pointwise classification relative to the switching set.
#[derive(Debug, Clone, PartialEq)]
pub enum PointClass {
    /// Off every surface, governed by one component.
    Interior { component: usize },
    /// Certified crossing point: the orbit passes from `pre` to `post`
    /// through surface `surface`; `sign` is the common sign of the Lie
    /// derivatives of `h` (`+1` means `h` increases through the crossing).
    Crossing {
        surface: usize,
        pre: usize,
        post: usize,
        sign: f64,
    },
    /// Crossing conditions fail on a regular surface: genuine tangency on a
    /// side, or opposite-sign Lie derivatives (no crossing orbit exists).
    Tangency { surface: usize },
    /// Gradient of the active surface below the regularity threshold.
    NonRegular { surface: usize },
    /// Two or more surfaces active within tolerance.
    Corner { surfaces: Vec<usize> },
}

/// Lie derivative `X h (x) = <X(x, t), grad h(x)>`.
pub fn lie_derivative(
    field: &SmoothField,
    surface: &SwitchingFunction,
    x: &State,
    t: f64,
) -> Result<f64> {
    let v = field.eval(x, t)?;
    let g = surface.gradient(x)?;
    Ok(v.dot(&g))
}

/// Classify `x` at time `t`. Exactly one class is returned; a near-tangency
/// is reported as `Tangency`, never silently as `Crossing`.
pub fn classify_point(
    system: &PiecewiseSystem,
    x: &State,
    t: f64,
    tol: &Tolerances,
) -> Result<PointClass> {
    let scale = tol.surface * (1.0 + x.norm());
    let mut values = Vec::with_capacity(system.surfaces.len());
    let mut active = Vec::new();
    for s in &system.surfaces {
        let v = s.eval(x)?;
        if v.abs() <= scale {
            active.push(s.index);
        }
        values.push(v);
    }
    if active.len() >= 2 {
        return Ok(PointClass::Corner { surfaces: active });
    }
    if active.is_empty() {
        let signs: Vec<i8> = values.iter().map(|v| if *v > 0.0 { 1 } else { -1 }).collect();
        let component = system.assignment.component(&signs)?;
        return Ok(PointClass::Interior { component });
    }
    let surface = active[0];
    let sf = &system.surfaces[system
        .surfaces
        .iter()
        .position(|s| s.index == surface)
        .expect("active surface present")];
    let grad = sf.gradient(x)?;
    let grad_norm = grad.norm();
    if grad_norm < tol.gradient {
        return Ok(PointClass::NonRegular { surface });
    }
    let (comp_minus, comp_plus) = system.adjacent(x, surface)?;
    let f_minus = system.components[comp_minus].eval(x, t)?;
    let f_plus = system.components[comp_plus].eval(x, t)?;
    let l_minus = f_minus.dot(&grad);
    let l_plus = f_plus.dot(&grad);
    let thr_minus = tol.tangency_rel * f_minus.norm() * grad_norm;
    let thr_plus = tol.tangency_rel * f_plus.norm() * grad_norm;
    if l_minus.abs() < thr_minus || l_plus.abs() < thr_plus || l_minus * l_plus <= 0.0 {
        return Ok(PointClass::Tangency { surface });
    }
    if l_minus > 0.0 {
        Ok(PointClass::Crossing {
            surface,
            pre: comp_minus,
            post: comp_plus,
            sign: 1.0,
        })
    } else {
        Ok(PointClass::Crossing {
            surface,
            pre: comp_plus,
            post: comp_minus,
            sign: -1.0,
        })
    }
}

/// Multivariate polynomial, stored as `(coefficient, exponents)` terms.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    pub dim: usize,
    pub terms: Vec<(f64, Vec<u32>)>,
}

impl Poly {
    pub fn new(dim: usize, terms: Vec<(f64, Vec<u32>)>) -> Result<Self> {
        if terms.iter().any(|(_, e)| e.len() != dim) {
            return Err(Error::Invalid("polynomial exponent arity mismatch".into()));
        }
        Ok(Poly { dim, terms })
    }

    /// The coordinate monomial `x_j` in `dim` variables.
    pub fn var(dim: usize, j: usize) -> Poly {
        let mut e = vec![0u32; dim];
        e[j] = 1;
        Poly { dim, terms: vec![(1.0, e)] }
    }

    pub fn eval(&self, x: &State) -> f64 {
        let mut acc = 0.0;
        for (c, exps) in &self.terms {
            let mut m = *c;
            for (xi, e) in x.iter().zip(exps) {
                m *= xi.powi(*e as i32);
            }
            acc += m;
        }
        acc
    }

    /// Partial derivative with respect to variable `j`.
    pub fn partial(&self, j: usize) -> Poly {
        let terms = self
            .terms
            .iter()
            .filter(|(_, e)| e[j] > 0)
            .map(|(c, e)| {
                let mut e2 = e.clone();
                e2[j] -= 1;
                (c * e[j] as f64, e2)
            })
            .collect();
        Poly {
            dim: self.dim,
            terms,
        }
    }
}

/// Autonomous polynomial field with analytic Jacobian.
pub fn polynomial_field(label: impl Into<String>, components: Vec<Poly>) -> Result<SmoothField> {
    if components.is_empty() {
        return Err(Error::Invalid("polynomial field needs components".into()));
    }
    let dim = components[0].dim;
    if components.iter().any(|p| p.dim != dim || p.dim != components.len()) {
        return Err(Error::Invalid(
            "polynomial field must be square: one polynomial in dim variables per coordinate".into(),
        ));
    }
    let partials: Vec<Vec<Poly>> = components
        .iter()
        .map(|p| (0..dim).map(|j| p.partial(j)).collect())
        .collect();
    let comps = components.clone();
    let field = SmoothField::new(dim, label, move |x: &State, _t| {
        State::from_iterator(comps.len(), comps.iter().map(|p| p.eval(x)))
    })
    .with_jacobian(move |x: &State, _t| {
        DMatrix::from_fn(dim, dim, |i, j| partials[i][j].eval(x))
    });
    Ok(field)
}

/// Polynomial switching surface with analytic gradient.
pub fn polynomial_surface(index: usize, label: impl Into<String>, h: Poly) -> SwitchingFunction {
    let dim = h.dim;
    let grads: Vec<Poly> = (0..dim).map(|j| h.partial(j)).collect();
    let hp = h.clone();
    SwitchingFunction::new(index, label, move |x: &State| hp.eval(x)).with_gradient(
        move |x: &State| State::from_iterator(dim, grads.iter().map(|g| g.eval(x))),
    )
}

/// Constant field, e.g. the two components of the worked closed-form system.
pub fn constant_field(label: impl Into<String>, v: Vec<f64>) -> SmoothField {
    let dim = v.len();
    let vv = State::from_vec(v);
    let vj = DMatrix::zeros(dim, dim);
    SmoothField::new(dim, label, move |_x: &State, _t| vv.clone())
        .with_jacobian(move |_x: &State, _t| vj.clone())
}

/// Linear field `x -> A x` with analytic Jacobian.
pub fn linear_field(label: impl Into<String>, a: DMatrix<f64>) -> SmoothField {
    let dim = a.nrows();
    let aj = a.clone();
    SmoothField::new(dim, label, move |x: &State, _t| &a * x)
        .with_jacobian(move |_x: &State, _t| aj.clone())
}

/// The worked planar example: `(0, 1)` above the horizontal axis, `(1, 1)`
/// below, switching surface `h(x, y) = y`. Component 0 is the lower field.
pub fn example1() -> PiecewiseSystem {
    let lower = constant_field("lower", vec![1.0, 1.0]);
    let upper = constant_field("upper", vec![0.0, 1.0]);
    let h = SwitchingFunction::new(0, "y", |x: &State| x[1])
        .with_gradient(|x: &State| State::from_vec(vec![0.0 * x[0], 1.0]));
    PiecewiseSystem::new(
        vec![lower, upper],
        vec![h],
        RegionTable::new(vec![(vec![-1], 0), (vec![1], 1)]),
    )
    .expect("example1 is well formed")
}

/// Closed-form global flow of [`example1`], all four branches.
pub fn example1_flow(t: f64, x: f64, y: f64) -> (f64, f64) {
    if y <= 0.0 {
        if t <= -y {
            (t + x, t + y)
        } else {
            (x - y, t + y)
        }
    } else if t >= -y {
        (x, t + y)
    } else {
        (t + x + y, t + y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v2(x: f64, y: f64) -> State {
        State::from_vec(vec![x, y])
    }

    #[test]
    fn lie_derivative_matches_hand_values() {
        let sys = example1();
        let h = &sys.surfaces[0];
        let upper = &sys.components[1];
        let lower = &sys.components[0];
        assert_eq!(lie_derivative(upper, h, &v2(0.0, 0.0), 0.0).unwrap(), 1.0);
        assert_eq!(lie_derivative(lower, h, &v2(0.3, 0.0), 0.0).unwrap(), 1.0);

        // Field orthogonal to the gradient.
        let tangent = constant_field("tangent", vec![1.0, 0.0]);
        assert_eq!(lie_derivative(&tangent, h, &v2(0.2, 0.0), 0.0).unwrap(), 0.0);

        // X = (1, x), h = y: Xh = x, zero at the origin.
        let shear = SmoothField::new(2, "shear", |x: &State, _| v2(1.0, x[0]));
        assert_eq!(lie_derivative(&shear, h, &v2(0.0, 0.0), 0.0).unwrap(), 0.0);
        assert!((lie_derivative(&shear, h, &v2(0.7, 0.0), 0.0).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn lie_derivative_is_linear_in_the_field() {
        let sys = example1();
        let h = &sys.surfaces[0];
        let f = SmoothField::new(2, "f", |x: &State, _| v2(x[0] + 1.0, x[1] - 2.0));
        let g = SmoothField::new(2, "g", |x: &State, _| v2(x[1], x[0] * x[0]));
        let combo = SmoothField::new(2, "2f+3g", |x: &State, _| {
            let fv = v2(x[0] + 1.0, x[1] - 2.0);
            let gv = v2(x[1], x[0] * x[0]);
            fv * 2.0 + gv * 3.0
        });
        for p in [v2(0.1, 0.0), v2(-0.4, 0.0), v2(2.0, 0.0)] {
            let lf = lie_derivative(&f, h, &p, 0.0).unwrap();
            let lg = lie_derivative(&g, h, &p, 0.0).unwrap();
            let lc = lie_derivative(&combo, h, &p, 0.0).unwrap();
            assert!((lc - (2.0 * lf + 3.0 * lg)).abs() < 1e-12);
        }
    }

    #[test]
    fn classify_example1_points() {
        let sys = example1();
        let tol = Tolerances::default();
        match classify_point(&sys, &v2(0.3, 0.0), 0.0, &tol).unwrap() {
            PointClass::Crossing {
                surface,
                pre,
                post,
                sign,
            } => {
                assert_eq!(surface, 0);
                assert_eq!(pre, 0, "pre-field is the lower component");
                assert_eq!(post, 1, "post-field is the upper component");
                assert_eq!(sign, 1.0);
            }
            other => panic!("expected crossing, got {:?}", other),
        }
        assert_eq!(
            classify_point(&sys, &v2(0.3, 0.5), 0.0, &tol).unwrap(),
            PointClass::Interior { component: 1 }
        );
        assert_eq!(
            classify_point(&sys, &v2(0.3, -0.5), 0.0, &tol).unwrap(),
            PointClass::Interior { component: 0 }
        );
    }

    #[test]
    fn opposite_lie_signs_are_not_a_crossing() {
        // Fields pushing toward the surface from both sides.
        let toward_up = constant_field("up", vec![0.0, 1.0]);
        let toward_down = constant_field("down", vec![0.0, -1.0]);
        let h = SwitchingFunction::new(0, "y", |x: &State| x[1]);
        let sys = PiecewiseSystem::new(
            vec![toward_up, toward_down],
            vec![h],
            RegionTable::new(vec![(vec![-1], 0), (vec![1], 1)]),
        )
        .unwrap();
        assert_eq!(
            classify_point(&sys, &v2(0.3, 0.0), 0.0, &Tolerances::default()).unwrap(),
            PointClass::Tangency { surface: 0 }
        );
    }

    #[test]
    fn tangency_below_threshold_is_reported() {
        // Upper field nearly tangent to the surface.
        let lower = constant_field("lower", vec![1.0, 1.0]);
        let upper = constant_field("upper", vec![1.0, 1e-9]);
        let h = SwitchingFunction::new(0, "y", |x: &State| x[1]);
        let sys = PiecewiseSystem::new(
            vec![lower, upper],
            vec![h],
            RegionTable::new(vec![(vec![-1], 0), (vec![1], 1)]),
        )
        .unwrap();
        assert_eq!(
            classify_point(&sys, &v2(0.0, 0.0), 0.0, &Tolerances::default()).unwrap(),
            PointClass::Tangency { surface: 0 }
        );
    }

    #[test]
    fn degenerate_gradient_is_non_regular() {
        let lower = constant_field("lower", vec![1.0, 1.0]);
        let upper = constant_field("upper", vec![0.0, 1.0]);
        // h = y^2 has vanishing gradient on its zero set.
        let h = SwitchingFunction::new(0, "y^2", |x: &State| x[1] * x[1])
            .with_gradient(|x: &State| State::from_vec(vec![0.0, 2.0 * x[1]]));
        let sys = PiecewiseSystem::new(
            vec![lower, upper],
            vec![h],
            RegionTable::new(vec![(vec![-1], 0), (vec![1], 1)]),
        )
        .unwrap();
        assert_eq!(
            classify_point(&sys, &v2(0.3, 0.0), 0.0, &Tolerances::default()).unwrap(),
            PointClass::NonRegular { surface: 0 }
        );
    }

    #[test]
    fn corner_when_two_surfaces_active() {
        let f = constant_field("f", vec![1.0, 1.0]);
        let h0 = SwitchingFunction::new(0, "y", |x: &State| x[1]);
        let h1 = SwitchingFunction::new(1, "x", |x: &State| x[0]);
        let sys = PiecewiseSystem::new(
            vec![f],
            vec![h0, h1],
            RegionTable::new(vec![
                (vec![-1, -1], 0),
                (vec![-1, 1], 0),
                (vec![1, -1], 0),
                (vec![1, 1], 0),
            ]),
        )
        .unwrap();
        assert_eq!(
            classify_point(&sys, &v2(0.0, 0.0), 0.0, &Tolerances::default()).unwrap(),
            PointClass::Corner {
                surfaces: vec![0, 1]
            }
        );
    }

    #[test]
    fn flipping_surface_sign_mirrors_the_classification() {
        let sys = example1();
        let flipped = {
            let lower = constant_field("lower", vec![1.0, 1.0]);
            let upper = constant_field("upper", vec![0.0, 1.0]);
            let h = SwitchingFunction::new(0, "-y", |x: &State| -x[1])
                .with_gradient(|_x: &State| State::from_vec(vec![0.0, -1.0]));
            PiecewiseSystem::new(
                vec![lower, upper],
                vec![h],
                RegionTable::new(vec![(vec![1], 0), (vec![-1], 1)]),
            )
            .unwrap()
        };
        let tol = Tolerances::default();
        for p in [v2(0.3, 0.0), v2(-1.2, 0.0), v2(0.0, 0.4), v2(0.0, -0.4)] {
            let a = classify_point(&sys, &p, 0.0, &tol).unwrap();
            let b = classify_point(&flipped, &p, 0.0, &tol).unwrap();
            match (a, b) {
                (
                    PointClass::Crossing {
                        pre: a1,
                        post: b1,
                        sign: s1,
                        ..
                    },
                    PointClass::Crossing {
                        pre: a2,
                        post: b2,
                        sign: s2,
                        ..
                    },
                ) => {
                    assert_eq!(a1, a2);
                    assert_eq!(b1, b2);
                    assert_eq!(s1, -s2);
                }
                (PointClass::Interior { component: c1 }, PointClass::Interior { component: c2 }) => {
                    assert_eq!(c1, c2)
                }
                (a, b) => panic!("classes diverged: {:?} vs {:?}", a, b),
            }
        }
    }

    #[test]
    fn interior_classification_is_open() {
        let sys = example1();
        let tol = Tolerances::default();
        let p = v2(0.3, 0.5);
        let base = classify_point(&sys, &p, 0.0, &tol).unwrap();
        for k in 0..20 {
            let eps = 1e-12 * (k as f64 + 1.0);
            for dir in [v2(eps, 0.0), v2(-eps, 0.0), v2(0.0, eps), v2(0.0, -eps)] {
                let q = &p + &dir;
                assert_eq!(classify_point(&sys, &q, 0.0, &tol).unwrap(), base);
            }
        }
    }

    #[test]
    fn polynomial_field_jacobian_is_exact() {
        // Duffing-type right side (y, x - x^3).
        let f = polynomial_field(
            "duffing",
            vec![
                Poly::new(2, vec![(1.0, vec![0, 1])]).unwrap(),
                Poly::new(2, vec![(1.0, vec![1, 0]), (-1.0, vec![3, 0])]).unwrap(),
            ],
        )
        .unwrap();
        let x = v2(0.7, -0.3);
        let j = f.jacobian(&x, 0.0).unwrap();
        assert!((j[(0, 0)] - 0.0).abs() < 1e-15);
        assert!((j[(0, 1)] - 1.0).abs() < 1e-15);
        assert!((j[(1, 0)] - (1.0 - 3.0 * 0.49)).abs() < 1e-12);
        assert!((j[(1, 1)] - 0.0).abs() < 1e-15);
    }

    #[test]
    fn finite_difference_gradient_matches_analytic() {
        let with = SwitchingFunction::new(0, "h", |x: &State| x[0] * x[0] - x[1])
            .with_gradient(|x: &State| State::from_vec(vec![2.0 * x[0], -1.0]));
        let without = SwitchingFunction::new(0, "h", |x: &State| x[0] * x[0] - x[1]);
        let p = v2(1.3, -0.2);
        let ga = with.gradient(&p).unwrap();
        let gf = without.gradient(&p).unwrap();
        assert!((ga - gf).norm() < 1e-8);
    }

    #[test]
    fn example1_flow_branches() {
        // One point per branch of the closed form.
        assert_eq!(example1_flow(0.3, 0.0, -0.5), (0.3, -0.2));
        assert_eq!(example1_flow(1.0, 0.0, -0.5), (0.5, 0.5));
        assert_eq!(example1_flow(1.0, 0.0, 0.5), (0.0, 1.5));
        assert_eq!(example1_flow(-1.0, 0.0, 0.5), (-0.5, -0.5));
    }
}
