//! Parametrized immersions, quadrature meshes, integration and deformations.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::ambient::AmbientSpace;
use crate::error::{GeometryError, Result};
use crate::jet::{Jet2, Real, MAX_VARS};
use crate::quadrature::{gauss_legendre, pairwise_sum, periodic_trapezoid};

/// Relative threshold on the smallest singular value of the orthonormalized
/// Jacobian below which an immersion counts as degenerate.
pub const RANK_THRESHOLD: f64 = 1e-9;

/// Axis-aligned parameter box with per-axis periodicity.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub periodic: Vec<bool>,
}

impl ParamDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, periodic: Vec<bool>) -> Self {
        assert!(lower.len() == upper.len() && upper.len() == periodic.len());
        ParamDomain {
            lower,
            upper,
            periodic,
        }
    }

    /// `[0, 2π)^n`, all axes periodic.
    pub fn torus(n: usize) -> Self {
        ParamDomain::new(vec![0.0; n], vec![2.0 * PI; n], vec![true; n])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// True when every axis is periodic (the patch is a closed torus).
    pub fn is_fully_periodic(&self) -> bool {
        self.periodic.iter().all(|&p| p)
    }

    /// Wraps periodic coordinates into the box; errors on non-periodic axes
    /// outside `[lower, upper]`.
    pub fn wrap(&self, u: &[f64]) -> Result<Vec<f64>> {
        let mut out = u.to_vec();
        for a in 0..self.dim() {
            let (lo, hi) = (self.lower[a], self.upper[a]);
            if self.periodic[a] {
                out[a] = lo + (u[a] - lo).rem_euclid(hi - lo);
            } else if u[a] < lo - 1e-12 || u[a] > hi + 1e-12 {
                return Err(GeometryError::Domain {
                    point: u.to_vec(),
                    reason: format!("parameter axis {a} outside [{lo}, {hi}]"),
                });
            }
        }
        Ok(out)
    }
}

/// A smooth map from parameters to chart coordinates with 2-jet evaluation.
pub trait Parametrization: Send + Sync {
    fn param_dim(&self) -> usize;
    fn chart_dim(&self) -> usize;
    /// Chart components as 2-jets in the parameters.
    fn jet(&self, u: &[f64]) -> Result<Vec<Jet2>>;
}

/// A map written once against [`Real`], giving exact 2-jets.
pub trait AnalyticMap: Send + Sync {
    fn param_dim(&self) -> usize;
    fn chart_dim(&self) -> usize;
    fn eval<T: Real>(&self, u: &[T]) -> Vec<T>;
}

/// Adapter exposing an [`AnalyticMap`] as a [`Parametrization`].
pub struct Analytic<M>(pub M);

impl<M: AnalyticMap> Parametrization for Analytic<M> {
    fn param_dim(&self) -> usize {
        self.0.param_dim()
    }
    fn chart_dim(&self) -> usize {
        self.0.chart_dim()
    }
    fn jet(&self, u: &[f64]) -> Result<Vec<Jet2>> {
        Ok(self.0.eval(&Jet2::seed(u)))
    }
}

/// User-supplied map whose jets come from central differences.
pub struct FiniteDifferenceMap<F> {
    map: F,
    param_dim: usize,
    chart_dim: usize,
    step: f64,
}

impl<F> FiniteDifferenceMap<F>
where
    F: Fn(&[f64]) -> Vec<f64> + Send + Sync,
{
    pub fn new(map: F, param_dim: usize, chart_dim: usize) -> Self {
        FiniteDifferenceMap {
            map,
            param_dim,
            chart_dim,
            step: 1e-4,
        }
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }
}

impl<F> Parametrization for FiniteDifferenceMap<F>
where
    F: Fn(&[f64]) -> Vec<f64> + Send + Sync,
{
    fn param_dim(&self) -> usize {
        self.param_dim
    }
    fn chart_dim(&self) -> usize {
        self.chart_dim
    }
    fn jet(&self, u: &[f64]) -> Result<Vec<Jet2>> {
        let n = self.param_dim;
        if n > MAX_VARS {
            return Err(GeometryError::Unsupported(format!("{n} parameters exceed {MAX_VARS}")));
        }
        let h = self.step;
        let f = |v: &[f64]| (self.map)(v);
        let f0 = f(u);
        let mut out: Vec<Jet2> = f0.iter().map(|&v| Jet2::constant(v)).collect();
        let shifted = |da: &[(usize, f64)]| {
            let mut v = u.to_vec();
            for &(a, s) in da {
                v[a] += s;
            }
            f(&v)
        };
        for a in 0..n {
            let p = shifted(&[(a, h)]);
            let m = shifted(&[(a, -h)]);
            for k in 0..self.chart_dim {
                out[k].g[a] = (p[k] - m[k]) / (2.0 * h);
                out[k].h[a][a] = (p[k] - 2.0 * f0[k] + m[k]) / (h * h);
            }
            for b in (a + 1)..n {
                let pp = shifted(&[(a, h), (b, h)]);
                let pm = shifted(&[(a, h), (b, -h)]);
                let mp = shifted(&[(a, -h), (b, h)]);
                let mm = shifted(&[(a, -h), (b, -h)]);
                for k in 0..self.chart_dim {
                    let d = (pp[k] - pm[k] - mp[k] + mm[k]) / (4.0 * h * h);
                    out[k].h[a][b] = d;
                    out[k].h[b][a] = d;
                }
            }
        }
        Ok(out)
    }
}

/// Value, first and second parameter derivatives of `f` at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointJet {
    pub value: DVector<f64>,
    pub first: Vec<DVector<f64>>,
    pub second: Vec<Vec<DVector<f64>>>,
}

impl PointJet {
    pub fn from_jets(jets: &[Jet2], n: usize) -> Self {
        let nn = jets.len();
        PointJet {
            value: DVector::from_fn(nn, |k, _| jets[k].v),
            first: (0..n).map(|a| DVector::from_fn(nn, |k, _| jets[k].g[a])).collect(),
            second: (0..n)
                .map(|a| (0..n).map(|b| DVector::from_fn(nn, |k, _| jets[k].h[a][b])).collect())
                .collect(),
        }
    }

    pub fn param_dim(&self) -> usize {
        self.first.len()
    }
}

/// A parametrized immersion of an `n`-dimensional box into an ambient chart.
#[derive(Clone)]
pub struct ImmersionPatch {
    name: String,
    ambient: AmbientSpace,
    domain: ParamDomain,
    map: Arc<dyn Parametrization>,
    scale: f64,
    complex: bool,
    closed: bool,
}

impl fmt::Debug for ImmersionPatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ImmersionPatch")
            .field("name", &self.name)
            .field("ambient", &self.ambient)
            .field("domain", &self.domain)
            .field("scale", &self.scale)
            .field("complex", &self.complex)
            .field("closed", &self.closed)
            .finish()
    }
}

impl ImmersionPatch {
    pub fn new(
        name: impl Into<String>,
        ambient: AmbientSpace,
        domain: ParamDomain,
        map: Arc<dyn Parametrization>,
    ) -> Result<Self> {
        if map.param_dim() != domain.dim() {
            return Err(GeometryError::Precondition(format!(
                "map has {} parameters but domain has {}",
                map.param_dim(),
                domain.dim()
            )));
        }
        if map.chart_dim() != ambient.dim() {
            return Err(GeometryError::Precondition(format!(
                "map lands in R^{} but ambient chart is {}-dimensional",
                map.chart_dim(),
                ambient.dim()
            )));
        }
        if map.param_dim() > MAX_VARS || map.param_dim() == 0 {
            return Err(GeometryError::Unsupported(format!(
                "intrinsic dimension {} outside 1..={MAX_VARS}",
                map.param_dim()
            )));
        }
        Ok(ImmersionPatch {
            name: name.into(),
            ambient,
            domain,
            map,
            scale: 1.0,
            complex: false,
            closed: false,
        })
    }

    /// Characteristic length used to size finite-difference steps.
    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    /// Marks the patch as a complex submanifold of a Fubini–Study ambient.
    pub fn with_complex(mut self, complex: bool) -> Self {
        self.complex = complex;
        self
    }

    /// Marks a non-periodic box whose boundary collapses (poles of
    /// latitude–longitude charts), so the patch has no boundary.
    pub fn with_closed(mut self, closed: bool) -> Self {
        self.closed = closed;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn ambient(&self) -> &AmbientSpace {
        &self.ambient
    }
    pub fn domain(&self) -> &ParamDomain {
        &self.domain
    }
    pub fn map(&self) -> &Arc<dyn Parametrization> {
        &self.map
    }
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }
    pub fn codim(&self) -> usize {
        self.ambient.dim() - self.dim()
    }
    pub fn scale(&self) -> f64 {
        self.scale
    }
    pub fn is_complex(&self) -> bool {
        self.complex
    }
    pub fn is_closed(&self) -> bool {
        self.closed || self.domain.is_fully_periodic()
    }

    /// Raw component jets after periodic wrapping.
    pub fn component_jets(&self, u: &[f64]) -> Result<Vec<Jet2>> {
        let u = self.domain.wrap(u)?;
        self.map.jet(&u)
    }

    /// Chart value with first and second derivatives at `u`.
    pub fn jet_at(&self, u: &[f64]) -> Result<PointJet> {
        let jets = self.component_jets(u)?;
        let jet = PointJet::from_jets(&jets, self.dim());
        let g = self.ambient.metric_at(jet.value.as_slice())?;
        let induced = induced_metric(&g, &jet.first);
        check_rank(&induced, u)?;
        Ok(jet)
    }

    /// Induced metric `⟨∂_a f, ∂_b f⟩` at `u`.
    pub fn induced_metric_at(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        let jet = self.jet_at(u)?;
        let g = self.ambient.metric_at(jet.value.as_slice())?;
        Ok(induced_metric(&g, &jet.first))
    }
}

pub(crate) fn induced_metric(g: &DMatrix<f64>, first: &[DVector<f64>]) -> DMatrix<f64> {
    let n = first.len();
    let gf: Vec<DVector<f64>> = first.iter().map(|v| g * v).collect();
    DMatrix::from_fn(n, n, |a, b| gf[b].dot(&first[a]))
}

fn check_rank(induced: &DMatrix<f64>, u: &[f64]) -> Result<()> {
    let eig = induced.clone().symmetric_eigen();
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(max > 0.0) || !(min.max(0.0).sqrt() > RANK_THRESHOLD * max.sqrt()) {
        return Err(GeometryError::ImmersionDegenerate {
            u: u.to_vec(),
            reason: format!("induced metric eigenvalues in [{min:e}, {max:e}]"),
        });
    }
    Ok(())
}

/// A quadrature node on the submanifold.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshNode {
    pub index: usize,
    pub u: Vec<f64>,
    /// Parameter-space quadrature weight.
    pub weight: f64,
    /// Induced volume element `√det(g_ab)`.
    pub dv: f64,
}

/// Tensor-product quadrature over a patch's parameter box.
#[derive(Debug, Clone, PartialEq)]
pub struct SubmanifoldMesh {
    pub resolution: Vec<usize>,
    pub nodes: Vec<MeshNode>,
}

impl SubmanifoldMesh {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Volume of the submanifold, `Σ weight·dV`.
    pub fn volume(&self) -> f64 {
        let terms: Vec<f64> = self.nodes.iter().map(|n| n.weight * n.dv).collect();
        pairwise_sum(&terms)
    }
}

/// Builds the tensor-product mesh: periodic trapezoid on periodic axes and
/// Gauss–Legendre on the others.
pub fn build_mesh(patch: &ImmersionPatch, resolution: &[usize]) -> Result<SubmanifoldMesh> {
    let n = patch.dim();
    let res: Vec<usize> = if resolution.len() == 1 {
        vec![resolution[0]; n]
    } else {
        resolution.to_vec()
    };
    if res.len() != n {
        return Err(GeometryError::Precondition(format!(
            "resolution has {} axes, patch has {n}",
            res.len()
        )));
    }
    if let Some(r) = res.iter().find(|&&r| r < 4) {
        return Err(GeometryError::Precondition(format!("resolution {r} below minimum 4")));
    }
    let dom = patch.domain();
    let axes: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
        .map(|a| {
            if dom.periodic[a] {
                periodic_trapezoid(res[a], dom.lower[a], dom.upper[a])
            } else {
                gauss_legendre(res[a], dom.lower[a], dom.upper[a])
            }
        })
        .collect();
    let total: usize = res.iter().product();
    let stubs: Vec<(Vec<f64>, f64)> = (0..total)
        .map(|flat| {
            let mut rem = flat;
            let mut u = vec![0.0; n];
            let mut w = 1.0;
            for a in (0..n).rev() {
                let k = rem % res[a];
                rem /= res[a];
                u[a] = axes[a].0[k];
                w *= axes[a].1[k];
            }
            (u, w)
        })
        .collect();
    let nodes = stubs
        .into_par_iter()
        .enumerate()
        .map(|(index, (u, weight))| {
            let g = patch.induced_metric_at(&u)?;
            let det = g.determinant();
            if !(det > 0.0) {
                return Err(GeometryError::ImmersionDegenerate {
                    u,
                    reason: format!("induced metric determinant {det:e}"),
                });
            }
            Ok(MeshNode {
                index,
                u,
                weight,
                dv: det.sqrt(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SubmanifoldMesh {
        resolution: res,
        nodes,
    })
}

/// `Σ weight·dV·field` with pairwise summation in node order.
pub fn integrate(mesh: &SubmanifoldMesh, field: &[f64]) -> Result<f64> {
    if field.len() != mesh.len() {
        return Err(GeometryError::Precondition(format!(
            "field has {} values for {} nodes",
            field.len(),
            mesh.len()
        )));
    }
    let mut terms = Vec::with_capacity(field.len());
    for (node, &v) in mesh.nodes.iter().zip(field) {
        if !v.is_finite() {
            return Err(GeometryError::NonFinite {
                node: node.index,
                value: v,
            });
        }
        terms.push(node.weight * node.dv * v);
    }
    Ok(pairwise_sum(&terms))
}

/// Evaluates `f` at every node in parallel, returning values in node order.
pub fn evaluate_nodes<T, F>(mesh: &SubmanifoldMesh, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&MeshNode) -> Result<T> + Sync + Send,
{
    mesh.nodes.par_iter().map(f).collect()
}

/// A deformation vector field `u ↦ ν(u)` along an immersion.
pub trait DeformationField: Send + Sync {
    /// Chart components of `ν` as jets, given the position jets `f(u)`.
    fn jet(&self, u: &[f64], position: &[Jet2]) -> Vec<Jet2>;

    /// True when `ν` and its first derivatives vanish on the boundary of the
    /// parameter box, so a non-closed patch still has no boundary term.
    fn vanishes_on_boundary(&self) -> bool {
        false
    }

    fn describe(&self) -> String;
}

/// `ν = v`, constant in chart coordinates.
#[derive(Debug, Clone)]
pub struct ConstantField(pub Vec<f64>);

impl DeformationField for ConstantField {
    fn jet(&self, _u: &[f64], _p: &[Jet2]) -> Vec<Jet2> {
        self.0.iter().map(|&v| Jet2::constant(v)).collect()
    }
    fn describe(&self) -> String {
        format!("constant {:?}", self.0)
    }
}

/// `ν = A x + b` evaluated at the chart position.
#[derive(Debug, Clone)]
pub struct LinearField {
    pub matrix: DMatrix<f64>,
    pub offset: DVector<f64>,
}

impl DeformationField for LinearField {
    fn jet(&self, _u: &[f64], p: &[Jet2]) -> Vec<Jet2> {
        (0..self.matrix.nrows())
            .map(|r| {
                let mut acc = Jet2::constant(self.offset[r]);
                for (c, pc) in p.iter().enumerate() {
                    acc += *pc * self.matrix[(r, c)];
                }
                acc
            })
            .collect()
    }
    fn describe(&self) -> String {
        "linear".into()
    }
}

/// Smooth random ambient field `V_k(x) = a Σ_j c_kj sin(w_kj·x + φ_kj)`,
/// restricted to the immersion.
#[derive(Debug, Clone)]
pub struct AmbientFourierField {
    seed: u64,
    amplitude: f64,
    dim: usize,
    modes: Vec<Vec<(Vec<f64>, f64, f64)>>,
}

impl AmbientFourierField {
    pub fn new(seed: u64, amplitude: f64, dim: usize, modes: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let modes = (0..dim)
            .map(|_| {
                (0..modes)
                    .map(|_| {
                        let w: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect();
                        let phase = rng.random_range(0.0..2.0 * PI);
                        let coef = rng.random_range(-1.0..1.0);
                        (w, phase, coef)
                    })
                    .collect()
            })
            .collect();
        AmbientFourierField {
            seed,
            amplitude,
            dim,
            modes,
        }
    }

    pub fn eval<T: Real>(&self, x: &[T]) -> Vec<T> {
        (0..self.dim)
            .map(|k| {
                let mut acc = T::cst(0.0);
                for (w, phase, coef) in &self.modes[k] {
                    let mut arg = T::cst(*phase);
                    for (xi, wi) in x.iter().zip(w) {
                        arg = arg + *xi * *wi;
                    }
                    acc = acc + arg.sin() * *coef;
                }
                acc * self.amplitude
            })
            .collect()
    }
}

impl DeformationField for AmbientFourierField {
    fn jet(&self, _u: &[f64], p: &[Jet2]) -> Vec<Jet2> {
        self.eval(p)
    }
    fn describe(&self) -> String {
        format!("ambient-fourier seed={} amplitude={}", self.seed, self.amplitude)
    }
}

/// Multiplies a field by `Π sin⁴(π (u_a − lo_a)/(hi_a − lo_a))` over the
/// non-periodic axes, so it vanishes to first order on the box boundary.
pub struct BoundaryBump {
    inner: Arc<dyn DeformationField>,
    domain: ParamDomain,
}

impl BoundaryBump {
    pub fn new(inner: Arc<dyn DeformationField>, domain: ParamDomain) -> Self {
        BoundaryBump { inner, domain }
    }
}

impl DeformationField for BoundaryBump {
    fn jet(&self, u: &[f64], p: &[Jet2]) -> Vec<Jet2> {
        let vars = Jet2::seed(u);
        let mut bump = Jet2::constant(1.0);
        for a in 0..self.domain.dim() {
            if self.domain.periodic[a] {
                continue;
            }
            let (lo, hi) = (self.domain.lower[a], self.domain.upper[a]);
            let s = ((vars[a] - lo) * (PI / (hi - lo))).sin();
            bump = bump * s.powi(4);
        }
        self.inner.jet(u, p).into_iter().map(|v| v * bump).collect()
    }
    fn vanishes_on_boundary(&self) -> bool {
        true
    }
    fn describe(&self) -> String {
        format!("boundary-bump({})", self.inner.describe())
    }
}

/// How `f + tν` is pulled back onto the model after the chart addition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Retraction {
    /// Plain chart addition.
    None,
    /// Radial renormalization onto the sphere `|x| = radius` (extrinsic
    /// sphere models in Euclidean space).
    Radial { radius: f64 },
}

struct Deformed {
    base: Arc<dyn Parametrization>,
    field: Arc<dyn DeformationField>,
    t: f64,
    retraction: Retraction,
}

impl Parametrization for Deformed {
    fn param_dim(&self) -> usize {
        self.base.param_dim()
    }
    fn chart_dim(&self) -> usize {
        self.base.chart_dim()
    }
    fn jet(&self, u: &[f64]) -> Result<Vec<Jet2>> {
        let base = self.base.jet(u)?;
        let nu = self.field.jet(u, &base);
        let moved: Vec<Jet2> = base.iter().zip(&nu).map(|(b, v)| *b + *v * self.t).collect();
        Ok(match self.retraction {
            Retraction::None => moved,
            Retraction::Radial { radius } => {
                let mut r2 = Jet2::constant(0.0);
                for y in &moved {
                    r2 += *y * *y;
                }
                let factor = r2.sqrt().recip() * radius;
                moved.into_iter().map(|y| y * factor).collect()
            }
        })
    }
}

/// A deformation family `f_t` built from a field and a retraction.
#[derive(Clone)]
pub struct Deformation {
    pub field: Arc<dyn DeformationField>,
    pub retraction: Retraction,
}

impl Deformation {
    pub fn new(field: Arc<dyn DeformationField>) -> Self {
        Deformation {
            field,
            retraction: Retraction::None,
        }
    }

    pub fn with_retraction(mut self, retraction: Retraction) -> Self {
        self.retraction = retraction;
        self
    }

    /// The patch `f_t`.
    pub fn apply(&self, patch: &ImmersionPatch, t: f64) -> Result<ImmersionPatch> {
        let map: Arc<dyn Parametrization> = Arc::new(Deformed {
            base: patch.map.clone(),
            field: self.field.clone(),
            t,
            retraction: self.retraction,
        });
        let out = ImmersionPatch {
            name: format!("{}+t", patch.name),
            ambient: patch.ambient.clone(),
            domain: patch.domain.clone(),
            map,
            scale: patch.scale,
            complex: false,
            closed: patch.closed,
        };
        Ok(out)
    }

    /// `ν_eff = ∂f_t/∂t` at `t = 0`, in chart coordinates.
    pub fn effective_vector(&self, patch: &ImmersionPatch, u: &[f64]) -> Result<DVector<f64>> {
        let base = patch.component_jets(u)?;
        let u = patch.domain.wrap(u)?;
        let nu = self.field.jet(&u, &base);
        let x = DVector::from_fn(base.len(), |k, _| base[k].v);
        let v = DVector::from_fn(nu.len(), |k, _| nu[k].v);
        Ok(match self.retraction {
            Retraction::None => v,
            Retraction::Radial { radius } => {
                let r2 = x.norm_squared();
                (&v - &x * (x.dot(&v) / r2)) * (radius / r2.sqrt())
            }
        })
    }
}

/// `f_t = retraction(f + tν)` with plain chart addition.
pub fn deform(
    patch: &ImmersionPatch,
    field: Arc<dyn DeformationField>,
    t: f64,
) -> Result<ImmersionPatch> {
    Deformation::new(field).apply(patch, t)
}
