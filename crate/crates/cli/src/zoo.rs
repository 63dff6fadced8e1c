//! Named test manifolds with known closed-form values.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use curvatura::immersion::{Analytic, AnalyticMap, ParamDomain};
use curvatura::jet::Real;
use curvatura::{AmbientSpace, GeometryError, ImmersionPatch, Result};

/// Zoo name plus parameter overrides, as read from a config file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ManifoldDescriptor {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl ManifoldDescriptor {
    pub fn named(name: impl Into<String>) -> Self {
        ManifoldDescriptor {
            name: name.into(),
            params: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.into(), value);
        self
    }
}

/// A closed-form value attached to a zoo entry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reference {
    pub quantity: String,
    pub value: f64,
}

/// A constructed zoo manifold.
#[derive(Debug, Clone)]
pub struct ZooManifold {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub patch: ImmersionPatch,
    pub default_resolution: Vec<usize>,
    /// Grid for first-variation runs; finer than the default on open patches,
    /// where the boundary bump steepens the deformation field.
    pub variation_resolution: Vec<usize>,
    pub references: Vec<Reference>,
}

/// One row of the catalog listing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZooEntry {
    pub name: String,
    pub n: usize,
    pub m: usize,
    pub ambient: String,
    pub closed: bool,
    pub complex: bool,
    pub params: BTreeMap<String, f64>,
    pub references: Vec<Reference>,
}

/// Every zoo name, in listing order.
pub const NAMES: &[&str] = &[
    "sphere",
    "ellipsoid",
    "ellipsoid-r4",
    "torus-of-revolution",
    "flat-torus-r4",
    "clifford-torus-s3",
    "product-torus-s3",
    "great-sphere-s3",
    "torus-hyperbolic",
    "fourier-perturbed-torus",
    "curve-r3",
    "linear-cp1-cp2",
    "quadric-cp2",
    "quadric-cp3",
    "holomorphic-graph-c3",
    "perturbed-quadric-cp2",
];

/// Aliases accepted on the command line.
fn canonical(name: &str) -> &str {
    match name {
        "clifford-torus" => "clifford-torus-s3",
        other => other,
    }
}

fn defaults(name: &str) -> Option<Vec<(&'static str, f64)>> {
    Some(match name {
        "sphere" => vec![("n", 2.0), ("r", 1.0)],
        "ellipsoid" => vec![("a", 1.0), ("b", 1.3), ("c", 0.8)],
        "ellipsoid-r4" => vec![("a", 1.0), ("b", 1.2), ("c", 0.9), ("d", 1.1)],
        "torus-of-revolution" => vec![("R", 2.0), ("a", 0.7)],
        "flat-torus-r4" => vec![("a", 1.0), ("b", 1.0)],
        "clifford-torus-s3" => vec![],
        "product-torus-s3" => vec![("a", 0.6)],
        "great-sphere-s3" => vec![],
        "torus-hyperbolic" => vec![("R", 0.8), ("a", 0.3)],
        "fourier-perturbed-torus" => vec![("seed", 1.0), ("amplitude", 0.05), ("dim", 4.0)],
        "curve-r3" => vec![],
        "linear-cp1-cp2" => vec![],
        "quadric-cp2" => vec![],
        "quadric-cp3" => vec![],
        "holomorphic-graph-c3" => vec![],
        "perturbed-quadric-cp2" => vec![("epsilon", 0.2)],
        _ => return None,
    })
}

struct Params {
    values: BTreeMap<String, f64>,
}

impl Params {
    fn get(&self, key: &str) -> f64 {
        self.values[key]
    }

    fn positive(&self, key: &str) -> Result<f64> {
        let v = self.get(key);
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(GeometryError::Descriptor(format!("parameter {key} must be positive, got {v}")))
        }
    }
}

/// Builds a zoo manifold from a descriptor.
pub fn build(desc: &ManifoldDescriptor) -> Result<ZooManifold> {
    let name = canonical(&desc.name);
    let defs = defaults(name).ok_or_else(|| GeometryError::Descriptor(format!("unknown manifold {}", desc.name)))?;
    let mut values: BTreeMap<String, f64> = defs.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    for (k, v) in &desc.params {
        if !values.contains_key(k) {
            return Err(GeometryError::Descriptor(format!("manifold {name} has no parameter {k}")));
        }
        values.insert(k.clone(), *v);
    }
    let p = Params { values };
    let (patch, res, refs) = construct(name, &p)?;
    let floor = match (patch.is_closed(), patch.dim()) {
        (true, _) | (false, 1) => 0,
        (false, 2) => 32,
        (false, 3) => 16,
        (false, _) => 12,
    };
    let variation_resolution = res.iter().map(|&r| r.max(floor)).collect();
    Ok(ZooManifold {
        name: name.to_string(),
        params: p.values,
        patch,
        default_resolution: res,
        variation_resolution,
        references: refs.into_iter().map(|(q, v)| Reference { quantity: q.into(), value: v }).collect(),
    })
}

/// Catalog of every entry with default parameters.
pub fn list_zoo() -> Result<Vec<ZooEntry>> {
    NAMES
        .iter()
        .map(|name| {
            let z = build(&ManifoldDescriptor::named(*name))?;
            Ok(ZooEntry {
                name: z.name,
                n: z.patch.dim(),
                m: z.patch.codim(),
                ambient: z.patch.ambient().label(),
                closed: z.patch.is_closed(),
                complex: z.patch.is_complex(),
                params: z.params,
                references: z.references,
            })
        })
        .collect()
}

type Built = (ImmersionPatch, Vec<usize>, Vec<(&'static str, f64)>);

fn patch<M: AnalyticMap + 'static>(name: &str, ambient: AmbientSpace, domain: ParamDomain, map: M) -> Result<ImmersionPatch> {
    ImmersionPatch::new(name, ambient, domain, Arc::new(Analytic(map)))
}

fn lat_long() -> ParamDomain {
    ParamDomain::new(vec![0.0, 0.0], vec![PI, 2.0 * PI], vec![false, true])
}

/// `(η, ξ1, ξ2)`: `η ∈ (0, π/2)`, `ξ` periodic.
fn hopf() -> ParamDomain {
    ParamDomain::new(vec![0.0, 0.0, 0.0], vec![PI / 2.0, 2.0 * PI, 2.0 * PI], vec![false, true, true])
}

fn construct(name: &str, p: &Params) -> Result<Built> {
    Ok(match name {
        "sphere" => {
            let r = p.positive("r")?;
            let n = p.get("n");
            let dim = if n.fract() == 0.0 && (1.0..=3.0).contains(&n) { n as usize } else { 0 };
            match dim {
                1 => (
                    patch("sphere", AmbientSpace::euclidean(2), ParamDomain::torus(1), Circle(r))?.with_scale(r),
                    vec![64],
                    vec![("volume", 2.0 * PI * r), ("|H_1|", 1.0 / r)],
                ),
                2 => (
                    patch("sphere", AmbientSpace::euclidean(3), lat_long(), Ellipsoid([r, r, r]))?
                        .with_closed(true)
                        .with_scale(r),
                    vec![24, 32],
                    vec![("volume", 4.0 * PI * r * r), ("K_2", 1.0 / (r * r)), ("M_2", 4.0 * PI), ("|H_1|", 1.0 / r)],
                ),
                3 => (
                    patch("sphere", AmbientSpace::euclidean(4), hopf(), Hopf([r, r, r, r]))?
                        .with_closed(true)
                        .with_scale(r),
                    vec![12, 16, 16],
                    vec![("volume", 2.0 * PI * PI * r.powi(3)), ("K_2", 1.0 / (r * r)), ("|H_1|", 1.0 / r)],
                ),
                _ => return Err(GeometryError::Descriptor(format!("sphere dimension must be 1, 2 or 3, got {n}"))),
            }
        }
        "ellipsoid" => {
            let axes = [p.positive("a")?, p.positive("b")?, p.positive("c")?];
            (
                patch("ellipsoid", AmbientSpace::euclidean(3), lat_long(), Ellipsoid(axes))?
                    .with_closed(true)
                    .with_scale(axes.iter().fold(0.0, |a: f64, b| a.max(*b))),
                vec![32, 48],
                vec![("M_2", 4.0 * PI)],
            )
        }
        "ellipsoid-r4" => {
            let axes = [p.positive("a")?, p.positive("b")?, p.positive("c")?, p.positive("d")?];
            (
                patch("ellipsoid-r4", AmbientSpace::euclidean(4), hopf(), Hopf(axes))?
                    .with_closed(true)
                    .with_scale(axes.iter().fold(0.0, |a: f64, b| a.max(*b))),
                vec![16, 24, 24],
                vec![],
            )
        }
        "torus-of-revolution" => {
            let (big, a) = (p.positive("R")?, p.positive("a")?);
            if a >= big {
                return Err(GeometryError::Descriptor("torus needs a < R".into()));
            }
            (
                patch("torus-of-revolution", AmbientSpace::euclidean(3), ParamDomain::torus(2), RevolutionTorus { big, small: a })?
                    .with_scale(a),
                vec![32, 32],
                vec![("volume", 4.0 * PI * PI * big * a), ("M_2", 0.0)],
            )
        }
        "flat-torus-r4" => {
            let (a, b) = (p.positive("a")?, p.positive("b")?);
            (
                patch("flat-torus-r4", AmbientSpace::euclidean(4), ParamDomain::torus(2), ProductCircles { a, b, stereo: false })?
                    .with_scale(a.min(b)),
                vec![16, 16],
                vec![("volume", 4.0 * PI * PI * a * b), ("K_2", 0.0)],
            )
        }
        "clifford-torus-s3" => {
            let a = std::f64::consts::FRAC_1_SQRT_2;
            (
                patch("clifford-torus-s3", AmbientSpace::space_form(1.0, 3), ParamDomain::torus(2), ProductCircles { a, b: a, stereo: true })?,
                vec![64, 64],
                vec![
                    ("volume", 2.0 * PI * PI),
                    ("K_2", -1.0),
                    ("K^M_2", 0.0),
                    ("M_2", -2.0 * PI * PI),
                    ("|H_1|", 0.0),
                ],
            )
        }
        "product-torus-s3" => {
            let a = p.positive("a")?;
            if a >= 1.0 {
                return Err(GeometryError::Descriptor("product torus needs 0 < a < 1".into()));
            }
            let b = (1.0 - a * a).sqrt();
            (
                patch("product-torus-s3", AmbientSpace::space_form(1.0, 3), ParamDomain::torus(2), ProductCircles { a, b, stereo: true })?,
                vec![64, 64],
                vec![("volume", 4.0 * PI * PI * a * b), ("K_2", -1.0), ("K^M_2", 0.0)],
            )
        }
        "great-sphere-s3" => (
            patch("great-sphere-s3", AmbientSpace::space_form(1.0, 3), lat_long(), Ellipsoid([2.0, 2.0, 2.0]))?.with_closed(true),
            vec![24, 32],
            vec![("volume", 4.0 * PI), ("K_2", 0.0), ("|H_1|", 0.0)],
        ),
        "torus-hyperbolic" => {
            let (big, a) = (p.positive("R")?, p.positive("a")?);
            if a >= big || big + a >= 2.0 {
                return Err(GeometryError::Descriptor("hyperbolic torus needs a < R and R + a < 2".into()));
            }
            (
                patch("torus-hyperbolic", AmbientSpace::space_form(-1.0, 3), ParamDomain::torus(2), RevolutionTorus { big, small: a })?
                    .with_scale(a),
                vec![32, 32],
                vec![],
            )
        }
        "fourier-perturbed-torus" => {
            let dim = p.get("dim");
            if ![3.0, 4.0, 5.0].contains(&dim) {
                return Err(GeometryError::Descriptor(format!("ambient dim must be 3, 4 or 5, got {dim}")));
            }
            let amp = p.get("amplitude");
            if !(0.0..=0.2).contains(&amp) {
                return Err(GeometryError::Descriptor(format!("amplitude must lie in [0, 0.2], got {amp}")));
            }
            let map = FourierTorus::new(p.get("seed") as u64, amp, dim as usize);
            (
                patch("fourier-perturbed-torus", AmbientSpace::euclidean(dim as usize), ParamDomain::torus(2), map)?.with_scale(0.5),
                vec![32, 32],
                vec![],
            )
        }
        "curve-r3" => (
            patch("curve-r3", AmbientSpace::euclidean(3), ParamDomain::torus(1), Trefoil)?,
            vec![256],
            vec![],
        ),
        "linear-cp1-cp2" => (
            patch("linear-cp1-cp2", fs(2)?, unit_box(2, 1.0), ComplexLine)?.with_complex(true),
            vec![6, 6],
            vec![("|H_1|", 0.0), ("|L_0|", 0.0), ("|L_2|", 0.0)],
        ),
        "quadric-cp2" => (
            patch(
                "quadric-cp2",
                fs(2)?,
                ParamDomain::new(vec![-1.0, 0.0], vec![1.0, 2.0 * PI], vec![false, true]),
                Quadric { epsilon: 0.0 },
            )?
            .with_complex(true),
            vec![8, 12],
            vec![("|H_1|", 0.0), ("|L_0|", 0.0), ("|L_2|", 0.0)],
        ),
        "quadric-cp3" => (
            patch("quadric-cp3", fs(3)?, unit_box(4, 0.8), QuadricCp3)?.with_complex(true),
            vec![4, 4, 4, 4],
            vec![("|H_1|", 0.0), ("|H_3|", 0.0), ("|L_0|", 0.0), ("|L_2|", 0.0), ("|L_4|", 0.0)],
        ),
        "holomorphic-graph-c3" => (
            patch("holomorphic-graph-c3", AmbientSpace::euclidean(6), unit_box(4, 0.8), HolomorphicGraph)?.with_complex(true),
            vec![6, 6, 6, 6],
            vec![("|H_1|", 0.0), ("|H_3|", 0.0)],
        ),
        "perturbed-quadric-cp2" => (
            patch(
                "perturbed-quadric-cp2",
                fs(2)?,
                ParamDomain::new(vec![-1.0, 0.0], vec![1.0, 2.0 * PI], vec![false, true]),
                Quadric { epsilon: p.get("epsilon") },
            )?,
            vec![8, 12],
            vec![],
        ),
        _ => return Err(GeometryError::Descriptor(format!("unknown manifold {name}"))),
    })
}

fn fs(k: usize) -> Result<AmbientSpace> {
    AmbientSpace::fubini_study(4.0, k)
}

fn unit_box(n: usize, half: f64) -> ParamDomain {
    ParamDomain::new(vec![-half; n], vec![half; n], vec![false; n])
}

struct Circle(f64);
impl AnalyticMap for Circle {
    fn param_dim(&self) -> usize {
        1
    }
    fn chart_dim(&self) -> usize {
        2
    }
    fn eval<T: Real>(&self, u: &[T]) -> Vec<T> {
        vec![u[0].cos() * self.0, u[0].sin() * self.0]
    }
}

/// Latitude–longitude ellipsoid `(a sinθ cosφ, b sinθ sinφ, c cosθ)`.
struct Ellipsoid([f64; 3]);
impl AnalyticMap for Ellipsoid {
    fn param_dim(&self) -> usize {
        2
    }
    fn chart_dim(&self) -> usize {
        3
    }
    fn eval<T: Real>(&self, u: &[T]) -> Vec<T> {
        let [a, b, c] = self.0;
        vec![u[0].sin() * u[1].cos() * a, u[0].sin() * u[1].sin() * b, u[0].cos() * c]
    }
}

/// Hopf coordinates on a 3-ellipsoid in `R^4`.
struct Hopf([f64; 4]);
impl AnalyticMap for Hopf {
    fn param_dim(&self) -> usize {
        3
    }
    fn chart_dim(&self) -> usize {
        4
    }
    fn eval<T: Real>(&self, u: &[T]) -> Vec<T> {
        let [a, b, c, d] = self.0;
        let (ce, se) = (u[0].cos(), u[0].sin());
        vec![ce * u[1].cos() * a, ce * u[1].sin() * b, se * u[2].cos() * c, se * u[2].sin() * d]
    }
}

struct RevolutionTorus {
    big: f64,
    small: f64,
}
impl AnalyticMap for RevolutionTorus {
    fn param_dim(&self) -> usize {
        2
    }
    fn chart_dim(&self) -> usize {
        3
    }
    fn eval<T: Real>(&self, u: &[T]) -> Vec<T> {
        let rad = u[1].cos() * self.small + self.big;
        vec![rad * u[0].cos(), rad * u[0].sin(), u[1].sin() * self.small]
    }
}

/// `(a cos s, a sin s, b cos t, b sin t)`, optionally pushed through the
/// stereographic chart of the unit 3-sphere.
struct ProductCircles {
    a: f64,
    b: f64,
    stereo: bool,
}
impl AnalyticMap for ProductCircles {
    fn param_dim(&self) -> usize {
        2
    }
    fn chart_dim(&self) -> usize {
        if self.stereo {
            3
        } else {
            4
        }
    }
    fn eval<T: Real>(&self, u: &[T]) -> Vec<T> {
        let y = [u[0].cos() * self.a, u[0].sin() * self.a, u[1].cos() * self.b, u[1].sin() * self.b];
        if self.stereo {
            let k = (T::cst(1.0) - y[3]).recip() * 2.0;
            vec![y[0] * k, y[1] * k, y[2] * k]
        } else {
            y.to_vec()
        }
    }
}

/// Torus plus a seeded low-frequency Fourier perturbation.
struct FourierTorus {
    dim: usize,
    amplitude: f64,
    /// (coordinate, j1, j2, cos coefficient, sin coefficient)
    modes: Vec<(usize, f64, f64, f64, f64)>,
}

impl FourierTorus {
    fn new(seed: u64, amplitude: f64, dim: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut modes = Vec::new();
        for k in 0..dim {
            for j1 in -2i32..=2 {
                for j2 in -2i32..=2 {
                    let damp = 1.0 / (1 + j1 * j1 + j2 * j2) as f64;
                    let a: f64 = StandardNormal.sample(&mut rng);
                    let b: f64 = StandardNormal.sample(&mut rng);
                    modes.push((k, j1 as f64, j2 as f64, a * damp, b * damp));
                }
            }
        }
        FourierTorus { dim, amplitude, modes }
    }
}

impl AnalyticMap for FourierTorus {
    fn param_dim(&self) -> usize {
        2
    }
    fn chart_dim(&self) -> usize {
        self.dim
    }
    fn eval<T: Real>(&self, u: &[T]) -> Vec<T> {
        let (s, t) = (u[0], u[1]);
        let mut x = if self.dim == 3 {
            let rad = t.cos() * 0.5 + 1.5;
            vec![rad * s.cos(), rad * s.sin(), t.sin() * 0.5]
        } else {
            let mut v = vec![s.cos(), s.sin(), t.cos(), t.sin()];
            v.resize(self.dim, T::cst(0.0));
            v
        };
        for &(k, j1, j2, a, b) in &self.modes {
            let phase = s * j1 + t * j2;
            x[k] = x[k] + (phase.cos() * a + phase.sin() * b) * self.amplitude;
        }
        x
    }
}

/// Trefoil knot.
struct Trefoil;
impl AnalyticMap for Trefoil {
    fn param_dim(&self) -> usize {
        1
    }
    fn chart_dim(&self) -> usize {
        3
    }
    fn eval<T: Real>(&self, u: &[T]) -> Vec<T> {
        let t = u[0];
        let rad = (t * 3.0).cos() * 0.5 + 2.0;
        vec![rad * (t * 2.0).cos(), rad * (t * 2.0).sin(), (t * 3.0).sin() * 0.5]
    }
}

/// Complex multiplication on `(re, im)` pairs.
fn cmul<T: Real>(a: (T, T), b: (T, T)) -> (T, T) {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}

/// `z ↦ (z, (0.3 + 0.2i) z + 0.1)` in the affine chart of `CP^2`.
struct ComplexLine;
impl AnalyticMap for ComplexLine {
    fn param_dim(&self) -> usize {
        2
    }
    fn chart_dim(&self) -> usize {
        4
    }
    fn eval<T: Real>(&self, u: &[T]) -> Vec<T> {
        let w = cmul((T::cst(0.3), T::cst(0.2)), (u[0], u[1]));
        vec![u[0], u[1], w.0 + 0.1, w.1]
    }
}

/// `z1 z2 = 1` via `w ↦ (e^w, e^{−w})`, with an optional non-holomorphic
/// bend `ε cos(Im w)` of `Re z1`.
struct Quadric {
    epsilon: f64,
}
impl AnalyticMap for Quadric {
    fn param_dim(&self) -> usize {
        2
    }
    fn chart_dim(&self) -> usize {
        4
    }
    fn eval<T: Real>(&self, u: &[T]) -> Vec<T> {
        let (s, phi) = (u[0], u[1]);
        let (ep, em) = (s.exp(), (-s).exp());
        vec![
            ep * phi.cos() + phi.cos() * self.epsilon,
            ep * phi.sin(),
            em * phi.cos(),
            -(em * phi.sin()),
        ]
    }
}

/// `(z1, z2) ↦ (z1, z2, z1 z2)` in the affine chart of `CP^3`.
struct QuadricCp3;
impl AnalyticMap for QuadricCp3 {
    fn param_dim(&self) -> usize {
        4
    }
    fn chart_dim(&self) -> usize {
        6
    }
    fn eval<T: Real>(&self, u: &[T]) -> Vec<T> {
        let z3 = cmul((u[0], u[1]), (u[2], u[3]));
        vec![u[0], u[1], u[2], u[3], z3.0, z3.1]
    }
}

/// Graph of `g = 0.4 z1² − 0.3 z2² + 0.5 z1 z2` in `C^3 ≅ R^6`.
struct HolomorphicGraph;
impl AnalyticMap for HolomorphicGraph {
    fn param_dim(&self) -> usize {
        4
    }
    fn chart_dim(&self) -> usize {
        6
    }
    fn eval<T: Real>(&self, u: &[T]) -> Vec<T> {
        let z1 = (u[0], u[1]);
        let z2 = (u[2], u[3]);
        let a = cmul(z1, z1);
        let b = cmul(z2, z2);
        let c = cmul(z1, z2);
        vec![
            u[0],
            u[1],
            u[2],
            u[3],
            a.0 * 0.4 - b.0 * 0.3 + c.0 * 0.5,
            a.1 * 0.4 - b.1 * 0.3 + c.1 * 0.5,
        ]
    }
}
