//! Pointwise and integrated geometry of explicit patches against closed forms.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use curvatura::frames::{point_geometry, FrameGauge};
use curvatura::immersion::{build_mesh, evaluate_nodes, integrate, Analytic, AnalyticMap, ParamDomain};
use curvatura::invariants::invariant_sample;
use curvatura::jet::Real;
use curvatura::tubes::{austerity_check, tube_report, tubular_minimality_report, TubularOptions};
use curvatura::{AmbientSpace, ImmersionPatch};

struct Enneper;
impl AnalyticMap for Enneper {
    fn param_dim(&self) -> usize {
        2
    }
    fn chart_dim(&self) -> usize {
        3
    }
    fn eval<T: Real>(&self, u: &[T]) -> Vec<T> {
        let (a, b) = (u[0], u[1]);
        vec![a - a * a * a / 3.0 + a * b * b, b - b * b * b / 3.0 + b * a * a, a * a - b * b]
    }
}

struct Torus {
    big: f64,
    small: f64,
}
impl AnalyticMap for Torus {
    fn param_dim(&self) -> usize {
        2
    }
    fn chart_dim(&self) -> usize {
        3
    }
    fn eval<T: Real>(&self, u: &[T]) -> Vec<T> {
        let (s, t) = (u[0], u[1]);
        let rad = t.cos() * self.small + T::cst(self.big);
        vec![rad * s.cos(), rad * s.sin(), t.sin() * self.small]
    }
}

/// Closed curve on a torus knot path in R³.
struct KnotCurve;
impl AnalyticMap for KnotCurve {
    fn param_dim(&self) -> usize {
        1
    }
    fn chart_dim(&self) -> usize {
        3
    }
    fn eval<T: Real>(&self, u: &[T]) -> Vec<T> {
        let s = u[0];
        let rad = (s * 3.0).cos() * 0.5 + T::cst(2.0);
        vec![rad * (s * 2.0).cos(), rad * (s * 2.0).sin(), (s * 3.0).sin() * 0.5]
    }
}

/// Wavy torus in a 4-dimensional chart, used in every ambient kind.
struct WavyTorus;
impl AnalyticMap for WavyTorus {
    fn param_dim(&self) -> usize {
        2
    }
    fn chart_dim(&self) -> usize {
        4
    }
    fn eval<T: Real>(&self, u: &[T]) -> Vec<T> {
        let (s, t) = (u[0], u[1]);
        vec![s.cos() * 0.4, s.sin() * 0.4 + t.cos() * 0.05, t.cos() * 0.3, t.sin() * 0.3 + (s + t).sin() * 0.04]
    }
}

fn enneper() -> ImmersionPatch {
    let domain = ParamDomain::new(vec![-0.8, -0.8], vec![0.8, 0.8], vec![false, false]);
    ImmersionPatch::new("enneper", AmbientSpace::euclidean(3), domain, Arc::new(Analytic(Enneper))).unwrap()
}

fn torus(big: f64, small: f64) -> ImmersionPatch {
    ImmersionPatch::new("torus", AmbientSpace::euclidean(3), ParamDomain::torus(2), Arc::new(Analytic(Torus { big, small })))
        .unwrap()
        .with_scale(small)
        .with_closed(true)
}

#[test]
fn enneper_curvature_matches_closed_form() {
    let patch = enneper();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let u = [rng.random_range(-0.8..0.8), rng.random_range(-0.8..0.8)];
        let g = point_geometry(&patch, &u, &FrameGauge::default()).unwrap();
        let inv = invariant_sample(&g).unwrap();
        let w = 1.0 + u[0] * u[0] + u[1] * u[1];
        let gauss = -4.0 / w.powi(4);
        assert!((inv.k[1] - gauss).abs() < 1e-10, "{} vs {gauss}", inv.k[1]);
        assert!((inv.k_intrinsic[1] - gauss).abs() < 1e-10);
        assert!(inv.h_norm(0) < 1e-10);
    }
}

#[test]
fn enneper_is_austere_and_tubular_minimal() {
    let patch = enneper();
    let mesh = build_mesh(&patch, &[24, 24]).unwrap();
    let rep = austerity_check(&patch, &mesh, 4, 1, 1e-6).unwrap();
    assert!(rep.austere, "{rep:?}");
    assert!(rep.signed_k_min[1] >= -1e-8);
    let tub = tubular_minimality_report(&patch, &mesh, &TubularOptions::default()).unwrap();
    assert!(tub.unanimous && tub.flags.iter().all(|&f| f), "{tub:?}");
}

#[test]
fn torus_of_revolution_matches_closed_forms() {
    let (big, small) = (2.0, 0.7);
    let patch = torus(big, small);
    let mesh = build_mesh(&patch, &[48, 48]).unwrap();
    let rows = evaluate_nodes(&mesh, |node| {
        let g = point_geometry(&patch, &node.u, &FrameGauge::default())?;
        invariant_sample(&g).map(|inv| (node.u[1], inv))
    })
    .unwrap();
    for (t, inv) in &rows {
        let rad = big + small * t.cos();
        let gauss = t.cos() / (small * rad);
        let mean = (big + 2.0 * small * t.cos()) / (2.0 * small * rad);
        assert!((inv.k[1] - gauss).abs() < 1e-10);
        assert!((inv.h_norm(0) - mean.abs()).abs() < 1e-10);
    }
    let k: Vec<f64> = rows.iter().map(|r| r.1.k[1]).collect();
    assert!(integrate(&mesh, &k).unwrap().abs() < 1e-10);
    assert!((mesh.volume() - 4.0 * PI * PI * big * small).abs() < 1e-10);
    let tube = tube_report(&patch, &mesh, &[0.1, 0.3, 0.5]).unwrap();
    for v in &tube.formula {
        assert!((v - 8.0 * PI * PI * big * small).abs() < 1e-9);
    }
    assert!(tube.max_relative_gap().unwrap() < 1e-10);
}

#[test]
fn curve_tube_is_length_times_circumference() {
    let patch = ImmersionPatch::new("knot", AmbientSpace::euclidean(3), ParamDomain::torus(1), Arc::new(Analytic(KnotCurve)))
        .unwrap()
        .with_closed(true);
    let mesh = build_mesh(&patch, &[256]).unwrap();
    let length = mesh.volume();
    let tube = tube_report(&patch, &mesh, &[0.05, 0.1, 0.2]).unwrap();
    for (r, (f, num)) in tube.radii.iter().zip(tube.formula.iter().zip(tube.numeric.as_ref().unwrap())) {
        let expect = 2.0 * PI * length * r;
        assert!((f - expect).abs() < 1e-9 * expect);
        assert!((num - expect).abs() < 1e-9 * expect);
    }
}

#[test]
fn frames_are_orthonormal_and_sff_symmetric_in_every_ambient() {
    let ambients = [
        AmbientSpace::euclidean(4),
        AmbientSpace::space_form(1.0, 4),
        AmbientSpace::space_form(-1.0, 4),
        AmbientSpace::fubini_study(4.0, 2).unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for ambient in ambients {
        let patch = ImmersionPatch::new("wavy", ambient, ParamDomain::torus(2), Arc::new(Analytic(WavyTorus))).unwrap();
        for _ in 0..10 {
            let u = [rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..2.0 * PI)];
            let geom = point_geometry(&patch, &u, &FrameGauge::default()).unwrap();
            let e: Vec<_> = (0..2).map(|i| geom.frame.tangent(i).clone()).chain((0..2).map(|a| geom.frame.normal(a).clone())).collect();
            for a in 0..4 {
                for b in 0..4 {
                    let ip = (&geom.metric * &e[b]).dot(&e[a]);
                    let expect = if a == b { 1.0 } else { 0.0 };
                    assert!((ip - expect).abs() < 1e-10, "{}: <e{a}, e{b}> = {ip}", patch.ambient().label());
                }
            }
            assert!(geom.sff.symmetry_defect() < 1e-7);
        }
    }
}

#[test]
fn integration_does_not_depend_on_node_order() {
    let patch = torus(2.0, 0.7);
    let mut mesh = build_mesh(&patch, &[32, 32]).unwrap();
    let field: Vec<f64> = mesh.nodes.iter().map(|n| (n.u[0] * 3.0).sin() + n.u[1].cos().powi(2)).collect();
    let before = integrate(&mesh, &field).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut order: Vec<usize> = (0..mesh.len()).collect();
    for i in (1..order.len()).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let shuffled: Vec<f64> = order.iter().map(|&i| field[i]).collect();
    mesh.nodes = order.iter().map(|&i| mesh.nodes[i].clone()).collect();
    let after = integrate(&mesh, &shuffled).unwrap();
    assert!((before - after).abs() < 1e-10 * before.abs().max(1.0));
}
