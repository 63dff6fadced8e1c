//! Euler–Lagrange machinery for the total `2p`-th mean curvature:
//! `W_{2p−1}`, `Q^i_{2p−2}`, `Q̃_{2p−2}`, `L_2p`, the space-form shortcut,
//! the complex-projective checks and the first-variation verifier.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::ambient::AmbientKind;
use crate::error::{GeometryError, Result};
use crate::frames::{point_geometry, FrameGauge, PointGeometry};
use crate::immersion::{build_mesh, evaluate_nodes, integrate, Deformation, ImmersionPatch, SubmanifoldMesh};
use crate::invariants::{factorial, h2p1_at, k2p_at, omega_wedge, permutation_sign, wedge_eval, OneForm, TwoForm};

/// Default parameter-space step of the `Q̃` derivative stencil.
pub const DEFAULT_STENCIL_STEP: f64 = 1e-3;
/// Default deformation step, relative to the patch scale.
pub const DEFAULT_T_STEP: f64 = 1e-3;

#[inline]
fn rc(g: &PointGeometry, a: usize, b: usize, c: usize, d: usize) -> f64 {
    g.curvature.get(a, b, c, d)
}

fn sorted_without(set: &[usize], drop: &[usize]) -> Vec<usize> {
    set.iter().copied().filter(|v| !drop.contains(v)).collect()
}

fn cat(parts: &[&[usize]]) -> Vec<usize> {
    parts.iter().flat_map(|p| p.iter().copied()).collect()
}

fn check_p(n: usize, p: usize) -> Result<()> {
    if 2 * p > n {
        return Err(GeometryError::Precondition(format!("p = {p} outside 0..={}", n / 2)));
    }
    Ok(())
}

/// `W_{2p−1}` in frame components (tangent block first). Sums over the lower
/// tuples `J` are collapsed: for a fixed upper tuple, every ordering of the
/// remaining set contributes the same signed wedge value.
pub fn w_vector_at(geom: &PointGeometry, p: usize) -> Result<DVector<f64>> {
    let n = geom.dim();
    let m = geom.codim();
    check_p(n, p)?;
    let mut out = DVector::zeros(n + m);
    if p == 0 {
        return Ok(out);
    }
    let k = 2 * p - 1;
    // The (2p−1)! orderings of J cancel the 1/(2p−1)! of the coefficients.
    let c1 = 2.0 * factorial(n - 2 * p) / factorial(n);
    let c2 = factorial(n - 2 * p) / factorial(n);
    let rel = &geom.relcurv;
    let sff = &geom.sff;
    for tuple in (0..n).permutations(k) {
        let pairs = &tuple[..k - 1];
        let last = tuple[k - 1];
        let thetas: Vec<Box<dyn Fn(usize) -> f64 + '_>> =
            (0..m).map(|b| Box::new(move |x: usize| sff.get(b, last, x)) as Box<dyn Fn(usize) -> f64>).collect();
        let omega = |b: usize, on: &[usize]| omega_wedge(rel, pairs, &[thetas[b].as_ref() as OneForm], on);
        let free: Vec<usize> = (0..n).filter(|v| !tuple.contains(v)).collect();

        // first group: normal components
        for &i in &free {
            let upper = cat(&[&tuple, &[i]]);
            let su = permutation_sign(&upper) as f64;
            let mut set = upper.clone();
            set.sort_unstable();
            for &j in &set {
                let rest = sorted_without(&set, &[j]);
                let sl = permutation_sign(&cat(&[&rest, &[j]])) as f64;
                for b in 0..m {
                    let w = omega(b, &rest);
                    if w == 0.0 {
                        continue;
                    }
                    for a in 0..m {
                        out[n + a] += c1 * su * sl * rc(geom, i, n + b, j, n + a) * w;
                    }
                }
            }
        }

        // second group: tangent components
        for a in 0..m {
            for &ip in &free {
                // −2 δ^{I,i'}_{J,j'} R_{i'α i j'} term, output index i free
                let upper = cat(&[&tuple, &[ip]]);
                let su = permutation_sign(&upper) as f64;
                let mut set = upper.clone();
                set.sort_unstable();
                for &jp in &set {
                    let rest = sorted_without(&set, &[jp]);
                    let sl = permutation_sign(&cat(&[&rest, &[jp]])) as f64;
                    let w = omega(a, &rest);
                    if w == 0.0 {
                        continue;
                    }
                    for i in 0..n {
                        out[i] -= 2.0 * c2 * su * sl * rc(geom, ip, n + a, i, jp) * w;
                    }
                }
                // Σ_j δ^{I,i,i'}_{J,j,j'} R_{i'α j j'} term
                for &i in &free {
                    if i == ip {
                        continue;
                    }
                    let upper = cat(&[&tuple, &[i, ip]]);
                    let su = permutation_sign(&upper) as f64;
                    let mut set = upper.clone();
                    set.sort_unstable();
                    for (&j, &jp) in set.iter().cartesian_product(set.iter()) {
                        if j == jp {
                            continue;
                        }
                        let rest = sorted_without(&set, &[j, jp]);
                        let sl = permutation_sign(&cat(&[&rest, &[j, jp]])) as f64;
                        let r = rc(geom, ip, n + a, j, jp);
                        if r == 0.0 {
                            continue;
                        }
                        out[i] += c2 * su * sl * r * omega(a, &rest);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// `W_{2p−1}` by the literal nested sums over `I, i, J, j` with generalized
/// Kronecker symbols and permutation-sum wedges. Slow; for validation.
pub fn w_vector_literal(geom: &PointGeometry, p: usize) -> Result<DVector<f64>> {
    let n = geom.dim();
    let m = geom.codim();
    check_p(n, p)?;
    let mut out = DVector::zeros(n + m);
    if p == 0 {
        return Ok(out);
    }
    let k = 2 * p - 1;
    let c1 = 2.0 * factorial(n - 2 * p) / (factorial(2 * p - 1) * factorial(n));
    let c2 = factorial(n - 2 * p) / (factorial(2 * p - 1) * factorial(n));
    let rel = &geom.relcurv;
    let sff = &geom.sff;
    let wedge = |tuple: &[usize], b: usize, on: &[usize]| -> Result<f64> {
        let forms: Vec<Box<dyn Fn(usize, usize) -> f64>> = tuple[..k - 1]
            .chunks(2)
            .map(|c| {
                let (x, y) = (c[0], c[1]);
                Box::new(move |s: usize, t: usize| rel.get(x, y, s, t)) as Box<dyn Fn(usize, usize) -> f64>
            })
            .collect();
        let refs: Vec<TwoForm> = forms.iter().map(|f| f.as_ref() as TwoForm).collect();
        let last = tuple[k - 1];
        let theta = move |s: usize| sff.get(b, last, s);
        wedge_eval(&refs, Some(&theta), on)
    };
    let tuples: Vec<Vec<usize>> = (0..n).permutations(k).collect();
    for it in &tuples {
        for jt in &tuples {
            for b in 0..m {
                let w = wedge(it, b, jt)?;
                for i in 0..n {
                    for j in 0..n {
                        let d = crate::invariants::kronecker(&cat(&[it, &[i]]), &cat(&[jt, &[j]])) as f64;
                        if d != 0.0 {
                            for a in 0..m {
                                out[n + a] += c1 * d * rc(geom, i, n + b, j, n + a) * w;
                            }
                        }
                    }
                }
            }
            for a in 0..m {
                let w = wedge(it, a, jt)?;
                for ip in 0..n {
                    for jp in 0..n {
                        let d1 = crate::invariants::kronecker(&cat(&[it, &[ip]]), &cat(&[jt, &[jp]])) as f64;
                        for i in 0..n {
                            let mut acc = -2.0 * d1 * rc(geom, ip, n + a, i, jp);
                            for j in 0..n {
                                let d = crate::invariants::kronecker(&cat(&[it, &[i, ip]]), &cat(&[jt, &[j, jp]])) as f64;
                                if d != 0.0 {
                                    acc += d * rc(geom, ip, n + a, j, jp);
                                }
                            }
                            out[i] += c2 * acc * w;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// `q^{i,α}_{2p−2}` as an `n × m` matrix.
pub fn q_tensor_at(geom: &PointGeometry, p: usize) -> Result<DMatrix<f64>> {
    let n = geom.dim();
    let m = geom.codim();
    check_p(n, p)?;
    let mut q = DMatrix::zeros(n, m);
    if p == 0 {
        return Ok(q);
    }
    let k = 2 * p - 2;
    let c3 = factorial(n - 2 * p) / factorial(n);
    let rel = &geom.relcurv;
    let sff = &geom.sff;
    for tuple in (0..n).permutations(k) {
        let free: Vec<usize> = (0..n).filter(|v| !tuple.contains(v)).collect();
        for &i in &free {
            for &ip in &free {
                if i == ip {
                    continue;
                }
                let upper = cat(&[&tuple, &[i, ip]]);
                let su = permutation_sign(&upper) as f64;
                let mut set = upper.clone();
                set.sort_unstable();
                for (&j, &jp) in set.iter().cartesian_product(set.iter()) {
                    if j == jp {
                        continue;
                    }
                    let rest = sorted_without(&set, &[j, jp]);
                    let coef = c3 * su * permutation_sign(&cat(&[&rest, &[j, jp]])) as f64;
                    let base = omega_wedge(rel, &tuple, &[], &rest);
                    for a in 0..m {
                        q[(i, a)] += coef * rc(geom, ip, n + a, j, jp) * base;
                    }
                    if p >= 2 {
                        let pairs = &tuple[..k - 2];
                        let (x, y) = (tuple[k - 2], tuple[k - 1]);
                        for a in 0..m {
                            let ta = move |s: usize| sff.get(a, x, s);
                            for b in 0..m {
                                let r = rc(geom, ip, n + b, j, jp);
                                if r == 0.0 {
                                    continue;
                                }
                                let tb = move |s: usize| sff.get(b, y, s);
                                let w = omega_wedge(rel, pairs, &[&ta, &tb], &rest);
                                q[(i, a)] += coef * 2.0 * (p - 1) as f64 * r * w;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(q)
}

/// `Q^i_{2p−2}` by the literal nested sums. Slow; for validation.
pub fn q_tensor_literal(geom: &PointGeometry, p: usize) -> Result<DMatrix<f64>> {
    let n = geom.dim();
    let m = geom.codim();
    check_p(n, p)?;
    let mut q = DMatrix::zeros(n, m);
    if p == 0 {
        return Ok(q);
    }
    let k = 2 * p - 2;
    let c3 = factorial(n - 2 * p) / (factorial(k) * factorial(n));
    let rel = &geom.relcurv;
    let sff = &geom.sff;
    let make_forms = |t: &[usize]| -> Vec<Box<dyn Fn(usize, usize) -> f64 + '_>> {
        t.chunks(2)
            .map(|c| {
                let (x, y) = (c[0], c[1]);
                Box::new(move |s: usize, u: usize| rel.get(x, y, s, u)) as Box<dyn Fn(usize, usize) -> f64>
            })
            .collect()
    };
    let tuples: Vec<Vec<usize>> = (0..n).permutations(k).collect();
    for it in &tuples {
        for jt in &tuples {
            let forms = make_forms(it);
            let refs: Vec<TwoForm> = forms.iter().map(|f| f.as_ref() as TwoForm).collect();
            let base = wedge_eval(&refs, None, jt)?;
            for i in 0..n {
                for ip in 0..n {
                    for j in 0..n {
                        for jp in 0..n {
                            let d = crate::invariants::kronecker(&cat(&[it, &[i, ip]]), &cat(&[jt, &[j, jp]])) as f64;
                            if d == 0.0 {
                                continue;
                            }
                            for a in 0..m {
                                let mut acc = rc(geom, ip, n + a, j, jp) * base;
                                if p >= 2 {
                                    let forms2 = make_forms(&it[..k - 2]);
                                    let refs2: Vec<TwoForm> = forms2.iter().map(|f| f.as_ref() as TwoForm).collect();
                                    let (x, y) = (it[k - 2], it[k - 1]);
                                    for b in 0..m {
                                        let ta = move |s: usize| sff.get(a, x, s);
                                        let tb = move |s: usize| sff.get(b, y, s);
                                        // θ_{xα} ∧ θ_{yβ} as the 2-form ta⊗tb − tb⊗ta
                                        let tw = move |s: usize, u: usize| ta(s) * tb(u) - ta(u) * tb(s);
                                        let mut all: Vec<TwoForm> = refs2.clone();
                                        all.push(&tw);
                                        let w = wedge_eval(&all, None, jt)?;
                                        acc += 2.0 * (p - 1) as f64 * rc(geom, ip, n + b, j, jp) * w;
                                    }
                                }
                                q[(i, a)] += c3 * d * acc;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(q)
}

/// Settings shared by the Euler–Lagrange evaluators.
#[derive(Debug, Clone, PartialEq)]
pub struct ElOptions {
    pub gauge: FrameGauge,
    /// Parameter-space step of the 4th-order central stencil for `Q̃`.
    pub stencil_step: f64,
}

impl Default for ElOptions {
    fn default() -> Self {
        ElOptions {
            gauge: FrameGauge::default(),
            stencil_step: DEFAULT_STENCIL_STEP,
        }
    }
}

/// Smallest stencil step accepted near a non-periodic edge.
const MIN_STENCIL_STEP: f64 = 1e-6;

/// Per-axis step and the points at offsets `−2h, −h, +h, +2h`. On
/// non-periodic axes the step shrinks so the stencil stays in the box.
fn stencil_points(patch: &ImmersionPatch, u: &[f64], h: f64) -> Result<Vec<(f64, Vec<Vec<f64>>)>> {
    let dom = patch.domain();
    (0..u.len())
        .map(|a| {
            let mut step = h;
            if !dom.periodic[a] {
                let room = (u[a] - dom.lower[a]).min(dom.upper[a] - u[a]);
                if 2.0 * step > room {
                    step = room / 2.5;
                }
                if step < MIN_STENCIL_STEP {
                    return Err(GeometryError::Stencil { u: u.to_vec(), axis: a });
                }
            }
            let pts = [-2.0, -1.0, 1.0, 2.0]
                .iter()
                .map(|s| {
                    let mut v = u.to_vec();
                    v[a] += s * step;
                    v
                })
                .collect();
            Ok((step, pts))
        })
        .collect()
}

fn d4<T>(vals: &[T], h: f64) -> T
where
    T: Clone + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
{
    // vals at offsets −2h, −h, +h, +2h
    (vals[0].clone() - vals[3].clone() + (vals[2].clone() - vals[1].clone()) * 8.0) * (1.0 / (12.0 * h))
}

/// `Q̃_{2p−2}` in chart components, from the center geometry and its stencil.
fn qtilde_from(patch: &ImmersionPatch, center: &PointGeometry, p: usize, opts: &ElOptions) -> Result<DVector<f64>> {
    let n = center.dim();
    let m = center.codim();
    let big = n + m;
    if p == 0 {
        return Ok(DVector::zeros(big));
    }
    let u = &center.frame.u;
    let gauge = FrameGauge {
        pivot: opts.gauge.pivot.clone(),
        seeds: Some(center.frame.normal_seeds.clone()),
        j_paired: false,
    };
    let stencil = stencil_points(patch, u, opts.stencil_step)?;
    // per axis: derivative of every frame vector and of each Y_α = Σ_j q^{jα} e_j
    let mut d_frame: Vec<Vec<DVector<f64>>> = Vec::with_capacity(n);
    let mut d_y: Vec<Vec<DVector<f64>>> = Vec::with_capacity(n);
    for (step, pts) in &stencil {
        let h = *step;
        let mut frames = Vec::with_capacity(4);
        let mut ys = Vec::with_capacity(4);
        for v in pts {
            let g = point_geometry(patch, v, &gauge)?;
            let q = q_tensor_at(&g, p)?;
            let y: Vec<DVector<f64>> = (0..m)
                .map(|a| {
                    let mut acc = DVector::zeros(big);
                    for j in 0..n {
                        acc.axpy(q[(j, a)], g.frame.tangent(j), 1.0);
                    }
                    acc
                })
                .collect();
            frames.push(g.frame.vectors);
            ys.push(y);
        }
        d_frame.push(
            (0..big)
                .map(|c| d4(&frames.iter().map(|f| f[c].clone()).collect::<Vec<_>>(), h))
                .collect(),
        );
        d_y.push((0..m).map(|a| d4(&ys.iter().map(|y| y[a].clone()).collect::<Vec<_>>(), h)).collect());
    }
    let e = &center.frame.tangent_coeffs;
    let first = &center.jet.first;
    let gamma = &center.christoffels;
    let gmat = &center.metric;
    // ∇_{e_i} Y = Σ_a E_ia (∂_a Y + Γ(∂_a f, Y))
    let covariant = |i: usize, value: &DVector<f64>, derivs: &dyn Fn(usize) -> DVector<f64>| {
        let mut acc = DVector::zeros(big);
        for a in 0..n {
            let coef = e[(i, a)];
            if coef == 0.0 {
                continue;
            }
            acc.axpy(coef, &(derivs(a) + gamma.contract(&first[a], value)), 1.0);
        }
        acc
    };
    let q0 = q_tensor_at(center, p)?;
    let mut coeffs = DVector::zeros(big);
    // Σ_{i,A} ⟨Q^i, ∇_{e_i} e_A⟩ e_A
    for i in 0..n {
        let mut qi = DVector::zeros(big);
        for a in 0..m {
            qi.axpy(q0[(i, a)], center.frame.normal(a), 1.0);
        }
        let gqi = gmat * &qi;
        for cidx in 0..big {
            let nabla = covariant(i, &center.frame.vectors[cidx], &|a| d_frame[a][cidx].clone());
            coeffs[cidx] += gqi.dot(&nabla);
        }
    }
    // − Σ_α div(Y_α) e_α
    for a in 0..m {
        let mut y0 = DVector::zeros(big);
        for j in 0..n {
            y0.axpy(q0[(j, a)], center.frame.tangent(j), 1.0);
        }
        let mut div = 0.0;
        for i in 0..n {
            let nabla = covariant(i, &y0, &|ax| d_y[ax][a].clone());
            div += (gmat * &nabla).dot(center.frame.tangent(i));
        }
        coeffs[n + a] -= div;
    }
    Ok(center.frame.to_chart(&coeffs))
}

/// `Q̃_{2p−2}` at `u` in chart components.
pub fn qtilde_at(patch: &ImmersionPatch, u: &[f64], p: usize, opts: &ElOptions) -> Result<DVector<f64>> {
    let center = point_geometry(patch, u, &opts.gauge)?;
    check_p(center.dim(), p)?;
    qtilde_from(patch, &center, p, opts)
}

/// Euler–Lagrange ingredients at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct ElSample {
    pub u: Vec<f64>,
    pub p: usize,
    /// Normal-frame coefficients of `H^f_{2p+1}`.
    pub h: Vec<f64>,
    /// Frame components of `W_{2p−1}`.
    pub w: DVector<f64>,
    /// `q^{i,α}`.
    pub q: DMatrix<f64>,
    /// Chart components of `Q̃_{2p−2}`.
    pub qtilde: DVector<f64>,
    /// Chart components of `L_2p`.
    pub l: DVector<f64>,
    /// Metric length of `L_2p`.
    pub l_norm: f64,
}

fn el_from_geometry(patch: &ImmersionPatch, geom: &PointGeometry, p: usize, opts: &ElOptions) -> Result<ElSample> {
    let n = geom.dim();
    let m = geom.codim();
    check_p(n, p)?;
    let h = h2p1_at(&geom.relcurv, &geom.sff, p);
    let w = w_vector_at(geom, p)?;
    let q = q_tensor_at(geom, p)?;
    let qtilde = qtilde_from(patch, geom, p, opts)?;
    let mut coeffs = &w * p as f64;
    for a in 0..m {
        coeffs[n + a] -= (n - 2 * p) as f64 * h[a];
    }
    let l = geom.frame.to_chart(&coeffs) + &qtilde * p as f64;
    let l_norm = geom.norm(&l);
    Ok(ElSample {
        u: geom.frame.u.clone(),
        p,
        h,
        w,
        q,
        qtilde,
        l,
        l_norm,
    })
}

/// `L_2p = −(n−2p) H^f_{2p+1} + p W_{2p−1} + p Q̃_{2p−2}` at `u`.
pub fn el_operator_at(patch: &ImmersionPatch, u: &[f64], p: usize, opts: &ElOptions) -> Result<ElSample> {
    let geom = point_geometry(patch, u, &opts.gauge)?;
    el_from_geometry(patch, &geom, p, opts)
}

/// Space-form shortcut `−(n−2p) H^f_{2p+1} + 2cp H^f_{2p−1}`, as normal-frame
/// coefficients.
pub fn el_spaceform_at(
    kind: AmbientKind,
    rel: &crate::frames::RelCurvTensor,
    sff: &crate::frames::SffTensor,
    p: usize,
) -> Result<Vec<f64>> {
    let c = match kind {
        AmbientKind::Euclidean => 0.0,
        AmbientKind::SpaceForm { c } => c,
        AmbientKind::FubiniStudy { .. } => {
            return Err(GeometryError::Precondition(
                "space-form shortcut called on a complex projective ambient".into(),
            ))
        }
    };
    let n = rel.dim();
    check_p(n, p)?;
    let hi = h2p1_at(rel, sff, p);
    let lo = if p >= 1 { h2p1_at(rel, sff, p - 1) } else { vec![0.0; sff.codim()] };
    Ok(hi
        .iter()
        .zip(&lo)
        .map(|(a, b)| -((n - 2 * p) as f64) * a + 2.0 * c * p as f64 * b)
        .collect())
}

/// Euler–Lagrange samples at every mesh node.
pub fn el_field(patch: &ImmersionPatch, mesh: &SubmanifoldMesh, p: usize, opts: &ElOptions) -> Result<Vec<ElSample>> {
    evaluate_nodes(mesh, |node| el_operator_at(patch, &node.u, p, opts))
}

/// `M_2p(f) = ∫ K^f_2p dV` on the given resolution.
pub fn total_mean_curvature(patch: &ImmersionPatch, resolution: &[usize], p: usize, gauge: &FrameGauge) -> Result<f64> {
    let mesh = build_mesh(patch, resolution)?;
    total_on_mesh(patch, &mesh, p, gauge)
}

pub fn total_on_mesh(patch: &ImmersionPatch, mesh: &SubmanifoldMesh, p: usize, gauge: &FrameGauge) -> Result<f64> {
    let k = evaluate_nodes(mesh, |node| {
        let g = point_geometry(patch, &node.u, gauge)?;
        k2p_at(&g.relcurv, p)
    })?;
    integrate(mesh, &k)
}

/// Settings of the first-variation verifier.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationOptions {
    pub resolution: Vec<usize>,
    /// Deformation step relative to the patch scale.
    pub t_step: f64,
    pub el: ElOptions,
}

impl VariationOptions {
    pub fn new(resolution: Vec<usize>) -> Self {
        VariationOptions {
            resolution,
            t_step: DEFAULT_T_STEP,
            el: ElOptions::default(),
        }
    }
}

/// Finite-difference `dM_2p/dt` against `∫⟨L_2p, ν_eff⟩ dV`.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstVariationReport {
    pub p: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub abs_gap: f64,
    pub rel_gap: f64,
    pub t_step: f64,
    pub field: String,
}

impl FirstVariationReport {
    /// Relative gap below `rel_tol`, or absolute gap below `abs_tol` when
    /// the integral itself vanishes to `abs_tol`.
    pub fn passes(&self, rel_tol: f64, abs_tol: f64) -> bool {
        if self.rhs.abs() < abs_tol {
            self.abs_gap < abs_tol
        } else {
            self.rel_gap < rel_tol
        }
    }
}

/// Runs the first-variation comparison for several deformations, sharing
/// the Euler–Lagrange field.
pub fn first_variation_checks(
    patch: &ImmersionPatch,
    deformations: &[Deformation],
    p: usize,
    opts: &VariationOptions,
) -> Result<Vec<FirstVariationReport>> {
    for d in deformations {
        if !patch.is_closed() && !d.field.vanishes_on_boundary() {
            return Err(GeometryError::Precondition(format!(
                "patch {} has boundary and the field {} does not vanish there",
                patch.name(),
                d.field.describe()
            )));
        }
    }
    let mesh = build_mesh(patch, &opts.resolution)?;
    let el = el_field(patch, &mesh, p, &opts.el)?;
    let metrics = evaluate_nodes(&mesh, |node| {
        let x = patch.jet_at(&node.u)?.value;
        patch.ambient().metric_at(x.as_slice())
    })?;
    let h = opts.t_step * patch.scale();
    deformations
        .iter()
        .map(|d| {
            let nu = evaluate_nodes(&mesh, |node| d.effective_vector(patch, &node.u))?;
            let integrand: Vec<f64> = el
                .iter()
                .zip(&nu)
                .zip(&metrics)
                .map(|((s, v), g)| (g * v).dot(&s.l))
                .collect();
            let rhs = integrate(&mesh, &integrand)?;
            let mut totals = [0.0; 4];
            for (slot, t) in totals.iter_mut().zip([-2.0 * h, -h, h, 2.0 * h]) {
                let moved = d.apply(patch, t)?;
                *slot = total_on_mesh(&moved, &build_mesh(&moved, &opts.resolution)?, p, &opts.el.gauge)?;
            }
            let lhs = (8.0 * (totals[2] - totals[1]) - (totals[3] - totals[0])) / (12.0 * h);
            let abs_gap = (lhs - rhs).abs();
            let rel_gap = abs_gap / rhs.abs().max(lhs.abs()).max(f64::MIN_POSITIVE);
            Ok(FirstVariationReport {
                p,
                lhs,
                rhs,
                abs_gap,
                rel_gap,
                t_step: h,
                field: d.field.describe(),
            })
        })
        .collect()
}

pub fn first_variation_check(
    patch: &ImmersionPatch,
    deformation: &Deformation,
    p: usize,
    opts: &VariationOptions,
) -> Result<FirstVariationReport> {
    Ok(first_variation_checks(patch, std::slice::from_ref(deformation), p, opts)?.remove(0))
}

/// Residuals of the complex-submanifold statements at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct CpnPointResiduals {
    pub u: Vec<f64>,
    /// Curvature identities `R_{iαjk} = 0`, `R_{iαjβ} = c/4(δδ + δ̄δ̄)`.
    pub curvature: f64,
    /// `θ_{iα}(e_j) = θ_{iᾱ}(ē_j) = −θ_{īα}(ē_j)`.
    pub sff_pairing: f64,
    /// `Σ_s Ω_{I_2p}(X_1, …, JX_s, …, X_2p) = 0` over random tangent tuples.
    pub relcurv_j: f64,
    /// `max_p |H^f_{2p+1}|`.
    pub h_norm: f64,
    /// `max_p |L_2p|` from the general path.
    pub l_norm: f64,
    /// `max_p |W_{2p−1} − c(n−2p)/(2(n−2p+1)) H^f_{2p−1}|`.
    pub w_identity: f64,
    /// Largest normal component of `J e_i` (zero for complex patches).
    pub j_defect: f64,
}

/// Complex-submanifold residual report over a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct CpnReport {
    pub tolerance: f64,
    pub points: Vec<CpnPointResiduals>,
    pub max: CpnPointResiduals,
    pub passed: bool,
}

/// `Ω_{I}(X_1, …, X_k)` on arbitrary tangent vectors given by frame
/// coefficients (permutation-sum convention).
fn omega_on_vectors(geom: &PointGeometry, pairs: &[usize], xs: &[DVector<f64>]) -> f64 {
    let n = geom.dim();
    let rel = &geom.relcurv;
    let k = xs.len();
    let two = |i: usize, j: usize, x: &DVector<f64>, y: &DVector<f64>| {
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                s += rel.get(i, j, a, b) * x[a] * y[b];
            }
        }
        s
    };
    let mut total = 0.0;
    for perm in (0..k).permutations(k) {
        let sign = permutation_sign(&perm) as f64;
        let mut prod = 1.0;
        for t in 0..pairs.len() / 2 {
            prod *= two(pairs[2 * t], pairs[2 * t + 1], &xs[perm[2 * t]], &xs[perm[2 * t + 1]]);
        }
        total += sign * prod;
    }
    total / 2f64.powi((pairs.len() / 2) as i32)
}

/// Residuals at one point, without checking that the patch is complex (the
/// negative control relies on this).
pub fn cpn_point_residuals(patch: &ImmersionPatch, u: &[f64], seed: u64, opts: &ElOptions) -> Result<CpnPointResiduals> {
    let c = match patch.ambient().kind() {
        AmbientKind::FubiniStudy { c, .. } => c,
        _ => {
            return Err(GeometryError::Precondition(
                "complex-submanifold checks need a Fubini–Study ambient".into(),
            ))
        }
    };
    let geom = point_geometry(patch, u, &FrameGauge::j_paired())?;
    let n = geom.dim();
    let m = geom.codim();
    let big = n + m;
    let x = geom.jet.value.as_slice();
    // J matrix in the frame: jm[(b, a)] = ⟨J e_a, e_b⟩
    let mut jm = DMatrix::zeros(big, big);
    for a in 0..big {
        let je = patch.ambient().complex_structure_at(x, &geom.frame.vectors[a])?;
        let c = geom.frame.coefficients(&geom.metric, &je);
        jm.column_mut(a).copy_from(&c);
    }
    let mut j_defect: f64 = 0.0;
    for i in 0..n {
        for a in 0..m {
            j_defect = j_defect.max(jm[(n + a, i)].abs());
        }
    }

    let mut curvature: f64 = 0.0;
    for i in 0..n {
        for a in 0..m {
            for j in 0..n {
                for k in 0..n {
                    curvature = curvature.max(rc(&geom, i, n + a, j, k).abs());
                }
                for b in 0..m {
                    let expect = 0.25
                        * c
                        * (f64::from(u8::from(i == j && a == b)) + jm[(j, i)] * jm[(n + b, n + a)]);
                    curvature = curvature.max((rc(&geom, i, n + a, j, n + b) - expect).abs());
                }
            }
        }
    }

    // J e_k = s_k e_{k^1} in the paired frame
    let s = |k: usize| if k % 2 == 0 { 1.0 } else { -1.0 };
    let mut sff_pairing: f64 = 0.0;
    for a in 0..m {
        for i in 0..n {
            for j in 0..n {
                let h = geom.sff.get(a, i, j);
                let bar_alpha = s(a) * s(j) * geom.sff.get(a ^ 1, i, j ^ 1);
                let bar_i = -s(i) * s(j) * geom.sff.get(a, i ^ 1, j ^ 1);
                sff_pairing = sff_pairing.max((h - bar_alpha).abs()).max((h - bar_i).abs());
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut relcurv_j: f64 = 0.0;
    let jt = jm.view((0, 0), (n, n)).clone_owned();
    for p in 1..=n / 2 {
        let xs: Vec<DVector<f64>> = (0..2 * p)
            .map(|_| DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng)))
            .collect();
        for pairs in (0..n).permutations(2 * p) {
            let mut total = 0.0;
            for slot in 0..2 * p {
                let mut ys = xs.clone();
                ys[slot] = &jt * &xs[slot];
                total += omega_on_vectors(&geom, &pairs, &ys);
            }
            relcurv_j = relcurv_j.max(total.abs());
        }
    }

    let mut h_norm: f64 = 0.0;
    let mut l_norm: f64 = 0.0;
    let mut w_identity: f64 = 0.0;
    let plain = point_geometry(patch, u, &opts.gauge)?;
    for p in 0..=n / 2 {
        let hv = h2p1_at(&plain.relcurv, &plain.sff, p);
        h_norm = h_norm.max(hv.iter().map(|v| v * v).sum::<f64>().sqrt());
        let el = el_from_geometry(patch, &plain, p, opts)?;
        l_norm = l_norm.max(el.l_norm);
        if p >= 1 {
            let lower = h2p1_at(&plain.relcurv, &plain.sff, p - 1);
            let factor = c * (n - 2 * p) as f64 / (2.0 * (n - 2 * p + 1) as f64);
            let mut diff = el.w.clone();
            for a in 0..m {
                diff[n + a] -= factor * lower[a];
            }
            w_identity = w_identity.max(diff.norm());
        }
    }

    Ok(CpnPointResiduals {
        u: u.to_vec(),
        curvature,
        sff_pairing,
        relcurv_j,
        h_norm,
        l_norm,
        w_identity,
        j_defect,
    })
}

/// Checks the complex-submanifold identities on every node of `mesh`.
pub fn cpn_checks(
    patch: &ImmersionPatch,
    mesh: &SubmanifoldMesh,
    tolerance: f64,
    seed: u64,
    opts: &ElOptions,
) -> Result<CpnReport> {
    if !patch.is_complex() {
        return Err(GeometryError::Precondition(format!(
            "patch {} is not flagged as a complex submanifold",
            patch.name()
        )));
    }
    cpn_residual_report(patch, mesh, tolerance, seed, opts)
}

/// [`cpn_checks`] without the complex-patch precondition.
pub fn cpn_residual_report(
    patch: &ImmersionPatch,
    mesh: &SubmanifoldMesh,
    tolerance: f64,
    seed: u64,
    opts: &ElOptions,
) -> Result<CpnReport> {
    let points = evaluate_nodes(mesh, |node| {
        cpn_point_residuals(patch, &node.u, seed.wrapping_add(node.index as u64), opts)
    })?;
    let mut max = CpnPointResiduals {
        u: vec![],
        curvature: 0.0,
        sff_pairing: 0.0,
        relcurv_j: 0.0,
        h_norm: 0.0,
        l_norm: 0.0,
        w_identity: 0.0,
        j_defect: 0.0,
    };
    for r in &points {
        max.curvature = max.curvature.max(r.curvature);
        max.sff_pairing = max.sff_pairing.max(r.sff_pairing);
        max.relcurv_j = max.relcurv_j.max(r.relcurv_j);
        max.h_norm = max.h_norm.max(r.h_norm);
        max.l_norm = max.l_norm.max(r.l_norm);
        max.w_identity = max.w_identity.max(r.w_identity);
        max.j_defect = max.j_defect.max(r.j_defect);
    }
    let passed = [max.curvature, max.sff_pairing, max.relcurv_j, max.h_norm, max.l_norm, max.w_identity]
        .iter()
        .all(|v| *v < tolerance);
    Ok(CpnReport {
        tolerance,
        points,
        max,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambient::AmbientSpace;
    use crate::immersion::{Analytic, AnalyticMap, ParamDomain};
    use crate::jet::Real;
    use std::sync::Arc;

    /// A generic embedded patch: a linear slice plus small trigonometric bends.
    struct Wavy {
        n: usize,
        big: usize,
    }
    impl AnalyticMap for Wavy {
        fn param_dim(&self) -> usize {
            self.n
        }
        fn chart_dim(&self) -> usize {
            self.big
        }
        fn eval<T: Real>(&self, u: &[T]) -> Vec<T> {
            (0..self.big)
                .map(|a| {
                    let mut acc = T::cst(0.02 * a as f64);
                    for (i, ui) in u.iter().enumerate() {
                        let w = 1.0 + 0.37 * ((a * 3 + i * 5) % 7) as f64;
                        if a == i {
                            acc = acc + *ui * 0.4;
                        }
                        acc = acc + (*ui * w + T::cst(0.1 * (a + i) as f64)).sin() * 0.06;
                    }
                    acc
                })
                .collect()
        }
    }

    fn wavy(ambient: AmbientSpace, n: usize) -> ImmersionPatch {
        let big = ambient.dim();
        ImmersionPatch::new("wavy", ambient, ParamDomain::new(vec![-1.0; n], vec![1.0; n], vec![false; n]), Arc::new(Analytic(Wavy { n, big })))
            .unwrap()
    }

    fn geom(patch: &ImmersionPatch, u: &[f64]) -> PointGeometry {
        point_geometry(patch, u, &FrameGauge::default()).unwrap()
    }

    #[test]
    fn reduced_w_and_q_match_literal_sums() {
        let cases = [
            (AmbientSpace::fubini_study(4.0, 2).unwrap(), 2, 1),
            (AmbientSpace::space_form(1.0, 5), 3, 1),
            (AmbientSpace::fubini_study(4.0, 3).unwrap(), 4, 2),
        ];
        for (amb, n, p) in cases {
            let patch = wavy(amb, n);
            let g = geom(&patch, &vec![0.13; n]);
            let w = w_vector_at(&g, p).unwrap();
            let wl = w_vector_literal(&g, p).unwrap();
            assert!((&w - &wl).amax() < 1e-10 * (1.0 + wl.amax()), "W n={n} p={p}: {w} vs {wl}");
            assert!(wl.amax() > 1e-3);
            let q = q_tensor_at(&g, p).unwrap();
            let ql = q_tensor_literal(&g, p).unwrap();
            assert!((&q - &ql).amax() < 1e-10 * (1.0 + ql.amax()), "Q n={n} p={p}");
        }
    }

    #[test]
    fn space_form_w_is_twice_c_times_lower_mean_curvature() {
        let c = -0.7;
        let patch = wavy(AmbientSpace::space_form(c, 4), 3);
        let g = geom(&patch, &[0.2, -0.1, 0.3]);
        let w = w_vector_at(&g, 1).unwrap();
        let h1 = h2p1_at(&g.relcurv, &g.sff, 0);
        for i in 0..3 {
            assert!(w[i].abs() < 1e-10);
        }
        assert!((w[3] - 2.0 * c * h1[0]).abs() < 1e-9);
        assert!(q_tensor_at(&g, 1).unwrap().amax() < 1e-10);
    }

    #[test]
    fn general_path_matches_space_form_shortcut() {
        let patch = wavy(AmbientSpace::space_form(1.0, 5), 4);
        let u = [0.1, -0.2, 0.05, 0.3];
        let g = geom(&patch, &u);
        for p in 0..=2 {
            let s = el_operator_at(&patch, &u, p, &ElOptions::default()).unwrap();
            let short = el_spaceform_at(patch.ambient().kind(), &g.relcurv, &g.sff, p).unwrap();
            let coeffs = g.frame.coefficients(&g.metric, &s.l);
            for i in 0..4 {
                assert!(coeffs[i].abs() < 1e-8, "tangent part p={p}");
            }
            for a in 0..1 {
                assert!((coeffs[4 + a] - short[a]).abs() < 1e-8, "p={p}: {} vs {}", coeffs[4 + a], short[a]);
            }
        }
    }

    #[test]
    fn shortcut_refuses_complex_projective_ambient() {
        let patch = wavy(AmbientSpace::fubini_study(4.0, 2).unwrap(), 2);
        let g = geom(&patch, &[0.0, 0.0]);
        assert!(matches!(
            el_spaceform_at(patch.ambient().kind(), &g.relcurv, &g.sff, 1),
            Err(GeometryError::Precondition(_))
        ));
    }

    #[test]
    fn el_operator_does_not_depend_on_the_frame_gauge() {
        let patch = wavy(AmbientSpace::fubini_study(4.0, 2).unwrap(), 2);
        let u = [0.25, -0.4];
        let a = el_operator_at(&patch, &u, 1, &ElOptions::default()).unwrap();
        let opts = ElOptions {
            gauge: FrameGauge::with_pivot(vec![1, 0]),
            ..ElOptions::default()
        };
        let b = el_operator_at(&patch, &u, 1, &opts).unwrap();
        assert!(a.qtilde.amax() > 1e-4);
        assert!((&a.l - &b.l).amax() < 1e-7, "{} vs {}", a.l, b.l);
    }

    #[test]
    fn stencil_shrinks_near_the_edge_and_fails_on_it() {
        let patch = wavy(AmbientSpace::fubini_study(4.0, 2).unwrap(), 2);
        assert!(qtilde_at(&patch, &[1.0 - 1e-4, 0.0], 1, &ElOptions::default()).is_ok());
        // a shrunken step still differentiates accurately
        let u = [1.0 - 1e-2, 0.0];
        let coarse = qtilde_at(&patch, &u, 1, &ElOptions::default()).unwrap();
        let fine = qtilde_at(&patch, &u, 1, &ElOptions { stencil_step: 4e-5, ..ElOptions::default() }).unwrap();
        assert!((coarse - fine).amax() < 1e-6);
        let r = qtilde_at(&patch, &[1.0 - 1e-7, 0.0], 1, &ElOptions::default());
        assert!(matches!(r, Err(GeometryError::Stencil { axis: 0, .. })));
    }

    #[test]
    fn p_out_of_range_is_a_precondition_error() {
        let patch = wavy(AmbientSpace::euclidean(3), 2);
        let g = geom(&patch, &[0.0, 0.0]);
        assert!(w_vector_at(&g, 2).is_err());
        assert!(q_tensor_at(&g, 2).is_err());
    }

    struct ComplexLine;
    impl AnalyticMap for ComplexLine {
        fn param_dim(&self) -> usize {
            2
        }
        fn chart_dim(&self) -> usize {
            4
        }
        fn eval<T: Real>(&self, u: &[T]) -> Vec<T> {
            // z ↦ (z, 0.3 z + 0.1)
            vec![u[0], u[1], u[0] * 0.3 + T::cst(0.1), u[1] * 0.3]
        }
    }

    #[test]
    fn complex_line_satisfies_the_complex_identities() {
        let patch = ImmersionPatch::new(
            "line",
            AmbientSpace::fubini_study(4.0, 2).unwrap(),
            ParamDomain::new(vec![-0.5; 2], vec![0.5; 2], vec![false; 2]),
            Arc::new(Analytic(ComplexLine)),
        )
        .unwrap();
        let r = cpn_point_residuals(&patch, &[0.1, 0.2], 7, &ElOptions::default()).unwrap();
        assert!(r.curvature < 1e-7, "{r:?}");
        assert!(r.sff_pairing < 1e-7, "{r:?}");
        assert!(r.relcurv_j < 1e-7, "{r:?}");
        assert!(r.h_norm < 1e-7 && r.l_norm < 1e-6 && r.w_identity < 1e-7, "{r:?}");
        let mesh = build_mesh(&patch, &[4]).unwrap();
        assert!(matches!(
            cpn_checks(&patch, &mesh, 1e-5, 1, &ElOptions::default()),
            Err(GeometryError::Precondition(_))
        ));
        let flagged = patch.with_complex(true);
        let rep = cpn_checks(&flagged, &mesh, 1e-5, 1, &ElOptions::default()).unwrap();
        assert!(rep.passed, "{:?}", rep.max);
    }

    #[test]
    fn generic_surface_in_cp2_fails_the_complex_identities() {
        let patch = wavy(AmbientSpace::fubini_study(4.0, 2).unwrap(), 2);
        let r = cpn_point_residuals(&patch, &[0.1, 0.2], 7, &ElOptions::default()).unwrap();
        assert!(r.sff_pairing > 1e-3 || r.curvature > 1e-3);
    }
}
