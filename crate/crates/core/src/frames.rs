//! Adapted orthonormal frames, second fundamental forms and relative
//! curvature components.

use nalgebra::{DMatrix, DVector};

use crate::ambient::{apply_j, AmbientSpace, Christoffels, CurvatureTensor};
use crate::error::{GeometryError, Result};
use crate::immersion::{induced_metric, ImmersionPatch, PointJet};

/// A normal seed is accepted when at least this fraction of its length
/// survives projection onto the orthogonal complement of the frame so far.
const SEED_ACCEPT: f64 = 0.25;
/// Below this surviving fraction a seed is useless even as a last resort.
const SEED_BREAKDOWN: f64 = 1e-8;

/// Choices that fix the frame gauge at a point.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameGauge {
    /// Order in which coordinate tangent vectors enter Gram–Schmidt.
    /// `None` means `0..n`.
    pub pivot: Option<Vec<usize>>,
    /// Standard-basis indices used to complete the normal frame. `None`
    /// scans `0..n+m` and keeps the first well-conditioned seeds.
    pub seeds: Option<Vec<usize>>,
    /// Build `J`-paired frames `e_{2k+1} = J e_{2k}` (complex ambients only).
    pub j_paired: bool,
}

impl FrameGauge {
    pub fn with_pivot(pivot: Vec<usize>) -> Self {
        FrameGauge {
            pivot: Some(pivot),
            ..Default::default()
        }
    }

    pub fn j_paired() -> Self {
        FrameGauge {
            j_paired: true,
            ..Default::default()
        }
    }
}

/// Orthonormal frame `e_1..e_{n+m}` at a point, tangent vectors first.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedFrame {
    pub u: Vec<f64>,
    pub point: DVector<f64>,
    n: usize,
    /// Chart components of `e_A`.
    pub vectors: Vec<DVector<f64>>,
    /// `e_i = Σ_a E[(i, a)] ∂f/∂u_a`.
    pub tangent_coeffs: DMatrix<f64>,
    /// Standard-basis seeds used for the normal frame, in order.
    pub normal_seeds: Vec<usize>,
    /// `max |⟨e_A, e_B⟩ − δ_AB|`.
    pub gram_residual: f64,
}

impl AdaptedFrame {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn codim(&self) -> usize {
        self.vectors.len() - self.n
    }

    pub fn tangent(&self, i: usize) -> &DVector<f64> {
        &self.vectors[i]
    }

    /// Normal vector number `alpha` (0-based within the normal block).
    pub fn normal(&self, alpha: usize) -> &DVector<f64> {
        &self.vectors[self.n + alpha]
    }

    /// `Σ_A coeffs[A] e_A` in chart components.
    pub fn to_chart(&self, coeffs: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.point.len());
        for (c, e) in coeffs.iter().zip(&self.vectors) {
            out.axpy(*c, e, 1.0);
        }
        out
    }

    /// Frame components `⟨v, e_A⟩` of a chart vector.
    pub fn coefficients(&self, g: &DMatrix<f64>, v: &DVector<f64>) -> DVector<f64> {
        let gv = g * v;
        DVector::from_iterator(self.vectors.len(), self.vectors.iter().map(|e| gv.dot(e)))
    }
}

fn g_inner(g: &DMatrix<f64>, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (g * b).dot(a)
}

/// Projects `v` off the given orthonormal vectors twice (classical
/// Gram–Schmidt with re-orthogonalization).
fn project_out(g: &DMatrix<f64>, v: &DVector<f64>, basis: &[DVector<f64>]) -> DVector<f64> {
    let mut w = v.clone();
    for _ in 0..2 {
        for e in basis {
            let c = g_inner(g, &w, e);
            w.axpy(-c, e, 1.0);
        }
    }
    w
}

fn degenerate(u: &[f64], reason: String) -> GeometryError {
    GeometryError::FrameDegenerate {
        u: u.to_vec(),
        reason,
    }
}

/// Builds the adapted frame from a jet and the ambient metric at its point.
pub fn frame_from_jet(
    ambient: &AmbientSpace,
    jet: &PointJet,
    g: &DMatrix<f64>,
    u: &[f64],
    gauge: &FrameGauge,
) -> Result<AdaptedFrame> {
    let n = jet.param_dim();
    let big = jet.value.len();
    let pivot: Vec<usize> = gauge.pivot.clone().unwrap_or_else(|| (0..n).collect());
    if pivot.len() != n || (0..n).any(|a| !pivot.contains(&a)) {
        return Err(GeometryError::Precondition(format!(
            "pivot order {pivot:?} is not a permutation of 0..{n}"
        )));
    }
    if gauge.j_paired && (!ambient.is_complex() || n % 2 != 0) {
        return Err(GeometryError::Precondition(
            "J-paired frames need a complex ambient and even intrinsic dimension".into(),
        ));
    }

    let mut vectors: Vec<DVector<f64>> = Vec::with_capacity(big);
    if gauge.j_paired {
        let mut candidates = pivot.iter().map(|&a| jet.first[a].clone());
        while vectors.len() < n {
            let v = candidates
                .next()
                .ok_or_else(|| degenerate(u, "tangent space exhausted before J-pairing".into()))?;
            let w = project_out(g, &v, &vectors);
            let norm = g_inner(g, &w, &w).sqrt();
            if norm <= SEED_ACCEPT * g_inner(g, &v, &v).sqrt() {
                continue;
            }
            let e = w / norm;
            let je = project_out(g, &apply_j(&e), &vectors);
            // project J e onto the tangent space (exactly tangent for complex patches)
            let jt = tangent_projection(g, &jet.first, &je);
            let jt = project_out(g, &jt, std::slice::from_ref(&e));
            let jn = g_inner(g, &jt, &jt).sqrt();
            if jn < SEED_BREAKDOWN {
                return Err(degenerate(u, "J e has no tangent component".into()));
            }
            vectors.push(e);
            vectors.push(jt / jn);
        }
    } else {
        for &a in &pivot {
            let v = &jet.first[a];
            let w = project_out(g, v, &vectors);
            let norm = g_inner(g, &w, &w).sqrt();
            if !(norm > SEED_BREAKDOWN * g_inner(g, v, v).sqrt()) {
                return Err(GeometryError::ImmersionDegenerate {
                    u: u.to_vec(),
                    reason: format!("coordinate vector {a} dependent on the previous ones"),
                });
            }
            vectors.push(w / norm);
        }
    }

    let mut seeds_used = Vec::with_capacity(big - n);
    let add_normal = |vectors: &mut Vec<DVector<f64>>, s: usize, strict: bool| -> Result<bool> {
        let seed = DVector::from_fn(big, |k, _| if k == s { 1.0 } else { 0.0 });
        let w = project_out(g, &seed, vectors);
        let norm = g_inner(g, &w, &w).sqrt();
        let base = g_inner(g, &seed, &seed).sqrt();
        if norm < SEED_BREAKDOWN * base || (!strict && norm < SEED_ACCEPT * base) {
            return Ok(false);
        }
        let e = w / norm;
        if gauge.j_paired {
            let je = project_out(g, &apply_j(&e), vectors);
            let je = project_out(g, &je, std::slice::from_ref(&e));
            let jn = g_inner(g, &je, &je).sqrt();
            if jn < SEED_BREAKDOWN {
                return Ok(false);
            }
            vectors.push(e);
            vectors.push(je / jn);
        } else {
            vectors.push(e);
        }
        Ok(true)
    };
    match &gauge.seeds {
        Some(seeds) => {
            for &s in seeds {
                if s >= big || !add_normal(&mut vectors, s, true)? {
                    return Err(degenerate(u, format!("normal seed {s} is dependent")));
                }
                seeds_used.push(s);
            }
            if vectors.len() != big {
                return Err(degenerate(u, "seed list does not complete the frame".into()));
            }
        }
        None => {
            for strict in [false, true] {
                for s in 0..big {
                    if vectors.len() == big {
                        break;
                    }
                    if seeds_used.contains(&s) {
                        continue;
                    }
                    if add_normal(&mut vectors, s, strict)? {
                        seeds_used.push(s);
                    }
                }
            }
            if vectors.len() != big {
                return Err(degenerate(u, "normal completion broke down".into()));
            }
        }
    }

    let gram_residual = gram_residual(g, &vectors);
    let tangent_coeffs = tangent_coefficients(g, &jet.first, &vectors[..n]);
    Ok(AdaptedFrame {
        u: u.to_vec(),
        point: jet.value.clone(),
        n,
        vectors,
        tangent_coeffs,
        normal_seeds: seeds_used,
        gram_residual,
    })
}

fn gram_residual(g: &DMatrix<f64>, vectors: &[DVector<f64>]) -> f64 {
    let mut r: f64 = 0.0;
    for (a, ea) in vectors.iter().enumerate() {
        let gea = g * ea;
        for (b, eb) in vectors.iter().enumerate() {
            let d = if a == b { 1.0 } else { 0.0 };
            r = r.max((gea.dot(eb) - d).abs());
        }
    }
    r
}

/// Coordinates `c` with `v ≈ Σ_a c_a ∂_a f` (least squares under `g`).
fn tangent_coords(g: &DMatrix<f64>, first: &[DVector<f64>], v: &DVector<f64>) -> DVector<f64> {
    let gram = induced_metric(g, first);
    let rhs = DVector::from_iterator(first.len(), first.iter().map(|fa| g_inner(g, fa, v)));
    gram.cholesky()
        .map(|c| c.solve(&rhs))
        .unwrap_or_else(|| DVector::zeros(first.len()))
}

fn tangent_projection(g: &DMatrix<f64>, first: &[DVector<f64>], v: &DVector<f64>) -> DVector<f64> {
    let c = tangent_coords(g, first, v);
    let mut out = DVector::zeros(v.len());
    for (ca, fa) in c.iter().zip(first) {
        out.axpy(*ca, fa, 1.0);
    }
    out
}

fn tangent_coefficients(
    g: &DMatrix<f64>,
    first: &[DVector<f64>],
    tangent: &[DVector<f64>],
) -> DMatrix<f64> {
    let n = first.len();
    let mut e = DMatrix::zeros(n, n);
    for (i, ei) in tangent.iter().enumerate() {
        let c = tangent_coords(g, first, ei);
        e.row_mut(i).copy_from(&c.transpose());
    }
    e
}

/// Adapted frame at `u` with the default gauge.
pub fn adapted_frame_at(patch: &ImmersionPatch, u: &[f64]) -> Result<AdaptedFrame> {
    adapted_frame_with(patch, u, &FrameGauge::default())
}

pub fn adapted_frame_with(
    patch: &ImmersionPatch,
    u: &[f64],
    gauge: &FrameGauge,
) -> Result<AdaptedFrame> {
    let jet = patch.jet_at(u)?;
    let g = patch.ambient().metric_at(jet.value.as_slice())?;
    frame_from_jet(patch.ambient(), &jet, &g, u, gauge)
}

/// Second fundamental form components `h^α_ij = ⟨∇_{e_i} e_j, e_α⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct SffTensor {
    n: usize,
    m: usize,
    data: Vec<f64>,
}

impl SffTensor {
    pub fn zeros(n: usize, m: usize) -> Self {
        SffTensor {
            n,
            m,
            data: vec![0.0; n * n * m],
        }
    }

    /// From one symmetric `n×n` matrix per normal direction.
    pub fn from_matrices(mats: &[DMatrix<f64>]) -> Self {
        let m = mats.len();
        let n = mats.first().map_or(0, |a| a.nrows());
        let mut s = SffTensor::zeros(n, m);
        for (alpha, a) in mats.iter().enumerate() {
            for i in 0..n {
                for j in 0..n {
                    s.set(alpha, i, j, a[(i, j)]);
                }
            }
        }
        s
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn codim(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, alpha: usize, i: usize, j: usize) -> f64 {
        self.data[(alpha * self.n + i) * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, alpha: usize, i: usize, j: usize, v: f64) {
        let n = self.n;
        self.data[(alpha * n + i) * n + j] = v;
    }

    pub fn matrix(&self, alpha: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(alpha, i, j))
    }

    /// `max |h^α_ij − h^α_ji|`.
    pub fn symmetry_defect(&self) -> f64 {
        let mut r: f64 = 0.0;
        for a in 0..self.m {
            for i in 0..self.n {
                for j in 0..self.n {
                    r = r.max((self.get(a, i, j) - self.get(a, j, i)).abs());
                }
            }
        }
        r
    }

    /// `Σ_α ξ_α h^α` without the unit-length check.
    pub fn contract_normal(&self, xi: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| {
            xi.iter().enumerate().map(|(a, x)| x * self.get(a, i, j)).sum()
        })
    }

    /// Rotates tangent indices by `o` (rows are new frame vectors in old
    /// components) and normal indices by `q`.
    pub fn rotated(&self, o: &DMatrix<f64>, q: &DMatrix<f64>) -> SffTensor {
        let mut out = SffTensor::zeros(self.n, self.m);
        let mats: Vec<DMatrix<f64>> = (0..self.m).map(|a| o * self.matrix(a) * o.transpose()).collect();
        for b in 0..self.m {
            for i in 0..self.n {
                for j in 0..self.n {
                    let v: f64 = (0..self.m).map(|a| q[(b, a)] * mats[a][(i, j)]).sum();
                    out.set(b, i, j, v);
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `(S_ξ)_ij = Σ_α ξ_α h^α_ij` for a unit normal `ξ`.
pub fn shape_operator(sff: &SffTensor, xi: &[f64]) -> Result<DMatrix<f64>> {
    if xi.len() != sff.codim() {
        return Err(GeometryError::Precondition(format!(
            "normal direction has {} components, codimension is {}",
            xi.len(),
            sff.codim()
        )));
    }
    let norm = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(GeometryError::Precondition(format!("normal direction has length {norm}")));
    }
    Ok(sff.contract_normal(xi))
}

/// Second fundamental form from jets, frame and Christoffels.
pub fn second_fundamental_form(
    jet: &PointJet,
    g: &DMatrix<f64>,
    gamma: &Christoffels,
    frame: &AdaptedFrame,
) -> SffTensor {
    let n = frame.dim();
    let m = frame.codim();
    // T_ab = ∂_a∂_b f + Γ(∂_a f, ∂_b f), projected on each normal
    let gn: Vec<DVector<f64>> = (0..m).map(|a| g * frame.normal(a)).collect();
    let mut t = vec![vec![vec![0.0; n]; n]; m];
    for a in 0..n {
        for b in a..n {
            let tab = &jet.second[a][b] + gamma.contract(&jet.first[a], &jet.first[b]);
            for (alpha, gna) in gn.iter().enumerate() {
                let v = gna.dot(&tab);
                t[alpha][a][b] = v;
                t[alpha][b][a] = v;
            }
        }
    }
    let e = &frame.tangent_coeffs;
    let mut sff = SffTensor::zeros(n, m);
    for (alpha, ta) in t.iter().enumerate() {
        let tm = DMatrix::from_fn(n, n, |a, b| ta[a][b]);
        let h = e * tm * e.transpose();
        for i in 0..n {
            for j in 0..n {
                sff.set(alpha, i, j, h[(i, j)]);
            }
        }
    }
    sff
}

/// `Ω[i][j][k][l]`: the 2-form `Ω_ij` evaluated on `(e_k, e_l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelCurvTensor {
    n: usize,
    data: Vec<f64>,
}

impl RelCurvTensor {
    pub fn zeros(n: usize) -> Self {
        RelCurvTensor {
            n,
            data: vec![0.0; n.pow(4)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let n = self.n;
        self.data[((i * n + j) * n + k) * n + l]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, k: usize, l: usize, v: f64) {
        let n = self.n;
        self.data[((i * n + j) * n + k) * n + l] = v;
    }

    /// `Ω^M = Ω + R_ijkl` with the tangent block of frame curvature components.
    pub fn plus_ambient(&self, curvature: &CurvatureTensor) -> RelCurvTensor {
        let n = self.n;
        let mut out = self.clone();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        out.set(i, j, k, l, self.get(i, j, k, l) + curvature.get(i, j, k, l));
                    }
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `Ω_ijkl = Σ_α (h^α_ik h^α_jl − h^α_il h^α_jk)`.
pub fn relative_curvature(sff: &SffTensor) -> RelCurvTensor {
    let n = sff.dim();
    let mut out = RelCurvTensor::zeros(n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let v: f64 = (0..sff.codim())
                        .map(|a| sff.get(a, i, k) * sff.get(a, j, l) - sff.get(a, i, l) * sff.get(a, j, k))
                        .sum();
                    out.set(i, j, k, l, v);
                }
            }
        }
    }
    out
}

/// Everything the curvature machinery needs at one parameter point.
#[derive(Debug, Clone)]
pub struct PointGeometry {
    pub jet: PointJet,
    pub metric: DMatrix<f64>,
    pub christoffels: Christoffels,
    pub frame: AdaptedFrame,
    pub sff: SffTensor,
    pub relcurv: RelCurvTensor,
    /// Ambient `R_ABCD` on the frame vectors.
    pub curvature: CurvatureTensor,
}

impl PointGeometry {
    pub fn dim(&self) -> usize {
        self.frame.dim()
    }

    pub fn codim(&self) -> usize {
        self.frame.codim()
    }

    /// `Ω^M_ijkl`.
    pub fn intrinsic_curvature(&self) -> RelCurvTensor {
        self.relcurv.plus_ambient(&self.curvature)
    }

    /// Metric length of a chart vector at this point.
    pub fn norm(&self, v: &DVector<f64>) -> f64 {
        g_inner(&self.metric, v, v).max(0.0).sqrt()
    }
}

pub fn point_geometry(patch: &ImmersionPatch, u: &[f64], gauge: &FrameGauge) -> Result<PointGeometry> {
    let jet = patch.jet_at(u)?;
    let ambient = patch.ambient();
    let x = jet.value.as_slice();
    let metric = ambient.metric_at(x)?;
    let christoffels = ambient.christoffels_at(x)?;
    let frame = frame_from_jet(ambient, &jet, &metric, u, gauge)?;
    let sff = second_fundamental_form(&jet, &metric, &christoffels, &frame);
    let relcurv = relative_curvature(&sff);
    let curvature = ambient.curvature_components(x, &frame.vectors)?;
    Ok(PointGeometry {
        jet,
        metric,
        christoffels,
        frame,
        sff,
        relcurv,
        curvature,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::immersion::{Analytic, AnalyticMap, ParamDomain};
    use crate::jet::Real;
    use std::sync::Arc;

    struct LatLong(f64);
    impl AnalyticMap for LatLong {
        fn param_dim(&self) -> usize {
            2
        }
        fn chart_dim(&self) -> usize {
            3
        }
        fn eval<T: Real>(&self, u: &[T]) -> Vec<T> {
            let r = self.0;
            vec![
                u[0].sin() * u[1].cos() * r,
                u[0].sin() * u[1].sin() * r,
                u[0].cos() * r,
            ]
        }
    }

    fn sphere(r: f64) -> ImmersionPatch {
        ImmersionPatch::new(
            "sphere",
            AmbientSpace::euclidean(3),
            ParamDomain::new(vec![0.0, 0.0], vec![std::f64::consts::PI, 2.0 * std::f64::consts::PI], vec![false, true]),
            Arc::new(Analytic(LatLong(r))),
        )
        .unwrap()
    }

    #[test]
    fn sphere_frame_is_orthonormal_with_radial_normal() {
        let p = sphere(2.0);
        let f = adapted_frame_at(&p, &[0.9, 2.1]).unwrap();
        assert!(f.gram_residual < 1e-12);
        let radial = &f.point / f.point.norm();
        assert!((f.normal(0).dot(&radial).abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sphere_sff_is_umbilic_and_relcurv_is_gauss_curvature() {
        let r = 1.7;
        let g = point_geometry(&sphere(r), &[1.1, 0.3], &FrameGauge::default()).unwrap();
        let h = g.sff.matrix(0);
        let sign = h[(0, 0)].signum();
        let expected = DMatrix::identity(2, 2) * (sign / r);
        assert!((h - expected).amax() < 1e-12);
        assert!((g.relcurv.get(0, 1, 0, 1) - 1.0 / (r * r)).abs() < 1e-12);
    }

    #[test]
    fn relcurv_symmetries_hold() {
        let mats = vec![
            DMatrix::from_row_slice(3, 3, &[1.0, 0.3, -0.2, 0.3, -0.5, 0.7, -0.2, 0.7, 0.1]),
            DMatrix::from_row_slice(3, 3, &[0.2, -1.0, 0.4, -1.0, 0.9, 0.0, 0.4, 0.0, -0.3]),
        ];
        let om = relative_curvature(&SffTensor::from_matrices(&mats));
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        let v = om.get(i, j, k, l);
                        assert_eq!(v, -om.get(j, i, k, l));
                        assert_eq!(v, -om.get(i, j, l, k));
                        assert!((v - om.get(k, l, i, j)).abs() < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn pivot_permutation_conjugates_the_sff() {
        let p = sphere(1.3);
        let u = [0.7, 4.0];
        let a = point_geometry(&p, &u, &FrameGauge::default()).unwrap();
        let b = point_geometry(&p, &u, &FrameGauge::with_pivot(vec![1, 0])).unwrap();
        let ea = a.sff.matrix(0).symmetric_eigen().eigenvalues;
        let eb = b.sff.matrix(0).symmetric_eigen().eigenvalues;
        let mut ea: Vec<f64> = ea.iter().map(|x| x.abs()).collect();
        let mut eb: Vec<f64> = eb.iter().map(|x| x.abs()).collect();
        ea.sort_by(f64::total_cmp);
        eb.sort_by(f64::total_cmp);
        for (x, y) in ea.iter().zip(&eb) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_operator_checks_unit_length_and_is_linear() {
        let s = SffTensor::from_matrices(&[DMatrix::identity(2, 2), DMatrix::from_diagonal_element(2, 2, -2.0)]);
        assert!(matches!(shape_operator(&s, &[1.0, 1.0]), Err(GeometryError::Precondition(_))));
        let x = [0.6, 0.8];
        let a = shape_operator(&s, &x).unwrap();
        let b = shape_operator(&s, &[-0.6, -0.8]).unwrap();
        assert!((a + b).amax() < 1e-15);
        assert_eq!(shape_operator(&s, &[1.0, 0.0]).unwrap(), s.matrix(0));
    }

    #[test]
    fn explicit_seed_list_is_respected() {
        let p = sphere(1.0);
        let gauge = FrameGauge {
            seeds: Some(vec![1]),
            ..Default::default()
        };
        let f = adapted_frame_with(&p, &[1.0, 0.2], &gauge).unwrap();
        assert_eq!(f.normal_seeds, vec![1]);
        assert!(f.gram_residual < 1e-12);
    }
}
