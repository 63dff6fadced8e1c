//! Tube volumes (Weyl–Gray), a direct numeric tube oracle in Euclidean
//! space, austerity detection and tubular-minimality reports.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::ambient::AmbientKind;
use crate::error::{GeometryError, Result};
use crate::frames::{point_geometry, FrameGauge, SffTensor};
use crate::immersion::{evaluate_nodes, integrate, AmbientFourierField, Deformation, ImmersionPatch, SubmanifoldMesh};
use crate::invariants::{binomial, factorial, integrate_polynomial, invariant_sample, sigma_polynomial};
use crate::quadrature::{unit_sphere_volume, SphereRule};
use crate::variational::{el_spaceform_at, total_on_mesh};

/// Default tolerance on the eigenvalue pairing residual.
pub const DEFAULT_AUSTERITY_TOL: f64 = 1e-6;

/// `(cos(r√c))^a (sin(r√c)/√c)^b` with complex trigonometry; `c = 0` is the
/// limit `1 · r^b`.
fn trig_factor(c: f64, r: f64, a: usize, b: usize) -> Complex64 {
    if c == 0.0 {
        return Complex64::new(r.powi(b as i32), 0.0);
    }
    let s = Complex64::new(c, 0.0).sqrt();
    let z = s * r;
    z.cos().powu(a as u32) * (z.sin() / s).powu(b as u32)
}

/// Weyl–Gray coefficient of `M_2p` in the tube volume at radius `r`.
pub fn weyl_gray_coefficient(p: usize, n: usize, m: usize, c: f64, r: f64) -> f64 {
    let k = m + 2 * p - 1;
    let lead = unit_sphere_volume(k) / (4f64.powi(p as i32) * PI.powi(p as i32) * factorial(p))
        * binomial(n, 2 * p)
        * factorial(2 * p);
    let t = trig_factor(c, r, n - 2 * p, k) * lead;
    assert!(
        t.im.abs() <= 1e-12 * t.re.abs().max(1.0),
        "complex residue {} in tube coefficient",
        t.im
    );
    t.re
}

/// Volume of the tubular hypersurface at distance `r` from the totals
/// `totals[p] = M_2p(f)`.
pub fn weyl_gray_volume(totals: &[f64], n: usize, m: usize, c: f64, r: f64) -> f64 {
    totals
        .iter()
        .enumerate()
        .map(|(p, mp)| weyl_gray_coefficient(p, n, m, c, r) * mp)
        .sum()
}

/// Largest `r` for which the numeric oracle is trusted at a point:
/// `1/√(Σ_β ‖h^β‖²)`, a lower bound on the focal distance.
fn focal_bound(sff: &SffTensor) -> f64 {
    let s: f64 = (0..sff.codim())
        .map(|a| {
            let e = SymmetricEigen::new(sff.matrix(a)).eigenvalues;
            e.amax().powi(2)
        })
        .sum();
    if s == 0.0 {
        f64::INFINITY
    } else {
        1.0 / s.sqrt()
    }
}

/// Focal-window bound over the whole mesh.
pub fn focal_radius(patch: &ImmersionPatch, mesh: &SubmanifoldMesh) -> Result<f64> {
    let b = evaluate_nodes(mesh, |node| {
        let g = point_geometry(patch, &node.u, &FrameGauge::default())?;
        Ok(focal_bound(&g.sff))
    })?;
    Ok(b.into_iter().fold(f64::INFINITY, f64::min))
}

fn tube_density(sff: &SffTensor, r: f64) -> f64 {
    let n = sff.dim();
    let m = sff.codim();
    let det_at = |xi: &[f64]| {
        let s = sff.contract_normal(xi);
        (DMatrix::identity(n, n) - s * r).determinant()
    };
    let integral: f64 = match SphereRule::exact_for_degree(m, n) {
        Some(rule) => rule.points.iter().zip(&rule.weights).map(|(xi, w)| w * det_at(xi)).sum(),
        // det(I − rS_ξ) = Σ_k (−r)^k σ_k(S_ξ), integrated monomial by monomial
        None => (0..=n)
            .map(|k| (-r).powi(k as i32) * integrate_polynomial(&sigma_polynomial(sff, k), None))
            .sum(),
    };
    r.powi(m as i32 - 1) * integral
}

/// Direct tube-hypersurface volume `∫_M ∫_{S^{m−1}} r^{m−1} det(I − rS_ξ)`.
pub fn tube_volume_numeric(patch: &ImmersionPatch, mesh: &SubmanifoldMesh, r: f64) -> Result<f64> {
    if patch.ambient().kind() != AmbientKind::Euclidean {
        return Err(GeometryError::Unsupported(
            "numeric tube volume is implemented for Euclidean ambients only".into(),
        ));
    }
    let rows = evaluate_nodes(mesh, |node| {
        let g = point_geometry(patch, &node.u, &FrameGauge::default())?;
        Ok((focal_bound(&g.sff), g.sff))
    })?;
    let max_radius = rows.iter().map(|(b, _)| *b).fold(f64::INFINITY, f64::min);
    if r <= 0.0 || r >= max_radius {
        return Err(GeometryError::FocalRadius { radius: r, max_radius });
    }
    let density: Vec<f64> = rows.iter().map(|(_, s)| tube_density(s, r)).collect();
    integrate(mesh, &density)
}

/// `M_2p(f)` for `p = 0..=⌊n/2⌋`.
pub fn total_invariants(patch: &ImmersionPatch, mesh: &SubmanifoldMesh) -> Result<Vec<f64>> {
    (0..=patch.dim() / 2)
        .map(|p| total_on_mesh(patch, mesh, p, &FrameGauge::default()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TubeReport {
    pub radii: Vec<f64>,
    pub totals: Vec<f64>,
    pub formula: Vec<f64>,
    /// Only for Euclidean ambients.
    pub numeric: Option<Vec<f64>>,
    /// `contributions[i][p]`: the `M_2p` term at `radii[i]`.
    pub contributions: Vec<Vec<f64>>,
    /// `(k, C_k)` for the sphere volumes entering the formula.
    pub sphere_constants: Vec<(usize, f64)>,
    pub focal_radius: f64,
}

impl TubeReport {
    pub fn max_relative_gap(&self) -> Option<f64> {
        self.numeric.as_ref().map(|num| {
            num.iter()
                .zip(&self.formula)
                .map(|(a, b)| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE))
                .fold(0.0, f64::max)
        })
    }
}

fn curvature_constant(patch: &ImmersionPatch) -> Result<f64> {
    match patch.ambient().kind() {
        AmbientKind::Euclidean => Ok(0.0),
        AmbientKind::SpaceForm { c } => Ok(c),
        AmbientKind::FubiniStudy { .. } => Err(GeometryError::Precondition(
            "tube formula needs a real space form ambient".into(),
        )),
    }
}

/// Formula (and, in Euclidean space, numeric) tube volumes at `radii`.
pub fn tube_report(patch: &ImmersionPatch, mesh: &SubmanifoldMesh, radii: &[f64]) -> Result<TubeReport> {
    let c = curvature_constant(patch)?;
    let n = patch.dim();
    let m = patch.codim();
    let totals = total_invariants(patch, mesh)?;
    let focal = focal_radius(patch, mesh)?;
    let contributions: Vec<Vec<f64>> = radii
        .iter()
        .map(|&r| {
            totals
                .iter()
                .enumerate()
                .map(|(p, mp)| weyl_gray_coefficient(p, n, m, c, r) * mp)
                .collect()
        })
        .collect();
    let formula = contributions.iter().map(|row| row.iter().sum()).collect();
    let numeric = if c == 0.0 && patch.ambient().kind() == AmbientKind::Euclidean {
        Some(radii.iter().map(|&r| tube_volume_numeric(patch, mesh, r)).collect::<Result<Vec<_>>>()?)
    } else {
        None
    };
    let sphere_constants = (0..=n / 2)
        .map(|p| (m + 2 * p - 1, unit_sphere_volume(m + 2 * p - 1)))
        .collect();
    Ok(TubeReport {
        radii: radii.to_vec(),
        totals,
        formula,
        numeric,
        contributions,
        sphere_constants,
        focal_radius: focal,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AusterityReport {
    pub samples_per_point: usize,
    pub sample_count: usize,
    pub max_pairing_residual: f64,
    pub tolerance: f64,
    /// `min_node (−1)^p K^f_2p`, indexed by `p`.
    pub signed_k_min: Vec<f64>,
    /// `max_node |H^f_{2p+1}|`, indexed by `p`.
    pub h_odd_max: Vec<f64>,
    pub austere: bool,
}

fn random_unit(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..m).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Eigenvalue pairing residual `max_k |λ_k + λ_{n+1−k}|` of `S_ξ`.
pub fn pairing_residual(sff: &SffTensor, xi: &[f64]) -> f64 {
    let mut e: Vec<f64> = SymmetricEigen::new(sff.contract_normal(xi)).eigenvalues.iter().copied().collect();
    e.sort_by(f64::total_cmp);
    let n = e.len();
    (0..n).map(|k| (e[k] + e[n - 1 - k]).abs()).fold(0.0, f64::max)
}

/// Samples unit normals at each node and tests whether principal curvatures
/// come in opposite pairs.
pub fn austerity_check(
    patch: &ImmersionPatch,
    mesh: &SubmanifoldMesh,
    samples: usize,
    seed: u64,
    tolerance: f64,
) -> Result<AusterityReport> {
    let n = patch.dim();
    let m = patch.codim();
    let rows = evaluate_nodes(mesh, |node| {
        let g = point_geometry(patch, &node.u, &FrameGauge::default())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (node.index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let residual = (0..samples)
            .map(|_| pairing_residual(&g.sff, &random_unit(&mut rng, m)))
            .fold(0.0, f64::max);
        let inv = invariant_sample(&g)?;
        Ok((residual, inv))
    })?;
    let max_pairing_residual = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let signed_k_min = (0..=n / 2)
        .map(|p| {
            let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
            rows.iter().map(|r| sign * r.1.k[p]).fold(f64::INFINITY, f64::min)
        })
        .collect();
    let h_odd_max = (0..=n / 2)
        .map(|p| rows.iter().map(|r| r.1.h_norm(p)).fold(0.0, f64::max))
        .collect();
    Ok(AusterityReport {
        samples_per_point: samples,
        sample_count: samples * mesh.len(),
        max_pairing_residual,
        tolerance,
        signed_k_min,
        h_odd_max,
        austere: max_pairing_residual < tolerance,
    })
}

/// Settings of [`tubular_minimality_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct TubularOptions {
    pub seed: u64,
    /// Tolerance on the pointwise norms of conditions (ii)–(iv).
    pub norm_tol: f64,
    /// Tolerance on the tube-volume derivatives of condition (i).
    pub derivative_tol: f64,
    /// Radii as fractions of the tube window.
    pub radius_fractions: [f64; 3],
    /// Deformation step relative to the patch scale.
    pub t_step: f64,
    pub field_amplitude: f64,
}

impl Default for TubularOptions {
    fn default() -> Self {
        TubularOptions {
            seed: 0,
            norm_tol: 1e-5,
            derivative_tol: 1e-4,
            radius_fractions: [0.1, 0.2, 0.3],
            t_step: 1e-3,
            field_amplitude: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TubularMinimalityReport {
    pub radii: Vec<f64>,
    pub volume_derivatives: Vec<f64>,
    pub h_f_max: Vec<f64>,
    pub h_m_max: Vec<f64>,
    pub l_max: Vec<f64>,
    pub norm_tol: f64,
    pub derivative_tol: f64,
    /// Conditions (i) tube-critical, (ii) `L_2p = 0`, (iii) `H^f = 0`,
    /// (iv) `H^M = 0`.
    pub flags: [bool; 4],
    pub unanimous: bool,
    pub field: String,
}

/// Evaluates the four equivalent tubular-minimality conditions.
pub fn tubular_minimality_report(
    patch: &ImmersionPatch,
    mesh: &SubmanifoldMesh,
    opts: &TubularOptions,
) -> Result<TubularMinimalityReport> {
    let c = curvature_constant(patch)?;
    let n = patch.dim();
    let m = patch.codim();
    let kind = patch.ambient().kind();
    let ps = 0..=n / 2;
    let rows = evaluate_nodes(mesh, |node| {
        let g = point_geometry(patch, &node.u, &FrameGauge::default())?;
        let inv = invariant_sample(&g)?;
        let l: Vec<f64> = ps
            .clone()
            .map(|p| {
                el_spaceform_at(kind, &g.relcurv, &g.sff, p).map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
            })
            .collect::<Result<_>>()?;
        Ok((inv, l, focal_bound(&g.sff)))
    })?;
    let h_f_max: Vec<f64> = ps.clone().map(|p| rows.iter().map(|r| r.0.h_norm(p)).fold(0.0, f64::max)).collect();
    let h_m_max: Vec<f64> =
        ps.clone().map(|p| rows.iter().map(|r| r.0.h_intrinsic_norm(p)).fold(0.0, f64::max)).collect();
    let l_max: Vec<f64> = ps.clone().map(|p| rows.iter().map(|r| r.1[p]).fold(0.0, f64::max)).collect();

    let mut window = rows.iter().map(|r| r.2).fold(f64::INFINITY, f64::min).min(patch.scale());
    if c > 0.0 {
        window = window.min(PI / (2.0 * c.sqrt()));
    }
    let radii: Vec<f64> = opts.radius_fractions.iter().map(|f| f * window).collect();

    let field: Arc<dyn crate::immersion::DeformationField> = {
        let base = Arc::new(AmbientFourierField::new(opts.seed, opts.field_amplitude, patch.ambient().dim(), 3));
        if patch.is_closed() {
            base
        } else {
            Arc::new(crate::immersion::BoundaryBump::new(base, patch.domain().clone()))
        }
    };
    let deformation = Deformation::new(field.clone());
    let h = opts.t_step * patch.scale();
    let mut shifted = Vec::with_capacity(4);
    for t in [-2.0 * h, -h, h, 2.0 * h] {
        let moved = deformation.apply(patch, t)?;
        let mesh_t = crate::immersion::build_mesh(&moved, &mesh.resolution)?;
        shifted.push(total_invariants(&moved, &mesh_t)?);
    }
    let derivs: Vec<f64> = ps
        .clone()
        .map(|p| (8.0 * (shifted[2][p] - shifted[1][p]) - (shifted[3][p] - shifted[0][p])) / (12.0 * h))
        .collect();
    let volume_derivatives: Vec<f64> = radii
        .iter()
        .map(|&r| ps.clone().map(|p| weyl_gray_coefficient(p, n, m, c, r) * derivs[p]).sum())
        .collect();

    let small = |v: &[f64], tol: f64| v.iter().all(|x| x.abs() < tol);
    let flags = [
        small(&volume_derivatives, opts.derivative_tol),
        small(&l_max, opts.norm_tol),
        small(&h_f_max, opts.norm_tol),
        small(&h_m_max, opts.norm_tol),
    ];
    let unanimous = flags.iter().all(|f| *f == flags[0]);
    Ok(TubularMinimalityReport {
        radii,
        volume_derivatives,
        h_f_max,
        h_m_max,
        l_max,
        norm_tol: opts.norm_tol,
        derivative_tol: opts.derivative_tol,
        flags,
        unanimous,
        field: field.describe(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_constants_follow_the_recursion() {
        assert!((unit_sphere_volume(0) - 2.0).abs() < 1e-14);
        assert!((unit_sphere_volume(1) - 2.0 * PI).abs() < 1e-14);
        for k in 2..12 {
            let rec = 2.0 * PI * unit_sphere_volume(k - 2) / (k as f64 - 1.0);
            assert!((unit_sphere_volume(k) - rec).abs() < 1e-12 * rec);
        }
    }

    #[test]
    fn curve_and_sphere_closed_forms() {
        let (len, r) = (3.7, 0.21);
        assert!((weyl_gray_volume(&[len], 1, 2, 0.0, r) - 2.0 * PI * len * r).abs() < 1e-12);
        let big = 1.6;
        let totals = [4.0 * PI * big * big, 4.0 * PI];
        let expect = 8.0 * PI * (big * big + r * r);
        assert!((weyl_gray_volume(&totals, 2, 1, 0.0, r) - expect).abs() < 1e-11);
    }

    #[test]
    fn zero_curvature_is_a_continuous_limit() {
        let totals = [2.3, -0.7, 0.4];
        for c in [1e-8, -1e-8] {
            let a = weyl_gray_volume(&totals, 4, 2, c, 0.3);
            let b = weyl_gray_volume(&totals, 4, 2, 0.0, 0.3);
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn hyperbolic_coefficients_are_real() {
        let v = weyl_gray_volume(&[1.0, 0.5], 2, 2, -1.0, 0.7);
        // C_1 = 2π for p = 0; C_3/(4π)·2 = π for p = 1
        let expect = 2.0 * PI * 0.7f64.cosh().powi(2) * 0.7f64.sinh() + PI * 0.5 * 0.7f64.sinh().powi(3);
        assert!((v - expect).abs() < 1e-12, "{v} vs {expect}");
    }

    #[test]
    fn pairing_residual_detects_symmetric_spectra() {
        let s = SffTensor::from_matrices(&[DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&[1.0, -1.0, 0.0]))]);
        assert!(pairing_residual(&s, &[1.0]) < 1e-15);
        let s = SffTensor::from_matrices(&[DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&[1.0, 1.0]))]);
        assert!((pairing_residual(&s, &[1.0]) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn moment_fallback_matches_the_sphere_rule() {
        let mats = vec![
            DMatrix::from_row_slice(2, 2, &[0.4, 0.1, 0.1, -0.2]),
            DMatrix::from_row_slice(2, 2, &[0.0, 0.3, 0.3, 0.5]),
            DMatrix::from_row_slice(2, 2, &[-0.1, 0.0, 0.0, 0.2]),
        ];
        let sff = SffTensor::from_matrices(&mats);
        let r = 0.4;
        let rule = SphereRule::exact_for_degree(3, 2).unwrap();
        let direct: f64 = rule
            .points
            .iter()
            .zip(&rule.weights)
            .map(|(xi, w)| w * (DMatrix::identity(2, 2) - sff.contract_normal(xi) * r).determinant())
            .sum();
        let moments: f64 =
            (0..=2).map(|k| (-r).powi(k as i32) * integrate_polynomial(&sigma_polynomial(&sff, k), None)).sum();
        assert!((direct - moments).abs() < 1e-12);
    }
}
