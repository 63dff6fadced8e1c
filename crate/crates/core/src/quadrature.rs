//! One-dimensional rules, unit-sphere rules and deterministic summation.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[a, b]`.
pub fn gauss_legendre(count: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(count >= 1);
    let mut nodes = vec![0.0; count];
    let mut weights = vec![0.0; count];
    let nf = count as f64;
    for i in 0..count.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(count, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(count, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[count - 1 - i] = x;
        weights[i] = w;
        weights[count - 1 - i] = w;
    }
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    (
        nodes.iter().map(|x| mid + half * x).collect(),
        weights.iter().map(|w| w * half).collect(),
    )
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    (p1, nf * (x * p1 - p0) / (x * x - 1.0))
}

/// Uniform periodic trapezoid nodes and weights on `[a, b)`.
pub fn periodic_trapezoid(count: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let h = (b - a) / count as f64;
    ((0..count).map(|i| a + h * i as f64).collect(), vec![h; count])
}

/// Pairwise (cascade) summation in a fixed order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 8;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Volume `C_k` of the unit `k`-sphere `S^k ⊂ R^{k+1}`.
pub fn unit_sphere_volume(k: usize) -> f64 {
    let s = 0.5 * (k as f64 + 1.0);
    2.0 * PI.powf(s) / libm::tgamma(s)
}

/// A quadrature rule on `S^{m-1} ⊂ R^m`: points and weights.
#[derive(Debug, Clone)]
pub struct SphereRule {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl SphereRule {
    /// Product rule exact for polynomials of total degree `≤ degree` on
    /// `S^0`, `S^1` and `S^2`. Returns `None` for higher dimensions.
    pub fn exact_for_degree(m: usize, degree: usize) -> Option<SphereRule> {
        match m {
            1 => Some(SphereRule {
                points: vec![vec![1.0], vec![-1.0]],
                weights: vec![1.0, 1.0],
            }),
            2 => {
                let count = degree + 1;
                let (phis, w) = periodic_trapezoid(count, 0.0, 2.0 * PI);
                Some(SphereRule {
                    points: phis.iter().map(|p| vec![p.cos(), p.sin()]).collect(),
                    weights: w,
                })
            }
            3 => {
                let nz = degree / 2 + 1;
                let nphi = degree + 1;
                let (zs, wz) = gauss_legendre(nz, -1.0, 1.0);
                let (phis, wphi) = periodic_trapezoid(nphi, 0.0, 2.0 * PI);
                let mut points = Vec::with_capacity(nz * nphi);
                let mut weights = Vec::with_capacity(nz * nphi);
                for (z, wzz) in zs.iter().zip(&wz) {
                    let rho = (1.0 - z * z).sqrt();
                    for (p, wp) in phis.iter().zip(&wphi) {
                        points.push(vec![rho * p.cos(), rho * p.sin(), *z]);
                        weights.push(wzz * wp);
                    }
                }
                Some(SphereRule { points, weights })
            }
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(5, -1.0, 1.0);
        for deg in 0..10 {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg)).sum();
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((q - exact).abs() < 1e-14, "deg {deg}: {q} vs {exact}");
        }
        let (x, w) = gauss_legendre(64, 0.0, PI);
        let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.sin()).sum();
        assert!((q - 2.0).abs() < 1e-14);
    }

    #[test]
    fn pairwise_sum_matches_naive_sum() {
        let v: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin()).collect();
        let naive: f64 = v.iter().sum();
        assert!((pairwise_sum(&v) - naive).abs() < 1e-12);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn sphere_volumes_satisfy_recursion() {
        assert!((unit_sphere_volume(0) - 2.0).abs() < 1e-14);
        assert!((unit_sphere_volume(1) - 2.0 * PI).abs() < 1e-14);
        assert!((unit_sphere_volume(2) - 4.0 * PI).abs() < 1e-13);
        for k in 2..12 {
            let rec = 2.0 * PI * unit_sphere_volume(k - 2) / (k as f64 - 1.0);
            assert!((unit_sphere_volume(k) - rec).abs() < 1e-12 * rec);
        }
    }

    #[test]
    fn sphere_rules_reproduce_moments() {
        // ∫_{S^2} z^4 = 4π/5, ∫_{S^1} cos^4 = 3π/4
        let r3 = SphereRule::exact_for_degree(3, 6).unwrap();
        let q: f64 = r3.points.iter().zip(&r3.weights).map(|(p, w)| w * p[2].powi(4)).sum();
        assert!((q - 4.0 * PI / 5.0).abs() < 1e-13);
        let q2: f64 = r3.points.iter().zip(&r3.weights).map(|(p, w)| w * p[0].powi(2) * p[1].powi(2)).sum();
        assert!((q2 - 4.0 * PI / 15.0).abs() < 1e-13);
        let r2 = SphereRule::exact_for_degree(2, 4).unwrap();
        let q: f64 = r2.points.iter().zip(&r2.weights).map(|(p, w)| w * p[0].powi(4)).sum();
        assert!((q - 0.75 * PI).abs() < 1e-13);
        assert!(SphereRule::exact_for_degree(4, 2).is_none());
    }
}
