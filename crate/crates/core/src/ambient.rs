//! Model ambient spaces realized in a single chart.
//!
//! Euclidean space uses the identity chart. Space forms of curvature `c` use
//! the conformal chart `g = δ / (1 + c|x|²/4)²`, which is a rescaled
//! stereographic projection for `c > 0` and the Poincaré ball for `c < 0`;
//! at `c = 0` it is the Euclidean chart. Complex projective space with
//! holomorphic sectional curvature `c` uses the affine chart with coordinates
//! rescaled so that the Fubini–Study metric is the identity at the origin.
//!
//! Curvature follows the convention `R(X,Y,Z,T) = ⟨R(X,Y)T, Z⟩`, so that
//! `R(X,Y,X,Y)` is the sectional curvature of an orthonormal pair.

use nalgebra::{DMatrix, DVector};

use crate::error::{GeometryError, Result};

/// Default central-difference step for metric derivatives.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Which model geometry the chart carries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AmbientKind {
    Euclidean,
    /// Constant sectional curvature `c`.
    SpaceForm { c: f64 },
    /// `CP^k` with constant holomorphic sectional curvature `c > 0`.
    FubiniStudy { c: f64, complex_dim: usize },
}

/// A model Riemannian manifold in one chart.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbientSpace {
    kind: AmbientKind,
    dim: usize,
    fd_step: f64,
}

/// Christoffel symbols `Γ^C_AB` at a chart point.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffels {
    dim: usize,
    data: Vec<f64>,
}

impl Christoffels {
    pub fn zeros(dim: usize) -> Self {
        Christoffels {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `Γ^c_ab`.
    #[inline]
    pub fn get(&self, c: usize, a: usize, b: usize) -> f64 {
        self.data[(c * self.dim + a) * self.dim + b]
    }

    #[inline]
    fn set(&mut self, c: usize, a: usize, b: usize, v: f64) {
        self.data[(c * self.dim + a) * self.dim + b] = v;
    }

    /// The vector `Γ(X, Y)^C = Γ^C_AB X^A Y^B`.
    pub fn contract(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let n = self.dim;
        DVector::from_fn(n, |c, _| {
            let mut s = 0.0;
            for a in 0..n {
                if x[a] == 0.0 {
                    continue;
                }
                for b in 0..n {
                    s += self.get(c, a, b) * x[a] * y[b];
                }
            }
            s
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Curvature components `R_ABCD = R(e_A, e_B, e_C, e_D)` for a list of vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureTensor {
    dim: usize,
    data: Vec<f64>,
}

impl CurvatureTensor {
    pub fn zeros(dim: usize) -> Self {
        CurvatureTensor {
            dim,
            data: vec![0.0; dim.pow(4)],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        let n = self.dim;
        self.data[((a * n + b) * n + c) * n + d]
    }

    #[inline]
    fn set(&mut self, a: usize, b: usize, c: usize, d: usize, v: f64) {
        let n = self.dim;
        self.data[((a * n + b) * n + c) * n + d] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl AmbientSpace {
    pub fn euclidean(dim: usize) -> Self {
        AmbientSpace {
            kind: AmbientKind::Euclidean,
            dim,
            fd_step: DEFAULT_FD_STEP,
        }
    }

    pub fn space_form(c: f64, dim: usize) -> Self {
        AmbientSpace {
            kind: AmbientKind::SpaceForm { c },
            dim,
            fd_step: DEFAULT_FD_STEP,
        }
    }

    /// `CP^complex_dim` with holomorphic sectional curvature `c`.
    pub fn fubini_study(c: f64, complex_dim: usize) -> Result<Self> {
        if c <= 0.0 {
            return Err(GeometryError::Precondition(format!(
                "Fubini-Study ambient needs c > 0, got {c}"
            )));
        }
        Ok(AmbientSpace {
            kind: AmbientKind::FubiniStudy { c, complex_dim },
            dim: 2 * complex_dim,
            fd_step: DEFAULT_FD_STEP,
        })
    }

    pub fn with_fd_step(mut self, step: f64) -> Self {
        self.fd_step = step;
        self
    }

    pub fn kind(&self) -> AmbientKind {
        self.kind
    }

    /// Real dimension of the chart.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    /// Sectional curvature for Euclidean/space-form ambients, `None` otherwise.
    pub fn space_form_curvature(&self) -> Option<f64> {
        match self.kind {
            AmbientKind::Euclidean => Some(0.0),
            AmbientKind::SpaceForm { c } => Some(c),
            AmbientKind::FubiniStudy { .. } => None,
        }
    }

    pub fn is_complex(&self) -> bool {
        matches!(self.kind, AmbientKind::FubiniStudy { .. })
    }

    pub fn label(&self) -> String {
        match self.kind {
            AmbientKind::Euclidean => format!("euclidean R^{}", self.dim),
            AmbientKind::SpaceForm { c } => format!("space-form c={c} dim {}", self.dim),
            AmbientKind::FubiniStudy { c, complex_dim } => {
                format!("fubini-study CP^{complex_dim} c={c}")
            }
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(GeometryError::Domain {
                point: x.to_vec(),
                reason: format!("expected {} chart coordinates", self.dim),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::Domain {
                point: x.to_vec(),
                reason: "non-finite coordinate".into(),
            });
        }
        if let AmbientKind::SpaceForm { c } = self.kind {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            if 1.0 + 0.25 * c * r2 <= 1e-12 {
                return Err(GeometryError::Domain {
                    point: x.to_vec(),
                    reason: "outside the Poincaré ball".into(),
                });
            }
        }
        Ok(())
    }

    /// Metric matrix `g_AB(x)`.
    pub fn metric_at(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(x)?;
        let n = self.dim;
        Ok(match self.kind {
            AmbientKind::Euclidean => DMatrix::identity(n, n),
            AmbientKind::SpaceForm { c } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let lambda = 1.0 / (1.0 + 0.25 * c * r2);
                DMatrix::identity(n, n) * (lambda * lambda)
            }
            AmbientKind::FubiniStudy { c, .. } => {
                let kappa = 0.25 * c;
                let w = DVector::from_column_slice(x);
                let jw = apply_j(&w);
                let s = 1.0 + kappa * w.norm_squared();
                let mut g = DMatrix::identity(n, n) * s;
                g -= (&w * w.transpose() + &jw * jw.transpose()) * kappa;
                g / (s * s)
            }
        })
    }

    /// Christoffel symbols by central differences of the metric.
    pub fn christoffels_at(&self, x: &[f64]) -> Result<Christoffels> {
        self.check_point(x)?;
        let n = self.dim;
        if self.kind == AmbientKind::Euclidean {
            return Ok(Christoffels::zeros(n));
        }
        let h = self.fd_step;
        let scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if !(h > 0.0) || scale + h == scale {
            return Err(GeometryError::Numeric(format!(
                "metric differentiation step {h} underflows at chart scale {scale}"
            )));
        }
        // dg[d] = ∂_d g
        let mut dg = Vec::with_capacity(n);
        let mut xp = x.to_vec();
        for d in 0..n {
            xp[d] = x[d] + h;
            let gp = self.metric_at(&xp)?;
            xp[d] = x[d] - h;
            let gm = self.metric_at(&xp)?;
            xp[d] = x[d];
            dg.push((gp - gm) / (2.0 * h));
        }
        let g = self.metric_at(x)?;
        let ginv = g.try_inverse().ok_or_else(|| {
            GeometryError::Numeric(format!("singular metric at {x:?}"))
        })?;
        let mut gamma = Christoffels::zeros(n);
        for a in 0..n {
            for b in a..n {
                // lowered: Γ_{d,ab} = ½(∂_a g_db + ∂_b g_da − ∂_d g_ab)
                let lowered: Vec<f64> = (0..n)
                    .map(|d| 0.5 * (dg[a][(d, b)] + dg[b][(d, a)] - dg[d][(a, b)]))
                    .collect();
                for c in 0..n {
                    let v: f64 = (0..n).map(|d| ginv[(c, d)] * lowered[d]).sum();
                    gamma.set(c, a, b, v);
                    gamma.set(c, b, a, v);
                }
            }
        }
        Ok(gamma)
    }

    /// `R(X, Y, Z, T)` from the closed-form curvature tensor of the model.
    pub fn curvature_at(
        &self,
        x: &[f64],
        xv: &DVector<f64>,
        yv: &DVector<f64>,
        zv: &DVector<f64>,
        tv: &DVector<f64>,
    ) -> Result<f64> {
        let g = self.metric_at(x)?;
        Ok(self.curvature_with_metric(&g, [xv, yv, zv, tv]))
    }

    fn curvature_with_metric(&self, g: &DMatrix<f64>, v: [&DVector<f64>; 4]) -> f64 {
        let ip = |a: &DVector<f64>, b: &DVector<f64>| (g * b).dot(a);
        match self.kind {
            AmbientKind::Euclidean => 0.0,
            AmbientKind::SpaceForm { c } => {
                c * (ip(v[0], v[2]) * ip(v[1], v[3]) - ip(v[1], v[2]) * ip(v[0], v[3]))
            }
            AmbientKind::FubiniStudy { c, .. } => {
                let j: Vec<DVector<f64>> = v.iter().map(|w| apply_j(w)).collect();
                0.25 * c
                    * (ip(v[0], v[2]) * ip(v[1], v[3]) - ip(v[1], v[2]) * ip(v[0], v[3])
                        + ip(&j[0], v[2]) * ip(&j[1], v[3])
                        - ip(&j[1], v[2]) * ip(&j[0], v[3])
                        + 2.0 * ip(&j[0], v[1]) * ip(&j[2], v[3]))
            }
        }
    }

    /// All components `R(v_A, v_B, v_C, v_D)` for the given vectors, sharing
    /// one metric evaluation. Uses the same closed form as [`curvature_at`].
    ///
    /// [`curvature_at`]: AmbientSpace::curvature_at
    pub fn curvature_components(&self, x: &[f64], vectors: &[DVector<f64>]) -> Result<CurvatureTensor> {
        let k = vectors.len();
        let mut out = CurvatureTensor::zeros(k);
        if self.kind == AmbientKind::Euclidean {
            self.check_point(x)?;
            return Ok(out);
        }
        let g = self.metric_at(x)?;
        let gram = DMatrix::from_fn(k, k, |a, b| (&g * &vectors[b]).dot(&vectors[a]));
        match self.kind {
            AmbientKind::Euclidean => unreachable!(),
            AmbientKind::SpaceForm { c } => {
                for a in 0..k {
                    for b in 0..k {
                        for cc in 0..k {
                            for d in 0..k {
                                let v = c
                                    * (gram[(a, cc)] * gram[(b, d)] - gram[(b, cc)] * gram[(a, d)]);
                                out.set(a, b, cc, d, v);
                            }
                        }
                    }
                }
            }
            AmbientKind::FubiniStudy { c, .. } => {
                // jg[(a, b)] = ⟨J v_a, v_b⟩
                let jv: Vec<DVector<f64>> = vectors.iter().map(apply_j).collect();
                let jg = DMatrix::from_fn(k, k, |a, b| (&g * &vectors[b]).dot(&jv[a]));
                for a in 0..k {
                    for b in 0..k {
                        for cc in 0..k {
                            for d in 0..k {
                                let v = 0.25
                                    * c
                                    * (gram[(a, cc)] * gram[(b, d)] - gram[(b, cc)] * gram[(a, d)]
                                        + jg[(a, cc)] * jg[(b, d)]
                                        - jg[(b, cc)] * jg[(a, d)]
                                        + 2.0 * jg[(a, b)] * jg[(cc, d)]);
                                out.set(a, b, cc, d, v);
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// `J X`: multiplication by `i` in the affine chart's real coordinates.
    pub fn complex_structure_at(&self, x: &[f64], v: &DVector<f64>) -> Result<DVector<f64>> {
        if !self.is_complex() {
            return Err(GeometryError::Unsupported(format!(
                "complex structure requested on {}",
                self.label()
            )));
        }
        self.check_point(x)?;
        Ok(apply_j(v))
    }

    /// Inner product `⟨a, b⟩` at `x`.
    pub fn inner(&self, x: &[f64], a: &DVector<f64>, b: &DVector<f64>) -> Result<f64> {
        let g = self.metric_at(x)?;
        Ok((g * b).dot(a))
    }
}

/// Multiplication by `i` on `(Re z_1, Im z_1, Re z_2, Im z_2, …)`.
pub(crate) fn apply_j(v: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(v.len());
    for k in 0..v.len() / 2 {
        out[2 * k] = -v[2 * k + 1];
        out[2 * k + 1] = v[2 * k];
    }
    out
}
