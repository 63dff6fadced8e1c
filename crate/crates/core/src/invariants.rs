//! Generalized Kronecker contractions, wedge evaluation and the mean
//! curvature invariants `K^f_2p`, `H^f_{2p+1}` with their intrinsic
//! counterparts, plus the normal-sphere integral route.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use itertools::Itertools;
use nalgebra::DMatrix;

use crate::error::{GeometryError, Result};
use crate::frames::{PointGeometry, RelCurvTensor, SffTensor};
use crate::quadrature::unit_sphere_volume;

/// A 2-form on the tangent frame: `(k, l) ↦ ω(e_k, e_l)`.
pub type TwoForm<'a> = &'a dyn Fn(usize, usize) -> f64;
/// A 1-form on the tangent frame: `k ↦ ψ(e_k)`.
pub type OneForm<'a> = &'a dyn Fn(usize) -> f64;

pub fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, t| acc * (n - t) as f64 / (t + 1) as f64)
}

/// Sign of the permutation sorting `t`; `0` if an entry repeats.
pub fn permutation_sign(t: &[usize]) -> i32 {
    let mut sign = 1;
    for a in 0..t.len() {
        for b in (a + 1)..t.len() {
            if t[a] == t[b] {
                return 0;
            }
            if t[a] > t[b] {
                sign = -sign;
            }
        }
    }
    sign
}

/// Generalized Kronecker symbol `δ^{upper}_{lower}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KroneckerSymbol {
    pub upper: Vec<usize>,
    pub lower: Vec<usize>,
}

impl KroneckerSymbol {
    pub fn new(upper: Vec<usize>, lower: Vec<usize>) -> Self {
        KroneckerSymbol { upper, lower }
    }

    pub fn value(&self) -> i32 {
        kronecker(&self.upper, &self.lower)
    }
}

/// `δ^{upper}_{lower}`: the sign of the permutation carrying `lower` to
/// `upper` when both are distinct tuples over the same set, else `0`.
pub fn kronecker(upper: &[usize], lower: &[usize]) -> i32 {
    if upper.len() != lower.len() {
        return 0;
    }
    let su = permutation_sign(upper);
    let sl = permutation_sign(lower);
    if su == 0 || sl == 0 {
        return 0;
    }
    let mut a = upper.to_vec();
    let mut b = lower.to_vec();
    a.sort_unstable();
    b.sort_unstable();
    if a != b {
        return 0;
    }
    su * sl
}

/// Reference wedge evaluation by the full permutation sum
/// `(1/2^p) Σ_σ sgn σ Π_t ω_t(e_{I_σ(2t−1)}, e_{I_σ(2t)}) [ψ(e_{I_σ(k)})]`.
pub fn wedge_eval(two_forms: &[TwoForm], psi: Option<OneForm>, tuple: &[usize]) -> Result<f64> {
    let k = 2 * two_forms.len() + usize::from(psi.is_some());
    if tuple.len() != k {
        return Err(GeometryError::Precondition(format!(
            "tuple of length {} for a {k}-form",
            tuple.len()
        )));
    }
    if permutation_sign(tuple) == 0 {
        return Err(GeometryError::Precondition(format!("repeated index in {tuple:?}")));
    }
    let mut total = 0.0;
    for perm in (0..k).permutations(k) {
        let s = permutation_sign(&perm) as f64;
        let mut prod = 1.0;
        for (t, w) in two_forms.iter().enumerate() {
            prod *= w(tuple[perm[2 * t]], tuple[perm[2 * t + 1]]);
        }
        if let Some(psi) = psi {
            prod *= psi(tuple[perm[k - 1]]);
        }
        total += s * prod;
    }
    Ok(total / 2f64.powi(two_forms.len() as i32))
}

/// Fast wedge evaluation by shuffle (Laplace) expansion; equal to
/// [`wedge_eval`] for distinct tuples.
pub fn wedge_expand(two_forms: &[TwoForm], one_forms: &[OneForm], tuple: &[usize]) -> f64 {
    if let Some((first, rest)) = two_forms.split_first() {
        let k = tuple.len();
        let mut total = 0.0;
        let mut sub = Vec::with_capacity(k - 2);
        for a in 0..k {
            for b in (a + 1)..k {
                let w = first(tuple[a], tuple[b]);
                if w == 0.0 {
                    continue;
                }
                sub.clear();
                sub.extend((0..k).filter(|&t| t != a && t != b).map(|t| tuple[t]));
                let sign = if (a + b + 1) % 2 == 0 { 1.0 } else { -1.0 };
                total += sign * w * wedge_expand(rest, one_forms, &sub);
            }
        }
        total
    } else if let Some((first, rest)) = one_forms.split_first() {
        let k = tuple.len();
        let mut total = 0.0;
        let mut sub = Vec::with_capacity(k.saturating_sub(1));
        for a in 0..k {
            let w = first(tuple[a]);
            if w == 0.0 {
                continue;
            }
            sub.clear();
            sub.extend((0..k).filter(|&t| t != a).map(|t| tuple[t]));
            let sign = if a % 2 == 0 { 1.0 } else { -1.0 };
            total += sign * w * wedge_expand(&[], rest, &sub);
        }
        total
    } else {
        debug_assert!(tuple.is_empty());
        1.0
    }
}

/// Evaluates `Ω_{I_{2p}} [∧ extra one-forms]` built from the index tuple
/// `pairs = (i_1, …, i_{2p})` on the ordered tuple `on`.
pub(crate) fn omega_wedge(
    rel: &RelCurvTensor,
    pairs: &[usize],
    one_forms: &[OneForm],
    on: &[usize],
) -> f64 {
    let forms: Vec<Box<dyn Fn(usize, usize) -> f64 + '_>> = pairs
        .chunks(2)
        .map(|c| {
            let (i, j) = (c[0], c[1]);
            Box::new(move |k: usize, l: usize| rel.get(i, j, k, l)) as Box<dyn Fn(usize, usize) -> f64>
        })
        .collect();
    let refs: Vec<TwoForm> = forms.iter().map(|b| b.as_ref() as TwoForm).collect();
    wedge_expand(&refs, one_forms, on)
}

/// All perfect matchings of a sorted set, each flattened as `(a_1, b_1, …)`
/// with `a_t < b_t` and `a_1 < a_2 < …`.
pub fn perfect_matchings(set: &[usize]) -> Vec<Vec<usize>> {
    if set.is_empty() {
        return vec![vec![]];
    }
    let first = set[0];
    let mut out = Vec::new();
    for t in 1..set.len() {
        let rest: Vec<usize> = set[1..].iter().enumerate().filter(|&(s, _)| s + 1 != t).map(|(_, &v)| v).collect();
        for mut m in perfect_matchings(&rest) {
            let mut v = vec![first, set[t]];
            v.append(&mut m);
            out.push(v);
        }
    }
    out
}

fn check_even(n: usize, p: usize) -> Result<()> {
    if 2 * p > n {
        return Err(GeometryError::Precondition(format!("2p = {} exceeds n = {n}", 2 * p)));
    }
    Ok(())
}

/// `K_2p` from any curvature-type tensor (relative or intrinsic), by
/// iterating unordered index sets and their pairings.
fn k_contraction(rel: &RelCurvTensor, p: usize) -> Result<f64> {
    let n = rel.dim();
    check_even(n, p)?;
    if p == 0 {
        return Ok(1.0);
    }
    let mut total = 0.0;
    for set in (0..n).combinations(2 * p) {
        for pairs in perfect_matchings(&set) {
            total += omega_wedge(rel, &pairs, &[], &pairs);
        }
    }
    // each unordered matching stands for 2^p p! ordered tuples
    let orderings = 2f64.powi(p as i32) * factorial(p);
    Ok(total * orderings * factorial(n - 2 * p) / factorial(n))
}

/// `K^f_2p = ((n−2p)!/n!) Σ_{I_2p} Ω_{i_1 i_2} ∧ … (e_{i_1}, …, e_{i_2p})`.
pub fn k2p_at(rel: &RelCurvTensor, p: usize) -> Result<f64> {
    k_contraction(rel, p)
}

/// Brute-force `K_2p` over all ordered tuples with the permutation-sum wedge.
pub fn k2p_reference(rel: &RelCurvTensor, p: usize) -> Result<f64> {
    let n = rel.dim();
    check_even(n, p)?;
    if p == 0 {
        return Ok(1.0);
    }
    let mut total = 0.0;
    for tuple in (0..n).permutations(2 * p) {
        let forms: Vec<Box<dyn Fn(usize, usize) -> f64>> = tuple
            .chunks(2)
            .map(|c| {
                let (i, j) = (c[0], c[1]);
                Box::new(move |k: usize, l: usize| rel.get(i, j, k, l)) as Box<dyn Fn(usize, usize) -> f64>
            })
            .collect();
        let refs: Vec<TwoForm> = forms.iter().map(|b| b.as_ref() as TwoForm).collect();
        total += wedge_eval(&refs, None, &tuple)?;
    }
    Ok(total * factorial(n - 2 * p) / factorial(n))
}

fn h_contraction(rel: &RelCurvTensor, sff: &SffTensor, p: usize) -> Vec<f64> {
    let n = rel.dim();
    let m = sff.codim();
    if 2 * p + 1 > n {
        return vec![0.0; m];
    }
    let coef = 2f64.powi(p as i32) * factorial(p) * factorial(n - 2 * p - 1) / factorial(n);
    (0..m)
        .map(|alpha| {
            let mut total = 0.0;
            for set in (0..n).combinations(2 * p + 1) {
                for (pos, &last) in set.iter().enumerate() {
                    let rest: Vec<usize> = set.iter().enumerate().filter(|&(s, _)| s != pos).map(|(_, &v)| v).collect();
                    let theta = move |k: usize| sff.get(alpha, last, k);
                    for mut tuple in perfect_matchings(&rest) {
                        let pairs = tuple.clone();
                        tuple.push(last);
                        total += omega_wedge(rel, &pairs, &[&theta], &tuple);
                    }
                }
            }
            total * coef
        })
        .collect()
}

/// Normal-frame coefficients of `H^f_{2p+1}`; zero when `2p+1 > n`.
pub fn h2p1_at(rel: &RelCurvTensor, sff: &SffTensor, p: usize) -> Vec<f64> {
    h_contraction(rel, sff, p)
}

/// Brute-force `H^f_{2p+1}` over ordered tuples.
pub fn h2p1_reference(rel: &RelCurvTensor, sff: &SffTensor, p: usize) -> Result<Vec<f64>> {
    let n = rel.dim();
    let m = sff.codim();
    if 2 * p + 1 > n {
        return Ok(vec![0.0; m]);
    }
    let mut out = vec![0.0; m];
    for (alpha, slot) in out.iter_mut().enumerate() {
        for tuple in (0..n).permutations(2 * p + 1) {
            let forms: Vec<Box<dyn Fn(usize, usize) -> f64>> = tuple[..2 * p]
                .chunks(2)
                .map(|c| {
                    let (i, j) = (c[0], c[1]);
                    Box::new(move |k: usize, l: usize| rel.get(i, j, k, l)) as Box<dyn Fn(usize, usize) -> f64>
                })
                .collect();
            let refs: Vec<TwoForm> = forms.iter().map(|b| b.as_ref() as TwoForm).collect();
            let last = tuple[2 * p];
            let theta = move |k: usize| sff.get(alpha, last, k);
            *slot += wedge_eval(&refs, Some(&theta), &tuple)?;
        }
        *slot *= factorial(n - 2 * p - 1) / factorial(n);
    }
    Ok(out)
}

/// `(K^M_2p, H^M_{2p+1})` from `Ω^M = Ω + R_ijkl`, where `curvature` holds
/// the ambient components with tangent frame indices first.
pub fn intrinsic_invariants(
    rel: &RelCurvTensor,
    sff: &SffTensor,
    curvature: &crate::ambient::CurvatureTensor,
    p: usize,
) -> Result<(f64, Vec<f64>)> {
    let intrinsic = rel.plus_ambient(curvature);
    Ok((k_contraction(&intrinsic, p)?, h_contraction(&intrinsic, sff, p)))
}

/// Right-hand side of the space-form relation
/// `K^M_2p = Σ_k c^{p−k} C(p,k) K^f_2k` (works equally for `H`).
pub fn space_form_combination(relative: &[f64], c: f64, p: usize) -> f64 {
    (0..=p).map(|k| c.powi((p - k) as i32) * binomial(p, k) * relative[k]).sum()
}

/// `k`-th elementary symmetric function of the eigenvalues of `a`, from the
/// characteristic polynomial (Faddeev–LeVerrier).
pub fn elementary_symmetric(a: &DMatrix<f64>, k: usize) -> Result<f64> {
    let n = a.nrows();
    if k > n {
        return Err(GeometryError::Precondition(format!("k = {k} exceeds matrix size {n}")));
    }
    if k == 0 {
        return Ok(1.0);
    }
    // c_{n-j} are the characteristic polynomial coefficients; e_j = (−1)^j c_{n−j}
    let mut mk = DMatrix::<f64>::zeros(n, n);
    let mut c_prev = 1.0;
    let mut e = 0.0;
    for j in 1..=k {
        mk = a * &mk + DMatrix::identity(n, n) * c_prev;
        let c = -(a * &mk).trace() / j as f64;
        e = if j % 2 == 0 { c } else { -c };
        c_prev = c;
    }
    Ok(e)
}

/// `∫_{S^{m−1}} Π ξ_β^{c_β} dξ` by Wick pairing:
/// `C_{m−1} Π (c_β − 1)!! / (m (m+2) ⋯ (m + |c| − 2))`.
pub fn sphere_monomial_moment(exponents: &[usize]) -> f64 {
    let m = exponents.len();
    if exponents.iter().any(|c| c % 2 == 1) {
        return 0.0;
    }
    let total: usize = exponents.iter().sum();
    let mut v = unit_sphere_volume(m - 1);
    for &c in exponents {
        let mut df = 1.0;
        let mut t = c as i64 - 1;
        while t > 1 {
            df *= t as f64;
            t -= 2;
        }
        v *= df;
    }
    for t in 0..total / 2 {
        v /= (m + 2 * t) as f64;
    }
    v
}

/// Coefficients of the homogeneous polynomial `ξ ↦ σ_k(S_ξ)`, keyed by the
/// exponent vector of each monomial.
pub fn sigma_polynomial(sff: &SffTensor, k: usize) -> BTreeMap<Vec<usize>, f64> {
    let n = sff.dim();
    let m = sff.codim();
    let mut out = BTreeMap::new();
    if k == 0 {
        out.insert(vec![0; m], 1.0);
        return out;
    }
    // σ_k = Σ_{|S|=k} det(S_ξ restricted to S); each minor is multilinear in
    // its columns, so expand column by column over normal directions.
    for set in (0..n).combinations(k) {
        for assignment in std::iter::repeat_n(0..m, k).multi_cartesian_product() {
            let mat = DMatrix::from_fn(k, k, |r, c| sff.get(assignment[c], set[r], set[c]));
            let d = mat.determinant();
            if d == 0.0 {
                continue;
            }
            let mut exps = vec![0; m];
            for &b in &assignment {
                exps[b] += 1;
            }
            *out.entry(exps).or_insert(0.0) += d;
        }
    }
    out
}

pub(crate) fn integrate_polynomial(poly: &BTreeMap<Vec<usize>, f64>, extra: Option<usize>) -> f64 {
    poly.iter()
        .map(|(exps, coef)| {
            let mut e = exps.clone();
            if let Some(g) = extra {
                e[g] += 1;
            }
            coef * sphere_monomial_moment(&e)
        })
        .sum()
}

/// `K^f_2p = (2^{2p} π^p p! / (C_{m+2p−1} (2p)!)) ∫_{S^{m−1}} M_2p(ξ) dξ`
/// with `M_k = σ_k(S_ξ)/C(n,k)`, integrated exactly.
pub fn k2p_via_normal_integral(sff: &SffTensor, p: usize) -> Result<f64> {
    let n = sff.dim();
    let m = sff.codim();
    check_even(n, p)?;
    let poly = sigma_polynomial(sff, 2 * p);
    let integral = integrate_polynomial(&poly, None) / binomial(n, 2 * p);
    let coef = 4f64.powi(p as i32) * PI.powi(p as i32) * factorial(p)
        / (unit_sphere_volume(m + 2 * p - 1) * factorial(2 * p));
    Ok(coef * integral)
}

/// `H^f_{2p+1} = (2^{2p} π^p p! (m+2p) / (C_{m+2p−1} (2p+1)!)) ∫ ξ M_{2p+1}(ξ) dξ`.
pub fn h2p1_via_normal_integral(sff: &SffTensor, p: usize) -> Vec<f64> {
    let n = sff.dim();
    let m = sff.codim();
    if 2 * p + 1 > n {
        return vec![0.0; m];
    }
    let poly = sigma_polynomial(sff, 2 * p + 1);
    let coef = 4f64.powi(p as i32) * PI.powi(p as i32) * factorial(p) * (m + 2 * p) as f64
        / (unit_sphere_volume(m + 2 * p - 1) * factorial(2 * p + 1));
    (0..m)
        .map(|g| coef * integrate_polynomial(&poly, Some(g)) / binomial(n, 2 * p + 1))
        .collect()
}

/// Per-point invariants for `p = 0..=⌊n/2⌋`.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantSample {
    pub k: Vec<f64>,
    /// Normal-frame coefficients of `H^f_{2p+1}`.
    pub h: Vec<Vec<f64>>,
    pub k_intrinsic: Vec<f64>,
    pub h_intrinsic: Vec<Vec<f64>>,
}

impl InvariantSample {
    pub fn h_norm(&self, p: usize) -> f64 {
        self.h[p].iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn h_intrinsic_norm(&self, p: usize) -> f64 {
        self.h_intrinsic[p].iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

pub fn invariant_sample(geom: &PointGeometry) -> Result<InvariantSample> {
    let n = geom.dim();
    let intrinsic = geom.intrinsic_curvature();
    let mut s = InvariantSample {
        k: Vec::new(),
        h: Vec::new(),
        k_intrinsic: Vec::new(),
        h_intrinsic: Vec::new(),
    };
    for p in 0..=n / 2 {
        s.k.push(k_contraction(&geom.relcurv, p)?);
        s.h.push(h_contraction(&geom.relcurv, &geom.sff, p));
        s.k_intrinsic.push(k_contraction(&intrinsic, p)?);
        s.h_intrinsic.push(h_contraction(&intrinsic, &geom.sff, p));
    }
    Ok(s)
}
