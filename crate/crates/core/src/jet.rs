//! Second-order forward-mode differentiation.
//!
//! [`Jet2`] carries a value together with its gradient and Hessian with
//! respect to at most [`MAX_VARS`] parameters. Maps written against the
//! [`Real`] trait can be evaluated on `f64` for plain values or on `Jet2`
//! for exact 2-jets, which is how the built-in manifolds supply clean second
//! derivatives to the frame machinery.

use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Maximum number of independent parameters a [`Jet2`] can track.
pub const MAX_VARS: usize = 4;

/// Scalar abstraction shared by `f64` and [`Jet2`].
pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + Send
    + Sync
{
    fn cst(v: f64) -> Self;
    fn value(&self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn cosh(self) -> Self;
    fn sinh(self) -> Self;
    fn powi(self, k: i32) -> Self;
    fn recip(self) -> Self {
        Self::cst(1.0) / self
    }
}

impl Real for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn cosh(self) -> Self {
        f64::cosh(self)
    }
    fn sinh(self) -> Self {
        f64::sinh(self)
    }
    fn powi(self, k: i32) -> Self {
        f64::powi(self, k)
    }
}

/// Truncated second-order Taylor expansion in up to [`MAX_VARS`] variables.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet2 {
    pub v: f64,
    pub g: [f64; MAX_VARS],
    pub h: [[f64; MAX_VARS]; MAX_VARS],
}

impl Jet2 {
    pub fn constant(v: f64) -> Self {
        Jet2 {
            v,
            ..Default::default()
        }
    }

    /// Independent variable number `index` at value `v`.
    pub fn variable(v: f64, index: usize) -> Self {
        assert!(index < MAX_VARS, "jet variable index {index} out of range");
        let mut j = Jet2::constant(v);
        j.g[index] = 1.0;
        j
    }

    /// Seeds a parameter point as independent variables.
    pub fn seed(u: &[f64]) -> Vec<Jet2> {
        assert!(u.len() <= MAX_VARS, "too many parameters for Jet2");
        u.iter()
            .enumerate()
            .map(|(i, &x)| Jet2::variable(x, i))
            .collect()
    }

    /// Applies a scalar function given its value and first two derivatives at `self.v`.
    #[inline]
    fn chain(self, f0: f64, f1: f64, f2: f64) -> Self {
        let mut out = Jet2::constant(f0);
        for a in 0..MAX_VARS {
            out.g[a] = f1 * self.g[a];
            for b in 0..MAX_VARS {
                out.h[a][b] = f1 * self.h[a][b] + f2 * self.g[a] * self.g[b];
            }
        }
        out
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    #[inline]
    fn add(mut self, o: Jet2) -> Jet2 {
        self += o;
        self
    }
}

impl AddAssign for Jet2 {
    #[inline]
    fn add_assign(&mut self, o: Jet2) {
        self.v += o.v;
        for a in 0..MAX_VARS {
            self.g[a] += o.g[a];
            for b in 0..MAX_VARS {
                self.h[a][b] += o.h[a][b];
            }
        }
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    #[inline]
    fn sub(mut self, o: Jet2) -> Jet2 {
        self -= o;
        self
    }
}

impl SubAssign for Jet2 {
    #[inline]
    fn sub_assign(&mut self, o: Jet2) {
        self.v -= o.v;
        for a in 0..MAX_VARS {
            self.g[a] -= o.g[a];
            for b in 0..MAX_VARS {
                self.h[a][b] -= o.h[a][b];
            }
        }
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    #[inline]
    fn mul(self, o: Jet2) -> Jet2 {
        let mut out = Jet2::constant(self.v * o.v);
        for a in 0..MAX_VARS {
            out.g[a] = self.g[a] * o.v + self.v * o.g[a];
            for b in 0..MAX_VARS {
                out.h[a][b] = self.h[a][b] * o.v
                    + self.v * o.h[a][b]
                    + self.g[a] * o.g[b]
                    + self.g[b] * o.g[a];
            }
        }
        out
    }
}

impl MulAssign for Jet2 {
    fn mul_assign(&mut self, o: Jet2) {
        *self = *self * o;
    }
}

impl Div for Jet2 {
    type Output = Jet2;
    #[inline]
    fn div(self, o: Jet2) -> Jet2 {
        self * o.recip()
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    #[inline]
    fn neg(self) -> Jet2 {
        self * -1.0
    }
}

impl Add<f64> for Jet2 {
    type Output = Jet2;
    #[inline]
    fn add(mut self, o: f64) -> Jet2 {
        self.v += o;
        self
    }
}

impl Sub<f64> for Jet2 {
    type Output = Jet2;
    #[inline]
    fn sub(mut self, o: f64) -> Jet2 {
        self.v -= o;
        self
    }
}

impl Mul<f64> for Jet2 {
    type Output = Jet2;
    #[inline]
    fn mul(mut self, o: f64) -> Jet2 {
        self.v *= o;
        for a in 0..MAX_VARS {
            self.g[a] *= o;
            for b in 0..MAX_VARS {
                self.h[a][b] *= o;
            }
        }
        self
    }
}

impl Div<f64> for Jet2 {
    type Output = Jet2;
    #[inline]
    fn div(self, o: f64) -> Jet2 {
        self * (1.0 / o)
    }
}

impl Real for Jet2 {
    fn cst(v: f64) -> Self {
        Jet2::constant(v)
    }
    fn value(&self) -> f64 {
        self.v
    }
    fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }
    fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }
    fn sqrt(self) -> Self {
        let r = self.v.sqrt();
        self.chain(r, 0.5 / r, -0.25 / (r * self.v))
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }
    fn ln(self) -> Self {
        self.chain(self.v.ln(), 1.0 / self.v, -1.0 / (self.v * self.v))
    }
    fn cosh(self) -> Self {
        let (c, s) = (self.v.cosh(), self.v.sinh());
        self.chain(c, s, c)
    }
    fn sinh(self) -> Self {
        let (c, s) = (self.v.cosh(), self.v.sinh());
        self.chain(s, c, s)
    }
    fn powi(self, k: i32) -> Self {
        if k == 0 {
            return Jet2::constant(1.0);
        }
        let kf = k as f64;
        let f0 = self.v.powi(k);
        let f1 = kf * self.v.powi(k - 1);
        let f2 = kf * (kf - 1.0) * self.v.powi(k - 2);
        self.chain(f0, f1, f2)
    }
    fn recip(self) -> Self {
        let r = 1.0 / self.v;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }
}
