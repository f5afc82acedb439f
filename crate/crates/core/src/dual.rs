//! Forward-mode automatic differentiation.
//!
//! [`Dual<T, N>`] carries a value and `N` directional derivatives. The scalar
//! type `T` is itself any [`Real`], so `Dual<Dual<f64, N>, N>` yields exact
//! second derivatives (used for the Newton tangent of the forward solver).
//!
//! Everything constitutive in this crate (invariants, features, benchmark
//! energies) is written once, generically over [`Real`], and differentiated by
//! evaluating it on dual numbers.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Scalar arithmetic needed by the constitutive code.
pub trait Real:
    Copy
    + Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn cst(v: f64) -> Self;
    /// Primal value with all derivative parts dropped.
    fn value(&self) -> f64;
    fn sqrt(self) -> Self;
    fn ln(self) -> Self;
    fn exp(self) -> Self;
    fn powf(self, p: f64) -> Self;
    fn powi(self, n: i32) -> Self;
    fn tan(self) -> Self;
    fn sinh(self) -> Self;
    fn cbrt(self) -> Self {
        self.powf(1.0 / 3.0)
    }
    fn recip(self) -> Self {
        Self::cst(1.0) / self
    }
}

impl Real for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn value(&self) -> f64 {
        *self
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }
    #[inline]
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    #[inline]
    fn tan(self) -> Self {
        f64::tan(self)
    }
    #[inline]
    fn sinh(self) -> Self {
        f64::sinh(self)
    }
    #[inline]
    fn cbrt(self) -> Self {
        f64::cbrt(self)
    }
}

/// Dual number `re + Σ eps[k] ε_k` with `ε_j ε_k = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<T: Real, const N: usize> {
    pub re: T,
    pub eps: [T; N],
}

impl<T: Real, const N: usize> Dual<T, N> {
    pub fn constant(re: T) -> Self {
        Self {
            re,
            eps: [T::cst(0.0); N],
        }
    }

    /// Independent variable number `k` (seeded with unit tangent).
    pub fn variable(re: T, k: usize) -> Self {
        let mut d = Self::constant(re);
        d.eps[k] = T::cst(1.0);
        d
    }

    /// Chain rule: `f(self)` given `f(re)` and `f'(re)`.
    #[inline]
    fn chain(self, f: T, df: T) -> Self {
        let mut eps = self.eps;
        for e in eps.iter_mut() {
            *e = *e * df;
        }
        Self { re: f, eps }
    }
}

impl<T: Real, const N: usize> Add for Dual<T, N> {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: Self) -> Self {
        self.re += rhs.re;
        for (a, b) in self.eps.iter_mut().zip(rhs.eps) {
            *a += b;
        }
        self
    }
}

impl<T: Real, const N: usize> Sub for Dual<T, N> {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: Self) -> Self {
        self.re -= rhs.re;
        for (a, b) in self.eps.iter_mut().zip(rhs.eps) {
            *a -= b;
        }
        self
    }
}

impl<T: Real, const N: usize> Mul for Dual<T, N> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        let mut eps = self.eps;
        for (k, e) in eps.iter_mut().enumerate() {
            *e = *e * rhs.re + self.re * rhs.eps[k];
        }
        Self {
            re: self.re * rhs.re,
            eps,
        }
    }
}

impl<T: Real, const N: usize> Div for Dual<T, N> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let inv = rhs.re.recip();
        let re = self.re * inv;
        let mut eps = self.eps;
        for (k, e) in eps.iter_mut().enumerate() {
            *e = (*e - re * rhs.eps[k]) * inv;
        }
        Self { re, eps }
    }
}

impl<T: Real, const N: usize> Neg for Dual<T, N> {
    type Output = Self;
    #[inline]
    fn neg(mut self) -> Self {
        self.re = -self.re;
        for e in self.eps.iter_mut() {
            *e = -*e;
        }
        self
    }
}

impl<T: Real, const N: usize> AddAssign for Dual<T, N> {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<T: Real, const N: usize> SubAssign for Dual<T, N> {
    #[inline]
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl<T: Real, const N: usize> MulAssign for Dual<T, N> {
    #[inline]
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

impl<T: Real, const N: usize> Add<f64> for Dual<T, N> {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: f64) -> Self {
        self.re = self.re + rhs;
        self
    }
}

impl<T: Real, const N: usize> Sub<f64> for Dual<T, N> {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: f64) -> Self {
        self.re = self.re - rhs;
        self
    }
}

impl<T: Real, const N: usize> Mul<f64> for Dual<T, N> {
    type Output = Self;
    #[inline]
    fn mul(mut self, rhs: f64) -> Self {
        self.re = self.re * rhs;
        for e in self.eps.iter_mut() {
            *e = *e * rhs;
        }
        self
    }
}

impl<T: Real, const N: usize> Div<f64> for Dual<T, N> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: f64) -> Self {
        self * (1.0 / rhs)
    }
}

impl<T: Real, const N: usize> Real for Dual<T, N> {
    fn cst(v: f64) -> Self {
        Self::constant(T::cst(v))
    }

    fn value(&self) -> f64 {
        self.re.value()
    }

    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        self.chain(s, (s * 2.0).recip())
    }

    fn ln(self) -> Self {
        self.chain(self.re.ln(), self.re.recip())
    }

    fn exp(self) -> Self {
        let e = self.re.exp();
        self.chain(e, e)
    }

    fn powf(self, p: f64) -> Self {
        let f = self.re.powf(p);
        let df = self.re.powf(p - 1.0) * p;
        self.chain(f, df)
    }

    fn powi(self, n: i32) -> Self {
        match n {
            0 => Self::cst(1.0),
            1 => self,
            _ => {
                let f = self.re.powi(n);
                let df = self.re.powi(n - 1) * n as f64;
                self.chain(f, df)
            }
        }
    }

    fn tan(self) -> Self {
        let t = self.re.tan();
        self.chain(t, t * t + 1.0)
    }

    fn sinh(self) -> Self {
        let s = self.re.sinh();
        // cosh = sqrt(1 + sinh²)
        let c = (s * s + 1.0).sqrt();
        self.chain(s, c)
    }

    fn cbrt(self) -> Self {
        let c = self.re.cbrt();
        self.chain(c, (c * c * 3.0).recip())
    }
}

/// Value and gradient of a scalar function of `N` variables.
pub fn gradient<const N: usize>(
    x: [f64; N],
    f: impl Fn([Dual<f64, N>; N]) -> Dual<f64, N>,
) -> (f64, [f64; N]) {
    let vars: [Dual<f64, N>; N] = std::array::from_fn(|k| Dual::variable(x[k], k));
    let out = f(vars);
    (out.re, out.eps)
}

pub type Dual2<const N: usize> = Dual<Dual<f64, N>, N>;

/// Value, gradient and Hessian via nested duals.
pub fn hessian<const N: usize>(
    x: [f64; N],
    f: impl Fn([Dual2<N>; N]) -> Dual2<N>,
) -> (f64, [f64; N], [[f64; N]; N]) {
    let vars: [Dual2<N>; N] = std::array::from_fn(|k| Dual {
        re: Dual::variable(x[k], k),
        eps: std::array::from_fn(|j| {
            if j == k {
                Dual::constant(1.0)
            } else {
                Dual::constant(0.0)
            }
        }),
    });
    let out = f(vars);
    let grad = out.re.eps;
    let hess = std::array::from_fn(|i| out.eps[i].eps);
    (out.re.re, grad, hess)
}
