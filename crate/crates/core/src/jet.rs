//! Truncated Taylor jets in up to two variables.
//!
//! A [`Jet`] stores the Taylor coefficients of a smooth function about a
//! point, truncated at total degree `order <= MAX_ORDER`. Arithmetic on jets
//! is exact polynomial arithmetic modulo the truncation, so evaluating a
//! field expression on seeded jets yields its analytic derivatives.
//!
//! Coefficients are stored as Taylor coefficients, not derivatives: the
//! entry for the monomial `dx^a dy^b` equals `∂^a_x ∂^b_y f / (a! b!)`.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;
use num_traits::{One, Zero};

/// Highest total degree a jet can carry.
pub const MAX_ORDER: usize = 4;
const LEN: usize = (MAX_ORDER + 1) * (MAX_ORDER + 2) / 2;

/// Exponent pairs `(a, b)` in storage order (grouped by total degree).
const EXPONENTS: [(usize, usize); LEN] = {
    let mut out = [(0usize, 0usize); LEN];
    let mut d = 0;
    let mut k = 0;
    while d <= MAX_ORDER {
        let mut b = 0;
        while b <= d {
            out[k] = (d - b, b);
            k += 1;
            b += 1;
        }
        d += 1;
    }
    out
};

#[inline]
const fn index(a: usize, b: usize) -> usize {
    let d = a + b;
    d * (d + 1) / 2 + b
}

#[inline]
const fn len_for(order: usize) -> usize {
    (order + 1) * (order + 2) / 2
}

/// Scalar types usable as jet coefficients.
pub trait JetScalar:
    Copy
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + From<f64>
    + std::fmt::Debug
    + Send
    + Sync
    + 'static
{
}

impl JetScalar for f64 {}
impl JetScalar for Complex64 {}

/// Truncated two-variable Taylor polynomial.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet<T = f64> {
    order: usize,
    c: [T; LEN],
}

/// Complex-coefficient jet.
pub type CJet = Jet<Complex64>;

impl<T: JetScalar> Jet<T> {
    /// Constant carried at full order (never truncates a product).
    pub fn constant(value: T) -> Self {
        let mut c = [T::zero(); LEN];
        c[0] = value;
        Self { order: MAX_ORDER, c }
    }

    pub fn zero() -> Self {
        Self::constant(T::zero())
    }

    /// Independent variable `axis` at `value`, truncated at `order`.
    pub fn variable(value: T, axis: usize, order: usize) -> Self {
        assert!(axis < 2 && order <= MAX_ORDER);
        let mut c = [T::zero(); LEN];
        c[0] = value;
        if order >= 1 {
            c[if axis == 0 { index(1, 0) } else { index(0, 1) }] = T::one();
        }
        Self { order, c }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> T {
        self.c[0]
    }

    /// Raw Taylor coefficient of `dx^a dy^b`.
    pub fn coeff(&self, a: usize, b: usize) -> T {
        if a + b > self.order {
            T::zero()
        } else {
            self.c[index(a, b)]
        }
    }

    /// First partial derivative at the expansion point.
    pub fn grad(&self, axis: usize) -> T {
        assert!(self.order >= 1, "jet order too low for a first derivative");
        if axis == 0 {
            self.c[index(1, 0)]
        } else {
            self.c[index(0, 1)]
        }
    }

    /// Second partial derivative at the expansion point.
    pub fn hess(&self, i: usize, j: usize) -> T {
        assert!(self.order >= 2, "jet order too low for a second derivative");
        match (i, j) {
            (0, 0) => self.c[index(2, 0)] * T::from(2.0),
            (1, 1) => self.c[index(0, 2)] * T::from(2.0),
            _ => self.c[index(1, 1)],
        }
    }

    /// Partial derivative as a jet, one order lower.
    pub fn d(&self, axis: usize) -> Self {
        assert!(self.order >= 1, "cannot differentiate an order-0 jet");
        let order = self.order - 1;
        let mut c = [T::zero(); LEN];
        for (k, &(a, b)) in EXPONENTS.iter().take(len_for(order)).enumerate() {
            let (sa, sb, factor) = if axis == 0 { (a + 1, b, a + 1) } else { (a, b + 1, b + 1) };
            c[k] = self.c[index(sa, sb)] * T::from(factor as f64);
        }
        Self { order, c }
    }

    /// Truncate to a lower order.
    pub fn truncate(&self, order: usize) -> Self {
        let order = order.min(self.order);
        let mut c = self.c;
        for v in c.iter_mut().skip(len_for(order)) {
            *v = T::zero();
        }
        Self { order, c }
    }

    pub fn scale(&self, s: T) -> Self {
        let mut out = *self;
        for v in out.c.iter_mut().take(len_for(self.order)) {
            *v = *v * s;
        }
        out
    }

    /// `f(self)` for a scalar function given its derivatives at `self.value()`.
    ///
    /// `derivs[k]` must hold `f^{(k)}(value)` for `k <= self.order`.
    pub fn compose(&self, derivs: &[T]) -> Self {
        let order = self.order;
        assert!(derivs.len() > order);
        let mut shift = *self;
        shift.c[0] = T::zero();
        let mut out = Self::constant(derivs[0]).truncate(order);
        let mut power = Self::constant(T::one()).truncate(order);
        let mut factorial = 1.0;
        for (k, &dk) in derivs.iter().enumerate().take(order + 1).skip(1) {
            power = power * shift;
            factorial *= k as f64;
            out += power.scale(dk / T::from(factorial));
        }
        out
    }

    pub fn recip(&self) -> Self {
        let x0 = self.value();
        let mut derivs = [T::zero(); MAX_ORDER + 1];
        let inv = T::one() / x0;
        let mut term = inv;
        for (k, d) in derivs.iter_mut().enumerate() {
            *d = term;
            term = term * inv * T::from(-((k + 1) as f64));
        }
        self.compose(&derivs)
    }

    pub fn powi(&self, n: u32) -> Self {
        let mut out = Self::constant(T::one()).truncate(self.order);
        for _ in 0..n {
            out = out * *self;
        }
        out
    }
}

impl Jet<f64> {
    pub fn exp(&self) -> Self {
        let e = self.value().exp();
        self.compose(&[e; MAX_ORDER + 1])
    }

    pub fn sqrt(&self) -> Self {
        let x = self.value();
        assert!(x > 0.0, "sqrt of non-positive jet value {x}");
        let mut derivs = [0.0; MAX_ORDER + 1];
        // d^k/dx^k x^{1/2} = (1/2)(1/2 - 1)...(1/2 - k + 1) x^{1/2 - k}
        let mut coef = 1.0;
        for (k, d) in derivs.iter_mut().enumerate() {
            *d = coef * x.powf(0.5 - k as f64);
            coef *= 0.5 - k as f64;
        }
        self.compose(&derivs)
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.compose(&[s, c, -s, -c, s])
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.compose(&[c, -s, -c, s, c])
    }

    pub fn to_complex(&self) -> CJet {
        let mut c = [Complex64::zero(); LEN];
        for (dst, src) in c.iter_mut().zip(self.c.iter()) {
            *dst = Complex64::new(*src, 0.0);
        }
        Jet { order: self.order, c }
    }
}

impl CJet {
    pub fn re(&self) -> Jet<f64> {
        let mut c = [0.0; LEN];
        for (dst, src) in c.iter_mut().zip(self.c.iter()) {
            *dst = src.re;
        }
        Jet { order: self.order, c }
    }

    pub fn im(&self) -> Jet<f64> {
        let mut c = [0.0; LEN];
        for (dst, src) in c.iter_mut().zip(self.c.iter()) {
            *dst = src.im;
        }
        Jet { order: self.order, c }
    }
}

impl<T: JetScalar> Add for Jet<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let order = self.order.min(rhs.order);
        let mut c = [T::zero(); LEN];
        for k in 0..len_for(order) {
            c[k] = self.c[k] + rhs.c[k];
        }
        Self { order, c }
    }
}

impl<T: JetScalar> Sub for Jet<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let order = self.order.min(rhs.order);
        let mut c = [T::zero(); LEN];
        for k in 0..len_for(order) {
            c[k] = self.c[k] - rhs.c[k];
        }
        Self { order, c }
    }
}

impl<T: JetScalar> Mul for Jet<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let order = self.order.min(rhs.order);
        let mut c = [T::zero(); LEN];
        let n = len_for(order);
        for i in 0..n {
            let (a1, b1) = EXPONENTS[i];
            let x = self.c[i];
            let remaining = order - (a1 + b1);
            for (j, &(a2, b2)) in EXPONENTS.iter().enumerate().take(len_for(remaining)) {
                c[index(a1 + a2, b1 + b2)] += x * rhs.c[j];
            }
        }
        Self { order, c }
    }
}

impl<T: JetScalar> Div for Jet<T> {
    type Output = Self;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Self) -> Self {
        self * rhs.recip()
    }
}

impl<T: JetScalar> Neg for Jet<T> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-T::one())
    }
}

impl<T: JetScalar> Add<T> for Jet<T> {
    type Output = Self;
    fn add(mut self, rhs: T) -> Self {
        self.c[0] += rhs;
        self
    }
}

impl<T: JetScalar> Sub<T> for Jet<T> {
    type Output = Self;
    fn sub(mut self, rhs: T) -> Self {
        self.c[0] = self.c[0] - rhs;
        self
    }
}

impl<T: JetScalar> Mul<T> for Jet<T> {
    type Output = Self;
    fn mul(self, rhs: T) -> Self {
        self.scale(rhs)
    }
}

impl<T: JetScalar> AddAssign for Jet<T> {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<T: JetScalar> SubAssign for Jet<T> {
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

/// Seeds `(x, y)` at a point, truncated at `order`.
pub fn seed(point: [f64; 2], order: usize) -> [Jet; 2] {
    [Jet::variable(point[0], 0, order), Jet::variable(point[1], 1, order)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn product_rule_matches_hand_derivatives() {
        let [x, y] = seed([0.7, -0.3], 4);
        let f = x * x * y + y.sin();
        assert_relative_eq!(f.value(), 0.49 * -0.3 + (-0.3f64).sin(), epsilon = 1e-15);
        assert_relative_eq!(f.grad(0), 2.0 * 0.7 * -0.3, epsilon = 1e-15);
        assert_relative_eq!(f.grad(1), 0.49 + (-0.3f64).cos(), epsilon = 1e-15);
        assert_relative_eq!(f.hess(0, 1), 1.4, epsilon = 1e-15);
        assert_relative_eq!(f.hess(1, 1), -(-0.3f64).sin(), epsilon = 1e-15);
    }

    #[test]
    fn exp_sqrt_recip_derivatives_to_fourth_order() {
        let [x, _] = seed([0.4, 0.0], 4);
        let f = (x * 2.0).exp() * x.sqrt() / (x + 1.0);
        let d2 = f.d(0).d(0);
        assert_relative_eq!(d2.value(), f.hess(0, 0), epsilon = 1e-12);
        let eval = |t: f64| (2.0 * t).exp() * t.sqrt() / (t + 1.0);
        let fd = |h: f64| {
            (eval(0.4 + 2.0 * h) - 4.0 * eval(0.4 + h) + 6.0 * eval(0.4) - 4.0 * eval(0.4 - h) + eval(0.4 - 2.0 * h)) / h.powi(4)
        };
        // Richardson-extrapolated fourth difference
        let fd4 = (4.0 * fd(0.01) - fd(0.02)) / 3.0;
        let d4 = f.d(0).d(0).d(0).d(0).value();
        assert_relative_eq!(d4, fd4, max_relative = 1e-4);
    }

    #[test]
    fn derivative_lowers_order_and_truncation_is_consistent() {
        let [x, y] = seed([1.0, 2.0], 3);
        let f = x * y * y;
        assert_eq!(f.order(), 3);
        assert_eq!(f.d(1).order(), 2);
        assert_relative_eq!(f.d(1).d(1).value(), 2.0, epsilon = 1e-15);
        assert_eq!(f.truncate(1).coeff(0, 2), 0.0);
    }

    #[test]
    fn complex_recip_matches_scalar() {
        let [x, _] = seed([0.5, 0.0], 2);
        let z = x.to_complex() * Complex64::new(1.0, 2.0) + Complex64::new(0.3, 0.0);
        let r = z.recip();
        let z0 = Complex64::new(0.8, 1.0);
        assert!((r.value() - 1.0 / z0).norm() < 1e-15);
        let expected = -Complex64::new(1.0, 2.0) / (z0 * z0);
        assert!((r.grad(0) - expected).norm() < 1e-14);
    }
}
