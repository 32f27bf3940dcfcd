//! Forward-mode dual numbers, `value + deriv·ε` with `ε² = 0`.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::scalar::{lit, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual<T> {
    pub value: T,
    pub deriv: T,
}

impl<T: Real> Dual<T> {
    pub fn new(value: T, deriv: T) -> Self {
        Self { value, deriv }
    }

    /// A constant (zero tangent).
    pub fn constant(value: T) -> Self {
        Self { value, deriv: T::zero() }
    }

    /// The independent variable (unit tangent).
    pub fn variable(value: T) -> Self {
        Self { value, deriv: T::one() }
    }

    pub fn sqrt(self) -> Self {
        let r = self.value.sqrt();
        Self::new(r, self.deriv / (lit::<T>(2.0) * r))
    }

    pub fn exp(self) -> Self {
        let e = self.value.exp();
        Self::new(e, self.deriv * e)
    }

    pub fn sin(self) -> Self {
        Self::new(self.value.sin(), self.deriv * self.value.cos())
    }

    pub fn cos(self) -> Self {
        Self::new(self.value.cos(), -self.deriv * self.value.sin())
    }

    pub fn tan(self) -> Self {
        let t = self.value.tan();
        Self::new(t, self.deriv * (T::one() + t * t))
    }

    pub fn atan(self) -> Self {
        Self::new(self.value.atan(), self.deriv / (T::one() + self.value * self.value))
    }

    pub fn powi(self, k: i32) -> Self {
        if k == 0 {
            return Self::constant(T::one());
        }
        let p = self.value.powi(k - 1);
        Self::new(p * self.value, self.deriv * lit::<T>(k as f64) * p)
    }

    pub fn scale(self, c: T) -> Self {
        Self::new(self.value * c, self.deriv * c)
    }
}

impl<T: Real> Add for Dual<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.value + o.value, self.deriv + o.deriv)
    }
}

impl<T: Real> Sub for Dual<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.value - o.value, self.deriv - o.deriv)
    }
}

impl<T: Real> Mul for Dual<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::new(self.value * o.value, self.deriv * o.value + self.value * o.deriv)
    }
}

impl<T: Real> Div for Dual<T> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let q = self.value / o.value;
        Self::new(q, (self.deriv - q * o.deriv) / o.value)
    }
}

impl<T: Real> Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.value, -self.deriv)
    }
}

impl<T: Real> Add<T> for Dual<T> {
    type Output = Self;
    fn add(self, c: T) -> Self {
        Self::new(self.value + c, self.deriv)
    }
}

impl<T: Real> Sub<T> for Dual<T> {
    type Output = Self;
    fn sub(self, c: T) -> Self {
        Self::new(self.value - c, self.deriv)
    }
}

impl<T: Real> Mul<T> for Dual<T> {
    type Output = Self;
    fn mul(self, c: T) -> Self {
        self.scale(c)
    }
}

impl<T: Real> Div<T> for Dual<T> {
    type Output = Self;
    fn div(self, c: T) -> Self {
        Self::new(self.value / c, self.deriv / c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule() {
        let x = Dual::variable(3.0_f64);
        let y = x * x * x;
        assert_eq!(y.value, 27.0);
        assert_eq!(y.deriv, 27.0);
    }

    #[test]
    fn atan_tan_inverse_derivatives() {
        let x = Dual::variable(0.7_f64);
        let r = x.atan().tan();
        assert!((r.value - 0.7).abs() < 1e-15);
        assert!((r.deriv - 1.0).abs() < 1e-14);
    }

    #[test]
    fn quotient_and_sqrt_match_finite_difference() {
        let f = |x: Dual<f64>| (x * x + 1.0).sqrt() / (x.exp() + 2.0);
        let x0 = 0.4;
        let h = 1e-6;
        let fd = (f(Dual::constant(x0 + h)).value - f(Dual::constant(x0 - h)).value) / (2.0 * h);
        assert!((f(Dual::variable(x0)).deriv - fd).abs() < 1e-9);
    }

    #[test]
    fn powi_zero_and_negative() {
        let x = Dual::variable(2.0_f64);
        assert_eq!(x.powi(0).deriv, 0.0);
        let r = x.powi(-2);
        assert!((r.value - 0.25).abs() < 1e-15);
        assert!((r.deriv + 0.25).abs() < 1e-15);
    }
}
