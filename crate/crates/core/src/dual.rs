//! Forward-mode dual numbers, nested for higher derivatives.
//!
//! A dual number x + x'ε with ε² = 0 carries one directional derivative
//! through arithmetic. Nesting `Dual<Dual<f64>>` propagates second
//! derivatives: seeding the inner component in direction i and the outer
//! component in direction j makes the ε·δ coefficient equal ∂²f/∂xⁱ∂xʲ.
//! Derivatives obtained this way are exact to machine precision for the
//! closed-form expressions used throughout this crate (no truncation error).

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Scalar types that support the arithmetic and elementary functions the
/// toolkit differentiates through. Implemented by `f64` and, recursively,
/// by `Dual<T>` for any `T: Real`, so the same generic evaluation code
/// yields values, first and second derivatives.
pub trait Real:
    Copy
    + Clone
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(x: f64) -> Self;
    /// The underlying primal value, unwrapped through all dual levels.
    fn value(self) -> f64;
    fn recip(self) -> Self;
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    /// |x|, with the derivative of the branch the primal value selects.
    fn abs(self) -> Self;
    /// Integer power by repeated multiplication; exact for polynomials.
    fn powi(self, n: i32) -> Self;
    /// Real power x^y = exp(y ln x); requires a positive base off the
    /// integer-exponent fast path.
    fn powf(self, y: Self) -> Self {
        (y * self.ln()).exp()
    }
    fn zero() -> Self {
        Self::from_f64(0.0)
    }
    fn one() -> Self {
        Self::from_f64(1.0)
    }
}

impl Real for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn value(self) -> f64 {
        self
    }
    fn recip(self) -> Self {
        f64::recip(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    fn powf(self, y: Self) -> Self {
        f64::powf(self, y)
    }
}

/// x + x'ε with ε² = 0. `re` is the primal part, `im` the derivative part.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<T> {
    pub re: T,
    pub im: T,
}

/// First-order dual scalar.
pub type D1 = Dual<f64>;
/// Second-order nested dual scalar.
pub type D2 = Dual<D1>;
/// Third-order nested dual scalar.
pub type D3 = Dual<D2>;

impl<T: Real> Dual<T> {
    pub fn new(re: T, im: T) -> Self {
        Dual { re, im }
    }
    /// Lift a constant: derivative part zero.
    pub fn constant(re: T) -> Self {
        Dual { re, im: T::zero() }
    }
    /// Lift a variable seeded with unit derivative.
    pub fn variable(re: T) -> Self {
        Dual { re, im: T::one() }
    }
}

impl<T: Real> Add for Dual<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Dual::new(self.re + rhs.re, self.im + rhs.im)
    }
}

impl<T: Real> Sub for Dual<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Dual::new(self.re - rhs.re, self.im - rhs.im)
    }
}

impl<T: Real> Mul for Dual<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Dual::new(self.re * rhs.re, self.re * rhs.im + self.im * rhs.re)
    }
}

impl<T: Real> Div for Dual<T> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let inv = rhs.re.recip();
        Dual::new(self.re * inv, (self.im - self.re * inv * rhs.im) * inv)
    }
}

impl<T: Real> Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual::new(-self.re, -self.im)
    }
}

impl<T: Real> Real for Dual<T> {
    fn from_f64(x: f64) -> Self {
        Dual::constant(T::from_f64(x))
    }
    fn value(self) -> f64 {
        self.re.value()
    }
    fn recip(self) -> Self {
        let inv = self.re.recip();
        Dual::new(inv, -inv * inv * self.im)
    }
    fn sqrt(self) -> Self {
        let r = self.re.sqrt();
        Dual::new(r, self.im * (T::from_f64(2.0) * r).recip())
    }
    fn sin(self) -> Self {
        Dual::new(self.re.sin(), self.im * self.re.cos())
    }
    fn cos(self) -> Self {
        Dual::new(self.re.cos(), -(self.im * self.re.sin()))
    }
    fn exp(self) -> Self {
        let e = self.re.exp();
        Dual::new(e, self.im * e)
    }
    fn ln(self) -> Self {
        Dual::new(self.re.ln(), self.im * self.re.recip())
    }
    fn abs(self) -> Self {
        if self.re.value() < 0.0 {
            -self
        } else {
            self
        }
    }
    fn powi(self, n: i32) -> Self {
        if n == 0 {
            return Self::one();
        }
        if n < 0 {
            return self.powi(-n).recip();
        }
        let mut acc = Self::one();
        let mut base = self;
        let mut k = n as u32;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            k >>= 1;
        }
        acc
    }
}

/// Lift an f64 point to duals with zero derivative parts.
pub fn lift<R: Real>(x: &[f64]) -> Vec<R> {
    x.iter().map(|&xi| R::from_f64(xi)).collect()
}

/// Wrap a point one dual level up, seeding unit speed in coordinate `dir`.
/// Works at every tower level, so gradients of already-dual quantities are
/// obtained by the same helper.
pub fn seed<R: Real>(x: &[R], dir: usize) -> Vec<Dual<R>> {
    x.iter()
        .enumerate()
        .map(|(k, &xk)| {
            if k == dir {
                Dual::variable(xk)
            } else {
                Dual::constant(xk)
            }
        })
        .collect()
}

/// Seed an f64 point for one second-derivative entry: inner level in
/// direction `i`, outer level in direction `j`. The ∂²/∂xⁱ∂xʲ value is the
/// `im.im` part of the result.
pub fn seed2(x: &[f64], i: usize, j: usize) -> Vec<D2> {
    x.iter()
        .enumerate()
        .map(|(k, &xk)| D2 {
            re: D1 {
                re: xk,
                im: if k == i { 1.0 } else { 0.0 },
            },
            im: D1 {
                re: if k == j { 1.0 } else { 0.0 },
                im: 0.0,
            },
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly<R: Real>(x: &[R]) -> R {
        // f(a, b) = a³b + 2ab² - b
        x[0].powi(3) * x[1] + R::from_f64(2.0) * x[0] * x[1].powi(2) - x[1]
    }

    #[test]
    fn first_derivative_of_polynomial_is_exact() {
        // ∂f/∂a = 3a²b + 2b² at (2, 3) = 36 + 18 = 54
        let x = seed::<f64>(&[2.0, 3.0], 0);
        assert_eq!(poly(&x).im, 54.0);
        // ∂f/∂b = a³ + 4ab - 1 at (2, 3) = 8 + 24 - 1 = 31
        let x = seed::<f64>(&[2.0, 3.0], 1);
        assert_eq!(poly(&x).im, 31.0);
    }

    #[test]
    fn second_derivative_cross_term_is_exact() {
        // ∂²f/∂a∂b = 3a² + 4b at (2, 3) = 12 + 12 = 24
        let x = seed2(&[2.0, 3.0], 0, 1);
        assert_eq!(poly(&x).im.im, 24.0);
        let x = seed2(&[2.0, 3.0], 1, 0);
        assert_eq!(poly(&x).im.im, 24.0);
        // ∂²f/∂a² = 6ab at (2, 3) = 36
        let x = seed2(&[2.0, 3.0], 0, 0);
        assert_eq!(poly(&x).im.im, 36.0);
    }

    #[test]
    fn elementary_functions_differentiate_correctly() {
        let x = 0.7_f64;
        let d = D1 { re: x, im: 1.0 };
        assert!((d.sin().im - x.cos()).abs() < 1e-15);
        assert!((d.cos().im + x.sin()).abs() < 1e-15);
        assert!((d.exp().im - x.exp()).abs() < 1e-15);
        assert!((d.ln().im - 1.0 / x).abs() < 1e-15);
        assert!((d.sqrt().im - 0.5 / x.sqrt()).abs() < 1e-15);
        assert!((d.recip().im + 1.0 / (x * x)).abs() < 1e-15);
    }

    #[test]
    fn division_quotient_rule() {
        // d/dx (x / (1 + x²)) = (1 - x²)/(1 + x²)²
        let x = 1.3_f64;
        let d = D1 { re: x, im: 1.0 };
        let one = D1::from_f64(1.0);
        let g = d / (one + d * d);
        let expect = (1.0 - x * x) / (1.0 + x * x).powi(2);
        assert!((g.im - expect).abs() < 1e-15);
    }

    #[test]
    fn powf_matches_exp_log_composition() {
        let b = D1 { re: 2.0, im: 1.0 };
        let e = D1::from_f64(1.5);
        let p = b.powf(e);
        // d/dx x^1.5 = 1.5 x^0.5
        assert!((p.re - 2.0_f64.powf(1.5)).abs() < 1e-14);
        assert!((p.im - 1.5 * 2.0_f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn negative_integer_powers() {
        let d = D1 { re: 2.0, im: 1.0 };
        let p = d.powi(-2);
        assert!((p.re - 0.25).abs() < 1e-15);
        // d/dx x⁻² = -2x⁻³ = -0.25
        assert!((p.im + 0.25).abs() < 1e-15);
    }

    #[test]
    fn abs_uses_primal_branch() {
        let d = D1 { re: -3.0, im: 1.0 };
        let a = d.abs();
        assert_eq!(a.re, 3.0);
        assert_eq!(a.im, -1.0);
    }

    #[test]
    fn third_order_tower_evaluates() {
        // f(x) = x⁴, ∂³f = 24x; seed all three levels in the single direction.
        let x = 1.5_f64;
        let d3 = D3 {
            re: D2 {
                re: D1 { re: x, im: 1.0 },
                im: D1 { re: 1.0, im: 0.0 },
            },
            im: D2 {
                re: D1 { re: 1.0, im: 0.0 },
                im: D1 { re: 0.0, im: 0.0 },
            },
        };
        let f = d3.powi(4);
        assert!((f.im.im.im - 24.0 * x).abs() < 1e-12);
    }
}
