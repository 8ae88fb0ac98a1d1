use core::fmt;
use core::iter::Sum;
use core::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

/// Largest number of seeded directions a single [`Dual2`] can carry.
pub const MAX_DIRECTIONS: usize = 16;
const TRI: usize = MAX_DIRECTIONS * (MAX_DIRECTIONS + 1) / 2;

#[inline]
const fn tri(len: usize) -> usize {
    len * (len + 1) / 2
}

#[inline]
const fn packed(i: usize, j: usize) -> usize {
    if i <= j {
        j * (j + 1) / 2 + i
    } else {
        i * (i + 1) / 2 + j
    }
}

/// Second-order forward-mode dual number.
///
/// Carries a value, its gradient and its (symmetric) Hessian with respect to up
/// to [`MAX_DIRECTIONS`] seeded directions. Entries beyond `len` are always zero,
/// so numbers with different `len` combine as if padded.
#[derive(Clone, Copy)]
pub struct Dual2 {
    len: usize,
    value: f64,
    grad: [f64; MAX_DIRECTIONS],
    hess: [f64; TRI],
}

impl Default for Dual2 {
    fn default() -> Self {
        Self::constant(0.0)
    }
}

impl fmt::Debug for Dual2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dual2")
            .field("value", &self.value)
            .field("grad", &&self.grad[..self.len])
            .finish()
    }
}

impl From<f64> for Dual2 {
    fn from(value: f64) -> Self {
        Self::constant(value)
    }
}

impl Dual2 {
    pub const fn constant(value: f64) -> Self {
        Self {
            len: 0,
            value,
            grad: [0.0; MAX_DIRECTIONS],
            hess: [0.0; TRI],
        }
    }

    /// The coordinate function `x + Σ_d seed[d]·ε_d`.
    ///
    /// # Panics
    /// If `seed.len() > MAX_DIRECTIONS`.
    pub fn seeded(value: f64, seed: &[f64]) -> Self {
        assert!(seed.len() <= MAX_DIRECTIONS, "too many dual directions");
        let mut d = Self::constant(value);
        d.len = seed.len();
        d.grad[..seed.len()].copy_from_slice(seed);
        d
    }

    /// Independent variable number `index` out of `len` directions.
    pub fn variable(value: f64, index: usize, len: usize) -> Self {
        assert!(index < len && len <= MAX_DIRECTIONS, "bad dual direction");
        let mut d = Self::constant(value);
        d.len = len;
        d.grad[index] = 1.0;
        d
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.value
    }

    /// Number of active directions.
    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_constant(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn first(&self, d: usize) -> f64 {
        if d < MAX_DIRECTIONS {
            self.grad[d]
        } else {
            0.0
        }
    }

    #[inline]
    pub fn second(&self, d: usize, e: usize) -> f64 {
        if d < MAX_DIRECTIONS && e < MAX_DIRECTIONS {
            self.hess[packed(d, e)]
        } else {
            0.0
        }
    }

    pub fn gradient(&self) -> &[f64] {
        &self.grad[..self.len]
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.grad[..self.len].iter().all(|x| x.is_finite())
            && self.hess[..tri(self.len)].iter().all(|x| x.is_finite())
    }

    /// Apply a scalar function given its value and first two derivatives at `self.value`.
    #[inline]
    pub fn chain(&self, f: f64, df: f64, d2f: f64) -> Self {
        let mut out = Self::constant(f);
        let n = self.len;
        out.len = n;
        for i in 0..n {
            out.grad[i] = df * self.grad[i];
        }
        for j in 0..n {
            let gj = self.grad[j];
            let base = tri(j);
            for i in 0..=j {
                out.hess[base + i] = df * self.hess[base + i] + d2f * self.grad[i] * gj;
            }
        }
        out
    }

    pub fn sin(self) -> Self {
        let (s, c) = (libm::sin(self.value), libm::cos(self.value));
        self.chain(s, c, -s)
    }

    pub fn cos(self) -> Self {
        let (s, c) = (libm::sin(self.value), libm::cos(self.value));
        self.chain(c, -s, -c)
    }

    pub fn sinh(self) -> Self {
        let (s, c) = (libm::sinh(self.value), libm::cosh(self.value));
        self.chain(s, c, s)
    }

    pub fn cosh(self) -> Self {
        let (s, c) = (libm::sinh(self.value), libm::cosh(self.value));
        self.chain(c, s, c)
    }

    pub fn exp(self) -> Self {
        let e = libm::exp(self.value);
        self.chain(e, e, e)
    }

    pub fn ln(self) -> Self {
        let x = self.value;
        self.chain(libm::log(x), 1.0 / x, -1.0 / (x * x))
    }

    pub fn sqrt(self) -> Self {
        let s = libm::sqrt(self.value);
        self.chain(s, 0.5 / s, -0.25 / (s * self.value))
    }

    pub fn recip(self) -> Self {
        let x = self.value;
        let r = 1.0 / x;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }

    pub fn powi(self, n: i32) -> Self {
        let x = self.value;
        match n {
            0 => Self::constant(1.0),
            1 => self,
            2 => self * self,
            _ => {
                let nf = f64::from(n);
                self.chain(
                    powi(x, n),
                    nf * powi(x, n - 1),
                    nf * (nf - 1.0) * powi(x, n - 2),
                )
            }
        }
    }

    pub fn powf(self, p: f64) -> Self {
        let x = self.value;
        self.chain(
            libm::pow(x, p),
            p * libm::pow(x, p - 1.0),
            p * (p - 1.0) * libm::pow(x, p - 2.0),
        )
    }

    /// `self^other` with both operands dual, via `exp(other·ln self)`.
    pub fn pow(self, other: Self) -> Self {
        if other.is_constant() {
            let p = other.value;
            if libm::round(p) == p && libm::fabs(p) < 64.0 {
                return self.powi(p as i32);
            }
            return self.powf(p);
        }
        (other * self.ln()).exp()
    }
}

/// Integer power by repeated squaring; `powi` is not in `core`.
pub fn powi(x: f64, n: i32) -> f64 {
    let mut base = if n < 0 { 1.0 / x } else { x };
    let mut e = n.unsigned_abs();
    let mut acc = 1.0;
    while e > 0 {
        if e & 1 == 1 {
            acc *= base;
        }
        base *= base;
        e >>= 1;
    }
    acc
}

impl Neg for Dual2 {
    type Output = Self;
    fn neg(mut self) -> Self {
        self.value = -self.value;
        for g in &mut self.grad[..self.len] {
            *g = -*g;
        }
        for h in &mut self.hess[..tri(self.len)] {
            *h = -*h;
        }
        self
    }
}

impl Add for Dual2 {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl AddAssign for Dual2 {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        self.value += rhs.value;
        self.len = self.len.max(rhs.len);
        for i in 0..rhs.len {
            self.grad[i] += rhs.grad[i];
        }
        for i in 0..tri(rhs.len) {
            self.hess[i] += rhs.hess[i];
        }
    }
}

impl Sub for Dual2 {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: Self) -> Self {
        self -= rhs;
        self
    }
}

impl SubAssign for Dual2 {
    #[inline]
    fn sub_assign(&mut self, rhs: Self) {
        self.value -= rhs.value;
        self.len = self.len.max(rhs.len);
        for i in 0..rhs.len {
            self.grad[i] -= rhs.grad[i];
        }
        for i in 0..tri(rhs.len) {
            self.hess[i] -= rhs.hess[i];
        }
    }
}

impl Mul for Dual2 {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        if rhs.len == 0 {
            return self * rhs.value;
        }
        if self.len == 0 {
            return rhs * self.value;
        }
        let (a, b) = (self.value, rhs.value);
        let n = self.len.max(rhs.len);
        let mut out = Self::constant(a * b);
        out.len = n;
        for i in 0..n {
            out.grad[i] = self.grad[i] * b + a * rhs.grad[i];
        }
        for j in 0..n {
            let base = tri(j);
            for i in 0..=j {
                out.hess[base + i] = self.hess[base + i] * b
                    + a * rhs.hess[base + i]
                    + self.grad[i] * rhs.grad[j]
                    + self.grad[j] * rhs.grad[i];
            }
        }
        out
    }
}

impl MulAssign for Dual2 {
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

impl Div for Dual2 {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        if rhs.len == 0 {
            return self * (1.0 / rhs.value);
        }
        self * rhs.recip()
    }
}

impl DivAssign for Dual2 {
    fn div_assign(&mut self, rhs: Self) {
        *self = *self / rhs;
    }
}

impl Add<f64> for Dual2 {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: f64) -> Self {
        self.value += rhs;
        self
    }
}

impl Sub<f64> for Dual2 {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: f64) -> Self {
        self.value -= rhs;
        self
    }
}

impl Mul<f64> for Dual2 {
    type Output = Self;
    #[inline]
    fn mul(mut self, rhs: f64) -> Self {
        self.value *= rhs;
        for g in &mut self.grad[..self.len] {
            *g *= rhs;
        }
        for h in &mut self.hess[..tri(self.len)] {
            *h *= rhs;
        }
        self
    }
}

impl Div<f64> for Dual2 {
    type Output = Self;
    #[inline]
    fn div(self, rhs: f64) -> Self {
        self * (1.0 / rhs)
    }
}

impl Add<Dual2> for f64 {
    type Output = Dual2;
    fn add(self, rhs: Dual2) -> Dual2 {
        rhs + self
    }
}

impl Sub<Dual2> for f64 {
    type Output = Dual2;
    fn sub(self, rhs: Dual2) -> Dual2 {
        -rhs + self
    }
}

impl Mul<Dual2> for f64 {
    type Output = Dual2;
    fn mul(self, rhs: Dual2) -> Dual2 {
        rhs * self
    }
}

impl Div<Dual2> for f64 {
    type Output = Dual2;
    fn div(self, rhs: Dual2) -> Dual2 {
        rhs.recip() * self
    }
}

impl Sum for Dual2 {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::constant(0.0), |acc, x| acc + x)
    }
}

impl<'a> Sum<&'a Dual2> for Dual2 {
    fn sum<I: Iterator<Item = &'a Self>>(iter: I) -> Self {
        iter.fold(Self::constant(0.0), |acc, x| acc + *x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * (1.0 + b.abs())
    }

    #[test]
    fn product_rule_two_vars() {
        let x = Dual2::variable(1.5, 0, 2);
        let y = Dual2::variable(-0.7, 1, 2);
        let f = x * x * y;
        assert!(close(f.value(), 1.5 * 1.5 * -0.7));
        assert!(close(f.first(0), 2.0 * 1.5 * -0.7));
        assert!(close(f.first(1), 1.5 * 1.5));
        assert!(close(f.second(0, 0), 2.0 * -0.7));
        assert!(close(f.second(0, 1), 3.0));
        assert!(close(f.second(1, 0), 3.0));
        assert!(close(f.second(1, 1), 0.0));
    }

    #[test]
    fn transcendental_second_derivatives() {
        let x0 = 0.37;
        let x = Dual2::variable(x0, 0, 1);
        let cases: [(Dual2, f64, f64); 6] = [
            (x.sin(), x0.cos(), -x0.sin()),
            (x.cosh(), x0.sinh(), x0.cosh()),
            (x.sqrt(), 0.5 / x0.sqrt(), -0.25 * x0.powf(-1.5)),
            (x.ln(), 1.0 / x0, -1.0 / (x0 * x0)),
            (x.powi(5), 5.0 * x0.powi(4), 20.0 * x0.powi(3)),
            (x.recip(), -1.0 / (x0 * x0), 2.0 / x0.powi(3)),
        ];
        for (d, df, d2f) in cases {
            assert!(close(d.first(0), df));
            assert!(close(d.second(0, 0), d2f));
        }
    }

    #[test]
    fn quotient_matches_closed_form() {
        let x = Dual2::variable(2.0, 0, 2);
        let y = Dual2::variable(3.0, 1, 2);
        let f = x / y;
        assert!(close(f.first(1), -2.0 / 9.0));
        assert!(close(f.second(0, 1), -1.0 / 9.0));
        assert!(close(f.second(1, 1), 2.0 * 2.0 / 27.0));
    }

    #[test]
    fn mixed_lengths_pad_with_zero() {
        let c = Dual2::constant(4.0);
        let x = Dual2::variable(1.0, 2, 3);
        let f = c + x * c;
        assert_eq!(f.len(), 3);
        assert_eq!(f.first(2), 4.0);
        assert_eq!(f.first(0), 0.0);
    }

    #[test]
    fn integer_power() {
        assert_eq!(powi(2.0, 10), 1024.0);
        assert_eq!(powi(2.0, -2), 0.25);
        assert_eq!(powi(7.0, 0), 1.0);
    }
}
