//! Double-double arithmetic (about 32 significant digits) built on
//! error-free transformations. Used where a conjugation by an
//! ill-conditioned triangular factor would otherwise lose too many digits.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use crate::{CMat, C64};

#[inline]
pub fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
pub fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub fn new(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    pub fn recip(self) -> Self {
        Dd::ONE / self
    }

    pub fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return Dd::ZERO;
        }
        let x = self.hi.sqrt();
        let (p, e) = two_prod(x, x);
        let r = ((self.hi - p) - e + self.lo) / (2.0 * x);
        let (hi, lo) = quick_two_sum(x, r);
        Dd { hi, lo }
    }
}

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Dd::new(x)
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl Add for Dd {
    type Output = Dd;
    #[inline]
    fn add(self, b: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl AddAssign for Dd {
    fn add_assign(&mut self, b: Dd) {
        *self = *self + b;
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, b: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, b.hi);
        let e = e + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Mul<f64> for Dd {
    type Output = Dd;
    fn mul(self, b: f64) -> Dd {
        let (p, e) = two_prod(self.hi, b);
        let (hi, lo) = quick_two_sum(p, e + self.lo * b);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b * q1;
        let q2 = r.hi / b.hi;
        let r = r - b * q2;
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::new(q3)
    }
}

/// Complex number with double-double parts.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Cdd {
    pub re: Dd,
    pub im: Dd,
}

impl Cdd {
    pub const ZERO: Cdd = Cdd { re: Dd::ZERO, im: Dd::ZERO };
    pub const ONE: Cdd = Cdd { re: Dd::ONE, im: Dd::ZERO };

    pub fn new(z: C64) -> Self {
        Cdd { re: Dd::new(z.re), im: Dd::new(z.im) }
    }

    pub fn to_c64(self) -> C64 {
        C64::new(self.re.to_f64(), self.im.to_f64())
    }

    pub fn conj(self) -> Self {
        Cdd { re: self.re, im: -self.im }
    }

    pub fn norm_sqr(self) -> Dd {
        self.re * self.re + self.im * self.im
    }

    /// Approximate modulus, sufficient for pivoting.
    pub fn abs_f64(self) -> f64 {
        self.to_c64().norm()
    }

    pub fn scale(self, s: f64) -> Self {
        Cdd { re: self.re * s, im: self.im * s }
    }

    pub fn recip(self) -> Self {
        let d = self.norm_sqr();
        Cdd { re: self.re / d, im: -(self.im / d) }
    }

    pub fn is_real(self) -> bool {
        self.im.hi == 0.0 && self.im.lo == 0.0
    }
}

impl From<C64> for Cdd {
    fn from(z: C64) -> Self {
        Cdd::new(z)
    }
}

impl Neg for Cdd {
    type Output = Cdd;
    fn neg(self) -> Cdd {
        Cdd { re: -self.re, im: -self.im }
    }
}

impl Add for Cdd {
    type Output = Cdd;
    #[inline]
    fn add(self, b: Cdd) -> Cdd {
        Cdd { re: self.re + b.re, im: self.im + b.im }
    }
}

impl AddAssign for Cdd {
    fn add_assign(&mut self, b: Cdd) {
        *self = *self + b;
    }
}

impl Sub for Cdd {
    type Output = Cdd;
    fn sub(self, b: Cdd) -> Cdd {
        Cdd { re: self.re - b.re, im: self.im - b.im }
    }
}

impl Mul for Cdd {
    type Output = Cdd;
    #[inline]
    fn mul(self, b: Cdd) -> Cdd {
        if self.is_real() && b.is_real() {
            return Cdd { re: self.re * b.re, im: Dd::ZERO };
        }
        Cdd { re: self.re * b.re - self.im * b.im, im: self.re * b.im + self.im * b.re }
    }
}

impl Div for Cdd {
    type Output = Cdd;
    fn div(self, b: Cdd) -> Cdd {
        if self.is_real() && b.is_real() {
            return Cdd { re: self.re / b.re, im: Dd::ZERO };
        }
        self * b.recip()
    }
}

/// Dense row-major matrix of `Cdd`.
#[derive(Clone, Debug, PartialEq)]
pub struct CddMat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Cdd>,
}

impl CddMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Cdd::ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = Cdd::ONE;
        }
        m
    }

    pub fn from_cmat(m: &CMat) -> Self {
        let mut out = Self::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out.data[i * m.ncols() + j] = Cdd::new(m[(i, j)]);
            }
        }
        out
    }

    pub fn to_cmat(&self) -> CMat {
        CMat::from_fn(self.rows, self.cols, |i, j| self.data[i * self.cols + j].to_c64())
    }

    /// Low-order parts left over after rounding to double.
    pub fn residual_cmat(&self) -> CMat {
        CMat::from_fn(self.rows, self.cols, |i, j| {
            let z = self.data[i * self.cols + j];
            let r = C64::new(z.re.hi, z.im.hi);
            let full = z - Cdd::new(r);
            full.to_c64()
        })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Cdd {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Cdd) {
        self.data[i * self.cols + j] = v;
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.get(i, j);
            }
        }
        out
    }

    /// Matrix product skipping exact zeros of the left factor.
    pub fn mul(&self, b: &CddMat) -> CddMat {
        assert_eq!(self.cols, b.rows);
        let mut out = CddMat::zeros(self.rows, b.cols);
        for i in 0..self.rows {
            let row = &mut out.data[i * b.cols..(i + 1) * b.cols];
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == Cdd::ZERO {
                    continue;
                }
                let brow = &b.data[k * b.cols..(k + 1) * b.cols];
                for (o, &bv) in row.iter_mut().zip(brow) {
                    if bv != Cdd::ZERO {
                        *o += a * bv;
                    }
                }
            }
        }
        out
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.to_c64().norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn sub(&self, b: &CddMat) -> CddMat {
        CddMat { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&b.data).map(|(&x, &y)| x - y).collect() }
    }
}

/// Solves `A X = B` for small square `A` by Gaussian elimination with partial pivoting.
pub fn solve_small(a: &CddMat, b: &CddMat) -> Option<CddMat> {
    let n = a.rows;
    let mut a = a.clone();
    let mut b = b.clone();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a.get(i, k).abs_f64().total_cmp(&a.get(j, k).abs_f64()))?;
        if a.get(p, k).abs_f64() == 0.0 {
            return None;
        }
        if p != k {
            for j in 0..n {
                let t = a.get(k, j);
                a.set(k, j, a.get(p, j));
                a.set(p, j, t);
            }
            for j in 0..b.cols {
                let t = b.get(k, j);
                b.set(k, j, b.get(p, j));
                b.set(p, j, t);
            }
        }
        let piv = a.get(k, k).recip();
        for i in k + 1..n {
            let f = a.get(i, k) * piv;
            if f == Cdd::ZERO {
                continue;
            }
            for j in k..n {
                let v = a.get(i, j) - f * a.get(k, j);
                a.set(i, j, v);
            }
            for j in 0..b.cols {
                let v = b.get(i, j) - f * b.get(k, j);
                b.set(i, j, v);
            }
        }
    }
    for k in (0..n).rev() {
        let piv = a.get(k, k).recip();
        for j in 0..b.cols {
            let mut v = b.get(k, j);
            for l in k + 1..n {
                v = v - a.get(k, l) * b.get(l, j);
            }
            b.set(k, j, v * piv);
        }
    }
    Some(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_bits_lost_in_double() {
        let a = Dd::new(1.0) + Dd::new(1e-20);
        assert_eq!(a.hi, 1.0);
        assert_eq!(a.lo, 1e-20);
        let third = Dd::ONE / Dd::new(3.0);
        let back = third * Dd::new(3.0) - Dd::ONE;
        assert!(back.to_f64().abs() < 1e-30);
        let s = Dd::new(2.0).sqrt();
        assert!((s * s - Dd::new(2.0)).to_f64().abs() < 1e-30);
    }

    #[test]
    fn small_solve_is_accurate() {
        let a = CddMat::from_cmat(&CMat::from_row_slice(
            2,
            2,
            &[C64::new(1.0, 1.0), C64::new(2.0, 0.0), C64::new(0.5, 0.0), C64::new(3.0, -1.0)],
        ));
        let x = solve_small(&a, &CddMat::identity(2)).unwrap();
        let r = a.mul(&x).sub(&CddMat::identity(2));
        assert!(r.frobenius() < 1e-30);
    }
}
