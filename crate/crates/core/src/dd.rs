//! Double-double arithmetic (~106-bit significands).
//!
//! Long products of hyperbolic maps have entries of size e^{2t} while the
//! protocol result is exactly −1; plain f64 leaves errors of order
//! 1e-16·e^{2t}. Carrying every segment map in double-double pushes that
//! floor to ~1e-32·e^{2t}, far below anything the interferometer resolves.

use core::cmp::Ordering;
use core::ops::{Add, Div, Mul, Neg, Sub};

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::Mat;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
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
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, libm::fma(a, b, -p))
}

pub const PI_2: Dd = Dd { hi: 1.570_796_326_794_896_6, lo: 6.123_233_995_736_766e-17 };
pub const LN2: Dd = Dd { hi: 0.693_147_180_559_945_3, lo: 2.319_046_813_846_299_6e-17 };
pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };
pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

impl Dd {
    pub const fn new(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    fn norm(hi: f64, lo: f64) -> Dd {
        let (h, l) = quick_two_sum(hi, lo);
        Dd { hi: h, lo: l }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> Dd {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    pub fn mul_f64(self, b: f64) -> Dd {
        let (p, e) = two_prod(self.hi, b);
        Dd::norm(p, e + self.lo * b)
    }

    /// Exact product of two f64 values.
    pub fn prod(a: f64, b: f64) -> Dd {
        let (p, e) = two_prod(a, b);
        Dd { hi: p, lo: e }
    }

    pub fn div_f64(self, b: f64) -> Dd {
        let q1 = self.hi / b;
        let r = self - Dd::prod(q1, b);
        let q2 = r.hi / b;
        Dd::norm(q1, q2)
    }

    pub fn recip(self) -> Dd {
        ONE / self
    }

    pub fn sqrt(self) -> Dd {
        if self.hi <= 0.0 {
            return ZERO;
        }
        let s = libm::sqrt(self.hi);
        let r = self - Dd::prod(s, s);
        Dd::norm(s, r.hi / (2.0 * s))
    }

    fn scale_pow2(self, k: i32) -> Dd {
        let f = libm::ldexp(1.0, k);
        Dd { hi: self.hi * f, lo: self.lo * f }
    }

    /// e^x − 1 for |x| ≲ 0.35 by Taylor series after halving.
    fn expm1_small(x: Dd) -> Dd {
        const HALVINGS: i32 = 10;
        let r = x.scale_pow2(-HALVINGS);
        let mut term = r;
        let mut sum = r;
        for n in 2..14 {
            term = (term * r).div_f64(n as f64);
            sum = sum + term;
            if term.hi.abs() < 1e-36 {
                break;
            }
        }
        for _ in 0..HALVINGS {
            sum = sum * (sum + Dd::new(2.0));
        }
        sum
    }

    pub fn exp(self) -> Dd {
        if self.hi > 709.0 {
            return Dd::new(f64::INFINITY);
        }
        if self.hi < -745.0 {
            return ZERO;
        }
        let k = libm::round(self.hi / LN2.hi);
        let r = self - LN2.mul_f64(k);
        (Dd::expm1_small(r) + ONE).scale_pow2(k as i32)
    }

    /// e^x − 1 without cancellation near zero.
    pub fn expm1(self) -> Dd {
        if self.hi.abs() < 0.3 {
            Dd::expm1_small(self)
        } else {
            self.exp() - ONE
        }
    }

    pub fn cosh(self) -> Dd {
        let e = self.exp();
        (e + e.recip()).scale_pow2(-1)
    }

    pub fn sinh(self) -> Dd {
        if self.hi.abs() < 0.3 {
            let e = self.expm1();
            // sinh x = (e^x − 1)(1 + e^{−x}) / 2, cancellation-free.
            return (e * (ONE + (ONE + e).recip())).scale_pow2(-1);
        }
        let e = self.exp();
        (e - e.recip()).scale_pow2(-1)
    }

    /// sin and cos for |x| ≤ π/4 by Taylor series.
    fn sincos_small(x: Dd) -> (Dd, Dd) {
        let x2 = x * x;
        let mut s = x;
        let mut term = x;
        for n in 1..20 {
            term = -(term * x2).div_f64(((2 * n) * (2 * n + 1)) as f64);
            s = s + term;
            if term.hi.abs() < 1e-36 {
                break;
            }
        }
        let mut c = ONE;
        let mut term = ONE;
        for n in 1..20 {
            term = -(term * x2).div_f64(((2 * n - 1) * (2 * n)) as f64);
            c = c + term;
            if term.hi.abs() < 1e-36 {
                break;
            }
        }
        (s, c)
    }

    /// (sin, cos) of `quarters`·π/2 + `rem`, with `rem` reduced further if
    /// it exceeds a quarter turn. Whole quarter turns are applied exactly.
    pub fn sincos_quarters(quarters: i64, rem: Dd) -> (Dd, Dd) {
        let k = libm::round(rem.hi / PI_2.hi);
        let r = rem - PI_2.mul_f64(k);
        let q = (quarters + k as i64).rem_euclid(4);
        let (s, c) = Dd::sincos_small(r);
        match q {
            0 => (s, c),
            1 => (c, -s),
            2 => (-s, -c),
            _ => (-c, s),
        }
    }

    pub fn sincos(self) -> (Dd, Dd) {
        Dd::sincos_quarters(0, self)
    }
}

impl From<f64> for Dd {
    fn from(x: f64) -> Dd {
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
    fn add(self, b: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, b.hi);
        let (t1, t2) = two_sum(self.lo, b.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        Dd::norm(s1, s2 + t2)
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
    fn mul(self, b: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, b.hi);
        Dd::norm(p, e + (self.hi * b.lo + self.lo * b.hi))
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        let (h, l) = quick_two_sum(q1, q2);
        Dd { hi: h, lo: l } + Dd::new(q3)
    }
}

impl PartialOrd for Dd {
    fn partial_cmp(&self, other: &Dd) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            o => o,
        }
    }
}

/// Square double-double matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DdMat {
    n: usize,
    data: Vec<Dd>,
}

impl DdMat {
    pub fn zeros(n: usize) -> Self {
        DdMat { n, data: vec![ZERO; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DdMat::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = ONE;
        }
        m
    }

    pub fn from_mat(m: &Mat) -> Self {
        let n = m.dim();
        DdMat { n, data: m.as_slice().iter().map(|v| Dd::new(*v)).collect() }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Dd) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        DdMat { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Dd {
        self.data[i * self.n + j]
    }

    pub fn to_mat(&self) -> Mat {
        Mat::from_fn(self.n, |i, j| self.get(i, j).to_f64())
    }

    pub fn mul(&self, b: &DdMat) -> DdMat {
        assert_eq!(self.n, b.n);
        let n = self.n;
        DdMat::from_fn(n, |i, j| {
            let mut acc = ZERO;
            for k in 0..n {
                acc = acc + self.get(i, k) * b.get(k, j);
            }
            acc
        })
    }

    pub fn add(&self, b: &DdMat) -> DdMat {
        DdMat::from_fn(self.n, |i, j| self.get(i, j) + b.get(i, j))
    }

    pub fn transpose(&self) -> DdMat {
        DdMat::from_fn(self.n, |i, j| self.get(j, i))
    }

    /// −Ω Mᵀ Ω, exact.
    pub fn symplectic_inverse(&self) -> DdMat {
        // (−Ω Mᵀ Ω)_{ij} = −Σ Ω_ia M_ba Ω_bj; Ω only permutes within a mode.
        let n = self.n;
        DdMat::from_fn(n, |i, j| {
            let (a, sa) = omega_entry(i);
            let (b, sb) = omega_col(j);
            -(self.get(b, a).mul_f64(sa * sb))
        })
    }
}

/// Row i of Ω has a single nonzero at column a with value sa.
fn omega_entry(i: usize) -> (usize, f64) {
    if i % 2 == 0 {
        (i + 1, 1.0)
    } else {
        (i - 1, -1.0)
    }
}

/// Column j of Ω has a single nonzero at row b with value sb.
fn omega_col(j: usize) -> (usize, f64) {
    if j % 2 == 0 {
        (j + 1, -1.0)
    } else {
        (j - 1, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_matches_f64() {
        for &x in &[-3.0, -0.1, 0.0, 1e-9, 0.5, 1.0, 12.3, 40.0] {
            let e = Dd::new(x).exp().to_f64();
            assert!((e - libm::exp(x)).abs() <= 4e-16 * libm::exp(x), "{x}");
        }
    }

    #[test]
    fn cosh_sinh_identity_holds_to_dd_precision() {
        let t = Dd::new(15.7);
        let c = t.cosh();
        let s = t.sinh();
        let d = c * c - s * s - ONE;
        assert!(d.to_f64().abs() < 1e-16, "{:?}", d);
    }

    #[test]
    fn quarter_turn_is_exact() {
        let (s, c) = Dd::sincos_quarters(1, ZERO);
        assert_eq!((s.to_f64(), c.to_f64()), (1.0, 0.0));
        let (s, c) = Dd::sincos_quarters(0, PI_2);
        assert!((s - ONE).to_f64().abs() < 1e-31 && c.to_f64().abs() < 1e-31);
    }

    #[test]
    fn sqrt_and_div() {
        let two = Dd::new(2.0);
        let r = two.sqrt();
        assert!((r * r - two).to_f64().abs() < 1e-31);
        let third = ONE / Dd::new(3.0);
        assert!((third.mul_f64(3.0) - ONE).to_f64().abs() < 1e-31);
    }

    #[test]
    fn symplectic_inverse_matches_f64_formula() {
        let m = Mat::from_rows(&[
            &[1.0, 2.0, 3.0, 4.0],
            &[5.0, 6.0, 7.0, 8.0],
            &[9.0, 1.0, 2.0, 3.0],
            &[4.0, 5.0, 6.0, 7.0],
        ]);
        let a = DdMat::from_mat(&m).symplectic_inverse().to_mat();
        let b = crate::phase_space::symplectic_inverse(&m);
        assert_eq!(a, b);
    }
}
