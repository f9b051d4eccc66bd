//! Small dense matrices for 2n×2n phase-space work.
//!
//! Everything here is sized for n ≤ a handful of modes, so the algorithms are
//! the textbook ones: Gauss-Jordan inversion, Padé scaling-and-squaring for
//! the exponential, cyclic Jacobi for symmetric eigenproblems.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;

/// Square real matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    n: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        Mat { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds from row slices. Panics on ragged or non-square input.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            assert_eq!(r.len(), n, "row length must equal row count");
            data.extend_from_slice(r);
        }
        Mat { n, data }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Mat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = Mat::zeros(d.len());
        for (i, v) in d.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    /// Block-diagonal stack of square blocks.
    pub fn block_diag(blocks: &[Mat]) -> Self {
        let n = blocks.iter().map(|b| b.n).sum();
        let mut m = Mat::zeros(n);
        let mut off = 0;
        for b in blocks {
            for i in 0..b.n {
                for j in 0..b.n {
                    m[(off + i, off + j)] = b[(i, j)];
                }
            }
            off += b.n;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.n, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: f64) -> Mat {
        Mat { n: self.n, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n);
        (0..self.n)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Induced 1-norm (max column sum).
    pub fn norm1(&self) -> f64 {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|v| v * v).sum())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    /// Largest absolute entry of `self - other`.
    pub fn max_diff(&self, other: &Mat) -> f64 {
        assert_eq!(self.n, other.n);
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// LU with partial pivoting. Returns the packed factors, the pivot order
    /// and the permutation sign, or `None` when a pivot vanishes.
    fn lu(&self) -> Option<(Mat, Vec<usize>, f64)> {
        let n = self.n;
        let mut a = self.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| a[(i, k)].abs().total_cmp(&a[(j, k)].abs()))
                .unwrap_or(k);
            if a[(p, k)] == 0.0 {
                return None;
            }
            if p != k {
                for j in 0..n {
                    a.data.swap(k * n + j, p * n + j);
                }
                piv.swap(k, p);
                sign = -sign;
            }
            for i in k + 1..n {
                let f = a[(i, k)] / a[(k, k)];
                a[(i, k)] = f;
                for j in k + 1..n {
                    let v = a[(k, j)];
                    a[(i, j)] -= f * v;
                }
            }
        }
        Some((a, piv, sign))
    }

    pub fn det(&self) -> f64 {
        match self.lu() {
            Some((a, _, s)) => (0..self.n).fold(s, |d, i| d * a[(i, i)]),
            None => 0.0,
        }
    }

    /// Solves `self · X = B` column by column.
    pub fn solve_mat(&self, b: &Mat) -> Option<Mat> {
        let n = self.n;
        let (lu, piv, _) = self.lu()?;
        let mut x = Mat::zeros(n);
        for c in 0..n {
            let mut y: Vec<f64> = (0..n).map(|i| b[(piv[i], c)]).collect();
            for i in 0..n {
                for k in 0..i {
                    y[i] -= lu[(i, k)] * y[k];
                }
            }
            for i in (0..n).rev() {
                for k in i + 1..n {
                    y[i] -= lu[(i, k)] * y[k];
                }
                y[i] /= lu[(i, i)];
            }
            for i in 0..n {
                x[(i, c)] = y[i];
            }
        }
        Some(x)
    }

    pub fn solve(&self, b: &[f64]) -> Option<Vec<f64>> {
        let mut bm = Mat::zeros(self.n);
        for (i, v) in b.iter().enumerate() {
            bm[(i, 0)] = *v;
        }
        let x = self.solve_mat(&bm)?;
        Some((0..self.n).map(|i| x[(i, 0)]).collect())
    }

    pub fn inverse(&self) -> Option<Mat> {
        self.solve_mat(&Mat::identity(self.n))
    }

    /// Matrix exponential by scaling and squaring with the degree-13 Padé
    /// approximant (Higham 2005). Accurate to a few ulps of ‖e^A‖ for the
    /// small generators used here.
    pub fn expm(&self) -> Mat {
        const B: [f64; 14] = [
            64764752532480000.0,
            32382376266240000.0,
            7771770303897600.0,
            1187353796428800.0,
            129060195264000.0,
            10559470521600.0,
            670442572800.0,
            33522128640.0,
            1323241920.0,
            40840800.0,
            960960.0,
            16380.0,
            182.0,
            1.0,
        ];
        const THETA13: f64 = 5.371920351148152;
        let n = self.n;
        let norm = self.norm1();
        let s = if norm > THETA13 {
            libm::ceil(libm::log2(norm / THETA13)) as i32
        } else {
            0
        };
        let a = self.scale(libm::exp2(-(s as f64)));
        let id = Mat::identity(n);
        let a2 = &a * &a;
        let a4 = &a2 * &a2;
        let a6 = &a4 * &a2;
        let u_inner = &(&(&a6.scale(B[13]) + &a4.scale(B[11])) + &a2.scale(B[9]));
        let u_tail = &(&(&(&a6.scale(B[7]) + &a4.scale(B[5])) + &a2.scale(B[3])) + &id.scale(B[1]));
        let u = &a * &(&(&a6 * u_inner) + u_tail);
        let v_inner = &(&(&a6.scale(B[12]) + &a4.scale(B[10])) + &a2.scale(B[8]));
        let v_tail = &(&(&a6.scale(B[6]) + &a4.scale(B[4])) + &a2.scale(B[2])) + &id.scale(B[0]);
        let v = &(&a6 * v_inner) + &v_tail;
        let p = &v + &u;
        let q = &v - &u;
        let mut r = q.solve_mat(&p).expect("Padé denominator is nonsingular for scaled input");
        for _ in 0..s {
            r = &r * &r;
        }
        r
    }

    /// Eigen-decomposition of a real symmetric matrix by cyclic Jacobi.
    /// Eigenvalues ascending; column `k` of the returned matrix is the
    /// eigenvector of value `k`.
    pub fn sym_eigen(&self) -> (Vec<f64>, Mat) {
        let n = self.n;
        let mut a = self.clone();
        let mut v = Mat::identity(n);
        for _sweep in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[(i, j)] * a[(i, j)])
                .sum();
            let scale: f64 = a.data.iter().map(|x| x * x).sum();
            if off <= 1e-32 * scale || off == 0.0 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[(p, q)];
                    if apq == 0.0 {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / libm::sqrt(t * t + 1.0);
                    let s = t * c;
                    let tau = s / (1.0 + c);
                    a[(p, p)] -= t * apq;
                    a[(q, q)] += t * apq;
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    for k in 0..n {
                        if k == p || k == q {
                            continue;
                        }
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        let np = akp - s * (akq + tau * akp);
                        let nq = akq + s * (akp - tau * akq);
                        a[(k, p)] = np;
                        a[(p, k)] = np;
                        a[(k, q)] = nq;
                        a[(q, k)] = nq;
                    }
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = vkp - s * (vkq + tau * vkp);
                        v[(k, q)] = vkq + s * (vkp - tau * vkq);
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
        let vals = order.iter().map(|&i| a[(i, i)]).collect();
        let vecs = Mat::from_fn(n, |r, c| v[(r, order[c])]);
        (vals, vecs)
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

impl Mul for &Mat {
    type Output = Mat;
    fn mul(self, rhs: &Mat) -> Mat {
        assert_eq!(self.n, rhs.n, "dimension mismatch in product");
        let n = self.n;
        let mut out = Mat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }
}

impl Add for &Mat {
    type Output = Mat;
    fn add(self, rhs: &Mat) -> Mat {
        assert_eq!(self.n, rhs.n);
        Mat { n: self.n, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &Mat {
    type Output = Mat;
    fn sub(self, rhs: &Mat) -> Mat {
        assert_eq!(self.n, rhs.n);
        Mat { n: self.n, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect() }
    }
}

impl Neg for &Mat {
    type Output = Mat;
    fn neg(self) -> Mat {
        self.scale(-1.0)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn vadd(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn vsub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn vscale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// Square complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CMat {
    n: usize,
    data: Vec<Complex64>,
}

impl CMat {
    pub fn zeros(n: usize) -> Self {
        CMat { n, data: vec![Complex64::new(0.0, 0.0); n * n] }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = CMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn adjoint(&self) -> CMat {
        CMat::from_fn(self.n, |i, j| self[(j, i)].conj())
    }

    /// Largest entrywise modulus of `self - self†`.
    pub fn hermitian_defect(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                m = m.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        m
    }

    pub fn max_diff(&self, other: &CMat) -> f64 {
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    /// Eigen-decomposition of a Hermitian matrix through its real symmetric
    /// embedding [[Re, −Im], [Im, Re]], whose spectrum is the Hermitian one
    /// with every value doubled. Ascending values; unit eigenvectors.
    pub fn herm_eigen(&self) -> (Vec<f64>, Vec<Vec<Complex64>>) {
        let n = self.n;
        let emb = Mat::from_fn(2 * n, |i, j| {
            let (bi, ri) = (i / n, i % n);
            let (bj, rj) = (j / n, j % n);
            let z = self[(ri, rj)];
            match (bi, bj) {
                (0, 0) | (1, 1) => z.re,
                (0, 1) => -z.im,
                _ => z.im,
            }
        });
        let (vals, vecs) = emb.sym_eigen();
        let mut out_vals = Vec::with_capacity(n);
        let mut out_vecs = Vec::with_capacity(n);
        // Each Hermitian eigenvalue appears twice; take every other one.
        for k in (0..2 * n).step_by(2) {
            out_vals.push(0.5 * (vals[k] + vals[k + 1]));
            let mut z: Vec<Complex64> =
                (0..n).map(|i| Complex64::new(vecs[(i, k)], vecs[(i + n, k)])).collect();
            let nrm = libm::sqrt(z.iter().map(|c| c.norm_sqr()).sum());
            for c in z.iter_mut() {
                *c /= nrm;
            }
            out_vecs.push(z);
        }
        (out_vals, out_vecs)
    }
}

impl Index<(usize, usize)> for CMat {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.n + j]
    }
}

impl Mul for &CMat {
    type Output = CMat;
    fn mul(self, rhs: &CMat) -> CMat {
        assert_eq!(self.n, rhs.n);
        CMat::from_fn(self.n, |i, j| (0..self.n).map(|k| self[(i, k)] * rhs[(k, j)]).sum())
    }
}
