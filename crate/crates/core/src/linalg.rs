//! Dense complex matrices and the handful of operations propagation needs:
//! products, adjoints, Kronecker products, the Hilbert-Schmidt inner product
//! and the matrix exponential.
//!
//! Matrices are small (2, 4 or 16 rows) so storage is a row-major
//! `SmallVec` that stays inline up to 4x4.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use smallvec::SmallVec;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

type Storage = SmallVec<[C64; 16]>;

/// Dense square complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    dim: usize,
    data: Storage,
}

impl CMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: SmallVec::from_elem(ZERO, dim * dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = ONE;
        }
        m
    }

    /// Builds a matrix from row-major entries. Fails unless `entries.len()`
    /// is a perfect square.
    pub fn from_row_major(entries: Vec<C64>) -> Result<Self> {
        let dim = (entries.len() as f64).sqrt().round() as usize;
        if dim * dim != entries.len() || dim == 0 {
            return Err(Error::NonSquare { len: entries.len() });
        }
        Ok(Self {
            dim,
            data: SmallVec::from_vec(entries),
        })
    }

    pub fn from_rows<const N: usize>(rows: [[C64; N]; N]) -> Self {
        Self {
            dim: N,
            data: rows.iter().flat_map(|r| r.iter().copied()).collect(),
        }
    }

    pub fn from_real_rows<const N: usize>(rows: [[f64; N]; N]) -> Self {
        Self {
            dim: N,
            data: rows
                .iter()
                .flat_map(|r| r.iter().map(|&x| C64::new(x, 0.0)))
                .collect(),
        }
    }

    pub fn diagonal(diag: &[C64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j];
            }
        }
        out
    }

    /// Entrywise complex conjugate.
    pub fn conj(&self) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, s: C64, other: &CMatrix) {
        debug_assert_eq!(self.dim, other.dim);
        for (a, &b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += s * b;
        }
    }

    /// `self += s * other` for a real scalar.
    pub fn add_scaled_real(&mut self, s: f64, other: &CMatrix) {
        debug_assert_eq!(self.dim, other.dim);
        for (a, &b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += b * s;
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Maximum absolute column sum.
    pub fn one_norm(&self) -> f64 {
        let n = self.dim;
        (0..n)
            .map(|j| (0..n).map(|i| self.data[i * n + j].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `self · other`, panicking on a dimension mismatch. Use [`CMatrix::try_mul`]
    /// where dimensions are not already known to agree.
    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, other.dim, "matmul dimension mismatch");
        let n = self.dim;
        let mut out = Self::zeros(n);
        let a = &self.data;
        let b = &other.data;
        let c = &mut out.data;
        for i in 0..n {
            for k in 0..n {
                let aik = a[i * n + k];
                if aik == ZERO {
                    continue;
                }
                let row_b = &b[k * n..(k + 1) * n];
                let row_c = &mut c[i * n..(i + 1) * n];
                for (cij, &bkj) in row_c.iter_mut().zip(row_b) {
                    *cij += aik * bkj;
                }
            }
        }
        out
    }

    pub fn try_mul(&self, other: &CMatrix) -> Result<CMatrix> {
        check_same_dim(self, other)?;
        Ok(self.matmul(other))
    }

    /// `self† · other` without materialising the adjoint.
    pub fn adjoint_mul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, other.dim, "adjoint_mul dimension mismatch");
        let n = self.dim;
        let mut out = Self::zeros(n);
        for k in 0..n {
            for i in 0..n {
                let aki = self.data[k * n + i].conj();
                if aki == ZERO {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += aki * other.data[k * n + j];
                }
            }
        }
        out
    }

    /// `self · other†`.
    pub fn mul_adjoint(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, other.dim, "mul_adjoint dimension mismatch");
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = ZERO;
                for k in 0..n {
                    acc += self.data[i * n + k] * other.data[j * n + k].conj();
                }
                out.data[i * n + j] = acc;
            }
        }
        out
    }

    /// `tr(self · other)` in O(n²).
    pub fn trace_of_product(&self, other: &CMatrix) -> C64 {
        debug_assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let mut acc = ZERO;
        for i in 0..n {
            for k in 0..n {
                acc += self.data[i * n + k] * other.data[k * n + i];
            }
        }
        acc
    }

    /// Applies the matrix to a column vector.
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.dim);
        let n = self.dim;
        (0..n)
            .map(|i| (0..n).map(|k| self.data[i * n + k] * v[k]).sum())
            .collect()
    }

    /// `max |self - self†|`, zero for a Hermitian matrix.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let d = (self.data[i * n + j] - self.data[j * n + i].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    /// `‖self† self - I‖_F`.
    pub fn unitarity_error(&self) -> f64 {
        (&self.adjoint_mul(self) - &CMatrix::identity(self.dim)).frobenius_norm()
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_error() <= tol
    }

    /// Column-stacking vectorisation: entry `(i, k)` lands at `k * dim + i`.
    pub fn vectorize(&self) -> Vec<C64> {
        let n = self.dim;
        let mut v = vec![ZERO; n * n];
        for i in 0..n {
            for k in 0..n {
                v[k * n + i] = self.data[i * n + k];
            }
        }
        v
    }

    /// Inverse of [`CMatrix::vectorize`].
    pub fn unvectorize(v: &[C64]) -> Result<Self> {
        let n = (v.len() as f64).sqrt().round() as usize;
        if n * n != v.len() || n == 0 {
            return Err(Error::NonSquare { len: v.len() });
        }
        let mut m = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                m.data[i * n + k] = v[k * n + i];
            }
        }
        Ok(m)
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix({}x{})", self.dim, self.dim)?;
        for i in 0..self.dim {
            let row: Vec<String> = (0..self.dim)
                .map(|j| {
                    let z = self[(i, j)];
                    format!("{:+.6}{:+.6}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim, "add dimension mismatch");
        CMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(rhs.data.iter())
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim, "sub dimension mismatch");
        CMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(rhs.data.iter())
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs)
    }
}

impl AddAssign<&CMatrix> for CMatrix {
    fn add_assign(&mut self, rhs: &CMatrix) {
        self.add_scaled(ONE, rhs);
    }
}

fn check_same_dim(a: &CMatrix, b: &CMatrix) -> Result<()> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch {
            expected: a.dim,
            found: b.dim,
        });
    }
    Ok(())
}

/// Kronecker product: `out[(i·dB + k, j·dB + l)] = A[i,j]·B[k,l]`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (na, nb) = (a.dim, b.dim);
    let n = na * nb;
    let mut out = CMatrix::zeros(n);
    for i in 0..na {
        for j in 0..na {
            let aij = a.data[i * na + j];
            if aij == ZERO {
                continue;
            }
            for k in 0..nb {
                for l in 0..nb {
                    out.data[(i * nb + k) * n + (j * nb + l)] = aij * b.data[k * nb + l];
                }
            }
        }
    }
    out
}

/// Hilbert-Schmidt inner product `tr(A† B)`.
pub fn hs_inner(a: &CMatrix, b: &CMatrix) -> Result<C64> {
    check_same_dim(a, b)?;
    Ok(a.data
        .iter()
        .zip(b.data.iter())
        .map(|(x, y)| x.conj() * y)
        .sum())
}

// Padé [m/m] numerator coefficients and the 1-norm thresholds below which
// degree m meets double precision (Higham 2005).
const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
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
const THETA3: f64 = 1.495585217958292e-2;
const THETA5: f64 = 2.539_398_330_063_23e-1;
const THETA7: f64 = 9.504178996162932e-1;
const THETA9: f64 = 2.097847961257068e0;
const THETA13: f64 = 5.371920351148152e0;

/// Matrix exponential `e^A`.
///
/// 2x2 anti-Hermitian inputs (the single-qubit propagator case) go through the
/// closed-form rotation formula; everything else uses scaling and squaring
/// with a diagonal Padé approximant of degree 3..13.
pub fn expm(a: &CMatrix) -> Result<CMatrix> {
    if !a.is_finite() {
        return Err(Error::NonFiniteInput);
    }
    if a.dim == 2 && is_anti_hermitian(a) {
        return Ok(expm_anti_hermitian_2x2(a));
    }
    Ok(expm_pade(a))
}

/// `exp(-i·H·dt)` for Hermitian `H`.
pub fn unitary_step(h: &CMatrix, dt: f64) -> Result<CMatrix> {
    expm(&h.scale(C64::new(0.0, -dt)))
}

fn is_anti_hermitian(a: &CMatrix) -> bool {
    let scale = a.max_abs().max(1.0);
    let n = a.dim;
    for i in 0..n {
        for j in i..n {
            if (a.data[i * n + j] + a.data[j * n + i].conj()).norm() > 1e-14 * scale {
                return false;
            }
        }
    }
    true
}

/// `A = -iH`, `H = h0·I + h·σ`, so `e^A = e^{-i h0} (cos|h| I - i sin|h| ĥ·σ)`.
fn expm_anti_hermitian_2x2(a: &CMatrix) -> CMatrix {
    // H = iA
    let h00 = (I * a.data[0]).re;
    let h11 = (I * a.data[3]).re;
    let h01 = I * a.data[1];
    let h0 = 0.5 * (h00 + h11);
    let hz = 0.5 * (h00 - h11);
    let hx = h01.re;
    let hy = -h01.im;
    let r = (hx * hx + hy * hy + hz * hz).sqrt();
    let c = r.cos();
    // sin(r)/r, series near zero
    let sinc = if r < 1e-4 {
        1.0 - r * r / 6.0 + r.powi(4) / 120.0
    } else {
        r.sin() / r
    };
    let phase = C64::from_polar(1.0, -h0);
    // -i sinc (hx σx + hy σy + hz σz)
    let m00 = C64::new(c, -sinc * hz);
    let m11 = C64::new(c, sinc * hz);
    let m01 = C64::new(-sinc * hy, -sinc * hx);
    let m10 = C64::new(sinc * hy, -sinc * hx);
    CMatrix {
        dim: 2,
        data: SmallVec::from_slice(&[phase * m00, phase * m01, phase * m10, phase * m11]),
    }
}

fn expm_pade(a: &CMatrix) -> CMatrix {
    let n = a.dim;
    let ident = CMatrix::identity(n);
    let norm = a.one_norm();
    if norm == 0.0 {
        return ident;
    }

    let a2 = a.matmul(a);
    let (u, v, squarings) = if norm <= THETA9 {
        let (b, odd_even): (&[f64], usize) = if norm <= THETA3 {
            (&PADE3, 3)
        } else if norm <= THETA5 {
            (&PADE5, 5)
        } else if norm <= THETA7 {
            (&PADE7, 7)
        } else {
            (&PADE9, 9)
        };
        // powers A^0, A^2, A^4, ...
        let mut powers = vec![ident.clone(), a2.clone()];
        while powers.len() * 2 <= odd_even {
            let next = powers.last().unwrap().matmul(&a2);
            powers.push(next);
        }
        let mut u_inner = CMatrix::zeros(n);
        let mut v = CMatrix::zeros(n);
        for (k, p) in powers.iter().enumerate() {
            v.add_scaled_real(b[2 * k], p);
            u_inner.add_scaled_real(b[2 * k + 1], p);
        }
        (a.matmul(&u_inner), v, 0u32)
    } else {
        let s = (norm / THETA13).log2().ceil().max(0.0) as u32;
        let scale = 0.5f64.powi(s as i32);
        let a1 = a.scale_real(scale);
        let a2 = a1.matmul(&a1);
        let a4 = a2.matmul(&a2);
        let a6 = a4.matmul(&a2);
        let b = &PADE13;

        let mut t = a6.scale_real(b[13]);
        t.add_scaled_real(b[11], &a4);
        t.add_scaled_real(b[9], &a2);
        let mut u_inner = a6.matmul(&t);
        u_inner.add_scaled_real(b[7], &a6);
        u_inner.add_scaled_real(b[5], &a4);
        u_inner.add_scaled_real(b[3], &a2);
        u_inner.add_scaled_real(b[1], &ident);
        let u = a1.matmul(&u_inner);

        let mut t = a6.scale_real(b[12]);
        t.add_scaled_real(b[10], &a4);
        t.add_scaled_real(b[8], &a2);
        let mut v = a6.matmul(&t);
        v.add_scaled_real(b[6], &a6);
        v.add_scaled_real(b[4], &a4);
        v.add_scaled_real(b[2], &a2);
        v.add_scaled_real(b[0], &ident);
        (u, v, s)
    };

    let p = &v + &u;
    let q = &v - &u;
    let mut r = solve(&q, &p);
    for _ in 0..squarings {
        r = r.matmul(&r);
    }
    r
}

/// Solves `Q X = P` by LU with partial pivoting. `Q` is the Padé denominator,
/// which is well conditioned for the degrees selected above.
fn solve(q: &CMatrix, p: &CMatrix) -> CMatrix {
    let n = q.dim;
    let mut lu = q.data.to_vec();
    let mut x = p.data.to_vec();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| lu[i * n + col].norm().total_cmp(&lu[j * n + col].norm()))
            .unwrap();
        if pivot != col {
            for k in 0..n {
                lu.swap(col * n + k, pivot * n + k);
                x.swap(col * n + k, pivot * n + k);
            }
        }
        let d = lu[col * n + col];
        for row in col + 1..n {
            let f = lu[row * n + col] / d;
            if f == ZERO {
                continue;
            }
            for k in col..n {
                let v = lu[col * n + k];
                lu[row * n + k] -= f * v;
            }
            for k in 0..n {
                let v = x[col * n + k];
                x[row * n + k] -= f * v;
            }
        }
    }
    for row in (0..n).rev() {
        let d = lu[row * n + row];
        for k in 0..n {
            let mut acc = x[row * n + k];
            for j in row + 1..n {
                acc -= lu[row * n + j] * x[j * n + k];
            }
            x[row * n + k] = acc / d;
        }
    }
    CMatrix {
        dim: n,
        data: SmallVec::from_vec(x),
    }
}
