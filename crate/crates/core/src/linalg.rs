//! Small dense complex linear algebra.
//!
//! Everything here works on [`Matrix`], a row-major `rows × cols` array of
//! `Complex<f64>`. The routines are written for the desk-scale problems this
//! crate deals with (dimensions up to a few hundred): LU with partial pivoting,
//! Householder QR, reduction to Hessenberg form followed by shifted QR for
//! eigenvalues, and one-sided Jacobi for singular values.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_complex::Complex;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.6e}{:+.6e}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = C64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let mut m = Matrix::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let d: Vec<C64> = diag.iter().map(|&x| C64::new(x, 0.0)).collect();
        Matrix::from_diag(&d)
    }

    /// Builds a matrix from row-major data. Panics if the length is wrong.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data has wrong length");
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn diag(&self) -> Vec<C64> {
        (0..self.rows.min(self.cols))
            .map(|i| self[(i, i)])
            .collect()
    }

    pub fn trace(&self) -> C64 {
        self.diag().into_iter().sum()
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: C64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// `s I - self`.
    pub fn shifted_from(&self, s: C64) -> Matrix {
        let mut m = self.scale(-ONE);
        for i in 0..self.rows.min(self.cols) {
            m[(i, i)] += s;
        }
        m
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(
            self.cols,
            v.len(),
            "vector length differs from column count"
        );
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Spectral norm (largest singular value).
    pub fn norm2(&self) -> f64 {
        singular_values(self).first().copied().unwrap_or(0.0)
    }

    /// Copies `block` into `self` with its top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Matrix) {
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] = block[(i, j)];
            }
        }
    }

    pub fn powi(&self, n: u32) -> Matrix {
        assert!(self.is_square());
        let mut result = Matrix::identity(self.rows);
        let mut base = self.clone();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        result
    }
}

pub fn vec_norm(v: &[C64]) -> f64 {
    // scaled to avoid overflow for the very large orbit states shifts produce
    let scale = v
        .iter()
        .fold(0.0f64, |m, z| m.max(z.re.abs()).max(z.im.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    let s: f64 = v.iter().map(|z| (z / scale).norm_sqr()).sum();
    scale * s.sqrt()
}

pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    // <a, b> linear in a, conjugate-linear in b
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

pub fn vec_sub(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn vec_add(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn vec_scale(a: &[C64], s: C64) -> Vec<C64> {
    a.iter().map(|x| x * s).collect()
}

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
}

impl Lu {
    /// Fails only on an exactly zero pivot; near-singularity is the caller's
    /// concern (see [`singular_values`]).
    pub fn new(a: &Matrix) -> Result<Lu> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch {
                expected: a.rows(),
                found: a.cols(),
            });
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].norm();
            for i in k + 1..n {
                let v = lu[(i, k)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(Error::Singular {
                    sigma_min: 0.0,
                    tol: 0.0,
                });
            }
            if p != k {
                for j in 0..n {
                    let t = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = t;
                }
                perm.swap(k, p);
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                if f == ZERO {
                    continue;
                }
                for j in k + 1..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] -= f * u;
                }
            }
        }
        Ok(Lu { lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.lu.rows()
    }

    pub fn solve_vec(&self, b: &[C64]) -> Vec<C64> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut x: Vec<C64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    pub fn solve(&self, b: &Matrix) -> Matrix {
        let n = self.dim();
        assert_eq!(b.rows(), n);
        let mut out = Matrix::zeros(n, b.cols());
        for j in 0..b.cols() {
            let x = self.solve_vec(&b.column(j));
            for i in 0..n {
                out[(i, j)] = x[i];
            }
        }
        out
    }

    pub fn inverse(&self) -> Matrix {
        self.solve(&Matrix::identity(self.dim()))
    }
}

/// Householder reflector `H = I - tau v v^H` with `v[0] = 1`, mapping `x` to
/// `beta e_1`. Returns `(v, tau, beta)`.
fn householder(x: &[C64]) -> (Vec<C64>, C64, C64) {
    let alpha = x[0];
    let tail: f64 = x[1..].iter().map(|z| z.norm_sqr()).sum();
    let mut v = x.to_vec();
    v[0] = ONE;
    if tail == 0.0 && alpha.im == 0.0 {
        return (v, ZERO, alpha);
    }
    let xnorm = (alpha.norm_sqr() + tail).sqrt();
    let beta = if alpha.re >= 0.0 { -xnorm } else { xnorm };
    let denom = alpha - beta;
    for z in v.iter_mut().skip(1) {
        *z /= denom;
    }
    let beta = C64::new(beta, 0.0);
    let tau = (beta - alpha) / beta;
    (v, tau, beta)
}

/// Householder QR of an `m × n` matrix with `m >= n`.
#[derive(Debug, Clone)]
pub struct Qr {
    packed: Matrix,
    taus: Vec<C64>,
}

impl Qr {
    pub fn new(a: &Matrix) -> Qr {
        assert!(a.rows() >= a.cols(), "QR expects a tall matrix");
        let (m, n) = (a.rows(), a.cols());
        let mut r = a.clone();
        let mut taus = Vec::with_capacity(n);
        for k in 0..n {
            let x: Vec<C64> = (k..m).map(|i| r[(i, k)]).collect();
            let (v, tau, beta) = householder(&x);
            // apply H^H = I - conj(tau) v v^H to columns k+1..n
            for j in k + 1..n {
                let mut s = ZERO;
                for (t, vi) in v.iter().enumerate() {
                    s += vi.conj() * r[(k + t, j)];
                }
                let s = s * tau.conj();
                for (t, vi) in v.iter().enumerate() {
                    r[(k + t, j)] -= s * vi;
                }
            }
            r[(k, k)] = beta;
            for (t, vi) in v.iter().enumerate().skip(1) {
                r[(k + t, k)] = *vi;
            }
            taus.push(tau);
        }
        Qr { packed: r, taus }
    }

    pub fn r_diag(&self) -> Vec<C64> {
        self.packed.diag()
    }

    /// Solves `R^H y = b` (forward substitution), `b` of length `n`.
    fn solve_r_adjoint(&self, b: &[C64]) -> Result<Vec<C64>> {
        let n = self.taus.len();
        let mut y = vec![ZERO; n];
        for i in 0..n {
            let mut s = b[i];
            for (j, yj) in y.iter().enumerate().take(i) {
                s -= self.packed[(j, i)].conj() * yj;
            }
            let d = self.packed[(i, i)].conj();
            if d == ZERO {
                return Err(Error::Singular {
                    sigma_min: 0.0,
                    tol: 0.0,
                });
            }
            y[i] = s / d;
        }
        Ok(y)
    }

    /// Computes `Q x` for `x` of length `m`.
    fn apply_q(&self, x: &mut [C64]) {
        let m = self.packed.rows();
        for k in (0..self.taus.len()).rev() {
            let tau = self.taus[k];
            if tau == ZERO {
                continue;
            }
            let mut s = x[k];
            for i in k + 1..m {
                s += self.packed[(i, k)].conj() * x[i];
            }
            let s = s * tau;
            x[k] -= s;
            for i in k + 1..m {
                x[i] -= s * self.packed[(i, k)];
            }
        }
    }

    /// Ratio of the largest to the smallest `|R_ii|`, a cheap condition estimate.
    pub fn condition_estimate(&self) -> f64 {
        let d = self.r_diag();
        let max = d.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        let min = d.iter().fold(f64::INFINITY, |m, z| m.min(z.norm()));
        if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }
}

/// Minimum-norm solution of the underdetermined full-row-rank system `A x = b`
/// (`A` is `p × m`, `p <= m`), via a Householder QR of `A^H`.
///
/// Returns the solution together with a condition estimate of `A`.
pub fn min_norm_solve(a: &Matrix, b: &[C64]) -> Result<(Vec<C64>, f64)> {
    if a.rows() > a.cols() {
        return Err(Error::InvalidArgument(format!(
            "min-norm solve expects a wide system, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if b.len() != a.rows() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            found: b.len(),
        });
    }
    let qr = Qr::new(&a.adjoint());
    let y = qr.solve_r_adjoint(b)?;
    let mut x = vec![ZERO; a.cols()];
    x[..y.len()].copy_from_slice(&y);
    qr.apply_q(&mut x);
    Ok((x, qr.condition_estimate()))
}

/// Reduces a square matrix to upper Hessenberg form by unitary similarity.
pub fn hessenberg(a: &Matrix) -> Matrix {
    let n = a.rows();
    let mut h = a.clone();
    if n < 3 {
        return h;
    }
    for k in 0..n - 2 {
        let x: Vec<C64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        let (v, tau, _) = householder(&x);
        if tau == ZERO {
            continue;
        }
        // left: H^H applied to rows k+1..n
        for j in 0..n {
            let mut s = ZERO;
            for (t, vi) in v.iter().enumerate() {
                s += vi.conj() * h[(k + 1 + t, j)];
            }
            let s = s * tau.conj();
            for (t, vi) in v.iter().enumerate() {
                h[(k + 1 + t, j)] -= s * vi;
            }
        }
        // right: multiply columns k+1..n by H
        for i in 0..n {
            let mut s = ZERO;
            for (t, vi) in v.iter().enumerate() {
                s += h[(i, k + 1 + t)] * vi;
            }
            let s = s * tau;
            for (t, vi) in v.iter().enumerate() {
                h[(i, k + 1 + t)] -= s * vi.conj();
            }
        }
        for i in k + 2..n {
            h[(i, k)] = ZERO;
        }
    }
    h
}

/// Givens rotation `[c s; -conj(s) c]` that maps `(a, b)` to `(r, 0)`.
fn givens(a: C64, b: C64) -> (f64, C64) {
    if b == ZERO {
        return (1.0, ZERO);
    }
    if a == ZERO {
        return (0.0, ONE);
    }
    let na = a.norm();
    let nrm = (na * na + b.norm_sqr()).sqrt();
    let c = na / nrm;
    let s = (a / na) * b.conj() / nrm;
    (c, s)
}

/// Eigenvalues of a square complex matrix, with algebraic multiplicity.
///
/// Hessenberg reduction followed by explicitly shifted QR sweeps with
/// Wilkinson shifts and deflation. `max_sweeps_per_eig` bounds the work;
/// exceeding it yields [`Error::NoConvergence`].
pub fn eigenvalues(a: &Matrix) -> Result<Vec<C64>> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            found: a.cols(),
        });
    }
    let n = a.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut h = hessenberg(a);
    let mut eig = vec![ZERO; n];
    let max_sweeps_per_eig = 60;
    let mut total_sweeps = 0usize;
    let cap = max_sweeps_per_eig * n.max(4);
    let mut hi = n - 1;
    let mut iter_here = 0usize;
    loop {
        if hi == 0 {
            eig[0] = h[(0, 0)];
            break;
        }
        // locate the top of the active unreduced block
        let mut lo = hi;
        while lo > 0 {
            let sub = h[(lo, lo - 1)].norm();
            let scale = h[(lo - 1, lo - 1)].norm() + h[(lo, lo)].norm();
            let scale = if scale == 0.0 { 1.0 } else { scale };
            if sub <= f64::EPSILON * scale {
                h[(lo, lo - 1)] = ZERO;
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            eig[hi] = h[(hi, hi)];
            hi -= 1;
            iter_here = 0;
            continue;
        }
        iter_here += 1;
        total_sweeps += 1;
        if total_sweeps > cap {
            return Err(Error::NoConvergence(total_sweeps));
        }
        let shift = if iter_here % 11 == 0 {
            // exceptional shift to break cycles
            h[(hi, hi)] + C64::new(0.75 * h[(hi, hi - 1)].norm(), 0.31 * h[(hi, hi - 1)].norm())
        } else {
            wilkinson_shift(
                h[(hi - 1, hi - 1)],
                h[(hi - 1, hi)],
                h[(hi, hi - 1)],
                h[(hi, hi)],
            )
        };
        qr_sweep(&mut h, lo, hi, shift);
    }
    Ok(eig)
}

fn wilkinson_shift(a: C64, b: C64, c: C64, d: C64) -> C64 {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let m = (a + d) * 0.5;
    let l1 = m + disc;
    let l2 = m - disc;
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

/// One explicit shifted QR step on the block `lo..=hi` of a Hessenberg matrix.
/// Only the block is updated, which is enough for eigenvalues.
fn qr_sweep(h: &mut Matrix, lo: usize, hi: usize, shift: C64) {
    for i in lo..=hi {
        h[(i, i)] -= shift;
    }
    let mut rots = Vec::with_capacity(hi - lo);
    for k in lo..hi {
        let (c, s) = givens(h[(k, k)], h[(k + 1, k)]);
        for j in k..=hi {
            let x = h[(k, j)];
            let y = h[(k + 1, j)];
            h[(k, j)] = x * c + s * y;
            h[(k + 1, j)] = -s.conj() * x + y * c;
        }
        h[(k + 1, k)] = ZERO;
        rots.push((c, s));
    }
    for (idx, &(c, s)) in rots.iter().enumerate() {
        let k = lo + idx;
        for i in lo..=(k + 1).min(hi) {
            let x = h[(i, k)];
            let y = h[(i, k + 1)];
            h[(i, k)] = x * c + y * s.conj();
            h[(i, k + 1)] = -x * s + y * c;
        }
    }
    for i in lo..=hi {
        h[(i, i)] += shift;
    }
}

/// Singular values in descending order (`min(rows, cols)` of them), by
/// one-sided Jacobi on the columns of the taller orientation.
pub fn singular_values(a: &Matrix) -> Vec<f64> {
    let work = if a.rows() >= a.cols() {
        a.clone()
    } else {
        a.adjoint()
    };
    let (m, n) = (work.rows(), work.cols());
    if n == 0 {
        return Vec::new();
    }
    // column-major copy for cache-friendly column rotations
    let mut cols: Vec<Vec<C64>> = (0..n).map(|j| work.column(j)).collect();
    let tol = f64::EPSILON * (m as f64).sqrt();
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = cols[p].iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = cols[q].iter().map(|z| z.norm_sqr()).sum();
                let gamma: C64 = cols[p]
                    .iter()
                    .zip(&cols[q])
                    .map(|(x, y)| x.conj() * y)
                    .sum();
                let g = gamma.norm();
                if g == 0.0 || g <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = cols.split_at_mut(q);
                let cp = &mut left[p];
                let cq = &mut right[0];
                for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
                    // rotate a_p against the phase-aligned a_q
                    let yq = *y * phase.conj();
                    let nx = *x * c - yq * s;
                    let ny = *x * s + yq * c;
                    *x = nx;
                    *y = ny;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = cols.iter().map(|c| vec_norm(c)).collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    sv
}

/// Smallest singular value, i.e. the largest `alpha` with `|A x| >= alpha |x|`
/// when `A` is square or tall.
pub fn min_singular_value(a: &Matrix) -> f64 {
    singular_values(a).last().copied().unwrap_or(0.0)
}

/// Sum of matrices by pairwise (tree) reduction in index order.
pub fn pairwise_sum(terms: &[Matrix]) -> Matrix {
    match terms.len() {
        0 => panic!("pairwise_sum of an empty slice"),
        1 => terms[0].clone(),
        len => {
            let mid = len / 2;
            pairwise_sum(&terms[..mid]).add(&pairwise_sum(&terms[mid..]))
        }
    }
}

/// Largest distance in an optimal-looking pairing of two multisets of complex
/// numbers. The pairing is greedy on globally closest pairs, which is exact
/// whenever the perturbation is small compared with the point separation.
pub fn multiset_distance(a: &[C64], b: &[C64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let n = a.len();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            pairs.push(((x - y).norm(), i, j));
        }
    }
    pairs.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap_or(std::cmp::Ordering::Equal));
    let mut used_a = vec![false; n];
    let mut used_b = vec![false; n];
    let mut worst = 0.0f64;
    let mut matched = 0;
    for (d, i, j) in pairs {
        if used_a[i] || used_b[j] {
            continue;
        }
        used_a[i] = true;
        used_b[j] = true;
        worst = worst.max(d);
        matched += 1;
        if matched == n {
            break;
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sample() -> Matrix {
        Matrix::from_rows(&[
            vec![c(1.0, 0.5), c(2.0, 0.0), c(0.0, -1.0)],
            vec![c(-0.5, 0.0), c(3.0, 1.0), c(1.0, 1.0)],
            vec![c(0.25, 0.0), c(0.0, 2.0), c(-2.0, 0.0)],
        ])
    }

    #[test]
    fn lu_inverse_residual() {
        let a = sample();
        let inv = Lu::new(&a).unwrap().inverse();
        let r = a.mul(&inv).sub(&Matrix::identity(3));
        assert!(r.max_abs() < 1e-13, "{r:?}");
    }

    #[test]
    fn lu_rejects_zero_matrix() {
        assert!(Lu::new(&Matrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn hessenberg_preserves_trace_and_shape() {
        let a = Matrix::from_fn(5, 5, |i, j| {
            c((i * 3 + j) as f64 * 0.1, (i as f64 - j as f64) * 0.2)
        });
        let h = hessenberg(&a);
        for i in 2..5 {
            for j in 0..i - 1 {
                assert_eq!(h[(i, j)], ZERO);
            }
        }
        assert!((h.trace() - a.trace()).norm() < 1e-12);
        assert!((h.frobenius() - a.frobenius()).abs() < 1e-12);
    }

    #[test]
    fn eigenvalues_of_triangular() {
        let a = Matrix::from_rows(&[
            vec![c(2.0, 0.0), c(1.0, 0.0), c(5.0, 0.0)],
            vec![ZERO, c(0.0, 1.0), c(-1.0, 0.0)],
            vec![ZERO, ZERO, c(-3.0, 0.0)],
        ]);
        let ev = eigenvalues(&a).unwrap();
        let want = [c(2.0, 0.0), c(0.0, 1.0), c(-3.0, 0.0)];
        assert!(multiset_distance(&ev, &want) < 1e-12);
    }

    #[test]
    fn eigenvalues_of_companion() {
        // roots 1, 2, 3, 4 of (x-1)(x-2)(x-3)(x-4) = x^4 - 10x^3 + 35x^2 - 50x + 24
        let coeffs = [-24.0, 50.0, -35.0, 10.0];
        let mut a = Matrix::zeros(4, 4);
        for i in 1..4 {
            a[(i, i - 1)] = ONE;
        }
        for (i, &k) in coeffs.iter().enumerate() {
            a[(i, 3)] = c(k, 0.0);
        }
        let ev = eigenvalues(&a).unwrap();
        let want: Vec<C64> = (1..=4).map(|k| c(k as f64, 0.0)).collect();
        assert!(multiset_distance(&ev, &want) < 1e-9, "{ev:?}");
    }

    #[test]
    fn singular_values_of_diagonal_and_rank_one() {
        let d = Matrix::from_real_diag(&[3.0, -0.5, 2.0]);
        let sv = singular_values(&d);
        assert!((sv[0] - 3.0).abs() < 1e-14);
        assert!((sv[1] - 2.0).abs() < 1e-14);
        assert!((sv[2] - 0.5).abs() < 1e-14);

        let u = [c(1.0, 1.0), c(0.0, 2.0)];
        let v = [c(3.0, 0.0), c(0.0, -1.0), c(1.0, 0.0)];
        let r1 = Matrix::from_fn(2, 3, |i, j| u[i] * v[j].conj());
        let sv = singular_values(&r1);
        assert_eq!(sv.len(), 2);
        assert!((sv[0] - vec_norm(&u) * vec_norm(&v)).abs() < 1e-12);
        assert!(sv[1] < 1e-12);
    }

    #[test]
    fn min_norm_solution_is_orthogonal_to_kernel() {
        // x + y + z = 3 has min-norm solution (1, 1, 1)
        let a = Matrix::from_rows(&[vec![ONE, ONE, ONE]]);
        let (x, _) = min_norm_solve(&a, &[c(3.0, 0.0)]).unwrap();
        for xi in x {
            assert!((xi - ONE).norm() < 1e-14);
        }
    }

    #[test]
    fn min_norm_solve_satisfies_complex_system() {
        let a = Matrix::from_rows(&[
            vec![c(1.0, 2.0), c(0.0, 1.0), c(3.0, 0.0), c(-1.0, 0.5)],
            vec![c(0.0, -1.0), c(2.0, 0.0), c(1.0, 1.0), c(0.5, 0.0)],
        ]);
        let b = [c(1.0, -1.0), c(0.5, 2.0)];
        let (x, _) = min_norm_solve(&a, &b).unwrap();
        let r = vec_sub(&a.mul_vec(&x), &b);
        assert!(vec_norm(&r) < 1e-13);
        // x must lie in the row space: orthogonal to the kernel of A
        let sv = singular_values(&a);
        assert!(sv[1] > 0.1);
    }

    #[test]
    fn pairwise_sum_matches_sequential() {
        let terms: Vec<Matrix> = (0..7)
            .map(|k| Matrix::from_real_diag(&[k as f64, 1.0]))
            .collect();
        let s = pairwise_sum(&terms);
        assert_eq!(s[(0, 0)], c(21.0, 0.0));
        assert_eq!(s[(1, 1)], c(7.0, 0.0));
    }

    #[test]
    fn vec_norm_survives_huge_entries() {
        let v = [c(1e200, 0.0), c(0.0, 1e200)];
        assert!((vec_norm(&v) / (2f64.sqrt() * 1e200) - 1.0).abs() < 1e-15);
    }
}
