//! Small dense linear-algebra helpers shared by every module.
//!
//! Tensors of degree `n` over a `dim`-dimensional space are stored as flat
//! coordinate arrays of length `dim^n`, first leg most significant.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn pow(dim: usize, n: usize) -> usize {
    dim.pow(n as u32)
}

/// Largest singular value.
pub fn spectral_norm(m: &CMat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * re(0.5)
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = hermitian_part(m)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn min_eigenvalue(m: &CMat) -> f64 {
    hermitian_eigenvalues(m).first().copied().unwrap_or(0.0)
}

/// `f(H)` for Hermitian `H` through its eigendecomposition.
pub fn hermitian_function(h: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let eig = hermitian_part(h).symmetric_eigen();
    let vals = CVec::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|&l| re(f(l))));
    &eig.eigenvectors * CMat::from_diagonal(&vals) * eig.eigenvectors.adjoint()
}

/// Square root of a positive semidefinite matrix. Eigenvalues in `[-tol, 0)`
/// are clamped to zero; anything more negative is an error.
pub fn psd_sqrt(h: &CMat, tol: f64) -> Result<CMat> {
    let lo = min_eigenvalue(h);
    if lo < -tol {
        return Err(Error::Numerical(format!(
            "square root of an operator with eigenvalue {lo:e}"
        )));
    }
    Ok(hermitian_function(h, |l| l.max(0.0).sqrt()))
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Numerical rank: singular values below `rel * sigma_max` count as zero.
pub fn numerical_rank(m: &CMat, rel: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    // Reduce tall matrices to their R factor first; the singular values agree.
    let reduced = if m.nrows() > m.ncols() {
        m.clone().qr().r()
    } else {
        m.clone()
    };
    let sv = reduced.singular_values();
    let top = sv.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel * top).count()
}

/// Rearranges tensor legs: output leg `p` is input leg `order[p]`.
pub fn permute_legs(data: &[C64], dim: usize, order: &[usize]) -> Vec<C64> {
    let n = order.len();
    debug_assert_eq!(data.len(), pow(dim, n));
    if n <= 1 || order.iter().enumerate().all(|(p, &o)| p == o) {
        return data.to_vec();
    }
    // stride of input leg i
    let strides: Vec<usize> = (0..n).map(|i| pow(dim, n - 1 - i)).collect();
    let mut out = vec![ZERO; data.len()];
    let mut digits = vec![0usize; n];
    for (idx, slot) in out.iter_mut().enumerate() {
        let mut r = idx;
        for p in (0..n).rev() {
            digits[p] = r % dim;
            r /= dim;
        }
        let src: usize = (0..n).map(|p| digits[p] * strides[order[p]]).sum();
        *slot = data[src];
    }
    out
}

/// Index map of `permute_legs` as a list `out_index -> in_index`.
pub fn permutation_index_map(dim: usize, order: &[usize]) -> Vec<usize> {
    let n = order.len();
    let strides: Vec<usize> = (0..n).map(|i| pow(dim, n - 1 - i)).collect();
    let mut digits = vec![0usize; n];
    (0..pow(dim, n))
        .map(|idx| {
            let mut r = idx;
            for p in (0..n).rev() {
                digits[p] = r % dim;
                r /= dim;
            }
            (0..n).map(|p| digits[p] * strides[order[p]]).sum()
        })
        .collect()
}

/// Applies `m` (rows x cols) to every leg of a degree-`n` tensor over a
/// `cols`-dimensional space, producing a tensor over a `rows`-dimensional one.
pub fn apply_tensor_power(m: &CMat, data: &[C64], n: usize) -> Vec<C64> {
    let (rows, cols) = m.shape();
    debug_assert_eq!(data.len(), pow(cols, n));
    let mut cur = data.to_vec();
    // after processing legs 0..p, the first p legs have size `rows`
    for p in 0..n {
        let hi = pow(rows, p);
        let lo = pow(cols, n - 1 - p);
        let mut next = vec![ZERO; hi * rows * lo];
        for h in 0..hi {
            for b in 0..cols {
                let src = &cur[(h * cols + b) * lo..(h * cols + b + 1) * lo];
                for a in 0..rows {
                    let coef = m[(a, b)];
                    if coef == ZERO {
                        continue;
                    }
                    let dst = &mut next[(h * rows + a) * lo..(h * rows + a + 1) * lo];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += coef * s;
                    }
                }
            }
        }
        cur = next;
    }
    cur
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..n).collect();
    loop {
        out.push(cur.clone());
        // next lexicographic permutation
        let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) else {
            break;
        };
        let j = (i..n).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
    out
}

pub fn inversions(perm: &[usize]) -> usize {
    let mut count = 0;
    for i in 0..perm.len() {
        for j in i + 1..perm.len() {
            if perm[i] > perm[j] {
                count += 1;
            }
        }
    }
    count
}

pub fn random_complex<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

pub fn random_vector<R: Rng + ?Sized>(rng: &mut R, len: usize) -> CVec {
    CVec::from_fn(len, |_, _| random_complex(rng))
}

pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| random_complex(rng))
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}
