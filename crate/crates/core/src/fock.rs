//! Truncated q-Fock space over a deformed space.
//!
//! The degree-`n` summand is stored in tensor coordinates; its q-deformed
//! inner product has Gram matrix `G^{⊗n} P_q^{(n)}`, where
//! `P_q^{(n)} = Σ_σ q^{inv(σ)} σ` acts by permuting tensor legs.
//!
//! Two engines live here. [`FockSpace`] is matrix-free: it applies creation,
//! annihilation and first quantisation to vectors and scales to spaces whose
//! top summand has thousands of coordinates. [`FockContext`] adds eagerly
//! built dense symmetrizers and Gram factors and is meant for the small
//! spaces where operators are compared as matrices.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Sub};

use nalgebra::Cholesky;

use crate::error::{Error, Result};
use crate::linalg::{self, pow, re, CMat, CVec, C64, ONE, ZERO};
use crate::space::DeformedSpace;
use crate::wick::{crossing_number, shuffles};

/// `C(q) = Π_{k>=1} (1 - |q|^k)^{-1}`, truncated once the multiplicative
/// increment drops below `1e-14`.
pub fn c_q(q: f64) -> f64 {
    let a = q.abs();
    let mut prod = 1.0;
    let mut p = a;
    loop {
        let factor = 1.0 / (1.0 - p);
        prod *= factor;
        if factor - 1.0 < 1e-14 {
            return prod;
        }
        p *= a;
    }
}

fn check_q(q: f64) -> Result<()> {
    if q.is_finite() && q.abs() < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidDeformation(q))
    }
}

/// Element of the truncated Fock space: one coordinate block per degree.
#[derive(Debug, Clone, PartialEq)]
pub struct GradedVector {
    dim: usize,
    blocks: Vec<CVec>,
}

impl GradedVector {
    pub fn zeros(dim: usize, max_degree: usize) -> Self {
        Self { dim, blocks: (0..=max_degree).map(|n| CVec::zeros(pow(dim, n))).collect() }
    }

    /// The vacuum vector Ω.
    pub fn vacuum(dim: usize, max_degree: usize) -> Self {
        let mut v = Self::zeros(dim, max_degree);
        v.blocks[0][0] = ONE;
        v
    }

    pub fn from_blocks(dim: usize, blocks: Vec<CVec>) -> Result<Self> {
        for (n, b) in blocks.iter().enumerate() {
            if b.len() != pow(dim, n) {
                return Err(Error::DimensionMismatch { expected: pow(dim, n), found: b.len() });
            }
        }
        if blocks.is_empty() {
            return Err(Error::DimensionMismatch { expected: 1, found: 0 });
        }
        Ok(Self { dim, blocks })
    }

    /// A vector concentrated in degree `n`.
    pub fn homogeneous(dim: usize, max_degree: usize, n: usize, block: CVec) -> Result<Self> {
        if n > max_degree {
            return Err(Error::DegreeOverflow { degree: n, max: max_degree });
        }
        if block.len() != pow(dim, n) {
            return Err(Error::DimensionMismatch { expected: pow(dim, n), found: block.len() });
        }
        let mut v = Self::zeros(dim, max_degree);
        v.blocks[n] = block;
        Ok(v)
    }

    /// `v_1 ⊗ … ⊗ v_n` as a homogeneous vector.
    pub fn simple_tensor(dim: usize, max_degree: usize, factors: &[CVec]) -> Result<Self> {
        let mut t = CVec::from_element(1, ONE);
        for f in factors {
            if f.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: f.len() });
            }
            t = t.kronecker(f);
        }
        Self::homogeneous(dim, max_degree, factors.len(), t)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_degree(&self) -> usize {
        self.blocks.len() - 1
    }

    pub fn block(&self, n: usize) -> &CVec {
        &self.blocks[n]
    }

    pub fn block_mut(&mut self, n: usize) -> &mut CVec {
        &mut self.blocks[n]
    }

    pub fn blocks(&self) -> &[CVec] {
        &self.blocks
    }

    /// Highest degree carrying a nonzero coefficient.
    pub fn top_degree(&self) -> Option<usize> {
        self.blocks.iter().rposition(|b| b.iter().any(|z| *z != ZERO))
    }

    pub fn total_len(&self) -> usize {
        self.blocks.iter().map(|b| b.len()).sum()
    }

    pub fn flatten(&self) -> CVec {
        CVec::from_iterator(self.total_len(), self.blocks.iter().flat_map(|b| b.iter().copied()))
    }

    pub fn from_flat(dim: usize, max_degree: usize, flat: &CVec) -> Result<Self> {
        let mut out = Self::zeros(dim, max_degree);
        if flat.len() != out.total_len() {
            return Err(Error::DimensionMismatch { expected: out.total_len(), found: flat.len() });
        }
        let mut off = 0;
        for b in &mut out.blocks {
            let len = b.len();
            b.copy_from(&flat.rows(off, len));
            off += len;
        }
        Ok(out)
    }

    /// Keeps degrees `<= max`, zeroing the rest.
    pub fn truncated(&self, max: usize) -> Self {
        let mut out = self.clone();
        for (n, b) in out.blocks.iter_mut().enumerate() {
            if n > max {
                b.fill(ZERO);
            }
        }
        out
    }

    pub fn axpy(&mut self, a: C64, x: &GradedVector) {
        for (b, xb) in self.blocks.iter_mut().zip(&x.blocks) {
            b.axpy(a, xb, ONE);
        }
    }
}

impl Add for &GradedVector {
    type Output = GradedVector;
    fn add(self, rhs: &GradedVector) -> GradedVector {
        let mut out = self.clone();
        out.axpy(ONE, rhs);
        out
    }
}

impl Sub for &GradedVector {
    type Output = GradedVector;
    fn sub(self, rhs: &GradedVector) -> GradedVector {
        let mut out = self.clone();
        out.axpy(re(-1.0), rhs);
        out
    }
}

impl Mul<C64> for &GradedVector {
    type Output = GradedVector;
    fn mul(self, a: C64) -> GradedVector {
        GradedVector { dim: self.dim, blocks: self.blocks.iter().map(|b| b * a).collect() }
    }
}

/// Block matrix on the truncated Fock space, indexed by
/// `(output degree, input degree)`. Absent blocks are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct GradedOperator {
    source_dim: usize,
    target_dim: usize,
    max_degree: usize,
    blocks: BTreeMap<(usize, usize), CMat>,
}

impl GradedOperator {
    pub fn zeros(source_dim: usize, target_dim: usize, max_degree: usize) -> Self {
        Self { source_dim, target_dim, max_degree, blocks: BTreeMap::new() }
    }

    pub fn identity(dim: usize, max_degree: usize) -> Self {
        let mut op = Self::zeros(dim, dim, max_degree);
        for n in 0..=max_degree {
            op.blocks.insert((n, n), linalg::identity(pow(dim, n)));
        }
        op
    }

    pub fn source_dim(&self) -> usize {
        self.source_dim
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn block(&self, out_degree: usize, in_degree: usize) -> Option<&CMat> {
        self.blocks.get(&(out_degree, in_degree))
    }

    pub fn blocks(&self) -> impl Iterator<Item = (&(usize, usize), &CMat)> {
        self.blocks.iter()
    }

    /// Adds `m` into block `(out, in)`.
    pub fn add_block(&mut self, out_degree: usize, in_degree: usize, m: CMat) {
        assert!(out_degree <= self.max_degree && in_degree <= self.max_degree);
        assert_eq!(m.shape(), (pow(self.target_dim, out_degree), pow(self.source_dim, in_degree)));
        match self.blocks.get_mut(&(out_degree, in_degree)) {
            Some(b) => *b += m,
            None => {
                self.blocks.insert((out_degree, in_degree), m);
            }
        }
    }

    pub fn apply(&self, x: &GradedVector) -> GradedVector {
        assert_eq!(x.dim(), self.source_dim);
        let mut out = GradedVector::zeros(self.target_dim, self.max_degree);
        for (&(m, n), b) in &self.blocks {
            if n <= x.max_degree() {
                out.blocks[m] += b * x.block(n);
            }
        }
        out
    }

    /// `self ∘ rhs`.
    pub fn compose(&self, rhs: &GradedOperator) -> GradedOperator {
        assert_eq!(rhs.target_dim, self.source_dim);
        let mut out = GradedOperator::zeros(rhs.source_dim, self.target_dim, self.max_degree);
        for (&(m, k), a) in &self.blocks {
            for (&(k2, n), b) in &rhs.blocks {
                if k == k2 {
                    out.add_block(m, n, a * b);
                }
            }
        }
        out
    }

    pub fn scale(&self, a: C64) -> GradedOperator {
        let mut out = self.clone();
        for b in out.blocks.values_mut() {
            *b *= a;
        }
        out
    }

    pub fn plus(&self, rhs: &GradedOperator) -> GradedOperator {
        let mut out = self.clone();
        for (&(m, n), b) in &rhs.blocks {
            out.add_block(m, n, b.clone());
        }
        out
    }

    pub fn minus(&self, rhs: &GradedOperator) -> GradedOperator {
        self.plus(&rhs.scale(re(-1.0)))
    }

    /// Blocks whose output degree equals the input degree.
    pub fn diagonal_part(&self) -> GradedOperator {
        let mut out = self.clone();
        out.blocks.retain(|&(m, n), _| m == n);
        out
    }

    /// Keeps blocks with input degree `<= max_in` and output degree `<= max_out`.
    pub fn window(&self, max_out: usize, max_in: usize) -> GradedOperator {
        let mut out = self.clone();
        out.blocks.retain(|&(m, n), _| m <= max_out && n <= max_in);
        out
    }

    pub fn is_block_diagonal(&self, tol: f64) -> bool {
        self.blocks.iter().all(|(&(m, n), b)| m == n || b.iter().all(|z| z.norm() <= tol))
    }

    /// Dense matrix over degrees `0..=max_out` x `0..=max_in`.
    pub fn to_dense(&self, max_out: usize, max_in: usize) -> CMat {
        let rows: usize = (0..=max_out).map(|n| pow(self.target_dim, n)).sum();
        let cols: usize = (0..=max_in).map(|n| pow(self.source_dim, n)).sum();
        let mut out = CMat::zeros(rows, cols);
        for (&(m, n), b) in &self.blocks {
            if m <= max_out && n <= max_in {
                let r0: usize = (0..m).map(|d| pow(self.target_dim, d)).sum();
                let c0: usize = (0..n).map(|d| pow(self.source_dim, d)).sum();
                out.view_mut((r0, c0), b.shape()).copy_from(b);
            }
        }
        out
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.blocks.values().flat_map(|b| b.iter()).map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Matrix-free q-Fock space over `space`, truncated at degree `max_degree`.
#[derive(Debug, Clone)]
pub struct FockSpace {
    space: DeformedSpace,
    q: f64,
    max_degree: usize,
}

impl FockSpace {
    pub fn new(space: DeformedSpace, q: f64, max_degree: usize) -> Result<Self> {
        check_q(q)?;
        Ok(Self { space, q, max_degree })
    }

    pub fn space(&self) -> &DeformedSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn zeros(&self) -> GradedVector {
        GradedVector::zeros(self.dim(), self.max_degree)
    }

    pub fn vacuum(&self) -> GradedVector {
        GradedVector::vacuum(self.dim(), self.max_degree)
    }

    /// Linear functional `w ↦ ⟨v, w⟩_U` as a coordinate row.
    pub fn pairing(&self, v: &CVec) -> Vec<C64> {
        (self.space.metric() * v).iter().map(|z| z.conj()).collect()
    }

    /// `a*_q(v) x = v ⊗ x`; the top degree is sent to zero.
    pub fn create(&self, v: &CVec, x: &GradedVector) -> GradedVector {
        let mut out = self.zeros();
        for n in 0..self.max_degree {
            out.blocks[n + 1] = v.kronecker(x.block(n));
        }
        out
    }

    /// `a_q(v)(w_1 ⊗ … ⊗ w_n) = Σ_p q^{p-1} ⟨v, w_p⟩_U w_1 ⊗ … ŵ_p … ⊗ w_n`.
    pub fn annihilate(&self, v: &CVec, x: &GradedVector) -> GradedVector {
        let phi = CMat::from_row_slice(1, self.dim(), &self.pairing(v));
        let mut out = self.zeros();
        for n in 1..=self.max_degree {
            let z = self.annihilate_legs(&phi, 1, n, x.block(n).as_slice());
            out.blocks[n - 1] = CVec::from_vec(z);
        }
        out
    }

    /// Annihilation by every row of `pairing` at once.
    ///
    /// `data` holds `lead` stacked degree-`m` tensors. The result holds
    /// `pairing.nrows() * lead` stacked degree-`(m-1)` tensors, with the new
    /// functional index most significant.
    pub fn annihilate_legs(&self, pairing: &CMat, lead: usize, m: usize, data: &[C64]) -> Vec<C64> {
        let dim = self.dim();
        let rows = pairing.nrows();
        let in_len = pow(dim, m);
        let out_len = pow(dim, m - 1);
        debug_assert_eq!(data.len(), lead * in_len);
        let mut out = vec![ZERO; rows * lead * out_len];
        let mut qp = 1.0;
        for p in 0..m {
            let hi = pow(dim, p);
            let lo = pow(dim, m - 1 - p);
            for l in 0..lead {
                let src = &data[l * in_len..(l + 1) * in_len];
                for h in 0..hi {
                    for b in 0..dim {
                        let s = &src[(h * dim + b) * lo..(h * dim + b + 1) * lo];
                        for c in 0..rows {
                            let coef = pairing[(c, b)] * qp;
                            if coef == ZERO {
                                continue;
                            }
                            let base = (c * lead + l) * out_len + h * lo;
                            for (d, v) in out[base..base + lo].iter_mut().zip(s) {
                                *d += coef * v;
                            }
                        }
                    }
                }
            }
            qp *= self.q;
            if qp == 0.0 {
                break;
            }
        }
        out
    }

    /// `F_q(T)` applied to `x`; `t` maps this space into a space of
    /// dimension `t.nrows()`.
    pub fn first_quantize(&self, t: &CMat, x: &GradedVector) -> GradedVector {
        let blocks = (0..=self.max_degree.min(x.max_degree()))
            .map(|n| CVec::from_vec(linalg::apply_tensor_power(t, x.block(n).as_slice(), n)))
            .collect();
        GradedVector { dim: t.nrows(), blocks }
    }

    /// `P_q^{(n)} x` by summing leg permutations.
    pub fn apply_symmetrizer(&self, n: usize, x: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; x.len()];
        for perm in linalg::permutations(n) {
            let w = self.q.powi(linalg::inversions(&perm) as i32);
            if w == 0.0 {
                continue;
            }
            let map = linalg::permutation_index_map(self.dim(), &perm);
            for (o, &src) in out.iter_mut().zip(&map) {
                *o += x[src] * w;
            }
        }
        out
    }

    /// Applies the Gram matrix `G^{⊗n} P_q^{(n)}` degree by degree.
    pub fn gram_apply(&self, x: &GradedVector) -> GradedVector {
        let mut out = x.clone();
        for n in 0..=x.max_degree().min(self.max_degree) {
            let b = x.block(n);
            if b.iter().all(|z| *z == ZERO) {
                continue;
            }
            let py = self.apply_symmetrizer(n, b.as_slice());
            *out.block_mut(n) = CVec::from_vec(linalg::apply_tensor_power(self.space.metric(), &py, n));
        }
        out
    }

    /// `⟨x, y⟩_q` summed over degrees.
    pub fn q_inner(&self, x: &GradedVector, y: &GradedVector) -> C64 {
        let gy = self.gram_apply(y);
        let top = self.max_degree.min(x.max_degree()).min(y.max_degree());
        (0..=top).map(|n| x.block(n).dotc(gy.block(n))).sum()
    }

    pub fn q_norm(&self, x: &GradedVector) -> f64 {
        self.q_inner(x, x).re.max(0.0).sqrt()
    }
}

/// Dense permutation-sum symmetrizer `Σ_σ q^{inv(σ)} σ` on degree `n`.
pub fn symmetrizer_matrix(dim: usize, n: usize, q: f64) -> CMat {
    let size = pow(dim, n);
    let mut m = CMat::zeros(size, size);
    for perm in linalg::permutations(n) {
        let w = q.powi(linalg::inversions(&perm) as i32);
        if w == 0.0 {
            continue;
        }
        for (row, col) in linalg::permutation_index_map(dim, &perm).into_iter().enumerate() {
            m[(row, col)] += re(w);
        }
    }
    m
}

/// Norm of `m` as a map between coordinate spaces carrying Gram matrices
/// `gram_src` and `gram_tgt`.
pub fn gram_norm(m: &CMat, gram_src: &CMat, gram_tgt: &CMat) -> Result<f64> {
    let ls = cholesky_factor(gram_src)?;
    let lt = cholesky_factor(gram_tgt)?;
    Ok(linalg::spectral_norm(&(lt.adjoint() * m * inverse_adjoint(&ls)?)))
}

fn cholesky_factor(gram: &CMat) -> Result<CMat> {
    Cholesky::new(linalg::hermitian_part(gram))
        .map(|c| c.l())
        .ok_or_else(|| Error::Numerical("Gram matrix is not positive definite".into()))
}

fn inverse_adjoint(l: &CMat) -> Result<CMat> {
    l.adjoint()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))
}

/// Dense q-Fock space with cached symmetrizers and Gram factors.
#[derive(Debug, Clone)]
pub struct FockContext {
    fock: FockSpace,
    symmetrizers: Vec<CMat>,
    grams: Vec<CMat>,
    /// `L_n^*` where `gram_n = L_n L_n^*`.
    whiten: Vec<CMat>,
    /// `(L_n^*)^{-1}`.
    unwhiten: Vec<CMat>,
}

impl FockContext {
    pub fn new(space: DeformedSpace, q: f64, max_degree: usize) -> Result<Self> {
        let fock = FockSpace::new(space, q, max_degree)?;
        let dim = fock.dim();
        let mut symmetrizers = Vec::new();
        let mut grams = Vec::new();
        let mut whiten = Vec::new();
        let mut unwhiten = Vec::new();
        let mut g_pow = CMat::from_element(1, 1, ONE);
        for n in 0..=max_degree {
            if n > 0 {
                g_pow = g_pow.kronecker(fock.space().metric());
            }
            let p = symmetrizer_matrix(dim, n, q);
            let gram = &g_pow * &p;
            let l = cholesky_factor(&gram)?;
            unwhiten.push(inverse_adjoint(&l)?);
            whiten.push(l.adjoint());
            grams.push(gram);
            symmetrizers.push(p);
        }
        Ok(Self { fock, symmetrizers, grams, whiten, unwhiten })
    }

    pub fn fock(&self) -> &FockSpace {
        &self.fock
    }

    pub fn space(&self) -> &DeformedSpace {
        self.fock.space()
    }

    pub fn dim(&self) -> usize {
        self.fock.dim()
    }

    pub fn q(&self) -> f64 {
        self.fock.q()
    }

    pub fn max_degree(&self) -> usize {
        self.fock.max_degree()
    }

    fn check_degree(&self, n: usize) -> Result<()> {
        if n > self.max_degree() {
            Err(Error::DegreeOverflow { degree: n, max: self.max_degree() })
        } else {
            Ok(())
        }
    }

    /// `P_q^{(n)}`.
    pub fn q_symmetrizer(&self, n: usize) -> Result<&CMat> {
        self.check_degree(n)?;
        Ok(&self.symmetrizers[n])
    }

    /// Gram matrix `G^{⊗n} P_q^{(n)}` of the degree-`n` q-inner product.
    pub fn gram(&self, n: usize) -> Result<&CMat> {
        self.check_degree(n)?;
        Ok(&self.grams[n])
    }

    /// `⟨ξ, η⟩_q` for degree-`n` coordinate blocks.
    pub fn q_inner(&self, xi: &CVec, eta: &CVec, n: usize) -> Result<C64> {
        let g = self.gram(n)?;
        for v in [xi, eta] {
            if v.len() != g.nrows() {
                return Err(Error::DimensionMismatch { expected: g.nrows(), found: v.len() });
            }
        }
        Ok((xi.adjoint() * g * eta)[(0, 0)])
    }

    pub fn inner(&self, x: &GradedVector, y: &GradedVector) -> C64 {
        (0..=self.max_degree().min(x.max_degree()).min(y.max_degree()))
            .map(|n| (x.block(n).adjoint() * &self.grams[n] * y.block(n))[(0, 0)])
            .sum()
    }

    pub fn norm(&self, x: &GradedVector) -> f64 {
        self.inner(x, x).re.max(0.0).sqrt()
    }

    pub fn creation(&self, v: &CVec) -> GradedOperator {
        let dim = self.dim();
        let mut op = GradedOperator::zeros(dim, dim, self.max_degree());
        for n in 0..self.max_degree() {
            op.add_block(n + 1, n, v_kron_identity(v, pow(dim, n)));
        }
        op
    }

    /// Free annihilation `a(v)(w_1 ⊗ rest) = ⟨v, w_1⟩_U rest`.
    pub fn free_annihilation(&self, v: &CVec) -> GradedOperator {
        let dim = self.dim();
        let phi = CMat::from_row_slice(1, dim, &self.fock.pairing(v));
        let mut op = GradedOperator::zeros(dim, dim, self.max_degree());
        for n in 0..self.max_degree() {
            op.add_block(n, n + 1, phi.kronecker(&linalg::identity(pow(dim, n))));
        }
        op
    }

    /// `a_q(v) = P_q^{-1} a(v) P_q`.
    pub fn annihilation(&self, v: &CVec) -> GradedOperator {
        let free = self.free_annihilation(v);
        let dim = self.dim();
        let mut op = GradedOperator::zeros(dim, dim, self.max_degree());
        for n in 0..self.max_degree() {
            let a = free.block(n, n + 1).expect("free annihilation block");
            let rhs = a * &self.symmetrizers[n + 1];
            let solved = self.symmetrizers[n]
                .clone()
                .lu()
                .solve(&rhs)
                .expect("symmetrizer is invertible for |q| < 1");
            op.add_block(n, n + 1, solved);
        }
        op
    }

    /// `s_q(h) = a*_q(h) + a_q(h)`; logs a warning when `h` is not real.
    pub fn s_q(&self, h: &CVec) -> GradedOperator {
        let defect = (self.space().conjugate(h) - h).norm();
        if defect > 1e-10 {
            log::warn!("s_q called with a vector outside the real subspace (|Ih - h| = {defect:e})");
        }
        self.creation(h).plus(&self.annihilation(h))
    }

    /// Adjoint for the q-inner products of two contexts.
    pub fn adjoint_between(op: &GradedOperator, src: &FockContext, tgt: &FockContext) -> GradedOperator {
        let mut out = GradedOperator::zeros(op.target_dim(), op.source_dim(), op.max_degree());
        for (&(m, n), b) in op.blocks() {
            // (L_n L_n^*)^{-1} b^* (L_m L_m^*)
            let g_inv_u = &src.unwhiten[n];
            let g_inv = g_inv_u * g_inv_u.adjoint();
            out.add_block(n, m, g_inv * b.adjoint() * &tgt.grams[m]);
        }
        out
    }

    pub fn adjoint(&self, op: &GradedOperator) -> GradedOperator {
        Self::adjoint_between(op, self, self)
    }

    /// `op` in orthonormal coordinates over degrees `0..=max_out` x `0..=max_in`.
    pub fn whitened_between(op: &GradedOperator, src: &FockContext, tgt: &FockContext, max_out: usize, max_in: usize) -> CMat {
        let mut w = GradedOperator::zeros(op.source_dim(), op.target_dim(), op.max_degree());
        for (&(m, n), b) in op.blocks() {
            if m <= max_out && n <= max_in {
                w.add_block(m, n, &tgt.whiten[m] * b * &src.unwhiten[n]);
            }
        }
        w.to_dense(max_out, max_in)
    }

    pub fn whitened(&self, op: &GradedOperator, max_out: usize, max_in: usize) -> CMat {
        Self::whitened_between(op, self, self, max_out, max_in)
    }

    /// Operator norm for the q-inner products.
    pub fn operator_norm(&self, op: &GradedOperator) -> f64 {
        linalg::spectral_norm(&self.whitened(op, self.max_degree(), self.max_degree()))
    }

    /// Operator norm of `op` restricted to inputs of degree `<= max_in`.
    pub fn window_norm(&self, op: &GradedOperator, max_in: usize) -> f64 {
        linalg::spectral_norm(&self.whitened(op, self.max_degree(), max_in))
    }

    /// Smallest eigenvalue of a q-self-adjoint operator compressed to degrees
    /// `<= window`.
    pub fn min_eigenvalue(&self, op: &GradedOperator, window: usize) -> f64 {
        linalg::min_eigenvalue(&self.whitened(op, window, window))
    }

    /// Largest deviation from self-adjointness for the q-inner product.
    pub fn self_adjoint_residual(&self, op: &GradedOperator) -> f64 {
        let w = self.whitened(op, self.max_degree(), self.max_degree());
        linalg::spectral_norm(&(&w - w.adjoint()))
    }

    /// `R*_{n+k,k}` on degree `n+k`: the sum over splittings into `n` and `k`
    /// legs weighted by `q^{crossings}`.
    pub fn r_star(&self, n: usize, k: usize) -> Result<CMat> {
        self.check_degree(n + k)?;
        Ok(r_star_matrix(self.dim(), n, k, self.q()))
    }

    /// `‖P_q^{(n+k)} - (P_q^{(n)} ⊗ P_q^{(k)}) R*_{n+k,k}‖`.
    pub fn factorization_residual(&self, n: usize, k: usize) -> Result<f64> {
        let r = self.r_star(n, k)?;
        let prod = self.symmetrizers[n].kronecker(&self.symmetrizers[k]) * r;
        Ok(linalg::spectral_norm(&(&self.symmetrizers[n + k] - prod)))
    }

    /// Gram matrix of `H_q^{⊗n} ⊗ H_q^{⊗k}` on degree-`(n+k)` coordinates.
    pub fn split_gram(&self, n: usize, k: usize) -> Result<CMat> {
        self.check_degree(n + k)?;
        Ok(self.grams[n].kronecker(&self.grams[k]))
    }

    /// Norm of the identity map `H_q^{⊗n} ⊗ H_q^{⊗k} → H_q^{⊗(n+k)}`.
    pub fn split_identity_norm(&self, n: usize, k: usize) -> Result<f64> {
        let id = linalg::identity(pow(self.dim(), n + k));
        gram_norm(&id, &self.split_gram(n, k)?, &self.grams[n + k])
    }

    /// Norm of `R*_{n+k,k}: H_q^{⊗(n+k)} → H_q^{⊗n} ⊗ H_q^{⊗k}`.
    pub fn r_star_deformed_norm(&self, n: usize, k: usize) -> Result<f64> {
        gram_norm(&self.r_star(n, k)?, &self.grams[n + k], &self.split_gram(n, k)?)
    }

    /// `‖(Id_{n,k})^♯ - R*_{n+k,k}‖`, adjoint taken for the q-inner products.
    pub fn split_adjoint_residual(&self, n: usize, k: usize) -> Result<f64> {
        let split = self.split_gram(n, k)?;
        let adj = split
            .lu()
            .solve(&self.grams[n + k])
            .ok_or_else(|| Error::Numerical("singular split Gram matrix".into()))?;
        Ok(linalg::spectral_norm(&(adj - self.r_star(n, k)?)))
    }
}

/// `R*_{n+k,k}` as a dense matrix.
pub fn r_star_matrix(dim: usize, n: usize, k: usize, q: f64) -> CMat {
    let size = pow(dim, n + k);
    let mut m = CMat::zeros(size, size);
    for (first, second) in shuffles(n + k, n) {
        let w = q.powi(crossing_number(&first, &second).expect("shuffle is a partition") as i32);
        if w == 0.0 {
            continue;
        }
        let order: Vec<usize> = first.iter().chain(&second).map(|i| i - 1).collect();
        for (row, col) in linalg::permutation_index_map(dim, &order).into_iter().enumerate() {
            m[(row, col)] += re(w);
        }
    }
    m
}

fn v_kron_identity(v: &CVec, size: usize) -> CMat {
    let dim = v.len();
    let mut m = CMat::zeros(dim * size, size);
    for b in 0..dim {
        for r in 0..size {
            m[(b * size + r, r)] = v[b];
        }
    }
    m
}

/// `F_q(T)`: degree-`n` block `T^{⊗n}`.
pub fn first_quantization(src: &FockContext, tgt: &FockContext, t: &CMat) -> Result<GradedOperator> {
    if t.shape() != (tgt.dim(), src.dim()) {
        return Err(Error::DimensionMismatch { expected: tgt.dim() * src.dim(), found: t.len() });
    }
    let n_max = src.max_degree().min(tgt.max_degree());
    let mut op = GradedOperator::zeros(src.dim(), tgt.dim(), n_max);
    let mut power = CMat::from_element(1, 1, ONE);
    for n in 0..=n_max {
        if n > 0 {
            power = power.kronecker(t);
        }
        op.add_block(n, n, power.clone());
    }
    Ok(op)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{build_space, BlockSpectrum};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ctx(spec: &str, q: f64, n: usize) -> FockContext {
        FockContext::new(build_space(&spec.parse().unwrap()).unwrap(), q, n).unwrap()
    }

    #[test]
    fn rejects_q_outside_interval() {
        let s = build_space(&BlockSpectrum::trivial(1)).unwrap();
        for q in [1.0, -1.0, 1.5, f64::NAN] {
            assert!(matches!(FockContext::new(s.clone(), q, 2), Err(Error::InvalidDeformation(_))));
        }
    }

    #[test]
    fn low_degree_symmetrizers_are_identity() {
        let c = ctx("t3", 0.7, 3);
        assert_eq!(c.q_symmetrizer(0).unwrap(), &linalg::identity(1));
        assert_eq!(c.q_symmetrizer(1).unwrap(), &linalg::identity(3));
        assert!(matches!(c.q_symmetrizer(4), Err(Error::DegreeOverflow { .. })));
    }

    #[test]
    fn free_symmetrizer_is_identity() {
        let c = ctx("t2", 0.0, 4);
        for n in 0..=4 {
            assert_eq!(c.q_symmetrizer(n).unwrap(), &linalg::identity(pow(2, n)));
        }
    }

    #[test]
    fn degree_two_symmetrizer_spectrum() {
        // Id + q Swap on C^2 ⊗ C^2: eigenvalues 1 + q (x3) and 1 - q (x1)
        let c = ctx("t2", 0.5, 2);
        let ev = linalg::hermitian_eigenvalues(c.q_symmetrizer(2).unwrap());
        let expect = [0.5, 1.5, 1.5, 1.5];
        for (a, b) in ev.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn c_q_values() {
        assert_eq!(c_q(0.0), 1.0);
        // partial products of Π (1 - 2^{-k})^{-1}
        let mut oracle = 1.0;
        for k in 1..200 {
            oracle /= 1.0 - 0.5f64.powi(k);
        }
        assert!((c_q(0.5) - oracle).abs() < 1e-12);
        assert!((c_q(0.5) - 3.46275).abs() < 1e-5);
        assert_eq!(c_q(-0.5), c_q(0.5));
    }

    #[test]
    fn q_inner_examples() {
        let c = ctx("2x1", 0.3, 3);
        let omega = CVec::from_element(1, ONE);
        assert_eq!(c.q_inner(&omega, &omega, 0).unwrap(), ONE);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let e = c.space().random_vector(&mut rng);
        let ee = e.kronecker(&e);
        let lhs = c.q_inner(&ee, &ee, 2).unwrap();
        let eu = crate::space::deformed_inner(c.space(), &e, &e).unwrap();
        assert!((lhs - eu * eu * re(1.3)).norm() < 1e-12);
        // q = 0: tensor power of the deformed metric
        let c0 = ctx("2x1", 0.0, 2);
        let (x, y) = (c.space().random_vector(&mut rng), c.space().random_vector(&mut rng));
        let (u, v) = (c.space().random_vector(&mut rng), c.space().random_vector(&mut rng));
        let got = c0.q_inner(&x.kronecker(&u), &y.kronecker(&v), 2).unwrap();
        let want = crate::space::deformed_inner(c.space(), &x, &y).unwrap()
            * crate::space::deformed_inner(c.space(), &u, &v).unwrap();
        assert!((got - want).norm() < 1e-12);
    }

    #[test]
    fn matrix_free_inner_matches_dense() {
        let c = ctx("2x1+t1", -0.6, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mk = |rng: &mut ChaCha8Rng| {
            let blocks = (0..=3).map(|n| linalg::random_vector(rng, pow(3, n))).collect();
            GradedVector::from_blocks(3, blocks).unwrap()
        };
        let (x, y) = (mk(&mut rng), mk(&mut rng));
        assert!((c.inner(&x, &y) - c.fock().q_inner(&x, &y)).norm() < 1e-11);
    }

    #[test]
    fn creation_on_vacuum() {
        let c = ctx("2x1", 0.4, 3);
        let v = CVec::from_vec(vec![C64::new(1.0, 2.0), re(-0.5)]);
        let out = c.creation(&v).apply(&c.fock().vacuum());
        assert_eq!(out.block(1), &v);
        let mf = c.fock().create(&v, &c.fock().vacuum());
        assert_eq!(mf, out);
    }

    #[test]
    fn free_annihilation_example() {
        let c = ctx("2x1", 0.0, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (v, w1, w2) = (
            c.space().random_vector(&mut rng),
            c.space().random_vector(&mut rng),
            c.space().random_vector(&mut rng),
        );
        let x = GradedVector::simple_tensor(2, 2, &[w1.clone(), w2.clone()]).unwrap();
        let got = c.annihilation(&v).apply(&x);
        let want = &w2 * crate::space::deformed_inner(c.space(), &v, &w1).unwrap();
        assert!((got.block(1) - want).norm() < 1e-13);
    }

    #[test]
    fn annihilation_routes_agree_and_are_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for (spec, q) in [("t2", 0.5), ("2x1", -0.7), ("2x1+t1", 0.9)] {
            let c = ctx(spec, q, 4);
            let v = c.space().random_vector(&mut rng);
            let dense = c.annihilation(&v);
            let adj = c.adjoint(&c.creation(&v));
            assert!(dense.minus(&adj).max_abs_entry() < 1e-9, "{spec} {q}");
            let x = GradedVector::from_blocks(c.dim(), (0..=4).map(|n| linalg::random_vector(&mut rng, pow(c.dim(), n))).collect()).unwrap();
            let mf = c.fock().annihilate(&v, &x);
            assert!(c.norm(&(&dense.apply(&x) - &mf)) < 1e-9, "{spec} {q}");
            // vacuum is killed
            assert!(c.norm(&dense.apply(&c.fock().vacuum())) == 0.0);
        }
    }

    #[test]
    fn q_commutation_relation() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for q in [-0.9, -0.5, 0.0, 0.3, 0.9] {
            let c = ctx("2x1+t1", q, 4);
            let v = c.space().random_vector(&mut rng);
            let w = c.space().random_vector(&mut rng);
            let lhs = c
                .annihilation(&v)
                .compose(&c.creation(&w))
                .minus(&c.creation(&w).compose(&c.annihilation(&v)).scale(re(q)));
            let ip = crate::space::deformed_inner(c.space(), &v, &w).unwrap();
            let diff = lhs.minus(&GradedOperator::identity(3, 4).scale(ip));
            // only degrees <= N - 1 are free of truncation effects
            assert!(c.window_norm(&diff.window(3, 3), 3) < 1e-10, "q = {q}");
        }
    }

    #[test]
    fn s_q_is_self_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = ctx("2x1", 0.6, 4);
        let h = c.space().random_real_vector(&mut rng);
        let s = c.s_q(&h);
        assert!(c.self_adjoint_residual(&s) < 1e-10);
        assert_eq!(s.apply(&c.fock().vacuum()).block(1), &h);
    }

    #[test]
    fn free_semicircular_tridiagonal() {
        // dim 1, q = 0: s(e) is the shift plus its adjoint
        let c = ctx("t1", 0.0, 4);
        let s = c.s_q(&CVec::from_element(1, ONE)).to_dense(4, 4);
        for i in 0..5usize {
            for j in 0..5usize {
                let expect = if i.abs_diff(j) == 1 { 1.0 } else { 0.0 };
                assert!((s[(i, j)] - re(expect)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn first_quantization_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = ctx("2x1", 0.5, 3);
        let id = first_quantization(&c, &c, &linalg::identity(2)).unwrap();
        assert_eq!(id, GradedOperator::identity(2, 3));
        let zero = first_quantization(&c, &c, &CMat::zeros(2, 2)).unwrap();
        let z = zero.to_dense(3, 3);
        assert_eq!(z[(0, 0)], ONE);
        assert_eq!(z.iter().filter(|x| **x != ZERO).count(), 1);
        let s = linalg::random_matrix(&mut rng, 2, 2);
        let t = linalg::random_matrix(&mut rng, 2, 2);
        let lhs = first_quantization(&c, &c, &s).unwrap().compose(&first_quantization(&c, &c, &t).unwrap());
        let rhs = first_quantization(&c, &c, &(&s * &t)).unwrap();
        assert!(lhs.minus(&rhs).max_abs_entry() < 1e-10);
    }

    #[test]
    fn r_star_examples() {
        let c = ctx("t1", 0.3, 3);
        assert_eq!(c.r_star(2, 0).unwrap(), linalg::identity(1));
        let r = c.r_star(1, 1).unwrap();
        assert!((r[(0, 0)] - re(1.3)).norm() < 1e-15);
        let c0 = ctx("t2", 0.0, 3);
        assert_eq!(c0.r_star(1, 2).unwrap(), linalg::identity(8));
        assert!(matches!(c.r_star(2, 2), Err(Error::DegreeOverflow { .. })));
    }

    #[test]
    fn factorization_holds() {
        for q in [-0.5, 0.5] {
            for spec in ["t1", "t2", "2x1+t1"] {
                let c = ctx(spec, q, 4);
                assert_eq!(c.factorization_residual(3, 0).unwrap(), 0.0);
                assert!(c.factorization_residual(1, 1).unwrap() <= 1e-12);
            }
        }
        let c = ctx("t2", 0.7, 4);
        assert!(c.factorization_residual(2, 2).unwrap() <= 1e-10);
    }

    #[test]
    fn split_norm_bounds() {
        for q in [-0.9, 0.5, 0.9] {
            let c = ctx("2x1", q, 4);
            let bound = c_q(q);
            for (n, k) in [(1, 1), (1, 2), (2, 2), (1, 3)] {
                let plain = linalg::spectral_norm(&c.r_star(n, k).unwrap());
                assert!(plain <= bound + 1e-8);
                assert!(c.split_identity_norm(n, k).unwrap() <= bound.sqrt() + 1e-8);
                assert!(c.r_star_deformed_norm(n, k).unwrap() <= bound.sqrt() + 1e-8);
                assert!(c.split_adjoint_residual(n, k).unwrap() <= 1e-10);
            }
        }
    }
}
