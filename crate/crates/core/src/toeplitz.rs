//! The q-Toeplitz algebra generated by creation operators: monomials
//! `a*(v_1)…a*(v_k) a(w_1)…a(w_l)`, their grading by length, the degree
//! expectation, compressions to Fock spaces of subspaces, and the norm
//! estimates relating an element to its lowest nonzero diagonal block.
//!
//! An element with `k` creations and `l` annihilations is stored through
//! a coefficient matrix `X` of shape `dim^k × dim^l`:
//! `x = Σ_{c,d} X[c, d] a*(e_{c_1})…a*(e_{c_k}) a(e_{d_1})…a(e_{d_l})`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::fock::{c_q, gram_norm, FockContext, FockSpace, GradedOperator};
use crate::linalg::{self, pow, CMat, CVec, ONE};
use crate::space::DeformedSpace;

/// An operator built from `creations` creation factors followed by
/// `annihilations` annihilation factors.
#[derive(Debug, Clone)]
pub struct LengthElement {
    creations: usize,
    annihilations: usize,
    realized: GradedOperator,
}

impl LengthElement {
    pub fn creations(&self) -> usize {
        self.creations
    }

    pub fn annihilations(&self) -> usize {
        self.annihilations
    }

    /// Total number of factors.
    pub fn length(&self) -> usize {
        self.creations + self.annihilations
    }

    pub fn realized(&self) -> &GradedOperator {
        &self.realized
    }

    /// `max_{m < l} ‖P_m x P_m‖`, which vanishes since `l` annihilations kill
    /// every degree below `l`.
    pub fn low_degree_residual(&self) -> f64 {
        (0..self.annihilations)
            .filter_map(|m| self.realized.block(m, m))
            .map(linalg::spectral_norm)
            .fold(0.0, f64::max)
    }
}

/// `a*(v_1)…a*(v_k) a(w_1)…a(w_l)` from the dense creation and
/// annihilation operators of `ctx`.
pub fn monomial(ctx: &FockContext, v_list: &[CVec], w_list: &[CVec]) -> Result<LengthElement> {
    let total = v_list.len() + w_list.len();
    if total > ctx.max_degree() {
        return Err(Error::DegreeOverflow { degree: total, max: ctx.max_degree() });
    }
    let mut op = GradedOperator::identity(ctx.dim(), ctx.max_degree());
    for v in v_list {
        op = op.compose(&ctx.creation(v));
    }
    for w in w_list {
        op = op.compose(&ctx.annihilation(w));
    }
    Ok(LengthElement { creations: v_list.len(), annihilations: w_list.len(), realized: op })
}

/// `Σ X[c, d] a*(e_c) a(e_d)` realised on input degrees `<= max_in`.
fn realize_coefficients(fock: &FockSpace, k: usize, l: usize, coef: &CMat, max_in: usize) -> GradedOperator {
    let dim = fock.dim();
    let n_max = fock.max_degree();
    // row b is the functional ⟨e_b, ·⟩_U
    let pairing = fock.space().metric().clone();
    let mut op = GradedOperator::zeros(dim, dim, n_max);
    for m in l..=max_in.min(n_max) {
        let out = m - l + k;
        if out > n_max {
            continue;
        }
        let size = pow(dim, m);
        // every basis vector of degree m, stacked
        let mut y: Vec<_> = linalg::identity(size).transpose().as_slice().to_vec();
        for step in 1..=l {
            y = fock.annihilate_legs(&pairing, size * pow(dim, step - 1), m - step + 1, &y);
        }
        // y is laid out as (d, input j, remainder r)
        let rest = pow(dim, m - l);
        let ymat = CMat::from_row_slice(pow(dim, l), size * rest, &y);
        let z = coef * ymat;
        let mut block = CMat::zeros(pow(dim, k) * rest, size);
        for c in 0..pow(dim, k) {
            for j in 0..size {
                for r in 0..rest {
                    block[(c * rest + r, j)] = z[(c, j * rest + r)];
                }
            }
        }
        op.add_block(out, m, block);
    }
    op
}

/// Element with `k` creations and `l` annihilations from its coefficient
/// matrix (`dim^k × dim^l`).
pub fn length_element(ctx: &FockContext, k: usize, l: usize, coef: &CMat) -> Result<LengthElement> {
    let shape = (pow(ctx.dim(), k), pow(ctx.dim(), l));
    if coef.shape() != shape {
        return Err(Error::DimensionMismatch { expected: shape.0 * shape.1, found: coef.len() });
    }
    if k + l > ctx.max_degree() {
        return Err(Error::DegreeOverflow { degree: k + l, max: ctx.max_degree() });
    }
    let realized = realize_coefficients(ctx.fock(), k, l, coef, ctx.max_degree());
    Ok(LengthElement { creations: k, annihilations: l, realized })
}

/// Coefficient matrix of `a*(v) a(w̄)` for tensors `v`, `w`: linear in `v`,
/// antilinear in `w`.
pub fn rank_one_coefficients(v: &CVec, w: &CVec) -> CMat {
    v * w.adjoint()
}

/// An element `Σ a*(v_n) a(w̄_n)` with equally many creations and
/// annihilations; block diagonal in the degree grading.
#[derive(Debug, Clone)]
pub struct BalancedElement {
    order: usize,
    element: LengthElement,
}

impl BalancedElement {
    pub fn new(element: LengthElement) -> Result<Self> {
        if element.creations != element.annihilations {
            return Err(Error::LengthMismatch { expected: element.annihilations, found: element.creations });
        }
        Ok(Self { order: element.annihilations, element })
    }

    /// Random coefficients on the monomial basis of order `n`.
    pub fn random<R: Rng + ?Sized>(ctx: &FockContext, n: usize, rng: &mut R) -> Result<Self> {
        let size = pow(ctx.dim(), n);
        Self::new(length_element(ctx, n, n, &linalg::random_matrix(rng, size, size))?)
    }

    /// Number of creations (equal to the number of annihilations).
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn element(&self) -> &LengthElement {
        &self.element
    }

    pub fn realized(&self) -> &GradedOperator {
        &self.element.realized
    }

    /// `P_m x P_m` in degree-`m` coordinates.
    pub fn diagonal_block(&self, ctx: &FockContext, m: usize) -> CMat {
        let size = pow(ctx.dim(), m);
        self.element.realized.block(m, m).cloned().unwrap_or_else(|| CMat::zeros(size, size))
    }
}

/// Exact block-diagonal part: the average over the circle action
/// `x ↦ F_q(e^{it}) x F_q(e^{-it})`.
pub fn degree_expectation(x: &GradedOperator) -> GradedOperator {
    x.diagonal_part()
}

/// `h_1 ⊗ … ⊗ h_n ↦ h_n ⊗ … ⊗ h_1`.
pub fn flip(ctx: &FockContext, n: usize) -> Result<CMat> {
    if n > ctx.max_degree() {
        return Err(Error::DegreeOverflow { degree: n, max: ctx.max_degree() });
    }
    let size = pow(ctx.dim(), n);
    let rev: Vec<usize> = (0..n).rev().collect();
    let mut m = CMat::zeros(size, size);
    for (row, col) in linalg::permutation_index_map(ctx.dim(), &rev).into_iter().enumerate() {
        m[(row, col)] = ONE;
    }
    Ok(m)
}

/// Inner product used on the right-hand side of the flip identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pairing {
    /// `G^{⊗n}` only.
    Free,
    /// `G^{⊗n} P_q^{(n)}`.
    Deformed,
}

/// `‖a*(v) a(w̄) e - ⟨Σ w, e⟩ v‖` for degree-`n` tensors `v`, `w`, `e`.
pub fn flip_pairing_residual(ctx: &FockContext, n: usize, v: &CVec, w: &CVec, e: &CVec, pairing: Pairing) -> Result<f64> {
    let x = length_element(ctx, n, n, &rank_one_coefficients(v, w))?;
    let lhs = x.realized.block(n, n).map(|b| b * e).unwrap_or_else(|| CVec::zeros(e.len()));
    let sigma_w = flip(ctx, n)? * w;
    let mut g = linalg::identity(1);
    for _ in 0..n {
        g = g.kronecker(ctx.space().metric());
    }
    let form = match pairing {
        Pairing::Free => g,
        Pairing::Deformed => ctx.gram(n)?.clone(),
    };
    let ip = (sigma_w.adjoint() * form * e)[(0, 0)];
    Ok((lhs - v * ip).norm())
}

/// Coordinates of a subspace spanned by basis vectors of `space`, checked
/// to be closed under the conjugation pairing (hence invariant under `I`
/// and `A`).
pub fn subspace(space: &DeformedSpace, indices: &[usize]) -> Result<DeformedSpace> {
    if indices.is_empty() || indices.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::NotInvariantSubspace("indices must be nonempty and strictly increasing".into()));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= space.dim()) {
        return Err(Error::NotInvariantSubspace(format!("index {bad} out of range")));
    }
    let pos = |i: usize| indices.iter().position(|&j| j == i);
    let mut partner = Vec::with_capacity(indices.len());
    for &i in indices {
        match pos(space.partner()[i]) {
            Some(p) => partner.push(p),
            None => {
                return Err(Error::NotInvariantSubspace(format!(
                    "basis vector {i} is present but its conjugate {} is not",
                    space.partner()[i]
                )))
            }
        }
    }
    let eigenvalues = indices.iter().map(|&i| space.eigenvalues()[i]).collect();
    DeformedSpace::from_eigen_data(eigenvalues, partner)
}

/// Tensor coordinates of degree `n` whose legs all lie in `indices`, in
/// the order of the subspace's own coordinates.
fn subspace_tensor_indices(dim: usize, indices: &[usize], n: usize) -> Vec<usize> {
    let kd = indices.len();
    (0..pow(kd, n))
        .map(|mut c| {
            let mut idx = 0;
            let mut stride = 1;
            for _ in 0..n {
                idx += indices[c % kd] * stride;
                c /= kd;
                stride *= dim;
            }
            idx
        })
        .collect()
}

/// `F_q(ι)^♯ x F_q(ι)` for the inclusion of the coordinate subspace `K`.
/// Returns the Fock context over `K` and the compressed operator.
pub fn compression(ctx: &FockContext, indices: &[usize], x: &GradedOperator) -> Result<(FockContext, GradedOperator)> {
    let k_space = subspace(ctx.space(), indices)?;
    let k_ctx = FockContext::new(k_space, ctx.q(), ctx.max_degree())?;
    let kd = indices.len();
    let mut out = GradedOperator::zeros(kd, kd, ctx.max_degree());
    let idx: Vec<Vec<usize>> = (0..=ctx.max_degree()).map(|n| subspace_tensor_indices(ctx.dim(), indices, n)).collect();
    for (&(m, n), b) in x.blocks() {
        let sub = CMat::from_fn(idx[m].len(), idx[n].len(), |r, c| b[(idx[m][r], idx[n][c])]);
        out.add_block(m, n, sub);
    }
    Ok((k_ctx, out))
}

/// Column rank of the realisation map on monomials over `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankReport {
    pub rank: usize,
    pub columns: usize,
    pub smallest_singular_ratio: f64,
}

impl RankReport {
    pub fn is_full(&self) -> bool {
        self.rank == self.columns
    }
}

/// Realises every basis monomial `a*(e_c) a(e_d)` over `K` with
/// `|c| + |d| <= max_length` as an operator on `F_q(H)`, flattens it on
/// input degrees `<= N - max_length`, and reports the rank.
pub fn finkernel_rank(ctx: &FockContext, indices: &[usize], max_length: usize) -> Result<RankReport> {
    subspace(ctx.space(), indices)?;
    if 2 * max_length > ctx.max_degree() {
        return Err(Error::DegreeOverflow { degree: 2 * max_length, max: ctx.max_degree() });
    }
    let max_in = ctx.max_degree() - max_length;
    let dim = ctx.dim();
    let mut columns: Vec<CVec> = Vec::new();
    for total in 0..=max_length {
        for k in 0..=total {
            let l = total - k;
            let creators = subspace_tensor_indices(dim, indices, k);
            let annihilators = subspace_tensor_indices(dim, indices, l);
            for &c in &creators {
                for &d in &annihilators {
                    let mut coef = CMat::zeros(pow(dim, k), pow(dim, l));
                    coef[(c, d)] = ONE;
                    let op = realize_coefficients(ctx.fock(), k, l, &coef, max_in);
                    let flat = op.to_dense(ctx.max_degree(), max_in);
                    columns.push(CVec::from_column_slice(flat.as_slice()));
                }
            }
        }
    }
    let m = CMat::from_columns(&columns);
    let sv = if m.nrows() > m.ncols() { m.clone().qr().r().singular_values() } else { m.clone().singular_values() };
    let top = sv.iter().copied().fold(0.0, f64::max);
    let bottom = sv.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(RankReport {
        rank: linalg::numerical_rank(&m, 1e-8),
        columns: columns.len(),
        smallest_singular_ratio: if top > 0.0 { bottom / top } else { 0.0 },
    })
}

/// `‖P_{n+k} x P_{n+k} - (P_n x P_n ⊗ 1_k) R*_{n+k,k}‖` in the q-norm of
/// degree `n + k`.
pub fn compression_identity_residual(ctx: &FockContext, x: &BalancedElement, k: usize) -> Result<f64> {
    let n = x.order();
    if n + k > ctx.max_degree() {
        return Err(Error::DegreeOverflow { degree: n + k, max: ctx.max_degree() });
    }
    let lhs = x.diagonal_block(ctx, n + k);
    let rhs = x.diagonal_block(ctx, n).kronecker(&linalg::identity(pow(ctx.dim(), k))) * ctx.r_star(n, k)?;
    let g = ctx.gram(n + k)?;
    gram_norm(&(lhs - rhs), g, g)
}

/// q-norm of the degree-`m` diagonal block of `x`.
pub fn diagonal_block_norm(ctx: &FockContext, x: &BalancedElement, m: usize) -> Result<f64> {
    let g = ctx.gram(m)?;
    gram_norm(&x.diagonal_block(ctx, m), g, g)
}

/// `C(q) ‖P_n x P_n‖ - max_{k <= N - n} ‖P_{n+k} x P_{n+k}‖`.
pub fn norm_bound_margin(ctx: &FockContext, x: &BalancedElement) -> Result<f64> {
    let n = x.order();
    let base = diagonal_block_norm(ctx, x, n)?;
    let mut worst: f64 = 0.0;
    for m in n..=ctx.max_degree() {
        worst = worst.max(diagonal_block_norm(ctx, x, m)?);
    }
    Ok(c_q(ctx.q()) * base - worst)
}

/// Outcome of checking `A <= ‖T‖ B` from `A = B T`.
#[derive(Debug, Clone, PartialEq)]
pub struct MajorisationReport {
    pub t_norm: f64,
    /// Smallest eigenvalue of `‖T‖ B - A`.
    pub margin: f64,
    /// `‖A - B T‖`.
    pub consistency: f64,
}

/// Checks the majorisation `A <= ‖T‖ B` for positive `A`, `B` with `A = BT`.
pub fn majorisation_check(a: &CMat, b: &CMat, t: &CMat) -> Result<MajorisationReport> {
    let consistency = linalg::spectral_norm(&(a - b * t));
    let scale = linalg::spectral_norm(a).max(1.0);
    if consistency > 1e-12 * scale {
        return Err(Error::InconsistentMajorisation(consistency));
    }
    for m in [a, b] {
        let lo = linalg::min_eigenvalue(m);
        let asym = linalg::spectral_norm(&(m - m.adjoint()));
        if lo < -1e-12 * scale || asym > 1e-12 * scale {
            return Err(Error::InconsistentMajorisation(consistency));
        }
    }
    let t_norm = linalg::spectral_norm(t);
    let margin = linalg::min_eigenvalue(&(b * linalg::re(t_norm) - a));
    Ok(MajorisationReport { t_norm, margin, consistency })
}

/// The instance `A = P_q^{(n+k)}`, `B = P_q^{(n)} ⊗ P_q^{(k)}`, `T = R*_{n+k,k}`.
pub fn symmetrizer_majorisation(ctx: &FockContext, n: usize, k: usize) -> Result<MajorisationReport> {
    let a = ctx.q_symmetrizer(n + k)?;
    let b = ctx.q_symmetrizer(n)?.kronecker(ctx.q_symmetrizer(k)?);
    majorisation_check(a, &b, &ctx.r_star(n, k)?)
}
