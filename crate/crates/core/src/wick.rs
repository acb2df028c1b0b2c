//! Wick words `W(ξ)`, the unique operators in the q-Araki-Woods algebra with
//! `W(ξ)Ω = ξ`.
//!
//! A simple tensor expands as a crossing-weighted sum of normal-ordered
//! monomials
//!
//! ```text
//! W(e_1 ⊗ … ⊗ e_n) = Σ_{I_1 ⊔ I_2} q^{i(I_1, I_2)}
//!     a*(e_{i_1}) … a*(e_{i_k}) a(I e_{j_{k+1}}) … a(I e_{j_n})
//! ```
//!
//! and general tensors by linearity. Application is matrix-free: for each
//! input degree the chain of annihilations is computed once for every
//! possible functional at each position, and each partition then reduces
//! to one small matrix product.

use crate::error::{Error, Result};
use crate::fock::{FockContext, FockSpace, GradedOperator, GradedVector};
use crate::linalg::{self, pow, re, CMat, CVec, C64, ONE, ZERO};
use crate::space::DeformedSpace;

/// `Σ_l (i_l - l)` for 1-based increasing index lists partitioning `1..=n`.
pub fn crossing_number(first: &[usize], second: &[usize]) -> Result<usize> {
    CrossingPartition::new(first.to_vec(), second.to_vec()).map(|p| p.crossing_number())
}

/// All splittings of `1..=n` into an increasing `k`-subset and its
/// complement, subsets in lexicographic order.
pub fn shuffles(n: usize, k: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (1..=k).collect();
    loop {
        let rest = (1..=n).filter(|i| !idx.contains(i)).collect();
        out.push((idx.clone(), rest));
        // advance to the next k-subset
        let Some(p) = (0..k).rev().find(|&p| idx[p] < n - (k - 1 - p)) else {
            break;
        };
        idx[p] += 1;
        for r in p + 1..k {
            idx[r] = idx[r - 1] + 1;
        }
    }
    out
}

/// A splitting `I_1 ⊔ I_2 = {1, …, n}`: `I_1` indexes creations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrossingPartition {
    first: Vec<usize>,
    second: Vec<usize>,
}

impl CrossingPartition {
    pub fn new(first: Vec<usize>, second: Vec<usize>) -> Result<Self> {
        let n = first.len() + second.len();
        for set in [&first, &second] {
            if set.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::MalformedPartition(format!("{set:?} is not strictly increasing")));
            }
        }
        let mut all: Vec<usize> = first.iter().chain(&second).copied().collect();
        all.sort_unstable();
        if all != (1..=n).collect::<Vec<_>>() {
            return Err(Error::MalformedPartition(format!("{first:?} and {second:?} do not partition 1..={n}")));
        }
        Ok(Self { first, second })
    }

    /// Every partition of `1..=n`, ordered by `|I_1|` and then lexicographically.
    pub fn all(n: usize) -> Vec<Self> {
        (0..=n)
            .flat_map(|k| shuffles(n, k))
            .map(|(first, second)| Self { first, second })
            .collect()
    }

    pub fn first(&self) -> &[usize] {
        &self.first
    }

    pub fn second(&self) -> &[usize] {
        &self.second
    }

    pub fn len(&self) -> usize {
        self.first.len() + self.second.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn crossing_number(&self) -> usize {
        self.first.iter().enumerate().map(|(l, &i)| i - (l + 1)).sum()
    }

    /// 0-based leg order `I_1 ++ I_2`.
    fn leg_order(&self) -> Vec<usize> {
        self.first.iter().chain(&self.second).map(|i| i - 1).collect()
    }
}

/// Rows of the functionals `⟨I e_c, ·⟩_U`, one per basis vector `e_c`.
pub fn conjugate_pairing(space: &DeformedSpace) -> CMat {
    // I e_c = S e_c is real, so the row is (G S e_c)^T
    space.conjugation_matrix().transpose() * space.metric()
}

/// Accumulates `W(ξ) x` into `out`, ξ homogeneous of degree `n`, dropping
/// output degrees above `max_out`.
fn apply_homogeneous(
    fock: &FockSpace,
    pairing: &CMat,
    xi: &[C64],
    n: usize,
    x: &GradedVector,
    max_out: usize,
    out: &mut GradedVector,
) {
    let dim = fock.dim();
    let q = fock.q();
    let parts: Vec<(CrossingPartition, f64)> = CrossingPartition::all(n)
        .into_iter()
        .map(|p| {
            let w = q.powi(p.crossing_number() as i32);
            (p, w)
        })
        .filter(|(_, w)| *w != 0.0)
        .collect();
    let mut reordered: Vec<Option<Vec<C64>>> = vec![None; parts.len()];
    for m in 0..=x.max_degree() {
        let block = x.block(m);
        if block.iter().all(|z| *z == ZERO) {
            continue;
        }
        // cascade[j]: all chains of j annihilations applied to the block,
        // stacked with the chain index most significant
        let mut cascade: Vec<Vec<C64>> = vec![block.as_slice().to_vec()];
        for j in 1..=n.min(m) {
            let next = fock.annihilate_legs(pairing, pow(dim, j - 1), m - j + 1, &cascade[j - 1]);
            cascade.push(next);
        }
        for (idx, (part, w)) in parts.iter().enumerate() {
            let j = part.second().len();
            let k = part.first().len();
            if j > m || m - j + k > max_out {
                continue;
            }
            let z = reordered[idx].get_or_insert_with(|| linalg::permute_legs(xi, dim, &part.leg_order()));
            let (rows, inner, cols) = (pow(dim, k), pow(dim, j), pow(dim, m - j));
            let y = &cascade[j];
            let target = out.block_mut(m - j + k);
            for r in 0..rows {
                let zr = &z[r * inner..(r + 1) * inner];
                let dst = &mut target.as_mut_slice()[r * cols..(r + 1) * cols];
                for (i, &zc) in zr.iter().enumerate() {
                    if zc == ZERO {
                        continue;
                    }
                    let coef = zc * *w;
                    for (d, s) in dst.iter_mut().zip(&y[i * cols..(i + 1) * cols]) {
                        *d += coef * s;
                    }
                }
            }
        }
    }
}

/// `W(ξ) x` on the truncated space, output degrees above `max_out` dropped.
pub fn apply_wick(fock: &FockSpace, xi: &GradedVector, x: &GradedVector, max_out: usize) -> GradedVector {
    let pairing = conjugate_pairing(fock.space());
    let max_out = max_out.min(fock.max_degree());
    let mut out = fock.zeros();
    for n in 0..=xi.max_degree() {
        let b = xi.block(n);
        if b.iter().any(|z| *z != ZERO) {
            apply_homogeneous(fock, &pairing, b.as_slice(), n, x, max_out, &mut out);
        }
    }
    out
}

/// The antiunitary `e_1 ⊗ … ⊗ e_n ↦ I e_n ⊗ … ⊗ I e_1`, so that
/// `W(ξ)^* = W(Ĩξ)`.
pub fn reversed_conjugate(space: &DeformedSpace, xi: &GradedVector) -> GradedVector {
    let dim = space.dim();
    let blocks = xi
        .blocks()
        .iter()
        .enumerate()
        .map(|(n, b)| {
            let rev: Vec<usize> = (0..n).rev().collect();
            let flipped: Vec<C64> = linalg::permute_legs(b.as_slice(), dim, &rev).into_iter().map(|z| z.conj()).collect();
            CVec::from_vec(linalg::apply_tensor_power(space.conjugation_matrix(), &flipped, n))
        })
        .collect();
    GradedVector::from_blocks(dim, blocks).expect("block sizes preserved")
}

/// A Wick word with its dense realisation on a [`FockContext`].
#[derive(Debug, Clone)]
pub struct WickWord {
    tensor: GradedVector,
    realized: GradedOperator,
}

impl WickWord {
    pub fn tensor(&self) -> &GradedVector {
        &self.tensor
    }

    pub fn realized(&self) -> &GradedOperator {
        &self.realized
    }
}

/// Realises `W(ξ)` as a block matrix, column by column.
pub fn wick_word(ctx: &FockContext, xi: &GradedVector) -> Result<WickWord> {
    if xi.dim() != ctx.dim() {
        return Err(Error::DimensionMismatch { expected: ctx.dim(), found: xi.dim() });
    }
    if let Some(top) = xi.top_degree() {
        if top > ctx.max_degree() {
            return Err(Error::DegreeOverflow { degree: top, max: ctx.max_degree() });
        }
    }
    let xi = xi.truncated(ctx.max_degree());
    let xi = GradedVector::from_blocks(ctx.dim(), xi.blocks()[..=ctx.max_degree().min(xi.max_degree())].to_vec())?;
    let realized = realize(ctx.fock(), |x| apply_wick(ctx.fock(), &xi, x, ctx.max_degree()));
    Ok(WickWord { tensor: xi, realized })
}

/// Dense block matrix of a linear map on the truncated Fock space, built
/// by applying it to every basis vector.
pub fn realize(fock: &FockSpace, f: impl Fn(&GradedVector) -> GradedVector) -> GradedOperator {
    realize_window(fock, fock.max_degree(), f)
}

/// As [`realize`], for input degrees up to `max_in` only.
pub fn realize_window(fock: &FockSpace, max_in: usize, f: impl Fn(&GradedVector) -> GradedVector) -> GradedOperator {
    let dim = fock.dim();
    let n_max = fock.max_degree();
    let mut op = GradedOperator::zeros(dim, dim, n_max);
    for n in 0..=max_in.min(n_max) {
        let size = pow(dim, n);
        let mut cols: Vec<GradedVector> = Vec::with_capacity(size);
        for c in 0..size {
            let mut e = fock.zeros();
            e.block_mut(n)[c] = ONE;
            cols.push(f(&e));
        }
        for m in 0..=n_max {
            if cols.iter().all(|v| v.block(m).iter().all(|z| *z == ZERO)) {
                continue;
            }
            let block = CMat::from_columns(&cols.iter().map(|v| v.block(m).clone()).collect::<Vec<_>>());
            op.add_block(m, n, block);
        }
    }
    op
}

/// `‖W(ξ)Ω - ξ‖_q`.
pub fn vacuum_residual(ctx: &FockContext, xi: &GradedVector) -> Result<f64> {
    let w = wick_word(ctx, xi)?;
    let image = w.realized.apply(&ctx.fock().vacuum());
    Ok(ctx.norm(&(&image - &w.tensor)))
}

/// Finite sum of products of Wick words: `Σ_i c_i W(ξ_{i,1}) ⋯ W(ξ_{i,r})`.
#[derive(Debug, Clone, PartialEq)]
pub struct WickPolynomial {
    dim: usize,
    terms: Vec<(C64, Vec<GradedVector>)>,
}

impl WickPolynomial {
    pub fn zero(dim: usize) -> Self {
        Self { dim, terms: Vec::new() }
    }

    pub fn identity(dim: usize) -> Self {
        Self { dim, terms: vec![(ONE, Vec::new())] }
    }

    pub fn word(xi: GradedVector) -> Self {
        Self { dim: xi.dim(), terms: vec![(ONE, vec![xi])] }
    }

    pub fn product(factors: Vec<GradedVector>) -> Self {
        let dim = factors.first().map(|f| f.dim()).unwrap_or(0);
        Self { dim, terms: vec![(ONE, factors)] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[(C64, Vec<GradedVector>)] {
        &self.terms
    }

    pub fn push(&mut self, coef: C64, factors: Vec<GradedVector>) {
        self.terms.push((coef, factors));
    }

    /// Largest total tensor degree over all products.
    pub fn degree(&self) -> usize {
        self.terms
            .iter()
            .map(|(_, fs)| fs.iter().map(|f| f.top_degree().unwrap_or(0)).sum())
            .max()
            .unwrap_or(0)
    }

    pub fn scale(&self, a: C64) -> Self {
        Self { dim: self.dim, terms: self.terms.iter().map(|(c, f)| (c * a, f.clone())).collect() }
    }

    pub fn plus(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.terms.extend(other.terms.iter().cloned());
        out
    }

    /// `self * other`, expanded termwise.
    pub fn mul(&self, other: &Self) -> Self {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (a, fa) in &self.terms {
            for (b, fb) in &other.terms {
                terms.push((a * b, fa.iter().chain(fb).cloned().collect()));
            }
        }
        Self { dim: self.dim, terms }
    }

    /// `x^*` via `W(ξ)^* = W(Ĩξ)`.
    pub fn adjoint(&self, space: &DeformedSpace) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|(c, fs)| (c.conj(), fs.iter().rev().map(|f| reversed_conjugate(space, f)).collect()))
            .collect();
        Self { dim: self.dim, terms }
    }

    /// Replaces every tensor by `f(tensor)`; used to push polynomials
    /// through maps of the underlying spaces.
    pub fn map_tensors(&self, dim: usize, f: impl Fn(&GradedVector) -> GradedVector) -> Self {
        let terms = self.terms.iter().map(|(c, fs)| (*c, fs.iter().map(&f).collect())).collect();
        Self { dim, terms }
    }

    /// `x y`, factors applied right to left, each truncated at the top degree.
    pub fn apply(&self, fock: &FockSpace, y: &GradedVector) -> GradedVector {
        let mut out = fock.zeros();
        for (c, factors) in &self.terms {
            let mut v = y.clone();
            for f in factors.iter().rev() {
                v = apply_wick(fock, f, &v, fock.max_degree());
            }
            out.axpy(*c, &v);
        }
        out
    }

    pub fn realize(&self, ctx: &FockContext) -> GradedOperator {
        realize(ctx.fock(), |x| self.apply(ctx.fock(), x))
    }

    /// `⟨Ω, xΩ⟩`.
    pub fn vacuum_expectation(&self, fock: &FockSpace) -> C64 {
        self.apply(fock, &fock.vacuum()).block(0)[0]
    }
}

/// `Σ_n T^{⊗n} ξ_n`.
pub fn tensor_image(t: &CMat, xi: &GradedVector) -> GradedVector {
    let blocks = xi
        .blocks()
        .iter()
        .enumerate()
        .map(|(n, b)| CVec::from_vec(linalg::apply_tensor_power(t, b.as_slice(), n)))
        .collect();
    GradedVector::from_blocks(t.nrows(), blocks).expect("tensor power preserves block sizes")
}

/// Random homogeneous tensor of degree `n` with entries in the unit box.
pub fn random_tensor<R: rand::Rng + ?Sized>(rng: &mut R, dim: usize, max_degree: usize, n: usize) -> GradedVector {
    GradedVector::homogeneous(dim, max_degree, n, linalg::random_vector(rng, pow(dim, n))).expect("degree within range")
}

/// Random simple tensor `e_1 ⊗ … ⊗ e_n`.
pub fn random_simple_tensor<R: rand::Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    max_degree: usize,
    n: usize,
) -> GradedVector {
    let factors: Vec<CVec> = (0..n).map(|_| linalg::random_vector(rng, dim)).collect();
    GradedVector::simple_tensor(dim, max_degree, &factors).expect("degree within range")
}

/// Scalar multiple of the identity as a polynomial helper.
pub fn scalar(dim: usize, c: f64) -> WickPolynomial {
    WickPolynomial::identity(dim).scale(re(c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::build_space;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ctx(spec: &str, q: f64, n: usize) -> FockContext {
        FockContext::new(build_space(&spec.parse().unwrap()).unwrap(), q, n).unwrap()
    }

    #[test]
    fn crossing_examples() {
        assert_eq!(crossing_number(&[1, 2], &[3, 4]).unwrap(), 0);
        assert_eq!(crossing_number(&[2], &[1]).unwrap(), 1);
        assert_eq!(crossing_number(&[1, 3], &[2, 4]).unwrap(), 1);
        assert_eq!(crossing_number(&[], &[1, 2]).unwrap(), 0);
        assert!(crossing_number(&[2, 1], &[3]).is_err());
        assert!(crossing_number(&[1], &[1, 2]).is_err());
        assert!(crossing_number(&[1], &[3]).is_err());
    }

    #[test]
    fn crossing_counts_pairs_out_of_order() {
        // i(I_1, I_2) = #{(a, b) : a ∈ I_1, b ∈ I_2, b < a}
        for n in 0..=6 {
            for p in CrossingPartition::all(n) {
                let direct = p.first().iter().map(|a| p.second().iter().filter(|&&b| b < *a).count()).sum::<usize>();
                assert_eq!(direct, p.crossing_number());
            }
        }
    }

    #[test]
    fn partition_enumeration() {
        assert_eq!(CrossingPartition::all(4).len(), 16);
        assert_eq!(shuffles(4, 2).len(), 6);
        assert_eq!(shuffles(3, 1), vec![(vec![1], vec![2, 3]), (vec![2], vec![1, 3]), (vec![3], vec![1, 2])]);
        assert_eq!(shuffles(2, 0), vec![(vec![], vec![1, 2])]);
    }

    #[test]
    fn degree_zero_word_is_identity() {
        let c = ctx("2x1", 0.4, 3);
        let w = wick_word(&c, &c.fock().vacuum()).unwrap();
        assert!(w.realized().minus(&GradedOperator::identity(2, 3)).max_abs_entry() < 1e-15);
    }

    #[test]
    fn degree_one_real_word_is_field_operator() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for q in [-0.5, 0.0, 0.7] {
            let c = ctx("2x1+t1", q, 3);
            let h = c.space().random_real_vector(&mut rng);
            let xi = GradedVector::homogeneous(3, 3, 1, h.clone()).unwrap();
            let w = wick_word(&c, &xi).unwrap();
            assert!(w.realized().minus(&c.s_q(&h)).max_abs_entry() < 1e-12);
            assert!(c.self_adjoint_residual(w.realized()) < 1e-10);
        }
    }

    #[test]
    fn free_degree_two_by_hand() {
        // dim 1, q = 0: W(e⊗e) = a*a* + a*a + aa - the a a* pairing removed
        let c = ctx("t1", 0.0, 4);
        let e = CVec::from_element(1, ONE);
        let (cr, an) = (c.creation(&e), c.annihilation(&e));
        let expect = cr.compose(&cr).plus(&cr.compose(&an)).plus(&an.compose(&an));
        let xi = GradedVector::homogeneous(1, 4, 2, CVec::from_element(1, ONE)).unwrap();
        let w = wick_word(&c, &xi).unwrap();
        assert!(w.realized().minus(&expect).max_abs_entry() < 1e-14);
        let image = w.realized().apply(&c.fock().vacuum());
        assert_eq!(image.block(2)[0], ONE);
    }

    #[test]
    fn degree_two_real_word_matches_field_products() {
        // W(h_1 ⊗ h_2) = s(h_1)s(h_2) - ⟨h_1, h_2⟩_U
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let c = ctx("2x1+t1", 0.6, 4);
        let h1 = c.space().random_real_vector(&mut rng);
        let h2 = c.space().random_real_vector(&mut rng);
        let xi = GradedVector::simple_tensor(3, 4, &[h1.clone(), h2.clone()]).unwrap();
        let w = wick_word(&c, &xi).unwrap();
        let ip = crate::space::deformed_inner(c.space(), &h1, &h2).unwrap();
        let expect = c.s_q(&h1).compose(&c.s_q(&h2)).minus(&GradedOperator::identity(3, 4).scale(ip));
        // products are exact for input degrees <= N - 2
        assert!(w.realized().minus(&expect).window(4, 2).max_abs_entry() < 1e-12);
    }

    #[test]
    fn vacuum_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for q in [-0.9, 0.0, 0.5] {
            let c = ctx("2x1", q, 4);
            assert_eq!(vacuum_residual(&c, &c.fock().vacuum()).unwrap(), 0.0);
            for n in 1..=4 {
                let xi = random_tensor(&mut rng, 2, 4, n);
                assert!(vacuum_residual(&c, &xi).unwrap() < 1e-10);
            }
        }
    }

    #[test]
    fn adjoint_is_reversed_conjugate() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let c = ctx("2x1+t1", -0.4, 4);
        for n in 1..=3 {
            let xi = random_tensor(&mut rng, 3, 4, n);
            let w = wick_word(&c, &xi).unwrap();
            let wt = wick_word(&c, &reversed_conjugate(c.space(), &xi)).unwrap();
            assert!(c.adjoint(w.realized()).minus(wt.realized()).max_abs_entry() < 1e-9);
        }
    }

    #[test]
    fn degree_overflow_rejected() {
        let c = ctx("t1", 0.0, 2);
        let xi = GradedVector::homogeneous(1, 3, 3, CVec::from_element(1, ONE)).unwrap();
        assert!(matches!(wick_word(&c, &xi), Err(Error::DegreeOverflow { .. })));
    }

    #[test]
    fn polynomial_adjoint_and_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let c = ctx("2x1", 0.3, 4);
        let a = random_tensor(&mut rng, 2, 4, 1);
        let b = random_tensor(&mut rng, 2, 4, 2);
        let x = WickPolynomial::word(a.clone()).plus(&WickPolynomial::word(b.clone()).scale(C64::new(0.5, -1.0)));
        let xx = x.adjoint(c.space()).mul(&x);
        assert_eq!(xx.terms().len(), 4);
        assert_eq!(xx.degree(), 4);
        let dense = x.realize(&c);
        let adj = x.adjoint(c.space()).realize(&c);
        assert!(c.adjoint(&dense).minus(&adj).max_abs_entry() < 1e-9);
        // ⟨Ω, x*x Ω⟩ = ‖xΩ‖²
        let v = x.apply(c.fock(), &c.fock().vacuum());
        assert!((xx.vacuum_expectation(c.fock()) - re(c.norm(&v).powi(2))).norm() < 1e-10);
    }
}
