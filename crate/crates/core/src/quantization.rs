//! Second quantisation of contractions with `JTI = T`.
//!
//! The channel is assembled from three factors: the Wick-level inclusion
//! `j: W_K(ξ) ↦ W_{K⊕H}(ι^{⊗n} ξ)`, and conjugation by the first
//! quantisation of `V = P U_T`, where `U_T` is the unitary dilation of `T`.
//! So `Φ(x) = F_q(V) j(x) F_q(V)^♯`. Everything is applied matrix-free on
//! the Fock space over `K ⊕ H`.
//!
//! The direct route `W(ξ) ↦ W(T^{⊗n} ξ)` is implemented separately so the
//! two can be compared.

use nalgebra::Cholesky;
use rand::Rng;

use crate::error::{Error, Result};
use crate::fock::{first_quantization, FockContext, FockSpace, GradedOperator, GradedVector};
use crate::linalg::{self, pow, re, CMat, C64, ONE};
use crate::space::{deformed_adjoint, dilate, DeformedContraction, Dilation};
use crate::wick::{apply_wick, realize_window, tensor_image, WickPolynomial};

/// Largest `‖JTI - T‖` accepted by [`second_quantization`].
pub const REALITY_TOL: f64 = 1e-10;

/// Conjugation `x ↦ F_q(V) x F_q(V)^♯` between dense Fock contexts.
#[derive(Debug, Clone)]
pub struct ConjugationChannel {
    forward: GradedOperator,
    backward: GradedOperator,
}

/// Builds the conjugation channel of `v: src → tgt`.
pub fn conjugation_channel(src: &FockContext, tgt: &FockContext, v: &CMat) -> Result<ConjugationChannel> {
    let forward = first_quantization(src, tgt, v)?;
    let v_adj = deformed_adjoint(src.space(), tgt.space(), v);
    let backward = first_quantization(tgt, src, &v_adj)?;
    Ok(ConjugationChannel { forward, backward })
}

impl ConjugationChannel {
    pub fn apply(&self, x: &GradedOperator) -> GradedOperator {
        self.forward.compose(x).compose(&self.backward)
    }

    pub fn forward(&self) -> &GradedOperator {
        &self.forward
    }
}

/// `Γ_q(T)` for a contraction `T: K → H` with `JTI = T`.
#[derive(Debug, Clone)]
pub struct QuantizationChannel {
    contraction: DeformedContraction,
    dilation: Dilation,
    source: FockSpace,
    dilated: FockSpace,
    target: FockSpace,
    /// `V = P U_T: K ⊕ H → H`.
    compress: CMat,
    /// `V^♯: H → K ⊕ H`.
    expand: CMat,
}

/// Builds `Γ_q(T)` on Fock spaces truncated at `max_degree`.
pub fn second_quantization(t: &DeformedContraction, q: f64, max_degree: usize) -> Result<QuantizationChannel> {
    let residual = t.iti_residual();
    if residual > REALITY_TOL {
        return Err(Error::NotRealStructure { residual });
    }
    let dilation = dilate(t)?;
    let compress = dilation.projection() * &dilation.unitary;
    let expand = deformed_adjoint(&dilation.space, t.target(), &compress);
    Ok(QuantizationChannel {
        contraction: t.clone(),
        source: FockSpace::new(t.source().clone(), q, max_degree)?,
        dilated: FockSpace::new(dilation.space.clone(), q, max_degree)?,
        target: FockSpace::new(t.target().clone(), q, max_degree)?,
        dilation,
        compress,
        expand,
    })
}

impl QuantizationChannel {
    pub fn contraction(&self) -> &DeformedContraction {
        &self.contraction
    }

    pub fn dilation(&self) -> &Dilation {
        &self.dilation
    }

    pub fn source_fock(&self) -> &FockSpace {
        &self.source
    }

    pub fn target_fock(&self) -> &FockSpace {
        &self.target
    }

    pub fn dilated_fock(&self) -> &FockSpace {
        &self.dilated
    }

    pub fn max_degree(&self) -> usize {
        self.target.max_degree()
    }

    /// `‖V V^♯ - 1‖`; zero up to rounding since `U_T` is unitary.
    pub fn coisometry_residual(&self) -> f64 {
        let n = self.target.dim();
        linalg::spectral_norm(&(&self.compress * &self.expand - linalg::identity(n)))
    }

    /// `j(x)`: the same polynomial with every tensor pushed through `ι^{⊗n}`.
    pub fn embed(&self, x: &WickPolynomial) -> WickPolynomial {
        let iota = self.dilation.inclusion();
        x.map_tensors(self.dilated.dim(), |f| tensor_image(&iota, f))
    }

    /// `F_q(V)^♯ y`.
    pub fn lift(&self, y: &GradedVector) -> GradedVector {
        tensor_image(&self.expand, y)
    }

    /// `F_q(V) z`.
    pub fn lower(&self, z: &GradedVector) -> GradedVector {
        tensor_image(&self.compress, z)
    }

    /// `Φ(x) y` through the three-factor decomposition.
    pub fn apply(&self, x: &WickPolynomial, y: &GradedVector) -> GradedVector {
        let embedded = self.embed(x);
        self.lower(&embedded.apply(&self.dilated, &self.lift(y)))
    }

    /// `W(T^{⊗n} ξ) y`: the covariant image computed directly on `F_q(H)`.
    pub fn apply_direct(&self, xi: &GradedVector, y: &GradedVector) -> GradedVector {
        let image = tensor_image(self.contraction.matrix(), xi);
        apply_wick(&self.target, &image, y, self.max_degree())
    }

    /// Dense block matrix of `Φ(x)` on input degrees `<= max_in`.
    pub fn realize(&self, x: &WickPolynomial, max_in: usize) -> GradedOperator {
        let embedded = self.embed(x);
        realize_window(&self.target, max_in, |y| self.lower(&embedded.apply(&self.dilated, &self.lift(y))))
    }

    /// Input degrees on which products of total degree `degree` are free of
    /// truncation effects.
    pub fn safe_window(&self, degree: usize) -> Option<usize> {
        self.max_degree().checked_sub(degree)
    }

    /// `max_y ‖Φ(W(ξ))y - W(T^{⊗n}ξ)y‖_q / ‖y‖_q` over the probes.
    pub fn wick_covariance_residual(&self, xi: &GradedVector, probes: &[GradedVector]) -> f64 {
        let x = WickPolynomial::word(xi.clone());
        let embedded = self.embed(&x);
        let image = tensor_image(self.contraction.matrix(), xi);
        probes
            .iter()
            .map(|y| {
                let lhs = self.lower(&embedded.apply(&self.dilated, &self.lift(y)));
                let rhs = apply_wick(&self.target, &image, y, self.max_degree());
                self.target.q_norm(&(&lhs - &rhs)) / self.target.q_norm(y).max(f64::MIN_POSITIVE)
            })
            .fold(0.0, f64::max)
    }

    /// `‖Φ(W(ξ))Ω - F_q(T)ξ‖_q`.
    pub fn gns_residual(&self, xi: &GradedVector) -> f64 {
        let lhs = self.apply(&WickPolynomial::word(xi.clone()), &self.target.vacuum());
        let rhs = tensor_image(self.contraction.matrix(), xi);
        self.target.q_norm(&(&lhs - &rhs))
    }

    /// `max_y ‖Φ(1)y - y‖_q / ‖y‖_q`.
    pub fn unitality_residual(&self, probes: &[GradedVector]) -> f64 {
        let id = WickPolynomial::identity(self.source.dim());
        probes
            .iter()
            .map(|y| self.target.q_norm(&(&self.apply(&id, y) - y)) / self.target.q_norm(y).max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }

    /// `|⟨Ω, Φ(x)Ω⟩ - ⟨Ω, xΩ⟩|`.
    pub fn vacuum_state_residual(&self, x: &WickPolynomial) -> f64 {
        let image = self.apply(x, &self.target.vacuum()).block(0)[0];
        (image - x.vacuum_expectation(&self.source)).norm()
    }

    /// Smallest eigenvalue of `Φ(x^*x) - Φ(x)^*Φ(x)` compressed to the safe
    /// window of `x`.
    pub fn kadison_schwarz_margin(&self, x: &WickPolynomial) -> Result<f64> {
        self.matrix_schwarz_margin(&[vec![x.clone()]])
    }

    /// Matrix-level Schwarz margin for a square array `X = [x_ij]` of
    /// polynomials: smallest eigenvalue of `Φ_n(X^*X) - Φ_n(X)^*Φ_n(X)`
    /// on the safe window. A 2x2 array probes 2-positivity.
    pub fn matrix_schwarz_margin(&self, x: &[Vec<WickPolynomial>]) -> Result<f64> {
        let size = x.len();
        if size == 0 || x.iter().any(|row| row.len() != size) {
            return Err(Error::DimensionMismatch { expected: size, found: x.first().map_or(0, |r| r.len()) });
        }
        let degree = x.iter().flatten().map(|p| p.degree()).max().unwrap_or(0);
        let s = self
            .safe_window(degree)
            .ok_or(Error::DegreeOverflow { degree, max: self.max_degree() })?;
        let src_space = self.source.space();
        let emb: Vec<Vec<WickPolynomial>> = x.iter().map(|row| row.iter().map(|p| self.embed(p)).collect()).collect();
        let emb_adj: Vec<Vec<WickPolynomial>> =
            x.iter().map(|row| row.iter().map(|p| self.embed(&p.adjoint(src_space))).collect()).collect();

        let basis = basis_vectors(&self.target, s);
        let m = basis.len();
        let total = size * m;
        // Hermitian forms ⟨e', Φ(X*X) e⟩ and ⟨Φ(X)e', Φ(X)e⟩ on the window
        let mut upper = CMat::zeros(total, total);
        // images[(b, e)][k] = Φ(x_kb) e; products[(b, e)][a] = Φ((X*X)_ab) e
        let mut images: Vec<Vec<GradedVector>> = Vec::with_capacity(total);
        let mut products: Vec<Vec<GradedVector>> = Vec::with_capacity(total);
        for b in 0..size {
            for e in &basis {
                let lifted = self.lift(e);
                let z: Vec<GradedVector> = (0..size).map(|k| emb[k][b].apply(&self.dilated, &lifted)).collect();
                images.push(z.iter().map(|zk| self.lower(zk)).collect());
                let prods = (0..size)
                    .map(|a| {
                        let mut acc = self.dilated.zeros();
                        for (k, zk) in z.iter().enumerate() {
                            acc = &acc + &emb_adj[k][a].apply(&self.dilated, zk);
                        }
                        self.lower(&acc)
                    })
                    .collect();
                products.push(prods);
            }
        }
        let gram_basis: Vec<GradedVector> = basis.iter().map(|e| self.target.gram_apply(e)).collect();
        let gram_images: Vec<Vec<GradedVector>> =
            images.iter().map(|col| col.iter().map(|v| self.target.gram_apply(v)).collect()).collect();
        let mut gram = CMat::zeros(total, total);
        for a in 0..size {
            for (i, ge) in gram_basis.iter().enumerate() {
                let row = a * m + i;
                for j in 0..total {
                    let col_prod = &products[j][a];
                    upper[(row, j)] = inner_blocks(ge, col_prod);
                    let lower_form: C64 = (0..size).map(|k| inner_blocks(&gram_images[row][k], &images[j][k])).sum();
                    upper[(row, j)] -= lower_form;
                }
                for (jj, e) in basis.iter().enumerate() {
                    gram[(row, a * m + jj)] = inner_blocks(ge, e);
                }
            }
        }
        generalized_min_eigenvalue(&upper, &gram)
    }
}

/// `x^* y` summed over blocks, where `x` already carries the Gram factor.
fn inner_blocks(gx: &GradedVector, y: &GradedVector) -> C64 {
    gx.blocks().iter().zip(y.blocks()).map(|(a, b)| a.dotc(b)).sum()
}

/// Smallest `λ` with `F v = λ G v`, for Hermitian `F` and positive `G`.
fn generalized_min_eigenvalue(f: &CMat, g: &CMat) -> Result<f64> {
    let l = Cholesky::new(linalg::hermitian_part(g))
        .ok_or_else(|| Error::Numerical("window Gram matrix is not positive definite".into()))?
        .l();
    let l_inv = l
        .try_inverse()
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    Ok(linalg::min_eigenvalue(&(&l_inv * linalg::hermitian_part(f) * l_inv.adjoint())))
}

/// Coordinate basis vectors of all degrees `<= max_in`.
pub fn basis_vectors(fock: &FockSpace, max_in: usize) -> Vec<GradedVector> {
    let mut out = Vec::new();
    for n in 0..=max_in.min(fock.max_degree()) {
        for c in 0..pow(fock.dim(), n) {
            let mut e = fock.zeros();
            e.block_mut(n)[c] = ONE;
            out.push(e);
        }
    }
    out
}

/// Random vectors supported on degrees `<= max_in`, normalised for the
/// q-inner product.
pub fn random_probes<R: Rng + ?Sized>(rng: &mut R, fock: &FockSpace, max_in: usize, count: usize) -> Vec<GradedVector> {
    (0..count)
        .map(|_| {
            let mut v = fock.zeros();
            for n in 0..=max_in.min(fock.max_degree()) {
                *v.block_mut(n) = linalg::random_vector(rng, pow(fock.dim(), n));
            }
            let norm = fock.q_norm(&v);
            &v * re(1.0 / norm)
        })
        .collect()
}

/// `Φ_S(Φ_T(W(ξ)))` against `Φ_{ST}(W(ξ))` on the probes. The inner image
/// is read back as a Wick word through its vacuum vector.
pub fn functoriality_residual(
    phi_t: &QuantizationChannel,
    phi_s: &QuantizationChannel,
    phi_st: &QuantizationChannel,
    xi: &GradedVector,
    probes: &[GradedVector],
) -> f64 {
    let eta = phi_t.apply(&WickPolynomial::word(xi.clone()), &phi_t.target_fock().vacuum());
    let outer = WickPolynomial::word(eta);
    let direct = WickPolynomial::word(xi.clone());
    let fock = phi_st.target_fock();
    probes
        .iter()
        .map(|y| {
            let a = phi_s.apply(&outer, y);
            let b = phi_st.apply(&direct, y);
            fock.q_norm(&(&a - &b)) / fock.q_norm(y).max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max)
}

/// Random polynomial `c_0 + Σ c_i W(ξ_i)` with `count` words of degree in
/// `1..=max_word_degree`.
pub fn random_polynomial<R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    max_degree: usize,
    count: usize,
    max_word_degree: usize,
) -> WickPolynomial {
    let mut p = WickPolynomial::identity(dim).scale(linalg::random_complex(rng));
    for _ in 0..count {
        let n = rng.gen_range(1..=max_word_degree);
        let xi = crate::wick::random_tensor(rng, dim, max_degree, n);
        p.push(linalg::random_complex(rng), vec![xi]);
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::FockContext;
    use crate::space::{build_space, random_contraction, random_real_contraction, DeformedSpace};
    use crate::wick::{random_simple_tensor, random_tensor, wick_word};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn space(spec: &str) -> DeformedSpace {
        build_space(&spec.parse().unwrap()).unwrap()
    }

    #[test]
    fn rejects_non_real_contractions() {
        let s = space("t1");
        let t = DeformedContraction::new(s.clone(), s, CMat::from_element(1, 1, C64::new(0.0, 0.5))).unwrap();
        assert!(matches!(second_quantization(&t, 0.3, 3), Err(Error::NotRealStructure { .. })));
    }

    #[test]
    fn identity_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = space("2x1");
        let ch = second_quantization(&DeformedContraction::identity(&s), 0.5, 4).unwrap();
        let probes = random_probes(&mut rng, ch.target_fock(), 2, 4);
        for n in 0..=2 {
            let xi = random_tensor(&mut rng, 2, 4, n);
            let word = WickPolynomial::word(xi.clone());
            for y in &probes {
                let direct = apply_wick(ch.target_fock(), &xi, y, 4);
                let got = ch.apply(&word, y);
                assert!(ch.target_fock().q_norm(&(&got - &direct)) < 1e-10);
            }
        }
    }

    #[test]
    fn zero_contraction_kills_words() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = space("2x1+t1");
        let zero = DeformedContraction::new(s.clone(), s.clone(), CMat::zeros(3, 3)).unwrap();
        let ch = second_quantization(&zero, -0.4, 4).unwrap();
        let probes = random_probes(&mut rng, ch.target_fock(), 3, 3);
        for n in 1..=3 {
            let xi = random_tensor(&mut rng, 3, 4, n);
            let word = WickPolynomial::word(xi);
            for y in &probes {
                assert!(ch.target_fock().q_norm(&ch.apply(&word, y)) < 1e-10);
            }
        }
        assert!(ch.unitality_residual(&probes) < 1e-10);
    }

    #[test]
    fn scalar_contraction_scales_by_degree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = space("2x1");
        let t: f64 = 0.3;
        let m = DeformedContraction::identity(&s).scaled((-t).exp()).unwrap();
        let ch = second_quantization(&m, 0.7, 4).unwrap();
        let probes = random_probes(&mut rng, ch.target_fock(), 2, 3);
        for n in 1..=2 {
            let xi = random_simple_tensor(&mut rng, 2, 4, n);
            let scale = (-(n as f64) * t).exp();
            for y in &probes {
                let want = &apply_wick(ch.target_fock(), &xi, y, 4) * re(scale);
                let got = ch.apply(&WickPolynomial::word(xi.clone()), y);
                assert!(ch.target_fock().q_norm(&(&got - &want)) < 1e-10);
            }
            assert!(ch.gns_residual(&xi) < 1e-10);
        }
    }

    #[test]
    fn covariance_for_real_contractions_between_spaces() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let k = space("3x1");
        let h = space("2x1+t1");
        for q in [-0.5, 0.0, 0.9] {
            let t = random_real_contraction(&k, &h, 0.8, &mut rng);
            let ch = second_quantization(&t, q, 4).unwrap();
            assert!(ch.coisometry_residual() < 1e-12);
            for n in 1..=3 {
                let xi = random_simple_tensor(&mut rng, 2, 4, n);
                let probes = random_probes(&mut rng, ch.target_fock(), 4 - n, 3);
                assert!(ch.wick_covariance_residual(&xi, &probes) < 1e-8, "q = {q}, n = {n}");
                assert!(ch.gns_residual(&xi) < 1e-8);
            }
        }
    }

    #[test]
    fn covariance_fails_without_real_structure() {
        // guard: dropping the conjugation check must break covariance
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = space("2x1");
        let t = random_contraction(&h, &h, 0.8, &mut rng);
        assert!(t.iti_residual() > 1e-3);
        let mut ch = second_quantization(&DeformedContraction::identity(&h), 0.3, 3).unwrap();
        let d = dilate(&t).unwrap();
        ch.compress = d.projection() * &d.unitary;
        ch.expand = deformed_adjoint(&d.space, &h, &ch.compress);
        ch.contraction = t;
        ch.dilation = d;
        let xi = random_simple_tensor(&mut rng, 2, 3, 1);
        let probes = random_probes(&mut rng, ch.target_fock(), 2, 3);
        assert!(ch.wick_covariance_residual(&xi, &probes) > 1e-3);
    }

    #[test]
    fn vacuum_state_and_unitality() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h = space("2x1");
        let t = random_real_contraction(&h, &h, 0.9, &mut rng);
        let ch = second_quantization(&t, 0.4, 4).unwrap();
        let x = random_polynomial(&mut rng, 2, 4, 3, 2);
        let xx = x.adjoint(h_ref(&ch)).mul(&x);
        assert!(ch.vacuum_state_residual(&x) < 1e-10);
        assert!(ch.vacuum_state_residual(&xx) < 1e-10);
        let probes = random_probes(&mut rng, ch.target_fock(), 4, 3);
        assert!(ch.unitality_residual(&probes) < 1e-10);
    }

    fn h_ref(ch: &QuantizationChannel) -> &DeformedSpace {
        ch.source_fock().space()
    }

    #[test]
    fn schwarz_margins_are_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = space("2x1");
        for q in [-0.9, 0.5] {
            let t = random_real_contraction(&h, &h, 0.7, &mut rng);
            let ch = second_quantization(&t, q, 4).unwrap();
            assert!(ch.kadison_schwarz_margin(&WickPolynomial::identity(2)).unwrap().abs() < 1e-10);
            for _ in 0..3 {
                let x = random_polynomial(&mut rng, 2, 4, 2, 1);
                assert!(ch.kadison_schwarz_margin(&x).unwrap() >= -1e-8);
            }
            let xs: Vec<Vec<WickPolynomial>> =
                (0..2).map(|_| (0..2).map(|_| random_polynomial(&mut rng, 2, 4, 1, 1)).collect()).collect();
            assert!(ch.matrix_schwarz_margin(&xs).unwrap() >= -1e-8);
        }
    }

    #[test]
    fn schwarz_detects_non_positive_maps() {
        // transpose-like defect: a Schwarz form of a non-contraction is negative
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h = space("t1");
        let t = DeformedContraction::identity(&h);
        let mut ch = second_quantization(&t, 0.0, 3).unwrap();
        ch.compress *= re(1.5);
        let x = random_polynomial(&mut rng, 1, 3, 1, 1);
        assert!(ch.kadison_schwarz_margin(&x).unwrap() < -1e-3);
    }

    #[test]
    fn functoriality() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = space("2x1");
        let t = random_real_contraction(&h, &h, 0.9, &mut rng);
        let s = random_real_contraction(&h, &h, 0.8, &mut rng);
        let st = s.compose(&t).unwrap();
        let (pt, ps, pst) = (
            second_quantization(&t, 0.6, 4).unwrap(),
            second_quantization(&s, 0.6, 4).unwrap(),
            second_quantization(&st, 0.6, 4).unwrap(),
        );
        for n in 1..=3 {
            let xi = random_simple_tensor(&mut rng, 2, 4, n);
            let probes = random_probes(&mut rng, pst.target_fock(), 4 - n, 3);
            assert!(functoriality_residual(&pt, &ps, &pst, &xi, &probes) < 1e-8);
        }
    }

    #[test]
    fn projection_conjugation_maps_monomials() {
        // F(P) a*(v_1) a(v_2) F(P)^♯ = a*(P v_1) a(P v_2)
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let kh = space("2x1+t1");
        let h = space("t1");
        let (big, small) = (FockContext::new(kh.clone(), 0.5, 3).unwrap(), FockContext::new(h, 0.5, 3).unwrap());
        let mut p = CMat::zeros(1, 3);
        p[(0, 2)] = ONE;
        let ch = conjugation_channel(&big, &small, &p).unwrap();
        let (v1, v2) = (kh.random_vector(&mut rng), kh.random_vector(&mut rng));
        let x = big.creation(&v1).compose(&big.annihilation(&v2));
        let want = small.creation(&(&p * &v1)).compose(&small.annihilation(&(&p * &v2)));
        assert!(ch.apply(&x).minus(&want).max_abs_entry() < 1e-10);
    }

    #[test]
    fn unitary_conjugation_is_multiplicative() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = space("2x1");
        let ctx = FockContext::new(h.clone(), -0.3, 3).unwrap();
        // diagonal unitaries commute with the metric
        let u = h.group_element(0.7);
        let ch = conjugation_channel(&ctx, &ctx, &u).unwrap();
        let id = conjugation_channel(&ctx, &ctx, &linalg::identity(2)).unwrap();
        let a = wick_word(&ctx, &random_tensor(&mut rng, 2, 3, 1)).unwrap();
        let b = wick_word(&ctx, &random_tensor(&mut rng, 2, 3, 2)).unwrap();
        let lhs = ch.apply(&a.realized().compose(b.realized()));
        let rhs = ch.apply(a.realized()).compose(&ch.apply(b.realized()));
        assert!(lhs.minus(&rhs).max_abs_entry() < 1e-10);
        assert!(id.apply(a.realized()).minus(a.realized()).max_abs_entry() < 1e-12);
    }

    #[test]
    fn embedding_restricts_to_source_word() {
        // F(ι)^♯ W(ιξ) F(ι) = W(ξ) on the source Fock space
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let h = space("2x1");
        let t = random_real_contraction(&h, &h, 0.5, &mut rng);
        let ch = second_quantization(&t, 0.3, 3).unwrap();
        let iota = ch.dilation().inclusion();
        let restrict = iota.transpose();
        for n in 0..=2 {
            let xi = random_tensor(&mut rng, 2, 3, n);
            let word = WickPolynomial::word(xi.clone());
            let emb = ch.embed(&word);
            for y in random_probes(&mut rng, ch.source_fock(), 3 - n, 2) {
                let big = emb.apply(ch.dilated_fock(), &tensor_image(&iota, &y));
                let back = tensor_image(&restrict, &big);
                let direct = apply_wick(ch.source_fock(), &xi, &y, 3);
                assert!(ch.source_fock().q_norm(&(&back - &direct)) < 1e-12);
            }
        }
        // multiplicativity of the embedding on the safe window
        let (a, b) = (random_tensor(&mut rng, 2, 3, 1), random_tensor(&mut rng, 2, 3, 2));
        let prod = WickPolynomial::product(vec![a.clone(), b.clone()]);
        for y in random_probes(&mut rng, ch.dilated_fock(), 0, 1) {
            let lhs = ch.embed(&prod).apply(ch.dilated_fock(), &y);
            let inner = ch.embed(&WickPolynomial::word(b.clone())).apply(ch.dilated_fock(), &y);
            let rhs = ch.embed(&WickPolynomial::word(a.clone())).apply(ch.dilated_fock(), &inner);
            assert!(ch.dilated_fock().q_norm(&(&lhs - &rhs)) < 1e-12);
        }
    }
}
