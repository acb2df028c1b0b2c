//! Finite-dimensional Araki-Woods data: a real space with an orthogonal
//! one-parameter group `U_t = A^{it}`, the deformed metric `2A/(1+A)` on the
//! complexification, and the conjugation fixing the real subspace.
//!
//! Every space is presented in an eigenbasis of `A`. A rotation block at
//! frequency `log λ` contributes the pair of eigenvectors `(1, ∓i)/√2` with
//! eigenvalues `λ` and `1/λ`; the conjugation swaps the two and conjugates
//! coordinates. Fixed directions have eigenvalue 1 and are their own
//! partner. In these coordinates the undeformed inner product is the
//! standard one and the deformed metric is diagonal.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, re, CMat, CVec, C64, ONE};

/// Eigenvalue data for a finite almost-periodic group.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSpectrum {
    /// `(λ, multiplicity)` with `λ >= 1`; each copy is one 2x2 rotation block.
    pub blocks: Vec<(f64, usize)>,
    /// Number of directions fixed by the group.
    pub trivial: usize,
}

impl BlockSpectrum {
    pub fn trivial(dim: usize) -> Self {
        Self { blocks: Vec::new(), trivial: dim }
    }

    pub fn block(lambda: f64) -> Self {
        Self { blocks: vec![(lambda, 1)], trivial: 0 }
    }

    pub fn with_trivial(mut self, trivial: usize) -> Self {
        self.trivial += trivial;
        self
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|(_, m)| 2 * m).sum::<usize>() + self.trivial
    }

    pub fn validate(&self) -> Result<()> {
        for &(l, m) in &self.blocks {
            if !(l.is_finite() && l >= 1.0) {
                return Err(Error::InvalidSpectrum(format!("block eigenvalue {l} must be >= 1")));
            }
            if m == 0 {
                return Err(Error::InvalidSpectrum("zero multiplicity".into()));
            }
        }
        if self.dim() == 0 {
            return Err(Error::InvalidSpectrum("empty spectrum".into()));
        }
        Ok(())
    }

    /// Short label like `2x1+t1`, used in reports.
    pub fn label(&self) -> String {
        let mut parts: Vec<String> = self.blocks.iter().map(|(l, m)| format!("{l}x{m}")).collect();
        if self.trivial > 0 || parts.is_empty() {
            parts.push(format!("t{}", self.trivial));
        }
        parts.join("+")
    }
}

impl std::str::FromStr for BlockSpectrum {
    type Err = Error;

    /// Parses the `label` syntax: `t2`, `2x1`, `2x1+t1`, `4+t1` (multiplicity 1).
    fn from_str(s: &str) -> Result<Self> {
        let mut spec = BlockSpectrum { blocks: Vec::new(), trivial: 0 };
        for part in s.split('+').map(str::trim).filter(|p| !p.is_empty()) {
            let bad = || Error::InvalidSpectrum(format!("cannot parse `{part}`"));
            if let Some(t) = part.strip_prefix('t') {
                spec.trivial += t.parse::<usize>().map_err(|_| bad())?;
            } else {
                let (l, m) = part.split_once('x').unwrap_or((part, "1"));
                let l = l.parse::<f64>().map_err(|_| bad())?;
                let m = m.parse::<usize>().map_err(|_| bad())?;
                spec.blocks.push((l, m));
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone)]
pub struct DeformedSpace {
    eigenvalues: Vec<f64>,
    partner: Vec<usize>,
    generator: CMat,
    metric: CMat,
    metric_sqrt: CMat,
    metric_inv_sqrt: CMat,
    conjugation: CMat,
}

/// Builds the eigenbasis presentation of the space generated by `spec`.
pub fn build_space(spec: &BlockSpectrum) -> Result<DeformedSpace> {
    spec.validate()?;
    let mut eigenvalues = Vec::with_capacity(spec.dim());
    let mut partner = Vec::with_capacity(spec.dim());
    for &(l, m) in &spec.blocks {
        for _ in 0..m {
            let i = eigenvalues.len();
            eigenvalues.push(l);
            eigenvalues.push(1.0 / l);
            partner.push(i + 1);
            partner.push(i);
        }
    }
    for _ in 0..spec.trivial {
        partner.push(eigenvalues.len());
        eigenvalues.push(1.0);
    }
    DeformedSpace::from_eigen_data(eigenvalues, partner)
}

impl DeformedSpace {
    /// `eigenvalues[i]` is the eigenvalue of `A` on basis vector `i`, and the
    /// conjugation maps basis vector `i` to basis vector `partner[i]`.
    pub fn from_eigen_data(eigenvalues: Vec<f64>, partner: Vec<usize>) -> Result<Self> {
        let dim = eigenvalues.len();
        if partner.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: partner.len() });
        }
        for (i, &p) in partner.iter().enumerate() {
            if p >= dim || partner[p] != i {
                return Err(Error::InvalidSpectrum("conjugation pairing is not an involution".into()));
            }
            let (a, b) = (eigenvalues[i], eigenvalues[p]);
            if !(a > 0.0 && a.is_finite()) || (a * b - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidSpectrum(format!(
                    "paired eigenvalues {a} and {b} are not reciprocal"
                )));
            }
        }
        let diag = |f: &dyn Fn(f64) -> f64| {
            CMat::from_diagonal(&CVec::from_iterator(dim, eigenvalues.iter().map(|&l| re(f(l)))))
        };
        let g = |l: f64| 2.0 * l / (1.0 + l);
        let generator = diag(&|l| l);
        let metric = diag(&g);
        let metric_sqrt = diag(&|l| g(l).sqrt());
        let metric_inv_sqrt = diag(&|l| 1.0 / g(l).sqrt());
        let mut conjugation = CMat::zeros(dim, dim);
        for (i, &p) in partner.iter().enumerate() {
            conjugation[(p, i)] = ONE;
        }
        Ok(Self { eigenvalues, partner, generator, metric, metric_sqrt, metric_inv_sqrt, conjugation })
    }

    /// `K ⊕ H` with the direct-sum group, metric and conjugation.
    pub fn direct_sum(&self, other: &DeformedSpace) -> DeformedSpace {
        let shift = self.dim();
        let eigenvalues = self.eigenvalues.iter().chain(&other.eigenvalues).copied().collect();
        let partner = self
            .partner
            .iter()
            .copied()
            .chain(other.partner.iter().map(|p| p + shift))
            .collect();
        Self::from_eigen_data(eigenvalues, partner).expect("direct sum of valid spaces")
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn partner(&self) -> &[usize] {
        &self.partner
    }

    /// The generator `A`.
    pub fn generator(&self) -> &CMat {
        &self.generator
    }

    /// Gram matrix `G = 2A(1+A)^{-1}` of the deformed inner product.
    pub fn metric(&self) -> &CMat {
        &self.metric
    }

    pub fn metric_sqrt(&self) -> &CMat {
        &self.metric_sqrt
    }

    pub fn metric_inv_sqrt(&self) -> &CMat {
        &self.metric_inv_sqrt
    }

    /// Real orthogonal part `S` of the conjugation `I x = S conj(x)`.
    pub fn conjugation_matrix(&self) -> &CMat {
        &self.conjugation
    }

    pub fn conjugate(&self, x: &CVec) -> CVec {
        &self.conjugation * x.map(|z| z.conj())
    }

    /// `U_t = A^{it}`.
    pub fn group_element(&self, t: f64) -> CMat {
        CMat::from_diagonal(&CVec::from_iterator(
            self.dim(),
            self.eigenvalues.iter().map(|&l| C64::from_polar(1.0, t * l.ln())),
        ))
    }

    /// Spectral function `f(A)`.
    pub fn functional_calculus(&self, f: impl Fn(f64) -> f64) -> CMat {
        CMat::from_diagonal(&CVec::from_iterator(self.dim(), self.eigenvalues.iter().map(|&l| re(f(l)))))
    }

    /// An orthonormal basis (undeformed metric) of the real subspace fixed by
    /// the conjugation, as columns.
    pub fn real_basis(&self) -> CMat {
        let dim = self.dim();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut cols: Vec<CVec> = Vec::with_capacity(dim);
        for (i, &p) in self.partner.iter().enumerate() {
            if p == i {
                let mut v = CVec::zeros(dim);
                v[i] = ONE;
                cols.push(v);
            } else if i < p {
                let mut a = CVec::zeros(dim);
                a[i] = re(s);
                a[p] = re(s);
                let mut b = CVec::zeros(dim);
                b[i] = C64::new(0.0, s);
                b[p] = C64::new(0.0, -s);
                cols.push(a);
                cols.push(b);
            }
        }
        CMat::from_columns(&cols)
    }

    /// Projects onto the real subspace: `(x + Ix) / 2`.
    pub fn realify(&self, x: &CVec) -> CVec {
        (x + self.conjugate(x)) * re(0.5)
    }

    pub fn random_vector<R: Rng + ?Sized>(&self, rng: &mut R) -> CVec {
        linalg::random_vector(rng, self.dim())
    }

    pub fn random_real_vector<R: Rng + ?Sized>(&self, rng: &mut R) -> CVec {
        self.realify(&self.random_vector(rng))
    }

    /// `‖G - 2A(1+A)^{-1}‖`, computed from `A` by a dense inverse.
    pub fn metric_residual(&self) -> f64 {
        let n = self.dim();
        let one_plus = linalg::identity(n) + &self.generator;
        let inv = one_plus.try_inverse().expect("1 + A is invertible");
        linalg::spectral_norm(&(&self.metric - &self.generator * re(2.0) * inv))
    }

    /// `‖I A I - A^{-1}‖` with the antilinear factors expanded.
    pub fn conjugation_residual(&self) -> f64 {
        let s = &self.conjugation;
        let iai = s * self.generator.map(|z| z.conj()) * s;
        let inv = self.generator.clone().try_inverse().expect("A is injective");
        linalg::spectral_norm(&(iai - inv))
    }

    /// Largest deviation between deformed and undeformed inner products of
    /// real vectors (real parts; the real Hilbert structure).
    pub fn real_subspace_residual(&self) -> f64 {
        let b = self.real_basis();
        let gram = b.adjoint() * &self.metric * &b;
        linalg::spectral_norm(&(gram.map(|z| re(z.re)) - linalg::identity(self.dim())))
    }
}

/// `⟨x, y⟩_U = ⟨2A/(1+A) x, y⟩`, antilinear in `x`.
pub fn deformed_inner(space: &DeformedSpace, x: &CVec, y: &CVec) -> Result<C64> {
    for v in [x, y] {
        if v.len() != space.dim() {
            return Err(Error::DimensionMismatch { expected: space.dim(), found: v.len() });
        }
    }
    Ok((x.adjoint() * space.metric() * y)[(0, 0)])
}

fn check_shape(src: &DeformedSpace, tgt: &DeformedSpace, m: &CMat) -> Result<()> {
    if m.nrows() != tgt.dim() {
        return Err(Error::DimensionMismatch { expected: tgt.dim(), found: m.nrows() });
    }
    if m.ncols() != src.dim() {
        return Err(Error::DimensionMismatch { expected: src.dim(), found: m.ncols() });
    }
    Ok(())
}

/// Operator norm of `m: src -> tgt` for the deformed metrics.
pub fn deformed_norm(src: &DeformedSpace, tgt: &DeformedSpace, m: &CMat) -> f64 {
    linalg::spectral_norm(&(tgt.metric_sqrt() * m * src.metric_inv_sqrt()))
}

/// Adjoint of `m: src -> tgt` for the deformed metrics, `G_s^{-1} m^* G_t`.
pub fn deformed_adjoint(src: &DeformedSpace, tgt: &DeformedSpace, m: &CMat) -> CMat {
    let g_inv = src.metric_inv_sqrt() * src.metric_inv_sqrt();
    g_inv * m.adjoint() * tgt.metric()
}

/// `‖J T I - T‖`. Zero exactly when `T` maps the real subspace of the
/// source into the real subspace of the target.
pub fn iti_residual(src: &DeformedSpace, tgt: &DeformedSpace, t: &CMat) -> Result<f64> {
    check_shape(src, tgt, t)?;
    let jti = tgt.conjugation_matrix() * t.map(|z| z.conj()) * src.conjugation_matrix();
    Ok(deformed_norm(src, tgt, &(jti - t)))
}

/// Residual of `T U_t = V_t T`: the generator-level defect `‖T A - A T‖`
/// maximised together with the defect at each sampled time.
pub fn intertwiner_residual(src: &DeformedSpace, tgt: &DeformedSpace, t: &CMat, t_samples: &[f64]) -> Result<f64> {
    check_shape(src, tgt, t)?;
    let mut worst = deformed_norm(src, tgt, &(t * src.generator() - tgt.generator() * t));
    for &s in t_samples {
        let d = t * src.group_element(s) - tgt.group_element(s) * t;
        worst = worst.max(deformed_norm(src, tgt, &d));
    }
    Ok(worst)
}

/// A linear map between deformed spaces with deformed norm at most one.
#[derive(Debug, Clone)]
pub struct DeformedContraction {
    source: DeformedSpace,
    target: DeformedSpace,
    matrix: CMat,
}

/// Slack allowed on `‖T‖ <= 1`.
pub const CONTRACTION_TOL: f64 = 1e-8;

impl DeformedContraction {
    pub fn new(source: DeformedSpace, target: DeformedSpace, matrix: CMat) -> Result<Self> {
        check_shape(&source, &target, &matrix)?;
        let norm = deformed_norm(&source, &target, &matrix);
        if norm > 1.0 + CONTRACTION_TOL {
            return Err(Error::NotContraction { norm });
        }
        Ok(Self { source, target, matrix })
    }

    pub fn identity(space: &DeformedSpace) -> Self {
        Self { source: space.clone(), target: space.clone(), matrix: linalg::identity(space.dim()) }
    }

    pub fn source(&self) -> &DeformedSpace {
        &self.source
    }

    pub fn target(&self) -> &DeformedSpace {
        &self.target
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn norm(&self) -> f64 {
        deformed_norm(&self.source, &self.target, &self.matrix)
    }

    pub fn adjoint_matrix(&self) -> CMat {
        deformed_adjoint(&self.source, &self.target, &self.matrix)
    }

    pub fn iti_residual(&self) -> f64 {
        iti_residual(&self.source, &self.target, &self.matrix).expect("shape checked at construction")
    }

    /// `S ∘ T`, where `self = S`.
    pub fn compose(&self, inner: &DeformedContraction) -> Result<Self> {
        if inner.target.dim() != self.source.dim() {
            return Err(Error::DimensionMismatch { expected: self.source.dim(), found: inner.target.dim() });
        }
        Self::new(inner.source.clone(), self.target.clone(), &self.matrix * &inner.matrix)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.source.clone(), self.target.clone(), &self.matrix * re(factor))
    }
}

/// Random map rescaled to deformed norm `norm`.
pub fn random_contraction<R: Rng + ?Sized>(
    src: &DeformedSpace,
    tgt: &DeformedSpace,
    norm: f64,
    rng: &mut R,
) -> DeformedContraction {
    let m = linalg::random_matrix(rng, tgt.dim(), src.dim());
    rescale(src, tgt, m, norm)
}

/// Random map with `JTI = T`: a random matrix averaged with its conjugate
/// `JTI`, then rescaled to deformed norm `norm`.
pub fn random_real_contraction<R: Rng + ?Sized>(
    src: &DeformedSpace,
    tgt: &DeformedSpace,
    norm: f64,
    rng: &mut R,
) -> DeformedContraction {
    loop {
        let m = linalg::random_matrix(rng, tgt.dim(), src.dim());
        let jmi = tgt.conjugation_matrix() * m.map(|z| z.conj()) * src.conjugation_matrix();
        let sym = (m + jmi) * re(0.5);
        if deformed_norm(src, tgt, &sym) > 1e-6 {
            return rescale(src, tgt, sym, norm);
        }
    }
}

fn rescale(src: &DeformedSpace, tgt: &DeformedSpace, m: CMat, norm: f64) -> DeformedContraction {
    let current = deformed_norm(src, tgt, &m);
    let m = if current > 0.0 { m * re(norm / current) } else { m };
    DeformedContraction { source: src.clone(), target: tgt.clone(), matrix: m }
}

/// The unitary dilation `U_T` of a contraction on `source ⊕ target`.
#[derive(Debug, Clone)]
pub struct Dilation {
    pub space: DeformedSpace,
    pub unitary: CMat,
    source_dim: usize,
    target_dim: usize,
}

impl Dilation {
    /// Inclusion `ι` of the source as the first summand.
    pub fn inclusion(&self) -> CMat {
        let mut m = CMat::zeros(self.source_dim + self.target_dim, self.source_dim);
        for i in 0..self.source_dim {
            m[(i, i)] = ONE;
        }
        m
    }

    /// Orthogonal projection `P` onto the second summand.
    pub fn projection(&self) -> CMat {
        let mut m = CMat::zeros(self.target_dim, self.source_dim + self.target_dim);
        for i in 0..self.target_dim {
            m[(i, self.source_dim + i)] = ONE;
        }
        m
    }

    /// `‖U^♯U - 1‖` and `‖UU^♯ - 1‖` for the direct-sum metric.
    pub fn unitarity_residual(&self) -> f64 {
        let adj = deformed_adjoint(&self.space, &self.space, &self.unitary);
        let id = linalg::identity(self.space.dim());
        let a = linalg::spectral_norm(&(&adj * &self.unitary - &id));
        let b = linalg::spectral_norm(&(&self.unitary * &adj - &id));
        a.max(b)
    }
}

/// Dilates `T` to `[[(1 - T^♯T)^{1/2}, T^♯], [T, -(1 - TT^♯)^{1/2}]]`, so that
/// `T = P U_T ι`. Square roots are taken in whitened coordinates.
pub fn dilate(t: &DeformedContraction) -> Result<Dilation> {
    let (src, tgt) = (t.source(), t.target());
    let norm = t.norm();
    if norm > 1.0 + CONTRACTION_TOL {
        return Err(Error::NotContraction { norm });
    }
    let (ds, dt) = (src.dim(), tgt.dim());
    let m = tgt.metric_sqrt() * t.matrix() * src.metric_inv_sqrt();
    let tol = 4.0 * CONTRACTION_TOL;
    let left = linalg::psd_sqrt(&(linalg::identity(ds) - m.adjoint() * &m), tol)?;
    let right = linalg::psd_sqrt(&(linalg::identity(dt) - &m * m.adjoint()), tol)?;
    let mut w = CMat::zeros(ds + dt, ds + dt);
    w.view_mut((0, 0), (ds, ds)).copy_from(&left);
    w.view_mut((0, ds), (ds, dt)).copy_from(&m.adjoint());
    w.view_mut((ds, 0), (dt, ds)).copy_from(&m);
    w.view_mut((ds, ds), (dt, dt)).copy_from(&(-right));
    let space = src.direct_sum(tgt);
    let unitary = space.metric_inv_sqrt() * w * space.metric_sqrt();
    Ok(Dilation { space, unitary, source_dim: ds, target_dim: dt })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ZERO;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sorted_diag(m: &CMat) -> Vec<f64> {
        let mut d: Vec<f64> = m.diagonal().iter().map(|z| z.re).collect();
        d.sort_by(|a, b| a.total_cmp(b));
        d
    }

    #[test]
    fn trivial_direction_is_undeformed() {
        let s = build_space(&BlockSpectrum::trivial(1)).unwrap();
        assert_eq!(s.generator()[(0, 0)], ONE);
        assert_eq!(s.metric()[(0, 0)], ONE);
        let x = CVec::from_vec(vec![C64::new(0.3, -2.0)]);
        assert_eq!(s.conjugate(&x)[0], C64::new(0.3, 2.0));
    }

    #[test]
    fn single_block_eigenvalues() {
        let s = build_space(&BlockSpectrum::block(2.0)).unwrap();
        assert_eq!(sorted_diag(s.generator()), vec![0.5, 2.0]);
        let g = sorted_diag(s.metric());
        assert!((g[0] - 2.0 / 3.0).abs() < 1e-15 && (g[1] - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn block_plus_trivial() {
        let s = build_space(&BlockSpectrum::block(4.0).with_trivial(1)).unwrap();
        assert_eq!(s.dim(), 3);
        let g = sorted_diag(s.metric());
        for (a, b) in g.iter().zip([0.4, 1.0, 1.6]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_spectra() {
        assert!(build_space(&BlockSpectrum::block(0.5)).is_err());
        assert!(build_space(&BlockSpectrum::block(0.0)).is_err());
        assert!(build_space(&BlockSpectrum::block(f64::NAN)).is_err());
        assert!(build_space(&BlockSpectrum::trivial(0)).is_err());
        assert!("2x0".parse::<BlockSpectrum>().is_err());
    }

    #[test]
    fn parses_labels() {
        let s: BlockSpectrum = "2x1+t1".parse().unwrap();
        assert_eq!(s, BlockSpectrum::block(2.0).with_trivial(1));
        assert_eq!(s.label(), "2x1+t1");
        assert_eq!("t2".parse::<BlockSpectrum>().unwrap(), BlockSpectrum::trivial(2));
        assert_eq!("3".parse::<BlockSpectrum>().unwrap(), BlockSpectrum::block(3.0));
    }

    #[test]
    fn structural_invariants() {
        for spec in ["t1", "t2", "2x1", "2x1+t1", "3.5x2+t1", "1x1"] {
            let s = build_space(&spec.parse().unwrap()).unwrap();
            assert!(s.metric_residual() <= 1e-12, "{spec}");
            assert!(s.conjugation_residual() <= 1e-12, "{spec}");
            assert!(s.real_subspace_residual() <= 1e-12, "{spec}");
            assert!(linalg::min_eigenvalue(s.metric()) > 0.0);
            let s2 = s.conjugation_matrix() * s.conjugation_matrix();
            assert!(linalg::spectral_norm(&(s2 - linalg::identity(s.dim()))) == 0.0);
        }
    }

    #[test]
    fn deformed_inner_examples() {
        let s = build_space(&BlockSpectrum::block(2.0)).unwrap();
        let e = CVec::from_vec(vec![ONE, ZERO]);
        assert!((deformed_inner(&s, &e, &e).unwrap() - re(4.0 / 3.0)).norm() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (x, y) = (s.random_vector(&mut rng), s.random_vector(&mut rng));
        let xy = deformed_inner(&s, &x, &y).unwrap();
        let yx = deformed_inner(&s, &y, &x).unwrap();
        assert!((xy - yx.conj()).norm() < 1e-14);
        let bad = CVec::zeros(3);
        assert!(matches!(deformed_inner(&s, &bad, &x), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn real_vectors_keep_their_norm() {
        let s = build_space(&"3x1+t1".parse().unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let x = s.random_real_vector(&mut rng);
            assert!((s.conjugate(&x) - &x).norm() < 1e-15);
            let plain = x.norm_squared();
            let deformed = deformed_inner(&s, &x, &x).unwrap();
            assert!((deformed.re - plain).abs() < 1e-13);
        }
    }

    #[test]
    fn iti_examples() {
        let t2 = build_space(&BlockSpectrum::trivial(2)).unwrap();
        let real = CMat::from_row_slice(2, 2, &[re(0.3), re(-1.0), re(2.0), re(0.1)]);
        assert_eq!(iti_residual(&t2, &t2, &real).unwrap(), 0.0);
        let t1 = build_space(&BlockSpectrum::trivial(1)).unwrap();
        let i_id = CMat::from_element(1, 1, C64::new(0.0, 1.0));
        assert!((iti_residual(&t1, &t1, &i_id).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn symmetric_spectral_functions_are_real() {
        let s = build_space(&"2x1+3x1+t1".parse().unwrap()).unwrap();
        // f(λ) = f(1/λ): commutes with the conjugation
        let f = s.functional_calculus(|l| 1.0 / (1.0 + (l.ln()).powi(2)));
        assert!(iti_residual(&s, &s, &f).unwrap() <= 1e-15);
        assert!(intertwiner_residual(&s, &s, &f, &[0.3, 1.7]).unwrap() <= 1e-15);
        // an asymmetric function still intertwines but is not real
        let g = s.functional_calculus(|l| l / (1.0 + l));
        assert!(intertwiner_residual(&s, &s, &g, &[0.3]).unwrap() <= 1e-15);
        assert!(iti_residual(&s, &s, &g).unwrap() > 0.1);
    }

    #[test]
    fn swapping_blocks_breaks_intertwining() {
        let s = build_space(&"2x1+5x1".parse().unwrap()).unwrap();
        let mut swap = CMat::zeros(4, 4);
        for (i, j) in [(0, 2), (2, 0), (1, 3), (3, 1)] {
            swap[(i, j)] = ONE;
        }
        assert!(intertwiner_residual(&s, &s, &swap, &[]).unwrap() > 1.0);
    }

    #[test]
    fn dilation_of_zero_and_identity() {
        let s = build_space(&"2x1".parse().unwrap()).unwrap();
        let zero = DeformedContraction::new(s.clone(), s.clone(), CMat::zeros(2, 2)).unwrap();
        let u = dilate(&zero).unwrap().unitary;
        let mut expect = linalg::identity(4);
        for i in 2..4 {
            expect[(i, i)] = re(-1.0);
        }
        assert!(linalg::spectral_norm(&(u - expect)) < 1e-14);

        let id = dilate(&DeformedContraction::identity(&s)).unwrap().unitary;
        let mut swap = CMat::zeros(4, 4);
        for i in 0..2 {
            swap[(i, i + 2)] = ONE;
            swap[(i + 2, i)] = ONE;
        }
        assert!(linalg::spectral_norm(&(id - swap)) < 1e-7);
    }

    #[test]
    fn random_dilations_are_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for spec in ["t2", "2x1", "2x1+t1"] {
            let s = build_space(&spec.parse().unwrap()).unwrap();
            let k = build_space(&"3x1".parse().unwrap()).unwrap();
            for _ in 0..100 {
                let t = random_contraction(&k, &s, 0.5, &mut rng);
                let d = dilate(&t).unwrap();
                assert!(d.unitarity_residual() <= 1e-10);
                let back = d.projection() * &d.unitary * d.inclusion();
                assert!(linalg::spectral_norm(&(back - t.matrix())) <= 1e-10);
            }
        }
    }

    #[test]
    fn rejects_expansions() {
        let s = build_space(&BlockSpectrum::trivial(1)).unwrap();
        let err = DeformedContraction::new(s.clone(), s, CMat::from_element(1, 1, re(1.5)));
        assert!(matches!(err, Err(Error::NotContraction { .. })));
    }

    #[test]
    fn real_contractions_commute_with_conjugation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = build_space(&"2x1+t1".parse().unwrap()).unwrap();
        for _ in 0..20 {
            let t = random_real_contraction(&s, &s, 0.9, &mut rng);
            assert!(t.iti_residual() <= 1e-14);
            assert!((t.norm() - 0.9).abs() < 1e-12);
        }
    }
}
