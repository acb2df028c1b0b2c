//! Approximants `Γ_q(e^{-t} T_k)` of the identity: admissible finite-rank
//! maps `T_k`, tail norms of their first quantisations, strong convergence
//! along the diagonal grid, and vacuum preservation.

use crate::error::{Error, Result};
use crate::fock::{gram_norm, FockContext, GradedVector};
use crate::linalg::{self, re, CMat};
use crate::quantization::{second_quantization, QuantizationChannel};
use crate::space::{DeformedContraction, DeformedSpace};
use crate::wick::WickPolynomial;

/// Symmetric spectral weight `μ / (μ + 1/k)` with `μ = min(λ, 1/λ)`.
pub fn spectral_weight(lambda: f64, k: usize) -> f64 {
    let mu = lambda.min(1.0 / lambda);
    mu / (mu + 1.0 / k as f64)
}

/// `T_k = h_k(A)`; commutes with `A` and satisfies `I T_k I = T_k`.
pub fn generate_admissible(space: &DeformedSpace, k: usize) -> Result<DeformedContraction> {
    if k == 0 {
        return Err(Error::Numerical("k must be at least 1".into()));
    }
    DeformedContraction::new(space.clone(), space.clone(), space.functional_calculus(|l| spectral_weight(l, k)))
}

/// The maps `T_k` with their `t` values on the diagonal grid
/// `k = 2^i`, `t = 2^{-i}`.
#[derive(Debug, Clone)]
pub struct ApproximantFamily {
    space: DeformedSpace,
    points: Vec<(usize, f64)>,
    maps: Vec<DeformedContraction>,
}

impl ApproximantFamily {
    pub fn new(space: &DeformedSpace, points: Vec<(usize, f64)>) -> Result<Self> {
        if points.iter().any(|&(_, t)| !(t > 0.0)) {
            return Err(Error::Numerical("t must be positive".into()));
        }
        let maps = points.iter().map(|&(k, _)| generate_admissible(space, k)).collect::<Result<_>>()?;
        Ok(Self { space: space.clone(), points, maps })
    }

    /// `levels + 1` points `(2^i, 2^{-i})`.
    pub fn diagonal(space: &DeformedSpace, levels: u32) -> Result<Self> {
        Self::new(space, (0..=levels).map(|i| (1usize << i, 0.5f64.powi(i as i32))).collect())
    }

    pub fn space(&self) -> &DeformedSpace {
        &self.space
    }

    pub fn points(&self) -> &[(usize, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn base_map(&self, i: usize) -> &DeformedContraction {
        &self.maps[i]
    }

    /// `e^{-t} T_k` at grid point `i`.
    pub fn damped(&self, i: usize) -> Result<DeformedContraction> {
        self.maps[i].scaled((-self.points[i].1).exp())
    }

    /// `Γ_q(e^{-t} T_k)` at grid point `i`.
    pub fn channel(&self, i: usize, q: f64, max_degree: usize) -> Result<QuantizationChannel> {
        second_quantization(&self.damped(i)?, q, max_degree)
    }
}

/// `‖(e^{-t}T)^{⊗m}‖` in the Gram metric `gram(m)`, for `m = 0..=N`.
fn block_norms(ctx: &FockContext, t_map: &CMat, t: f64, gram: impl Fn(usize) -> Result<CMat>) -> Result<Vec<f64>> {
    let s = t_map * re((-t).exp());
    let mut power = linalg::identity(1);
    let mut out = Vec::with_capacity(ctx.max_degree() + 1);
    for m in 0..=ctx.max_degree() {
        let g = gram(m)?;
        out.push(gram_norm(&power, &g, &g)?);
        power = power.kronecker(&s);
    }
    Ok(out)
}

fn q_block_norms(ctx: &FockContext, t_map: &CMat, t: f64) -> Result<Vec<f64>> {
    block_norms(ctx, t_map, t, |m| ctx.gram(m).cloned())
}

fn free_block_norms(ctx: &FockContext, t_map: &CMat, t: f64) -> Result<Vec<f64>> {
    let g = ctx.space().metric().clone();
    block_norms(ctx, t_map, t, |m| Ok((0..m).fold(linalg::identity(1), |acc, _| acc.kronecker(&g))))
}

fn tail(norms: &[f64], n: usize) -> f64 {
    norms.iter().skip(n + 1).copied().fold(0.0, f64::max)
}

/// `‖P_n^⊥ F_q(e^{-t}T)‖` on the truncated Fock space of `ctx`.
pub fn tail_norm(ctx: &FockContext, t_map: &CMat, t: f64, n: usize) -> Result<f64> {
    Ok(tail(&q_block_norms(ctx, t_map, t)?, n))
}

/// The bound `e^{-t(n+1)}`.
pub fn tail_bound(t: f64, n: usize) -> f64 {
    (-t * (n + 1) as f64).exp()
}

/// `|tail_norm in the q-metric - tail_norm in the free metric|`.
pub fn free_reduction_crosscheck(ctx: &FockContext, t_map: &CMat, t: f64, n: usize) -> Result<f64> {
    let deformed = tail(&q_block_norms(ctx, t_map, t)?, n);
    let free = tail(&free_block_norms(ctx, t_map, t)?, n);
    Ok((deformed - free).abs())
}

/// `free_reduction_crosscheck` for every `n < N` at once.
pub fn free_reduction_residuals(ctx: &FockContext, t_map: &CMat, t: f64) -> Result<Vec<f64>> {
    let deformed = q_block_norms(ctx, t_map, t)?;
    let free = free_block_norms(ctx, t_map, t)?;
    Ok((0..ctx.max_degree()).map(|n| (tail(&deformed, n) - tail(&free, n)).abs()).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileRow {
    pub n: usize,
    pub tail: f64,
    pub bound: f64,
    /// `tail(n) / tail(n - 1)`.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompactnessProfile {
    pub rows: Vec<ProfileRow>,
}

impl CompactnessProfile {
    pub fn within_bound(&self, tol: f64) -> bool {
        self.rows.iter().all(|r| r.tail <= r.bound + tol)
    }

    /// Largest excess `tail - bound`.
    pub fn worst_excess(&self) -> f64 {
        self.rows.iter().map(|r| r.tail - r.bound).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Tail norms and their bound for `n = 0..=n_max` (`n_max < N`).
pub fn compactness_profile(ctx: &FockContext, t_map: &CMat, t: f64, n_max: usize) -> Result<CompactnessProfile> {
    if n_max >= ctx.max_degree() {
        return Err(Error::DegreeOverflow { degree: n_max + 1, max: ctx.max_degree() });
    }
    let norms = q_block_norms(ctx, t_map, t)?;
    let mut rows: Vec<ProfileRow> = Vec::new();
    for n in 0..=n_max {
        let value = tail(&norms, n);
        let ratio = rows.last().filter(|r| r.tail > 0.0).map(|r| value / r.tail);
        rows.push(ProfileRow { n, tail: value, bound: tail_bound(t, n), ratio });
    }
    Ok(CompactnessProfile { rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub points: Vec<(usize, f64)>,
    /// `distances[v][i] = ‖F_q(e^{-t}T_k)ξ_v - ξ_v‖_q` at grid point `i`.
    pub distances: Vec<Vec<f64>>,
}

impl ConvergenceReport {
    /// Every row is non-increasing along the grid, up to `tol`.
    pub fn monotone(&self, tol: f64) -> bool {
        self.distances.iter().all(|row| row.windows(2).all(|w| w[1] <= w[0] + tol))
    }

    /// Largest distance at the last grid point.
    pub fn finest(&self) -> f64 {
        self.distances.iter().filter_map(|row| row.last().copied()).fold(0.0, f64::max)
    }

    pub fn converged(&self, tol: f64) -> bool {
        self.monotone(1e-12) && self.finest() <= tol
    }
}

/// Distances `‖F_q(e^{-t}T_k)ξ - ξ‖_q` for each test vector along the family.
pub fn strong_convergence_sweep(ctx: &FockContext, family: &ApproximantFamily, vectors: &[GradedVector]) -> Result<ConvergenceReport> {
    if vectors.is_empty() {
        return Err(Error::Numerical("no test vectors".into()));
    }
    let damped = (0..family.len()).map(|i| family.damped(i)).collect::<Result<Vec<_>>>()?;
    let fock = ctx.fock();
    let distances = vectors
        .iter()
        .map(|xi| {
            damped
                .iter()
                .map(|s| fock.q_norm(&(&fock.first_quantize(s.matrix(), xi) - xi)))
                .collect()
        })
        .collect();
    Ok(ConvergenceReport { points: family.points().to_vec(), distances })
}

/// `max_x |⟨Ω, Φ(x)Ω⟩ - ⟨Ω, xΩ⟩|` over the sampled polynomials.
pub fn state_preservation_check(channel: &QuantizationChannel, words: &[WickPolynomial]) -> f64 {
    words.iter().map(|x| channel.vacuum_state_residual(x)).fold(0.0, f64::max)
}
