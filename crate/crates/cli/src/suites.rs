use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use qfock::haagerup::{self, ApproximantFamily};
use qfock::linalg::{self, pow, CVec, ONE};
use qfock::quantization::{functoriality_residual, random_polynomial, random_probes, second_quantization};
use qfock::space::random_real_contraction;
use qfock::toeplitz::{self, BalancedElement};
use qfock::wick::{self, apply_wick, random_tensor};
use qfock::{build_space, c_q, BlockSpectrum, DeformedSpace, FockContext, GradedVector, WickPolynomial};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::SweepConfig;
use crate::error::CliError;
use crate::report::{Comparison, Parameters, VerificationReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Symmetrizer,
    Wick,
    Quantization,
    Toeplitz,
    Haagerup,
    All,
}

impl FromStr for Suite {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Ok(match s {
            "symmetrizer" => Suite::Symmetrizer,
            "wick" => Suite::Wick,
            "quantization" => Suite::Quantization,
            "toeplitz" => Suite::Toeplitz,
            "haagerup" => Suite::Haagerup,
            "all" => Suite::All,
            other => return Err(CliError::UnknownSuite(other.to_string())),
        })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Symmetrizer => "symmetrizer",
            Suite::Wick => "wick",
            Suite::Quantization => "quantization",
            Suite::Toeplitz => "toeplitz",
            Suite::Haagerup => "haagerup",
            Suite::All => "all",
        })
    }
}

/// A named check with its comparison and default bound.
#[derive(Debug, Clone, Copy)]
pub struct Check {
    pub id: &'static str,
    pub comparison: Comparison,
    default_bound: fn(f64) -> f64,
}

impl Check {
    pub fn default_bound(&self, q: f64) -> f64 {
        (self.default_bound)(q)
    }
}

const fn check(id: &'static str, comparison: Comparison, default_bound: fn(f64) -> f64) -> Check {
    Check { id, comparison, default_bound }
}

use Comparison::{Above, AtLeast, AtMost};

pub const CHECKS: [Check; 21] = [
    check("symmetrizer.positivity", Above, |_| 0.0),
    check("symmetrizer.factorization", AtMost, |_| 1e-10),
    check("symmetrizer.majorisation", AtLeast, |_| -1e-10),
    check("symmetrizer.r_star_norm", AtLeast, |_| -1e-10),
    check("wick.vacuum", AtMost, |_| 1e-10),
    check("wick.adjoint", AtMost, |_| 1e-9),
    check("quantization.covariance", AtMost, |_| 1e-8),
    check("quantization.functoriality", AtMost, |_| 1e-8),
    check("quantization.vacuum_state", AtMost, |_| 1e-10),
    check("quantization.unitality", AtMost, |_| 1e-10),
    check("quantization.kadison_schwarz", AtLeast, |_| -1e-8),
    check("quantization.two_positivity", AtLeast, |_| -1e-8),
    check("toeplitz.compression_identity", AtMost, |_| 1e-10),
    check("toeplitz.norm_bound", AtLeast, |_| -1e-8),
    check("toeplitz.finkernel_rank", AtMost, |_| 0.0),
    check("haagerup.tail_bound", AtMost, |_| 1e-10),
    check("haagerup.free_reduction", AtMost, |q| if q.abs() <= 0.5 { 1e-8 } else { 1e-6 }),
    check("haagerup.strong_convergence", AtMost, |_| 1e-6),
    check("haagerup.monotone", AtMost, |_| 1e-12),
    check("haagerup.state_preservation", AtMost, |_| 1e-10),
    check("haagerup.gns", AtMost, |_| 1e-8),
];

impl Suite {
    pub fn checks(self) -> Vec<Check> {
        let prefix = match self {
            Suite::All => return CHECKS.to_vec(),
            other => format!("{other}."),
        };
        CHECKS.iter().copied().filter(|c| c.id.starts_with(&prefix)).collect()
    }
}

/// Everything a check needs at one grid point.
struct GridPoint<'a> {
    cfg: &'a SweepConfig,
    space: DeformedSpace,
    ctx: FockContext,
    q: f64,
}

/// Runs `suite` over the grid of `cfg`: spectra outermost, then `q`, then
/// checks in table order.
pub fn run_suite(cfg: &SweepConfig, suite: Suite) -> Result<Vec<VerificationReport>, CliError> {
    run_suite_timed(cfg, suite, false)
}

/// As `run_suite`, optionally recording each check's wall time.
pub fn run_suite_timed(cfg: &SweepConfig, suite: Suite, timings: bool) -> Result<Vec<VerificationReport>, CliError> {
    cfg.validate()?;
    let checks = suite.checks();
    let mut out = Vec::new();
    for (si, spectrum) in cfg.spectra.iter().enumerate() {
        for (qi, &q) in cfg.q.iter().enumerate() {
            let params = Parameters { q, spectrum: spectrum.label(), degree: cfg.degree };
            let point = grid_point(cfg, spectrum, q);
            let index = (si * cfg.q.len() + qi) as u64;
            for c in &checks {
                let bound = cfg.tolerance(c.id, c.default_bound(q));
                let start = Instant::now();
                let mut report = match &point {
                    Ok(p) => {
                        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                        let slot = CHECKS.iter().position(|x| x.id == c.id).unwrap_or(0) as u64;
                        rng.set_stream(index * CHECKS.len() as u64 + slot);
                        match evaluate(c.id, p, &mut rng) {
                            Ok(v) => VerificationReport::new(c.id, params.clone(), v, bound, c.comparison),
                            Err(e) => VerificationReport::failed(c.id, params.clone(), bound, c.comparison, e.to_string()),
                        }
                    }
                    Err(e) => VerificationReport::failed(c.id, params.clone(), bound, c.comparison, e.to_string()),
                };
                if timings {
                    report.wall_time_s = Some(start.elapsed().as_secs_f64());
                }
                out.push(report);
            }
        }
    }
    Ok(out)
}

fn grid_point<'a>(cfg: &'a SweepConfig, spectrum: &BlockSpectrum, q: f64) -> qfock::Result<GridPoint<'a>> {
    let space = build_space(spectrum)?;
    let ctx = FockContext::new(space.clone(), q, cfg.degree)?;
    Ok(GridPoint { cfg, space, ctx, q })
}

fn evaluate(id: &str, p: &GridPoint<'_>, rng: &mut ChaCha8Rng) -> qfock::Result<f64> {
    match id {
        "symmetrizer.positivity" => symmetrizer_positivity(p),
        "symmetrizer.factorization" => symmetrizer_factorization(p),
        "symmetrizer.majorisation" => symmetrizer_majorisation(p),
        "symmetrizer.r_star_norm" => r_star_norm(p),
        "wick.vacuum" => wick_vacuum(p, rng),
        "wick.adjoint" => wick_adjoint(p, rng),
        "quantization.covariance" => covariance(p, rng),
        "quantization.functoriality" => functoriality(p, rng),
        "quantization.vacuum_state" => vacuum_state(p, rng),
        "quantization.unitality" => unitality(p, rng),
        "quantization.kadison_schwarz" => kadison_schwarz(p, rng),
        "quantization.two_positivity" => two_positivity(p, rng),
        "toeplitz.compression_identity" => compression_identity(p, rng),
        "toeplitz.norm_bound" => norm_bound(p, rng),
        "toeplitz.finkernel_rank" => finkernel(p),
        "haagerup.tail_bound" => tail_bound(p),
        "haagerup.free_reduction" => free_reduction(p),
        "haagerup.strong_convergence" => convergence(p, rng).map(|r| r.finest()),
        "haagerup.monotone" => convergence(p, rng).map(|r| max_increase(&r.distances)),
        "haagerup.state_preservation" => state_preservation(p, rng),
        "haagerup.gns" => gns(p, rng),
        other => Err(qfock::Error::Numerical(format!("unknown check {other}"))),
    }
}

fn pairs(n_max: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..=n_max).flat_map(move |n| (0..=n_max - n).map(move |k| (n, k)))
}

/// Smallest eigenvalue of `P_q^{(n)}` over `n <= N`.
fn symmetrizer_positivity(p: &GridPoint<'_>) -> qfock::Result<f64> {
    let mut worst = f64::INFINITY;
    for n in 0..=p.cfg.degree {
        worst = worst.min(linalg::min_eigenvalue(p.ctx.q_symmetrizer(n)?));
    }
    Ok(worst)
}

fn symmetrizer_factorization(p: &GridPoint<'_>) -> qfock::Result<f64> {
    pairs(p.cfg.degree).try_fold(0.0f64, |acc, (n, k)| Ok(acc.max(p.ctx.factorization_residual(n, k)?)))
}

fn symmetrizer_majorisation(p: &GridPoint<'_>) -> qfock::Result<f64> {
    pairs(p.cfg.degree).try_fold(f64::INFINITY, |acc, (n, k)| {
        Ok(acc.min(toeplitz::symmetrizer_majorisation(&p.ctx, n, k)?.margin))
    })
}

/// `C(q) - max ‖R*_{n+k,k}‖`.
fn r_star_norm(p: &GridPoint<'_>) -> qfock::Result<f64> {
    let worst = pairs(p.cfg.degree)
        .try_fold(0.0f64, |acc, (n, k)| Ok::<_, qfock::Error>(acc.max(linalg::spectral_norm(&p.ctx.r_star(n, k)?))))?;
    Ok(c_q(p.q) - worst)
}

fn wick_vacuum(p: &GridPoint<'_>, rng: &mut ChaCha8Rng) -> qfock::Result<f64> {
    let fock = p.ctx.fock();
    let n_max = p.cfg.degree;
    let mut worst: f64 = 0.0;
    for _ in 0..p.cfg.samples.wick_vectors {
        let d = rng.gen_range(0..=n_max);
        let xi = random_tensor(rng, p.space.dim(), n_max, d);
        let image = apply_wick(fock, &xi, &fock.vacuum(), n_max);
        worst = worst.max(fock.q_norm(&(&image - &xi)));
    }
    Ok(worst)
}

/// `‖W(ξ)^♯ - W(Ĩξ)‖` on the full truncated space.
fn wick_adjoint(p: &GridPoint<'_>, rng: &mut ChaCha8Rng) -> qfock::Result<f64> {
    let n_max = p.cfg.degree;
    let mut worst: f64 = 0.0;
    for _ in 0..p.cfg.samples.wick_adjoints {
        let d = rng.gen_range(0..=n_max.min(2));
        let xi = random_tensor(rng, p.space.dim(), n_max, d);
        let w = wick::wick_word(&p.ctx, &xi)?;
        let dual = wick::wick_word(&p.ctx, &wick::reversed_conjugate(&p.space, &xi))?;
        let diff = p.ctx.adjoint(w.realized()).minus(dual.realized());
        worst = worst.max(p.ctx.operator_norm(&diff));
    }
    Ok(worst)
}

fn random_channel(p: &GridPoint<'_>, rng: &mut ChaCha8Rng) -> qfock::Result<qfock::quantization::QuantizationChannel> {
    let norm = rng.gen_range(0.1..=1.0);
    let t = random_real_contraction(&p.space, &p.space, norm, rng);
    second_quantization(&t, p.q, p.cfg.degree)
}

fn word_degree(p: &GridPoint<'_>, rng: &mut ChaCha8Rng) -> usize {
    rng.gen_range(1..=p.cfg.degree.min(2))
}

fn covariance(p: &GridPoint<'_>, rng: &mut ChaCha8Rng) -> qfock::Result<f64> {
    let mut worst: f64 = 0.0;
    for _ in 0..p.cfg.samples.contractions {
        let ch = random_channel(p, rng)?;
        let d = word_degree(p, rng);
        let xi = random_tensor(rng, p.space.dim(), p.cfg.degree, d);
        let probes = random_probes(rng, ch.target_fock(), p.cfg.degree - d, p.cfg.samples.probes);
        worst = worst.max(ch.wick_covariance_residual(&xi, &probes));
    }
    Ok(worst)
}

fn functoriality(p: &GridPoint<'_>, rng: &mut ChaCha8Rng) -> qfock::Result<f64> {
    let mut worst: f64 = 0.0;
    for _ in 0..p.cfg.samples.functoriality {
        let t = random_real_contraction(&p.space, &p.space, rng.gen_range(0.1..=1.0), rng);
        let s = random_real_contraction(&p.space, &p.space, rng.gen_range(0.1..=1.0), rng);
        let st = s.compose(&t)?;
        let (phi_t, phi_s, phi_st) = (
            second_quantization(&t, p.q, p.cfg.degree)?,
            second_quantization(&s, p.q, p.cfg.degree)?,
            second_quantization(&st, p.q, p.cfg.degree)?,
        );
        let d = word_degree(p, rng);
        let xi = random_tensor(rng, p.space.dim(), p.cfg.degree, d);
        let probes = random_probes(rng, phi_st.target_fock(), p.cfg.degree - d, p.cfg.samples.probes);
        worst = worst.max(functoriality_residual(&phi_t, &phi_s, &phi_st, &xi, &probes));
    }
    Ok(worst)
}

fn vacuum_state(p: &GridPoint<'_>, rng: &mut ChaCha8Rng) -> qfock::Result<f64> {
    let mut worst: f64 = 0.0;
    for _ in 0..p.cfg.samples.functoriality {
        let ch = random_channel(p, rng)?;
        let x = random_polynomial(rng, p.space.dim(), p.cfg.degree, 3, p.cfg.degree);
        worst = worst.max(ch.vacuum_state_residual(&x));
    }
    Ok(worst)
}

fn unitality(p: &GridPoint<'_>, rng: &mut ChaCha8Rng) -> qfock::Result<f64> {
    let mut worst: f64 = 0.0;
    for _ in 0..p.cfg.samples.functoriality {
        let ch = random_channel(p, rng)?;
        let probes = random_probes(rng, ch.target_fock(), p.cfg.degree, p.cfg.samples.probes);
        worst = worst.max(ch.unitality_residual(&probes));
    }
    Ok(worst)
}

/// Smallest Schwarz margin over degree-one polynomials, spread across a few
/// random channels.
fn kadison_schwarz(p: &GridPoint<'_>, rng: &mut ChaCha8Rng) -> qfock::Result<f64> {
    let channels = (0..p.cfg.samples.functoriality.max(1)).map(|_| random_channel(p, rng)).collect::<qfock::Result<Vec<_>>>()?;
    let mut worst = f64::INFINITY;
    for i in 0..p.cfg.samples.schwarz {
        let x = random_polynomial(rng, p.space.dim(), p.cfg.degree, 2, 1);
        worst = worst.min(channels[i % channels.len()].kadison_schwarz_margin(&x)?);
    }
    Ok(worst)
}

/// Schwarz margin for 2x2 arrays of degree-one polynomials.
fn two_positivity(p: &GridPoint<'_>, rng: &mut ChaCha8Rng) -> qfock::Result<f64> {
    let mut worst = f64::INFINITY;
    for _ in 0..p.cfg.samples.two_positivity {
        let ch = random_channel(p, rng)?;
        let x: Vec<Vec<WickPolynomial>> = (0..2)
            .map(|_| (0..2).map(|_| random_polynomial(rng, p.space.dim(), p.cfg.degree, 1, 1)).collect())
            .collect();
        worst = worst.min(ch.matrix_schwarz_margin(&x)?);
    }
    Ok(worst)
}

fn compression_identity(p: &GridPoint<'_>, rng: &mut ChaCha8Rng) -> qfock::Result<f64> {
    let mut worst: f64 = 0.0;
    for n in 0..=p.cfg.degree / 2 {
        for _ in 0..p.cfg.samples.toeplitz {
            let x = BalancedElement::random(&p.ctx, n, rng)?;
            for k in 0..=p.cfg.degree - n {
                worst = worst.max(toeplitz::compression_identity_residual(&p.ctx, &x, k)?);
            }
        }
    }
    Ok(worst)
}

fn norm_bound(p: &GridPoint<'_>, rng: &mut ChaCha8Rng) -> qfock::Result<f64> {
    let mut worst = f64::INFINITY;
    for n in 0..=p.cfg.degree / 2 {
        for _ in 0..p.cfg.samples.toeplitz {
            let x = BalancedElement::random(&p.ctx, n, rng)?;
            worst = worst.min(toeplitz::norm_bound_margin(&p.ctx, &x)?);
        }
    }
    Ok(worst)
}

/// A partner-closed coordinate subspace of dimension at most two.
pub fn small_subspace(space: &DeformedSpace) -> Vec<usize> {
    let partner = space.partner()[0];
    if partner == 0 {
        vec![0]
    } else {
        vec![0, partner]
    }
}

/// Columns minus rank of the realisation map on monomials over a small
/// subspace, lengths up to `min(2, N / 2)`.
fn finkernel(p: &GridPoint<'_>) -> qfock::Result<f64> {
    let r = toeplitz::finkernel_rank(&p.ctx, &small_subspace(&p.space), 2.min(p.cfg.degree / 2))?;
    Ok((r.columns - r.rank) as f64)
}

fn family(p: &GridPoint<'_>) -> qfock::Result<ApproximantFamily> {
    ApproximantFamily::diagonal(&p.space, p.cfg.samples.haagerup_levels)
}

/// Largest `tail_norm(n) - e^{-t(n+1)}` over the family and `n < N`.
fn tail_bound(p: &GridPoint<'_>) -> qfock::Result<f64> {
    let fam = family(p)?;
    let mut worst = f64::NEG_INFINITY;
    for (i, &(_, t)) in fam.points().iter().enumerate() {
        let profile = haagerup::compactness_profile(&p.ctx, fam.base_map(i).matrix(), t, p.cfg.degree - 1)?;
        worst = worst.max(profile.worst_excess());
    }
    Ok(worst)
}

fn free_reduction(p: &GridPoint<'_>) -> qfock::Result<f64> {
    let fam = family(p)?;
    let mut worst: f64 = 0.0;
    for (i, &(_, t)) in fam.points().iter().enumerate() {
        let residuals = haagerup::free_reduction_residuals(&p.ctx, fam.base_map(i).matrix(), t)?;
        worst = residuals.into_iter().fold(worst, f64::max);
    }
    Ok(worst)
}

/// The vacuum, every degree-one basis vector, and random mixed vectors,
/// all of unit q-norm.
pub fn convergence_vectors<R: Rng + ?Sized>(ctx: &FockContext, count: usize, rng: &mut R) -> Vec<GradedVector> {
    let fock = ctx.fock();
    let mut out = vec![fock.vacuum()];
    for c in 0..ctx.dim() {
        let mut e = CVec::zeros(ctx.dim());
        e[c] = ONE;
        let v = GradedVector::homogeneous(ctx.dim(), ctx.max_degree(), 1, e).expect("degree one fits");
        out.push(&v * linalg::re(1.0 / fock.q_norm(&v)));
    }
    out.extend(random_probes(rng, fock, ctx.max_degree(), count));
    out
}

fn convergence(p: &GridPoint<'_>, rng: &mut ChaCha8Rng) -> qfock::Result<haagerup::ConvergenceReport> {
    let vectors = convergence_vectors(&p.ctx, p.cfg.samples.probes, rng);
    haagerup::strong_convergence_sweep(&p.ctx, &family(p)?, &vectors)
}

fn max_increase(rows: &[Vec<f64>]) -> f64 {
    rows.iter().flat_map(|r| r.windows(2).map(|w| w[1] - w[0])).fold(f64::NEG_INFINITY, f64::max)
}

fn finest_channel(p: &GridPoint<'_>) -> qfock::Result<qfock::quantization::QuantizationChannel> {
    let fam = family(p)?;
    fam.channel(fam.len() - 1, p.q, p.cfg.degree)
}

fn state_preservation(p: &GridPoint<'_>, rng: &mut ChaCha8Rng) -> qfock::Result<f64> {
    let ch = finest_channel(p)?;
    let mut words = vec![WickPolynomial::identity(p.space.dim())];
    words.extend((0..p.cfg.samples.probes).map(|_| random_polynomial(rng, p.space.dim(), p.cfg.degree, 3, p.cfg.degree)));
    Ok(haagerup::state_preservation_check(&ch, &words))
}

fn gns(p: &GridPoint<'_>, rng: &mut ChaCha8Rng) -> qfock::Result<f64> {
    let ch = finest_channel(p)?;
    let mut worst: f64 = 0.0;
    for _ in 0..p.cfg.samples.probes {
        let d = rng.gen_range(0..=p.cfg.degree);
        let xi = random_tensor(rng, p.space.dim(), p.cfg.degree, d);
        let scale = linalg::re(1.0 / pow(p.space.dim(), d) as f64);
        worst = worst.max(ch.gns_residual(&(&xi * scale)));
    }
    Ok(worst)
}
