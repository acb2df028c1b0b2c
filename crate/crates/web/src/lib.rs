//! WebAssembly bindings for a small interactive demo: the constant C(q)
//! and symmetrizer spectra, tail-norm profiles of damped approximants, and
//! the norm bound for random balanced Toeplitz elements.

use qfock::haagerup::{compactness_profile, generate_admissible};
use qfock::toeplitz::{norm_bound_margin, BalancedElement};
use qfock::{build_space, c_q, linalg, BlockSpectrum, FockContext};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

/// Largest truncation the demo accepts; keeps the page responsive.
pub const MAX_DEGREE: usize = 5;

fn context(spectrum: &str, q: f64, degree: usize) -> Result<FockContext, String> {
    if degree > MAX_DEGREE {
        return Err(format!("degree {degree} exceeds {MAX_DEGREE}"));
    }
    let spec: BlockSpectrum = spectrum.parse().map_err(|e: qfock::Error| e.to_string())?;
    if spec.dim() > 3 {
        return Err(format!("spectrum `{spectrum}` has dimension {} (at most 3)", spec.dim()));
    }
    let space = build_space(&spec).map_err(|e| e.to_string())?;
    FockContext::new(space, q, degree).map_err(|e| e.to_string())
}

/// `[q_0, C(q_0), q_1, C(q_1), …]` on `samples` evenly spaced points of
/// `[-max_q, max_q]`.
pub fn c_q_curve_native(max_q: f64, samples: usize) -> Result<Vec<f64>, String> {
    if !(0.0..1.0).contains(&max_q) || samples < 2 {
        return Err("need 0 <= max_q < 1 and at least two samples".into());
    }
    Ok((0..samples)
        .flat_map(|i| {
            let q = -max_q + 2.0 * max_q * i as f64 / (samples - 1) as f64;
            [q, c_q(q)]
        })
        .collect())
}

/// Eigenvalues of the q-symmetrizer on `dim`-dimensional tensors of degree
/// `n`, ascending.
pub fn symmetrizer_spectrum_native(q: f64, dim: usize, n: usize) -> Result<Vec<f64>, String> {
    if !(q.abs() < 1.0) || !(1..=3).contains(&dim) || n > 4 {
        return Err("need |q| < 1, 1 <= dim <= 3 and n <= 4".into());
    }
    let mut ev = linalg::hermitian_eigenvalues(&qfock::fock::symmetrizer_matrix(dim, n, q));
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// `[tail_0, bound_0, tail_1, bound_1, …]` for `F_q(e^{-t}T_k)`.
pub fn tail_profile_native(spectrum: &str, q: f64, t: f64, k: usize, degree: usize) -> Result<Vec<f64>, String> {
    if !(t > 0.0) || k == 0 || degree == 0 {
        return Err("need t > 0, k >= 1 and degree >= 1".into());
    }
    let ctx = context(spectrum, q, degree)?;
    let map = generate_admissible(ctx.space(), k).map_err(|e| e.to_string())?;
    let profile = compactness_profile(&ctx, map.matrix(), t, degree - 1).map_err(|e| e.to_string())?;
    Ok(profile.rows.iter().flat_map(|r| [r.tail, r.bound]).collect())
}

/// Margins `C(q)‖P_n x P_n‖ - ‖x‖` for `count` random balanced elements of
/// order `n`.
pub fn norm_bound_margins_native(spectrum: &str, q: f64, n: usize, degree: usize, count: usize, seed: u64) -> Result<Vec<f64>, String> {
    let ctx = context(spectrum, q, degree)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count.min(50))
        .map(|_| {
            let x = BalancedElement::random(&ctx, n, &mut rng).map_err(|e| e.to_string())?;
            norm_bound_margin(&ctx, &x).map_err(|e| e.to_string())
        })
        .collect()
}

#[wasm_bindgen]
pub fn c_q_value(q: f64) -> f64 {
    c_q(q)
}

#[wasm_bindgen]
pub fn c_q_curve(max_q: f64, samples: usize) -> Result<Vec<f64>, JsError> {
    c_q_curve_native(max_q, samples).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn symmetrizer_spectrum(q: f64, dim: usize, n: usize) -> Result<Vec<f64>, JsError> {
    symmetrizer_spectrum_native(q, dim, n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn tail_profile(spectrum: &str, q: f64, t: f64, k: usize, degree: usize) -> Result<Vec<f64>, JsError> {
    tail_profile_native(spectrum, q, t, k, degree).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn norm_bound_margins(spectrum: &str, q: f64, n: usize, degree: usize, count: usize, seed: u64) -> Result<Vec<f64>, JsError> {
    norm_bound_margins_native(spectrum, q, n, degree, count, seed).map_err(|e| JsError::new(&e))
}
