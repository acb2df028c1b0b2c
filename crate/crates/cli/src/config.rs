use std::collections::BTreeMap;
use std::path::Path;

use qfock::BlockSpectrum;
use serde::Deserialize;

use crate::error::CliError;

/// Largest truncation degree a sweep accepts.
pub const MAX_DEGREE: usize = 6;

/// Number of random samples drawn by each check at every grid point.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleCounts {
    /// Random tensors for the Wick vacuum property.
    pub wick_vectors: usize,
    /// Random words for the adjoint relation.
    pub wick_adjoints: usize,
    /// Random real contractions for covariance.
    pub contractions: usize,
    /// Contraction pairs for functoriality.
    pub functoriality: usize,
    /// Polynomials for the Schwarz inequality.
    pub schwarz: usize,
    /// 2x2 polynomial arrays for 2-positivity.
    pub two_positivity: usize,
    /// Probe vectors per residual.
    pub probes: usize,
    /// Random elements per Toeplitz order.
    pub toeplitz: usize,
    /// Diagonal grid levels of the approximant family.
    pub haagerup_levels: u32,
}

impl Default for SampleCounts {
    fn default() -> Self {
        Self {
            wick_vectors: 100,
            wick_adjoints: 3,
            contractions: 50,
            functoriality: 5,
            schwarz: 100,
            two_positivity: 2,
            probes: 3,
            toeplitz: 3,
            haagerup_levels: 6,
        }
    }
}

/// Raw file contents; every field optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    q: Option<Vec<f64>>,
    spectra: Option<Vec<String>>,
    degree: Option<usize>,
    seed: Option<u64>,
    samples: Option<SampleCounts>,
    tolerances: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub q: Vec<f64>,
    pub spectra: Vec<BlockSpectrum>,
    pub degree: usize,
    pub seed: u64,
    pub samples: SampleCounts,
    /// Check id to bound.
    pub tolerances: BTreeMap<String, f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            q: vec![-0.9, -0.5, 0.0, 0.3, 0.5, 0.9],
            spectra: vec![
                BlockSpectrum::trivial(1),
                BlockSpectrum::trivial(2),
                BlockSpectrum::block(2.0),
                BlockSpectrum::block(2.0).with_trivial(1),
            ],
            degree: 5,
            seed: 0,
            samples: SampleCounts::default(),
            tolerances: BTreeMap::new(),
        }
    }
}

pub fn parse_spectrum(s: &str) -> Result<BlockSpectrum, CliError> {
    s.parse::<BlockSpectrum>()
        .map_err(|e| CliError::Config(format!("spectrum `{s}`: {e}")))
}

impl SweepConfig {
    /// Defaults overridden by the fields present in `text`.
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let mut cfg = Self::default();
        if let Some(q) = file.q {
            cfg.q = q;
        }
        if let Some(spectra) = file.spectra {
            cfg.spectra = spectra.iter().map(|s| parse_spectrum(s)).collect::<Result<_, _>>()?;
        }
        if let Some(n) = file.degree {
            cfg.degree = n;
        }
        if let Some(seed) = file.seed {
            cfg.seed = seed;
        }
        if let Some(samples) = file.samples {
            cfg.samples = samples;
        }
        if let Some(tol) = file.tolerances {
            cfg.tolerances = tol;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.display().to_string(), e))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.q.is_empty() {
            return Err(CliError::Config("q: at least one value required".into()));
        }
        if let Some(q) = self.q.iter().find(|q| !(q.abs() < 1.0)) {
            return Err(CliError::Config(format!("q: {q} is outside (-1, 1)")));
        }
        if self.spectra.is_empty() {
            return Err(CliError::Config("spectra: at least one spectrum required".into()));
        }
        for s in &self.spectra {
            s.validate().map_err(|e| CliError::Config(format!("spectra: {e}")))?;
        }
        if !(2..=MAX_DEGREE).contains(&self.degree) {
            return Err(CliError::Config(format!("degree: {} is outside 2..={MAX_DEGREE}", self.degree)));
        }
        if let Some((id, t)) = self.tolerances.iter().find(|(_, t)| !t.is_finite()) {
            return Err(CliError::Config(format!("tolerances.{id}: {t} is not finite")));
        }
        Ok(())
    }

    /// Bound for `check`, or `default` when not overridden.
    pub fn tolerance(&self, check: &str, default: f64) -> f64 {
        self.tolerances.get(check).copied().unwrap_or(default)
    }
}
