//! Run configuration: a strict JSON schema and its validation.
//!
//! ```json
//! {
//!   "physical":  { "hbar": 1.0, "mass": 1.0, "omega0": 1.0 },
//!   "potential": { "type": "double_well", "q0": 3.385456,
//!                  "drive": { "amplitude": 0.0, "frequency": 0.1 } },
//!   "initial":   { "alpha": [2.3939, 0.0] },
//!   "grid":      { "n_re": 32, "n_im": 32, "s_re": 1.0, "s_im": 1.0, "center": [0.0, 0.0] },
//!   "stepping":  { "t_total": 2000.0, "n_steps": 128000, "k": 6 },
//!   "oracle":    { "dim": 200 },
//!   "output":    { "path": "run.csv", "stride": 64 }
//! }
//! ```
//!
//! `grid`, `oracle`, `output` and `convergence` are optional. Without a
//! `grid` section the grid is chosen by [`covering_radius`]. Unknown keys
//! anywhere are rejected.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use thiserror::Error;

use crate::algebra::{PhysicalParams, PositionPolynomial};
use crate::models::{double_well, Drive, PotentialSpec};
use crate::propagator::{PropagateOptions, DEFAULT_NORM_FLOOR};
use crate::quadrature::{covering_grid, product_grid, QuadratureGrid, MAX_RULE_SIZE};
use crate::symbols::{coherent_expectation, SymbolTruncation, DEFAULT_DEGREE_CAP};
use crate::Complex64;

/// Fock basis size when the config has no `oracle` section.
pub const DEFAULT_ORACLE_DIM: usize = 200;

/// Extra phase-space distance added to the classical orbit radius by the
/// default grid policy.
pub const COVERING_PAD: f64 = 1.5;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PhysicalSection {
    pub hbar: f64,
    pub mass: f64,
    pub omega0: f64,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DriveSection {
    pub amplitude: f64,
    pub frequency: f64,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSection {
    Harmonic {
        #[serde(default)]
        drive: Option<DriveSection>,
    },
    DoubleWell {
        q0: f64,
        #[serde(default)]
        drive: Option<DriveSection>,
    },
    /// `V(Q) = Σ coeffs[k] Q^k`.
    Polynomial {
        coeffs: Vec<f64>,
        #[serde(default)]
        drive: Option<DriveSection>,
    },
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    /// Coherent label `[re, im]`.
    pub alpha: [f64; 2],
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n_re: usize,
    pub n_im: usize,
    #[serde(default = "one")]
    pub s_re: f64,
    #[serde(default = "one")]
    pub s_im: f64,
    #[serde(default)]
    pub center: [f64; 2],
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SteppingSection {
    pub t_total: f64,
    pub n_steps: usize,
    #[serde(default = "default_k")]
    pub k: u32,
    #[serde(default = "default_norm_floor")]
    pub norm_floor: f64,
    #[serde(default = "default_degree_cap")]
    pub degree_cap: usize,
}

fn default_k() -> u32 {
    SymbolTruncation::default().order()
}

fn default_norm_floor() -> f64 {
    DEFAULT_NORM_FLOOR
}

fn default_degree_cap() -> usize {
    DEFAULT_DEGREE_CAP
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    pub dim: usize,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default = "default_stride")]
    pub stride: usize,
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceAxis {
    NSteps,
    K,
    Grid,
}

impl ConvergenceAxis {
    pub fn name(self) -> &'static str {
        match self {
            Self::NSteps => "n_steps",
            Self::K => "k",
            Self::Grid => "grid",
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSection {
    pub axis: ConvergenceAxis,
    /// Strictly increasing parameter values.
    pub values: Vec<usize>,
    /// Number of equally spaced comparison times over `t_total`.
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    50
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub physical: PhysicalSection,
    pub potential: PotentialSection,
    pub initial: InitialSection,
    #[serde(default)]
    pub grid: Option<GridSection>,
    pub stepping: SteppingSection,
    #[serde(default)]
    pub oracle: Option<OracleSection>,
    #[serde(default)]
    pub output: Option<OutputSection>,
    #[serde(default)]
    pub convergence: Option<ConvergenceSection>,
}

/// Validated, ready-to-run form of a [`RunConfig`].
#[derive(Debug, Clone)]
pub struct Setup {
    pub params: PhysicalParams<f64>,
    pub potential: PotentialSpec<f64>,
    pub alpha0: Complex64,
    pub grid: Arc<QuadratureGrid<f64>>,
    pub t_total: f64,
    pub n_steps: usize,
    pub trunc: SymbolTruncation,
    pub options: PropagateOptions<f64>,
    pub oracle_dim: usize,
    pub stride: usize,
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn params(&self) -> Result<PhysicalParams<f64>, ConfigError> {
        let p = &self.physical;
        PhysicalParams::new(p.hbar, p.mass, p.omega0).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn potential_spec(&self, params: &PhysicalParams<f64>) -> Result<PotentialSpec<f64>, ConfigError> {
        let (spec, drive) = match &self.potential {
            PotentialSection::Harmonic { drive } => (PotentialSpec::harmonic(params), drive),
            PotentialSection::DoubleWell { q0, drive } => {
                if !(q0.is_finite() && *q0 > 0.0) {
                    return invalid(format!("potential.q0 must be positive, got {q0}"));
                }
                (double_well(params, *q0, 0.0, 0.0), drive)
            }
            PotentialSection::Polynomial { coeffs, drive } => {
                if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
                    return invalid("potential.coeffs must be a non-empty list of finite numbers");
                }
                let p = PositionPolynomial::from_real(coeffs);
                if p.degree() % 2 == 1 || p.coeff(p.degree()).re < 0.0 {
                    return invalid("potential.coeffs must describe a confining polynomial (even degree, positive leading coefficient)");
                }
                (PotentialSpec::new(p, None), drive)
            }
        };
        let drive = match drive {
            None => None,
            Some(d) => {
                if !(d.amplitude.is_finite() && d.frequency.is_finite()) {
                    return invalid("drive amplitude and frequency must be finite");
                }
                Some(Drive {
                    amplitude: d.amplitude,
                    frequency: d.frequency,
                })
            }
        };
        Ok(spec.with_drive(drive))
    }

    /// Checks every field and builds the numerical objects.
    pub fn setup(&self) -> Result<Setup, ConfigError> {
        let params = self.params()?;
        let potential = self.potential_spec(&params)?;
        let [re, im] = self.initial.alpha;
        if !(re.is_finite() && im.is_finite()) {
            return invalid("initial.alpha must be finite");
        }
        let alpha0 = Complex64::new(re, im);
        let st = &self.stepping;
        if !(st.t_total.is_finite() && st.t_total > 0.0) {
            return invalid(format!("stepping.t_total must be positive, got {}", st.t_total));
        }
        if st.n_steps == 0 {
            return invalid("stepping.n_steps must be at least 1");
        }
        let trunc = SymbolTruncation::new(st.k).map_err(|e| ConfigError::Invalid(format!("stepping.k: {e}")))?;
        if !(st.norm_floor.is_finite() && st.norm_floor >= 0.0 && st.norm_floor < 1.0) {
            return invalid("stepping.norm_floor must lie in [0, 1)");
        }
        let h1 = potential.anharmonic_part(&params, 0.0);
        if h1.degree() * st.k as usize > st.degree_cap {
            return invalid(format!(
                "kernel degree {} (H1 degree {} times k = {}) exceeds degree_cap {}",
                h1.degree() * st.k as usize,
                h1.degree(),
                st.k,
                st.degree_cap
            ));
        }
        let grid = match &self.grid {
            Some(g) => {
                for (name, n) in [("n_re", g.n_re), ("n_im", g.n_im)] {
                    if n == 0 || n > MAX_RULE_SIZE {
                        return invalid(format!("grid.{name} must lie in 1..={MAX_RULE_SIZE}, got {n}"));
                    }
                }
                let center = Complex64::new(g.center[0], g.center[1]);
                product_grid(g.n_re, g.n_im, g.s_re, g.s_im, center).map_err(|e| ConfigError::Invalid(format!("grid: {e}")))?
            }
            None => {
                let radius = covering_radius(&potential, &params, alpha0) + COVERING_PAD;
                let g = covering_grid(radius, Complex64::new(0.0, 0.0)).map_err(|e| ConfigError::Invalid(format!("grid: {e}")))?;
                let (n_re, n_im) = g.counts();
                log::info!("no grid configured; covering radius {radius:.3} gives a {n_re}x{n_im} unit grid");
                g
            }
        };
        let oracle_dim = self.oracle.as_ref().map_or(DEFAULT_ORACLE_DIM, |o| o.dim);
        let needed = h1.degree().max(1) + 2;
        if oracle_dim < needed {
            return invalid(format!("oracle.dim must be at least {needed}, got {oracle_dim}"));
        }
        let (stride, output) = match &self.output {
            Some(o) => (o.stride, o.path.clone()),
            None => (default_stride(), None),
        };
        if stride == 0 {
            return invalid("output.stride must be at least 1");
        }
        if let Some(c) = &self.convergence {
            if c.values.is_empty() || c.values.windows(2).any(|w| w[0] >= w[1]) {
                return invalid("convergence.values must be a non-empty increasing list");
            }
            if c.samples == 0 {
                return invalid("convergence.samples must be at least 1");
            }
            if c.axis == ConvergenceAxis::K && c.values[0] == 0 {
                return invalid("convergence.values: k must be at least 1");
            }
        }
        Ok(Setup {
            params,
            potential,
            alpha0,
            grid: Arc::new(grid),
            t_total: st.t_total,
            n_steps: st.n_steps,
            trunc,
            options: PropagateOptions {
                degree_cap: st.degree_cap,
                norm_floor: st.norm_floor,
                ..PropagateOptions::default()
            },
            oracle_dim,
            stride,
            output,
        })
    }
}

/// Largest `|α|` reached by the classical orbit at the energy
/// `⟨α₀|H|α₀⟩` of the initial packet (static part of the potential).
///
/// Along the energy shell `|α|² = mω₀q²/(2ħ) + (E − V(q))/(ħω₀)`; the
/// maximum is taken over the classically allowed positions.
pub fn covering_radius(spec: &PotentialSpec<f64>, params: &PhysicalParams<f64>, alpha0: Complex64) -> f64 {
    let (hbar, m, w) = (params.hbar(), params.mass(), params.omega0());
    // ⟨P²/2m⟩ = (ħω₀/4)(1 + 4 Im(α)²)
    let kinetic = hbar * w / 4.0 * (1.0 + 4.0 * alpha0.im * alpha0.im);
    let energy = kinetic + coherent_expectation(spec.static_part(), alpha0, params).re;
    // Cauchy bound on the real roots of V(q) − E
    let c = spec.static_part().coeffs();
    let lead = c.last().map_or(1.0, |z| z.re.abs());
    let bound = 1.0
        + c[..c.len().saturating_sub(1)]
            .iter()
            .enumerate()
            .map(|(k, z)| if k == 0 { (z.re - energy).abs() } else { z.re.abs() } / lead)
            .fold(0.0, f64::max);
    let n = 20_000;
    let mut best = alpha0.norm();
    for i in 0..=n {
        let q = -bound + 2.0 * bound * i as f64 / n as f64;
        let v = spec.static_value(q);
        if v <= energy {
            let r2 = m * w * q * q / (2.0 * hbar) + (energy - v) / (hbar * w);
            best = best.max(r2.sqrt());
        }
    }
    best
}
