//! Experiment drivers behind the command line tool: single runs of either
//! method, method comparison, convergence tables and self-checks.
//!
//! Every time series has the CSV layout `t,mean_Q,mean_Q2,norm,method`
//! with numbers in `{:.15e}` notation. Runs are deterministic: identical
//! configs produce byte-identical CSV.

use std::io::{self, Write};
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex;
use thiserror::Error;

use crate::algebra::{fock_matrix, position_matrix_polynomial, position_to_antinormal, PhysicalParams, PositionPolynomial};
use crate::config::{ConfigError, ConvergenceAxis, RunConfig, Setup};
use crate::fock::{coherent_amplitudes, coherent_in_fock, evolve_oracle, fock_expectation_q, fock_expectation_q2, FockError, FockState};
use crate::models::{double_well, PotentialSpec};
use crate::propagator::{project_initial, propagate, CsState, GramForm, PropagationError};
use crate::quadrature::{identity_residual, product_grid, QuadratureGrid};
use crate::symbols::{position_symbol, PhaseSpaceFunction, SymbolError, SymbolTruncation};
use crate::Complex64;

pub const CSV_HEADER: &str = "t,mean_Q,mean_Q2,norm,method";
pub const CONVERGENCE_HEADER: &str = "axis,value,max_dev,order,identity_residual";

/// Threshold of the resolution-of-identity self-check.
pub const IDENTITY_TOL: f64 = 1e-6;
/// Threshold of the symbol reconstruction self-check.
pub const RECONSTRUCTION_TOL: f64 = 1e-6;
/// Threshold of the ordering-versus-matrix-power self-check.
pub const ORDERING_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Propagation(#[from] PropagationError),
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}

impl ExperimentError {
    /// 2 for configuration problems, 3 for numerical aborts.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Io(_) => 2,
            Self::Propagation(PropagationError::Symbol(SymbolError::DegreeCap { .. })) => 2,
            Self::Propagation(PropagationError::Symbol(SymbolError::InvalidTruncation(_))) => 2,
            Self::Fock(FockError::DimTooSmall { .. }) | Self::Fock(FockError::ComplexPotential) => 2,
            Self::Propagation(_) | Self::Fock(_) => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Acspi,
    Fock,
    AbsDiff,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Self::Acspi => "acspi",
            Self::Fock => "fock",
            Self::AbsDiff => "abs_diff",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub mean_q: f64,
    pub mean_q2: f64,
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub method: Method,
    pub samples: Vec<Sample>,
}

impl Series {
    pub fn mean_q(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.mean_q)
    }
}

pub fn write_csv<W: Write>(out: &mut W, series: &[&Series]) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for s in series {
        for r in &s.samples {
            writeln!(
                out,
                "{:.15e},{:.15e},{:.15e},{:.15e},{}",
                r.t,
                r.mean_q,
                r.mean_q2,
                r.norm,
                s.method.name()
            )?;
        }
    }
    Ok(())
}

pub fn csv_string(series: &[&Series]) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, series).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

fn acspi_sample(gram: &GramForm<f64>, state: &CsState<f64>) -> Result<Sample, PropagationError> {
    let m = gram.moments(state)?;
    Ok(Sample {
        t: state.time(),
        mean_q: m.mean_q,
        mean_q2: m.mean_q2,
        norm: m.norm,
    })
}

fn fock_sample(state: &FockState<f64>, params: &PhysicalParams<f64>) -> Sample {
    Sample {
        t: state.time(),
        mean_q: fock_expectation_q(state, params),
        mean_q2: fock_expectation_q2(state, params),
        norm: state.norm_sqr(),
    }
}

/// ACSPI time series sampled at step 0 and every `stride` steps.
#[allow(clippy::too_many_arguments)]
pub fn acspi_series(
    grid: &Arc<QuadratureGrid<f64>>,
    params: &PhysicalParams<f64>,
    potential: &PotentialSpec<f64>,
    alpha0: Complex64,
    t_total: f64,
    n_steps: usize,
    trunc: SymbolTruncation,
    options: &crate::propagator::PropagateOptions<f64>,
    stride: usize,
) -> Result<Series, PropagationError> {
    let (initial, _) = project_initial(grid, alpha0);
    let gram = GramForm::new(grid, params);
    let mut samples = vec![acspi_sample(&gram, &initial)?];
    let mut err = None;
    let mut k = 0usize;
    propagate(&initial, potential, t_total, n_steps, trunc, params, options, |s| {
        k += 1;
        if (k.is_multiple_of(stride) || k == n_steps) && err.is_none() {
            match acspi_sample(&gram, s) {
                Ok(x) => samples.push(x),
                Err(e) => err = Some(e),
            }
        }
    })?;
    match err {
        Some(e) => Err(e),
        None => Ok(Series {
            method: Method::Acspi,
            samples,
        }),
    }
}

/// Fock-oracle time series with the same sampling as [`acspi_series`].
pub fn oracle_series(
    params: &PhysicalParams<f64>,
    potential: &PotentialSpec<f64>,
    alpha0: Complex64,
    t_total: f64,
    n_steps: usize,
    dim: usize,
    stride: usize,
) -> Result<Series, FockError> {
    let initial = coherent_in_fock(alpha0, dim);
    let mut samples = vec![fock_sample(&initial, params)];
    let mut k = 0usize;
    evolve_oracle(&initial, potential, t_total, n_steps, params, |s| {
        k += 1;
        if k.is_multiple_of(stride) || k == n_steps {
            samples.push(fock_sample(s, params));
        }
    })?;
    Ok(Series {
        method: Method::Fock,
        samples,
    })
}

fn setup_acspi(s: &Setup) -> Result<Series, PropagationError> {
    acspi_series(
        &s.grid,
        &s.params,
        &s.potential,
        s.alpha0,
        s.t_total,
        s.n_steps,
        s.trunc,
        &s.options,
        s.stride,
    )
}

fn setup_oracle(s: &Setup) -> Result<Series, FockError> {
    oracle_series(&s.params, &s.potential, s.alpha0, s.t_total, s.n_steps, s.oracle_dim, s.stride)
}

pub fn run_propagate(cfg: &RunConfig) -> Result<Series, ExperimentError> {
    let s = cfg.setup()?;
    Ok(setup_acspi(&s)?)
}

pub fn run_oracle(cfg: &RunConfig) -> Result<Series, ExperimentError> {
    let s = cfg.setup()?;
    Ok(setup_oracle(&s)?)
}

/// Pointwise `|Δ|` of two series sampled at the same times. The norm
/// column of the result holds the norm difference.
pub fn abs_diff(a: &Series, b: &Series) -> Series {
    assert_eq!(a.samples.len(), b.samples.len(), "series sampled differently");
    let samples = a
        .samples
        .iter()
        .zip(&b.samples)
        .map(|(x, y)| {
            debug_assert!((x.t - y.t).abs() <= 1e-9 * x.t.abs().max(1.0));
            Sample {
                t: x.t,
                mean_q: (x.mean_q - y.mean_q).abs(),
                mean_q2: (x.mean_q2 - y.mean_q2).abs(),
                norm: (x.norm - y.norm).abs(),
            }
        })
        .collect();
    Series {
        method: Method::AbsDiff,
        samples,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareSummary {
    pub max_dev: f64,
    pub mean_dev: f64,
    pub acspi_seconds: f64,
    pub fock_seconds: f64,
}

impl std::fmt::Display for CompareSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "summary,max_dev={:.6e},mean_dev={:.6e},acspi_seconds={:.3},fock_seconds={:.3}",
            self.max_dev, self.mean_dev, self.acspi_seconds, self.fock_seconds
        )
    }
}

#[derive(Debug, Clone)]
pub struct CompareReport {
    pub acspi: Series,
    pub fock: Series,
    pub diff: Series,
    pub summary: CompareSummary,
}

impl CompareReport {
    pub fn csv(&self) -> String {
        csv_string(&[&self.acspi, &self.fock, &self.diff])
    }
}

/// Largest and mean `|Δ⟨Q⟩|` over the common samples.
pub fn q_deviation(a: &Series, b: &Series) -> (f64, f64) {
    let d = abs_diff(a, b);
    let max = d.mean_q().fold(0.0, f64::max);
    let mean = d.mean_q().sum::<f64>() / d.samples.len() as f64;
    (max, mean)
}

pub fn run_compare(cfg: &RunConfig) -> Result<CompareReport, ExperimentError> {
    let s = cfg.setup()?;
    let t0 = Instant::now();
    let acspi = setup_acspi(&s)?;
    let acspi_seconds = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let fock = setup_oracle(&s)?;
    let fock_seconds = t1.elapsed().as_secs_f64();
    let (max_dev, mean_dev) = q_deviation(&acspi, &fock);
    let diff = abs_diff(&acspi, &fock);
    Ok(CompareReport {
        acspi,
        fock,
        diff,
        summary: CompareSummary {
            max_dev,
            mean_dev,
            acspi_seconds,
            fock_seconds,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub axis: ConvergenceAxis,
    pub value: usize,
    pub max_dev: f64,
    /// `log₂(previous max_dev / max_dev)`; absent on the first row.
    pub order: Option<f64>,
    pub identity_residual: f64,
}

pub fn write_convergence_csv<W: Write>(out: &mut W, rows: &[ConvergenceRow]) -> io::Result<()> {
    writeln!(out, "{CONVERGENCE_HEADER}")?;
    for r in rows {
        let order = r.order.map_or_else(|| "nan".to_string(), |o| format!("{o:.15e}"));
        writeln!(
            out,
            "{},{},{:.15e},{},{:.15e}",
            r.axis.name(),
            r.value,
            r.max_dev,
            order,
            r.identity_residual
        )?;
    }
    Ok(())
}

/// Probe labels for the identity check: `α₀ + r·e^{iφ}` for
/// `r ∈ {0, 0.75, 1.5}` and eight angles.
pub fn identity_probes(alpha0: Complex64) -> Vec<Complex64> {
    let mut out = vec![alpha0];
    for r in [0.75, 1.5] {
        for k in 0..8 {
            out.push(alpha0 + Complex64::from_polar(r, k as f64 * std::f64::consts::FRAC_PI_4));
        }
    }
    out
}

/// Maximum `|Δ⟨Q⟩|` from the oracle while varying one numerical
/// parameter. Deviations are taken at `samples` equally spaced times.
pub fn run_convergence(cfg: &RunConfig, axis: Option<ConvergenceAxis>) -> Result<Vec<ConvergenceRow>, ExperimentError> {
    let s = cfg.setup()?;
    let conv = cfg
        .convergence
        .as_ref()
        .ok_or_else(|| ConfigError::Invalid("convergence section required".into()))?;
    let axis = axis.unwrap_or(conv.axis);
    let samples = conv.samples;
    let step_counts: Vec<usize> = match axis {
        ConvergenceAxis::NSteps => conv.values.clone(),
        _ => vec![s.n_steps; conv.values.len()],
    };
    if let Some(n) = step_counts.iter().find(|&&n| n % samples != 0) {
        return Err(ConfigError::Invalid(format!("n_steps {n} is not a multiple of convergence.samples {samples}")).into());
    }
    if axis == ConvergenceAxis::K && conv.values[0] == 0 {
        return Err(ConfigError::Invalid("k must be at least 1".into()).into());
    }
    let static_oracle = if s.potential.is_driven() {
        None
    } else {
        Some(oracle_series(&s.params, &s.potential, s.alpha0, s.t_total, samples, s.oracle_dim, 1)?)
    };
    let probes = identity_probes(s.alpha0);
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for (&value, &n_steps) in conv.values.iter().zip(&step_counts) {
        let grid = match axis {
            ConvergenceAxis::Grid => Arc::new(
                product_grid(value, value, 1.0, 1.0, Complex64::new(0.0, 0.0))
                    .map_err(|e| ConfigError::Invalid(format!("grid: {e}")))?,
            ),
            _ => s.grid.clone(),
        };
        let trunc = match axis {
            ConvergenceAxis::K => SymbolTruncation::new(value as u32).map_err(|e| ConfigError::Invalid(e.to_string()))?,
            _ => s.trunc,
        };
        let stride = n_steps / samples;
        let acspi = acspi_series(&grid, &s.params, &s.potential, s.alpha0, s.t_total, n_steps, trunc, &s.options, stride)?;
        let oracle = match &static_oracle {
            Some(o) => o.clone(),
            None => oracle_series(&s.params, &s.potential, s.alpha0, s.t_total, n_steps, s.oracle_dim, stride)?,
        };
        let (max_dev, _) = q_deviation(&acspi, &oracle);
        let order = rows.last().map(|r| (r.max_dev / max_dev).log2());
        rows.push(ConvergenceRow {
            axis,
            value,
            max_dev,
            order,
            identity_residual: identity_residual(&grid, &probes),
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub measured: f64,
    pub threshold: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.measured <= self.threshold
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub checks: Vec<Check>,
}

impl DiagnosticsReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }
}

impl std::fmt::Display for DiagnosticsReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {} measured={:.3e} threshold={:.1e}",
                if c.passed() { "PASS" } else { "FAIL" },
                c.name,
                c.measured,
                c.threshold
            )?;
        }
        Ok(())
    }
}

/// `max |∫ S_k ⟨n|α⟩⟨α|n'⟩ − ⟨n|Q^k|n'⟩| / max(|⟨n|Q^k|n'⟩|, 1)` over
/// `k ≤ k_max` and `n, n' ≤ n_max`.
pub fn symbol_reconstruction_error(
    params: &PhysicalParams<f64>,
    grid: &QuadratureGrid<f64>,
    k_max: usize,
    n_max: usize,
) -> f64 {
    let dim = n_max + k_max + 2;
    let nodes = grid.nodes();
    // ⟨n|α_j⟩ for every node
    let amps: Vec<Vec<Complex64>> = nodes
        .iter()
        .map(|&a| coherent_amplitudes(a, n_max + 1))
        .collect();
    let mut worst: f64 = 0.0;
    for k in 0..=k_max {
        let qk = PositionPolynomial::monomial(k, Complex::new(1.0, 0.0));
        let exact = position_matrix_polynomial(&qk, params, dim);
        let sym = position_symbol(&qk, params);
        let svals: Vec<Complex64> = nodes.iter().map(|&a| sym.eval(a)).collect();
        for n in 0..=n_max {
            for m in 0..=n_max {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..nodes.len() {
                    acc += svals[j] * amps[j][n] * amps[j][m].conj() * grid.weights()[j];
                }
                let e = exact[(n, m)];
                worst = worst.max((acc - e).norm() / e.norm().max(1.0));
            }
        }
    }
    worst
}

/// Fock matrix of the antinormal form of `p` against the direct matrix
/// polynomial, compared on the leading block where the latter is exact.
pub fn ordering_error(p: &PositionPolynomial<f64>, params: &PhysicalParams<f64>, dim: usize, block: usize) -> f64 {
    let a = fock_matrix(&position_to_antinormal(p, params), dim);
    let b = position_matrix_polynomial(p, params, dim);
    let mut worst: f64 = 0.0;
    for i in 0..block {
        for j in 0..block {
            worst = worst.max((a[(i, j)] - b[(i, j)]).norm() / b[(i, j)].norm().max(1.0));
        }
    }
    worst
}

pub fn run_diagnostics(cfg: &RunConfig) -> Result<DiagnosticsReport, ExperimentError> {
    let s = cfg.setup()?;
    let rec_grid = product_grid(64, 64, 1.0, 1.0, Complex64::new(0.0, 0.0)).expect("64-point rule");
    let h1 = s.potential.anharmonic_part(&s.params, 0.0);
    let mut ordering: f64 = 0.0;
    for k in 0..=8 {
        let qk = PositionPolynomial::monomial(k, Complex::new(1.0, 0.0));
        ordering = ordering.max(ordering_error(&qk, &s.params, 40, 28));
    }
    ordering = ordering.max(ordering_error(&h1, &s.params, 40, 28));
    let checks = vec![
        Check {
            name: "symbol_reconstruction",
            measured: symbol_reconstruction_error(&s.params, &rec_grid, 8, 12),
            threshold: RECONSTRUCTION_TOL,
        },
        Check {
            name: "grid_identity",
            measured: identity_residual(&s.grid, &identity_probes(s.alpha0)),
            threshold: IDENTITY_TOL,
        },
        Check {
            name: "ordering_vs_fock",
            measured: ordering,
            threshold: ORDERING_TOL,
        },
    ];
    Ok(DiagnosticsReport { checks })
}

/// Oracle response of a double well to one drive amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanPoint {
    pub amplitude: f64,
    /// `min_t ⟨Q⟩(t) / ⟨Q⟩(0)`; stays near 1 when transfer is suppressed.
    pub min_ratio: f64,
}

/// Scans drive amplitudes with the Fock oracle, starting every run from
/// the coherent state at the right well.
#[allow(clippy::too_many_arguments)]
pub fn scan_drive_amplitude(
    params: &PhysicalParams<f64>,
    q0: f64,
    frequency: f64,
    amplitudes: &[f64],
    horizon: f64,
    n_steps: usize,
    dim: usize,
) -> Result<Vec<ScanPoint>, FockError> {
    let alpha0 = Complex64::new(q0 / (2.0 * params.lambda()), 0.0);
    let initial = coherent_in_fock(alpha0, dim);
    let q_start = fock_expectation_q(&initial, params);
    amplitudes
        .iter()
        .map(|&amplitude| {
            let spec = double_well(params, q0, amplitude, frequency);
            let mut min_ratio: f64 = 1.0;
            evolve_oracle(&initial, &spec, horizon, n_steps, params, |s| {
                min_ratio = min_ratio.min(fock_expectation_q(s, params) / q_start);
            })?;
            Ok(ScanPoint { amplitude, min_ratio })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn harmonic_cfg(extra: &str) -> RunConfig {
        RunConfig::from_json(&format!(
            r#"{{
            "physical": {{ "hbar": 1.0, "mass": 1.0, "omega0": 1.0 }},
            "potential": {{ "type": "harmonic" }},
            "initial": {{ "alpha": [1.0, 0.0] }},
            "grid": {{ "n_re": 32, "n_im": 32 }},
            "stepping": {{ "t_total": 6.283185307179586, "n_steps": 100 }},
            "oracle": {{ "dim": 40 }},
            "output": {{ "stride": 5 }}{extra}
        }}"#
        ))
        .unwrap()
    }

    #[test]
    fn csv_layout() {
        let s = Series {
            method: Method::Fock,
            samples: vec![Sample {
                t: 0.5,
                mean_q: -1.0,
                mean_q2: 2.0,
                norm: 1.0,
            }],
        };
        let text = csv_string(&[&s]);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert_eq!(
            lines.next(),
            Some("5.000000000000000e-1,-1.000000000000000e0,2.000000000000000e0,1.000000000000000e0,fock")
        );
    }

    #[test]
    fn harmonic_propagate_and_oracle() {
        let cfg = harmonic_cfg("");
        let lam = 0.5f64.sqrt();
        let a = run_propagate(&cfg).unwrap();
        let f = run_oracle(&cfg).unwrap();
        assert_eq!(a.samples.len(), 21);
        for (x, y) in a.samples.iter().zip(&f.samples) {
            let want = 2.0 * lam * x.t.cos();
            assert!((x.mean_q - want).abs() < 1e-5);
            assert!((y.mean_q - want).abs() < 1e-8);
        }
    }

    #[test]
    fn compare_and_self_difference() {
        let cfg = harmonic_cfg("");
        let r = run_compare(&cfg).unwrap();
        assert!(r.summary.max_dev <= 1e-5);
        let (m, _) = q_deviation(&r.acspi, &r.acspi);
        assert_eq!(m, 0.0);
        assert!(r.summary.to_string().starts_with("summary,max_dev="));
        assert_eq!(r.csv().lines().count(), 1 + 3 * 21);
    }

    #[test]
    fn diagnostics_pass_and_undersized_grid_fails() {
        let cfg = harmonic_cfg("");
        let rep = run_diagnostics(&cfg).unwrap();
        assert!(rep.all_passed(), "{rep}");
        let mut small = cfg.clone();
        small.grid.as_mut().unwrap().n_re = 4;
        small.grid.as_mut().unwrap().n_im = 4;
        let rep = run_diagnostics(&small).unwrap();
        assert!(!rep.all_passed());
        assert!(!rep.checks.iter().find(|c| c.name == "grid_identity").unwrap().passed());
    }

    #[test]
    fn convergence_requires_section_and_divisibility() {
        let cfg = harmonic_cfg("");
        assert_eq!(run_convergence(&cfg, None).unwrap_err().exit_code(), 2);
        let cfg = harmonic_cfg(r#", "convergence": { "axis": "n_steps", "values": [30, 60], "samples": 7 }"#);
        assert_eq!(run_convergence(&cfg, None).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn grid_axis_residual_decreases() {
        let cfg = harmonic_cfg(r#", "convergence": { "axis": "grid", "values": [16, 32], "samples": 10 }"#);
        let rows = run_convergence(&cfg, None).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[1].identity_residual < rows[0].identity_residual);
        assert!(rows[0].order.is_none() && rows[1].order.is_some());
    }

    #[test]
    fn norm_floor_is_numerical_abort() {
        let mut cfg = harmonic_cfg("");
        cfg.grid.as_mut().unwrap().n_re = 4;
        cfg.grid.as_mut().unwrap().n_im = 4;
        cfg.initial.alpha = [3.0, 0.0];
        assert_eq!(run_propagate(&cfg).unwrap_err().exit_code(), 3);
    }
}
