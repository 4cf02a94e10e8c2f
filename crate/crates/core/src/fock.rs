//! Reference propagation in a truncated harmonic-oscillator basis.
//!
//! `H = ħω₀(a†a + ½) + H₁(t)` is assembled from analytic Fock matrix
//! elements, so every entry of the `dim × dim` block equals the matrix
//! element of the untruncated operator. For real potentials the block is
//! real symmetric and each step `e^{−iHΔt/ħ}` is applied through its
//! eigendecomposition.

use ndarray::Array2;
use num_complex::Complex;
use num_traits::Zero;
use thiserror::Error;

use crate::algebra::{fock_matrix, position_to_antinormal, PhysicalParams};
use crate::models::PotentialSpec;
use crate::scalar::{cis, Real};

/// Truncation loss of a coherent state above which a warning is logged.
pub const COHERENT_LOSS_WARNING: f64 = 1e-8;

/// Basis increment used for the splitting convergence check.
pub const CONVERGENCE_DIM_STEP: usize = 20;

/// Relative tolerance of the splitting convergence check.
pub const SPLITTING_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FockError {
    #[error("basis dimension {dim} too small, need at least {needed}")]
    DimTooSmall { dim: usize, needed: usize },
    #[error("potential has complex coefficients")]
    ComplexPotential,
    #[error("splitting not converged: dim {dim} vs dim {} differ by {rel_change:.3e} relative", dim + CONVERGENCE_DIM_STEP)]
    NotConverged { dim: usize, rel_change: f64 },
    #[error("tunneling splitting requires an undriven potential")]
    Driven,
    #[error("n_steps must be at least 1")]
    NoSteps,
    #[error("target period {target} not bracketed by Q0 in [{lo}, {hi}]")]
    NotBracketed { target: f64, lo: f64, hi: f64 },
}

/// Fock-basis coefficients `c_n`, `n < dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockState<T> {
    coeffs: Vec<Complex<T>>,
    time: T,
}

impl<T: Real> FockState<T> {
    pub fn new(coeffs: Vec<Complex<T>>, time: T) -> Self {
        assert!(!coeffs.is_empty(), "dim must be positive");
        Self { coeffs, time }
    }

    /// Number state `|n⟩`.
    pub fn number(n: usize, dim: usize) -> Self {
        assert!(n < dim, "number state outside basis");
        let mut coeffs = vec![Complex::zero(); dim];
        coeffs[n] = Complex::new(T::one(), T::zero());
        Self::new(coeffs, T::zero())
    }

    pub fn coeffs(&self) -> &[Complex<T>] {
        &self.coeffs
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn time(&self) -> T {
        self.time
    }

    pub fn norm_sqr(&self) -> T {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `⟨self|other⟩` over the common leading block.
    pub fn overlap(&self, other: &Self) -> Complex<T> {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .fold(Complex::zero(), |acc, (a, b)| acc + a.conj() * b)
    }

    /// `⟨n̂⟩`.
    pub fn mean_number(&self) -> T {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(n, c)| T::from_usize_lossy(n) * c.norm_sqr())
            .sum()
    }
}

/// `⟨n|α⟩ = e^{−|α|²/2} αⁿ/√n!` for `n < dim`.
pub fn coherent_amplitudes<T: Real>(alpha: Complex<T>, dim: usize) -> Vec<Complex<T>> {
    let mut coeffs = Vec::with_capacity(dim);
    let mut c = Complex::new((-alpha.norm_sqr() / T::lit(2.0)).exp(), T::zero());
    for n in 0..dim {
        if n > 0 {
            c = c * alpha / T::from_usize_lossy(n).sqrt();
        }
        coeffs.push(c);
    }
    coeffs
}

/// Truncated coherent state; warns when the basis misses more than
/// [`COHERENT_LOSS_WARNING`] of its norm.
pub fn coherent_in_fock<T: Real>(alpha: Complex<T>, dim: usize) -> FockState<T> {
    assert!(dim >= 1, "dim must be positive");
    let state = FockState::new(coherent_amplitudes(alpha, dim), T::zero());
    let loss = T::one() - state.norm_sqr();
    if loss > T::lit(COHERENT_LOSS_WARNING) {
        log::warn!("coherent state alpha = {alpha} loses {loss:.3e} of its norm in dim {dim}");
    }
    state
}

/// Real symmetric pieces of `H(t) = H_static + f(t)·Q`, row-major.
#[derive(Debug, Clone)]
pub struct FockHamiltonian<T> {
    dim: usize,
    static_part: Vec<T>,
    position: Vec<T>,
    spec: PotentialSpec<T>,
}

impl<T: Real> FockHamiltonian<T> {
    pub fn new(spec: &PotentialSpec<T>, params: &PhysicalParams<T>, dim: usize) -> Result<Self, FockError> {
        let h1 = spec.anharmonic_part(params, T::zero());
        let needed = h1.degree().max(1) + 2;
        if dim < needed {
            return Err(FockError::DimTooSmall { dim, needed });
        }
        if !h1.is_real() {
            return Err(FockError::ComplexPotential);
        }
        let m = fock_matrix(&position_to_antinormal(&h1, params), dim);
        let mut static_part: Vec<T> = m.iter().map(|z| z.re).collect();
        let hw = params.hbar() * params.omega0();
        for n in 0..dim {
            static_part[n * dim + n] += hw * (T::from_usize_lossy(n) + T::lit(0.5));
        }
        // exact symmetry despite rounding in the ordered form
        for i in 0..dim {
            for j in 0..i {
                let s = (static_part[i * dim + j] + static_part[j * dim + i]) / T::lit(2.0);
                static_part[i * dim + j] = s;
                static_part[j * dim + i] = s;
            }
        }
        let mut position = vec![T::zero(); dim * dim];
        for n in 1..dim {
            let v = params.lambda() * T::from_usize_lossy(n).sqrt();
            position[(n - 1) * dim + n] = v;
            position[n * dim + n - 1] = v;
        }
        Ok(Self {
            dim,
            static_part,
            position,
            spec: spec.clone(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `H(t)` as a real row-major matrix.
    pub fn real_at(&self, t: T) -> Vec<T> {
        let f = self.spec.drive_coefficient(t);
        if f == T::zero() {
            return self.static_part.clone();
        }
        self.static_part
            .iter()
            .zip(&self.position)
            .map(|(&h, &q)| h + f * q)
            .collect()
    }

    pub fn at(&self, t: T) -> Array2<Complex<T>> {
        let r = self.real_at(t);
        Array2::from_shape_fn((self.dim, self.dim), |(i, j)| Complex::new(r[i * self.dim + j], T::zero()))
    }
}

/// `ħω₀(a†a + ½) + H₁(t)` in the leading `dim` number states.
pub fn hamiltonian_matrix<T: Real>(
    spec: &PotentialSpec<T>,
    t: T,
    params: &PhysicalParams<T>,
    dim: usize,
) -> Result<Array2<Complex<T>>, FockError> {
    Ok(FockHamiltonian::new(spec, params, dim)?.at(t))
}

/// `e^{−iHΔt/ħ}` through `H = V diag(E) Vᵀ`.
struct SpectralStep<T> {
    dim: usize,
    vectors: Vec<T>,
    phases: Vec<Complex<T>>,
}

impl<T: Real> SpectralStep<T> {
    fn new(h: &[T], dim: usize, dt: T, hbar: T) -> Self {
        let (values, vectors) = T::symmetric_eigen(h, dim);
        let phases = values.iter().map(|&e| cis(-e * dt / hbar)).collect();
        Self { dim, vectors, phases }
    }

    fn apply(&self, c: &mut [Complex<T>], scratch: &mut [Complex<T>]) {
        let n = self.dim;
        for (k, s) in scratch.iter_mut().enumerate() {
            let mut acc: Complex<T> = Complex::zero();
            for (row, &x) in c.iter().enumerate() {
                acc += x * self.vectors[row * n + k];
            }
            *s = acc * self.phases[k];
        }
        for (row, out) in c.iter_mut().enumerate() {
            let v = &self.vectors[row * n..(row + 1) * n];
            *out = v.iter().zip(scratch.iter()).fold(Complex::zero(), |acc, (&a, &b)| acc + b * a);
        }
    }
}

/// Applies `n_steps` exact steps of `e^{−iH(t_mid)Δt/ħ}`. The drive is
/// sampled at each step midpoint; a static Hamiltonian is diagonalized once.
#[allow(clippy::too_many_arguments)]
pub fn evolve_oracle<T: Real, F: FnMut(&FockState<T>)>(
    initial: &FockState<T>,
    spec: &PotentialSpec<T>,
    t_total: T,
    n_steps: usize,
    params: &PhysicalParams<T>,
    mut observer: F,
) -> Result<FockState<T>, FockError> {
    if n_steps == 0 {
        return Err(FockError::NoSteps);
    }
    let dim = initial.dim();
    let ham = FockHamiltonian::new(spec, params, dim)?;
    let dt = t_total / T::from_usize_lossy(n_steps);
    let t0 = initial.time;
    let half = T::lit(0.5);
    let hbar = params.hbar();
    let driven = spec.is_driven();
    let mut stepper = SpectralStep::new(&ham.real_at(t0 + half * dt), dim, dt, hbar);
    let mut state = initial.clone();
    let mut scratch = vec![Complex::zero(); dim];
    for k in 0..n_steps {
        if driven && k > 0 {
            let t_mid = t0 + (T::from_usize_lossy(k) + half) * dt;
            stepper = SpectralStep::new(&ham.real_at(t_mid), dim, dt, hbar);
        }
        stepper.apply(&mut state.coeffs, &mut scratch);
        state.time = t0 + T::from_usize_lossy(k + 1) * dt;
        observer(&state);
    }
    Ok(state)
}

/// Lowest `count` eigenvalues of the static Hamiltonian in dimension `dim`.
pub fn lowest_levels<T: Real>(
    spec: &PotentialSpec<T>,
    params: &PhysicalParams<T>,
    dim: usize,
    count: usize,
) -> Result<Vec<T>, FockError> {
    let ham = FockHamiltonian::new(spec, params, dim)?;
    let (values, _) = T::symmetric_eigen(&ham.static_part, dim);
    Ok(values.into_iter().take(count).collect())
}

/// `ΔE = E₁ − E₀`, checked against the same quantity at `dim + 20`.
pub fn tunneling_splitting<T: Real>(
    spec: &PotentialSpec<T>,
    params: &PhysicalParams<T>,
    dim: usize,
) -> Result<T, FockError> {
    if spec.is_driven() {
        return Err(FockError::Driven);
    }
    let gap = |d: usize| -> Result<T, FockError> {
        let e = lowest_levels(spec, params, d, 2)?;
        Ok(e[1] - e[0])
    };
    let a = gap(dim)?;
    let b = gap(dim + CONVERGENCE_DIM_STEP)?;
    let rel = ((a - b) / b).abs();
    if rel.is_nan() || rel > T::lit(SPLITTING_TOL) {
        return Err(FockError::NotConverged {
            dim,
            rel_change: rel.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(b)
}

/// Full tunneling period `2πħ/ΔE`.
pub fn tunneling_period<T: Real>(
    spec: &PotentialSpec<T>,
    params: &PhysicalParams<T>,
    dim: usize,
) -> Result<T, FockError> {
    Ok(T::lit(2.0) * T::PI() * params.hbar() / tunneling_splitting(spec, params, dim)?)
}

/// Double-well separation `Q₀` whose tunneling period equals `target`,
/// by bisection on `[lo, hi]` (the period grows with `Q₀`).
pub fn q0_for_period<T: Real>(
    params: &PhysicalParams<T>,
    target: T,
    lo: T,
    hi: T,
    dim: usize,
) -> Result<T, FockError> {
    let period = |q0: T| tunneling_period(&crate::models::double_well(params, q0, T::zero(), T::zero()), params, dim);
    let (mut a, mut b) = (lo, hi);
    let (pa, pb) = (period(a)?, period(b)?);
    if !(pa <= target && target <= pb) {
        return Err(FockError::NotBracketed {
            target: target.to_f64().unwrap_or(f64::NAN),
            lo: lo.to_f64().unwrap_or(f64::NAN),
            hi: hi.to_f64().unwrap_or(f64::NAN),
        });
    }
    for _ in 0..200 {
        let mid = (a + b) / T::lit(2.0);
        if mid <= a || mid >= b {
            break;
        }
        if period(mid)? < target {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok((a + b) / T::lit(2.0))
}

/// `⟨Q⟩ = 2λ Σ √n Re(c*_{n−1} c_n) / ‖c‖²`.
pub fn fock_expectation_q<T: Real>(state: &FockState<T>, params: &PhysicalParams<T>) -> T {
    let c = &state.coeffs;
    let mut acc = T::zero();
    for n in 1..c.len() {
        acc += T::from_usize_lossy(n).sqrt() * (c[n - 1].conj() * c[n]).re;
    }
    T::lit(2.0) * params.lambda() * acc / state.norm_sqr()
}

/// `⟨Q²⟩ = ‖Q c‖² / ‖c‖²` with the tridiagonal position matrix. The last
/// basis state is missing its upward neighbor, as in the truncated basis.
pub fn fock_expectation_q2<T: Real>(state: &FockState<T>, params: &PhysicalParams<T>) -> T {
    let c = &state.coeffs;
    let dim = c.len();
    let mut acc = T::zero();
    for n in 0..dim {
        let mut qc: Complex<T> = Complex::zero();
        if n > 0 {
            qc += c[n - 1] * T::from_usize_lossy(n).sqrt();
        }
        if n + 1 < dim {
            qc += c[n + 1] * T::from_usize_lossy(n + 1).sqrt();
        }
        acc += qc.norm_sqr();
    }
    params.lambda() * params.lambda() * acc / state.norm_sqr()
}

/// `⟨H⟩` for a Hermitian matrix.
pub fn energy<T: Real>(state: &FockState<T>, h: &Array2<Complex<T>>) -> T {
    let c = &state.coeffs;
    let mut acc: Complex<T> = Complex::zero();
    for i in 0..c.len() {
        for j in 0..c.len() {
            acc += c[i].conj() * h[(i, j)] * c[j];
        }
    }
    acc.re / state.norm_sqr()
}
