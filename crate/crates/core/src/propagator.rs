//! Coherent-state path-integral propagation on a phase-space grid.
//!
//! A wave packet is carried as `v_j = √w_j c(α_j)` where
//! `|ψ⟩ = ∫ d²α/π |α⟩ c(α)`; initially `c(α) = ⟨α|ψ⟩`. One time step of
//! length `Δt` is the matrix-vector product `v' = P v` with
//!
//! ```text
//! P_ij = √(w_i w_j) · e^{−iω₀Δt/2} · ⟨α_i e^{iω₀Δt}|α_j⟩ · G₋(α_i e^{iω₀Δt/2}; Δt)
//! ```
//!
//! i.e. the symmetric split `e^{−iĤ₀Δt/2ħ} Ĝ e^{−iĤ₀Δt/2ħ}` with the exact
//! harmonic rotation of coherent labels and the kernel symbol `G₋` applied
//! on the rotated label. Only ω₀ enters the rotation; a drive frequency
//! never does.
//!
//! `P` factors as `diag(g) · R` where `R` depends on the grid, ω₀ and Δt
//! only. Time-dependent potentials therefore rebuild `g` every step and
//! share `R`.

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex;
use num_traits::Zero;
use thiserror::Error;

use crate::algebra::PhysicalParams;
use crate::kernel::{split, DenseComplex};
use crate::models::PotentialSpec;
use crate::quadrature::QuadratureGrid;
use crate::scalar::{cis, Real};
use crate::symbols::{build_g_position_symbol, PhaseSpaceFunction, SymbolError, SymbolTruncation, DEFAULT_DEGREE_CAP};

/// Default lower bound on the norm estimate before a run is aborted.
pub const DEFAULT_NORM_FLOOR: f64 = 0.5;

/// Projections with a smaller norm estimate raise a coverage diagnostic.
pub const PROJECTION_NORM_WARNING: f64 = 0.99;

/// Relative size of the imaginary part tolerated in real observables.
pub const IMAGINARY_RESIDUE_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropagationError {
    #[error("state and step matrix live on different grids")]
    GridMismatch,
    #[error("norm estimate {norm:.6e} fell below floor {floor} at t = {time}; the packet left the grid")]
    NormFloor { time: f64, norm: f64, floor: f64 },
    #[error("observable undefined for a state with zero norm")]
    ZeroNorm,
    #[error("observable has relative imaginary residue {0:.3e}")]
    ImaginaryResidue(f64),
    #[error("n_steps must be at least 1")]
    NoSteps,
    #[error(transparent)]
    Symbol(#[from] SymbolError),
}

/// `⟨α|β⟩ = exp(−|α|²/2 − |β|²/2 + α*β)`.
#[inline]
pub fn coherent_overlap<T: Real>(alpha: Complex<T>, beta: Complex<T>) -> Complex<T> {
    let half = T::lit(0.5);
    (alpha.conj() * beta - Complex::new(half * (alpha.norm_sqr() + beta.norm_sqr()), T::zero())).exp()
}

/// Discretized wave packet on a quadrature grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CsState<T> {
    v: Vec<Complex<T>>,
    grid: Arc<QuadratureGrid<T>>,
    time: T,
}

impl<T: Real> CsState<T> {
    pub fn new(v: Vec<Complex<T>>, grid: Arc<QuadratureGrid<T>>, time: T) -> Self {
        assert_eq!(v.len(), grid.len(), "state length must equal grid size");
        Self { v, grid, time }
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.v
    }

    pub fn grid(&self) -> &Arc<QuadratureGrid<T>> {
        &self.grid
    }

    pub fn time(&self) -> T {
        self.time
    }

    /// Multiplies every amplitude by a global phase factor.
    pub fn with_global_factor(&self, z: Complex<T>) -> Self {
        Self::new(self.v.iter().map(|&x| x * z).collect(), self.grid.clone(), self.time)
    }
}

/// Diagnostic raised when the initial packet is not well covered by the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowCoverage<T> {
    pub norm: T,
}

/// `v_j = √w_j ⟨α_j|α₀⟩`, time 0.
pub fn project_initial<T: Real>(
    grid: &Arc<QuadratureGrid<T>>,
    alpha0: Complex<T>,
) -> (CsState<T>, Option<LowCoverage<T>>) {
    let v = grid
        .nodes()
        .iter()
        .zip(grid.sqrt_weights())
        .map(|(&a, &sw)| coherent_overlap(a, alpha0) * sw)
        .collect();
    let state = CsState::new(v, grid.clone(), T::zero());
    let norm = norm_estimate(&state);
    let warning = if norm < T::lit(PROJECTION_NORM_WARNING) {
        log::warn!(
            "initial state alpha0 = {alpha0} poorly covered by grid: norm estimate {norm:.4e}"
        );
        Some(LowCoverage { norm })
    } else {
        None
    };
    (state, warning)
}

/// Grid-dependent part `R_ij = √(w_i w_j) e^{−iω₀Δt/2} ⟨α_i e^{iω₀Δt}|α_j⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationKernel<T> {
    matrix: DenseComplex<T>,
    grid: Arc<QuadratureGrid<T>>,
    dt: T,
    omega0: T,
}

impl<T: Real> RotationKernel<T> {
    pub fn new(grid: &Arc<QuadratureGrid<T>>, dt: T, params: &PhysicalParams<T>) -> Self {
        let omega0 = params.omega0();
        let phase = cis(-omega0 * dt / T::lit(2.0));
        let rot = cis(omega0 * dt);
        let nodes = grid.nodes();
        let sw = grid.sqrt_weights();
        let matrix = DenseComplex::from_fn(grid.len(), |i, j| {
            coherent_overlap(nodes[i] * rot, nodes[j]) * phase * (sw[i] * sw[j])
        });
        Self {
            matrix,
            grid: grid.clone(),
            dt,
            omega0,
        }
    }

    pub fn dt(&self) -> T {
        self.dt
    }
}

/// One Trotter step `P = diag(g)·R` on a fixed grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StepMatrix<T> {
    rotation: Arc<RotationKernel<T>>,
    kernel: Vec<Complex<T>>,
    built_for_time: T,
}

impl<T: Real> StepMatrix<T> {
    /// Combines a shared rotation with the kernel symbol evaluated at the
    /// half-rotated labels `α_i e^{iω₀Δt/2}`.
    pub fn from_rotation<S: PhaseSpaceFunction<T>>(
        rotation: Arc<RotationKernel<T>>,
        g_sym: &S,
        built_for_time: T,
    ) -> Self {
        let half = cis(rotation.omega0 * rotation.dt / T::lit(2.0));
        let kernel = rotation
            .grid
            .nodes()
            .iter()
            .map(|&a| g_sym.eval(a * half))
            .collect();
        Self {
            rotation,
            kernel,
            built_for_time,
        }
    }

    /// Same rotation, new kernel symbol.
    pub fn rekernel<S: PhaseSpaceFunction<T>>(&self, g_sym: &S, built_for_time: T) -> Self {
        Self::from_rotation(self.rotation.clone(), g_sym, built_for_time)
    }

    pub fn dim(&self) -> usize {
        self.kernel.len()
    }

    pub fn dt(&self) -> T {
        self.rotation.dt
    }

    pub fn built_for_time(&self) -> T {
        self.built_for_time
    }

    pub fn grid(&self) -> &Arc<QuadratureGrid<T>> {
        &self.rotation.grid
    }

    /// Kernel values `G₋(α_i e^{iω₀Δt/2})`.
    pub fn kernel_values(&self) -> &[Complex<T>] {
        &self.kernel
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex<T> {
        self.kernel[i] * self.rotation.matrix.get(i, j)
    }

    /// Materializes `P` as a dense matrix.
    pub fn dense(&self) -> Array2<Complex<T>> {
        let n = self.dim();
        Array2::from_shape_fn((n, n), |(i, j)| self.entry(i, j))
    }

    fn apply_into(&self, v: &[Complex<T>], out: &mut [Complex<T>]) {
        let (re, im) = split(v);
        self.rotation.matrix.matvec_split(&re, &im, out);
        for (o, g) in out.iter_mut().zip(&self.kernel) {
            *o *= *g;
        }
    }
}

/// Assembles `P` for a kernel symbol built for the same `dt`.
pub fn build_step_matrix<T: Real, S: PhaseSpaceFunction<T>>(
    grid: &Arc<QuadratureGrid<T>>,
    g_sym: &S,
    dt: T,
    params: &PhysicalParams<T>,
) -> StepMatrix<T> {
    StepMatrix::from_rotation(Arc::new(RotationKernel::new(grid, dt, params)), g_sym, T::zero())
}

fn same_grid<T: Real>(a: &Arc<QuadratureGrid<T>>, b: &Arc<QuadratureGrid<T>>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

/// `v' = P v`, time advanced by `Δt`.
pub fn step<T: Real>(state: &CsState<T>, m: &StepMatrix<T>) -> Result<CsState<T>, PropagationError> {
    if !same_grid(&state.grid, m.grid()) {
        return Err(PropagationError::GridMismatch);
    }
    let mut out = vec![Complex::zero(); state.v.len()];
    m.apply_into(&state.v, &mut out);
    Ok(CsState::new(out, state.grid.clone(), state.time + m.dt()))
}

fn gram_entry<T: Real>(grid: &QuadratureGrid<T>, i: usize, j: usize) -> Complex<T> {
    let sw = grid.sqrt_weights();
    coherent_overlap(grid.nodes()[i], grid.nodes()[j]) * (sw[i] * sw[j])
}

/// `⟨ψ|ψ⟩ ≈ Σ_ij v_i* √(w_i w_j) ⟨α_i|α_j⟩ v_j`.
pub fn norm_estimate<T: Real>(state: &CsState<T>) -> T {
    let grid = &state.grid;
    let v = &state.v;
    let mut acc: Complex<T> = Complex::zero();
    for i in 0..v.len() {
        let mut row = Complex::zero();
        for (j, vj) in v.iter().enumerate() {
            row += gram_entry(grid, i, j) * vj;
        }
        acc += v[i].conj() * row;
    }
    if acc.re < T::zero() {
        T::zero()
    } else {
        acc.re
    }
}

fn real_part_checked<T: Real>(z: Complex<T>) -> Result<T, PropagationError> {
    let scale = z.norm().max(T::epsilon());
    let residue = z.im.abs() / scale;
    if residue > T::lit(IMAGINARY_RESIDUE_TOL) && z.im.abs() > T::epsilon() * T::lit(1e4) {
        return Err(PropagationError::ImaginaryResidue(residue.to_f64().unwrap_or(f64::NAN)));
    }
    Ok(z.re)
}

/// `⟨Q⟩` from `⟨α_i|Q̂|α_j⟩ = λ(α_i* + α_j)⟨α_i|α_j⟩`, normalized by the norm estimate.
pub fn expectation_q<T: Real>(state: &CsState<T>, params: &PhysicalParams<T>) -> Result<T, PropagationError> {
    let grid = &state.grid;
    let nodes = grid.nodes();
    let v = &state.v;
    let mut num: Complex<T> = Complex::zero();
    let mut den: Complex<T> = Complex::zero();
    for i in 0..v.len() {
        for j in 0..v.len() {
            let g = gram_entry(grid, i, j) * v[j] * v[i].conj();
            den += g;
            num += g * (nodes[i].conj() + nodes[j]);
        }
    }
    if den.re <= T::zero() {
        return Err(PropagationError::ZeroNorm);
    }
    real_part_checked(num * params.lambda() / den.re)
}

/// `⟨Q²⟩` from `⟨α_i|Q̂²|α_j⟩ = λ²(α_i*² + α_j² + 2α_i*α_j + 1)⟨α_i|α_j⟩`.
pub fn expectation_q2<T: Real>(state: &CsState<T>, params: &PhysicalParams<T>) -> Result<T, PropagationError> {
    let grid = &state.grid;
    let nodes = grid.nodes();
    let v = &state.v;
    let one = Complex::new(T::one(), T::zero());
    let two = T::lit(2.0);
    let mut num: Complex<T> = Complex::zero();
    let mut den: Complex<T> = Complex::zero();
    for i in 0..v.len() {
        let ai = nodes[i].conj();
        for j in 0..v.len() {
            let aj = nodes[j];
            let g = gram_entry(grid, i, j) * v[j] * v[i].conj();
            den += g;
            num += g * (ai * ai + aj * aj + ai * aj * two + one);
        }
    }
    if den.re <= T::zero() {
        return Err(PropagationError::ZeroNorm);
    }
    let l2 = params.lambda() * params.lambda();
    real_part_checked(num * l2 / den.re)
}

/// Observables of one state: norm estimate, ⟨Q⟩ and ⟨Q²⟩.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments<T> {
    pub norm: T,
    pub mean_q: T,
    pub mean_q2: T,
}

/// Cached Gram matrix `Γ_ij = √(w_i w_j)⟨α_i|α_j⟩` for repeated observable
/// evaluation in O(N²) without transcendental calls.
#[derive(Debug, Clone)]
pub struct GramForm<T> {
    gram: DenseComplex<T>,
    grid: Arc<QuadratureGrid<T>>,
    lambda: T,
}

impl<T: Real> GramForm<T> {
    pub fn new(grid: &Arc<QuadratureGrid<T>>, params: &PhysicalParams<T>) -> Self {
        let gram = DenseComplex::from_fn(grid.len(), |i, j| gram_entry(grid, i, j));
        Self {
            gram,
            grid: grid.clone(),
            lambda: params.lambda(),
        }
    }

    pub fn norm(&self, state: &CsState<T>) -> T {
        let mut gv = vec![Complex::zero(); state.v.len()];
        self.gram.matvec(&state.v, &mut gv);
        // clamp roundoff negatives but keep NaN visible
        let n = dot(&state.v, &gv).re;
        if n < T::zero() {
            T::zero()
        } else {
            n
        }
    }

    /// With `u = αv`, `s = α²v`:
    /// `⟨Q⟩ ∝ 2λ Re(u†Γv)` and `⟨Q²⟩ ∝ λ²(2Re(s†Γv) + 2u†Γu + v†Γv)`.
    pub fn moments(&self, state: &CsState<T>) -> Result<Moments<T>, PropagationError> {
        if !same_grid(&self.grid, &state.grid) {
            return Err(PropagationError::GridMismatch);
        }
        let nodes = self.grid.nodes();
        let v = &state.v;
        let u: Vec<Complex<T>> = v.iter().zip(nodes).map(|(&x, &a)| x * a).collect();
        let s: Vec<Complex<T>> = u.iter().zip(nodes).map(|(&x, &a)| x * a).collect();
        let n = v.len();
        let mut gv = vec![Complex::zero(); n];
        let mut gu = vec![Complex::zero(); n];
        self.gram.matvec(v, &mut gv);
        self.gram.matvec(&u, &mut gu);
        let norm = dot(v, &gv).re;
        if norm <= T::zero() {
            return Err(PropagationError::ZeroNorm);
        }
        let two = T::lit(2.0);
        let mean_q = two * self.lambda * dot(&u, &gv).re / norm;
        let q2 = (dot(&s, &gv).re * two + dot(&u, &gu).re * two + norm) * self.lambda * self.lambda / norm;
        Ok(Moments {
            norm,
            mean_q,
            mean_q2: q2,
        })
    }
}

fn dot<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    a.iter().zip(b).fold(Complex::zero(), |acc, (&x, &y)| acc + x.conj() * y)
}

/// Tunables of [`propagate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagateOptions<T> {
    pub degree_cap: usize,
    pub norm_floor: T,
    /// The norm floor is tested every this many steps (and after the last).
    pub norm_check_every: usize,
}

impl<T: Real> Default for PropagateOptions<T> {
    fn default() -> Self {
        Self {
            degree_cap: DEFAULT_DEGREE_CAP,
            norm_floor: T::lit(DEFAULT_NORM_FLOOR),
            norm_check_every: 64,
        }
    }
}

/// Applies `n_steps` steps of `Δt = t_total / n_steps`.
///
/// A static potential builds one step matrix and reuses it. With an active
/// drive, `H₁` is evaluated at each step midpoint and the kernel symbol is
/// rebuilt before the step. `observer` sees the state after every step.
#[allow(clippy::too_many_arguments)]
pub fn propagate<T: Real, F: FnMut(&CsState<T>)>(
    initial: &CsState<T>,
    spec: &PotentialSpec<T>,
    t_total: T,
    n_steps: usize,
    trunc: SymbolTruncation,
    params: &PhysicalParams<T>,
    options: &PropagateOptions<T>,
    mut observer: F,
) -> Result<CsState<T>, PropagationError> {
    if n_steps == 0 {
        return Err(PropagationError::NoSteps);
    }
    let dt = t_total / T::from_usize_lossy(n_steps);
    let grid = initial.grid.clone();
    let rotation = Arc::new(RotationKernel::new(&grid, dt, params));
    let gram = GramForm::new(&grid, params);
    let t0 = initial.time;
    let half = T::lit(0.5);
    let driven = spec.is_driven();
    let build = |t_mid: T| -> Result<StepMatrix<T>, PropagationError> {
        let h1 = spec.anharmonic_part(params, t_mid);
        let g = build_g_position_symbol(&h1, dt, trunc, params, options.degree_cap)?;
        Ok(StepMatrix::from_rotation(rotation.clone(), &g, t_mid))
    };
    let mut matrix = build(t0 + half * dt)?;
    let mut state = initial.clone();
    let mut scratch = vec![Complex::zero(); grid.len()];
    let check_every = options.norm_check_every.max(1);
    for k in 0..n_steps {
        if driven && k > 0 {
            matrix = build(t0 + (T::from_usize_lossy(k) + half) * dt)?;
        }
        matrix.apply_into(&state.v, &mut scratch);
        std::mem::swap(&mut state.v, &mut scratch);
        state.time = t0 + T::from_usize_lossy(k + 1) * dt;
        if (k + 1) % check_every == 0 || k + 1 == n_steps {
            let norm = gram.norm(&state);
            if norm.is_nan() || norm < options.norm_floor {
                return Err(PropagationError::NormFloor {
                    time: state.time.to_f64().unwrap_or(f64::NAN),
                    norm: norm.to_f64().unwrap_or(f64::NAN),
                    floor: options.norm_floor.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        observer(&state);
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::PositionPolynomial;
    use crate::models::double_well;
    use crate::quadrature::product_grid;
    use crate::symbols::{build_g_symbol, SymbolPolynomial};
    use std::f64::consts::PI;

    type C = Complex<f64>;

    fn unit_grid(n: usize) -> Arc<QuadratureGrid<f64>> {
        Arc::new(product_grid(n, n, 1.0, 1.0, C::new(0.0, 0.0)).unwrap())
    }

    fn one() -> SymbolPolynomial<f64> {
        SymbolPolynomial::constant(C::new(1.0, 0.0))
    }

    /// Fock-series oracle for ⟨α|β⟩.
    fn overlap_series(a: C, b: C, dim: usize) -> C {
        let mut ca = (-a.norm_sqr() / 2.0).exp();
        let mut cb = (-b.norm_sqr() / 2.0).exp();
        let mut ac = C::new(ca, 0.0);
        let mut bc = C::new(cb, 0.0);
        let mut sum = ac.conj() * bc;
        for n in 1..dim {
            let s = (n as f64).sqrt();
            ac = ac * a / s;
            bc = bc * b / s;
            sum += ac.conj() * bc;
            ca = 0.0;
            cb = 0.0;
        }
        let _ = (ca, cb);
        sum
    }

    #[test]
    fn overlap_values() {
        for a in [C::new(0.3, -1.2), C::new(2.0, 0.5), C::new(0.0, 0.0)] {
            assert!((coherent_overlap(a, a) - C::new(1.0, 0.0)).norm() < 1e-15);
        }
        let v = coherent_overlap(C::new(0.0, 0.0), C::new(1.0, 0.0));
        assert!((v.re - 0.6065306597).abs() < 1e-10 && v.im.abs() < 1e-16);
        assert!((v - overlap_series(C::new(0.0, 0.0), C::new(1.0, 0.0), 40)).norm() < 1e-14);
        let w = coherent_overlap(C::new(1.0, 0.0), C::new(0.0, 1.0));
        assert!((w - C::new(0.1987661, 0.3095599)).norm() < 1e-7);
        assert!((w - overlap_series(C::new(1.0, 0.0), C::new(0.0, 1.0), 40)).norm() < 1e-14);
        assert!(coherent_overlap(C::new(3.0, 1.0), C::new(-1.0, 2.0)).norm() <= 1.0);
    }

    #[test]
    fn projection_norms() {
        let grid = unit_grid(24);
        let (s, warn) = project_initial(&grid, C::new(0.0, 0.0));
        assert!((norm_estimate(&s) - 1.0).abs() < 1e-6);
        assert!(warn.is_none());
        let (far, warn) = project_initial(&grid, C::new(30.0, 0.0));
        assert!(norm_estimate(&far) < 1e-6);
        assert!(warn.is_some());
        let single = Arc::new(product_grid(1, 1, 1.0, 1.0, C::new(0.0, 0.0)).unwrap());
        let (s1, _) = project_initial(&single, C::new(0.0, 0.0));
        assert!((s1.amplitudes()[0] - C::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn norm_trivia() {
        let grid = unit_grid(8);
        let zero = CsState::new(vec![C::new(0.0, 0.0); grid.len()], grid.clone(), 0.0);
        assert_eq!(norm_estimate(&zero), 0.0);
        assert_eq!(expectation_q(&zero, &PhysicalParams::reduced()), Err(PropagationError::ZeroNorm));
        let (s, _) = project_initial(&grid, C::new(0.7, 0.2));
        let rotated = s.with_global_factor(C::from_polar(1.0, 1.234));
        assert!((norm_estimate(&s) - norm_estimate(&rotated)).abs() < 1e-13);
    }

    #[test]
    fn step_matrix_gram_form_at_zero_dt() {
        let grid = unit_grid(6);
        let params = PhysicalParams::reduced();
        let m = build_step_matrix(&grid, &one(), 0.0, &params);
        assert_eq!(m.dim(), grid.len());
        let sw = grid.sqrt_weights();
        for i in 0..grid.len() {
            for j in 0..grid.len() {
                let want = coherent_overlap(grid.nodes()[i], grid.nodes()[j]) * (sw[i] * sw[j]);
                assert!((m.entry(i, j) - want).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn step_matrix_literal_formula() {
        let grid = unit_grid(5);
        let params = PhysicalParams::new(1.0, 1.0, 1.3).unwrap();
        let dt = 0.07;
        let h1 = PositionPolynomial::from_real(&[0.1, 0.0, -0.3, 0.0, 0.02]);
        let g = build_g_symbol(&h1, dt, SymbolTruncation::new(4).unwrap(), &params, 64).unwrap();
        let m = build_step_matrix(&grid, &g, dt, &params);
        let w = grid.weights();
        let a = grid.nodes();
        let om = params.omega0();
        for i in [0, 7, 24] {
            for j in [0, 3, 12, 24] {
                let want = C::from_polar((w[i] * w[j]).sqrt(), -om * dt / 2.0)
                    * coherent_overlap(a[i] * C::from_polar(1.0, om * dt), a[j])
                    * g.eval(a[i] * C::from_polar(1.0, om * dt / 2.0));
                assert!((m.entry(i, j) - want).norm() < 1e-14 * want.norm().max(1e-300) + 1e-300);
            }
        }
        assert_eq!(m.dense().dim(), (25, 25));
    }

    #[test]
    fn harmonic_one_step_rotates_label() {
        let grid = unit_grid(32);
        let params = PhysicalParams::reduced();
        let dt = 0.1;
        let alpha0 = C::new(1.2, -0.4);
        let m = build_step_matrix(&grid, &one(), dt, &params);
        let (s, _) = project_initial(&grid, alpha0);
        let after = step(&s, &m).unwrap();
        let (want, _) = project_initial(&grid, alpha0 * C::from_polar(1.0, -dt));
        let want = want.with_global_factor(C::from_polar(1.0, -dt / 2.0));
        let err = after
            .amplitudes()
            .iter()
            .zip(want.amplitudes())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err <= 1e-6, "{err}");
        assert!((after.time() - dt).abs() < 1e-16);
    }

    #[test]
    fn identity_step_keeps_state() {
        // single node at the origin, g = 1, dt = 0: the weight √π·√π/π is 1
        // up to rounding
        let grid = Arc::new(product_grid(1, 1, 1.0, 1.0, C::new(0.0, 0.0)).unwrap());
        let m = build_step_matrix(&grid, &one(), 0.0, &PhysicalParams::reduced());
        let s = CsState::new(vec![C::new(0.3, 0.4)], grid.clone(), 2.0);
        let out = step(&s, &m).unwrap();
        assert!((out.amplitudes()[0] - s.amplitudes()[0]).norm() < 1e-15);
        assert_eq!(out.time(), 2.0);
    }

    #[test]
    fn step_rejects_foreign_grid() {
        let g1 = unit_grid(4);
        let g2 = unit_grid(5);
        let m = build_step_matrix(&g1, &one(), 0.1, &PhysicalParams::reduced());
        let (s, _) = project_initial(&g2, C::new(0.0, 0.0));
        assert_eq!(step(&s, &m), Err(PropagationError::GridMismatch));
    }

    #[test]
    fn observables_closed_forms() {
        let grid = unit_grid(32);
        let params = PhysicalParams::reduced();
        let lam = params.lambda();
        let (s, _) = project_initial(&grid, C::new(2.0, 0.0));
        let q = expectation_q(&s, &params).unwrap();
        assert!((q - 2.0 * 2f64.sqrt()).abs() < 1e-8, "{q}");
        let q2 = expectation_q2(&s, &params).unwrap();
        assert!((q2 - 8.5).abs() < 1e-7, "{q2}");
        let (vac, _) = project_initial(&grid, C::new(0.0, 0.0));
        assert!(expectation_q(&vac, &params).unwrap().abs() < 1e-12);
        assert!((expectation_q2(&vac, &params).unwrap() - lam * lam).abs() < 1e-8);
    }

    #[test]
    fn gram_form_matches_direct_sums() {
        let grid = unit_grid(12);
        let params = PhysicalParams::new(1.0, 2.0, 0.7).unwrap();
        let (s, _) = project_initial(&grid, C::new(0.8, -0.6));
        let m = build_step_matrix(&grid, &one(), 0.3, &params);
        let s = step(&s, &m).unwrap();
        let gf = GramForm::new(&grid, &params);
        let mo = gf.moments(&s).unwrap();
        assert!((mo.norm - norm_estimate(&s)).abs() < 1e-12);
        assert!((mo.mean_q - expectation_q(&s, &params).unwrap()).abs() < 1e-11);
        assert!((mo.mean_q2 - expectation_q2(&s, &params).unwrap()).abs() < 1e-11);
        assert!(mo.mean_q2 >= mo.mean_q * mo.mean_q);
    }

    #[test]
    fn harmonic_propagation_follows_cosine() {
        let grid = unit_grid(32);
        let params = PhysicalParams::reduced();
        let spec = crate::models::PotentialSpec::harmonic(&params);
        let (s, _) = project_initial(&grid, C::new(2.0, 0.0));
        let gf = GramForm::new(&grid, &params);
        let mut worst: f64 = 0.0;
        propagate(
            &s,
            &spec,
            PI,
            50,
            SymbolTruncation::default(),
            &params,
            &PropagateOptions::default(),
            |st| {
                let m = gf.moments(st).unwrap();
                worst = worst.max((m.mean_q - 2.0 * 2f64.sqrt() * st.time().cos()).abs());
            },
        )
        .unwrap();
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn norm_floor_aborts() {
        // 4x4 grid cannot hold a packet that rotates out to |alpha| = 3.
        let grid = unit_grid(4);
        let params = PhysicalParams::reduced();
        let spec = crate::models::PotentialSpec::harmonic(&params);
        let (s, _) = project_initial(&grid, C::new(3.0, 0.0));
        let err = propagate(
            &s,
            &spec,
            1.0,
            10,
            SymbolTruncation::default(),
            &params,
            &PropagateOptions::default(),
            |_| {},
        )
        .unwrap_err();
        assert!(matches!(err, PropagationError::NormFloor { .. }));
    }

    #[test]
    fn single_step_propagate_equals_step() {
        let grid = unit_grid(10);
        let params = PhysicalParams::reduced();
        let spec = double_well(&params, 2.0, 0.0, 0.0);
        let trunc = SymbolTruncation::new(4).unwrap();
        let dt = 0.05;
        let (s, _) = project_initial(&grid, C::new(1.0, 0.0));
        let via = propagate(&s, &spec, dt, 1, trunc, &params, &PropagateOptions::default(), |_| {}).unwrap();
        let g = build_g_symbol(&spec.anharmonic_part(&params, 0.0), dt, trunc, &params, 64).unwrap();
        let direct = step(&s, &build_step_matrix(&grid, &g, dt, &params)).unwrap();
        for (a, b) in via.amplitudes().iter().zip(direct.amplitudes()) {
            assert!((a - b).norm() < 1e-12 * b.norm().max(1e-12));
        }
    }

    #[test]
    fn zero_amplitude_drive_matches_static() {
        let grid = unit_grid(10);
        let params = PhysicalParams::reduced();
        let trunc = SymbolTruncation::new(4).unwrap();
        let (s, _) = project_initial(&grid, C::new(1.0, 0.0));
        let a = double_well(&params, 2.0, 0.0, 0.3);
        let b = double_well(&params, 2.0, 0.0, 0.3).with_drive(None);
        let ra = propagate(&s, &a, 0.5, 5, trunc, &params, &PropagateOptions::default(), |_| {}).unwrap();
        let rb = propagate(&s, &b, 0.5, 5, trunc, &params, &PropagateOptions::default(), |_| {}).unwrap();
        assert_eq!(ra, rb);
    }
}
