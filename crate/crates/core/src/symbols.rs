//! Antinormal symbols `A₋(α)` of operators, defined through
//! `Â = ∫ d²α/π |α⟩⟨α| A₋(α)`.
//!
//! For an antinormal-ordered operator the symbol is read off directly
//! (`a → α`, `a† → α*`). Every operator used by the propagator is a
//! polynomial in `Q̂` alone, so its symbol depends on `α` only through
//! `q = λ(α + α*)`; [`PositionSymbol`] keeps that univariate form for fast
//! evaluation on quadrature nodes.

use std::collections::BTreeMap;

use num_complex::Complex;
use num_traits::Zero;
use thiserror::Error;

use crate::algebra::{LadderPolynomial, PhysicalParams, PositionPolynomial};
use crate::scalar::{imag, Real};

/// Default bound on the total degree of the kernel symbol.
pub const DEFAULT_DEGREE_CAP: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SymbolError {
    #[error("truncation order K must be at least 1, got {0}")]
    InvalidTruncation(u32),
    #[error("kernel degree {degree} (= deg H1 {h1_degree} x K {k}) exceeds cap {cap}")]
    DegreeCap {
        degree: usize,
        h1_degree: usize,
        k: u32,
        cap: usize,
    },
    #[error("time step must be finite, got {0}")]
    NonFiniteStep(f64),
}

/// Anything that can be evaluated as a function of a phase-space label α.
pub trait PhaseSpaceFunction<T: Real>: Sync {
    fn eval(&self, alpha: Complex<T>) -> Complex<T>;
}

/// `Σ s_mn α^m (α*)^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolPolynomial<T> {
    terms: BTreeMap<(u32, u32), Complex<T>>,
}

impl<T: Real> Default for SymbolPolynomial<T> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<T: Real> SymbolPolynomial<T> {
    pub fn zero() -> Self {
        Self {
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(c: Complex<T>) -> Self {
        let mut s = Self::zero();
        s.add_term(0, 0, c);
        s
    }

    pub fn add_term(&mut self, m: u32, n: u32, c: Complex<T>) {
        let entry = self.terms.entry((m, n)).or_insert_with(Complex::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&(m, n));
        }
    }

    pub fn coeff(&self, m: u32, n: u32) -> Complex<T> {
        self.terms.get(&(m, n)).copied().unwrap_or_else(Complex::zero)
    }

    pub fn terms(&self) -> impl Iterator<Item = ((u32, u32), Complex<T>)> + '_ {
        self.terms.iter().map(|(&k, &v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Maximum total exponent m + n.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|&(m, n)| m + n).max().unwrap_or(0)
    }

    /// Largest coefficient-wise distance to `other`.
    pub fn max_coeff_diff(&self, other: &Self) -> T {
        let mut d = T::zero();
        for (&k, &v) in &self.terms {
            d = d.max((v - other.coeff(k.0, k.1)).norm());
        }
        for (&k, &v) in &other.terms {
            if !self.terms.contains_key(&k) {
                d = d.max(v.norm());
            }
        }
        d
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        let mut out = Self::zero();
        for (&(m, n), &c) in &self.terms {
            out.add_term(m, n, c * s);
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&(m, n), &c) in &other.terms {
            out.add_term(m, n, c);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(Complex::new(-T::one(), T::zero())))
    }
}

impl<T: Real> PhaseSpaceFunction<T> for SymbolPolynomial<T> {
    fn eval(&self, alpha: Complex<T>) -> Complex<T> {
        let deg = self.degree() as usize;
        let conj = alpha.conj();
        let mut pa = Vec::with_capacity(deg + 1);
        let mut pc = Vec::with_capacity(deg + 1);
        let (mut x, mut y) = (Complex::new(T::one(), T::zero()), Complex::new(T::one(), T::zero()));
        for _ in 0..=deg {
            pa.push(x);
            pc.push(y);
            x *= alpha;
            y *= conj;
        }
        self.terms
            .iter()
            .fold(Complex::zero(), |acc, (&(m, n), &c)| acc + c * pa[m as usize] * pc[n as usize])
    }
}

/// Symbol that depends on α only through `q = λ(α + α*)`:
/// `Σ c_k q^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionSymbol<T> {
    coeffs: PositionPolynomial<T>,
    lambda: T,
}

impl<T: Real> PositionSymbol<T> {
    /// Coefficients of the polynomial in `q`.
    pub fn q_polynomial(&self) -> &PositionPolynomial<T> {
        &self.coeffs
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    /// Expands `q = λ(α + α*)` into the bivariate representation.
    pub fn to_symbol_polynomial(&self) -> SymbolPolynomial<T> {
        let mut out = SymbolPolynomial::zero();
        for (k, &c) in self.coeffs.coeffs().iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let lk = self.lambda.powi(k as i32);
            let mut binom = T::one();
            for m in 0..=k {
                if m > 0 {
                    binom = binom * T::from_usize_lossy(k - m + 1) / T::from_usize_lossy(m);
                }
                out.add_term(m as u32, (k - m) as u32, c * (lk * binom));
            }
        }
        out
    }
}

impl<T: Real> PhaseSpaceFunction<T> for PositionSymbol<T> {
    #[inline]
    fn eval(&self, alpha: Complex<T>) -> Complex<T> {
        let q = T::lit(2.0) * self.lambda * alpha.re;
        self.coeffs
            .coeffs()
            .iter()
            .rev()
            .fold(Complex::zero(), |acc, &c| acc * q + c)
    }
}

/// Kernel truncation order K of the split factor `Σ_{n≤K} (−iΔt H₁/ħ)^n / n!`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SymbolTruncation {
    k: u32,
}

impl SymbolTruncation {
    pub fn new(k: u32) -> Result<Self, SymbolError> {
        if k < 1 {
            return Err(SymbolError::InvalidTruncation(k));
        }
        Ok(Self { k })
    }

    pub fn order(&self) -> u32 {
        self.k
    }
}

impl Default for SymbolTruncation {
    fn default() -> Self {
        Self { k: 6 }
    }
}

/// Antinormal symbol of an antinormal-ordered operator: `a^p a†^q → α^p α*^q`.
pub fn symbol_of<T: Real>(lp: &LadderPolynomial<T>) -> SymbolPolynomial<T> {
    let mut out = SymbolPolynomial::zero();
    for ((p, q), c) in lp.terms() {
        out.add_term(p, q, c);
    }
    out
}

/// Symbols of `Q^k`, `k = 0..=max_k`, via explicit antinormal reordering.
pub fn q_power_symbols<T: Real>(max_k: usize, params: &PhysicalParams<T>) -> Vec<SymbolPolynomial<T>> {
    crate::algebra::q_power_antinormal(max_k, params)
        .iter()
        .map(symbol_of)
        .collect()
}

/// `exp(−(λ²/2) d²/dq²) q^k` as a polynomial in q:
/// `Σ_j k! / (j! (k−2j)!) (−λ²/2)^j q^{k−2j}`.
pub fn desmoothed_power<T: Real>(k: usize, lambda: T) -> PositionPolynomial<T> {
    let mut coeffs = vec![Complex::zero(); k + 1];
    let half_var = -lambda * lambda / T::lit(2.0);
    // c_j = k!/(j!(k-2j)!) h^j, built by the ratio between consecutive j
    let mut cj = T::one();
    for j in 0..=k / 2 {
        if j > 0 {
            let num = T::from_usize_lossy((k - 2 * j + 2) * (k - 2 * j + 1));
            cj = cj * num / T::from_usize_lossy(j) * half_var;
        }
        coeffs[k - 2 * j] = Complex::new(cj, T::zero());
    }
    PositionPolynomial::new(coeffs)
}

/// Symbols of `Q^k` by Gaussian de-smoothing; independent of the ordering route.
pub fn q_power_symbols_desmoothed<T: Real>(
    max_k: usize,
    params: &PhysicalParams<T>,
) -> Vec<SymbolPolynomial<T>> {
    (0..=max_k)
        .map(|k| {
            PositionSymbol {
                coeffs: desmoothed_power(k, params.lambda()),
                lambda: params.lambda(),
            }
            .to_symbol_polynomial()
        })
        .collect()
}

/// Antinormal symbol of a position polynomial, kept in univariate form.
pub fn position_symbol<T: Real>(p: &PositionPolynomial<T>, params: &PhysicalParams<T>) -> PositionSymbol<T> {
    let lambda = params.lambda();
    let mut acc = PositionPolynomial::zero();
    for (k, &c) in p.coeffs().iter().enumerate() {
        if !c.is_zero() {
            acc = &acc + &desmoothed_power(k, lambda).scale(c);
        }
    }
    PositionSymbol { coeffs: acc, lambda }
}

/// `Σ_{n=0}^{K} (−i Δt / ħ)^n / n! · H₁^n` as a position polynomial.
pub fn kernel_position_polynomial<T: Real>(
    h1: &PositionPolynomial<T>,
    dt: T,
    trunc: SymbolTruncation,
    params: &PhysicalParams<T>,
    degree_cap: usize,
) -> Result<PositionPolynomial<T>, SymbolError> {
    if !dt.is_finite() {
        return Err(SymbolError::NonFiniteStep(dt.to_f64().unwrap_or(f64::NAN)));
    }
    let k = trunc.order();
    let degree = h1.degree() * k as usize;
    if degree > degree_cap {
        return Err(SymbolError::DegreeCap {
            degree,
            h1_degree: h1.degree(),
            k,
            cap: degree_cap,
        });
    }
    let step = imag(-dt / params.hbar());
    let mut total = PositionPolynomial::one();
    let mut power = PositionPolynomial::one();
    let mut factor = Complex::new(T::one(), T::zero());
    for n in 1..=k {
        power = &power * h1;
        factor = factor * step / T::from_u32(n).unwrap();
        total = &total + &power.scale(factor);
    }
    Ok(total)
}

/// Kernel symbol `G₋(α; Δt)` in univariate form; see [`build_g_symbol`].
pub fn build_g_position_symbol<T: Real>(
    h1: &PositionPolynomial<T>,
    dt: T,
    trunc: SymbolTruncation,
    params: &PhysicalParams<T>,
    degree_cap: usize,
) -> Result<PositionSymbol<T>, SymbolError> {
    let poly = kernel_position_polynomial(h1, dt, trunc, params, degree_cap)?;
    Ok(position_symbol(&poly, params))
}

/// Antinormal symbol of the truncated split kernel
/// `Ĝ(Δt) = Σ_{n≤K} (−iΔt)^n / n! (Ĥ₁/ħ)^n`.
///
/// The operator is assembled as an exact position polynomial and mapped to
/// its symbol term by term through the precomputed `Q^k` symbols.
pub fn build_g_symbol<T: Real>(
    h1: &PositionPolynomial<T>,
    dt: T,
    trunc: SymbolTruncation,
    params: &PhysicalParams<T>,
    degree_cap: usize,
) -> Result<SymbolPolynomial<T>, SymbolError> {
    let poly = kernel_position_polynomial(h1, dt, trunc, params, degree_cap)?;
    let powers = q_power_symbols(poly.degree(), params);
    let mut out = SymbolPolynomial::zero();
    for (k, &c) in poly.coeffs().iter().enumerate() {
        if !c.is_zero() {
            out = out.add(&powers[k].scale(c));
        }
    }
    Ok(out)
}

/// Coherent-state expectation `⟨α|p(Q̂)|α⟩` (the normal/Husimi symbol):
/// Gaussian smoothing of `q^k` with variance λ².
pub fn coherent_expectation<T: Real>(
    p: &PositionPolynomial<T>,
    alpha: Complex<T>,
    params: &PhysicalParams<T>,
) -> Complex<T> {
    let lambda = params.lambda();
    let q = T::lit(2.0) * lambda * alpha.re;
    let mut total = Complex::zero();
    for (k, &c) in p.coeffs().iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        // E[(q + λZ)^k] = Σ_j C(k,2j) (2j-1)!! λ^{2j} q^{k-2j}
        let mut sum = T::zero();
        let mut w = T::one();
        for j in 0..=k / 2 {
            if j > 0 {
                let num = T::from_usize_lossy((k - 2 * j + 2) * (k - 2 * j + 1));
                w = w * num / T::from_usize_lossy(2 * j) * lambda * lambda;
            }
            sum += w * q.powi((k - 2 * j) as i32);
        }
        total += c * sum;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Ladder;

    type C = Complex<f64>;

    fn c(x: f64) -> C {
        C::new(x, 0.0)
    }

    fn unit() -> PhysicalParams<f64> {
        PhysicalParams::new(2.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn symbol_of_simple_operators() {
        let op = &LadderPolynomial::term(1, 1, c(1.0)) - &LadderPolynomial::identity();
        let s = symbol_of(&op);
        assert_eq!(s.coeff(1, 1), c(1.0));
        assert_eq!(s.coeff(0, 0), c(-1.0));
        assert_eq!(s.len(), 2);
        assert_eq!(symbol_of(&LadderPolynomial::<f64>::identity()), SymbolPolynomial::constant(c(1.0)));
    }

    #[test]
    fn q_squared_symbol_unit_lambda() {
        let s = &q_power_symbols(2, &unit())[2];
        // (α + α*)² − 1
        assert_eq!(s.coeff(2, 0), c(1.0));
        assert!((s.coeff(1, 1) - c(2.0)).norm() < 1e-14);
        assert_eq!(s.coeff(0, 2), c(1.0));
        assert!((s.coeff(0, 0) - c(-1.0)).norm() < 1e-14);
        let alpha = C::new(0.3, -0.7);
        let x = alpha + alpha.conj();
        assert!((s.eval(alpha) - (x * x - 1.0)).norm() < 1e-14);
    }

    #[test]
    fn q_fourth_symbol_two_routes() {
        let params = unit();
        let order = &q_power_symbols(4, &params)[4];
        let smooth = &q_power_symbols_desmoothed(4, &params)[4];
        assert!(order.max_coeff_diff(smooth) < 1e-12);
        let alpha = C::new(1.1, 0.4);
        let x = alpha + alpha.conj();
        let want = x.powi(4) - x * x * 6.0 + 3.0;
        assert!((order.eval(alpha) - want).norm() < 1e-12);
        assert_eq!(q_power_symbols(0, &params)[0], SymbolPolynomial::constant(c(1.0)));
    }

    #[test]
    fn ordering_and_desmoothing_agree_up_to_k12() {
        let params = PhysicalParams::<f64>::new(1.0, 1.3, 0.8).unwrap();
        let a = q_power_symbols(12, &params);
        let b = q_power_symbols_desmoothed(12, &params);
        for k in 0..=12 {
            assert!(a[k].max_coeff_diff(&b[k]) < 1e-10, "k = {k}");
        }
    }

    #[test]
    fn word_route_matches_symbol_route() {
        // Q² = λ²(a + a†)² written as words, reordered by rewriting.
        use Ladder::*;
        let params = unit();
        let words: Vec<(Vec<Ladder>, C)> = [Annihilate, Create]
            .iter()
            .flat_map(|&x| [Annihilate, Create].into_iter().map(move |y| (vec![x, y], c(1.0))))
            .collect();
        let s = symbol_of(&reorder_antinormal_helper(&words));
        assert!(s.max_coeff_diff(&q_power_symbols(2, &params)[2]) < 1e-14);
    }

    fn reorder_antinormal_helper(words: &[(Vec<Ladder>, C)]) -> LadderPolynomial<f64> {
        crate::algebra::reorder_antinormal(words)
    }

    #[test]
    fn kernel_trivial_cases() {
        let params = PhysicalParams::<f64>::reduced();
        let trunc = SymbolTruncation::new(5).unwrap();
        let g = build_g_symbol(&PositionPolynomial::zero(), 0.3, trunc, &params, 64).unwrap();
        assert_eq!(g, SymbolPolynomial::constant(c(1.0)));
        let h1 = PositionPolynomial::from_real(&[0.5, 0.1, -0.75, 0.0, 0.03]);
        let g0 = build_g_symbol(&h1, 0.0, trunc, &params, 64).unwrap();
        assert_eq!(g0, SymbolPolynomial::constant(c(1.0)));
    }

    #[test]
    fn kernel_linear_k1() {
        let params = PhysicalParams::<f64>::new(1.5, 0.7, 1.2).unwrap();
        let (cc, dt) = (0.8, 0.05);
        let g = build_g_symbol(
            &PositionPolynomial::monomial(1, c(cc)),
            dt,
            SymbolTruncation::new(1).unwrap(),
            &params,
            64,
        )
        .unwrap();
        let lam = params.lambda();
        let off = C::new(0.0, -dt * cc * lam / params.hbar());
        assert_eq!(g.len(), 3);
        assert!((g.coeff(0, 0) - c(1.0)).norm() < 1e-15);
        assert!((g.coeff(1, 0) - off).norm() < 1e-15);
        assert!((g.coeff(0, 1) - off).norm() < 1e-15);
    }

    #[test]
    fn degree_cap_and_truncation_errors() {
        let params = PhysicalParams::<f64>::reduced();
        assert_eq!(SymbolTruncation::new(0), Err(SymbolError::InvalidTruncation(0)));
        let h1 = PositionPolynomial::monomial(4, c(1.0));
        let err = build_g_symbol(&h1, 0.1, SymbolTruncation::new(17).unwrap(), &params, 64).unwrap_err();
        assert!(matches!(err, SymbolError::DegreeCap { degree: 68, .. }));
        assert!(build_g_symbol(&h1, 0.1, SymbolTruncation::new(16).unwrap(), &params, 64).is_ok());
        assert!(build_g_symbol(&h1, f64::NAN, SymbolTruncation::new(2).unwrap(), &params, 64).is_err());
    }

    #[test]
    fn position_symbol_matches_bivariate() {
        let params = PhysicalParams::<f64>::new(1.0, 1.0, 1.0).unwrap();
        let h1 = PositionPolynomial::from_real(&[1.43, 0.02, -0.75, 0.0, 0.011]);
        let trunc = SymbolTruncation::new(6).unwrap();
        let bi = build_g_symbol(&h1, 0.0156, trunc, &params, 64).unwrap();
        let uni = build_g_position_symbol(&h1, 0.0156, trunc, &params, 64).unwrap();
        assert!(uni.to_symbol_polynomial().max_coeff_diff(&bi) < 1e-12);
        for alpha in [C::new(0.0, 0.0), C::new(2.4, -1.0), C::new(-3.0, 2.5)] {
            let (a, b) = (bi.eval(alpha), uni.eval(alpha));
            assert!((a - b).norm() <= 1e-12 * a.norm().max(1.0));
        }
    }

    #[test]
    fn kernel_truncation_scales_as_dt_to_the_k() {
        let params = PhysicalParams::<f64>::reduced();
        let h1 = PositionPolynomial::from_real(&[0.2, 0.0, -0.5, 0.0, 0.05]);
        for k in 2..=6u32 {
            let diff = |dt: f64| {
                let hi = build_g_symbol(&h1, dt, SymbolTruncation::new(k).unwrap(), &params, 64).unwrap();
                let lo = build_g_symbol(&h1, dt, SymbolTruncation::new(k - 1).unwrap(), &params, 64).unwrap();
                hi.max_coeff_diff(&lo)
            };
            let ratio = diff(0.1) / diff(0.05);
            let want = 2f64.powi(k as i32);
            assert!((ratio / want - 1.0).abs() < 1e-9, "k={k} ratio={ratio}");
        }
    }

    #[test]
    fn coherent_expectation_low_orders() {
        let params = PhysicalParams::<f64>::reduced();
        let lam2 = params.lambda().powi(2);
        let alpha = C::new(2.0, 0.5);
        let q = 2.0 * params.lambda() * 2.0;
        let e1 = coherent_expectation(&PositionPolynomial::monomial(1, c(1.0)), alpha, &params);
        let e2 = coherent_expectation(&PositionPolynomial::monomial(2, c(1.0)), alpha, &params);
        let e4 = coherent_expectation(&PositionPolynomial::monomial(4, c(1.0)), alpha, &params);
        assert!((e1.re - q).abs() < 1e-13);
        assert!((e2.re - (q * q + lam2)).abs() < 1e-13);
        assert!((e4.re - (q.powi(4) + 6.0 * q * q * lam2 + 3.0 * lam2 * lam2)).abs() < 1e-11);
    }
}
