//! Exact symbolic algebra of ladder-operator polynomials.
//!
//! Operators are stored in antinormal order: every term is `a^p (a†)^q`
//! with all annihilators to the left. Position polynomials are converted by
//! substituting `Q = λ (a + a†)` and commuting with `[a, a†] = 1`.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use ndarray::Array2;
use num_complex::Complex;
use num_traits::Zero;
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamsError {
    #[error("{name} must be finite and strictly positive, got {value}")]
    NotPositive { name: &'static str, value: f64 },
}

/// Units of the problem: ħ, m and the reference oscillator frequency ω₀.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams<T> {
    hbar: T,
    mass: T,
    omega0: T,
    lambda: T,
}

impl<T: Real> PhysicalParams<T> {
    pub fn new(hbar: T, mass: T, omega0: T) -> Result<Self, ParamsError> {
        for (name, v) in [("hbar", hbar), ("mass", mass), ("omega0", omega0)] {
            if !(v.is_finite() && v > T::zero()) {
                return Err(ParamsError::NotPositive {
                    name,
                    value: v.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        let lambda = (hbar / (T::lit(2.0) * mass * omega0)).sqrt();
        Ok(Self {
            hbar,
            mass,
            omega0,
            lambda,
        })
    }

    /// ħ = m = ω₀ = 1.
    pub fn reduced() -> Self {
        Self::new(T::one(), T::one(), T::one()).expect("unit parameters are valid")
    }

    pub fn hbar(&self) -> T {
        self.hbar
    }

    pub fn mass(&self) -> T {
        self.mass
    }

    pub fn omega0(&self) -> T {
        self.omega0
    }

    /// Length scale in `Q = λ (a + a†)`, λ = sqrt(ħ / 2mω₀).
    pub fn lambda(&self) -> T {
        self.lambda
    }

    /// Coefficient of Q² in the reference oscillator potential, mω₀²/2.
    pub fn harmonic_coefficient(&self) -> T {
        self.mass * self.omega0 * self.omega0 / T::lit(2.0)
    }
}

/// Polynomial `Σ c_k Q^k` in the position operator.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionPolynomial<T> {
    coeffs: Vec<Complex<T>>,
}

impl<T: Real> PositionPolynomial<T> {
    /// Builds a polynomial from ascending coefficients; trailing zeros are dropped.
    pub fn new(coeffs: Vec<Complex<T>>) -> Self {
        let mut p = Self { coeffs };
        p.trim();
        p
    }

    pub fn from_real(coeffs: &[T]) -> Self {
        Self::new(coeffs.iter().map(|&c| Complex::new(c, T::zero())).collect())
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Self::constant(Complex::new(T::one(), T::zero()))
    }

    pub fn constant(c: Complex<T>) -> Self {
        Self::new(vec![c])
    }

    /// `c · Q^k`.
    pub fn monomial(k: usize, c: Complex<T>) -> Self {
        let mut coeffs = vec![Complex::zero(); k + 1];
        coeffs[k] = c;
        Self::new(coeffs)
    }

    fn trim(&mut self) {
        while self.coeffs.last().is_some_and(|c| c.is_zero()) {
            self.coeffs.pop();
        }
    }

    pub fn coeffs(&self) -> &[Complex<T>] {
        &self.coeffs
    }

    /// Coefficient of `Q^k` (zero beyond the degree).
    pub fn coeff(&self, k: usize) -> Complex<T> {
        self.coeffs.get(k).copied().unwrap_or_else(Complex::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        Self::new(self.coeffs.iter().map(|&c| c * s).collect())
    }

    pub fn eval(&self, q: Complex<T>) -> Complex<T> {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex::zero(), |acc, &c| acc * q + c)
    }

    /// True when every coefficient has zero imaginary part.
    pub fn is_real(&self) -> bool {
        self.coeffs.iter().all(|c| c.im.is_zero())
    }
}

impl<T: Real> Add for &PositionPolynomial<T> {
    type Output = PositionPolynomial<T>;

    fn add(self, rhs: Self) -> PositionPolynomial<T> {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        PositionPolynomial::new((0..n).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl<T: Real> Sub for &PositionPolynomial<T> {
    type Output = PositionPolynomial<T>;

    fn sub(self, rhs: Self) -> PositionPolynomial<T> {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        PositionPolynomial::new((0..n).map(|k| self.coeff(k) - rhs.coeff(k)).collect())
    }
}

impl<T: Real> Neg for &PositionPolynomial<T> {
    type Output = PositionPolynomial<T>;

    fn neg(self) -> PositionPolynomial<T> {
        PositionPolynomial::new(self.coeffs.iter().map(|&c| -c).collect())
    }
}

impl<T: Real> Mul for &PositionPolynomial<T> {
    type Output = PositionPolynomial<T>;

    fn mul(self, rhs: Self) -> PositionPolynomial<T> {
        if self.is_zero() || rhs.is_zero() {
            return PositionPolynomial::zero();
        }
        let mut out = vec![Complex::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        PositionPolynomial::new(out)
    }
}

/// A single ladder operator in a word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Ladder {
    /// `a`
    Annihilate,
    /// `a†`
    Create,
}

/// Polynomial in `a, a†` stored in antinormal order: `Σ c_pq a^p (a†)^q`.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderPolynomial<T> {
    terms: BTreeMap<(u32, u32), Complex<T>>,
}

impl<T: Real> Default for LadderPolynomial<T> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<T: Real> LadderPolynomial<T> {
    pub fn zero() -> Self {
        Self {
            terms: BTreeMap::new(),
        }
    }

    pub fn identity() -> Self {
        Self::term(0, 0, Complex::new(T::one(), T::zero()))
    }

    /// `c · a^p (a†)^q`.
    pub fn term(p: u32, q: u32, c: Complex<T>) -> Self {
        let mut out = Self::zero();
        out.add_term(p, q, c);
        out
    }

    /// `a`
    pub fn annihilator() -> Self {
        Self::term(1, 0, Complex::new(T::one(), T::zero()))
    }

    /// `a†`
    pub fn creator() -> Self {
        Self::term(0, 1, Complex::new(T::one(), T::zero()))
    }

    /// Accumulates a coefficient; exact zeros are removed.
    pub fn add_term(&mut self, p: u32, q: u32, c: Complex<T>) {
        let entry = self.terms.entry((p, q)).or_insert_with(Complex::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&(p, q));
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = ((u32, u32), Complex<T>)> + '_ {
        self.terms.iter().map(|(&k, &v)| (k, v))
    }

    pub fn coeff(&self, p: u32, q: u32) -> Complex<T> {
        self.terms.get(&(p, q)).copied().unwrap_or_else(Complex::zero)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Maximum of p + q over the terms.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|&(p, q)| p + q).max().unwrap_or(0)
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        let mut out = Self::zero();
        for (&(p, q), &c) in &self.terms {
            out.add_term(p, q, c * s);
        }
        out
    }

    /// Right multiplication by `a`: `a^p a†^q a = a^{p+1} a†^q − q a^p a†^{q−1}`.
    pub fn times_annihilator(&self) -> Self {
        let mut out = Self::zero();
        for (&(p, q), &c) in &self.terms {
            out.add_term(p + 1, q, c);
            if q > 0 {
                out.add_term(p, q - 1, -c * T::from_u32(q).unwrap());
            }
        }
        out
    }

    /// Right multiplication by `a†`.
    pub fn times_creator(&self) -> Self {
        let mut out = Self::zero();
        for (&(p, q), &c) in &self.terms {
            out.add_term(p, q + 1, c);
        }
        out
    }
}

impl<T: Real> Add for &LadderPolynomial<T> {
    type Output = LadderPolynomial<T>;

    fn add(self, rhs: Self) -> LadderPolynomial<T> {
        let mut out = self.clone();
        for (&(p, q), &c) in &rhs.terms {
            out.add_term(p, q, c);
        }
        out
    }
}

impl<T: Real> Sub for &LadderPolynomial<T> {
    type Output = LadderPolynomial<T>;

    fn sub(self, rhs: Self) -> LadderPolynomial<T> {
        let mut out = self.clone();
        for (&(p, q), &c) in &rhs.terms {
            out.add_term(p, q, -c);
        }
        out
    }
}

impl<T: Real> Mul for &LadderPolynomial<T> {
    type Output = LadderPolynomial<T>;

    /// Product of two antinormal polynomials, re-ordered with
    /// `a†^q a^r = Σ_j (−1)^j j! C(q,j) C(r,j) a^{r−j} a†^{q−j}`.
    fn mul(self, rhs: Self) -> LadderPolynomial<T> {
        let mut out = LadderPolynomial::zero();
        for (&(p, q), &c1) in &self.terms {
            for (&(r, s), &c2) in &rhs.terms {
                let mut weight = T::one();
                for j in 0..=q.min(r) {
                    if j > 0 {
                        // ratio between consecutive j terms: −(q−j+1)(r−j+1)/j
                        let f = T::from_u32((q - j + 1) * (r - j + 1)).unwrap()
                            / T::from_u32(j).unwrap();
                        weight = -weight * f;
                    }
                    out.add_term(p + r - j, q - j + s, c1 * c2 * weight);
                }
            }
        }
        out
    }
}

/// Rewrites a sum of arbitrary ladder words into antinormal order by
/// repeatedly applying `a† a → a a† − 1` to the leftmost offending pair.
pub fn reorder_antinormal<T: Real>(words: &[(Vec<Ladder>, Complex<T>)]) -> LadderPolynomial<T> {
    let mut pending: BTreeMap<Vec<Ladder>, Complex<T>> = BTreeMap::new();
    for (w, c) in words {
        *pending.entry(w.clone()).or_insert_with(Complex::zero) += *c;
    }
    let mut out = LadderPolynomial::zero();
    while !pending.is_empty() {
        let mut next: BTreeMap<Vec<Ladder>, Complex<T>> = BTreeMap::new();
        for (word, c) in pending {
            if c.is_zero() {
                continue;
            }
            let offending = word
                .windows(2)
                .position(|w| w[0] == Ladder::Create && w[1] == Ladder::Annihilate);
            match offending {
                None => {
                    let p = word.iter().filter(|&&l| l == Ladder::Annihilate).count() as u32;
                    out.add_term(p, word.len() as u32 - p, c);
                }
                Some(i) => {
                    let mut swapped = word.clone();
                    swapped.swap(i, i + 1);
                    *next.entry(swapped).or_insert_with(Complex::zero) += c;
                    let mut contracted = word;
                    contracted.drain(i..i + 2);
                    *next.entry(contracted).or_insert_with(Complex::zero) -= c;
                }
            }
        }
        pending = next;
    }
    out
}

/// Antinormal form of every power `Q^k`, `k = 0..=max_k`.
pub fn q_power_antinormal<T: Real>(
    max_k: usize,
    params: &PhysicalParams<T>,
) -> Vec<LadderPolynomial<T>> {
    let lambda = Complex::new(params.lambda(), T::zero());
    let mut out = Vec::with_capacity(max_k + 1);
    let mut current = LadderPolynomial::identity();
    for _ in 0..max_k {
        let next = (&current.times_annihilator() + &current.times_creator()).scale(lambda);
        out.push(current);
        current = next;
    }
    out.push(current);
    out
}

/// Substitutes `Q = λ (a + a†)` into `p` and returns the antinormal form.
pub fn position_to_antinormal<T: Real>(
    p: &PositionPolynomial<T>,
    params: &PhysicalParams<T>,
) -> LadderPolynomial<T> {
    let powers = q_power_antinormal(p.degree(), params);
    let mut out = LadderPolynomial::zero();
    for (k, &c) in p.coeffs().iter().enumerate() {
        if !c.is_zero() {
            out = &out + &powers[k].scale(c);
        }
    }
    out
}

/// `sqrt((hi)! / (lo)!)` for `lo <= hi`.
fn sqrt_factorial_ratio<T: Real>(lo: usize, hi: usize) -> T {
    (lo + 1..=hi).fold(T::one(), |acc, k| acc * T::from_usize_lossy(k).sqrt())
}

/// Fock-basis matrix `⟨n|lp|n'⟩`, `0 <= n, n' < dim`. Elements are computed
/// analytically, so no basis truncation enters individual entries.
pub fn fock_matrix<T: Real>(lp: &LadderPolynomial<T>, dim: usize) -> Array2<Complex<T>> {
    assert!(dim >= 1, "dim must be positive");
    let mut m = Array2::from_elem((dim, dim), Complex::zero());
    for ((p, q), c) in lp.terms() {
        let (p, q) = (p as usize, q as usize);
        for col in 0..dim {
            let top = col + q;
            if top < p {
                continue;
            }
            let row = top - p;
            if row >= dim {
                continue;
            }
            let amp: T = sqrt_factorial_ratio::<T>(col, top) * sqrt_factorial_ratio::<T>(row, top);
            m[(row, col)] += c * amp;
        }
    }
    m
}

/// Truncated position matrix `λ (a + a†)` in dimension `dim`.
pub fn position_matrix<T: Real>(params: &PhysicalParams<T>, dim: usize) -> Array2<Complex<T>> {
    let mut m = Array2::from_elem((dim, dim), Complex::zero());
    for n in 1..dim {
        let v = Complex::new(params.lambda() * T::from_usize_lossy(n).sqrt(), T::zero());
        m[(n - 1, n)] = v;
        m[(n, n - 1)] = v;
    }
    m
}

/// Direct matrix polynomial `Σ c_k X^k` of the truncated position matrix
/// (Horner). Entries near the truncation edge are wrong by construction.
pub fn position_matrix_polynomial<T: Real>(
    p: &PositionPolynomial<T>,
    params: &PhysicalParams<T>,
    dim: usize,
) -> Array2<Complex<T>> {
    let x = position_matrix(params, dim);
    let mut acc = Array2::from_elem((dim, dim), Complex::zero());
    for &c in p.coeffs().iter().rev() {
        acc = acc.dot(&x);
        for n in 0..dim {
            acc[(n, n)] += c;
        }
    }
    acc
}
