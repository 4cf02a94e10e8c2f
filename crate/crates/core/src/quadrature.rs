//! Phase-space quadrature `∫ d²α/π f(α) ≈ Σ_j w_j f(α_j)`.
//!
//! The rule is a scaled two-dimensional Gauss–Hermite product. The Gaussian
//! weight of the one-dimensional rules is folded back into `w_j`, so the
//! grid integrates plain integrands that decay like `exp(−|α − center|²)`,
//! which is what coherent-state overlaps provide.

use num_complex::Complex;
use thiserror::Error;

use crate::propagator::coherent_overlap;
use crate::scalar::Real;

/// Largest supported one-dimensional rule.
pub const MAX_RULE_SIZE: usize = 256;

/// Grid sizes tried by [`covering_grid`], smallest first.
pub const COVERING_SIZES: [usize; 9] = [8, 12, 16, 20, 24, 32, 40, 48, 64];

/// Distance between the covered radius and the outermost node required by
/// [`covering_grid`], in units of |α|.
pub const TAIL_MARGIN: f64 = 2.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("Gauss-Hermite rule size {0} outside supported range 1..={MAX_RULE_SIZE}")]
    UnsupportedSize(usize),
    #[error("grid scaling must be finite and positive (s_re = {s_re}, s_im = {s_im})")]
    InvalidScaling { s_re: f64, s_im: f64 },
    #[error("Gauss-Hermite rule of size {0} is not representable in this precision")]
    OutOfRange(usize),
    #[error("no supported grid covers radius {0}")]
    RadiusTooLarge(f64),
}

/// One-dimensional Gauss–Hermite rule for the weight `e^{−x²}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermiteRule<T> {
    /// Ascending nodes.
    pub nodes: Vec<T>,
    /// Classical weights `w_i`.
    pub weights: Vec<T>,
    /// `w_i · exp(x_i²)`; finite even where `w_i` underflows.
    pub scaled_weights: Vec<T>,
}

impl<T: Real> GaussHermiteRule<T> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ w_i f(x_i)`.
    pub fn integrate<F: Fn(T) -> T>(&self, f: F) -> T {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Nodes and weights by Newton iteration on the orthonormal Hermite
/// functions, evaluated by the three-term recurrence and deflated by the
/// roots already found. The four
/// outermost roots start from the classical asymptotic estimates, the rest
/// from the previous root minus the local zero spacing.
pub fn gauss_hermite_rule<T: Real>(n: usize) -> Result<GaussHermiteRule<T>, QuadratureError> {
    if n == 0 || n > MAX_RULE_SIZE {
        return Err(QuadratureError::UnsupportedSize(n));
    }
    let two = T::lit(2.0);
    let nf = T::from_usize_lossy(n);
    let pim4 = T::PI().powf(T::lit(-0.25));
    let tol = T::epsilon() * T::lit(8.0);
    let m = n.div_ceil(2);
    let mut x = vec![T::zero(); n];
    let mut w = vec![T::zero(); n];
    let mut ws = vec![T::zero(); n];
    let mut z = T::zero();
    for i in 0..m {
        z = match i {
            0 => {
                let s = two * nf + T::one();
                s.sqrt() - T::lit(1.85575) * s.powf(T::lit(-1.0 / 6.0))
            }
            1 => z - T::lit(1.14) * nf.powf(T::lit(0.426)) / z,
            2 => T::lit(1.86) * z - T::lit(0.86) * x[0],
            3 => T::lit(1.91) * z - T::lit(0.91) * x[1],
            _ => {
                // local WKB spacing π/√(2n+1−z²), taken at the midpoint
                let turn = two * nf + T::one();
                let mid = z - T::lit(0.5) * T::PI() / (turn - z * z).sqrt();
                z - T::PI() / (turn - mid * mid).sqrt()
            }
        };
        let mut pp = T::one();
        for _ in 0..200 {
            let mut p1 = pim4;
            let mut p2 = T::zero();
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = T::from_usize_lossy(j);
                p1 = z * (two / jf).sqrt() * p2 - ((jf - T::one()) / jf).sqrt() * p3;
            }
            pp = (two * nf).sqrt() * p2;
            // Newton on the Hermite function p·e^{−z²/2}, deflated by the
            // roots already found and their mirrors
            let mut shift = z;
            for &r in &x[..i] {
                shift += T::one() / (z - r) + T::one() / (z + r);
            }
            let z1 = z;
            z = z1 - p1 / (pp - p1 * shift);
            if (z - z1).abs() <= tol * z.abs().max(T::one()) {
                break;
            }
        }
        if !(pp.is_finite() && z.is_finite()) {
            return Err(QuadratureError::OutOfRange(n));
        }
        let weight = two / (pp * pp);
        let damped = pp * (-z * z / two).exp();
        let scaled = two / (damped * damped);
        if !(scaled.is_finite() && scaled > T::zero()) {
            return Err(QuadratureError::OutOfRange(n));
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = weight;
        w[n - 1 - i] = weight;
        ws[i] = scaled;
        ws[n - 1 - i] = scaled;
    }
    if n % 2 == 1 {
        // exact symmetry of the middle node
        x[m - 1] = T::zero();
    }
    x.reverse();
    w.reverse();
    ws.reverse();
    Ok(GaussHermiteRule {
        nodes: x,
        weights: w,
        scaled_weights: ws,
    })
}

/// Fixed abscissas `α_j` and positive weights `w_j` for `∫ d²α/π`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid<T> {
    nodes: Vec<Complex<T>>,
    weights: Vec<T>,
    sqrt_weights: Vec<T>,
    n_re: usize,
    n_im: usize,
    s_re: T,
    s_im: T,
    center: Complex<T>,
}

impl<T: Real> QuadratureGrid<T> {
    pub fn nodes(&self) -> &[Complex<T>] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// `√w_j`, cached because every state and matrix element carries it.
    pub fn sqrt_weights(&self) -> &[T] {
        &self.sqrt_weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn counts(&self) -> (usize, usize) {
        (self.n_re, self.n_im)
    }

    pub fn scalings(&self) -> (T, T) {
        (self.s_re, self.s_im)
    }

    pub fn center(&self) -> Complex<T> {
        self.center
    }

    /// Largest `|α_j − center|` along each axis.
    pub fn extent(&self) -> (T, T) {
        let mut re = T::zero();
        let mut im = T::zero();
        for a in &self.nodes {
            re = re.max((a.re - self.center.re).abs());
            im = im.max((a.im - self.center.im).abs());
        }
        (re, im)
    }

    /// `Σ_j w_j f(α_j)`.
    pub fn integrate<F: Fn(Complex<T>) -> Complex<T>>(&self, f: F) -> Complex<T> {
        self.nodes
            .iter()
            .zip(&self.weights)
            .fold(Complex::new(T::zero(), T::zero()), |acc, (&a, &w)| acc + f(a) * w)
    }
}

/// Scaled product rule: node `(i, k) = center + s_re·x_i + i·s_im·y_k` with
/// weight `(s_re·s_im/π)·w_i w_k·exp(x_i² + y_k²)`. Node index is `i·n_im + k`.
pub fn product_grid<T: Real>(
    n_re: usize,
    n_im: usize,
    s_re: T,
    s_im: T,
    center: Complex<T>,
) -> Result<QuadratureGrid<T>, QuadratureError> {
    if !(s_re.is_finite() && s_im.is_finite() && s_re > T::zero() && s_im > T::zero()) {
        return Err(QuadratureError::InvalidScaling {
            s_re: s_re.to_f64().unwrap_or(f64::NAN),
            s_im: s_im.to_f64().unwrap_or(f64::NAN),
        });
    }
    let rx = gauss_hermite_rule::<T>(n_re)?;
    let ry = gauss_hermite_rule::<T>(n_im)?;
    let norm = s_re * s_im / T::PI();
    let mut nodes = Vec::with_capacity(n_re * n_im);
    let mut weights = Vec::with_capacity(n_re * n_im);
    for (&x, &wx) in rx.nodes.iter().zip(&rx.scaled_weights) {
        for (&y, &wy) in ry.nodes.iter().zip(&ry.scaled_weights) {
            nodes.push(center + Complex::new(s_re * x, s_im * y));
            weights.push(norm * wx * wy);
        }
    }
    let sqrt_weights = weights.iter().map(|w| w.sqrt()).collect();
    Ok(QuadratureGrid {
        nodes,
        weights,
        sqrt_weights,
        n_re,
        n_im,
        s_re,
        s_im,
        center,
    })
}

/// Smallest isotropic unit-scale grid from [`COVERING_SIZES`] whose
/// outermost node reaches `radius + TAIL_MARGIN` from the center.
pub fn covering_grid<T: Real>(radius: T, center: Complex<T>) -> Result<QuadratureGrid<T>, QuadratureError> {
    let need = radius + T::lit(TAIL_MARGIN);
    for &n in &COVERING_SIZES {
        let rule = gauss_hermite_rule::<T>(n)?;
        if *rule.nodes.last().unwrap() >= need {
            return product_grid(n, n, T::one(), T::one(), center);
        }
    }
    Err(QuadratureError::RadiusTooLarge(radius.to_f64().unwrap_or(f64::NAN)))
}

/// Worst resolution-of-identity defect over the probes:
/// `max_β |Σ_j w_j ⟨β|α_j⟩⟨α_j|β⟩ − 1|`.
pub fn identity_residual<T: Real>(grid: &QuadratureGrid<T>, probes: &[Complex<T>]) -> T {
    assert!(!probes.is_empty(), "at least one probe required");
    probes
        .iter()
        .map(|&beta| {
            let s: T = grid
                .nodes
                .iter()
                .zip(&grid.weights)
                .map(|(&a, &w)| w * coherent_overlap(beta, a).norm_sqr())
                .sum();
            (s - T::one()).abs()
        })
        .fold(T::zero(), T::max)
}
