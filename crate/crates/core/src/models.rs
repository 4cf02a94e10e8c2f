//! Polynomial potentials with an optional sinusoidal linear drive
//! `S·sin(ωt)·Q`.

use num_complex::Complex;

use crate::algebra::{PhysicalParams, PositionPolynomial};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Drive<T> {
    pub amplitude: T,
    pub frequency: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec<T> {
    static_part: PositionPolynomial<T>,
    drive: Option<Drive<T>>,
}

impl<T: Real> PotentialSpec<T> {
    pub fn new(static_part: PositionPolynomial<T>, drive: Option<Drive<T>>) -> Self {
        Self { static_part, drive }
    }

    /// `(mω₀²/2)·Q²`.
    pub fn harmonic(params: &PhysicalParams<T>) -> Self {
        Self::new(
            PositionPolynomial::monomial(2, Complex::new(params.harmonic_coefficient(), T::zero())),
            None,
        )
    }

    pub fn static_part(&self) -> &PositionPolynomial<T> {
        &self.static_part
    }

    pub fn drive(&self) -> Option<&Drive<T>> {
        self.drive.as_ref()
    }

    /// A drive with zero amplitude counts as inactive.
    pub fn is_driven(&self) -> bool {
        self.drive.as_ref().is_some_and(|d| d.amplitude != T::zero())
    }

    pub fn with_drive(mut self, drive: Option<Drive<T>>) -> Self {
        self.drive = drive;
        self
    }

    /// Coefficient of Q contributed by the drive at time t.
    pub fn drive_coefficient(&self, t: T) -> T {
        match &self.drive {
            Some(d) if d.amplitude != T::zero() => d.amplitude * (d.frequency * t).sin(),
            _ => T::zero(),
        }
    }

    /// `V(Q, t)`.
    pub fn potential_at(&self, t: T) -> PositionPolynomial<T> {
        let f = self.drive_coefficient(t);
        if f == T::zero() {
            return self.static_part.clone();
        }
        &self.static_part + &PositionPolynomial::monomial(1, Complex::new(f, T::zero()))
    }

    /// `H₁(t) = V(Q, t) − (mω₀²/2)·Q²`.
    pub fn anharmonic_part(&self, params: &PhysicalParams<T>, t: T) -> PositionPolynomial<T> {
        let harmonic = PositionPolynomial::monomial(2, Complex::new(params.harmonic_coefficient(), T::zero()));
        &self.potential_at(t) - &harmonic
    }

    /// Real value of the static part at a real position.
    pub fn static_value(&self, q: T) -> T {
        self.static_part.eval(Complex::new(q, T::zero())).re
    }
}

/// `(mω₀²/(8Q₀²))·(Q² − Q₀²)² + S·sin(ωt)·Q`.
pub fn double_well<T: Real>(params: &PhysicalParams<T>, q0: T, amplitude: T, frequency: T) -> PotentialSpec<T> {
    assert!(q0 > T::zero(), "Q0 must be positive");
    let pre = params.mass() * params.omega0() * params.omega0() / (T::lit(8.0) * q0 * q0);
    let q02 = q0 * q0;
    let static_part = PositionPolynomial::from_real(&[
        pre * q02 * q02,
        T::zero(),
        -T::lit(2.0) * pre * q02,
        T::zero(),
        pre,
    ]);
    PotentialSpec::new(
        static_part,
        Some(Drive {
            amplitude,
            frequency,
        }),
    )
}
