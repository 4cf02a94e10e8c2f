//! Wave-packet propagation with the antinormal coherent-state path integral.
//!
//! The core is generic over the real scalar ([`Real`], implemented for
//! `f32` and `f64`). The aliases below fix it to `f64`, which is what the
//! command line tool and the tests use.

pub mod algebra;
pub mod config;
pub mod experiments;
pub mod fock;
mod kernel;
pub mod models;
pub mod propagator;
pub mod quadrature;
pub mod scalar;
pub mod symbols;

pub use scalar::Real;

pub type Complex64 = num_complex::Complex<f64>;
pub type Params = algebra::PhysicalParams<f64>;
pub type PositionPoly = algebra::PositionPolynomial<f64>;
pub type LadderPoly = algebra::LadderPolynomial<f64>;
pub type SymbolPoly = symbols::SymbolPolynomial<f64>;
pub type PositionSym = symbols::PositionSymbol<f64>;
pub type Grid = quadrature::QuadratureGrid<f64>;
pub type Rule = quadrature::GaussHermiteRule<f64>;
pub type Potential = models::PotentialSpec<f64>;
pub type State = propagator::CsState<f64>;
pub type Step = propagator::StepMatrix<f64>;
pub type Gram = propagator::GramForm<f64>;
pub type FockState = fock::FockState<f64>;
