//! Thermodynamics of moving viscous media on flat two- and three-dimensional
//! domains.
//!
//! The numerical core is generic over the scalar type (`f32`, `f64`; the
//! tensor algebra also accepts exact rationals). Aliases below fix the
//! common choices.

// `!(x > 0)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coexistence;
pub mod error;
pub mod field;
pub mod io;
pub mod linalg;
pub mod plane;
pub mod scalar;
pub mod tensor;
pub mod thermo;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::{Real, Scalar};

use num_rational::Rational64;

pub type Tensor = tensor::MixedTensor<f64>;
pub type Tensor32 = tensor::MixedTensor<f32>;
pub type ExactTensor = tensor::MixedTensor<Rational64>;
pub type Metric = tensor::Metric<f64>;
pub type ExactMetric = tensor::Metric<Rational64>;
pub type ComplexStructure = tensor::ComplexStructure<f64>;
pub type ExactComplexStructure = tensor::ComplexStructure<Rational64>;
pub type CoefficientModel = thermo::CoefficientModel<f64>;
pub type Medium = thermo::Medium<f64>;
pub type Medium32 = thermo::Medium<f32>;
pub type ThermoState = thermo::ThermoState<f64>;
pub type SimState = plane::SimState<f64>;
pub type SimConfig = plane::SimConfig<f64>;
pub type SimCoefficients = plane::SimCoefficients<f64>;
