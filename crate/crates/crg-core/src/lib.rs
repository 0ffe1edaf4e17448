//! Sectorial asymptotic analysis of linear ODEs with exponential
//! polynomial coefficients, plus numerical verification that solutions
//! grow completely regularly: ray-wise indicator measurements matched
//! against symbolically predicted growth branches.
//!
//! Pipeline:
//! 1. [`exppoly`] — exact exponential polynomial algebra and parsing.
//! 2. [`geometry`] — exact frequency hulls, critical rays, sector systems.
//! 3. [`decomp`] — normal-form grouping and the recursive coefficient
//!    equation tree ending in polynomial-coefficient equations.
//! 4. [`asymptotics`] — Newton polygons, Puiseux growth exponents, Stokes
//!    rays, indicator candidates.
//! 5. [`num`] — high-precision ray integration, exceptional-set filtering,
//!    order/indicator estimation, and the verification report.

pub mod asymptotics;
pub mod decomp;
pub mod exact;
pub mod exppoly;
pub mod parser;
pub mod pipeline;
pub mod geometry;
pub mod poly;
pub mod report;

pub mod num {
    pub mod estimate;
    pub mod integrate;
    pub mod verify;
    pub mod dd;
    pub mod scalar;
}
