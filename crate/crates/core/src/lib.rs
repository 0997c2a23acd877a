//! Exponential dichotomies and bounded solutions for 1-periodic linear
//! hyperbolic systems `u_t + A(x,t) u_x + B(x,t) u = f` in one space dimension.

pub mod characteristics;
pub mod cli;
pub mod coefficients;
pub mod conditions;
pub mod dichotomy;
pub mod evolution;
pub mod expr;
pub mod grid;
pub mod quad;
pub mod reduction;
pub mod report;
