//! Numerical kernel for covariant variational calculus on parametric surfaces.
//!
//! The crate evaluates curvature geometry, elastic energy functionals, their
//! first and second variations, and the associated stress / torque balance
//! laws for fluid-membrane models (surface tension, mean- and Gaussian-
//! curvature elasticity, pressure, phase-field coupling, external fields) on
//! structured parametric grids.
//!
//! Module layering (each layer depends only on the ones above it):
//!
//! * [`jet`] — truncated Taylor ("jet") arithmetic used to propagate exact
//!   parametric derivatives through every pointwise kernel,
//! * [`grid`] — structured grids, finite-difference stencils, quadrature,
//! * [`geometry`] — first/second fundamental forms, connection, curvature,
//!   geometric identity checks,
//! * [`catalog`] — reference surfaces and variation fields,
//! * [`energy`] — energy terms, densities and phase-space gradients,
//! * [`mechanics`] — stress tensors, Euler–Lagrange residuals, balance laws,
//! * [`second_variation`] — Hessian blocks and second-variation assembly,
//! * [`oracle`] — finite-difference variational oracle used to cross-check
//!   every analytic variation,
//! * [`cli`] — configuration-driven command driver producing reports.

// Tensor kernels index fixed small dimensions (0..2, 0..3) explicitly so the
// code reads like the formulas it implements; jet division legitimately
// multiplies inside `Div` (quotient rule); `!(x > 0.0)` in validation is a
// deliberate NaN rejection; block-Hessian types are naturally nested arrays.
#![allow(
    clippy::needless_range_loop,
    clippy::suspicious_arithmetic_impl,
    clippy::neg_cmp_op_on_partial_ord,
    clippy::type_complexity,
    clippy::if_same_then_else
)]

pub mod jet;
pub mod grid;
pub mod geometry;
pub mod catalog;
pub mod energy;
pub mod mechanics;
pub mod second_variation;
pub mod oracle;
pub mod cli;
