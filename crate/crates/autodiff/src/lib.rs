//! A small reverse-mode automatic differentiation engine over `ndarray`.
//!
//! Gradients are recorded as ordinary graph nodes, so the result of a
//! backward pass can itself be differentiated (double backprop). This is what
//! the WGAN gradient penalty needs: the norm of an input gradient is part of
//! a loss that is then differentiated with respect to the critic parameters.

pub mod gradcheck;
pub mod nn;
pub mod tape;

pub use nn::{conv2d, dense, Adam, Bound, ParamId, ParamSet};
pub use tape::{Arr, ConvGeom, Tape, UpsampleKind, Var};
