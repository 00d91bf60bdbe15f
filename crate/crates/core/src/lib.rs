//! Extremal learning: optimize the *input* of a trained feed-forward
//! regression network.
//!
//! A surrogate network is fitted to data ([`optim::train`]), its parameters
//! are frozen, and the input vector is then descended on a composite loss
//! made of an extremal term plus soft penalty terms ([`extremal::multi_start`]).
//! The [`reproduce`] module runs the whole pipeline on a four-input toy
//! problem with a known answer.
//!
//! The numerical core is generic over [`Scalar`] (`f64` or `f32`); the
//! aliases below fix the usual double-precision types.

// `!(a >= b)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod extremal;
pub mod losses;
pub mod nnet;
pub mod optim;
pub mod reproduce;
pub mod rng;

mod error;
mod scalar;

pub use error::{Error, Result};
pub use scalar::{norm2, Scalar};

pub type Network = nnet::Network<f64>;
pub type Network32 = nnet::Network<f32>;
pub type Layer = nnet::Layer<f64>;
pub type Gradients = nnet::Gradients<f64>;
pub type CompositeLoss = losses::CompositeLoss<f64>;
pub type CompositeLoss32 = losses::CompositeLoss<f32>;
pub type LossTerm = losses::LossTerm<f64>;
pub type ExtremalResult = extremal::ExtremalResult<f64>;
pub type ExtremalResult32 = extremal::ExtremalResult<f32>;
