//! Semi-supervised estimation of Ising graphical models.
//!
//! A small labeled sample `(y, x, w)` and a large unlabeled sample `(x, w)`
//! are combined to estimate the parameters of an Ising model for the binary
//! outcome vector `y`. The supervised pseudo-likelihood estimate is corrected
//! by the difference between the labeled and unlabeled means of the projected
//! score `E[S(y) | x, w]`, computed under one of two conditional models for
//! `y` given the auxiliary features.
//!
//! The crate is `no_std` (it needs `alloc`); file formats, the command line
//! and the parallel simulation driver live in the companion `sciss` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod conditional;
pub mod data;
pub mod dr;
pub mod error;
pub mod ising;
pub mod linalg;
pub mod math;
pub mod pipeline;
pub mod sciss;
pub mod sim;
pub mod supervised;

mod glm;

pub use conditional::{
    AugParams, CondDistribution, ConditionalModel, FeatureTransform, PosParams, SurrogateFamily,
};
pub use data::{LabeledSample, Schema, UnlabeledSample};
pub use error::{Error, Result};
pub use ising::{IsingParams, OutcomeConfig, StackedLayout};
pub use linalg::{Mat, SolverConfig};
pub use pipeline::{Method, PipelineConfig};
pub use sciss::{EstimateReport, InfluenceTable};
pub use supervised::{NodewiseFit, SlFit};
