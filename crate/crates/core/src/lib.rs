//! A desk-scale laboratory for non-commutative invariance (NCI) in domain
//! adaptation.

pub mod algebra;
pub mod autodiff;
pub mod classifier;
pub mod config;
pub mod divergence;
pub mod error;
pub mod experiments;
pub mod nn;
pub mod oracle;
pub mod seeding;
pub mod selftest;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
