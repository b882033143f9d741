//! Weighted least-squares approximation from random designs.
//!
//! Given an orthonormal basis of a space `V_m ⊂ L²_μ` and point evaluations
//! of a target function, this crate builds random sample designs (i.i.d.
//! reference sampling, i.i.d. inverse-Christoffel sampling, projection DPP,
//! generalized volume sampling, repeated DPP and their stability-conditioned
//! versions), fits weighted least-squares projections, and provides the
//! Monte Carlo harness used by the `dppls` CLI.

pub mod basis;
pub mod bounds;
pub mod error;
pub mod experiments;
pub mod lsq;
pub mod measure;
pub mod rng;
pub mod sampler;

pub use basis::{BasisFamily, FeatureBasis, RotatedBasisState};
pub use error::{Error, Result};
pub use experiments::{CsvTable, ExperimentConfig, TargetFunction};
pub use lsq::{EmpiricalGram, LsqFit};
pub use measure::{GridDensitySampler, QuadratureRule, ReferenceMeasure};
pub use rng::RngStream;
pub use sampler::{DesignSample, DesignSampler, Scheme, WeightFunction};
