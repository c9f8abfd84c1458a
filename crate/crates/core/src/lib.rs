//! CT perfusion toolkit.
//!
//! * [`phantom`]: synthetic brain phantom, gamma-variate AIF and the
//!   tracer-kinetic forward model with optional Gaussian noise.
//! * [`deconv`]: truncated-SVD deconvolution (Toeplitz and block-circulant).
//! * [`perfmaps`]: Tmax, CBF, CBV, MTT and reference-normalised maps.
//! * [`triage`]: threshold segmentation, lesion volumes, mismatch criteria
//!   and clinical score validation.
//! * [`progression`]: infarct growth over time under treatment.
//! * [`io`]: JSON-header + raw volume files, curve CSVs and PGM previews.

// `!(x > 0.0)` style guards deliberately reject NaN along with the range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod deconv;
pub mod error;
pub mod grid;
pub mod io;
pub mod perfmaps;
pub mod phantom;
pub mod progression;
pub mod triage;
pub mod volume;

pub use deconv::{deconvolve, pad_curve, select_aif, IrfMap, Method};
pub use error::{Error, Result};
pub use grid::{Curve, TimeGrid};
pub use perfmaps::PerfusionMaps;
pub use phantom::{
    add_noise, forward_model, gamma_variate_aif, make_phantom, residue_curve, AifParams, CtpSeries,
    GroundTruthPhantom, HemoParams, Label, LesionSpec, PhantomSpec, ResidueShape,
};
pub use progression::{evolve, final_infarct, survival_time, SurvivalModel, TreatmentEvent};
pub use triage::{
    evaluate_mismatch, volume_ml, LesionMasks, MismatchCriterion, MismatchReport, Mtici,
};
pub use volume::{dice, Dims, Mask, Volume, VoxelSize};
