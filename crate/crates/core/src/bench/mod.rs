//! Experiment harness: configs, studies, the reconstruction demo and result files.

pub mod config;
pub mod reconstruct;
pub mod record;
pub mod studies;

pub use config::{
    CompressionMethod, ExperimentConfig, PreconditionerKind, Shape, ThresholdMode, RECONSTRUCTION_LAMBDA_FACTOR,
    STUDY_LAMBDA_FACTOR,
};
pub use reconstruct::{marching_squares, reconstruct_implicit_curve, signed_distance_samples, Reconstruction};
pub use record::{emit, emit_dat, parse_records_csv, write_records_csv, write_records_dat, ExperimentRecord, CSV_HEADER};
pub use studies::{run_compression_study, run_preconditioner_study, setup_study, Check, StudyOutcome, StudySetup};
