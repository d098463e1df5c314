//! Data-generating processes and the seeded Monte Carlo runner.

pub mod config;
pub mod dgp;
pub mod dist;
pub mod report;
pub mod studies;

pub use config::{apply_override, DgpParams, Study, StudyConfig};
pub use dgp::{generate, CausalDgp, CausalSample, Dgp, MeanShift, NonLinear2d, PlantedMtl, Sample, Scenario, SigmoidBernoulli};
pub use dist::{sample_scalar, Dist};
pub use report::{aggregate, paired, paired_methods, sign_test, MtlDetail, Summary, TrialReport};
pub use studies::{run_replicate, run_study, write_outputs, StudyOutput};
