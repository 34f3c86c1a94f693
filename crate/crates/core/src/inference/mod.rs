//! Hierarchical fitting of trajectory parameters to longitudinal swab data.

pub mod data;
pub mod fit;
pub mod model;
pub mod priors;
pub mod sampler;
pub mod synthetic;

pub use data::{load_dataset, AnchorMode, CaseSeries, DataError, Dataset, Measurement, ObservationRecord};
pub use fit::{
    fit, load_posterior, read_posterior_csv, write_posterior_csv, CaseSummary, Diagnostics, FitConfig,
    FitError, PosteriorDraws, PosteriorReadError,
};
pub use model::{log_posterior, posterior_terms, PosteriorTerms};
pub use priors::PriorSet;
pub use synthetic::{simulate_dataset, SyntheticData, SyntheticDesign};
