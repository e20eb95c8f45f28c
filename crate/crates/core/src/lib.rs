//! Fisher-information analysis of a millimeter-wave MIMO positioning link
//! aided by a large intelligent surface.
//!
//! The crate models a two-path downlink (one direct path, one reflection
//! through a passive phase-controlled surface), derives the Fisher
//! information of the channel parameters in closed form, validates it
//! against a definition-based finite-difference oracle, transforms it to
//! position/orientation error bounds, and runs the two-stage weighted
//! least-squares estimator whose RMSE those bounds limit.
//!
//! Modules:
//! - [`scenario`]: node geometry, channel-parameter map, position Jacobian.
//! - [`channel`]: steering vectors, phase profiles, received mean, sampling.
//! - [`phase`]: surface phase-profile design and the coherent-gain bound.
//! - [`fim`]: closed-form channel-parameter information.
//! - [`oracle`]: finite-difference information engine and the scatterer
//!   benchmark.
//! - [`validate`]: closed-form vs oracle comparison with discrepancy report.
//! - [`bounds`]: position/orientation error bounds.
//! - [`estimator`]: LoS seed, damped Gauss-Newton, Monte Carlo campaigns.

pub mod bounds;
pub mod channel;
pub mod estimator;
pub mod fim;
pub mod linalg;
pub mod oracle;
pub mod phase;
pub mod scenario;
pub mod validate;

pub use bounds::{
    benchmark_bounds, bounds_report, fim_position, BoundsError, BoundsReport, FimSource,
};
pub use channel::{
    channel_matrix, received_mean, sample_received, steering_derivative, steering_vector,
    ChannelError, PhaseProfile, Precoder,
};
pub use estimator::{
    init_from_los, monte_carlo_rmse, solve_wls, EstimationProblem, EstimationResult,
    EstimatorError, MonteCarloSummary,
};
pub use fim::{
    fim_channel_subcarrier, fim_channel_total, nlos_scalars, FimError, FimMatrix, NlosScalars,
};
pub use oracle::{
    benchmark_fim, fim_numeric, fim_numeric_total, OracleError, ParamVector, BENCH_LABELS,
};
pub use phase::{beta_gain, incremental_phase, random_phase};
pub use scenario::{
    channel_params_from_geometry, jacobian_t1, max_far_field_elements, validate_angular_sector,
    ChannelParams, GeometryError, KnownGeometry, PositionState, Scenario, ScenarioError,
    SectorWarning, ETA_LABELS, SPEED_OF_LIGHT,
};
pub use validate::{validate_closed_form, DiscrepancyRecord, ValidationReport};
