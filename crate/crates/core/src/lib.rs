//! Binary-search initial designs for binary-response experiments.
//!
//! A response `Y` in `{0, 1}` follows `P(Y = 1) = F(a x + b)` with a logit,
//! probit or complementary log-log link. Before a locally D-optimal design
//! can be used, the experimenter needs maximum likelihood estimates, and those
//! exist only when successes and failures overlap on the factor axis. The
//! [`search`] module finds such an initial design by bisection; the other
//! modules cover the link functions, likelihood fitting, analytic and
//! simulated non-existence rates, and the stage-size cost model.

pub mod baseline;
pub mod cost;
pub mod error;
pub mod likelihood;
pub mod nonexistence;
pub mod oracle;
pub mod report;
pub mod response_models;
pub mod rng;
pub mod search;
pub mod simulation;

pub use error::{Error, Result};
pub use likelihood::{fit_mle, mle_exists, FitOptions, FitResult, Observation, ObservationSet};
pub use response_models::{CanonicalDesignPoints, LinkParams, ModelKind};
pub use search::{run_initial_design, Method, Phase, SearchConfig, SearchState};
