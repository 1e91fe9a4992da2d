//! Second-order bootstrap inference for functionals whose first-order
//! derivative is degenerate, with the modified J-test for common
//! conditionally heteroskedastic features as the main application.

pub mod bootstrap;
pub mod cli;
pub mod derivative;
pub mod error;
pub mod inference;
pub mod io;
pub mod moments;
pub mod montecarlo;
pub mod rng;
pub mod simulate;
pub mod sphereopt;

pub use bootstrap::{critical_value, BootstrapDraws, BootstrapScheme};
pub use derivative::{DerivEstimator, DerivKind, DirectionFn, QuadDirection};
pub use error::{Error, Result};
pub use inference::{ch_feature_test, KappaRule, TestOutcome};
pub use montecarlo::{run_design, McConfig, McTable};
pub use moments::{fit_quadratic_moments, QuadMomentModel, SphereVec, Weight};
pub use simulate::{DesignSpec, GarchParams, PanelData};
pub use sphereopt::{estimate_identified_set, grid_oracle_sphere, minimize_on_sphere, IdentifiedSetEstimate, SphereMinResult};
