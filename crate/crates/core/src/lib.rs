//! Deterministic simulator for second-order federated optimization on
//! ℓ2-regularized logistic regression.
//!
//! Six methods share one server loop ([`orchestrator::run_round`]): GIANT, GIANT
//! with local steps and a global or local line search, LocalNewton with a
//! global line search, LocalNewton, and FedAvg. Every round is charged in
//! communication rounds and per-sample gradient-equivalents
//! ([`accounting::CostCounters`]) so first- and second-order methods can be
//! compared under the same budget ([`accounting::match_budget`]).
//!
//! ```
//! use fednewton::data::{synth_generate, SyntheticSpec};
//! use fednewton::model::objectives;
//! use fednewton::orchestrator::{run_experiment, ExperimentConfig, Method, MethodConfig};
//!
//! let data = synth_generate(&SyntheticSpec { clients: 4, ..SyntheticSpec::iid(1) }).unwrap();
//! let objs = objectives(&data.clients, 1e-3).unwrap();
//! let cfg = ExperimentConfig {
//!     method: MethodConfig::new(Method::Giant),
//!     rounds: 3,
//!     active_clients: 2,
//!     seed: 7,
//! };
//! let trace = run_experiment(&cfg, &objs).unwrap();
//! assert_eq!(trace.records.last().unwrap().comm_rounds, 9);
//! ```

pub mod accounting;
pub mod cg;
pub mod data;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod line_search;
pub mod local;
pub mod model;
pub mod orchestrator;

pub use error::{Error, Result};
