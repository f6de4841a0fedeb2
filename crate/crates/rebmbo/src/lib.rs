//! Black-box optimization toolkit built around three cooperating models:
//! a Gaussian-process surrogate (exact, sparse inducing-point, or deep
//! feature variants) over an RBF + Matérn-5/2 mixture kernel, an
//! energy-based model trained by short-run Langevin MCMC that supplies a
//! global landscape signal, and a PPO agent that turns point selection into
//! a multi-step decision process. The energy signal enters both the
//! acquisition (`μ + βσ − γE`) and the agent reward (`y − λE`).
//!
//! The crate ships analytic benchmarks (Branin, Ackley, Rosenbrock, an
//! exponential-sum high-dimensional function), GP-UCB and random-search
//! baselines, standard and landscape-aware regret metrics, and a CLI
//! harness (`rebmbo run|sweep|report`) that persists seeded, bit-reproducible
//! JSON/CSV traces.

pub mod acquisition;
pub mod agent;
pub mod benchmarks;
pub mod cli;
pub mod ebm;
pub mod error;
pub mod gp;
pub mod kernels;
pub mod metrics;
pub mod net;
pub mod orchestrator;
pub mod rng;
pub mod trace;

pub use error::{Error, Result};
