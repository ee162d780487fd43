//! Score-based graph diffusion with reverse-start alignment and
//! score-difference correction.

pub mod correction;
pub mod error;
pub mod graphs;
pub mod metrics;
pub mod oracle;
pub mod rng;
pub mod sampler;
pub mod schedule;
pub mod scorenet;

pub use error::{Error, Result};
pub use graphs::{Dataset, Graph};
pub use metrics::{evaluate, MmdReport};
pub use sampler::{sample, SamplerConfig};
pub use schedule::{KernelParams, NoiseSchedule, SdeKind};
pub use scorenet::{Arch, ScoreFn, ScoreModel};
