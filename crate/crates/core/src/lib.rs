pub mod chaos;
pub mod clt;
pub mod error;
pub mod harness;
pub mod kernels;
pub mod partition;
pub mod poc;
pub mod rmeasure;
pub mod rng;
pub mod scenarios;
pub mod stats;
