//! Bilingual lexicon induction from monolingual word embeddings.
//!
//! Two languages are first aligned without supervision
//! ([`alignment::wasserstein_procrustes`]). Translations are then ranked for
//! each source word, either by a fixed criterion such as nearest neighbour
//! or CSLS ([`retrieval`]) or by a ranker ([`ltr`]) trained on a third,
//! supervised language pair and applied to the unsupervised one
//! ([`pipeline::run_rubi`]).
//!
//! ```no_run
//! use rubi::pipeline::{run_rubi, PipelineConfig, RubiInputs};
//!
//! # fn main() -> rubi::Result<()> {
//! let cfg = PipelineConfig::load("run.cfg")?;
//! let run = run_rubi(&cfg, &RubiInputs::load(&cfg)?)?;
//! println!("{}", run.result.to_json());
//! # Ok(())
//! # }
//! ```

pub mod alignment;
pub mod assignment;
pub mod embeddings;
pub mod error;
pub mod linalg;
pub mod ltr;
pub mod pipeline;
pub mod retrieval;
pub mod synthetic;

pub use error::{Error, Result};
