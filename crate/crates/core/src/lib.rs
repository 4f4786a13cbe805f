//! Coarse invariants of zero-dimensional metric spaces: threshold components, capacities,
//! oscillation moduli, towers with their boundary ultrametrics, tower morphisms, the Key Lemma
//! immersion construction, and synthesis of certified equivalences with binary-tower models.

pub mod cli;
pub mod error;
pub mod key_lemma;
pub mod metric;
pub mod morphism;
pub mod multimap;
pub mod rational;
pub mod synthesis;
pub mod tower;

pub use error::{Error, Result};
