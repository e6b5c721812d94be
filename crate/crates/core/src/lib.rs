//! Epistemic ensembles: agents running processes whose actions change what
//! everyone knows, executed over classes of Kripke structures or over finite
//! symbolic knowledge bases.

pub mod actions;
pub mod dsl;
pub mod engine;
pub mod ensemble;
pub mod equivalence;
pub mod formula;
pub mod kripke;
pub mod process;
pub mod prover;
pub mod random;
pub mod relation;
pub mod semantic;
pub mod symbolic;
