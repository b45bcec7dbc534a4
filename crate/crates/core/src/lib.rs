pub mod cli;
pub mod dispersion;
pub mod error;
pub mod kernel;
pub mod kinetics;
pub mod front;
pub mod linalg;
pub mod phasediag;
pub mod quad;
