//! Spreading speeds, principal spectrum points and linear-determinacy
//! diagnostics for two-species competition with nonlocal dispersal in
//! time- and space-periodic habitats.

pub mod config;
pub mod determinacy;
pub mod discretize;
pub mod evolve;
pub mod fronts;
pub mod expr;
pub mod habitat;
pub mod par;
pub mod lab;
pub mod spectral;
pub mod speeds;
