//! Non-Hermitian SSH chains with a PT-symmetric gain/loss region: complex
//! spectra, edge states, quench dynamics and 1D scattering.

pub mod dynamics;
pub mod exec;
pub mod lattice;
pub mod linalg;
pub mod scatter;
pub mod spectral;
