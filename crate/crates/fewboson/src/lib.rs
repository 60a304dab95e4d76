//! Variational solver for weakly bound clusters of a few identical bosons,
//! optionally with one lighter impurity, interacting through attractive
//! Gaussian pair potentials.
//!
//! The library covers the full pipeline: exact radial two-body reference
//! solutions, correlated-Gaussian matrix elements, a generalized symmetric
//! eigensolver, stochastic growth and refinement of the basis, structural
//! observables (radii, pair distances, halo decomposition), schematic
//! oscillator/folding estimates, and parameter-scan drivers (strength sweeps,
//! binding thresholds, power-law fits, mass scans).
//!
//! Internal units set ħ = 1, the heavy-particle mass m = 1 and the potential
//! range b = 1, so energies come out in units of ħ²/(mb²) — the characteristic
//! energy ħ²/(2μb²) of a heavy pair (reduced mass μ = m/2) — and lengths in
//! units of b.

pub mod elements;
pub mod observables;
pub mod radial;
pub mod scan;
pub mod schematic;
pub mod spectral;
pub mod svm;
pub mod system;

/// Reduced Planck constant in internal units.
pub const HBAR: f64 = 1.0;
