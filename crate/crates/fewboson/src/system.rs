//! Particle content, the Gaussian pair interaction and Jacobi-coordinate
//! frames shared by every solver stage.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::HBAR;

/// Largest particle count the solver accepts.
pub const MAX_PARTICLES: usize = 8;

/// Relative tolerance used when checking that the heavy masses are equal.
const MASS_PATTERN_TOL: f64 = 1e-12;

/// Errors raised while describing or transforming a system.
#[derive(Debug, Error)]
pub enum SystemError {
    #[error("particle count {0} outside supported range 2..={MAX_PARTICLES}")]
    ParticleCount(usize),
    #[error("expected {expected} masses, got {got}")]
    MassCount { expected: usize, got: usize },
    #[error("masses must be finite and positive, got {0}")]
    BadMass(f64),
    #[error("potential range must be finite and positive, got {0}")]
    BadRange(f64),
    #[error("potential depth must be finite, got {0}")]
    BadDepth(f64),
    #[error(
        "unsupported species pattern: need identical particles first and at most \
         one lighter particle last (mass ratio in (0, 1])"
    )]
    SpeciesPattern,
    #[error("mass ratio must lie in (0, 1], got {0}")]
    BadMassRatio(f64),
    #[error("Jacobi transform is singular for the given masses")]
    SingularTransform,
}

/// How the range parameter enters the Gaussian pair potential.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum,
)]
#[serde(rename_all = "kebab-case")]
pub enum WidthConvention {
    /// V(r) = V0 · exp(−r²/b²).
    #[default]
    R2OverB2,
    /// V(r) = V0 · exp(−r²/(2b²)).
    R2Over2B2,
}

impl WidthConvention {
    /// Squared Gaussian width w² appearing in exp(−r²/w²).
    pub fn width_sq(self, b: f64) -> f64 {
        match self {
            WidthConvention::R2OverB2 => b * b,
            WidthConvention::R2Over2B2 => 2.0 * b * b,
        }
    }
}

/// Attractive (or repulsive) Gaussian acting between every pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairPotential {
    /// Depth: negative values attract.
    pub v0: f64,
    /// Nominal range b.
    pub b: f64,
    /// Interpretation of b inside the exponent.
    #[serde(default)]
    pub width_convention: WidthConvention,
}

impl PairPotential {
    pub fn new(v0: f64, b: f64, width_convention: WidthConvention) -> Self {
        Self { v0, b, width_convention }
    }

    /// Squared width of exp(−r²/w²) under the chosen convention.
    pub fn width_sq(&self) -> f64 {
        self.width_convention.width_sq(self.b)
    }

    /// Potential value at pair separation r.
    pub fn value(&self, r: f64) -> f64 {
        self.v0 * (-r * r / self.width_sq()).exp()
    }

    /// Same potential with a different depth.
    pub fn with_depth(&self, v0: f64) -> Self {
        Self { v0, ..*self }
    }

    fn validate(&self) -> Result<(), SystemError> {
        if !(self.b.is_finite() && self.b > 0.0) {
            return Err(SystemError::BadRange(self.b));
        }
        if !self.v0.is_finite() {
            return Err(SystemError::BadDepth(self.v0));
        }
        Ok(())
    }
}

/// A cluster of `n_total` particles: identical heavy bosons listed first and
/// at most one lighter particle listed last, all interacting through the same
/// Gaussian pair potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SystemSpecJson", into = "SystemSpecJson")]
pub struct SystemSpec {
    pub n_total: usize,
    /// One mass per particle, heavy species first.
    pub masses: Vec<f64>,
    pub potential: PairPotential,
}

/// Flat interchange form used by the CLI and run records.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct SystemSpecJson {
    n: usize,
    masses: Vec<f64>,
    v0: f64,
    b: f64,
    #[serde(default)]
    width_convention: WidthConvention,
}

impl From<SystemSpec> for SystemSpecJson {
    fn from(spec: SystemSpec) -> Self {
        Self {
            n: spec.n_total,
            masses: spec.masses,
            v0: spec.potential.v0,
            b: spec.potential.b,
            width_convention: spec.potential.width_convention,
        }
    }
}

impl TryFrom<SystemSpecJson> for SystemSpec {
    type Error = SystemError;

    fn try_from(json: SystemSpecJson) -> Result<Self, SystemError> {
        let spec = SystemSpec {
            n_total: json.n,
            masses: json.masses,
            potential: PairPotential::new(json.v0, json.b, json.width_convention),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl SystemSpec {
    /// `n_total` identical particles of unit mass.
    pub fn identical(n_total: usize, potential: PairPotential) -> Result<Self, SystemError> {
        let spec = Self { n_total, masses: vec![1.0; n_total], potential };
        spec.validate()?;
        Ok(spec)
    }

    /// `n_total − 1` identical unit-mass particles plus one particle of mass
    /// `mass_ratio` (relative to the heavy mass) listed last.
    pub fn with_light(
        n_total: usize,
        mass_ratio: f64,
        potential: PairPotential,
    ) -> Result<Self, SystemError> {
        if !(mass_ratio.is_finite() && mass_ratio > 0.0 && mass_ratio <= 1.0) {
            return Err(SystemError::BadMassRatio(mass_ratio));
        }
        let mut masses = vec![1.0; n_total.max(1) - 1];
        masses.push(mass_ratio);
        let spec = Self { n_total, masses, potential };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SystemError> {
        if !(2..=MAX_PARTICLES).contains(&self.n_total) {
            return Err(SystemError::ParticleCount(self.n_total));
        }
        if self.masses.len() != self.n_total {
            return Err(SystemError::MassCount {
                expected: self.n_total,
                got: self.masses.len(),
            });
        }
        for &m in &self.masses {
            if !(m.is_finite() && m > 0.0) {
                return Err(SystemError::BadMass(m));
            }
        }
        self.potential.validate()?;
        // species pattern: the first n−1 masses equal, the last one not heavier
        let heavy = self.masses[0];
        for &m in &self.masses[..self.n_total - 1] {
            if (m - heavy).abs() > MASS_PATTERN_TOL * heavy {
                return Err(SystemError::SpeciesPattern);
            }
        }
        let last = self.masses[self.n_total - 1];
        if last > heavy * (1.0 + MASS_PATTERN_TOL) {
            return Err(SystemError::SpeciesPattern);
        }
        Ok(())
    }

    /// Mass of the identical (heavy) species.
    pub fn heavy_mass(&self) -> f64 {
        self.masses[0]
    }

    /// Mass ratio (last particle / heavy particle); 1 for identical systems.
    pub fn mass_ratio(&self) -> f64 {
        self.masses[self.n_total - 1] / self.masses[0]
    }

    /// Whether the last particle is a distinct lighter species.
    pub fn has_light(&self) -> bool {
        self.mass_ratio() < 1.0 - MASS_PATTERN_TOL
    }

    /// Number of identical heavy particles.
    pub fn n_heavy(&self) -> usize {
        if self.has_light() { self.n_total - 1 } else { self.n_total }
    }

    /// Characteristic pair energy ħ²/(2μb²) of the heavy species, μ = m/2.
    pub fn characteristic_energy(&self) -> f64 {
        HBAR * HBAR / (self.heavy_mass() * self.potential.b * self.potential.b)
    }

    /// Reduced mass of particles i and j.
    pub fn reduced_mass(&self, i: usize, j: usize) -> f64 {
        let (mi, mj) = (self.masses[i], self.masses[j]);
        mi * mj / (mi + mj)
    }

    /// Jacobi frame for this mass configuration.
    pub fn jacobi(&self) -> Result<JacobiFrame, SystemError> {
        JacobiFrame::build(&self.masses)
    }
}

/// Ordered list of the n(n−1)/2 particle pairs (i, j) with i < j.
pub fn pairs(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            out.push((i, j));
        }
    }
    out
}

/// Jacobi coordinates x_k = r_{k+1} − CM(r_0..r_k) for k = 0..n−2, with the
/// centre of mass removed.  The last particle (the light one for two-species
/// systems) is attached by the final coordinate.
#[derive(Debug, Clone)]
pub struct JacobiFrame {
    pub n: usize,
    pub masses: Vec<f64>,
    pub total_mass: f64,
    /// Rows k = 0..n−2 of the full transform; each row sums to zero.
    pub transform: DMatrix<f64>,
    /// Inverse reduced masses Λ_k = 1/μ_k of each Jacobi coordinate, so the
    /// internal kinetic energy is (ħ²/2) Σ_k Λ_k p_k².
    pub inverse_mass: Vec<f64>,
    /// One vector per entry of `pairs(n)`: r_i − r_j = Σ_k w[k] x_k.
    pub pair_vectors: Vec<DVector<f64>>,
    /// One vector per particle: r_i − R_cm = Σ_k q[k] x_k.
    pub one_body_vectors: Vec<DVector<f64>>,
}

impl JacobiFrame {
    pub fn build(masses: &[f64]) -> Result<Self, SystemError> {
        let n = masses.len();
        if !(2..=MAX_PARTICLES).contains(&n) {
            return Err(SystemError::ParticleCount(n));
        }
        for &m in masses {
            if !(m.is_finite() && m > 0.0) {
                return Err(SystemError::BadMass(m));
            }
        }

        // full transform: n−1 relative rows followed by the centre-of-mass row
        let mut full = DMatrix::zeros(n, n);
        let mut partial = masses[0];
        for k in 0..n - 1 {
            for i in 0..=k {
                full[(k, i)] = -masses[i] / partial;
            }
            full[(k, k + 1)] = 1.0;
            partial += masses[k + 1];
        }
        let total_mass = partial;
        for i in 0..n {
            full[(n - 1, i)] = masses[i] / total_mass;
        }

        let inverse = full.clone().try_inverse().ok_or(SystemError::SingularTransform)?;

        let mut inverse_mass = Vec::with_capacity(n - 1);
        let mut head = masses[0];
        for k in 0..n - 1 {
            let mu = masses[k + 1] * head / (masses[k + 1] + head);
            inverse_mass.push(1.0 / mu);
            head += masses[k + 1];
        }

        let pair_vectors = pairs(n)
            .into_iter()
            .map(|(i, j)| DVector::from_fn(n - 1, |k, _| inverse[(i, k)] - inverse[(j, k)]))
            .collect();
        let one_body_vectors = (0..n)
            .map(|i| DVector::from_fn(n - 1, |k, _| inverse[(i, k)]))
            .collect();

        Ok(Self {
            n,
            masses: masses.to_vec(),
            total_mass,
            transform: full.rows(0, n - 1).into_owned(),
            inverse_mass,
            pair_vectors,
            one_body_vectors,
        })
    }

    /// Number of internal coordinates.
    pub fn dim(&self) -> usize {
        self.n - 1
    }

    /// Pair vector for particles (i, j), i < j, in `pairs` order.
    pub fn pair_vector(&self, i: usize, j: usize) -> &DVector<f64> {
        debug_assert!(i < j && j < self.n);
        let idx = pairs(self.n).iter().position(|&p| p == (i, j)).expect("valid pair");
        &self.pair_vectors[idx]
    }

    /// Internal coordinates for the given particle positions (one scalar per
    /// particle models one Cartesian component).
    pub fn internal_coords(&self, positions: &[f64]) -> DVector<f64> {
        let r = DVector::from_column_slice(positions);
        &self.transform * r
    }
}
