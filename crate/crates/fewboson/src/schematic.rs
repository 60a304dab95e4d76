//! Analytic companion models for the variational results.
//!
//! Two deliberately crude pictures bracket the numerics: a long-range
//! oscillator spectrum with a per-pair energy shift, solvable in closed form,
//! and a short-range estimate that folds the pair potential with a Gaussian
//! density profile to produce a one-channel well for a single attached
//! particle. Both exist to judge whether a computed state looks universal,
//! not to replace the solver.

use std::sync::LazyLock;

use serde::Serialize;

use crate::radial::{self, RadialConfig, RadialError};
use crate::system::{PairPotential, WidthConvention};
use crate::HBAR;

/// Oscillator-model energy of level `level` for `n` particles with pair
/// frequency `omega` and per-pair shift `pair_shift`: the one-body frequency
/// scales by `sqrt(n/2)` and every pair contributes `-pair_shift`.
pub fn oscillator_energy(n: usize, level: usize, omega: f64, pair_shift: f64) -> f64 {
    let nf = n as f64;
    HBAR * omega * (nf / 2.0).sqrt() * (level as f64 + 1.5) * nf
        - 0.5 * nf * (nf - 1.0) * pair_shift
}

/// Oscillator-model mean squared distance of one particle from the centre of
/// mass at level `level`; the collective stiffening divides the one-body
/// value by `sqrt(n/2)`.
pub fn oscillator_radius_sq(n: usize, level: usize, omega: f64, mass: f64) -> f64 {
    HBAR / (mass * omega) * (2.0 / n as f64).sqrt() * (level as f64 + 1.5)
}

/// Pair shift that puts the oscillator-model ground state exactly at zero:
/// `hbar omega (3 / (n - 1)) sqrt(n / 2)`.
pub fn oscillator_threshold_strength(n: usize, omega: f64) -> f64 {
    HBAR * omega * 3.0 / (n as f64 - 1.0) * (n as f64 / 2.0).sqrt()
}

/// First excited level of an `n`-particle oscillator system at pair shift
/// `v_pair`: the ground level plus a single quantum of the collective mode,
/// `hbar omega sqrt(n/2)`.
///
/// Note the distinction from [`oscillator_energy`] with `level = 1`, whose
/// per-particle bookkeeping adds `n` quanta at once; near-threshold level
/// spacings are set by one collective quantum.
pub fn oscillator_first_excited(n: usize, omega: f64, v_pair: f64) -> f64 {
    oscillator_energy(n, 0, omega, v_pair) + HBAR * omega * (n as f64 / 2.0).sqrt()
}

/// Dimensionless offsets of the `(n + 1)`-particle ground and first excited
/// levels when the pair shift sits at the `n`-particle threshold; the common
/// prefactor `hbar omega (3 (n + 1) / 2) sqrt(n / 2)` is stripped.
///
/// For large `n` these approach `-1/(2n)` and `+1/(6n)`: the enlarged system
/// is slightly bound in its ground state, while its first excitation — one
/// collective quantum up — is pushed a third of that distance above zero.
pub fn oscillator_neighbour_brackets(n: usize) -> (f64, f64) {
    let nf = n as f64;
    let stretch = ((nf + 1.0) / nf).sqrt();
    let shift = nf / (nf - 1.0);
    let b0 = stretch - shift;
    // One collective quantum of the enlarged system over the prefactor.
    let b1 = b0 + 2.0 / (3.0 * (nf + 1.0)) * stretch;
    (b0, b1)
}

/// Oscillator-model energies of the `(n + 1)`-particle ground and first
/// excited levels at the `n`-particle threshold shift.
pub fn oscillator_neighbour_energies(n: usize, omega: f64) -> (f64, f64) {
    let nf = n as f64;
    let prefactor = HBAR * omega * 1.5 * (nf + 1.0) * (nf / 2.0).sqrt();
    let (b0, b1) = oscillator_neighbour_brackets(n);
    (prefactor * b0, prefactor * b1)
}

/// One-channel Gaussian well `depth * exp(-(r / width)^2)` seen by a single
/// particle outside a compact cloud.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EffectiveWell {
    /// Well depth at the origin (negative for attraction).
    pub depth: f64,
    /// Gaussian range of the well.
    pub width: f64,
}

impl EffectiveWell {
    /// Dimensionless strength `mu |depth| width^2 / hbar^2` for reduced mass
    /// `mu`; binding of the well is governed by this single number.
    pub fn strength(&self, mu: f64) -> f64 {
        mu * self.depth.abs() * self.width * self.width / (HBAR * HBAR)
    }

    /// The well as a pair potential for the radial solver.
    pub fn as_potential(&self) -> PairPotential {
        PairPotential::new(self.depth, self.width, WidthConvention::R2OverB2)
    }
}

/// Fold the pair potential `v0 exp(-r^2/b^2)` with a Gaussian density of
/// `n_core` particles whose mean squared radius is `core_msr`.
///
/// A normalised Gaussian cloud with that radius has profile range
/// `r_g^2 = (2/3) core_msr`, and the convolution of two Gaussians is again a
/// Gaussian: range `b^2 + r_g^2` and depth `n_core v0 b^3 / (b^2 +
/// r_g^2)^(3/2)`.
pub fn folded_well(n_core: usize, v0: f64, b: f64, core_msr: f64) -> EffectiveWell {
    let w_sq = b * b + 2.0 / 3.0 * core_msr;
    EffectiveWell {
        depth: n_core as f64 * v0 * b.powi(3) / w_sq.powf(1.5),
        width: w_sq.sqrt(),
    }
}

/// Reduced mass of one attached particle of mass `attached_mass` against a
/// rigid core of `n_core` particles of mass `core_particle_mass`.
pub fn attachment_reduced_mass(
    n_core: usize,
    core_particle_mass: f64,
    attached_mass: f64,
) -> f64 {
    let core = n_core as f64 * core_particle_mass;
    attached_mass * core / (attached_mass + core)
}

/// Critical dimensionless strength of a Gaussian well: the value of
/// `mu |v0| b^2 / hbar^2` at which the first bound state appears and the
/// scattering length diverges. Derived once from the radial solver.
pub fn critical_constant() -> f64 {
    static CRITICAL: LazyLock<f64> = LazyLock::new(|| {
        let template = PairPotential::new(-1.0, 1.0, WidthConvention::R2OverB2);
        let cfg = RadialConfig::default();
        let v0 = radial::critical_strength_with_tol(1, 0.5, &template, &cfg, 1e-9)
            .expect("unit well threshold");
        0.5 * v0.abs()
    });
    *CRITICAL
}

/// Folded-well strength when the pair strength is pinned at two-body
/// unitarity between a core particle and the attached particle.
///
/// The pair depth is eliminated via `mu_pair |v0| b^2 / hbar^2 = g_c` (the
/// critical two-body combination), leaving the closed form
/// `g_c n_core (1 + M/m) / ((1 + M/(m n_core)) sqrt(1 + (2/3) core_msr /
/// b^2))` with `m` the core-particle mass and `M` the attached mass; the
/// `n_core` factor counts the folded pair potentials.
pub fn unitarity_attachment_strength(
    n_core: usize,
    core_particle_mass: f64,
    attached_mass: f64,
    b: f64,
    core_msr: f64,
) -> f64 {
    let ratio = attached_mass / core_particle_mass;
    critical_constant() * n_core as f64 * (1.0 + ratio)
        / ((1.0 + ratio / n_core as f64) * (1.0 + 2.0 / 3.0 * core_msr / (b * b)).sqrt())
}

/// Schematic description of one particle attached to a compact cloud.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AttachmentEstimate {
    /// Folded one-channel well.
    pub well: EffectiveWell,
    /// Reduced mass of the attached particle against the cloud.
    pub reduced_mass: f64,
    /// Dimensionless strength of the folded well.
    pub strength: f64,
    /// Critical strength a Gaussian well needs to bind.
    pub critical: f64,
    /// Scattering length of the attached particle on the folded well.
    pub scattering_length: f64,
    /// Whether the scattering length exceeded the divergence cutoff.
    pub diverged: bool,
}

/// Estimate how a single particle of mass `attached_mass` binds to a cloud
/// of `n_core` particles (mass `core_particle_mass`, pair strength `v0`,
/// range `b`, cloud mean squared radius `core_msr`): fold the pair potential
/// into a one-channel well, compare its strength to the critical one, and
/// solve the well for the attachment scattering length.
pub fn attachment_estimate(
    n_core: usize,
    v0: f64,
    b: f64,
    core_msr: f64,
    core_particle_mass: f64,
    attached_mass: f64,
    cfg: &RadialConfig,
) -> Result<AttachmentEstimate, RadialError> {
    let well = folded_well(n_core, v0, b, core_msr);
    let mu = attachment_reduced_mass(n_core, core_particle_mass, attached_mass);
    let strength = well.strength(mu);
    let scatter = radial::scattering_length(mu, &well.as_potential(), cfg)?;
    Ok(AttachmentEstimate {
        well,
        reduced_mass: mu,
        strength,
        critical: critical_constant(),
        scattering_length: scatter.a,
        diverged: scatter.diverged,
    })
}
