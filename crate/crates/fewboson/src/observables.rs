//! Structural observables of solved states: radii, pair distances, halo
//! decomposition and the exchange-symmetry diagnostic.
//!
//! Everything here is an expectation value over an optimised ensemble from
//! [`crate::svm`]. Quadratic moments come from the closed-form kernels in
//! [`crate::elements`]; the halo quantities reinterpret two radii as a
//! core-plus-one-particle split; the exchange diagnostic measures how close a
//! partially symmetrised state is to fully bosonic.

use serde::Serialize;
use thiserror::Error;

use crate::elements::ElementError;
use crate::svm::BasisEnsemble;
use crate::HBAR;

/// Failure modes when reading observables off a solved ensemble.
#[derive(Debug, Error)]
pub enum ObservableError {
    /// The requested state sits at or above zero energy; its radius is a
    /// basis artefact, not a physical size.
    #[error("state {state} is not bound (energy {energy:.6e} >= 0)")]
    UnboundState {
        /// State index.
        state: usize,
        /// Variational energy of that state.
        energy: f64,
    },
    /// The requested state index exceeds the rank of the solved problem.
    #[error("state {state} out of range: only {rank} states available")]
    NoSuchState {
        /// State index.
        state: usize,
        /// Number of available states.
        rank: usize,
    },
    /// A core-plus-one decomposition came out with a negative halo radius,
    /// meaning the system is more compact than its supposed core.
    #[error("halo decomposition gives negative squared radius {value:.6e}")]
    NegativeHalo {
        /// The (negative) squared halo radius.
        value: f64,
    },
    /// Matrix-element evaluation failed.
    #[error(transparent)]
    Element(#[from] ElementError),
}

/// Quadratic moments of one state, all divided by the state norm.
#[derive(Clone, Copy, Debug)]
pub struct StateMoments {
    /// Norm `c' S c` actually used as the divisor (should be 1 after a full
    /// re-solve; kept explicit so the moments are robust to scaling).
    pub norm: f64,
    /// Mean over particles of the squared distance to the centre of mass.
    pub msr: f64,
    /// Mean over all pairs of the squared pair distance.
    pub pair_all: f64,
    /// Mean squared distance over pairs not involving the last particle;
    /// `None` when the symmetry group moves the last particle or no such
    /// pair exists.
    pub pair_core: Option<f64>,
    /// Mean squared distance over pairs involving the last particle; `None`
    /// when the symmetry group moves the last particle.
    pub pair_last: Option<f64>,
    /// Squared distance between the last particle and the centre of mass of
    /// the others; `None` when the symmetry group moves the last particle.
    pub last_coordinate: Option<f64>,
}

/// Serializable per-state summary for run records.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct StateReport {
    /// State index within the solved spectrum.
    pub state: usize,
    /// Variational energy.
    pub energy: f64,
    /// Mean squared distance of a particle from the centre of mass.
    pub mean_square_radius: f64,
    /// Nearest-neighbour distance estimate derived from the radius.
    pub nearest_neighbour_radius: f64,
    /// Mean squared pair distance over all pairs.
    pub pair_mean_square: f64,
    /// Mean squared pair distance among the first `n - 1` particles.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pair_mean_square_core: Option<f64>,
    /// Mean squared pair distance between the last particle and the rest.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pair_mean_square_last: Option<f64>,
    /// Squared distance of the last particle from the core centre of mass.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub last_coordinate_msd: Option<f64>,
}

/// Core-plus-one-particle reading of two radii.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct HaloDecomposition {
    /// Squared halo radius: the weighted squared separation between the
    /// attached particle and the core, as it enters the radius budget.
    pub r2_halo: f64,
    /// Reduced mass of the particle-core relative motion.
    pub reduced_mass: f64,
    /// Two-body halo binding estimate `hbar^2 / (4 mu r2)`.
    pub binding: f64,
}

fn checked_state(ens: &BasisEnsemble, state: usize) -> Result<(), ObservableError> {
    let rank = ens.red().rank();
    if state >= rank {
        return Err(ObservableError::NoSuchState { state, rank });
    }
    let energy = ens.energies()[state];
    if !(energy < 0.0) {
        return Err(ObservableError::UnboundState { state, energy });
    }
    Ok(())
}

/// Mean squared distance of a particle from the centre of mass, from the
/// cached moment matrix. Errors if the state is missing or not bound.
pub fn mean_square_radius(ens: &BasisEnsemble, state: usize) -> Result<f64, ObservableError> {
    checked_state(ens, state)?;
    let c = ens.red().state(state);
    let gram = ens.gram();
    let mut norm = 0.0;
    for i in 0..c.len() {
        for j in 0..c.len() {
            norm += c[i] * c[j] * gram[(i, j)];
        }
    }
    Ok(ens.msr_expectation(state) / norm)
}

/// Nearest-neighbour distance estimate for `n` particles from the mean
/// squared radius, assuming a uniform drop: `sqrt(5/3 <r^2>) / n^(1/3)`.
pub fn nearest_neighbour_radius(mean_square_radius: f64, n: usize) -> f64 {
    (5.0 / 3.0 * mean_square_radius).sqrt() / (n as f64).cbrt()
}

/// All quadratic moments of one state in a single pass over the basis.
///
/// The species-resolved entries (`pair_core`, `pair_last`,
/// `last_coordinate`) are populated only when the symmetry group fixes the
/// last particle, which is when the one-sided symmetrised elements for them
/// are exact.
pub fn state_moments(ens: &BasisEnsemble, state: usize) -> Result<StateMoments, ObservableError> {
    checked_state(ens, state)?;
    let engine = ens.engine();
    let n = engine.n_particles();
    let functions = ens.functions();
    let scales = ens.scales();
    let c = ens.red().state(state);
    let split_valid = engine.group().n_sym() < n;

    let mut norm = 0.0;
    let mut msr = 0.0;
    let mut pair_all = 0.0;
    let mut pair_last = 0.0;
    let mut last_coord = 0.0;
    for p in 0..functions.len() {
        for q in p..functions.len() {
            let block = engine.moment_block(&functions[p], &functions[q])?;
            let count = if q > p { 2.0 } else { 1.0 };
            let weight = count * c[p] * c[q] * scales[p] * scales[q];
            norm += weight * block.s;
            msr += weight * block.msr;
            pair_all += weight * block.pair_all;
            pair_last += weight * block.pair_last;
            last_coord += weight * block.last_coord;
        }
    }
    assert!(norm.is_finite() && norm > 0.0, "state norm must be positive");

    let n_pairs = engine.n_pairs() as f64;
    let n_last = (n - 1) as f64;
    let n_core = n_pairs - n_last;
    let (pair_core, pair_last, last_coordinate) = if split_valid {
        let core = if n_core > 0.0 {
            Some((pair_all - pair_last) / (n_core * norm))
        } else {
            None
        };
        (
            core,
            Some(pair_last / (n_last * norm)),
            Some(last_coord / norm),
        )
    } else {
        (None, None, None)
    };
    Ok(StateMoments {
        norm,
        msr: msr / norm,
        pair_all: pair_all / (n_pairs * norm),
        pair_core,
        pair_last,
        last_coordinate,
    })
}

/// Bundle energy and moments of one state into a serialisable report.
pub fn state_report(ens: &BasisEnsemble, state: usize) -> Result<StateReport, ObservableError> {
    let moments = state_moments(ens, state)?;
    let n = ens.engine().n_particles();
    Ok(StateReport {
        state,
        energy: ens.energies()[state],
        mean_square_radius: moments.msr,
        nearest_neighbour_radius: nearest_neighbour_radius(moments.msr, n),
        pair_mean_square: moments.pair_all,
        pair_mean_square_core: moments.pair_core,
        pair_mean_square_last: moments.pair_last,
        last_coordinate_msd: moments.last_coordinate,
    })
}

/// Read two radii as a core of `n - 1` particles plus one attached particle.
///
/// The radius budget of the full system splits as
/// `n <r^2>_n = (n - 1) <r^2>_core + r2_halo`, which defines the squared
/// halo radius; the matching binding estimate for a long exponential tail of
/// the relative motion is `hbar^2 / (4 mu r2_halo)` with `mu` the reduced
/// mass of particle and core. All particles carry `particle_mass`.
pub fn halo_decompose(
    n: usize,
    msr_full: f64,
    msr_core: f64,
    particle_mass: f64,
) -> Result<HaloDecomposition, ObservableError> {
    assert!(n >= 2, "halo decomposition needs at least two particles");
    let r2_halo = n as f64 * msr_full - (n - 1) as f64 * msr_core;
    if r2_halo <= 0.0 {
        return Err(ObservableError::NegativeHalo { value: r2_halo });
    }
    let core_mass = (n - 1) as f64 * particle_mass;
    let reduced_mass = particle_mass * core_mass / (particle_mass + core_mass);
    Ok(HaloDecomposition {
        r2_halo,
        reduced_mass,
        binding: HBAR * HBAR / (4.0 * reduced_mass * r2_halo),
    })
}

/// Inverse of [`halo_decompose`]: rebuild the full-system radius from the
/// core radius and the squared halo radius.
pub fn halo_compose(n: usize, msr_core: f64, r2_halo: f64) -> f64 {
    ((n - 1) as f64 * msr_core + r2_halo) / n as f64
}

/// Expectation value of the particle exchange `swap` in the given state.
///
/// For a fully symmetric state this is `+1`; a deficit measures how much
/// bosonic symmetry the restricted symmetrisation failed to capture. The
/// basis carries a one-sided group sum, so the two-sided expectation reduces
/// to a sum over the distinct products `g1 * t * g2`, each entering with the
/// same multiplicity; a swap already inside the group gives exactly `+1`.
pub fn transposition_expectation(
    ens: &BasisEnsemble,
    state: usize,
    swap: (usize, usize),
) -> Result<f64, ObservableError> {
    let rank = ens.red().rank();
    if state >= rank {
        return Err(ObservableError::NoSuchState { state, rank });
    }
    let engine = ens.engine();
    let functions = ens.functions();
    let scales = ens.scales();
    let c = ens.red().state(state);
    let maps = engine.exchange_coset_maps(swap);

    let mut numerator = 0.0;
    for p in 0..functions.len() {
        // The coset is closed under inversion, so its overlap sum is
        // symmetric in bra and ket.
        for q in p..functions.len() {
            let sum = engine.mapped_overlap_sum(&functions[p], &functions[q], &maps)?;
            let count = if q > p { 2.0 } else { 1.0 };
            numerator += count * c[p] * c[q] * scales[p] * scales[q] * sum;
        }
    }

    let gram = ens.gram();
    let mut norm = 0.0;
    for i in 0..c.len() {
        for j in 0..c.len() {
            norm += c[i] * c[j] * gram[(i, j)];
        }
    }
    let multiplicity = maps.len() as f64 / engine.group_order() as f64;
    Ok(numerator / (multiplicity * norm))
}

#[cfg(test)]
mod tests {
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::sync::LazyLock;

    use super::*;
    use crate::svm::{solve, SolveReport, SvmConfig};
    use crate::system::{PairPotential, SystemSpec, WidthConvention};

    /// Three identical particles solved with only the first two symmetrised,
    /// so the species-resolved moments and the exchange diagnostic both have
    /// something nontrivial to check.
    static TRIMER_SUBGROUP: LazyLock<(BasisEnsemble, SolveReport)> = LazyLock::new(|| {
        let spec = SystemSpec::identical(3, PairPotential::new(-6.0, 1.0, WidthConvention::R2OverB2)).expect("spec");
        let cfg = SvmConfig {
            basis_max: 140,
            convergence_tol: 1e-9,
            patience: 40,
            seed: 11,
            refinement_sweeps: 1,
            n_sym: Some(2),
            ..SvmConfig::default()
        };
        solve(&spec, &cfg).expect("solve")
    });

    #[test]
    fn pair_identity_holds_for_identical_particles() {
        // For equal masses the summed pair form is an exact multiple of the
        // radius form, so mean pair distance over mean square radius is
        // 2 n / (n - 1) entry by entry, regardless of convergence.
        for (n, v0, basis) in [(3usize, -6.0, 40), (4usize, -8.0, 30)] {
            let spec = SystemSpec::identical(n, PairPotential::new(v0, 1.0, WidthConvention::R2OverB2)).expect("spec");
            let cfg = SvmConfig {
                basis_max: basis,
                convergence_tol: 1e-7,
                patience: 15,
                seed: 3,
                refinement_sweeps: 0,
                ..SvmConfig::default()
            };
            let (ens, _) = solve(&spec, &cfg).expect("solve");
            let moments = state_moments(&ens, 0).expect("moments");
            let expected = 2.0 * n as f64 / (n - 1) as f64;
            assert_relative_eq!(moments.pair_all / moments.msr, expected, max_relative = 1e-10);
            // The cheap cached radius agrees with the full pass.
            let msr = mean_square_radius(&ens, 0).expect("radius");
            assert_relative_eq!(msr, moments.msr, max_relative = 1e-10);
        }
    }

    #[test]
    fn unbound_states_are_refused() {
        let spec = SystemSpec::identical(2, PairPotential::new(-4.0, 1.0, WidthConvention::R2OverB2)).expect("spec");
        let cfg = SvmConfig {
            basis_max: 40,
            convergence_tol: 1e-8,
            patience: 15,
            seed: 5,
            refinement_sweeps: 0,
            ..SvmConfig::default()
        };
        let (ens, _) = solve(&spec, &cfg).expect("solve");
        // This depth binds exactly one state; the next variational level is a
        // discretised continuum state at positive energy.
        assert!(ens.red().rank() >= 2);
        assert!(matches!(
            mean_square_radius(&ens, 1),
            Err(ObservableError::UnboundState { state: 1, .. })
        ));
        assert!(matches!(
            state_moments(&ens, 99),
            Err(ObservableError::NoSuchState { state: 99, .. })
        ));
    }

    #[test]
    fn species_split_coincides_for_equal_masses() {
        // All three particles are identical, but the basis only symmetrises
        // the first two; the converged ground state must still treat every
        // pair the same.
        let (ens, _) = &*TRIMER_SUBGROUP;
        let moments = state_moments(ens, 0).expect("moments");
        let core = moments.pair_core.expect("core pairs");
        let last = moments.pair_last.expect("last pairs");
        assert_relative_eq!(core, last, max_relative = 5e-4);
        assert_relative_eq!(
            moments.pair_all,
            (core + 2.0 * last) / 3.0,
            max_relative = 1e-10
        );
        // Last-coordinate moment: distance to the core centre of mass. For
        // equal masses r13^2 + r23^2 = 2 y^2 + r12^2 / 2.
        let y2 = moments.last_coordinate.expect("last coordinate");
        assert_relative_eq!(2.0 * last, 2.0 * y2 + core / 2.0, max_relative = 5e-4);

        // A full-group run has no distinct last particle to resolve.
        let spec = SystemSpec::identical(3, PairPotential::new(-6.0, 1.0, WidthConvention::R2OverB2)).expect("spec");
        let cfg = SvmConfig {
            basis_max: 30,
            convergence_tol: 1e-6,
            patience: 10,
            seed: 4,
            refinement_sweeps: 0,
            ..SvmConfig::default()
        };
        let (full, _) = solve(&spec, &cfg).expect("solve");
        let full_moments = state_moments(&full, 0).expect("moments");
        assert!(full_moments.pair_core.is_none());
        assert!(full_moments.pair_last.is_none());
        assert!(full_moments.last_coordinate.is_none());
    }

    #[test]
    fn exchange_diagnostic_confirms_bosonic_ground_state() {
        let (ens, _) = &*TRIMER_SUBGROUP;
        // A swap inside the symmetrised set is exact by construction.
        let inside = transposition_expectation(ens, 0, (0, 1)).expect("inside swap");
        assert_relative_eq!(inside, 1.0, max_relative = 1e-10);
        // A swap touching the unsymmetrised particle is only approximate,
        // but the variational ground state of identical bosons converges to
        // the symmetric one.
        let outside = transposition_expectation(ens, 0, (0, 2)).expect("outside swap");
        assert!(
            outside > 0.995 && outside <= 1.0 + 1e-9,
            "exchange expectation {outside} should approach +1"
        );
    }

    #[test]
    fn halo_decomposition_round_trips() {
        let n = 3;
        let msr_core = 871.0;
        let r2_halo = 7.7e3;
        let msr_full = halo_compose(n, msr_core, r2_halo);
        let halo = halo_decompose(n, msr_full, msr_core, 1.0).expect("halo");
        assert_relative_eq!(halo.r2_halo, r2_halo, max_relative = 1e-12);
        assert_relative_eq!(halo.reduced_mass, 2.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(
            halo.binding,
            1.0 / (4.0 * (2.0 / 3.0) * r2_halo),
            max_relative = 1e-12
        );
        // A "halo" more compact than its core is refused.
        assert!(matches!(
            halo_decompose(3, 1.0, 10.0, 1.0),
            Err(ObservableError::NegativeHalo { .. })
        ));
    }

    #[test]
    fn nearest_neighbour_radius_matches_hand_value() {
        assert_abs_diff_eq!(
            nearest_neighbour_radius(43.6, 3),
            (5.0 / 3.0 * 43.6f64).sqrt() / 3f64.cbrt(),
            epsilon = 1e-12
        );
        assert_relative_eq!(
            nearest_neighbour_radius(43.6, 3),
            5.9105,
            max_relative = 1e-4
        );
    }
}
