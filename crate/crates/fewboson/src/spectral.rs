//! Generalized symmetric eigenproblem with incremental one-column growth.
//!
//! The variational basis is non-orthogonal, so energies come from
//! `H c = E S c` with both matrices symmetric and `S` positive definite up to
//! rounding. [`solve_generalized`] projects out numerically null directions of
//! `S` and returns a [`ReducedEigen`]: a coefficient map `W` with
//! `W' S W = I` and `W' H W = diag(E)`.
//!
//! Growing the basis by one function does not need a fresh factorisation.
//! Orthonormalising the newcomer against `W` turns the enlarged problem into
//! a symmetric arrowhead matrix whose spectrum solves a one-dimensional
//! secular equation between consecutive old eigenvalues. [`BorderedCandidate`]
//! evaluates just the eigenvalue a growth step targets (so scoring one random
//! trial is cheap), and [`BorderedCandidate::apply`] folds the winner into an
//! updated `ReducedEigen`. Rounding drift from long update chains is bounded
//! by periodic full re-solves on the caller's side.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Errors raised by the eigenproblem layer.
#[derive(Debug, thiserror::Error)]
pub enum SpectralError {
    /// Every overlap eigenvalue sits at or below the null-space floor.
    #[error("overlap matrix is numerically rank deficient")]
    RankDeficient,
    /// Dimensions of `H`, `S` or a column disagree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Relative overlap-eigenvalue floor below which a direction counts as null.
///
/// Healthy bases keep their smallest overlap eigenvalue near the square of
/// the linear-dependence floor (about `4e-6`), so this cutoff only matters
/// on bases with collective near-dependence. It must stay low: raising it
/// makes a full re-solve truncate marginal directions that the incremental
/// updates legitimately used, which shows up as small upward steps in the
/// recorded energy history. Runaway amplification through near-null
/// directions is caught upstream by the solver's chain-consistency check
/// and its rigorous energy floor on trial functions.
const NULL_SPACE_FLOOR: f64 = 1e-12;

/// Reject a trial function whose orthogonal remainder norm (relative to its
/// own overlap-normalised size) falls below this. The bordered corner energy
/// divides cancellation noise by the squared remainder norm, so the floor
/// keeps that amplification at or below the 1e-9 level.
const LINEAR_DEPENDENCE_FLOOR: f64 = 2e-3;

/// Drop secular-equation terms with border coupling below this relative to
/// the spectral scale; such poles keep their eigenvalue unchanged.
const DEFLATION_FLOOR: f64 = 1e-15;

/// Solved spectrum of `H c = E S c` on the retained subspace.
#[derive(Clone, Debug)]
pub struct ReducedEigen {
    /// Basis-to-eigenstate coefficient map, one column per retained state,
    /// overlap-orthonormal: `W' S W = I`.
    w: DMatrix<f64>,
    /// Eigenvalues in ascending order, one per column of `w`.
    energies: Vec<f64>,
}

impl ReducedEigen {
    /// Spectrum of an empty basis.
    pub fn empty() -> Self {
        Self {
            w: DMatrix::zeros(0, 0),
            energies: Vec::new(),
        }
    }

    /// Number of basis functions behind the solve.
    pub fn basis_len(&self) -> usize {
        self.w.nrows()
    }

    /// Number of retained states.
    pub fn rank(&self) -> usize {
        self.energies.len()
    }

    /// Ascending eigenvalues.
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Coefficient vector of one state in the (scaled) basis.
    pub fn state(&self, index: usize) -> DVector<f64> {
        self.w.column(index).into_owned()
    }

    /// Coefficient map with overlap-orthonormal columns.
    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }
}

/// Solve the generalized problem from scratch.
///
/// Directions of `S` with eigenvalue at or below `1e-12` times the largest
/// are projected out; when that removes every direction the problem is
/// reported rank deficient.
pub fn solve_generalized(
    h: &DMatrix<f64>,
    s: &DMatrix<f64>,
) -> Result<ReducedEigen, SpectralError> {
    let n = s.nrows();
    if s.ncols() != n || h.nrows() != n || h.ncols() != n {
        return Err(SpectralError::DimensionMismatch(format!(
            "H is {}x{}, S is {}x{}",
            h.nrows(),
            h.ncols(),
            n,
            s.ncols()
        )));
    }
    if n == 0 {
        return Ok(ReducedEigen::empty());
    }
    let overlap_eigen = SymmetricEigen::new(s.clone());
    let sigma_max = overlap_eigen
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if !(sigma_max > 0.0) {
        return Err(SpectralError::RankDeficient);
    }
    let floor = NULL_SPACE_FLOOR * sigma_max;
    let kept: Vec<usize> = (0..n)
        .filter(|&i| overlap_eigen.eigenvalues[i] > floor)
        .collect();
    if kept.is_empty() {
        return Err(SpectralError::RankDeficient);
    }
    // X maps the overlap metric to the identity: X' S X = I.
    let mut x = DMatrix::zeros(n, kept.len());
    for (col, &i) in kept.iter().enumerate() {
        let scale = overlap_eigen.eigenvalues[i].sqrt().recip();
        x.column_mut(col)
            .copy_from(&(overlap_eigen.eigenvectors.column(i) * scale));
    }
    let mut reduced = x.transpose() * h * &x;
    // Harden symmetry so the inner solve sees an exactly symmetric input.
    for i in 0..reduced.nrows() {
        for j in 0..i {
            let v = 0.5 * (reduced[(i, j)] + reduced[(j, i)]);
            reduced[(i, j)] = v;
            reduced[(j, i)] = v;
        }
    }
    let inner = SymmetricEigen::new(reduced);
    let mut order: Vec<usize> = (0..kept.len()).collect();
    order.sort_by(|&a, &b| inner.eigenvalues[a].total_cmp(&inner.eigenvalues[b]));
    let mut w = DMatrix::zeros(n, kept.len());
    let mut energies = Vec::with_capacity(kept.len());
    for (col, &i) in order.iter().enumerate() {
        w.column_mut(col)
            .copy_from(&(&x * inner.eigenvectors.column(i)));
        energies.push(inner.eigenvalues[i]);
    }
    Ok(ReducedEigen { w, energies })
}

/// One trial function bordered against a solved spectrum.
///
/// Construction orthonormalises the trial against the eigenstates; eigenvalue
/// queries then solve the arrowhead secular equation, and [`Self::apply`]
/// rebuilds the enlarged coefficient map for an accepted trial.
pub struct BorderedCandidate {
    /// Eigenvalues the trial was bordered against (secular poles).
    poles: Vec<f64>,
    /// Overlap of the trial with each eigenstate.
    stilde: DVector<f64>,
    /// Coupling of the orthonormalised remainder to each eigenstate.
    g: DVector<f64>,
    /// Diagonal energy of the orthonormalised remainder.
    gamma: f64,
    /// Norm of the remainder after projecting onto the eigenstates.
    beta: f64,
}

impl BorderedCandidate {
    /// Border a trial function against `red`.
    ///
    /// `s_col` and `h_col` hold the trial's overlap and Hamiltonian entries
    /// against the current basis; `s_nn` and `h_nn` are its diagonal entries.
    /// Returns `None` when the trial lies too close to the span of the basis
    /// (orthogonal remainder below `2e-3` of the trial's size, where rounding
    /// would poison the bordered energies) or when any derived quantity fails
    /// to stay finite.
    pub fn new(
        red: &ReducedEigen,
        s_col: &DVector<f64>,
        h_col: &DVector<f64>,
        s_nn: f64,
        h_nn: f64,
    ) -> Option<Self> {
        assert_eq!(s_col.len(), red.basis_len());
        assert_eq!(h_col.len(), red.basis_len());
        if !(s_nn > 0.0) || !s_nn.is_finite() || !h_nn.is_finite() {
            return None;
        }
        let stilde = red.w.transpose() * s_col;
        let htilde = red.w.transpose() * h_col;
        let beta_sq = s_nn - stilde.norm_squared();
        if !(beta_sq > (LINEAR_DEPENDENCE_FLOOR * LINEAR_DEPENDENCE_FLOOR) * s_nn) {
            return None;
        }
        let beta = beta_sq.sqrt();
        let rank = red.rank();
        let mut g = DVector::zeros(rank);
        let mut gamma = h_nn;
        for i in 0..rank {
            g[i] = (htilde[i] - red.energies[i] * stilde[i]) / beta;
            gamma += red.energies[i] * stilde[i] * stilde[i] - 2.0 * stilde[i] * htilde[i];
        }
        gamma /= beta_sq;
        if !gamma.is_finite() || !g.iter().all(|v| v.is_finite()) {
            return None;
        }
        Some(Self {
            poles: red.energies.clone(),
            stilde,
            g,
            gamma,
            beta,
        })
    }

    /// Eigenvalue at `target` of the enlarged problem.
    ///
    /// The enlarged spectrum has one more state than the old one, and its
    /// values interlace the old ones, so the query reduces to one root search
    /// between consecutive poles. `target` may not exceed the old rank.
    pub fn target_energy(&self, target: usize) -> f64 {
        let r = self.poles.len();
        assert!(target <= r, "target {target} beyond enlarged rank {}", r + 1);
        let scale = self.spectral_scale();
        let lower = if target == 0 {
            self.lower_bound()
        } else {
            self.poles[target - 1]
        };
        let upper = if target < r {
            self.poles[target]
        } else {
            self.upper_bound()
        };
        self.root_in(lower, upper, target == 0, target == r, scale)
    }

    /// All eigenvalues of the enlarged problem, ascending.
    pub fn full_spectrum(&self) -> Vec<f64> {
        (0..=self.poles.len())
            .map(|t| self.target_energy(t))
            .collect()
    }

    /// Fold the accepted trial into the spectrum, returning the enlarged
    /// `ReducedEigen` (`red` must be the spectrum the trial was bordered
    /// against; basis length and rank both grow by one).
    pub fn apply(&self, red: &ReducedEigen) -> ReducedEigen {
        assert_eq!(red.rank(), self.poles.len(), "spectrum changed since bordering");
        let n = red.basis_len();
        let r = red.rank();
        let energies = self.full_spectrum();
        // Orthonormal-coordinate basis: old eigenstates, then the remainder
        // direction u = (trial - projections) / beta, expressed over the
        // enlarged function basis.
        let mut u = DVector::zeros(n + 1);
        let proj = &red.w * &self.stilde;
        for i in 0..n {
            u[i] = -proj[i] / self.beta;
        }
        u[n] = 1.0 / self.beta;
        let scale = self.spectral_scale();
        let mut w = DMatrix::zeros(n + 1, r + 1);
        for (col, &lambda) in energies.iter().enumerate() {
            // Arrowhead eigenvector: head g_i / (lambda - e_i), tail 1.
            // An eigenvalue that stuck to a deflated pole keeps the old
            // eigenstate instead.
            let mut head = DVector::zeros(r);
            let mut tail = 1.0;
            let mut stuck = usize::MAX;
            for i in 0..r {
                let gap = lambda - self.poles[i];
                if gap.abs() <= 10.0 * f64::EPSILON * scale {
                    stuck = i;
                    break;
                }
                if self.g[i].abs() > DEFLATION_FLOOR * scale {
                    head[i] = self.g[i] / gap;
                }
            }
            if stuck != usize::MAX {
                head.fill(0.0);
                head[stuck] = 1.0;
                tail = 0.0;
            }
            let norm = (head.norm_squared() + tail * tail).sqrt();
            let mut column = w.column_mut(col);
            for i in 0..r {
                if head[i] != 0.0 {
                    let coeff = head[i] / norm;
                    for row in 0..n {
                        column[row] += coeff * red.w[(row, i)];
                    }
                }
            }
            if tail != 0.0 {
                let coeff = tail / norm;
                for row in 0..=n {
                    column[row] += coeff * u[row];
                }
            }
        }
        ReducedEigen { w, energies }
    }

    /// Secular function `gamma - x + sum_i g_i^2 / (x - e_i)`, strictly
    /// decreasing between consecutive poles.
    fn secular(&self, x: f64, scale: f64) -> f64 {
        let mut f = self.gamma - x;
        for i in 0..self.poles.len() {
            if self.g[i].abs() <= DEFLATION_FLOOR * scale {
                continue;
            }
            f += self.g[i] * self.g[i] / (x - self.poles[i]);
        }
        f
    }

    fn spectral_scale(&self) -> f64 {
        let mut s = self.gamma.abs().max(1.0);
        for &v in &self.poles {
            s = s.max(v.abs());
        }
        s
    }

    /// Safe lower bound on the smallest enlarged eigenvalue.
    fn lower_bound(&self) -> f64 {
        let base = self
            .poles
            .first()
            .map_or(self.gamma, |&e0| e0.min(self.gamma));
        base - self.g.norm() - 1.0
    }

    /// Safe upper bound on the largest enlarged eigenvalue.
    fn upper_bound(&self) -> f64 {
        let base = self
            .poles
            .last()
            .map_or(self.gamma, |&et| et.max(self.gamma));
        base + self.g.norm() + 1.0
    }

    /// Root of the secular function in `(lower, upper)` by bisection.
    ///
    /// `open_lower` / `open_upper` mark endpoints that are outer bounds
    /// rather than poles. At a pole endpoint with a deflated coupling the
    /// eigenvalue collapses onto the pole, which the sign probes detect.
    fn root_in(
        &self,
        lower: f64,
        upper: f64,
        open_lower: bool,
        open_upper: bool,
        scale: f64,
    ) -> f64 {
        debug_assert!(upper >= lower);
        let gap = (upper - lower).max(f64::EPSILON * scale);
        let delta = gap * 1e-13;
        let mut lo = if open_lower { lower } else { lower + delta };
        let mut hi = if open_upper { upper } else { upper - delta };
        if hi <= lo {
            // Poles pinch the interval shut; the eigenvalue is squeezed.
            return 0.5 * (lower + upper);
        }
        // The secular function falls from +inf at a live left pole to -inf
        // at a live right pole; probes at the offsets catch deflated ends.
        if self.secular(lo, scale) <= 0.0 {
            return if open_lower { lo } else { lower };
        }
        if self.secular(hi, scale) >= 0.0 {
            return if open_upper { hi } else { upper };
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if !(mid > lo && mid < hi) {
                break;
            }
            if self.secular(mid, scale) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}
