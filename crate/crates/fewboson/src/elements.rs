//! Closed-form matrix elements for correlated Gaussian basis functions.
//!
//! A basis function carries one positive strength per particle pair,
//! `psi(r) = exp(-1/2 sum_{i<j} alpha_ij |r_i - r_j|^2)`. In the internal
//! Jacobi coordinates `x` of a [`crate::system::JacobiFrame`] this is a
//! centred Gaussian
//! `exp(-1/2 x' (A (x) I3) x)` with the positive-definite parameter matrix
//! `A = sum_{i<j} alpha_ij w_ij w_ij'` built from the frame's pair vectors.
//! Overlaps, kinetic energies, Gaussian pair interactions and quadratic
//! position moments between two such functions all reduce to dense linear
//! algebra on `C = A + B`, evaluated here with stack-allocated matrices and a
//! hand-rolled Cholesky factorisation sized for at most seven coordinates.
//!
//! Bosonic exchange symmetry is imposed by summing ket images over a
//! permutation group of the interchangeable particles (one-sided
//! symmetrisation; the Hamiltonian commutes with the group, so symmetrising
//! one side is enough). Each basis function caches its permuted parameter
//! matrices so a group sum costs one kernel evaluation per group element.

use rand::Rng;

use crate::system::{pairs, SystemError, SystemSpec, MAX_PARTICLES};
use crate::HBAR;

/// Maximum number of internal Jacobi coordinates (`MAX_PARTICLES - 1`).
pub const MAX_COORDS: usize = MAX_PARTICLES - 1;

/// Relative pivot floor below which a Gram matrix counts as numerically
/// singular and the offending candidate is rejected.
const PIVOT_FLOOR: f64 = 1e-14;

/// Errors raised while evaluating matrix elements.
#[derive(Debug, thiserror::Error)]
pub enum ElementError {
    /// `A + B` lost positive definiteness to rounding; the pairing is too
    /// ill-conditioned to use.
    #[error("gram matrix numerically singular; basis function pairing rejected")]
    IllConditioned,
    /// Requested permutation group does not fit the species pattern.
    #[error("cannot symmetrise {n_sym} particles of a system that only has {limit} interchangeable ones")]
    BadSymmetrization { n_sym: usize, limit: usize },
    /// Underlying coordinate-frame failure.
    #[error(transparent)]
    System(#[from] SystemError),
}

/// Dense symmetric matrix on the internal coordinates, stored inline.
///
/// Only the leading `d x d` block is meaningful; `d` never exceeds
/// [`MAX_COORDS`], so values stay on the stack and copies are cheap.
#[derive(Clone, Copy, Debug)]
pub struct SmallMat {
    d: usize,
    a: [[f64; MAX_COORDS]; MAX_COORDS],
}

impl SmallMat {
    /// Zero matrix of dimension `d`.
    pub fn zeros(d: usize) -> Self {
        assert!(d >= 1 && d <= MAX_COORDS, "dimension {d} out of range");
        Self {
            d,
            a: [[0.0; MAX_COORDS]; MAX_COORDS],
        }
    }

    /// Matrix dimension.
    pub fn dim(&self) -> usize {
        self.d
    }

    /// Entry accessor.
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i][j]
    }

    /// Entry mutator.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.a[i][j] = value;
    }

    /// Rank-one update `self += scale * w w'` over the leading block.
    pub fn add_outer(&mut self, w: &[f64], scale: f64) {
        for i in 0..self.d {
            let wi = scale * w[i];
            for j in 0..self.d {
                self.a[i][j] += wi * w[j];
            }
        }
    }

    /// Entry-wise sum of two matrices of equal dimension.
    pub fn sum(lhs: &SmallMat, rhs: &SmallMat) -> SmallMat {
        debug_assert_eq!(lhs.d, rhs.d);
        let mut out = SmallMat::zeros(lhs.d);
        for i in 0..lhs.d {
            for j in 0..lhs.d {
                out.a[i][j] = lhs.a[i][j] + rhs.a[i][j];
            }
        }
        out
    }

    /// Accumulate `scale * other` into `self`.
    pub fn add_scaled(&mut self, other: &SmallMat, scale: f64) {
        debug_assert_eq!(self.d, other.d);
        for i in 0..self.d {
            for j in 0..self.d {
                self.a[i][j] += scale * other.a[i][j];
            }
        }
    }

    /// Largest diagonal entry.
    fn max_diag(&self) -> f64 {
        let mut m = 0.0f64;
        for i in 0..self.d {
            m = m.max(self.a[i][i].abs());
        }
        m
    }
}

/// Cholesky factorisation `M = L L'` of a small symmetric positive-definite
/// matrix, with solves and an explicit inverse.
pub struct SmallChol {
    d: usize,
    l: [[f64; MAX_COORDS]; MAX_COORDS],
}

impl SmallChol {
    /// Factorise `m`, returning `None` when a pivot falls at or below the
    /// conditioning floor `1e-14 * max_diag`.
    pub fn new(m: &SmallMat) -> Option<Self> {
        let d = m.d;
        let floor = PIVOT_FLOOR * m.max_diag();
        if !(floor > 0.0) {
            return None;
        }
        let mut l = [[0.0; MAX_COORDS]; MAX_COORDS];
        for i in 0..d {
            for j in 0..=i {
                let mut s = m.a[i][j];
                for k in 0..j {
                    s -= l[i][k] * l[j][k];
                }
                if i == j {
                    if !(s > floor) {
                        return None;
                    }
                    l[i][i] = s.sqrt();
                } else {
                    l[i][j] = s / l[j][j];
                }
            }
        }
        Some(Self { d, l })
    }

    /// `ln det M`, accumulated from the factor diagonal.
    pub fn log_det(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.d {
            s += self.l[i][i].ln();
        }
        2.0 * s
    }

    /// Solve `M y = b` for one right-hand side.
    pub fn solve(&self, b: &[f64]) -> [f64; MAX_COORDS] {
        let d = self.d;
        let mut y = [0.0; MAX_COORDS];
        for i in 0..d {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[i][k] * y[k];
            }
            y[i] = s / self.l[i][i];
        }
        for i in (0..d).rev() {
            let mut s = y[i];
            for k in (i + 1)..d {
                s -= self.l[k][i] * y[k];
            }
            y[i] = s / self.l[i][i];
        }
        y
    }

    /// Quadratic form `w' M^-1 w`, via one forward substitution.
    pub fn inv_quad(&self, w: &[f64]) -> f64 {
        let d = self.d;
        let mut y = [0.0; MAX_COORDS];
        let mut q = 0.0;
        for i in 0..d {
            let mut s = w[i];
            for k in 0..i {
                s -= self.l[i][k] * y[k];
            }
            y[i] = s / self.l[i][i];
            q += y[i] * y[i];
        }
        q
    }

    /// Explicit inverse, built column by column.
    pub fn inverse(&self) -> SmallMat {
        let d = self.d;
        let mut out = SmallMat::zeros(d);
        let mut e = [0.0; MAX_COORDS];
        for j in 0..d {
            e[j] = 1.0;
            let col = self.solve(&e);
            e[j] = 0.0;
            for i in 0..d {
                out.a[i][j] = col[i];
            }
        }
        // Harden symmetry against rounding so downstream traces stay clean.
        for i in 0..d {
            for j in 0..i {
                let v = 0.5 * (out.a[i][j] + out.a[j][i]);
                out.a[i][j] = v;
                out.a[j][i] = v;
            }
        }
        out
    }
}

/// All closed-form integrals between one bra and one ket parameter matrix.
///
/// Built once per (bra, ket image) pairing from `C = A + B`; every matrix
/// element is then a cheap contraction against the cached `C^-1`.
pub struct PairKernel {
    d: usize,
    overlap: f64,
    cinv: SmallMat,
}

impl PairKernel {
    /// Factorise `C = bra + ket`; `None` when the sum is numerically singular.
    pub fn new(bra: &SmallMat, ket: &SmallMat) -> Option<Self> {
        let c = SmallMat::sum(bra, ket);
        let chol = SmallChol::new(&c)?;
        let d = c.d;
        let log_overlap = 1.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() - chol.log_det());
        Some(Self {
            d,
            overlap: log_overlap.exp(),
            cinv: chol.inverse(),
        })
    }

    /// Plain overlap `((2 pi)^d / det C)^(3/2)`.
    pub fn overlap(&self) -> f64 {
        self.overlap
    }

    /// Kinetic energy `(3 hbar^2 / 2) sum_k lambda_k (B - B C^-1 B)_kk` times
    /// the overlap, with `lambda_k` the inverse reduced masses of the frame.
    pub fn kinetic(&self, ket: &SmallMat, lambda: &[f64]) -> f64 {
        let d = self.d;
        // m = C^-1 B, then (B C^-1 B)_kk = sum_j B_kj m_jk.
        let mut trace = 0.0;
        for k in 0..d {
            let mut corr = 0.0;
            for j in 0..d {
                let mut m_jk = 0.0;
                for l in 0..d {
                    m_jk += self.cinv.a[j][l] * ket.a[l][k];
                }
                corr += ket.a[k][j] * m_jk;
            }
            trace += lambda[k] * (ket.a[k][k] - corr);
        }
        1.5 * HBAR * HBAR * trace * self.overlap
    }

    /// Relative-separation variance `c = w' C^-1 w` for the pair whose
    /// separation is `w' x`.
    pub fn pair_correlation(&self, w: &[f64]) -> f64 {
        let mut q = 0.0;
        for i in 0..self.d {
            let mut s = 0.0;
            for j in 0..self.d {
                s += self.cinv.a[i][j] * w[j];
            }
            q += w[i] * s;
        }
        q
    }

    /// Matrix element of a unit-depth Gaussian `exp(-r^2 / width_sq)` acting
    /// on the pair separation `r = |w' x|`.
    pub fn gaussian_pair(&self, w: &[f64], width_sq: f64) -> f64 {
        let c = self.pair_correlation(w);
        let ratio = width_sq / (width_sq + 2.0 * c);
        ratio.powf(1.5) * self.overlap
    }

    /// Matrix element of the squared pair separation, `3 c` times the overlap.
    pub fn pair_sq_moment(&self, w: &[f64]) -> f64 {
        3.0 * self.pair_correlation(w) * self.overlap
    }

    /// Matrix element of a general quadratic form `x' (F (x) I3) x`, equal to
    /// `3 Tr(F C^-1)` times the overlap.
    pub fn quadratic_moment(&self, form: &SmallMat) -> f64 {
        let mut trace = 0.0;
        for i in 0..self.d {
            for j in 0..self.d {
                trace += form.a[i][j] * self.cinv.a[j][i];
            }
        }
        3.0 * trace * self.overlap
    }
}

/// Permutations of the interchangeable particles, with their action on pairs.
///
/// The group permutes particles `0..n_sym-1` and fixes the rest; element `0`
/// is always the identity. For every element the map from pair index to image
/// pair index is tabulated once, so applying the group to a basis function is
/// a gather over its per-pair strengths.
pub struct SymmetryGroup {
    n_sym: usize,
    perms: Vec<Vec<usize>>,
    pair_maps: Vec<Vec<usize>>,
}

impl SymmetryGroup {
    /// Group permuting the first `n_sym` of `n` particles (identity first, in
    /// lexicographic order).
    pub fn new(n: usize, n_sym: usize) -> Self {
        assert!(n_sym >= 1 && n_sym <= n);
        let mut head: Vec<usize> = (0..n_sym).collect();
        let mut perms = Vec::new();
        loop {
            let mut full: Vec<usize> = head.clone();
            full.extend(n_sym..n);
            perms.push(full);
            if !next_permutation(&mut head) {
                break;
            }
        }
        let pair_maps = perms
            .iter()
            .map(|p| Self::pair_map_for(p, n))
            .collect();
        Self {
            n_sym,
            perms,
            pair_maps,
        }
    }

    /// Number of group elements, `n_sym!`.
    pub fn order(&self) -> usize {
        self.perms.len()
    }

    /// Number of particles the group actually permutes.
    pub fn n_sym(&self) -> usize {
        self.n_sym
    }

    /// Particle-index maps, identity first.
    pub fn perms(&self) -> &[Vec<usize>] {
        &self.perms
    }

    /// Pair-index maps matching [`SymmetryGroup::perms`].
    pub fn pair_maps(&self) -> &[Vec<usize>] {
        &self.pair_maps
    }

    /// Image of each lexicographic pair index under a particle permutation.
    pub fn pair_map_for(perm: &[usize], n: usize) -> Vec<usize> {
        let index = pair_index_table(n);
        pairs(n)
            .iter()
            .map(|&(i, j)| {
                let (a, b) = (perm[i], perm[j]);
                index[a.min(b)][a.max(b)]
            })
            .collect()
    }
}

/// Lexicographic pair index lookup: `table[i][j]` for `i < j`.
fn pair_index_table(n: usize) -> Vec<Vec<usize>> {
    let mut table = vec![vec![usize::MAX; n]; n];
    for (idx, &(i, j)) in pairs(n).iter().enumerate() {
        table[i][j] = idx;
    }
    table
}

/// Advance `seq` to its next lexicographic permutation; `false` after the last.
fn next_permutation(seq: &mut [usize]) -> bool {
    let n = seq.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && seq[i - 1] >= seq[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while seq[j] <= seq[i - 1] {
        j -= 1;
    }
    seq.swap(i - 1, j);
    seq[i..].reverse();
    true
}

/// One correlated Gaussian basis function.
///
/// Stores the per-pair strengths, the assembled parameter matrix, and its
/// image under every element of the engine's permutation group (identity
/// first), so symmetrised matrix elements never rebuild matrices.
#[derive(Clone, Debug)]
pub struct CorrelatedGaussian {
    alphas: Vec<f64>,
    images: Vec<SmallMat>,
}

impl CorrelatedGaussian {
    /// Per-pair strengths in lexicographic pair order.
    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    /// Parameter matrix on the internal coordinates.
    pub fn mat(&self) -> &SmallMat {
        &self.images[0]
    }

    /// Parameter matrix transformed by each group element.
    pub fn images(&self) -> &[SmallMat] {
        &self.images
    }
}

/// Symmetrised overlap, kinetic and potential-shape entries for one bra-ket
/// pairing. The potential entry is per unit depth, so the Hamiltonian entry
/// for depth `v0` is `t + v0 * p`.
#[derive(Clone, Copy, Debug, Default)]
pub struct HsBlock {
    /// Overlap.
    pub s: f64,
    /// Kinetic energy.
    pub t: f64,
    /// Summed Gaussian pair shape per unit depth.
    pub p: f64,
}

impl HsBlock {
    /// Hamiltonian entry at pair-potential depth `v0`.
    pub fn hamiltonian(&self, v0: f64) -> f64 {
        self.t + v0 * self.p
    }
}

/// Symmetrised quadratic position moments for one bra-ket pairing.
///
/// Every entry carries the same one-sided group sum as [`HsBlock`], so
/// expectation values are coefficient contractions divided by the norm.
/// The one-sided shortcut is exact only for operators that commute with the
/// symmetrisation group: `msr` and `pair_all` always do, while `pair_last`
/// and `last_coord` single out the last particle and are only valid when the
/// group fixes it (`n_sym < n`), which is the regime where a distinct last
/// particle makes them worth reading in the first place.
#[derive(Clone, Copy, Debug, Default)]
pub struct MomentBlock {
    /// Overlap.
    pub s: f64,
    /// Mean of `<(r_i - R_cm)^2>` over the particles.
    pub msr: f64,
    /// Sum of `<r_ij^2>` over all pairs.
    pub pair_all: f64,
    /// Sum of `<r_ij^2>` over pairs that include the last particle.
    pub pair_last: f64,
    /// `<x_d^2>` for the last Jacobi coordinate: squared distance between the
    /// last particle and the centre of mass of the others.
    pub last_coord: f64,
}

/// Matrix-element engine for one system: coordinate frame, permutation group,
/// pair geometry and potential shape, all precomputed.
pub struct ElementEngine {
    d: usize,
    n: usize,
    lambda: Vec<f64>,
    pair_w: Vec<[f64; MAX_COORDS]>,
    pair_ww: Vec<SmallMat>,
    msr_form: SmallMat,
    last_form: SmallMat,
    width_sq: f64,
    group: SymmetryGroup,
}

impl ElementEngine {
    /// Build an engine symmetrising the first `n_sym` particles.
    ///
    /// For a system with a distinct light particle, `n_sym` may cover the
    /// identical heavy ones only (`n - 1` at most).
    pub fn new(spec: &SystemSpec, n_sym: usize) -> Result<Self, ElementError> {
        let limit = if spec.has_light() {
            spec.n_total - 1
        } else {
            spec.n_total
        };
        if n_sym < 1 || n_sym > limit {
            return Err(ElementError::BadSymmetrization { n_sym, limit });
        }
        let frame = spec.jacobi()?;
        let d = frame.dim();
        let n = spec.n_total;
        let pair_list = pairs(n);
        let mut pair_w = Vec::with_capacity(pair_list.len());
        let mut pair_ww = Vec::with_capacity(pair_list.len());
        for w in &frame.pair_vectors {
            let mut arr = [0.0; MAX_COORDS];
            for k in 0..d {
                arr[k] = w[k];
            }
            let mut outer = SmallMat::zeros(d);
            outer.add_outer(&arr[..d], 1.0);
            pair_w.push(arr);
            pair_ww.push(outer);
        }
        let mut msr_form = SmallMat::zeros(d);
        for q in &frame.one_body_vectors {
            let mut arr = [0.0; MAX_COORDS];
            for k in 0..d {
                arr[k] = q[k];
            }
            msr_form.add_outer(&arr[..d], 1.0 / n as f64);
        }
        let mut last_form = SmallMat::zeros(d);
        last_form.set(d - 1, d - 1, 1.0);
        Ok(Self {
            d,
            n,
            lambda: frame.inverse_mass.clone(),
            pair_w,
            pair_ww,
            msr_form,
            last_form,
            width_sq: spec.potential.width_sq(),
            group: SymmetryGroup::new(n, n_sym),
        })
    }

    /// Number of internal coordinates.
    pub fn dim(&self) -> usize {
        self.d
    }

    /// Number of particles.
    pub fn n_particles(&self) -> usize {
        self.n
    }

    /// Number of particle pairs.
    pub fn n_pairs(&self) -> usize {
        self.pair_w.len()
    }

    /// Order of the symmetrisation group.
    pub fn group_order(&self) -> usize {
        self.group.order()
    }

    /// The symmetrisation group itself.
    pub fn group(&self) -> &SymmetryGroup {
        &self.group
    }

    /// Assemble a basis function from per-pair strengths, caching its group
    /// images. Strengths must be positive and match the pair count.
    pub fn make_function(&self, alphas: Vec<f64>) -> CorrelatedGaussian {
        assert_eq!(alphas.len(), self.n_pairs(), "one strength per pair");
        assert!(
            alphas.iter().all(|a| a.is_finite() && *a > 0.0),
            "pair strengths must be positive"
        );
        let images = self
            .group
            .pair_maps()
            .iter()
            .map(|map| {
                let mut m = SmallMat::zeros(self.d);
                for (p, &alpha) in alphas.iter().enumerate() {
                    m.add_scaled(&self.pair_ww[map[p]], alpha);
                }
                m
            })
            .collect();
        CorrelatedGaussian { alphas, images }
    }

    /// Symmetrised overlap, kinetic and potential-shape entries.
    pub fn hamiltonian_block(
        &self,
        bra: &CorrelatedGaussian,
        ket: &CorrelatedGaussian,
    ) -> Result<HsBlock, ElementError> {
        let a = bra.mat();
        let mut out = HsBlock::default();
        for image in ket.images() {
            let kernel = PairKernel::new(a, image).ok_or(ElementError::IllConditioned)?;
            out.s += kernel.overlap();
            out.t += kernel.kinetic(image, &self.lambda);
            for w in &self.pair_w {
                out.p += kernel.gaussian_pair(&w[..self.d], self.width_sq);
            }
        }
        Ok(out)
    }

    /// Symmetrised quadratic position moments.
    pub fn moment_block(
        &self,
        bra: &CorrelatedGaussian,
        ket: &CorrelatedGaussian,
    ) -> Result<MomentBlock, ElementError> {
        let a = bra.mat();
        let mut out = MomentBlock::default();
        for image in ket.images() {
            let kernel = PairKernel::new(a, image).ok_or(ElementError::IllConditioned)?;
            out.s += kernel.overlap();
            out.msr += kernel.quadratic_moment(&self.msr_form);
            out.last_coord += kernel.quadratic_moment(&self.last_form);
            for (p, w) in self.pair_w.iter().enumerate() {
                let m = kernel.pair_sq_moment(&w[..self.d]);
                out.pair_all += m;
                let (i, j) = pairs(self.n)[p];
                if j == self.n - 1 || i == self.n - 1 {
                    out.pair_last += m;
                }
            }
        }
        Ok(out)
    }

    /// Symmetrised overlap with an extra transposition `(i, j)` applied after
    /// each group element, `sum_g <bra | P_ij g ket>`. Against the plain
    /// overlap this measures how well a state honours an exchange the group
    /// does not already enforce.
    pub fn transposition_overlap(
        &self,
        bra: &CorrelatedGaussian,
        ket: &CorrelatedGaussian,
        swap: (usize, usize),
    ) -> Result<f64, ElementError> {
        assert!(swap.0 < self.n && swap.1 < self.n && swap.0 != swap.1);
        let mut perm: Vec<usize> = (0..self.n).collect();
        perm.swap(swap.0, swap.1);
        let tmap = SymmetryGroup::pair_map_for(&perm, self.n);
        let a = bra.mat();
        let mut total = 0.0;
        for gmap in self.group.pair_maps() {
            let mut image = SmallMat::zeros(self.d);
            for (p, &alpha) in ket.alphas().iter().enumerate() {
                image.add_scaled(&self.pair_ww[tmap[gmap[p]]], alpha);
            }
            let kernel = PairKernel::new(a, &image).ok_or(ElementError::IllConditioned)?;
            total += kernel.overlap();
        }
        Ok(total)
    }

    /// Pair maps of the distinct products `g1 * t * g2` over the group, for a
    /// transposition `t = (i, j)` outside the group.
    ///
    /// When both sides of a matrix element carry the group sum, an inserted
    /// exchange turns the double sum into this double coset with uniform
    /// multiplicity, so expectation values of the exchange only need one
    /// overlap per coset element ([`Self::mapped_overlap_sum`]).
    pub fn exchange_coset_maps(&self, swap: (usize, usize)) -> Vec<Vec<usize>> {
        assert!(swap.0 < self.n && swap.1 < self.n && swap.0 != swap.1);
        let mut t: Vec<usize> = (0..self.n).collect();
        t.swap(swap.0, swap.1);
        let mut seen = std::collections::BTreeSet::new();
        for g1 in self.group.perms() {
            for g2 in self.group.perms() {
                let composed: Vec<usize> = (0..self.n).map(|i| g1[t[g2[i]]]).collect();
                seen.insert(composed);
            }
        }
        seen.iter()
            .map(|perm| SymmetryGroup::pair_map_for(perm, self.n))
            .collect()
    }

    /// Sum of overlaps of `bra` against `ket` transformed by each supplied
    /// pair map.
    pub fn mapped_overlap_sum(
        &self,
        bra: &CorrelatedGaussian,
        ket: &CorrelatedGaussian,
        maps: &[Vec<usize>],
    ) -> Result<f64, ElementError> {
        let a = bra.mat();
        let mut total = 0.0;
        for map in maps {
            let mut image = SmallMat::zeros(self.d);
            for (p, &alpha) in ket.alphas().iter().enumerate() {
                image.add_scaled(&self.pair_ww[map[p]], alpha);
            }
            let kernel = PairKernel::new(a, &image).ok_or(ElementError::IllConditioned)?;
            total += kernel.overlap();
        }
        Ok(total)
    }
}

/// Default symmetrisation width for a system: every interchangeable particle
/// when the group stays small, the largest proper subgroup for five or six
/// identical particles, and none beyond that (group sums grow factorially).
pub fn default_n_sym(spec: &SystemSpec) -> usize {
    if spec.has_light() {
        spec.n_total - 1
    } else if spec.n_total <= 4 {
        spec.n_total
    } else if spec.n_total <= 6 {
        spec.n_total - 1
    } else {
        1
    }
}

/// Draw per-pair strengths `alpha = 1 / d^2` with the pair scale `d` sampled
/// log-uniformly from `[d_min, d_max]`.
pub fn sample_alphas<R: Rng>(rng: &mut R, n_pairs: usize, d_min: f64, d_max: f64) -> Vec<f64> {
    assert!(d_min > 0.0 && d_max > d_min);
    let (lo, hi) = (d_min.ln(), d_max.ln());
    (0..n_pairs)
        .map(|_| {
            let scale = rng.random_range(lo..hi).exp();
            1.0 / (scale * scale)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{PairPotential, WidthConvention};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identical_spec(n: usize) -> SystemSpec {
        SystemSpec::identical(n, PairPotential::new(-2.0, 1.0, WidthConvention::R2OverB2))
            .expect("valid spec")
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn cholesky_solves_and_inverts() {
        let mut rng = rng(7);
        for d in 1..=MAX_COORDS {
            // Random SPD matrix: G G' plus a diagonal shift.
            let mut g = SmallMat::zeros(d);
            for i in 0..d {
                for j in 0..d {
                    g.set(i, j, rng.random_range(-1.0..1.0));
                }
            }
            let mut spd = SmallMat::zeros(d);
            for i in 0..d {
                for j in 0..d {
                    let mut s = if i == j { 0.5 } else { 0.0 };
                    for k in 0..d {
                        s += g.at(i, k) * g.at(j, k);
                    }
                    spd.set(i, j, s);
                }
            }
            let chol = SmallChol::new(&spd).expect("SPD factorises");
            let b: Vec<f64> = (0..d).map(|i| (i as f64) - 1.3).collect();
            let mut bpad = [0.0; MAX_COORDS];
            bpad[..d].copy_from_slice(&b);
            let y = chol.solve(&bpad);
            for i in 0..d {
                let mut s = 0.0;
                for j in 0..d {
                    s += spd.at(i, j) * y[j];
                }
                assert_abs_diff_eq!(s, b[i], epsilon = 1e-9);
            }
            let inv = chol.inverse();
            for i in 0..d {
                for j in 0..d {
                    let mut s = 0.0;
                    for k in 0..d {
                        s += spd.at(i, k) * inv.at(k, j);
                    }
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(s, expect, epsilon = 1e-9);
                }
            }
            assert_relative_eq!(chol.inv_quad(&bpad), {
                let mut q = 0.0;
                for i in 0..d {
                    q += b[i] * y[i];
                }
                q
            });
        }
    }

    #[test]
    fn cholesky_rejects_singular() {
        let mut m = SmallMat::zeros(2);
        m.set(0, 0, 1.0);
        m.set(0, 1, 1.0);
        m.set(1, 0, 1.0);
        m.set(1, 1, 1.0);
        assert!(SmallChol::new(&m).is_none());
    }

    #[test]
    fn two_body_closed_forms_match_hand_values() {
        // Two equal unit masses: one Jacobi coordinate equal to the pair
        // separation, inverse reduced mass 2.
        let spec = identical_spec(2);
        let engine = ElementEngine::new(&spec, 1).expect("engine");
        let (alpha, beta) = (0.7, 1.9);
        let f = engine.make_function(vec![alpha]);
        let g = engine.make_function(vec![beta]);
        let block = engine.hamiltonian_block(&f, &g).expect("block");
        let c = alpha + beta;
        let ovl = (2.0 * std::f64::consts::PI / c).powf(1.5);
        assert_relative_eq!(block.s, ovl, max_relative = 1e-13);
        let kin = 3.0 * alpha * beta / c * ovl; // (3 hbar^2 / 2) * lambda * alpha beta / c
        assert_relative_eq!(block.t, kin, max_relative = 1e-13);
        // Unit-depth Gaussian with width^2 = b^2 = 1.
        let shape = (1.0 / (1.0 + 2.0 / c)).powf(1.5) * ovl;
        assert_relative_eq!(block.p, shape, max_relative = 1e-13);

        let moments = engine.moment_block(&f, &g).expect("moments");
        assert_relative_eq!(moments.pair_all, 3.0 / c * ovl, max_relative = 1e-13);
        // Equal masses: each particle sits half a separation from the centre.
        assert_relative_eq!(moments.msr, 0.75 / c * ovl, max_relative = 1e-13);
        assert_relative_eq!(moments.pair_last, moments.pair_all, max_relative = 1e-13);
    }

    #[test]
    fn gaussian_pair_matches_quadrature() {
        // Independent check of the interaction shape by direct radial
        // quadrature for the two-body system.
        let spec = identical_spec(2);
        let engine = ElementEngine::new(&spec, 1).expect("engine");
        let (alpha, beta) = (0.9, 0.35);
        let f = engine.make_function(vec![alpha]);
        let g = engine.make_function(vec![beta]);
        let block = engine.hamiltonian_block(&f, &g).expect("block");
        let c = alpha + beta;
        let r_max = 12.0 / c.sqrt();
        let steps = 4000;
        let h = r_max / steps as f64;
        let mut integral = 0.0;
        for k in 0..=steps {
            let r = k as f64 * h;
            let weight = if k == 0 || k == steps {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            integral += weight * r * r * (-0.5 * c * r * r - r * r).exp();
        }
        integral *= h / 3.0 * 4.0 * std::f64::consts::PI;
        assert_relative_eq!(block.p, integral, max_relative = 1e-8);
    }

    #[test]
    fn group_has_factorial_order_identity_first() {
        for n_sym in 1..=4 {
            let group = SymmetryGroup::new(5, n_sym);
            let expect: usize = (1..=n_sym).product();
            assert_eq!(group.order(), expect);
            assert_eq!(group.perms()[0], (0..5).collect::<Vec<_>>());
            let n_pairs = pairs(5).len();
            for map in group.pair_maps() {
                let mut seen = vec![false; n_pairs];
                for &q in map {
                    assert!(!seen[q], "pair map must be a bijection");
                    seen[q] = true;
                }
            }
        }
    }

    #[test]
    fn symmetrised_blocks_are_hermitian() {
        let spec = identical_spec(4);
        let engine = ElementEngine::new(&spec, 4).expect("engine");
        let mut rng = rng(11);
        let f = engine.make_function(sample_alphas(&mut rng, engine.n_pairs(), 0.3, 8.0));
        let g = engine.make_function(sample_alphas(&mut rng, engine.n_pairs(), 0.3, 8.0));
        let fg = engine.hamiltonian_block(&f, &g).expect("block");
        let gf = engine.hamiltonian_block(&g, &f).expect("block");
        assert_relative_eq!(fg.s, gf.s, max_relative = 1e-10);
        assert_relative_eq!(fg.t, gf.t, max_relative = 1e-10);
        assert_relative_eq!(fg.p, gf.p, max_relative = 1e-10);
        let mfg = engine.moment_block(&f, &g).expect("moments");
        let mgf = engine.moment_block(&g, &f).expect("moments");
        assert_relative_eq!(mfg.msr, mgf.msr, max_relative = 1e-10);
        assert_relative_eq!(mfg.pair_all, mgf.pair_all, max_relative = 1e-10);

        // The last-particle moments require a group that fixes the last
        // particle; with such a group they are hermitian as well.
        let sub = ElementEngine::new(&spec, 3).expect("engine");
        let fs = sub.make_function(f.alphas().to_vec());
        let gs = sub.make_function(g.alphas().to_vec());
        let mfg = sub.moment_block(&fs, &gs).expect("moments");
        let mgf = sub.moment_block(&gs, &fs).expect("moments");
        assert_relative_eq!(mfg.pair_last, mgf.pair_last, max_relative = 1e-10);
        assert_relative_eq!(mfg.last_coord, mgf.last_coord, max_relative = 1e-10);
    }

    #[test]
    fn group_relabelling_leaves_blocks_unchanged() {
        // Permuting a function's strengths by a group element relabels
        // interchangeable particles, so symmetrised elements must not move.
        let spec = identical_spec(4);
        let engine = ElementEngine::new(&spec, 4).expect("engine");
        let mut rng = rng(13);
        let alphas = sample_alphas(&mut rng, engine.n_pairs(), 0.5, 5.0);
        let probe = engine.make_function(sample_alphas(&mut rng, engine.n_pairs(), 0.5, 5.0));
        let f = engine.make_function(alphas.clone());
        let base = engine.hamiltonian_block(&probe, &f).expect("block");
        for map in engine.group().pair_maps().iter().skip(1) {
            let mut relabelled = vec![0.0; alphas.len()];
            for (p, &alpha) in alphas.iter().enumerate() {
                relabelled[map[p]] = alpha;
            }
            let g = engine.make_function(relabelled);
            let moved = engine.hamiltonian_block(&probe, &g).expect("block");
            assert_relative_eq!(base.s, moved.s, max_relative = 1e-10);
            assert_relative_eq!(base.t, moved.t, max_relative = 1e-10);
            assert_relative_eq!(base.p, moved.p, max_relative = 1e-10);
        }
    }

    #[test]
    fn pair_sum_matches_radius_form_for_equal_masses() {
        // For equal masses the summed pair form equals N^2 times the
        // mean-square-radius form, entry by entry.
        for n in 2..=6 {
            let spec = identical_spec(n);
            let engine = ElementEngine::new(&spec, 1).expect("engine");
            let mut total = SmallMat::zeros(engine.dim());
            for ww in &engine.pair_ww {
                total.add_scaled(ww, 1.0);
            }
            for i in 0..engine.dim() {
                for j in 0..engine.dim() {
                    assert_abs_diff_eq!(
                        total.at(i, j),
                        (n * n) as f64 * engine.msr_form.at(i, j),
                        epsilon = 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn transposition_inside_group_reproduces_overlap() {
        let spec = identical_spec(5);
        let engine = ElementEngine::new(&spec, 4).expect("engine");
        let mut rng = rng(17);
        let f = engine.make_function(sample_alphas(&mut rng, engine.n_pairs(), 0.4, 6.0));
        let g = engine.make_function(sample_alphas(&mut rng, engine.n_pairs(), 0.4, 6.0));
        let s_plain = engine.hamiltonian_block(&f, &g).expect("block").s;
        // A swap of two symmetrised particles only reorders the group sum.
        let s_twist = engine.transposition_overlap(&f, &g, (0, 2)).expect("overlap");
        assert_relative_eq!(s_plain, s_twist, max_relative = 1e-12);
        // A swap touching the unsymmetrised last particle genuinely differs.
        let s_out = engine.transposition_overlap(&f, &g, (0, 4)).expect("overlap");
        assert!((s_out - s_plain).abs() > 1e-6 * s_plain.abs());
    }

    #[test]
    fn exchange_coset_collapses_for_inside_swaps() {
        let spec = identical_spec(4);
        let engine = ElementEngine::new(&spec, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let f = engine.make_function(sample_alphas(&mut rng, engine.n_pairs(), 0.3, 5.0));
        let g = engine.make_function(sample_alphas(&mut rng, engine.n_pairs(), 0.3, 5.0));

        // A swap inside the symmetrised set: the coset is the group itself.
        let inside = engine.exchange_coset_maps((0, 1));
        assert_eq!(inside.len(), engine.group_order());
        let block = engine.hamiltonian_block(&f, &g).unwrap();
        let summed = engine.mapped_overlap_sum(&f, &g, &inside).unwrap();
        assert_relative_eq!(summed, block.s, max_relative = 1e-12);

        // A swap touching the unsymmetrised particle: n_sym! * n_sym elements.
        let outside = engine.exchange_coset_maps((0, 3));
        assert_eq!(outside.len(), 6 * 3);
    }

    #[test]
    fn light_particle_engine_checks_group_bounds() {
        let pot = PairPotential::new(-1.0, 1.0, WidthConvention::R2OverB2);
        let spec = SystemSpec::with_light(4, 0.5, pot).expect("spec");
        assert!(matches!(
            ElementEngine::new(&spec, 4),
            Err(ElementError::BadSymmetrization { .. })
        ));
        let engine = ElementEngine::new(&spec, 3).expect("engine");
        assert_eq!(engine.group_order(), 6);
        assert_eq!(default_n_sym(&spec), 3);
    }

    #[test]
    fn default_symmetrisation_widths() {
        assert_eq!(default_n_sym(&identical_spec(3)), 3);
        assert_eq!(default_n_sym(&identical_spec(4)), 4);
        assert_eq!(default_n_sym(&identical_spec(5)), 4);
        assert_eq!(default_n_sym(&identical_spec(6)), 5);
        assert_eq!(default_n_sym(&identical_spec(7)), 1);
        assert_eq!(default_n_sym(&identical_spec(8)), 1);
    }

    #[test]
    fn sampled_strengths_respect_scale_bounds() {
        let mut rng = rng(23);
        let alphas = sample_alphas(&mut rng, 200, 0.1, 50.0);
        for a in alphas {
            assert!(a >= 1.0 / (50.0f64 * 50.0) && a <= 1.0 / (0.1f64 * 0.1));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn blocks_stay_finite_and_signed(
            n in 2usize..=5,
            seed in 0u64..1_000_000,
        ) {
            let spec = identical_spec(n);
            let engine = ElementEngine::new(&spec, n).expect("engine");
            let mut rng = rng(seed);
            let f = engine.make_function(sample_alphas(&mut rng, engine.n_pairs(), 0.1, 50.0));
            let block = engine.hamiltonian_block(&f, &f).expect("block");
            prop_assert!(block.s.is_finite() && block.s > 0.0);
            prop_assert!(block.t.is_finite() && block.t > 0.0);
            prop_assert!(block.p.is_finite() && block.p > 0.0);
            prop_assert!(block.p < engine.n_pairs() as f64 * block.s);
            let moments = engine.moment_block(&f, &f).expect("moments");
            prop_assert!(moments.msr > 0.0);
            prop_assert!(moments.pair_all > 0.0);
            prop_assert!(moments.last_coord > 0.0);
        }

        #[test]
        fn log_det_matches_dense_determinant(
            d in 1usize..=MAX_COORDS,
            seed in 0u64..1_000_000,
        ) {
            let mut rng = rng(seed);
            let mut g = nalgebra::DMatrix::<f64>::zeros(d, d);
            for i in 0..d {
                for j in 0..d {
                    g[(i, j)] = rng.random_range(-1.0..1.0);
                }
            }
            let dense = &g * g.transpose() + nalgebra::DMatrix::<f64>::identity(d, d) * 0.3;
            let mut small = SmallMat::zeros(d);
            for i in 0..d {
                for j in 0..d {
                    small.set(i, j, dense[(i, j)]);
                }
            }
            let chol = SmallChol::new(&small).expect("SPD");
            prop_assert!((chol.log_det() - dense.determinant().ln()).abs() < 1e-8);
        }
    }
}
