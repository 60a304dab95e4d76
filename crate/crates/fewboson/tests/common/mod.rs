//! Shared fixtures for the integration suite: the half-exponent table
//! conventions, solver shortcuts, and quadrature oracles that check the
//! closed-form Gaussian matrix elements against direct numerical
//! integration.
#![allow(dead_code)]

use fewboson::elements::{ElementEngine, PairKernel};
use fewboson::observables::{self, StateReport};
use fewboson::radial::RadialConfig;
use fewboson::svm::{self, HistoryPoint, SolveFlag, SvmConfig};
use fewboson::system::{pairs, PairPotential, SystemSpec, WidthConvention};
use fewboson::HBAR;

/// Suite frame: full-exponent pair potential `v0 exp(-r^2/b^2)` with
/// `b = 1` and unit mass, so the characteristic energy is 1.
///
/// The published reference rows quote the same physical family through a
/// half-exponent range `b_h = b / sqrt(2)` and the two-body energy scale
/// built on it. Working in this frame, reference comparisons use:
/// depths and energies divided by [`ES`], squared radii multiplied by
/// [`R2`], linear distances multiplied by sqrt(2), and two-body scattering
/// lengths compared directly (the reference tables quote those against the
/// full-exponent range; the dimer-threshold calibration check pins this
/// down).
pub fn base_pot(v0: f64) -> PairPotential {
    PairPotential::new(v0, 1.0, WidthConvention::R2OverB2)
}

/// Identical-boson system in the suite frame.
pub fn base_spec(n: usize, v0: f64) -> SystemSpec {
    SystemSpec::identical(n, base_pot(v0)).expect("valid system")
}

/// Reference energy/depth unit in this frame: `hbar^2/(2 mu b_h^2) = 2`.
pub const ES: f64 = 2.0;

/// Squared radii in reference units are ours times this (`1/b_h^2 = 2`).
pub const R2: f64 = 2.0;

/// Linear distances in reference units are ours times this (`1/b_h`).
pub const RD: f64 = std::f64::consts::SQRT_2;

/// Shared radial-solver configuration.
pub fn radial_cfg() -> RadialConfig {
    RadialConfig::default()
}

/// Solver configuration used by the acceptance runs.
pub fn run_cfg(
    states: usize,
    basis_max: usize,
    patience: usize,
    seed: u64,
    threshold_mode: bool,
) -> SvmConfig {
    SvmConfig {
        target_states: states,
        basis_max,
        patience,
        convergence_tol: 1e-7,
        refinement_sweeps: 2,
        seed,
        threshold_mode,
        ..SvmConfig::default()
    }
}

/// One solved point: targeted energies plus per-state reports.
pub struct SolvedPoint {
    pub energies: Vec<f64>,
    pub reports: Vec<Option<StateReport>>,
    pub basis_size: usize,
    pub history: Vec<HistoryPoint>,
    pub flags: Vec<SolveFlag>,
}

/// Solve `n` identical bosons at depth `v0` in the suite frame.
pub fn solve_states(n: usize, v0: f64, cfg: &SvmConfig) -> SolvedPoint {
    let spec = base_spec(n, v0);
    let (ens, report) = svm::solve(&spec, cfg).expect("solver run");
    let reports = (0..cfg.target_states)
        .map(|s| observables::state_report(&ens, s).ok())
        .collect();
    SolvedPoint {
        energies: report.energies,
        reports,
        basis_size: report.basis_size,
        history: ens.history().to_vec(),
        flags: report.flags,
    }
}

// ------------------------------------------------------------ quadrature

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut rule = Vec::with_capacity(n);
    for i in 0..n {
        // Tricomi-style initial guess for the i-th root
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            // p = P_n(x), dp = P_n'(x) via the three-term recurrence
            let (mut p0, mut p1) = (1.0_f64, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0_f64, x);
        for k in 2..=n {
            let kf = k as f64;
            let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.push((x, w));
    }
    rule
}

/// Map a [-1, 1] rule onto [0, upper].
fn mapped(rule: &[(f64, f64)], upper: f64) -> Vec<(f64, f64)> {
    rule.iter().map(|&(x, w)| (0.5 * upper * (x + 1.0), 0.5 * upper * w)).collect()
}

/// Stable `exp(-e) * int_{-1}^{1} exp(-s t) dt`; both `e ± s` stay bounded
/// for positive-definite quadratic forms.
fn t_moment0(s: f64, e: f64) -> f64 {
    if s.abs() < 1e-2 {
        (2.0 + s * s / 3.0 + s.powi(4) / 60.0) * (-e).exp()
    } else {
        ((s - e).exp() - (-s - e).exp()) / s
    }
}

/// Stable `exp(-e) * int_{-1}^{1} t exp(-s t) dt`.
fn t_moment1(s: f64, e: f64) -> f64 {
    if s.abs() < 1e-2 {
        (-2.0 * s / 3.0 - s * s * s / 15.0 - s.powi(5) / 420.0) * (-e).exp()
    } else {
        let plus = (s - e).exp();
        let minus = (-s - e).exp();
        ((plus - minus) - s * (plus + minus)) / (s * s)
    }
}

/// Independent two-body element ratios by radial quadrature.
///
/// For single-coordinate Gaussians `exp(-a r^2 / 2)` the claims under test
/// are the kinetic and potential-shape elements relative to the overlap;
/// the shared coordinate-volume constant cancels in these ratios (and in
/// the eigenproblem).
pub struct DimerOracle {
    pub t_over_s: f64,
    pub p_over_s: f64,
}

pub fn dimer_quadrature_oracle(
    a_bra: f64,
    a_ket: f64,
    lambda: f64,
    w_pair: f64,
    width_sq: f64,
) -> DimerOracle {
    let c = a_bra + a_ket;
    let upper = 14.0 / (0.5 * c).sqrt();
    let rule = mapped(&gauss_legendre(240), upper);
    let (mut s, mut t, mut p) = (0.0, 0.0, 0.0);
    for &(r, w) in &rule {
        let gauss = (-0.5 * c * r * r).exp();
        s += w * r * r * gauss;
        // grad(bra) . grad(ket) = a_bra a_ket r^2 * bra ket
        t += w * r * r * (a_bra * a_ket * r * r) * gauss;
        p += w * r * r * (-(w_pair * r).powi(2) / width_sq).exp() * gauss;
    }
    DimerOracle { t_over_s: 0.5 * HBAR * HBAR * lambda * t / s, p_over_s: p / s }
}

/// Independent three-body element ratios by reduced quadrature: the two
/// Jacobi radii are integrated numerically, the relative angle analytically.
pub struct TrimerOracle {
    pub t_over_s: f64,
    pub p_over_s: f64,
    /// Symmetrised overlap over the identity-image overlap.
    pub sym_over_direct: f64,
}

/// 2x2 symmetric quadratic forms assembled from per-pair strengths.
fn form_from_alphas(alphas: &[f64], w_pairs: &[[f64; 2]]) -> [[f64; 2]; 2] {
    let mut m = [[0.0; 2]; 2];
    for (alpha, w) in alphas.iter().zip(w_pairs) {
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] += alpha * w[i] * w[j];
            }
        }
    }
    m
}

/// Quadrature for `int r^2 rho^2 [c_0 + c_rr r^2 + c_pp rho^2] F0
///  + c_rp r rho * r rho F1` against `exp(-1/2 q' M q)`; `F0`, `F1` are the
/// analytic angle moments.
struct Reduced2d {
    rule: Vec<(f64, f64)>,
}

impl Reduced2d {
    fn new(m_min: f64) -> Self {
        let upper = 16.0 / (0.5 * m_min).sqrt();
        Reduced2d { rule: mapped(&gauss_legendre(96), upper) }
    }

    /// `int r^2 rho^2 (c0 + crr r^2 + cpp rho^2) F0 + crp r^2 rho^2 ... F1`
    fn integrate(&self, m: &[[f64; 2]; 2], c0: f64, crr: f64, cpp: f64, crp: f64) -> f64 {
        let mut total = 0.0;
        for &(r, wr) in &self.rule {
            for &(rho, wp) in &self.rule {
                let e = 0.5 * (m[0][0] * r * r + m[1][1] * rho * rho);
                let s = m[0][1] * r * rho;
                let base = r * r * rho * rho * wr * wp;
                let poly = c0 + crr * r * r + cpp * rho * rho;
                total += base * (poly * t_moment0(s, e) + crp * r * rho * t_moment1(s, e));
            }
        }
        total
    }
}

fn add_scaled_outer(m: &[[f64; 2]; 2], w: &[f64; 2], scale: f64) -> [[f64; 2]; 2] {
    let mut out = *m;
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] += scale * w[i] * w[j];
        }
    }
    out
}

fn min_diag(ms: &[[[f64; 2]; 2]]) -> f64 {
    ms.iter().flat_map(|m| [m[0][0], m[1][1]]).fold(f64::INFINITY, f64::min)
}

pub fn trimer_quadrature_oracle(
    bra_alphas: &[f64; 3],
    ket_alphas: &[f64; 3],
    spec: &SystemSpec,
) -> TrimerOracle {
    let frame = spec.jacobi().expect("frame");
    let w_pairs: Vec<[f64; 2]> =
        frame.pair_vectors.iter().map(|v| [v[0], v[1]]).collect();
    let lambda = [frame.inverse_mass[0], frame.inverse_mass[1]];
    let width_sq = spec.potential.width_sq();
    let a = form_from_alphas(bra_alphas, &w_pairs);

    // image of the ket under each particle relabelling: pair (i, j) moves to
    // (g(i), g(j)), so its strength lands on that pair's slot
    let pair_list = pairs(3);
    let pair_index = |i: usize, j: usize| -> usize {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        pair_list.iter().position(|&p| p == (i, j)).expect("pair")
    };
    let perms: [[usize; 3]; 6] =
        [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut images = Vec::new();
    for perm in &perms {
        let mut moved = [0.0; 3];
        for (p, &(i, j)) in pair_list.iter().enumerate() {
            moved[pair_index(perm[i], perm[j])] = ket_alphas[p];
        }
        images.push(form_from_alphas(&moved, &w_pairs));
    }

    let sums: Vec<[[f64; 2]; 2]> = images.iter().map(|b| {
        let mut m = *b;
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] += a[i][j];
            }
        }
        m
    }).collect();
    let mut inserted = Vec::new();
    for m in &sums {
        for w in &w_pairs {
            inserted.push(add_scaled_outer(m, w, 2.0 / width_sq));
        }
    }
    let quad = Reduced2d::new(min_diag(&sums).min(min_diag(&inserted)));

    let (mut s_sym, mut t_sym, mut p_sym) = (0.0, 0.0, 0.0);
    let mut s_direct = 0.0;
    for (g, b) in images.iter().enumerate() {
        let m = &sums[g];
        let s_g = quad.integrate(m, 1.0, 0.0, 0.0, 0.0);
        if g == 0 {
            s_direct = s_g;
        }
        s_sym += s_g;
        // grad(bra) . Lambda grad(ket) couples the coordinates through
        // x_j . x_l in {r^2, rho^2, r rho cos}
        let crr = lambda[0] * a[0][0] * b[0][0] + lambda[1] * a[1][0] * b[1][0];
        let cpp = lambda[0] * a[0][1] * b[0][1] + lambda[1] * a[1][1] * b[1][1];
        let crp = lambda[0] * (a[0][0] * b[0][1] + a[0][1] * b[0][0])
            + lambda[1] * (a[1][0] * b[1][1] + a[1][1] * b[1][0]);
        t_sym += 0.5 * HBAR * HBAR * quad.integrate(m, 0.0, crr, cpp, crp);
        for w in &w_pairs {
            let m_ins = add_scaled_outer(m, w, 2.0 / width_sq);
            p_sym += quad.integrate(&m_ins, 1.0, 0.0, 0.0, 0.0);
        }
    }
    TrimerOracle {
        t_over_s: t_sym / s_sym,
        p_over_s: p_sym / s_sym,
        sym_over_direct: s_sym / s_direct,
    }
}

/// Engine-side ratios for the same bra/ket, from the closed-form kernels.
pub struct EngineRatios {
    pub t_over_s: f64,
    pub p_over_s: f64,
    pub sym_over_direct: f64,
}

pub fn engine_ratios(spec: &SystemSpec, bra: &[f64], ket: &[f64]) -> EngineRatios {
    let engine = ElementEngine::new(spec, spec.n_total).expect("engine");
    let fb = engine.make_function(bra.to_vec());
    let fk = engine.make_function(ket.to_vec());
    let block = engine.hamiltonian_block(&fb, &fk).expect("block");
    let direct = PairKernel::new(fb.mat(), &fk.images()[0]).expect("kernel").overlap();
    EngineRatios {
        t_over_s: block.t / block.s,
        p_over_s: block.p / block.s,
        sym_over_direct: block.s / direct,
    }
}
